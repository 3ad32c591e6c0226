"""Independent reference for clean_text: strip tags, fold to ASCII, normalize whitespace."""
import re
import sys
import unicodedata

raw = open(sys.argv[1], encoding="utf-8", newline="").read()
raw = raw.replace("\r\n", "\n").replace("\r", "\n")
# pass 1: strip tags
raw = re.sub(r"<!--.*?-->", " ", raw)
raw = re.sub(r"</?[A-Za-z!?][^<>]*>", " ", raw)
# pass 2: fold to ASCII
folded = "".join(
    ch for ch in unicodedata.normalize("NFKD", raw)
    if ord(ch) < 128 and (ch in "\t\n\x0b\x0c\r " or not unicodedata.category(ch).startswith("C"))
)
paras = re.split(r"\n[ \t\x0b\x0c]*\n\s*", folded)
paras = [" ".join(p.split()) for p in paras]
sys.stdout.write("\n\n".join(p for p in paras if p))
sys.stdout.write("\n")
