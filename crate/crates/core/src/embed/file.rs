//! Precomputed vectors stored as `key<TAB>base64(f32 LE)` lines under a
//! `dims=<d> count=<n>` header. Keys escape tab, newline, CR and backslash.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;

use super::{check_vector, DenseVector, EmbedError, MultiVector, PairScorer, Role, TextEmbedder, TokenEmbedder};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorFile {
    pub dims: usize,
    keys: Vec<String>,
    values: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

fn escape(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for c in key.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(raw: &str) -> Option<String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

impl VectorFile {
    pub fn new(dims: usize) -> Self {
        VectorFile {
            dims,
            ..VectorFile::default()
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Adds or replaces an entry. Multivector entries are stored flattened, so
    /// the length only has to be a positive multiple of `dims`.
    pub fn insert(&mut self, key: impl Into<String>, values: Vec<f32>) -> Result<(), EmbedError> {
        if self.dims == 0 || values.is_empty() || values.len() % self.dims != 0 {
            return Err(EmbedError::DimsMismatch {
                expected: self.dims,
                got: values.len(),
            });
        }
        let key = key.into();
        match self.index.get(&key) {
            Some(&i) => self.values[i] = values,
            None => {
                self.index.insert(key.clone(), self.keys.len());
                self.keys.push(key);
                self.values.push(values);
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index.get(key).map(|&i| self.values[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.keys.iter().map(String::as_str).zip(self.values.iter().map(Vec::as_slice))
    }

    pub fn to_string_repr(&self) -> String {
        let mut out = format!("dims={} count={}\n", self.dims, self.len());
        for (k, v) in self.iter() {
            let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
            out.push_str(&escape(k));
            out.push('\t');
            out.push_str(&STANDARD.encode(bytes));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(path, self.to_string_repr()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, EmbedError> {
        let bad = |line: usize, message: String| EmbedError::Malformed {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let (dims, count) = parse_header(header).ok_or_else(|| bad(1, format!("bad header {header:?}")))?;
        if dims == 0 {
            return Err(bad(1, "dims must be positive".into()));
        }
        let mut file = VectorFile::new(dims);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.is_empty() {
                continue;
            }
            let (raw_key, b64) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(line_no, "expected key<TAB>vector".into()))?;
            let key = unescape(raw_key).ok_or_else(|| bad(line_no, "bad escape in key".into()))?;
            let bytes = STANDARD
                .decode(b64)
                .map_err(|e| bad(line_no, format!("bad base64: {e}")))?;
            if bytes.len() % 4 != 0 {
                return Err(bad(line_no, "vector byte length not a multiple of 4".into()));
            }
            let values: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if file.index.contains_key(&key) {
                return Err(bad(line_no, format!("duplicate key {key:?}")));
            }
            file.insert(key, values).map_err(|e| bad(line_no, e.to_string()))?;
        }
        if file.len() != count {
            return Err(bad(1, format!("header declares {count} entries, found {}", file.len())));
        }
        Ok(file)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut dims = None;
    let mut count = None;
    for part in line.split_whitespace() {
        match part.split_once('=')? {
            ("dims", v) => dims = Some(v.parse().ok()?),
            ("count", v) => count = Some(v.parse().ok()?),
            _ => return None,
        }
    }
    Some((dims?, count?))
}

fn io_err(path: &Path, source: std::io::Error) -> EmbedError {
    EmbedError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Looks vectors up by exact text.
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    file: VectorFile,
}

impl FileEmbedder {
    pub fn new(file: VectorFile) -> Result<Self, EmbedError> {
        for (_, v) in file.iter() {
            check_vector(v, file.dims)?;
        }
        Ok(FileEmbedder { file })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::new(VectorFile::load(path)?)
    }
}

impl TextEmbedder for FileEmbedder {
    fn dims(&self) -> usize {
        self.file.dims
    }

    fn embed_batch(&self, texts: &[&str], _role: Role) -> Result<Vec<DenseVector>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                self.file
                    .get(t)
                    .map(<[f32]>::to_vec)
                    .ok_or_else(|| EmbedError::MissingKey(t.to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FileTokenEmbedder {
    file: VectorFile,
}

impl FileTokenEmbedder {
    pub fn new(file: VectorFile) -> Result<Self, EmbedError> {
        if let Some((k, _)) = file.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            return Err(EmbedError::Protocol(format!("non-finite value stored for {k:?}")));
        }
        Ok(FileTokenEmbedder { file })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::new(VectorFile::load(path)?)
    }
}

impl TokenEmbedder for FileTokenEmbedder {
    fn dims(&self) -> usize {
        self.file.dims
    }

    fn embed_tokens_batch(&self, texts: &[&str], _role: Role) -> Result<Vec<MultiVector>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                let flat = self.file.get(t).ok_or_else(|| EmbedError::MissingKey(t.to_string()))?;
                Ok(flat.chunks_exact(self.file.dims).map(<[f32]>::to_vec).collect())
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct ScoreLine {
    query: String,
    passage: String,
    score: f64,
}

/// Precomputed cross-encoder scores from JSONL `{query, passage, score}`.
#[derive(Debug, Clone, Default)]
pub struct FilePairScorer {
    scores: HashMap<(String, String), f64>,
}

impl FilePairScorer {
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let lines: Vec<ScoreLine> = crate::jsonl::read_jsonl(path).map_err(|e| EmbedError::Malformed {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut scores = HashMap::new();
        for l in lines {
            if !l.score.is_finite() {
                return Err(EmbedError::Protocol(format!("non-finite score for {:?}", l.query)));
            }
            scores.insert((l.query, l.passage), l.score);
        }
        Ok(FilePairScorer { scores })
    }
}

impl PairScorer for FilePairScorer {
    fn score_batch(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>, EmbedError> {
        passages
            .iter()
            .map(|p| {
                self.scores
                    .get(&(query.to_string(), p.to_string()))
                    .copied()
                    .ok_or_else(|| EmbedError::MissingKey(format!("{query} / {p}")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_entries_bit_exact() {
        let mut f = VectorFile::new(3);
        f.insert("what is finacle?", vec![0.1, -0.0, f32::MIN_POSITIVE]).unwrap();
        f.insert("tab\there\nnew\\line", vec![1.0, 2.0, 3.0]).unwrap();
        let e = FileEmbedder::new(VectorFile::parse(&f.to_string_repr(), "mem").unwrap()).unwrap();
        let v = e.embed("what is finacle?", Role::Query).unwrap();
        assert_eq!(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), [0.1f32, -0.0, f32::MIN_POSITIVE].map(f32::to_bits));
        assert_eq!(e.embed("tab\there\nnew\\line", Role::Passage).unwrap(), vec![1.0, 2.0, 3.0]);
        match e.embed("unknown", Role::Query) {
            Err(EmbedError::MissingKey(k)) => assert_eq!(k, "unknown"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thousand_entries_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vec");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000);
        let mut f = VectorFile::new(16);
        for i in 0..1000 {
            let v: Vec<f32> = (0..16).map(|_| f32::from_bits(rng.gen::<u32>() & 0x7f7f_ffff)).collect();
            f.insert(format!("key {i}\t{}", i % 7), v).unwrap();
        }
        f.save(&path).unwrap();
        let back = VectorFile::load(&path).unwrap();
        assert_eq!(back.len(), 1000);
        for ((ka, va), (kb, vb)) in f.iter().zip(back.iter()) {
            assert_eq!(ka, kb);
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(va), bits(vb));
        }
    }

    #[test]
    fn malformed_files() {
        assert!(VectorFile::parse("", "m").is_err());
        assert!(VectorFile::parse("dims=2\n", "m").is_err());
        assert!(VectorFile::parse("dims=2 count=2\na\tAAAAAAAAAAA=\n", "m").is_err());
        // one float where two are declared
        let one = STANDARD.encode(1.0f32.to_le_bytes());
        let err = VectorFile::parse(&format!("dims=2 count=1\na\t{one}\n"), "m").unwrap_err();
        assert!(matches!(err, EmbedError::Malformed { line: 2, .. }), "{err}");
        let two = STANDARD.encode([1.0f32, 2.0].iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<_>>());
        assert!(VectorFile::parse(&format!("dims=2 count=1\na\t{two}\na\t{two}\n"), "m").is_err());
        assert!(VectorFile::parse(&format!("dims=2 count=2\na\t{two}\n"), "m").is_err());
    }

    #[test]
    fn token_file_reshapes() {
        let mut f = VectorFile::new(2);
        f.insert("doc", vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8]).unwrap();
        let e = FileTokenEmbedder::new(f).unwrap();
        let mv = e.embed_tokens("doc", Role::Passage).unwrap();
        assert_eq!(mv, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]);
    }

    #[test]
    fn dense_file_rejects_multivector_rows() {
        let mut f = VectorFile::new(2);
        f.insert("doc", vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(FileEmbedder::new(f).is_err());
    }

    #[test]
    fn score_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        fs::write(&p, "{\"query\":\"q\",\"passage\":\"a\",\"score\":0.5}\n{\"query\":\"q\",\"passage\":\"b\",\"score\":-1}\n").unwrap();
        let s = FilePairScorer::load(&p).unwrap();
        assert_eq!(s.score_batch("q", &["b", "a"]).unwrap(), vec![-1.0, 0.5]);
        assert!(s.score("q", "c").is_err());
    }
}
