use std::io::{self, Write};

use super::Chunk;

/// Token-count histogram with fixed-width bins starting at zero. Empty bins
/// below the largest observed count are included.
pub fn chunk_histogram(chunks: &[Chunk], bin_width: usize) -> Vec<(usize, usize)> {
    assert!(bin_width >= 1, "bin_width must be at least 1");
    let Some(max) = chunks.iter().map(|c| c.token_count).max() else {
        return Vec::new();
    };
    let mut counts = vec![0usize; max / bin_width + 1];
    for c in chunks {
        counts[c.token_count / bin_width] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, n)| (i * bin_width, n))
        .collect()
}

pub fn write_histogram_tsv<W: Write>(mut out: W, bins: &[(usize, usize)]) -> io::Result<()> {
    for (lower, count) in bins {
        writeln!(out, "{lower}\t{count}")?;
    }
    Ok(())
}
