//! Character-coordinate helpers. All provenance offsets in this crate are
//! counted in Unicode scalar values, never bytes.

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `n`-th character, or `s.len()` when `n` is past the end.
pub fn byte_offset(s: &str, n: usize) -> usize {
    s.char_indices().nth(n).map_or(s.len(), |(b, _)| b)
}

/// The first `n` characters of `s`.
pub fn char_prefix(s: &str, n: usize) -> &str {
    &s[..byte_offset(s, n)]
}

/// Characters `[start, end)` of `s`.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let a = byte_offset(s, start);
    let b = byte_offset(s, end);
    &s[a..b]
}

/// Character ranges of maximal non-whitespace runs.
pub fn word_ranges(s: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut idx = 0;
    for c in s.chars() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(idx),
            (true, Some(st)) => {
                out.push((st, idx));
                start = None;
            }
            _ => {}
        }
        idx += 1;
    }
    if let Some(st) = start {
        out.push((st, idx));
    }
    out
}
