//! Word tokenization with character offsets.
//!
//! Offsets everywhere in this crate count Unicode scalar values, not bytes.

/// A lowercase word token and its `[start, end)` character range in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub norm: String,
    pub start: usize,
    pub end: usize,
}

/// Split on every non-alphanumeric character ("punctuation to space") and lowercase.
pub fn word_tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            if cur.is_empty() {
                start = i;
            }
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(Token {
                norm: std::mem::take(&mut cur),
                start,
                end: i,
            });
        }
        n = i + 1;
    }
    if !cur.is_empty() {
        out.push(Token {
            norm: cur,
            start,
            end: n,
        });
    }
    out
}

/// Substring by character range.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let mut it = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let b0 = it.by_ref().nth(start).unwrap_or(s.len());
    let b1 = if end > start {
        it.nth(end - start - 1).unwrap_or(s.len())
    } else {
        b0
    };
    &s[b0..b1]
}

/// Collapse whitespace runs to single spaces and trim.
pub fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
