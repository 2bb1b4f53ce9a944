//! Rule-based sentence segmentation.

use super::SentenceSpan;

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "etc.", "vs.", "Mr.", "Ms.", "Dr.", "No.", "U.S.", "Inc.", "Ltd.", "Co.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201D}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201C}', '\u{2018}'];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Word ending at `end` (exclusive), without leading opening punctuation.
fn word_before(chars: &[char], end: usize) -> String {
    let mut s = end;
    while s > 0 && !chars[s - 1].is_whitespace() {
        s -= 1;
    }
    while s < end && OPENERS.contains(&chars[s]) {
        s += 1;
    }
    chars[s..end].iter().collect()
}

/// Character ranges of the sentences in `paragraph`, whitespace trimmed.
pub fn sentence_ranges(paragraph: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = paragraph.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && is_terminator(chars[j]) {
            j += 1;
        }
        while j < n && CLOSERS.contains(&chars[j]) {
            j += 1;
        }
        let boundary = if j == n {
            true
        } else if chars[j].is_whitespace() {
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            while k < n && OPENERS.contains(&chars[k]) {
                k += 1;
            }
            k == n || chars[k].is_uppercase() || chars[k].is_ascii_digit()
        } else {
            false
        };
        let protected = chars[i] == '.' && j == i + 1 && {
            let w = word_before(&chars, i + 1);
            ABBREVIATIONS.contains(&w.as_str())
        };
        if boundary && !protected {
            push_trimmed(&chars, start, j, &mut out);
            start = j;
        }
        i = j;
    }
    push_trimmed(&chars, start, n, &mut out);
    out
}

fn push_trimmed(chars: &[char], mut s: usize, mut e: usize, out: &mut Vec<(usize, usize)>) {
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    if s < e {
        out.push((s, e));
    }
}

/// Sentences of a standalone paragraph (section and paragraph indices zero).
pub fn split_sentences(paragraph: &str) -> Vec<SentenceSpan> {
    spans_for(paragraph, 0, 0)
}

pub(crate) fn spans_for(paragraph: &str, section_idx: usize, paragraph_idx: usize) -> Vec<SentenceSpan> {
    let chars: Vec<char> = paragraph.chars().collect();
    sentence_ranges(paragraph)
        .into_iter()
        .map(|(s, e)| SentenceSpan {
            section_idx,
            paragraph_idx,
            char_start: s,
            char_end: e,
            text: chars[s..e].iter().collect(),
        })
        .collect()
}
