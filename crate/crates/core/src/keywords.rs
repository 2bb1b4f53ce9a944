//! Privacy-related keyword lists and token-boundary phrase matching.

use std::path::Path;

use thiserror::Error;

use crate::model::DataType;
use crate::text::{char_slice, word_tokens, Token};

const DEFAULT_KEYWORDS: &str = include_str!("../resources/keywords.tsv");

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("keywords line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no keyword phrases for data type {0}")]
    EmptyList(DataType),
}

/// One keyword phrase, stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phrase {
    pub text: String,
    tokens: Vec<String>,
    /// Literal separators between consecutive tokens, whitespace collapsed.
    seps: Vec<String>,
}

impl Phrase {
    fn new(raw: &str) -> Option<Phrase> {
        let text = crate::text::collapse_ws(&raw.to_lowercase());
        let toks = word_tokens(&text);
        if toks.is_empty() {
            return None;
        }
        let seps = gaps(&text, &toks);
        Some(Phrase {
            tokens: toks.into_iter().map(|t| t.norm).collect(),
            seps,
            text,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }
}

fn gaps(text: &str, toks: &[Token]) -> Vec<String> {
    toks.windows(2)
        .map(|w| normalize_sep(char_slice(text, w[0].end, w[1].start)))
        .collect()
}

fn normalize_sep(s: &str) -> String {
    let s = s.replace(['\u{2019}', '\u{2018}'], "'");
    if s.chars().all(char::is_whitespace) {
        " ".to_string()
    } else {
        crate::text::collapse_ws(&s)
    }
}

/// How a phrase occurrence is recognized in a token stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Token sequence equality after punctuation-to-space normalization.
    Tokens,
    /// Token sequence equality and identical separators, so the matched
    /// source slice spells the phrase.
    Literal,
}

/// A phrase occurrence in some text, as a character range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub data_type: DataType,
    pub phrase: usize,
    pub start: usize,
    pub end: usize,
}

/// Keyword phrases per data type, in canonical type order.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordResource {
    lists: Vec<Vec<Phrase>>,
}

impl Default for KeywordResource {
    fn default() -> Self {
        KeywordResource::parse(DEFAULT_KEYWORDS).expect("bundled keyword list is valid")
    }
}

impl KeywordResource {
    pub fn load(path: &Path) -> Result<Self, KeywordError> {
        let src = std::fs::read_to_string(path).map_err(|source| KeywordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&src)
    }

    /// Parse `<DataType>\t<phrase>` lines; `#` starts a comment line.
    pub fn parse(src: &str) -> Result<Self, KeywordError> {
        let mut lists: Vec<Vec<Phrase>> = vec![Vec::new(); DataType::ALL.len()];
        for (i, line) in src.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (ty, phrase) = line.split_once('\t').ok_or_else(|| KeywordError::Parse {
                line: line_no,
                msg: "expected <DataType><TAB><phrase>".into(),
            })?;
            let ty: DataType = ty.trim().parse().map_err(|e: crate::model::UnknownDataType| {
                KeywordError::Parse {
                    line: line_no,
                    msg: e.to_string(),
                }
            })?;
            let phrase = Phrase::new(phrase).ok_or_else(|| KeywordError::Parse {
                line: line_no,
                msg: "phrase is empty after normalization".into(),
            })?;
            let list = &mut lists[ty.index()];
            if !list.contains(&phrase) {
                list.push(phrase);
            }
        }
        for t in DataType::ALL {
            if lists[t.index()].is_empty() {
                return Err(KeywordError::EmptyList(t));
            }
        }
        Ok(KeywordResource { lists })
    }

    pub fn phrases(&self, t: DataType) -> &[Phrase] {
        &self.lists[t.index()]
    }

    /// Every occurrence of every phrase, ordered by type, then phrase, then position.
    pub fn occurrences(&self, text: &str, mode: MatchMode) -> Vec<Occurrence> {
        let toks = word_tokens(text);
        let mut out = Vec::new();
        for t in DataType::ALL {
            for (pi, phrase) in self.phrases(t).iter().enumerate() {
                let n = phrase.tokens.len();
                if n > toks.len() {
                    continue;
                }
                for i in 0..=toks.len() - n {
                    let window = &toks[i..i + n];
                    if !window.iter().zip(&phrase.tokens).all(|(a, b)| &a.norm == b) {
                        continue;
                    }
                    if mode == MatchMode::Literal && gaps(text, window) != phrase.seps {
                        continue;
                    }
                    out.push(Occurrence {
                        data_type: t,
                        phrase: pi,
                        start: window[0].start,
                        end: window[n - 1].end,
                    });
                }
            }
        }
        out
    }

    /// True if any phrase of any type occurs in `text`.
    pub fn any_match(&self, text: &str) -> bool {
        !self.occurrences(text, MatchMode::Tokens).is_empty()
    }

    /// Built-in text classifier: the longest matching phrase wins; ties go
    /// to the earlier data type, then the earlier phrase in its list.
    pub fn classify(&self, text: &str) -> Option<(DataType, String)> {
        self.occurrences(text, MatchMode::Tokens)
            .into_iter()
            .min_by_key(|o| {
                let p = &self.phrases(o.data_type)[o.phrase];
                (std::cmp::Reverse(p.word_count()), o.data_type, o.phrase)
            })
            .map(|o| (o.data_type, self.phrases(o.data_type)[o.phrase].text.clone()))
    }
}

/// Keep only occurrences not strictly nested inside another occurrence of the same type.
pub fn maximal_occurrences(mut occ: Vec<Occurrence>) -> Vec<Occurrence> {
    let all = occ.clone();
    occ.retain(|o| {
        !all.iter().any(|p| {
            p.data_type == o.data_type
                && p.start <= o.start
                && o.end <= p.end
                && (p.end - p.start) > (o.end - o.start)
        })
    });
    occ.sort_by_key(|o| (o.data_type, o.start, o.end));
    occ.dedup_by_key(|o| (o.data_type, o.start, o.end));
    occ
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_resource_is_complete() {
        let kw = KeywordResource::default();
        for t in DataType::ALL {
            assert!(!kw.phrases(t).is_empty());
            for p in kw.phrases(t) {
                assert_eq!(p.text, p.text.to_lowercase());
            }
        }
        assert!(kw.phrases(DataType::Address).iter().all(|p| p.text != "address"));
        assert!(kw.phrases(DataType::Birthday).iter().any(|p| p.text == "dob"));
    }

    #[test]
    fn classify_examples() {
        let kw = KeywordResource::default();
        assert_eq!(
            kw.classify("Share your location"),
            Some((DataType::Location, "location".into()))
        );
        assert_eq!(
            kw.classify("use your birthday"),
            Some((DataType::Birthday, "birthday".into()))
        );
        assert_eq!(kw.classify("Settings"), None);
        // "mic" inside "dynamic" is not a token; "wallpaper" is an icon class, not a keyword.
        assert_eq!(kw.classify("dynamic wallpaper"), None);
        assert_eq!(
            kw.classify("dynamic wallpaper picture"),
            Some((DataType::Photos, "picture".into()))
        );
    }

    #[test]
    fn longest_phrase_beats_row_order() {
        let kw = KeywordResource::default();
        // "phone" (Phone) vs "phone book" (Contacts)
        assert_eq!(kw.classify("Open phone book").unwrap().0, DataType::Contacts);
        assert_eq!(
            kw.classify("Your E-mail Address").unwrap(),
            (DataType::Email, "e-mail address".into())
        );
    }

    #[test]
    fn literal_mode_requires_matching_separators() {
        let kw = KeywordResource::default();
        let loose = kw.occurrences("phone, book", MatchMode::Tokens);
        assert!(loose.iter().any(|o| o.data_type == DataType::Contacts));
        let strict = kw.occurrences("phone, book", MatchMode::Literal);
        assert!(strict.iter().all(|o| o.data_type != DataType::Contacts));
        let hy = kw.occurrences("your phone-book", MatchMode::Literal);
        assert!(hy.iter().any(|o| o.data_type == DataType::Contacts));
    }

    #[test]
    fn nested_occurrences_collapse_to_longest() {
        let kw = KeywordResource::default();
        let occ = maximal_occurrences(kw.occurrences(
            "We collect your email address.",
            MatchMode::Literal,
        ));
        assert_eq!(occ.len(), 1);
        assert_eq!((occ[0].start, occ[0].end), (16, 29));
    }

    #[test]
    fn parse_errors_are_located() {
        let err = KeywordResource::parse("Name\tname\nEmial\temail\n").unwrap_err();
        assert!(matches!(err, KeywordError::Parse { line: 2, .. }));
        let err = KeywordResource::parse("Name\tname\n").unwrap_err();
        assert!(matches!(err, KeywordError::EmptyList(DataType::Birthday)));
        let err = KeywordResource::parse("Name\t  --  \n").unwrap_err();
        assert!(matches!(err, KeywordError::Parse { line: 1, .. }));
    }
}
