//! Privacy-policy segment extraction: fetch, parse, classify, split, and
//! attach sentences to data types.

mod chunk;
mod classify;
mod extract;
mod fetch;
mod html;
mod lang;
mod nb;
mod sentences;

use serde::{Deserialize, Serialize};

use crate::model::{check_unit_threshold, DataType, ThresholdError};

pub use chunk::{chunk_nouns, chunk_spans, Chunk};
pub use classify::{
    classify_headings, classify_paragraphs, HeadingClassifier, HeadingRules, ParagraphClassifier,
    DEFAULT_HEADING_PHRASES,
};
pub use extract::{extract_segments, keyword_stage, phrase_sim, ExtractHooks, NounChunker};
pub use fetch::{fetch_policy, FetchError, Fetched, PolicySource};
pub use html::{parse_plain_text, parse_structure, ParseError};
pub use lang::{english_score, filter_language, is_english, STOPWORDS};
pub use nb::{relevance_stage, NbError, NbModel};
pub use sentences::{sentence_ranges, split_sentences};

/// Message shown for data types without any matching policy sentence.
pub const FALLBACK_TEXT: &str = "No relative information is found in the privacy policy.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub paragraphs: Vec<String>,
}

/// A policy as headed sections of whitespace-normalized paragraphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDocument {
    pub source: String,
    pub raw_html: Vec<u8>,
    pub sections: Vec<Section>,
    /// The document follows a (heading, paragraph+)+ layout.
    pub structured: bool,
}

impl PolicyDocument {
    /// An empty unstructured document; every data type falls back.
    pub fn empty(source: impl Into<String>) -> Self {
        PolicyDocument {
            source: source.into(),
            raw_html: Vec::new(),
            sections: Vec::new(),
            structured: false,
        }
    }
}

/// A sentence located by section, paragraph, and character range in that paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub section_idx: usize,
    pub paragraph_idx: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl SentenceSpan {
    fn order_key(&self) -> (usize, usize, usize, usize) {
        (self.section_idx, self.paragraph_idx, self.char_start, self.char_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HighlightKind {
    Keyword,
    NounChunk,
}

/// Bold-rendered range inside one sentence of a group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HighlightSpan {
    /// Index into the accompanying sentence list.
    pub sentence: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub kind: HighlightKind,
}

/// Policy sentences retrieved for one data type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentGroup {
    pub data_type: DataType,
    pub fallback: bool,
    pub sentences: Vec<SentenceSpan>,
    pub highlights: Vec<HighlightSpan>,
}

impl SegmentGroup {
    pub fn fallback(data_type: DataType) -> Self {
        SegmentGroup {
            data_type,
            fallback: true,
            sentences: Vec::new(),
            highlights: Vec::new(),
        }
    }

    /// Sentence texts, or the fallback message.
    pub fn display_text(&self) -> String {
        if self.fallback {
            FALLBACK_TEXT.to_string()
        } else {
            self.sentences
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        }
    }

    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }
}

/// Knobs for segment extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub phrase_sim_threshold: f64,
    pub heading_rules: HeadingRules,
    /// Run the relevance + noun-chunk stage on keywordless sentences.
    pub use_relevance_stage: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            phrase_sim_threshold: 0.8,
            heading_rules: HeadingRules::default(),
            use_relevance_stage: true,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        check_unit_threshold("phrase_sim_threshold", self.phrase_sim_threshold)
    }
}
