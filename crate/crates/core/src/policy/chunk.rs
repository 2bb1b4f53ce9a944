//! Heuristic noun-chunk extraction.

/// Closed-class words and policy verbs that delimit chunks.
const SPLIT_WORDS: &[&str] = &[
    // articles and determiners
    "a", "an", "the", "this", "that", "these", "those", "any", "some", "all", "each", "every",
    "other", "such", "no",
    // pronouns
    "i", "me", "my", "mine", "we", "us", "our", "ours", "you", "your", "yours", "he", "him",
    "his", "she", "her", "hers", "it", "its", "they", "them", "their", "theirs", "who", "whom",
    "whose", "which", "what",
    // prepositions
    "about", "above", "across", "after", "against", "along", "among", "around", "at", "before",
    "behind", "below", "between", "by", "during", "for", "from", "in", "inside", "into", "like",
    "near", "of", "off", "on", "onto", "out", "over", "through", "to", "toward", "towards",
    "under", "until", "up", "upon", "via", "with", "within", "without",
    // conjunctions
    "and", "or", "but", "nor", "so", "yet", "if", "because", "as", "when", "where", "while",
    "although", "though", "unless", "whether", "than",
    // auxiliaries and modals
    "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "do", "does",
    "did", "can", "could", "may", "might", "must", "shall", "should", "will", "would", "not",
    // verbs common in data-practice statements
    "collect", "collects", "collected", "collecting", "use", "uses", "used", "using", "share",
    "shares", "shared", "sharing", "store", "stores", "stored", "storing", "process",
    "processes", "processed", "processing", "provide", "provides", "provided", "providing",
    "also", "only",
];

const MAX_CHUNK: usize = 4;

/// A chunk as lowercase words plus its character range in the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub words: Vec<String>,
    pub start: usize,
    pub end: usize,
}

impl Chunk {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }

    /// Last word; the conventional head of an English noun phrase.
    pub fn head(&self) -> &str {
        self.words.last().map(String::as_str).unwrap_or("")
    }
}

/// Words are alphanumeric runs that may contain inner `-` or `'`.
fn words(sentence: &str) -> Vec<(String, usize, usize, bool)> {
    // (word, start, end, preceded_by_boundary_punct)
    let chars: Vec<char> = sentence.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut punct_since_last = false;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            let s = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric()
                    || (matches!(chars[i], '-' | '\'' | '\u{2019}')
                        && i + 1 < chars.len()
                        && chars[i + 1].is_alphanumeric()))
            {
                i += 1;
            }
            let w: String = chars[s..i]
                .iter()
                .map(|&c| if c == '\u{2019}' { '\'' } else { c })
                .flat_map(char::to_lowercase)
                .collect();
            out.push((w, s, i, punct_since_last));
            punct_since_last = false;
        } else {
            if !c.is_whitespace() {
                punct_since_last = true;
            }
            i += 1;
        }
    }
    out
}

/// Maximal runs of non-closed-class words. Punctuation also ends a run;
/// runs longer than four words keep their last four.
pub fn chunk_spans(sentence: &str) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut run: Vec<(String, usize, usize)> = Vec::new();
    let flush = |run: &mut Vec<(String, usize, usize)>, out: &mut Vec<Chunk>| {
        if run.is_empty() {
            return;
        }
        let keep = &run[run.len().saturating_sub(MAX_CHUNK)..];
        out.push(Chunk {
            words: keep.iter().map(|w| w.0.clone()).collect(),
            start: keep[0].1,
            end: keep[keep.len() - 1].2,
        });
        run.clear();
    };
    for (w, s, e, after_punct) in words(sentence) {
        if after_punct {
            flush(&mut run, &mut out);
        }
        if SPLIT_WORDS.contains(&w.as_str()) {
            flush(&mut run, &mut out);
        } else {
            run.push((w, s, e));
        }
    }
    flush(&mut run, &mut out);
    out
}

pub fn chunk_nouns(sentence: &str) -> Vec<String> {
    chunk_spans(sentence).iter().map(Chunk::text).collect()
}
