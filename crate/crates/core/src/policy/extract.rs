//! Sentence-level attachment of policy text to data types.

use std::collections::{BTreeMap, BTreeSet};

use super::chunk::{chunk_spans, Chunk};
use super::classify::{classify_headings, classify_paragraphs, HeadingClassifier, ParagraphClassifier};
use super::lang::is_english;
use super::nb::{relevance_stage, NbModel};
use super::sentences::spans_for;
use super::{HighlightKind, HighlightSpan, MatchConfig, PolicyDocument, SegmentGroup, SentenceSpan};
use crate::keywords::{maximal_occurrences, KeywordResource, MatchMode};
use crate::model::DataType;
use crate::taxonomy::Taxonomy;

/// External replacement for the heuristic chunker. Returned phrases are
/// located in the sentence case-insensitively; unlocatable ones are ignored.
pub trait NounChunker {
    fn chunks(&self, sentence: &str) -> Vec<String>;
}

/// Optional external classifiers for the extraction stages.
#[derive(Default, Clone, Copy)]
pub struct ExtractHooks<'a> {
    pub headings: Option<&'a dyn HeadingClassifier>,
    pub paragraphs: Option<&'a dyn ParagraphClassifier>,
    pub chunker: Option<&'a dyn NounChunker>,
}

/// `2 * path_similarity(head1, head2) / (words1 + words2)`, heads being last words.
pub fn phrase_sim(p1: &str, p2: &str, tax: &Taxonomy) -> f64 {
    let w1: Vec<String> = p1.split_whitespace().map(str::to_lowercase).collect();
    let w2: Vec<String> = p2.split_whitespace().map(str::to_lowercase).collect();
    let (Some(h1), Some(h2)) = (w1.last(), w2.last()) else {
        return 0.0;
    };
    2.0 * tax.path_similarity(h1, h2) / (w1.len() + w2.len()) as f64
}

/// Keyword hits per data type as `(sentence index, highlight)` pairs. The
/// highlight's `sentence` field is the index into `sentences`.
pub fn keyword_stage(
    sentences: &[SentenceSpan],
    keywords: &KeywordResource,
) -> BTreeMap<DataType, Vec<HighlightSpan>> {
    let mut out: BTreeMap<DataType, Vec<HighlightSpan>> = BTreeMap::new();
    for (si, s) in sentences.iter().enumerate() {
        for occ in maximal_occurrences(keywords.occurrences(&s.text, MatchMode::Literal)) {
            out.entry(occ.data_type).or_default().push(HighlightSpan {
                sentence: si,
                char_start: occ.start,
                char_end: occ.end,
                kind: HighlightKind::Keyword,
            });
        }
    }
    out
}

fn locate_chunks(sentence: &str, phrases: Vec<String>) -> Vec<Chunk> {
    let lower: Vec<char> = sentence.chars().flat_map(char::to_lowercase).collect();
    // lowercasing can change length; only trust positions when it does not
    if lower.len() != sentence.chars().count() {
        return Vec::new();
    }
    phrases
        .into_iter()
        .filter_map(|p| {
            let needle: Vec<char> = p.to_lowercase().chars().collect();
            if needle.is_empty() || needle.len() > lower.len() {
                return None;
            }
            let start = (0..=lower.len() - needle.len()).find(|&i| lower[i..i + needle.len()] == needle[..])?;
            Some(Chunk {
                words: p.split_whitespace().map(str::to_lowercase).collect(),
                start,
                end: start + needle.len(),
            })
        })
        .filter(|c| !c.words.is_empty())
        .collect()
}

/// Best chunk for `t`: highest phrase similarity against any keyword of `t`,
/// earliest chunk on ties.
fn best_chunk<'c>(
    chunks: &'c [Chunk],
    t: DataType,
    keywords: &KeywordResource,
    tax: &Taxonomy,
) -> Option<(f64, &'c Chunk)> {
    let mut best: Option<(f64, &Chunk)> = None;
    for c in chunks {
        let text = c.text();
        for kw in keywords.phrases(t) {
            let s = phrase_sim(&text, &kw.text, tax);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, c));
            }
        }
    }
    best
}

/// Full extraction. Always returns twelve groups in canonical type order.
pub fn extract_segments(
    doc: &PolicyDocument,
    keywords: &KeywordResource,
    tax: &Taxonomy,
    nb: Option<&NbModel>,
    cfg: &MatchConfig,
    hooks: ExtractHooks<'_>,
) -> Vec<SegmentGroup> {
    // (section, paragraph) pairs to analyze
    let mut targets: Vec<(usize, usize)> = Vec::new();
    if doc.structured {
        for si in classify_headings(doc, &cfg.heading_rules, hooks.headings) {
            for (pi, p) in doc.sections[si].paragraphs.iter().enumerate() {
                if is_english(p) {
                    targets.push((si, pi));
                }
            }
        }
    } else {
        for (si, section) in doc.sections.iter().enumerate() {
            let kept: Vec<(usize, String)> = section
                .paragraphs
                .iter()
                .enumerate()
                .filter(|(_, p)| is_english(p))
                .map(|(i, p)| (i, p.clone()))
                .collect();
            let texts: Vec<String> = kept.iter().map(|(_, p)| p.clone()).collect();
            for k in classify_paragraphs(&texts, keywords, hooks.paragraphs) {
                targets.push((si, kept[k].0));
            }
        }
    }

    let sentences: Vec<SentenceSpan> = targets
        .iter()
        .flat_map(|&(si, pi)| spans_for(&doc.sections[si].paragraphs[pi], si, pi))
        .collect();

    let mut hits: BTreeMap<DataType, Vec<HighlightSpan>> = keyword_stage(&sentences, keywords);
    let with_keywords: BTreeSet<usize> = hits.values().flatten().map(|h| h.sentence).collect();

    if cfg.use_relevance_stage {
        for (si, s) in sentences.iter().enumerate() {
            if with_keywords.contains(&si) || !relevance_stage(&s.text, nb) {
                continue;
            }
            let chunks = match hooks.chunker {
                Some(c) => locate_chunks(&s.text, c.chunks(&s.text)),
                None => chunk_spans(&s.text),
            };
            for t in DataType::ALL {
                if let Some((score, c)) = best_chunk(&chunks, t, keywords, tax) {
                    if score >= cfg.phrase_sim_threshold {
                        hits.entry(t).or_default().push(HighlightSpan {
                            sentence: si,
                            char_start: c.start,
                            char_end: c.end,
                            kind: HighlightKind::NounChunk,
                        });
                    }
                }
            }
        }
    }

    DataType::ALL
        .iter()
        .map(|&t| match hits.remove(&t) {
            Some(hl) if !hl.is_empty() => build_group(t, &sentences, hl),
            _ => SegmentGroup::fallback(t),
        })
        .collect()
}

fn build_group(t: DataType, sentences: &[SentenceSpan], hl: Vec<HighlightSpan>) -> SegmentGroup {
    // sentence identity is its span; the same span from two stages is stored once
    let mut order: Vec<usize> = hl.iter().map(|h| h.sentence).collect();
    order.sort_by_key(|&i| sentences[i].order_key());
    order.dedup_by_key(|i| sentences[*i].order_key());
    let position = |i: usize| {
        order
            .iter()
            .position(|&j| sentences[j].order_key() == sentences[i].order_key())
            .expect("every highlighted sentence is kept")
    };
    let mut highlights: Vec<HighlightSpan> = hl
        .into_iter()
        .map(|h| HighlightSpan {
            sentence: position(h.sentence),
            ..h
        })
        .collect();
    highlights.sort_by_key(|h| (h.sentence, h.char_start, h.char_end, h.kind));
    highlights.dedup();
    SegmentGroup {
        data_type: t,
        fallback: false,
        sentences: order.iter().map(|&i| sentences[i].clone()).collect(),
        highlights,
    }
}
