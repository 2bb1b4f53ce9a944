//! Section and paragraph relevance.

use std::path::Path;

use super::PolicyDocument;
use crate::keywords::KeywordResource;

/// Heading phrases that identify sections describing the types of collected data.
pub const DEFAULT_HEADING_PHRASES: [&str; 7] = [
    "information we collect",
    "data we collect",
    "personal information",
    "personal data",
    "information you provide",
    "types of data",
    "what we collect",
];

/// Heading phrase rules. A heading is relevant when it contains a positive
/// phrase and no negative one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadingRules {
    pub rules: Vec<(String, bool)>,
}

impl Default for HeadingRules {
    fn default() -> Self {
        HeadingRules {
            rules: DEFAULT_HEADING_PHRASES
                .iter()
                .map(|p| (p.to_string(), true))
                .collect(),
        }
    }
}

impl HeadingRules {
    /// One lowercase phrase per line; `!phrase` marks a negative rule, `#` a comment.
    pub fn parse(src: &str) -> Self {
        let rules = src
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| match l.strip_prefix('!') {
                Some(neg) => (neg.trim().to_lowercase(), false),
                None => (l.to_lowercase(), true),
            })
            .filter(|(p, _)| !p.is_empty())
            .collect();
        HeadingRules { rules }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        std::fs::read_to_string(path).map(|s| Self::parse(&s))
    }

    pub fn is_relevant(&self, heading: &str) -> bool {
        let h = crate::text::collapse_ws(&heading.to_lowercase());
        let mut positive = false;
        for (phrase, flag) in &self.rules {
            if h.contains(phrase.as_str()) {
                if !flag {
                    return false;
                }
                positive = true;
            }
        }
        positive
    }
}

/// External replacement for the heading rules (e.g. a learned classifier).
pub trait HeadingClassifier {
    fn is_relevant(&self, heading: &str) -> bool;
}

/// External replacement for the keyword-presence paragraph rule.
pub trait ParagraphClassifier {
    fn is_relevant(&self, paragraph: &str) -> bool;
}

/// Indices of sections whose headings mark them as describing collected data types.
pub fn classify_headings(
    doc: &PolicyDocument,
    rules: &HeadingRules,
    adapter: Option<&dyn HeadingClassifier>,
) -> Vec<usize> {
    doc.sections
        .iter()
        .enumerate()
        .filter(|(_, s)| match adapter {
            Some(a) => a.is_relevant(&s.heading),
            None => rules.is_relevant(&s.heading),
        })
        .map(|(i, _)| i)
        .collect()
}

/// Indices of paragraphs mentioning at least one keyword of any data type.
pub fn classify_paragraphs(
    paragraphs: &[String],
    keywords: &KeywordResource,
    adapter: Option<&dyn ParagraphClassifier>,
) -> Vec<usize> {
    paragraphs
        .iter()
        .enumerate()
        .filter(|(_, p)| match adapter {
            Some(a) => a.is_relevant(p),
            None => keywords.any_match(p),
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Section;

    fn doc(headings: &[&str]) -> PolicyDocument {
        PolicyDocument {
            source: "t".into(),
            raw_html: Vec::new(),
            sections: headings
                .iter()
                .map(|h| Section {
                    heading: h.to_string(),
                    paragraphs: vec!["x".into()],
                })
                .collect(),
            structured: true,
        }
    }

    #[test]
    fn heading_examples() {
        let d = doc(&["Information We Collect", "Contact Us", "WHAT WE COLLECT"]);
        assert_eq!(classify_headings(&d, &HeadingRules::default(), None), vec![0, 2]);
    }

    #[test]
    fn negative_rules_and_adapter_override() {
        let rules = HeadingRules::parse("# rules\npersonal data\n!children\n");
        assert!(rules.is_relevant("Personal Data"));
        assert!(!rules.is_relevant("Children's Personal Data"));

        struct All;
        impl HeadingClassifier for All {
            fn is_relevant(&self, _: &str) -> bool {
                true
            }
        }
        let d = doc(&["Contact Us", "Cookies"]);
        assert_eq!(classify_headings(&d, &rules, Some(&All)), vec![0, 1]);
    }

    #[test]
    fn paragraph_examples() {
        let kw = KeywordResource::default();
        let paras = vec![
            "We may access your contacts.".to_string(),
            "This policy was updated in May.".to_string(),
        ];
        assert_eq!(classify_paragraphs(&paras, &kw, None), vec![0]);
        assert!(classify_paragraphs(&[], &kw, None).is_empty());
    }
}
