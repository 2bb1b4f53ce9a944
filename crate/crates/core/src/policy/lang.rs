//! English-language block filter.

/// Fixed 50-word English stopword list.
pub const STOPWORDS: [&str; 50] = [
    "the", "of", "and", "to", "a", "in", "is", "it", "that", "for", "you", "your", "we", "our",
    "us", "on", "with", "as", "this", "are", "be", "by", "or", "from", "at", "an", "not", "have",
    "has", "will", "may", "can", "if", "which", "any", "all", "when", "about", "these", "other",
    "such", "do", "how", "what", "their", "they", "its", "was", "were", "been",
];

/// `0.5 * ascii_fraction + 0.5 * stopword_fraction` over whitespace tokens,
/// `None` for blocks shorter than three tokens.
pub fn english_score(block: &str) -> Option<f64> {
    let tokens: Vec<String> = block
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.len() < 3 {
        return None;
    }
    let n = tokens.len() as f64;
    let ascii = tokens
        .iter()
        .filter(|t| t.chars().all(|c| c.is_ascii_alphabetic()))
        .count() as f64;
    let stop = tokens
        .iter()
        .filter(|t| STOPWORDS.contains(&t.to_lowercase().as_str()))
        .count() as f64;
    Some(0.5 * ascii / n + 0.5 * stop / n)
}

pub fn is_english(block: &str) -> bool {
    english_score(block).is_none_or(|s| s >= 0.5)
}

/// Keep blocks judged English; short blocks are always kept.
pub fn filter_language(blocks: &[String]) -> Vec<String> {
    blocks.iter().filter(|b| is_english(b)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_list_is_fixed_size_and_unique() {
        let mut v = STOPWORDS.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 50);
    }

    #[test]
    fn examples() {
        let blocks = vec![
            "We collect your email address".to_string(),
            "Nous recueillons votre adresse e-mail".to_string(),
            "OK".to_string(),
        ];
        assert_eq!(
            filter_language(&blocks),
            vec!["We collect your email address".to_string(), "OK".to_string()]
        );
        // 4 of 5 tokens ASCII-alphabetic, no stopwords.
        assert!((english_score(&blocks[1]).unwrap() - 0.4).abs() < 1e-12);
        // 5/5 ASCII, 2/5 stopwords.
        assert!((english_score(&blocks[0]).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn non_latin_script_dropped() {
        assert!(!is_english("我们 收集 您的 电子邮件 地址"));
        assert!(filter_language(&[]).is_empty());
    }
}
