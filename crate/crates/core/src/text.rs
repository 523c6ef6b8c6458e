//! Default tokenizer and the token-level similarity helpers built on it.
//!
//! Tokenization is lowercased word segmentation; CJK text falls back to
//! per-character tokens so Chinese documents still produce useful n-grams.

use std::collections::{BTreeMap, BTreeSet};

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2A6DF}'
        | '\u{3040}'..='\u{30FF}'
        | '\u{AC00}'..='\u{D7AF}')
}

/// Splits text into lowercase word tokens; each CJK character is its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// n-grams over a token slice, joined with an unprintable separator so
/// distinct token boundaries cannot collide.
pub fn ngrams(tokens: &[String], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.join("\u{1f}")).collect()
}

/// Jaccard similarity of the n-gram sets of two texts. Returns 0 when either
/// side has no n-grams of the requested order.
pub fn ngram_jaccard(a: &str, b: &str, n: usize) -> f64 {
    let set_a: BTreeSet<String> = ngrams(&tokenize(a), n).into_iter().collect();
    let set_b: BTreeSet<String> = ngrams(&tokenize(b), n).into_iter().collect();
    if set_a.is_empty() || set_b.is_empty() {
        return 0.0;
    }
    let inter = set_a.intersection(&set_b).count();
    let union = set_a.union(&set_b).count();
    inter as f64 / union as f64
}

fn term_frequencies(text: &str) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for token in tokenize(text) {
        *tf.entry(token).or_insert(0.0) += 1.0;
    }
    tf
}

/// Cosine similarity over term-frequency vectors of the default tokenizer.
/// 1.0 for identical non-empty documents, 0.0 for disjoint vocabularies.
pub fn cosine_similarity(a: &str, b: &str) -> f64 {
    let tf_a = term_frequencies(a);
    let tf_b = term_frequencies(b);
    if tf_a.is_empty() || tf_b.is_empty() {
        return 0.0;
    }
    let dot: f64 = tf_a
        .iter()
        .filter_map(|(t, x)| tf_b.get(t).map(|y| x * y))
        .sum();
    let norm_a: f64 = tf_a.values().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = tf_b.values().map(|x| x * x).sum::<f64>().sqrt();
    dot / (norm_a * norm_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(tokenize("Java, Linux!"), vec!["java", "linux"]);
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn tokenize_splits_cjk_per_character() {
        assert_eq!(tokenize("数据库Java"), vec!["数", "据", "库", "java"]);
    }

    #[test]
    fn jaccard_identity_and_disjoint() {
        assert_eq!(ngram_jaccard("tell me about java", "tell me about java", 3), 1.0);
        assert_eq!(ngram_jaccard("one two three", "four five six", 3), 0.0);
        // shorter than n on one side
        assert_eq!(ngram_jaccard("one two", "one two three", 3), 0.0);
    }

    #[test]
    fn cosine_identity_and_disjoint() {
        assert!((cosine_similarity("java linux", "java linux") - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity("java", "linux"), 0.0);
        assert_eq!(cosine_similarity("", "java"), 0.0);
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_bounded(a in ".{0,80}", b in ".{0,80}") {
            let s1 = cosine_similarity(&a, &b);
            let s2 = cosine_similarity(&b, &a);
            prop_assert!((s1 - s2).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s1));
        }

        #[test]
        fn jaccard_bounded(a in ".{0,80}", b in ".{0,80}") {
            let s = ngram_jaccard(&a, &b, 3);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
