//! Automatic evaluation metrics: binary-relevance top-k ranking metrics,
//! macro classification metrics over the match/non-match classes, and
//! per-order n-gram overlap (B@n) with brevity penalty.
//!
//! All metric operations are pure functions and lie in [0, 1].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{GoldLabels, MatchDecision, Side};
use crate::text::{ngrams, tokenize};

/// A per-query ranking: items sorted non-increasing by score with a stable
/// tie-break by item id, plus the ground-truth relevant set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<(String, f64)>,
    pub relevant: BTreeSet<String>,
}

impl RankedList {
    pub fn new(
        query_id: impl Into<String>,
        mut items: Vec<(String, f64)>,
        relevant: BTreeSet<String>,
    ) -> Self {
        items.sort_by(|(ia, sa), (ib, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| ia.cmp(ib))
        });
        Self { query_id: query_id.into(), items, relevant }
    }

    fn hits_at_k(&self, k: usize) -> usize {
        self.items
            .iter()
            .take(k)
            .filter(|(id, _)| self.relevant.contains(id))
            .count()
    }
}

/// Binary-relevance NDCG@k: DCG = sum over i<=k of rel_i / log2(i+1)
/// (1-indexed), normalized by the DCG of the ideal ordering. 0 when the
/// relevant set is empty.
pub fn ndcg_at_k(list: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    if list.relevant.is_empty() {
        return 0.0;
    }
    let discount = |rank: usize| 1.0 / ((rank as f64 + 1.0).log2());
    let dcg: f64 = list
        .items
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, (id, _))| list.relevant.contains(id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal_hits = list.relevant.len().min(k);
    let idcg: f64 = (1..=ideal_hits).map(discount).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// P@k = hits / k.
pub fn precision_at_k(list: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    list.hits_at_k(k) as f64 / k as f64
}

/// R@k = hits / |relevant|, 0 when the relevant set is empty.
pub fn recall_at_k(list: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    if list.relevant.is_empty() {
        return 0.0;
    }
    list.hits_at_k(k) as f64 / list.relevant.len() as f64
}

/// MRR@k = 1 / rank of the first relevant item within the top k, else 0.
pub fn mrr_at_k(list: &RankedList, k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    list.items
        .iter()
        .take(k)
        .position(|(id, _)| list.relevant.contains(id))
        .map_or(0.0, |i| 1.0 / (i as f64 + 1.0))
}

/// Corpus-level value: the unweighted mean of per-query values. Queries
/// with empty relevant sets score 0 and are included in the average.
pub fn mean_over_queries(lists: &[RankedList], k: usize, metric: fn(&RankedList, usize) -> f64) -> f64 {
    if lists.is_empty() {
        return 0.0;
    }
    lists.iter().map(|l| metric(l, k)).sum::<f64>() / lists.len() as f64
}

/// Per-class true-positive/false-positive/false-negative counts for the
/// match and non-match classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub match_tp: u64,
    pub match_fp: u64,
    pub match_fn: u64,
    pub non_match_tp: u64,
    pub non_match_fp: u64,
    pub non_match_fn: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(pairs: &[(bool, bool)]) -> Self {
        let mut c = Self::default();
        for &(predicted, gold) in pairs {
            match (predicted, gold) {
                (true, true) => c.match_tp += 1,
                (true, false) => {
                    c.match_fp += 1;
                    c.non_match_fn += 1;
                }
                (false, true) => {
                    c.match_fn += 1;
                    c.non_match_fp += 1;
                }
                (false, false) => c.non_match_tp += 1,
            }
        }
        c
    }
}

fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("input must be non-empty")]
    EmptyInput,
    #[error("missing gold label for pair ({candidate_id}, {job_id})")]
    MissingGoldLabel { candidate_id: String, job_id: String },
}

/// Macro precision/recall/F1: the unweighted mean of per-class values over
/// the match and non-match classes. A class absent from both predictions
/// and gold contributes 0.
pub fn macro_prf(pairs: &[(bool, bool)]) -> Result<(f64, f64, f64), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let c = ConfusionCounts::from_pairs(pairs);
    let (p1, r1, f1_1) = prf(c.match_tp, c.match_fp, c.match_fn);
    let (p0, r0, f1_0) = prf(c.non_match_tp, c.non_match_fp, c.non_match_fn);
    Ok(((p1 + p0) / 2.0, (r1 + r0) / 2.0, (f1_1 + f1_0) / 2.0))
}

/// Utterance-level B@n: the modified (clip-counted) n-gram precision of
/// order n, multiplied by the brevity penalty min(1, e^(1 - ref/cand)) over
/// token lengths. Not the cumulative geometric-mean formulation; each order
/// is reported on its own.
pub fn bleu_n(candidate: &str, reference: &str, n: usize) -> f64 {
    assert!((1..=4).contains(&n), "n must lie in 1..=4");
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    if cand_tokens.is_empty() {
        return 0.0;
    }
    let cand_ngrams = ngrams(&cand_tokens, n);
    if cand_ngrams.is_empty() {
        return 0.0;
    }
    let mut ref_counts: BTreeMap<String, u64> = BTreeMap::new();
    for g in ngrams(&ref_tokens, n) {
        *ref_counts.entry(g).or_insert(0) += 1;
    }
    let mut cand_counts: BTreeMap<String, u64> = BTreeMap::new();
    for g in &cand_ngrams {
        *cand_counts.entry(g.clone()).or_insert(0) += 1;
    }
    let clipped: u64 = cand_counts
        .iter()
        .map(|(g, count)| (*count).min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    let precision = clipped as f64 / cand_ngrams.len() as f64;
    let bp = if cand_tokens.len() >= ref_tokens.len() {
        1.0
    } else {
        (1.0 - ref_tokens.len() as f64 / cand_tokens.len() as f64).exp()
    };
    precision * bp
}

/// Corpus-level B@n. Macro averages utterance scores; micro pools clipped
/// counts and lengths across utterances.
pub fn corpus_bleu_n(pairs: &[(String, String)], n: usize, micro: bool) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    if !micro {
        return pairs.iter().map(|(c, r)| bleu_n(c, r, n)).sum::<f64>() / pairs.len() as f64;
    }
    let mut clipped_total = 0u64;
    let mut cand_ngram_total = 0u64;
    let mut cand_len_total = 0usize;
    let mut ref_len_total = 0usize;
    for (candidate, reference) in pairs {
        let cand_tokens = tokenize(candidate);
        let ref_tokens = tokenize(reference);
        cand_len_total += cand_tokens.len();
        ref_len_total += ref_tokens.len();
        let cand_ngrams = ngrams(&cand_tokens, n);
        cand_ngram_total += cand_ngrams.len() as u64;
        let mut ref_counts: BTreeMap<String, u64> = BTreeMap::new();
        for g in ngrams(&ref_tokens, n) {
            *ref_counts.entry(g).or_insert(0) += 1;
        }
        let mut cand_counts: BTreeMap<String, u64> = BTreeMap::new();
        for g in cand_ngrams {
            *cand_counts.entry(g).or_insert(0) += 1;
        }
        clipped_total += cand_counts
            .iter()
            .map(|(g, count)| (*count).min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum::<u64>();
    }
    if cand_ngram_total == 0 {
        return 0.0;
    }
    let precision = clipped_total as f64 / cand_ngram_total as f64;
    let bp = if cand_len_total >= ref_len_total || cand_len_total == 0 {
        1.0
    } else {
        (1.0 - ref_len_total as f64 / cand_len_total as f64).exp()
    };
    precision * bp
}

/// Builds per-query rankings from campaign decisions. Candidate-side lists
/// rank jobs per candidate by the candidate-side fused score; job-side
/// lists rank candidates per job by the interviewer-side fused score.
/// Relevant sets come from gold labels; a scored pair without a gold label
/// is an error.
pub fn build_rankings(
    decisions: &[MatchDecision],
    gold: &GoldLabels,
    side: Side,
) -> Result<Vec<RankedList>, MetricsError> {
    let mut per_query: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut relevant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for d in decisions {
        let label = gold.get(&d.candidate_id, &d.interviewer_id).ok_or_else(|| {
            MetricsError::MissingGoldLabel {
                candidate_id: d.candidate_id.clone(),
                job_id: d.interviewer_id.clone(),
            }
        })?;
        let (query, item, score) = match side {
            Side::Candidate => (&d.candidate_id, &d.interviewer_id, d.candidate_eval.fused),
            Side::Interviewer => (&d.interviewer_id, &d.candidate_id, d.interviewer_eval.fused),
        };
        per_query.entry(query.clone()).or_default().push((item.clone(), score));
        let rel = relevant.entry(query.clone()).or_default();
        if label {
            rel.insert(item.clone());
        }
    }
    Ok(per_query
        .into_iter()
        .map(|(query, items)| {
            let rel = relevant.remove(&query).unwrap_or_default();
            RankedList::new(query, items, rel)
        })
        .collect())
}

/// Two-sided p-value from a paired bootstrap over per-query metric deltas.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> f64 {
    use rand::Rng;
    use rand::SeedableRng;
    assert_eq!(a.len(), b.len(), "paired samples must align");
    if a.is_empty() {
        return 1.0;
    }
    let deltas: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let observed = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..resamples {
        // resample deltas centered at zero (null hypothesis of no difference)
        let sample_mean = (0..deltas.len())
            .map(|_| deltas[rng.random_range(0..deltas.len())])
            .sum::<f64>()
            / deltas.len() as f64;
        if (sample_mean - observed).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    extreme as f64 / resamples as f64
}
