//! BLEU-4, ROUGE-4 F1, unigram-entropy perplexity and sentence length.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// Floor substituted for zero n-gram precisions.
pub const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and candidate n-gram total for one order.
fn clipped_matches<T: Hash + Eq, R: AsRef<[T]>>(
    candidate: &[T],
    references: &[R],
    n: usize,
) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let total = candidate.len().saturating_sub(n - 1);
    let mut max_ref: HashMap<&[T], usize> = HashMap::new();
    for r in references {
        for (gram, c) in ngram_counts(r.as_ref(), n) {
            let e = max_ref.entry(gram).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

fn closest_ref_len<T, R: AsRef<[T]>>(cand_len: usize, references: &[R]) -> usize {
    references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(cand_len), len))
        .unwrap_or(0)
}

fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

fn smoothed(matched: usize, total: usize) -> f64 {
    if total == 0 || matched == 0 {
        BLEU_EPSILON
    } else {
        matched as f64 / total as f64
    }
}

/// Sentence BLEU with uniform weights over orders `1..=max_order`.
pub fn bleu<T: Hash + Eq, R: AsRef<[T]>>(candidate: &[T], references: &[R], max_order: usize) -> f64 {
    if candidate.is_empty() || references.is_empty() || max_order == 0 {
        return 0.0;
    }
    let log_mean: f64 = (1..=max_order)
        .map(|n| {
            let (m, t) = clipped_matches(candidate, references, n);
            smoothed(m, t).ln()
        })
        .sum::<f64>()
        / max_order as f64;
    let bp = brevity_penalty(candidate.len(), closest_ref_len(candidate.len(), references));
    (bp * log_mean.exp()).clamp(0.0, 1.0)
}

pub fn bleu4<T: Hash + Eq, R: AsRef<[T]>>(candidate: &[T], references: &[R]) -> f64 {
    bleu(candidate, references, 4)
}

/// Corpus-level BLEU-4: n-gram statistics pooled over all sentence pairs.
pub fn corpus_bleu4<T: Hash + Eq, C: AsRef<[T]>, R: AsRef<[T]>>(
    candidates: &[C],
    references: &[R],
) -> f64 {
    assert_eq!(candidates.len(), references.len(), "one reference per candidate");
    let mut matched = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        let cand = cand.as_ref();
        let refs = [reference.as_ref()];
        for n in 1..=4 {
            let (m, t) = clipped_matches(cand, &refs, n);
            matched[n - 1] += m;
            totals[n - 1] += t;
        }
        c_len += cand.len();
        r_len += reference.as_ref().len();
    }
    if c_len == 0 {
        return 0.0;
    }
    let log_mean: f64 = (0..4)
        .map(|i| smoothed(matched[i], totals[i]).ln())
        .sum::<f64>()
        / 4.0;
    (brevity_penalty(c_len, r_len) * log_mean.exp()).clamp(0.0, 1.0)
}

/// ROUGE-N F1 scaled to `[0, 100]`.
pub fn rouge_n_f1<T: Hash + Eq>(candidate: &[T], reference: &[T], n: usize) -> f64 {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refc.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let overlap: usize = cand
        .iter()
        .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    100.0 * 2.0 * p * r / (p + r)
}

pub fn rouge4_f1<T: Hash + Eq>(candidate: &[T], reference: &[T]) -> f64 {
    rouge_n_f1(candidate, reference, 4)
}

/// `2^H` of the empirical unigram distribution of `tokens`.
pub fn corpus_perplexity<T: Hash + Eq>(tokens: impl IntoIterator<Item = T>) -> f64 {
    let mut counts: HashMap<T, usize> = HashMap::new();
    let mut total = 0usize;
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return f64::NAN;
    }
    let entropy: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    entropy.exp2()
}

pub fn avg_sentence_length<S: AsRef<[T]>, T>(sentences: &[S]) -> f64 {
    if sentences.is_empty() {
        return f64::NAN;
    }
    sentences.iter().map(|s| s.as_ref().len()).sum::<usize>() as f64 / sentences.len() as f64
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    /// Unigram-entropy perplexity of the generated text.
    pub perplexity: f64,
    /// Same formula over the gold text.
    pub gold_perplexity: f64,
    pub bleu4: f64,
    pub rouge4_f1: f64,
    pub avg_length: f64,
}

impl MetricReport {
    /// Evaluates aligned prediction/gold token sequences.
    pub fn evaluate<S: AsRef<str>>(model: &str, predictions: &[Vec<S>], gold: &[Vec<S>]) -> Self {
        assert_eq!(predictions.len(), gold.len(), "prediction/gold length mismatch");
        let pred: Vec<Vec<&str>> = predictions
            .iter()
            .map(|s| s.iter().map(AsRef::as_ref).collect())
            .collect();
        let gold: Vec<Vec<&str>> = gold
            .iter()
            .map(|s| s.iter().map(AsRef::as_ref).collect())
            .collect();
        let rouge = if pred.is_empty() {
            0.0
        } else {
            pred.iter()
                .zip(&gold)
                .map(|(p, g)| rouge4_f1(p, g))
                .sum::<f64>()
                / pred.len() as f64
        };
        Self {
            model: model.to_string(),
            perplexity: corpus_perplexity(pred.iter().flatten()),
            gold_perplexity: corpus_perplexity(gold.iter().flatten()),
            bleu4: corpus_bleu4(&pred, &gold),
            rouge4_f1: rouge,
            avg_length: avg_sentence_length(&pred),
        }
    }
}

/// Renders rows as a `Model | Perplexity | BLEU | ROUGE | Length` text table.
pub fn render_metric_table(rows: &[MetricReport]) -> String {
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$} | {:>10} | {:>15} | {:>8} | {:>8} | {:>6}\n",
        "Model", "Perplexity", "Perplexity-gold", "BLEU", "ROUGE", "Length"
    );
    out.push_str(&format!("{}\n", "-".repeat(width + 62)));
    for r in rows {
        out.push_str(&format!(
            "{:<width$} | {:>10.3} | {:>15.3} | {:>8.4} | {:>8.2} | {:>6.2}\n",
            r.model, r.perplexity, r.gold_perplexity, r.bleu4, r.rouge4_f1, r.avg_length
        ));
    }
    out
}

pub fn render_metric_csv(rows: &[MetricReport]) -> String {
    let mut out = String::from("model,perplexity,gold_perplexity,bleu4,rouge4_f1,avg_length\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.model, r.perplexity, r.gold_perplexity, r.bleu4, r.rouge4_f1, r.avg_length
        ));
    }
    out
}
