//! Native corpus metrics: ChrF++, BLEU and accuracy, plus checkpoint
//! selection.
//!
//! Both text metrics are corpus-level: per-order matched/hypothesis/reference
//! counts are summed over all segments first, then combined. Orders with zero
//! total counts on both sides carry no information and are excluded from the
//! order average; an order that is empty on exactly one side contributes
//! zero. All-empty corpora score 100 when hypothesis and reference are
//! identical and 0 otherwise.
//!
//! The exact BLEU smoothing rule is pinned here: when an order has a nonzero
//! denominator but zero matches, its precision is floored at `1/(2*den)`.
//! Orders with zero denominator are excluded from the geometric mean.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("hypothesis/reference length mismatch: {hyp} vs {reference}")]
    LengthMismatch { hyp: usize, reference: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid metric parameters: {0}")]
    BadParams(String),
    #[error("mixed metrics in checkpoint reports: {0} vs {1}")]
    MixedMetrics(MetricKind, MetricKind),
    #[error("no reports to select from")]
    NoReports,
}

/// Which metric a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Chrfpp,
    Bleu,
    Accuracy,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricKind::Chrfpp => "chrfpp",
            MetricKind::Bleu => "bleu",
            MetricKind::Accuracy => "accuracy",
        })
    }
}

/// ChrF++ parameters: character n-gram orders 1..=char_order on
/// whitespace-removed text, word orders 1..=word_order on whitespace tokens,
/// F-beta weighting recall `beta` times as much as precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChrfParams {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        ChrfParams {
            char_order: 6,
            word_order: 2,
            beta: 2.0,
        }
    }
}

impl ChrfParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.char_order < 1 {
            return Err(MetricsError::BadParams("char_order must be >= 1".into()));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(MetricsError::BadParams("beta must be > 0".into()));
        }
        Ok(())
    }
}

/// A scored corpus: metric, value on the 0–100 scale, item count and the
/// parameters that produced it. Full precision is retained; rounding to two
/// decimals happens only at display time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: MetricKind,
    pub value: f64,
    pub n_items: usize,
    pub params: serde_json::Value,
}

impl std::fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={:.2} n={}", self.metric, self.value, self.n_items)
    }
}

fn check_corpus(hyps: &[String], refs: &[String]) -> Result<(), MetricsError> {
    if hyps.len() != refs.len() {
        return Err(MetricsError::LengthMismatch {
            hyp: hyps.len(),
            reference: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(())
}

/// Multiset of n-grams over a token slice (tokens are chars or words).
fn ngram_counts<T: Eq + std::hash::Hash + Clone>(tokens: &[T], n: usize) -> HashMap<Vec<T>, u64> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Clipped match count: sum over grams of min(hyp count, ref count).
fn clipped_matches<T: Eq + std::hash::Hash + Clone>(
    hyp: &HashMap<Vec<T>, u64>,
    reference: &HashMap<Vec<T>, u64>,
) -> u64 {
    hyp.iter()
        .map(|(g, &hc)| hc.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

#[derive(Default, Clone, Copy)]
struct OrderTotals {
    matched: u64,
    hyp: u64,
    reference: u64,
}

/// Corpus ChrF++. Character n-grams are computed on text with all whitespace
/// removed; word n-grams on whitespace tokenization with punctuation left
/// attached. Per order, F-beta is computed from corpus totals; the score is
/// 100 times the mean F over all orders that have any counts.
pub fn chrfpp(
    hyps: &[String],
    refs: &[String],
    params: &ChrfParams,
) -> Result<ScoreReport, MetricsError> {
    check_corpus(hyps, refs)?;
    params.validate()?;
    let n_orders = params.char_order + params.word_order;
    let mut totals = vec![OrderTotals::default(); n_orders];

    for (h, r) in hyps.iter().zip(refs) {
        let h_chars: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let r_chars: Vec<char> = r.chars().filter(|c| !c.is_whitespace()).collect();
        for n in 1..=params.char_order {
            let hc = ngram_counts(&h_chars, n);
            let rc = ngram_counts(&r_chars, n);
            let t = &mut totals[n - 1];
            t.matched += clipped_matches(&hc, &rc);
            t.hyp += hc.values().sum::<u64>();
            t.reference += rc.values().sum::<u64>();
        }
        let h_words: Vec<&str> = h.split_whitespace().collect();
        let r_words: Vec<&str> = r.split_whitespace().collect();
        for n in 1..=params.word_order {
            let hc = ngram_counts(&h_words, n);
            let rc = ngram_counts(&r_words, n);
            let t = &mut totals[params.char_order + n - 1];
            t.matched += clipped_matches(&hc, &rc);
            t.hyp += hc.values().sum::<u64>();
            t.reference += rc.values().sum::<u64>();
        }
    }

    let beta2 = params.beta * params.beta;
    let mut f_sum = 0.0;
    let mut effective = 0usize;
    for t in &totals {
        if t.hyp == 0 && t.reference == 0 {
            continue;
        }
        effective += 1;
        let p = if t.hyp > 0 { t.matched as f64 / t.hyp as f64 } else { 0.0 };
        let r = if t.reference > 0 { t.matched as f64 / t.reference as f64 } else { 0.0 };
        let denom = beta2 * p + r;
        if denom > 0.0 {
            f_sum += (1.0 + beta2) * p * r / denom;
        }
    }
    let value = if effective == 0 {
        if hyps == refs { 100.0 } else { 0.0 }
    } else {
        100.0 * f_sum / effective as f64
    };
    Ok(ScoreReport {
        metric: MetricKind::Chrfpp,
        value,
        n_items: hyps.len(),
        params: serde_json::to_value(params).expect("params serialize"),
    })
}

/// Corpus BLEU: geometric mean of clipped modified n-gram precisions for
/// n=1..4 on whitespace tokens, times the brevity penalty
/// `exp(1 - ref_len/hyp_len)` when the hypothesis is shorter.
pub fn bleu(hyps: &[String], refs: &[String]) -> Result<ScoreReport, MetricsError> {
    check_corpus(hyps, refs)?;
    const MAX_ORDER: usize = 4;
    let mut num = [0u64; MAX_ORDER];
    let mut den = [0u64; MAX_ORDER];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;

    for (h, r) in hyps.iter().zip(refs) {
        let h_tok: Vec<&str> = h.split_whitespace().collect();
        let r_tok: Vec<&str> = r.split_whitespace().collect();
        hyp_len += h_tok.len() as u64;
        ref_len += r_tok.len() as u64;
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(&h_tok, n);
            let rc = ngram_counts(&r_tok, n);
            num[n - 1] += clipped_matches(&hc, &rc);
            den[n - 1] += hc.values().sum::<u64>();
        }
    }

    let mut log_sum = 0.0;
    let mut effective = 0usize;
    for n in 0..MAX_ORDER {
        if den[n] == 0 {
            continue;
        }
        effective += 1;
        let p = if num[n] > 0 {
            num[n] as f64 / den[n] as f64
        } else {
            1.0 / (2.0 * den[n] as f64)
        };
        log_sum += p.ln();
    }
    let value = if effective == 0 {
        if hyps == refs { 100.0 } else { 0.0 }
    } else {
        let bp = if hyp_len < ref_len {
            (1.0 - ref_len as f64 / hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / effective as f64).exp()
    };
    Ok(ScoreReport {
        metric: MetricKind::Bleu,
        value,
        n_items: hyps.len(),
        params: serde_json::json!({"max_order": MAX_ORDER, "smoothing": "floor 1/(2*den)"}),
    })
}

/// Exact-match accuracy over label lists, on the 0–100 scale.
pub fn accuracy(predicted: &[String], gold: &[String]) -> Result<ScoreReport, MetricsError> {
    check_corpus(predicted, gold)?;
    let matches = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(ScoreReport {
        metric: MetricKind::Accuracy,
        value: 100.0 * matches as f64 / predicted.len() as f64,
        n_items: predicted.len(),
        params: serde_json::json!({}),
    })
}

/// Pick the checkpoint with the highest score; ties break to the earliest
/// entry in the list. All reports must carry the same metric.
pub fn select_checkpoint(reports: &[(String, ScoreReport)]) -> Result<String, MetricsError> {
    let (first, rest) = reports.split_first().ok_or(MetricsError::NoReports)?;
    let mut best = first;
    for r in rest {
        if r.1.metric != best.1.metric {
            return Err(MetricsError::MixedMetrics(best.1.metric, r.1.metric));
        }
        if r.1.value > best.1.value {
            best = r;
        }
    }
    Ok(best.0.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn chrfpp_identity_is_100() {
        let c = s(&["Witaj swět", "ab"]);
        let r = chrfpp(&c, &c, &ChrfParams::default()).unwrap();
        assert_eq!(r.value, 100.0);
        // also exact for short strings with empty high orders
        let short = s(&["ab"]);
        assert_eq!(chrfpp(&short, &short, &ChrfParams::default()).unwrap().value, 100.0);
    }

    #[test]
    fn chrfpp_no_overlap_is_0() {
        let h = s(&[""]);
        let r = s(&["abc"]);
        assert_eq!(chrfpp(&h, &r, &ChrfParams::default()).unwrap().value, 0.0);
    }

    #[test]
    fn chrfpp_cat_sat_fixture() {
        // hand-counted: char orders 1..6 on "catsat"/"catsaton", word orders
        // 1..2 on the token lists; P=1 at every order, recalls 6/8, 5/7, 4/6,
        // 3/5, 2/4, 1/3 (char) and 2/3, 1/2 (word); F2 per order, averaged.
        let h = s(&["cat sat"]);
        let r = s(&["cat sat on"]);
        let f2 = |p: f64, rec: f64| 5.0 * p * rec / (4.0 * p + rec);
        let expected = 100.0
            * (f2(1.0, 6.0 / 8.0)
                + f2(1.0, 5.0 / 7.0)
                + f2(1.0, 4.0 / 6.0)
                + f2(1.0, 3.0 / 5.0)
                + f2(1.0, 2.0 / 4.0)
                + f2(1.0, 1.0 / 3.0)
                + f2(1.0, 2.0 / 3.0)
                + f2(1.0, 1.0 / 2.0))
            / 8.0;
        let got = chrfpp(&h, &r, &ChrfParams::default()).unwrap().value;
        assert!((got - expected).abs() < 1e-9, "got {got}, expected {expected}");
        // frozen value for drift detection
        assert!((got - 64.04401598909607).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn chrfpp_rejects_mismatch_and_empty() {
        assert!(chrfpp(&s(&["a"]), &s(&["a", "b"]), &ChrfParams::default()).is_err());
        assert!(chrfpp(&[], &[], &ChrfParams::default()).is_err());
    }

    #[test]
    fn chrfpp_rejects_bad_params() {
        let zero_chars = ChrfParams { char_order: 0, word_order: 2, beta: 2.0 };
        assert!(matches!(
            chrfpp(&s(&["a"]), &s(&["a"]), &zero_chars),
            Err(MetricsError::BadParams(_))
        ));
        let bad_beta = ChrfParams { beta: 0.0, ..ChrfParams::default() };
        assert!(chrfpp(&s(&["a"]), &s(&["a"]), &bad_beta).is_err());
    }

    #[test]
    fn accuracy_equals_per_item_indicator_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.random_range(1usize..40);
            let predicted: Vec<String> =
                (0..n).map(|_| rng.random_range(0..4).to_string()).collect();
            let gold: Vec<String> =
                (0..n).map(|_| rng.random_range(0..4).to_string()).collect();
            let indicators: f64 = predicted
                .iter()
                .zip(&gold)
                .map(|(p, g)| if p == g { 1.0 } else { 0.0 })
                .sum::<f64>()
                / n as f64;
            let got = accuracy(&predicted, &gold).unwrap().value;
            assert!((got - 100.0 * indicators).abs() < 1e-12);
        }
    }

    #[test]
    fn bleu_identity_is_100() {
        let c = s(&["the cat sat on the mat", "hi"]);
        assert_eq!(bleu(&c, &c).unwrap().value, 100.0);
        let short = s(&["hi"]);
        assert_eq!(bleu(&short, &short).unwrap().value, 100.0);
    }

    #[test]
    fn bleu_smoothing_gives_positive_score() {
        // zero 4-gram (and 2,3-gram) overlap: smoothing must keep score > 0
        let h = s(&["a b c d"]);
        let r = s(&["a x c y"]);
        // oracle: p1 = 2/4; p2 = 1/(2*3); p3 = 1/(2*2); p4 = 1/(2*1); BP = 1
        let log_mean = ((2.0f64 / 4.0).ln()
            + (1.0f64 / 6.0).ln()
            + (1.0f64 / 4.0).ln()
            + (1.0f64 / 2.0).ln())
            / 4.0;
        let expected = 100.0 * log_mean.exp();
        let got = bleu(&h, &r).unwrap().value;
        assert!(got > 0.0);
        assert!((got - expected).abs() < 1e-9, "got {got}, expected {expected}");
    }

    #[test]
    fn bleu_brevity_penalty_halved_hypothesis() {
        // hyp_len = ref_len/2, all unigrams match, no higher-order matches:
        // p1 = 1, p2 = 1/(2*1), orders 3,4 have no hyp n-grams; BP = exp(-1)
        let h = s(&["d a"]);
        let r = s(&["a b c d"]);
        let expected = 100.0 * (-1.0f64).exp() * (0.5f64.ln() / 2.0).exp();
        let got = bleu(&h, &r).unwrap().value;
        assert!((got - expected).abs() < 1e-9, "got {got}, expected {expected}");
    }

    #[test]
    fn accuracy_basic() {
        assert_eq!(accuracy(&s(&["A", "B"]), &s(&["A", "B"])).unwrap().value, 100.0);
        assert_eq!(accuracy(&s(&["A", "B"]), &s(&["B", "A"])).unwrap().value, 0.0);
        let r = accuracy(&s(&["A", "B", "C"]), &s(&["A", "B", "D"])).unwrap();
        assert!((r.value - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{r}"), "accuracy=66.67 n=3");
    }

    fn report(v: f64) -> ScoreReport {
        ScoreReport {
            metric: MetricKind::Bleu,
            value: v,
            n_items: 1,
            params: serde_json::json!({}),
        }
    }

    #[test]
    fn select_checkpoint_argmax_and_ties() {
        let reports = vec![
            ("e1".to_string(), report(10.0)),
            ("e2".to_string(), report(12.0)),
            ("e3".to_string(), report(11.0)),
        ];
        assert_eq!(select_checkpoint(&reports).unwrap(), "e2");
        let tied = vec![("e1".to_string(), report(10.0)), ("e2".to_string(), report(10.0))];
        assert_eq!(select_checkpoint(&tied).unwrap(), "e1");
    }

    #[test]
    fn select_checkpoint_matches_linear_scan_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let reports: Vec<(String, ScoreReport)> = (0..10)
            .map(|i| (format!("e{i}"), report(rng.random_range(0.0..100.0))))
            .collect();
        let mut best = 0usize;
        for i in 1..reports.len() {
            if reports[i].1.value > reports[best].1.value {
                best = i;
            }
        }
        assert_eq!(select_checkpoint(&reports).unwrap(), reports[best].0);
    }

    #[test]
    fn select_checkpoint_rejects_mixed_metrics() {
        let mut a = report(1.0);
        a.metric = MetricKind::Chrfpp;
        let reports = vec![("e1".to_string(), a), ("e2".to_string(), report(2.0))];
        assert!(matches!(
            select_checkpoint(&reports),
            Err(MetricsError::MixedMetrics(_, _))
        ));
    }

    #[test]
    fn scores_invariant_under_joint_permutation() {
        let h = s(&["a b", "c d e", "f"]);
        let r = s(&["a b", "c x e", "g"]);
        let hp = s(&["f", "a b", "c d e"]);
        let rp = s(&["g", "a b", "c x e"]);
        let params = ChrfParams::default();
        assert!((chrfpp(&h, &r, &params).unwrap().value - chrfpp(&hp, &rp, &params).unwrap().value).abs() < 1e-12);
        assert!((bleu(&h, &r).unwrap().value - bleu(&hp, &rp).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn scores_monotone_under_identical_extension() {
        let h = s(&["a b c", "x"]);
        let r = s(&["a b d", "y"]);
        let base_chrf = chrfpp(&h, &r, &ChrfParams::default()).unwrap().value;
        let base_bleu = bleu(&h, &r).unwrap().value;
        let mut h2 = h.clone();
        let mut r2 = r.clone();
        h2.push("perfect match here".to_string());
        r2.push("perfect match here".to_string());
        assert!(chrfpp(&h2, &r2, &ChrfParams::default()).unwrap().value >= base_chrf);
        assert!(bleu(&h2, &r2).unwrap().value >= base_bleu);
    }
}
