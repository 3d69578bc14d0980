//! Multiple-choice scoring with answer-order permutation averaging.
//!
//! A question is rendered once per answer order; the backend scores the
//! space-prefixed display labels after the terminal `Answer:` line; each
//! displayed label's probability is credited back to the option content shown
//! at that position; the per-option distributions are averaged over all
//! orders and the option with the highest average probability wins. This
//! keeps the estimate stable against positional bias.
//!
//! Display labels are positional: after reordering, the first displayed
//! option is always labeled with the item's first canonical label, so the
//! candidate set is identical across orders while the contents move.

use std::collections::{BTreeMap, HashSet};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, CandidateProbe};
use crate::corpus::{LangTag, McqItem, McqOption, MAX_OPTIONS, MIN_OPTIONS};
use crate::metrics::{accuracy, MetricsError, ScoreReport};

#[derive(Debug, thiserror::Error)]
pub enum McqError {
    #[error("option count {0} outside {MIN_OPTIONS}..={MAX_OPTIONS}")]
    OptionCount(usize),
    #[error("max_sampled must be >= 1")]
    EmptySample,
    #[error("order {0:?} is not a permutation of 0..{1}")]
    NotAPermutation(Vec<usize>, usize),
    #[error("plan orders are for {plan} options but item has {item}")]
    PlanMismatch { plan: usize, item: usize },
    #[error("no languages requested")]
    NoLanguages,
    #[error("missing {what} text for language {lang}")]
    MissingLanguage { lang: LangTag, what: &'static str },
    #[error("invalid item `{id}`: {reason}")]
    InvalidItem { id: String, reason: String },
    #[error("order {order:?} failed: {source}")]
    OrderFailed {
        order: Vec<usize>,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("all {0} items failed; no accuracy to report")]
    NoSuccessfulItems(usize),
}

/// Option label scheme: `A..P` or `1..16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScheme {
    Alphabetic,
    Numeric,
}

impl LabelScheme {
    /// The first `n` labels of the scheme; `n` capped at 16.
    pub fn labels(self, n: usize) -> Result<Vec<String>, McqError> {
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n) {
            return Err(McqError::OptionCount(n));
        }
        Ok((0..n)
            .map(|i| match self {
                LabelScheme::Alphabetic => char::from(b'A' + i as u8).to_string(),
                LabelScheme::Numeric => (i + 1).to_string(),
            })
            .collect())
    }
}

impl std::str::FromStr for LabelScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alphabetic" => Ok(LabelScheme::Alphabetic),
            "numeric" => Ok(LabelScheme::Numeric),
            other => Err(format!("unknown label scheme `{other}`")),
        }
    }
}

/// Replace option labels positionally by the scheme's sequence and remap the
/// gold label to the new label of the same option.
pub fn relabel(item: &McqItem, scheme: LabelScheme) -> Result<McqItem, McqError> {
    let labels = scheme.labels(item.options.len())?;
    let gold_index = item.gold_index().ok_or_else(|| McqError::InvalidItem {
        id: item.id.clone(),
        reason: format!("gold `{}` not among options", item.gold_label),
    })?;
    let mut out = item.clone();
    for (opt, label) in out.options.iter_mut().zip(&labels) {
        opt.label = label.clone();
    }
    out.gold_label = labels[gold_index].clone();
    Ok(out)
}

/// The answer orders to score an item under: a set of distinct permutations
/// of the option indices, exhaustive when it covers all n!.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderPlan {
    pub orders: Vec<Vec<usize>>,
    pub exhaustive: bool,
    pub seed: u64,
}

impl OrderPlan {
    /// All n! permutations, lexicographic. Only sensible for small n.
    pub fn exhaustive(n_options: usize) -> Result<Self, McqError> {
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n_options) {
            return Err(McqError::OptionCount(n_options));
        }
        let orders: Vec<Vec<usize>> = (0..n_options).permutations(n_options).collect();
        Ok(OrderPlan {
            orders,
            exhaustive: true,
            seed: 0,
        })
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Plan answer orders for an `n_options`-way item: all permutations for 2–3
/// options, otherwise `min(max_sampled, n!)` distinct permutations sampled
/// uniformly without replacement from a generator seeded with `seed`.
pub fn plan_orders(n_options: usize, max_sampled: usize, seed: u64) -> Result<OrderPlan, McqError> {
    if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n_options) {
        return Err(McqError::OptionCount(n_options));
    }
    if max_sampled == 0 {
        return Err(McqError::EmptySample);
    }
    let total = factorial(n_options);
    let target = if n_options <= 3 {
        total
    } else {
        max_sampled.min(total)
    };
    if target == total {
        let orders: Vec<Vec<usize>> = (0..n_options).permutations(n_options).collect();
        return Ok(OrderPlan {
            orders,
            exhaustive: true,
            seed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(target);
    let mut orders = Vec::with_capacity(target);
    let mut current: Vec<usize> = (0..n_options).collect();
    while orders.len() < target {
        current.shuffle(&mut rng);
        if seen.insert(current.clone()) {
            orders.push(current.clone());
        }
    }
    Ok(OrderPlan {
        orders,
        exhaustive: false,
        seed,
    })
}

fn check_permutation(order: &[usize], n: usize) -> Result<(), McqError> {
    if order.len() != n {
        return Err(McqError::NotAPermutation(order.to_vec(), n));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return Err(McqError::NotAPermutation(order.to_vec(), n));
        }
        seen[i] = true;
    }
    Ok(())
}

fn option_text(opt: &McqOption, lang: LangTag) -> Result<&str, McqError> {
    opt.text_by_lang
        .get(&lang)
        .map(|s| s.as_str())
        .ok_or(McqError::MissingLanguage { lang, what: "option" })
}

/// Render the multiple-choice prompt for one answer order.
///
/// Layout: optional context lines (one per requested language that has one),
/// a blank line, one `Question: …` line per language, a blank line, one
/// `Possible Answers: …` line per language with options shown in `order` as
/// `LABEL) text` segments joined by `"; "`, a blank line, and the terminal
/// `Answer:` with no trailing answer. Display labels are reassigned
/// positionally after ordering.
pub fn render_mcq_prompt(
    item: &McqItem,
    order: &[usize],
    langs: &[LangTag],
) -> Result<String, McqError> {
    if langs.is_empty() {
        return Err(McqError::NoLanguages);
    }
    check_permutation(order, item.options.len())?;

    let mut blocks: Vec<String> = Vec::new();

    let context_lines: Vec<&str> = langs
        .iter()
        .filter_map(|l| item.context_by_lang.get(l).map(|s| s.as_str()))
        .collect();
    if !context_lines.is_empty() {
        blocks.push(context_lines.join("\n"));
    }

    let mut question_lines = Vec::with_capacity(langs.len());
    for &lang in langs {
        let q = item
            .question_by_lang
            .get(&lang)
            .ok_or(McqError::MissingLanguage { lang, what: "question" })?;
        question_lines.push(format!("Question: {q}"));
    }
    blocks.push(question_lines.join("\n"));

    let mut answer_lines = Vec::with_capacity(langs.len());
    for &lang in langs {
        let segments: Result<Vec<String>, McqError> = order
            .iter()
            .enumerate()
            .map(|(position, &opt_idx)| {
                let display_label = &item.options[position].label;
                let text = option_text(&item.options[opt_idx], lang)?;
                Ok(format!("{display_label}) {text}"))
            })
            .collect();
        answer_lines.push(format!("Possible Answers: {}", segments?.join("; ")));
    }
    blocks.push(answer_lines.join("\n"));

    blocks.push("Answer:".to_string());
    Ok(blocks.join("\n\n"))
}

/// The outcome of permutation-averaged scoring for one item: the averaged
/// per-option distribution on canonical labels, the chosen label, and every
/// per-order distribution for audit.
#[derive(Debug, Clone, Serialize)]
pub struct AveragedVerdict {
    pub avg_probs: BTreeMap<String, f64>,
    pub chosen: String,
    pub per_order: Vec<(Vec<usize>, BTreeMap<String, f64>)>,
}

/// Argmax over canonical labels; exact ties break to the lexicographically
/// smallest label.
fn argmax_label(probs: &BTreeMap<String, f64>) -> String {
    let mut best: Option<(&String, f64)> = None;
    for (label, &p) in probs {
        match best {
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((label, p)),
        }
    }
    best.expect("non-empty distribution").0.clone()
}

/// Score one item under a plan: render each order, probe the space-prefixed
/// display labels, credit probabilities back to option content, renormalize,
/// and average arithmetically over orders.
///
/// Any order-level backend failure fails the whole item (recorded with the
/// failed order); partial averages would silently change the estimator.
pub fn score_item(
    item: &McqItem,
    plan: &OrderPlan,
    langs: &[LangTag],
    backend: &dyn Backend,
) -> Result<AveragedVerdict, McqError> {
    let n = item.options.len();
    if let Err(reason) = item.validate() {
        return Err(McqError::InvalidItem {
            id: item.id.clone(),
            reason,
        });
    }
    if plan.orders.is_empty() {
        return Err(McqError::EmptySample);
    }
    for order in &plan.orders {
        if order.len() != n {
            return Err(McqError::PlanMismatch {
                plan: order.len(),
                item: n,
            });
        }
    }

    let labels: Vec<&str> = item.options.iter().map(|o| o.label.as_str()).collect();
    let candidates: Vec<String> = labels.iter().map(|l| format!(" {l}")).collect();

    let mut sums = vec![0.0f64; n];
    let mut per_order = Vec::with_capacity(plan.orders.len());
    for order in &plan.orders {
        let prompt = render_mcq_prompt(item, order, langs)?;
        let probe = CandidateProbe::new(&prompt, candidates.clone())?;
        let dist = backend
            .probe_candidates(&probe)
            .map_err(|source| McqError::OrderFailed {
                order: order.clone(),
                source,
            })?;
        // credit the probability of the label displayed at each position to
        // the option content shown there, then renormalize
        let mut by_option = vec![0.0f64; n];
        for (position, &opt_idx) in order.iter().enumerate() {
            by_option[opt_idx] += dist.get(&candidates[position]);
        }
        let total: f64 = by_option.iter().sum();
        if total > 0.0 {
            for p in &mut by_option {
                *p /= total;
            }
        }
        let dist_on_labels: BTreeMap<String, f64> = labels
            .iter()
            .zip(&by_option)
            .map(|(l, &p)| (l.to_string(), p))
            .collect();
        per_order.push((order.clone(), dist_on_labels));
        for (sum, p) in sums.iter_mut().zip(&by_option) {
            *sum += p;
        }
    }

    let n_orders = plan.orders.len() as f64;
    let avg_probs: BTreeMap<String, f64> = labels
        .iter()
        .zip(&sums)
        .map(|(l, &s)| (l.to_string(), s / n_orders))
        .collect();
    let chosen = argmax_label(&avg_probs);
    Ok(AveragedVerdict {
        avg_probs,
        chosen,
        per_order,
    })
}

/// One line of the verdict log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    pub orders: Vec<Vec<usize>>,
    pub per_order_probs: Vec<BTreeMap<String, f64>>,
    pub avg: BTreeMap<String, f64>,
    pub chosen: String,
    pub gold: String,
    pub correct: bool,
}

/// An item that could not be scored, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct ItemFailure {
    pub id: String,
    pub error: String,
}

/// Full evaluation output: the accuracy report over scored items, the
/// per-item verdict log in input order, and failures counted separately.
#[derive(Debug)]
pub struct McqEvaluation {
    pub report: ScoreReport,
    pub verdicts: Vec<VerdictRecord>,
    pub failures: Vec<ItemFailure>,
}

/// Per-item plan seed: distinct per item, reproducible across runs.
fn derive_item_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Evaluate a dataset: plan orders per item (seeded per item index), score
/// with permutation averaging, and report accuracy of chosen vs gold.
/// Item-level failures are excluded from accuracy and returned separately.
pub fn evaluate_mcq(
    items: &[McqItem],
    max_orders: usize,
    seed: u64,
    langs: &[LangTag],
    backend: &dyn Backend,
) -> Result<McqEvaluation, McqError> {
    evaluate_mcq_concurrent(items, max_orders, seed, langs, backend, 1)
}

/// [`evaluate_mcq`] with items scored by up to `workers` threads. The
/// verdict log stays ordered by item index regardless of completion order.
pub fn evaluate_mcq_concurrent(
    items: &[McqItem],
    max_orders: usize,
    seed: u64,
    langs: &[LangTag],
    backend: &dyn Backend,
    workers: usize,
) -> Result<McqEvaluation, McqError> {
    let indexed: Vec<(usize, &McqItem)> = items.iter().enumerate().collect();
    let outcomes = crate::parallel::par_map(&indexed, workers, |&(i, item)| {
        plan_orders(item.options.len(), max_orders, derive_item_seed(seed, i))
            .and_then(|plan| score_item(item, &plan, langs, backend).map(|v| (plan, v)))
    });

    let mut verdicts = Vec::new();
    let mut failures = Vec::new();
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for (item, outcome) in items.iter().zip(outcomes) {
        match outcome {
            Ok((plan, verdict)) => {
                let correct = verdict.chosen == item.gold_label;
                predicted.push(verdict.chosen.clone());
                gold.push(item.gold_label.clone());
                verdicts.push(VerdictRecord {
                    id: item.id.clone(),
                    orders: plan.orders,
                    per_order_probs: verdict.per_order.into_iter().map(|(_, d)| d).collect(),
                    avg: verdict.avg_probs,
                    chosen: verdict.chosen,
                    gold: item.gold_label.clone(),
                    correct,
                });
            }
            Err(e) => failures.push(ItemFailure {
                id: item.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    if predicted.is_empty() {
        return Err(McqError::NoSuccessfulItems(items.len()));
    }
    let report = accuracy(&predicted, &gold)?;
    Ok(McqEvaluation {
        report,
        verdicts,
        failures,
    })
}
