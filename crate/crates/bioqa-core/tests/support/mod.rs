//! Independent reference implementations for oracle tests. Everything here
//! recomputes results from definitions, without calling the code paths it
//! checks (beyond shared context building, which is exercised separately).

use std::collections::BTreeMap;

use bioqa_core::convert::{build_contexts, ContextStrategy};
use bioqa_core::model::{AnswerSpan, BioasqQuestion, SquadInstance};
use bioqa_core::normalize::normalize_answer;

/// Every boundary-checked occurrence of `answer` in `context`, by testing
/// each character offset with a char-vector window comparison.
pub fn brute_force_spans(context: &str, answer: &str, boundary: bool) -> Vec<(usize, usize)> {
    let ctx: Vec<char> = context.chars().collect();
    let ans: Vec<char> = answer.chars().collect();
    let mut out = Vec::new();
    if ans.is_empty() || ans.len() > ctx.len() {
        return out;
    }
    for start in 0..=ctx.len() - ans.len() {
        if ctx[start..start + ans.len()] != ans[..] {
            continue;
        }
        if boundary {
            let before_ok = start == 0 || !ctx[start - 1].is_alphanumeric();
            let end = start + ans.len();
            let after_ok = end == ctx.len() || !ctx[end].is_alphanumeric();
            if !(before_ok && after_ok) {
                continue;
            }
        }
        out.push((start, start + ans.len()));
    }
    out
}

/// Rebuilds the expected instance list for one question from definitions.
pub fn oracle_enumerate(question: &BioasqQuestion, strategy: ContextStrategy) -> Vec<SquadInstance> {
    let (contexts, _) = build_contexts(question, strategy).expect("contexts");
    let mut instances = Vec::new();
    for (ci, ctx) in contexts.iter().enumerate() {
        for (ii, item) in question.gold.items.iter().enumerate() {
            let mut spans: Vec<AnswerSpan> = Vec::new();
            for synonym in item {
                for (s, e) in brute_force_spans(&ctx.text, synonym, true) {
                    spans.push(AnswerSpan {
                        start_char: s,
                        end_char: e,
                        text: synonym.clone(),
                    });
                }
            }
            spans.sort();
            spans.dedup();
            if spans.is_empty() {
                continue;
            }
            instances.push(SquadInstance {
                id: format!("{}_{}_{}", question.id, ci, ii),
                question: question.body.clone(),
                context: ctx.text.clone(),
                answers: spans,
            });
        }
    }
    instances
}

/// Reference SAcc / LAcc / MRR, scanning every rank per question.
pub fn reference_factoid(
    preds: &BTreeMap<String, Vec<String>>,
    golds: &BTreeMap<String, Vec<String>>,
) -> (f64, f64, f64) {
    let mut strict = 0.0;
    let mut lenient = 0.0;
    let mut mrr = 0.0;
    for (id, synonyms) in golds {
        let ranked = preds.get(id).cloned().unwrap_or_default();
        let mut best_rank: Option<usize> = None;
        for (rank, candidate) in ranked.iter().enumerate() {
            let hit = synonyms
                .iter()
                .any(|g| normalize_answer(g) == normalize_answer(candidate));
            if hit {
                best_rank = Some(best_rank.map_or(rank, |b| b.min(rank)));
            }
        }
        if let Some(rank) = best_rank {
            lenient += 1.0;
            mrr += 1.0 / (rank as f64 + 1.0);
            if rank == 0 {
                strict += 1.0;
            }
        }
    }
    let n = golds.len() as f64;
    (strict / n, lenient / n, mrr / n)
}

/// Exhaustive maximum credit: tries every injective assignment of
/// predictions to gold items (feasible for the ≤ 6-item fixtures).
fn exhaustive_credit(edges: &[Vec<usize>], used: u32, pred: usize) -> usize {
    if pred == edges.len() {
        return 0;
    }
    // Skip this prediction.
    let mut best = exhaustive_credit(edges, used, pred + 1);
    for &item in &edges[pred] {
        if used & (1 << item) == 0 {
            best = best.max(1 + exhaustive_credit(edges, used | (1 << item), pred + 1));
        }
    }
    best
}

/// Reference per-question list scores via exhaustive matching.
pub fn reference_list_question(predictions: &[String], items: &[Vec<String>]) -> (f64, f64, f64) {
    if predictions.is_empty() || items.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let edges: Vec<Vec<usize>> = predictions
        .iter()
        .map(|p| {
            items
                .iter()
                .enumerate()
                .filter(|(_, synonyms)| {
                    synonyms
                        .iter()
                        .any(|s| normalize_answer(s) == normalize_answer(p))
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let matched = exhaustive_credit(&edges, 0, 0) as f64;
    let p = matched / predictions.len() as f64;
    let r = matched / items.len() as f64;
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}
