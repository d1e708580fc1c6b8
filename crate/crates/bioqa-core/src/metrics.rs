//! BioASQ Phase-B scoring: Yes/No accuracy and per-class F1, Factoid
//! SAcc/LAcc/MRR over ranked top-5 lists, List precision/recall/F1 averaged
//! per question, and the challenge macro average.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::formats::predictions::{Prediction, PredictionFile};
use crate::model::{BioasqQuestion, QuestionType};
use crate::normalize::normalize_answer;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no gold answers supplied")]
    EmptyGolds,
    #[error("prediction id '{0}' does not appear in the gold set")]
    UnknownPredictionId(String),
    #[error("ranked list for '{id}' has {len} candidates; the factoid limit is 5")]
    RankedTooLong { id: String, len: usize },
    #[error("prediction for '{id}' has the wrong shape for a {expected} question")]
    TypeMismatch { id: String, expected: QuestionType },
}

/// Answer-equality mode. `Normalized` lowercases, collapses whitespace, and
/// strips edge punctuation before comparing; `Raw` compares strings as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum NormalizationMode {
    #[default]
    Normalized,
    Raw,
}

impl NormalizationMode {
    fn eq(&self, a: &str, b: &str) -> bool {
        match self {
            NormalizationMode::Normalized => normalize_answer(a) == normalize_answer(b),
            NormalizationMode::Raw => a == b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YesNoScores {
    pub accuracy: f64,
    pub yes_f1: f64,
    pub no_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactoidScores {
    pub strict_accuracy: f64,
    pub lenient_accuracy: f64,
    pub mrr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ListScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TypeCounts {
    pub yesno: usize,
    pub factoid: usize,
    pub list: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub yesno: Option<YesNoScores>,
    pub factoid: Option<FactoidScores>,
    pub list: Option<ListScores>,
    /// Unweighted mean of yes/no macro F1, factoid MRR, and list F1;
    /// present only when all three sections are.
    pub macro_average: Option<f64>,
    pub counts: TypeCounts,
}

/// Scores yes/no predictions. Gold questions without a prediction count as
/// wrong for accuracy and as false negatives of their class; prediction ids
/// must all exist in the gold set.
pub fn eval_yesno(
    preds: &BTreeMap<String, bool>,
    golds: &BTreeMap<String, bool>,
) -> Result<YesNoScores, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    if let Some(unknown) = preds.keys().find(|id| !golds.contains_key(*id)) {
        return Err(EvalError::UnknownPredictionId(unknown.clone()));
    }

    let mut correct = 0usize;
    // Confusion counts per class, treating that class as positive.
    let (mut tp_yes, mut fp_yes, mut fn_yes) = (0usize, 0usize, 0usize);
    let (mut tp_no, mut fp_no, mut fn_no) = (0usize, 0usize, 0usize);
    for (id, gold) in golds {
        match preds.get(id) {
            Some(pred) => {
                if pred == gold {
                    correct += 1;
                }
                match (gold, pred) {
                    (true, true) => tp_yes += 1,
                    (false, true) => {
                        fp_yes += 1;
                        fn_no += 1;
                    }
                    (true, false) => {
                        fn_yes += 1;
                        fp_no += 1;
                    }
                    (false, false) => tp_no += 1,
                }
            }
            None => {
                if *gold {
                    fn_yes += 1;
                } else {
                    fn_no += 1;
                }
            }
        }
    }

    let f1 = |tp: usize, fp: usize, fn_: usize| -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let yes_f1 = f1(tp_yes, fp_yes, fn_yes);
    let no_f1 = f1(tp_no, fp_no, fn_no);
    Ok(YesNoScores {
        accuracy: correct as f64 / golds.len() as f64,
        yes_f1,
        no_f1,
        macro_f1: (yes_f1 + no_f1) / 2.0,
    })
}

/// Scores ranked factoid candidates: strict accuracy (rank 1 correct),
/// lenient accuracy (any rank correct), and mean reciprocal rank.
pub fn eval_factoid(
    preds: &BTreeMap<String, Vec<String>>,
    golds: &BTreeMap<String, Vec<String>>,
    mode: NormalizationMode,
) -> Result<FactoidScores, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    if let Some(unknown) = preds.keys().find(|id| !golds.contains_key(*id)) {
        return Err(EvalError::UnknownPredictionId(unknown.clone()));
    }
    for (id, ranked) in preds {
        if ranked.len() > 5 {
            return Err(EvalError::RankedTooLong {
                id: id.clone(),
                len: ranked.len(),
            });
        }
    }

    let mut strict = 0usize;
    let mut lenient = 0usize;
    let mut reciprocal_sum = 0.0f64;
    for (id, synonyms) in golds {
        let ranked = preds.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let first_correct = ranked.iter().position(|candidate| {
            synonyms.iter().any(|gold| mode.eq(candidate, gold))
        });
        if let Some(rank0) = first_correct {
            lenient += 1;
            reciprocal_sum += 1.0 / (rank0 + 1) as f64;
            if rank0 == 0 {
                strict += 1;
            }
        }
    }
    let n = golds.len() as f64;
    Ok(FactoidScores {
        strict_accuracy: strict as f64 / n,
        lenient_accuracy: lenient as f64 / n,
        mrr: reciprocal_sum / n,
    })
}

/// Maximum bipartite matching (Kuhn's augmenting paths): `edges[p]` lists
/// the gold items prediction `p` may credit; each item is creditable once.
fn max_matching(edges: &[Vec<usize>], n_items: usize) -> usize {
    let mut item_owner: Vec<Option<usize>> = vec![None; n_items];
    let mut matched = 0usize;

    fn try_assign(
        pred: usize,
        edges: &[Vec<usize>],
        visited: &mut [bool],
        item_owner: &mut [Option<usize>],
    ) -> bool {
        for &item in &edges[pred] {
            if visited[item] {
                continue;
            }
            visited[item] = true;
            if item_owner[item].is_none()
                || try_assign(item_owner[item].unwrap(), edges, visited, item_owner)
            {
                item_owner[item] = Some(pred);
                return true;
            }
        }
        false
    }

    for pred in 0..edges.len() {
        let mut visited = vec![false; n_items];
        if try_assign(pred, edges, &mut visited, &mut item_owner) {
            matched += 1;
        }
    }
    matched
}

/// Scores list predictions per question, then takes unweighted means. A
/// prediction credits at most one gold item and each item is creditable
/// once; duplicate predictions of the same item count against precision.
pub fn eval_list(
    preds: &BTreeMap<String, Vec<String>>,
    golds: &BTreeMap<String, Vec<Vec<String>>>,
    mode: NormalizationMode,
) -> Result<ListScores, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    if let Some(unknown) = preds.keys().find(|id| !golds.contains_key(*id)) {
        return Err(EvalError::UnknownPredictionId(unknown.clone()));
    }

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for (id, items) in golds {
        let predictions = preds.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let (p, r, f) = list_question_scores(predictions, items, mode);
        precision_sum += p;
        recall_sum += r;
        f1_sum += f;
    }
    let n = golds.len() as f64;
    Ok(ListScores {
        precision: precision_sum / n,
        recall: recall_sum / n,
        f1: f1_sum / n,
    })
}

fn list_question_scores(
    predictions: &[String],
    items: &[Vec<String>],
    mode: NormalizationMode,
) -> (f64, f64, f64) {
    if predictions.is_empty() || items.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let edges: Vec<Vec<usize>> = predictions
        .iter()
        .map(|pred| {
            items
                .iter()
                .enumerate()
                .filter(|(_, synonyms)| synonyms.iter().any(|s| mode.eq(pred, s)))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let matched = max_matching(&edges, items.len()) as f64;
    let precision = matched / predictions.len() as f64;
    let recall = matched / items.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Unweighted mean of the three per-type headline scores.
pub fn macro_average(yesno_macro_f1: f64, factoid_mrr: f64, list_f1: f64) -> f64 {
    (yesno_macro_f1 + factoid_mrr + list_f1) / 3.0
}

/// Scores a prediction file against gold questions, producing the full
/// report. Each prediction must match its question's type.
pub fn evaluate(
    golden: &[BioasqQuestion],
    predictions: &PredictionFile,
    mode: NormalizationMode,
) -> Result<MetricsReport, EvalError> {
    let mut yesno_golds: BTreeMap<String, bool> = BTreeMap::new();
    let mut factoid_golds: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut list_golds: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for q in golden {
        match q.qtype {
            QuestionType::YesNo => {
                yesno_golds.insert(q.id.clone(), q.gold.yes_label.unwrap_or_default());
            }
            QuestionType::Factoid => {
                let synonyms = q.gold.items.iter().flatten().cloned().collect();
                factoid_golds.insert(q.id.clone(), synonyms);
            }
            QuestionType::List => {
                list_golds.insert(q.id.clone(), q.gold.items.clone());
            }
        }
    }

    let mut yesno_preds: BTreeMap<String, bool> = BTreeMap::new();
    let mut factoid_preds: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut list_preds: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (id, prediction) in &predictions.entries {
        if yesno_golds.contains_key(id) {
            match prediction {
                Prediction::YesNo(b) => {
                    yesno_preds.insert(id.clone(), *b);
                }
                _ => {
                    return Err(EvalError::TypeMismatch {
                        id: id.clone(),
                        expected: QuestionType::YesNo,
                    })
                }
            }
        } else if factoid_golds.contains_key(id) {
            match prediction {
                Prediction::Ranked(v) => {
                    factoid_preds.insert(id.clone(), v.clone());
                }
                _ => {
                    return Err(EvalError::TypeMismatch {
                        id: id.clone(),
                        expected: QuestionType::Factoid,
                    })
                }
            }
        } else if list_golds.contains_key(id) {
            match prediction {
                Prediction::Ranked(v) | Prediction::ListSet(v) => {
                    list_preds.insert(id.clone(), v.clone());
                }
                Prediction::YesNo(_) => {
                    return Err(EvalError::TypeMismatch {
                        id: id.clone(),
                        expected: QuestionType::List,
                    })
                }
            }
        } else {
            return Err(EvalError::UnknownPredictionId(id.clone()));
        }
    }

    let yesno = if yesno_golds.is_empty() {
        None
    } else {
        Some(eval_yesno(&yesno_preds, &yesno_golds)?)
    };
    let factoid = if factoid_golds.is_empty() {
        None
    } else {
        Some(eval_factoid(&factoid_preds, &factoid_golds, mode)?)
    };
    let list = if list_golds.is_empty() {
        None
    } else {
        Some(eval_list(&list_preds, &list_golds, mode)?)
    };
    let macro_avg = match (&yesno, &factoid, &list) {
        (Some(y), Some(f), Some(l)) => Some(macro_average(y.macro_f1, f.mrr, l.f1)),
        _ => None,
    };

    Ok(MetricsReport {
        yesno,
        factoid,
        list,
        macro_average: macro_avg,
        counts: TypeCounts {
            yesno: yesno_golds.len(),
            factoid: factoid_golds.len(),
            list: list_golds.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map<V: Clone>(pairs: &[(&str, V)]) -> BTreeMap<String, V> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn yesno_all_correct() {
        let golds = map(&[("a", true), ("b", true), ("c", false), ("d", false)]);
        let scores = eval_yesno(&golds, &golds).unwrap();
        assert_eq!(scores.accuracy, 1.0);
        assert_eq!(scores.macro_f1, 1.0);
    }

    #[test]
    fn yesno_all_predicted_yes() {
        let golds = map(&[("a", true), ("b", true), ("c", false), ("d", false)]);
        let preds = map(&[("a", true), ("b", true), ("c", true), ("d", true)]);
        let scores = eval_yesno(&preds, &golds).unwrap();
        assert_eq!(scores.accuracy, 0.5);
        assert!((scores.yes_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(scores.no_f1, 0.0);
        assert!((scores.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn yesno_single_wrong_and_errors() {
        let golds = map(&[("a", true)]);
        let preds = map(&[("a", false)]);
        assert_eq!(eval_yesno(&preds, &golds).unwrap().accuracy, 0.0);

        assert!(matches!(
            eval_yesno(&map::<bool>(&[]), &map::<bool>(&[])),
            Err(EvalError::EmptyGolds)
        ));
        assert!(matches!(
            eval_yesno(&map(&[("zz", true)]), &golds),
            Err(EvalError::UnknownPredictionId(_))
        ));
    }

    #[test]
    fn yesno_missing_prediction_hurts_recall_only() {
        let golds = map(&[("a", true), ("b", false)]);
        let preds = map(&[("a", true)]);
        let scores = eval_yesno(&preds, &golds).unwrap();
        assert_eq!(scores.accuracy, 0.5);
        assert_eq!(scores.yes_f1, 1.0);
        assert_eq!(scores.no_f1, 0.0);
    }

    #[test]
    fn factoid_rank_positions() {
        let golds = map(&[("q", strings(&["TGM1"]))]);
        let preds = map(&[("q", strings(&["wrong", "tgm1"]))]);
        let s = eval_factoid(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert_eq!(s.strict_accuracy, 0.0);
        assert_eq!(s.lenient_accuracy, 1.0);
        assert_eq!(s.mrr, 0.5);

        // Raw mode is case-sensitive.
        let s = eval_factoid(&preds, &golds, NormalizationMode::Raw).unwrap();
        assert_eq!(s.lenient_accuracy, 0.0);
    }

    #[test]
    fn factoid_mrr_over_three_questions() {
        let golds = map(&[
            ("q1", strings(&["a"])),
            ("q2", strings(&["b"])),
            ("q3", strings(&["c"])),
        ]);
        let preds = map(&[
            ("q1", strings(&["a", "x"])),
            ("q2", strings(&["x", "y", "b"])),
            ("q3", strings(&["x"])),
        ]);
        let s = eval_factoid(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert!((s.mrr - 4.0 / 9.0).abs() < 1e-12);
        assert!((s.strict_accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.lenient_accuracy - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn factoid_rejects_six_candidates() {
        let golds = map(&[("q", strings(&["a"]))]);
        let preds = map(&[("q", strings(&["1", "2", "3", "4", "5", "6"]))]);
        assert!(matches!(
            eval_factoid(&preds, &golds, NormalizationMode::Normalized),
            Err(EvalError::RankedTooLong { .. })
        ));
    }

    fn list_golds(items: &[&[&str]]) -> Vec<Vec<String>> {
        items.iter().map(|i| strings(i)).collect()
    }

    #[test]
    fn list_perfect_and_partial() {
        let golds = map(&[("q", list_golds(&[&["a"], &["b"], &["c"]]))]);
        let preds = map(&[("q", strings(&["a", "b", "c"]))]);
        let s = eval_list(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));

        let preds = map(&[("q", strings(&["a", "b", "d"]))]);
        let s = eval_list(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn list_empty_prediction_scores_zero() {
        let golds = map(&[("q", list_golds(&[&["a"]]))]);
        let preds: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let s = eval_list(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn list_duplicate_predictions_cost_precision() {
        let golds = map(&[("q", list_golds(&[&["a", "alpha"], &["b"]]))]);
        // "a" and "alpha" are synonyms of the same item: only one credits.
        let preds = map(&[("q", strings(&["a", "alpha", "b"]))]);
        let s = eval_list(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn list_matching_is_maximal_not_greedy() {
        // pred0 matches items 0 and 1; pred1 matches only item 0. A greedy
        // first-match assignment would credit one; the maximum is two.
        let golds = map(&[("q", list_golds(&[&["shared", "only0"], &["shared2"]]))]);
        let preds = map(&[("q", strings(&["shared2", "only0"]))]);
        // pred "shared2" matches item 1; "only0" matches item 0 → 2 matched.
        let s = eval_list(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert_eq!(s.recall, 1.0);

        let golds = map(&[("q", list_golds(&[&["x", "y"], &["x"]]))]);
        let preds = map(&[("q", strings(&["x", "y"]))]);
        // "x" could credit either item; maximal matching credits both.
        let s = eval_list(&preds, &golds, NormalizationMode::Normalized).unwrap();
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.precision, 1.0);
    }

    #[test]
    fn macro_average_is_plain_mean() {
        assert!((macro_average(0.8518, 0.5677, 0.5582) - 0.6592).abs() < 5e-5);
        assert!((macro_average(0.8663, 0.4438, 0.3718) - 0.5606).abs() < 5e-5);
        assert_eq!(macro_average(1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn scores_are_permutation_invariant() {
        let golds = map(&[("a", strings(&["x"])), ("b", strings(&["y"])), ("c", strings(&["z"]))]);
        let preds = map(&[("a", strings(&["x"])), ("b", strings(&["q", "y"]))]);
        let s1 = eval_factoid(&preds, &golds, NormalizationMode::Normalized).unwrap();
        // Rebuild the maps in reverse insertion order; scores must agree.
        let golds2: BTreeMap<String, Vec<String>> = golds.into_iter().rev().collect();
        let s2 = eval_factoid(&preds, &golds2, NormalizationMode::Normalized).unwrap();
        assert_eq!(s1, s2);
    }
}
