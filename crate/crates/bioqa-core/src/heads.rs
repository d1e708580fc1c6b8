//! Task heads over a pluggable encoder: a sigmoid yes/no classifier on the
//! sequence-level vector and a 2×H span head producing independent start
//! and end softmax distributions over positions, plus the matching losses,
//! top-k span decoding, and a finite-difference gradient checker.
//!
//! All arithmetic is double precision; softmax and the logit-space binary
//! cross entropy use the usual max-subtraction / softplus stabilizations.

use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("gold index {index} out of range for sequence length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("gold span has start {start} after end {end}")]
    InvertedSpan { start: usize, end: usize },
    #[error("hidden states need {expected} provenance entries, got {got}")]
    ProvenanceMismatch { expected: usize, got: usize },
    #[error("sequence must be non-empty")]
    EmptySequence,
}

/// Where a sequence position came from, with character offsets into the
/// source string for question/context tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenOrigin {
    Cls,
    Sep,
    Question { start_char: usize, end_char: usize },
    Context { start_char: usize, end_char: usize },
}

/// An s × H block of hidden vectors with per-position provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    values: Array2<f64>,
    provenance: Vec<TokenOrigin>,
}

impl HiddenStates {
    pub fn new(values: Array2<f64>, provenance: Vec<TokenOrigin>) -> Result<Self, HeadError> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(HeadError::EmptySequence);
        }
        if provenance.len() != values.nrows() {
            return Err(HeadError::ProvenanceMismatch {
                expected: values.nrows(),
                got: provenance.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HeadError::NonFinite("hidden states"));
        }
        Ok(HiddenStates { values, provenance })
    }

    /// For tests: hidden states with placeholder provenance.
    pub fn unattributed(values: Array2<f64>) -> Result<Self, HeadError> {
        let provenance = (0..values.nrows())
            .map(|i| TokenOrigin::Context {
                start_char: i,
                end_char: i + 1,
            })
            .collect();
        HiddenStates::new(values, provenance)
    }

    pub fn seq_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn hidden_size(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn provenance(&self) -> &[TokenOrigin] {
        &self.provenance
    }

    /// The sequence-level vector (position 0).
    pub fn cls(&self) -> ArrayView1<'_, f64> {
        self.values.row(0)
    }
}

/// 1 × H yes/no head. The optional bias is off by default, matching heads
/// that are a pure linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct YesNoHead {
    pub weights: Array1<f64>,
    pub bias: Option<f64>,
}

impl YesNoHead {
    pub fn zeros(hidden: usize, with_bias: bool) -> Self {
        YesNoHead {
            weights: Array1::zeros(hidden),
            bias: with_bias.then_some(0.0),
        }
    }
}

/// 2 × H span head; row 0 scores start positions, row 1 end positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanHead {
    pub weights: Array2<f64>,
    pub bias: Option<[f64; 2]>,
}

impl SpanHead {
    pub fn zeros(hidden: usize, with_bias: bool) -> Self {
        SpanHead {
            weights: Array2::zeros((2, hidden)),
            bias: with_bias.then_some([0.0, 0.0]),
        }
    }
}

/// A decoded answer span over token indices (`end` inclusive) with its
/// probability-product score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Numerically stable logistic function.
pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The raw classifier score `cls · wᵀ (+ bias)`.
pub fn yes_logit(cls: ArrayView1<'_, f64>, head: &YesNoHead) -> Result<f64, HeadError> {
    if cls.iter().any(|v| !v.is_finite()) || head.weights.iter().any(|v| !v.is_finite()) {
        return Err(HeadError::NonFinite("yes_logit inputs"));
    }
    let logit = cls.dot(&head.weights) + head.bias.unwrap_or(0.0);
    if !logit.is_finite() {
        return Err(HeadError::NonFinite("yes_logit"));
    }
    Ok(logit)
}

/// Sigmoid of the classifier score.
pub fn yes_probability(cls: ArrayView1<'_, f64>, head: &YesNoHead) -> Result<f64, HeadError> {
    Ok(stable_sigmoid(yes_logit(cls, head)?))
}

/// Binary cross entropy given a probability. Prefer
/// [`bce_loss_from_logit`] when the logit is available; it avoids the
/// cancellation this form inherits from its input.
pub fn bce_loss(p: f64, label: bool) -> Result<f64, HeadError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(HeadError::InvalidProbability(p));
    }
    let a = if label { 1.0 } else { 0.0 };
    // ln(1 - p) via ln_1p keeps precision for p near 0.
    Ok(-(a * p.ln() + (1.0 - a) * (-p).ln_1p()))
}

/// Binary cross entropy computed in log space from the logit:
/// `softplus(logit) - label * logit`, exact for any finite logit.
pub fn bce_loss_from_logit(logit: f64, label: bool) -> f64 {
    let a = if label { 1.0 } else { 0.0 };
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    softplus - a * logit
}

/// Max-subtracted softmax.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Array1<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.sum();
    exps / sum
}

/// Log-softmax, used by training so span losses never take `ln(0)`.
pub fn log_softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&x| x - log_sum).collect()
}

/// Start and end position distributions: independent softmaxes of the span
/// head's two rows applied to every hidden vector.
pub fn span_distributions(
    hidden: &HiddenStates,
    head: &SpanHead,
) -> Result<(Array1<f64>, Array1<f64>), HeadError> {
    let logits = span_logits(hidden, head)?;
    Ok((softmax(logits.0.view()), softmax(logits.1.view())))
}

/// The unnormalized position scores `(h · m_startᵀ, h · m_endᵀ)`.
pub fn span_logits(
    hidden: &HiddenStates,
    head: &SpanHead,
) -> Result<(Array1<f64>, Array1<f64>), HeadError> {
    if head.weights.iter().any(|v| !v.is_finite()) {
        return Err(HeadError::NonFinite("span head weights"));
    }
    let bias = head.bias.unwrap_or([0.0, 0.0]);
    let start = hidden.values.dot(&head.weights.row(0)) + bias[0];
    let end = hidden.values.dot(&head.weights.row(1)) + bias[1];
    if start.iter().chain(end.iter()).any(|v| !v.is_finite()) {
        return Err(HeadError::NonFinite("span logits"));
    }
    Ok((start, end))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanLoss {
    pub start_loss: f64,
    pub end_loss: f64,
    /// Arithmetic mean of the start and end losses.
    pub total: f64,
}

/// One batch item for [`span_loss`]: `(P_start, P_end, (gold_start,
/// gold_end))`.
pub type SpanLossItem = (Array1<f64>, Array1<f64>, (usize, usize));

/// Negative log-likelihood of the gold start/end positions, averaged over
/// the batch; the total is the mean of the two position losses.
pub fn span_loss(items: &[SpanLossItem]) -> Result<SpanLoss, HeadError> {
    if items.is_empty() {
        return Err(HeadError::EmptySequence);
    }
    let mut start_sum = 0.0;
    let mut end_sum = 0.0;
    for (p_start, p_end, (gold_start, gold_end)) in items {
        let len = p_start.len();
        if *gold_start >= len || *gold_end >= p_end.len() {
            return Err(HeadError::IndexOutOfRange {
                index: (*gold_start).max(*gold_end),
                len,
            });
        }
        if gold_start > gold_end {
            return Err(HeadError::InvertedSpan {
                start: *gold_start,
                end: *gold_end,
            });
        }
        start_sum -= p_start[*gold_start].ln();
        end_sum -= p_end[*gold_end].ln();
    }
    let n = items.len() as f64;
    let start_loss = start_sum / n;
    let end_loss = end_sum / n;
    Ok(SpanLoss {
        start_loss,
        end_loss,
        total: (start_loss + end_loss) / 2.0,
    })
}

/// Top-k spans by `P_start[i] · P_end[j]` over all candidates with
/// `i ≤ j < i + max_len`, ties broken by smaller `i` then smaller `j`.
pub fn decode_spans(
    p_start: ArrayView1<'_, f64>,
    p_end: ArrayView1<'_, f64>,
    k: usize,
    max_len: usize,
) -> Vec<SpanPrediction> {
    decode_spans_in_range(p_start, p_end, k, max_len, 0..p_start.len())
}

/// [`decode_spans`] restricted to candidates inside `range` (used to keep
/// predictions on context positions).
pub fn decode_spans_in_range(
    p_start: ArrayView1<'_, f64>,
    p_end: ArrayView1<'_, f64>,
    k: usize,
    max_len: usize,
    range: std::ops::Range<usize>,
) -> Vec<SpanPrediction> {
    let mut candidates = Vec::new();
    let hi = range.end.min(p_start.len());
    for i in range.start..hi {
        for j in i..hi.min(i + max_len) {
            candidates.push(SpanPrediction {
                start: i,
                end: j,
                score: p_start[i] * p_end[j],
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.start.cmp(&b.start))
            .then(a.end.cmp(&b.end))
    });
    candidates.truncate(k);
    candidates
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Compares `analytic_grad` against central differences of `loss`
/// coordinate-wise. Relative error is `|a - n| / max(|a|, |n|)`; when both
/// magnitudes sit below 1e-8 the coordinate counts as agreeing (the
/// zero-gradient case, where relative error is meaningless).
pub fn grad_check<L, G>(
    loss: L,
    analytic_grad: G,
    params: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<GradCheck, HeadError>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let analytic = analytic_grad(params);
    assert_eq!(analytic.len(), params.len(), "gradient length mismatch");
    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        let original = work[i];
        work[i] = original + step;
        let plus = loss(&work);
        work[i] = original - step;
        let minus = loss(&work);
        work[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(HeadError::NonFinite("finite-difference loss"));
        }
        let numeric = (plus - minus) / (2.0 * step);
        let diff = (analytic[i] - numeric).abs();
        let denom = analytic[i].abs().max(numeric.abs());
        if denom < 1e-8 {
            continue;
        }
        max_rel = max_rel.max(diff / denom);
    }
    Ok(GradCheck {
        max_rel_err: max_rel,
        passed: max_rel < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        let head = YesNoHead {
            weights: array![1.0, -1.0],
            bias: None,
        };
        let p = yes_probability(array![2.0, 2.0].view(), &head).unwrap();
        assert_eq!(p, 0.5);

        let head = YesNoHead {
            weights: array![50.0],
            bias: None,
        };
        let p = yes_probability(array![1.0].view(), &head).unwrap();
        assert!(p >= 1.0 - 1e-20);

        // Stable down to logit -700.
        assert!(stable_sigmoid(-700.0) > 0.0);
        assert!(stable_sigmoid(700.0) <= 1.0);
    }

    #[test]
    fn yes_probability_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cls: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let head = YesNoHead {
                weights: Array1::from_vec(w.clone()),
                bias: None,
            };
            let p = yes_probability(Array1::from_vec(cls.clone()).view(), &head).unwrap();
            // Independent scalar-loop dot product + plain sigmoid.
            let mut dot = 0.0;
            for i in 0..4 {
                dot += cls[i] * w[i];
            }
            let oracle = 1.0 / (1.0 + (-dot).exp());
            assert!((p - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn yes_probability_is_monotone_in_logit() {
        let head = YesNoHead {
            weights: array![1.0],
            bias: None,
        };
        let p1 = yes_probability(array![0.3].view(), &head).unwrap();
        let p2 = yes_probability(array![-0.7].view(), &head).unwrap();
        assert_eq!((0.3f64 - (-0.7)).signum(), (p1 - p2).signum());
    }

    #[test]
    fn non_finite_inputs_error() {
        let head = YesNoHead {
            weights: array![f64::NAN],
            bias: None,
        };
        assert!(yes_probability(array![1.0].view(), &head).is_err());
    }

    #[test]
    fn bce_values() {
        assert!(bce_loss(1.0 - 1e-12, true).unwrap() < 1e-10);
        assert!((bce_loss(0.5, true).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, false).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(0.0, true).is_err());
        assert!(bce_loss(1.0, false).is_err());

        // The logit form agrees with the probability form.
        for &(logit, label) in &[(0.7, true), (-1.3, false), (4.0, false)] {
            let p = stable_sigmoid(logit);
            let a = bce_loss(p, label).unwrap();
            let b = bce_loss_from_logit(logit, label);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let logit = rng.random_range(-4.0..4.0);
            let label = rng.random_bool(0.5);
            let check = grad_check(
                |p| bce_loss_from_logit(p[0], label),
                |p| vec![stable_sigmoid(p[0]) - if label { 1.0 } else { 0.0 }],
                &[logit],
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(check.passed, "rel err {}", check.max_rel_err);
        }
    }

    #[test]
    fn span_distributions_uniform_and_shift_invariant() {
        let h = HiddenStates::unattributed(Array2::zeros((4, 3))).unwrap();
        let head = SpanHead::zeros(3, false);
        let (ps, pe) = span_distributions(&h, &head).unwrap();
        for i in 0..4 {
            assert!((ps[i] - 0.25).abs() < 1e-15);
            assert!((pe[i] - 0.25).abs() < 1e-15);
        }

        let logits = array![0.3, -1.0, 2.0, 0.0];
        let shifted = &logits + 123.456;
        let a = softmax(logits.view());
        let b = softmax(shifted.view());
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn span_distributions_match_scalar_oracle() {
        // s=3, H=2, hand-set weights.
        let values = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let h = HiddenStates::unattributed(values.clone()).unwrap();
        let head = SpanHead {
            weights: array![[0.7, -0.2], [0.1, 0.4]],
            bias: None,
        };
        let (ps, pe) = span_distributions(&h, &head).unwrap();
        for row in 0..2 {
            let logits: Vec<f64> = (0..3)
                .map(|i| values[[i, 0]] * head.weights[[row, 0]] + values[[i, 1]] * head.weights[[row, 1]])
                .collect();
            let sum: f64 = logits.iter().map(|l| l.exp()).sum();
            for i in 0..3 {
                let oracle = logits[i].exp() / sum;
                let got = if row == 0 { ps[i] } else { pe[i] };
                assert!((got - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one_for_long_wide_range_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits: Array1<f64> = (0..4096).map(|_| rng.random_range(-700.0..700.0)).collect();
        let p = softmax(logits.view());
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn span_loss_values() {
        // Point-mass on the gold span → zero loss.
        let point = array![0.0f64, 1.0, 0.0, 0.0];
        let loss = span_loss(&[(point.clone(), point.clone(), (1, 1))]).unwrap();
        assert_eq!(loss.total, 0.0);

        // Uniform distributions, s=4, N=1 → ln 4.
        let uniform = Array1::from_elem(4, 0.25);
        let loss = span_loss(&[(uniform.clone(), uniform.clone(), (0, 2))]).unwrap();
        assert!((loss.total - 4.0f64.ln()).abs() < 1e-12);

        // Batch mean equals the mean of per-item losses.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut items = Vec::new();
        for _ in 0..3 {
            let logits: Array1<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = softmax(logits.view());
            let gold = (rng.random_range(0..3usize), rng.random_range(3..6usize));
            items.push((p.clone(), p, gold));
        }
        let batch = span_loss(&items).unwrap();
        let mean_of_singles: f64 = items
            .iter()
            .map(|item| span_loss(std::slice::from_ref(item)).unwrap().total)
            .sum::<f64>()
            / 3.0;
        assert!((batch.total - mean_of_singles).abs() < 1e-12);

        // Out-of-range gold errors.
        assert!(span_loss(&[(uniform.clone(), uniform.clone(), (0, 9))]).is_err());
        assert!(span_loss(&[(uniform.clone(), uniform, (3, 1))]).is_err());
    }

    #[test]
    fn decode_point_mass_and_uniform_tie_order() {
        let mut ps = Array1::zeros(4);
        let mut pe = Array1::zeros(4);
        ps[2] = 1.0;
        pe[3] = 1.0;
        let top = decode_spans(ps.view(), pe.view(), 1, 30);
        assert_eq!((top[0].start, top[0].end), (2, 3));
        assert_eq!(top[0].score, 1.0);

        let uniform = Array1::from_elem(3, 1.0 / 3.0);
        let spans = decode_spans(uniform.view(), uniform.view(), 10, 3);
        let pairs: Vec<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        for s in &spans {
            assert!((s.score - 1.0 / 9.0).abs() < 1e-15);
        }

        let singles = decode_spans(uniform.view(), uniform.view(), 10, 1);
        assert!(singles.iter().all(|s| s.start == s.end));
    }

    #[test]
    fn decode_is_scale_invariant_in_rank() {
        let ps = array![0.1, 0.6, 0.3];
        let pe = array![0.2, 0.3, 0.5];
        let a = decode_spans(ps.view(), pe.view(), 4, 3);
        let scaled_ps = &ps * 3.7;
        let scaled_pe = &pe * 3.7;
        let b = decode_spans(scaled_ps.view(), scaled_pe.view(), 4, 3);
        let order_a: Vec<(usize, usize)> = a.iter().map(|s| (s.start, s.end)).collect();
        let order_b: Vec<(usize, usize)> = b.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(order_a, order_b);
    }

    #[test]
    fn grad_check_zero_gradient_point() {
        // Symmetric quadratic at its minimum: both gradients ≈ 0.
        let check = grad_check(
            |p| p[0] * p[0],
            |_| vec![0.0],
            &[0.0],
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(check.passed);
        assert_eq!(check.max_rel_err, 0.0);
    }
}
