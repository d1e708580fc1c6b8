//! Sequential fine-tuning over the toy encoder.
//!
//! A plan is an ordered list of stages. Encoder parameters persist across
//! stages — they are never reinitialized — while the task head is rebuilt
//! at each stage start (or reused when the stage asks for it and the
//! previous head is compatible). Training is plain mini-batch gradient
//! descent with a fixed learning rate, fully deterministic given the seeds,
//! so finite-difference checks stay authoritative.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{EncoderConfig, EncoderGrads, ToyEncoder};
use crate::heads::{
    bce_loss_from_logit, decode_spans_in_range, log_softmax, softmax, span_logits, stable_sigmoid,
    yes_logit, HiddenStates, SpanHead, TokenOrigin, YesNoHead,
};
use crate::metrics::{self, MetricsReport, NormalizationMode};
use crate::model::{AnswerSpan, BinaryInstance, SquadInstance};
use crate::normalize::dedup_answers;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("stage '{stage}' expects {expected} data, got {got}")]
    DataTaskMismatch {
        stage: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("stage '{stage}' references unknown data source '{data}'")]
    MissingData { stage: String, data: String },
    #[error("stage '{stage}' has an empty dataset")]
    EmptyStageData { stage: String },
    #[error("instance '{0}' has no answer span on a context token")]
    GoldSpanMapping(String),
    #[error("plan has no stages")]
    EmptyPlan,
    #[error("no evaluation set provided for the final {0} head")]
    MissingEvalSet(&'static str),
    #[error("evaluation failed: {0}")]
    Eval(#[from] metrics::EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Sentence-pair classification (entail / not-entail), the NLI stand-in.
    PairClassification,
    BinaryYesNo,
    SpanExtraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadPolicy {
    /// Zero-initialize a new head at stage start (the default).
    #[default]
    Fresh,
    /// Keep the previous stage's head when its kind and shape fit;
    /// otherwise fall back to a fresh head.
    Reuse,
}

/// One element of a transfer plan. `data` names an entry of the dataset map
/// handed to [`run_plan`].
///
/// Defaults: batch size 12 (the smaller of the two published fine-tuning
/// batch sizes), learning rate 1e-2. The published learning-rate range
/// (1e-6 to 9e-6) targets a full-scale pretrained encoder; the toy encoder
/// needs the larger step to move at all. A zero learning rate is accepted
/// and makes the stage a parameter no-op.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingStage {
    pub name: String,
    pub task_kind: TaskKind,
    pub data: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub head_policy: HeadPolicy,
}

fn default_epochs() -> usize {
    1
}

fn default_learning_rate() -> f64 {
    1e-2
}

fn default_batch_size() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferPlan {
    pub stages: Vec<TrainingStage>,
}

/// A premise/hypothesis pair with a binary label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairExample {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: bool,
}

#[derive(Debug, Clone)]
pub enum StageData {
    Pairs(Vec<PairExample>),
    Binary(Vec<BinaryInstance>),
    Spans(Vec<SquadInstance>),
}

impl StageData {
    fn kind_name(&self) -> &'static str {
        match self {
            StageData::Pairs(_) => "pair_classification",
            StageData::Binary(_) => "binary_yesno",
            StageData::Spans(_) => "span_extraction",
        }
    }

    fn len(&self) -> usize {
        match self {
            StageData::Pairs(v) => v.len(),
            StageData::Binary(v) => v.len(),
            StageData::Spans(v) => v.len(),
        }
    }
}

/// Held-out sets for the final model.
#[derive(Debug, Clone, Default)]
pub struct EvalSets {
    pub binary: Option<Vec<BinaryInstance>>,
    pub spans: Option<Vec<SquadInstance>>,
}

#[derive(Debug, Clone)]
pub enum TaskHead {
    Binary(YesNoHead),
    Span(SpanHead),
}

/// Encoder plus the current task head.
#[derive(Debug, Clone)]
pub struct Model {
    pub encoder: ToyEncoder,
    pub head: Option<TaskHead>,
}

impl Model {
    pub fn new(config: &EncoderConfig) -> Self {
        Model {
            encoder: ToyEncoder::new(config),
            head: None,
        }
    }
}

/// Per-stage record: encoder checksums at the stage boundary and the full
/// dataset loss before training (epoch 0) and after each epoch.
#[derive(Debug, Clone, Serialize)]
pub struct StageLog {
    pub name: String,
    pub task_kind: TaskKind,
    pub start_checksum: String,
    pub end_checksum: String,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunArtifact {
    pub stage_logs: Vec<StageLog>,
    pub final_checksum: String,
    pub metrics: Option<MetricsReport>,
}

/// Two runs side by side; order sensitivity shows up as differing final
/// checksums.
#[derive(Debug, Clone, Serialize)]
pub struct PlanComparison {
    pub final_checksum_a: String,
    pub final_checksum_b: String,
    pub checksums_differ: bool,
}

pub fn compare_runs(a: &RunArtifact, b: &RunArtifact) -> PlanComparison {
    PlanComparison {
        final_checksum_a: a.final_checksum.clone(),
        final_checksum_b: b.final_checksum.clone(),
        checksums_differ: a.final_checksum != b.final_checksum,
    }
}

fn expected_kind_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::PairClassification => "pair_classification",
        TaskKind::BinaryYesNo => "binary_yesno",
        TaskKind::SpanExtraction => "span_extraction",
    }
}

fn data_matches(kind: TaskKind, data: &StageData) -> bool {
    matches!(
        (kind, data),
        (TaskKind::PairClassification, StageData::Pairs(_))
            | (TaskKind::BinaryYesNo, StageData::Binary(_))
            | (TaskKind::SpanExtraction, StageData::Spans(_))
    )
}

fn init_head(model: &mut Model, stage: &TrainingStage) {
    let hidden = model.encoder.hidden_size();
    let reusable = match (stage.head_policy, stage.task_kind, &model.head) {
        (HeadPolicy::Reuse, TaskKind::SpanExtraction, Some(TaskHead::Span(h))) => {
            h.weights.ncols() == hidden
        }
        (
            HeadPolicy::Reuse,
            TaskKind::PairClassification | TaskKind::BinaryYesNo,
            Some(TaskHead::Binary(h)),
        ) => h.weights.len() == hidden,
        _ => false,
    };
    if reusable {
        return;
    }
    model.head = Some(match stage.task_kind {
        TaskKind::SpanExtraction => TaskHead::Span(SpanHead::zeros(hidden, false)),
        _ => TaskHead::Binary(YesNoHead::zeros(hidden, false)),
    });
}

/// (question_role, context_role) strings for one example.
fn binary_texts(data: &StageData, index: usize) -> (&str, &str, bool) {
    match data {
        StageData::Pairs(v) => (&v[index].premise as &str, &v[index].hypothesis, v[index].label),
        StageData::Binary(v) => (&v[index].question, &v[index].context, v[index].label),
        StageData::Spans(_) => unreachable!("guarded by data_matches"),
    }
}

/// Maps a character answer span onto token indices: the run of context
/// positions overlapping it.
fn gold_token_span(hidden: &HiddenStates, answer: &AnswerSpan) -> Option<(usize, usize)> {
    let mut start_token = None;
    let mut end_token = None;
    for (pos, origin) in hidden.provenance().iter().enumerate() {
        if let TokenOrigin::Context { start_char, end_char } = origin {
            if *end_char > answer.start_char && *start_char < answer.end_char {
                if start_token.is_none() {
                    start_token = Some(pos);
                }
                end_token = Some(pos);
            }
        }
    }
    match (start_token, end_token) {
        (Some(s), Some(e)) => Some((s, e)),
        _ => None,
    }
}

/// Mean loss of the current model over a full dataset, without updates.
pub fn dataset_loss(model: &Model, data: &StageData) -> Result<f64, TrainError> {
    let n = data.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    match data {
        StageData::Pairs(_) | StageData::Binary(_) => {
            let head = match &model.head {
                Some(TaskHead::Binary(h)) => h,
                _ => unreachable!("head initialized for the stage kind"),
            };
            for i in 0..n {
                let (question, context, label) = binary_texts(data, i);
                let hidden = model.encoder.encode(question, context);
                let logit = yes_logit(hidden.cls(), head).expect("finite toy encoder output");
                total += bce_loss_from_logit(logit, label);
            }
        }
        StageData::Spans(instances) => {
            let head = match &model.head {
                Some(TaskHead::Span(h)) => h,
                _ => unreachable!("head initialized for the stage kind"),
            };
            for inst in instances {
                let hidden = model.encoder.encode(&inst.question, &inst.context);
                let answer = inst
                    .answers
                    .first()
                    .ok_or_else(|| TrainError::GoldSpanMapping(inst.id.clone()))?;
                let (gs, ge) = gold_token_span(&hidden, answer)
                    .ok_or_else(|| TrainError::GoldSpanMapping(inst.id.clone()))?;
                let (ls, le) = span_logits(&hidden, head).expect("finite logits");
                let lsm = log_softmax(ls.view());
                let lem = log_softmax(le.view());
                total += -(lsm[gs] + lem[ge]) / 2.0;
            }
        }
    }
    Ok(total / n as f64)
}

/// Runs one stage: initializes the head per policy, then mini-batch
/// gradient descent. `epoch_losses[0]` is the full-dataset loss before any
/// update; entry `k` is the loss after epoch `k`.
pub fn train_stage(
    model: &mut Model,
    stage: &TrainingStage,
    data: &StageData,
) -> Result<StageLog, TrainError> {
    if !data_matches(stage.task_kind, data) {
        return Err(TrainError::DataTaskMismatch {
            stage: stage.name.clone(),
            expected: expected_kind_name(stage.task_kind),
            got: data.kind_name(),
        });
    }
    if data.len() == 0 {
        return Err(TrainError::EmptyStageData {
            stage: stage.name.clone(),
        });
    }

    let start_checksum = model.encoder.checksum();
    init_head(model, stage);

    let mut epoch_losses = vec![dataset_loss(model, data)?];
    let mut rng = ChaCha8Rng::seed_from_u64(stage.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch_size = stage.batch_size.max(1);

    for _ in 0..stage.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            train_batch(model, stage, data, batch)?;
        }
        epoch_losses.push(dataset_loss(model, data)?);
    }

    Ok(StageLog {
        name: stage.name.clone(),
        task_kind: stage.task_kind,
        start_checksum,
        end_checksum: model.encoder.checksum(),
        epoch_losses,
    })
}

fn train_batch(
    model: &mut Model,
    stage: &TrainingStage,
    data: &StageData,
    batch: &[usize],
) -> Result<(), TrainError> {
    let n = batch.len() as f64;
    let mut encoder_grads = EncoderGrads::zeros_like(&model.encoder);

    match data {
        StageData::Pairs(_) | StageData::Binary(_) => {
            let head = match &model.head {
                Some(TaskHead::Binary(h)) => h.clone(),
                _ => unreachable!("head initialized for the stage kind"),
            };
            let mut d_weights = Array1::zeros(head.weights.len());
            for &i in batch {
                let (question, context, label) = binary_texts(data, i);
                let (hidden, cache) = model.encoder.encode_with_cache(question, context);
                let logit = yes_logit(hidden.cls(), &head).expect("finite toy encoder output");
                // d(mean loss)/d logit
                let g = (stable_sigmoid(logit) - if label { 1.0 } else { 0.0 }) / n;
                d_weights += &(&hidden.cls() * g);
                let mut d_outputs = Array2::zeros(hidden.values().dim());
                d_outputs.row_mut(0).assign(&(&head.weights * g));
                model.encoder.backward(&cache, &d_outputs, &mut encoder_grads);
            }
            if let Some(TaskHead::Binary(h)) = &mut model.head {
                h.weights -= &(&d_weights * stage.learning_rate);
            }
        }
        StageData::Spans(instances) => {
            let head = match &model.head {
                Some(TaskHead::Span(h)) => h.clone(),
                _ => unreachable!("head initialized for the stage kind"),
            };
            let mut d_weights = Array2::zeros(head.weights.dim());
            for &i in batch {
                let inst = &instances[i];
                let (hidden, cache) = model.encoder.encode_with_cache(&inst.question, &inst.context);
                let answer = inst
                    .answers
                    .first()
                    .ok_or_else(|| TrainError::GoldSpanMapping(inst.id.clone()))?;
                let (gs, ge) = gold_token_span(&hidden, answer)
                    .ok_or_else(|| TrainError::GoldSpanMapping(inst.id.clone()))?;
                let (ls, le) = span_logits(&hidden, &head).expect("finite logits");

                // d(total)/d logits = (softmax - onehot) / (2N) per row.
                let mut d_ls = softmax(ls.view());
                d_ls[gs] -= 1.0;
                let mut d_le = softmax(le.view());
                d_le[ge] -= 1.0;
                d_ls /= 2.0 * n;
                d_le /= 2.0 * n;

                // Head rows: m_start and m_end.
                let dm_start = hidden.values().t().dot(&d_ls);
                let dm_end = hidden.values().t().dot(&d_le);
                let mut row0 = d_weights.row_mut(0);
                row0 += &dm_start;
                let mut row1 = d_weights.row_mut(1);
                row1 += &dm_end;

                // dL/dh_i = d_ls[i]·m_start + d_le[i]·m_end
                let s = hidden.seq_len();
                let mut d_outputs = Array2::zeros(hidden.values().dim());
                for pos in 0..s {
                    let row = &(&head.weights.row(0) * d_ls[pos]) + &(&head.weights.row(1) * d_le[pos]);
                    d_outputs.row_mut(pos).assign(&row);
                }
                model.encoder.backward(&cache, &d_outputs, &mut encoder_grads);
            }
            if let Some(TaskHead::Span(h)) = &mut model.head {
                h.weights -= &(&d_weights * stage.learning_rate);
            }
        }
    }

    model.encoder.apply_gradients(&encoder_grads, stage.learning_rate);
    Ok(())
}

/// Executes the stages in order over one encoder, then scores the final
/// model on the matching eval set. Stage `k + 1` starts from exactly the
/// encoder state stage `k` ended with.
pub fn run_plan(
    config: &EncoderConfig,
    plan: &TransferPlan,
    datasets: &BTreeMap<String, StageData>,
    eval: &EvalSets,
) -> Result<RunArtifact, TrainError> {
    if plan.stages.is_empty() {
        return Err(TrainError::EmptyPlan);
    }
    let mut model = Model::new(config);
    let mut stage_logs = Vec::new();
    for stage in &plan.stages {
        let data = datasets.get(&stage.data).ok_or_else(|| TrainError::MissingData {
            stage: stage.name.clone(),
            data: stage.data.clone(),
        })?;
        stage_logs.push(train_stage(&mut model, stage, data)?);
    }

    let final_kind = plan.stages.last().unwrap().task_kind;
    let metrics = evaluate_final(&model, final_kind, eval)?;

    Ok(RunArtifact {
        final_checksum: model.encoder.checksum(),
        stage_logs,
        metrics,
    })
}

/// Maximum answer length (tokens) and candidate count used when decoding
/// spans for evaluation; 5 is the factoid submission limit.
pub const DECODE_TOP_K: usize = 5;
pub const DECODE_MAX_LEN: usize = 30;

fn evaluate_final(
    model: &Model,
    kind: TaskKind,
    eval: &EvalSets,
) -> Result<Option<MetricsReport>, TrainError> {
    match kind {
        TaskKind::PairClassification | TaskKind::BinaryYesNo => {
            let Some(instances) = &eval.binary else {
                return Ok(None);
            };
            if instances.is_empty() {
                return Err(TrainError::MissingEvalSet("binary"));
            }
            let head = match &model.head {
                Some(TaskHead::Binary(h)) => h,
                _ => return Err(TrainError::MissingEvalSet("binary")),
            };
            let mut preds = BTreeMap::new();
            let mut golds = BTreeMap::new();
            for inst in instances {
                let hidden = model.encoder.encode(&inst.question, &inst.context);
                let logit = yes_logit(hidden.cls(), head).expect("finite toy encoder output");
                preds.insert(inst.id.clone(), stable_sigmoid(logit) >= 0.5);
                golds.insert(inst.id.clone(), inst.label);
            }
            let scores = metrics::eval_yesno(&preds, &golds)?;
            Ok(Some(MetricsReport {
                yesno: Some(scores),
                counts: metrics::TypeCounts {
                    yesno: golds.len(),
                    ..Default::default()
                },
                ..Default::default()
            }))
        }
        TaskKind::SpanExtraction => {
            let Some(instances) = &eval.spans else {
                return Ok(None);
            };
            if instances.is_empty() {
                return Err(TrainError::MissingEvalSet("span"));
            }
            let head = match &model.head {
                Some(TaskHead::Span(h)) => h,
                _ => return Err(TrainError::MissingEvalSet("span")),
            };
            let mut preds = BTreeMap::new();
            let mut golds = BTreeMap::new();
            for inst in instances {
                let hidden = model.encoder.encode(&inst.question, &inst.context);
                let candidates = extract_answers(&model.encoder, head, inst);
                preds.insert(inst.id.clone(), candidates);
                let synonyms: Vec<String> =
                    dedup_answers(&inst.answers.iter().map(|a| a.text.clone()).collect::<Vec<_>>());
                golds.insert(inst.id.clone(), synonyms);
                let _ = hidden;
            }
            let scores = metrics::eval_factoid(&preds, &golds, NormalizationMode::Normalized)?;
            Ok(Some(MetricsReport {
                factoid: Some(scores),
                counts: metrics::TypeCounts {
                    factoid: golds.len(),
                    ..Default::default()
                },
                ..Default::default()
            }))
        }
    }
}

/// Decodes the top candidate strings for one instance, restricted to
/// context positions, deduplicated, at most [`DECODE_TOP_K`].
pub fn extract_answers(encoder: &ToyEncoder, head: &SpanHead, inst: &SquadInstance) -> Vec<String> {
    let hidden = encoder.encode(&inst.question, &inst.context);
    let (ls, le) = span_logits(&hidden, head).expect("finite logits");
    let p_start = softmax(ls.view());
    let p_end = softmax(le.view());

    let context_range = {
        let provenance = hidden.provenance();
        let first = provenance
            .iter()
            .position(|o| matches!(o, TokenOrigin::Context { .. }));
        let last = provenance
            .iter()
            .rposition(|o| matches!(o, TokenOrigin::Context { .. }));
        match (first, last) {
            (Some(f), Some(l)) => f..l + 1,
            _ => return Vec::new(),
        }
    };

    let spans = decode_spans_in_range(
        p_start.view(),
        p_end.view(),
        DECODE_TOP_K * 2,
        DECODE_MAX_LEN,
        context_range,
    );
    let mut texts = Vec::new();
    for span in spans {
        let (TokenOrigin::Context { start_char, .. }, TokenOrigin::Context { end_char, .. }) = (
            hidden.provenance()[span.start],
            hidden.provenance()[span.end],
        ) else {
            continue;
        };
        if let Some(text) = crate::model::char_slice(&inst.context, start_char, end_char) {
            texts.push(text.to_string());
        }
    }
    let mut unique = dedup_answers(&texts);
    unique.truncate(DECODE_TOP_K);
    unique
}
