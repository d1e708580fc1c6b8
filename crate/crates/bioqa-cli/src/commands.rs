use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;

use bioqa_core::answerability;
use bioqa_core::context::{discrepancy_report, length_distribution, reduce_dataset};
use bioqa_core::convert::{convert_questions, filter_unmatched_squad, ContextStrategy};
use bioqa_core::encoder::EncoderConfig;
use bioqa_core::formats::bioasq::parse_bioasq;
use bioqa_core::formats::predictions::{parse_predictions, write_predictions, Prediction};
use bioqa_core::formats::squad::{parse_squad, write_squad};
use bioqa_core::harness::{run_plan, EvalSets, StageData, TrainingStage, TransferPlan};
use bioqa_core::metrics::{evaluate, NormalizationMode};
use bioqa_core::model::BinaryInstance;
use bioqa_core::normalize::dedup_answers;

use crate::manifest::{manifest_path_for, Manifest};
use crate::Command;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Format(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 3,
            CliError::Format(_) => 4,
            CliError::Data(_) => 5,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Io(m) => ("io", m),
            CliError::Format(m) => ("format", m),
            CliError::Data(m) => ("data", m),
        };
        serde_json::to_string(&json!({"error": {"kind": kind, "message": message}}))
            .expect("error serializes")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<bioqa_core::FormatError> for CliError {
    fn from(e: bioqa_core::FormatError) -> Self {
        CliError::Format(e.to_string())
    }
}

macro_rules! data_error_from {
    ($($ty:ty),+) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })+
    };
}
data_error_from!(
    bioqa_core::convert::ConvertError,
    bioqa_core::context::ContextError,
    bioqa_core::metrics::EvalError,
    bioqa_core::harness::TrainError
);

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Optional defaults file. Precedence everywhere is CLI flag, then config
/// file, then the built-in default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    strategy: Option<String>,
    window: Option<usize>,
    boundary: Option<bool>,
    normalize: Option<bool>,
    seed: Option<u64>,
}

/// Effective settings after precedence resolution, plus the source path
/// for the manifest.
struct Resolved {
    config: ConfigFile,
    path: Option<PathBuf>,
}

fn load_config(path: Option<PathBuf>) -> Result<Resolved, CliError> {
    let config = match &path {
        Some(p) => serde_json::from_slice(&read_file(p)?)
            .map_err(|e| CliError::Format(format!("config file {}: {e}", p.display())))?,
        None => ConfigFile::default(),
    };
    Ok(Resolved { config, path })
}

pub fn run(command: Command, config_path: Option<PathBuf>) -> Result<(), CliError> {
    let resolved = load_config(config_path)?;
    match command {
        Command::Convert {
            input,
            strategy,
            window,
            out,
            report,
            yesno_out,
            boundary,
        } => {
            let strategy = strategy
                .or_else(|| resolved.config.strategy.clone())
                .unwrap_or_else(|| "snippet".to_string());
            let window = window.or(resolved.config.window).unwrap_or(1);
            let boundary = boundary.or(resolved.config.boundary).unwrap_or(true);
            convert_cmd(input, strategy, window, out, report, yesno_out, boundary, &resolved)
        }
        Command::Reduce { input, out, report } => reduce_cmd(input, out, report),
        Command::Stats { input, vs, out } => stats_cmd(input, vs, out),
        Command::Audit { input, batches, out } => audit_cmd(input, batches, out),
        Command::Evaluate {
            golden,
            preds,
            out,
            normalize,
        } => {
            let normalize = normalize.or(resolved.config.normalize).unwrap_or(true);
            evaluate_cmd(golden, preds, out, normalize, &resolved)
        }
        Command::TrainToy { plan, out, seed } => {
            let seed = seed.or(resolved.config.seed);
            train_toy_cmd(plan, out, seed, &resolved)
        }
        Command::Dedup { input, out } => dedup_cmd(input, out),
    }
}

fn strategy_from(name: &str, window: usize) -> Result<ContextStrategy, CliError> {
    match name {
        "snippet" => Ok(ContextStrategy::SnippetAsIs),
        "abstract" => Ok(ContextStrategy::FullAbstract),
        "appended" => Ok(ContextStrategy::AppendedSnippet { window }),
        other => Err(CliError::Data(format!(
            "unknown strategy '{other}' (expected snippet, abstract, or appended)"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn convert_cmd(
    input: PathBuf,
    strategy: String,
    window: usize,
    out: PathBuf,
    report: Option<PathBuf>,
    yesno_out: Option<PathBuf>,
    boundary: bool,
    resolved: &Resolved,
) -> Result<(), CliError> {
    let parsed = parse_bioasq(&read_file(&input)?)?;
    let outcome =
        convert_questions(&parsed.questions, strategy_from(&strategy, window)?, boundary)?;

    write_file(&out, &write_squad(&outcome.dataset))?;

    let mut manifest = Manifest::new(
        "convert",
        json!({"strategy": strategy, "window": window, "boundary": boundary}),
    );
    manifest.stamp_input("bioasq", &input)?;
    if let Some(config_path) = &resolved.path {
        manifest.stamp_input("config", config_path)?;
    }
    manifest.stamp_output("squad", &out)?;

    if let Some(report_path) = &report {
        write_json(
            report_path,
            &json!({
                "summary_skipped": parsed.summary_skipped,
                "conversion": outcome.report,
            }),
        )?;
        manifest.stamp_output("report", report_path)?;
    }
    if let Some(yesno_path) = &yesno_out {
        write_json(yesno_path, &outcome.binary)?;
        manifest.stamp_output("yesno", yesno_path)?;
    }
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}

fn reduce_cmd(input: PathBuf, out: PathBuf, report: Option<PathBuf>) -> Result<(), CliError> {
    let dataset = parse_squad(&read_file(&input)?)?;
    let instances_in = dataset.total_instances();
    let (filtered, removed_invalid) = filter_unmatched_squad(dataset);
    let (reduced, reduce_report) = reduce_dataset(&filtered)?;

    write_file(&out, &write_squad(&reduced))?;

    let mut manifest = Manifest::new("reduce", json!({}));
    manifest.stamp_input("squad", &input)?;
    manifest.stamp_output("squad_min", &out)?;
    if let Some(report_path) = &report {
        write_json(
            report_path,
            &json!({
                "instances_in": instances_in,
                "removed_invalid_offsets": removed_invalid,
                "instances_out": reduced.total_instances(),
                "spans_dropped": reduce_report.spans_dropped,
            }),
        )?;
        manifest.stamp_output("report", report_path)?;
    }
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}

fn stats_cmd(input: PathBuf, vs: PathBuf, out: PathBuf) -> Result<(), CliError> {
    let a = parse_squad(&read_file(&input)?)?;
    let b = parse_squad(&read_file(&vs)?)?;
    let a_contexts: Vec<String> = a.instances().map(|i| i.context).collect();
    let b_contexts: Vec<String> = b.instances().map(|i| i.context).collect();
    let dist_a = length_distribution(a_contexts.iter().map(String::as_str));
    let dist_b = length_distribution(b_contexts.iter().map(String::as_str));
    let discrepancy = discrepancy_report(&dist_a, &dist_b)?;

    write_json(
        &out,
        &json!({
            "a": {"path": input.display().to_string(), "distribution": dist_a},
            "b": {"path": vs.display().to_string(), "distribution": dist_b},
            "discrepancy": discrepancy,
        }),
    )?;

    let mut manifest = Manifest::new("stats", json!({}));
    manifest.stamp_input("a", &input)?;
    manifest.stamp_input("b", &vs)?;
    manifest.stamp_output("report", &out)?;
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}

fn audit_cmd(input: PathBuf, batches: Option<PathBuf>, out: PathBuf) -> Result<(), CliError> {
    let parsed = parse_bioasq(&read_file(&input)?)?;
    let batch_labels: BTreeMap<String, String> = match &batches {
        Some(path) => serde_json::from_slice(&read_file(path)?)
            .map_err(|e| CliError::Format(format!("batches file: {e}")))?,
        None => BTreeMap::new(),
    };
    let report = answerability::audit(&parsed.questions, &batch_labels);

    write_json(
        &out,
        &json!({
            "summary_skipped": parsed.summary_skipped,
            "audit": report,
        }),
    )?;

    let mut manifest = Manifest::new("audit", json!({"batched": batches.is_some()}));
    manifest.stamp_input("golden", &input)?;
    if let Some(path) = &batches {
        manifest.stamp_input("batches", path)?;
    }
    manifest.stamp_output("report", &out)?;
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}

fn evaluate_cmd(
    golden: PathBuf,
    preds: PathBuf,
    out: PathBuf,
    normalize: bool,
    resolved: &Resolved,
) -> Result<(), CliError> {
    let parsed = parse_bioasq(&read_file(&golden)?)?;
    let predictions = parse_predictions(&read_file(&preds)?)?;
    let mode = if normalize {
        NormalizationMode::Normalized
    } else {
        NormalizationMode::Raw
    };
    let report = evaluate(&parsed.questions, &predictions, mode)?;
    write_json(&out, &report)?;

    let mut manifest = Manifest::new("evaluate", json!({"normalize": normalize}));
    if let Some(config_path) = &resolved.path {
        manifest.stamp_input("config", config_path)?;
    }
    manifest.stamp_input("golden", &golden)?;
    manifest.stamp_input("preds", &preds)?;
    manifest.stamp_output("metrics", &out)?;
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PlanFile {
    #[serde(default)]
    encoder: EncoderConfig,
    stages: Vec<TrainingStage>,
    #[serde(default)]
    eval: EvalPaths,
}

#[derive(Debug, Default, Deserialize)]
struct EvalPaths {
    binary: Option<PathBuf>,
    spans: Option<PathBuf>,
}

fn load_stage_data(kind: &str, path: &Path) -> Result<StageData, CliError> {
    let bytes = read_file(path)?;
    Ok(match kind {
        "pair_classification" => StageData::Pairs(
            serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?,
        ),
        "binary_yesno" => StageData::Binary(
            serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?,
        ),
        _ => StageData::Spans(parse_squad(&bytes)?.instances().collect()),
    })
}

fn train_toy_cmd(
    plan_path: PathBuf,
    out_dir: PathBuf,
    seed: Option<u64>,
    resolved: &Resolved,
) -> Result<(), CliError> {
    let plan_bytes = read_file(&plan_path)?;
    let mut plan_file: PlanFile = serde_json::from_slice(&plan_bytes)
        .map_err(|e| CliError::Format(format!("plan file: {e}")))?;
    let plan_dir = plan_path.parent().map(Path::to_path_buf).unwrap_or_default();

    if let Some(seed) = seed {
        plan_file.encoder.seed = seed;
        for (i, stage) in plan_file.stages.iter_mut().enumerate() {
            stage.seed = seed + 1 + i as u64;
        }
    }

    // Load each referenced data file once, keyed by the reference string.
    // One file serving stages of different task kinds is ambiguous.
    let mut datasets: BTreeMap<String, StageData> = BTreeMap::new();
    let mut data_paths: Vec<PathBuf> = Vec::new();
    for stage in &plan_file.stages {
        let kind = match stage.task_kind {
            bioqa_core::harness::TaskKind::PairClassification => "pair_classification",
            bioqa_core::harness::TaskKind::BinaryYesNo => "binary_yesno",
            bioqa_core::harness::TaskKind::SpanExtraction => "span_extraction",
        };
        let path = plan_dir.join(&stage.data);
        match datasets.get(&stage.data) {
            Some(existing) if existing_kind(existing) != kind => {
                return Err(CliError::Data(format!(
                    "data source '{}' is used by stages of different task kinds",
                    stage.data
                )));
            }
            Some(_) => {}
            None => {
                datasets.insert(stage.data.clone(), load_stage_data(kind, &path)?);
                data_paths.push(path);
            }
        }
    }

    let mut eval = EvalSets::default();
    let mut eval_paths: Vec<PathBuf> = Vec::new();
    if let Some(rel) = &plan_file.eval.binary {
        let path = plan_dir.join(rel);
        let instances: Vec<BinaryInstance> = serde_json::from_slice(&read_file(&path)?)
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        eval.binary = Some(instances);
        eval_paths.push(path);
    }
    if let Some(rel) = &plan_file.eval.spans {
        let path = plan_dir.join(rel);
        eval.spans = Some(parse_squad(&read_file(&path)?)?.instances().collect());
        eval_paths.push(path);
    }

    let plan = TransferPlan {
        stages: plan_file.stages.clone(),
    };
    let artifact = run_plan(&plan_file.encoder, &plan, &datasets, &eval)?;

    fs::create_dir_all(&out_dir)?;
    let mut manifest = Manifest::new(
        "train-toy",
        json!({
            "encoder": plan_file.encoder,
            "stages": plan_file.stages,
            "seed_override": seed,
        }),
    );
    manifest.stamp_input("plan", &plan_path)?;
    if let Some(config_path) = &resolved.path {
        manifest.stamp_input("config", config_path)?;
    }
    for (i, path) in data_paths.iter().enumerate() {
        manifest.stamp_input(&format!("data{i}"), path)?;
    }
    for (i, path) in eval_paths.iter().enumerate() {
        manifest.stamp_input(&format!("eval{i}"), path)?;
    }

    for (i, log) in artifact.stage_logs.iter().enumerate() {
        let csv_path = out_dir.join(format!("stage_{i:02}_{}.csv", log.name));
        let mut csv = String::from("epoch,loss\n");
        for (epoch, loss) in log.epoch_losses.iter().enumerate() {
            csv.push_str(&format!("{epoch},{loss}\n"));
        }
        write_file(&csv_path, csv.as_bytes())?;
        manifest.stamp_output(&format!("loss_log{i}"), &csv_path)?;
    }

    let checksums_path = out_dir.join("checksums.json");
    write_json(
        &checksums_path,
        &json!({
            "stages": artifact.stage_logs,
            "final_checksum": artifact.final_checksum,
        }),
    )?;
    manifest.stamp_output("checksums", &checksums_path)?;

    if let Some(metrics) = &artifact.metrics {
        let metrics_path = out_dir.join("metrics.json");
        write_json(&metrics_path, metrics)?;
        manifest.stamp_output("metrics", &metrics_path)?;
    }

    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

fn existing_kind(data: &StageData) -> &'static str {
    match data {
        StageData::Pairs(_) => "pair_classification",
        StageData::Binary(_) => "binary_yesno",
        StageData::Spans(_) => "span_extraction",
    }
}

fn dedup_cmd(input: PathBuf, out: PathBuf) -> Result<(), CliError> {
    let mut predictions = parse_predictions(&read_file(&input)?)?;
    for value in predictions.entries.values_mut() {
        match value {
            Prediction::Ranked(v) => *v = dedup_answers(v),
            Prediction::ListSet(v) => *v = dedup_answers(v),
            Prediction::YesNo(_) => {}
        }
    }
    write_file(&out, &write_predictions(&predictions))?;

    let mut manifest = Manifest::new("dedup", json!({}));
    manifest.stamp_input("preds", &input)?;
    manifest.stamp_output("preds_dedup", &out)?;
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}
