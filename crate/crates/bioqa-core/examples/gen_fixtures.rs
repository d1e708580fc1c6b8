//! Regenerates the bundled fixtures under `fixtures/` at the repository
//! root. Run from anywhere in the workspace:
//!
//! ```text
//! cargo run -p bioqa-core --example gen_fixtures
//! ```
//!
//! Output is deterministic, so reruns are byte-identical; a test guards the
//! committed copies against drift.

use std::fs;
use std::path::{Path, PathBuf};

use bioqa_core::formats::bioasq::write_bioasq;
use bioqa_core::formats::squad::{write_squad, SquadDataset};
use bioqa_core::synthetic;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Hand-written predictions matching `bioasq_mini.json`; the expected
/// metrics (macro average 0.5) are asserted by the CLI tests.
pub const PREDS_MINI: &str = r#"{
  "mini-yes": "yes",
  "mini-no": "yes",
  "mini-factoid": ["transglutaminase 1", "unrelated"],
  "mini-factoid-nomatch": ["wrong answer"],
  "mini-list": {"list": ["TGM1", "ABCA12", "nope"]}
}
"#;

pub const PLAN_NLI_FIRST: &str = r#"{
  "encoder": {"buckets": 128, "hidden": 8, "seed": 77},
  "stages": [
    {"name": "nli", "task_kind": "pair_classification", "data": "pairs.json",
     "epochs": 3, "learning_rate": 0.1, "batch_size": 4, "seed": 11},
    {"name": "extractive", "task_kind": "span_extraction", "data": "spans_train.json",
     "epochs": 3, "learning_rate": 0.1, "batch_size": 4, "seed": 12}
  ],
  "eval": {"spans": "eval_spans.json"}
}
"#;

pub const PLAN_SPAN_FIRST: &str = r#"{
  "encoder": {"buckets": 128, "hidden": 8, "seed": 77},
  "stages": [
    {"name": "extractive", "task_kind": "span_extraction", "data": "spans_train.json",
     "epochs": 3, "learning_rate": 0.1, "batch_size": 4, "seed": 12},
    {"name": "nli", "task_kind": "pair_classification", "data": "pairs.json",
     "epochs": 3, "learning_rate": 0.1, "batch_size": 4, "seed": 11}
  ],
  "eval": {"binary": "eval_binary.json"}
}
"#;

fn to_squad(instances: Vec<bioqa_core::model::SquadInstance>, title: &str) -> SquadDataset {
    SquadDataset {
        version: "v1.1".to_string(),
        articles: vec![SquadDataset::article_from_instances(title, &instances)],
    }
}

fn json_lines<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serialize");
    bytes.push(b'\n');
    bytes
}

fn main() -> std::io::Result<()> {
    let dir = fixtures_dir();
    fs::create_dir_all(dir.join("plans"))?;

    fs::write(dir.join("bioasq_mini.json"), write_bioasq(&synthetic::bioasq_mini()))?;

    let audit = synthetic::audit_fixture();
    fs::write(
        dir.join("bioasq7b_synthetic_golden.json"),
        write_bioasq(&audit.questions),
    )?;
    fs::write(dir.join("bioasq7b_batches.json"), json_lines(&audit.batches))?;

    fs::write(
        dir.join("squad_mini.json"),
        write_squad(&synthetic::squad_mixed_validity(11, 12, 3)),
    )?;

    fs::write(dir.join("preds_mini.json"), PREDS_MINI)?;

    let plans = dir.join("plans");
    fs::write(plans.join("plan_nli_first.json"), PLAN_NLI_FIRST)?;
    fs::write(plans.join("plan_span_first.json"), PLAN_SPAN_FIRST)?;
    fs::write(plans.join("pairs.json"), json_lines(&synthetic::pair_dataset(21, 48)))?;
    fs::write(
        plans.join("binary_train.json"),
        json_lines(&synthetic::binary_dataset(22, 32)),
    )?;
    fs::write(
        plans.join("spans_train.json"),
        write_squad(&to_squad(synthetic::span_dataset(23, 24), "toy-train")),
    )?;
    fs::write(
        plans.join("eval_binary.json"),
        json_lines(&synthetic::binary_dataset(24, 16)),
    )?;
    fs::write(
        plans.join("eval_spans.json"),
        write_squad(&to_squad(synthetic::span_dataset(25, 10), "toy-eval")),
    )?;

    println!("fixtures written to {}", dir.display());
    Ok(())
}
