//! Guards the committed fixtures against drift: synthetic-derived files
//! must equal a fresh regeneration, and the hand-written ones must parse.

use std::fs;
use std::path::{Path, PathBuf};

use bioqa_core::formats::bioasq::write_bioasq;
use bioqa_core::formats::squad::{parse_squad, write_squad};
use bioqa_core::formats::predictions::parse_predictions;
use bioqa_core::synthetic;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(name: &str) -> Vec<u8> {
    let path = fixtures_dir().join(name);
    fs::read(&path).unwrap_or_else(|e| {
        panic!(
            "missing fixture {} ({e}); run `cargo run -p bioqa-core --example gen_fixtures`",
            path.display()
        )
    })
}

#[test]
fn generated_fixtures_match_generators() {
    assert_eq!(read("bioasq_mini.json"), write_bioasq(&synthetic::bioasq_mini()));

    let audit = synthetic::audit_fixture();
    assert_eq!(
        read("bioasq7b_synthetic_golden.json"),
        write_bioasq(&audit.questions)
    );

    assert_eq!(
        read("squad_mini.json"),
        write_squad(&synthetic::squad_mixed_validity(11, 12, 3))
    );
}

#[test]
fn handwritten_fixtures_parse() {
    parse_predictions(&read("preds_mini.json")).expect("preds_mini");
    let batches: std::collections::BTreeMap<String, String> =
        serde_json::from_slice(&read("bioasq7b_batches.json")).expect("batches");
    assert!(!batches.is_empty());

    for name in ["plans/spans_train.json", "plans/eval_spans.json"] {
        let dataset = parse_squad(&read(name)).expect(name);
        assert!(dataset.flagged_ids().is_empty());
    }
    for name in ["plans/plan_nli_first.json", "plans/plan_span_first.json"] {
        let value: serde_json::Value = serde_json::from_slice(&read(name)).expect(name);
        assert!(value.get("stages").is_some());
    }
}
