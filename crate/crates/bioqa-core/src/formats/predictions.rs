//! System predictions keyed by question id.
//!
//! Value forms:
//!
//! - `"yes"` / `"no"` — a Yes/No answer.
//! - `["a", "b", ...]` — a ranked factoid candidate list (1 to 5 entries).
//! - `{"factoid": [...]}` — explicit factoid form, same limit.
//! - `{"list": [...]}` — a list-type answer set, any size.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};
use serde_json::json;

use crate::formats::{json_error, FormatError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    YesNo(bool),
    /// Ranked factoid candidates, best first. At most 5 per BioASQ rules.
    Ranked(Vec<String>),
    /// List-type answers; order is preserved for display but scoring treats
    /// them as a set.
    ListSet(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionFile {
    pub entries: BTreeMap<String, Prediction>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPrediction {
    Text(String),
    Flat(Vec<String>),
    Tagged(TaggedPrediction),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaggedPrediction {
    #[serde(default)]
    factoid: Option<Vec<String>>,
    #[serde(default)]
    list: Option<Vec<String>>,
}

// Collects raw (id, value) pairs without letting serde_json's map type
// silently drop duplicate keys.
struct RawFile(Vec<(String, RawPrediction)>);

impl<'de> Deserialize<'de> for RawFile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = RawFile;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object keyed by question id")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, RawPrediction>()? {
                    pairs.push((key, value));
                }
                Ok(RawFile(pairs))
            }
        }
        deserializer.deserialize_map(PairVisitor)
    }
}

/// Parses a prediction file, preserving ranked-list order.
pub fn parse_predictions(bytes: &[u8]) -> Result<PredictionFile, FormatError> {
    let raw: RawFile = serde_json::from_slice(bytes).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            FormatError::Invalid(format!("prediction schema error: {e}"))
        } else {
            json_error(bytes, &e)
        }
    })?;

    let mut entries = BTreeMap::new();
    for (id, value) in raw.0 {
        let prediction = match value {
            RawPrediction::Text(s) => match s.to_lowercase().as_str() {
                "yes" => Prediction::YesNo(true),
                "no" => Prediction::YesNo(false),
                other => {
                    return Err(FormatError::Invalid(format!(
                        "prediction for '{id}' must be \"yes\" or \"no\", got \"{other}\""
                    )))
                }
            },
            RawPrediction::Flat(candidates) => ranked(&id, candidates)?,
            RawPrediction::Tagged(tagged) => match (tagged.factoid, tagged.list) {
                (Some(candidates), None) => ranked(&id, candidates)?,
                (None, Some(set)) => Prediction::ListSet(set),
                _ => {
                    return Err(FormatError::Invalid(format!(
                        "prediction for '{id}' must carry exactly one of \"factoid\" or \"list\""
                    )))
                }
            },
        };
        if entries.insert(id.clone(), prediction).is_some() {
            return Err(FormatError::DuplicateId { id });
        }
    }
    Ok(PredictionFile { entries })
}

fn ranked(id: &str, candidates: Vec<String>) -> Result<Prediction, FormatError> {
    if candidates.is_empty() || candidates.len() > 5 {
        return Err(FormatError::FactoidLimit {
            id: id.to_string(),
            len: candidates.len(),
        });
    }
    Ok(Prediction::Ranked(candidates))
}

/// Serializes predictions; ranked factoid lists come out as bare arrays and
/// list sets in the tagged form, so the output reparses identically.
pub fn write_predictions(file: &PredictionFile) -> Vec<u8> {
    let mut obj = serde_json::Map::new();
    for (id, prediction) in &file.entries {
        let value = match prediction {
            Prediction::YesNo(true) => json!("yes"),
            Prediction::YesNo(false) => json!("no"),
            Prediction::Ranked(v) => json!(v),
            Prediction::ListSet(v) => json!({ "list": v }),
        };
        obj.insert(id.clone(), value);
    }
    let mut out = serde_json::to_vec(&serde_json::Value::Object(obj)).expect("serialization");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_value_form() {
        let bytes = br#"{
            "q1": "no",
            "q2": ["a", "b"],
            "q3": {"list": ["x", "y", "z", "w", "v", "u"]},
            "q4": {"factoid": ["only"]}
        }"#;
        let file = parse_predictions(bytes).unwrap();
        assert_eq!(file.entries["q1"], Prediction::YesNo(false));
        assert_eq!(
            file.entries["q2"],
            Prediction::Ranked(vec!["a".into(), "b".into()])
        );
        match &file.entries["q3"] {
            Prediction::ListSet(v) => assert_eq!(v.len(), 6),
            other => panic!("expected list set, got {other:?}"),
        }
        assert_eq!(file.entries["q4"], Prediction::Ranked(vec!["only".into()]));
    }

    #[test]
    fn six_factoid_candidates_are_rejected() {
        let bytes = br#"{"q1": ["a", "b", "c", "d", "e", "f"]}"#;
        match parse_predictions(bytes).unwrap_err() {
            FormatError::FactoidLimit { id, len } => {
                assert_eq!(id, "q1");
                assert_eq!(len, 6);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let bytes = br#"{"q1": "yes", "q1": "no"}"#;
        assert!(matches!(
            parse_predictions(bytes).unwrap_err(),
            FormatError::DuplicateId { .. }
        ));
    }

    #[test]
    fn roundtrip() {
        let bytes = br#"{"a": "yes", "b": ["x", "y"], "c": {"list": ["m", "n"]}}"#;
        let file = parse_predictions(bytes).unwrap();
        let written = write_predictions(&file);
        assert_eq!(parse_predictions(&written).unwrap(), file);
    }
}
