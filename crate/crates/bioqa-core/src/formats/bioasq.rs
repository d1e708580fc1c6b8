//! BioASQ Phase-B question files.
//!
//! Input shape: `{"questions": [{"id", "body", "type", "exact_answer",
//! "snippets": [{"text", "document", ...}], "abstracts"?: {...}}]}`.
//!
//! `exact_answer` varies across BioASQ editions: factoid answers appear both
//! as a flat list of synonyms and as a list of synonym-lists. Both shapes
//! are accepted and normalized to synonym-lists. Summary-type questions are
//! counted and skipped.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::json;

use crate::formats::{json_error, FormatError};
use crate::model::{BioasqQuestion, GoldAnswer, QuestionType, Snippet};

#[derive(Debug, Deserialize)]
struct RawFile {
    questions: Vec<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct RawQuestion {
    id: String,
    body: String,
    #[serde(rename = "type")]
    qtype: String,
    #[serde(default)]
    exact_answer: Option<ExactAnswer>,
    #[serde(default)]
    snippets: Vec<RawSnippet>,
    #[serde(default)]
    abstracts: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ExactAnswer {
    Text(String),
    Flat(Vec<String>),
    Nested(Vec<Vec<String>>),
}

#[derive(Debug, Deserialize)]
struct RawSnippet {
    text: String,
    document: String,
    #[serde(rename = "offsetInBeginSection", default)]
    begin: Option<i64>,
    #[serde(rename = "offsetInEndSection", default)]
    end: Option<i64>,
}

/// Result of reading a BioASQ file: the supported-type questions plus the
/// number of Summary entries that were skipped.
#[derive(Debug)]
pub struct BioasqParse {
    pub questions: Vec<BioasqQuestion>,
    pub summary_skipped: usize,
}

/// Parses a BioASQ question file. Snippet texts are preserved verbatim.
pub fn parse_bioasq(bytes: &[u8]) -> Result<BioasqParse, FormatError> {
    let raw: RawFile = serde_json::from_slice(bytes).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            FormatError::Schema {
                index: 0,
                message: e.to_string(),
            }
        } else {
            json_error(bytes, &e)
        }
    })?;

    let mut questions = Vec::new();
    let mut summary_skipped = 0usize;
    for (index, value) in raw.questions.into_iter().enumerate() {
        let rq: RawQuestion =
            serde_json::from_value(value).map_err(|e| FormatError::Schema {
                index,
                message: e.to_string(),
            })?;

        let qtype = match rq.qtype.as_str() {
            "yesno" => QuestionType::YesNo,
            "factoid" => QuestionType::Factoid,
            "list" => QuestionType::List,
            "summary" => {
                summary_skipped += 1;
                continue;
            }
            other => {
                return Err(FormatError::Schema {
                    index,
                    message: format!("unknown question type '{other}'"),
                })
            }
        };

        let exact = rq.exact_answer.ok_or_else(|| FormatError::Schema {
            index,
            message: "missing required field 'exact_answer'".to_string(),
        })?;
        let gold = gold_answer(qtype, exact, index)?;

        let mut snippets = Vec::with_capacity(rq.snippets.len());
        for (si, rs) in rq.snippets.into_iter().enumerate() {
            let source_offsets = match (rs.begin, rs.end) {
                (Some(b), Some(e)) => {
                    if b < 0 || e < 0 {
                        return Err(FormatError::Schema {
                            index,
                            message: format!("snippet {si} has a negative section offset"),
                        });
                    }
                    Some((b as usize, e as usize))
                }
                _ => None,
            };
            snippets.push(Snippet {
                text: rs.text,
                document_id: rs.document,
                source_offsets,
            });
        }

        questions.push(BioasqQuestion {
            id: rq.id,
            body: rq.body,
            qtype,
            gold,
            snippets,
            abstracts: rq.abstracts,
        });
    }

    Ok(BioasqParse {
        questions,
        summary_skipped,
    })
}

fn gold_answer(
    qtype: QuestionType,
    exact: ExactAnswer,
    index: usize,
) -> Result<GoldAnswer, FormatError> {
    match qtype {
        QuestionType::YesNo => match exact {
            ExactAnswer::Text(s) => match s.to_lowercase().as_str() {
                "yes" => Ok(GoldAnswer::yesno(true)),
                "no" => Ok(GoldAnswer::yesno(false)),
                other => Err(FormatError::Schema {
                    index,
                    message: format!("yesno exact_answer must be \"yes\" or \"no\", got \"{other}\""),
                }),
            },
            _ => Err(FormatError::Schema {
                index,
                message: "yesno exact_answer must be a string".to_string(),
            }),
        },
        QuestionType::Factoid => Ok(GoldAnswer::from_items(match exact {
            // A flat factoid list is one item whose entries are synonyms.
            ExactAnswer::Flat(synonyms) => vec![synonyms],
            ExactAnswer::Nested(items) => items,
            ExactAnswer::Text(s) => vec![vec![s]],
        })),
        QuestionType::List => Ok(GoldAnswer::from_items(match exact {
            // A flat list answer is one item per entry.
            ExactAnswer::Flat(entries) => entries.into_iter().map(|e| vec![e]).collect(),
            ExactAnswer::Nested(items) => items,
            ExactAnswer::Text(s) => vec![vec![s]],
        })),
    }
}

/// Serializes questions back to the BioASQ shape. Factoid and List answers
/// are written in the nested synonym-list form, so
/// `parse_bioasq(write_bioasq(qs))` reproduces `qs` exactly.
pub fn write_bioasq(questions: &[BioasqQuestion]) -> Vec<u8> {
    let qs: Vec<serde_json::Value> = questions
        .iter()
        .map(|q| {
            let exact_answer = match q.qtype {
                QuestionType::YesNo => {
                    json!(if q.gold.yes_label == Some(true) { "yes" } else { "no" })
                }
                _ => json!(q.gold.items),
            };
            let snippets: Vec<serde_json::Value> = q
                .snippets
                .iter()
                .map(|s| match s.source_offsets {
                    Some((b, e)) => json!({
                        "text": s.text,
                        "document": s.document_id,
                        "offsetInBeginSection": b,
                        "offsetInEndSection": e,
                    }),
                    None => json!({"text": s.text, "document": s.document_id}),
                })
                .collect();
            let mut obj = serde_json::Map::new();
            obj.insert("id".to_string(), json!(q.id));
            obj.insert("type".to_string(), json!(q.qtype.to_string()));
            obj.insert("body".to_string(), json!(q.body));
            obj.insert("exact_answer".to_string(), exact_answer);
            obj.insert("snippets".to_string(), json!(snippets));
            if !q.abstracts.is_empty() {
                obj.insert("abstracts".to_string(), json!(q.abstracts));
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    let mut out = serde_json::to_vec(&json!({ "questions": qs })).expect("serialization");
    out.push(b'\n');
    out
}
