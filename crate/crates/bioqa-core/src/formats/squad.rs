//! SQuAD-shaped datasets.
//!
//! The writer emits keys in the fixed order `version`, `data`, `title`,
//! `paragraphs`, `context`, `qas`, `id`, `question`, `answers`, `text`,
//! `answer_start`, UTF-8 with no escaping beyond JSON requirements, and a
//! trailing newline; `parse_squad(write_squad(d))` reproduces `d` exactly.
//!
//! Instances whose `answer_start` does not land on their answer text are
//! loaded as-is and reported by [`SquadDataset::flagged_ids`]; dropping them
//! is an explicit separate step so the removal is auditable.

use serde::{Deserialize, Serialize};

use crate::formats::{json_error, FormatError};
use crate::model::{AnswerSpan, SquadInstance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadDataset {
    pub version: String,
    pub articles: Vec<SquadArticle>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadArticle {
    pub title: String,
    pub paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadParagraph {
    pub context: String,
    pub qas: Vec<SquadQa>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadQa {
    pub id: String,
    pub question: String,
    pub answers: Vec<AnswerSpan>,
}

impl SquadQa {
    /// True when every answer satisfies the substring invariant against
    /// `context`.
    pub fn offsets_valid(&self, context: &str) -> bool {
        self.answers.iter().all(|a| a.matches_context(context))
    }
}

impl SquadDataset {
    /// An empty dataset pinned to the answered-only "v1.1" version string.
    pub fn empty() -> Self {
        SquadDataset {
            version: "v1.1".to_string(),
            articles: Vec::new(),
        }
    }

    pub fn total_instances(&self) -> usize {
        self.articles
            .iter()
            .flat_map(|a| &a.paragraphs)
            .map(|p| p.qas.len())
            .sum()
    }

    /// Materializes every (context, qa) pair as a standalone instance.
    pub fn instances(&self) -> impl Iterator<Item = SquadInstance> + '_ {
        self.articles
            .iter()
            .flat_map(|a| &a.paragraphs)
            .flat_map(|p| {
                p.qas.iter().map(|qa| SquadInstance {
                    id: qa.id.clone(),
                    question: qa.question.clone(),
                    context: p.context.clone(),
                    answers: qa.answers.clone(),
                })
            })
    }

    /// Ids of instances with at least one answer violating the substring
    /// invariant.
    pub fn flagged_ids(&self) -> Vec<String> {
        self.articles
            .iter()
            .flat_map(|a| &a.paragraphs)
            .flat_map(|p| {
                p.qas
                    .iter()
                    .filter(|qa| !qa.offsets_valid(&p.context))
                    .map(|qa| qa.id.clone())
            })
            .collect()
    }

    /// Removes every instance with a flagged answer offset, returning how
    /// many were removed. Paragraphs and articles left empty are dropped.
    pub fn retain_valid(&mut self) -> usize {
        let mut removed = 0usize;
        for article in &mut self.articles {
            for paragraph in &mut article.paragraphs {
                let before = paragraph.qas.len();
                let context = paragraph.context.clone();
                paragraph.qas.retain(|qa| qa.offsets_valid(&context));
                removed += before - paragraph.qas.len();
            }
            article.paragraphs.retain(|p| !p.qas.is_empty());
        }
        self.articles.retain(|a| !a.paragraphs.is_empty());
        removed
    }

    /// Groups instances into one article, merging consecutive instances
    /// that share a context into one paragraph.
    pub fn article_from_instances(title: &str, instances: &[SquadInstance]) -> SquadArticle {
        let mut paragraphs: Vec<SquadParagraph> = Vec::new();
        for inst in instances {
            let qa = SquadQa {
                id: inst.id.clone(),
                question: inst.question.clone(),
                answers: inst.answers.clone(),
            };
            match paragraphs.iter_mut().find(|p| p.context == inst.context) {
                Some(p) => p.qas.push(qa),
                None => paragraphs.push(SquadParagraph {
                    context: inst.context.clone(),
                    qas: vec![qa],
                }),
            }
        }
        SquadArticle {
            title: title.to_string(),
            paragraphs,
        }
    }
}

// Wire representation. Field declaration order fixes the output key order.
#[derive(Serialize, Deserialize)]
struct FileJson {
    version: String,
    data: Vec<ArticleJson>,
}

#[derive(Serialize, Deserialize)]
struct ArticleJson {
    #[serde(default)]
    title: String,
    paragraphs: Vec<ParagraphJson>,
}

#[derive(Serialize, Deserialize)]
struct ParagraphJson {
    context: String,
    qas: Vec<QaJson>,
}

#[derive(Serialize, Deserialize)]
struct QaJson {
    id: String,
    question: String,
    answers: Vec<AnswerJson>,
}

#[derive(Serialize, Deserialize)]
struct AnswerJson {
    text: String,
    answer_start: usize,
}

/// Parses a SQuAD v1.1-shaped file. v2.0 inputs are accepted: unknown
/// fields such as `is_impossible` are ignored and unanswerable entries load
/// with empty answer lists.
pub fn parse_squad(bytes: &[u8]) -> Result<SquadDataset, FormatError> {
    let raw: FileJson = serde_json::from_slice(bytes).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            FormatError::Invalid(format!("SQuAD schema error: {e}"))
        } else {
            json_error(bytes, &e)
        }
    })?;

    let articles = raw
        .data
        .into_iter()
        .map(|a| SquadArticle {
            title: a.title,
            paragraphs: a
                .paragraphs
                .into_iter()
                .map(|p| SquadParagraph {
                    qas: p
                        .qas
                        .into_iter()
                        .map(|qa| SquadQa {
                            id: qa.id,
                            question: qa.question,
                            answers: qa
                                .answers
                                .into_iter()
                                .map(|ans| AnswerSpan::new(ans.answer_start, ans.text))
                                .collect(),
                        })
                        .collect(),
                    context: p.context,
                })
                .collect(),
        })
        .collect();

    Ok(SquadDataset {
        version: raw.version,
        articles,
    })
}

/// Serializes a dataset to newline-terminated UTF-8 JSON.
pub fn write_squad(dataset: &SquadDataset) -> Vec<u8> {
    let file = FileJson {
        version: dataset.version.clone(),
        data: dataset
            .articles
            .iter()
            .map(|a| ArticleJson {
                title: a.title.clone(),
                paragraphs: a
                    .paragraphs
                    .iter()
                    .map(|p| ParagraphJson {
                        context: p.context.clone(),
                        qas: p
                            .qas
                            .iter()
                            .map(|qa| QaJson {
                                id: qa.id.clone(),
                                question: qa.question.clone(),
                                answers: qa
                                    .answers
                                    .iter()
                                    .map(|ans| AnswerJson {
                                        text: ans.text.clone(),
                                        answer_start: ans.start_char,
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec(&file).expect("serialization");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_instance_file() -> Vec<u8> {
        br#"{"version": "v1.1", "data": [{"title": "t", "paragraphs": [
            {"context": "ab cd", "qas": [
                {"id": "i1", "question": "q?", "answers": [{"text": "cd", "answer_start": 3}]}
            ]}
        ]}]}"#
            .to_vec()
    }

    #[test]
    fn valid_offsets_load_unflagged() {
        let d = parse_squad(&one_instance_file()).unwrap();
        assert_eq!(d.total_instances(), 1);
        assert!(d.flagged_ids().is_empty());
        let inst = d.instances().next().unwrap();
        assert_eq!(inst.answers[0].text, "cd");
        assert!(inst.offsets_valid());
    }

    #[test]
    fn mismatched_offset_is_flagged_not_repaired() {
        let bytes = br#"{"version": "v1.1", "data": [{"title": "t", "paragraphs": [
            {"context": "ab cd", "qas": [
                {"id": "bad", "question": "q?", "answers": [{"text": "cd", "answer_start": 1}]}
            ]}
        ]}]}"#;
        let d = parse_squad(bytes).unwrap();
        assert_eq!(d.flagged_ids(), vec!["bad".to_string()]);
        // The offset is preserved as parsed.
        assert_eq!(d.articles[0].paragraphs[0].qas[0].answers[0].start_char, 1);
    }

    #[test]
    fn negative_answer_start_is_rejected() {
        let bytes = br#"{"version": "v1.1", "data": [{"title": "t", "paragraphs": [
            {"context": "ab", "qas": [
                {"id": "i", "question": "q?", "answers": [{"text": "a", "answer_start": -1}]}
            ]}
        ]}]}"#;
        assert!(parse_squad(bytes).is_err());
    }

    #[test]
    fn empty_dataset_serialization() {
        let bytes = write_squad(&SquadDataset::empty());
        assert_eq!(bytes, b"{\"version\":\"v1.1\",\"data\":[]}\n");
    }

    #[test]
    fn roundtrip_identity_and_utf8_passthrough() {
        let d = SquadDataset {
            version: "v1.1".to_string(),
            articles: vec![SquadDataset::article_from_instances(
                "α-article",
                &[SquadInstance {
                    id: "i1".to_string(),
                    question: "which α-enzyme?".to_string(),
                    context: "the α-galactosidase enzyme".to_string(),
                    answers: vec![AnswerSpan::new(4, "α-galactosidase")],
                }],
            )],
        };
        let bytes = write_squad(&d);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("α-galactosidase"), "multibyte must not be escaped");
        assert!(text.ends_with('\n'));
        assert_eq!(parse_squad(&bytes).unwrap(), d);
    }

    #[test]
    fn v2_style_entries_load_readonly() {
        let bytes = br#"{"version": "v2.0", "data": [{"title": "t", "paragraphs": [
            {"context": "ab cd", "qas": [
                {"id": "imp", "question": "q?", "answers": [], "is_impossible": true,
                 "plausible_answers": [{"text": "ab", "answer_start": 0}]}
            ]}
        ]}]}"#;
        let d = parse_squad(bytes).unwrap();
        assert_eq!(d.version, "v2.0");
        assert_eq!(d.total_instances(), 1);
        assert!(d.articles[0].paragraphs[0].qas[0].answers.is_empty());
    }

    #[test]
    fn retain_valid_counts_removed() {
        let bytes = br#"{"version": "v1.1", "data": [{"title": "t", "paragraphs": [
            {"context": "ab cd", "qas": [
                {"id": "ok1", "question": "q?", "answers": [{"text": "ab", "answer_start": 0}]},
                {"id": "bad1", "question": "q?", "answers": [{"text": "cd", "answer_start": 0}]},
                {"id": "ok2", "question": "q?", "answers": [{"text": "cd", "answer_start": 3}]},
                {"id": "bad2", "question": "q?", "answers": [{"text": "zz", "answer_start": 0}]},
                {"id": "ok3", "question": "q?", "answers": [{"text": "b c", "answer_start": 1}]}
            ]}
        ]}]}"#;
        let mut d = parse_squad(bytes).unwrap();
        let removed = d.retain_valid();
        assert_eq!(removed, 2);
        assert_eq!(d.total_instances(), 3);
    }
}
