//! Shared domain types for the toolkit.
//!
//! All offsets in this crate are Unicode scalar-value (character) indices,
//! not byte indices. SQuAD's `answer_start` follows the same convention, so
//! offsets written by one tool remain valid in another regardless of how
//! either slices strings internally.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The three question types handled by the toolkit. Summary questions are
/// rejected at parse time and never reach the data model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    YesNo,
    Factoid,
    List,
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuestionType::YesNo => write!(f, "yesno"),
            QuestionType::Factoid => write!(f, "factoid"),
            QuestionType::List => write!(f, "list"),
        }
    }
}

/// A human-annotated context passage attached to a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub text: String,
    /// Identifier of the source document (a PubMed URL in real BioASQ data).
    pub document_id: String,
    /// Character offsets of this snippet inside the source abstract, when
    /// the annotator recorded them. `(begin, end)` with `end` exclusive.
    pub source_offsets: Option<(usize, usize)>,
}

impl Snippet {
    pub fn new(text: impl Into<String>, document_id: impl Into<String>) -> Self {
        Snippet {
            text: text.into(),
            document_id: document_id.into(),
            source_offsets: None,
        }
    }

    pub fn with_offsets(mut self, begin: usize, end: usize) -> Self {
        self.source_offsets = Some((begin, end));
        self
    }
}

/// Gold answer content. Yes/No questions carry a boolean label; Factoid and
/// List questions carry items, each item being a list of accepted synonyms.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub yes_label: Option<bool>,
    pub items: Vec<Vec<String>>,
}

impl GoldAnswer {
    pub fn yesno(label: bool) -> Self {
        GoldAnswer {
            yes_label: Some(label),
            items: Vec::new(),
        }
    }

    pub fn from_items(items: Vec<Vec<String>>) -> Self {
        GoldAnswer {
            yes_label: None,
            items,
        }
    }
}

/// One BioASQ Phase-B question: body, type, gold answers, snippets, and
/// (optionally) the full abstracts the snippets were taken from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BioasqQuestion {
    pub id: String,
    pub body: String,
    pub qtype: QuestionType,
    pub gold: GoldAnswer,
    pub snippets: Vec<Snippet>,
    /// document id → full abstract text. Empty when abstracts were not
    /// supplied alongside the question.
    #[serde(default)]
    pub abstracts: BTreeMap<String, String>,
}

/// A character-indexed answer span. `end_char` is exclusive, and the
/// substring of the owning context at `[start_char, end_char)` must equal
/// `text` exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub start_char: usize,
    pub end_char: usize,
    pub text: String,
}

impl AnswerSpan {
    pub fn new(start_char: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        AnswerSpan {
            start_char,
            end_char: start_char + text.chars().count(),
            text,
        }
    }

    /// Checks the substring invariant against `context`.
    pub fn matches_context(&self, context: &str) -> bool {
        self.start_char < self.end_char
            && char_slice(context, self.start_char, self.end_char)
                .map(|s| s == self.text)
                .unwrap_or(false)
    }
}

/// One extractive training/evaluation unit in SQuAD terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadInstance {
    pub id: String,
    pub question: String,
    pub context: String,
    pub answers: Vec<AnswerSpan>,
}

impl SquadInstance {
    /// True when every answer satisfies the substring invariant.
    pub fn offsets_valid(&self) -> bool {
        self.answers.iter().all(|a| a.matches_context(&self.context))
    }
}

/// One Yes/No training unit: the question paired with a single snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryInstance {
    pub id: String,
    pub question: String,
    pub context: String,
    pub label: bool,
}

/// Extracts the substring at character offsets `[start, end)`. Returns
/// `None` when the range does not fit the string.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut byte_start = None;
    let mut byte_end = None;
    for (char_idx, (byte_idx, _)) in text.char_indices().enumerate() {
        if char_idx == start {
            byte_start = Some(byte_idx);
        }
        if char_idx == end {
            byte_end = Some(byte_idx);
            break;
        }
    }
    let n_bytes = text.len();
    let char_count_reached = |opt: Option<usize>, target: usize| -> Option<usize> {
        match opt {
            Some(b) => Some(b),
            // start/end may equal the total char count (end-of-string).
            None if target == text.chars().count() => Some(n_bytes),
            None => None,
        }
    };
    let b0 = char_count_reached(byte_start, start)?;
    let b1 = char_count_reached(byte_end, end)?;
    text.get(b0..b1)
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// One failed invariant found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Offending question id, when the violation is attributable to one.
    pub question_id: Option<String>,
    pub message: String,
}

impl Violation {
    fn on(id: &str, message: impl Into<String>) -> Self {
        Violation {
            question_id: Some(id.to_string()),
            message: message.into(),
        }
    }
}

/// Checks every dataset invariant and reports violations instead of
/// failing. An empty report means the dataset is well-formed.
pub fn validate_dataset(questions: &[BioasqQuestion]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, q) in questions.iter().enumerate() {
        seen.entry(q.id.as_str()).or_default().push(idx);

        for (si, snippet) in q.snippets.iter().enumerate() {
            if snippet.text.is_empty() {
                violations.push(Violation::on(&q.id, format!("snippet {si} has empty text")));
            }
            if let Some((begin, end)) = snippet.source_offsets {
                if end <= begin {
                    violations.push(Violation::on(
                        &q.id,
                        format!("snippet {si} offsets ({begin}, {end}) must satisfy end > begin"),
                    ));
                }
            }
        }

        match q.qtype {
            QuestionType::YesNo => {
                if q.gold.yes_label.is_none() {
                    violations.push(Violation::on(&q.id, "YesNo question missing yes/no label"));
                }
                if !q.gold.items.is_empty() {
                    violations.push(Violation::on(&q.id, "YesNo question must have no gold items"));
                }
            }
            QuestionType::Factoid => {
                if q.gold.items.len() != 1 {
                    violations.push(Violation::on(
                        &q.id,
                        format!(
                            "Factoid must have exactly one item, found {}",
                            q.gold.items.len()
                        ),
                    ));
                }
            }
            QuestionType::List => {
                if q.gold.items.is_empty() {
                    violations.push(Violation::on(&q.id, "List must have at least one item"));
                }
            }
        }

        for (ii, item) in q.gold.items.iter().enumerate() {
            if item.is_empty() {
                violations.push(Violation::on(&q.id, format!("gold item {ii} has no synonyms")));
            }
            for (si, syn) in item.iter().enumerate() {
                if syn.is_empty() {
                    violations.push(Violation::on(
                        &q.id,
                        format!("gold item {ii} synonym {si} is empty"),
                    ));
                }
            }
        }
    }

    for (id, indices) in seen {
        if indices.len() > 1 {
            let positions: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
            violations.push(Violation {
                question_id: Some(id.to_string()),
                message: format!(
                    "duplicate id used by {} questions (indices {})",
                    indices.len(),
                    positions.join(", ")
                ),
            });
        }
    }

    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factoid(id: &str, synonyms: &[&str]) -> BioasqQuestion {
        BioasqQuestion {
            id: id.to_string(),
            body: "What gene causes X?".to_string(),
            qtype: QuestionType::Factoid,
            gold: GoldAnswer::from_items(vec![synonyms.iter().map(|s| s.to_string()).collect()]),
            snippets: vec![Snippet::new("TGM1 causes X.", "doc1")],
            abstracts: BTreeMap::new(),
        }
    }

    #[test]
    fn well_formed_fixture_has_empty_report() {
        let questions = vec![
            factoid("q1", &["TGM1"]),
            BioasqQuestion {
                id: "q2".to_string(),
                body: "Is X caused by Y?".to_string(),
                qtype: QuestionType::YesNo,
                gold: GoldAnswer::yesno(true),
                snippets: vec![Snippet::new("Y causes X.", "doc2")],
                abstracts: BTreeMap::new(),
            },
            BioasqQuestion {
                id: "q3".to_string(),
                body: "List genes of X.".to_string(),
                qtype: QuestionType::List,
                gold: GoldAnswer::from_items(vec![vec!["A".into()], vec!["B".into()]]),
                snippets: vec![Snippet::new("A and B.", "doc3")],
                abstracts: BTreeMap::new(),
            },
        ];
        assert!(validate_dataset(&questions).is_empty());
    }

    #[test]
    fn factoid_with_two_items_is_flagged() {
        let mut q = factoid("q1", &["TGM1"]);
        q.gold.items.push(vec!["extra".into()]);
        let report = validate_dataset(&[q]);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("exactly one item"));
    }

    #[test]
    fn duplicate_ids_name_both_records() {
        let report = validate_dataset(&[factoid("dup", &["A"]), factoid("dup", &["B"])]);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("indices 0, 1"));
        assert_eq!(report[0].question_id.as_deref(), Some("dup"));
    }

    #[test]
    fn answer_span_substring_invariant() {
        let ctx = "Price €50 total";
        let span = AnswerSpan::new(6, "€50");
        assert!(span.matches_context(ctx));
        assert_eq!(span.end_char, 9);

        let bad = AnswerSpan::new(5, "€50");
        assert!(!bad.matches_context(ctx));
    }

    #[test]
    fn char_slice_handles_multibyte_and_bounds() {
        let s = "aé漢z";
        assert_eq!(char_slice(s, 0, 2), Some("aé"));
        assert_eq!(char_slice(s, 1, 3), Some("é漢"));
        assert_eq!(char_slice(s, 3, 4), Some("z"));
        assert_eq!(char_slice(s, 0, 4), Some(s));
        assert_eq!(char_slice(s, 0, 5), None);
        assert_eq!(char_slice(s, 4, 4), Some(""));
    }

    #[test]
    fn snippet_offset_and_empty_text_violations() {
        let mut q = factoid("q1", &["TGM1"]);
        q.snippets = vec![
            Snippet::new("", "doc1"),
            Snippet::new("ok", "doc1").with_offsets(5, 5),
        ];
        let report = validate_dataset(&[q]);
        assert_eq!(report.len(), 2);
    }
}
