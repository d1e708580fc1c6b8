//! BioASQ → extractive-instance conversion.
//!
//! Factoid and List questions become SQuAD-style instances by enumerating
//! every (question, context, gold item) combination that has at least one
//! boundary-valid exact answer span; Yes/No questions become one binary
//! instance per snippet. Matching is case-sensitive here; relaxed matching
//! belongs to the answerability audit.

use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::context::segment_sentences;
use crate::formats::squad::SquadDataset;
use crate::model::{char_len, char_slice, AnswerSpan, BinaryInstance, BioasqQuestion, QuestionType, SquadInstance};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("question '{0}' is {1}, expected Factoid or List")]
    WrongQuestionType(String, QuestionType),
    #[error("question '{0}' is missing its yes/no label")]
    MissingYesLabel(String),
    #[error("question '{0}' has no abstracts; the full-abstract strategy needs them")]
    NoAbstracts(String),
}

/// How contexts are built from a question's annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContextStrategy {
    /// One context per snippet, text verbatim.
    SnippetAsIs,
    /// One context per distinct source abstract.
    FullAbstract,
    /// Snippet extended by `window` neighboring sentences per side inside
    /// its source abstract; falls back to the verbatim snippet when offsets
    /// or the abstract are unavailable.
    AppendedSnippet { window: usize },
}

impl std::fmt::Display for ContextStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContextStrategy::SnippetAsIs => write!(f, "snippet"),
            ContextStrategy::FullAbstract => write!(f, "abstract"),
            ContextStrategy::AppendedSnippet { window } => write!(f, "appended(window={window})"),
        }
    }
}

impl FromStr for ContextStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snippet" => Ok(ContextStrategy::SnippetAsIs),
            "abstract" => Ok(ContextStrategy::FullAbstract),
            "appended" => Ok(ContextStrategy::AppendedSnippet { window: 1 }),
            other => Err(format!(
                "unknown strategy '{other}' (expected snippet, abstract, or appended)"
            )),
        }
    }
}

/// Where a built context came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ContextProvenance {
    Snippet { index: usize },
    Abstract { document_id: String },
    Appended { snippet_index: usize, fell_back: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltContext {
    pub text: String,
    pub provenance: ContextProvenance,
}

/// Counters accumulated over a conversion run. Merging per-question reports
/// is plain field-wise addition.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConversionReport {
    pub strategy: String,
    pub questions_seen: usize,
    pub questions_converted: usize,
    pub questions_skipped_no_match: usize,
    pub instances_emitted: usize,
    pub spans_emitted: usize,
    pub binary_instances_emitted: usize,
    pub yesno_without_snippets: usize,
    pub appended_fallbacks: usize,
    pub abstracts_missing: usize,
}

impl ConversionReport {
    pub fn merge(&mut self, other: &ConversionReport) {
        self.questions_seen += other.questions_seen;
        self.questions_converted += other.questions_converted;
        self.questions_skipped_no_match += other.questions_skipped_no_match;
        self.instances_emitted += other.instances_emitted;
        self.spans_emitted += other.spans_emitted;
        self.binary_instances_emitted += other.binary_instances_emitted;
        self.yesno_without_snippets += other.yesno_without_snippets;
        self.appended_fallbacks += other.appended_fallbacks;
        self.abstracts_missing += other.abstracts_missing;
    }
}

/// Finds every case-sensitive occurrence of `answer` in `context`,
/// overlapping occurrences included, as character-indexed spans sorted by
/// start. With `boundary_required`, an occurrence is kept only when the
/// characters adjacent to it (if any) are non-alphanumeric.
pub fn find_exact_spans(context: &str, answer: &str, boundary_required: bool) -> Vec<AnswerSpan> {
    if answer.is_empty() {
        return Vec::new();
    }
    let answer_bytes = answer.len();
    let answer_chars = char_len(answer);
    let mut spans = Vec::new();
    let mut prev_char: Option<char> = None;
    for (char_idx, (byte_idx, ch)) in context.char_indices().enumerate() {
        if context[byte_idx..].starts_with(answer) {
            let boundary_ok = !boundary_required || {
                let before_ok = prev_char.is_none_or(|p| !p.is_alphanumeric());
                let after_ok = context[byte_idx + answer_bytes..]
                    .chars()
                    .next()
                    .is_none_or(|n| !n.is_alphanumeric());
                before_ok && after_ok
            };
            if boundary_ok {
                spans.push(AnswerSpan {
                    start_char: char_idx,
                    end_char: char_idx + answer_chars,
                    text: answer.to_string(),
                });
            }
        }
        prev_char = Some(ch);
    }
    spans
}

/// Builds the context list for one question under a strategy. The usize in
/// the result counts appended-snippet fallbacks and missing abstracts for
/// the report.
pub fn build_contexts(
    question: &BioasqQuestion,
    strategy: ContextStrategy,
) -> Result<(Vec<BuiltContext>, ConversionReport), ConvertError> {
    let mut report = ConversionReport::default();
    let contexts = match strategy {
        ContextStrategy::SnippetAsIs => question
            .snippets
            .iter()
            .enumerate()
            .map(|(index, s)| BuiltContext {
                text: s.text.clone(),
                provenance: ContextProvenance::Snippet { index },
            })
            .collect(),
        ContextStrategy::FullAbstract => {
            if question.abstracts.is_empty() {
                return Err(ConvertError::NoAbstracts(question.id.clone()));
            }
            let mut seen = Vec::new();
            let mut contexts = Vec::new();
            // One context per distinct document, in snippet order; when the
            // question has no snippets, every abstract is used.
            let doc_ids: Vec<String> = if question.snippets.is_empty() {
                question.abstracts.keys().cloned().collect()
            } else {
                question.snippets.iter().map(|s| s.document_id.clone()).collect()
            };
            for doc in doc_ids {
                if seen.contains(&doc) {
                    continue;
                }
                seen.push(doc.clone());
                match question.abstracts.get(&doc) {
                    Some(text) => contexts.push(BuiltContext {
                        text: text.clone(),
                        provenance: ContextProvenance::Abstract { document_id: doc },
                    }),
                    None => report.abstracts_missing += 1,
                }
            }
            contexts
        }
        ContextStrategy::AppendedSnippet { window } => question
            .snippets
            .iter()
            .enumerate()
            .map(|(index, snippet)| {
                match appended_context(question, index, window) {
                    Some(text) => BuiltContext {
                        text,
                        provenance: ContextProvenance::Appended {
                            snippet_index: index,
                            fell_back: false,
                        },
                    },
                    None => {
                        report.appended_fallbacks += 1;
                        BuiltContext {
                            text: snippet.text.clone(),
                            provenance: ContextProvenance::Appended {
                                snippet_index: index,
                                fell_back: true,
                            },
                        }
                    }
                }
            })
            .collect(),
    };
    Ok((contexts, report))
}

/// Extends snippet `index` by `window` sentences per side within its source
/// abstract. Returns `None` (fallback) when the abstract or offsets are
/// unavailable or the offsets do not reproduce the snippet text.
fn appended_context(question: &BioasqQuestion, index: usize, window: usize) -> Option<String> {
    let snippet = &question.snippets[index];
    let (begin, end) = snippet.source_offsets?;
    let abstract_text = question.abstracts.get(&snippet.document_id)?;
    if end <= begin || end > char_len(abstract_text) {
        return None;
    }
    if char_slice(abstract_text, begin, end)? != snippet.text {
        return None;
    }
    if window == 0 {
        return Some(snippet.text.clone());
    }
    let sentences = segment_sentences(abstract_text);
    let first = sentences.iter().position(|s| s.end_char > begin)?;
    let last = sentences.iter().rposition(|s| s.start_char < end)?.max(first);
    let left = first.saturating_sub(window);
    let right = (last + window).min(sentences.len() - 1);
    let ext_start = sentences[left].start_char.min(begin);
    let ext_end = sentences[right].end_char.max(end);
    char_slice(abstract_text, ext_start, ext_end).map(|s| s.to_string())
}

/// Emits one instance per (context, gold item) pair with at least one
/// boundary-valid exact span; the instance carries the spans of every
/// matching synonym of that item. Instance ids are
/// `questionId_contextIndex_itemIndex`.
pub fn enumerate_qca_triplets(
    question: &BioasqQuestion,
    strategy: ContextStrategy,
) -> Result<(Vec<SquadInstance>, ConversionReport), ConvertError> {
    enumerate_qca_triplets_with(question, strategy, true)
}

/// [`enumerate_qca_triplets`] with the boundary requirement configurable.
pub fn enumerate_qca_triplets_with(
    question: &BioasqQuestion,
    strategy: ContextStrategy,
    boundary_required: bool,
) -> Result<(Vec<SquadInstance>, ConversionReport), ConvertError> {
    if !matches!(question.qtype, QuestionType::Factoid | QuestionType::List) {
        return Err(ConvertError::WrongQuestionType(
            question.id.clone(),
            question.qtype,
        ));
    }
    let (contexts, mut report) = build_contexts(question, strategy)?;
    let mut instances = Vec::new();
    for (context_index, context) in contexts.iter().enumerate() {
        for (item_index, item) in question.gold.items.iter().enumerate() {
            let mut spans: Vec<AnswerSpan> = item
                .iter()
                .flat_map(|synonym| find_exact_spans(&context.text, synonym, boundary_required))
                .collect();
            spans.sort();
            spans.dedup();
            if spans.is_empty() {
                continue;
            }
            report.spans_emitted += spans.len();
            instances.push(SquadInstance {
                id: format!("{}_{}_{}", question.id, context_index, item_index),
                question: question.body.clone(),
                context: context.text.clone(),
                answers: spans,
            });
        }
    }
    report.instances_emitted = instances.len();
    Ok((instances, report))
}

/// One binary instance per snippet, labeled by the question's gold yes/no
/// answer. No span search is involved.
pub fn convert_yesno(question: &BioasqQuestion) -> Result<Vec<BinaryInstance>, ConvertError> {
    if question.qtype != QuestionType::YesNo {
        return Err(ConvertError::WrongQuestionType(
            question.id.clone(),
            question.qtype,
        ));
    }
    let label = question
        .gold
        .yes_label
        .ok_or_else(|| ConvertError::MissingYesLabel(question.id.clone()))?;
    Ok(question
        .snippets
        .iter()
        .enumerate()
        .map(|(index, snippet)| BinaryInstance {
            id: format!("{}_{}", question.id, index),
            question: question.body.clone(),
            context: snippet.text.clone(),
            label,
        })
        .collect())
}

/// Everything one conversion run produces.
#[derive(Debug)]
pub struct ConversionOutcome {
    pub instances: Vec<SquadInstance>,
    pub binary: Vec<BinaryInstance>,
    pub report: ConversionReport,
    /// One article per converted question, ready for [`SquadDataset`].
    pub dataset: SquadDataset,
}

/// Converts a whole question collection under one strategy. Factoid and
/// List questions yield extractive instances, Yes/No questions yield binary
/// instances, and per-question results fold into one report.
pub fn convert_questions(
    questions: &[BioasqQuestion],
    strategy: ContextStrategy,
    boundary_required: bool,
) -> Result<ConversionOutcome, ConvertError> {
    let mut outcome = ConversionOutcome {
        instances: Vec::new(),
        binary: Vec::new(),
        report: ConversionReport::default(),
        dataset: SquadDataset::empty(),
    };
    outcome.report.strategy = strategy.to_string();
    for question in questions {
        outcome.report.questions_seen += 1;
        match question.qtype {
            QuestionType::YesNo => {
                let instances = convert_yesno(question)?;
                if instances.is_empty() {
                    outcome.report.yesno_without_snippets += 1;
                } else {
                    outcome.report.questions_converted += 1;
                }
                outcome.report.binary_instances_emitted += instances.len();
                outcome.binary.extend(instances);
            }
            QuestionType::Factoid | QuestionType::List => {
                let (instances, report) =
                    enumerate_qca_triplets_with(question, strategy, boundary_required)?;
                outcome.report.merge(&report);
                if instances.is_empty() {
                    outcome.report.questions_skipped_no_match += 1;
                } else {
                    outcome.report.questions_converted += 1;
                    outcome
                        .dataset
                        .articles
                        .push(SquadDataset::article_from_instances(&question.id, &instances));
                }
                outcome.instances.extend(instances);
            }
        }
    }
    Ok(outcome)
}

/// Removes every instance whose answer offsets violate the substring
/// invariant, returning the filtered dataset and the removal count.
pub fn filter_unmatched_squad(mut dataset: SquadDataset) -> (SquadDataset, usize) {
    let removed = dataset.retain_valid();
    (dataset, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GoldAnswer, Snippet};
    use std::collections::BTreeMap;

    fn question(
        qtype: QuestionType,
        items: Vec<Vec<&str>>,
        snippets: Vec<Snippet>,
    ) -> BioasqQuestion {
        BioasqQuestion {
            id: "q1".into(),
            body: "What causes X?".into(),
            qtype,
            gold: GoldAnswer::from_items(
                items
                    .into_iter()
                    .map(|i| i.into_iter().map(String::from).collect())
                    .collect(),
            ),
            snippets,
            abstracts: BTreeMap::new(),
        }
    }

    #[test]
    fn prefix_match_with_boundary() {
        let spans = find_exact_spans("TGM1 mutations cause BSI", "TGM1 mutations", true);
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start_char, spans[0].end_char), (0, 14));
    }

    #[test]
    fn mid_token_occurrence_is_rejected() {
        assert!(find_exact_spans("microRNA-21 level", "RNA", true).is_empty());
        // Without the boundary requirement it is found.
        assert_eq!(find_exact_spans("microRNA-21 level", "RNA", false).len(), 1);
    }

    #[test]
    fn repeated_occurrences_are_all_reported() {
        let spans = find_exact_spans("a b a b", "a b", true);
        let starts: Vec<usize> = spans.iter().map(|s| s.start_char).collect();
        assert_eq!(starts, vec![0, 4]);
    }

    #[test]
    fn overlapping_occurrences_are_reported() {
        // Occurrences at 0 and 2 overlap ("aa aa aa" windows "aa aa").
        let spans = find_exact_spans("aa aa aa", "aa aa", true);
        let starts: Vec<usize> = spans.iter().map(|s| s.start_char).collect();
        assert_eq!(starts, vec![0, 3]);
        let unbounded = find_exact_spans("aaaa", "aa", false);
        assert_eq!(unbounded.len(), 3);
    }

    #[test]
    fn punctuation_adjacent_entity_matches() {
        let spans = find_exact_spans("a novel mutation (TGM1) was found", "TGM1", true);
        assert_eq!(spans.len(), 1);
    }

    #[test]
    fn snippet_as_is_builds_one_context_per_snippet() {
        let q = question(
            QuestionType::Factoid,
            vec![vec!["TGM1"]],
            vec![Snippet::new("s one", "d1"), Snippet::new("s two", "d2")],
        );
        let (contexts, _) = build_contexts(&q, ContextStrategy::SnippetAsIs).unwrap();
        assert_eq!(contexts.len(), 2);
        assert_eq!(contexts[0].text, "s one");
    }

    #[test]
    fn full_abstract_dedups_by_document() {
        let mut q = question(
            QuestionType::Factoid,
            vec![vec!["TGM1"]],
            vec![
                Snippet::new("first part", "d1"),
                Snippet::new("second part", "d1"),
            ],
        );
        q.abstracts.insert("d1".into(), "The whole abstract.".into());
        let (contexts, _) = build_contexts(&q, ContextStrategy::FullAbstract).unwrap();
        assert_eq!(contexts.len(), 1);
        assert_eq!(contexts[0].text, "The whole abstract.");
    }

    #[test]
    fn full_abstract_without_abstracts_errors() {
        let q = question(
            QuestionType::Factoid,
            vec![vec!["TGM1"]],
            vec![Snippet::new("snip", "d1")],
        );
        assert!(matches!(
            build_contexts(&q, ContextStrategy::FullAbstract),
            Err(ConvertError::NoAbstracts(_))
        ));
    }

    #[test]
    fn appended_window_zero_equals_snippet_as_is() {
        let abstract_text = "Background is long. TGM1 causes BSI. Conclusion follows.";
        let begin = char_len("Background is long. ");
        let end = begin + char_len("TGM1 causes BSI.");
        let mut q = question(
            QuestionType::Factoid,
            vec![vec!["TGM1"]],
            vec![Snippet::new("TGM1 causes BSI.", "d1").with_offsets(begin, end)],
        );
        q.abstracts.insert("d1".into(), abstract_text.into());

        let (w0, report) = build_contexts(&q, ContextStrategy::AppendedSnippet { window: 0 }).unwrap();
        let (as_is, _) = build_contexts(&q, ContextStrategy::SnippetAsIs).unwrap();
        assert_eq!(w0[0].text, as_is[0].text);
        assert_eq!(report.appended_fallbacks, 0);

        let (w1, _) = build_contexts(&q, ContextStrategy::AppendedSnippet { window: 1 }).unwrap();
        assert_eq!(w1[0].text, abstract_text);
    }

    #[test]
    fn appended_falls_back_without_offsets() {
        let q = question(
            QuestionType::Factoid,
            vec![vec!["TGM1"]],
            vec![Snippet::new("TGM1 causes BSI.", "d1")],
        );
        let (contexts, report) =
            build_contexts(&q, ContextStrategy::AppendedSnippet { window: 1 }).unwrap();
        assert_eq!(report.appended_fallbacks, 1);
        assert_eq!(contexts[0].text, "TGM1 causes BSI.");
        assert_eq!(
            contexts[0].provenance,
            ContextProvenance::Appended { snippet_index: 0, fell_back: true }
        );
    }

    #[test]
    fn single_synonym_single_snippet_emits_one_instance() {
        let q = question(
            QuestionType::Factoid,
            vec![vec!["TGM1"]],
            vec![Snippet::new("The TGM1 gene is key.", "d1")],
        );
        let (instances, report) = enumerate_qca_triplets(&q, ContextStrategy::SnippetAsIs).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(instances[0].id, "q1_0_0");
        assert_eq!(instances[0].answers.len(), 1);
        assert_eq!(report.instances_emitted, 1);
        assert!(instances[0].offsets_valid());
    }

    #[test]
    fn list_cross_product_emits_six_instances() {
        // 3 items, 2 contexts, each item matching each context exactly once.
        let q = question(
            QuestionType::List,
            vec![vec!["aaa"], vec!["bbb"], vec!["ccc"]],
            vec![
                Snippet::new("aaa bbb ccc", "d1"),
                Snippet::new("ccc aaa bbb", "d2"),
            ],
        );
        let (instances, report) = enumerate_qca_triplets(&q, ContextStrategy::SnippetAsIs).unwrap();
        assert_eq!(instances.len(), 6);
        assert_eq!(report.spans_emitted, 6);
        let ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, vec!["q1_0_0", "q1_0_1", "q1_0_2", "q1_1_0", "q1_1_1", "q1_1_2"]);
    }

    #[test]
    fn reworded_gold_answer_emits_nothing() {
        let q = question(
            QuestionType::Factoid,
            vec![vec!["transglutaminase-1 gene (TGM1) mutations"]],
            vec![Snippet::new(
                "a novel mutation of the transglutaminase 1 gene (TGM1)",
                "d1",
            )],
        );
        let (instances, report) = enumerate_qca_triplets(&q, ContextStrategy::SnippetAsIs).unwrap();
        assert!(instances.is_empty());
        assert_eq!(report.instances_emitted, 0);
    }

    #[test]
    fn yesno_conversion_labels_every_snippet() {
        let mut q = question(QuestionType::YesNo, vec![], vec![
            Snippet::new("s1", "d1"),
            Snippet::new("s2", "d2"),
            Snippet::new("s3", "d3"),
        ]);
        q.gold = GoldAnswer::yesno(true);
        let instances = convert_yesno(&q).unwrap();
        assert_eq!(instances.len(), 3);
        assert!(instances.iter().all(|i| i.label));
        assert_eq!(instances[1].id, "q1_1");

        q.gold = GoldAnswer::yesno(false);
        q.snippets.truncate(1);
        let instances = convert_yesno(&q).unwrap();
        assert_eq!(instances.len(), 1);
        assert!(!instances[0].label);

        q.snippets.clear();
        assert!(convert_yesno(&q).unwrap().is_empty());

        q.gold.yes_label = None;
        assert!(matches!(convert_yesno(&q), Err(ConvertError::MissingYesLabel(_))));
    }

    #[test]
    fn conversion_is_deterministic() {
        let q = question(
            QuestionType::List,
            vec![vec!["aaa", "bbb"], vec!["ccc"]],
            vec![Snippet::new("aaa ccc bbb aaa", "d1")],
        );
        let (a, _) = enumerate_qca_triplets(&q, ContextStrategy::SnippetAsIs).unwrap();
        let (b, _) = enumerate_qca_triplets(&q, ContextStrategy::SnippetAsIs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filter_removes_flagged_instances() {
        let bytes = br#"{"version": "v1.1", "data": [{"title": "t", "paragraphs": [
            {"context": "ab cd", "qas": [
                {"id": "ok", "question": "q?", "answers": [{"text": "ab", "answer_start": 0}]},
                {"id": "bad", "question": "q?", "answers": [{"text": "cd", "answer_start": 2}]}
            ]}
        ]}]}"#;
        let dataset = crate::formats::squad::parse_squad(bytes).unwrap();
        let (filtered, removed) = filter_unmatched_squad(dataset);
        assert_eq!(removed, 1);
        assert_eq!(filtered.total_instances(), 1);

        let (again, removed2) = filter_unmatched_squad(filtered);
        assert_eq!(removed2, 0);
        assert_eq!(again.total_instances(), 1);
    }
}
