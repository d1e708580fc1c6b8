//! Unanswerable-rate auditing for the extractive setting.
//!
//! A Factoid or List question is answerable only when its gold items have
//! boundary-valid, case-sensitive occurrences in some snippet. Failures are
//! classified by running relaxations in a fixed order — case folding, then
//! whitespace collapsing, then token-subsequence overlap — so an ambiguous
//! case always lands in the earliest applicable category.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::convert::find_exact_spans;
use crate::model::{BioasqQuestion, QuestionType, Snippet};
use crate::normalize::collapse_whitespace;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("question '{0}' is a yes/no question; the audit covers factoid and list only")]
    YesNoNotAudited(String),
}

/// How (or whether) a gold item is recoverable from the snippets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum MatchCategory {
    /// Boundary-valid case-sensitive occurrence of some synonym.
    Exact,
    /// Occurrence appears only after case folding.
    LowercaseMatch,
    /// Occurrence appears only after also collapsing whitespace runs.
    WhitespaceVariant,
    /// At least half of a synonym's tokens (a proper subsequence) occur in
    /// order in some snippet; the gold carries additional phrasing.
    AdditionalPhrase,
    NoMatch,
}

impl std::fmt::Display for MatchCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MatchCategory::Exact => "exact",
            MatchCategory::LowercaseMatch => "lowercase_match",
            MatchCategory::WhitespaceVariant => "whitespace_variant",
            MatchCategory::AdditionalPhrase => "additional_phrase",
            MatchCategory::NoMatch => "no_match",
        };
        write!(f, "{name}")
    }
}

fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

fn fold(s: &str) -> Vec<char> {
    s.chars().map(fold_char).collect()
}

/// Contiguous occurrence of `needle` in `hay` with non-alphanumeric (or
/// absent) neighbors.
fn boundary_contains(hay: &[char], needle: &[char]) -> bool {
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    for start in 0..=hay.len() - needle.len() {
        if hay[start..start + needle.len()] != *needle {
            continue;
        }
        let before_ok = start == 0 || !hay[start - 1].is_alphanumeric();
        let end = start + needle.len();
        let after_ok = end == hay.len() || !hay[end].is_alphanumeric();
        if before_ok && after_ok {
            return true;
        }
    }
    false
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Classifies one gold item (a synonym list) against the snippets. Checks
/// run in exactly this order: exact, lowercase, whitespace-collapsed,
/// additional-phrase, no-match.
pub fn classify_match(gold_item: &[String], snippets: &[Snippet]) -> MatchCategory {
    if gold_item.iter().any(|syn| {
        snippets
            .iter()
            .any(|s| !find_exact_spans(&s.text, syn, true).is_empty())
    }) {
        return MatchCategory::Exact;
    }

    let folded_snippets: Vec<Vec<char>> = snippets.iter().map(|s| fold(&s.text)).collect();
    if gold_item.iter().any(|syn| {
        let needle = fold(syn);
        folded_snippets.iter().any(|hay| boundary_contains(hay, &needle))
    }) {
        return MatchCategory::LowercaseMatch;
    }

    let collapsed_snippets: Vec<Vec<char>> = snippets
        .iter()
        .map(|s| fold(&collapse_whitespace(&s.text)))
        .collect();
    if gold_item.iter().any(|syn| {
        let needle = fold(&collapse_whitespace(syn));
        collapsed_snippets
            .iter()
            .any(|hay| boundary_contains(hay, &needle))
    }) {
        return MatchCategory::WhitespaceVariant;
    }

    // A strict (proper) token subsequence covering at least half the
    // synonym's tokens, found in order in some snippet, case-insensitively.
    let snippet_tokens: Vec<Vec<String>> = snippets
        .iter()
        .map(|s| {
            s.text
                .split_whitespace()
                .map(|t| t.to_lowercase())
                .collect()
        })
        .collect();
    if gold_item.iter().any(|syn| {
        let tokens: Vec<String> = syn.split_whitespace().map(|t| t.to_lowercase()).collect();
        let n = tokens.len();
        if n < 2 {
            return false;
        }
        snippet_tokens.iter().any(|st| {
            let common = lcs_len(&tokens, st);
            let proper = common.min(n - 1);
            proper * 2 >= n
        })
    }) {
        return MatchCategory::AdditionalPhrase;
    }

    MatchCategory::NoMatch
}

/// Answerability verdict for one question plus the per-item categories.
#[derive(Debug, Clone, Serialize)]
pub struct QuestionAudit {
    pub answerable: bool,
    pub item_categories: Vec<MatchCategory>,
}

/// A Factoid question is answerable when its single item classifies Exact;
/// a List question when every item does (the all-items rule, making the
/// rate an upper bound on list recall).
pub fn question_answerable(question: &BioasqQuestion) -> Result<QuestionAudit, AuditError> {
    if question.qtype == QuestionType::YesNo {
        return Err(AuditError::YesNoNotAudited(question.id.clone()));
    }
    let item_categories: Vec<MatchCategory> = question
        .gold
        .items
        .iter()
        .map(|item| classify_match(item, &question.snippets))
        .collect();
    let answerable = !item_categories.is_empty()
        && item_categories.iter().all(|c| *c == MatchCategory::Exact);
    Ok(QuestionAudit {
        answerable,
        item_categories,
    })
}

/// Aggregated unanswerable counts for one (batch, question type) cell.
/// `rate` is the exact quotient; the rounded and truncated 3-decimal
/// renderings are both provided so either display convention is auditable.
#[derive(Debug, Clone, Serialize)]
pub struct GroupStats {
    pub batch: String,
    pub qtype: QuestionType,
    pub unanswerable: usize,
    pub total: usize,
    pub fraction: String,
    pub rate: f64,
    pub rate_rounded: String,
    pub rate_truncated: String,
    /// Failure category of each unanswerable question (its first non-exact
    /// item), so the non-exact counts sum to `unanswerable`.
    pub category_counts: BTreeMap<String, usize>,
}

impl GroupStats {
    fn new(batch: String, qtype: QuestionType) -> Self {
        GroupStats {
            batch,
            qtype,
            unanswerable: 0,
            total: 0,
            fraction: String::new(),
            rate: 0.0,
            rate_rounded: String::new(),
            rate_truncated: String::new(),
            category_counts: BTreeMap::new(),
        }
    }

    fn finalize(&mut self) {
        self.fraction = format!("{}/{}", self.unanswerable, self.total);
        if self.total > 0 {
            self.rate = self.unanswerable as f64 / self.total as f64;
            self.rate_rounded = format!("{:.3}", round_half_even_3(self.unanswerable, self.total));
            self.rate_truncated = format!("{:.3}", truncate_3(self.unanswerable, self.total));
        } else {
            self.rate_rounded = "0.000".to_string();
            self.rate_truncated = "0.000".to_string();
        }
    }
}

/// Round-half-even of num/den to 3 decimals, in exact integer arithmetic.
fn round_half_even_3(num: usize, den: usize) -> f64 {
    let scaled = num * 1000;
    let floor = scaled / den;
    let rem = scaled % den;
    let rounded = match (2 * rem).cmp(&den) {
        std::cmp::Ordering::Less => floor,
        std::cmp::Ordering::Greater => floor + 1,
        std::cmp::Ordering::Equal => {
            if floor.is_multiple_of(2) {
                floor
            } else {
                floor + 1
            }
        }
    };
    rounded as f64 / 1000.0
}

fn truncate_3(num: usize, den: usize) -> f64 {
    ((num * 1000) / den) as f64 / 1000.0
}

/// Per-question audit row for spot checking.
#[derive(Debug, Clone, Serialize)]
pub struct QuestionRow {
    pub id: String,
    pub batch: String,
    pub qtype: QuestionType,
    pub answerable: bool,
    pub categories: Vec<MatchCategory>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnanswerableReport {
    /// The list-question rule in force, stated up front because it is one
    /// of two defensible readings; the per-item rows make the other
    /// recomputable.
    pub list_rule: String,
    pub yesno_skipped: usize,
    /// Per (batch, type) cells, sorted by type then batch.
    pub groups: Vec<GroupStats>,
    /// Per-type totals across all batches.
    pub totals: Vec<GroupStats>,
    pub rows: Vec<QuestionRow>,
}

impl UnanswerableReport {
    pub fn group(&self, batch: &str, qtype: QuestionType) -> Option<&GroupStats> {
        self.groups
            .iter()
            .find(|g| g.batch == batch && g.qtype == qtype)
    }

    pub fn total(&self, qtype: QuestionType) -> Option<&GroupStats> {
        self.totals.iter().find(|g| g.qtype == qtype)
    }
}

/// Audits a question collection. `batch_labels` maps question id → batch
/// name; unlabeled questions fall into the "unbatched" cell. Yes/No
/// questions are skipped (and counted), matching the extractive setting.
pub fn audit(
    questions: &[BioasqQuestion],
    batch_labels: &BTreeMap<String, String>,
) -> UnanswerableReport {
    let mut cells: BTreeMap<(QuestionType, String), GroupStats> = BTreeMap::new();
    let mut totals: BTreeMap<QuestionType, GroupStats> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut yesno_skipped = 0usize;

    for question in questions {
        if question.qtype == QuestionType::YesNo {
            yesno_skipped += 1;
            continue;
        }
        let verdict = question_answerable(question).expect("yesno filtered above");
        let batch = batch_labels
            .get(&question.id)
            .cloned()
            .unwrap_or_else(|| "unbatched".to_string());

        let cell = cells
            .entry((question.qtype, batch.clone()))
            .or_insert_with(|| GroupStats::new(batch.clone(), question.qtype));
        let total = totals
            .entry(question.qtype)
            .or_insert_with(|| GroupStats::new("total".to_string(), question.qtype));

        cell.total += 1;
        total.total += 1;
        if !verdict.answerable {
            cell.unanswerable += 1;
            total.unanswerable += 1;
            let category = verdict
                .item_categories
                .iter()
                .find(|c| **c != MatchCategory::Exact)
                .copied()
                .unwrap_or(MatchCategory::NoMatch);
            *cell.category_counts.entry(category.to_string()).or_insert(0) += 1;
            *total.category_counts.entry(category.to_string()).or_insert(0) += 1;
        }
        rows.push(QuestionRow {
            id: question.id.clone(),
            batch,
            qtype: question.qtype,
            answerable: verdict.answerable,
            categories: verdict.item_categories,
        });
    }

    let mut groups: Vec<GroupStats> = cells.into_values().collect();
    let mut total_groups: Vec<GroupStats> = totals.into_values().collect();
    for g in groups.iter_mut().chain(total_groups.iter_mut()) {
        g.finalize();
    }

    UnanswerableReport {
        list_rule: "a list question counts as answerable only when every gold item has an exact \
                    boundary-valid match; per-item categories are reported for the alternative \
                    any-item reading"
            .to_string(),
        yesno_skipped,
        groups,
        totals: total_groups,
        rows,
    }
}
