//! Sentence segmentation, minimal-context reduction, and context-length
//! distribution reports.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{char_slice, AnswerSpan, SquadInstance};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("instance '{0}' has no answer spans to anchor the minimal context")]
    AnswerlessInstance(String),
    #[error("length distribution is empty; discrepancy is undefined")]
    EmptyDistribution,
}

/// A sentence located by character offsets into its source text. `end_char`
/// is exclusive. Spans are ordered, non-overlapping, and jointly cover every
/// non-whitespace character of the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SentenceSpan {
    pub start_char: usize,
    pub end_char: usize,
}

/// Dotted tokens that do not end a sentence even when followed by
/// whitespace and an uppercase letter or digit. "et al." is handled by the
/// "al." entry plus the preceding-token check below; single capitals
/// ("A. Dent") and internally dotted abbreviations ("e.g.", "U.S.") are
/// guarded structurally.
const ABBREVIATION_GUARDS: &[&str] = &[
    "al.", "Fig.", "Figs.", "Eq.", "Eqs.", "Ref.", "Refs.", "Dr.", "Prof.", "Mr.", "Mrs.", "Ms.",
    "Jr.", "Sr.", "St.", "vs.", "etc.", "cf.", "ca.", "approx.", "No.", "Vol.", "pp.", "spp.",
    "subsp.", "resp.", "ver.",
];

/// Splits `text` into sentences with a deterministic rule: a sentence ends
/// at `.`, `!`, or `?` followed by whitespace and then an uppercase letter
/// or digit, unless the terminator belongs to a guarded abbreviation.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();

    let mut start = match chars.iter().position(|c| !c.is_whitespace()) {
        Some(i) => i,
        None => return spans,
    };
    let last_non_ws = chars.iter().rposition(|c| !c.is_whitespace()).unwrap();

    let mut i = start;
    while i <= last_non_ws {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') && i + 1 < n && chars[i + 1].is_whitespace() {
            let next = (i + 1..n).find(|&j| !chars[j].is_whitespace());
            if let Some(k) = next {
                let starts_sentence = chars[k].is_uppercase() || chars[k].is_ascii_digit();
                if starts_sentence && !(c == '.' && is_guarded(&chars, i)) {
                    spans.push(SentenceSpan {
                        start_char: start,
                        end_char: i + 1,
                    });
                    start = k;
                    i = k;
                    continue;
                }
            }
        }
        i += 1;
    }
    spans.push(SentenceSpan {
        start_char: start,
        end_char: last_non_ws + 1,
    });
    spans
}

fn is_guarded(chars: &[char], dot: usize) -> bool {
    // The token is the maximal non-whitespace run ending at the dot.
    let mut w = dot;
    while w > 0 && !chars[w - 1].is_whitespace() {
        w -= 1;
    }
    let token: String = chars[w..=dot].iter().collect();

    // Single uppercase letter + "." (an initial or a genus abbreviation).
    if token.len() == 2 {
        let first = token.chars().next().unwrap();
        if first.is_uppercase() {
            return true;
        }
    }
    // An internal dot marks a dotted abbreviation ("e.g.", "U.S.A.").
    if token[..token.len() - 1].contains('.') {
        return true;
    }
    if token == "al." {
        // Only guard "al." as part of "et al.".
        let mut p = w;
        while p > 0 && chars[p - 1].is_whitespace() {
            p -= 1;
        }
        let mut q = p;
        while q > 0 && !chars[q - 1].is_whitespace() {
            q -= 1;
        }
        let prev: String = chars[q..p].iter().collect();
        return prev == "et";
    }
    ABBREVIATION_GUARDS.contains(&token.as_str())
}

/// Report produced by [`reduce_dataset`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct ReduceReport {
    pub instances: usize,
    pub spans_dropped: usize,
}

/// Shrinks the instance context to the minimal run of sentences covering
/// its first answer span (a single sentence unless the span crosses a
/// boundary). All retained answer offsets are re-based onto the new
/// context; spans falling outside it are dropped and counted.
pub fn reduce_to_minimal_context(
    instance: &SquadInstance,
) -> Result<(SquadInstance, usize), ContextError> {
    let first = instance
        .answers
        .first()
        .ok_or_else(|| ContextError::AnswerlessInstance(instance.id.clone()))?;

    let sentences = segment_sentences(&instance.context);
    // First sentence that ends after the span starts, last sentence that
    // starts before the span ends: the minimal covering run.
    let span_start = first.start_char;
    let span_end = first.end_char;
    let (run_start, run_end) = if sentences.is_empty() {
        // Degenerate whitespace-only context; keep it whole.
        (0, crate::model::char_len(&instance.context))
    } else {
        let first_idx = sentences
            .iter()
            .position(|s| s.end_char > span_start)
            .unwrap_or(sentences.len() - 1);
        let last_idx = sentences
            .iter()
            .rposition(|s| s.start_char < span_end)
            .unwrap_or(0)
            .max(first_idx);
        (sentences[first_idx].start_char, sentences[last_idx].end_char)
    };
    // The run must cover the anchoring span even when that span bleeds
    // into surrounding whitespace no sentence claims.
    let new_start = run_start.min(span_start);
    let new_end = run_end.max(span_end);
    let new_context = char_slice(&instance.context, new_start, new_end)
        .unwrap_or_default()
        .to_string();

    let mut kept = Vec::new();
    for answer in &instance.answers {
        if answer.start_char >= new_start && answer.end_char <= new_end {
            kept.push(AnswerSpan {
                start_char: answer.start_char - new_start,
                end_char: answer.end_char - new_start,
                text: answer.text.clone(),
            });
        }
    }
    let dropped = instance.answers.len() - kept.len();

    Ok((
        SquadInstance {
            id: instance.id.clone(),
            question: instance.question.clone(),
            context: new_context,
            answers: kept,
        },
        dropped,
    ))
}

/// Applies [`reduce_to_minimal_context`] to every instance of a dataset,
/// preserving article grouping. Instances must all carry valid spans;
/// filter flagged ones first.
pub fn reduce_dataset(
    dataset: &crate::formats::squad::SquadDataset,
) -> Result<(crate::formats::squad::SquadDataset, ReduceReport), ContextError> {
    use crate::formats::squad::{SquadArticle, SquadDataset};
    let mut report = ReduceReport::default();
    let mut articles = Vec::new();
    for article in &dataset.articles {
        let mut reduced_instances = Vec::new();
        for paragraph in &article.paragraphs {
            for qa in &paragraph.qas {
                let inst = SquadInstance {
                    id: qa.id.clone(),
                    question: qa.question.clone(),
                    context: paragraph.context.clone(),
                    answers: qa.answers.clone(),
                };
                let (reduced, dropped) = reduce_to_minimal_context(&inst)?;
                report.instances += 1;
                report.spans_dropped += dropped;
                reduced_instances.push(reduced);
            }
        }
        articles.push(SquadArticle {
            title: article.title.clone(),
            paragraphs: SquadDataset::article_from_instances(&article.title, &reduced_instances)
                .paragraphs,
        });
    }
    Ok((
        crate::formats::squad::SquadDataset {
            version: dataset.version.clone(),
            articles,
        },
        report,
    ))
}

/// Token-length distribution of a context collection. Tokens are
/// whitespace-delimited; histogram buckets are 16 tokens wide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthDistribution {
    /// bucket index (token_count / 16) → context count
    pub histogram: BTreeMap<usize, usize>,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub total: usize,
}

pub const BUCKET_WIDTH: usize = 16;

pub fn length_distribution<'a, I>(contexts: I) -> LengthDistribution
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: Vec<usize> = contexts
        .into_iter()
        .map(|c| c.split_whitespace().count())
        .collect();
    counts.sort_unstable();
    let total = counts.len();
    if total == 0 {
        return LengthDistribution {
            histogram: BTreeMap::new(),
            mean: 0.0,
            median: 0.0,
            p95: 0.0,
            total: 0,
        };
    }
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c / BUCKET_WIDTH).or_insert(0) += 1;
    }
    let sum: usize = counts.iter().sum();
    let mean = sum as f64 / total as f64;
    let median = if total % 2 == 1 {
        counts[total / 2] as f64
    } else {
        (counts[total / 2 - 1] + counts[total / 2]) as f64 / 2.0
    };
    // Nearest-rank percentile.
    let rank = ((0.95 * total as f64).ceil() as usize).clamp(1, total);
    let p95 = counts[rank - 1] as f64;
    LengthDistribution {
        histogram,
        mean,
        median,
        p95,
        total,
    }
}

/// Distance between two length distributions: absolute mean difference and
/// the L1 distance between bucket histograms normalized to probability
/// vectors (range [0, 2]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub mean_abs_diff: f64,
    pub l1_distance: f64,
}

pub fn discrepancy_report(
    a: &LengthDistribution,
    b: &LengthDistribution,
) -> Result<DiscrepancyReport, ContextError> {
    if a.total == 0 || b.total == 0 {
        return Err(ContextError::EmptyDistribution);
    }
    let buckets: std::collections::BTreeSet<usize> = a
        .histogram
        .keys()
        .chain(b.histogram.keys())
        .copied()
        .collect();
    let l1 = buckets
        .into_iter()
        .map(|k| {
            let pa = *a.histogram.get(&k).unwrap_or(&0) as f64 / a.total as f64;
            let pb = *b.histogram.get(&k).unwrap_or(&0) as f64 / b.total as f64;
            (pa - pb).abs()
        })
        .sum();
    Ok(DiscrepancyReport {
        mean_abs_diff: (a.mean - b.mean).abs(),
        l1_distance: l1,
    })
}
