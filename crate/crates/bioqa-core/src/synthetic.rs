//! Deterministic synthetic corpora for fixtures, tests, and benchmarks.
//!
//! Everything here is seed-driven (or purely index-driven) so fixtures can
//! be regenerated byte-identically. Entity names carry the question index,
//! which keeps matches from leaking across questions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formats::squad::SquadDataset;
use crate::harness::PairExample;
use crate::model::{
    AnswerSpan, BinaryInstance, BioasqQuestion, GoldAnswer, QuestionType, Snippet, SquadInstance,
};

/// Separable premise/hypothesis pairs: the hypothesis carries one of two
/// signal tokens correlated with the label, amid varied filler.
pub fn pair_dataset(seed: u64, n: usize) -> Vec<PairExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers = ["cohort", "assay", "marker", "trial", "sample", "series"];
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let f1 = fillers[rng.random_range(0..fillers.len())];
            let f2 = fillers[rng.random_range(0..fillers.len())];
            let signal = if label { "corroborates" } else { "contradicts" };
            PairExample {
                id: format!("pair{i}"),
                premise: format!("the {f1} level rises in group g{i}"),
                hypothesis: format!("evidence {signal} the {f2} trend"),
                label,
            }
        })
        .collect()
}

/// Yes/No instances with a label-correlated verb in the context.
pub fn binary_dataset(seed: u64, n: usize) -> Vec<BinaryInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers = ["tissue", "plasma", "serum", "culture"];
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let f = fillers[rng.random_range(0..fillers.len())];
            let verb = if label { "activates" } else { "suppresses" };
            BinaryInstance {
                id: format!("bin{i}"),
                question: format!("does agent a{i} raise the readout?"),
                context: format!("agent a{i} {verb} the readout in {f}"),
                label,
            }
        })
        .collect()
}

/// Extractive instances with a unique single-token answer per instance.
pub fn span_dataset(seed: u64, n: usize) -> Vec<SquadInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let target = format!("TGT{i}x");
            let lead = rng.random_range(0..3usize);
            let prefix = match lead {
                0 => "the enzyme",
                1 => "a regulator called",
                _ => "binding partner",
            };
            let context = format!("{prefix} {target} acts in sample s{i} under load");
            let answers = crate::convert::find_exact_spans(&context, &target, true);
            SquadInstance {
                id: format!("span{i}"),
                question: format!("which entity acts in sample s{i}?"),
                context,
                answers,
            }
        })
        .collect()
}

/// Like [`span_dataset`] but every instance has the same question and
/// context token counts, so every encoded sequence has one length.
pub fn fixed_length_span_dataset(seed: u64, n: usize) -> Vec<SquadInstance> {
    let _ = seed;
    (0..n)
        .map(|i| {
            let target = format!("TGT{i}x");
            let context = format!("entity {target} acts within sample s{i} cohort");
            let answers = crate::convert::find_exact_spans(&context, &target, true);
            SquadInstance {
                id: format!("fspan{i}"),
                question: "which entity acts here now?".to_string(),
                context,
                answers,
            }
        })
        .collect()
}

const SUBJECTS: &[&str] = &["expression", "methylation", "phosphorylation", "abundance"];
const VERBS: &[&str] = &["modulates", "attenuates", "amplifies", "tracks"];
const TAILS: &[&str] = &[
    "across replicates",
    "in the treated arm",
    "under hypoxic stress",
    "during early passage",
];

fn corpus_sentence(rng: &mut ChaCha8Rng, instance: usize, sentence: usize) -> String {
    let subject = SUBJECTS[rng.random_range(0..SUBJECTS.len())];
    let verb = VERBS[rng.random_range(0..VERBS.len())];
    let tail = TAILS[rng.random_range(0..TAILS.len())];
    format!("The {subject} of E{instance}x{sentence} {verb} pathway P{instance}x{sentence} {tail}.")
}

/// Multi-sentence extractive corpus for reduction tests. Contexts hold 3–7
/// sentences; the answer entity sits in one of them, sometimes repeated in
/// a second sentence (multi-span), and a small fraction of answers span a
/// sentence boundary.
pub fn squad_corpus(seed: u64, n: usize) -> SquadDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let n_sentences = rng.random_range(3..=7usize);
        let mut sentences: Vec<String> =
            (0..n_sentences).map(|j| corpus_sentence(&mut rng, i, j)).collect();

        let answer_sentence = rng.random_range(0..n_sentences);
        let answer = format!("E{i}x{answer_sentence}");
        // ~10% of instances repeat the answer in a second sentence so
        // reduction has spans to drop.
        if rng.random_range(0..10) == 0 && n_sentences > 1 {
            let other = (answer_sentence + 1) % n_sentences;
            sentences[other] = format!("Levels of {answer} persisted {}.", TAILS[0]);
        }
        let context = sentences.join(" ");

        // ~5% of instances: the answer is a slice crossing a sentence
        // boundary instead.
        let (answers, text) = if rng.random_range(0..20) == 0 && answer_sentence + 1 < n_sentences {
            let spans = crate::context::segment_sentences(&context);
            let a = spans[answer_sentence];
            let b = spans[answer_sentence + 1];
            // From the last word of one sentence through the first word of
            // the next.
            let chars: Vec<char> = context.chars().collect();
            let mut start = a.end_char - 1;
            while start > a.start_char && !chars[start - 1].is_whitespace() {
                start -= 1;
            }
            let mut end = b.start_char;
            while end < b.end_char && !chars[end].is_whitespace() {
                end += 1;
            }
            let text: String = chars[start..end].iter().collect();
            (vec![AnswerSpan { start_char: start, end_char: end, text: text.clone() }], text)
        } else {
            (
                crate::convert::find_exact_spans(&context, &answer, true),
                answer.clone(),
            )
        };
        debug_assert!(!answers.is_empty(), "generated answer must occur: {text}");

        instances.push(SquadInstance {
            id: format!("corpus{i}"),
            question: format!("what does sentence {answer_sentence} of document {i} describe?"),
            context,
            answers,
        });
    }
    SquadDataset {
        version: "v1.1".to_string(),
        articles: vec![SquadDataset::article_from_instances("synthetic-corpus", &instances)],
    }
}

/// A corpus where exactly `invalid` of the `total` instances carry a
/// corrupted `answer_start`, for exercising the filtering step.
pub fn squad_mixed_validity(seed: u64, total: usize, invalid: usize) -> SquadDataset {
    assert!(invalid <= total);
    let mut dataset = squad_corpus(seed, total);
    let mut corrupted = 0usize;
    'outer: for article in &mut dataset.articles {
        for paragraph in &mut article.paragraphs {
            for qa in &mut paragraph.qas {
                if corrupted == invalid {
                    break 'outer;
                }
                for answer in &mut qa.answers {
                    answer.start_char += 2;
                    answer.end_char += 2;
                }
                corrupted += 1;
            }
        }
    }
    assert_eq!(corrupted, invalid);
    dataset
}

/// Short single-sentence contexts with a snippet-like length profile.
pub fn snippet_contexts(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let extra = rng.random_range(0..8usize);
            let padding = vec!["with strong support"; extra / 2].join(" ");
            format!(
                "Marker M{i} {} cohort c{i} {}.",
                VERBS[rng.random_range(0..VERBS.len())],
                padding
            )
        })
        .collect()
}

/// Failure mode assigned to an unanswerable synthetic question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Failure {
    Lowercase,
    Whitespace,
    AdditionalPhrase,
    NoMatch,
}

const FAILURE_CYCLE: [Failure; 4] = [
    Failure::Lowercase,
    Failure::Whitespace,
    Failure::AdditionalPhrase,
    Failure::NoMatch,
];

fn answerable_factoid(k: usize) -> (GoldAnswer, Vec<Snippet>) {
    let entity = format!("GEN{k}A");
    let snippet = Snippet::new(
        format!("Mutations in {entity} drive the phenotype."),
        format!("doc{k}"),
    );
    (GoldAnswer::from_items(vec![vec![entity]]), vec![snippet])
}

fn unanswerable_item(k: usize, failure: Failure) -> (Vec<String>, Snippet) {
    let doc = format!("doc{k}");
    match failure {
        Failure::Lowercase => (
            vec![format!("Gen{k}Lc")],
            Snippet::new(format!("Expression of gen{k}lc rises in disease."), doc),
        ),
        Failure::Whitespace => (
            vec![format!("alpha{k}  unit{k}")],
            Snippet::new(format!("The alpha{k} unit{k} complex forms."), doc),
        ),
        Failure::AdditionalPhrase => (
            vec![format!("factor{k} subunit{k} domain{k} extra{k}")],
            Snippet::new(format!("Binding of factor{k} subunit{k} occurs."), doc),
        ),
        Failure::NoMatch => (
            vec![format!("orphan{k}")],
            Snippet::new("Nothing relevant appears here.".to_string(), doc),
        ),
    }
}

/// Expected audit outcome for one (type, batch) cell.
#[derive(Debug, Clone)]
pub struct ExpectedCell {
    pub qtype: QuestionType,
    pub batch: String,
    pub unanswerable: usize,
    pub total: usize,
}

/// A hand-labeled audit fixture plus its batch labels and the expected
/// per-cell counts (known by construction).
#[derive(Debug, Clone)]
pub struct AuditFixture {
    pub questions: Vec<BioasqQuestion>,
    pub batches: BTreeMap<String, String>,
    pub expected: Vec<ExpectedCell>,
}

/// Per-batch (unanswerable, total) shape of the bundled audit fixture.
pub const AUDIT_FACTOID_SHAPE: [(usize, usize); 5] = [(14, 39), (3, 25), (9, 29), (4, 34), (8, 35)];
pub const AUDIT_LIST_SHAPE: [(usize, usize); 5] = [(1, 12), (4, 17), (5, 25), (3, 22), (6, 12)];

/// Builds the five-batch audit fixture. Every question is answerable or
/// unanswerable by construction; unanswerable ones cycle through the four
/// failure modes.
pub fn audit_fixture() -> AuditFixture {
    let mut questions = Vec::new();
    let mut batches = BTreeMap::new();
    let mut expected = Vec::new();
    let mut counter = 0usize;
    let mut failure_idx = 0usize;

    for (batch_idx, (unanswerable, total)) in AUDIT_FACTOID_SHAPE.iter().enumerate() {
        let batch = (batch_idx + 1).to_string();
        for j in 0..*total {
            counter += 1;
            let id = format!("7b{batch}f{j}");
            let (gold, snippets) = if j < *unanswerable {
                let failure = FAILURE_CYCLE[failure_idx % FAILURE_CYCLE.len()];
                failure_idx += 1;
                let (item, snippet) = unanswerable_item(counter, failure);
                (GoldAnswer::from_items(vec![item]), vec![snippet])
            } else {
                answerable_factoid(counter)
            };
            batches.insert(id.clone(), batch.clone());
            questions.push(BioasqQuestion {
                id,
                body: format!("What drives phenotype {counter}?"),
                qtype: QuestionType::Factoid,
                gold,
                snippets,
                abstracts: BTreeMap::new(),
            });
        }
        expected.push(ExpectedCell {
            qtype: QuestionType::Factoid,
            batch,
            unanswerable: *unanswerable,
            total: *total,
        });
    }

    for (batch_idx, (unanswerable, total)) in AUDIT_LIST_SHAPE.iter().enumerate() {
        let batch = (batch_idx + 1).to_string();
        for j in 0..*total {
            counter += 1;
            let id = format!("7b{batch}l{j}");
            let first = format!("MEMBER{counter}A");
            let mut snippets = vec![Snippet::new(
                format!("The set includes {first} prominently."),
                format!("doc{counter}m"),
            )];
            let second_item: Vec<String>;
            if j < *unanswerable {
                let failure = FAILURE_CYCLE[failure_idx % FAILURE_CYCLE.len()];
                failure_idx += 1;
                let (item, snippet) = unanswerable_item(counter, failure);
                second_item = item;
                snippets.push(snippet);
            } else {
                let second = format!("MEMBER{counter}B");
                snippets.push(Snippet::new(
                    format!("It also includes {second}."),
                    format!("doc{counter}n"),
                ));
                second_item = vec![second];
            }
            batches.insert(id.clone(), batch.clone());
            questions.push(BioasqQuestion {
                id,
                body: format!("List members of set {counter}."),
                qtype: QuestionType::List,
                gold: GoldAnswer::from_items(vec![vec![first], second_item]),
                snippets,
                abstracts: BTreeMap::new(),
            });
        }
        expected.push(ExpectedCell {
            qtype: QuestionType::List,
            batch,
            unanswerable: *unanswerable,
            total: *total,
        });
    }

    AuditFixture {
        questions,
        batches,
        expected,
    }
}

/// A small BioASQ file exercising every question type, context strategy,
/// and the summary skip path; used by the bundled fixtures and CLI tests.
pub fn bioasq_mini() -> Vec<BioasqQuestion> {
    let abstract1 = "Bathing suit ichthyosis is rare. Mutations in TGM1 cause BSI. \
                     Treatment options remain limited.";
    let snippet1 = "Mutations in TGM1 cause BSI.";
    let begin1 = "Bathing suit ichthyosis is rare. ".chars().count();
    let end1 = begin1 + snippet1.chars().count();

    vec![
        BioasqQuestion {
            id: "mini-yes".into(),
            body: "Is BSI caused by TGM1 mutations?".into(),
            qtype: QuestionType::YesNo,
            gold: GoldAnswer::yesno(true),
            snippets: vec![
                Snippet::new(snippet1, "docA").with_offsets(begin1, end1),
                Snippet::new("TGM1 deficiency underlies BSI.", "docB"),
            ],
            abstracts: BTreeMap::from([("docA".to_string(), abstract1.to_string())]),
        },
        BioasqQuestion {
            id: "mini-no".into(),
            body: "Is BSI unrelated to skin?".into(),
            qtype: QuestionType::YesNo,
            gold: GoldAnswer::yesno(false),
            snippets: vec![Snippet::new("BSI is a skin disorder.", "docC")],
            abstracts: BTreeMap::new(),
        },
        BioasqQuestion {
            id: "mini-factoid".into(),
            body: "What causes BSI?".into(),
            qtype: QuestionType::Factoid,
            gold: GoldAnswer::from_items(vec![vec!["TGM1".into(), "transglutaminase 1".into()]]),
            snippets: vec![
                Snippet::new(snippet1, "docA").with_offsets(begin1, end1),
                Snippet::new("The transglutaminase 1 enzyme is affected.", "docD"),
            ],
            abstracts: BTreeMap::from([("docA".to_string(), abstract1.to_string())]),
        },
        BioasqQuestion {
            id: "mini-factoid-nomatch".into(),
            body: "What mutation class underlies BSI?".into(),
            qtype: QuestionType::Factoid,
            gold: GoldAnswer::from_items(vec![vec![
                "transglutaminase-1 gene (TGM1) mutations".into(),
            ]]),
            snippets: vec![Snippet::new(
                "a novel mutation of the transglutaminase 1 gene (TGM1)",
                "docE",
            )],
            abstracts: BTreeMap::new(),
        },
        BioasqQuestion {
            id: "mini-list".into(),
            body: "Which genes are implicated in ichthyosis?".into(),
            qtype: QuestionType::List,
            gold: GoldAnswer::from_items(vec![
                vec!["TGM1".into()],
                vec!["ABCA12".into()],
                vec!["ALOX12B".into()],
            ]),
            snippets: vec![
                Snippet::new("TGM1 and ABCA12 are implicated.", "docF"),
                Snippet::new("ALOX12B variants were reported, as was TGM1.", "docG"),
            ],
            abstracts: BTreeMap::new(),
        },
    ]
}
