//! Answer-string normalization shared by scoring and post-processing.

/// Collapses every run of Unicode whitespace to a single ASCII space and
/// trims both ends. Hyphens and other non-whitespace characters pass through
/// verbatim.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical form used for answer equality: lowercase, collapsed whitespace,
/// leading/trailing ASCII punctuation stripped.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let collapsed = collapse_whitespace(&lower);
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation())
        .trim()
        .to_string()
}

/// Removes later candidates that normalization-equal an earlier one, keeping
/// the survivors in their original rank order. This is surface-form
/// deduplication only; abbreviation pairs such as "BRCA1" / "breast cancer 1"
/// are distinct surface forms and both survive.
pub fn dedup_answers(candidates: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for candidate in candidates {
        if seen.insert(normalize_answer(candidate)) {
            out.push(candidate.clone());
        }
    }
    out
}
