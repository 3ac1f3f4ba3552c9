use std::collections::HashMap;

use super::example::{EmbeddedExample, Label, Split};

/// Test examples whose sentence carries at least two aspects with at least
/// two distinct labels. Input order is preserved.
pub fn hard_slice<'a, I>(examples: I) -> Vec<&'a EmbeddedExample>
where
    I: IntoIterator<Item = &'a EmbeddedExample>,
{
    let test: Vec<&EmbeddedExample> = examples.into_iter().filter(|e| e.split == Split::Test).collect();
    let mut groups: HashMap<&str, (usize, [bool; 3])> = HashMap::new();
    for e in &test {
        let g = groups.entry(e.sentence_key.as_str()).or_default();
        g.0 += 1;
        g.1[e.label.index()] = true;
    }
    let is_hard = |key: &str| {
        let (n, seen) = groups[key];
        n >= 2 && seen.iter().filter(|&&s| s).count() >= 2
    };
    test.into_iter().filter(|e| is_hard(&e.sentence_key)).collect()
}

/// Number of distinct labels among `labels`.
pub fn distinct_labels(labels: impl IntoIterator<Item = Label>) -> usize {
    let mut seen = [false; 3];
    labels.into_iter().for_each(|l| seen[l.index()] = true);
    seen.iter().filter(|&&s| s).count()
}
