//! Bundled fixtures: a 20-sentence synthetic ADR corpus with overlapping
//! discontinuous entities, and the hand-checked prediction/gold pair
//! used by the evaluation tests.

use crate::corpus::{from_json, Dataset, Entity, Sentence};

const TOY_CORPUS_JSON: &str = include_str!("../data/toy_corpus.json");

/// The bundled toy corpus as raw JSON (corpus schema).
pub fn toy_corpus_json() -> &'static str {
    TOY_CORPUS_JSON
}

/// The 20 toy sentences.
pub fn toy_sentences() -> Vec<Sentence> {
    from_json(TOY_CORPUS_JSON).expect("bundled corpus is valid")
}

/// The toy corpus as a dataset whose train and dev splits are the same
/// 20 sentences (it exists to be overfit).
pub fn toy_dataset() -> Dataset {
    let sentences = toy_sentences();
    Dataset::from_splits(
        "toy",
        vec![("train", sentences.clone()), ("dev", sentences)],
    )
    .expect("bundled corpus is valid")
}

fn ent(indices: &[usize], label: &str) -> Entity {
    Entity::new(indices.to_vec(), label).expect("fixture indices are valid")
}

/// The overlapping-ADR case sentence with its four gold entities.
pub fn case_study_sentence() -> Sentence {
    Sentence::new(
        [
            "Pain", "and", "cramping", "in", "my", "hands", "and", "lower", "legs", ".",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        case_study_gold(),
    )
    .expect("fixture is valid")
}

/// Gold entities of the case sentence.
pub fn case_study_gold() -> Vec<Entity> {
    vec![
        ent(&[0, 3, 4, 5], "ADR"),
        ent(&[0, 3, 4, 7, 8], "ADR"),
        ent(&[2, 3, 4, 7, 8], "ADR"),
        ent(&[2, 3, 4, 5], "ADR"),
    ]
}

/// The six predictions of the case study: all four gold entities plus
/// two spurious shortcut paths.
pub fn case_study_predictions() -> Vec<Entity> {
    vec![
        ent(&[0, 3, 4, 7, 8], "ADR"),
        ent(&[0, 3, 4, 5], "ADR"),
        ent(&[0, 3, 7, 8], "ADR"),
        ent(&[2, 3, 4, 5], "ADR"),
        ent(&[2, 3, 4, 7, 8], "ADR"),
        ent(&[2, 3, 7, 8], "ADR"),
    ]
}
