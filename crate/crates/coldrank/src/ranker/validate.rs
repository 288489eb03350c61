//! Schema validation of extracted ranking documents.
//!
//! Checks run in a fixed order so every rejection has one unambiguous code:
//! schema shape, then length, then hallucinated ids, then missing ids, then
//! uniqueness, then score range. The model's item order is preserved on
//! success; non-increasing scores are not enforced, only noted.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use super::{extract_structured, FailureCode, MovieId, ParseOutcome, RankerResponse};

#[derive(Debug, Deserialize)]
struct WireDocument {
    ranking: Vec<WireItem>,
}

#[derive(Debug, Deserialize)]
struct WireItem {
    id: String,
    score: f64,
    #[serde(default)]
    reason: String,
    #[serde(default)]
    prior_knowledge: bool,
}

/// Extract and validate a raw response in one step.
pub fn parse_response(raw: &str, expected_ids: &[MovieId]) -> ParseOutcome {
    match extract_structured(raw) {
        Ok(doc) => validate(&doc, expected_ids),
        Err(detail) => ParseOutcome::failure(FailureCode::Malformed, detail),
    }
}

/// Validate an extracted document against the ids the prompt asked for.
pub fn validate(doc: &serde_json::Value, expected_ids: &[MovieId]) -> ParseOutcome {
    let wire: WireDocument = match serde_json::from_value(doc.clone()) {
        Ok(wire) => wire,
        Err(e) => {
            return ParseOutcome::failure(
                FailureCode::Malformed,
                format!("document does not match the ranking schema: {e}"),
            )
        }
    };

    if wire.ranking.len() != expected_ids.len() {
        return ParseOutcome::failure(
            FailureCode::LengthMismatch,
            format!(
                "expected {} items, got {}",
                expected_ids.len(),
                wire.ranking.len()
            ),
        );
    }

    let expected: BTreeSet<&str> = expected_ids.iter().map(|id| id.as_str()).collect();
    for item in &wire.ranking {
        if !expected.contains(item.id.as_str()) {
            return ParseOutcome::failure(
                FailureCode::HallucinatedItem,
                format!("id {:?} was not in the request", item.id),
            );
        }
    }

    let returned: BTreeSet<&str> = wire.ranking.iter().map(|item| item.id.as_str()).collect();
    for id in &expected {
        if !returned.contains(id) {
            return ParseOutcome::failure(
                FailureCode::MissingItem,
                format!("requested id {id:?} is missing from the response"),
            );
        }
    }

    if returned.len() != wire.ranking.len() {
        // Unreachable while expected ids are unique: a duplicate implies a
        // missing id at equal length. Kept as a guard.
        return ParseOutcome::failure(FailureCode::NotPermutation, "duplicate ids in the ranking");
    }

    for item in &wire.ranking {
        if !item.score.is_finite() || item.score < 0.0 || item.score > 100.0 {
            return ParseOutcome::failure(
                FailureCode::ScoreOutOfRange,
                format!("score {} for {:?} outside [0, 100]", item.score, item.id),
            );
        }
    }

    let mut note = None;
    for pair in wire.ranking.windows(2) {
        if pair[1].score > pair[0].score {
            note = Some(format!(
                "scores increase down the ranking ({} before {})",
                pair[0].score, pair[1].score
            ));
            break;
        }
    }

    let mut ranking = Vec::with_capacity(wire.ranking.len());
    let mut scores = BTreeMap::new();
    let mut reasoning = BTreeMap::new();
    let mut prior_knowledge = BTreeMap::new();
    for item in wire.ranking {
        let id = MovieId::new(item.id);
        scores.insert(id.clone(), item.score);
        reasoning.insert(id.clone(), item.reason);
        prior_knowledge.insert(id.clone(), item.prior_knowledge);
        ranking.push(id);
    }

    ParseOutcome::Success {
        response: RankerResponse {
            ranking,
            scores,
            reasoning,
            prior_knowledge,
        },
        note,
    }
}
