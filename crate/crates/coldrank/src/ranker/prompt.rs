//! Prompt construction from versioned text templates.
//!
//! Templates are plain text with `{candidate_count}`, `{candidate_blocks}`
//! and `{schema}` placeholders. The template version travels with every
//! prediction's provenance so a report can always be traced back to the
//! exact prompt wording.

use serde::{Deserialize, Serialize};

use super::{PromptSpec, RankConfig, RankError};
use crate::catalog::{render_metadata, Catalog, EvaluationCase, MovieRecord};

/// Response schema documented verbatim inside every prompt.
pub const RESPONSE_SCHEMA: &str =
    r#"{"ranking":[{"id":str,"score":number,"reason":str,"prior_knowledge":bool}, ...]}"#;

/// Named prompt templates plus their version tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub version: String,
    pub system: String,
    pub listwise_user: String,
    pub pairwise_user: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            version: "v1".into(),
            system: include_str!("../../templates/system_v1.txt").trim_end().into(),
            listwise_user: include_str!("../../templates/listwise_user_v1.txt")
                .trim_end()
                .into(),
            pairwise_user: include_str!("../../templates/pairwise_user_v1.txt")
                .trim_end()
                .into(),
        }
    }
}

fn candidate_block(index: usize, movie: &MovieRecord, rendered: &str) -> String {
    format!("{}. Movie ID: {}\n{}", index + 1, movie.movie_id, rendered)
}

fn fill(template: &str, count: usize, blocks: &str) -> String {
    template
        .replace("{candidate_count}", &count.to_string())
        .replace("{candidate_blocks}", blocks)
        .replace("{schema}", RESPONSE_SCHEMA)
}

/// Build the single-call prompt that asks for the whole list reordered.
///
/// The user text contains one numbered metadata block per candidate, in the
/// case's candidate order, and never any ground-truth information.
pub fn build_listwise_prompt(
    case: &EvaluationCase,
    movies: &Catalog,
    cfg: &RankConfig,
) -> Result<PromptSpec, RankError> {
    let mut blocks = Vec::with_capacity(case.candidates.len());
    for (index, id) in case.candidates.iter().enumerate() {
        let movie = movies.require(id)?;
        let rendered = render_metadata(movie, cfg.tier)?;
        blocks.push(candidate_block(index, movie, &rendered));
    }
    let spec = PromptSpec {
        system_text: cfg.templates.system.clone(),
        user_text: fill(
            &cfg.templates.listwise_user,
            case.candidates.len(),
            &blocks.join("\n\n"),
        ),
        expected_ids: case.candidates.clone(),
        tier: cfg.tier,
        decoding: cfg.decoding(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Build the two-movie comparison prompt for one ordered pair.
pub fn build_pairwise_prompt(
    left: &MovieRecord,
    right: &MovieRecord,
    movies: &Catalog,
    cfg: &RankConfig,
) -> Result<PromptSpec, RankError> {
    debug_assert!(movies.get(&left.movie_id).is_some() && movies.get(&right.movie_id).is_some());
    let blocks = [
        candidate_block(0, left, &render_metadata(left, cfg.tier)?),
        candidate_block(1, right, &render_metadata(right, cfg.tier)?),
    ];
    let spec = PromptSpec {
        system_text: cfg.templates.system.clone(),
        user_text: fill(&cfg.templates.pairwise_user, 2, &blocks.join("\n\n")),
        expected_ids: vec![left.movie_id.clone(), right.movie_id.clone()],
        tier: cfg.tier,
        decoding: cfg.decoding(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Corrective instruction appended to the user text before a retry.
pub(crate) fn corrective_suffix(code: super::FailureCode, detail: &str, n: usize) -> String {
    format!(
        "\n\nYour previous response was rejected ({code}: {detail}). \
         Respond again with only the JSON object in the required schema, \
         containing exactly the {n} provided movie ids, each exactly once."
    )
}
