//! Chat-model ranking: prompt construction over tiered metadata, tolerant
//! extraction and strict validation of structured responses, and the
//! listwise and pairwise ranking strategies.
//!
//! A response is only ever accepted if its ranking is exactly a permutation
//! of the requested movie ids; everything else becomes a typed
//! [`ParseOutcome`] failure that drives retry-with-feedback.

mod extract;
mod listwise;
mod pairwise;
mod prompt;
mod validate;

pub use extract::extract_structured;
pub use listwise::listwise_rank;
pub use pairwise::pairwise_rank;
pub use prompt::{build_listwise_prompt, build_pairwise_prompt, PromptTemplates};
pub use validate::{parse_response, validate};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, EvaluationCase, MovieId, Tier};

/// Ranking strategy that produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Listwise,
    Pairwise,
    Pe,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Listwise => "listwise",
            Strategy::Pairwise => "pairwise",
            Strategy::Pe => "pe",
            Strategy::Random => "random",
        };
        f.write_str(s)
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "listwise" => Ok(Strategy::Listwise),
            "pairwise" => Ok(Strategy::Pairwise),
            "pe" => Ok(Strategy::Pe),
            "random" => Ok(Strategy::Random),
            other => Err(format!(
                "unknown strategy {other:?}, expected listwise|pairwise|pe|random"
            )),
        }
    }
}

/// Decoding parameters sent to the chat backend and folded into cache keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.2,
            max_tokens: 1024,
            seed: None,
        }
    }
}

/// A fully rendered prompt plus the ids the response must permute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_text: String,
    pub user_text: String,
    pub expected_ids: Vec<MovieId>,
    pub tier: Tier,
    pub decoding: DecodingParams,
}

impl PromptSpec {
    /// Check the construction contract: non-empty unique expected ids, each
    /// appearing exactly once in the user text.
    pub fn validate(&self) -> Result<(), RankError> {
        if self.expected_ids.is_empty() {
            return Err(RankError::InvalidPrompt("no expected ids".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.expected_ids {
            if !seen.insert(id) {
                return Err(RankError::InvalidPrompt(format!("duplicate expected id {id}")));
            }
            let count = count_token(&self.user_text, id.as_str());
            if count != 1 {
                return Err(RankError::InvalidPrompt(format!(
                    "id {id} appears {count} times in the user text"
                )));
            }
        }
        Ok(())
    }
}

/// Occurrences of `token` in `text` at non-alphanumeric boundaries.
pub(crate) fn count_token(text: &str, token: &str) -> usize {
    if token.is_empty() {
        return 0;
    }
    let bytes = text.as_bytes();
    let boundary = |b: Option<&u8>| match b {
        None => true,
        Some(&c) => !(c as char).is_ascii_alphanumeric(),
    };
    let mut count = 0;
    let mut from = 0;
    while let Some(pos) = text[from..].find(token) {
        let start = from + pos;
        let end = start + token.len();
        if boundary(bytes.get(start.wrapping_sub(1)).filter(|_| start > 0))
            && boundary(bytes.get(end))
        {
            count += 1;
        }
        from = start + 1;
    }
    count
}

/// Validated structured response from a ranking backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerResponse {
    pub ranking: Vec<MovieId>,
    pub scores: BTreeMap<MovieId, f64>,
    pub reasoning: BTreeMap<MovieId, String>,
    pub prior_knowledge: BTreeMap<MovieId, bool>,
}

/// Why a structured response was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureCode {
    Malformed,
    NotPermutation,
    HallucinatedItem,
    MissingItem,
    LengthMismatch,
    ScoreOutOfRange,
}

impl fmt::Display for FailureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureCode::Malformed => "MALFORMED",
            FailureCode::NotPermutation => "NOT_PERMUTATION",
            FailureCode::HallucinatedItem => "HALLUCINATED_ITEM",
            FailureCode::MissingItem => "MISSING_ITEM",
            FailureCode::LengthMismatch => "LENGTH_MISMATCH",
            FailureCode::ScoreOutOfRange => "SCORE_OUT_OF_RANGE",
        };
        f.write_str(s)
    }
}

/// Outcome of extracting and validating one raw response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParseOutcome {
    Success {
        response: RankerResponse,
        /// Set when the response is accepted but suspicious, e.g. scores
        /// that increase down the ranking.
        note: Option<String>,
    },
    Failure {
        code: FailureCode,
        detail: String,
    },
}

impl ParseOutcome {
    pub fn failure(code: FailureCode, detail: impl Into<String>) -> Self {
        ParseOutcome::Failure {
            code,
            detail: detail.into(),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, ParseOutcome::Success { .. })
    }
}

/// Provenance of one prediction, for manifests and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend_id: String,
    pub model_id: String,
    pub trial_seed: u64,
    pub retries_used: u32,
    pub template_version: Option<String>,
}

/// An ordered prediction over one case's candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub case_id: String,
    pub ordering: Vec<MovieId>,
    pub scores: BTreeMap<MovieId, f64>,
    pub reasoning: Option<BTreeMap<MovieId, String>>,
    pub strategy: Strategy,
    pub provenance: Provenance,
}

impl RankedPrediction {
    /// True if `ordering` is exactly a permutation of the case candidates.
    pub fn is_permutation_of(&self, case: &EvaluationCase) -> bool {
        let mut ours: Vec<&MovieId> = self.ordering.iter().collect();
        let mut theirs: Vec<&MovieId> = case.candidates.iter().collect();
        ours.sort();
        theirs.sort();
        ours == theirs
    }
}

/// The last failed attempt of a case that exhausted its retry budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttemptFailure {
    Parse { code: FailureCode, detail: String },
    Transport { detail: String },
}

impl fmt::Display for AttemptFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttemptFailure::Parse { code, detail } => write!(f, "{code}: {detail}"),
            AttemptFailure::Transport { detail } => write!(f, "transport error: {detail}"),
        }
    }
}

/// A case the ranker could not produce a valid prediction for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub strategy: Strategy,
    pub attempts: u32,
    pub last: AttemptFailure,
}

impl fmt::Display for CaseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "case {} ({}) failed after {} attempts; last: {}",
            self.case_id, self.strategy, self.attempts, self.last
        )
    }
}

/// Ranker configuration shared by the listwise and pairwise strategies.
#[derive(Debug, Clone)]
pub struct RankConfig {
    pub tier: Tier,
    /// Retry attempts after the first one.
    pub retries: u32,
    pub trial_seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub templates: PromptTemplates,
}

impl RankConfig {
    pub fn new(tier: Tier) -> Self {
        RankConfig {
            tier,
            retries: 3,
            trial_seed: 0,
            temperature: 0.2,
            max_tokens: 1024,
            templates: PromptTemplates::default(),
        }
    }

    pub(crate) fn decoding(&self) -> DecodingParams {
        DecodingParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: Some(self.trial_seed),
        }
    }
}

/// Hard errors from the ranking strategies. A [`CaseFailure`] is the normal
/// "this case could not be ranked" outcome; render and fatal backend
/// problems abort instead.
#[derive(Debug, Error)]
pub enum RankError {
    #[error(transparent)]
    Render(#[from] CatalogError),

    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),

    #[error("fatal backend error: {0}")]
    FatalBackend(String),

    #[error("{0}")]
    CaseFailed(CaseFailure),
}

/// Permute a case's candidate presentation order; ground truth untouched.
pub fn shuffle_candidates(case: &EvaluationCase, seed: u64) -> EvaluationCase {
    let mut shuffled = case.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.candidates.shuffle(&mut rng);
    shuffled
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{LabeledMovie, WindowConfig};
    use chrono::NaiveDate;

    pub(crate) fn small_case(candidates: &[&str], truth: &[(&str, f64)]) -> EvaluationCase {
        EvaluationCase::new(
            "case-1".into(),
            NaiveDate::from_ymd_opt(2024, 5, 3).unwrap(),
            candidates.iter().map(|s| MovieId::from(*s)).collect(),
            truth
                .iter()
                .map(|(id, score)| LabeledMovie {
                    movie_id: MovieId::from(*id),
                    popularity_score: *score,
                })
                .collect(),
            WindowConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn shuffle_is_seeded_and_leaves_truth_alone() {
        let case = small_case(&["m1", "m2", "m3", "m4"], &[("m2", 1.0), ("m1", 0.5)]);
        let a = shuffle_candidates(&case, 17);
        let b = shuffle_candidates(&case, 17);
        assert_eq!(a.candidates, b.candidates);
        assert_eq!(a.ground_truth, case.ground_truth);

        let mut sorted = a.candidates.clone();
        sorted.sort();
        assert_eq!(sorted, case.candidates);
    }

    #[test]
    fn count_token_respects_boundaries() {
        assert_eq!(count_token("m1 m10 m1.", "m1"), 2);
        assert_eq!(count_token("xm1 m1x", "m1"), 0);
        assert_eq!(count_token("", "m1"), 0);
    }
}
