//! Prompt construction, candidate generation and program extraction.
//!
//! A [`Generator`] turns a prompt into raw response text. Two are provided:
//! [`RemoteGenerator`] talks to any chat-completions endpoint and
//! [`MockGenerator`] draws from a fixed pool of hand-written programs, so the
//! whole search loop can run offline and reproducibly.

mod mock;
mod prompt;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_repr_program, parse_reward_program, DslError, ReprProgram, RewardProgram};

pub use mock::{MockGenerator, MOCK_ANALYSIS, MOCK_POOL};
pub use prompt::{
    build_prompt, format_iteration_results, PromptBundle, PromptError, PromptVars, ResultEntry,
    TemplateId, SYSTEM_MESSAGE,
};
pub use remote::{RemoteConfig, RemoteGenerator};

/// Fence tag marking the answer block.
pub const FENCE_TAG: &str = "dsl";

/// Identifies one draw: which iteration, which of the K slots, which retry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub slot: usize,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Model { model: String },
    Mock { pool_index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("environment variable `{var}` with the API key is not set; export it or switch to the mock generator")]
    MissingApiKey { var: String },
    #[error("endpoint request failed after {attempts} attempts: {message}")]
    Endpoint { attempts: usize, message: String },
    #[error("endpoint response is malformed: {0}")]
    BadResponse(String),
}

/// Source of candidate programs.
pub trait Generator {
    /// Response to a sampling prompt.
    fn generate(&mut self, prompt: &PromptBundle, draw: Draw) -> Result<Response, GeneratorError>;

    /// Free-text analysis of a feedback prompt.
    fn analyze(
        &mut self,
        prompt: &PromptBundle,
        iteration: usize,
    ) -> Result<String, GeneratorError>;

    /// Short description for manifests and logs.
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("no program block: expected a fenced block tagged `{FENCE_TAG}`")]
    NoProgramBlock,
    #[error("missing repr block")]
    MissingRepr,
    #[error("missing reward block")]
    MissingReward,
    #[error("{section} block: {source}")]
    Parse {
        section: &'static str,
        #[source]
        source: DslError,
    },
}

/// Finds the first fenced block tagged [`FENCE_TAG`] and parses its `repr:`
/// and `reward:` sections against a source state of `state_dim` values.
pub fn extract_programs(
    response: &str,
    state_dim: usize,
) -> Result<(ReprProgram, RewardProgram), ExtractError> {
    let block = find_block(response).ok_or(ExtractError::NoProgramBlock)?;
    parse_program_pair(&block, state_dim)
}

/// Parses `repr:` / `reward:` sections (the body of an answer block, or a
/// `program.dsl` file). A fenced block, if present, is used instead of the
/// whole text.
pub fn parse_program_pair(
    text: &str,
    state_dim: usize,
) -> Result<(ReprProgram, RewardProgram), ExtractError> {
    let owned;
    let text = match find_block(text) {
        Some(block) => {
            owned = block;
            owned.as_str()
        }
        None => text,
    };
    let mut repr: Option<String> = None;
    let mut reward: Option<String> = None;
    let mut current: Option<&mut String> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        let (header, rest) = match trimmed.split_once(':') {
            Some((h, rest)) if h.trim() == "repr" || h.trim() == "reward" => (h.trim(), rest),
            _ => {
                if let Some(buf) = current.as_deref_mut() {
                    buf.push_str(line);
                    buf.push('\n');
                }
                continue;
            }
        };
        let slot = if header == "repr" {
            &mut repr
        } else {
            &mut reward
        };
        let buf = slot.insert(String::new());
        if !rest.trim().is_empty() {
            buf.push_str(rest.trim());
            buf.push('\n');
        }
        current = Some(buf);
    }
    let repr_text = repr.ok_or(ExtractError::MissingRepr)?;
    let reward_text = reward.ok_or(ExtractError::MissingReward)?;
    let f = parse_repr_program(&repr_text, state_dim).map_err(|source| ExtractError::Parse {
        section: "repr",
        source,
    })?;
    let g = parse_reward_program(&reward_text, state_dim, state_dim + f.output_dim()).map_err(
        |source| ExtractError::Parse {
            section: "reward",
            source,
        },
    )?;
    Ok((f, g))
}

/// Canonical `program.dsl` text; [`parse_program_pair`] reads it back.
pub fn format_program_pair(repr: &ReprProgram, reward: &RewardProgram) -> String {
    format!("repr:\n{}\nreward:\n{}\n", repr.format(), reward.format())
}

fn find_block(text: &str) -> Option<String> {
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let t = line.trim();
        if let Some(tag) = t.strip_prefix("```") {
            let is_dsl = tag.trim().eq_ignore_ascii_case(FENCE_TAG);
            let mut body = String::new();
            for inner in lines.by_ref() {
                if inner.trim_start().starts_with("```") {
                    break;
                }
                body.push_str(inner);
                body.push('\n');
            }
            if is_dsl {
                return Some(body);
            }
        }
    }
    None
}

/// One sampled `(F, G)` pair.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub iteration: usize,
    /// Slot within the iteration, `0..K`.
    pub id: usize,
    pub repr: ReprProgram,
    pub reward: RewardProgram,
    pub provenance: Provenance,
    pub raw_response: String,
}

/// A response that did not yield a valid candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub draw: Draw,
    pub reason: String,
    pub raw_response: String,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub candidates: Vec<Candidate>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("K must be at least 1")]
    ZeroCandidates,
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("all {k} candidate slots failed validation ({} responses rejected)", rejections.len())]
    AllInvalid {
        k: usize,
        rejections: Vec<Rejection>,
    },
}

/// Samples up to `k` candidates. Each slot is retried up to `retries` extra
/// times on invalid responses and dropped after that; failed slots are not
/// backfilled.
pub fn generate_candidates(
    generator: &mut dyn Generator,
    prompt: &PromptBundle,
    k: usize,
    iteration: usize,
    state_dim: usize,
    retries: usize,
) -> Result<Generation, GenerationError> {
    if k == 0 {
        return Err(GenerationError::ZeroCandidates);
    }
    let mut candidates = Vec::with_capacity(k);
    let mut rejections = Vec::new();
    for slot in 0..k {
        for attempt in 0..=retries {
            let draw = Draw {
                iteration,
                slot,
                attempt,
            };
            let response = generator.generate(prompt, draw)?;
            match extract_programs(&response.text, state_dim) {
                Ok((repr, reward)) => {
                    candidates.push(Candidate {
                        iteration,
                        id: slot,
                        repr,
                        reward,
                        provenance: response.provenance,
                        raw_response: response.text,
                    });
                    break;
                }
                Err(e) => {
                    log::warn!("iteration {iteration} slot {slot} attempt {attempt}: {e}");
                    rejections.push(Rejection {
                        draw,
                        reason: e.to_string(),
                        raw_response: response.text,
                    });
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(GenerationError::AllInvalid { k, rejections });
    }
    Ok(Generation {
        candidates,
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str =
        "Here is my answer.\n\n```dsl\nrepr:\nout: sqrt((s[0]-s[2])^2 + (s[1]-s[3])^2)\n\
                        out: s[2] - s[0]\nreward:\nout: -s[4]\n```\nDone.";

    #[test]
    fn well_formed_response() {
        let (f, g) = extract_programs(GOOD, 4).unwrap();
        assert_eq!(f.output_dim(), 2);
        assert_eq!(g.input_dim(), 6);
        assert_eq!(f.eval(&[0.0, 0.0, 3.0, 4.0]).unwrap(), vec![5.0, 3.0]);
    }

    #[test]
    fn prose_only_response() {
        assert_eq!(
            extract_programs("I would add the distance.", 4).unwrap_err(),
            ExtractError::NoProgramBlock
        );
        let other_tag = "```python\ndef f(s): return s\n```";
        assert_eq!(
            extract_programs(other_tag, 4).unwrap_err(),
            ExtractError::NoProgramBlock
        );
    }

    #[test]
    fn skips_untagged_blocks_before_dsl_block() {
        let text = format!("```python\nrepr:\nout: s[99]\n```\n{GOOD}");
        assert!(extract_programs(&text, 4).is_ok());
    }

    #[test]
    fn out_of_range_index_is_named() {
        let text = "```dsl\nrepr:\nout: s[7]\nreward:\nout: s[4]\n```";
        let err = extract_programs(text, 4).unwrap_err();
        assert!(err.to_string().contains("s[7]"), "{err}");
        assert!(matches!(
            err,
            ExtractError::Parse {
                section: "repr",
                ..
            }
        ));
    }

    #[test]
    fn missing_reward_block() {
        let text = "```dsl\nrepr:\nout: s[0]\n```";
        let err = extract_programs(text, 4).unwrap_err();
        assert_eq!(err.to_string(), "missing reward block");
    }

    #[test]
    fn program_file_round_trip() {
        let (f, g) = extract_programs(GOOD, 4).unwrap();
        let text = format_program_pair(&f, &g);
        assert!(text.starts_with("repr:\nout: sqrt("), "{text}");
        let (f2, g2) = parse_program_pair(&text, 4).unwrap();
        assert_eq!((f, g), (f2, g2));
    }

    #[test]
    fn inline_sections_and_comments() {
        let text = "```DSL\nrepr: out: s[0] * 2  # doubled\n# note\nreward: out: s[4]\n```";
        let (f, g) = extract_programs(text, 4).unwrap();
        assert_eq!(f.output_dim(), 1);
        assert_eq!(g.eval(&[0.0, 0.0, 0.0, 0.0, 3.0]).unwrap(), 3.0);
    }

    struct Scripted(Vec<&'static str>, usize);

    impl Generator for Scripted {
        fn generate(&mut self, _: &PromptBundle, _: Draw) -> Result<Response, GeneratorError> {
            let text = self.0[self.1 % self.0.len()].to_string();
            self.1 += 1;
            Ok(Response {
                text,
                provenance: Provenance::Mock { pool_index: 0 },
            })
        }

        fn analyze(&mut self, _: &PromptBundle, _: usize) -> Result<String, GeneratorError> {
            Ok(String::new())
        }

        fn describe(&self) -> String {
            "scripted".into()
        }
    }

    fn any_prompt() -> PromptBundle {
        build_prompt(
            TemplateId::Initial,
            &PromptVars {
                task_description: Some("t".into()),
                total_dim: Some(4),
                detail_content: Some("d".into()),
                ..PromptVars::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn invalid_responses_are_retried_then_dropped() {
        // slot 0: bad, good; slot 1: bad, bad (dropped with retries = 1)
        let mut g = Scripted(vec!["nothing", GOOD, "nothing", "nothing"], 0);
        let out = generate_candidates(&mut g, &any_prompt(), 2, 0, 4, 1).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.candidates[0].id, 0);
        assert_eq!(out.rejections.len(), 3);
        assert!(out.rejections[0].reason.contains("no program block"));
    }

    #[test]
    fn all_invalid_is_an_error() {
        let mut g = Scripted(vec!["```dsl\nrepr:\nout: s[0]\n```"], 0);
        let err = generate_candidates(&mut g, &any_prompt(), 3, 0, 4, 2).unwrap_err();
        match err {
            GenerationError::AllInvalid { k, rejections } => {
                assert_eq!(k, 3);
                assert_eq!(rejections.len(), 9);
                assert!(rejections
                    .iter()
                    .all(|r| r.reason == "missing reward block"));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
