//! Search over state representations and intrinsic rewards for continuous
//! control, guided by per-dimension Lipschitz feedback.
//!
//! The crate is organized bottom-up:
//!
//! - [`dsl`]: the expression language candidate programs are written in
//! - [`env`]: the point-mass maze used for desk-scale experiments
//! - [`nn`]: dense networks, Adam, spectral norms
//! - [`td3`]: the TD3 trainer over augmented states and blended rewards
//! - [`lipschitz`]: per-dimension Lipschitz arrays and value bounds
//! - [`llm`]: prompt templates, generators (remote or mock), program extraction
//! - [`orchestrator`]: the iterate-train-feedback loop and best-candidate selection
//! - [`config`] and [`cli`]: run configuration and the `lesr` command verbs

pub mod cli;
pub mod config;
pub mod dsl;
pub mod env;
pub mod lipschitz;
pub mod llm;
pub mod nn;
pub mod orchestrator;
pub mod td3;
pub mod trajectory;
