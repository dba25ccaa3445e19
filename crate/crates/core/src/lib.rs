//! Bayesian record linkage and de-duplication across `k` files.
//!
//! Records point at latent individuals through a bipartite linkage structure
//! and are explained by an independent-fields categorical distortion model.
//! A split-merge Metropolis-within-Gibbs sampler draws from the posterior of
//! the linkage; the `posterior` module turns the draws into match
//! probabilities and a transitive point estimate.

pub mod data;
pub mod eval;
pub mod error;
pub mod io;
pub mod model;
pub mod posterior;
pub mod priors;
pub mod sampler;

mod serde_util;

pub use data::{FieldSchema, FileLayout, GroundTruth, RecordCoord, RecordId, RecordTable};
pub use error::{Error, Result};
