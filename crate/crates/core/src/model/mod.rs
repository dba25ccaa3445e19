//! The independent-fields categorical model: domain state and exact kernels.

mod dist;
mod kernels;
mod state;

pub use dist::{beta_draw, categorical_draw, dirichlet_draw};
pub use kernels::{
    draw_beta, draw_theta, lambda_support_check, log_joint, sample_beta, sample_theta, sample_y,
    sample_z, z_probability, FieldStats, SufficientStats,
};
pub use state::{ClusterParts, LatentId, Linkage, LinkageState, Parameters};

pub(crate) use state::canonicalize;


use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FieldSchema;
use crate::error::{Error, Result};

/// Whether records of one file may share a latent individual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageMode {
    /// No within-file duplicates: every latent has at most one record per file.
    Smere,
    /// Linkage and de-duplication together.
    #[default]
    Smered,
}

/// Prior hyperparameters, one entry per field.
///
/// `b[l] == f64::INFINITY` pins the distortion probability of field `l` to
/// zero, so linked records must agree on that field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub a: Vec<f64>,
    #[serde(with = "crate::serde_util::vec_f64_inf")]
    pub b: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
}

impl Hyperparameters {
    /// Same `a`, `b` for every field and a flat Dirichlet concentration `mu`.
    pub fn uniform(schema: &FieldSchema, a: f64, b: f64, mu: f64) -> Self {
        Self {
            a: vec![a; schema.p()],
            b: vec![b; schema.p()],
            mu: schema.levels().iter().map(|&m| vec![mu; m as usize]).collect(),
        }
    }

    pub fn validate(&self, schema: &FieldSchema) -> Result<()> {
        let p = schema.p();
        if self.a.len() != p || self.b.len() != p || self.mu.len() != p {
            return Err(Error::Hyperparameters(format!(
                "expected {p} fields, got a={} b={} mu={}",
                self.a.len(),
                self.b.len(),
                self.mu.len()
            )));
        }
        for l in 0..p {
            if !(self.a[l] > 0.0 && self.a[l].is_finite()) {
                return Err(Error::Hyperparameters(format!("a[{l}] = {} must be positive", self.a[l])));
            }
            if !(self.b[l] > 0.0) {
                return Err(Error::Hyperparameters(format!(
                    "b[{l}] = {} must be positive or infinite",
                    self.b[l]
                )));
            }
            let m = schema.level_count(l) as usize;
            if self.mu[l].len() != m {
                return Err(Error::Hyperparameters(format!(
                    "mu[{l}] has {} entries, field has {m} levels",
                    self.mu[l].len()
                )));
            }
            if self.mu[l].iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Hyperparameters(format!("mu[{l}] entries must be positive")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn distortion_disabled(&self, field: usize) -> bool {
        self.b[field].is_infinite()
    }
}

impl Parameters {
    /// One draw of `theta` and `beta` from their priors.
    pub fn from_prior<R: Rng + ?Sized>(hp: &Hyperparameters, rng: &mut R) -> Self {
        let theta = hp.mu.iter().map(|mu| dirichlet_draw(mu, rng)).collect();
        let beta = hp
            .a
            .iter()
            .zip(&hp.b)
            .map(|(&a, &b)| if b.is_infinite() { 0.0 } else { beta_draw(a, b, rng) })
            .collect();
        Self { theta, beta }
    }
}
