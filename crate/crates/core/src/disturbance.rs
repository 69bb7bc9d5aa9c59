//! Boundary disturbance generation and rate bounds.
//!
//! The ramp-sine family `psi_i(t) = 4 k_i t + sin(k_i pi t)` has the
//! derivative bound `|psi_i'| <= k_i (4 + pi)`; the quadratic augmentation
//! `+ alpha_i t^2` deliberately breaks that bound.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DisturbanceError {
    #[error("rate bound undefined: the quadratic disturbance has unbounded derivative")]
    UnboundedRate,
    #[error("coefficient {name}[{index}] = {value} outside [{lo}, {hi}]")]
    CoefficientOutOfRange {
        name: &'static str,
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    None,
    RampSine,
    RampSineQuadratic,
}

/// Fully resolved disturbance: one ramp-sine coefficient per agent, plus the
/// quadratic coefficients when present.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    kind: DisturbanceKind,
    k: DVector<f64>,
    alpha: Option<DVector<f64>>,
    seed: Option<u64>,
}

pub const K_RANGE: (f64, f64) = (0.0, 2.0);
pub const ALPHA_RANGE: (f64, f64) = (0.0, 20.0);

impl DisturbanceSpec {
    pub fn none(agent_count: usize) -> Self {
        DisturbanceSpec {
            kind: DisturbanceKind::None,
            k: DVector::zeros(agent_count),
            alpha: None,
            seed: None,
        }
    }

    /// Builds a spec from explicit coefficient vectors, validating ranges.
    pub fn explicit(
        kind: DisturbanceKind,
        k: Vec<f64>,
        alpha: Option<Vec<f64>>,
    ) -> Result<Self, DisturbanceError> {
        check_range("k", &k, K_RANGE)?;
        let alpha = match (kind, alpha) {
            (DisturbanceKind::RampSineQuadratic, Some(a)) => {
                check_range("alpha", &a, ALPHA_RANGE)?;
                Some(DVector::from_vec(a))
            }
            (DisturbanceKind::RampSineQuadratic, None) => {
                Some(DVector::zeros(k.len()))
            }
            _ => None,
        };
        Ok(DisturbanceSpec {
            kind,
            k: DVector::from_vec(k),
            alpha,
            seed: None,
        })
    }

    /// Draws coefficients from a seeded generator, in agent-index order:
    /// first all `k_i`, then (for the quadratic kind) all `alpha_i`.
    pub fn from_seed(kind: DisturbanceKind, agent_count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = DVector::from_fn(agent_count, |_, _| rng.gen_range(K_RANGE.0..=K_RANGE.1));
        let alpha = match kind {
            DisturbanceKind::RampSineQuadratic => Some(DVector::from_fn(agent_count, |_, _| {
                rng.gen_range(ALPHA_RANGE.0..=ALPHA_RANGE.1)
            })),
            _ => None,
        };
        DisturbanceSpec {
            kind,
            k: if kind == DisturbanceKind::None {
                DVector::zeros(agent_count)
            } else {
                k
            },
            alpha,
            seed: Some(seed),
        }
    }

    pub fn kind(&self) -> DisturbanceKind {
        self.kind
    }

    pub fn k(&self) -> &DVector<f64> {
        &self.k
    }

    pub fn alpha(&self) -> Option<&DVector<f64>> {
        self.alpha.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Disturbance vector at time `t`.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self.kind {
            DisturbanceKind::None => DVector::zeros(self.k.len()),
            DisturbanceKind::RampSine => self
                .k
                .map(|k| 4.0 * k * t + (k * PI * t).sin()),
            DisturbanceKind::RampSineQuadratic => {
                let alpha = self.alpha.as_ref().expect("quadratic kind has alpha");
                DVector::from_fn(self.k.len(), |i, _| {
                    let k = self.k[i];
                    4.0 * k * t + (k * PI * t).sin() + alpha[i] * t * t
                })
            }
        }
    }

    /// Rate bound for the ramp-sine family. Fails with `UnboundedRate` for
    /// the quadratic kind, which is exactly the assumption violation the
    /// divergence experiment exercises.
    pub fn rate_bound(&self) -> Result<BoundSummary, DisturbanceError> {
        match self.kind {
            DisturbanceKind::RampSineQuadratic => Err(DisturbanceError::UnboundedRate),
            _ => {
                let k_max = self.k.iter().cloned().fold(0.0, f64::max);
                Ok(BoundSummary {
                    spec_bound: k_max * (4.0 + PI),
                    apriori_bound: apriori_rate_bound(),
                })
            }
        }
    }
}

/// Worst-case a-priori bound over the admissible coefficient interval,
/// `2 * (4 + pi) = 8 + 2 pi`.
pub fn apriori_rate_bound() -> f64 {
    K_RANGE.1 * (4.0 + PI)
}

/// Disturbance-rate bound: the spec-specific value together with the
/// a-priori worst case the gains are tuned against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSummary {
    pub spec_bound: f64,
    pub apriori_bound: f64,
}

impl BoundSummary {
    pub fn pi(&self) -> f64 {
        self.apriori_bound
    }
}

fn check_range(
    name: &'static str,
    values: &[f64],
    (lo, hi): (f64, f64),
) -> Result<(), DisturbanceError> {
    for (i, &v) in values.iter().enumerate() {
        if !(lo..=hi).contains(&v) {
            return Err(DisturbanceError::CoefficientOutOfRange {
                name,
                index: i,
                value: v,
                lo,
                hi,
            });
        }
    }
    Ok(())
}
