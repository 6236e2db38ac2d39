//! Weighted particle ensembles: the discretized initial measure and its
//! pushforward under the flow.
//!
//! The measure at time `t` is `sum_i w_i delta_{x_i(t)}`. Atoms (initial
//! positions) and weights are fixed for the lifetime of a run; only the
//! positions move.

use crate::error::{Error, Result};
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Named initial distributions discretized by equal-weight quantile atoms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialDistribution {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    TwoPoint { a: f64, b: f64 },
    Delta { at: f64 },
}

impl InitialDistribution {
    /// Parse `(name, params)` with family defaults when `params` is empty:
    /// uniform [0,1], gaussian (0,1), two_point {-1,+1}, delta at 0.
    pub fn from_config(name: &str, params: &[f64]) -> Result<Self> {
        let bad_count = |n: usize| {
            Error::Config(format!(
                "distribution `{name}` takes 0 or {n} parameter(s), got {}",
                params.len()
            ))
        };
        match name {
            "uniform" => match params {
                [] => Ok(InitialDistribution::Uniform { lo: 0.0, hi: 1.0 }),
                [lo, hi] if hi > lo => Ok(InitialDistribution::Uniform { lo: *lo, hi: *hi }),
                [_, _] => Err(Error::Config("uniform requires hi > lo".into())),
                _ => Err(bad_count(2)),
            },
            "gaussian" => match params {
                [] => Ok(InitialDistribution::Gaussian { mean: 0.0, sd: 1.0 }),
                [m, s] if *s > 0.0 => Ok(InitialDistribution::Gaussian { mean: *m, sd: *s }),
                [_, _] => Err(Error::Config("gaussian requires sd > 0".into())),
                _ => Err(bad_count(2)),
            },
            "two_point" => match params {
                [] => Ok(InitialDistribution::TwoPoint { a: -1.0, b: 1.0 }),
                [a, b] => Ok(InitialDistribution::TwoPoint { a: *a, b: *b }),
                _ => Err(bad_count(2)),
            },
            "delta" => match params {
                [] => Ok(InitialDistribution::Delta { at: 0.0 }),
                [at] => Ok(InitialDistribution::Delta { at: *at }),
                _ => Err(bad_count(1)),
            },
            other => Err(Error::Config(format!("unknown distribution `{other}`"))),
        }
    }

    /// Quantile at probability `q` in (0, 1).
    fn quantile(&self, q: f64) -> f64 {
        match *self {
            InitialDistribution::Uniform { lo, hi } => lo + q * (hi - lo),
            InitialDistribution::Gaussian { mean, sd } => {
                // unwrap: sd > 0 enforced at parse time
                mean + sd * Normal::new(0.0, 1.0).unwrap().inverse_cdf(q)
            }
            InitialDistribution::TwoPoint { a, b } => {
                if q <= 0.5 {
                    a
                } else {
                    b
                }
            }
            InitialDistribution::Delta { at } => at,
        }
    }
}

/// Weighted particle ensemble at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    positions: Vec<f64>,
    time: f64,
}

impl EnsembleState {
    /// Ensemble at time 0 with `positions = atoms`. Weights are validated
    /// nonnegative and normalized to unit mass.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let positions = atoms.clone();
        Self::from_parts(atoms, weights, positions, 0.0)
    }

    /// Point mass at `u`: one particle of weight 1.
    pub fn delta(u: f64) -> Self {
        EnsembleState {
            atoms: vec![u],
            weights: vec![1.0],
            positions: vec![u],
            time: 0.0,
        }
    }

    /// `n` equal-weight atoms at the midpoint quantiles `(2i+1)/(2n)`.
    pub fn from_quantiles(dist: InitialDistribution, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("particle count must be >= 1".into()));
        }
        let atoms: Vec<f64> = (0..n)
            .map(|i| dist.quantile((2 * i + 1) as f64 / (2 * n) as f64))
            .collect();
        let w = 1.0 / n as f64;
        Self::new(atoms, vec![w; n])
    }

    /// Assemble a state at an arbitrary time (frozen mid-run states restart
    /// inner simulations from here). Validates all invariants.
    pub fn from_parts(
        atoms: Vec<f64>,
        weights: Vec<f64>,
        positions: Vec<f64>,
        time: f64,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("ensemble must contain at least one atom".into()));
        }
        if atoms.len() != weights.len() || atoms.len() != positions.len() {
            return Err(Error::Config(format!(
                "atoms/weights/positions length mismatch: {}/{}/{}",
                atoms.len(),
                weights.len(),
                positions.len()
            )));
        }
        if !time.is_finite() {
            return Err(Error::Config("ensemble time must be finite".into()));
        }
        for (i, (&a, &w)) in atoms.iter().zip(&weights).enumerate() {
            if !a.is_finite() {
                return Err(Error::Config(format!("atom {i} is not finite")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("weight {i} must be finite and >= 0")));
            }
        }
        for (i, &x) in positions.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    what: "position",
                    step: 0,
                    particle: i,
                });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("weights must have positive total mass".into()));
        }
        let weights: Vec<f64> = if (total - 1.0).abs() <= 1e-12 {
            weights
        } else {
            weights.iter().map(|w| w / total).collect()
        };
        Ok(EnsembleState {
            atoms,
            weights,
            positions,
            time,
        })
    }

    #[inline]
    pub fn n_particles(&self) -> usize {
        self.atoms.len()
    }

    #[inline]
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Same atoms and weights, new positions and time.
    pub(crate) fn advanced(&self, positions: Vec<f64>, time: f64) -> EnsembleState {
        debug_assert_eq!(positions.len(), self.atoms.len());
        EnsembleState {
            atoms: self.atoms.clone(),
            weights: self.weights.clone(),
            positions,
            time,
        }
    }

    /// `sum_i w_i x_i`.
    pub fn weighted_mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.positions)
            .map(|(w, x)| w * x)
            .sum()
    }

    /// `<phi, mu_t> = sum_i w_i phi(x_i)`.
    pub fn pair_with(&self, f: TestFunction) -> Result<f64> {
        let mut acc = 0.0;
        for (i, (&w, &x)) in self.weights.iter().zip(&self.positions).enumerate() {
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "test function value",
                    step: 0,
                    particle: i,
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Jointly permute atoms, weights, positions (property-test helper).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.atoms.len() {
            return Err(Error::Config("permutation length mismatch".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::Config("not a permutation".into()));
            }
            seen[p] = true;
        }
        Ok(EnsembleState {
            atoms: perm.iter().map(|&p| self.atoms[p]).collect(),
            weights: perm.iter().map(|&p| self.weights[p]).collect(),
            positions: perm.iter().map(|&p| self.positions[p]).collect(),
            time: self.time,
        })
    }
}
