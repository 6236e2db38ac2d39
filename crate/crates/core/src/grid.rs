//! Uniform time grids.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform partition of `[t_start, t_end]` into `n_steps` steps.
///
/// All grid times come from [`TimeGrid::time`] so that `t_k` is computed one
/// way everywhere (`t_start + k * dt`, not a running sum).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Config("grid endpoints must be finite".into()));
        }
        if t_end <= t_start {
            return Err(Error::Config(format!(
                "grid requires t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Config("grid requires n_steps >= 1".into()));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            n_steps,
        })
    }

    /// Grid on `[0, 1]`.
    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_steps)
    }

    #[inline]
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    /// `t_k` for `k` in `0..=n_steps`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        self.t_start + k as f64 * self.dt()
    }

    /// Index of the grid point nearest to `t`, if `t` lies on the grid
    /// (relative slack 1e-9 of a step).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let dt = self.dt();
        let raw = (t - self.t_start) / dt;
        let k = raw.round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        if (raw - k).abs() <= 1e-9 {
            Some(k as usize)
        } else {
            None
        }
    }
}
