//! Sampled Wiener paths on a time grid.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{stream_key, StreamRole, SubstreamRng};

/// A Wiener path stored as i.i.d. `N(0, dt)` increments together with their
/// running sum. `value(k)` is `W(t_k)` with `W(t_0) = 0`; by construction
/// `value(k + 1) == value(k) + increment(k)` bit-for-bit.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    grid: TimeGrid,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BrownianPath {
    /// Draw a path from the substream at `key`.
    pub fn sample_key(grid: TimeGrid, key: u64) -> Self {
        let mut rng = SubstreamRng::from_key(key);
        let sqrt_dt = grid.dt().sqrt();
        let increments: Vec<f64> = (0..grid.n_steps())
            .map(|_| sqrt_dt * rng.standard_normal())
            .collect();
        Self::from_increments_unchecked(grid, increments)
    }

    /// Draw the path addressed by `(base_seed, role, a, b, c)`.
    pub fn sample(grid: TimeGrid, base_seed: u64, role: StreamRole, a: u64, b: u64, c: u64) -> Self {
        Self::sample_key(grid, stream_key(base_seed, role, a, b, c))
    }

    /// Wrap externally supplied increments (length must match the grid).
    pub fn from_increments(grid: TimeGrid, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.n_steps() {
            return Err(Error::GridMismatch(format!(
                "{} increments for a grid with {} steps",
                increments.len(),
                grid.n_steps()
            )));
        }
        Ok(Self::from_increments_unchecked(grid, increments))
    }

    fn from_increments_unchecked(grid: TimeGrid, increments: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(grid.n_steps() + 1);
        cumulative.push(0.0);
        let mut w = 0.0;
        for &dw in &increments {
            w += dw;
            cumulative.push(w);
        }
        BrownianPath {
            grid,
            increments,
            cumulative,
        }
    }

    #[inline]
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// `W(t_{k+1}) - W(t_k)` for `k` in `0..n_steps`.
    #[inline]
    pub fn increment(&self, k: usize) -> f64 {
        self.increments[k]
    }

    #[inline]
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W(t_k)` for `k` in `0..=n_steps`.
    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        self.cumulative[k]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.cumulative
    }

    #[inline]
    pub fn terminal(&self) -> f64 {
        self.cumulative[self.grid.n_steps()]
    }

    /// Path with increments shifted by `scale * h(t_k) * dt` (a deterministic
    /// drift direction given by the step function `h` on left endpoints).
    pub fn shifted(&self, h: &[f64], scale: f64) -> Result<Self> {
        if h.len() != self.grid.n_steps() {
            return Err(Error::GridMismatch(format!(
                "direction has {} entries for a grid with {} steps",
                h.len(),
                self.grid.n_steps()
            )));
        }
        let dt = self.grid.dt();
        let increments = self
            .increments
            .iter()
            .zip(h)
            .map(|(&dw, &hk)| dw + scale * hk * dt)
            .collect();
        Ok(Self::from_increments_unchecked(self.grid, increments))
    }
}
