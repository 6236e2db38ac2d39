//! Pathwise solution of the interacting flow: explicit Euler and the Picard
//! iteration, plus the mean-field drift sum both solvers share.
//!
//! Every particle is driven by the SAME Wiener increment each step — one
//! shared source of noise, not per-particle noise.

use crate::brownian::BrownianPath;
use crate::coefficients::{CoefficientSet, DriftFamily};
use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Flow states at every grid time, with the driving path kept alongside.
#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    grid: TimeGrid,
    states: Vec<EnsembleState>,
    path: BrownianPath,
}

impl FlowTrajectory {
    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// State at grid index `k` (0 = initial).
    #[inline]
    pub fn state(&self, k: usize) -> &EnsembleState {
        &self.states[k]
    }

    #[inline]
    pub fn states(&self) -> &[EnsembleState] {
        &self.states
    }

    #[inline]
    pub fn terminal(&self) -> &EnsembleState {
        &self.states[self.states.len() - 1]
    }

    #[inline]
    pub fn path(&self) -> &BrownianPath {
        &self.path
    }
}

/// Fused per-family drift sum `out[i] = sum_j w[j] a(x[i], x[j])`.
///
/// The tanh kernel is antisymmetric, so each unordered pair costs one tanh;
/// the linear kernel collapses to the weighted mean. The iteration order is
/// fixed, making the float result deterministic.
pub(crate) fn drift_into(cs: &CoefficientSet, weights: &[f64], positions: &[f64], out: &mut [f64]) {
    let n = positions.len();
    match cs.drift() {
        DriftFamily::Zero => out[..n].fill(0.0),
        DriftFamily::Constant(c) => {
            let mass: f64 = weights.iter().sum();
            out[..n].fill(c * mass);
        }
        DriftFamily::LinearAttraction(k) => {
            let mass: f64 = weights.iter().sum();
            let m: f64 = weights.iter().zip(positions).map(|(w, x)| w * x).sum();
            for i in 0..n {
                out[i] = k * (m - mass * positions[i]);
            }
        }
        DriftFamily::TanhKernel { alpha, gamma } => {
            out[..n].fill(0.0);
            // a(x_i, x_i) = 0, so the diagonal contributes nothing
            for i in 0..n {
                let xi = positions[i];
                let wi = weights[i];
                for j in (i + 1)..n {
                    let s = alpha * (gamma * (positions[j] - xi)).tanh();
                    out[i] += weights[j] * s;
                    out[j] -= wi * s;
                }
            }
        }
    }
}

/// Drift of each particle against the ensemble: `d_i = sum_j w_j a(x_i, x_j)`.
pub fn mean_field_drift(ensemble: &EnsembleState, cs: &CoefficientSet) -> Result<Vec<f64>> {
    for (i, &x) in ensemble.positions().iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "position",
                step: 0,
                particle: i,
            });
        }
    }
    let mut out = vec![0.0; ensemble.n_particles()];
    drift_into(cs, ensemble.weights(), ensemble.positions(), &mut out);
    Ok(out)
}

fn check_start_time(ensemble0: &EnsembleState, grid: &TimeGrid) -> Result<()> {
    if (ensemble0.time() - grid.t_start()).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "ensemble time {} does not match grid start {}",
            ensemble0.time(),
            grid.t_start()
        )));
    }
    Ok(())
}

/// One explicit Euler sweep over the whole grid, recording every state.
/// `frozen` supplies the coefficient arguments per step when given (the Picard
/// iteration evaluates drift and diffusion at the previous iterate).
fn euler_sweep(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    path: &BrownianPath,
    frozen: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>> {
    let grid = path.grid();
    let n = ensemble0.n_particles();
    let dt = grid.dt();
    let weights = ensemble0.weights();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(grid.n_steps() + 1);
    xs.push(ensemble0.positions().to_vec());
    let mut d = vec![0.0; n];
    for k in 0..grid.n_steps() {
        let dw = path.increment(k);
        let eval_at = match frozen {
            Some(traj) => &traj[k],
            None => &xs[k],
        };
        drift_into(cs, weights, eval_at, &mut d);
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let x = xs[k][i] + d[i] * dt + cs.diffusion(eval_at[i]) * dw;
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    what: "position",
                    step: k + 1,
                    particle: i,
                });
            }
            next.push(x);
        }
        xs.push(next);
    }
    Ok(xs)
}

fn assemble(
    ensemble0: &EnsembleState,
    path: &BrownianPath,
    xs: Vec<Vec<f64>>,
) -> FlowTrajectory {
    let grid = path.grid();
    let states = xs
        .into_iter()
        .enumerate()
        .map(|(k, x)| ensemble0.advanced(x, grid.time(k)))
        .collect();
    FlowTrajectory {
        grid,
        states,
        path: path.clone(),
    }
}

/// Left-point Euler solution of the flow on the path's grid.
pub fn euler_solve(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    path: &BrownianPath,
) -> Result<FlowTrajectory> {
    check_start_time(ensemble0, &path.grid())?;
    let xs = euler_sweep(cs, ensemble0, path, None)?;
    Ok(assemble(ensemble0, path, xs))
}

/// Picard iteration on a fixed path and grid: iterate `n` maps the previous
/// trajectory to a new one with all coefficient arguments frozen at the
/// previous iterate, starting from the constant-in-time guess `x^0(u,t) = u`.
///
/// Returns the final iterate and the sup-distances
/// `delta_n = max_{i,k} |x^{n+1} - x^n|` for `n = 1..=n_iter` (so `n_iter + 1`
/// sweeps run in total). Because the sweep reuses the Euler grid and path, the
/// fixed point is exactly the [`euler_solve`] trajectory: the distances
/// measure iteration error only.
pub fn picard_solve(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    path: &BrownianPath,
    n_iter: usize,
) -> Result<(FlowTrajectory, Vec<f64>)> {
    if n_iter < 1 {
        return Err(Error::Config("picard iteration count must be >= 1".into()));
    }
    check_start_time(ensemble0, &path.grid())?;
    let n_steps = path.grid().n_steps();
    let frozen0: Vec<Vec<f64>> = vec![ensemble0.positions().to_vec(); n_steps + 1];
    let mut prev = euler_sweep(cs, ensemble0, path, Some(&frozen0))?;
    let mut deltas = Vec::with_capacity(n_iter);
    for _ in 1..=n_iter {
        let next = euler_sweep(cs, ensemble0, path, Some(&prev))?;
        let mut sup: f64 = 0.0;
        for (row_next, row_prev) in next.iter().zip(&prev) {
            for (a, b) in row_next.iter().zip(row_prev) {
                sup = sup.max((a - b).abs());
            }
        }
        deltas.push(sup);
        prev = next;
    }
    Ok((assemble(ensemble0, path, prev), deltas))
}

/// Exact solution of the linear-attraction flow with unit diffusion on a
/// given path: `x(u,t) = m0 + W(t) + (u - m0) e^{-kappa t}`. The noise is
/// additive and shared, so the continuous-time solution depends on the path
/// only through `W(t)` — usable as a reference at any grid resolution.
pub fn linear_attraction_closed_form(kappa: f64, m0: f64, u: f64, t: f64, w_t: f64) -> f64 {
    m0 + w_t + (u - m0) * (-kappa * t).exp()
}
