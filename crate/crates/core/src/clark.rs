//! Nested Monte Carlo estimation of the martingale-representation integrand
//! Theta(t) = E(d<phi, mu_1>(t) | F_t), and residual verification of
//! <phi, mu_1> = E<phi, mu_1> + int_0^1 Theta(t) dW(t).
//!
//! At each grid time t_k the conditional expectation is simulated directly:
//! freeze the outer ensemble state, draw fresh Brownian continuations on
//! [t_k, 1], co-evolve the flow and the derivative recursion launched at
//! eta = b(x(t_k)), and average sum_i w_i phi'(x_i(1)) eta_i(1). Inner noise
//! comes from substreams addressed by (outer, grid, inner) index, so the
//! estimate is F_t-measurable by construction and independent of scheduling.

use crate::coefficients::{CoefficientSet, DriftFamily};
use crate::brownian::BrownianPath;
use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::flow::{euler_solve, FlowTrajectory};
use crate::grid::TimeGrid;
use crate::rng::{StreamRole, SubstreamRng};
use crate::testfn::TestFunction;
use rayon::prelude::*;

/// Numerically stable running mean/variance (Welford). Exactly zero variance
/// for bit-identical samples, which the constant-payoff oracles rely on.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n - 1 denominator).
    pub(crate) fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub(crate) fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// One fused step of the coupled (flow, derivative) system. Matches the
/// separate flow/derivative kernels bit-for-bit while evaluating each tanh
/// pair interaction once for both.
#[allow(clippy::too_many_arguments)]
pub(crate) fn coupled_step(
    cs: &CoefficientSet,
    weights: &[f64],
    x: &mut [f64],
    eta: &mut [f64],
    dx: &mut [f64],
    de: &mut [f64],
    dt: f64,
    dw: f64,
    step: usize,
) -> Result<()> {
    let n = x.len();
    match cs.drift() {
        DriftFamily::Zero => {
            dx[..n].fill(0.0);
            de[..n].fill(0.0);
        }
        DriftFamily::Constant(c) => {
            let mass: f64 = weights.iter().sum();
            dx[..n].fill(c * mass);
            de[..n].fill(0.0);
        }
        DriftFamily::LinearAttraction(k) => {
            let mass: f64 = weights.iter().sum();
            let m: f64 = weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum();
            let eta_bar: f64 = weights.iter().zip(eta.iter()).map(|(w, e)| w * e).sum();
            for i in 0..n {
                dx[i] = k * (m - mass * x[i]);
                de[i] = k * (eta_bar - mass * eta[i]);
            }
        }
        DriftFamily::TanhKernel { alpha, gamma } => {
            dx[..n].fill(0.0);
            de[..n].fill(0.0);
            let ag = alpha * gamma;
            for i in 0..n {
                let xi = x[i];
                let ei = eta[i];
                let wi = weights[i];
                for j in (i + 1)..n {
                    let th = (gamma * (x[j] - xi)).tanh();
                    let s = alpha * th;
                    dx[i] += weights[j] * s;
                    dx[j] -= wi * s;
                    let q = ag * (1.0 - th * th);
                    let diff = eta[j] - ei;
                    de[i] += weights[j] * q * diff;
                    de[j] -= wi * q * diff;
                }
            }
        }
    }
    let constant_b = cs.diffusion_is_constant();
    for i in 0..n {
        let xi = x[i];
        if constant_b {
            eta[i] += de[i] * dt;
        } else {
            eta[i] += de[i] * dt + cs.diffusion_prime(xi) * eta[i] * dw;
        }
        x[i] = xi + dx[i] * dt + cs.diffusion(xi) * dw;
        if !x[i].is_finite() || !eta[i].is_finite() {
            return Err(Error::NonFinite {
                what: if x[i].is_finite() { "derivative" } else { "position" },
                step,
                particle: i,
            });
        }
    }
    Ok(())
}

/// Run `n_inner` Brownian continuations from the frozen `state` to the grid
/// end, co-evolving flow and derivative, and hand each terminal
/// `(positions, derivatives)` pair to the callback. Substream address:
/// (base_seed, inner role, outer_index, grid index of `state`, inner index).
pub(crate) fn simulate_inner(
    cs: &CoefficientSet,
    state: &EnsembleState,
    grid: &TimeGrid,
    n_inner: usize,
    base_seed: u64,
    outer_index: u64,
    mut per_sample: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    let k0 = grid.index_of(state.time()).ok_or_else(|| {
        Error::GridMismatch("ensemble state time does not sit on the grid".into())
    })?;
    let n_steps = grid.n_steps();
    let np = state.n_particles();
    let weights = state.weights();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut x = vec![0.0; np];
    let mut eta = vec![0.0; np];
    let mut dx = vec![0.0; np];
    let mut de = vec![0.0; np];
    for m in 0..n_inner {
        let mut rng = SubstreamRng::new(
            base_seed,
            StreamRole::Inner,
            outer_index,
            k0 as u64,
            m as u64,
        );
        x.copy_from_slice(state.positions());
        for (e, &xv) in eta.iter_mut().zip(x.iter()) {
            *e = cs.diffusion(xv);
        }
        for k in k0..n_steps {
            let dw = sqrt_dt * rng.standard_normal();
            coupled_step(cs, weights, &mut x, &mut eta, &mut dx, &mut de, dt, dw, k + 1)?;
        }
        per_sample(m, &x, &eta);
    }
    Ok(())
}

/// Conditional-expectation estimates for several test functions on shared
/// inner samples (common random numbers). Returns `(theta_hat, stderr)` per
/// function, in input order.
pub fn inner_conditional_multi(
    cs: &CoefficientSet,
    state: &EnsembleState,
    fs: &[TestFunction],
    n_inner: usize,
    grid: &TimeGrid,
    base_seed: u64,
    outer_index: u64,
) -> Result<Vec<(f64, f64)>> {
    if n_inner < 2 {
        return Err(Error::Config("inner path count must be >= 2".into()));
    }
    let weights = state.weights().to_vec();
    let mut stats = vec![RunningStats::default(); fs.len()];
    simulate_inner(cs, state, grid, n_inner, base_seed, outer_index, |_, x, eta| {
        for (fi, f) in fs.iter().enumerate() {
            let mut y = 0.0;
            for i in 0..x.len() {
                y += weights[i] * f.deriv(x[i]) * eta[i];
            }
            stats[fi].push(y);
        }
    })?;
    Ok(stats.iter().map(|s| (s.mean(), s.stderr())).collect())
}

/// Single-function version of [`inner_conditional_multi`].
pub fn inner_conditional_estimate(
    cs: &CoefficientSet,
    state: &EnsembleState,
    f: TestFunction,
    n_inner: usize,
    grid: &TimeGrid,
    base_seed: u64,
    outer_index: u64,
) -> Result<(f64, f64)> {
    Ok(inner_conditional_multi(cs, state, &[f], n_inner, grid, base_seed, outer_index)?[0])
}

/// Integrand estimates on one outer path: `theta_hat(t_k)` with a standard
/// error at every grid point (the terminal point needs no continuation and
/// has stderr 0).
#[derive(Clone, Debug)]
pub struct ClarkIntegrandEstimate {
    f: TestFunction,
    grid: TimeGrid,
    n_inner: usize,
    estimates: Vec<f64>,
    stderrs: Vec<f64>,
}

impl ClarkIntegrandEstimate {
    #[inline]
    pub fn f(&self) -> TestFunction {
        self.f
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn n_inner(&self) -> usize {
        self.n_inner
    }

    /// `theta_hat(t_k)`, defined for `k = 0..=n_steps`.
    #[inline]
    pub fn estimate(&self, k: usize) -> f64 {
        self.estimates[k]
    }

    #[inline]
    pub fn stderr(&self, k: usize) -> f64 {
        self.stderrs[k]
    }

    #[inline]
    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    #[inline]
    pub fn stderrs(&self) -> &[f64] {
        &self.stderrs
    }
}

fn check_unit_interval(grid: &TimeGrid) -> Result<()> {
    if grid.t_start().abs() > 1e-12 || (grid.t_end() - 1.0).abs() > 1e-12 {
        return Err(Error::GridMismatch(
            "representation experiments run on the time interval [0, 1]".into(),
        ));
    }
    Ok(())
}

/// Terminal pairing `alpha = <phi, mu_1>` on one path.
pub fn terminal_pairing(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    f: TestFunction,
    path: &BrownianPath,
) -> Result<f64> {
    check_unit_interval(&path.grid())?;
    let traj = euler_solve(cs, ensemble0, path)?;
    traj.terminal().pair_with(f)
}

fn integrand_from_traj(
    cs: &CoefficientSet,
    traj: &FlowTrajectory,
    fs: &[TestFunction],
    n_inner: usize,
    base_seed: u64,
    outer_index: u64,
) -> Result<Vec<ClarkIntegrandEstimate>> {
    let grid = *traj.grid();
    let n_steps = grid.n_steps();
    let mut estimates = vec![Vec::with_capacity(n_steps + 1); fs.len()];
    let mut stderrs = vec![Vec::with_capacity(n_steps + 1); fs.len()];
    for k in 0..=n_steps {
        let per_f = inner_conditional_multi(
            cs,
            traj.state(k),
            fs,
            n_inner,
            &grid,
            base_seed,
            outer_index,
        )?;
        for (fi, (theta, se)) in per_f.into_iter().enumerate() {
            if !theta.is_finite() {
                return Err(Error::NonFinite {
                    what: "integrand estimate",
                    step: k,
                    particle: 0,
                });
            }
            estimates[fi].push(theta);
            stderrs[fi].push(se);
        }
    }
    Ok(fs
        .iter()
        .zip(estimates.into_iter().zip(stderrs))
        .map(|(&f, (est, se))| ClarkIntegrandEstimate {
            f,
            grid,
            n_inner,
            estimates: est,
            stderrs: se,
        })
        .collect())
}

/// Estimate the integrand at every grid point of one outer path, for several
/// test functions over shared inner samples.
pub fn clark_integrand_multi(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    fs: &[TestFunction],
    path: &BrownianPath,
    n_inner: usize,
    base_seed: u64,
    outer_index: u64,
) -> Result<Vec<ClarkIntegrandEstimate>> {
    check_unit_interval(&path.grid())?;
    let traj = euler_solve(cs, ensemble0, path)?;
    integrand_from_traj(cs, &traj, fs, n_inner, base_seed, outer_index)
}

/// Single-function version of [`clark_integrand_multi`].
pub fn clark_integrand_path(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    f: TestFunction,
    path: &BrownianPath,
    n_inner: usize,
    base_seed: u64,
    outer_index: u64,
) -> Result<ClarkIntegrandEstimate> {
    Ok(clark_integrand_multi(cs, ensemble0, &[f], path, n_inner, base_seed, outer_index)?
        .pop()
        .expect("one estimate per requested function"))
}

/// `r = alpha - mean_estimate - sum_k theta_hat(t_k) dW_k` (left-point sum).
pub fn representation_residual(
    alpha: f64,
    mean_estimate: f64,
    integrand: &ClarkIntegrandEstimate,
    path: &BrownianPath,
) -> Result<f64> {
    if integrand.grid != path.grid() {
        return Err(Error::GridMismatch(
            "integrand estimate and path use different grids".into(),
        ));
    }
    let mut ito = 0.0;
    for k in 0..path.grid().n_steps() {
        ito += integrand.estimate(k) * path.increment(k);
    }
    Ok(alpha - mean_estimate - ito)
}

/// Residual statistics of the representation over fresh outer paths, with the
/// terminal mean estimated from an independent batch.
#[derive(Clone, Debug)]
pub struct RepresentationReport {
    pub f: TestFunction,
    pub m_outer: usize,
    pub m_mean: usize,
    pub n_inner: usize,
    pub n_steps: usize,
    pub residuals: Vec<f64>,
    pub mean_residual: f64,
    pub stderr_mean_residual: f64,
    pub rms_residual: f64,
    /// independent estimate of E alpha and its standard error
    pub mean_estimate: f64,
    pub stderr_mean_estimate: f64,
}

impl RepresentationReport {
    /// Standard error of the residual mean with the mean-batch noise folded
    /// in: `Ehat` is common to every residual, so its variance adds once.
    pub fn combined_stderr(&self) -> f64 {
        (self.stderr_mean_residual.powi(2) + self.stderr_mean_estimate.powi(2)).sqrt()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn verify_representation(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    f: TestFunction,
    grid: TimeGrid,
    m_outer: usize,
    m_mean: usize,
    n_inner: usize,
    base_seed: u64,
) -> Result<RepresentationReport> {
    if m_outer < 100 || m_mean < 100 {
        return Err(Error::Config(
            "representation verification needs >= 100 outer and mean paths".into(),
        ));
    }
    check_unit_interval(&grid)?;
    // independent mean batch; reduced serially in index order so the result
    // does not depend on the thread count
    let alphas: Vec<f64> = (0..m_mean)
        .into_par_iter()
        .map(|j| {
            let path = BrownianPath::sample(grid, base_seed, StreamRole::Mean, j as u64, 0, 0);
            let traj = euler_solve(cs, ensemble0, &path)?;
            traj.terminal().pair_with(f)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut mean_stats = RunningStats::default();
    for &a in &alphas {
        mean_stats.push(a);
    }
    let mean_estimate = mean_stats.mean();

    let residuals: Vec<f64> = (0..m_outer)
        .into_par_iter()
        .map(|o| {
            let path = BrownianPath::sample(grid, base_seed, StreamRole::Outer, o as u64, 0, 0);
            let traj = euler_solve(cs, ensemble0, &path)?;
            let integrand =
                integrand_from_traj(cs, &traj, &[f], n_inner, base_seed, o as u64)?
                    .pop()
                    .expect("one estimate");
            let alpha = traj.terminal().pair_with(f)?;
            representation_residual(alpha, mean_estimate, &integrand, &path)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut r_stats = RunningStats::default();
    let mut sum_sq = 0.0;
    for &r in &residuals {
        r_stats.push(r);
        sum_sq += r * r;
    }
    Ok(RepresentationReport {
        f,
        m_outer,
        m_mean,
        n_inner,
        n_steps: grid.n_steps(),
        mean_residual: r_stats.mean(),
        stderr_mean_residual: r_stats.stderr(),
        rms_residual: (sum_sq / m_outer as f64).sqrt(),
        mean_estimate,
        stderr_mean_estimate: mean_stats.stderr(),
        residuals,
    })
}
