//! Stochastic derivatives of the flow: the coupled linear recursion for
//! eta_s(u, t) = D x(u,t)(s), launched at time s with value b(x(u, s)).
//!
//! Per step k >= s:
//!   eta_i += [A_i eta_i + sum_j w_j B_ij eta_j] dt + b'(x_i) eta_i dW_k,
//! with A_i = sum_j w_j d1a(x_i, x_j), B_ij = d2a(x_i, x_j), everything
//! evaluated on the frozen flow trajectory at the left endpoint.

use crate::brownian::BrownianPath;
use crate::coefficients::{CoefficientSet, DriftFamily};
use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::flow::{euler_solve, FlowTrajectory};
use crate::grid::TimeGrid;
use crate::rng::StreamRole;

/// One derivative field: eta_s(u_i, t_k) for all particles and all t_k >= s.
#[derive(Clone, Debug)]
pub struct MalliavinField {
    s_index: usize,
    grid: TimeGrid,
    /// values[k - s_index][i]
    values: Vec<Vec<f64>>,
}

impl MalliavinField {
    #[inline]
    pub fn s_index(&self) -> usize {
        self.s_index
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Per-particle values at grid index `k`; the field does not exist before
    /// its launch time, so `k < s_index` is a domain error (not zero).
    pub fn at(&self, k: usize) -> Result<&[f64]> {
        if k < self.s_index {
            return Err(Error::Domain(format!(
                "derivative field launched at index {} queried at earlier index {k}",
                self.s_index
            )));
        }
        self.values.get(k - self.s_index).map(|v| v.as_slice()).ok_or_else(|| {
            Error::Domain(format!(
                "index {k} beyond grid end {}",
                self.grid.n_steps()
            ))
        })
    }

    /// Values at the last grid time.
    #[inline]
    pub fn terminal(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }
}

/// Fused coupling term `out[i] = A_i eta[i] + sum_j w_j B_ij eta[j]`.
///
/// For every family `d1a = -d2a` pointwise, so the term collapses to
/// `sum_j w_j q(x_i, x_j) (eta_j - eta_i)` with symmetric `q >= 0`; the tanh
/// family costs one tanh per unordered pair. Iteration order is fixed.
pub(crate) fn variational_drift_into(
    cs: &CoefficientSet,
    weights: &[f64],
    positions: &[f64],
    eta: &[f64],
    out: &mut [f64],
) {
    let n = positions.len();
    match cs.drift() {
        DriftFamily::Zero | DriftFamily::Constant(_) => out[..n].fill(0.0),
        DriftFamily::LinearAttraction(k) => {
            let mass: f64 = weights.iter().sum();
            let eta_bar: f64 = weights.iter().zip(eta).map(|(w, e)| w * e).sum();
            for i in 0..n {
                out[i] = k * (eta_bar - mass * eta[i]);
            }
        }
        DriftFamily::TanhKernel { alpha, gamma } => {
            out[..n].fill(0.0);
            let ag = alpha * gamma;
            // diagonal terms cancel pairwise (d1a + d2a = 0), contribute 0
            for i in 0..n {
                let xi = positions[i];
                let ei = eta[i];
                let wi = weights[i];
                for j in (i + 1)..n {
                    let th = (gamma * (positions[j] - xi)).tanh();
                    let q = ag * (1.0 - th * th);
                    let diff = eta[j] - ei;
                    out[i] += weights[j] * q * diff;
                    out[j] -= wi * q * diff;
                }
            }
        }
    }
}

/// Advance `eta` through one grid step against frozen positions.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn variational_step(
    cs: &CoefficientSet,
    weights: &[f64],
    positions: &[f64],
    dt: f64,
    dw: f64,
    eta: &mut [f64],
    scratch: &mut [f64],
    step: usize,
) -> Result<()> {
    variational_drift_into(cs, weights, positions, eta, scratch);
    if cs.diffusion_is_constant() {
        for (i, e) in eta.iter_mut().enumerate() {
            *e += scratch[i] * dt;
            if !e.is_finite() {
                return Err(Error::NonFinite {
                    what: "derivative",
                    step,
                    particle: i,
                });
            }
        }
    } else {
        for (i, e) in eta.iter_mut().enumerate() {
            *e += scratch[i] * dt + cs.diffusion_prime(positions[i]) * *e * dw;
            if !e.is_finite() {
                return Err(Error::NonFinite {
                    what: "derivative",
                    step,
                    particle: i,
                });
            }
        }
    }
    Ok(())
}

fn check_same_grid(traj: &FlowTrajectory, path: &BrownianPath) -> Result<()> {
    if *traj.grid() != path.grid() {
        return Err(Error::GridMismatch(
            "trajectory and driving path use different grids".into(),
        ));
    }
    Ok(())
}

/// Solve the derivative recursion from an arbitrary initial vector at `s`.
/// The recursion is linear in the initial data; this entry point exists for
/// the linearity and propagator-composition checks.
pub fn variational_solve_from(
    cs: &CoefficientSet,
    traj: &FlowTrajectory,
    path: &BrownianPath,
    s_index: usize,
    eta0: &[f64],
) -> Result<MalliavinField> {
    check_same_grid(traj, path)?;
    let grid = *traj.grid();
    let n_steps = grid.n_steps();
    if s_index > n_steps {
        return Err(Error::Domain(format!(
            "launch index {s_index} beyond grid end {n_steps}"
        )));
    }
    let np = traj.state(0).n_particles();
    if eta0.len() != np {
        return Err(Error::GridMismatch(format!(
            "initial vector length {} vs {np} particles",
            eta0.len()
        )));
    }
    let weights = traj.state(0).weights();
    let dt = grid.dt();
    let mut eta = eta0.to_vec();
    let mut scratch = vec![0.0; np];
    let mut values = Vec::with_capacity(n_steps - s_index + 1);
    values.push(eta.clone());
    for k in s_index..n_steps {
        variational_step(
            cs,
            weights,
            traj.state(k).positions(),
            dt,
            path.increment(k),
            &mut eta,
            &mut scratch,
            k + 1,
        )?;
        values.push(eta.clone());
    }
    Ok(MalliavinField {
        s_index,
        grid,
        values,
    })
}

/// Solve the derivative recursion with the prescribed launch value
/// `eta_s(u_i, s) = b(x_i(s))` (stored bit-exactly).
pub fn variational_solve(
    cs: &CoefficientSet,
    traj: &FlowTrajectory,
    path: &BrownianPath,
    s_index: usize,
) -> Result<MalliavinField> {
    if s_index > traj.grid().n_steps() {
        return Err(Error::Domain(format!(
            "launch index {s_index} beyond grid end {}",
            traj.grid().n_steps()
        )));
    }
    let eta0: Vec<f64> = traj
        .state(s_index)
        .positions()
        .iter()
        .map(|&x| cs.diffusion(x))
        .collect();
    variational_solve_from(cs, traj, path, s_index, &eta0)
}

/// Cameron–Martin directional derivative by quadrature over solved fields:
/// `sum_{m < terminal_k} h[m] eta_{t_m}(u_i, t_k) dt`. Fields are looked up
/// by launch index; a missing field under nonzero `h[m]` is a domain error.
pub fn directional_derivative(
    fields: &[MalliavinField],
    h: &[f64],
    particle: usize,
    terminal_k: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    let mut dt = None;
    for (m, &hm) in h.iter().enumerate().take(terminal_k) {
        if hm == 0.0 {
            continue;
        }
        let field = fields
            .iter()
            .find(|f| f.s_index() == m)
            .ok_or_else(|| Error::Domain(format!("no derivative field launched at index {m}")))?;
        match dt {
            None => dt = Some(field.grid().dt()),
            Some(d) if d == field.grid().dt() => {}
            _ => return Err(Error::GridMismatch("fields use different grids".into())),
        }
        let row = field.at(terminal_k)?;
        if particle >= row.len() {
            return Err(Error::Domain(format!("particle {particle} out of range")));
        }
        acc += hm * row[particle];
    }
    Ok(acc * dt.unwrap_or(0.0))
}

/// Terminal directional derivative for every particle in one sweep.
///
/// `z(t) = sum_{t_m <= t} h[m] dt eta_{t_m}(·, t)` obeys the same linear step
/// as each field plus an injection of `h[k] dt b(x(t_k))` at birth, so the
/// whole quadrature costs one pass — no per-launch storage. Agrees with
/// [`directional_derivative`] to rounding.
pub fn directional_sweep(
    cs: &CoefficientSet,
    traj: &FlowTrajectory,
    path: &BrownianPath,
    h: &[f64],
) -> Result<Vec<f64>> {
    check_same_grid(traj, path)?;
    let grid = traj.grid();
    let n_steps = grid.n_steps();
    if h.len() != n_steps {
        return Err(Error::GridMismatch(format!(
            "direction has {} values for {n_steps} steps",
            h.len()
        )));
    }
    let np = traj.state(0).n_particles();
    let weights = traj.state(0).weights();
    let dt = grid.dt();
    let mut z = vec![0.0; np];
    let mut scratch = vec![0.0; np];
    for k in 0..n_steps {
        let positions = traj.state(k).positions();
        if h[k] != 0.0 {
            for (zi, &x) in z.iter_mut().zip(positions) {
                *zi += h[k] * dt * cs.diffusion(x);
            }
        }
        variational_step(
            cs,
            weights,
            positions,
            dt,
            path.increment(k),
            &mut z,
            &mut scratch,
            k + 1,
        )?;
    }
    Ok(z)
}

/// Compare the solved directional derivative against a central finite
/// difference of the terminal flow under the path shift `W ± eps ∫h`.
/// Returns `max_i |dd_i - fd_i| / (1 + |dd_i|)`.
pub fn fd_directional_check(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    path: &BrownianPath,
    h: &[f64],
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Config("finite-difference eps must be > 0".into()));
    }
    let traj = euler_solve(cs, ensemble0, path)?;
    let dd = directional_sweep(cs, &traj, path, h)?;
    let up = euler_solve(cs, ensemble0, &path.shifted(h, eps)?)?;
    let down = euler_solve(cs, ensemble0, &path.shifted(h, -eps)?)?;
    let mut worst: f64 = 0.0;
    for i in 0..ensemble0.n_particles() {
        let fd =
            (up.terminal().positions()[i] - down.terminal().positions()[i]) / (2.0 * eps);
        worst = worst.max((dd[i] - fd).abs() / (1.0 + dd[i].abs()));
    }
    Ok(worst)
}

/// Monte Carlo estimate of `sup_{s <= t, i} E |eta_s(u_i, t)|^p`, with the
/// standard error of the cell attaining the sup.
#[derive(Clone, Copy, Debug)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    /// (s_index, t_index, particle) attaining the sup
    pub arg: (usize, usize, usize),
}

pub fn moment_estimate(
    cs: &CoefficientSet,
    ensemble0: &EnsembleState,
    grid: TimeGrid,
    p: f64,
    m_paths: usize,
    base_seed: u64,
) -> Result<MomentEstimate> {
    if !(p > 0.0) {
        return Err(Error::Config("moment order must be > 0".into()));
    }
    if m_paths < 100 {
        return Err(Error::Config("moment estimate needs >= 100 paths".into()));
    }
    let n = grid.n_steps();
    let np = ensemble0.n_particles();
    // cell (s, t, i) -> flat index; t >= s
    let cells = (n + 1) * (n + 2) / 2 * np;
    let idx = |s: usize, t: usize, i: usize| {
        // row offset for s: sum_{r<s} (n+1-r) = s(n+1) - s(s-1)/2
        (s * (n + 1) - s * s.saturating_sub(1) / 2 + (t - s)) * np + i
    };
    let mut mean = vec![0.0; cells];
    let mut m2 = vec![0.0; cells];
    for j in 0..m_paths {
        let path = BrownianPath::sample(grid, base_seed, StreamRole::Moment, j as u64, 0, 0);
        let traj = euler_solve(cs, ensemble0, &path)?;
        let count = (j + 1) as f64;
        for s in 0..=n {
            let field = variational_solve(cs, &traj, &path, s)?;
            for t in s..=n {
                let row = field.at(t)?;
                for (i, &e) in row.iter().enumerate() {
                    let v = e.abs().powf(p);
                    let c = idx(s, t, i);
                    let d = v - mean[c];
                    mean[c] += d / count;
                    m2[c] += d * (v - mean[c]);
                }
            }
        }
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (c, &m) in mean.iter().enumerate() {
        if m > best.1 {
            best = (c, m);
        }
    }
    let var = m2[best.0] / (m_paths as f64 - 1.0);
    let stderr = (var / m_paths as f64).sqrt();
    // decode flat index back to (s, t, i)
    let (mut s, mut rem) = (0usize, best.0 / np);
    while rem >= n + 1 - s {
        rem -= n + 1 - s;
        s += 1;
    }
    Ok(MomentEstimate {
        value: best.1,
        stderr,
        arg: (s, s + rem, best.0 % np),
    })
}
