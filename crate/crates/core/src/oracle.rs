//! Analytic benchmark: the martingale representation of the point mass at
//! W(1) via heat kernels.
//!
//! For f paired against delta_{W(1)}, the representation integrand is
//! xi(t) = (P_{1-t} f')(W(t)) — the Gaussian smoothing of f' of variance
//! 1 - t, evaluated at the running Brownian value. Everything here is exact
//! up to quadrature, which makes it the end-to-end reference the nested
//! Monte Carlo estimators are judged against.

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::StreamRole;
use crate::testfn::TestFunction;
use nalgebra::DMatrix;

/// Gaussian heat kernel `p_t(u) = (2 pi t)^{-1/2} exp(-u^2 / (2t))`.
pub fn heat_kernel(t: f64, u: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok((2.0 * std::f64::consts::PI * t).powf(-0.5) * (-u * u / (2.0 * t)).exp())
}

/// Spatial derivative `p_t'(u) = -(u/t) p_t(u)`.
pub fn heat_kernel_dv(t: f64, u: f64) -> Result<f64> {
    Ok(-(u / t) * heat_kernel(t, u)?)
}

/// Gauss–Hermite rule for weight `exp(-z^2)`: nodes and weights from the
/// eigendecomposition of the Jacobi matrix (off-diagonal `sqrt(k/2)`).
#[derive(Clone, Debug)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_NODES: usize = 40;

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("quadrature needs >= 2 nodes".into()));
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let v = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = v;
            jacobi[(k, k - 1)] = v;
        }
        let eig = jacobi.symmetric_eigen();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let w = sqrt_pi * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E g(Z)` for `Z ~ Normal(0, var)`: substitute `v = sqrt(2 var) z`.
    pub fn integrate_gaussian(&self, var: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let scale = (2.0 * var).sqrt();
        let mut acc = 0.0;
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(scale * z);
        }
        acc / std::f64::consts::PI.sqrt()
    }
}

fn check_interior_time(t: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!(
            "integrand time must lie in [0, 1), got {t}"
        )));
    }
    Ok(())
}

/// `(P_{1-t} f')(x) = ∫ f'(x + v) p_{1-t}(v) dv` by quadrature.
pub fn semigroup_prime(f: TestFunction, t: f64, x: f64, n_nodes: usize) -> Result<f64> {
    check_interior_time(t)?;
    if n_nodes < 8 {
        return Err(Error::Config("semigroup smoothing needs >= 8 nodes".into()));
    }
    let gh = GaussHermite::new(n_nodes)?;
    Ok(gh.integrate_gaussian(1.0 - t, |v| f.deriv(x + v)))
}

/// The representation integrand at default quadrature resolution.
pub fn exact_integrand(f: TestFunction, t: f64, x: f64) -> Result<f64> {
    semigroup_prime(f, t, x, DEFAULT_NODES)
}

/// `E f(W(1)) = ∫ f(u) p_1(u) du` by quadrature.
pub fn mean_pairing(f: TestFunction, n_nodes: usize) -> Result<f64> {
    let gh = GaussHermite::new(n_nodes)?;
    Ok(gh.integrate_gaussian(1.0, |v| f.eval(v)))
}

fn check_unit_interval(grid: &TimeGrid) -> Result<()> {
    if grid.t_start().abs() > 1e-12 || (grid.t_end() - 1.0).abs() > 1e-12 {
        return Err(Error::GridMismatch(
            "the point-mass benchmark lives on [0, 1]".into(),
        ));
    }
    Ok(())
}

/// Pathwise representation residual
/// `r = f(W(1)) - E f(W(1)) - sum_k xi(t_k) dW_k` (left-point stochastic sum,
/// so the integrand is never queried at t = 1).
pub fn delta_representation_residual(
    f: TestFunction,
    path: &BrownianPath,
    n_nodes: usize,
) -> Result<f64> {
    let grid = path.grid();
    check_unit_interval(&grid)?;
    let gh = GaussHermite::new(n_nodes.max(8))?;
    let mut ito = 0.0;
    for k in 0..grid.n_steps() {
        let t = grid.time(k);
        let x = path.value(k);
        let xi = gh.integrate_gaussian(1.0 - t, |v| f.deriv(x + v));
        ito += xi * path.increment(k);
    }
    let w1 = path.terminal();
    Ok(f.eval(w1) - mean_pairing(f, gh.len())? - ito)
}

/// Residual statistics over seeded paths, plus the integration-by-parts
/// cross-check `∫ f'(x+v) p_s(v) dv  vs  -∫ f(x+v) p_s'(v) dv` over a fixed
/// 16-point (t, x) panel.
#[derive(Clone, Copy, Debug)]
pub struct ExampleSummary {
    pub f: TestFunction,
    pub n_steps: usize,
    pub m_paths: usize,
    pub mean_residual: f64,
    /// standard error of the mean residual
    pub stderr: f64,
    pub rms_residual: f64,
    /// max abs difference between the two smoothing forms
    pub ibp_check: f64,
}

/// Both quadrature forms of the smoothed integrand; their agreement is the
/// integration-by-parts step made testable.
pub fn smoothing_forms(f: TestFunction, t: f64, x: f64, gh: &GaussHermite) -> Result<(f64, f64)> {
    check_interior_time(t)?;
    let s = 1.0 - t;
    let direct = gh.integrate_gaussian(s, |v| f.deriv(x + v));
    // -∫ f(x+v) p_s'(v) dv = ∫ f(x+v) (v/s) p_s(v) dv
    let by_parts = gh.integrate_gaussian(s, |v| f.eval(x + v) * v / s);
    Ok((direct, by_parts))
}

pub fn verify_example(
    f: TestFunction,
    grid: TimeGrid,
    m_paths: usize,
    base_seed: u64,
    n_nodes: usize,
) -> Result<ExampleSummary> {
    if m_paths < 100 {
        return Err(Error::Config("example verification needs >= 100 paths".into()));
    }
    check_unit_interval(&grid)?;
    let gh = GaussHermite::new(n_nodes.max(8))?;
    let (mut s1, mut s2) = (0.0, 0.0);
    for j in 0..m_paths {
        let path = BrownianPath::sample(grid, base_seed, StreamRole::Path, j as u64, 0, 0);
        let r = delta_representation_residual(f, &path, gh.len())?;
        s1 += r;
        s2 += r * r;
    }
    let m = m_paths as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    let mut ibp: f64 = 0.0;
    for t in [0.0, 0.25, 0.5, 0.75] {
        for x in [-1.0, -0.3, 0.4, 1.2] {
            let (a, b) = smoothing_forms(f, t, x, &gh)?;
            ibp = ibp.max((a - b).abs());
        }
    }
    Ok(ExampleSummary {
        f,
        n_steps: grid.n_steps(),
        m_paths,
        mean_residual: mean,
        stderr: (var / m).sqrt(),
        rms_residual: (s2 / m).sqrt(),
        ibp_check: ibp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heat_kernel_point_values() {
        assert_abs_diff_eq!(
            heat_kernel(1.0, 0.0).unwrap(),
            (2.0 * std::f64::consts::PI).powf(-0.5),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            heat_kernel(0.5, 1.0).unwrap(),
            std::f64::consts::PI.powf(-0.5) * (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_eq!(heat_kernel_dv(1.0, 0.0).unwrap(), 0.0);
        assert!(heat_kernel(0.0, 1.0).is_err());
        assert!(heat_kernel(-1.0, 1.0).is_err());
    }

    #[test]
    fn heat_kernel_derivative_matches_fd() {
        let eps = 1e-6;
        for &t in &[0.25, 0.5, 1.0] {
            for &u in &[-1.5, -0.2, 0.0, 0.8, 2.0] {
                let fd = (heat_kernel(t, u + eps).unwrap() - heat_kernel(t, u - eps).unwrap())
                    / (2.0 * eps);
                assert_abs_diff_eq!(heat_kernel_dv(t, u).unwrap(), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn quadrature_normalizes_the_density() {
        for n in [8, 16, 40, 64] {
            let gh = GaussHermite::new(n).unwrap();
            for &t in &[0.1, 0.5, 1.0] {
                // ∫ p_t(v) dv via the same substitution the smoothing uses
                let total = gh.integrate_gaussian(t, |_| 1.0);
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_node_rule_is_exact_for_quadratics() {
        let gh = GaussHermite::new(2).unwrap();
        assert_abs_diff_eq!(gh.nodes[0], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.integrate_gaussian(1.0, |v| v * v), 1.0, epsilon = 1e-12);
        assert!(GaussHermite::new(1).is_err());
    }

    #[test]
    fn gaussian_moments() {
        assert_abs_diff_eq!(mean_pairing(TestFunction::Identity, 40).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_pairing(TestFunction::Square, 40).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_pairing(TestFunction::Sin, 40).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            mean_pairing(TestFunction::Cos, 40).unwrap(),
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            mean_pairing(TestFunction::GaussBump, 40).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn smoothing_matches_closed_forms() {
        for &t in &[0.0, 0.3, 0.75, 0.999] {
            let s = 1.0 - t;
            for &x in &[-1.2, 0.0, 0.6, 2.0] {
                assert_abs_diff_eq!(
                    semigroup_prime(TestFunction::Identity, t, x, 40).unwrap(),
                    1.0,
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    semigroup_prime(TestFunction::Square, t, x, 40).unwrap(),
                    2.0 * x,
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    semigroup_prime(TestFunction::Sin, t, x, 40).unwrap(),
                    x.cos() * (-s / 2.0).exp(),
                    epsilon = 1e-10
                );
                assert_abs_diff_eq!(
                    semigroup_prime(TestFunction::Cos, t, x, 40).unwrap(),
                    -x.sin() * (-s / 2.0).exp(),
                    epsilon = 1e-10
                );
                assert_abs_diff_eq!(
                    semigroup_prime(TestFunction::GaussBump, t, x, 40).unwrap(),
                    -x * (1.0 + s).powf(-1.5) * (-x * x / (2.0 * (1.0 + s))).exp(),
                    epsilon = 1e-10
                );
            }
        }
        assert!(semigroup_prime(TestFunction::Sin, 1.0, 0.0, 40).is_err());
        assert!(semigroup_prime(TestFunction::Sin, -0.1, 0.0, 40).is_err());
        assert!(semigroup_prime(TestFunction::Sin, 0.5, 0.0, 4).is_err());
    }

    #[test]
    fn identity_representation_is_exact_pathwise() {
        let grid = TimeGrid::unit(128).unwrap();
        for j in 0..50 {
            let path = BrownianPath::sample(grid, 31, StreamRole::Path, j, 0, 0);
            let r = delta_representation_residual(TestFunction::Identity, &path, 40).unwrap();
            assert!(r.abs() <= 1e-12, "path {j}: residual {r:.3e}");
        }
    }

    #[test]
    fn square_residual_variance_law() {
        // Var r = 2/N_t: factor-2 band at modest M
        let grid = TimeGrid::unit(256).unwrap();
        let summary = verify_example(TestFunction::Square, grid, 2000, 77, 24).unwrap();
        let v = summary.rms_residual * summary.rms_residual;
        assert!(
            (1.0 / 256.0..=4.0 / 256.0).contains(&v),
            "Var {v:.5} outside [{:.5}, {:.5}]",
            1.0 / 256.0,
            4.0 / 256.0
        );
        assert!(summary.mean_residual.abs() <= 3.0 * summary.stderr);
    }

    #[test]
    fn integration_by_parts_cross_check() {
        let gh = GaussHermite::new(40).unwrap();
        for f in TestFunction::ALL {
            for &t in &[0.0, 0.25, 0.5, 0.75] {
                for &x in &[-1.0, -0.3, 0.4, 1.2] {
                    let (a, b) = smoothing_forms(f, t, x, &gh).unwrap();
                    assert!(
                        (a - b).abs() <= 1e-8,
                        "{f:?} t={t} x={x}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn grid_must_cover_unit_interval() {
        let grid = TimeGrid::new(0.0, 0.5, 8).unwrap();
        let path = BrownianPath::sample(grid, 1, StreamRole::Path, 0, 0, 0);
        assert!(matches!(
            delta_representation_residual(TestFunction::Sin, &path, 40),
            Err(Error::GridMismatch(_))
        ));
        assert!(verify_example(TestFunction::Sin, TimeGrid::unit(8).unwrap(), 50, 1, 40).is_err());
    }
}
