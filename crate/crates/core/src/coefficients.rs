//! Interaction drift kernels `a(x, y)` and diffusion fields `b(x)`.
//!
//! The drift of a particle at `x` against the initial measure is
//! `sum_j w_j a(x, x_j)`; the diffusion multiplies one Wiener increment shared
//! by every particle. Families are closed under the derivative queries the
//! variational recursion needs: `d1 a = da/dx`, `d2 a = da/dy`, `b'`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Drift kernel families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DriftFamily {
    /// `a = 0`.
    Zero,
    /// `a = c`.
    Constant(f64),
    /// `a = kappa (y - x)`: attraction toward every other particle.
    /// Unbounded — kept as a closed-form reference family, flagged
    /// non-conforming by [`CoefficientSet::conforming`].
    LinearAttraction(f64),
    /// `a = alpha tanh(gamma (y - x))`: bounded attraction with bounded
    /// derivatives of all orders.
    TanhKernel { alpha: f64, gamma: f64 },
}

/// Diffusion field families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DiffusionFamily {
    /// `b = 1`.
    Unit,
    /// `b = base + amp sin(x)` with `base > |amp|`, hence `b` bounded away
    /// from zero and `b'` bounded.
    SinBounded { base: f64, amp: f64 },
}

/// A validated `(a, b)` pair together with the uniform bound
/// `C >= max(|a|, |d1 a|, |d2 a|, |b|, |b'|)` where one exists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientSet {
    drift: DriftFamily,
    diffusion: DiffusionFamily,
    bound: f64,
}

impl CoefficientSet {
    pub fn new(drift: DriftFamily, diffusion: DiffusionFamily) -> Result<Self> {
        match drift {
            DriftFamily::Constant(c) if !c.is_finite() => {
                return Err(Error::Config("constant drift must be finite".into()))
            }
            DriftFamily::LinearAttraction(k) if !k.is_finite() => {
                return Err(Error::Config("attraction rate must be finite".into()))
            }
            DriftFamily::TanhKernel { alpha, gamma }
                if !alpha.is_finite() || !gamma.is_finite() =>
            {
                return Err(Error::Config("tanh kernel parameters must be finite".into()))
            }
            _ => {}
        }
        if let DiffusionFamily::SinBounded { base, amp } = diffusion {
            if !base.is_finite() || !amp.is_finite() {
                return Err(Error::Config("sin diffusion parameters must be finite".into()));
            }
            if base <= amp.abs() {
                return Err(Error::Config(format!(
                    "sin diffusion requires base > |amp|, got base {base}, amp {amp}"
                )));
            }
        }
        let drift_bound = match drift {
            DriftFamily::Zero => 0.0,
            DriftFamily::Constant(c) => c.abs(),
            DriftFamily::LinearAttraction(_) => f64::INFINITY,
            DriftFamily::TanhKernel { alpha, gamma } => {
                alpha.abs().max((alpha * gamma).abs())
            }
        };
        let diffusion_bound = match diffusion {
            DiffusionFamily::Unit => 1.0,
            DiffusionFamily::SinBounded { base, amp } => base + amp.abs(),
        };
        Ok(CoefficientSet {
            drift,
            diffusion,
            bound: drift_bound.max(diffusion_bound),
        })
    }

    /// Replace the recorded bound (for scenarios that pin their own `C`).
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(Error::Config("coefficient bound must be >= 0".into()));
        }
        self.bound = bound;
        Ok(self)
    }

    #[inline]
    pub fn drift(&self) -> DriftFamily {
        self.drift
    }

    #[inline]
    pub fn diffusion_family(&self) -> DiffusionFamily {
        self.diffusion
    }

    /// Recorded uniform bound `C` (`inf` for the non-conforming family).
    /// Informational only; nothing gates on it.
    #[inline]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Whether the pair satisfies the boundedness assumptions
    /// (false exactly for `linear_attraction`).
    #[inline]
    pub fn conforming(&self) -> bool {
        !matches!(self.drift, DriftFamily::LinearAttraction(_))
    }

    /// `a(x, y)`.
    #[inline]
    pub fn drift_kernel(&self, x: f64, y: f64) -> f64 {
        match self.drift {
            DriftFamily::Zero => 0.0,
            DriftFamily::Constant(c) => c,
            DriftFamily::LinearAttraction(k) => k * (y - x),
            DriftFamily::TanhKernel { alpha, gamma } => alpha * (gamma * (y - x)).tanh(),
        }
    }

    /// `(da/dx, da/dy)` at `(x, y)`.
    #[inline]
    pub fn drift_partials(&self, x: f64, y: f64) -> (f64, f64) {
        match self.drift {
            DriftFamily::Zero | DriftFamily::Constant(_) => (0.0, 0.0),
            DriftFamily::LinearAttraction(k) => (-k, k),
            DriftFamily::TanhKernel { alpha, gamma } => {
                let th = (gamma * (y - x)).tanh();
                let s = alpha * gamma * (1.0 - th * th);
                (-s, s)
            }
        }
    }

    /// `b(x)`.
    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        match self.diffusion {
            DiffusionFamily::Unit => 1.0,
            DiffusionFamily::SinBounded { base, amp } => base + amp * x.sin(),
        }
    }

    /// `b'(x)`.
    #[inline]
    pub fn diffusion_prime(&self, x: f64) -> f64 {
        match self.diffusion {
            DiffusionFamily::Unit => 0.0,
            DiffusionFamily::SinBounded { amp, .. } => amp * x.cos(),
        }
    }

    /// True when `b' == 0`, letting hot loops skip the stochastic term of the
    /// derivative recursion.
    #[inline]
    pub fn diffusion_is_constant(&self) -> bool {
        matches!(self.diffusion, DiffusionFamily::Unit)
    }
}

/// Max relative gap between analytic partials and central finite differences
/// over the supplied points: `|analytic - fd| / (1 + |analytic|)`, taken over
/// `d1 a`, `d2 a` and `b'`.
pub fn derivative_consistency_check(cs: &CoefficientSet, points: &[(f64, f64)], eps: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let rel = |analytic: f64, fd: f64| (analytic - fd).abs() / (1.0 + analytic.abs());
    for &(x, y) in points {
        let (d1, d2) = cs.drift_partials(x, y);
        let fd1 = (cs.drift_kernel(x + eps, y) - cs.drift_kernel(x - eps, y)) / (2.0 * eps);
        let fd2 = (cs.drift_kernel(x, y + eps) - cs.drift_kernel(x, y - eps)) / (2.0 * eps);
        let db = cs.diffusion_prime(x);
        let fdb = (cs.diffusion(x + eps) - cs.diffusion(x - eps)) / (2.0 * eps);
        worst = worst.max(rel(d1, fd1)).max(rel(d2, fd2)).max(rel(db, fdb));
    }
    worst
}

/// Parse a `(family, params)` pair as found in scenario files.
pub fn drift_from_config(family: &str, params: &[f64]) -> Result<DriftFamily> {
    let need = |n: usize| -> Result<()> {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "drift family `{family}` takes {n} parameter(s), got {}",
                params.len()
            )))
        }
    };
    match family {
        "zero" => {
            need(0)?;
            Ok(DriftFamily::Zero)
        }
        "constant" => {
            need(1)?;
            Ok(DriftFamily::Constant(params[0]))
        }
        "linear_attraction" => {
            need(1)?;
            Ok(DriftFamily::LinearAttraction(params[0]))
        }
        "tanh_kernel" => {
            need(2)?;
            Ok(DriftFamily::TanhKernel {
                alpha: params[0],
                gamma: params[1],
            })
        }
        other => Err(Error::Config(format!("unknown drift family `{other}`"))),
    }
}

/// Parse a `(family, params)` pair as found in scenario files.
pub fn diffusion_from_config(family: &str, params: &[f64]) -> Result<DiffusionFamily> {
    match family {
        "unit" => {
            if !params.is_empty() {
                return Err(Error::Config(format!(
                    "diffusion family `unit` takes 0 parameters, got {}",
                    params.len()
                )));
            }
            Ok(DiffusionFamily::Unit)
        }
        "sin_bounded" => {
            if params.len() != 2 {
                return Err(Error::Config(format!(
                    "diffusion family `sin_bounded` takes 2 parameters, got {}",
                    params.len()
                )));
            }
            Ok(DiffusionFamily::SinBounded {
                base: params[0],
                amp: params[1],
            })
        }
        other => Err(Error::Config(format!("unknown diffusion family `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tanh02() -> CoefficientSet {
        CoefficientSet::new(
            DriftFamily::TanhKernel {
                alpha: 0.2,
                gamma: 1.0,
            },
            DiffusionFamily::Unit,
        )
        .unwrap()
    }

    /// Bisection inverse of tanh, independent of the library code.
    fn atanh_by_bisection(target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 5.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.tanh() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn tanh_kernel_values() {
        let cs = tanh02();
        // a(0, y*) = 0.1 where tanh(y*) = 0.5, y* from an independent root solve
        let y_star = atanh_by_bisection(0.5);
        assert_abs_diff_eq!(y_star, 0.549306, epsilon = 1e-6);
        assert_abs_diff_eq!(cs.drift_kernel(0.0, y_star), 0.1, epsilon = 1e-12);
        // partials at the diagonal: sech^2(0) = 1
        let (d1, d2) = cs.drift_partials(0.0, 0.0);
        assert_abs_diff_eq!(d1, -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d2, 0.2, epsilon = 1e-15);
        // antisymmetry a(x,y) = -a(y,x)
        assert_abs_diff_eq!(
            cs.drift_kernel(0.3, -0.7),
            -cs.drift_kernel(-0.7, 0.3),
            epsilon = 1e-15
        );
    }

    /// Taylor-series sine/cosine, independent of std.
    fn sin_series(x: f64) -> f64 {
        let (mut term, mut sum) = (x, x);
        for n in 1..25 {
            term *= -x * x / ((2 * n) as f64 * (2 * n + 1) as f64);
            sum += term;
        }
        sum
    }
    fn cos_series(x: f64) -> f64 {
        let (mut term, mut sum) = (1.0, 1.0);
        for n in 1..25 {
            term *= -x * x / ((2 * n - 1) as f64 * (2 * n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn sin_diffusion_values() {
        let cs = CoefficientSet::new(
            DriftFamily::Zero,
            DiffusionFamily::SinBounded { base: 2.0, amp: 1.0 },
        )
        .unwrap();
        let x = std::f64::consts::FRAC_PI_2;
        assert_abs_diff_eq!(cs.diffusion(x), 2.0 + sin_series(x), epsilon = 1e-12);
        assert_abs_diff_eq!(cs.diffusion(x), 3.0, epsilon = 1e-12);
        assert!(cs.diffusion_prime(x).abs() <= 1e-10);
        assert_abs_diff_eq!(cs.diffusion_prime(0.7), cos_series(0.7), epsilon = 1e-12);
    }

    #[test]
    fn sin_diffusion_requires_dominant_base() {
        assert!(CoefficientSet::new(
            DriftFamily::Zero,
            DiffusionFamily::SinBounded { base: 1.0, amp: 1.0 }
        )
        .is_err());
        assert!(CoefficientSet::new(
            DriftFamily::Zero,
            DiffusionFamily::SinBounded { base: 0.5, amp: -1.0 }
        )
        .is_err());
    }

    #[test]
    fn bounds_and_conformity() {
        let cs = tanh02();
        assert!(cs.conforming());
        assert_abs_diff_eq!(cs.bound(), 1.0, epsilon = 0.0); // unit diffusion dominates 0.2
        let cs = CoefficientSet::new(
            DriftFamily::TanhKernel {
                alpha: 0.2,
                gamma: 10.0,
            },
            DiffusionFamily::Unit,
        )
        .unwrap();
        assert_abs_diff_eq!(cs.bound(), 2.0, epsilon = 1e-15); // alpha*gamma
        let lin = CoefficientSet::new(DriftFamily::LinearAttraction(1.0), DiffusionFamily::Unit)
            .unwrap();
        assert!(!lin.conforming());
        assert!(lin.bound().is_infinite());
    }

    #[test]
    fn fd_consistency_all_families() {
        let points: Vec<(f64, f64)> = vec![
            (0.0, 0.0),
            (0.5, -0.25),
            (-1.0, 2.0),
            (3.0, -3.0),
            (0.1, 0.2),
        ];
        for drift in [
            DriftFamily::Zero,
            DriftFamily::Constant(0.7),
            DriftFamily::LinearAttraction(1.3),
            DriftFamily::TanhKernel {
                alpha: 0.2,
                gamma: 1.0,
            },
        ] {
            for diffusion in [
                DiffusionFamily::Unit,
                DiffusionFamily::SinBounded { base: 2.0, amp: 1.0 },
            ] {
                let cs = CoefficientSet::new(drift, diffusion).unwrap();
                let worst = derivative_consistency_check(&cs, &points, 1e-6);
                assert!(worst <= 1e-6, "{drift:?}/{diffusion:?}: {worst:.3e}");
            }
        }
    }

    #[test]
    fn config_parsing() {
        assert!(matches!(
            drift_from_config("tanh_kernel", &[0.2, 1.0]),
            Ok(DriftFamily::TanhKernel { .. })
        ));
        assert!(drift_from_config("tanh_kernel", &[0.2]).is_err());
        assert!(drift_from_config("warp", &[]).is_err());
        assert!(matches!(
            diffusion_from_config("unit", &[]),
            Ok(DiffusionFamily::Unit)
        ));
        assert!(diffusion_from_config("unit", &[1.0]).is_err());
        assert!(diffusion_from_config("sin_bounded", &[2.0]).is_err());
    }
}
