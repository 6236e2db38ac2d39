//! Test functions paired against the terminal measure, with derivatives.
//!
//! The set is small and closed: every member has a closed-form Gaussian
//! smoothing, which is what makes the analytic benchmarks exact.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `1`
    One,
    /// `v`
    Identity,
    /// `v^2`
    Square,
    /// `sin v`
    Sin,
    /// `cos v`
    Cos,
    /// `exp(-v^2/2)`
    GaussBump,
}

impl TestFunction {
    pub const ALL: [TestFunction; 6] = [
        TestFunction::One,
        TestFunction::Identity,
        TestFunction::Square,
        TestFunction::Sin,
        TestFunction::Cos,
        TestFunction::GaussBump,
    ];

    #[inline]
    pub fn eval(self, v: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => v,
            TestFunction::Square => v * v,
            TestFunction::Sin => v.sin(),
            TestFunction::Cos => v.cos(),
            TestFunction::GaussBump => (-0.5 * v * v).exp(),
        }
    }

    #[inline]
    pub fn deriv(self, v: f64) -> f64 {
        match self {
            TestFunction::One => 0.0,
            TestFunction::Identity => 1.0,
            TestFunction::Square => 2.0 * v,
            TestFunction::Sin => v.cos(),
            TestFunction::Cos => -v.sin(),
            TestFunction::GaussBump => -v * (-0.5 * v * v).exp(),
        }
    }

    /// Stable name used in configs and CSV column headers.
    pub fn name(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Identity => "v",
            TestFunction::Square => "v2",
            TestFunction::Sin => "sin",
            TestFunction::Cos => "cos",
            TestFunction::GaussBump => "gauss_bump",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "one" => Ok(TestFunction::One),
            "v" => Ok(TestFunction::Identity),
            "v2" => Ok(TestFunction::Square),
            "sin" => Ok(TestFunction::Sin),
            "cos" => Ok(TestFunction::Cos),
            "gauss_bump" => Ok(TestFunction::GaussBump),
            other => Err(Error::Config(format!(
                "unknown test function `{other}` (expected one of one, v, v2, sin, cos, gauss_bump)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derivative_matches_central_difference() {
        let eps = 1e-6;
        for f in TestFunction::ALL {
            for &v in &[-2.3, -0.5, 0.0, 0.7, 1.9] {
                let fd = (f.eval(v + eps) - f.eval(v - eps)) / (2.0 * eps);
                assert_abs_diff_eq!(f.deriv(v), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn name_round_trip() {
        for f in TestFunction::ALL {
            assert_eq!(TestFunction::from_name(f.name()).unwrap(), f);
        }
        assert!(TestFunction::from_name("tan").is_err());
    }

    #[test]
    fn point_values() {
        assert_abs_diff_eq!(TestFunction::GaussBump.eval(0.0), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(TestFunction::GaussBump.deriv(0.0), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(TestFunction::Square.eval(-3.0), 9.0, epsilon = 0.0);
        assert_abs_diff_eq!(TestFunction::Sin.deriv(0.0), 1.0, epsilon = 0.0);
    }
}
