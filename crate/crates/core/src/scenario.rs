//! Scenario configs: one JSON file describes coefficients, the initial
//! measure, the time grid, test functions, the base seed, and experiment
//! knobs. Loading validates everything up front and reports violations with
//! their field path; recoverable oddities (weight normalization, a
//! non-power-of-two step count) come back as warnings instead of errors.

use crate::coefficients::{drift_from_config, diffusion_from_config, CoefficientSet};
use crate::density::BandwidthPolicy;
use crate::ensemble::{EnsembleState, InitialDistribution};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Tunable experiment sizes, every one individually defaultable.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    /// outer paths for representation verification
    pub m_outer: usize,
    /// independent paths for the terminal-mean batch
    pub m_mean: usize,
    /// inner continuations per conditional expectation
    pub n_inner: usize,
    /// Gauss-Hermite nodes for the analytic smoothing oracle
    pub n_nodes: usize,
    /// paths for plain Monte Carlo sweeps (oracle example, moments)
    pub m_paths: usize,
    /// contraction sweeps beyond the first for the iterative solver
    pub picard_iters: usize,
    pub bandwidth: BandwidthPolicy,
    /// evaluation points of the density estimate
    pub density_grid_points: usize,
    /// grid time at which density / integrand probes run
    pub t_probe: f64,
    /// step size for finite-difference derivative checks
    pub fd_epsilon: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            m_outer: 200,
            m_mean: 2000,
            n_inner: 256,
            n_nodes: 40,
            m_paths: 1000,
            picard_iters: 8,
            bandwidth: BandwidthPolicy::Silverman,
            density_grid_points: 512,
            t_probe: 0.5,
            fd_epsilon: 1e-4,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySection {
    family: String,
    #[serde(default)]
    params: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientsSection {
    drift: FamilySection,
    diffusion: FamilySection,
    #[serde(default)]
    bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Mu0Section {
    #[serde(default)]
    distribution: Option<String>,
    #[serde(default)]
    params: Option<Vec<f64>>,
    #[serde(default)]
    n_particles: Option<usize>,
    #[serde(default)]
    atoms: Option<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default = "default_t_end")]
    t_end: f64,
    n_steps: usize,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_test_functions() -> Vec<String> {
    vec!["v".into(), "v2".into(), "sin".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    coefficients: CoefficientsSection,
    mu0: Mu0Section,
    grid: GridSection,
    #[serde(default = "default_test_functions")]
    test_functions: Vec<String>,
    base_seed: u64,
    #[serde(default)]
    knobs: Knobs,
}

/// A fully validated experiment description.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub coefficients: CoefficientSet,
    pub initial: EnsembleState,
    pub grid: TimeGrid,
    pub test_functions: Vec<TestFunction>,
    pub base_seed: u64,
    pub knobs: Knobs,
    warnings: Vec<String>,
    hash: String,
}

impl Scenario {
    /// Non-fatal findings from validation, for the caller to surface.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// SHA-256 of the config file bytes; identifies the scenario in manifests.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Replace the seed (environment override); the hash still names the
    /// file, so manifests record the effective seed separately.
    pub fn with_base_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }
}

fn field_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn build_initial(mu0: &Mu0Section, warnings: &mut Vec<String>) -> Result<EnsembleState> {
    match (&mu0.atoms, &mu0.distribution) {
        (Some(atoms), None) => {
            if mu0.params.is_some() || mu0.n_particles.is_some() {
                return Err(field_err(
                    "mu0",
                    "explicit atoms take no distribution params or particle count",
                ));
            }
            let weights = mu0
                .weights
                .clone()
                .ok_or_else(|| field_err("mu0.weights", "required alongside explicit atoms"))?;
            if weights.len() != atoms.len() {
                return Err(field_err(
                    "mu0.weights",
                    format_args!("{} weights for {} atoms", weights.len(), atoms.len()),
                ));
            }
            let total: f64 = weights.iter().sum();
            if !total.is_finite() || total <= 0.0 {
                return Err(field_err(
                    "mu0.weights",
                    format_args!("sum {total} cannot be normalized"),
                ));
            }
            if (total - 1.0).abs() > 1e-12 {
                warnings.push(format!("mu0.weights: normalized (sum was {total})"));
            }
            EnsembleState::new(atoms.clone(), weights)
                .map_err(|e| field_err("mu0", e))
        }
        (None, Some(name)) => {
            if mu0.weights.is_some() {
                return Err(field_err(
                    "mu0.weights",
                    "named distributions carry their own weights",
                ));
            }
            let params = mu0.params.clone().unwrap_or_default();
            let dist = InitialDistribution::from_config(name, &params)
                .map_err(|e| field_err("mu0.distribution", e))?;
            if let InitialDistribution::Delta { at } = dist {
                if mu0.n_particles.unwrap_or(1) != 1 {
                    return Err(field_err("mu0.n_particles", "a point mass has one particle"));
                }
                return Ok(EnsembleState::delta(at));
            }
            let n = mu0
                .n_particles
                .ok_or_else(|| field_err("mu0.n_particles", "required for a named distribution"))?;
            EnsembleState::from_quantiles(dist, n).map_err(|e| field_err("mu0", e))
        }
        (Some(_), Some(_)) => Err(field_err(
            "mu0",
            "give either explicit atoms or a named distribution, not both",
        )),
        (None, None) => Err(field_err(
            "mu0",
            "give either explicit atoms or a named distribution",
        )),
    }
}

fn validate(raw: ScenarioFile, hash: String) -> Result<Scenario> {
    let mut warnings = Vec::new();

    let drift = drift_from_config(&raw.coefficients.drift.family, &raw.coefficients.drift.params)
        .map_err(|e| field_err("coefficients.drift", e))?;
    let diffusion = diffusion_from_config(
        &raw.coefficients.diffusion.family,
        &raw.coefficients.diffusion.params,
    )
    .map_err(|e| field_err("coefficients.diffusion", e))?;
    let mut coefficients =
        CoefficientSet::new(drift, diffusion).map_err(|e| field_err("coefficients", e))?;
    if let Some(bound) = raw.coefficients.bound {
        coefficients = coefficients
            .with_bound(bound)
            .map_err(|e| field_err("coefficients.bound", e))?;
    }

    let initial = build_initial(&raw.mu0, &mut warnings)?;

    if raw.grid.n_steps == 0 {
        return Err(field_err("grid.n_steps", "must be positive"));
    }
    if !raw.grid.n_steps.is_power_of_two() {
        warnings.push(format!(
            "grid.n_steps: {} is not a power of two (recommended for dyadic refinement checks)",
            raw.grid.n_steps
        ));
    }
    let grid =
        TimeGrid::new(0.0, raw.grid.t_end, raw.grid.n_steps).map_err(|e| field_err("grid", e))?;

    if raw.test_functions.is_empty() {
        return Err(field_err("test_functions", "need at least one test function"));
    }
    let mut test_functions = Vec::with_capacity(raw.test_functions.len());
    for (i, name) in raw.test_functions.iter().enumerate() {
        let f = TestFunction::from_name(name)
            .map_err(|e| field_err(&format!("test_functions[{i}]"), e))?;
        test_functions.push(f);
    }

    let k = &raw.knobs;
    for (path, value) in [
        ("knobs.m_outer", k.m_outer),
        ("knobs.m_mean", k.m_mean),
        ("knobs.n_inner", k.n_inner),
        ("knobs.m_paths", k.m_paths),
        ("knobs.picard_iters", k.picard_iters),
    ] {
        if value == 0 {
            return Err(field_err(path, "must be positive"));
        }
    }
    if k.n_nodes < 8 {
        return Err(field_err("knobs.n_nodes", "need at least 8 quadrature nodes"));
    }
    if k.density_grid_points < 2 {
        return Err(field_err("knobs.density_grid_points", "need at least 2 points"));
    }
    if !(k.t_probe >= 0.0 && k.t_probe <= raw.grid.t_end) {
        return Err(field_err("knobs.t_probe", "must lie inside the time grid"));
    }
    if grid.index_of(k.t_probe).is_none() {
        return Err(field_err("knobs.t_probe", "must sit on a grid point"));
    }
    if !(k.fd_epsilon.is_finite() && k.fd_epsilon > 0.0) {
        return Err(field_err("knobs.fd_epsilon", "must be positive"));
    }
    if let BandwidthPolicy::Fixed(h) = k.bandwidth {
        if !(h.is_finite() && h > 0.0) {
            return Err(field_err("knobs.bandwidth", "fixed bandwidth must be positive"));
        }
    }

    Ok(Scenario {
        coefficients,
        initial,
        grid,
        test_functions,
        base_seed: raw.base_seed,
        knobs: raw.knobs,
        warnings,
        hash,
    })
}

/// Parse and validate a scenario from JSON text. Structural errors carry the
/// JSON field path.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let hash: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: ScenarioFile = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
    validate(raw, hash)
}

/// Load a scenario config file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::DriftFamily;

    const MINIMAL: &str = r#"{
        "coefficients": {
            "drift": {"family": "zero"},
            "diffusion": {"family": "unit"}
        },
        "mu0": {"distribution": "delta"},
        "grid": {"n_steps": 64},
        "base_seed": 7
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.knobs.n_nodes, 40);
        assert_eq!(s.knobs.bandwidth, BandwidthPolicy::Silverman);
        assert_eq!(s.grid.t_end(), 1.0);
        assert_eq!(s.base_seed, 7);
        assert_eq!(s.initial.n_particles(), 1);
        assert_eq!(
            s.test_functions,
            vec![TestFunction::Identity, TestFunction::Square, TestFunction::Sin]
        );
        assert!(s.warnings().is_empty());
        assert_eq!(s.hash().len(), 64);
    }

    #[test]
    fn weights_normalize_with_warning() {
        let text = r#"{
            "coefficients": {"drift": {"family": "zero"}, "diffusion": {"family": "unit"}},
            "mu0": {"atoms": [-1.0, 1.0], "weights": [2.0, 2.0]},
            "grid": {"n_steps": 32},
            "base_seed": 1
        }"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.initial.weights(), &[0.5, 0.5]);
        assert!(s.warnings().iter().any(|w| w.starts_with("mu0.weights")));
    }

    #[test]
    fn unknown_family_names_the_field() {
        let text = MINIMAL.replace("\"zero\"", "\"quadratic\"");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("coefficients.drift"), "{err}");
        assert!(err.contains("quadratic"), "{err}");
    }

    #[test]
    fn structural_errors_carry_the_json_path() {
        let text = MINIMAL.replace("{\"n_steps\": 64}", "{\"n_steps\": \"many\"}");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("grid.n_steps"), "{err}");
        // unknown knob is a schema violation, not silently ignored
        let text = MINIMAL.replace("\"base_seed\": 7", "\"base_seed\": 7, \"knobs\": {\"m_outre\": 3}");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("m_outre"), "{err}");
    }

    #[test]
    fn power_of_two_is_a_warning_not_an_error() {
        let text = MINIMAL.replace("\"n_steps\": 64", "\"n_steps\": 100");
        let s = parse_scenario(&text).unwrap();
        assert!(s.warnings().iter().any(|w| w.contains("power of two")));
    }

    #[test]
    fn tanh_scenario_round_trip() {
        let text = r#"{
            "coefficients": {
                "drift": {"family": "tanh_kernel", "params": [0.2, 1.0]},
                "diffusion": {"family": "unit"},
                "bound": 0.4
            },
            "mu0": {"distribution": "gaussian", "params": [0.0, 1.0], "n_particles": 4},
            "grid": {"n_steps": 256},
            "test_functions": ["v", "sin", "gauss_bump"],
            "base_seed": 42,
            "knobs": {"m_outer": 500, "n_inner": 256, "bandwidth": {"fixed": 0.25}}
        }"#;
        let s = parse_scenario(text).unwrap();
        assert!(matches!(s.coefficients.drift(), DriftFamily::TanhKernel { .. }));
        assert_eq!(s.initial.n_particles(), 4);
        assert_eq!(s.knobs.m_outer, 500);
        assert_eq!(s.knobs.m_mean, 2000);
        assert_eq!(s.knobs.bandwidth, BandwidthPolicy::Fixed(0.25));
        assert!(s.coefficients.conforming());
    }

    #[test]
    fn mu0_shape_conflicts_are_rejected() {
        let text = r#"{
            "coefficients": {"drift": {"family": "zero"}, "diffusion": {"family": "unit"}},
            "mu0": {"distribution": "uniform", "atoms": [0.0], "weights": [1.0]},
            "grid": {"n_steps": 16},
            "base_seed": 1
        }"#;
        assert!(parse_scenario(text).unwrap_err().to_string().contains("mu0"));
        let text = r#"{
            "coefficients": {"drift": {"family": "zero"}, "diffusion": {"family": "unit"}},
            "mu0": {"distribution": "uniform"},
            "grid": {"n_steps": 16},
            "base_seed": 1
        }"#;
        assert!(parse_scenario(text)
            .unwrap_err()
            .to_string()
            .contains("mu0.n_particles"));
    }

    #[test]
    fn zero_weight_sum_is_not_normalizable() {
        let text = r#"{
            "coefficients": {"drift": {"family": "zero"}, "diffusion": {"family": "unit"}},
            "mu0": {"atoms": [-1.0, 1.0], "weights": [0.0, 0.0]},
            "grid": {"n_steps": 16},
            "base_seed": 1
        }"#;
        let err = parse_scenario(text).unwrap_err().to_string();
        assert!(err.contains("mu0.weights"), "{err}");
    }

    #[test]
    fn seed_override_keeps_hash() {
        let a = parse_scenario(MINIMAL).unwrap();
        let hash = a.hash().to_string();
        let b = a.with_base_seed(99);
        assert_eq!(b.base_seed, 99);
        assert_eq!(b.hash(), hash);
    }

    #[test]
    fn t_probe_must_sit_on_grid() {
        let text = MINIMAL.replace(
            "\"base_seed\": 7",
            "\"base_seed\": 7, \"knobs\": {\"t_probe\": 0.3}",
        );
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("t_probe"), "{err}");
    }
}
