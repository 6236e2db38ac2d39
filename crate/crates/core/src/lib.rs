//! Weighted particle flows driven by one shared Wiener process, their
//! stochastic derivatives, and martingale-representation estimators.

pub mod brownian;
pub mod clark;
pub mod coefficients;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod flow;
pub mod grid;
pub mod malliavin;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod testfn;

pub use brownian::BrownianPath;
pub use clark::{
    clark_integrand_multi, clark_integrand_path, inner_conditional_estimate,
    inner_conditional_multi, representation_residual, terminal_pairing, verify_representation,
    ClarkIntegrandEstimate, RepresentationReport,
};
pub use coefficients::{CoefficientSet, DiffusionFamily, DriftFamily};
pub use density::{
    integrand_density, integrand_density_with_pairing, pairing_consistency, BandwidthPolicy,
    IntegrandDensityEstimate, PairingCheck,
};
pub use ensemble::{EnsembleState, InitialDistribution};
pub use error::{Error, Result};
pub use flow::{
    euler_solve, linear_attraction_closed_form, mean_field_drift, picard_solve, FlowTrajectory,
};
pub use grid::TimeGrid;
pub use malliavin::{
    directional_derivative, directional_sweep, fd_directional_check, moment_estimate,
    variational_solve, variational_solve_from, MalliavinField, MomentEstimate,
};
pub use oracle::{
    delta_representation_residual, exact_integrand, heat_kernel, heat_kernel_dv, mean_pairing,
    semigroup_prime, verify_example, ExampleSummary, GaussHermite,
};
pub use rng::{stream_key, StreamRole, SubstreamRng};
pub use scenario::{load_scenario, parse_scenario, Knobs, Scenario};
pub use testfn::TestFunction;
