//! Seed ensembles, test-function statistics, weak distances, closed-form
//! reference moments and scaling fits.

mod bootstrap;
mod ensemble;
mod fit;
mod oracles;
mod testfn;

pub use bootstrap::{cover, quantile, Bootstrap, DEFAULT_RESAMPLES, DEFAULT_SEED};
pub use ensemble::{
    paired_differences, run_ensemble, weak_distance, CellSummary, Experiment, Method, MomentumInit, Pairing, SampleMatrix, WeakDistance,
};
pub use fit::{fit_scaling_exponent, ScalingFit};
pub use oracles::{
    descent_decomposition, descent_monte_carlo, telescoping_probe, DescentTerms, MonteCarloMean, TelescopingProbe,
    WarmupEstimate, WarmupMoments, WarmupOracle,
};
pub use testfn::TestFunction;
