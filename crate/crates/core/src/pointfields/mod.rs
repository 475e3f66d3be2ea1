//! Samplers for reference point fields and estimators tying samples back to
//! measure-level identities.

mod dpp;
mod ensemble;
mod estimators;
mod gibbs;
mod ginibre;
pub(crate) mod linalg;
mod poisson;

pub use dpp::{sample_dpp, DppOptions, DppSampler, EIGEN_DROP, EIGEN_TOL};
pub use ensemble::{
    config_csv, parse_config_csv, replicate_seed, sample_ensemble, SampleEnsemble, Sampler,
};
pub use estimators::{
    estimate_rho_k, ibp_residual, Bins, CorrelationEstimate, IbpOptions, TestFunction,
    BOOTSTRAP_RESAMPLES, MIN_ENSEMBLE,
};
pub use gibbs::{
    acceptance_probability, dlr_ratio_check, move_energy, sample_gibbs_mcmc,
    sample_gibbs_mcmc_with, GibbsOptions,
};
pub use ginibre::{sample_ginibre_matrix, sample_ginibre_matrix_with, Precision};
pub use poisson::sample_poisson;
