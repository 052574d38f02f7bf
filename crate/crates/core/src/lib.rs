//! Numerical laboratory for log-optimal investment in a jump-diffusion
//! market that may be stopped at a random horizon.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`model`]: closed-form optimizer, quadratic root, first-order
//!   residual, companion-market transform and Hellinger rates — pure
//!   functions of the coefficients.
//! - [`simulate`]: exact log-increment path generation for the asset,
//!   the survival process and every derived exponential, with
//!   counter-based per-path random streams.
//! - [`evaluate`]: horizon-weighted Monte Carlo of stopped functionals,
//!   deterministic parallel reduction, supermartingale z-tests.
//! - [`optimize`]: closed-form-free recovery of the optimizer (grid
//!   search with common random numbers, golden section, safeguarded
//!   Newton on the residual).
//! - [`verify`]: named suites that couple the pathwise identities with
//!   their Monte Carlo counterparts.

pub mod error;
pub mod evaluate;
pub mod model;
pub mod optimize;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use evaluate::{
    mc_run, mc_run_multi, supermartingale_test, weighted_expect_stopped, McConfig, McEstimate,
    SupermartingaleReport,
};
pub use model::{
    entropy_hellinger_rate, hellinger0_pathwise, kkt_residual, quadratic_root, solve_cell,
    transformed_cell, validate_horizon, validate_market, Branch, Coef, HorizonParams, MarketParams,
    Model, ModelCell, SolveReport,
};
pub use optimize::{
    default_theta_grid, golden_section_max, grid_search_log_utility, optimal_strategy,
    solve_pointwise, GridSearchResult, SearchSpec,
};
pub use simulate::{
    cox_sample_tau, deflator_path, gen_path, market_deflator_log_path, value_stopped, wealth_path,
    zm_path, CoxTau, DeflatorPath, GridSpec, PathBundle, StrategySpec,
};
pub use verify::{
    duality_check, entropy_condition_check, numeraire_check, pseudo_stopping_check,
    sbar_equivalence_check, CheckResult, QuantityEstimate, VerifyReport,
};
