//! Federated demographic-parity audits of score distributions.
//!
//! Each silo releases, per sensitive group, a count and a `k`-quantile sketch
//! on a shared midpoint grid. From those messages the server estimates the
//! disparity functional `G_p`, the pooled heterogeneity `H_p`, and for `p = 2`
//! an ANOVA split of `G_2` into mixture, barycenter and interaction terms.
//! Centralized references, finite-sample bound calculators and a
//! selection-bias simulation harness are included.

pub mod bounds;
pub mod central;
pub mod dataset;
pub mod distances;
pub mod error;
pub mod numeric;
pub mod par;
pub mod protocol;
pub mod scenario;
pub mod sketch;
pub mod sweep;

pub use bounds::{communication_budget, dkw_bound, hp_quantile_bound, weight_bounds, BoundInputs};
pub use central::{central_audit, h_hat, u2_bin_averaged, u2_linear_exact, u_hat, CentralAudit, GroupedSample};
pub use distances::{barycenter_quantiles, cramer_p_step, wasserstein_p_grid, weighted_median};
pub use error::{Error, Result};
pub use dataset::{Dataset, DatasetSpec};
pub use numeric::Power;
pub use par::Execution;
pub use protocol::{
    client_summarize, decode_message, encode_message, server_audit, server_audit_with, AuditReport, SiloMessage,
};
pub use scenario::{allocate_copula, allocate_random, dependence_diagnostics, sample_beta, AllocationScenario, Regime};
pub use sketch::{
    build_sketch, empirical_quantile, invert_step_cdf, mix_step_cdfs, mixture_quantiles_on_grid,
    sketch_to_step_cdf, GridSpec, QuantileArray, QuantileSketch, StepCdf,
};
pub use sweep::{run_sweep, SweepResult, SweepSpec};
