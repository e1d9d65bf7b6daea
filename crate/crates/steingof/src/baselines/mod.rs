//! Comparison methods: the MMD two-sample test, the exact likelihood-ratio
//! oracle, Gibbs sampling and annealed importance sampling for the RBM, the
//! one-dimensional Kolmogorov-Smirnov test, and the Fisher-divergence
//! partial statistic.

pub mod ais;
pub mod fisher;
pub mod gibbs;
pub mod ks;
pub mod lr;
pub mod mmd;

pub use ais::{estimate_log_z_ais, AisResult};
pub use fisher::fisher_partial_statistic;
pub use gibbs::{gibbs_sampler, gibbs_sweep};
pub use ks::{ks_test_1d, ks_test_model};
pub use lr::lr_oracle_test;
pub use mmd::{mean_kernel, mmd_bootstrap_test, mmd_u_statistic, mmd_v_statistic, MmdEstimate};
