//! Revised Chatterjee rank correlations with `M` right nearest neighbors,
//! distribution-free independence tests built on them, and a deterministic
//! Monte Carlo harness for size, power, consistency and timing studies.

pub mod coefficients;
pub mod error;
pub mod inference;
pub mod io;
mod kernels;
pub mod power;
pub mod ranks;
pub mod rng;
pub mod simulation;

pub use coefficients::{
    chatterjee_xi, coefficient, decreasing_extremal_value, extremal_bounds, gaussian_population_xi,
    hoeffding_d, pearson_r, symmetric_nn_sum, xi_nm, xi_nm_from_ranks, xi_nm_reflected, xi_pm,
    CoefficientValue, Method, PopulationXi, RankedSample,
};
pub use error::{Result, XiError};
pub use ranks::{
    compute_ranks, random_rank_permutation, reflect_ranks, right_neighbor, x_order, NeighborCount,
    RankVector, Sample, XOrder,
};
pub use inference::{
    asymptotic_test, pearson_test, permutation_test, PermutationTestConfig, TestMethod, TestResult,
};
pub use power::{beta_of_gamma, beta_of_gamma_exact, regime_ok, sample_rotation, zeta, BoundaryPoint, GaussianRotation};
pub use simulation::{
    consistency_study, null_calibration_study, power_study, timing_study, PowerStudyConfig,
    ReportRow, StudyKind, StudyReport,
};
