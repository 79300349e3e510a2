//! Synthetic data generating processes, Monte Carlo study runners and
//! closed-form asymptotic variances of OLS under serially dependent noise.

mod asymptotics;
mod dgp;
mod study;

pub use asymptotics::{
    analytic_limit, analytic_limit_with_moment, empirical_nvar, NVarEstimate, GAUSSIAN_FOURTH_MOMENT,
};
pub use dgp::{ar_kernel_apply, gen_ar1, gen_dataset, DgpConfig, Replicate, Study};
pub use study::{
    format_table, results_csv, run_study, Arm, Method, Outcome, StudyReport, StudyResult, StudySpec, TableQuantity,
};
