//! Bayesian posterior distribution of the mutual information of two discrete
//! random variables, given an `r x s` contingency table of counts and a
//! Dirichlet prior.
//!
//! The crate is organised bottom-up:
//!
//! * [`table`]: counts, priors and the Dirichlet posterior parameters.
//! * [`special`]: the digamma function with integer/half-integer fast paths.
//! * [`moments`]: point statistics, the exact posterior mean, `1/n`
//!   expansions of the variance and the third/fourth central moments.
//! * [`fit`]: moment-matched densities (normal, gamma, log-normal and a
//!   quadratically modulated base density) and their upper tails.
//! * [`mc`]: a Monte Carlo oracle drawing Dirichlet samples via Gamma variates.
//!
//! All values are in nats.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod mc;
pub mod moments;
pub mod numfmt;
pub mod special;
pub mod table;

pub use error::{Error, Result};
pub use fit::{
    fit_poly_ansatz, fit_two_moment, survival, survival_quadrature, BaseFamily, Family,
    FitDiagnostics, FitParams, FitResult, RawMoments,
};
pub use mc::{
    mc_estimate, mc_estimate_with, sample_dirichlet, sample_mi, Estimate, Histogram, McConfig,
    McEstimate, Tail,
};
pub use moments::{
    central3, central4, dirichlet_covariance, mean_exact, mean_o2, mean_var_from_cov, point_mi,
    point_stats, skew_kurt, summarize, var_o1, var_o2, CovarianceTensor, MomentSummary,
    PointStats, ProbMatrix,
};
pub use special::{digamma, digamma_half_integer, digamma_integer, EULER_GAMMA};
pub use table::{
    apply_prior, parse_prior_matrix, parse_table, CountsTable, PosteriorCounts, PriorSpec, TableFormat,
};
