//! Positively correlated binomial pairs from a latent four-cell multinomial.
//!
//! Given `n`, marginal success probabilities `pi1`, `pi2` and a target
//! correlation `r`, [`solve_cell_probs`] finds multinomial cells
//! `(p1, p2, p3, p4)` such that `Y1 = X1 + X3 ~ Bin(n, pi1)` and
//! `Y2 = X2 + X3 ~ Bin(n, pi2)` have correlation exactly `r`.
//!
//! - [`params`]: feasibility bound, solver, closed-form moments, regression
//!   and conditional-variance lines.
//! - [`sampler`]: seedable exact sampler for the latent multinomial.
//! - [`oracle`]: brute-force enumeration used as ground truth.
//! - [`verify`]: Monte Carlo checks of the sampler against theory.

pub mod error;
pub mod oracle;
pub mod params;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use oracle::{
    binomial_pmf, enumerate_joint, exact_conditional_joint, exact_conditional_mean,
    exact_conditional_var, ConditionalTable, ExactJointPmf, ENUMERATION_CAP,
};
pub use params::{
    bound_table, conditional_variance_line, max_correlation, regression_line, solve_cell_probs,
    theoretical_moments, BoundTable, CellProbs, CondVarLine, MomentSummary, RegressionLine,
    TargetSpec,
};
pub use sampler::{
    binomial_draw, multinomial_draw, pair_draw, sample_batch, MultinomialDraw, PairSample,
    RngStream,
};
pub use verify::{
    conditional_variance_check, estimate_moments, gof_check, regression_check, run_verification,
    verify_samples, BinCheck, BinReport, GofResult, MomentZScores, Thresholds, VerificationReport,
};
