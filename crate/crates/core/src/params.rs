//! Target parameters, latent cell probabilities and the closed-form
//! moment, regression and conditional-variance descriptors.
//!
//! A correlated pair is built from a four-cell multinomial
//! `(X1, X2, X3, X4) ~ MN(n; p1, p2, p3, p4)` as `Y1 = X1 + X3` and
//! `Y2 = X2 + X3`. Each `Yi` is binomial with success probability
//! `pi_i`, and the shared `X3` produces a nonnegative correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the cell probabilities summing to one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Computed cell probabilities in `[-CLAMP_TOLERANCE, 0)` are round-off and
/// are clamped to zero; anything lower is a real violation.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

fn open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            range: "(0, 1)",
            value,
        })
    }
}

/// A sampling request: `n` trials per margin, marginal success
/// probabilities `pi1`, `pi2` and target correlation `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub n: u32,
    pub pi1: f64,
    pub pi2: f64,
    pub r: f64,
}

impl TargetSpec {
    /// Builds a spec, rejecting bad marginals, `n = 0`, negative `r` and
    /// `r` above [`max_correlation`].
    pub fn new(n: u32, pi1: f64, pi2: f64, r: f64) -> Result<Self> {
        let spec = Self { n, pi1, pi2, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ZeroTrials(self.n));
        }
        check_correlation(self.pi1, self.pi2, self.r).map(|_| ())
    }
}

/// Checks marginals and `r`, returning the bound on success.
fn check_correlation(pi1: f64, pi2: f64, r: f64) -> Result<f64> {
    let bound = max_correlation(pi1, pi2)?;
    if r.is_nan() {
        return Err(Error::Domain {
            name: "r",
            range: "[0, bound]",
            value: r,
        });
    }
    if r < 0.0 {
        return Err(Error::NegativeCorrelation(r));
    }
    if r > bound {
        return Err(Error::InfeasibleCorrelation { r, bound });
    }
    Ok(bound)
}

/// Latent multinomial cell probabilities.
///
/// `p1` feeds only `Y1`, `p2` only `Y2`, `p3` both and `p4` neither.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbs {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl CellProbs {
    /// Validates nonnegativity and unit sum. Values in `[-1e-12, 0)` are
    /// clamped to zero.
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Result<Self> {
        let mut p = [p1, p2, p3, p4];
        for (i, v) in p.iter_mut().enumerate() {
            if v.is_nan() {
                return Err(Error::InvalidCells(format!("p{} is NaN", i + 1)));
            }
            if *v < 0.0 {
                if *v >= -CLAMP_TOLERANCE {
                    *v = 0.0;
                } else {
                    return Err(Error::InvalidCells(format!(
                        "p{} = {} is negative",
                        i + 1,
                        v
                    )));
                }
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidCells(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self::from_array_unchecked(p))
    }

    fn from_array_unchecked(p: [f64; 4]) -> Self {
        Self {
            p1: p[0],
            p2: p[1],
            p3: p[2],
            p4: p[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }

    /// Success probability of `Y1`, `p1 + p3`.
    pub fn pi1(&self) -> f64 {
        self.p1 + self.p3
    }

    /// Success probability of `Y2`, `p2 + p3`.
    pub fn pi2(&self) -> f64 {
        self.p2 + self.p3
    }

    fn require_nondegenerate_margins(&self) -> Result<()> {
        open_unit("p1 + p3", self.pi1())?;
        open_unit("p2 + p3", self.pi2())?;
        Ok(())
    }
}

/// Largest attainable correlation for marginals `pi1`, `pi2`:
/// `min(pi1(1-pi2), pi2(1-pi1)) / sqrt(pi1(1-pi1) pi2(1-pi2))`.
pub fn max_correlation(pi1: f64, pi2: f64) -> Result<f64> {
    open_unit("pi1", pi1)?;
    open_unit("pi2", pi2)?;
    let v1 = pi1 * (1.0 - pi1);
    let v2 = pi2 * (1.0 - pi2);
    let num = (pi1 * (1.0 - pi2)).min(pi2 * (1.0 - pi1));
    Ok((num / (v1 * v2).sqrt()).min(1.0))
}

/// Solves the latent cells for a feasible target.
///
/// `p3 = pi1 pi2 + r sqrt(pi1(1-pi1) pi2(1-pi2))`, `p1 = pi1 - p3`,
/// `p2 = pi2 - p3`, `p4 = 1 - p1 - p2 - p3`.
pub fn solve_cell_probs(spec: &TargetSpec) -> Result<CellProbs> {
    spec.validate()?;
    let TargetSpec { pi1, pi2, r, .. } = *spec;
    let scale = (pi1 * (1.0 - pi1) * pi2 * (1.0 - pi2)).sqrt();
    let p3 = pi1 * pi2 + r * scale;
    let p1 = pi1 - p3;
    let p2 = pi2 - p3;
    let p4 = 1.0 - p1 - p2 - p3;
    CellProbs::new(p1, p2, p3, p4)
}

/// Means, variances, covariance and correlation of `(Y1, Y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
    pub rho: f64,
}

/// Closed-form moments of the pair built from `cells`.
pub fn theoretical_moments(n: u32, cells: &CellProbs) -> Result<MomentSummary> {
    if n == 0 {
        return Err(Error::ZeroTrials(n));
    }
    cells.require_nondegenerate_margins()?;
    let nf = f64::from(n);
    let (pi1, pi2) = (cells.pi1(), cells.pi2());
    let v1 = pi1 * (1.0 - pi1);
    let v2 = pi2 * (1.0 - pi2);
    let excess = cells.p3 * cells.p4 - cells.p1 * cells.p2;
    Ok(MomentSummary {
        mean1: nf * pi1,
        mean2: nf * pi2,
        var1: nf * v1,
        var2: nf * v2,
        cov: nf * excess,
        rho: excess / (v1 * v2).sqrt(),
    })
}

/// `E(Y1 | Y2 = y) = intercept + slope * y` with `intercept = n alpha` and
/// `slope = beta - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionLine {
    /// `p1 / (1 - p2 - p3)`: success rate of `X1` given the trials not in `Y2`.
    pub alpha: f64,
    /// `p3 / (p2 + p3)`: share of `Y2` trials that are also `Y1` trials.
    pub beta: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl RegressionLine {
    pub fn predict(&self, y2: u32) -> f64 {
        self.intercept + self.slope * f64::from(y2)
    }
}

/// `Var(Y1 | Y2 = y) = gamma + delta * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondVarLine {
    pub gamma: f64,
    pub delta: f64,
}

impl CondVarLine {
    /// Predicted conditional variance, floored at zero against round-off.
    pub fn predict(&self, y2: u32) -> f64 {
        (self.gamma + self.delta * f64::from(y2)).max(0.0)
    }

    /// `E[(Y1 - E(Y1|Y2))^4 | Y2 = y2]`.
    ///
    /// Given `Y2 = y`, `Y1` is a sum of independent `Bin(n - y, alpha)` and
    /// `Bin(y, beta)`; with `v = p(1 - p)` a binomial has second cumulant
    /// `m v` and fourth cumulant `m v (1 - 6 v)`, and cumulants add.
    pub fn fourth_central_moment(&self, n: u32, y2: u32) -> f64 {
        let outside = if n == 0 { 0.0 } else { self.gamma / f64::from(n) };
        let inside = self.delta + outside;
        let (m_out, m_in) = (f64::from(n.saturating_sub(y2)), f64::from(y2));
        let k2 = m_out * outside + m_in * inside;
        let k4 = m_out * outside * (1.0 - 6.0 * outside) + m_in * inside * (1.0 - 6.0 * inside);
        (k4 + 3.0 * k2 * k2).max(0.0)
    }
}

/// `(p1/(p1+p4), p3/(p2+p3))`, the success rates of `X1` and `X3` given
/// `X2 + X3`.
fn conditional_rates(cells: &CellProbs) -> Result<(f64, f64)> {
    let in_y2 = cells.p2 + cells.p3;
    let out_y2 = cells.p1 + cells.p4;
    if in_y2 <= 0.0 {
        return Err(Error::DegenerateConditional("p2 + p3 = 0, Y2 is identically 0"));
    }
    if out_y2 <= 0.0 {
        return Err(Error::DegenerateConditional("p1 + p4 = 0, Y2 is identically n"));
    }
    Ok((cells.p1 / out_y2, cells.p3 / in_y2))
}

pub fn regression_line(n: u32, cells: &CellProbs) -> Result<RegressionLine> {
    let (alpha, beta) = conditional_rates(cells)?;
    Ok(RegressionLine {
        alpha,
        beta,
        intercept: alpha * f64::from(n),
        slope: beta - alpha,
    })
}

pub fn conditional_variance_line(n: u32, cells: &CellProbs) -> Result<CondVarLine> {
    let (alpha, beta) = conditional_rates(cells)?;
    let outside = alpha * (1.0 - alpha);
    let inside = beta * (1.0 - beta);
    Ok(CondVarLine {
        gamma: f64::from(n) * outside,
        delta: inside - outside,
    })
}

/// Square table of [`max_correlation`] over a probability grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub grid: Vec<f64>,
    /// `raw[i][j] = max_correlation(grid[i], grid[j])` at full precision.
    pub raw: Vec<Vec<f64>>,
}

impl BoundTable {
    /// Entry rounded half-up to three decimals.
    pub fn display(&self, i: usize, j: usize) -> f64 {
        round_half_up(self.raw[i][j], 3)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

pub fn round_half_up(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale + 0.5).floor() / scale
}

pub fn bound_table(grid: &[f64]) -> Result<BoundTable> {
    let raw = grid
        .iter()
        .map(|&a| grid.iter().map(|&b| max_correlation(a, b)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(BoundTable {
        grid: grid.to_vec(),
        raw,
    })
}

/// `0.1, 0.2, ..., 0.9`.
pub fn default_grid() -> Vec<f64> {
    (1..=9).map(|i| f64::from(i) / 10.0).collect()
}
