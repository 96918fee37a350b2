//! Monte Carlo checks of sampler output against the closed forms and the
//! exact enumeration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::oracle::{enumerate_joint, ExactJointPmf, ENUMERATION_CAP};
use crate::params::{
    conditional_variance_line, regression_line, solve_cell_probs, theoretical_moments, CondVarLine,
    MomentSummary, RegressionLine, TargetSpec,
};
use crate::sampler::{sample_batch, PairSample, RngStream};

/// Cells with expected count below this are pooled into one tail cell.
pub const POOLING_THRESHOLD: f64 = 5.0;

/// Pass/fail thresholds. Every report carries the thresholds it was
/// judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Every moment z-score must satisfy `|z| < max_moment_z`.
    pub max_moment_z: f64,
    /// A bin passes when `|z| < bin_z`.
    pub bin_z: f64,
    /// Minimum share of passing bins in each bin check.
    pub min_bin_pass_rate: f64,
    /// The goodness-of-fit p-value must exceed this.
    pub gof_p_floor: f64,
    /// Bins with fewer samples are left out.
    pub min_bin_count: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_moment_z: 4.0,
            bin_z: 4.0,
            min_bin_pass_rate: 0.98,
            gof_p_floor: 0.001,
            min_bin_count: 30,
        }
    }
}

/// Sample means, unbiased variances and covariance, and the sample
/// correlation. Fails on fewer than two samples or a constant margin.
pub fn estimate_moments(samples: &[PairSample]) -> Result<MomentSummary> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let count = samples.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in samples {
        s1 += f64::from(p.y1);
        s2 += f64::from(p.y2);
    }
    let (mean1, mean2) = (s1 / count, s2 / count);
    let (mut v1, mut v2, mut c) = (0.0, 0.0, 0.0);
    for p in samples {
        let d1 = f64::from(p.y1) - mean1;
        let d2 = f64::from(p.y2) - mean2;
        v1 += d1 * d1;
        v2 += d2 * d2;
        c += d1 * d2;
    }
    if v1 == 0.0 || v2 == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "a margin has zero sample variance",
        ));
    }
    let denom = count - 1.0;
    Ok(MomentSummary {
        mean1,
        mean2,
        var1: v1 / denom,
        var2: v2 / denom,
        cov: c / denom,
        rho: c / (v1 * v2).sqrt(),
    })
}

/// Standardized deviations of each moment from theory.
///
/// The moments are re-estimated with the means fixed at their theoretical
/// values, so each deviation is first order in the sample average of an
/// influence function. The standard error is the sample standard
/// deviation of that influence function over `sqrt(count)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentZScores {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
    pub rho: f64,
}

impl MomentZScores {
    pub fn max_abs(&self) -> f64 {
        [self.mean1, self.mean2, self.var1, self.var2, self.cov, self.rho]
            .iter()
            .fold(0.0, |m: f64, z| if z.is_nan() { f64::INFINITY } else { m.max(z.abs()) })
    }
}

fn standardize(diff: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        diff / sd
    } else if diff.abs() <= 1e-9 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Running mean and variance (Welford).
#[derive(Default)]
struct Spread {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Spread {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    /// Standard error of the mean of the pushed values.
    fn standard_error(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

pub fn moment_z_scores(samples: &[PairSample], theory: &MomentSummary) -> MomentZScores {
    let sd1 = theory.var1.sqrt();
    let sd2 = theory.var2.sqrt();
    // d1, d2, d1^2, d2^2, d1 d2, correlation influence
    let mut spreads: [Spread; 6] = Default::default();
    for p in samples {
        let d1 = f64::from(p.y1) - theory.mean1;
        let d2 = f64::from(p.y2) - theory.mean2;
        let (z1, z2) = (d1 / sd1, d2 / sd2);
        spreads[0].push(d1);
        spreads[1].push(d2);
        spreads[2].push(d1 * d1);
        spreads[3].push(d2 * d2);
        spreads[4].push(d1 * d2);
        spreads[5].push(z1 * z2 - 0.5 * theory.rho * (z1 * z1 + z2 * z2));
    }
    let z = |i: usize, estimate: f64, target: f64| {
        standardize(estimate - target, spreads[i].standard_error())
    };
    let (m20, m02, m11) = (spreads[2].mean, spreads[3].mean, spreads[4].mean);
    let rho = if m20 > 0.0 && m02 > 0.0 {
        m11 / (m20 * m02).sqrt()
    } else {
        f64::NAN
    };
    MomentZScores {
        mean1: z(0, theory.mean1 + spreads[0].mean, theory.mean1),
        mean2: z(1, theory.mean2 + spreads[1].mean, theory.mean2),
        var1: z(2, m20, theory.var1),
        var2: z(3, m02, theory.var2),
        cov: z(4, m11, theory.cov),
        rho: z(5, rho, theory.rho),
    }
}

/// One conditioning value `y2` in a bin check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub y2: u32,
    pub count: usize,
    pub empirical: f64,
    pub predicted: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCheck {
    pub bins: Vec<BinReport>,
    pub bin_z: f64,
    /// True when the z-scores rest on a normal approximation that is only
    /// asymptotically valid.
    pub approximate: bool,
}

impl BinCheck {
    /// Share of bins with `|z| < bin_z`; `None` when no bin qualified.
    pub fn pass_rate(&self) -> Option<f64> {
        if self.bins.is_empty() {
            return None;
        }
        let ok = self.bins.iter().filter(|b| b.z.abs() < self.bin_z).count();
        Some(ok as f64 / self.bins.len() as f64)
    }

    pub fn passes(&self, min_rate: f64) -> bool {
        self.pass_rate().is_none_or(|r| r >= min_rate)
    }
}

/// Per-`y2` summary of the `y1` values.
struct Bin {
    count: usize,
    mean: f64,
    /// Unbiased sample variance.
    variance: f64,
    /// Fourth central sample moment (divisor `count`).
    fourth: f64,
}

fn bins_by_y2(samples: &[PairSample], min_count: usize) -> BTreeMap<u32, Bin> {
    let mut groups: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
    for p in samples {
        *groups.entry(p.y2).or_default().entry(p.y1).or_insert(0) += 1;
    }
    groups
        .into_iter()
        .filter_map(|(y2, hist)| {
            let count: u64 = hist.values().sum();
            if (count as usize) < min_count.max(2) {
                return None;
            }
            let c = count as f64;
            let mean = hist.iter().map(|(&y, &k)| f64::from(y) * k as f64).sum::<f64>() / c;
            let (mut m2, mut m4) = (0.0, 0.0);
            for (&y, &k) in &hist {
                let d2 = (f64::from(y) - mean).powi(2);
                m2 += d2 * k as f64;
                m4 += d2 * d2 * k as f64;
            }
            Some((
                y2,
                Bin {
                    count: count as usize,
                    mean,
                    variance: m2 / (c - 1.0),
                    fourth: m4 / c,
                },
            ))
        })
        .collect()
}

/// Compares per-`y2` means of `y1` with the regression line. The z-score
/// uses the predicted conditional standard deviation from `var_line`.
pub fn regression_check(
    samples: &[PairSample],
    line: &RegressionLine,
    var_line: &CondVarLine,
    min_bin_count: usize,
    bin_z: f64,
) -> BinCheck {
    let bins = bins_by_y2(samples, min_bin_count)
        .into_iter()
        .map(|(y2, bin)| {
            let predicted = line.predict(y2);
            let se = (var_line.predict(y2) / bin.count as f64).sqrt();
            BinReport {
                y2,
                count: bin.count,
                empirical: bin.mean,
                predicted,
                z: standardize(bin.mean - predicted, se),
            }
        })
        .collect();
    BinCheck {
        bins,
        bin_z,
        approximate: false,
    }
}

/// Standard error of a sample variance from `c` draws of a law with
/// variance `sigma2` and fourth central moment `mu4`.
fn sample_variance_se(c: f64, sigma2: f64, mu4: f64) -> f64 {
    (mu4 / c - sigma2 * sigma2 * (c - 3.0) / (c * (c - 1.0)))
        .max(0.0)
        .sqrt()
}

/// Compares per-`y2` sample variances of `y1` with `gamma + delta y2`.
///
/// The standard error of a sample variance from `c` draws is
/// `sqrt(mu4 / c - sigma^4 (c - 3) / (c (c - 1)))`. It is evaluated twice,
/// once at the predicted law (`mu4` from
/// [`CondVarLine::fourth_central_moment`]) and once at the bin's own
/// moments, and the larger is used. The studentized form keeps a few
/// large values in a near-Poisson bin from producing spurious failures;
/// the predicted form covers bins whose sample happens to be constant.
/// The z-score still leans on asymptotic normality, so the check is
/// marked approximate.
pub fn conditional_variance_check(
    samples: &[PairSample],
    n: u32,
    line: &CondVarLine,
    min_bin_count: usize,
    bin_z: f64,
) -> BinCheck {
    let bins = bins_by_y2(samples, min_bin_count)
        .into_iter()
        .map(|(y2, bin)| {
            let predicted = line.predict(y2);
            let c = bin.count as f64;
            let se_model = sample_variance_se(c, predicted, line.fourth_central_moment(n, y2));
            let biased = bin.variance * (c - 1.0) / c;
            let se_sample = sample_variance_se(c, biased, bin.fourth);
            BinReport {
                y2,
                count: bin.count,
                empirical: bin.variance,
                predicted,
                z: standardize(bin.variance - predicted, se_model.max(se_sample)),
            }
        })
        .collect();
    BinCheck {
        bins,
        bin_z,
        approximate: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Cells kept as-is (expected count at least the pooling threshold).
    pub kept_cells: usize,
    /// Cells merged into the tail cell.
    pub pooled_cells: usize,
}

/// Pearson chi-square of the sampled `(y1, y2)` counts against `pmf`.
///
/// Cells with expected count below 5 are merged into one tail cell. The
/// law is fully specified, so `df = cells - 1`.
pub fn gof_check(samples: &[PairSample], pmf: &ExactJointPmf) -> Result<GofResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let side = pmf.n as usize + 1;
    let mut observed = vec![0u64; side * side];
    for p in samples {
        if p.y1 > pmf.n || p.y2 > pmf.n {
            return Err(Error::InsufficientData(format!(
                "sample ({}, {}) outside the 0..={} table",
                p.y1, p.y2, pmf.n
            )));
        }
        observed[p.y1 as usize * side + p.y2 as usize] += 1;
    }
    let total = samples.len() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut tail_expected, mut tail_observed, mut pooled) = (0.0, 0.0, 0usize);
    for ((_, _, prob), &obs) in pmf.cells().zip(&observed) {
        let expected = prob * total;
        if expected >= POOLING_THRESHOLD {
            cells.push((obs as f64, expected));
        } else {
            tail_expected += expected;
            tail_observed += obs as f64;
            pooled += 1;
        }
    }
    let kept = cells.len();
    if pooled > 0 && (tail_expected > 0.0 || tail_observed > 0.0) {
        cells.push((tail_observed, tail_expected));
    }
    if cells.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} cell(s) left after pooling",
            cells.len()
        )));
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| {
            if e > 0.0 {
                (o - e) * (o - e) / e
            } else {
                f64::INFINITY
            }
        })
        .sum();
    let df = cells.len() - 1;
    let p_value = if statistic.is_finite() {
        ChiSquared::new(df as f64)
            .map_err(|e| Error::InsufficientData(e.to_string()))?
            .sf(statistic)
    } else {
        0.0
    };
    Ok(GofResult {
        statistic,
        df,
        p_value,
        kept_cells: kept,
        pooled_cells: pooled,
    })
}

/// Everything one verification run computed, plus the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub spec: TargetSpec,
    pub sample_size: usize,
    pub thresholds: Thresholds,
    pub theoretical: MomentSummary,
    /// `None` when a margin of the sample is constant.
    pub empirical: Option<MomentSummary>,
    pub correlation_defined: bool,
    pub moment_z_scores: Option<MomentZScores>,
    pub regression: RegressionLine,
    pub conditional_variance: CondVarLine,
    pub regression_bins: BinCheck,
    pub variance_bins: BinCheck,
    /// Present only when `n` is within the enumeration cap.
    pub gof: Option<GofResult>,
    pub passed: bool,
}

impl VerificationReport {
    /// The verdict as a function of the recorded numbers and thresholds.
    pub fn evaluate(&self) -> bool {
        let t = &self.thresholds;
        let moments_ok = self.correlation_defined
            && self
                .moment_z_scores
                .is_some_and(|z| z.max_abs() < t.max_moment_z);
        let bins_ok = self.regression_bins.passes(t.min_bin_pass_rate)
            && self.variance_bins.passes(t.min_bin_pass_rate);
        let gof_ok = self.gof.is_none_or(|g| g.p_value > t.gof_p_floor);
        moments_ok && bins_ok && gof_ok
    }
}

/// Runs every check on an existing sample of `spec`.
pub fn verify_samples(
    spec: &TargetSpec,
    samples: &[PairSample],
    thresholds: &Thresholds,
) -> Result<VerificationReport> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let cells = solve_cell_probs(spec)?;
    let theoretical = theoretical_moments(spec.n, &cells)?;
    let regression = regression_line(spec.n, &cells)?;
    let conditional_variance = conditional_variance_line(spec.n, &cells)?;

    let (empirical, correlation_defined) = match estimate_moments(samples) {
        Ok(m) => (Some(m), true),
        Err(Error::UndefinedCorrelation(_)) => (None, false),
        Err(e) => return Err(e),
    };
    let moment_z_scores = empirical
        .as_ref()
        .map(|_| moment_z_scores(samples, &theoretical));

    let regression_bins = regression_check(
        samples,
        &regression,
        &conditional_variance,
        thresholds.min_bin_count,
        thresholds.bin_z,
    );
    let variance_bins = conditional_variance_check(
        samples,
        spec.n,
        &conditional_variance,
        thresholds.min_bin_count,
        thresholds.bin_z,
    );
    let gof = if spec.n <= ENUMERATION_CAP {
        let pmf = enumerate_joint(spec.n, &cells)?;
        Some(gof_check(samples, &pmf)?)
    } else {
        None
    };

    let mut report = VerificationReport {
        spec: *spec,
        sample_size: samples.len(),
        thresholds: *thresholds,
        theoretical,
        empirical,
        correlation_defined,
        moment_z_scores,
        regression,
        conditional_variance,
        regression_bins,
        variance_bins,
        gof,
        passed: false,
    };
    report.passed = report.evaluate();
    Ok(report)
}

/// Draws `sample_size` pairs from stream 0 of `seed` and verifies them.
pub fn run_verification(
    spec: &TargetSpec,
    sample_size: usize,
    seed: u64,
    thresholds: &Thresholds,
) -> Result<VerificationReport> {
    spec.validate()?;
    if sample_size < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {sample_size}"
        )));
    }
    let samples = sample_batch(&mut RngStream::new(seed, 0), spec, sample_size)?;
    verify_samples(spec, &samples, thresholds)
}
