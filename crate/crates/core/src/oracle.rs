//! Brute-force enumeration of the latent multinomial.
//!
//! Everything here sums multinomial probabilities over every latent
//! outcome; nothing uses the closed forms in [`crate::params`]. That
//! independence is what lets the tests compare the two.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::params::{CellProbs, MomentSummary};

/// Largest `n` the enumeration accepts. Work grows as `n^3`.
pub const ENUMERATION_CAP: u32 = 40;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "p",
            range: "[0, 1]",
            value: p,
        })
    }
}

/// `count * ln(p)` with the convention `0 * ln 0 = 0`.
fn xlogp(count: u32, p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        f64::from(count) * p.ln()
    }
}

/// `C(m, k) p^k (1-p)^(m-k)`, evaluated in log space.
pub fn binomial_pmf(m: u32, p: f64, k: u32) -> Result<f64> {
    check_probability(p)?;
    if k > m {
        return Err(Error::Domain {
            name: "k",
            range: "[0, m]",
            value: f64::from(k),
        });
    }
    Ok(multinomial_pmf_unchecked(&[k, m - k], &[p, 1.0 - p]))
}

/// Multinomial probability of `counts` under `probs`; zero-probability
/// categories must have zero counts to contribute.
pub fn multinomial_pmf(counts: &[u32], probs: &[f64]) -> Result<f64> {
    if counts.len() != probs.len() {
        return Err(Error::InvalidCells(format!(
            "{} counts for {} categories",
            counts.len(),
            probs.len()
        )));
    }
    for &p in probs {
        check_probability(p)?;
    }
    Ok(multinomial_pmf_unchecked(counts, probs))
}

fn multinomial_pmf_unchecked(counts: &[u32], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    let mut log = ln_factorial(n);
    for (&c, &p) in counts.iter().zip(probs) {
        if c > 0 && p == 0.0 {
            return 0.0;
        }
        log += xlogp(c, p) - ln_factorial(u64::from(c));
    }
    log.exp()
}

fn check_cap(n: u32) -> Result<()> {
    if n > ENUMERATION_CAP {
        Err(Error::EnumerationCap {
            n,
            cap: ENUMERATION_CAP,
        })
    } else {
        Ok(())
    }
}

/// Exact joint law of `(Y1, Y2)`, row-major in `y1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactJointPmf {
    pub n: u32,
    table: Vec<f64>,
}

impl ExactJointPmf {
    fn side(&self) -> usize {
        self.n as usize + 1
    }

    pub fn get(&self, y1: u32, y2: u32) -> f64 {
        if y1 > self.n || y2 > self.n {
            return 0.0;
        }
        self.table[y1 as usize * self.side() + y2 as usize]
    }

    /// Entries as `(y1, y2, probability)`.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let side = self.side();
        self.table
            .iter()
            .enumerate()
            .map(move |(i, &p)| ((i / side) as u32, (i % side) as u32, p))
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.table.iter().copied())
    }

    pub fn marginal_y1(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|y1| compensated_sum((0..=self.n).map(|y2| self.get(y1, y2))))
            .collect()
    }

    pub fn marginal_y2(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|y2| compensated_sum((0..=self.n).map(|y1| self.get(y1, y2))))
            .collect()
    }

    /// Moments computed by summing over the table.
    pub fn moments(&self) -> MomentSummary {
        let e = |f: &dyn Fn(f64, f64) -> f64| {
            compensated_sum(self.cells().map(|(a, b, p)| p * f(f64::from(a), f64::from(b))))
        };
        let mean1 = e(&|a, _| a);
        let mean2 = e(&|_, b| b);
        let var1 = e(&|a, _| (a - mean1) * (a - mean1));
        let var2 = e(&|_, b| (b - mean2) * (b - mean2));
        let cov = e(&|a, b| (a - mean1) * (b - mean2));
        MomentSummary {
            mean1,
            mean2,
            var1,
            var2,
            cov,
            rho: cov / (var1 * var2).sqrt(),
        }
    }

    /// `P(Y1 = y1 | Y2 = y2)` for every `y1`.
    fn conditional_column(&self, y2: u32) -> Result<Vec<f64>> {
        let unsupported = Error::UnsupportedCondition {
            what: "Y2",
            value: y2,
        };
        if y2 > self.n {
            return Err(unsupported);
        }
        let column: Vec<f64> = (0..=self.n).map(|y1| self.get(y1, y2)).collect();
        let mass = compensated_sum(column.iter().copied());
        if mass <= 0.0 {
            return Err(unsupported);
        }
        Ok(column.into_iter().map(|p| p / mass).collect())
    }
}

/// Enumerates every `(x1, x2, x3, x4)` with `x1 + x2 + x3 + x4 = n` and
/// accumulates its probability at `(x1 + x3, x2 + x3)`.
pub fn enumerate_joint(n: u32, cells: &CellProbs) -> Result<ExactJointPmf> {
    check_cap(n)?;
    let probs = cells.as_array();
    let side = n as usize + 1;
    let mut acc = vec![CompensatedSum::default(); side * side];
    for x3 in 0..=n {
        for x1 in 0..=n - x3 {
            for x2 in 0..=n - x3 - x1 {
                let x4 = n - x1 - x2 - x3;
                let p = multinomial_pmf_unchecked(&[x1, x2, x3, x4], &probs);
                let (y1, y2) = ((x1 + x3) as usize, (x2 + x3) as usize);
                acc[y1 * side + y2].add(p);
            }
        }
    }
    Ok(ExactJointPmf {
        n,
        table: acc.iter().map(CompensatedSum::value).collect(),
    })
}

pub fn exact_conditional_mean(pmf: &ExactJointPmf, y2: u32) -> Result<f64> {
    let column = pmf.conditional_column(y2)?;
    Ok(compensated_sum(
        column.iter().enumerate().map(|(y1, &p)| y1 as f64 * p),
    ))
}

pub fn exact_conditional_var(pmf: &ExactJointPmf, y2: u32) -> Result<f64> {
    let column = pmf.conditional_column(y2)?;
    let mean = compensated_sum(column.iter().enumerate().map(|(y1, &p)| y1 as f64 * p));
    let var = compensated_sum(column.iter().enumerate().map(|(y1, &p)| {
        let d = y1 as f64 - mean;
        d * d * p
    }));
    Ok(var.max(0.0))
}

/// `P(X1 = h, X3 = r | X2 + X3 = k)` for `0 <= h <= n - k`, `0 <= r <= k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub n: u32,
    pub k: u32,
    table: Vec<f64>,
}

impl ConditionalTable {
    fn cols(&self) -> usize {
        self.k as usize + 1
    }

    pub fn get(&self, x1: u32, x3: u32) -> f64 {
        if x1 > self.n - self.k || x3 > self.k {
            return 0.0;
        }
        self.table[x1 as usize * self.cols() + x3 as usize]
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.table.iter().copied())
    }

    pub fn marginal_x1(&self) -> Vec<f64> {
        (0..=self.n - self.k)
            .map(|h| compensated_sum((0..=self.k).map(|r| self.get(h, r))))
            .collect()
    }

    pub fn marginal_x3(&self) -> Vec<f64> {
        (0..=self.k)
            .map(|r| compensated_sum((0..=self.n - self.k).map(|h| self.get(h, r))))
            .collect()
    }

    /// Largest `|P(h, r) - P(h) P(r)|` over the table.
    pub fn factorization_error(&self) -> f64 {
        let m1 = self.marginal_x1();
        let m3 = self.marginal_x3();
        let mut worst: f64 = 0.0;
        for (h, &a) in m1.iter().enumerate() {
            for (r, &b) in m3.iter().enumerate() {
                worst = worst.max((self.get(h as u32, r as u32) - a * b).abs());
            }
        }
        worst
    }
}

/// Conditions the enumerated latent law on `X2 + X3 = k`.
pub fn exact_conditional_joint(n: u32, cells: &CellProbs, k: u32) -> Result<ConditionalTable> {
    check_cap(n)?;
    let unsupported = Error::UnsupportedCondition {
        what: "X2 + X3",
        value: k,
    };
    if k > n {
        return Err(unsupported);
    }
    let probs = cells.as_array();
    let cols = k as usize + 1;
    let mut raw = vec![0.0; (n - k + 1) as usize * cols];
    for x1 in 0..=n - k {
        for x3 in 0..=k {
            let counts = [x1, k - x3, x3, n - k - x1];
            raw[x1 as usize * cols + x3 as usize] = multinomial_pmf_unchecked(&counts, &probs);
        }
    }
    let mass = compensated_sum(raw.iter().copied());
    if mass <= 0.0 {
        return Err(unsupported);
    }
    Ok(ConditionalTable {
        n,
        k,
        table: raw.into_iter().map(|p| p / mass).collect(),
    })
}

/// `sum_i i^power C(n, i) a^i b^(n-i)` by direct summation, with the
/// binomial coefficients built exactly in integers.
pub fn binomial_power_sum(n: u32, a: f64, b: f64, power: i32) -> f64 {
    let mut coeff: u128 = 1;
    let mut acc = CompensatedSum::default();
    for i in 0..=n {
        acc.add(f64::from(i).powi(power) * coeff as f64 * a.powi(i as i32) * b.powi((n - i) as i32));
        coeff = coeff * u128::from(n - i) / u128::from(i + 1);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn binomial_pmf_examples() {
        for m in 0..5 {
            assert_eq!(binomial_pmf(m, 0.0, 0).unwrap(), 1.0);
            assert_eq!(binomial_pmf(m, 1.0, m).unwrap(), 1.0);
        }
        assert!(close(binomial_pmf(4, 0.5, 2).unwrap(), 0.375, 1e-15));
        assert_eq!(binomial_pmf(4, 0.0, 1).unwrap(), 0.0);
        assert!(binomial_pmf(4, 0.5, 5).is_err());
        assert!(binomial_pmf(4, 1.5, 1).is_err());
    }

    #[test]
    fn binomial_pmf_normalizes() {
        for m in 0..=30 {
            for i in 0..=20 {
                let p = f64::from(i) / 20.0;
                let total = compensated_sum((0..=m).map(|k| binomial_pmf(m, p, k).unwrap()));
                assert!(close(total, 1.0, 1e-12), "m={m} p={p} total={total}");
            }
        }
    }

    #[test]
    fn single_trial_table() {
        let c = CellProbs::new(0.1, 0.2, 0.3, 0.4).unwrap();
        let t = enumerate_joint(1, &c).unwrap();
        assert!(close(t.get(1, 1), 0.3, 1e-15));
        assert!(close(t.get(1, 0), 0.1, 1e-15));
        assert!(close(t.get(0, 1), 0.2, 1e-15));
        assert!(close(t.get(0, 0), 0.4, 1e-15));
    }

    #[test]
    fn enumerated_correlation_matches_closed_form() {
        let c = CellProbs::new(0.1, 0.2, 0.3, 0.4).unwrap();
        let t = enumerate_joint(6, &c).unwrap();
        let (a, b) = (c.pi1(), c.pi2());
        let expected = (c.p3 * c.p4 - c.p1 * c.p2) / (a * (1.0 - a) * b * (1.0 - b)).sqrt();
        assert!(close(t.moments().rho, expected, 1e-12));
        assert!(close(t.total(), 1.0, 1e-12));
    }

    #[test]
    fn comonotone_cells_live_on_diagonal() {
        for n in 0..=10 {
            let c = CellProbs::new(0.0, 0.0, 0.35, 0.65).unwrap();
            let t = enumerate_joint(n, &c).unwrap();
            for (y1, y2, p) in t.cells() {
                if y1 != y2 {
                    assert_eq!(p, 0.0);
                }
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let c = CellProbs::new(0.25, 0.25, 0.25, 0.25).unwrap();
        assert!(enumerate_joint(ENUMERATION_CAP, &c).is_ok());
        assert_eq!(
            enumerate_joint(ENUMERATION_CAP + 1, &c).unwrap_err(),
            Error::EnumerationCap { n: 41, cap: 40 }
        );
    }

    #[test]
    fn conditional_moments_trivial_cases() {
        let indep = CellProbs::new(0.21, 0.21, 0.09, 0.49).unwrap(); // pi1 = pi2 = 0.3, r = 0
        let t = enumerate_joint(5, &indep).unwrap();
        for y2 in 0..=5 {
            assert!(close(exact_conditional_mean(&t, y2).unwrap(), 1.5, 1e-12));
            assert!(close(exact_conditional_var(&t, y2).unwrap(), 5.0 * 0.3 * 0.7, 1e-12));
        }
        let diag = enumerate_joint(5, &CellProbs::new(0.0, 0.0, 0.5, 0.5).unwrap()).unwrap();
        for y2 in 0..=5 {
            assert!(close(exact_conditional_mean(&diag, y2).unwrap(), f64::from(y2), 1e-12));
            assert_eq!(exact_conditional_var(&diag, y2).unwrap(), 0.0);
        }
    }

    #[test]
    fn unsupported_conditions() {
        let c = CellProbs::new(0.5, 0.0, 0.0, 0.5).unwrap();
        let t = enumerate_joint(3, &c).unwrap();
        assert!(matches!(
            exact_conditional_mean(&t, 1),
            Err(Error::UnsupportedCondition { value: 1, .. })
        ));
        assert!(exact_conditional_var(&t, 4).is_err());
        assert!(exact_conditional_joint(3, &c, 2).is_err());
        assert!(exact_conditional_joint(3, &c, 4).is_err());
    }

    #[test]
    fn conditional_joint_k_zero_reduces_to_binomial() {
        let c = CellProbs::new(0.1, 0.2, 0.3, 0.4).unwrap();
        let t = exact_conditional_joint(6, &c, 0).unwrap();
        let q = 0.1 / (0.1 + 0.4);
        for h in 0..=6 {
            assert!(close(t.get(h, 0), binomial_pmf(6, q, h).unwrap(), 1e-12));
        }
        assert_eq!(t.marginal_x3().len(), 1);
        assert!(close(t.marginal_x3()[0], 1.0, 1e-12));
    }

    #[test]
    fn conditional_joint_x3_marginal_symmetric_case() {
        let c = CellProbs::new(0.25, 0.25, 0.25, 0.25).unwrap();
        let t = exact_conditional_joint(4, &c, 2).unwrap();
        let m = t.marginal_x3();
        for (r, &p) in m.iter().enumerate() {
            assert!(close(p, binomial_pmf(2, 0.5, r as u32).unwrap(), 1e-12));
        }
        assert!(t.factorization_error() < 1e-12);
        assert!(close(t.total(), 1.0, 1e-12));
    }

    #[test]
    fn power_sums_small_cases() {
        // n = 2: 0*b^2 + 1*2ab + 2*a^2 = 2a(a+b)
        let (a, b) = (0.3, 0.5);
        assert!(close(binomial_power_sum(2, a, b, 1), 2.0 * a * (a + b), 1e-15));
        assert!(close(binomial_power_sum(2, a, b, 0), (a + b) * (a + b), 1e-15));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!(close(compensated_sum(xs), 4e-16, 1e-30));
    }
}
