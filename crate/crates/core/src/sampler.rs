//! Exact-in-distribution sampling of the latent multinomial and the
//! correlated pair it induces.
//!
//! Randomness comes from [`RngStream`], a ChaCha8 generator keyed by a
//! 64-bit seed and a stream index. The mapping is
//! `ChaCha8Rng::seed_from_u64(seed)` followed by `set_stream(stream_index)`,
//! and a uniform is `(next_u64() >> 11) * 2^-53`. Both steps are fixed
//! and platform independent, so `(seed, stream_index)` pins the output.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{solve_cell_probs, CellProbs, TargetSpec};

/// Below this a conditional denominator is treated as zero.
const DENOMINATOR_FLOOR: f64 = 1e-300;

/// `q^m` is computed directly only while `m ln q` stays above this; larger
/// requests are split into two independent halves.
const LOG_PMF_FLOOR: f64 = -600.0;

/// A reproducible, single-owner stream of uniforms.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// One draw of the latent counts `(X1, X2, X3, X4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultinomialDraw {
    pub x1: u32,
    pub x2: u32,
    pub x3: u32,
    pub x4: u32,
}

impl MultinomialDraw {
    pub fn total(&self) -> u32 {
        self.x1 + self.x2 + self.x3 + self.x4
    }

    /// `(Y1, Y2) = (X1 + X3, X2 + X3)`.
    pub fn pair(&self) -> PairSample {
        PairSample {
            y1: self.x1 + self.x3,
            y2: self.x2 + self.x3,
        }
    }
}

/// One realization of the correlated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairSample {
    pub y1: u32,
    pub y2: u32,
}

/// Draws `Binomial(m, p)` by inverting the cdf, walking up from `k = 0` on
/// the side where `p <= 1/2`.
///
/// This is the swap point for a faster sampler (BTPE and friends); the
/// O(m p) walk is plenty for the trial counts used here.
pub fn binomial_draw(stream: &mut RngStream, m: u32, p: f64) -> Result<u32> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            range: "[0, 1]",
            value: p,
        });
    }
    Ok(binomial_unchecked(stream, m, p))
}

fn binomial_unchecked(stream: &mut RngStream, m: u32, p: f64) -> u32 {
    if m == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return m;
    }
    if p > 0.5 {
        return m - binomial_unchecked(stream, m, 1.0 - p);
    }
    let log_q = (-p).ln_1p();
    if f64::from(m) * log_q < LOG_PMF_FLOOR {
        // sum of independent binomials with the same p
        let half = m / 2;
        return binomial_unchecked(stream, half, p) + binomial_unchecked(stream, m - half, p);
    }
    let start = (f64::from(m) * log_q).exp();
    let ratio = p / (1.0 - p);
    loop {
        let mut u = stream.uniform();
        let mut pmf = start;
        let mut k = 0u32;
        loop {
            if u < pmf {
                return k;
            }
            u -= pmf;
            k += 1;
            if k > m {
                // cdf summed to slightly under 1; redraw
                break;
            }
            pmf *= ratio * f64::from(m - k + 1) / f64::from(k);
        }
    }
}

/// Draws `MN(n; probs)` through the conditional-binomial chain: cell `i`
/// gets `Binomial(remaining, p_i / (p_i + ... + p_last))` and the last cell
/// takes whatever is left.
fn multinomial_chain(stream: &mut RngStream, n: u32, probs: &[f64], out: &mut [u32]) {
    debug_assert_eq!(probs.len(), out.len());
    let k = probs.len();
    out.fill(0);
    if k == 0 {
        return;
    }
    let mut tail = vec![0.0; k];
    let mut acc = 0.0;
    for i in (0..k).rev() {
        acc += probs[i];
        tail[i] = acc;
    }
    let mut remaining = n;
    for i in 0..k - 1 {
        if remaining == 0 {
            return;
        }
        if probs[i] == 0.0 {
            continue;
        }
        if tail[i] < DENOMINATOR_FLOOR {
            break;
        }
        let cond = (probs[i] / tail[i]).min(1.0);
        let x = binomial_unchecked(stream, remaining, cond);
        out[i] = x;
        remaining -= x;
    }
    if remaining > 0 {
        // last cell, or the last positive one if the chain ran out of mass
        let target = (0..k).rev().find(|&i| probs[i] > 0.0).unwrap_or(k - 1);
        out[target] += remaining;
    }
}

pub fn multinomial_draw(stream: &mut RngStream, n: u32, cells: &CellProbs) -> Result<MultinomialDraw> {
    let cells = CellProbs::new(cells.p1, cells.p2, cells.p3, cells.p4)?;
    let mut x = [0u32; 4];
    multinomial_chain(stream, n, &cells.as_array(), &mut x);
    Ok(MultinomialDraw {
        x1: x[0],
        x2: x[1],
        x3: x[2],
        x4: x[3],
    })
}

pub fn pair_draw(stream: &mut RngStream, n: u32, cells: &CellProbs) -> Result<PairSample> {
    multinomial_draw(stream, n, cells).map(|d| d.pair())
}

/// Solves the cells for `spec` once, then draws `count` pairs.
pub fn sample_batch(stream: &mut RngStream, spec: &TargetSpec, count: usize) -> Result<Vec<PairSample>> {
    let cells = solve_cell_probs(spec)?;
    let probs = cells.as_array();
    let mut x = [0u32; 4];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        multinomial_chain(stream, spec.n, &probs, &mut x);
        out.push(PairSample {
            y1: x[0] + x[2],
            y2: x[1] + x[2],
        });
    }
    Ok(out)
}
