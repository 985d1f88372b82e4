//! Matched-AWGN mutual information of a constellation, by 2-D Gauss-Hermite
//! quadrature and by plain Monte Carlo.

use std::f64::consts::{LN_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;
use rand::RngExt;
use rand_distr::StandardNormal;

use crate::constellation::{dist2, Constellation};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub const DEFAULT_ORDER: usize = 32;
const MAX_ORDER: usize = 256;
const CONVERGENCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMi {
    /// Mutual information in bits/symbol.
    pub bits: f64,
    /// Order per dimension of the accepted rule.
    pub order: usize,
    /// Change from the previous (half-order) rule.
    pub delta: f64,
}

/// `-log2 sum_j lambda_j exp(-(|s_i + n - s_j|^2 - |n|^2) / (2 sigma2))`
fn information_density(c: &Constellation, i: usize, n: [f64; 2], sigma2: f64) -> f64 {
    let si = c.point(i);
    let y = [si[0] + n[0], si[1] + n[1]];
    let nn = n[0] * n[0] + n[1] * n[1];
    let exps: Vec<f64> = c
        .points()
        .iter()
        .zip(c.priors())
        .map(|(&sj, l)| l.ln() - (dist2(y, sj) - nn) / (2.0 * sigma2))
        .collect();
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + exps.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    -lse / LN_2
}

/// Evaluate with a fixed Gauss-Hermite order per dimension.
pub fn mi_gauss_hermite(c: &Constellation, sigma2: f64, order: usize) -> f64 {
    let rule = GaussHermite::new(NonZeroUsize::new(order).expect("order > 0"));
    let nodes = rule.as_node_weight_pairs();
    let scale = (2.0 * sigma2).sqrt();
    let mut total = 0.0;
    for i in 0..c.size() {
        let mut acc = 0.0;
        for &(ta, wa) in nodes {
            for &(tb, wb) in nodes {
                acc += wa * wb * information_density(c, i, [scale * ta, scale * tb], sigma2);
            }
        }
        total += c.priors()[i] * acc / PI;
    }
    total
}

/// Mutual information under optimum (matched) decoding on AWGN, in bits.
/// Starts at [`DEFAULT_ORDER`] and doubles until successive orders agree
/// within 1e-4 bits.
pub fn mi_sd_numeric(c: &Constellation, sigma2: f64) -> Result<QuadratureMi> {
    mi_sd_numeric_with_order(c, sigma2, DEFAULT_ORDER)
}

pub fn mi_sd_numeric_with_order(c: &Constellation, sigma2: f64, order: usize) -> Result<QuadratureMi> {
    if !(sigma2 > 0.0) {
        return Err(Error::Input(format!("noise variance must be positive, got {sigma2}")));
    }
    let mut order = order.max(2);
    let mut prev = mi_gauss_hermite(c, sigma2, order);
    while order < MAX_ORDER {
        order *= 2;
        let next = mi_gauss_hermite(c, sigma2, order);
        let delta = (next - prev).abs();
        if delta < CONVERGENCE_TOL {
            return Ok(QuadratureMi { bits: next.clamp(0.0, c.bits() as f64), order, delta });
        }
        prev = next;
    }
    Err(Error::Numeric(format!(
        "Gauss-Hermite quadrature did not converge by order {MAX_ORDER} at sigma2={sigma2}"
    )))
}

/// Monte Carlo estimate of the same quantity: `(bits, standard error)`.
pub fn mi_sd_monte_carlo(c: &Constellation, sigma2: f64, samples: usize, seed: u64) -> (f64, f64) {
    let sd = sigma2.sqrt();
    let mut rng = stream_rng(seed, Stream::Generic, 0);
    let cdf: Vec<f64> = c
        .priors()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let r: f64 = rng.random();
        let i = cdf.iter().position(|&v| r < v).unwrap_or(c.size() - 1);
        let n0: f64 = rng.sample(StandardNormal);
        let n1: f64 = rng.sample(StandardNormal);
        let v = information_density(c, i, [sd * n0, sd * n1], sigma2);
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}
