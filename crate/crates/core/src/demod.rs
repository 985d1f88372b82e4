//! Soft demodulation: nonbinary LLR vectors and bit-wise LLRs.
//!
//! All LLRs use natural logarithms and are clamped to `[-LLR_CLAMP, LLR_CLAMP]`.
//! The clamp bounds how low a post-FEC error floor can be measured.

use std::f64::consts::PI;

use crate::channel::DmcMatrix;
use crate::constellation::{dist2, Constellation, Point};
use crate::error::{Error, Result};

pub const LLR_CLAMP: f64 = 50.0;

/// Decoding metric `q(y|x)` assumed by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodingMetric {
    /// Circularly symmetric Gaussian with variance `k` per real dimension.
    Gaussian { k: f64 },
    /// Hard-decision channel with known transition matrix.
    Dmc(DmcMatrix),
}

impl DecodingMetric {
    pub fn gaussian(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config(format!("metric variance must be positive, got {k}")));
        }
        Ok(DecodingMetric::Gaussian { k })
    }

    /// Variance of a Gaussian metric.
    pub fn variance(&self) -> Option<f64> {
        match self {
            DecodingMetric::Gaussian { k } => Some(*k),
            DecodingMetric::Dmc(_) => None,
        }
    }
}

/// `ln q(y|s)` for the 2-D Gaussian with variance `k` per dimension.
pub fn gaussian_metric(y: Point, s: Point, k: f64) -> f64 {
    -dist2(y, s) / (2.0 * k) - (2.0 * PI * k).ln()
}

#[inline]
fn clamp(v: f64) -> f64 {
    v.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// `ln(sum exp(v))`, shifting by the maximum so every exponent is <= 0.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `M - 1` log-likelihood ratios `L_i = ln q(y|s_i)/q(y|s_1) + ln lambda_i/lambda_1`
/// for `i = 2..M`, i.e. relative to symbol index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NbLlr(pub Vec<f64>);

impl NbLlr {
    /// Build from unnormalized per-symbol log-likelihoods (length M).
    pub fn from_log_likelihoods(ll: &[f64]) -> Self {
        NbLlr(ll[1..].iter().map(|&v| clamp(v - ll[0])).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Alphabet size M.
    pub fn alphabet_size(&self) -> usize {
        self.0.len() + 1
    }

    /// Length-M vector with a leading zero for the reference symbol.
    pub fn full(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.0.iter().copied()).collect()
    }

    /// Most likely symbol (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        let mut best_v = 0.0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i + 1;
            }
        }
        best
    }
}

/// Bit-wise LLRs `ln P(b_i = 0 | y) / P(b_i = 1 | y)`, MSB first.
#[derive(Debug, Clone, PartialEq)]
pub struct BitLlrs(pub Vec<f64>);

/// Per-symbol `ln q(y|s_j)` for every j; constants common to all j are
/// dropped.
pub fn log_metrics(y: Point, c: &Constellation, k: f64) -> Vec<f64> {
    let scale = -1.0 / (2.0 * k);
    c.points().iter().map(|&s| scale * dist2(y, s)).collect()
}

fn with_priors(mut ll: Vec<f64>, c: &Constellation) -> Vec<f64> {
    if !c.is_equiprobable() {
        for (v, p) in ll.iter_mut().zip(c.priors()) {
            *v += p.ln();
        }
    }
    ll
}

fn check_size(c: &Constellation, metric: &DecodingMetric) -> Result<()> {
    if let DecodingMetric::Dmc(w) = metric {
        if w.size() != c.size() {
            return Err(Error::Config(format!("DMC size {} does not match M={}", w.size(), c.size())));
        }
    }
    Ok(())
}

/// Symbol LLRs for a soft observation under a Gaussian metric.
pub fn symbol_llrs(y: Point, c: &Constellation, metric: &DecodingMetric) -> Result<NbLlr> {
    check_size(c, metric)?;
    match metric {
        DecodingMetric::Gaussian { k } => Ok(NbLlr::from_log_likelihoods(&with_priors(log_metrics(y, c, *k), c))),
        DecodingMetric::Dmc(_) => Err(Error::Config("a DMC metric needs a hard observation".into())),
    }
}

/// Symbol LLRs for a hard observation `j` through a DMC:
/// `L_i = ln W[j][i] / W[j][0] + ln lambda_i / lambda_0`.
pub fn dmc_llrs(j: usize, w: &DmcMatrix, priors: &[f64]) -> Result<NbLlr> {
    if j >= w.size() || priors.len() != w.size() {
        return Err(Error::Input(format!("observation {j} or priors incompatible with DMC of size {}", w.size())));
    }
    if !w.is_strictly_positive() {
        return Err(Error::Input("DMC has zero entries; smooth it before computing LLRs".into()));
    }
    let ll: Vec<f64> = w.row(j).iter().zip(priors).map(|(p, l)| p.ln() + l.ln()).collect();
    Ok(NbLlr::from_log_likelihoods(&ll))
}

/// Bit-wise LLRs, computed in the log domain.
pub fn bit_llrs(y: Point, c: &Constellation, metric: &DecodingMetric) -> Result<BitLlrs> {
    check_size(c, metric)?;
    let k = match metric {
        DecodingMetric::Gaussian { k } => *k,
        DecodingMetric::Dmc(_) => return Err(Error::Config("bit LLRs need a Gaussian metric".into())),
    };
    let ll = with_priors(log_metrics(y, c, k), c);
    Ok(bit_llrs_from_log_likelihoods(&ll, c))
}

/// Bit-wise LLRs from per-symbol log-likelihoods (priors included).
pub fn bit_llrs_from_log_likelihoods(ll: &[f64], c: &Constellation) -> BitLlrs {
    let m = c.bits();
    let mut out = Vec::with_capacity(m);
    for b in 0..m {
        let mut max0 = f64::NEG_INFINITY;
        let mut max1 = f64::NEG_INFINITY;
        for (i, &v) in ll.iter().enumerate() {
            if c.label_bit(i, b) == 0 {
                max0 = max0.max(v);
            } else {
                max1 = max1.max(v);
            }
        }
        let (mut s0, mut s1) = (0.0, 0.0);
        for (i, &v) in ll.iter().enumerate() {
            if c.label_bit(i, b) == 0 {
                s0 += (v - max0).exp();
            } else {
                s1 += (v - max1).exp();
            }
        }
        out.push(clamp(max0 + s0.ln() - max1 - s1.ln()));
    }
    BitLlrs(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_metric_at_zero_distance() {
        let k = 0.3;
        assert!((gaussian_metric([1.0, 2.0], [1.0, 2.0], k) + (2.0 * PI * k).ln()).abs() < 1e-15);
        let k = 1.0 / (2.0 * PI);
        assert!(gaussian_metric([0.5, 0.5], [0.5, 0.5], k).abs() < 1e-15);
    }

    #[test]
    fn metric_ratio_matches_closed_form_llr() {
        let c = Constellation::resolve("c4").unwrap();
        let y = [0.3, -0.7];
        let k = 0.2;
        let l = symbol_llrs(y, &c, &DecodingMetric::gaussian(k).unwrap()).unwrap();
        for i in 1..8 {
            let ratio = gaussian_metric(y, c.point(i), k) - gaussian_metric(y, c.point(0), k);
            let closed = (dist2(y, c.point(0)) - dist2(y, c.point(i))) / (2.0 * k);
            assert!((l.0[i - 1] - ratio).abs() < 1e-12);
            assert!((l.0[i - 1] - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_point_is_most_likely_at_itself() {
        let c = Constellation::resolve("8psk").unwrap();
        let l = symbol_llrs(c.point(0), &c, &DecodingMetric::gaussian(0.1).unwrap()).unwrap();
        assert!(l.0.iter().all(|&v| v < 0.0));
        assert_eq!(l.argmax(), 0);
    }

    #[test]
    fn equidistant_point_gives_zero_llr() {
        let c = Constellation::resolve("bpsk").unwrap();
        let l = symbol_llrs([0.0, 0.4], &c, &DecodingMetric::gaussian(0.5).unwrap()).unwrap();
        assert_eq!(l.0[0], 0.0);
    }

    #[test]
    fn halving_variance_doubles_llrs() {
        let c = Constellation::resolve("c2").unwrap();
        let y = [0.2, 0.1];
        let a = symbol_llrs(y, &c, &DecodingMetric::gaussian(0.4).unwrap()).unwrap();
        let b = symbol_llrs(y, &c, &DecodingMetric::gaussian(0.2).unwrap()).unwrap();
        for (x, z) in a.0.iter().zip(&b.0) {
            assert!((2.0 * x - z).abs() < 1e-12);
        }
    }

    #[test]
    fn llrs_are_clamped() {
        let c = Constellation::resolve("8psk").unwrap();
        let l = symbol_llrs(c.point(0), &c, &DecodingMetric::gaussian(1e-6).unwrap()).unwrap();
        assert!(l.0.iter().all(|&v| v == -LLR_CLAMP));
    }

    #[test]
    fn dmc_llr_cases() {
        let eq = vec![0.125; 8];
        let u = DmcMatrix::uniform(8);
        assert!(dmc_llrs(3, &u, &eq).unwrap().0.iter().all(|&v| v == 0.0));
        let mut counts = vec![vec![0u64; 8]; 8];
        for (i, row) in counts.iter_mut().enumerate() {
            row[i] = 100;
        }
        let id = DmcMatrix::from_counts(&counts).unwrap();
        let l = dmc_llrs(0, &id, &eq).unwrap();
        // floored counts give ln(floor) after renormalization
        assert!(l.0.iter().all(|&v| (v - crate::channel::DMC_FLOOR.ln()).abs() < 1e-9));
        assert!(dmc_llrs(0, &DmcMatrix::identity(8), &eq).is_err());
        let bsc = DmcMatrix::bsc(0.1).unwrap();
        let l = dmc_llrs(0, &bsc, &[0.5, 0.5]).unwrap();
        assert!((l.0[0].abs() - (0.9f64 / 0.1).ln()).abs() < 1e-12);
        assert!((l.0[0].abs() - 2.1972245773).abs() < 1e-9);
    }

    #[test]
    fn binary_bit_llr_equals_symbol_llr() {
        let c = Constellation::resolve("bpsk").unwrap();
        let q = DecodingMetric::gaussian(0.3).unwrap();
        for y in [[-0.4, 0.1], [0.9, 0.0], [0.05, -1.0]] {
            let s = symbol_llrs(y, &c, &q).unwrap();
            let b = bit_llrs(y, &c, &q).unwrap();
            // symbol LLR is ln P(1)/P(0); the bit LLR is ln P(0)/P(1)
            assert!((b.0[0] + s.0[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn gray_pam_bit_signs_follow_label() {
        let c = Constellation::resolve("4pam").unwrap();
        let q = DecodingMetric::gaussian(0.05).unwrap();
        for i in 0..4 {
            let b = bit_llrs(c.point(i), &c, &q).unwrap();
            for (bit, l) in c.label_bits(i).unwrap().into_iter().zip(b.0) {
                assert_eq!(l > 0.0, bit == 0, "point {i}");
            }
        }
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert!((log_sum_exp([-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp([0.0]) - 0.0).abs() < 1e-15);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn bit_llrs_match_probability_domain(yr in -1.5f64..1.5, yi in -1.5f64..1.5, k in 0.05f64..1.0) {
            let c = Constellation::resolve("c2").unwrap();
            let q = DecodingMetric::gaussian(k).unwrap();
            let b = bit_llrs([yr, yi], &c, &q).unwrap();
            for bit in 0..3 {
                let (mut p0, mut p1) = (0.0, 0.0);
                for i in 0..8 {
                    let p = gaussian_metric([yr, yi], c.point(i), k).exp() * c.priors()[i];
                    if c.label_bit(i, bit) == 0 { p0 += p } else { p1 += p }
                }
                let direct = (p0 / p1).ln().clamp(-LLR_CLAMP, LLR_CLAMP);
                prop_assert!((b.0[bit] - direct).abs() < 1e-9);
            }
        }

        #[test]
        fn variance_scaling_keeps_argmax(yr in -1.5f64..1.5, yi in -1.5f64..1.5, k in 0.4f64..1.0, c_scale in 0.5f64..4.0) {
            let c = Constellation::resolve("c1").unwrap();
            let a = symbol_llrs([yr, yi], &c, &DecodingMetric::gaussian(k).unwrap()).unwrap();
            let b = symbol_llrs([yr, yi], &c, &DecodingMetric::gaussian(c_scale * k).unwrap()).unwrap();
            for (x, z) in a.0.iter().zip(&b.0) {
                prop_assert!((x / c_scale - z).abs() < 1e-9);
            }
            prop_assert_eq!(a.argmax(), b.argmax());
        }
    }
}
