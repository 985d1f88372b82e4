//! Row-layered q-ary belief propagation.
//!
//! Messages are log-domain vectors normalized to a maximum of zero. Check
//! nodes permute incoming messages by their edge coefficients and combine them
//! with forward-backward convolutions over the additive group of the field.

use crate::error::{Error, Result};
use crate::gf::Symbol;

use super::QcCode;

pub const DEFAULT_MAX_ITERS: usize = 15;
const MSG_FLOOR: f64 = -100.0;

/// Check-node update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckRule {
    /// Exact sum-product.
    #[default]
    SumProduct,
    /// Max-product in the log domain; invariant to scaling of the inputs.
    MinSum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderResult {
    pub symbols: Vec<Symbol>,
    pub iterations: usize,
    /// The decided word satisfies every parity check.
    pub syndrome_ok: bool,
}

/// Decoder state for one code; reuse it across frames to avoid reallocation.
pub struct Decoder<'a> {
    code: &'a QcCode,
    rule: CheckRule,
    max_iters: usize,
    app: Vec<f64>,
    r: Vec<f64>,
    qv: Vec<f64>,
    p: Vec<f64>,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    ext: Vec<f64>,
    hard: Vec<Symbol>,
}

impl<'a> Decoder<'a> {
    pub fn new(code: &'a QcCode) -> Self {
        Self::with_rule(code, CheckRule::SumProduct, DEFAULT_MAX_ITERS)
    }

    pub fn with_rule(code: &'a QcCode, rule: CheckRule, max_iters: usize) -> Self {
        let q = code.field().size();
        let dc = code.d_c();
        Decoder {
            code,
            rule,
            max_iters: max_iters.max(1),
            app: vec![0.0; code.n() * q],
            r: vec![0.0; code.edge_count() * q],
            qv: vec![0.0; dc * q],
            p: vec![0.0; dc * q],
            fwd: vec![0.0; dc * q],
            bwd: vec![0.0; dc * q],
            ext: vec![0.0; q],
            hard: vec![0; code.n()],
        }
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    /// Decode one frame from `n` rows of `M` per-symbol log-likelihoods
    /// (any per-row offset; LLRs relative to symbol 0 work directly).
    pub fn decode(&mut self, llrs: &[f64]) -> Result<DecoderResult> {
        let code = self.code;
        let q = code.field().size();
        let n = code.n();
        if llrs.len() != n * q {
            return Err(Error::Input(format!("expected {} LLR values ({n} x {q}), got {}", n * q, llrs.len())));
        }
        self.app.copy_from_slice(llrs);
        self.r.fill(0.0);
        let mut iterations = 0;
        let mut ok = false;
        while iterations < self.max_iters {
            iterations += 1;
            // a literal field size lets the compiler unroll the GF(8) kernels
            if q == 8 {
                for check in 0..code.check_count() {
                    self.update_check(check, 8);
                }
            } else {
                for check in 0..code.check_count() {
                    self.update_check(check, q);
                }
            }
            self.decide();
            if code.syndrome_is_zero(&self.hard) {
                ok = true;
                break;
            }
        }
        Ok(DecoderResult { symbols: self.hard.clone(), iterations, syndrome_ok: ok })
    }

    fn decide(&mut self) {
        let q = self.code.field().size();
        for (v, row) in self.app.chunks_exact(q).enumerate() {
            let mut best = 0;
            for a in 1..q {
                if row[a] > row[best] {
                    best = a;
                }
            }
            self.hard[v] = best as Symbol;
        }
    }

    #[inline(always)]
    fn update_check(&mut self, check: usize, q: usize) {
        let code = self.code;
        let f = code.field();
        let dc = code.d_c();
        let vars = code.check_vars(check);
        let coeffs = code.check_coeffs(check);
        let base = check * dc;
        let sp = self.rule == CheckRule::SumProduct;

        for e in 0..dc {
            let v = vars[e] as usize;
            let perm = f.mul_row(coeffs[e]);
            let qv = &mut self.qv[e * q..(e + 1) * q];
            let app = &self.app[v * q..(v + 1) * q];
            let r = &self.r[(base + e) * q..(base + e + 1) * q];
            let mut max = f64::NEG_INFINITY;
            for a in 0..q {
                qv[a] = app[a] - r[a];
                max = max.max(qv[a]);
            }
            let p = &mut self.p[e * q..(e + 1) * q];
            for a in 0..q {
                qv[a] = (qv[a] - max).max(MSG_FLOOR);
                p[perm[a] as usize] = if sp { qv[a].exp() } else { qv[a] };
            }
        }

        self.fwd[..q].copy_from_slice(&self.p[..q]);
        for e in 1..dc {
            let (prev, cur) = self.fwd.split_at_mut(e * q);
            combine(&prev[(e - 1) * q..], &self.p[e * q..], &mut cur[..q], q, sp);
        }
        self.bwd[(dc - 1) * q..].copy_from_slice(&self.p[(dc - 1) * q..]);
        for e in (0..dc - 1).rev() {
            let (cur, next) = self.bwd.split_at_mut((e + 1) * q);
            combine(&next[..q], &self.p[e * q..], &mut cur[e * q..], q, sp);
        }

        for e in 0..dc {
            if e == 0 {
                self.ext.copy_from_slice(&self.bwd[q..2 * q]);
            } else if e == dc - 1 {
                self.ext.copy_from_slice(&self.fwd[(dc - 2) * q..(dc - 1) * q]);
            } else {
                combine(&self.fwd[(e - 1) * q..], &self.bwd[(e + 1) * q..], &mut self.ext, q, sp);
            }
            let perm = f.mul_row(coeffs[e]);
            let v = vars[e] as usize;
            let r = &mut self.r[(base + e) * q..(base + e + 1) * q];
            let mut max = f64::NEG_INFINITY;
            for a in 0..q {
                let x = self.ext[perm[a] as usize];
                r[a] = if sp { x.ln() } else { x };
                max = max.max(r[a]);
            }
            let app = &mut self.app[v * q..(v + 1) * q];
            let qv = &self.qv[e * q..(e + 1) * q];
            for a in 0..q {
                r[a] = (r[a] - max).max(MSG_FLOOR);
                app[a] = qv[a] + r[a];
            }
        }
    }
}

/// Convolution over XOR, normalized to a maximum of one (sum-product) or
/// zero (max-product, log domain).
#[inline(always)]
fn combine(a: &[f64], b: &[f64], out: &mut [f64], q: usize, sum_product: bool) {
    let (a, b, out) = (&a[..q], &b[..q], &mut out[..q]);
    // accumulate over y in the outer loop so the q outputs are independent
    if sum_product {
        out.fill(0.0);
        for y in 0..q {
            let ay = a[y];
            for x in 0..q {
                out[x] += ay * b[x ^ y];
            }
        }
        let max = out.iter().fold(0.0f64, |m, &v| m.max(v));
        if max > 0.0 {
            let inv = 1.0 / max;
            out.iter_mut().for_each(|v| *v *= inv);
        }
    } else {
        out.fill(f64::NEG_INFINITY);
        for y in 0..q {
            let ay = a[y];
            for x in 0..q {
                out[x] = out[x].max(ay + b[x ^ y]);
            }
        }
        let max = out.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        out.iter_mut().for_each(|v| *v -= max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_convolution_of_point_masses() {
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        a[3] = 1.0;
        b[5] = 1.0;
        let mut out = [0.0; 8];
        combine(&a, &b, &mut out, 8, true);
        assert_eq!(out[3 ^ 5], 1.0);
        assert_eq!(out.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn xor_convolution_with_uniform_is_uniform() {
        let a = [0.1, 0.5, 0.2, 0.9, 0.0, 0.3, 0.7, 1.0];
        let b = [1.0; 8];
        let mut out = [0.0; 8];
        combine(&a, &b, &mut out, 8, true);
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn max_product_matches_brute_force() {
        let a = [0.0, -1.0, -3.0, -0.5];
        let b = [-2.0, 0.0, -0.1, -4.0];
        let mut out = [0.0; 4];
        combine(&a, &b, &mut out, 4, false);
        let mut brute = [f64::NEG_INFINITY; 4];
        for y in 0..4 {
            for z in 0..4 {
                brute[y ^ z] = brute[y ^ z].max(a[y] + b[z]);
            }
        }
        let m = brute.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for x in 0..4 {
            assert!((out[x] - (brute[x] - m)).abs() < 1e-12);
        }
    }
}
