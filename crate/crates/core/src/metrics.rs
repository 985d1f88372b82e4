//! Information-theoretic and uncoded performance metrics.
//!
//! * `I_NB`: empirical mismatched-decoding rate, maximized over the exponent
//!   nu. With a Gaussian metric of variance `K` the maximizer also gives a
//!   noise-variance estimate `K / nu_hat` (for `K = 1/2`, `1 / (2 nu_hat)`).
//! * ACLB: the same average at `nu = 1`.
//! * GMI: bit-wise rate from bit LLRs.
//! * Pre-FEC BER/SER from minimum-distance decisions.
//! * `I_hd`: mutual information of a hard-decision DMC.
//!
//! Averages over records run in fixed-size chunks in parallel and are reduced
//! with compensated summation in chunk order, so results do not depend on the
//! number of worker threads.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use crate::channel::DmcMatrix;
use crate::constellation::{dist2, Constellation};
use crate::db::MeasurementDb;
use crate::demod::{bit_llrs_from_log_likelihoods, DecodingMetric};
use crate::error::{Error, Result};
use crate::optimize::NuSearch;
use crate::quadrature::mi_sd_numeric;

const CHUNK: usize = 4096;
const MIN_RECOMMENDED: usize = 1000;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Mean and standard error of `term(i)` over `0..n`, deterministic for any
/// thread count.
fn chunked_mean<F>(n: usize, term: F) -> Estimate
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials: Vec<(f64, f64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let (mut s, mut s2) = (KahanSum::default(), KahanSum::default());
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let t = term(i);
                s.add(t);
                s2.add(t * t);
            }
            (s.value(), s2.value())
        })
        .collect();
    let (mut s, mut s2) = (KahanSum::default(), KahanSum::default());
    for (a, b) in partials {
        s.add(a);
        s2.add(b);
    }
    let nf = n as f64;
    let mean = s.value() / nf;
    let var = (s2.value() / nf - mean * mean).max(0.0);
    Estimate { value: mean, stderr: (var / nf).sqrt() }
}

/// Per-record decoding-metric values `ln q(y|s_j)` for every hypothesis.
#[derive(Debug, Clone)]
pub struct MetricTable {
    size: usize,
    tx: Vec<usize>,
    ll: Vec<f64>,
    log_priors: Vec<f64>,
}

impl MetricTable {
    pub fn build(db: &MeasurementDb, c: &Constellation, metric: &DecodingMetric) -> Result<Self> {
        db.check(c)?;
        if db.len() < MIN_RECOMMENDED {
            warn!("only {} records; at least {MIN_RECOMMENDED} are recommended", db.len());
        }
        if db.records.iter().all(|r| r.rx == db.records[0].rx) {
            warn!("all received samples are identical; estimates are degenerate");
        }
        let size = c.size();
        let mut ll = Vec::with_capacity(db.len() * size);
        match metric {
            DecodingMetric::Gaussian { k } => {
                let scale = -1.0 / (2.0 * k);
                for r in &db.records {
                    ll.extend(c.points().iter().map(|&s| scale * dist2(r.rx, s)));
                }
            }
            DecodingMetric::Dmc(w) => {
                if w.size() != size {
                    return Err(Error::Config(format!("DMC size {} does not match M={size}", w.size())));
                }
                for r in &db.records {
                    let j = c.hard_decide(r.rx);
                    ll.extend(w.row(j).iter().map(|p| p.ln()));
                }
            }
        }
        Ok(MetricTable {
            size,
            tx: db.records.iter().map(|r| r.tx).collect(),
            ll,
            log_priors: c.priors().iter().map(|p| p.ln()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.ll[i * self.size..(i + 1) * self.size]
    }

    /// Per-record term `nu ln q(y|x) - ln sum_j lambda_j q(y|s_j)^nu` in bits.
    fn term(&self, i: usize, nu: f64) -> f64 {
        let row = self.row(i);
        let mut max = f64::NEG_INFINITY;
        for (l, p) in row.iter().zip(&self.log_priors) {
            max = max.max(p + nu * l);
        }
        let mut s = 0.0;
        for (l, p) in row.iter().zip(&self.log_priors) {
            s += (p + nu * l - max).exp();
        }
        (nu * row[self.tx[i]] - max - s.ln()) / LN_2
    }

    /// Empirical average at a fixed exponent.
    pub fn rate_at(&self, nu: f64) -> Estimate {
        chunked_mean(self.len(), |i| self.term(i, nu))
    }
}

/// Result of the nu-optimized estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbEstimate {
    /// `I_NB` in bits/symbol.
    pub bits: f64,
    pub stderr: f64,
    pub nu_hat: f64,
    /// `K / nu_hat` for a Gaussian metric of variance `K`.
    pub sigma2_hat: Option<f64>,
}

pub fn estimate_i_nb_table(table: &MetricTable, metric: &DecodingMetric, search: &NuSearch) -> Result<NbEstimate> {
    let (nu, _) = search.maximize(|nu| table.rate_at(nu).value)?;
    let est = table.rate_at(nu);
    Ok(NbEstimate {
        bits: est.value,
        stderr: est.stderr,
        nu_hat: nu,
        sigma2_hat: metric.variance().map(|k| k / nu),
    })
}

/// `I_NB` with its maximizing exponent and the implied noise variance.
pub fn estimate_i_nb(
    db: &MeasurementDb,
    c: &Constellation,
    metric: &DecodingMetric,
    search: &NuSearch,
) -> Result<NbEstimate> {
    let table = MetricTable::build(db, c, metric)?;
    estimate_i_nb_table(&table, metric, search)
}

/// Auxiliary-channel lower bound (the average at `nu = 1`), in bits.
pub fn aclb(db: &MeasurementDb, c: &Constellation, metric: &DecodingMetric) -> Result<Estimate> {
    Ok(MetricTable::build(db, c, metric)?.rate_at(1.0))
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn gmi_table(table: &MetricTable, c: &Constellation) -> Estimate {
    let m = c.bits();
    chunked_mean(table.len(), |i| {
        let ll: Vec<f64> = table.row(i).iter().zip(&table.log_priors).map(|(l, p)| l + p).collect();
        let bits = bit_llrs_from_log_likelihoods(&ll, c);
        let x = table.tx[i];
        // bit LLRs are ln P(0)/P(1): a correct bit contributes ln(1 + e^{-L})
        let loss: f64 = (0..m)
            .map(|b| {
                let l = bits.0[b];
                softplus(if c.label_bit(x, b) == 0 { -l } else { l })
            })
            .sum();
        -table.log_priors[x] / LN_2 - loss / LN_2
    })
}

/// Generalized mutual information from bit-wise LLRs, in bits.
pub fn gmi(db: &MeasurementDb, c: &Constellation, metric: &DecodingMetric) -> Result<Estimate> {
    let table = MetricTable::build(db, c, metric)?;
    Ok(gmi_table(&table, c))
}

/// Pre-FEC `(BER, SER)` of minimum-distance decisions.
pub fn pre_fec_rates(db: &MeasurementDb, c: &Constellation) -> Result<(f64, f64)> {
    db.check(c)?;
    let (mut sym, mut bit) = (0usize, 0usize);
    for r in &db.records {
        let d = c.hard_decide(r.rx);
        if d != r.tx {
            sym += 1;
            bit += (c.label(d) ^ c.label(r.tx)).count_ones() as usize;
        }
    }
    let n = db.len() as f64;
    Ok((bit as f64 / (n * c.bits() as f64), sym as f64 / n))
}

/// Mutual information of a hard-decision channel, in bits:
/// `sum_i sum_j W[j][i] lambda_i log2(W[j][i] / sum_k W[j][k] lambda_k)`.
pub fn mi_hd(w: &DmcMatrix, priors: &[f64]) -> Result<f64> {
    let size = w.size();
    if priors.len() != size || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Input("priors must match the DMC size and sum to 1".into()));
    }
    for k in 0..size {
        let s: f64 = (0..size).map(|j| w.get(j, k)).sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("DMC column {k} sums to {s}")));
        }
    }
    let mut total = KahanSum::default();
    for j in 0..size {
        let py: f64 = (0..size).map(|k| w.get(j, k) * priors[k]).sum();
        for i in 0..size {
            let wji = w.get(j, i);
            if wji > 0.0 {
                total.add(wji * priors[i] * (wji / py).log2());
            }
        }
    }
    Ok(total.value().clamp(0.0, (size as f64).log2()))
}

/// Everything measurable from one database.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub i_nb: f64,
    pub i_nb_stderr: f64,
    pub nu_hat: f64,
    pub sigma2_hat: Option<f64>,
    pub aclb: f64,
    pub gmi: f64,
    pub pre_fec_ber: f64,
    pub pre_fec_ser: f64,
    pub samples: usize,
}

impl MetricReport {
    /// `metric,value` rows with a units header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "# units: *_bits in bits/symbol; nu_hat dimensionless; sigma2_hat per real dimension; rates are fractions\nmetric,value\n",
        );
        let sigma = self.sigma2_hat.map(|v| v.to_string()).unwrap_or_else(|| "nan".into());
        let rows = [
            ("i_nb_bits", self.i_nb.to_string()),
            ("i_nb_stderr_bits", self.i_nb_stderr.to_string()),
            ("nu_hat", self.nu_hat.to_string()),
            ("sigma2_hat", sigma),
            ("aclb_bits", self.aclb.to_string()),
            ("gmi_bits", self.gmi.to_string()),
            ("pre_fec_ber", self.pre_fec_ber.to_string()),
            ("pre_fec_ser", self.pre_fec_ser.to_string()),
            ("samples", self.samples.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}

/// Compute every metric for a database.
pub fn analyze(
    db: &MeasurementDb,
    c: &Constellation,
    metric: &DecodingMetric,
    search: &NuSearch,
) -> Result<MetricReport> {
    let table = MetricTable::build(db, c, metric)?;
    let nb = estimate_i_nb_table(&table, metric, search)?;
    let aclb = table.rate_at(1.0).value;
    let gmi = gmi_table(&table, c).value;
    let (pre_fec_ber, pre_fec_ser) = pre_fec_rates(db, c)?;
    Ok(MetricReport {
        i_nb: nb.bits,
        i_nb_stderr: nb.stderr,
        nu_hat: nb.nu_hat,
        sigma2_hat: nb.sigma2_hat,
        aclb,
        gmi,
        pre_fec_ber,
        pre_fec_ser,
        samples: db.len(),
    })
}

/// Es/N0 (dB) at which the matched AWGN mutual information equals `bits`,
/// by bisection on `[-20, 40]` dB.
pub fn esn0_for_mi(c: &Constellation, bits: f64) -> Result<f64> {
    if !(0.0 < bits && bits < c.bits() as f64) {
        return Err(Error::Input(format!("target MI {bits} outside (0, {})", c.bits())));
    }
    let mi = |db: f64| mi_sd_numeric(c, crate::channel::esn0_db_to_sigma2(db)).map(|q| q.bits);
    let (mut lo, mut hi) = (-20.0, 40.0);
    if mi(lo)? > bits || mi(hi)? < bits {
        return Err(Error::Input(format!("target MI {bits} not reachable in [-20, 40] dB")));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if mi(mid)? < bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
