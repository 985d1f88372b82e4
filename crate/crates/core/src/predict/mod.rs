//! Threshold calibration, post-FEC prediction, decoding of recorded data and
//! the universality experiment.

mod curve;

use std::fmt::Write as _;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::channel::{esn0_db_to_sigma2, estimate_dmc, AwgnChannel, ChannelKind, ChannelMix, ComponentChannel};
use crate::constellation::{dist2, Constellation};
use crate::db::MeasurementDb;
use crate::demod::DecodingMetric;
use crate::error::{Error, Result};
use crate::gf::Symbol;
use crate::ldpc::{Decoder, QcCode, SerCounter};
use crate::metrics::{estimate_i_nb, mi_hd};
use crate::quadrature::mi_sd_numeric;
use crate::rng::{stream_rng, Stream};
use crate::sim::{simulate, PointStats, SimConfig};

pub use curve::{
    crossing, isotonic_non_increasing, monotonicity_violations, predict_post_fec, CalibrationCurve, CurvePoint,
    LogLinearFit, NoisyPoint, Prediction,
};

/// Soft AWGN output, or the hard-decision DMC behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Soft,
    Hard { dmc_samples: usize, dmc_seed: u64 },
}

impl ChannelModel {
    pub fn component(&self, c: &Constellation, esn0_db: f64) -> Result<ComponentChannel> {
        let sigma2 = esn0_db_to_sigma2(esn0_db);
        match *self {
            ChannelModel::Soft => ComponentChannel::soft(c.clone(), sigma2),
            ChannelModel::Hard { dmc_samples, dmc_seed } => {
                ComponentChannel::hard(c.clone(), sigma2, dmc_samples, dmc_seed)
            }
        }
    }

    /// Matched soft MI, or `I_hd` of the estimated DMC.
    pub fn mi(&self, c: &Constellation, esn0_db: f64) -> Result<f64> {
        let sigma2 = esn0_db_to_sigma2(esn0_db);
        match *self {
            ChannelModel::Soft => Ok(mi_sd_numeric(c, sigma2)?.bits),
            ChannelModel::Hard { dmc_samples, dmc_seed } => {
                let w = estimate_dmc(c, &AwgnChannel::new(sigma2, dmc_seed)?, dmc_samples)?;
                mi_hd(&w, c.priors())
            }
        }
    }

    /// Es/N0 (dB) giving `bits` of MI, by bisection on `[-10, 40]` dB.
    pub fn esn0_for_mi(&self, c: &Constellation, bits: f64) -> Result<f64> {
        let (mut lo, mut hi) = (-10.0, 40.0);
        if !(self.mi(c, lo)? < bits && self.mi(c, hi)? > bits) {
            return Err(Error::Input(format!("MI {bits} not reachable for {} in [-10, 40] dB", c.name())));
        }
        let tol = match self {
            ChannelModel::Soft => 1e-6,
            ChannelModel::Hard { .. } => 1e-3,
        };
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.mi(c, mid)? < bits {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// MI coordinate of a simulated point.
    pub fn mi_of(&self, s: &PointStats) -> f64 {
        match self {
            ChannelModel::Soft => s.i_nb,
            ChannelModel::Hard { .. } => s.i_hd,
        }
    }
}

/// Quantities a post-FEC SER curve can be plotted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Mi,
    Gmi,
    PreFecBer,
    PreFecSer,
    Esn0,
}

impl Axis {
    pub const PREDICTORS: [Axis; 4] = [Axis::Mi, Axis::Gmi, Axis::PreFecBer, Axis::PreFecSer];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Mi => "mi_bits",
            Axis::Gmi => "gmi_bits",
            Axis::PreFecBer => "pre_fec_ber",
            Axis::PreFecSer => "pre_fec_ser",
            Axis::Esn0 => "esn0_db",
        }
    }

    pub fn value(&self, model: &ChannelModel, s: &PointStats) -> f64 {
        match self {
            Axis::Mi => model.mi_of(s),
            Axis::Gmi => s.gmi,
            Axis::PreFecBer => s.pre_fec_ber,
            Axis::PreFecSer => s.pre_fec_ser,
            Axis::Esn0 => s.esn0_db,
        }
    }
}

/// Es/N0 points to simulate.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepPlan {
    /// Fixed Es/N0 values in dB.
    Grid(Vec<f64>),
    /// Ascend in MI from `start_mi` by `step` until the SER drops below the
    /// target, then bisect the bracketing interval until it is anchored by a
    /// nonzero point below target and a point at or below `fit_max_ser`.
    Adaptive { start_mi: f64, step: f64, max_points: usize, max_refinements: usize, fit_max_ser: f64 },
}

impl SweepPlan {
    /// Adaptive plan starting just above the code rate in bits.
    pub fn for_rate(rate: f64, bits: usize) -> Self {
        SweepPlan::Adaptive {
            start_mi: rate * bits as f64 + 0.03,
            step: 0.03,
            max_points: 24,
            max_refinements: 6,
            fit_max_ser: 1e-2,
        }
    }
}

/// Simulated points for one constellation, sorted by Es/N0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSweep {
    pub constellation: String,
    pub model: ChannelModel,
    pub points: Vec<PointStats>,
}

impl ConstellationSweep {
    pub fn series(&self, axis: Axis) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (axis.value(&self.model, p), p.post_fec_ser)).collect()
    }

    /// Axis value at which the post-FEC SER crosses `target`.
    pub fn crossing(&self, axis: Axis, target: f64) -> Result<f64> {
        crossing(&self.series(axis), target)
            .map_err(|e| Error::Calibration(format!("{} ({}): {e}", self.constellation, axis.name())))
    }

    /// Es/N0 at which `axis` takes `value`, interpolating linearly along the
    /// sweep and extending the end segments.
    pub fn esn0_where(&self, axis: Axis, value: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> =
            self.points.iter().map(|p| (p.esn0_db, axis.value(&self.model, p))).filter(|p| p.1.is_finite()).collect();
        if pts.len() < 2 {
            return Err(Error::Calibration(format!("{}: too few points to invert {}", self.constellation, axis.name())));
        }
        let i = pts
            .windows(2)
            .position(|w| (w[0].1 - value) * (w[1].1 - value) <= 0.0)
            .unwrap_or(if (value - pts[0].1).abs() < (value - pts[pts.len() - 1].1).abs() { 0 } else { pts.len() - 2 });
        let ((e0, v0), (e1, v1)) = (pts[i], pts[i + 1]);
        if v1 == v0 {
            return Ok(0.5 * (e0 + e1));
        }
        Ok(e0 + (value - v0) / (v1 - v0) * (e1 - e0))
    }

    pub fn noisy_points(&self) -> Vec<NoisyPoint> {
        self.points
            .iter()
            .map(|p| NoisyPoint { mi: self.model.mi_of(p), ser: p.post_fec_ser, stderr: p.ser_stderr() })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# constellation={}\n# units: esn0_db in dB; *_bits in bits/symbol; sigma2 per real dimension; \
             rates are fractions\nconstellation,{}\n",
            self.constellation,
            PointStats::CSV_HEADER
        );
        for p in &self.points {
            let _ = writeln!(s, "{},{}", self.constellation, p.csv_row());
        }
        s
    }
}

fn run_point(
    code: &QcCode,
    c: &Constellation,
    model: &ChannelModel,
    esn0_db: f64,
    cfg: &SimConfig,
) -> Result<PointStats> {
    let mix = ChannelMix::single(model.component(c, esn0_db)?);
    let s = simulate(code, &mix, cfg)?;
    info!(
        "{} Es/N0 {:.3} dB: MI {:.4} SER {:.3e} ({} frame errors / {} frames)",
        c.name(),
        esn0_db,
        model.mi_of(&s),
        s.post_fec_ser,
        s.frame_errors,
        s.frames
    );
    Ok(s)
}

/// Simulate one constellation according to `plan`.
pub fn sweep_constellation(
    code: &QcCode,
    c: &Constellation,
    model: &ChannelModel,
    plan: &SweepPlan,
    target_ser: f64,
    cfg: &SimConfig,
) -> Result<ConstellationSweep> {
    let mut points: Vec<(f64, PointStats)> = Vec::new();
    match plan {
        SweepPlan::Grid(grid) => {
            if grid.is_empty() {
                return Err(Error::Config("empty Es/N0 grid".into()));
            }
            for &e in grid {
                points.push((f64::NAN, run_point(code, c, model, e, cfg)?));
            }
        }
        &SweepPlan::Adaptive { start_mi, step, max_points, max_refinements, fit_max_ser } => {
            if !(step > 0.0) || max_points == 0 {
                return Err(Error::Config("adaptive sweep needs a positive step and point budget".into()));
            }
            let top = c.bits() as f64 - 1e-3;
            let run = |mi: f64| -> Result<(f64, PointStats)> {
                let e = model.esn0_for_mi(c, mi.min(top))?;
                Ok((mi, run_point(code, c, model, e, cfg)?))
            };
            let mut mi = start_mi;
            let first = run(mi)?;
            let mut below = first.1.post_fec_ser < target_ser;
            points.push(first);
            // walk down until the start is above target, up until below it
            let dir = if below { -1.0 } else { 1.0 };
            while points.len() < max_points && (below == (dir < 0.0)) {
                mi += dir * step;
                if mi <= 0.0 || mi >= top {
                    break;
                }
                let p = run(mi)?;
                below = p.1.post_fec_ser < target_ser;
                points.push(p);
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            for _ in 0..max_refinements {
                let upper = points.iter().rposition(|p| p.1.post_fec_ser >= target_ser);
                let Some(u) = upper else { break };
                let Some(l) = points[u..].iter().position(|p| p.1.post_fec_ser < target_ser).map(|k| k + u) else {
                    break;
                };
                let (pu, pl) = (&points[u], &points[l]);
                if pl.1.post_fec_ser > 0.0 && pu.1.post_fec_ser <= fit_max_ser {
                    break;
                }
                let mid = 0.5 * (pu.0 + pl.0);
                let p = run(mid)?;
                points.insert(l, p);
            }
        }
    }
    let mut pts: Vec<PointStats> = points.into_iter().map(|p| p.1).collect();
    pts.sort_by(|a, b| a.esn0_db.total_cmp(&b.esn0_db));
    Ok(ConstellationSweep { constellation: c.name().to_string(), model: *model, points: pts })
}

/// Calibration of one code over a set of constellations.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Pooled over all constellations.
    pub curve: CalibrationCurve,
    pub sweeps: Vec<ConstellationSweep>,
}

impl Calibration {
    pub fn threshold(&self) -> f64 {
        self.curve.threshold.expect("calibration always carries a threshold")
    }

    /// Threshold at `target` from a log-linear fit of the pooled, cleaned
    /// points with `0 < SER <= fit_max_ser`.
    pub fn extrapolated_threshold(&self, target: f64, fit_max_ser: f64) -> Result<(f64, LogLinearFit)> {
        let fit = LogLinearFit::new(&self.curve.cleaned(), fit_max_ser)?;
        Ok((fit.mi_at(target), fit))
    }

    pub fn collapse(&self, target: f64) -> Result<CollapseReport> {
        collapse_report(&self.sweeps, target)
    }
}

/// Run sweeps for every constellation, check monotonicity and pool.
pub fn calibrate(
    code: &QcCode,
    constellations: &[Constellation],
    model: &ChannelModel,
    target_ser: f64,
    plan: &SweepPlan,
    cfg: &SimConfig,
) -> Result<Calibration> {
    if constellations.is_empty() {
        return Err(Error::Config("no constellations to calibrate".into()));
    }
    let mut sweeps = Vec::new();
    for c in constellations {
        let sweep = sweep_constellation(code, c, model, plan, target_ser, cfg)?;
        let bad = monotonicity_violations(&sweep.noisy_points());
        if !bad.is_empty() {
            let list: Vec<String> = bad
                .iter()
                .map(|(a, b)| format!("({:.4}, {:.3e}) -> ({:.4}, {:.3e})", a.mi, a.ser, b.mi, b.ser))
                .collect();
            return Err(Error::Calibration(format!(
                "{}: SER increases with MI beyond 3 sigma: {}",
                c.name(),
                list.join("; ")
            )));
        }
        sweeps.push(sweep);
    }
    let pooled: Vec<CurvePoint> = sweeps
        .iter()
        .flat_map(|s| s.points.iter().map(|p| CurvePoint { mi: s.model.mi_of(p), ser: p.post_fec_ser }))
        .filter(|p| p.mi.is_finite())
        .collect();
    let curve = CalibrationCurve::new(code.id(), target_ser, cfg.seed, pooled);
    if curve.threshold.is_none() {
        curve.cleaned_crossing(target_ser)?;
    }
    Ok(Calibration { curve, sweeps })
}

/// Horizontal spread of the SER crossing along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpread {
    pub axis: Axis,
    /// Crossing value per constellation, in the axis' own unit.
    pub crossings: Vec<(String, f64)>,
    /// `max - min` of the crossings.
    pub spread: f64,
    /// Mean crossing, used as the pooled threshold.
    pub pooled: f64,
    /// Per constellation: Es/N0 where the axis reaches the pooled threshold
    /// minus the Es/N0 of the actual crossing.
    pub esn0_errors_db: Vec<f64>,
    /// `max - min` of the Es/N0 errors.
    pub spread_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    pub target_ser: f64,
    pub axes: Vec<AxisSpread>,
}

impl CollapseReport {
    pub fn axis(&self, axis: Axis) -> Option<&AxisSpread> {
        self.axes.iter().find(|a| a.axis == axis)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# target_ser={:e}\n# units: spread in the axis unit (bits/symbol or fraction); spread_db in dB\n\
             axis,constellation,crossing,esn0_error_db\n",
            self.target_ser
        );
        for a in &self.axes {
            for ((name, x), e) in a.crossings.iter().zip(&a.esn0_errors_db) {
                let _ = writeln!(s, "{},{name},{x},{e}", a.axis.name());
            }
            let _ = writeln!(s, "{},spread,{},{}", a.axis.name(), a.spread, a.spread_db);
        }
        s
    }
}

/// Compare how well each predictor axis aligns the SER curves of the sweeps.
pub fn collapse_report(sweeps: &[ConstellationSweep], target: f64) -> Result<CollapseReport> {
    let actual: Vec<f64> = sweeps.iter().map(|s| s.crossing(Axis::Esn0, target)).collect::<Result<_>>()?;
    let hard = sweeps.iter().any(|s| matches!(s.model, ChannelModel::Hard { .. }));
    let mut axes = Vec::new();
    // bit-wise LLRs and hence GMI do not exist behind hard decisions
    for axis in Axis::PREDICTORS.into_iter().filter(|&a| !(hard && a == Axis::Gmi)) {
        let xs: Vec<f64> = sweeps.iter().map(|s| s.crossing(axis, target)).collect::<Result<_>>()?;
        let pooled = xs.iter().sum::<f64>() / xs.len() as f64;
        let errors: Vec<f64> = sweeps
            .iter()
            .zip(&actual)
            .map(|(s, e)| Ok(s.esn0_where(axis, pooled)? - e))
            .collect::<Result<_>>()?;
        let span = |v: &[f64]| {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        axes.push(AxisSpread {
            axis,
            crossings: sweeps.iter().map(|s| s.constellation.clone()).zip(xs.iter().copied()).collect(),
            spread: span(&xs),
            pooled,
            spread_db: span(&errors),
            esn0_errors_db: errors,
        });
    }
    Ok(CollapseReport { target_ser: target, axes })
}

/// Outcome of decoding a recorded database.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbDecodeReport {
    pub blocks: usize,
    pub counter: SerCounter,
    pub ser: f64,
    /// Metric variance used for the LLRs.
    pub sigma2_hat: f64,
    pub i_nb: f64,
}

/// Decode recorded transmissions as codewords of `code`.
///
/// Records are shuffled and cut into blocks of `n`. Each block is assigned a
/// seeded random codeword `c`, and the recorded symbols are read as `c` plus a
/// known scrambler `d = tx - c`, so every block is a valid codeword coset. LLRs
/// use the noise variance estimated from the database itself.
pub fn decode_db(
    db: &MeasurementDb,
    c: &Constellation,
    code: &QcCode,
    seed: u64,
    cfg: &SimConfig,
) -> Result<DbDecodeReport> {
    db.check(c)?;
    let n = code.n();
    let q = code.field().size();
    if c.size() != q {
        return Err(Error::Config(format!("constellation size {} does not match GF({q})", c.size())));
    }
    if db.len() < n {
        return Err(Error::Input(format!("database has {} records, one codeword needs {n}", db.len())));
    }
    let est = estimate_i_nb(db, c, &DecodingMetric::gaussian(0.5)?, &cfg.search)?;
    let sigma2 = est.sigma2_hat.expect("gaussian metric has a variance");
    let mut order: Vec<usize> = (0..db.len()).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Interleaver, 0));
    let blocks = db.len() / n;
    let labels: Vec<Symbol> = (0..c.size()).map(|p| c.label(p) as Symbol).collect();
    let mut point_of = vec![0; q];
    for (p, &l) in labels.iter().enumerate() {
        point_of[l as usize] = p;
    }
    let scale = -1.0 / (2.0 * sigma2);
    let counters: Vec<Result<SerCounter>> = (0..blocks)
        .into_par_iter()
        .map_init(
            || Decoder::with_rule(code, cfg.rule, cfg.max_iters),
            |dec, b| {
                let cw = code.random_codeword(&mut stream_rng(seed, Stream::Info, b as u64));
                let mut llr = vec![0.0; n * q];
                let mut ll = vec![0.0; q];
                for v in 0..n {
                    let r = db.records[order[b * n + v]];
                    let d = (labels[r.tx] ^ cw[v]) as usize;
                    for (l, &s) in ll.iter_mut().zip(c.points()) {
                        *l = scale * dist2(r.rx, s);
                    }
                    for (a, x) in llr[v * q..(v + 1) * q].iter_mut().enumerate() {
                        *x = ll[point_of[a ^ d]];
                    }
                }
                let res = dec.decode(&llr)?;
                let mut ctr = SerCounter::default();
                ctr.add(&cw, &res.symbols);
                Ok(ctr)
            },
        )
        .collect();
    let mut counter = SerCounter::default();
    for c in counters {
        counter.merge(&c?);
    }
    Ok(DbDecodeReport { blocks, counter, ser: counter.ser(), sigma2_hat: sigma2, i_nb: est.bits })
}

/// MI of a component channel: matched soft MI or `I_hd`.
pub fn component_mi(ch: &ComponentChannel) -> Result<f64> {
    match &ch.kind {
        ChannelKind::Soft { sigma2 } => Ok(mi_sd_numeric(&ch.constellation, *sigma2)?.bits),
        ChannelKind::Hard { w, .. } => mi_hd(w, ch.constellation.priors()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversalityReport {
    pub mi_first: f64,
    pub mi_second: f64,
    pub rows: Vec<PointStats>,
    /// `max - min` of `log10(SER)` over the nonzero rows.
    pub spread_decades: f64,
    /// Largest `|SER - mean| / mean` over the rows.
    pub max_relative_deviation: f64,
}

impl UniversalityReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# mi_first_bits={}\n# mi_second_bits={}\n# spread_decades={}\n# max_relative_deviation={}\n\
             # units: gamma is the fraction of symbols on the first channel; rates are fractions\n\
             gamma,post_fec_ser,frames,frame_errors,symbol_errors\n",
            self.mi_first, self.mi_second, self.spread_decades, self.max_relative_deviation
        );
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.gamma, r.post_fec_ser, r.frames, r.frame_errors, r.symbol_errors);
        }
        s
    }
}

/// Post-FEC SER as a function of the mixing ratio of two channels of equal MI.
pub fn universality_sweep(
    code: &QcCode,
    first: &ComponentChannel,
    second: &ComponentChannel,
    gammas: &[f64],
    mi_tolerance: f64,
    cfg: &SimConfig,
) -> Result<UniversalityReport> {
    if gammas.is_empty() {
        return Err(Error::Config("no gamma values".into()));
    }
    let (m1, m2) = (component_mi(first)?, component_mi(second)?);
    if (m1 - m2).abs() > mi_tolerance {
        return Err(Error::Config(format!(
            "channel MIs differ by {:.4} bits (> {mi_tolerance}): {m1:.4} vs {m2:.4}",
            (m1 - m2).abs()
        )));
    }
    let mut rows = Vec::new();
    for &g in gammas {
        let mut mix = ChannelMix::new(g, first.clone(), second.clone())?;
        mix.interleave = true;
        rows.push(simulate(code, &mix, cfg)?);
    }
    let sers: Vec<f64> = rows.iter().map(|r| r.post_fec_ser).collect();
    let logs: Vec<f64> = sers.iter().filter(|&&s| s > 0.0).map(|s| s.log10()).collect();
    let spread_decades = if logs.is_empty() {
        0.0
    } else {
        logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let mean = sers.iter().sum::<f64>() / sers.len() as f64;
    let max_relative_deviation =
        if mean > 0.0 { sers.iter().map(|s| (s - mean).abs() / mean).fold(0.0, f64::max) } else { 0.0 };
    Ok(UniversalityReport { mi_first: m1, mi_second: m2, rows, spread_decades, max_relative_deviation })
}
