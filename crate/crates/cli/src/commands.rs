//! Subcommand implementations.

use std::fmt::Write as _;

use anyhow::{bail, ensure, Context, Result};
use log::info;
use nbfec::channel::{esn0_db_to_sigma2, ChannelMix};
use nbfec::constellation::Constellation;
use nbfec::db::{synthesize, MeasurementDb};
use nbfec::demod::DecodingMetric;
use nbfec::ldpc::{build_code as build_preset, CheckRule, QcCode};
use nbfec::metrics::{analyze as analyze_db, estimate_i_nb};
use nbfec::optimize::NuSearch;
use nbfec::predict::{
    calibrate as run_calibration, decode_db as run_decode_db, universality_sweep, Axis, CalibrationCurve,
    Calibration, ChannelModel, ConstellationSweep, SweepPlan,
};
use nbfec::sim::{simulate as run_point, PointStats, SimConfig};

use crate::grid::{parse_grid, parse_list, parse_pair};
use crate::manifest::Outputs;
use crate::{
    AnalyzeArgs, BuildCodeArgs, CalibrateArgs, CodeArgs, DecodeDbArgs, DmcArgs, GenDbArgs, PredictArgs, SimArgs,
    SimulateArgs, UniversalityArgs,
};

fn constellation(name: &str) -> Result<Constellation> {
    Constellation::resolve(name).with_context(|| format!("constellation `{name}`"))
}

fn constellations(list: &str) -> Result<Vec<Constellation>> {
    let cs: Vec<Constellation> = parse_list(list).iter().map(|n| constellation(n)).collect::<Result<_>>()?;
    ensure!(!cs.is_empty(), "no constellation given");
    ensure!(cs.iter().all(|c| c.size() == cs[0].size()), "constellations must share one size");
    Ok(cs)
}

fn code(args: &CodeArgs, m: usize) -> Result<QcCode> {
    let spec = args.code.strip_prefix('r').unwrap_or(&args.code);
    let code = match spec.parse::<f64>() {
        Ok(rate) => build_preset(m, rate, args.code_length, args.code_seed)?,
        Err(_) => QcCode::load(std::path::Path::new(&args.code)).with_context(|| format!("code `{}`", args.code))?,
    };
    ensure!(code.m() == m, "code is over GF(2^{}) but the constellation carries {m} bits", code.m());
    info!("code {} (n={}, k={}, girth {:?})", code.id(), code.n(), code.k(), code.girth());
    Ok(code)
}

fn search(range: &str) -> Result<NuSearch> {
    let (lo, hi) = parse_pair(range)?;
    let s = NuSearch { lo, hi, ..NuSearch::default() };
    s.validate()?;
    Ok(s)
}

fn sim_config(a: &SimArgs, seed: u64) -> Result<SimConfig> {
    let cfg = SimConfig {
        seed,
        target_symbol_errors: a.target_errors,
        min_frame_errors: a.min_frame_errors,
        max_frames: a.max_frames,
        min_frames: a.min_frames,
        metric_records: a.metric_records,
        metric_k: a.metric_k,
        search: search(&a.nu_range)?,
        rule: if a.min_sum { CheckRule::MinSum } else { CheckRule::SumProduct },
        max_iters: a.max_iters,
        ..SimConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sweeps_csv(sweeps: &[ConstellationSweep]) -> String {
    let mut s = String::from(
        "# units: esn0_db in dB; *_bits in bits/symbol; sigma2 per real dimension; rates are fractions\n",
    );
    let _ = writeln!(s, "constellation,{}", PointStats::CSV_HEADER);
    for sw in sweeps {
        for p in &sw.points {
            let _ = writeln!(s, "{},{}", sw.constellation, p.csv_row());
        }
    }
    s
}

/// Plot-ready post-FEC SER against each candidate predictor.
fn curves_csv(sweeps: &[ConstellationSweep]) -> String {
    let mut s = String::from("# units: esn0_db in dB; mi_bits and gmi_bits in bits/symbol; rates are fractions\n");
    s.push_str("constellation,esn0_db,mi_bits,gmi_bits,pre_fec_ber,pre_fec_ser,post_fec_ser\n");
    for sw in sweeps {
        for p in &sw.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                sw.constellation,
                p.esn0_db,
                sw.model.mi_of(p),
                p.gmi,
                p.pre_fec_ber,
                p.pre_fec_ser,
                p.post_fec_ser
            );
        }
    }
    s
}

pub fn simulate(a: &SimulateArgs, workers: usize) -> Result<()> {
    let c = constellation(&a.constellation)?;
    let code = code(&a.code, c.bits())?;
    let grid = parse_grid(&a.esn0)?;
    let cfg = sim_config(&a.sim, a.seed)?;
    let model = if a.hard {
        ChannelModel::Hard { dmc_samples: a.dmc_samples, dmc_seed: a.seed }
    } else {
        ChannelModel::Soft
    };
    let mut sweep = ConstellationSweep { constellation: c.name().to_string(), model, points: Vec::new() };
    let mut failed = Vec::new();
    for &e in &grid {
        let point = model.component(&c, e).and_then(|ch| run_point(&code, &ChannelMix::single(ch), &cfg));
        match point {
            Ok(p) => {
                info!("Es/N0 {e} dB: SER {:.3e}", p.post_fec_ser);
                sweep.points.push(p);
            }
            Err(err) => failed.push(format!("Es/N0 {e} dB: {err}")),
        }
    }
    let sweeps = [sweep];
    let mut out = Outputs::new(&a.out);
    out.add("simulate.csv", sweeps_csv(&sweeps));
    out.add("curves.csv", curves_csv(&sweeps));
    out.write("simulate", workers, a)?;
    if !failed.is_empty() {
        bail!("{} of {} sweep points failed:\n  {}", failed.len(), grid.len(), failed.join("\n  "));
    }
    Ok(())
}

fn calibration_outputs(out: &mut Outputs, cal: &Calibration, code: &QcCode, bits: usize, extrapolate: Option<f64>) -> Result<()> {
    out.add("curve.csv", cal.curve.to_csv());
    out.add("points.csv", sweeps_csv(&cal.sweeps));
    out.add("curves.csv", curves_csv(&cal.sweeps));
    let t = cal.threshold();
    let mut s = String::from("# units: *_bits in bits/symbol; normalized threshold is bits per constellation bit\n");
    s.push_str("quantity,value\n");
    let _ = writeln!(s, "code,{}", code.id());
    let _ = writeln!(s, "rate,{}", code.rate());
    let _ = writeln!(s, "target_ser,{:e}", cal.curve.target_ser);
    let _ = writeln!(s, "threshold_bits,{t}");
    let _ = writeln!(s, "normalized_threshold,{}", t / bits as f64);
    if let Some(target) = extrapolate {
        let (tx, fit) = cal.extrapolated_threshold(target, 1e-2)?;
        let _ = writeln!(s, "extrapolated_target_ser,{target:e}");
        let _ = writeln!(s, "extrapolated_threshold_bits,{tx}");
        let _ = writeln!(s, "extrapolated_normalized_threshold,{}", tx / bits as f64);
        let _ = writeln!(s, "fit_points,{}", fit.points);
        let _ = writeln!(s, "fit_slope_decades_per_bit,{}", fit.slope);
    }
    out.add("threshold.csv", s);
    if cal.sweeps.len() > 1 {
        out.add("collapse.csv", cal.collapse(cal.curve.target_ser)?.to_csv());
    }
    println!("threshold_bits={t}");
    Ok(())
}

pub fn calibrate(a: &CalibrateArgs, workers: usize) -> Result<()> {
    let cs = constellations(&a.constellation)?;
    let m = cs[0].bits();
    let code = match a.rate {
        Some(r) => build_preset(m, r, a.code.code_length, a.code.code_seed)?,
        None => code(&a.code, m)?,
    };
    let cfg = sim_config(&a.sim, a.seed)?;
    let plan = match &a.esn0 {
        Some(g) => SweepPlan::Grid(parse_grid(g)?),
        None => SweepPlan::for_rate(code.design_rate(), m),
    };
    let cal = run_calibration(&code, &cs, &ChannelModel::Soft, a.target_ser, &plan, &cfg)?;
    let mut out = Outputs::new(&a.out);
    calibration_outputs(&mut out, &cal, &code, m, a.extrapolate_to)?;
    out.write("calibrate", workers, a)?;
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs, workers: usize) -> Result<()> {
    let db = MeasurementDb::load(&a.db).with_context(|| format!("reading {}", a.db.display()))?;
    let c = constellation(a.constellation.as_deref().unwrap_or(&db.constellation))?;
    let report = analyze_db(&db, &c, &DecodingMetric::gaussian(a.metric_k)?, &search(&a.nu_range)?)?;
    let mut out = Outputs::new(&a.out);
    out.add("metrics.csv", report.to_csv());
    out.write("analyze", workers, a)?;
    Ok(())
}

pub fn predict(a: &PredictArgs, workers: usize) -> Result<()> {
    let curve = CalibrationCurve::load(&a.curve).with_context(|| format!("reading {}", a.curve.display()))?;
    let mis: Vec<f64> = match (&a.mi, &a.db) {
        (Some(list), None) => parse_list(list)
            .iter()
            .map(|v| v.parse::<f64>().with_context(|| format!("bad MI `{v}`")))
            .collect::<Result<_>>()?,
        (None, Some(path)) => {
            let db = MeasurementDb::load(path).with_context(|| format!("reading {}", path.display()))?;
            let c = constellation(a.constellation.as_deref().unwrap_or(&db.constellation))?;
            vec![estimate_i_nb(&db, &c, &DecodingMetric::gaussian(0.5)?, &NuSearch::default())?.bits]
        }
        _ => bail!("give exactly one of --mi or --db"),
    };
    let mut s = format!(
        "# code={}\n# units: *_bits in bits/symbol; SER values are fractions of GF symbols\n\
         mi_bits,post_fec_ser,lower_mi_bits,lower_ser,upper_mi_bits,upper_ser,extrapolated\n",
        curve.code_id
    );
    for mi in mis {
        let p = curve.predict(mi)?;
        if p.extrapolated {
            log::warn!("MI {mi} lies outside the calibrated range; extrapolating");
        }
        let _ = writeln!(
            s,
            "{mi},{},{},{},{},{},{}",
            p.ser, p.lower.mi, p.lower.ser, p.upper.mi, p.upper.ser, p.extrapolated
        );
    }
    let mut out = Outputs::new(&a.out);
    out.add("prediction.csv", s);
    out.write("predict", workers, a)?;
    Ok(())
}

pub fn decode_db(a: &DecodeDbArgs, workers: usize) -> Result<()> {
    let db = MeasurementDb::load(&a.db).with_context(|| format!("reading {}", a.db.display()))?;
    let c = constellation(a.constellation.as_deref().unwrap_or(&db.constellation))?;
    let code = code(&a.code, c.bits())?;
    let cfg = SimConfig { max_iters: a.max_iters, ..SimConfig::default() };
    let r = run_decode_db(&db, &c, &code, a.seed, &cfg)?;
    let mut s = String::from("# units: sigma2_hat per real dimension; i_nb_bits in bits/symbol; SER is a fraction\n");
    s.push_str("quantity,value\n");
    let _ = writeln!(s, "code,{}", code.id());
    let _ = writeln!(s, "blocks,{}", r.blocks);
    let _ = writeln!(s, "symbols,{}", r.counter.symbols);
    let _ = writeln!(s, "symbol_errors,{}", r.counter.symbol_errors);
    let _ = writeln!(s, "frame_errors,{}", r.counter.frame_errors);
    let _ = writeln!(s, "post_fec_ser,{}", r.ser);
    let _ = writeln!(s, "sigma2_hat,{}", r.sigma2_hat);
    let _ = writeln!(s, "i_nb_bits,{}", r.i_nb);
    let mut out = Outputs::new(&a.out);
    out.add("decode.csv", s);
    out.write("decode-db", workers, a)?;
    Ok(())
}

pub fn universality(a: &UniversalityArgs, workers: usize) -> Result<()> {
    let c1 = constellation(&a.constellation)?;
    let c2 = constellation(a.constellation2.as_deref().unwrap_or(&a.constellation))?;
    let code = code(&a.code, c1.bits())?;
    let cfg = sim_config(&a.sim, a.seed)?;
    let gammas = parse_grid(&a.gamma)?;
    ensure!(gammas.iter().all(|g| (0.0..=1.0).contains(g)), "gamma values must lie in [0, 1]");
    let second = if a.hard2 {
        ChannelModel::Hard { dmc_samples: a.dmc_samples, dmc_seed: a.seed }
    } else {
        ChannelModel::Soft
    };
    let e1 = ChannelModel::Soft.esn0_for_mi(&c1, a.mi)?;
    let e2 = second.esn0_for_mi(&c2, a.mi)?;
    info!("Es/N0 matched to {} bits: {e1:.3} dB and {e2:.3} dB", a.mi);
    let ch1 = ChannelModel::Soft.component(&c1, e1)?;
    let ch2 = second.component(&c2, e2)?;
    let report = universality_sweep(&code, &ch1, &ch2, &gammas, a.mi_tolerance, &cfg)?;
    let mut out = Outputs::new(&a.out);
    out.add("universality.csv", report.to_csv());
    out.write("universality", workers, a)?;
    Ok(())
}

pub fn dmc(a: &DmcArgs, workers: usize) -> Result<()> {
    let cs = constellations(&a.constellation)?;
    let m = cs[0].bits();
    let code = code(&a.code, m)?;
    let cfg = sim_config(&a.sim, a.seed)?;
    let plan = match &a.esn0 {
        Some(g) => SweepPlan::Grid(parse_grid(g)?),
        None => SweepPlan::for_rate(code.design_rate(), m),
    };
    let model = ChannelModel::Hard { dmc_samples: a.dmc_samples, dmc_seed: a.seed };
    let cal = run_calibration(&code, &cs, &model, a.target_ser, &plan, &cfg)?;
    let mut s = format!(
        "# target_ser={:e}\n# units: i_hd_bits in bits/symbol; esn0_db in dB; pre_fec_ser is a fraction\n\
         constellation,i_hd_bits,pre_fec_ser,esn0_db\n",
        a.target_ser
    );
    for sw in &cal.sweeps {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            sw.constellation,
            sw.crossing(Axis::Mi, a.target_ser)?,
            sw.crossing(Axis::PreFecSer, a.target_ser)?,
            sw.crossing(Axis::Esn0, a.target_ser)?
        );
    }
    let mut out = Outputs::new(&a.out);
    out.add("points.csv", sweeps_csv(&cal.sweeps));
    out.add("curves.csv", curves_csv(&cal.sweeps));
    out.add("curve.csv", cal.curve.to_csv());
    out.add("crossings.csv", s);
    if cal.sweeps.len() > 1 {
        out.add("collapse.csv", cal.collapse(a.target_ser)?.to_csv());
    }
    out.write("dmc", workers, a)?;
    println!("threshold_bits={}", cal.threshold());
    Ok(())
}

pub fn gen_db(a: &GenDbArgs, workers: usize) -> Result<()> {
    let c = constellation(&a.constellation)?;
    let db = synthesize(&c, esn0_db_to_sigma2(a.esn0), a.n, a.seed)?;
    let mut out = Outputs::new(&a.out);
    out.add("db.csv", db.to_csv());
    out.write("gen-db", workers, a)?;
    Ok(())
}

pub fn build_code(a: &BuildCodeArgs, workers: usize) -> Result<()> {
    let code = build_preset(a.m, a.rate, a.n, a.seed)?;
    let mut s = String::from("quantity,value\n");
    let _ = writeln!(s, "id,{}", code.id());
    let _ = writeln!(s, "n,{}", code.n());
    let _ = writeln!(s, "k,{}", code.k());
    let _ = writeln!(s, "rank,{}", code.rank());
    let _ = writeln!(s, "design_rate,{}", code.design_rate());
    let _ = writeln!(s, "rate,{}", code.rate());
    let _ = writeln!(s, "girth,{}", code.girth().map_or("none".to_string(), |g| g.to_string()));
    let mut out = Outputs::new(&a.out);
    out.add("code.txt", code.to_preset());
    out.add("code_info.csv", s);
    out.write("build-code", workers, a)?;
    Ok(())
}
