//! Monte Carlo link simulation: encode, scramble, map, transmit, demodulate,
//! decode.
//!
//! Every frame is scrambled with a uniform additive coset known to the
//! receiver, so the transmitted symbols are uniform whatever the codeword and
//! results do not depend on symmetry of the constellation. Each frame draws
//! from its own seeded streams and frames are processed in fixed-size batches,
//! so the outcome depends on the seed and configuration but not on the number
//! of worker threads.

use log::debug;
use rand::RngExt;
use rayon::prelude::*;

use crate::channel::{sigma2_to_esn0_db, ChannelKind, ChannelMix, ComponentChannel, Observation};
use crate::constellation::{dist2, Constellation};
use crate::db::{MeasurementDb, Record};
use crate::demod::DecodingMetric;
use crate::error::{Error, Result};
use crate::gf::Symbol;
use crate::ldpc::{CheckRule, Decoder, QcCode, SerCounter, DEFAULT_MAX_ITERS};
use crate::metrics::{analyze, mi_hd};
use crate::optimize::NuSearch;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Stop once this many post-FEC symbol errors ...
    pub target_symbol_errors: u64,
    /// ... spread over at least this many erroneous frames,
    pub min_frame_errors: u64,
    /// or when the frame cap is reached.
    pub max_frames: u64,
    pub min_frames: u64,
    pub batch: usize,
    /// Soft records kept for the information metrics.
    pub metric_records: usize,
    /// Metric variance for the analysis; the channel variance if `None`.
    pub metric_k: Option<f64>,
    pub search: NuSearch,
    pub rule: CheckRule,
    pub max_iters: usize,
    /// Random codewords instead of the all-zero word.
    pub random_codewords: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            target_symbol_errors: 100,
            min_frame_errors: 10,
            max_frames: 2000,
            min_frames: 32,
            batch: 16,
            metric_records: 200_000,
            metric_k: None,
            search: NuSearch::default(),
            rule: CheckRule::SumProduct,
            max_iters: DEFAULT_MAX_ITERS,
            random_codewords: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.max_frames == 0 || self.max_iters == 0 {
            return Err(Error::Config("batch, max_frames and max_iters must be positive".into()));
        }
        if let Some(k) = self.metric_k {
            DecodingMetric::gaussian(k)?;
        }
        self.search.validate()
    }
}

/// Outcome of one operating point. Metrics that do not apply are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub esn0_db: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub symbols: u64,
    pub symbol_errors: u64,
    pub post_fec_ser: f64,
    pub pre_fec_ser: f64,
    pub pre_fec_ber: f64,
    pub mean_iterations: f64,
    pub i_nb: f64,
    pub i_nb_stderr: f64,
    pub nu_hat: f64,
    pub sigma2_hat: f64,
    pub aclb: f64,
    pub gmi: f64,
    pub i_hd: f64,
}

impl PointStats {
    pub const CSV_HEADER: &'static str = "esn0_db,sigma2,gamma,frames,frame_errors,symbols,symbol_errors,post_fec_ser,\
pre_fec_ser,pre_fec_ber,mean_iterations,i_nb_bits,i_nb_stderr_bits,nu_hat,sigma2_hat,aclb_bits,gmi_bits,i_hd_bits";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.esn0_db,
            self.sigma2,
            self.gamma,
            self.frames,
            self.frame_errors,
            self.symbols,
            self.symbol_errors,
            self.post_fec_ser,
            self.pre_fec_ser,
            self.pre_fec_ber,
            self.mean_iterations,
            self.i_nb,
            self.i_nb_stderr,
            self.nu_hat,
            self.sigma2_hat,
            self.aclb,
            self.gmi,
            self.i_hd
        )
    }

    /// Binomial-style relative spread of the post-FEC SER estimate.
    pub fn ser_stderr(&self) -> f64 {
        if self.frame_errors == 0 {
            f64::INFINITY
        } else {
            self.post_fec_ser / (self.frame_errors as f64).sqrt()
        }
    }
}

#[derive(Default)]
struct FrameOutcome {
    counter: SerCounter,
    pre_symbol_errors: u64,
    pre_bit_errors: u64,
    iterations: u64,
    records: Vec<Record>,
}

/// Point index carrying each label, per component.
fn label_map(c: &Constellation) -> Vec<usize> {
    let mut map = vec![0; c.size()];
    for p in 0..c.size() {
        map[c.label(p) as usize] = p;
    }
    map
}

struct Link<'a> {
    code: &'a QcCode,
    mix: &'a ChannelMix,
    cfg: &'a SimConfig,
    maps: [Vec<usize>; 2],
}

impl Link<'_> {
    fn frame(&self, f: u64, decoder: &mut Decoder) -> Result<FrameOutcome> {
        let code = self.code;
        let n = code.n();
        let q = code.field().size();
        let seed = self.cfg.seed;
        let cw = if self.cfg.random_codewords {
            code.random_codeword(&mut stream_rng(seed, Stream::Info, f))
        } else {
            vec![0; n]
        };
        let mut srng = stream_rng(seed, Stream::Scrambler, f);
        let scrambler: Vec<Symbol> = (0..n).map(|_| srng.random_range(0..q) as Symbol).collect();
        let route = self.mix.routing(n, seed, f);
        let mut rngs = [
            stream_rng(seed, self.mix.stream(true, n), f),
            stream_rng(seed, self.mix.stream(false, n), f),
        ];

        let mut out = FrameOutcome::default();
        let first_record = f as usize * n;
        let mut llr = vec![0.0; n * q];
        let mut ll = vec![0.0; q];
        for v in 0..n {
            let slot = if route[v] { 0 } else { 1 };
            let comp: &ComponentChannel = self.mix.component(route[v]);
            let c = &comp.constellation;
            let map = &self.maps[slot];
            let t = (cw[v] ^ scrambler[v]) as usize;
            let p = map[t];
            let decided = match (comp.observe(p, &mut rngs[slot]), &comp.kind) {
                (Observation::Soft(y), ChannelKind::Soft { sigma2 } | ChannelKind::Hard { sigma2, .. }) => {
                    let scale = -1.0 / (2.0 * sigma2);
                    for (l, &s) in ll.iter_mut().zip(c.points()) {
                        *l = scale * dist2(y, s);
                    }
                    if slot == 0 && first_record + v < self.cfg.metric_records {
                        out.records.push(Record { tx: p, rx: y });
                    }
                    c.hard_decide(y)
                }
                (Observation::Hard(j), ChannelKind::Hard { w, .. }) => {
                    for (l, &pr) in ll.iter_mut().zip(w.row(j)) {
                        *l = pr.ln();
                    }
                    j
                }
                (Observation::Hard(_), ChannelKind::Soft { .. }) => unreachable!("soft channels emit points"),
            };
            if decided != p {
                out.pre_symbol_errors += 1;
                out.pre_bit_errors += (c.label(decided) ^ c.label(p)).count_ones() as u64;
            }
            let d = scrambler[v] as usize;
            let row = &mut llr[v * q..(v + 1) * q];
            for (a, r) in row.iter_mut().enumerate() {
                *r = ll[map[a ^ d]];
            }
        }
        let res = decoder.decode(&llr)?;
        out.counter.add(&cw, &res.symbols);
        out.iterations = res.iterations as u64;
        Ok(out)
    }
}

/// Simulate one operating point until the stopping rule is met.
pub fn simulate(code: &QcCode, mix: &ChannelMix, cfg: &SimConfig) -> Result<PointStats> {
    cfg.validate()?;
    let q = code.field().size();
    if mix.alphabet_size() != q {
        return Err(Error::Config(format!(
            "constellation size {} does not match GF({q})",
            mix.alphabet_size()
        )));
    }
    let link = Link {
        code,
        mix,
        cfg,
        maps: [label_map(&mix.first.constellation), label_map(&mix.second.constellation)],
    };
    let mut counter = SerCounter::default();
    let (mut pre_sym, mut pre_bit, mut iters) = (0u64, 0u64, 0u64);
    let mut records = Vec::new();
    let mut next = 0u64;
    loop {
        let done = counter.frames >= cfg.min_frames
            && counter.symbol_errors >= cfg.target_symbol_errors
            && counter.frame_errors >= cfg.min_frame_errors;
        if done || next >= cfg.max_frames {
            break;
        }
        let end = (next + cfg.batch as u64).min(cfg.max_frames);
        let outcomes: Vec<Result<FrameOutcome>> = (next..end)
            .into_par_iter()
            .map_init(
                || Decoder::with_rule(code, cfg.rule, cfg.max_iters),
                |dec, f| link.frame(f, dec),
            )
            .collect();
        for o in outcomes {
            let o = o?;
            counter.merge(&o.counter);
            pre_sym += o.pre_symbol_errors;
            pre_bit += o.pre_bit_errors;
            iters += o.iterations;
            records.extend(o.records);
        }
        next = end;
        debug!(
            "frames {} symbol errors {} frame errors {}",
            counter.frames, counter.symbol_errors, counter.frame_errors
        );
    }

    let first = &mix.first;
    let sigma2 = first.sigma2();
    let mut stats = PointStats {
        esn0_db: sigma2_to_esn0_db(sigma2),
        sigma2,
        gamma: mix.gamma,
        frames: counter.frames,
        frame_errors: counter.frame_errors,
        symbols: counter.symbols,
        symbol_errors: counter.symbol_errors,
        post_fec_ser: counter.ser(),
        pre_fec_ser: pre_sym as f64 / counter.symbols as f64,
        pre_fec_ber: pre_bit as f64 / (counter.symbols as f64 * first.constellation.bits() as f64),
        mean_iterations: iters as f64 / counter.frames as f64,
        i_nb: f64::NAN,
        i_nb_stderr: f64::NAN,
        nu_hat: f64::NAN,
        sigma2_hat: f64::NAN,
        aclb: f64::NAN,
        gmi: f64::NAN,
        i_hd: f64::NAN,
    };
    if let ChannelKind::Hard { w, .. } = &first.kind {
        stats.i_hd = mi_hd(w, first.constellation.priors())?;
    }
    if !records.is_empty() {
        let c = &first.constellation;
        let db = MeasurementDb::new(c.name(), c.size(), records)?;
        let metric = DecodingMetric::gaussian(cfg.metric_k.unwrap_or(sigma2))?;
        let r = analyze(&db, c, &metric, &cfg.search)?;
        stats.i_nb = r.i_nb;
        stats.i_nb_stderr = r.i_nb_stderr;
        stats.nu_hat = r.nu_hat;
        stats.sigma2_hat = r.sigma2_hat.unwrap_or(f64::NAN);
        stats.aclb = r.aclb;
        stats.gmi = r.gmi;
    }
    Ok(stats)
}

/// AWGN with soft output at `esn0_db`.
pub fn simulate_awgn(code: &QcCode, c: &Constellation, esn0_db: f64, cfg: &SimConfig) -> Result<PointStats> {
    let comp = ComponentChannel::soft(c.clone(), crate::channel::esn0_db_to_sigma2(esn0_db))?;
    simulate(code, &ChannelMix::single(comp), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::build_regular;

    fn quick() -> SimConfig {
        SimConfig { max_frames: 8, min_frames: 4, batch: 4, metric_records: 5000, ..SimConfig::default() }
    }

    #[test]
    fn high_snr_is_error_free() {
        let code = build_regular(3, 3, 6, 600, 2).unwrap();
        let c = Constellation::resolve("8psk").unwrap();
        let s = simulate_awgn(&code, &c, 20.0, &quick()).unwrap();
        assert_eq!(s.symbol_errors, 0);
        assert_eq!(s.frames, 8);
        assert!((s.i_nb - 3.0).abs() < 0.01);
        assert!(s.i_hd.is_nan());
    }

    #[test]
    fn very_low_snr_fails() {
        let code = build_regular(3, 3, 6, 600, 2).unwrap();
        let c = Constellation::resolve("c2").unwrap();
        let s = simulate_awgn(&code, &c, 0.0, &quick()).unwrap();
        assert!(s.post_fec_ser > 0.1, "{s:?}");
        assert!(s.pre_fec_ser > 0.1);
    }

    #[test]
    fn result_is_thread_count_independent() {
        let code = build_regular(3, 3, 6, 600, 2).unwrap();
        let c = Constellation::resolve("c1").unwrap();
        let run = |t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| simulate_awgn(&code, &c, 7.0, &quick()).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.csv_row(), b.csv_row());
    }

    #[test]
    fn hard_channel_reports_i_hd() {
        let code = build_regular(3, 3, 6, 600, 2).unwrap();
        let c = Constellation::resolve("8psk").unwrap();
        let comp = ComponentChannel::hard(c, crate::channel::esn0_db_to_sigma2(14.0), 20_000, 3).unwrap();
        let s = simulate(&code, &ChannelMix::single(comp), &quick()).unwrap();
        assert!(s.i_hd > 2.9 && s.i_hd <= 3.0);
        assert!(s.i_nb.is_nan());
        assert_eq!(s.symbol_errors, 0);
    }
}
