//! End-to-end checks on the n = 5000 GF(8) preset codes.

use nbfec::constellation::Constellation;
use nbfec::ldpc::{build_code, QcCode, DEFAULT_CODE_SEED, DEFAULT_LENGTH, RATE_PRESETS};
use nbfec::predict::{calibrate, ChannelModel, SweepPlan};
use nbfec::sim::{simulate_awgn, SimConfig};

fn r08() -> QcCode {
    build_code(3, 0.8, DEFAULT_LENGTH, DEFAULT_CODE_SEED).unwrap()
}

#[test]
fn preset_codes_have_no_four_cycles() {
    for &(rate, _, _) in RATE_PRESETS.iter() {
        let code = build_code(3, rate, DEFAULT_LENGTH, DEFAULT_CODE_SEED).unwrap();
        // brute force over pairs of checks sharing two variables
        let mut seen = std::collections::HashSet::new();
        for i in 0..code.check_count() {
            let vars = code.check_vars(i);
            for a in 0..vars.len() {
                for b in a + 1..vars.len() {
                    let key = (vars[a].min(vars[b]), vars[a].max(vars[b]));
                    assert!(seen.insert(key), "rate {rate}: 4-cycle through variables {key:?}");
                }
            }
        }
        assert!(!code.has_four_cycle());
        assert!(code.girth().unwrap() >= 6, "rate {rate}");
        assert!((code.n() as f64 - DEFAULT_LENGTH as f64).abs() <= 25.0, "rate {rate}: n = {}", code.n());
    }
}

#[test]
fn zero_and_random_codewords_agree() {
    let code = r08();
    let c = Constellation::resolve("c4").unwrap();
    let base = SimConfig { min_frames: 64, max_frames: 64, seed: 5, ..SimConfig::default() };
    let random = simulate_awgn(&code, &c, 7.87, &base).unwrap();
    let zero = simulate_awgn(&code, &c, 7.87, &SimConfig { random_codewords: false, ..base.clone() }).unwrap();
    assert_eq!(random.frames, 64);
    assert!(random.symbol_errors > 0 && zero.symbol_errors > 0);
    let bound = 3.0 * (random.ser_stderr().powi(2) + zero.ser_stderr().powi(2)).sqrt();
    assert!(
        (random.post_fec_ser - zero.post_fec_ser).abs() <= bound,
        "random {} vs zero {} (3 sigma = {bound})",
        random.post_fec_ser,
        zero.post_fec_ser
    );
}

#[test]
fn rate_08_waterfall_bracket() {
    let code = r08();
    let c = Constellation::resolve("8psk").unwrap();
    let cfg = SimConfig { max_frames: 200, ..SimConfig::default() };
    let high = ChannelModel::Soft.esn0_for_mi(&c, 2.65).unwrap();
    let low = ChannelModel::Soft.esn0_for_mi(&c, 2.40).unwrap();
    let above = simulate_awgn(&code, &c, high, &cfg).unwrap();
    let below = simulate_awgn(&code, &c, low, &cfg).unwrap();
    assert!(above.post_fec_ser < 1e-3, "SER {} at 2.65 bits", above.post_fec_ser);
    assert!(below.post_fec_ser > 1e-1, "SER {} at 2.40 bits", below.post_fec_ser);
    assert!((above.i_nb - 2.65).abs() < 0.02);
}

#[test]
fn holdout_prediction_within_factor_three() {
    let code = r08();
    let c = Constellation::resolve("8psk").unwrap();
    let cfg = SimConfig { max_frames: 400, seed: 11, ..SimConfig::default() };
    let mis = [2.515, 2.522, 2.529, 2.536, 2.543];
    let esn0: Vec<f64> = mis.iter().map(|&m| ChannelModel::Soft.esn0_for_mi(&c, m).unwrap()).collect();
    let train: Vec<f64> = esn0.iter().step_by(2).copied().collect();
    let cal = calibrate(&code, std::slice::from_ref(&c), &ChannelModel::Soft, 1e-2, &SweepPlan::Grid(train), &cfg).unwrap();
    let mut checked = 0;
    for &e in esn0.iter().skip(1).step_by(2) {
        let direct = simulate_awgn(&code, &c, e, &SimConfig { seed: 12, ..cfg.clone() }).unwrap();
        if !(1e-4..=1e-1).contains(&direct.post_fec_ser) {
            continue;
        }
        let p = cal.curve.predict(direct.i_nb).unwrap();
        let ratio = p.ser / direct.post_fec_ser;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "Es/N0 {e}: predicted {} direct {}", p.ser, direct.post_fec_ser);
        checked += 1;
    }
    assert!(checked >= 1);
}
