//! Threshold curves: crossings, isotonic cleanup, log-linear fits and
//! interpolation in (MI, log10 SER).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One calibration measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub mi: f64,
    pub ser: f64,
}

/// Post-FEC SER as a function of MI for one code.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub code_id: String,
    pub target_ser: f64,
    pub seed: u64,
    /// Sorted by MI.
    pub points: Vec<CurvePoint>,
    /// MI at which the cleaned curve crosses `target_ser`.
    pub threshold: Option<f64>,
}

/// `x` at which `log10(ser)` crosses `log10(target)`, interpolating linearly
/// between the two points that bracket it. Points are visited in order of
/// decreasing SER, so `x` may increase or decrease along the curve; zero-SER
/// points cannot anchor the interpolation.
pub fn crossing(points: &[(f64, f64)], target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Input(format!("target SER must be positive, got {target}")));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    for w in pts.windows(2) {
        let ((x0, s0), (x1, s1)) = (w[0], w[1]);
        if s0 >= target && s1 < target {
            if s1 <= 0.0 {
                return Err(Error::Calibration(format!(
                    "crossing of {target:e} lies between ({x0}, {s0:e}) and ({x1}, 0); \
                     need a nonzero point below target"
                )));
            }
            if s0 == target {
                return Ok(x0);
            }
            let t = (target.log10() - s0.log10()) / (s1.log10() - s0.log10());
            return Ok(x0 + t * (x1 - x0));
        }
    }
    let hi = pts.first().map(|p| p.1).unwrap_or(f64::NAN);
    let lo = pts.last().map(|p| p.1).unwrap_or(f64::NAN);
    Err(Error::Calibration(format!(
        "no crossing of {target:e}: measured SER spans [{lo:e}, {hi:e}] over {} points",
        pts.len()
    )))
}

/// Pool-adjacent-violators fit of a non-increasing sequence (equal weights).
pub fn isotonic_non_increasing(ys: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &y in ys {
        blocks.push((y, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks");
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// A measured point with its Monte Carlo spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyPoint {
    pub mi: f64,
    pub ser: f64,
    pub stderr: f64,
}

/// Adjacent pairs (by MI) whose SER increases by more than three combined
/// standard errors.
pub fn monotonicity_violations(points: &[NoisyPoint]) -> Vec<(NoisyPoint, NoisyPoint)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.mi.total_cmp(&b.mi));
    pts.windows(2)
        .filter(|w| {
            let sd = |p: &NoisyPoint| if p.stderr.is_finite() { p.stderr } else { p.ser };
            w[1].ser - w[0].ser > 3.0 * (sd(&w[0]).powi(2) + sd(&w[1]).powi(2)).sqrt()
        })
        .map(|w| (w[0], w[1]))
        .collect()
}

/// Least-squares line `log10(ser) = a + b * mi` through points with
/// `0 < ser <= max_ser`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub points: usize,
}

impl LogLinearFit {
    pub fn new(points: &[CurvePoint], max_ser: f64) -> Result<Self> {
        let used: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.ser > 0.0 && p.ser <= max_ser)
            .map(|p| (p.mi, p.ser.log10()))
            .collect();
        if used.len() < 2 {
            return Err(Error::Calibration(format!(
                "log-linear fit needs two points with 0 < SER <= {max_ser:e}, have {}",
                used.len()
            )));
        }
        let n = used.len() as f64;
        let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
        let my = used.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx <= 0.0 {
            return Err(Error::Calibration("log-linear fit points share one MI value".into()));
        }
        let slope = sxy / sxx;
        if slope >= 0.0 {
            return Err(Error::Calibration(format!("fitted SER slope {slope} is not decreasing")));
        }
        Ok(LogLinearFit { intercept: my - slope * mx, slope, points: used.len() })
    }

    /// MI at which the fitted line reaches `ser`.
    pub fn mi_at(&self, ser: f64) -> f64 {
        (ser.log10() - self.intercept) / self.slope
    }
}

/// Interpolated post-FEC SER and the calibration points used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub ser: f64,
    pub lower: CurvePoint,
    pub upper: CurvePoint,
    /// `mi` lies outside the calibrated range.
    pub extrapolated: bool,
}

impl CalibrationCurve {
    pub fn new(code_id: impl Into<String>, target_ser: f64, seed: u64, mut points: Vec<CurvePoint>) -> Self {
        points.sort_by(|a, b| a.mi.total_cmp(&b.mi));
        let mut curve = CalibrationCurve { code_id: code_id.into(), target_ser, seed, points, threshold: None };
        curve.threshold = curve.cleaned_crossing(target_ser).ok();
        curve
    }

    /// Points with SER made non-increasing in MI.
    pub fn cleaned(&self) -> Vec<CurvePoint> {
        let ys: Vec<f64> = self.points.iter().map(|p| p.ser).collect();
        self.points
            .iter()
            .zip(isotonic_non_increasing(&ys))
            .map(|(p, ser)| CurvePoint { mi: p.mi, ser })
            .collect()
    }

    pub fn cleaned_crossing(&self, target: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self.cleaned().iter().map(|p| (p.mi, p.ser)).collect();
        crossing(&pts, target)
    }

    /// Interpolate in (MI, log10 SER) between the neighbouring nonzero
    /// points of the cleaned curve, extending the end segments outside the
    /// calibrated range.
    pub fn predict(&self, mi: f64) -> Result<Prediction> {
        let pts: Vec<CurvePoint> = self.cleaned().into_iter().filter(|p| p.ser > 0.0).collect();
        match pts.len() {
            0 => return Err(Error::Input("calibration curve has no nonzero points".into())),
            1 => {
                return Ok(Prediction { ser: pts[0].ser, lower: pts[0], upper: pts[0], extrapolated: mi != pts[0].mi })
            }
            _ => {}
        }
        if let Some(p) = pts.iter().find(|p| p.mi == mi) {
            return Ok(Prediction { ser: p.ser, lower: *p, upper: *p, extrapolated: false });
        }
        let extrapolated = mi < pts[0].mi || mi > pts[pts.len() - 1].mi;
        let i = pts.partition_point(|p| p.mi < mi).clamp(1, pts.len() - 1);
        let (a, b) = (pts[i - 1], pts[i]);
        let log = if b.mi == a.mi {
            a.ser.log10()
        } else {
            a.ser.log10() + (mi - a.mi) / (b.mi - a.mi) * (b.ser.log10() - a.ser.log10())
        };
        Ok(Prediction { ser: 10f64.powf(log).min(1.0), lower: a, upper: b, extrapolated })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# code={}", self.code_id);
        let _ = writeln!(s, "# target_ser={:e}", self.target_ser);
        let _ = writeln!(s, "# seed={}", self.seed);
        if let Some(t) = self.threshold {
            let _ = writeln!(s, "# threshold_bits={t}");
        }
        s.push_str("# units: mi_bits in bits/symbol; post_fec_ser is a fraction of GF symbols\n");
        s.push_str("mi_bits,post_fec_ser\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{}", p.mi, p.ser);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut code_id, mut target, mut seed) = (None, None, None);
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let no = i + 1;
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    let v = v.trim();
                    match k.trim() {
                        "code" => code_id = Some(v.to_string()),
                        "target_ser" => {
                            target = Some(v.parse::<f64>().map_err(|_| Error::format(no, "bad target_ser"))?)
                        }
                        "seed" => seed = Some(v.parse::<u64>().map_err(|_| Error::format(no, "bad seed"))?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line == "mi_bits,post_fec_ser" {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::format(no, "expected `mi_bits,post_fec_ser`"))?;
            let mi = a.trim().parse::<f64>().map_err(|_| Error::format(no, format!("bad MI `{a}`")))?;
            let ser = b.trim().parse::<f64>().map_err(|_| Error::format(no, format!("bad SER `{b}`")))?;
            if !(0.0..=1.0).contains(&ser) {
                return Err(Error::format(no, format!("SER {ser} outside [0, 1]")));
            }
            points.push(CurvePoint { mi, ser });
        }
        let code_id = code_id.ok_or_else(|| Error::format(0, "missing `# code=` header"))?;
        let target = target.ok_or_else(|| Error::format(0, "missing `# target_ser=` header"))?;
        Ok(CalibrationCurve::new(code_id, target, seed.unwrap_or(0), points))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Module-level alias for [`CalibrationCurve::predict`].
pub fn predict_post_fec(mi: f64, curve: &CalibrationCurve) -> Result<Prediction> {
    curve.predict(mi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(mis: &[f64]) -> Vec<CurvePoint> {
        mis.iter().map(|&mi| CurvePoint { mi, ser: 10f64.powf(-10.0 * (mi - 2.0)) }).collect()
    }

    #[test]
    fn closed_form_crossing() {
        let pts: Vec<(f64, f64)> = synthetic(&[2.1, 2.25, 2.35, 2.45, 2.6]).iter().map(|p| (p.mi, p.ser)).collect();
        let t = crossing(&pts, 1e-4).unwrap();
        assert!((t - 2.4).abs() < 1e-12, "{t}");
        let curve = CalibrationCurve::new("x", 1e-4, 0, synthetic(&[2.1, 2.3, 2.5]));
        assert!((curve.threshold.unwrap() - 2.4).abs() < 1e-12);
    }

    #[test]
    fn crossing_errors() {
        assert!(matches!(crossing(&[(1.0, 0.5), (2.0, 0.1)], 1e-3), Err(Error::Calibration(_))));
        assert!(matches!(crossing(&[(1.0, 0.5), (2.0, 0.0)], 1e-3), Err(Error::Calibration(_))));
        assert!(crossing(&[], 1e-3).is_err());
    }

    #[test]
    fn crossing_on_decreasing_axis() {
        // SER rising with pre-FEC SER on the x axis
        let t = crossing(&[(0.1, 1e-4), (0.2, 1e-2)], 1e-3).unwrap();
        assert!((t - 0.15).abs() < 1e-12);
    }

    #[test]
    fn interpolation_rules() {
        let curve = CalibrationCurve::new(
            "x",
            1e-3,
            0,
            vec![CurvePoint { mi: 2.5, ser: 1e-2 }, CurvePoint { mi: 2.6, ser: 1e-4 }],
        );
        let p = curve.predict(2.55).unwrap();
        assert!((p.ser - 1e-3).abs() < 1e-15);
        assert!(!p.extrapolated);
        assert_eq!(curve.predict(2.6).unwrap().ser, 1e-4);
        assert!(curve.predict(2.7).unwrap().extrapolated);
        assert!(CalibrationCurve::new("x", 1e-3, 0, vec![]).predict(2.0).is_err());
    }

    #[test]
    fn pava_examples() {
        assert_eq!(isotonic_non_increasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_non_increasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn violation_detection() {
        let p = |mi, ser, stderr| NoisyPoint { mi, ser, stderr };
        assert!(monotonicity_violations(&[p(1.0, 0.1, 0.01), p(2.0, 0.11, 0.01)]).is_empty());
        assert_eq!(monotonicity_violations(&[p(1.0, 0.1, 0.001), p(2.0, 0.2, 0.001)]).len(), 1);
    }

    #[test]
    fn fit_recovers_line() {
        let fit = LogLinearFit::new(&synthetic(&[2.1, 2.25, 2.3, 2.6]), 2e-2).unwrap();
        assert_eq!(fit.points, 3);
        assert!((fit.mi_at(1e-4) - 2.4).abs() < 1e-12);
        assert!(LogLinearFit::new(&synthetic(&[2.6]), 1e-2).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let curve = CalibrationCurve::new("qc-test", 1e-3, 9, synthetic(&[2.1, 2.2, 2.35, 2.5]));
        let back = CalibrationCurve::parse(&curve.to_csv()).unwrap();
        assert_eq!(back, curve);
        assert!(CalibrationCurve::parse("mi_bits,post_fec_ser\n1,0.5\n").is_err());
    }

    proptest! {
        #[test]
        fn pava_output_is_monotone_and_preserves_mean(ys in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let fit = isotonic_non_increasing(&ys);
            prop_assert_eq!(fit.len(), ys.len());
            for w in fit.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12);
            }
            let (a, b): (f64, f64) = (ys.iter().sum(), fit.iter().sum());
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn prediction_hits_calibration_points(k in 0usize..5) {
            let pts = synthetic(&[2.0, 2.1, 2.2, 2.3, 2.4]);
            let curve = CalibrationCurve::new("x", 1e-3, 0, pts.clone());
            prop_assert_eq!(curve.predict(pts[k].mi).unwrap().ser, pts[k].ser);
        }
    }
}
