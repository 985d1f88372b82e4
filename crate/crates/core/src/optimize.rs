//! Scalar maximization for unimodal objectives.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)` with the argmax located within `tol`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::Input(format!("empty bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // the endpoints may beat the interior probes when the peak is on the boundary
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        if (x - best.0).abs() <= tol {
            let fx = f(x);
            if fx > best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}

/// Search bracket and tolerance for the mismatched-decoding exponent nu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuSearch {
    pub lo: f64,
    pub hi: f64,
    /// Grid points used to bracket the peak before refinement.
    pub grid: usize,
    /// Tolerance on ln(nu).
    pub tol: f64,
}

impl Default for NuSearch {
    fn default() -> Self {
        NuSearch { lo: 1e-3, hi: 1e3, grid: 41, tol: 1e-6 }
    }
}

impl NuSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi) || self.grid < 3 || !(self.tol > 0.0) {
            return Err(Error::Config(format!("invalid nu search {self:?}")));
        }
        Ok(())
    }

    /// Maximize `f(nu)`: scan a log-spaced grid, then refine in ln(nu)
    /// around the best grid point. Returns `(nu, f(nu))`.
    pub fn maximize<F>(&self, mut f: F) -> Result<(f64, f64)>
    where
        F: FnMut(f64) -> f64,
    {
        self.validate()?;
        let (ulo, uhi) = (self.lo.ln(), self.hi.ln());
        let step = (uhi - ulo) / (self.grid - 1) as f64;
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.grid {
            let v = f((ulo + step * i as f64).exp());
            if v > best.1 {
                best = (i, v);
            }
        }
        let a = ulo + step * best.0.saturating_sub(1) as f64;
        let b = (ulo + step * (best.0 + 1) as f64).min(uhi);
        let (u, v) = golden_section_max(|u| f(u.exp()), a, b, self.tol)?;
        Ok((u.exp(), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_peak() {
        let (x, fx) = golden_section_max(|v| -(v - 2.0) * (v - 2.0), 0.0, 10.0, 1e-6).unwrap();
        assert!((x - 2.0).abs() <= 1e-6);
        assert!(fx.abs() < 1e-11);
    }

    #[test]
    fn monotone_boundary_peak() {
        let tol = 1e-7;
        let (x, _) = golden_section_max(|v| v, 0.0, 1.0, tol).unwrap();
        assert!((x - 1.0).abs() <= tol);
        let (x, _) = golden_section_max(|v| -v, 0.0, 1.0, tol).unwrap();
        assert!(x.abs() <= tol);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(golden_section_max(|v| v, 1.0, 1.0, 1e-3).is_err());
        assert!(golden_section_max(|v| v, 2.0, 1.0, 1e-3).is_err());
        assert!(golden_section_max(|v| v, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn nu_search_finds_peak_across_decades() {
        for peak in [2e-3, 0.37, 1.0, 55.0, 800.0] {
            let (nu, _) = NuSearch::default()
                .maximize(|nu: f64| -(nu.ln() - f64::ln(peak)).powi(2))
                .unwrap();
            assert!((nu.ln() - f64::ln(peak)).abs() < 1e-5, "{peak} -> {nu}");
        }
    }
}
