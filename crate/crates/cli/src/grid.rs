//! `start:step:stop` grids and comma-separated lists.

use anyhow::{bail, Context, Result};

/// Parse `x` or `start:step:stop` (inclusive) into a non-empty grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number `{p}` in grid `{s}`")))
        .collect::<Result<_>>()?;
    match parts[..] {
        [x] => Ok(vec![x]),
        [start, step, stop] => {
            if !(step > 0.0) {
                bail!("grid step must be positive in `{s}`");
            }
            if stop < start {
                bail!("grid stop is below start in `{s}`");
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => bail!("expected `x` or `start:step:stop`, got `{s}`"),
    }
}

/// Parse `lo:hi`.
pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').with_context(|| format!("expected `lo:hi`, got `{s}`"))?;
    let lo: f64 = a.trim().parse().with_context(|| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().with_context(|| format!("bad number `{b}`"))?;
    if !(lo < hi) {
        bail!("need lo < hi in `{s}`");
    }
    Ok((lo, hi))
}

pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}
