//! Quasi-cyclic regular nonbinary LDPC codes.
//!
//! The base matrix is `mb x nb` with `d_v` entries per column and `d_c` per
//! row; every entry expands into a `Z x Z` circulant permutation in which
//! check `t` of the block touches variable `(t + s) mod Z`. Each expanded edge
//! carries its own nonzero field coefficient.

mod construct;
mod decode;
mod encode;

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::gf::{FieldTables, Symbol};
use crate::rng::{stream_rng, Stream};

pub use decode::{CheckRule, Decoder, DecoderResult, DEFAULT_MAX_ITERS};
pub use encode::Encoder;

use construct::{base_rows, search_shifts, QcGraph};

pub const DEFAULT_CIRCULANT: usize = 100;
pub const DEFAULT_LENGTH: usize = 5000;
pub const DEFAULT_CODE_SEED: u64 = 1;

/// `(rate, d_v, d_c)` for the built-in rate family.
pub const RATE_PRESETS: [(f64, usize, usize); 5] =
    [(0.7, 3, 10), (0.75, 3, 12), (0.8, 3, 15), (0.85, 3, 20), (0.9, 3, 30)];

/// Degrees `(d_v, d_c)` of the built-in code with this rate.
pub fn preset_degrees(rate: f64) -> Option<(usize, usize)> {
    RATE_PRESETS.iter().find(|p| (p.0 - rate).abs() < 1e-9).map(|p| (p.1, p.2))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone)]
pub struct QcCode {
    field: FieldTables,
    d_v: usize,
    d_c: usize,
    z: usize,
    exponents: Vec<Vec<Option<usize>>>,
    coefficient_seed: u64,
    check_vars: Vec<u32>,
    check_coeffs: Vec<Symbol>,
    girth: Option<usize>,
    encoder: Encoder,
}

/// Build one of the preset-rate codes over GF(2^m) with about `n_target`
/// symbols.
pub fn build_code(m: usize, rate: f64, n_target: usize, seed: u64) -> Result<QcCode> {
    let (d_v, d_c) = preset_degrees(rate).ok_or_else(|| {
        Error::Config(format!("no preset for rate {rate}; use build_regular with explicit degrees"))
    })?;
    build_regular(m, d_v, d_c, n_target, seed)
}

/// Build a regular `(d_v, d_c)` code with about `n_target` symbols.
pub fn build_regular(m: usize, d_v: usize, d_c: usize, n_target: usize, seed: u64) -> Result<QcCode> {
    if d_v < 2 || d_c <= d_v {
        return Err(Error::Config(format!("need 2 <= d_v < d_c, got d_v={d_v}, d_c={d_c}")));
    }
    let unit = d_c / gcd(d_c, d_v);
    let want = n_target as f64 / DEFAULT_CIRCULANT as f64;
    let mut nb = (((want / unit as f64) + 0.5).floor() as usize).max(1) * unit;
    if nb < d_c {
        nb = d_c.div_ceil(unit) * unit;
    }
    let z = ((n_target as f64 / nb as f64).round() as usize).max(1);
    let mb = nb * d_v / d_c;
    if d_v > mb {
        return Err(Error::Construction(format!("base matrix {mb}x{nb} too small for d_v={d_v}")));
    }
    let exps = search_shifts(mb, nb, d_v, z, seed)?;
    QcCode::from_exponents(m, d_v, d_c, z, exps, seed)
}

impl QcCode {
    /// Assemble a code from an explicit exponent matrix (`None` = zero block).
    pub fn from_exponents(
        m: usize,
        d_v: usize,
        d_c: usize,
        z: usize,
        exponents: Vec<Vec<Option<usize>>>,
        coefficient_seed: u64,
    ) -> Result<Self> {
        let field = FieldTables::new(m)?;
        let mb = exponents.len();
        let nb = exponents.first().map_or(0, |r| r.len());
        if mb == 0 || nb == 0 || z == 0 || exponents.iter().any(|r| r.len() != nb) {
            return Err(Error::Construction("empty or ragged exponent matrix".into()));
        }
        for (r, row) in exponents.iter().enumerate() {
            let deg = row.iter().filter(|s| s.is_some()).count();
            if deg != d_c {
                return Err(Error::Construction(format!("base row {r} has degree {deg}, expected {d_c}")));
            }
            if let Some(s) = row.iter().flatten().find(|&&s| s >= z) {
                return Err(Error::Construction(format!("shift {s} out of range for Z={z}")));
            }
        }
        for j in 0..nb {
            let deg = exponents.iter().filter(|r| r[j].is_some()).count();
            if deg != d_v {
                return Err(Error::Construction(format!("base column {j} has degree {deg}, expected {d_v}")));
            }
        }
        let graph = QcGraph::from_exponents(&exponents, z);
        let girth = graph.girth();
        if girth.is_some_and(|g| g < 6) {
            return Err(Error::Construction(format!("Tanner graph has girth {}", girth.unwrap_or(0))));
        }

        let q = field.size();
        let mut rng = stream_rng(coefficient_seed, Stream::Coefficients, 0);
        let mut check_vars = Vec::with_capacity(mb * z * d_c);
        let mut check_coeffs = Vec::with_capacity(mb * z * d_c);
        for row in &exponents {
            for t in 0..z {
                for (j, s) in row.iter().enumerate() {
                    if let Some(s) = s {
                        check_vars.push((j * z + (t + s) % z) as u32);
                        check_coeffs.push(rng.random_range(1..q) as Symbol);
                    }
                }
            }
        }
        let checks: Vec<Vec<(usize, Symbol)>> = check_vars
            .chunks(d_c)
            .zip(check_coeffs.chunks(d_c))
            .map(|(v, h)| v.iter().map(|&v| v as usize).zip(h.iter().copied()).collect())
            .collect();
        let encoder = Encoder::new(&checks, nb * z, &field)?;
        Ok(QcCode { field, d_v, d_c, z, exponents, coefficient_seed, check_vars, check_coeffs, girth, encoder })
    }

    pub fn field(&self) -> &FieldTables {
        &self.field
    }

    pub fn m(&self) -> usize {
        self.field.m()
    }

    /// Block length in field symbols.
    pub fn n(&self) -> usize {
        self.base_cols() * self.z
    }

    /// Code dimension after rank reduction.
    pub fn k(&self) -> usize {
        self.encoder.k()
    }

    pub fn rank(&self) -> usize {
        self.encoder.rank()
    }

    pub fn d_v(&self) -> usize {
        self.d_v
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    pub fn circulant(&self) -> usize {
        self.z
    }

    pub fn base_rows(&self) -> usize {
        self.exponents.len()
    }

    pub fn base_cols(&self) -> usize {
        self.exponents[0].len()
    }

    pub fn exponents(&self) -> &[Vec<Option<usize>>] {
        &self.exponents
    }

    pub fn coefficient_seed(&self) -> u64 {
        self.coefficient_seed
    }

    /// `1 - d_v/d_c`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.d_v as f64 / self.d_c as f64
    }

    /// `k/n`, equal to the design rate when H has full rank.
    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    /// Shortest cycle of the Tanner graph (`None` if acyclic).
    pub fn girth(&self) -> Option<usize> {
        self.girth
    }

    pub fn check_count(&self) -> usize {
        self.check_vars.len() / self.d_c
    }

    pub fn edge_count(&self) -> usize {
        self.check_vars.len()
    }

    /// Variables of check `i`; checks `r*Z..(r+1)*Z` form layer `r`.
    pub fn check_vars(&self, i: usize) -> &[u32] {
        &self.check_vars[i * self.d_c..(i + 1) * self.d_c]
    }

    pub fn check_coeffs(&self, i: usize) -> &[Symbol] {
        &self.check_coeffs[i * self.d_c..(i + 1) * self.d_c]
    }

    pub fn id(&self) -> String {
        format!(
            "qc-m{}-dv{}-dc{}-z{}-n{}-s{}",
            self.m(),
            self.d_v,
            self.d_c,
            self.z,
            self.n(),
            self.coefficient_seed
        )
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn encode(&self, info: &[Symbol]) -> Result<Vec<Symbol>> {
        self.encoder.encode(info, &self.field)
    }

    pub fn random_codeword<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Symbol> {
        let q = self.field.size();
        let info: Vec<Symbol> = (0..self.k()).map(|_| rng.random_range(0..q) as Symbol).collect();
        self.encode(&info).expect("info length matches k")
    }

    pub fn syndrome(&self, word: &[Symbol]) -> Vec<Symbol> {
        (0..self.check_count())
            .map(|i| {
                self.check_vars(i)
                    .iter()
                    .zip(self.check_coeffs(i))
                    .fold(0, |acc, (&v, &h)| acc ^ self.field.mul(h, word[v as usize]))
            })
            .collect()
    }

    pub fn syndrome_is_zero(&self, word: &[Symbol]) -> bool {
        (0..self.check_count()).all(|i| {
            self.check_vars(i)
                .iter()
                .zip(self.check_coeffs(i))
                .fold(0, |acc, (&v, &h)| acc ^ self.field.mul(h, word[v as usize]))
                == 0
        })
    }

    pub fn is_codeword(&self, word: &[Symbol]) -> bool {
        word.len() == self.n() && self.syndrome_is_zero(word)
    }

    /// Text form: header keys followed by the exponent matrix (`-1` = zero block).
    pub fn to_preset(&self) -> String {
        let mut s = String::from("# quasi-cyclic nonbinary LDPC code\n");
        let _ = writeln!(s, "m {}", self.m());
        let _ = writeln!(s, "dv {}", self.d_v);
        let _ = writeln!(s, "dc {}", self.d_c);
        let _ = writeln!(s, "z {}", self.z);
        let _ = writeln!(s, "coefficient_seed {}", self.coefficient_seed);
        let _ = writeln!(s, "exponents {} {}", self.base_rows(), self.base_cols());
        for row in &self.exponents {
            let line: Vec<String> =
                row.iter().map(|e| e.map_or_else(|| "-1".to_string(), |v| v.to_string())).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse_preset(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut key = |name: &str| -> Result<(usize, Vec<u64>)> {
            let (no, line) = lines.next().ok_or_else(|| Error::format(0, format!("missing `{name}`")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(Error::format(no, format!("expected `{name}`")));
            }
            let vals = parts
                .map(|p| p.parse::<u64>().map_err(|_| Error::format(no, format!("bad number `{p}`"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((no, vals))
        };
        let mut one = |name: &str| -> Result<u64> {
            let (no, v) = key(name)?;
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(Error::format(no, format!("`{name}` takes one value"))),
            }
        };
        let m = one("m")? as usize;
        let d_v = one("dv")? as usize;
        let d_c = one("dc")? as usize;
        let z = one("z")? as usize;
        let seed = one("coefficient_seed")?;
        let (no, dims) = key("exponents")?;
        let [mb, nb] = dims[..] else {
            return Err(Error::format(no, "`exponents` takes rows and columns"));
        };
        let mut exps = Vec::new();
        for _ in 0..mb {
            let (no, line) = lines.next().ok_or_else(|| Error::format(0, "exponent matrix truncated"))?;
            let row = line
                .split_whitespace()
                .map(|p| match p.parse::<i64>() {
                    Ok(-1) => Ok(None),
                    Ok(v) if v >= 0 => Ok(Some(v as usize)),
                    _ => Err(Error::format(no, format!("bad exponent `{p}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != nb as usize {
                return Err(Error::format(no, format!("expected {nb} exponents, got {}", row.len())));
            }
            exps.push(row);
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::format(no, "trailing data after exponent matrix"));
        }
        QcCode::from_exponents(m, d_v, d_c, z, exps, seed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_preset(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_preset())?;
        Ok(())
    }

    /// A preset rate (`0.8` or `r0.8`, GF(8), default length and seed) or a
    /// preset file path.
    pub fn resolve(spec: &str) -> Result<Self> {
        let rate = spec.strip_prefix('r').unwrap_or(spec).parse::<f64>();
        match rate {
            Ok(r) => build_code(3, r, DEFAULT_LENGTH, DEFAULT_CODE_SEED),
            Err(_) => Self::load(Path::new(spec)),
        }
    }

    /// Variables sharing two checks, found by enumerating all check pairs.
    pub fn has_four_cycle(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for i in 0..self.check_count() {
            let vars = self.check_vars(i);
            for a in 0..vars.len() {
                for b in a + 1..vars.len() {
                    let key = (vars[a].min(vars[b]), vars[a].max(vars[b]));
                    if !seen.insert(key) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Base rows of column `j` in the regular construction.
    pub fn layout_rows(&self, j: usize) -> Vec<usize> {
        base_rows(j, self.d_v, self.base_rows())
    }
}

/// Fraction of mismatched symbols.
pub fn post_fec_ser(tx: &[Symbol], decided: &[Symbol]) -> Result<f64> {
    if tx.len() != decided.len() || tx.is_empty() {
        return Err(Error::Input(format!("length mismatch: {} vs {}", tx.len(), decided.len())));
    }
    Ok(symbol_errors(tx, decided) as f64 / tx.len() as f64)
}

pub fn symbol_errors(tx: &[Symbol], decided: &[Symbol]) -> usize {
    tx.iter().zip(decided).filter(|(a, b)| a != b).count()
}

/// Error counts pooled over decoded blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SerCounter {
    pub symbols: u64,
    pub symbol_errors: u64,
    pub frames: u64,
    pub frame_errors: u64,
}

impl SerCounter {
    pub fn add(&mut self, tx: &[Symbol], decided: &[Symbol]) {
        let e = symbol_errors(tx, decided) as u64;
        self.symbols += tx.len() as u64;
        self.symbol_errors += e;
        self.frames += 1;
        self.frame_errors += (e > 0) as u64;
    }

    pub fn merge(&mut self, other: &SerCounter) {
        self.symbols += other.symbols;
        self.symbol_errors += other.symbol_errors;
        self.frames += other.frames;
        self.frame_errors += other.frame_errors;
    }

    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.symbol_errors as f64 / self.symbols as f64
        }
    }
}
