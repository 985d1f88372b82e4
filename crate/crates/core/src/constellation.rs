//! Modulation alphabets, bit labels and priors.
//!
//! Symbol index `i` (a GF(2^m) element as an integer) is mapped one-to-one to
//! point `i`. Labels only matter for bit-wise quantities (GMI, pre-FEC BER);
//! the nonbinary decode path never reads them.
//!
//! File format (UTF-8):
//!
//! ```text
//! # comment
//! M D
//! <label bits, MSB first> <re> <im> [prior]
//! ...
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in the I/Q plane.
pub type Point = [f64; 2];

const PRIOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    points: Vec<Point>,
    labels: Vec<u32>,
    priors: Vec<f64>,
    bits: usize,
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl Constellation {
    /// Build and normalize to unit average energy. `labels[i]` is the bit
    /// pattern of point `i`; `priors` defaults to uniform.
    pub fn new(
        name: impl Into<String>,
        points: Vec<Point>,
        labels: Vec<u32>,
        priors: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m_size = points.len();
        if m_size < 2 || !m_size.is_power_of_two() {
            return Err(Error::format(0, format!("M={m_size} is not a power of two >= 2")));
        }
        let bits = m_size.trailing_zeros() as usize;
        if labels.len() != m_size {
            return Err(Error::format(0, "one label per point required"));
        }
        let mut seen = vec![false; m_size];
        for &l in &labels {
            let slot = seen
                .get_mut(l as usize)
                .ok_or_else(|| Error::format(0, format!("label {l} has more than {bits} bits")))?;
            if *slot {
                return Err(Error::format(0, format!("labels are not a bijection (label {l} repeated)")));
            }
            *slot = true;
        }
        for i in 0..m_size {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::format(0, format!("duplicate point at indices {j} and {i}")));
                }
            }
        }
        let priors = priors.unwrap_or_else(|| vec![1.0 / m_size as f64; m_size]);
        if priors.len() != m_size || priors.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::format(0, "priors must be positive, one per point"));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(Error::format(0, format!("priors sum to {total}, expected 1")));
        }
        let energy: f64 = points
            .iter()
            .zip(&priors)
            .map(|(p, l)| l * (p[0] * p[0] + p[1] * p[1]))
            .sum();
        if !(energy > 0.0) {
            return Err(Error::format(0, "constellation has zero energy"));
        }
        let scale = energy.sqrt().recip();
        let points = points.iter().map(|p| [p[0] * scale, p[1] * scale]).collect();
        Ok(Constellation {
            name: name.into(),
            points,
            labels,
            priors,
            bits,
        })
    }

    /// Points with the binary-expansion labeling (label of point i is i).
    pub fn with_identity_labels(name: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        let labels = (0..points.len() as u32).collect();
        Self::new(name, points, labels, None)
    }

    /// Parse the text format.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or_else(|| Error::format(1, "empty constellation file"))?;
        let mut hdr = header.split_whitespace();
        let m_size: usize = parse_field(hdr.next(), hline, "M")?;
        let dim: usize = parse_field(hdr.next(), hline, "D")?;
        if dim != 2 {
            return Err(Error::format(hline, format!("only D=2 is supported, got D={dim}")));
        }
        if !m_size.is_power_of_two() || m_size < 2 {
            return Err(Error::format(hline, format!("M={m_size} is not a power of two >= 2")));
        }
        let bits = m_size.trailing_zeros() as usize;
        let mut points = Vec::with_capacity(m_size);
        let mut labels = Vec::with_capacity(m_size);
        let mut priors = Vec::with_capacity(m_size);
        for (ln, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(Error::format(ln, "expected `label re im [prior]`"));
            }
            let label = fields[0];
            if label.len() != bits || !label.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::format(ln, format!("label `{label}` is not a {bits}-bit 0/1 string")));
            }
            labels.push(u32::from_str_radix(label, 2).expect("validated binary string"));
            let re: f64 = parse_field(Some(fields[1]), ln, "re")?;
            let im: f64 = parse_field(Some(fields[2]), ln, "im")?;
            points.push([re, im]);
            priors.push(match fields.get(3) {
                Some(p) => Some(parse_field::<f64>(Some(p), ln, "prior")?),
                None => None,
            });
        }
        if points.len() != m_size {
            return Err(Error::format(hline, format!("header says M={m_size} but {} points given", points.len())));
        }
        let priors = match priors.iter().filter(|p| p.is_some()).count() {
            0 => None,
            n if n == m_size => Some(priors.into_iter().map(Option::unwrap).collect()),
            _ => return Err(Error::format(hline, "priors must be given for all points or none")),
        };
        Self::new(name, points, labels, priors)
    }

    /// Load from a file; the name is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::parse(name, &text)
    }

    /// A built-in name (see [`builtin_spec`]) or a path to a file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match builtin_spec(name_or_path) {
            Some(text) => Self::parse(name_or_path.to_ascii_lowercase(), &text),
            None => Self::load(Path::new(name_or_path)),
        }
    }

    /// Serialize in the file format (normalized coordinates).
    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n{} 2\n", self.name, self.size());
        for i in 0..self.size() {
            let p = self.points[i];
            let _ = writeln!(
                out,
                "{:0width$b} {:.17e} {:.17e} {:.17e}",
                self.labels[i],
                p[0],
                p[1],
                self.priors[i],
                width = self.bits
            );
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Alphabet size M.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Bits per symbol m.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn is_equiprobable(&self) -> bool {
        let u = 1.0 / self.size() as f64;
        self.priors.iter().all(|&p| (p - u).abs() < 1e-15)
    }

    /// Average energy under the priors (1 after construction).
    pub fn energy(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.priors)
            .map(|(p, l)| l * (p[0] * p[0] + p[1] * p[1]))
            .sum()
    }

    /// Label of point `i` as an integer (bit 0 of the pattern is the LSB).
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Label bits of point `i`, MSB first.
    pub fn label_bits(&self, i: usize) -> Result<Vec<u8>> {
        let l = *self
            .labels
            .get(i)
            .ok_or_else(|| Error::Input(format!("symbol {i} outside alphabet of size {}", self.size())))?;
        Ok((0..self.bits).rev().map(|b| ((l >> b) & 1) as u8).collect())
    }

    /// Bit `b` (0 = MSB) of the label of point `i`.
    #[inline]
    pub fn label_bit(&self, i: usize, b: usize) -> u8 {
        ((self.labels[i] >> (self.bits - 1 - b)) & 1) as u8
    }

    /// Same geometry, different labels.
    pub fn relabeled(&self, labels: Vec<u32>) -> Result<Self> {
        let mut c = Self::new(self.name.clone(), self.points.clone(), labels, Some(self.priors.clone()))?;
        c.points = self.points.clone();
        Ok(c)
    }

    /// Map symbols to points.
    pub fn map_symbols(&self, symbols: &[usize]) -> Result<Vec<Point>> {
        symbols
            .iter()
            .map(|&u| {
                self.points
                    .get(u)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("symbol {u} outside alphabet of size {}", self.size())))
            })
            .collect()
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn hard_decide(&self, y: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &s) in self.points.iter().enumerate() {
            let d = dist2(y, s);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Smallest distance between two distinct points.
    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.size() {
            for j in 0..i {
                d = d.min(dist2(self.points[i], self.points[j]));
            }
        }
        d.sqrt()
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    let f = field.ok_or_else(|| Error::format(line, format!("missing {what}")))?;
    f.parse()
        .map_err(|_| Error::format(line, format!("cannot parse {what} from `{f}`")))
}

/// Names accepted by [`builtin_spec`].
pub const BUILTIN_NAMES: &[&str] = &["bpsk", "qpsk", "4pam", "8psk", "c1", "c2", "c3", "c4"];

fn ring(n: usize, radius: f64, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let a = phase + 2.0 * PI * k as f64 / n as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

fn render(m_size: usize, rows: &[(u32, Point)]) -> String {
    let bits = m_size.trailing_zeros() as usize;
    let mut s = format!("{m_size} 2\n");
    for (label, p) in rows {
        let _ = writeln!(s, "{label:0bits$b} {:.17e} {:.17e}", p[0], p[1]);
    }
    s
}

/// Text of a built-in constellation, before normalization.
///
/// * `bpsk`: antipodal points on the real axis.
/// * `qpsk`: square 4-QAM with Gray labels.
/// * `4pam`: Gray-labeled 4-PAM on the real axis.
/// * `8psk`: 8-PSK with Gray labels.
/// * `c1`: rectangular 2x4 grid 8-QAM.
/// * `c2`: two-ring 4+4 star, rings rotated by 45 degrees, radius ratio
///   (sqrt(2)+sqrt(6))/2 so inner-inner and inner-outer distances match.
/// * `c3`: circular 8-QAM, i.e. 8-PSK.
/// * `c4`: seven points on a ring plus one at the origin.
///
/// Labels on the 8-ary formats are chosen to keep nearest neighbours close
/// in Hamming distance; drop in other coordinates or labelings via a file.
pub fn builtin_spec(name: &str) -> Option<String> {
    let gray3 = [0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];
    let text = match name.to_ascii_lowercase().as_str() {
        "bpsk" => render(2, &[(0, [-1.0, 0.0]), (1, [1.0, 0.0])]),
        "qpsk" => render(
            4,
            &[(0b00, [1.0, 1.0]), (0b01, [-1.0, 1.0]), (0b11, [-1.0, -1.0]), (0b10, [1.0, -1.0])],
        ),
        "4pam" => render(
            4,
            &[(0b00, [-3.0, 0.0]), (0b01, [-1.0, 0.0]), (0b11, [1.0, 0.0]), (0b10, [3.0, 0.0])],
        ),
        "8psk" | "c3" => {
            let pts = ring(8, 1.0, 0.0);
            render(8, &gray3.iter().copied().zip(pts).collect::<Vec<_>>())
        }
        "c1" => {
            let xs = [-3.0, -1.0, 1.0, 3.0];
            let xg = [0b00, 0b01, 0b11, 0b10];
            let mut rows = Vec::new();
            for (yi, y) in [1.0, -1.0].into_iter().enumerate() {
                for (xi, x) in xs.into_iter().enumerate() {
                    rows.push(((yi as u32) << 2 | xg[xi], [x, y]));
                }
            }
            render(8, &rows)
        }
        "c2" => {
            let ratio = (2f64.sqrt() + 6f64.sqrt()) / 2.0;
            let inner = ring(4, 1.0, PI / 4.0);
            let outer = ring(4, ratio, 0.0);
            // inner k sits between outer k and outer k+1
            let inner_labels = [0b000, 0b001, 0b011, 0b010];
            let outer_labels = [0b100, 0b101, 0b111, 0b110];
            let mut rows: Vec<(u32, Point)> = inner_labels.into_iter().zip(inner).collect();
            rows.extend(outer_labels.into_iter().zip(outer));
            render(8, &rows)
        }
        "c4" => {
            let mut rows = vec![(0b000, [0.0, 0.0])];
            let outer_labels = [0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];
            rows.extend(outer_labels.into_iter().zip(ring(7, 1.0, PI / 2.0)));
            render(8, &rows)
        }
        _ => return None,
    };
    Some(text)
}
