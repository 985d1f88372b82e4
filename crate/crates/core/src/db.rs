//! Measurement databases: paired transmit indices and received samples.
//!
//! CSV layout:
//!
//! ```text
//! # constellation=<name> M=<int> N=<int>
//! # esn0_db=<float>            (optional metadata)
//! tx_index,rx_i,rx_q
//! 3,0.7071,-0.6930
//! ...
//! ```
//!
//! The column-name line is optional on input.

use std::fmt::Write as _;
use std::path::Path;

use rand::RngExt;

use crate::channel::add_noise;
use crate::constellation::{Constellation, Point};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub tx: usize,
    pub rx: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDb {
    pub constellation: String,
    pub size: usize,
    pub records: Vec<Record>,
    pub nominal_esn0_db: Option<f64>,
}

impl MeasurementDb {
    pub fn new(constellation: impl Into<String>, size: usize, records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Input("measurement database is empty".into()));
        }
        if let Some(r) = records.iter().find(|r| r.tx >= size) {
            return Err(Error::Input(format!("tx index {} outside alphabet of size {size}", r.tx)));
        }
        Ok(MeasurementDb { constellation: constellation.into(), size, records, nominal_esn0_db: None })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Check that the database fits a constellation.
    pub fn check(&self, c: &Constellation) -> Result<()> {
        if self.size != c.size() {
            return Err(Error::Input(format!(
                "database alphabet M={} does not match constellation `{}` with M={}",
                self.size,
                c.name(),
                c.size()
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut size = None;
        let mut declared = None;
        let mut esn0 = None;
        let mut records = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let ln = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    let Some((k, v)) = kv.split_once('=') else { continue };
                    match k {
                        "constellation" => name = Some(v.to_string()),
                        "M" => size = Some(v.parse::<usize>().map_err(|_| Error::format(ln, "bad M"))?),
                        "N" => declared = Some(v.parse::<usize>().map_err(|_| Error::format(ln, "bad N"))?),
                        "esn0_db" => esn0 = v.parse::<f64>().ok(),
                        _ => {}
                    }
                }
                continue;
            }
            if line.starts_with("tx_index") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::format(ln, "expected `tx_index,rx_i,rx_q`"));
            }
            let tx = f[0].parse().map_err(|_| Error::format(ln, format!("bad tx index `{}`", f[0])))?;
            let re = f[1].parse().map_err(|_| Error::format(ln, format!("bad rx_i `{}`", f[1])))?;
            let im = f[2].parse().map_err(|_| Error::format(ln, format!("bad rx_q `{}`", f[2])))?;
            records.push(Record { tx, rx: [re, im] });
        }
        let name = name.ok_or_else(|| Error::format(1, "missing `# constellation=` header"))?;
        let size = size.ok_or_else(|| Error::format(1, "missing `M=` in header"))?;
        if let Some(n) = declared {
            if n != records.len() {
                return Err(Error::format(1, format!("header declares N={n} but {} rows found", records.len())));
            }
        }
        let mut db = MeasurementDb::new(name, size, records)?;
        db.nominal_esn0_db = esn0;
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# constellation={} M={} N={}\n", self.constellation, self.size, self.len());
        if let Some(e) = self.nominal_esn0_db {
            let _ = writeln!(out, "# esn0_db={e}");
        }
        out.push_str("tx_index,rx_i,rx_q\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.tx, r.rx[0], r.rx[1]);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Draw `n` symbols from the priors, send them over AWGN and record.
pub fn synthesize(c: &Constellation, sigma2: f64, n: usize, seed: u64) -> Result<MeasurementDb> {
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("noise variance must be positive, got {sigma2}")));
    }
    let mut sym_rng = stream_rng(seed, Stream::Info, 0);
    let mut noise_rng = stream_rng(seed, Stream::Channel1, 0);
    let sd = sigma2.sqrt();
    let cdf: Vec<f64> = c
        .priors()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let records = (0..n)
        .map(|_| {
            let r: f64 = sym_rng.random();
            let tx = cdf.iter().position(|&v| r < v).unwrap_or(c.size() - 1);
            Record { tx, rx: add_noise(c.point(tx), sd, &mut noise_rng) }
        })
        .collect();
    let mut db = MeasurementDb::new(c.name(), c.size(), records)?;
    db.nominal_esn0_db = Some(crate::channel::sigma2_to_esn0_db(sigma2));
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let c = Constellation::resolve("c1").unwrap();
        let db = synthesize(&c, 0.1, 50, 3).unwrap();
        let back = MeasurementDb::parse(&db.to_csv()).unwrap();
        assert_eq!(db, back);
    }

    #[test]
    fn parse_errors() {
        assert!(MeasurementDb::parse("1,0.0,0.0\n").is_err());
        assert!(MeasurementDb::parse("# constellation=x M=8 N=2\n1,0,0\n").is_err());
        assert!(MeasurementDb::parse("# constellation=x M=8\n9,0,0\n").is_err());
        assert!(MeasurementDb::parse("# constellation=x M=8\n1,0\n").is_err());
        assert!(MeasurementDb::parse("# constellation=x M=8\n").is_err());
        let ok = MeasurementDb::parse("# constellation=x M=8 N=1\n7, 0.5 ,-1e-3\n").unwrap();
        assert_eq!(ok.records[0], Record { tx: 7, rx: [0.5, -1e-3] });
    }

    #[test]
    fn synthesize_is_deterministic() {
        let c = Constellation::resolve("8psk").unwrap();
        assert_eq!(synthesize(&c, 0.2, 100, 9).unwrap(), synthesize(&c, 0.2, 100, 9).unwrap());
    }
}
