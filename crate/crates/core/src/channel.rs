//! Memoryless channels: AWGN, the hard-decision DMC seen behind an AWGN
//! channel, and the two-channel mixing harness used for universality tests.
//!
//! Conventions: `sigma2` is the noise variance per real dimension for a
//! unit-energy constellation, so Es/N0 = 1 / (2 sigma2).

use rand::seq::SliceRandom;
use rand::Rng;
use rand::RngExt;
use rand_distr::StandardNormal;

use crate::constellation::{Constellation, Point};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Floor applied to empty DMC cells before renormalization.
pub const DMC_FLOOR: f64 = 1e-12;

pub fn esn0_db_to_sigma2(esn0_db: f64) -> f64 {
    0.5 * 10f64.powf(-esn0_db / 10.0)
}

pub fn sigma2_to_esn0_db(sigma2: f64) -> f64 {
    10.0 * (1.0 / (2.0 * sigma2)).log10()
}

/// Affine relabeling of an Es/N0 axis, e.g. to OSNR with
/// `offset_db = 10 log10(Rs / Bref)` for a given symbol rate and reference
/// bandwidth.
pub fn relabel_axis(esn0_db: f64, offset_db: f64) -> f64 {
    esn0_db + offset_db
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnChannel {
    sigma2: f64,
    seed: u64,
}

impl AwgnChannel {
    pub fn new(sigma2: f64, seed: u64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Config(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(AwgnChannel { sigma2, seed })
    }

    pub fn from_esn0_db(esn0_db: f64, seed: u64) -> Result<Self> {
        Self::new(esn0_db_to_sigma2(esn0_db), seed)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn esn0_db(&self) -> f64 {
        sigma2_to_esn0_db(self.sigma2)
    }

    /// Add noise to a block; `block` selects the random stream so blocks can
    /// be generated independently and in any order.
    pub fn transmit(&self, x: &[Point], block: u64) -> Vec<Point> {
        let mut rng = stream_rng(self.seed, Stream::Channel1, block);
        let sd = self.sigma2.sqrt();
        x.iter().map(|&p| add_noise(p, sd, &mut rng)).collect()
    }
}

#[inline]
pub(crate) fn add_noise<R: Rng + ?Sized>(p: Point, sd: f64, rng: &mut R) -> Point {
    let n0: f64 = rng.sample(StandardNormal);
    let n1: f64 = rng.sample(StandardNormal);
    [p[0] + sd * n0, p[1] + sd * n1]
}

/// Transition matrix of a hard-decision channel,
/// `w[j][k] = P(receive s_j | sent s_k)`; every column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DmcMatrix {
    size: usize,
    // row-major, w[j * size + k]
    w: Vec<f64>,
}

impl DmcMatrix {
    /// Validate a column-stochastic matrix given as rows.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size < 2 || rows.iter().any(|r| r.len() != size) {
            return Err(Error::Input("DMC matrix must be square with M >= 2".into()));
        }
        let w: Vec<f64> = rows.into_iter().flatten().collect();
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Input("DMC entries must be finite and non-negative".into()));
        }
        let m = DmcMatrix { size, w };
        for k in 0..size {
            let s = m.column_sum(k);
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Input(format!("DMC column {k} sums to {s}")));
            }
        }
        Ok(m)
    }

    pub fn identity(size: usize) -> Self {
        let mut w = vec![0.0; size * size];
        for i in 0..size {
            w[i * size + i] = 1.0;
        }
        DmcMatrix { size, w }
    }

    pub fn uniform(size: usize) -> Self {
        DmcMatrix { size, w: vec![1.0 / size as f64; size * size] }
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Column-normalize a count matrix (`counts[j][k]`), flooring empty
    /// cells at [`DMC_FLOOR`].
    pub fn from_counts(counts: &[Vec<u64>]) -> Result<Self> {
        let size = counts.len();
        let mut w = vec![0.0; size * size];
        for k in 0..size {
            let total: u64 = (0..size).map(|j| counts[j][k]).sum();
            if total == 0 {
                return Err(Error::Input(format!("no samples for input symbol {k}")));
            }
            for j in 0..size {
                w[j * size + k] = (counts[j][k] as f64 / total as f64).max(DMC_FLOOR);
            }
        }
        let mut m = DmcMatrix { size, w };
        m.renormalize();
        Ok(m)
    }

    fn renormalize(&mut self) {
        for k in 0..self.size {
            let s = self.column_sum(k);
            for j in 0..self.size {
                self.w[j * self.size + k] /= s;
            }
        }
    }

    fn column_sum(&self, k: usize) -> f64 {
        (0..self.size).map(|j| self.w[j * self.size + k]).sum()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `P(receive j | sent k)`.
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.w[j * self.size + k]
    }

    /// Row `j`: likelihood of observing `j` for each sent symbol.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.w[j * self.size..(j + 1) * self.size]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.w.iter().all(|&v| v > 0.0)
    }

    /// Frobenius distance to another matrix of the same size.
    pub fn frobenius_distance(&self, other: &DmcMatrix) -> f64 {
        self.w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Monte Carlo estimate of the hard-decision transition matrix behind an
/// AWGN channel, with `n_samples` transmissions of every input symbol.
pub fn estimate_dmc(c: &Constellation, ch: &AwgnChannel, n_samples: usize) -> Result<DmcMatrix> {
    if n_samples < 10_000 {
        return Err(Error::Config(format!("DMC estimation needs >= 10^4 samples per symbol, got {n_samples}")));
    }
    let size = c.size();
    let sd = ch.sigma2().sqrt();
    let mut counts = vec![vec![0u64; size]; size];
    for k in 0..size {
        let mut rng = stream_rng(ch.seed(), Stream::Dmc, k as u64);
        let s = c.point(k);
        for _ in 0..n_samples {
            let j = c.hard_decide(add_noise(s, sd, &mut rng));
            counts[j][k] += 1;
        }
    }
    DmcMatrix::from_counts(&counts)
}

/// What a component channel does to a symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    /// AWGN with soft output.
    Soft { sigma2: f64 },
    /// AWGN followed by a minimum-distance hard decision; `w` is the
    /// transition matrix the receiver assumes.
    Hard { sigma2: f64, w: DmcMatrix },
}

/// Channel output for one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Soft(Point),
    Hard(usize),
}

/// A modulation format plus a channel; one branch of a [`ChannelMix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentChannel {
    pub constellation: Constellation,
    pub kind: ChannelKind,
}

impl ComponentChannel {
    pub fn soft(constellation: Constellation, sigma2: f64) -> Result<Self> {
        AwgnChannel::new(sigma2, 0)?;
        Ok(ComponentChannel { constellation, kind: ChannelKind::Soft { sigma2 } })
    }

    /// Hard-decision channel; the receiver's matrix is estimated with
    /// `dmc_samples` transmissions per symbol from stream `dmc_seed`.
    pub fn hard(constellation: Constellation, sigma2: f64, dmc_samples: usize, dmc_seed: u64) -> Result<Self> {
        let ch = AwgnChannel::new(sigma2, dmc_seed)?;
        let w = estimate_dmc(&constellation, &ch, dmc_samples)?;
        Ok(ComponentChannel { constellation, kind: ChannelKind::Hard { sigma2, w } })
    }

    pub fn sigma2(&self) -> f64 {
        match self.kind {
            ChannelKind::Soft { sigma2 } | ChannelKind::Hard { sigma2, .. } => sigma2,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.constellation.size()
    }

    pub fn observe<R: Rng + ?Sized>(&self, symbol: usize, rng: &mut R) -> Observation {
        let sd = self.sigma2().sqrt();
        let y = add_noise(self.constellation.point(symbol), sd, rng);
        match self.kind {
            ChannelKind::Soft { .. } => Observation::Soft(y),
            ChannelKind::Hard { .. } => Observation::Hard(self.constellation.hard_decide(y)),
        }
    }
}

/// Two channels sharing a codeword: the first `round(gamma * n)` positions
/// (after an optional seeded permutation) go through `first`, the rest
/// through `second`. Each branch draws from its own random stream; when one
/// branch is empty the other takes the primary stream, so `gamma = 1`
/// reproduces `first` alone and `gamma = 0` reproduces `second` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMix {
    pub gamma: f64,
    pub first: ComponentChannel,
    pub second: ComponentChannel,
    /// Permute positions before splitting.
    pub interleave: bool,
}

impl ChannelMix {
    pub fn new(gamma: f64, first: ComponentChannel, second: ComponentChannel) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma={gamma} outside [0, 1]")));
        }
        if first.alphabet_size() != second.alphabet_size() {
            return Err(Error::Config(format!(
                "component alphabets differ: {} vs {}",
                first.alphabet_size(),
                second.alphabet_size()
            )));
        }
        Ok(ChannelMix { gamma, first, second, interleave: false })
    }

    /// A single channel, expressed as `gamma = 1`.
    pub fn single(channel: ComponentChannel) -> Self {
        ChannelMix { gamma: 1.0, second: channel.clone(), first: channel, interleave: false }
    }

    pub fn alphabet_size(&self) -> usize {
        self.first.alphabet_size()
    }

    /// Number of positions routed to the first channel (rounded to nearest).
    pub fn first_count(&self, n: usize) -> usize {
        (self.gamma * n as f64).round() as usize
    }

    /// `true` where position `k` of a length-`n` block uses `first`.
    pub fn routing(&self, n: usize, seed: u64, block: u64) -> Vec<bool> {
        let split = self.first_count(n);
        let mut route: Vec<bool> = (0..n).map(|k| k < split).collect();
        if self.interleave {
            let mut rng = stream_rng(seed, Stream::Interleaver, block);
            route.shuffle(&mut rng);
        }
        route
    }

    /// Random stream feeding one branch for a block of length `n`.
    pub fn stream(&self, first: bool, n: usize) -> Stream {
        if first || self.first_count(n) == 0 {
            Stream::Channel1
        } else {
            Stream::Channel2
        }
    }

    pub fn component(&self, first: bool) -> &ComponentChannel {
        if first {
            &self.first
        } else {
            &self.second
        }
    }
}

/// Send one block of symbols through the mix.
pub fn mix_transmit(symbols: &[usize], mix: &ChannelMix, seed: u64, block: u64) -> Result<Vec<Observation>> {
    let size = mix.alphabet_size();
    if let Some(&bad) = symbols.iter().find(|&&u| u >= size) {
        return Err(Error::Input(format!("symbol {bad} outside alphabet of size {size}")));
    }
    let route = mix.routing(symbols.len(), seed, block);
    let n = symbols.len();
    let mut rng1 = stream_rng(seed, mix.stream(true, n), block);
    let mut rng2 = stream_rng(seed, mix.stream(false, n), block);
    Ok(symbols
        .iter()
        .zip(route)
        .map(|(&u, first)| {
            if first {
                mix.first.observe(u, &mut rng1)
            } else {
                mix.second.observe(u, &mut rng2)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn esn0_conversion_round_trip() {
        for db in [-5.0, 0.0, 3.3, 12.0] {
            assert!((sigma2_to_esn0_db(esn0_db_to_sigma2(db)) - db).abs() < 1e-12);
        }
        assert!((esn0_db_to_sigma2(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(AwgnChannel::new(0.0, 1).is_err());
        assert!(AwgnChannel::new(-1.0, 1).is_err());
    }

    #[test]
    fn vanishing_noise_is_recovered_by_hard_decision() {
        let c = Constellation::resolve("c4").unwrap();
        let ch = AwgnChannel::new(1e-12, 5).unwrap();
        let u: Vec<usize> = (0..200).map(|k| (k * 3) % 8).collect();
        let y = ch.transmit(&c.map_symbols(&u).unwrap(), 0);
        let back: Vec<usize> = y.iter().map(|&p| c.hard_decide(p)).collect();
        assert_eq!(back, u);
    }

    #[test]
    fn transmit_is_deterministic() {
        let ch = AwgnChannel::new(0.3, 11).unwrap();
        let x = vec![[0.5, -0.5]; 100];
        assert_eq!(ch.transmit(&x, 2), ch.transmit(&x, 2));
        assert_ne!(ch.transmit(&x, 2), ch.transmit(&x, 3));
    }

    #[test]
    fn noise_variance_and_isotropy() {
        let sigma2 = 0.2;
        let ch = AwgnChannel::new(sigma2, 99).unwrap();
        let n = 1_000_000;
        let x = vec![[0.0, 0.0]; n];
        let y = ch.transmit(&x, 0);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for p in &y {
            sxx += p[0] * p[0];
            syy += p[1] * p[1];
            sxy += p[0] * p[1];
        }
        let total = (sxx + syy) / n as f64;
        assert!((total / (2.0 * sigma2) - 1.0).abs() < 0.01, "{total}");
        // off-diagonal covariance: standard error sigma2 / sqrt(n)
        let cov = sxy / n as f64;
        assert!(cov.abs() < 3.0 * sigma2 / (n as f64).sqrt(), "{cov}");
        let vx = sxx / n as f64;
        let vy = syy / n as f64;
        let se = sigma2 * (2.0 / n as f64).sqrt();
        assert!((vx - vy).abs() < 3.0 * se * 2f64.sqrt());
    }

    #[test]
    fn dmc_limits() {
        let c = Constellation::resolve("8psk").unwrap();
        let w = estimate_dmc(&c, &AwgnChannel::new(1e-8, 1).unwrap(), 10_000).unwrap();
        for j in 0..8 {
            for k in 0..8 {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((w.get(j, k) - expect).abs() < 1e-9);
            }
        }
        let w = estimate_dmc(&c, &AwgnChannel::new(1e6, 1).unwrap(), 40_000).unwrap();
        for j in 0..8 {
            for k in 0..8 {
                // binomial standard error at p = 1/8
                let se = (0.125 * 0.875 / 40_000f64).sqrt();
                assert!((w.get(j, k) - 0.125).abs() < 5.0 * se, "{}", w.get(j, k));
            }
        }
        assert!(estimate_dmc(&c, &AwgnChannel::new(0.1, 1).unwrap(), 100).is_err());
    }

    #[test]
    fn dmc_antipodal_matches_gaussian_tail() {
        // points at +-1 with sigma = 0.5: crossover Q(2)
        let c = Constellation::resolve("bpsk").unwrap();
        let n = 400_000;
        let w = estimate_dmc(&c, &AwgnChannel::new(0.25, 3).unwrap(), n).unwrap();
        let q2 = 0.5 * statrs::function::erf::erfc(2.0 / 2f64.sqrt());
        assert!((q2 - 0.02275).abs() < 1e-5);
        let se = (q2 * (1.0 - q2) / n as f64).sqrt();
        assert!((w.get(1, 0) - q2).abs() < 4.0 * se, "{} vs {q2}", w.get(1, 0));
        assert!((w.get(0, 1) - q2).abs() < 4.0 * se);
    }

    #[test]
    fn dmc_estimate_converges() {
        let c = Constellation::resolve("c1").unwrap();
        let sigma2 = esn0_db_to_sigma2(8.0);
        let reference = estimate_dmc(&c, &AwgnChannel::new(sigma2, 1000).unwrap(), 640_000).unwrap();
        let d_small = estimate_dmc(&c, &AwgnChannel::new(sigma2, 1).unwrap(), 10_000)
            .unwrap()
            .frobenius_distance(&reference);
        let d_large = estimate_dmc(&c, &AwgnChannel::new(sigma2, 2).unwrap(), 160_000)
            .unwrap()
            .frobenius_distance(&reference);
        assert!(d_large < d_small, "{d_large} !< {d_small}");
    }

    #[test]
    fn dmc_validation_and_smoothing() {
        assert!(DmcMatrix::new(vec![vec![0.5, 0.5], vec![0.4, 0.5]]).is_err());
        let counts = vec![vec![10, 0], vec![0, 10]];
        let w = DmcMatrix::from_counts(&counts).unwrap();
        assert!(w.is_strictly_positive());
        assert!((w.get(0, 0) + w.get(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mix_endpoints_reproduce_components() {
        let c = Constellation::resolve("8psk").unwrap();
        let a = ComponentChannel::soft(c.clone(), 0.1).unwrap();
        let b = ComponentChannel::hard(c.clone(), 0.1, 10_000, 4).unwrap();
        let u: Vec<usize> = (0..500).map(|k| k % 8).collect();
        let only_a = mix_transmit(&u, &ChannelMix::single(a.clone()), 7, 3).unwrap();
        let only_b = mix_transmit(&u, &ChannelMix::single(b.clone()), 7, 3).unwrap();
        let g1 = mix_transmit(&u, &ChannelMix::new(1.0, a.clone(), b.clone()).unwrap(), 7, 3).unwrap();
        assert_eq!(g1, only_a);
        let g0 = mix_transmit(&u, &ChannelMix::new(0.0, b.clone(), a.clone()).unwrap(), 7, 3).unwrap();
        assert_eq!(g0, only_a);
        let g0b = mix_transmit(&u, &ChannelMix::new(0.0, a.clone(), b.clone()).unwrap(), 7, 3).unwrap();
        assert_eq!(g0b, only_b);
        let half = mix_transmit(&u, &ChannelMix::new(0.5, a.clone(), b.clone()).unwrap(), 7, 3).unwrap();
        assert_eq!(half[..250], only_a[..250]);
        assert!(half[250..].iter().all(|o| matches!(o, Observation::Hard(_))));
    }

    #[test]
    fn mix_split_and_validation() {
        let c8 = Constellation::resolve("8psk").unwrap();
        let c4 = Constellation::resolve("qpsk").unwrap();
        let a = ComponentChannel::soft(c8.clone(), 0.1).unwrap();
        let b = ComponentChannel::soft(c4, 0.1).unwrap();
        assert!(matches!(ChannelMix::new(0.5, a.clone(), b), Err(Error::Config(_))));
        let mut mix = ChannelMix::new(0.3, a.clone(), a.clone()).unwrap();
        assert_eq!(mix.first_count(10), 3);
        assert_eq!(mix.first_count(5), 2);
        let r = mix.routing(100, 1, 0);
        assert_eq!(r.iter().filter(|&&f| f).count(), 30);
        assert!(r[..30].iter().all(|&f| f));
        mix.interleave = true;
        let r1 = mix.routing(100, 1, 0);
        assert_eq!(r1.iter().filter(|&&f| f).count(), 30);
        assert_eq!(r1, mix.routing(100, 1, 0));
        assert!(mix_transmit(&[9], &mix, 1, 0).is_err());
    }
}
