//! Systematic encoding through a reduced row-echelon form of H.
//!
//! Rows are held bit-sliced: `m` bit planes of packed `u64` words, so adding a
//! GF(2^m) multiple of one row to another is a handful of word XORs.

use crate::error::{Error, Result};
use crate::gf::{FieldTables, Symbol};

struct SlicedMatrix {
    m: usize,
    words: usize,
    data: Vec<u64>,
}

impl SlicedMatrix {
    fn zeros(rows: usize, cols: usize, m: usize) -> Self {
        let words = cols.div_ceil(64);
        SlicedMatrix { m, words, data: vec![0; rows * m * words] }
    }

    fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        let len = self.m * self.words;
        i * len..(i + 1) * len
    }

    fn get(&self, i: usize, c: usize) -> Symbol {
        let base = i * self.m * self.words + c / 64;
        let mut v = 0;
        for b in 0..self.m {
            v |= (((self.data[base + b * self.words] >> (c % 64)) & 1) as Symbol) << b;
        }
        v
    }

    fn set(&mut self, i: usize, c: usize, v: Symbol) {
        let base = i * self.m * self.words + c / 64;
        for b in 0..self.m {
            let word = &mut self.data[base + b * self.words];
            *word &= !(1u64 << (c % 64));
            *word |= (((v >> b) & 1) as u64) << (c % 64);
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            let len = self.m * self.words;
            let (lo, hi) = (a.min(b), a.max(b));
            let (x, y) = self.data.split_at_mut(hi * len);
            x[lo * len..(lo + 1) * len].swap_with_slice(&mut y[..len]);
        }
    }

    /// `dst ^= a * src` where `src` is a detached row.
    fn add_scaled(&mut self, i: usize, src: &[u64], a: Symbol, f: &FieldTables) {
        let words = self.words;
        let span = self.row_span(i);
        let row = &mut self.data[span];
        for t in 0..self.m {
            let image = f.mul(a, 1 << t);
            let src_plane = &src[t * words..(t + 1) * words];
            for k in 0..self.m {
                if (image >> k) & 1 == 1 {
                    for (d, s) in row[k * words..(k + 1) * words].iter_mut().zip(src_plane) {
                        *d ^= s;
                    }
                }
            }
        }
    }

    fn scale(&mut self, i: usize, a: Symbol, f: &FieldTables) {
        let span = self.row_span(i);
        let src = self.data[span.clone()].to_vec();
        self.data[span].fill(0);
        self.add_scaled(i, &src, a, f);
    }
}

/// Cached parity solve for one parity-check matrix.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    rank: usize,
    info_positions: Vec<usize>,
    pivot_positions: Vec<usize>,
    /// `k x rank` coefficients: parity `i` is `sum_j parity[j][i] * info[j]`.
    parity: Vec<Symbol>,
}

impl Encoder {
    /// Row-reduce `H` given as per-check `(column, coefficient)` lists.
    pub fn new(checks: &[Vec<(usize, Symbol)>], n: usize, f: &FieldTables) -> Result<Self> {
        let rows = checks.len();
        let mut h = SlicedMatrix::zeros(rows, n, f.m());
        for (i, check) in checks.iter().enumerate() {
            for &(c, v) in check {
                if c >= n || v == 0 {
                    return Err(Error::Construction(format!("bad entry ({i}, {c}) = {v}")));
                }
                h.set(i, c, f.add(h.get(i, c), v));
            }
        }
        let mut rank = 0;
        let mut pivots = Vec::new();
        for c in (0..n).rev() {
            if rank == rows {
                break;
            }
            let Some(p) = (rank..rows).find(|&i| h.get(i, c) != 0) else {
                continue;
            };
            h.swap_rows(p, rank);
            let inv = f.inv(h.get(rank, c)).expect("pivot is nonzero");
            h.scale(rank, inv, f);
            let src = h.data[h.row_span(rank)].to_vec();
            for i in 0..rows {
                if i != rank {
                    let a = h.get(i, c);
                    if a != 0 {
                        h.add_scaled(i, &src, a, f);
                    }
                }
            }
            pivots.push(c);
            rank += 1;
        }
        let mut is_pivot = vec![false; n];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_positions.len();
        let mut parity = vec![0; rank * k];
        for i in 0..rank {
            for (jj, &c) in info_positions.iter().enumerate() {
                parity[jj * rank + i] = h.get(i, c);
            }
        }
        if rank < rows {
            log::info!("parity-check matrix has rank {rank} < {rows}; dimension is {k}");
        }
        Ok(Encoder { n, rank, info_positions, pivot_positions: pivots, parity })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Code dimension `n - rank`.
    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    /// Codeword positions carrying the information symbols, in order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[Symbol], f: &FieldTables) -> Result<Vec<Symbol>> {
        let k = self.k();
        if info.len() != k {
            return Err(Error::Input(format!("expected {k} information symbols, got {}", info.len())));
        }
        let mut word = vec![0; self.n];
        for (&p, &v) in self.info_positions.iter().zip(info) {
            word[p] = v;
        }
        let mut acc = vec![0; self.rank];
        for (j, &v) in info.iter().enumerate() {
            if v != 0 {
                let times_v = f.mul_row(v);
                let col = &self.parity[j * self.rank..(j + 1) * self.rank];
                for (a, &h) in acc.iter_mut().zip(col) {
                    *a ^= times_v[h as usize];
                }
            }
        }
        for (&p, &a) in self.pivot_positions.iter().zip(&acc) {
            word[p] = a;
        }
        Ok(word)
    }
}
