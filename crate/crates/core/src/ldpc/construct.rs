//! Exponent-matrix search and cycle analysis for quasi-cyclic Tanner graphs.

use std::collections::VecDeque;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Cycles up to this length are rejected when a cleaner shift exists.
const PREFERRED_GIRTH: usize = 8;
const MIN_GIRTH: usize = 6;

/// Base-graph edges with their circulant shifts, grown incrementally.
pub(crate) struct QcGraph {
    pub z: usize,
    pub col_edges: Vec<Vec<(usize, usize)>>,
    pub row_edges: Vec<Vec<(usize, usize)>>,
}

impl QcGraph {
    pub fn new(mb: usize, nb: usize, z: usize) -> Self {
        QcGraph { z, col_edges: vec![Vec::new(); nb], row_edges: vec![Vec::new(); mb] }
    }

    pub fn from_exponents(exps: &[Vec<Option<usize>>], z: usize) -> Self {
        let mb = exps.len();
        let nb = exps.first().map_or(0, |r| r.len());
        let mut g = QcGraph::new(mb, nb, z);
        for (r, row) in exps.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                if let Some(s) = *s {
                    g.add(r, j, s);
                }
            }
        }
        g
    }

    fn add(&mut self, r: usize, j: usize, s: usize) {
        self.col_edges[j].push((r, s));
        self.row_edges[r].push((j, s));
    }

    fn remove_last(&mut self, r: usize, j: usize) {
        self.col_edges[j].pop();
        self.row_edges[r].pop();
    }

    /// Length of the shortest cycle through variable `j*Z`, searching cycles
    /// up to `max_len`. Returns `None` when there is none that short.
    pub fn local_girth(&self, j: usize, max_len: usize, scratch: &mut Scratch) -> Option<usize> {
        let z = self.z;
        let nv = self.col_edges.len() * z;
        scratch.reset(nv + self.row_edges.len() * z);
        // node ids: variables first, then checks
        let root = j * z;
        scratch.visit(root, 0, usize::MAX, usize::MAX);
        let mut queue = VecDeque::from([root]);
        let mut best: Option<usize> = None;
        let limit = max_len / 2;
        while let Some(u) = queue.pop_front() {
            let du = scratch.dist[u];
            if du >= limit {
                continue;
            }
            if let Some(b) = best {
                if 2 * du >= b {
                    break;
                }
            }
            let neighbours: Vec<usize> = if u < nv {
                let (cj, v) = (u / z, u % z);
                self.col_edges[cj].iter().map(|&(r, s)| nv + r * z + (v + z - s) % z).collect()
            } else {
                let (r, t) = ((u - nv) / z, (u - nv) % z);
                self.row_edges[r].iter().map(|&(cj, s)| cj * z + (t + s) % z).collect()
            };
            for w in neighbours {
                if w == scratch.parent[u] {
                    continue;
                }
                let branch = if u == root { w } else { scratch.branch[u] };
                if scratch.seen(w) {
                    if scratch.branch[w] != branch || w == root {
                        let len = du + scratch.dist[w] + 1;
                        if len <= max_len && best.is_none_or(|b| len < b) {
                            best = Some(len);
                        }
                    }
                } else {
                    scratch.visit(w, du + 1, u, branch);
                    queue.push_back(w);
                }
            }
        }
        best
    }

    /// Exact girth of the lifted graph, `None` if acyclic.
    pub fn girth(&self) -> Option<usize> {
        let mut scratch = Scratch::default();
        (0..self.col_edges.len()).filter_map(|j| self.local_girth(j, usize::MAX, &mut scratch)).min()
    }
}

#[derive(Default)]
pub(crate) struct Scratch {
    stamp: Vec<u32>,
    epoch: u32,
    dist: Vec<usize>,
    parent: Vec<usize>,
    branch: Vec<usize>,
}

impl Scratch {
    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.dist = vec![0; n];
            self.parent = vec![0; n];
            self.branch = vec![0; n];
            self.epoch = 0;
        }
        self.epoch += 1;
    }

    fn seen(&self, u: usize) -> bool {
        self.stamp[u] == self.epoch
    }

    fn visit(&mut self, u: usize, d: usize, parent: usize, branch: usize) {
        self.stamp[u] = self.epoch;
        self.dist[u] = d;
        self.parent[u] = parent;
        self.branch[u] = branch;
    }
}

/// Base rows touched by column `j` of a regular `mb x nb` base matrix.
pub(crate) fn base_rows(j: usize, d_v: usize, mb: usize) -> Vec<usize> {
    (0..d_v).map(|t| (d_v * j + t) % mb).collect()
}

/// Choose circulant shifts edge by edge so that each new edge closes no
/// cycle shorter than the preferred girth, falling back to the minimum.
pub(crate) fn search_shifts(
    mb: usize,
    nb: usize,
    d_v: usize,
    z: usize,
    seed: u64,
) -> Result<Vec<Vec<Option<usize>>>> {
    let mut g = QcGraph::new(mb, nb, z);
    let mut exps = vec![vec![None; nb]; mb];
    let mut scratch = Scratch::default();
    let mut rng = stream_rng(seed, Stream::Shifts, 0);
    let mut relaxed = 0usize;
    for j in 0..nb {
        for r in base_rows(j, d_v, mb) {
            let mut candidates: Vec<usize> = (0..z).collect();
            candidates.shuffle(&mut rng);
            let mut fallback = None;
            let mut chosen = None;
            for &s in &candidates {
                g.add(r, j, s);
                let girth = g.local_girth(j, PREFERRED_GIRTH - 2, &mut scratch);
                g.remove_last(r, j);
                match girth {
                    None => {
                        chosen = Some(s);
                        break;
                    }
                    Some(len) if len >= MIN_GIRTH && fallback.is_none() => fallback = Some(s),
                    _ => {}
                }
            }
            let s = match (chosen, fallback) {
                (Some(s), _) => s,
                (None, Some(s)) => {
                    relaxed += 1;
                    s
                }
                (None, None) => {
                    return Err(Error::Construction(format!(
                        "no circulant shift avoids 4-cycles at base entry ({r}, {j}); \
                         base {mb}x{nb}, Z={z}, d_v={d_v}: increase Z or reduce d_c"
                    )))
                }
            };
            g.add(r, j, s);
            exps[r][j] = Some(s);
        }
    }
    if relaxed > 0 {
        log::debug!("{relaxed} of {} base edges accept 6-cycles", nb * d_v);
    }
    Ok(exps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_stack_has_four_cycles() {
        // two columns both with shift 0 in two rows form a 4-cycle
        let exps = vec![vec![Some(0), Some(0)], vec![Some(0), Some(0)]];
        let g = QcGraph::from_exponents(&exps, 5);
        assert_eq!(g.girth(), Some(4));
    }

    #[test]
    fn single_circulant_pair_cycle_length() {
        // a 2x2 base with shift difference d forms cycles of length 4Z/gcd
        let exps = vec![vec![Some(0), Some(0)], vec![Some(0), Some(1)]];
        let g = QcGraph::from_exponents(&exps, 5);
        assert_eq!(g.girth(), Some(20));
    }

    #[test]
    fn search_meets_minimum_girth() {
        let exps = search_shifts(6, 18, 3, 31, 7).unwrap();
        let g = QcGraph::from_exponents(&exps, 31);
        assert!(g.girth().unwrap() >= MIN_GIRTH);
        for j in 0..18 {
            assert_eq!(exps.iter().filter(|r| r[j].is_some()).count(), 3);
        }
        for row in &exps {
            assert_eq!(row.iter().filter(|s| s.is_some()).count(), 9);
        }
    }

    #[test]
    fn tiny_circulant_fails_cleanly() {
        let err = search_shifts(3, 30, 3, 2, 1).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }
}
