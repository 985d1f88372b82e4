//! Arithmetic in GF(2^m), 1 <= m <= 8.
//!
//! Elements are the integers `0..2^m` in polynomial basis; addition is XOR.
//! Each field uses the numerically smallest primitive polynomial of its
//! degree (found by search at construction), so constructions are
//! reproducible:
//!
//! | m | polynomial | hex |
//! |---|------------|-----|
//! | 1 | x + 1 | 0x3 |
//! | 2 | x^2 + x + 1 | 0x7 |
//! | 3 | x^3 + x + 1 | 0xb |
//! | 4 | x^4 + x + 1 | 0x13 |
//! | 5 | x^5 + x^2 + 1 | 0x25 |
//! | 6 | x^6 + x + 1 | 0x43 |
//! | 7 | x^7 + x + 1 | 0x83 |
//! | 8 | x^8 + x^4 + x^3 + x^2 + 1 | 0x11d |

use crate::error::{Error, Result};

pub type Symbol = u8;

/// Log/antilog and full multiplication tables for one field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldTables {
    m: usize,
    size: usize,
    poly: u32,
    exp: Vec<Symbol>,
    log: Vec<u32>,
    mul: Vec<Symbol>,
    inv: Vec<Symbol>,
}

/// Multiply two polynomials modulo `poly` (degree `m`).
fn poly_mulmod(mut a: u32, mut b: u32, poly: u32, m: usize) -> u32 {
    let mut r = 0;
    while b != 0 {
        if b & 1 != 0 {
            r ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << m) != 0 {
            a ^= poly;
        }
    }
    r
}

/// Multiplicative order of x modulo `poly`, or `None` if x generates 0 or
/// the sequence never returns to 1 within 2^m - 1 steps.
fn order_of_x(poly: u32, m: usize) -> Option<usize> {
    let size = 1usize << m;
    let x = if m == 1 { poly & 1 } else { 2 };
    let mut acc = 1u32;
    for k in 1..size {
        acc = poly_mulmod(acc, x, poly, m);
        if acc == 0 {
            return None;
        }
        if acc == 1 {
            return Some(k);
        }
    }
    None
}

/// Smallest primitive polynomial of degree `m`, as an integer with bit `m` set.
pub fn primitive_polynomial(m: usize) -> u32 {
    let size = 1usize << m;
    ((1u32 << m)..(2u32 << m))
        .filter(|p| p & 1 == 1)
        .find(|&p| order_of_x(p, m) == Some(size - 1))
        .expect("a primitive polynomial exists for every degree")
}

impl FieldTables {
    /// Build GF(2^m). Fails unless `1 <= m <= 8`.
    pub fn new(m: usize) -> Result<Self> {
        if !(1..=8).contains(&m) {
            return Err(Error::Config(format!(
                "field degree m={m} outside supported range 1..=8"
            )));
        }
        let size = 1usize << m;
        let poly = primitive_polynomial(m);
        let alpha = if m == 1 { 1 } else { 2 };
        let order = size - 1;
        let mut exp = vec![0 as Symbol; 2 * order];
        let mut log = vec![0u32; size];
        let mut acc = 1u32;
        for k in 0..order {
            exp[k] = acc as Symbol;
            exp[k + order] = acc as Symbol;
            log[acc as usize] = k as u32;
            acc = poly_mulmod(acc, alpha, poly, m);
        }
        let mut tables = FieldTables {
            m,
            size,
            poly,
            exp,
            log,
            mul: vec![0; size * size],
            inv: vec![0; size],
        };
        for a in 1..size {
            for b in 1..size {
                let l = tables.log[a] + tables.log[b];
                tables.mul[a * size + b] = tables.exp[l as usize];
            }
            tables.inv[a] = tables.exp[(order - tables.log[a] as usize) % order];
        }
        Ok(tables)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Field size M = 2^m.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// The primitive element (the class of x).
    pub fn alpha(&self) -> Symbol {
        self.exp[1 % self.exp.len().max(1)]
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        self.mul[a as usize * self.size + b as usize]
    }

    /// Multiplicative inverse; `None` for zero.
    #[inline]
    pub fn inv(&self, a: Symbol) -> Option<Symbol> {
        (a != 0).then(|| self.inv[a as usize])
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Option<Symbol> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: Symbol, e: u64) -> Symbol {
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        let order = (self.size - 1) as u64;
        let l = (self.log[a as usize] as u64 * (e % order)) % order;
        self.exp[l as usize]
    }

    /// Row of the multiplication table: `a * x` for every x.
    #[inline]
    pub fn mul_row(&self, a: Symbol) -> &[Symbol] {
        let s = a as usize * self.size;
        &self.mul[s..s + self.size]
    }

    /// Symbols in the field, in integer order.
    pub fn elements(&self) -> impl Iterator<Item = Symbol> {
        (0..self.size).map(|a| a as Symbol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf8_size_and_polynomial() {
        let f = FieldTables::new(3).unwrap();
        assert_eq!(f.size(), 8);
        assert_eq!(f.polynomial(), 0b1011);
    }

    #[test]
    fn documented_polynomials() {
        let expected = [0x3, 0x7, 0xb, 0x13, 0x25, 0x43, 0x83, 0x11d];
        for (m, p) in (1..=8).zip(expected) {
            assert_eq!(primitive_polynomial(m), p, "m={m}");
        }
    }

    #[test]
    fn rejects_bad_degree() {
        assert!(matches!(FieldTables::new(0), Err(Error::Config(_))));
        assert!(matches!(FieldTables::new(9), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_order_brute_force() {
        for m in 2..=8 {
            let f = FieldTables::new(m).unwrap();
            let a = f.alpha();
            let mut acc: Symbol = 1;
            for k in 1..f.size() {
                acc = f.mul(acc, a);
                if k < f.size() - 1 {
                    assert_ne!(acc, 1, "m={m}: alpha^{k} = 1");
                }
            }
            assert_eq!(acc, 1, "m={m}");
        }
    }

    #[test]
    fn inverses_and_zero() {
        for m in 1..=8 {
            let f = FieldTables::new(m).unwrap();
            assert_eq!(f.inv(0), None);
            for a in f.elements().skip(1) {
                let ia = f.inv(a).unwrap();
                assert_eq!(f.mul(a, ia), 1);
                // uniqueness
                let count = f.elements().filter(|&b| f.mul(a, b) == 1).count();
                assert_eq!(count, 1);
            }
        }
    }

    #[test]
    fn exhaustive_axioms_small_fields() {
        for m in 1..=4 {
            let f = FieldTables::new(m).unwrap();
            for a in f.elements() {
                assert_eq!(f.add(a, a), 0);
                assert_eq!(f.mul(a, 1), a);
                assert_eq!(f.mul(a, 0), 0);
                for b in f.elements() {
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in f.elements() {
                        assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let f = FieldTables::new(3).unwrap();
        for a in f.elements() {
            let mut acc = 1;
            for e in 0..20u64 {
                assert_eq!(f.pow(a, e), acc, "a={a} e={e}");
                acc = f.mul(acc, a);
            }
        }
    }
}
