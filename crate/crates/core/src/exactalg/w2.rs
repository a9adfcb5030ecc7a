//! The ring `Z/p^2`, i.e. length-two Witt vectors over `F_p`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::AlgError;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct W2 {
    v: u32,
    p: u32,
}

impl W2 {
    pub fn new(p: u32, n: i64) -> W2 {
        let pp = (p * p) as i64;
        W2 {
            v: n.rem_euclid(pp) as u32,
            p,
        }
    }

    pub fn zero(p: u32) -> W2 {
        W2 { v: 0, p }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn value(&self) -> u32 {
        self.v
    }

    /// Reduction modulo `p`.
    pub fn reduce(&self) -> u32 {
        self.v % self.p
    }

    /// Teichmuller representative of `a in F_p`: the unique lift fixed by
    /// the `p`-th power map, equal to `a^p mod p^2`.
    pub fn teichmuller(p: u32, a: u32) -> W2 {
        let pp = (p * p) as u64;
        let mut acc = 1u64;
        for _ in 0..p {
            acc = acc * (a as u64 % pp) % pp;
        }
        W2 { v: acc as u32, p }
    }

    /// `[a] + p*eps`.
    pub fn lift(p: u32, a: u32, eps: u32) -> W2 {
        W2::teichmuller(p, a) + W2::new(p, (p * (eps % p)) as i64)
    }

    /// For a multiple of `p`, the quotient in `F_p`.
    pub fn div_p(&self) -> Result<u32, AlgError> {
        if !self.v.is_multiple_of(self.p) {
            return Err(AlgError::NotDivisible);
        }
        Ok(self.v / self.p)
    }

    pub fn pow(&self, e: u32) -> W2 {
        let mut acc = W2::new(self.p, 1);
        for _ in 0..e {
            acc = acc * *self;
        }
        acc
    }
}

impl Add for W2 {
    type Output = W2;
    fn add(self, o: W2) -> W2 {
        W2::new(self.p, self.v as i64 + o.v as i64)
    }
}

impl Sub for W2 {
    type Output = W2;
    fn sub(self, o: W2) -> W2 {
        W2::new(self.p, self.v as i64 - o.v as i64)
    }
}

impl Neg for W2 {
    type Output = W2;
    fn neg(self) -> W2 {
        W2::new(self.p, -(self.v as i64))
    }
}

impl Mul for W2 {
    type Output = W2;
    fn mul(self, o: W2) -> W2 {
        W2::new(self.p, self.v as i64 * o.v as i64)
    }
}

impl fmt::Debug for W2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.v, self.p * self.p)
    }
}

/// Dense polynomial over `Z/p^2`, low degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct W2Poly {
    pub p: u32,
    pub c: Vec<W2>,
}

impl W2Poly {
    pub fn constant(c: W2) -> W2Poly {
        W2Poly {
            p: c.p(),
            c: vec![c],
        }
    }

    pub fn t(p: u32) -> W2Poly {
        W2Poly {
            p,
            c: vec![W2::zero(p), W2::new(p, 1)],
        }
    }

    fn coeff(&self, i: usize) -> W2 {
        self.c.get(i).copied().unwrap_or(W2::zero(self.p))
    }

    pub fn add(&self, o: &W2Poly) -> W2Poly {
        let n = self.c.len().max(o.c.len());
        W2Poly {
            p: self.p,
            c: (0..n).map(|i| self.coeff(i) + o.coeff(i)).collect(),
        }
    }

    pub fn sub(&self, o: &W2Poly) -> W2Poly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> W2Poly {
        W2Poly {
            p: self.p,
            c: self.c.iter().map(|&x| -x).collect(),
        }
    }

    pub fn mul(&self, o: &W2Poly) -> W2Poly {
        let mut c = vec![W2::zero(self.p); self.c.len() + o.c.len()];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in o.c.iter().enumerate() {
                c[i + j] = c[i + j] + a * b;
            }
        }
        W2Poly { p: self.p, c }
    }

    pub fn pow(&self, e: u32) -> W2Poly {
        let mut acc = W2Poly::constant(W2::new(self.p, 1));
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self) -> W2Poly {
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &a)| a * W2::new(self.p, i as i64))
            .collect();
        W2Poly { p: self.p, c }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.value() == 0)
    }

    /// Divides every coefficient by `p`, landing in `F_p`.
    pub fn div_p(&self) -> Result<Vec<u32>, AlgError> {
        self.c.iter().map(|x| x.div_p()).collect()
    }

    /// Reduction modulo `p`.
    pub fn reduce(&self) -> Vec<u32> {
        self.c.iter().map(|x| x.reduce()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sequence_mod_p() {
        for p in [3u32, 5, 7, 11, 13] {
            let pw = W2::new(p, p as i64);
            assert_eq!((pw * pw).value(), 0, "p*p = 0");
            for n in 0..(p * p) as i64 {
                let x = W2::new(p, n);
                // kernel of reduction is exactly p*Z/p^2
                assert_eq!(x.reduce() == 0, x.div_p().is_ok());
                if let Ok(e) = x.div_p() {
                    assert_eq!(W2::new(p, (p * e) as i64), x);
                }
                for k in 0..(p * p) as i64 {
                    let y = W2::new(p, k);
                    assert_eq!((x * y).reduce(), x.reduce() * y.reduce() % p);
                    assert_eq!((x + y).reduce(), (x.reduce() + y.reduce()) % p);
                }
            }
        }
    }

    #[test]
    fn teichmuller_is_multiplicative_and_fixed() {
        for p in [3u32, 5, 7] {
            for a in 0..p {
                let t = W2::teichmuller(p, a);
                assert_eq!(t.reduce(), a);
                assert_eq!(t.pow(p), t);
                for b in 0..p {
                    assert_eq!(t * W2::teichmuller(p, b), W2::teichmuller(p, a * b % p));
                }
            }
        }
    }

    #[test]
    fn frobenius_lift_difference_is_divisible() {
        // (a + (t-a)^p - t^p) has all coefficients divisible by p
        for p in [3u32, 5, 7] {
            for a in 0..p {
                let at = W2::teichmuller(p, a);
                let lin = W2Poly::t(p).sub(&W2Poly::constant(at));
                let f = W2Poly::constant(at).add(&lin.pow(p));
                let d = f.sub(&W2Poly::t(p).pow(p));
                assert!(d.div_p().is_ok());
            }
        }
    }
}
