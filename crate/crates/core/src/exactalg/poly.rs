//! Univariate polynomials and Laurent polynomials over `F_{p^m}`.

use std::collections::BTreeMap;
use std::fmt;

use super::field::{Fe, Field};
use super::AlgError;

/// Dense polynomial in `t`, low degree first, with no trailing zeros.
#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    f: Field,
    c: Vec<Fe>,
}

impl Poly {
    pub fn new(f: Field, mut c: Vec<Fe>) -> Poly {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly { f, c }
    }

    pub fn zero(f: Field) -> Poly {
        Poly { f, c: Vec::new() }
    }

    pub fn constant(c: Fe) -> Poly {
        Poly::new(c.field(), vec![c])
    }

    pub fn one(f: Field) -> Poly {
        Poly::constant(f.one())
    }

    /// `c * t^k`.
    pub fn monomial(c: Fe, k: usize) -> Poly {
        let mut v = vec![c.field().zero(); k + 1];
        v[k] = c;
        Poly::new(c.field(), v)
    }

    /// `t - a`.
    pub fn linear(a: Fe) -> Poly {
        Poly::new(a.field(), vec![-a, a.field().one()])
    }

    pub fn from_ints(f: Field, c: &[i64]) -> Poly {
        Poly::new(f, c.iter().map(|&x| f.int(x)).collect())
    }

    pub fn field(&self) -> Field {
        self.f
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> Fe {
        self.c.get(i).copied().unwrap_or(self.f.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree, with `-1` for the zero polynomial.
    pub fn deg(&self) -> i64 {
        self.c.len() as i64 - 1
    }

    pub fn lead(&self) -> Fe {
        self.c.last().copied().unwrap_or(self.f.zero())
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::new(self.f, (0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::new(self.f, (0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }

    pub fn neg(&self) -> Poly {
        Poly {
            f: self.f,
            c: self.c.iter().map(|&x| -x).collect(),
        }
    }

    pub fn scale(&self, s: Fe) -> Poly {
        Poly::new(self.f, self.c.iter().map(|&x| x * s).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero(self.f);
        }
        let mut c = vec![self.f.zero(); self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(self.f, c)
    }

    /// Multiplication by `t^k`.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let mut c = vec![self.f.zero(); k];
        c.extend_from_slice(&self.c);
        Poly { f: self.f, c }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(self.f);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Absolute Frobenius on functions: `f -> f^p = sigma(f)(t^p)`.
    pub fn frob(&self) -> Poly {
        let p = self.f.p() as usize;
        let mut c = vec![
            self.f.zero();
            if self.is_zero() {
                0
            } else {
                (self.c.len() - 1) * p + 1
            }
        ];
        for (i, &a) in self.c.iter().enumerate() {
            c[i * p] = a.frob(1);
        }
        Poly::new(self.f, c)
    }

    /// Inverse of [`Poly::frob`]; `None` unless only exponents divisible by
    /// `p` occur.
    pub fn frob_root(&self) -> Option<Poly> {
        let p = self.f.p() as usize;
        let mut c = Vec::new();
        for (i, &a) in self.c.iter().enumerate() {
            if i % p == 0 {
                c.push(a.frob_inv());
            } else if !a.is_zero() {
                return None;
            }
        }
        Some(Poly::new(self.f, c))
    }

    /// Applies `sigma^e` to every coefficient.
    pub fn map_coeffs_frob(&self, e: u32) -> Poly {
        Poly::new(self.f, self.c.iter().map(|a| a.frob(e)).collect())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.f,
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &a)| a * self.f.int(i as i64))
                .collect(),
        )
    }

    pub fn eval(&self, x: Fe) -> Fe {
        self.c
            .iter()
            .rev()
            .fold(self.f.zero(), |acc, &a| acc * x + a)
    }

    /// `f(t + a)`.
    pub fn taylor_shift(&self, a: Fe) -> Poly {
        let mut out = Poly::zero(self.f);
        let lin = Poly::new(self.f, vec![a, self.f.one()]);
        for &c in self.c.iter().rev() {
            out = out.mul(&lin).add(&Poly::constant(c));
        }
        out
    }

    /// Euclidean division; errors on a zero divisor.
    pub fn divrem(&self, d: &Poly) -> Result<(Poly, Poly), AlgError> {
        if d.is_zero() {
            return Err(AlgError::DivisionByZero);
        }
        let mut r = self.c.clone();
        let dl = d.lead().inv().expect("nonzero lead");
        let dd = d.c.len() - 1;
        if r.len() <= dd {
            return Ok((Poly::zero(self.f), self.clone()));
        }
        let mut q = vec![self.f.zero(); r.len() - dd];
        for i in (0..q.len()).rev() {
            let coef = r[i + dd] * dl;
            q[i] = coef;
            if coef.is_zero() {
                continue;
            }
            for (j, &b) in d.c.iter().enumerate() {
                r[i + j] -= coef * b;
            }
        }
        Ok((Poly::new(self.f, q), Poly::new(self.f, r)))
    }

    /// Exact quotient; errors if the remainder is nonzero.
    pub fn div_exact(&self, d: &Poly) -> Result<Poly, AlgError> {
        let (q, r) = self.divrem(d)?;
        if !r.is_zero() {
            return Err(AlgError::NotDivisible);
        }
        Ok(q)
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(self.lead().inv().expect("nonzero lead"))
    }

    /// Multiplicity of the root `a`.
    pub fn root_multiplicity(&self, a: Fe) -> u32 {
        if self.is_zero() {
            return u32::MAX;
        }
        let lin = Poly::linear(a);
        let mut cur = self.clone();
        let mut k = 0;
        while let Ok(q) = cur.div_exact(&lin) {
            cur = q;
            k += 1;
        }
        k
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.c.iter().map(|x| x.to_string()).collect()
    }
}

/// Monic greatest common divisor. Errors when both inputs vanish.
pub fn poly_gcd(a: &Poly, b: &Poly) -> Result<Poly, AlgError> {
    if a.is_zero() && b.is_zero() {
        return Err(AlgError::BothZero);
    }
    let (mut x, mut y) = (a.clone(), b.clone());
    while !y.is_zero() {
        let (_, r) = x.divrem(&y)?;
        x = y;
        y = r;
    }
    Ok(x.monic())
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, a)| match i {
                0 => format!("({a})"),
                1 => format!("({a})t"),
                _ => format!("({a})t^{i}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl fmt::Display for Poly {
    /// `c_k*t^k+..+c_0`, highest degree first; non-prime coefficients are
    /// parenthesized.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .c
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, a)| {
                let coef = if a.in_prime_field() {
                    a.to_string()
                } else {
                    format!("({a})")
                };
                match (i, a.is_one()) {
                    (0, _) => coef,
                    (1, true) => "t".to_string(),
                    (1, false) => format!("{coef}*t"),
                    (_, true) => format!("t^{i}"),
                    _ => format!("{coef}*t^{i}"),
                }
            })
            .collect();
        write!(f, "{}", terms.join("+"))
    }
}

/// Finite Laurent series `sum c_j t^j`, stored sparsely.
#[derive(Clone, PartialEq, Eq)]
pub struct LaurentPoly {
    f: Field,
    c: BTreeMap<i64, Fe>,
}

impl LaurentPoly {
    pub fn zero(f: Field) -> LaurentPoly {
        LaurentPoly {
            f,
            c: BTreeMap::new(),
        }
    }

    pub fn monomial(c: Fe, j: i64) -> LaurentPoly {
        let mut l = LaurentPoly::zero(c.field());
        l.set(j, c);
        l
    }

    pub fn from_coeffs(f: Field, terms: impl IntoIterator<Item = (i64, Fe)>) -> LaurentPoly {
        let mut l = LaurentPoly::zero(f);
        for (j, c) in terms {
            l.set(j, l.coeff(j) + c);
        }
        l
    }

    pub fn field(&self) -> Field {
        self.f
    }

    pub fn coeff(&self, j: i64) -> Fe {
        self.c.get(&j).copied().unwrap_or(self.f.zero())
    }

    fn set(&mut self, j: i64, c: Fe) {
        if c.is_zero() {
            self.c.remove(&j);
        } else {
            self.c.insert(j, c);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, Fe)> + '_ {
        self.c.iter().map(|(&j, &c)| (j, c))
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn add(&self, o: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (j, c) in o.terms() {
            out.set(j, out.coeff(j) + c);
        }
        out
    }

    pub fn scale(&self, s: Fe) -> LaurentPoly {
        LaurentPoly::from_coeffs(self.f, self.terms().map(|(j, c)| (j, c * s)))
    }

    pub fn mul(&self, o: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.f);
        for (i, a) in self.terms() {
            for (j, b) in o.terms() {
                out.set(i + j, out.coeff(i + j) + a * b);
            }
        }
        out
    }

    /// Absolute Frobenius: `sum c_j t^j -> sum sigma(c_j) t^{pj}`.
    pub fn frob(&self) -> LaurentPoly {
        let p = self.f.p() as i64;
        LaurentPoly::from_coeffs(self.f, self.terms().map(|(j, c)| (j * p, c.frob(1))))
    }

    /// Splits as `t^lo * poly`.
    pub fn as_shifted_poly(&self) -> (i64, Poly) {
        let lo = self.c.keys().next().copied().unwrap_or(0);
        let hi = self.c.keys().last().copied().unwrap_or(0);
        let v = (lo..=hi).map(|j| self.coeff(j)).collect();
        (lo, Poly::new(self.f, v))
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.terms().map(|(j, c)| format!("({c})t^{j}")).collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::field::field;
    use super::*;

    #[test]
    fn gcd_examples() {
        let f = field(5, 1).unwrap();
        let a = Poly::from_ints(f, &[-1, 0, 1]);
        let b = Poly::from_ints(f, &[-1, 1]);
        assert_eq!(poly_gcd(&a, &b).unwrap(), b);
        // t^p - t against t - a
        let tp = Poly::monomial(f.one(), 5).sub(&Poly::monomial(f.one(), 1));
        for a in f.prime_elements() {
            assert_eq!(poly_gcd(&tp, &Poly::linear(a)).unwrap(), Poly::linear(a));
        }
        assert!(poly_gcd(&Poly::zero(f), &Poly::zero(f)).is_err());
        assert_eq!(poly_gcd(&Poly::zero(f), &b.scale(f.int(3))).unwrap(), b);
    }

    #[test]
    fn gcd_against_root_multiplicities_over_quadratic_extension() {
        // The monic gcd of products of linear factors is the product of the
        // shared roots with min multiplicity, found by exhaustive root search.
        let f = field(5, 2).unwrap();
        let els = f.elements();
        let build = |roots: &[(usize, u32)]| {
            roots.iter().fold(Poly::one(f), |acc, &(i, k)| {
                acc.mul(&Poly::linear(els[i]).pow(k))
            })
        };
        let a = build(&[(3, 2), (7, 1), (11, 3)]).mul(&Poly::from_ints(f, &[2, 0, 1]));
        let b = build(&[(3, 1), (11, 4), (20, 1)]);
        let g = poly_gcd(&a, &b).unwrap();
        let mut expect = Poly::one(f);
        for &x in &els {
            let k = a.root_multiplicity(x).min(b.root_multiplicity(x));
            expect = expect.mul(&Poly::linear(x).pow(k));
        }
        assert_eq!(g, expect);
    }

    #[test]
    fn frobenius_and_root() {
        let f = field(3, 2).unwrap();
        let g = f.gen();
        let a = Poly::new(f, vec![g, f.one(), g * g]);
        let fa = a.frob();
        assert_eq!(fa, a.pow(3));
        assert_eq!(fa.frob_root().unwrap(), a);
        assert!(a.frob_root().is_none());
    }

    #[test]
    fn division_and_shift() {
        let f = field(7, 1).unwrap();
        let a = Poly::from_ints(f, &[1, 2, 3, 4]);
        let d = Poly::from_ints(f, &[5, 1]);
        let (q, r) = a.divrem(&d).unwrap();
        assert_eq!(q.mul(&d).add(&r), a);
        let s = a.taylor_shift(f.int(2));
        for x in f.prime_elements() {
            assert_eq!(s.eval(x), a.eval(x + f.int(2)));
        }
    }
}
