//! Rational functions whose poles sit at finitely many rational points.
//!
//! A value is `num / prod (t - b)^{e_b}`, kept reduced so that `num` is not
//! divisible by any `(t - b)` with `e_b > 0`. These are exactly the functions
//! on the complement of a finite set of points in the affine line, which is
//! all the Cech cochains on the marked projective line ever need.

use std::collections::BTreeMap;
use std::fmt;

use super::field::{Fe, Field};
use super::poly::{LaurentPoly, Poly};
use super::AlgError;

#[derive(Clone, PartialEq, Eq)]
pub struct RatFn {
    num: Poly,
    den: BTreeMap<Fe, u32>,
}

impl RatFn {
    pub fn zero(f: Field) -> RatFn {
        RatFn {
            num: Poly::zero(f),
            den: BTreeMap::new(),
        }
    }

    pub fn one(f: Field) -> RatFn {
        RatFn::from_poly(Poly::one(f))
    }

    pub fn constant(c: Fe) -> RatFn {
        RatFn::from_poly(Poly::constant(c))
    }

    pub fn from_poly(p: Poly) -> RatFn {
        RatFn {
            num: p,
            den: BTreeMap::new(),
        }
    }

    /// `(t - b)^{-e}`.
    pub fn pole(b: Fe, e: u32) -> RatFn {
        let mut den = BTreeMap::new();
        if e > 0 {
            den.insert(b, e);
        }
        RatFn {
            num: Poly::one(b.field()),
            den,
        }
    }

    /// `t^j`, any sign of `j`.
    pub fn t_pow(f: Field, j: i64) -> RatFn {
        if j >= 0 {
            RatFn::from_poly(Poly::monomial(f.one(), j as usize))
        } else {
            RatFn::pole(f.zero(), (-j) as u32)
        }
    }

    pub fn from_laurent(l: &LaurentPoly) -> RatFn {
        let (lo, p) = l.as_shifted_poly();
        RatFn::from_poly(p).mul(&RatFn::t_pow(l.field(), lo))
    }

    fn build(num: Poly, den: BTreeMap<Fe, u32>) -> RatFn {
        let mut r = RatFn { num, den };
        r.reduce();
        r
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let keys: Vec<Fe> = self.den.keys().copied().collect();
        for b in keys {
            let lin = Poly::linear(b);
            loop {
                let e = self.den[&b];
                if e == 0 {
                    break;
                }
                match self.num.div_exact(&lin) {
                    Ok(q) => {
                        self.num = q;
                        self.den.insert(b, e - 1);
                    }
                    Err(_) => break,
                }
            }
        }
        self.den.retain(|_, e| *e > 0);
    }

    pub fn field(&self) -> Field {
        self.num.field()
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &BTreeMap<Fe, u32> {
        &self.den
    }

    pub fn den_poly(&self) -> Poly {
        self.den
            .iter()
            .fold(Poly::one(self.field()), |acc, (&b, &e)| {
                acc.mul(&Poly::linear(b).pow(e))
            })
    }

    pub fn den_degree(&self) -> i64 {
        self.den.values().map(|&e| e as i64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_poly(&self) -> bool {
        self.den.is_empty()
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        self.is_poly().then_some(&self.num)
    }

    /// Pole order at `b` (0 when regular there).
    pub fn pole_order(&self, b: Fe) -> u32 {
        self.den.get(&b).copied().unwrap_or(0)
    }

    fn common(&self, o: &RatFn) -> (Poly, Poly, BTreeMap<Fe, u32>) {
        let mut den = self.den.clone();
        for (&b, &e) in &o.den {
            let cur = den.entry(b).or_insert(0);
            *cur = (*cur).max(e);
        }
        let lift = |r: &RatFn| {
            den.iter().fold(r.num.clone(), |acc, (&b, &e)| {
                acc.mul(&Poly::linear(b).pow(e - r.pole_order(b)))
            })
        };
        (lift(self), lift(o), den)
    }

    pub fn add(&self, o: &RatFn) -> RatFn {
        let (a, b, den) = self.common(o);
        RatFn::build(a.add(&b), den)
    }

    pub fn sub(&self, o: &RatFn) -> RatFn {
        let (a, b, den) = self.common(o);
        RatFn::build(a.sub(&b), den)
    }

    pub fn neg(&self) -> RatFn {
        RatFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, s: Fe) -> RatFn {
        RatFn::build(self.num.scale(s), self.den.clone())
    }

    pub fn mul(&self, o: &RatFn) -> RatFn {
        let mut den = self.den.clone();
        for (&b, &e) in &o.den {
            *den.entry(b).or_insert(0) += e;
        }
        RatFn::build(self.num.mul(&o.num), den)
    }

    pub fn mul_poly(&self, p: &Poly) -> RatFn {
        RatFn::build(self.num.mul(p), self.den.clone())
    }

    pub fn pow(&self, e: u32) -> RatFn {
        let den = self.den.iter().map(|(&b, &k)| (b, k * e)).collect();
        RatFn::build(self.num.pow(e), den)
    }

    /// Absolute Frobenius `g -> g^p`; poles sit at prime-field points so
    /// they are fixed by `sigma`.
    pub fn frob(&self) -> RatFn {
        let p = self.field().p();
        let den = self.den.iter().map(|(&b, &k)| (b.frob(1), k * p)).collect();
        RatFn::build(self.num.frob(), den)
    }

    /// Inverse, available when the numerator splits into a constant times
    /// powers of `(t - b)` for `b` in `points`.
    pub fn inv(&self, points: &[Fe]) -> Result<RatFn, AlgError> {
        if self.is_zero() {
            return Err(AlgError::DivisionByZero);
        }
        let mut rest = self.num.clone();
        let mut den = BTreeMap::new();
        for &b in points {
            let k = rest.root_multiplicity(b);
            if k > 0 {
                rest = rest.div_exact(&Poly::linear(b).pow(k))?;
                den.insert(b, k);
            }
        }
        if rest.deg() != 0 {
            return Err(AlgError::NotInvertible);
        }
        let num = self.den.iter().fold(
            Poly::constant(rest.lead().inv().expect("nonzero")),
            |acc, (&b, &e)| acc.mul(&Poly::linear(b).pow(e)),
        );
        Ok(RatFn::build(num, den))
    }

    pub fn derivative(&self) -> RatFn {
        if self.den.is_empty() {
            return RatFn::from_poly(self.num.derivative());
        }
        // d(N / prod (t-b)^e) = (N' prod (t-b) - N sum_b e_b prod_{c != b} (t-c)) / prod (t-b)^{e+1}
        let f = self.field();
        let full: Poly = self
            .den
            .keys()
            .fold(Poly::one(f), |acc, &b| acc.mul(&Poly::linear(b)));
        let mut tail = Poly::zero(f);
        for (&b, &e) in &self.den {
            let others = full.div_exact(&Poly::linear(b)).expect("factor present");
            tail = tail.add(&others.scale(f.int(e as i64)));
        }
        let num = self.num.derivative().mul(&full).sub(&self.num.mul(&tail));
        let den = self.den.iter().map(|(&b, &e)| (b, e + 1)).collect();
        RatFn::build(num, den)
    }

    /// Laurent coefficients at the finite point `a`: returns the valuation
    /// `v` and the coefficients of `(t-a)^v, .., (t-a)^{v+len-1}`.
    pub fn laurent_at(&self, a: Fe, len: usize) -> (i64, Vec<Fe>) {
        let f = self.field();
        if self.is_zero() {
            return (0, vec![f.zero(); len]);
        }
        let ea = self.pole_order(a) as i64;
        // N(a+u) / prod_{b != a} (a - b + u)^{e_b}, a power series in u.
        let n = self.num.taylor_shift(a);
        let mut q = Poly::one(f);
        for (&b, &e) in &self.den {
            if b != a {
                q = q.mul(&Poly::new(f, vec![a - b, f.one()]).pow(e));
            }
        }
        let need = len + n.deg().max(0) as usize + 1;
        let qinv = series_inverse(&q, need);
        let mut series = vec![f.zero(); need];
        for (i, &x) in n.coeffs().iter().enumerate() {
            for (j, &y) in qinv.iter().enumerate() {
                if i + j < need {
                    series[i + j] += x * y;
                }
            }
        }
        let lead = series.iter().position(|x| !x.is_zero()).unwrap_or(0);
        let coeffs: Vec<Fe> = (0..len)
            .map(|k| series.get(lead + k).copied().unwrap_or(f.zero()))
            .collect();
        (lead as i64 - ea, coeffs)
    }

    /// Coefficient of `(t-a)^k` in the expansion at `a`.
    pub fn coeff_at(&self, a: Fe, k: i64) -> Fe {
        let f = self.field();
        let ea = self.pole_order(a) as i64;
        if k < -ea {
            return f.zero();
        }
        let len = (k + ea + 1) as usize;
        let (v, c) = self.laurent_shifted(a, len);
        let idx = k - v;
        if idx < 0 {
            f.zero()
        } else {
            c.get(idx as usize).copied().unwrap_or(f.zero())
        }
    }

    /// Expansion starting at exponent `-pole_order(a)`.
    fn laurent_shifted(&self, a: Fe, len: usize) -> (i64, Vec<Fe>) {
        let f = self.field();
        let ea = self.pole_order(a) as i64;
        let n = self.num.taylor_shift(a);
        let mut q = Poly::one(f);
        for (&b, &e) in &self.den {
            if b != a {
                q = q.mul(&Poly::new(f, vec![a - b, f.one()]).pow(e));
            }
        }
        let qinv = series_inverse(&q, len);
        let mut series = vec![f.zero(); len];
        for (i, &x) in n.coeffs().iter().enumerate().take(len) {
            for (j, &y) in qinv.iter().enumerate() {
                if i + j < len {
                    series[i + j] += x * y;
                }
            }
        }
        (-ea, series)
    }

    /// Residue of `self * dt` at the finite point `a`.
    pub fn residue_at(&self, a: Fe) -> Fe {
        self.coeff_at(a, -1)
    }

    /// Principal part at `a` as a rational function.
    pub fn principal_part(&self, a: Fe) -> RatFn {
        let f = self.field();
        let ea = self.pole_order(a);
        if ea == 0 {
            return RatFn::zero(f);
        }
        let (_, c) = self.laurent_shifted(a, ea as usize);
        // sum_{k=0}^{ea-1} c_k (t-a)^{k} / (t-a)^{ea}
        let num = c.iter().enumerate().fold(Poly::zero(f), |acc, (k, &x)| {
            acc.add(&Poly::linear(a).pow(k as u32).scale(x))
        });
        RatFn::build(num, BTreeMap::from([(a, ea)]))
    }

    /// Value at a finite point, `None` at a pole.
    pub fn eval(&self, a: Fe) -> Option<Fe> {
        if self.pole_order(a) > 0 {
            return None;
        }
        let d = self.den_poly().eval(a);
        Some(self.num.eval(a) / d)
    }

    /// Order of growth at infinity: `deg num - deg den` (`i64::MIN` for 0).
    pub fn degree_at_inf(&self) -> i64 {
        if self.is_zero() {
            return i64::MIN;
        }
        self.num.deg() - self.den_degree()
    }

    /// Value at infinity, `None` when there is a pole there.
    pub fn eval_inf(&self) -> Option<Fe> {
        let f = self.field();
        match self.degree_at_inf() {
            d if d > 0 => None,
            0 => Some(self.num.lead()),
            _ => Some(f.zero()),
        }
    }

    /// Coefficients of the expansion at infinity in powers of `1/t`:
    /// entry `k` is the coefficient of `t^{top - k}`.
    pub fn expand_at_inf(&self, top: i64, len: usize) -> Vec<Fe> {
        // Substitute t = 1/s: g(1/s) = s^{-D} N~(s) / Q~(s) with reversed polys.
        let f = self.field();
        if self.is_zero() {
            return vec![f.zero(); len];
        }
        let nd = self.num.deg();
        let qd = self.den_degree();
        let q = self.den_poly();
        let rev =
            |p: &Poly, d: i64| Poly::new(f, (0..=d).map(|i| p.coeff((d - i) as usize)).collect());
        let nr = rev(&self.num, nd);
        let qr = rev(&q, qd);
        // g = t^{nd - qd} * nr(s) / qr(s), qr(0) = 1.
        let lead_exp = nd - qd;
        let skip = (lead_exp - top).max(0);
        let need = (len as i64 + skip) as usize;
        let qinv = series_inverse(&qr, need);
        let mut series = vec![f.zero(); need];
        for (i, &x) in nr.coeffs().iter().enumerate().take(need) {
            for (j, &y) in qinv.iter().enumerate() {
                if i + j < need {
                    series[i + j] += x * y;
                }
            }
        }
        (0..len as i64)
            .map(|k| {
                let exp = top - k;
                let idx = lead_exp - exp;
                if idx < 0 || idx as usize >= need {
                    f.zero()
                } else {
                    series[idx as usize]
                }
            })
            .collect()
    }
}

/// First `len` coefficients of `1/q` for `q(0) != 0`.
fn series_inverse(q: &Poly, len: usize) -> Vec<Fe> {
    let f = q.field();
    let q0 = q.coeff(0).inv().expect("series inverse needs q(0) != 0");
    let mut out = vec![f.zero(); len];
    for k in 0..len {
        let mut acc = if k == 0 { f.one() } else { f.zero() };
        for j in 1..=k {
            let qj = q.coeff(j);
            if !qj.is_zero() {
                acc -= qj * out[k - j];
            }
        }
        out[k] = acc * q0;
    }
    out
}

impl fmt::Display for RatFn {
    /// `num` or `(num)/(t-b)^e*..`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return write!(f, "{}", self.num);
        }
        let d: Vec<String> = self
            .den
            .iter()
            .map(|(b, e)| {
                let base = if b.is_zero() {
                    "t".to_string()
                } else {
                    format!("(t-{b})")
                };
                if *e == 1 {
                    base
                } else {
                    format!("{base}^{e}")
                }
            })
            .collect();
        write!(f, "({})/({})", self.num, d.join("*"))
    }
}

impl fmt::Debug for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return write!(f, "{:?}", self.num);
        }
        let d: Vec<String> = self
            .den
            .iter()
            .map(|(b, e)| format!("(t-{b})^{e}"))
            .collect();
        write!(f, "[{:?}] / {}", self.num, d.join(""))
    }
}
