//! Prime fields and their small extensions.
//!
//! Elements of `F_{p^m}` are stored as packed coefficient nibbles against a
//! fixed monic modulus. The modulus is the least primitive polynomial in the
//! order that reads its coefficient vector `(c0, .., c_{m-1})` as the base-p
//! integer `c0 + c1 p + ..`, so `x` generates the multiplicative group and the
//! exponent/log tables are indexed directly by the packed code.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use super::AlgError;

const NIBBLE: u32 = 4;

pub struct FieldCtx {
    p: u32,
    m: u32,
    q: u32,
    /// Monic modulus coefficients, low degree first, length m+1.
    modulus: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, o: &FieldCtx) -> bool {
        self.p == o.p && self.m == o.m
    }
}

impl Eq for FieldCtx {}

/// Shared handle to a field. Contexts are created once per `(p, m)` and live
/// for the whole process.
pub type Field = &'static FieldCtx;

fn is_prime(n: u32) -> bool {
    n >= 2
        && (2..n)
            .take_while(|d| d * d <= n)
            .all(|d| !n.is_multiple_of(d))
}

/// Returns the field `F_{p^m}`. `p` must be an odd prime at most 13 and
/// `1 <= m <= 4`.
pub fn field(p: u32, m: u32) -> Result<Field, AlgError> {
    if !is_prime(p) || p == 2 {
        return Err(AlgError::BadPrime(p));
    }
    if p > 13 || m == 0 || m > 4 {
        return Err(AlgError::UnsupportedField { p, m });
    }
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Field>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("field cache poisoned");
    if let Some(f) = guard.get(&(p, m)) {
        return Ok(f);
    }
    let ctx: Field = Box::leak(Box::new(FieldCtx::build(p, m)));
    guard.insert((p, m), ctx);
    Ok(ctx)
}

fn pack(digits: &[u32]) -> u32 {
    digits
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &d)| acc | (d << (NIBBLE * i as u32)))
}

fn digit(code: u32, i: u32) -> u32 {
    (code >> (NIBBLE * i)) & 0xF
}

impl FieldCtx {
    fn build(p: u32, m: u32) -> FieldCtx {
        let q = p.pow(m);
        if m == 1 {
            let g = (2..p)
                .find(|&g| {
                    let mut x = 1u32;
                    (1..p - 1).all(|_| {
                        x = x * g % p;
                        x != 1
                    })
                })
                .unwrap_or(1);
            let modulus = vec![(p - g) % p, 1];
            let mut exp = vec![0; (q - 1) as usize];
            let mut log = vec![0; 16];
            let mut x = 1;
            for (k, e) in exp.iter_mut().enumerate() {
                *e = x;
                log[x as usize] = k as u32;
                x = x * g % p;
            }
            return FieldCtx {
                p,
                m,
                q,
                modulus,
                exp,
                log,
            };
        }
        for n in 0..q {
            let mut low: Vec<u32> = (0..m).map(|i| n / p.pow(i) % p).collect();
            if low[0] == 0 {
                continue;
            }
            low.push(1);
            if let Some((exp, log)) = Self::power_tables(p, m, &low) {
                return FieldCtx {
                    p,
                    m,
                    q,
                    modulus: low,
                    exp,
                    log,
                };
            }
        }
        unreachable!("every finite field has a primitive polynomial")
    }

    /// Powers of `x` modulo `modulus`; `None` unless `x` has order `p^m - 1`.
    fn power_tables(p: u32, m: u32, modulus: &[u32]) -> Option<(Vec<u32>, Vec<u32>)> {
        let q = p.pow(m) as usize;
        let mut exp = Vec::with_capacity(q - 1);
        let mut log = vec![u32::MAX; 1 << (NIBBLE * m)];
        let mut cur = vec![0u32; m as usize];
        cur[0] = 1;
        for k in 0..q - 1 {
            let code = pack(&cur);
            if log[code as usize] != u32::MAX {
                return None;
            }
            log[code as usize] = k as u32;
            exp.push(code);
            // multiply by x
            let top = cur[m as usize - 1];
            for i in (1..m as usize).rev() {
                cur[i] = (cur[i - 1] + p * p - top * modulus[i]) % p;
            }
            cur[0] = (p * p - top * modulus[0]) % p;
        }
        if pack(&cur) != 1 {
            return None;
        }
        Some((exp, log))
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Modulus coefficients, low degree first.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn zero(&'static self) -> Fe {
        Fe { f: self, v: 0 }
    }

    pub fn one(&'static self) -> Fe {
        Fe { f: self, v: 1 }
    }

    /// Image of an integer in the prime field.
    pub fn int(&'static self, n: i64) -> Fe {
        Fe {
            f: self,
            v: n.rem_euclid(self.p as i64) as u32,
        }
    }

    /// Generator of the extension (the class of `x`); equals a primitive root
    /// when `m = 1`.
    pub fn gen(&'static self) -> Fe {
        Fe {
            f: self,
            v: self.exp[1 % self.exp.len()],
        }
    }

    pub fn from_digits(&'static self, digits: &[u32]) -> Result<Fe, AlgError> {
        if digits.len() > self.m as usize || digits.iter().any(|&d| d >= self.p) {
            return Err(AlgError::Parse(format!("digits {digits:?} out of range")));
        }
        Ok(Fe {
            f: self,
            v: pack(digits),
        })
    }

    /// All `q` elements, zero first, then in increasing packed order.
    pub fn elements(&'static self) -> Vec<Fe> {
        let mut v: Vec<Fe> = self.exp.iter().map(|&c| Fe { f: self, v: c }).collect();
        v.push(self.zero());
        v.sort();
        v
    }

    /// Elements of the prime field `0..p`.
    pub fn prime_elements(&'static self) -> Vec<Fe> {
        (0..self.p as i64).map(|i| self.int(i)).collect()
    }

    /// Parses `"c0+c1*x+c2*x^2"`; single coefficients and bare `x` terms are
    /// accepted, as are negative integers for prime field values.
    pub fn parse(&'static self, s: &str) -> Result<Fe, AlgError> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(AlgError::Parse("empty field element".into()));
        }
        if let Ok(n) = s.parse::<i64>() {
            return Ok(self.int(n));
        }
        let mut acc = self.zero();
        for term in s.split('+') {
            let (coef, power) = match term.split_once('x') {
                None => (term, 0u32),
                Some((c, rest)) => {
                    let c = c.strip_suffix('*').unwrap_or(c);
                    let c = if c.is_empty() { "1" } else { c };
                    let pw = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^')
                            .and_then(|r| r.parse().ok())
                            .ok_or_else(|| AlgError::Parse(format!("bad term {term:?}")))?
                    };
                    (c, pw)
                }
            };
            let c: i64 = coef
                .parse()
                .map_err(|_| AlgError::Parse(format!("bad coefficient in {term:?}")))?;
            acc += self.int(c) * self.gen_x().pow(power as i64);
        }
        Ok(acc)
    }

    /// The polynomial variable `x` of the extension as an element.
    fn gen_x(&'static self) -> Fe {
        if self.m == 1 {
            // `x` stands for the root of the modulus x - g.
            Fe {
                f: self,
                v: self.exp[1 % self.exp.len()],
            }
        } else {
            Fe {
                f: self,
                v: 1 << NIBBLE,
            }
        }
    }
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{} mod {:?}", self.p, self.m, self.modulus)
    }
}

/// An element of `F_{p^m}` carrying its field.
#[derive(Clone, Copy)]
pub struct Fe {
    f: Field,
    v: u32,
}

impl Fe {
    pub fn field(&self) -> Field {
        self.f
    }

    pub fn code(&self) -> u32 {
        self.v
    }

    pub fn is_zero(&self) -> bool {
        self.v == 0
    }

    pub fn is_one(&self) -> bool {
        self.v == 1
    }

    /// Coordinates over `F_p` in the power basis `1, x, .., x^{m-1}`.
    pub fn digits(&self) -> Vec<u32> {
        (0..self.f.m).map(|i| digit(self.v, i)).collect()
    }

    /// Whether the element lies in the prime field.
    pub fn in_prime_field(&self) -> bool {
        self.v < 16
    }

    /// Value in `0..p` for prime field elements.
    pub fn prime_value(&self) -> Option<u32> {
        self.in_prime_field().then_some(self.v)
    }

    pub fn inv(&self) -> Option<Fe> {
        if self.v == 0 {
            return None;
        }
        let n = self.f.q - 1;
        let l = self.f.log[self.v as usize];
        Some(Fe {
            f: self.f,
            v: self.f.exp[((n - l) % n) as usize],
        })
    }

    pub fn pow(&self, e: i64) -> Fe {
        if self.v == 0 {
            return if e == 0 { self.f.one() } else { *self };
        }
        let n = (self.f.q - 1) as i64;
        let l = self.f.log[self.v as usize] as i64;
        let k = (l * e.rem_euclid(n)).rem_euclid(n);
        Fe {
            f: self.f,
            v: self.f.exp[k as usize],
        }
    }

    /// `sigma^e(self)` where `sigma` is the absolute Frobenius `x -> x^p`.
    pub fn frob(&self, e: u32) -> Fe {
        let mut out = *self;
        for _ in 0..e % self.f.m {
            out = out.pow(self.f.p as i64);
        }
        out
    }

    /// Inverse Frobenius `x -> x^{1/p}`.
    pub fn frob_inv(&self) -> Fe {
        self.frob(self.f.m - 1)
    }

    fn same_field(&self, o: &Fe) {
        debug_assert!(std::ptr::eq(self.f, o.f), "mixed fields");
    }
}

impl PartialEq for Fe {
    fn eq(&self, o: &Fe) -> bool {
        self.v == o.v && std::ptr::eq(self.f, o.f)
    }
}

impl Eq for Fe {}

impl Hash for Fe {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.v.hash(h);
    }
}

impl PartialOrd for Fe {
    fn partial_cmp(&self, o: &Fe) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Fe {
    fn cmp(&self, o: &Fe) -> Ordering {
        self.v.cmp(&o.v)
    }
}

impl Add for Fe {
    type Output = Fe;
    fn add(self, o: Fe) -> Fe {
        self.same_field(&o);
        let p = self.f.p;
        let mut v = 0;
        for i in 0..self.f.m {
            v |= ((digit(self.v, i) + digit(o.v, i)) % p) << (NIBBLE * i);
        }
        Fe { f: self.f, v }
    }
}

impl Neg for Fe {
    type Output = Fe;
    fn neg(self) -> Fe {
        let p = self.f.p;
        let mut v = 0;
        for i in 0..self.f.m {
            v |= ((p - digit(self.v, i)) % p) << (NIBBLE * i);
        }
        Fe { f: self.f, v }
    }
}

impl Sub for Fe {
    type Output = Fe;
    fn sub(self, o: Fe) -> Fe {
        self + (-o)
    }
}

impl Mul for Fe {
    type Output = Fe;
    fn mul(self, o: Fe) -> Fe {
        self.same_field(&o);
        if self.v == 0 || o.v == 0 {
            return self.f.zero();
        }
        let n = self.f.q - 1;
        let k = (self.f.log[self.v as usize] + self.f.log[o.v as usize]) % n;
        Fe {
            f: self.f,
            v: self.f.exp[k as usize],
        }
    }
}

impl Div for Fe {
    type Output = Fe;
    /// Panics on division by zero.
    fn div(self, o: Fe) -> Fe {
        self * o.inv().expect("division by zero in finite field")
    }
}

impl AddAssign for Fe {
    fn add_assign(&mut self, o: Fe) {
        *self = *self + o;
    }
}

impl SubAssign for Fe {
    fn sub_assign(&mut self, o: Fe) {
        *self = *self - o;
    }
}

impl MulAssign for Fe {
    fn mul_assign(&mut self, o: Fe) {
        *self = *self * o;
    }
}

impl fmt::Display for Fe {
    /// Coefficient string `c0+c1*x+c2*x^2`, zero terms omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.f.m == 1 {
            return write!(f, "{}", self.v);
        }
        let mut parts = Vec::new();
        for (i, d) in self.digits().into_iter().enumerate() {
            if d == 0 {
                continue;
            }
            parts.push(match i {
                0 => d.to_string(),
                1 => format!("{d}*x"),
                _ => format!("{d}*x^{i}"),
            });
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join("+"))
        }
    }
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_small_fields() -> Vec<Field> {
        let mut out = Vec::new();
        for p in [3u32, 5, 7] {
            for m in 1..=4 {
                if p.pow(m) <= 343 {
                    out.push(field(p, m).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(field(2, 1).is_err());
        assert!(field(9, 1).is_err());
        assert!(field(5, 5).is_err());
        assert!(field(17, 1).is_err());
    }

    #[test]
    fn field_axioms_exhaustive() {
        for f in all_small_fields() {
            let els = f.elements();
            assert_eq!(els.len() as u32, f.q());
            for &a in &els {
                assert_eq!(a + f.zero(), a);
                assert_eq!(a * f.one(), a);
                assert_eq!(a + (-a), f.zero());
                if !a.is_zero() {
                    assert_eq!(a * a.inv().unwrap(), f.one());
                }
                for &b in &els {
                    assert_eq!(a + b, b + a);
                    assert_eq!(a * b, b * a);
                }
            }
            // distributivity and associativity on a stride to keep it quick
            for &a in els.iter().step_by(3) {
                for &b in els.iter().step_by(5) {
                    for &c in els.iter().step_by(7) {
                        assert_eq!(a * (b + c), a * b + a * c);
                        assert_eq!((a * b) * c, a * (b * c));
                        assert_eq!((a + b) + c, a + (b + c));
                    }
                }
            }
        }
    }

    #[test]
    fn frobenius_is_automorphism_of_order_m() {
        for f in all_small_fields() {
            let els = f.elements();
            let mut images: Vec<Fe> = els.iter().map(|a| a.frob(1)).collect();
            images.sort();
            assert_eq!(images, els, "sigma must be a bijection");
            for &a in &els {
                assert_eq!(a.frob(f.m()), a);
                assert_eq!(a.frob(1).frob_inv(), a);
                for &b in els.iter().step_by(4) {
                    assert_eq!((a + b).frob(1), a.frob(1) + b.frob(1));
                    assert_eq!((a * b).frob(1), a.frob(1) * b.frob(1));
                }
            }
            let fixed: Vec<Fe> = els.iter().copied().filter(|a| a.frob(1) == *a).collect();
            assert_eq!(fixed.len() as u32, f.p());
            assert!(fixed.iter().all(|a| a.in_prime_field()));
        }
    }

    #[test]
    fn modulus_is_deterministic() {
        assert_eq!(field(3, 2).unwrap().modulus(), &[2, 1, 1]);
        assert_eq!(field(5, 1).unwrap().gen().code(), 2);
    }

    #[test]
    fn string_round_trip() {
        for f in all_small_fields() {
            for a in f.elements() {
                assert_eq!(f.parse(&a.to_string()).unwrap(), a);
            }
        }
        let f = field(5, 2).unwrap();
        assert_eq!(f.parse("-1").unwrap(), f.int(4));
        assert!(f.parse("1+y").is_err());
    }
}
