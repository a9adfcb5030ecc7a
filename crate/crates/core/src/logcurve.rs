//! The marked projective line `(P^1, D)` as a log curve.
//!
//! Everything is written in the global coordinate `t`. A section of `O(d)` is
//! a function in the `t`-frame `e` on finite charts; near infinity the frame
//! is `e_inf = t^d e`, so global sections are polynomials of degree `<= d`.
//! The log cotangent sheaf is trivialized by `Omega = dt / prod(t - b)` over
//! the finite marked points, which identifies it with `O(r-2)`.
//!
//! Cech cochains on the log atlas are stored as one function `c_a` per finite
//! chart, meaning the transition `c_{a,inf}`; the other pairs follow from
//! `c_{ab} = c_{a,inf} - c_{b,inf}`, which makes the cocycle condition
//! automatic.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exactalg::{Fe, Field, Mat, Poly, RatFn, SemilinearMap};

/// A point of `P^1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Point {
    Fin(Fe),
    Inf,
}

impl Point {
    pub fn parse(f: Field, s: &str) -> Result<Point> {
        let s = s.trim();
        if s == "inf" || s == "\u{221e}" {
            return Ok(Point::Inf);
        }
        Ok(Point::Fin(f.parse(s)?))
    }

    pub fn finite(&self) -> Option<Fe> {
        match self {
            Point::Fin(a) => Some(*a),
            Point::Inf => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Fin(a) => write!(f, "{a}"),
            Point::Inf => write!(f, "inf"),
        }
    }
}

/// `P^1` with `r >= 3` distinct marked points in `F_p` or at infinity,
/// normalized so that `0, 1, inf` come first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedProjLine {
    f: Field,
    marked: Vec<Point>,
}

fn proj(pt: Point, f: Field) -> (Fe, Fe) {
    match pt {
        Point::Fin(a) => (a, f.one()),
        Point::Inf => (f.one(), f.zero()),
    }
}

fn det2(u: (Fe, Fe), v: (Fe, Fe)) -> Fe {
    u.0 * v.1 - u.1 * v.0
}

impl MarkedProjLine {
    /// Builds the curve. If `0, 1, inf` are not all marked, the Mobius map
    /// sending the first three points to `0, 1, inf` is applied first.
    pub fn new(f: Field, points: &[Point]) -> Result<MarkedProjLine> {
        if points.len() < 3 {
            return Err(Error::TooFewPoints(points.len()));
        }
        for (i, pt) in points.iter().enumerate() {
            if let Point::Fin(a) = pt {
                if !a.in_prime_field() {
                    return Err(Error::NotPrimeRational(a.to_string()));
                }
            }
            if points[..i].contains(pt) {
                return Err(Error::DuplicatePoint(pt.to_string()));
            }
        }
        let (zero, one) = (Point::Fin(f.zero()), Point::Fin(f.one()));
        let have_base = [zero, one, Point::Inf].iter().all(|q| points.contains(q));
        let mapped: Vec<Point> = if have_base {
            points.to_vec()
        } else {
            let (a, b, c) = (proj(points[0], f), proj(points[1], f), proj(points[2], f));
            let (ka, kc) = (det2(b, c), det2(b, a));
            points
                .iter()
                .map(|&z| {
                    let z = proj(z, f);
                    let x = ka * det2(z, a);
                    let y = kc * det2(z, c);
                    if y.is_zero() {
                        Point::Inf
                    } else {
                        Point::Fin(x / y)
                    }
                })
                .collect()
        };
        let base = [zero, one, Point::Inf];
        let mut marked = base.to_vec();
        marked.extend(mapped.into_iter().filter(|q| !base.contains(q)));
        Ok(MarkedProjLine { f, marked })
    }

    /// `(P^1; 0, 1, inf, extra..)` over `F_{p^m}`.
    pub fn with_points(f: Field, extra: &[u32]) -> Result<MarkedProjLine> {
        let mut pts = vec![Point::Fin(f.zero()), Point::Fin(f.one()), Point::Inf];
        pts.extend(extra.iter().map(|&a| Point::Fin(f.int(a as i64))));
        if pts.len() > 3 && pts[3..].iter().any(|q| pts[..3].contains(q)) {
            return Err(Error::DuplicatePoint(format!("{extra:?}")));
        }
        MarkedProjLine::new(f, &pts)
    }

    /// The same marked points over another field of the same characteristic.
    pub fn over(&self, f: Field) -> MarkedProjLine {
        assert_eq!(f.p(), self.f.p(), "characteristic must agree");
        let marked = self
            .marked
            .iter()
            .map(|pt| match pt {
                Point::Fin(a) => Point::Fin(f.int(a.prime_value().expect("prime rational") as i64)),
                Point::Inf => Point::Inf,
            })
            .collect();
        MarkedProjLine { f, marked }
    }

    pub fn field(&self) -> Field {
        self.f
    }

    pub fn p(&self) -> u32 {
        self.f.p()
    }

    pub fn r(&self) -> usize {
        self.marked.len()
    }

    pub fn marked(&self) -> &[Point] {
        &self.marked
    }

    pub fn finite_points(&self) -> Vec<Fe> {
        self.marked.iter().filter_map(|q| q.finite()).collect()
    }

    /// Marked points beyond `0, 1, inf`; these carry the lifting choices.
    pub fn extra_points(&self) -> Vec<Fe> {
        self.marked[3..].iter().filter_map(|q| q.finite()).collect()
    }

    pub fn is_marked(&self, pt: Point) -> bool {
        self.marked.contains(&pt)
    }

    /// `prod_{b finite marked} (t - b)`.
    pub fn prod(&self) -> Poly {
        self.finite_points()
            .into_iter()
            .fold(Poly::one(self.f), |acc, b| acc.mul(&Poly::linear(b)))
    }

    /// Degree of the log cotangent sheaf.
    pub fn omega_degree(&self) -> i64 {
        self.r() as i64 - 2
    }

    pub fn log_cover(&self) -> Cover {
        Cover::Log(self.finite_points())
    }

    /// Coefficient of the local log vector field at `c` in `d/dt`:
    /// `(t - c)` for finite `c` and `-t` at infinity (`s d/ds` with `s = 1/t`).
    pub fn log_field(&self, c: Point) -> Poly {
        match c {
            Point::Fin(a) => Poly::linear(a),
            Point::Inf => Poly::monomial(-self.f.one(), 1),
        }
    }

    /// `<Omega, D_c>`: the pairing of the global frame with the local log
    /// vector field at `c`.
    pub fn u(&self, c: Point) -> RatFn {
        RatFn::from_poly(self.log_field(c)).mul(
            &RatFn::from_poly(self.prod())
                .inv(&self.finite_points())
                .expect("unit on U"),
        )
    }

    /// `1/u_c`: the natural log frame `dlog` at `c` is `natural_factor(c) * Omega`.
    pub fn natural_factor(&self, c: Point) -> RatFn {
        self.u(c)
            .inv(&self.finite_points_and_zero())
            .expect("u_c is a unit away from D")
    }

    fn finite_points_and_zero(&self) -> Vec<Fe> {
        let mut v = self.finite_points();
        if !v.contains(&self.f.zero()) {
            v.push(self.f.zero());
        }
        v
    }

    /// Residue at `c` of the log form `g * Omega`, or `None` if the form is
    /// not log-regular there.
    pub fn log_residue(&self, g: &RatFn, c: Point) -> Option<Fe> {
        let w = g.mul(&self.u(c));
        match c {
            Point::Fin(a) => w.eval(a),
            Point::Inf => w.eval_inf(),
        }
    }
}

impl fmt::Display for MarkedProjLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pts: Vec<String> = self.marked.iter().map(|q| q.to_string()).collect();
        write!(
            f,
            "(P^1; {}) over F_{}^{}",
            pts.join(", "),
            self.f.p(),
            self.f.m()
        )
    }
}

/// The line bundle `O(d)` on `P^1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineBundle {
    pub degree: i64,
}

impl LineBundle {
    pub fn new(degree: i64) -> LineBundle {
        LineBundle { degree }
    }

    pub fn h0_dim(&self) -> usize {
        (self.degree + 1).max(0) as usize
    }

    pub fn h1_dim(&self) -> usize {
        (-self.degree - 1).max(0) as usize
    }

    pub fn h0_basis(&self, f: Field) -> Vec<Poly> {
        h0_basis(f, self.degree)
    }

    pub fn h1_basis(&self, f: Field) -> Vec<CechClass> {
        h1_basis(f, self.degree)
    }

    /// The section `g` read in the frame at infinity, `s^d g(1/s)`, when that
    /// is regular.
    pub fn at_infinity(&self, g: &Poly) -> Option<Poly> {
        if g.deg() > self.degree {
            return None;
        }
        let f = g.field();
        let d = self.degree.max(0) as usize;
        Some(Poly::new(f, (0..=d).map(|i| g.coeff(d - i)).collect()))
    }
}

/// Monomial basis `1, t, .., t^d` of `H^0(O(d))`.
pub fn h0_basis(f: Field, d: i64) -> Vec<Poly> {
    (0..=d.max(-1))
        .filter(|&k| k >= 0)
        .map(|k| Poly::monomial(f.one(), k as usize))
        .collect()
}

/// Canonical basis of `H^1(O(d))`: the classes of `t^j`, `j = -1, .., d+1`,
/// on the two-chart cover.
pub fn h1_basis(f: Field, d: i64) -> Vec<CechClass> {
    let n = (-d - 1).max(0) as usize;
    (0..n)
        .map(|k| {
            let mut coords = vec![f.zero(); n];
            coords[k] = f.one();
            CechClass::canonical(f, d, &coords, Cover::Standard)
        })
        .collect()
}

/// An open cover of `P^1` by one chart at infinity and finite charts.
///
/// `Log(D_fin)` is the log atlas: `V_a = P^1 - (D - a)` for each finite
/// marked `a` and `V_inf = P^1 - D_fin`; all overlaps equal `P^1 - D`.
/// `Standard` is `{P^1 - inf, P^1 - 0}`, its finite chart keyed by `0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cover {
    Log(Vec<Fe>),
    Standard,
}

impl Cover {
    fn charts(&self, f: Field) -> Vec<Fe> {
        match self {
            Cover::Log(pts) => pts.clone(),
            Cover::Standard => vec![f.zero()],
        }
    }

    /// Points where transition functions may have poles.
    fn poles(&self, f: Field) -> Vec<Fe> {
        self.charts(f)
    }
}

/// A Cech 1-cocycle of `O(d)` on a cover, in `t`-frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CechClass {
    f: Field,
    degree: i64,
    cover: Cover,
    cochain: BTreeMap<Fe, RatFn>,
}

impl CechClass {
    /// Validates that each `c_{a,inf}` is regular on the overlap.
    pub fn new(
        f: Field,
        degree: i64,
        cover: Cover,
        cochain: BTreeMap<Fe, RatFn>,
    ) -> Result<CechClass> {
        let charts = cover.charts(f);
        let poles = cover.poles(f);
        for (a, c) in &cochain {
            if !charts.contains(a) {
                return Err(Error::InvalidCochain(format!(
                    "{a} is not a chart of the cover"
                )));
            }
            if let Some(b) = c.denominator().keys().find(|b| !poles.contains(b)) {
                return Err(Error::InvalidCochain(format!(
                    "pole at {b} inside an overlap"
                )));
            }
        }
        let cochain = cochain.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Ok(CechClass {
            f,
            degree,
            cover,
            cochain,
        })
    }

    pub fn zero(f: Field, degree: i64, cover: Cover) -> CechClass {
        CechClass {
            f,
            degree,
            cover,
            cochain: BTreeMap::new(),
        }
    }

    /// Builds a class from a full table of pair transitions. The table must be
    /// alternating and satisfy `c_bc - c_ac + c_ab = 0` on every triple.
    pub fn from_pairs(
        f: Field,
        degree: i64,
        cover: Cover,
        pairs: &BTreeMap<(Point, Point), RatFn>,
    ) -> Result<CechClass> {
        let mut ids: Vec<Point> = cover.charts(f).into_iter().map(Point::Fin).collect();
        ids.push(Point::Inf);
        let get = |a: Point, b: Point| -> Result<RatFn> {
            if a == b {
                return Ok(RatFn::zero(f));
            }
            if let Some(c) = pairs.get(&(a, b)) {
                if let Some(d) = pairs.get(&(b, a)) {
                    if !c.add(d).is_zero() {
                        return Err(Error::InvalidCochain(format!(
                            "c_({a},{b}) + c_({b},{a}) != 0"
                        )));
                    }
                }
                return Ok(c.clone());
            }
            if let Some(d) = pairs.get(&(b, a)) {
                return Ok(d.neg());
            }
            Err(Error::InvalidCochain(format!(
                "missing transition ({a},{b})"
            )))
        };
        for (i, &a) in ids.iter().enumerate() {
            for (j, &b) in ids.iter().enumerate().skip(i + 1) {
                for &c in ids.iter().skip(j + 1) {
                    let delta = get(b, c)?.sub(&get(a, c)?).add(&get(a, b)?);
                    if !delta.is_zero() {
                        return Err(Error::InvalidCochain(format!(
                            "cocycle fails on ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        let mut cochain = BTreeMap::new();
        for a in cover.charts(f) {
            cochain.insert(a, get(Point::Fin(a), Point::Inf)?);
        }
        CechClass::new(f, degree, cover, cochain)
    }

    /// The class with the given canonical coordinates, supported on the
    /// chart keyed by `0`.
    pub fn canonical(f: Field, degree: i64, coords: &[Fe], cover: Cover) -> CechClass {
        let c = coords
            .iter()
            .enumerate()
            .fold(RatFn::zero(f), |acc, (k, &x)| {
                acc.add(&RatFn::t_pow(f, -1 - k as i64).scale(x))
            });
        let mut cochain = BTreeMap::new();
        cochain.insert(f.zero(), c);
        CechClass::new(f, degree, cover, cochain).expect("canonical cochain is regular")
    }

    pub fn field(&self) -> Field {
        self.f
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn cochain(&self) -> &BTreeMap<Fe, RatFn> {
        &self.cochain
    }

    /// `c_{a,inf}`.
    pub fn get(&self, a: Fe) -> RatFn {
        self.cochain
            .get(&a)
            .cloned()
            .unwrap_or_else(|| RatFn::zero(self.f))
    }

    /// `c_{ab}` for any two charts.
    pub fn pair(&self, a: Point, b: Point) -> RatFn {
        let to_inf = |x: Point| match x {
            Point::Fin(a) => self.get(a),
            Point::Inf => RatFn::zero(self.f),
        };
        to_inf(a).sub(&to_inf(b))
    }

    pub fn h1_dim(&self) -> usize {
        LineBundle::new(self.degree).h1_dim()
    }

    /// Coordinates against the canonical basis `t^{-1}, .., t^{d+1}`, by the
    /// residue pairing with `t^k dt`, `0 <= k <= -d-2`.
    pub fn coords(&self) -> Vec<Fe> {
        let n = self.h1_dim();
        (0..n)
            .map(|k| {
                let tk = RatFn::t_pow(self.f, k as i64);
                self.cochain
                    .iter()
                    .fold(self.f.zero(), |acc, (&a, c)| acc + c.mul(&tk).residue_at(a))
            })
            .collect()
    }

    pub fn is_zero_class(&self) -> bool {
        self.coords().iter().all(|x| x.is_zero())
    }

    /// The same class on another cover of the line.
    pub fn refine(&self, target: &Cover) -> Result<CechClass> {
        if let Cover::Log(pts) = target {
            if !pts.contains(&self.f.zero()) || pts.iter().any(|a| a.field() != self.f) {
                return Err(Error::UnrelatedCovers);
            }
        }
        Ok(CechClass::canonical(
            self.f,
            self.degree,
            &self.coords(),
            target.clone(),
        ))
    }

    /// Absolute Frobenius pullback `O(d) -> O(pd)`, `c -> c^p` on cochains.
    pub fn frobenius_pullback(&self) -> CechClass {
        let p = self.f.p();
        let cochain = self.cochain.iter().map(|(&a, c)| (a, c.pow(p))).collect();
        CechClass {
            f: self.f,
            degree: self.degree * p as i64,
            cover: self.cover.clone(),
            cochain,
        }
    }

    /// Product with a global section `s` of `O(e)`, landing in `O(d + e)`.
    pub fn mul_section(&self, s: &Poly, e: i64) -> CechClass {
        assert!(s.deg() <= e, "section exceeds its degree");
        let sr = RatFn::from_poly(s.clone());
        let cochain = self.cochain.iter().map(|(&a, c)| (a, c.mul(&sr))).collect();
        CechClass::new(self.f, self.degree + e, self.cover.clone(), cochain).expect("still regular")
    }

    /// Applies `op` chartwise, declaring the result a cochain of `O(degree)`.
    pub fn map_cochain(&self, degree: i64, op: impl Fn(&RatFn) -> RatFn) -> Result<CechClass> {
        let cochain = self.cochain.iter().map(|(&a, c)| (a, op(c))).collect();
        CechClass::new(self.f, degree, self.cover.clone(), cochain)
    }

    pub fn add(&self, o: &CechClass) -> Result<CechClass> {
        if self.degree != o.degree || self.cover != o.cover {
            return Err(Error::InvalidCochain(
                "adding cochains of different bundles or covers".into(),
            ));
        }
        let mut cochain = self.cochain.clone();
        for (&a, c) in &o.cochain {
            let cur = cochain.remove(&a).unwrap_or_else(|| RatFn::zero(self.f));
            cochain.insert(a, cur.add(c));
        }
        CechClass::new(self.f, self.degree, self.cover.clone(), cochain)
    }

    pub fn scale(&self, s: Fe) -> CechClass {
        let cochain = self.cochain.iter().map(|(&a, c)| (a, c.scale(s))).collect();
        CechClass::new(self.f, self.degree, self.cover.clone(), cochain)
            .expect("scaling keeps regularity")
    }
}

/// Canonical coordinates of `Frobenius^*` as a `sigma`-linear map
/// `H^1(O(d)) -> H^1(O(pd))`, computed by pulling back basis cochains.
pub fn frobenius_pullback_map(f: Field, d: i64) -> SemilinearMap {
    let target = LineBundle::new(d * f.p() as i64).h1_dim();
    let cols: Vec<Vec<Fe>> = h1_basis(f, d)
        .iter()
        .map(|c| c.frobenius_pullback().coords())
        .collect();
    SemilinearMap::new(Mat::from_cols(f, &cols, target), 1)
}

/// The linear map `H^1(O(d)) -> H^1(O(e))` induced by multiplying cochains
/// with a global section `s` of `O(e - d)`, in canonical coordinates.
pub fn multiplication_map(f: Field, s: &Poly, d: i64, e: i64) -> Mat {
    let target = LineBundle::new(e).h1_dim();
    let cols: Vec<Vec<Fe>> = h1_basis(f, d)
        .iter()
        .map(|c| c.mul_section(s, e - d).coords())
        .collect();
    Mat::from_cols(f, &cols, target)
}

/// A class of the de Rham complex `O(pd) -> O(pd) (x) omega_log` of the
/// Frobenius pullback connection: its image in `H^1(O(pd))` and its
/// component in `H^0(omega part) / d H^0(O(pd))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeRhamClass {
    pub alpha: Vec<Fe>,
    pub coker: Vec<Fe>,
}

/// First hypercohomology of `(F^* O(d), nabla_can)` on the log atlas.
///
/// A hypercocycle is `(c, w_inf)` with `c` a cochain of `O(pd)` and `w_inf`
/// the log form on `V_inf` (as an `Omega`-coefficient); the form on `V_a` is
/// `w_inf - nabla c_{a,inf}` and must be regular at `a`. Here `nabla g` is
/// `prod * g'` in the `Omega`-frame, since the pullback frame is flat.
#[derive(Clone, Debug)]
pub struct DeRhamH1 {
    curve: MarkedProjLine,
    base_degree: i64,
    degree: i64,
    omega_deg: i64,
    nabla_h1: Mat,
    b_basis: Vec<Vec<Fe>>,
    image_rows: Vec<Vec<Fe>>,
    pivots: Vec<usize>,
}

fn poly_vec(q: &Poly, len: usize) -> Vec<Fe> {
    (0..len).map(|i| q.coeff(i)).collect()
}

impl DeRhamH1 {
    pub fn dim(&self) -> usize {
        self.b_basis.len() + self.coker_dim()
    }

    /// `dim H^0(O(pd) (x) omega_log) - rank(nabla on H^0)`.
    pub fn coker_dim(&self) -> usize {
        (self.omega_deg + 1).max(0) as usize - self.image_rows.len()
    }

    /// Basis of `B`, the image of `alpha` in `H^1(O(pd))`.
    pub fn b_basis(&self) -> &[Vec<Fe>] {
        &self.b_basis
    }

    /// Matrix of `c -> nabla c` from `H^1(O(pd))` to `H^1(O(pd + r - 2))`.
    pub fn nabla_on_h1(&self) -> &Mat {
        &self.nabla_h1
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    fn nabla(&self, g: &RatFn) -> RatFn {
        g.derivative().mul_poly(&self.curve.prod())
    }

    /// Coordinates of the hypercocycle `(c, w_inf)`; the cochain must live on
    /// the log atlas.
    pub fn class_of(&self, c: &CechClass, w_inf: &RatFn) -> Result<DeRhamClass> {
        let f = self.curve.field();
        let pts = self.curve.finite_points();
        if c.cover() != &self.curve.log_cover() || c.degree() != self.degree {
            return Err(Error::InvalidCochain(
                "hypercocycle must be a log-atlas cochain of O(pd)".into(),
            ));
        }
        if w_inf.denominator().keys().any(|b| !pts.contains(b))
            || (!w_inf.is_zero() && w_inf.degree_at_inf() > self.omega_deg)
        {
            return Err(Error::InvalidCochain(
                "form on the chart at infinity is not regular".into(),
            ));
        }
        for &a in &pts {
            if w_inf.sub(&self.nabla(&c.get(a))).pole_order(a) > 0 {
                return Err(Error::InvalidCochain(format!(
                    "form on the chart at {a} has a pole"
                )));
            }
        }
        let alpha = c.coords();
        let canon = CechClass::canonical(f, self.degree, &alpha, c.cover().clone());
        // c - canon is a coboundary f_inf - f_a with f_inf the sum of its
        // principal parts
        let s = pts.iter().fold(RatFn::zero(f), |acc, &a| {
            acc.add(&c.get(a).sub(&canon.get(a)).principal_part(a))
        });
        if !s.is_zero() && s.degree_at_inf() > self.degree {
            return Err(Error::Internal(
                "coboundary primitive not regular at infinity".into(),
            ));
        }
        let q = w_inf
            .sub(&self.nabla(&s))
            .sub(&self.nabla(&canon.get(f.zero())).principal_part(f.zero()));
        let q = q
            .as_poly()
            .cloned()
            .ok_or_else(|| Error::Internal("reduced de Rham form is not polynomial".into()))?;
        let len = (self.omega_deg + 1).max(0) as usize;
        if q.deg() >= len as i64 {
            return Err(Error::Internal(
                "reduced de Rham form exceeds its degree".into(),
            ));
        }
        let mut v = poly_vec(&q, len);
        for (row, &pc) in self.image_rows.iter().zip(&self.pivots) {
            let x = v[pc];
            if !x.is_zero() {
                for (vi, &ri) in v.iter_mut().zip(row) {
                    *vi -= x * ri;
                }
            }
        }
        let coker = (0..len)
            .filter(|i| !self.pivots.contains(i))
            .map(|i| v[i])
            .collect();
        Ok(DeRhamClass { alpha, coker })
    }

    /// `beta`: the hypercocycle `(F^* x, 0)` of a class of `O(d)`.
    pub fn beta(&self, x: &CechClass) -> Result<DeRhamClass> {
        if x.degree() != self.base_degree {
            return Err(Error::InvalidCochain("beta expects a class of O(d)".into()));
        }
        let on_log = x.refine(&self.curve.log_cover())?;
        self.class_of(
            &on_log.frobenius_pullback(),
            &RatFn::zero(self.curve.field()),
        )
    }

    /// `alpha`: forget the form part.
    pub fn alpha(&self, z: &DeRhamClass) -> Vec<Fe> {
        z.alpha.clone()
    }

    /// A hypercocycle with the given `alpha` part, when it lies in `B`.
    pub fn lift(&self, b: &[Fe]) -> Result<(CechClass, RatFn)> {
        let f = self.curve.field();
        let c = CechClass::canonical(f, self.degree, b, self.curve.log_cover());
        let w = self.nabla(&c.get(f.zero())).principal_part(f.zero());
        if !w.is_zero() && w.degree_at_inf() > self.omega_deg {
            return Err(Error::InvalidCochain(
                "class is not in the image of alpha".into(),
            ));
        }
        Ok((c, w))
    }
}

/// Builds `H^1_dR(F^* O(d), nabla_can)` on the log atlas of `curve`.
pub fn hypercoh_h1_dr(curve: &MarkedProjLine, d: i64) -> DeRhamH1 {
    let f = curve.field();
    let p = f.p() as i64;
    let degree = p * d;
    let omega_deg = degree + curve.omega_degree();
    let prod = curve.prod();
    let nabla_h1 = {
        let target = LineBundle::new(omega_deg).h1_dim();
        let cols: Vec<Vec<Fe>> = h1_basis(f, degree)
            .iter()
            .map(|c| {
                c.map_cochain(omega_deg, |g| g.derivative().mul_poly(&prod))
                    .expect("derivative keeps poles")
                    .coords()
            })
            .collect();
        Mat::from_cols(f, &cols, target)
    };
    let b_basis = crate::exactalg::span_basis(f, &nabla_h1.nullspace(), nabla_h1.cols());
    let len = (omega_deg + 1).max(0) as usize;
    let images: Vec<Vec<Fe>> = h0_basis(f, degree)
        .iter()
        .map(|s| poly_vec(&s.derivative().mul(&prod), len))
        .collect();
    let mut image = if images.is_empty() || len == 0 {
        Mat::zeros(f, 0, len)
    } else {
        Mat::from_rows(f, &images, len)
    };
    let pivots = image.rref();
    let image_rows = (0..pivots.len()).map(|i| image.row(i)).collect();
    DeRhamH1 {
        curve: curve.clone(),
        base_degree: d,
        degree,
        omega_deg,
        nabla_h1,
        b_basis,
        image_rows,
        pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::field;
    use proptest::prelude::*;

    fn curve(p: u32, extra: &[u32]) -> MarkedProjLine {
        MarkedProjLine::with_points(field(p, 1).unwrap(), extra).unwrap()
    }

    #[test]
    fn normalization_and_validation() {
        let f = field(5, 1).unwrap();
        let pts = [
            Point::Fin(f.int(2)),
            Point::Fin(f.int(3)),
            Point::Fin(f.int(4)),
            Point::Inf,
        ];
        let c = MarkedProjLine::new(f, &pts).unwrap();
        assert_eq!(
            &c.marked()[..3],
            &[Point::Fin(f.zero()), Point::Fin(f.one()), Point::Inf]
        );
        assert_eq!(c.r(), 4);
        // the fourth point is the cross-ratio image of inf
        // g(z) = (z-2)(3-4)/((z-4)(3-2)) -> -1 at infinity
        assert_eq!(c.marked()[3], Point::Fin(f.int(4)));
        assert!(matches!(
            MarkedProjLine::new(f, &pts[..2]),
            Err(Error::TooFewPoints(2))
        ));
        assert!(MarkedProjLine::new(f, &[pts[0], pts[0], pts[1]]).is_err());
        let f25 = field(5, 2).unwrap();
        let bad = [Point::Fin(f25.gen()), Point::Fin(f25.zero()), Point::Inf];
        assert!(matches!(
            MarkedProjLine::new(f25, &bad),
            Err(Error::NotPrimeRational(_))
        ));
    }

    #[test]
    fn sections_of_line_bundles() {
        let f = field(5, 1).unwrap();
        assert_eq!(h0_basis(f, 0).len(), 1);
        assert!(h0_basis(f, -1).is_empty());
        let l = LineBundle::new(4);
        let basis = l.h0_basis(f);
        assert_eq!(basis.len(), 5);
        for s in &basis {
            // transition to the chart at infinity is a polynomial in s
            assert!(l.at_infinity(s).is_some());
        }
        assert!(l.at_infinity(&Poly::monomial(f.one(), 5)).is_none());
    }

    #[test]
    fn h1_examples() {
        let f = field(5, 1).unwrap();
        let b = h1_basis(f, -5);
        assert_eq!(b.len(), 4);
        for (k, c) in b.iter().enumerate() {
            assert_eq!(c.get(f.zero()), RatFn::t_pow(f, -1 - k as i64));
        }
        assert!(h1_basis(f, -1).is_empty());
        assert_eq!(h1_basis(f, -10).len(), 9);
    }

    #[test]
    fn riemann_roch_exhaustive() {
        for p in [3i64, 5, 7] {
            for d in -2 * p..=2 * p {
                let l = LineBundle::new(d);
                assert_eq!(l.h0_dim() as i64 - l.h1_dim() as i64, d + 1);
                assert_eq!(h1_basis(field(p as u32, 1).unwrap(), d).len(), l.h1_dim());
            }
        }
    }

    #[test]
    fn refinement_from_log_atlas_subtracts_a_coboundary() {
        let c = curve(5, &[]);
        let f = c.field();
        // a cochain on the three-chart atlas with poles at 0 and 1
        let mut cochain = BTreeMap::new();
        cochain.insert(f.zero(), RatFn::t_pow(f, -2).add(&RatFn::pole(f.one(), 1)));
        cochain.insert(f.one(), RatFn::pole(f.one(), 3).scale(f.int(2)));
        let cls = CechClass::new(f, -5, c.log_cover(), cochain).unwrap();
        let std = cls.refine(&Cover::Standard).unwrap();
        assert_eq!(std.coords(), cls.coords());
        // oracle: the difference is f_inf - f_a with f_inf the sum of
        // principal parts, regular at infinity in O(-5)
        let back = std.refine(&c.log_cover()).unwrap();
        let mut f_inf = RatFn::zero(f);
        for a in c.finite_points() {
            f_inf = f_inf.add(&cls.get(a).sub(&back.get(a)).principal_part(a));
        }
        assert!(f_inf.is_zero() || f_inf.degree_at_inf() <= -5);
        for a in c.finite_points() {
            let f_a = f_inf.sub(&cls.get(a).sub(&back.get(a)));
            assert_eq!(f_a.pole_order(a), 0);
        }
        let again = std
            .refine(&c.log_cover())
            .unwrap()
            .refine(&Cover::Standard)
            .unwrap();
        assert_eq!(again, std);
    }

    #[test]
    fn coboundaries_and_pair_tables() {
        let c = curve(5, &[3]);
        let f = c.field();
        // f_inf = t^{-1} + (t-1)^{-2} has degree -1 at infinity; in O(-1) it is
        // regular there, so f_inf - f_a with f_a its regular part is exact
        let f_inf = RatFn::t_pow(f, -1).add(&RatFn::pole(f.one(), 2));
        let cochain: BTreeMap<Fe, RatFn> = c
            .finite_points()
            .into_iter()
            .map(|a| (a, f_inf.principal_part(a)))
            .collect();
        let cls = CechClass::new(f, -1, c.log_cover(), cochain).unwrap();
        assert!(cls.is_zero_class());
        let mut pairs = BTreeMap::new();
        let ids: Vec<Point> = c
            .finite_points()
            .into_iter()
            .map(Point::Fin)
            .chain([Point::Inf])
            .collect();
        for &a in &ids {
            for &b in &ids {
                if a != b {
                    pairs.insert((a, b), cls.pair(a, b));
                }
            }
        }
        let rebuilt = CechClass::from_pairs(f, -1, c.log_cover(), &pairs).unwrap();
        assert_eq!(rebuilt, cls);
        pairs.insert((ids[0], ids[1]), RatFn::one(f));
        assert!(CechClass::from_pairs(f, -1, c.log_cover(), &pairs).is_err());
        assert!(matches!(
            CechClass::new(
                f,
                -3,
                Cover::Standard,
                BTreeMap::from([(f.zero(), RatFn::pole(f.one(), 1))])
            ),
            Err(Error::InvalidCochain(_))
        ));
    }

    #[test]
    fn frobenius_pullback_examples() {
        let f = field(5, 2).unwrap();
        let x = h1_basis(f, -2)[0].clone();
        let y = x.frobenius_pullback();
        assert_eq!(y.degree(), -10);
        let mut want = vec![f.zero(); 9];
        want[4] = f.one();
        assert_eq!(y.coords(), want);
        let g = f.gen();
        let z = x.scale(g).frobenius_pullback();
        want[4] = g.frob(1);
        assert_eq!(z.coords(), want);
        assert!(CechClass::zero(f, -2, Cover::Standard)
            .frobenius_pullback()
            .is_zero_class());
    }

    #[test]
    fn frobenius_pullback_is_injective() {
        for p in [3u32, 5] {
            let f = field(p, 2).unwrap();
            for d in -6..=-2 {
                let map = frobenius_pullback_map(f, d);
                let sum = map.rank_kernel_image();
                assert_eq!(sum.rank as i64, -d - 1);
                assert!(sum.kernel.is_empty());
            }
        }
    }

    #[test]
    fn log_residues_sum_to_zero() {
        let c = curve(7, &[3, 5]);
        let f = c.field();
        for k in 0..=c.omega_degree() as usize {
            let g = RatFn::from_poly(Poly::monomial(f.int(k as i64 + 2), k));
            let total = c
                .marked()
                .iter()
                .fold(f.zero(), |acc, &q| acc + c.log_residue(&g, q).unwrap());
            assert!(total.is_zero());
        }
        // the frame itself has nonzero residue at every finite point
        for a in c.finite_points() {
            assert!(!c
                .log_residue(&RatFn::one(f), Point::Fin(a))
                .unwrap()
                .is_zero());
        }
    }

    #[test]
    fn de_rham_dimensions() {
        // (0,4): F^* L^{-2} with L = O(1), dim 2 = dim A + 1
        let c4 = curve(5, &[3]);
        let h = hypercoh_h1_dr(&c4, -2);
        assert_eq!(h.dim(), 2);
        assert_eq!(h.b_basis().len(), 2);
        // (0,3): F^* O(-1), dim 1
        let c3 = curve(5, &[]);
        assert_eq!(hypercoh_h1_dr(&c3, -1).dim(), 1);
        // (O, d): no H^1, and H^0(omega_log) / d(constants)
        let h0 = hypercoh_h1_dr(&c4, 0);
        assert_eq!(h0.b_basis().len(), 0);
        assert_eq!(h0.dim(), 3);
    }

    #[test]
    fn de_rham_dimension_formula() {
        for (p, extra) in [
            (3u32, vec![2u32]),
            (5, vec![]),
            (5, vec![3]),
            (7, vec![2, 5]),
        ] {
            let c = curve(p, &extra);
            for d in -3..=2 {
                let h = hypercoh_h1_dr(&c, d);
                let want =
                    LineBundle::new(d).h1_dim() + LineBundle::new(d + c.omega_degree()).h0_dim();
                assert_eq!(h.dim(), want, "p={p} r={} d={d}", c.r());
            }
        }
    }

    #[test]
    fn alpha_beta_factor_frobenius() {
        let c = curve(5, &[2]);
        let f = c.field();
        let h = hypercoh_h1_dr(&c, -2);
        let fstar = frobenius_pullback_map(f, -2);
        let mut cols = Vec::new();
        for x in h1_basis(f, -2) {
            let z = h.beta(&x).unwrap();
            assert_eq!(h.alpha(&z), x.frobenius_pullback().coords());
            assert_eq!(h.alpha(&z), fstar.apply(&x.coords()).unwrap());
            cols.push([z.alpha, z.coker].concat());
        }
        // beta is injective
        let n = cols[0].len();
        assert_eq!(Mat::from_cols(f, &cols, n).rank(), 1);
        for b in h.b_basis() {
            let (cc, w) = h.lift(b).unwrap();
            assert_eq!(h.class_of(&cc, &w).unwrap().alpha, *b);
        }
    }

    proptest! {
        #[test]
        fn canonical_coordinates_are_stable(
            coeffs in proptest::collection::vec(0u32..5, 1..6),
            noise in proptest::collection::vec(0u32..5, 3),
        ) {
            let c = curve(5, &[3]);
            let f = c.field();
            let d = -(coeffs.len() as i64) - 1;
            let coords: Vec<Fe> = coeffs.iter().map(|&x| f.int(x as i64)).collect();
            let base = CechClass::canonical(f, d, &coords, c.log_cover());
            // add a random coboundary: g is regular at infinity in O(d)
            let k = (-d) as u32;
            let g = RatFn::pole(f.one(), k).scale(f.int(noise[0] as i64))
                .add(&RatFn::pole(f.int(3), k + noise[2]).scale(f.int(noise[1] as i64)));
            let mut cochain = base.cochain().clone();
            for a in c.finite_points() {
                let cur = cochain.remove(&a).unwrap_or_else(|| RatFn::zero(f));
                cochain.insert(a, cur.add(&g.principal_part(a)));
            }
            let noisy = CechClass::new(f, d, c.log_cover(), cochain).unwrap();
            prop_assert_eq!(noisy.coords(), coords.clone());
            let r1 = noisy.refine(&Cover::Standard).unwrap();
            prop_assert_eq!(r1.refine(&Cover::Standard).unwrap().coords(), coords);
        }
    }
}
