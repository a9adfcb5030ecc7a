//! Rank-two bundles on the marked line, their Higgs and flat structures.
//!
//! A bundle here is an extension `0 -> O(n1) -> H -> O(n2) -> 0` given by a
//! class `c` of `O(n1 - n2)` on the log atlas. In `t`-frames the coordinates
//! `(x, y)` of a section satisfy `v_inf = G_a v_a` with
//! `G_a = [[1, c_{a,inf}], [0, 1]]`. Connections are stored chart by chart
//! as matrices `M_c` with `nabla v = (prod * v' + M_c v) Omega`.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactalg::{poly_gcd, Fe, Field, Mat, Poly, RatFn};
use crate::logcurve::{CechClass, LineBundle, MarkedProjLine, Point};

pub type FMat2 = [[Fe; 2]; 2];

pub fn fmat_is_zero(m: &FMat2) -> bool {
    m.iter().flatten().all(|x| x.is_zero())
}

pub fn fmat_mul(a: &FMat2, b: &FMat2) -> FMat2 {
    let mut out = [[a[0][0].field().zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn fmat_strings(m: &FMat2) -> Vec<Vec<String>> {
    m.iter()
        .map(|r| r.iter().map(|x| x.to_string()).collect())
        .collect()
}

/// A 2x2 matrix of rational functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M2 {
    pub e: [[RatFn; 2]; 2],
}

impl M2 {
    pub fn new(a: RatFn, b: RatFn, c: RatFn, d: RatFn) -> M2 {
        M2 {
            e: [[a, b], [c, d]],
        }
    }

    pub fn zero(f: Field) -> M2 {
        let z = RatFn::zero(f);
        M2::new(z.clone(), z.clone(), z.clone(), z)
    }

    pub fn identity(f: Field) -> M2 {
        M2::new(RatFn::one(f), RatFn::zero(f), RatFn::zero(f), RatFn::one(f))
    }

    /// `[[1, x], [0, 1]]`.
    pub fn unipotent(x: RatFn) -> M2 {
        let f = x.field();
        M2::new(RatFn::one(f), x, RatFn::zero(f), RatFn::one(f))
    }

    /// `[[0, x], [0, 0]]`.
    pub fn upper(x: RatFn) -> M2 {
        let f = x.field();
        M2::new(RatFn::zero(f), x, RatFn::zero(f), RatFn::zero(f))
    }

    pub fn diag(a: RatFn, d: RatFn) -> M2 {
        let f = a.field();
        M2::new(a, RatFn::zero(f), RatFn::zero(f), d)
    }

    pub fn field(&self) -> Field {
        self.e[0][0].field()
    }

    fn zip(&self, o: &M2, op: impl Fn(&RatFn, &RatFn) -> RatFn) -> M2 {
        M2 {
            e: [
                [op(&self.e[0][0], &o.e[0][0]), op(&self.e[0][1], &o.e[0][1])],
                [op(&self.e[1][0], &o.e[1][0]), op(&self.e[1][1], &o.e[1][1])],
            ],
        }
    }

    fn map(&self, op: impl Fn(&RatFn) -> RatFn) -> M2 {
        M2 {
            e: [
                [op(&self.e[0][0]), op(&self.e[0][1])],
                [op(&self.e[1][0]), op(&self.e[1][1])],
            ],
        }
    }

    pub fn add(&self, o: &M2) -> M2 {
        self.zip(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &M2) -> M2 {
        self.zip(o, |a, b| a.sub(b))
    }

    pub fn neg(&self) -> M2 {
        self.map(|a| a.neg())
    }

    pub fn scale(&self, s: &RatFn) -> M2 {
        self.map(|a| a.mul(s))
    }

    pub fn derivative(&self) -> M2 {
        self.map(|a| a.derivative())
    }

    pub fn pow_entries(&self, k: u32) -> M2 {
        self.map(|a| a.pow(k))
    }

    pub fn mul(&self, o: &M2) -> M2 {
        let f = self.field();
        let mut e: [[RatFn; 2]; 2] = [
            [RatFn::zero(f), RatFn::zero(f)],
            [RatFn::zero(f), RatFn::zero(f)],
        ];
        for (i, row) in e.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.e[i][0]
                    .mul(&o.e[0][j])
                    .add(&self.e[i][1].mul(&o.e[1][j]));
            }
        }
        M2 { e }
    }

    pub fn apply(&self, v: &[RatFn; 2]) -> [RatFn; 2] {
        [
            self.e[0][0].mul(&v[0]).add(&self.e[0][1].mul(&v[1])),
            self.e[1][0].mul(&v[0]).add(&self.e[1][1].mul(&v[1])),
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().flatten().all(|x| x.is_zero())
    }

    pub fn trace(&self) -> RatFn {
        self.e[0][0].add(&self.e[1][1])
    }

    pub fn det(&self) -> RatFn {
        self.e[0][0]
            .mul(&self.e[1][1])
            .sub(&self.e[0][1].mul(&self.e[1][0]))
    }

    /// The adjugate; the inverse when the determinant is 1.
    pub fn adjugate(&self) -> M2 {
        M2::new(
            self.e[1][1].clone(),
            self.e[0][1].neg(),
            self.e[1][0].neg(),
            self.e[0][0].clone(),
        )
    }

    /// Values at a point, `None` at a pole.
    pub fn eval_at(&self, pt: Point) -> Option<FMat2> {
        let ev = |x: &RatFn| match pt {
            Point::Fin(a) => x.eval(a),
            Point::Inf => x.eval_inf(),
        };
        Some([
            [ev(&self.e[0][0])?, ev(&self.e[0][1])?],
            [ev(&self.e[1][0])?, ev(&self.e[1][1])?],
        ])
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.e
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect())
            .collect()
    }
}

/// Coefficient rows expressing that a family of rational functions, linear
/// in some unknowns, vanishes identically. `per_unknown[u][i]` is the value
/// of constraint `i` on the `u`-th basis vector.
pub fn vanishing_rows(f: Field, per_unknown: &[Vec<RatFn>]) -> Vec<Vec<Fe>> {
    let Some(first) = per_unknown.first() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for i in 0..first.len() {
        let mut den: BTreeMap<Fe, u32> = BTreeMap::new();
        for vals in per_unknown {
            for (&b, &e) in vals[i].denominator() {
                let cur = den.entry(b).or_insert(0);
                *cur = (*cur).max(e);
            }
        }
        let dp = den.iter().fold(Poly::one(f), |acc, (&b, &e)| {
            acc.mul(&Poly::linear(b).pow(e))
        });
        let nums: Vec<Poly> = per_unknown
            .iter()
            .map(|vals| {
                vals[i]
                    .mul_poly(&dp)
                    .as_poly()
                    .cloned()
                    .expect("common denominator clears poles")
            })
            .collect();
        let top = nums.iter().map(|q| q.deg()).max().unwrap_or(-1);
        for k in 0..=top.max(-1) {
            let row: Vec<Fe> = nums.iter().map(|q| q.coeff(k as usize)).collect();
            if row.iter().any(|x| !x.is_zero()) {
                rows.push(row);
            }
        }
    }
    rows
}

/// A global section of `H(-d)`: quotient coordinate `y` (a polynomial of
/// degree `<= n2 - d`) and sub coordinate `x_inf` on the chart at infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalSection {
    pub y: Poly,
    pub x_inf: RatFn,
}

impl GlobalSection {
    /// Coordinates in the `t`-frames of the chart at `c`.
    pub fn chart_vector(&self, h: &RankTwoBundle, c: Point) -> [RatFn; 2] {
        let y = RatFn::from_poly(self.y.clone());
        match c {
            Point::Inf => [self.x_inf.clone(), y],
            Point::Fin(a) => [self.x_inf.sub(&h.class.get(a).mul(&y)), y],
        }
    }
}

/// Extra linear conditions on a candidate section, given its chart-at-infinity
/// vector.
pub type SectionCondition<'a> = &'a dyn Fn(&[RatFn; 2]) -> Vec<RatFn>;

/// An extension `0 -> O(n1) -> H -> O(n2) -> 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankTwoBundle {
    curve: MarkedProjLine,
    sub_deg: i64,
    quot_deg: i64,
    class: CechClass,
}

/// The extension of `quot` by `sub` with class `xi` in `H^1(Hom(quot, sub))`.
pub fn extension_from_class(
    curve: &MarkedProjLine,
    xi: &CechClass,
    sub: LineBundle,
    quot: LineBundle,
) -> Result<RankTwoBundle> {
    if xi.degree() != sub.degree - quot.degree {
        return Err(Error::InvalidCochain(format!(
            "class of O({}) cannot glue O({}) to O({})",
            xi.degree(),
            sub.degree,
            quot.degree
        )));
    }
    let class = if xi.cover() == &curve.log_cover() {
        xi.clone()
    } else {
        xi.refine(&curve.log_cover())?
    };
    Ok(RankTwoBundle {
        curve: curve.clone(),
        sub_deg: sub.degree,
        quot_deg: quot.degree,
        class,
    })
}

pub fn splitting_type(h: &RankTwoBundle) -> (i64, i64) {
    h.splitting_type()
}

pub fn max_sub_line(h: &RankTwoBundle) -> Result<SubLine> {
    h.max_sub_line()
}

impl RankTwoBundle {
    pub fn split(curve: &MarkedProjLine, n1: i64, n2: i64) -> RankTwoBundle {
        let class = CechClass::zero(curve.field(), n1 - n2, curve.log_cover());
        RankTwoBundle {
            curve: curve.clone(),
            sub_deg: n1,
            quot_deg: n2,
            class,
        }
    }

    pub fn curve(&self) -> &MarkedProjLine {
        &self.curve
    }

    pub fn sub_degree(&self) -> i64 {
        self.sub_deg
    }

    pub fn quotient_degree(&self) -> i64 {
        self.quot_deg
    }

    pub fn det_degree(&self) -> i64 {
        self.sub_deg + self.quot_deg
    }

    /// The extension class.
    pub fn class(&self) -> &CechClass {
        &self.class
    }

    /// `G_a`, with `v_inf = G_a v_a`.
    pub fn glue(&self, a: Fe) -> M2 {
        M2::unipotent(self.class.get(a))
    }

    /// `T_ab` with `v_b = T_ab v_a`.
    pub fn transition(&self, a: Point, b: Point) -> M2 {
        M2::unipotent(self.class.pair(a, b))
    }

    /// Global sections of `H(-d)` satisfying `extra`, as a basis read off a
    /// reduced echelon form.
    pub fn sections(&self, d: i64, extra: Option<SectionCondition<'_>>) -> Vec<GlobalSection> {
        let f = self.curve.field();
        let pts = self.curve.finite_points();
        let ny = (self.quot_deg - d + 1).max(0) as usize;
        let np = (self.sub_deg - d + 1).max(0) as usize;
        if ny + np == 0 {
            return Vec::new();
        }
        let candidate = |u: usize| -> GlobalSection {
            if u < ny {
                let y = Poly::monomial(f.one(), u);
                let yr = RatFn::from_poly(y.clone());
                let x = pts.iter().fold(RatFn::zero(f), |acc, &a| {
                    acc.add(&self.class.get(a).mul(&yr).principal_part(a))
                });
                GlobalSection { y, x_inf: x }
            } else {
                GlobalSection {
                    y: Poly::zero(f),
                    x_inf: RatFn::from_poly(Poly::monomial(f.one(), u - ny)),
                }
            }
        };
        let cands: Vec<GlobalSection> = (0..ny + np).map(candidate).collect();
        let mut rows: Vec<Vec<Fe>> = Vec::new();
        let h1 = LineBundle::new(self.sub_deg - d).h1_dim();
        if h1 > 0 {
            let cols: Vec<Vec<Fe>> = cands
                .iter()
                .map(|s| {
                    if s.y.is_zero() {
                        vec![f.zero(); h1]
                    } else {
                        self.class.mul_section(&s.y, self.quot_deg - d).coords()
                    }
                })
                .collect();
            rows.extend(Mat::from_cols(f, &cols, h1).row_vectors());
        }
        if let Some(cond) = extra {
            let vals: Vec<Vec<RatFn>> = cands
                .iter()
                .map(|s| cond(&s.chart_vector(self, Point::Inf)))
                .collect();
            rows.extend(vanishing_rows(f, &vals));
        }
        let n = ny + np;
        let kernel = if rows.is_empty() {
            Mat::identity(f, n).row_vectors()
        } else {
            Mat::from_rows(f, &rows, n).nullspace()
        };
        kernel
            .iter()
            .map(|v| {
                let mut y = Poly::zero(f);
                let mut x = RatFn::zero(f);
                for (c, s) in v.iter().zip(&cands) {
                    if !c.is_zero() {
                        y = y.add(&s.y.scale(*c));
                        x = x.add(&s.x_inf.scale(*c));
                    }
                }
                GlobalSection { y, x_inf: x }
            })
            .collect()
    }

    pub fn h0_twisted(&self, d: i64) -> usize {
        self.sections(d, None).len()
    }

    /// `(d1, d2)` with `H = O(d1) + O(d2)`, `d1 >= d2`.
    pub fn splitting_type(&self) -> (i64, i64) {
        self.splitting_type_with(None)
    }

    /// Largest `d` admitting a nonzero section of `H(-d)` subject to `extra`,
    /// scanning down from `max(n1, n2)`; `None` when there is none down to
    /// `lowest`.
    pub fn max_degree_with(&self, extra: Option<SectionCondition<'_>>, lowest: i64) -> Option<i64> {
        let mut d = self.sub_deg.max(self.quot_deg);
        while d >= lowest {
            if !self.sections(d, extra).is_empty() {
                return Some(d);
            }
            d -= 1;
        }
        None
    }

    fn splitting_type_with(&self, extra: Option<SectionCondition<'_>>) -> (i64, i64) {
        let lowest = (self.det_degree() - 1).div_euclid(2);
        let d1 = self
            .max_degree_with(extra, lowest)
            .expect("a rank two bundle has sections at half its degree");
        (d1, self.det_degree() - d1)
    }

    /// The maximal destabilizing sub line bundle.
    pub fn max_sub_line(&self) -> Result<SubLine> {
        let (d1, d2) = self.splitting_type();
        if d1 == d2 {
            return Err(Error::BalancedSplitting(d1));
        }
        let secs = self.sections(d1, None);
        if secs.len() != 1 {
            return Err(Error::Internal(format!(
                "h0(H({})) = {} for an unbalanced type",
                -d1,
                secs.len()
            )));
        }
        Ok(SubLine {
            degree: d1,
            section: secs[0].clone(),
        })
    }

    /// The frame change to the chart at infinity for `H(-d)`:
    /// `diag(t^{n1-d}, t^{n2-d})`.
    pub fn frame_at_inf(&self, d: i64) -> M2 {
        let f = self.curve.field();
        M2::diag(
            RatFn::t_pow(f, self.sub_deg - d),
            RatFn::t_pow(f, self.quot_deg - d),
        )
    }

    pub fn to_json(&self) -> Value {
        let mut tr = serde_json::Map::new();
        for a in self.curve.finite_points() {
            tr.insert(format!("{a}->inf"), json!(self.glue(a).to_strings()));
        }
        json!({
            "sub_degree": self.sub_deg,
            "quotient_degree": self.quot_deg,
            "class": self.class.coords().iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "transitions": tr,
        })
    }
}

/// A saturated sub line bundle `O(degree) -> H`, given by a section of
/// `H(-degree)`; it serves as a Hodge filtration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubLine {
    pub degree: i64,
    pub section: GlobalSection,
}

pub type HodgeFiltration = SubLine;

impl SubLine {
    /// The sub bundle `O(n1)` of the extension itself.
    pub fn extension_sub(h: &RankTwoBundle) -> SubLine {
        let f = h.curve().field();
        SubLine {
            degree: h.sub_degree(),
            section: GlobalSection {
                y: Poly::zero(f),
                x_inf: RatFn::one(f),
            },
        }
    }

    /// Value of the section at a point, in the chart frames there (at
    /// infinity, the frames of `H(-degree)`).
    pub fn value_at(&self, h: &RankTwoBundle, pt: Point) -> Option<[Fe; 2]> {
        let v = self.section.chart_vector(h, pt);
        match pt {
            Point::Fin(a) => Some([v[0].eval(a)?, v[1].eval(a)?]),
            Point::Inf => {
                let x = v[0].mul(&RatFn::t_pow(
                    h.curve().field(),
                    self.degree - h.sub_degree(),
                ));
                let y = v[1].mul(&RatFn::t_pow(
                    h.curve().field(),
                    self.degree - h.quotient_degree(),
                ));
                Some([x.eval_inf()?, y.eval_inf()?])
            }
        }
    }

    /// Saturated: the section vanishes nowhere on `P^1`.
    pub fn is_saturated(&self, h: &RankTwoBundle) -> bool {
        let curve = h.curve();
        let v = self.section.chart_vector(h, Point::Inf);
        let nums: Vec<Poly> = v
            .iter()
            .filter(|x| !x.is_zero())
            .map(|x| x.numerator().clone())
            .collect();
        let Some(mut g) = nums
            .iter()
            .try_fold(Poly::zero(curve.field()), |acc, q| poly_gcd(&acc, q))
            .ok()
        else {
            return false;
        };
        for b in curve.finite_points() {
            let k = g.root_multiplicity(b);
            if k > 0 {
                g = g.div_exact(&Poly::linear(b).pow(k)).expect("root divides");
            }
        }
        g.deg() == 0
            && curve.marked().iter().all(|&pt| {
                self.value_at(h, pt)
                    .is_some_and(|val| val.iter().any(|x| !x.is_zero()))
            })
    }
}

/// Zero divisor of a polynomial section of `O(e)`: finite part as a monic
/// polynomial plus multiplicity at infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divisor {
    pub finite: Poly,
    pub at_inf: u32,
}

impl Divisor {
    pub fn degree(&self) -> i64 {
        self.finite.deg() + self.at_inf as i64
    }

    pub fn gcd(&self, o: &Divisor) -> Divisor {
        Divisor {
            finite: poly_gcd(&self.finite, &o.finite).expect("monic parts are nonzero"),
            at_inf: self.at_inf.min(o.at_inf),
        }
    }
}

/// A morphism `O(source) -> O(target)` given by a polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionHom {
    pub source: i64,
    pub target: i64,
    pub s: Poly,
}

impl SectionHom {
    pub fn new(source: i64, target: i64, s: Poly) -> Result<SectionHom> {
        if !s.is_zero() && s.deg() > target - source {
            return Err(Error::InvalidCochain(format!(
                "section of degree {} in O({})",
                s.deg(),
                target - source
            )));
        }
        Ok(SectionHom { source, target, s })
    }

    pub fn div(&self) -> Result<Divisor> {
        if self.s.is_zero() {
            return Err(Error::ZeroSection);
        }
        Ok(Divisor {
            finite: self.s.monic(),
            at_inf: (self.target - self.source - self.s.deg()) as u32,
        })
    }
}

/// A graded Higgs bundle `O(l1) + O(l2)` with `theta = phi * Omega` mapping
/// `O(l1)` to `O(l2) (x) omega_log`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedHiggs {
    pub curve: MarkedProjLine,
    pub l1: i64,
    pub l2: i64,
    pub phi: Poly,
}

impl GradedHiggs {
    pub fn new(curve: &MarkedProjLine, l1: i64, l2: i64, phi: Poly) -> Result<GradedHiggs> {
        let g = GradedHiggs {
            curve: curve.clone(),
            l1,
            l2,
            phi,
        };
        if !g.phi.is_zero() && g.phi.deg() > g.theta_bound() {
            return Err(Error::Input(format!(
                "Higgs field of degree {} exceeds {}",
                g.phi.deg(),
                g.theta_bound()
            )));
        }
        Ok(g)
    }

    /// `(E, theta)` with `E = L + L^{-1}`, `L^2 = omega_log` and `theta` the
    /// tautological isomorphism; for odd `r` the twist `omega + O`.
    pub fn maximal(curve: &MarkedProjLine) -> GradedHiggs {
        let w = curve.omega_degree();
        let (l1, l2) = if w % 2 == 0 { (w / 2, -w / 2) } else { (w, 0) };
        GradedHiggs {
            curve: curve.clone(),
            l1,
            l2,
            phi: Poly::one(curve.field()),
        }
    }

    /// Largest allowed degree of `phi`.
    pub fn theta_bound(&self) -> i64 {
        self.l2 - self.l1 + self.curve.omega_degree()
    }

    pub fn is_zero(&self) -> bool {
        self.phi.is_zero()
    }

    pub fn is_maximal(&self) -> bool {
        self.theta_bound() == 0 && self.phi.deg() == 0
    }

    pub fn twist(&self, n: i64) -> GradedHiggs {
        GradedHiggs {
            curve: self.curve.clone(),
            l1: self.l1 + n,
            l2: self.l2 + n,
            phi: self.phi.clone(),
        }
    }

    /// The same data over an extension field; coefficients must be prime.
    pub fn over(&self, f: Field) -> GradedHiggs {
        let c = self
            .phi
            .coeffs()
            .iter()
            .map(|x| f.int(x.prime_value().expect("prime coefficient") as i64))
            .collect();
        GradedHiggs {
            curve: self.curve.over(f),
            l1: self.l1,
            l2: self.l2,
            phi: Poly::new(f, c),
        }
    }

    pub fn to_higgs(&self) -> HiggsBundle {
        let f = self.curve.field();
        let z = Poly::zero(f);
        HiggsBundle {
            curve: self.curve.clone(),
            degs: [self.l1, self.l2],
            theta: [[z.clone(), z.clone()], [self.phi.clone(), z]],
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "degrees": [self.l1, self.l2], "theta": self.phi.to_string() })
    }
}

/// A Higgs field on the split bundle `O(d0) + O(d1)`; `theta[i][j]` maps
/// `O(d_j)` to `O(d_i) (x) omega_log`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiggsBundle {
    pub curve: MarkedProjLine,
    pub degs: [i64; 2],
    pub theta: [[Poly; 2]; 2],
}

impl HiggsBundle {
    pub fn is_nilpotent(&self) -> bool {
        let t = &self.theta;
        (0..2).all(|i| (0..2).all(|j| t[i][0].mul(&t[0][j]).add(&t[i][1].mul(&t[1][j])).is_zero()))
    }

    /// The graded form: nilpotent with a single off-diagonal entry.
    pub fn graded(&self) -> Result<GradedHiggs> {
        if !self.is_nilpotent() {
            return Err(Error::NotNilpotent("theta^2 != 0".into()));
        }
        let t = &self.theta;
        if !t[0][0].is_zero() || !t[1][1].is_zero() || (!t[0][1].is_zero() && !t[1][0].is_zero()) {
            return Err(Error::NotGraded);
        }
        let [d0, d1] = self.degs;
        if !t[0][1].is_zero() {
            GradedHiggs::new(&self.curve, d1, d0, t[0][1].clone())
        } else {
            GradedHiggs::new(&self.curve, d0, d1, t[1][0].clone())
        }
    }
}

/// Isomorphism of graded Higgs bundles: equal degrees and proportional
/// fields, or both fields zero with the same degree multiset.
pub fn higgs_iso_test(a: &GradedHiggs, b: &GradedHiggs) -> bool {
    if a.curve != b.curve {
        return false;
    }
    match (a.is_zero(), b.is_zero()) {
        (true, true) => {
            let mut x = [a.l1, a.l2];
            let mut y = [b.l1, b.l2];
            x.sort();
            y.sort();
            x == y
        }
        (false, false) => {
            a.l1 == b.l1 && a.l2 == b.l2 && a.phi.scale(b.phi.lead()) == b.phi.scale(a.phi.lead())
        }
        _ => false,
    }
}

/// `Some(n)` when `a` is isomorphic to `b (x) O(n)`.
pub fn higgs_iso_up_to_twist(a: &GradedHiggs, b: &GradedHiggs) -> Option<i64> {
    let n = if a.is_zero() {
        a.l1.min(a.l2) - b.l1.min(b.l2)
    } else {
        a.l1 - b.l1
    };
    higgs_iso_test(a, &b.twist(n)).then_some(n)
}

/// A log connection on an extension bundle, one matrix per marked chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatBundle {
    bundle: RankTwoBundle,
    conn: BTreeMap<Point, M2>,
}

impl FlatBundle {
    /// Validates that the chart matrices glue, i.e. that
    /// `M_inf = G M_a G^{-1} - prod G' G^{-1}`, and that each is logarithmic.
    pub fn from_charts(bundle: RankTwoBundle, conn: BTreeMap<Point, M2>) -> Result<FlatBundle> {
        let curve = bundle.curve().clone();
        for pt in curve.marked() {
            if !conn.contains_key(pt) {
                return Err(Error::ChartIncompatible(format!(
                    "no connection matrix on the chart at {pt}"
                )));
            }
        }
        let m_inf = &conn[&Point::Inf];
        let prod = RatFn::from_poly(curve.prod());
        for a in curve.finite_points() {
            let g = bundle.glue(a);
            let gi = g.adjugate();
            let want = g
                .mul(&conn[&Point::Fin(a)])
                .mul(&gi)
                .sub(&g.derivative().mul(&gi).scale(&prod));
            if &want != m_inf {
                return Err(Error::ChartIncompatible(format!("charts at {a} and inf")));
            }
        }
        let hf = FlatBundle { bundle, conn };
        hf.check_logarithmic()?;
        Ok(hf)
    }

    /// Derives all chart matrices from the one at infinity.
    pub fn from_infinity(bundle: RankTwoBundle, m_inf: M2) -> Result<FlatBundle> {
        let curve = bundle.curve().clone();
        let prod = RatFn::from_poly(curve.prod());
        let mut conn = BTreeMap::new();
        for a in curve.finite_points() {
            let g = bundle.glue(a);
            let gi = g.adjugate();
            conn.insert(
                Point::Fin(a),
                gi.mul(&m_inf)
                    .mul(&g)
                    .add(&gi.mul(&g.derivative()).scale(&prod)),
            );
        }
        conn.insert(Point::Inf, m_inf);
        let hf = FlatBundle { bundle, conn };
        hf.check_logarithmic()?;
        Ok(hf)
    }

    fn check_logarithmic(&self) -> Result<()> {
        let curve = self.bundle.curve();
        let pts = curve.finite_points();
        for (&pt, m) in &self.conn {
            if m.e
                .iter()
                .flatten()
                .any(|x| x.denominator().keys().any(|b| !pts.contains(b)))
            {
                return Err(Error::NotLogarithmic(format!(
                    "{pt} (pole off the divisor)"
                )));
            }
            let local = match pt {
                Point::Fin(_) => m.scale(&curve.u(pt)),
                Point::Inf => self.matrix_in_frame_at_inf().scale(&curve.u(pt)),
            };
            if local.eval_at(pt).is_none() {
                return Err(Error::NotLogarithmic(pt.to_string()));
            }
        }
        Ok(())
    }

    pub fn bundle(&self) -> &RankTwoBundle {
        &self.bundle
    }

    pub fn curve(&self) -> &MarkedProjLine {
        self.bundle.curve()
    }

    pub fn connection(&self, c: Point) -> &M2 {
        &self.conn[&c]
    }

    pub fn charts(&self) -> impl Iterator<Item = (&Point, &M2)> {
        self.conn.iter()
    }

    /// `M_inf` in the frames `t^{n1} e1, t^{n2} e2` regular at infinity.
    pub fn matrix_in_frame_at_inf(&self) -> M2 {
        let pf = self.bundle.frame_at_inf(0);
        let prod = RatFn::from_poly(self.curve().prod());
        let pinv = M2::diag(
            RatFn::t_pow(self.curve().field(), -self.bundle.sub_degree()),
            RatFn::t_pow(self.curve().field(), -self.bundle.quotient_degree()),
        );
        pinv.mul(
            &pf.derivative()
                .scale(&prod)
                .add(&self.conn[&Point::Inf].mul(&pf)),
        )
    }

    /// `nabla v` as `Omega`-coefficients, in the frames of chart `c`.
    pub fn nabla(&self, c: Point, v: &[RatFn; 2]) -> [RatFn; 2] {
        let prod = RatFn::from_poly(self.curve().prod());
        let mv = self.conn[&c].apply(v);
        [
            v[0].derivative().mul(&prod).add(&mv[0]),
            v[1].derivative().mul(&prod).add(&mv[1]),
        ]
    }

    /// `nabla_{D_c} v` for the local log vector field at `c`.
    pub fn covariant(&self, c: Point, v: &[RatFn; 2]) -> [RatFn; 2] {
        let curve = self.curve();
        let field = RatFn::from_poly(curve.log_field(c));
        let mv = self.conn[&c].scale(&curve.u(c)).apply(v);
        [
            v[0].derivative().mul(&field).add(&mv[0]),
            v[1].derivative().mul(&field).add(&mv[1]),
        ]
    }

    /// Residue at a marked point, in the chart frames there.
    pub fn residue(&self, pt: Point) -> Result<FMat2> {
        let curve = self.curve();
        if !curve.is_marked(pt) {
            return Err(Error::PointNotMarked(pt.to_string()));
        }
        let m = match pt {
            Point::Fin(_) => self.conn[&pt].clone(),
            Point::Inf => self.matrix_in_frame_at_inf(),
        };
        m.scale(&curve.u(pt))
            .eval_at(pt)
            .ok_or_else(|| Error::NotLogarithmic(pt.to_string()))
    }

    /// `psi(D) = nabla_D^p - nabla_D` applied to `v` with `D = D_c`.
    pub fn p_curvature_apply(&self, c: Point, v: &[RatFn; 2]) -> [RatFn; 2] {
        let p = self.curve().p();
        let first = self.covariant(c, v);
        let mut cur = first.clone();
        for _ in 1..p {
            cur = self.covariant(c, &cur);
        }
        [cur[0].sub(&first[0]), cur[1].sub(&first[1])]
    }

    /// p-curvature on every chart, checked to glue.
    pub fn p_curvature(&self) -> Result<PCurvature> {
        let curve = self.curve().clone();
        let f = curve.field();
        let p = curve.p();
        let basis = [
            [RatFn::one(f), RatFn::zero(f)],
            [RatFn::zero(f), RatFn::one(f)],
        ];
        let mut per_chart = BTreeMap::new();
        let mut big: BTreeMap<Point, M2> = BTreeMap::new();
        for &c in curve.marked() {
            let cols: Vec<[RatFn; 2]> =
                basis.iter().map(|e| self.p_curvature_apply(c, e)).collect();
            let psi = M2::new(
                cols[0][0].clone(),
                cols[1][0].clone(),
                cols[0][1].clone(),
                cols[1][1].clone(),
            );
            let unscale = curve.natural_factor(c).pow(p);
            let in_inf = match c {
                Point::Fin(a) => {
                    let g = self.bundle.glue(a);
                    g.mul(&psi.scale(&unscale)).mul(&g.adjugate())
                }
                Point::Inf => psi.scale(&unscale),
            };
            big.insert(c, in_inf);
            per_chart.insert(c, psi);
        }
        let psi_t = big[&Point::Inf].clone();
        if let Some((c, _)) = big.iter().find(|(_, m)| **m != psi_t) {
            return Err(Error::ChartIncompatible(format!(
                "p-curvature on the charts at {c} and inf"
            )));
        }
        Ok(PCurvature { per_chart, psi_t })
    }

    pub fn to_json(&self) -> Value {
        let conn: serde_json::Map<String, Value> = self
            .conn
            .iter()
            .map(|(pt, m)| (pt.to_string(), json!(m.to_strings())))
            .collect();
        json!({ "bundle": self.bundle.to_json(), "connection": conn })
    }
}

/// p-curvature: `psi(D_c)` in the frames of each chart, and the global
/// `Psi = psi(prod d/dt)` in the frames of the chart at infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PCurvature {
    pub per_chart: BTreeMap<Point, M2>,
    pub psi_t: M2,
}

impl PCurvature {
    pub fn is_zero(&self) -> bool {
        self.psi_t.is_zero()
    }

    pub fn is_nilpotent(&self) -> bool {
        self.psi_t.mul(&self.psi_t).is_zero()
    }

    /// `psi(D_c)` at a marked point, in the frames regular there.
    pub fn value_at(&self, hf: &FlatBundle, pt: Point) -> Option<FMat2> {
        let m = &self.per_chart[&pt];
        match pt {
            Point::Fin(_) => m.eval_at(pt),
            Point::Inf => {
                let b = hf.bundle();
                let f = b.curve().field();
                let pinv = M2::diag(
                    RatFn::t_pow(f, -b.sub_degree()),
                    RatFn::t_pow(f, -b.quotient_degree()),
                );
                pinv.mul(m).mul(&b.frame_at_inf(0)).eval_at(pt)
            }
        }
    }

    /// True when `psi` vanishes at no point of `P^1`: the entries of `Psi`
    /// share no root off the divisor, and `psi(D_c)` is nonzero at each
    /// marked point.
    pub fn nowhere_vanishing(&self, hf: &FlatBundle) -> Result<bool> {
        let curve = hf.curve();
        let nums: Vec<Poly> = self
            .psi_t
            .e
            .iter()
            .flatten()
            .filter(|x| !x.is_zero())
            .map(|x| x.numerator().clone())
            .collect();
        if nums.is_empty() {
            return Ok(false);
        }
        let mut g = nums
            .iter()
            .try_fold(Poly::zero(curve.field()), |acc, q| poly_gcd(&acc, q))?;
        for b in curve.finite_points() {
            let k = g.root_multiplicity(b);
            if k > 0 {
                g = g.div_exact(&Poly::linear(b).pow(k))?;
            }
        }
        if g.deg() > 0 {
            return Ok(false);
        }
        for &pt in curve.marked() {
            let v = self
                .value_at(hf, pt)
                .ok_or_else(|| Error::Internal(format!("p-curvature has a pole at {pt}")))?;
            if fmat_is_zero(&v) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The graded Higgs bundle of a flat bundle with a sub line bundle:
/// `Fil + H/Fil` with `theta = (nabla mod Fil)|Fil`. Its field is
/// `det[v, prod v' + M v]`, the same in every chart.
pub fn grade(hf: &FlatBundle, fil: &HodgeFiltration) -> Result<GradedHiggs> {
    let h = hf.bundle();
    let v = fil.section.chart_vector(h, Point::Inf);
    let w = hf.nabla(Point::Inf, &v);
    let theta = v[0].mul(&w[1]).sub(&v[1].mul(&w[0]));
    let phi = theta
        .as_poly()
        .cloned()
        .ok_or_else(|| Error::Internal("graded Higgs field is not polynomial".into()))?;
    GradedHiggs::new(hf.curve(), fil.degree, h.det_degree() - fil.degree, phi)
        .map_err(|e| Error::Internal(format!("graded Higgs field out of range: {e}")))
}

/// `grade`, reporting `FiltrationFlat` when the filtration is horizontal.
pub fn grade_nonflat(hf: &FlatBundle, fil: &HodgeFiltration) -> Result<GradedHiggs> {
    let g = grade(hf, fil)?;
    if g.is_zero() {
        return Err(Error::FiltrationFlat);
    }
    Ok(g)
}

trait RowVectors {
    fn row_vectors(&self) -> Vec<Vec<Fe>>;
}

impl RowVectors for Mat {
    fn row_vectors(&self) -> Vec<Vec<Fe>> {
        (0..self.rows()).map(|i| self.row(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::field;
    use proptest::prelude::*;

    fn line(p: u32, extra: &[u32]) -> MarkedProjLine {
        MarkedProjLine::with_points(field(p, 1).unwrap(), extra).unwrap()
    }

    fn ext(curve: &MarkedProjLine, n1: i64, n2: i64, coords: &[Fe]) -> RankTwoBundle {
        let f = curve.field();
        let xi = CechClass::canonical(f, n1 - n2, coords, curve.log_cover());
        extension_from_class(curve, &xi, LineBundle::new(n1), LineBundle::new(n2)).unwrap()
    }

    /// Checks each chart vector is regular where it must be.
    fn is_section(h: &RankTwoBundle, d: i64, s: &GlobalSection) -> bool {
        let curve = h.curve();
        let fin = curve.finite_points().into_iter().all(|a| {
            let v = s.chart_vector(h, Point::Fin(a));
            v[0].eval(a).is_some() && v[1].eval(a).is_some()
        });
        let v = s.chart_vector(h, Point::Inf);
        let inf = v[0].degree_at_inf() <= h.sub_degree() - d
            && v[1].degree_at_inf() <= h.quotient_degree() - d;
        fin && inf
    }

    #[test]
    fn split_bundle_type() {
        let c = line(5, &[]);
        assert_eq!(RankTwoBundle::split(&c, -3, 2).splitting_type(), (2, -3));
        assert_eq!(RankTwoBundle::split(&c, 4, 1).splitting_type(), (4, 1));
        let h = RankTwoBundle::split(&c, 1, 1);
        assert_eq!(h.max_sub_line(), Err(Error::BalancedSplitting(1)));
    }

    #[test]
    fn nonsplit_extension_of_o_by_o_minus_two_is_balanced() {
        let c = line(3, &[]);
        let f = c.field();
        let h = ext(&c, -2, 0, &[f.one()]);
        assert_eq!(h.splitting_type(), (-1, -1));
        assert_eq!(h.max_sub_line(), Err(Error::BalancedSplitting(-1)));
    }

    #[test]
    fn extensions_by_o_minus_four_follow_hankel_rank() {
        let c = line(3, &[2]);
        let f = c.field();
        for c0 in f.elements() {
            for c1 in f.elements() {
                for c2 in f.elements() {
                    let h = ext(&c, -4, 0, &[c0, c1, c2]);
                    let want = if c0.is_zero() && c1.is_zero() && c2.is_zero() {
                        (0, -4)
                    } else if (c0 * c2 - c1 * c1).is_zero() {
                        (-1, -3)
                    } else {
                        (-2, -2)
                    };
                    assert_eq!(h.splitting_type(), want, "class {c0} {c1} {c2}");
                    for d in -5..=1 {
                        let secs = h.sections(d, None);
                        let expect = LineBundle::new(want.0 - d).h0_dim()
                            + LineBundle::new(want.1 - d).h0_dim();
                        assert_eq!(secs.len(), expect);
                        assert!(secs.iter().all(|s| is_section(&h, d, s)));
                    }
                }
            }
        }
    }

    #[test]
    fn max_sub_line_is_saturated() {
        let c = line(3, &[2]);
        let f = c.field();
        let h = ext(&c, -4, 0, &[f.one(), f.zero(), f.zero()]);
        let sub = h.max_sub_line().unwrap();
        assert_eq!(sub.degree, -1);
        assert!(sub.is_saturated(&h));
        assert!(SubLine::extension_sub(&h).is_saturated(&h));
        let not_sat = SubLine {
            degree: -2,
            section: sub.section.clone(),
        };
        assert!(!not_sat.is_saturated(&h));
    }

    #[test]
    fn divisor_of_section() {
        let f = field(5, 1).unwrap();
        let s = Poly::from_ints(f, &[0, 0, 4, 1]);
        let hom = SectionHom::new(-1, 4, s).unwrap();
        let d = hom.div().unwrap();
        assert_eq!(d.degree(), 5);
        assert_eq!(d.at_inf, 2);
        let other = Divisor {
            finite: Poly::from_ints(f, &[0, 1]),
            at_inf: 4,
        };
        assert_eq!(
            d.gcd(&other),
            Divisor {
                finite: Poly::from_ints(f, &[0, 1]),
                at_inf: 2
            }
        );
        assert_eq!(
            SectionHom::new(0, 1, Poly::zero(f)).unwrap().div(),
            Err(Error::ZeroSection)
        );
        assert!(SectionHom::new(0, 1, Poly::from_ints(f, &[0, 0, 1])).is_err());
    }

    #[test]
    fn trivial_connection_has_zero_p_curvature() {
        let c = line(5, &[3]);
        let f = c.field();
        let hf = FlatBundle::from_infinity(RankTwoBundle::split(&c, 2, -1), M2::zero(f)).unwrap();
        let pc = hf.p_curvature().unwrap();
        assert!(pc.is_zero());
        assert!(!pc.nowhere_vanishing(&hf).unwrap());
        let r = hf.residue(Point::Inf).unwrap();
        assert_eq!(r[0][0], f.int(-2));
        assert_eq!(r[1][1], f.int(1));
        assert!(fmat_is_zero(&hf.residue(Point::Fin(f.one())).unwrap()));
    }

    #[test]
    fn rank_one_p_curvature_matches_jacobson() {
        let c = line(5, &[3]);
        let f = c.field();
        let alpha = f.int(2);
        let hf = FlatBundle::from_infinity(
            RankTwoBundle::split(&c, 0, 0),
            M2::diag(RatFn::constant(alpha), RatFn::zero(f)),
        )
        .unwrap();
        let pc = hf.p_curvature().unwrap();
        for &pt in c.marked() {
            // psi(D) = g^p + D^{p-1} g - g with g = alpha u_c, as D^p = D.
            let g = c.u(pt).scale(alpha);
            let d = RatFn::from_poly(c.log_field(pt));
            let mut it = g.clone();
            for _ in 0..4 {
                it = it.derivative().mul(&d);
            }
            let want = g.pow(5).add(&it).sub(&g);
            assert_eq!(pc.per_chart[&pt].e[0][0], want);
            assert!(pc.per_chart[&pt].e[1][1].is_zero());
        }
    }

    #[test]
    fn chart_mismatch_is_rejected() {
        let c = line(5, &[]);
        let f = c.field();
        let h = ext(&c, -2, 0, &[f.one()]);
        let mut conn = BTreeMap::new();
        for &pt in c.marked() {
            conn.insert(pt, M2::zero(f));
        }
        assert!(matches!(
            FlatBundle::from_charts(h, conn),
            Err(Error::ChartIncompatible(_))
        ));
    }

    #[test]
    fn non_log_pole_is_rejected() {
        let c = line(5, &[]);
        let f = c.field();
        let m = M2::diag(RatFn::pole(f.zero(), 2), RatFn::zero(f));
        assert!(matches!(
            FlatBundle::from_infinity(RankTwoBundle::split(&c, 0, 0), m),
            Err(Error::NotLogarithmic(_))
        ));
    }

    #[test]
    fn grading_an_oper_like_connection() {
        let c = line(5, &[]);
        let f = c.field();
        let h = RankTwoBundle::split(&c, 1, 0);
        let m = M2::new(
            RatFn::zero(f),
            RatFn::zero(f),
            RatFn::one(f),
            RatFn::zero(f),
        );
        let hf = FlatBundle::from_infinity(h.clone(), m).unwrap();
        let g = grade(&hf, &SubLine::extension_sub(&h)).unwrap();
        assert_eq!((g.l1, g.l2), (1, 0));
        assert!(g.is_maximal());
        assert!(higgs_iso_test(&g, &GradedHiggs::maximal(&c)));
        let flat = FlatBundle::from_infinity(h.clone(), M2::zero(f)).unwrap();
        assert_eq!(
            grade_nonflat(&flat, &SubLine::extension_sub(&h)),
            Err(Error::FiltrationFlat)
        );
    }

    #[test]
    fn higgs_comparisons() {
        let c = line(5, &[2]);
        let f = c.field();
        let phi = Poly::from_ints(f, &[1, 2]);
        let a = GradedHiggs::new(&c, 1, 0, phi.clone()).unwrap();
        let b = GradedHiggs::new(&c, 1, 0, phi.scale(f.int(3))).unwrap();
        assert!(higgs_iso_test(&a, &b));
        assert!(!higgs_iso_test(
            &a,
            &GradedHiggs::new(&c, 1, 0, Poly::from_ints(f, &[2, 2])).unwrap()
        ));
        assert!(!higgs_iso_test(&a, &a.twist(1)));
        assert_eq!(higgs_iso_up_to_twist(&a.twist(-2), &a), Some(-2));
        let z1 = GradedHiggs::new(&c, 3, -1, Poly::zero(f)).unwrap();
        let z2 = GradedHiggs::new(&c, -1, 3, Poly::zero(f)).unwrap();
        assert!(higgs_iso_test(&z1, &z2));
        assert!(GradedHiggs::new(&c, 0, 0, Poly::from_ints(f, &[0, 0, 0, 1])).is_err());
    }

    #[test]
    fn higgs_shape_errors() {
        let c = line(5, &[]);
        let f = c.field();
        let one = Poly::one(f);
        let z = Poly::zero(f);
        let swap = HiggsBundle {
            curve: c.clone(),
            degs: [0, 0],
            theta: [[z.clone(), one.clone()], [one.clone(), z.clone()]],
        };
        assert!(matches!(swap.graded(), Err(Error::NotNilpotent(_))));
        let m1 = one.neg();
        let diag = HiggsBundle {
            curve: c.clone(),
            degs: [0, 0],
            theta: [[one.clone(), one.clone()], [m1.clone(), m1]],
        };
        assert_eq!(diag.graded(), Err(Error::NotGraded));
        let g = GradedHiggs::new(&c, 0, 1, Poly::from_ints(f, &[1, 1, 1])).unwrap();
        assert_eq!(g.to_higgs().graded().unwrap(), g);
        let up = HiggsBundle {
            curve: c,
            degs: [1, 0],
            theta: [[z.clone(), Poly::from_ints(f, &[3, 1, 1])], [z.clone(), z]],
        };
        let gu = up.graded().unwrap();
        assert_eq!((gu.l1, gu.l2), (0, 1));
    }

    proptest! {
        #[test]
        fn residue_traces_sum_to_minus_degree(
            n1 in -2i64..3, n2 in -2i64..3, extra in 0u32..2,
            seeds in proptest::collection::vec(0i64..5, 16),
        ) {
            let c = line(5, if extra == 1 { &[3] } else { &[] });
            let f = c.field();
            let w = c.omega_degree();
            let entry = |i: usize, bound: i64| -> RatFn {
                if bound < 0 { return RatFn::zero(f); }
                let co: Vec<i64> = seeds[4 * i..4 * i + (bound as usize + 1).min(4)].to_vec();
                RatFn::from_poly(Poly::from_ints(f, &co))
            };
            let m = M2::new(entry(0, w), entry(1, w + n1 - n2), entry(2, w + n2 - n1), entry(3, w));
            let hf = FlatBundle::from_infinity(RankTwoBundle::split(&c, n1, n2), m).unwrap();
            let total = c.marked().iter().fold(f.zero(), |acc, &pt| {
                let r = hf.residue(pt).unwrap();
                acc + r[0][0] + r[1][1]
            });
            prop_assert_eq!(total, f.int(-(n1 + n2)));
            prop_assert!(hf.p_curvature().is_ok());
        }
    }
}
