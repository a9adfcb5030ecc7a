//! Lifting spaces and the periodic cone for the inverse Cartier transform of a
//! maximal graded Higgs bundle on a marked line, and the Higgs-de Rham flow.
//!
//! Classes live in the ambient space `H^1(O(p(l2 - l1)))`, the extension
//! classes of `0 -> F^*O(l2) -> H -> F^*O(l1) -> 0`. The cone is the set of
//! classes whose bundle contains a line of degree at least
//! `l1 + (p-1)(l1+l2)/2`, the degree at which the graded pieces of `H` are a
//! twist of `(l1, l2)`.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bundles::{
    extension_from_class, grade, higgs_iso_test, higgs_iso_up_to_twist, splitting_type, Divisor,
    FlatBundle, GlobalSection, GradedHiggs, RankTwoBundle, SectionHom, SubLine,
};
use crate::cartier::{
    build_atlas, inverse_cartier_bundle, inverse_cartier_graded, FrobLiftAtlas, W2LiftChoice,
};
use crate::error::{Error, Result};
use crate::exactalg::{field, in_span, Fe, Field, Mat, Poly, RatFn, SemilinearMap};
use crate::logcurve::{
    frobenius_pullback_map, h1_basis, hypercoh_h1_dr, multiplication_map, CechClass, LineBundle,
    MarkedProjLine,
};

fn strings(v: &[Fe]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

/// Degree of the ambient line bundle `F^*(L2 L1^{-1})`.
pub fn ambient_degree(e: &GradedHiggs) -> i64 {
    e.curve.p() as i64 * (e.l2 - e.l1)
}

/// Smallest degree of a sub line bundle making the flow periodic.
pub fn cone_threshold(e: &GradedHiggs) -> i64 {
    e.l1 + (e.curve.p() as i64 - 1) * (e.l1 + e.l2) / 2
}

/// Degree of the witness section `s: O(threshold) -> F^*O(l1)`.
pub fn witness_degree(e: &GradedHiggs) -> i64 {
    e.curve.p() as i64 * e.l1 - cone_threshold(e)
}

/// The extension class of the inverse Cartier transform for a lift.
pub fn lift_class(choice: &W2LiftChoice, e: &GradedHiggs) -> Result<CechClass> {
    let atlas = build_atlas(&e.curve, choice)?;
    Ok(inverse_cartier_bundle(e, &atlas)?.class().clone())
}

/// `nu -> F^*(nu) phi^p` from `H^1(T_log)` to the ambient space; semilinear.
pub fn frobenius_image_map(e: &GradedHiggs) -> SemilinearMap {
    let c = &e.curve;
    let f = c.field();
    let p = c.p() as i64;
    let src = -c.omega_degree();
    let target = LineBundle::new(ambient_degree(e)).h1_dim();
    let phi_p = e.phi.frob();
    let cols: Vec<Vec<Fe>> = h1_basis(f, src)
        .iter()
        .map(|nu| {
            nu.frobenius_pullback()
                .mul_section(&phi_p, p * e.theta_bound())
                .coords()
        })
        .collect();
    SemilinearMap::new(Mat::from_cols(f, &cols, target), 1)
}

/// The class of `1/prod` on the chart at `lambda`, in `H^1(T_log)`: the
/// direction in which moving the lift of `lambda` moves the obstruction.
pub fn kodaira_spencer_direction(curve: &MarkedProjLine, lambda: Fe) -> CechClass {
    let f = curve.field();
    let inv = RatFn::from_poly(curve.prod())
        .inv(&curve.finite_points())
        .expect("prod is a unit on U");
    CechClass::new(
        f,
        -curve.omega_degree(),
        curve.log_cover(),
        [(lambda, inv)].into_iter().collect(),
    )
    .expect("poles on the divisor")
}

/// Derivative of `lift_class` in the lift parameter at `lambda`: the class
/// of `phi^p / prod^p` on the chart at `lambda`.
pub fn lift_direction(e: &GradedHiggs, lambda: Fe) -> Vec<Fe> {
    let c = &e.curve;
    let p = c.p();
    let g = RatFn::from_poly(e.phi.frob()).mul(
        &RatFn::from_poly(c.prod().pow(p))
            .inv(&c.finite_points())
            .expect("unit on U"),
    );
    CechClass::new(
        c.field(),
        ambient_degree(e),
        c.log_cover(),
        [(lambda, g)].into_iter().collect(),
    )
    .expect("poles on the divisor")
    .coords()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftingSpaces {
    pub ambient_degree: i64,
    pub ambient_dim: usize,
    /// Basis of the image of `F^* o theta-check`.
    pub w_f: Vec<Vec<Fe>>,
    /// Basis of the classes admitting a flat structure.
    pub b: Vec<Vec<Fe>>,
    /// `lift_class` of the Teichmuller lift.
    pub xi_base: Vec<Fe>,
    /// Per extra marked point, the direction of `lift_class` in its lift parameter.
    pub directions: Vec<(Fe, Vec<Fe>)>,
    pub cone_dim: usize,
    pub field: Field,
    /// Whether the Higgs field is the maximal one.
    pub maximal: bool,
}

pub fn compute_spaces(e: &GradedHiggs) -> Result<LiftingSpaces> {
    let c = &e.curve;
    let d = ambient_degree(e);
    let w_f = frobenius_image_map(e).rank_kernel_image().image;
    let dr = hypercoh_h1_dr(c, e.l2 - e.l1);
    let xi_base = lift_class(&W2LiftChoice::zero(), e)?.coords();
    let directions = c
        .extra_points()
        .into_iter()
        .map(|l| (l, lift_direction(e, l)))
        .collect();
    let ws = witness_degree(e);
    let cone_dim = if ws < 0 {
        0
    } else {
        LineBundle::new(ws).h0_dim() - 1 + ws as usize
    };
    Ok(LiftingSpaces {
        ambient_degree: d,
        ambient_dim: LineBundle::new(d).h1_dim(),
        w_f,
        b: dr.b_basis().to_vec(),
        xi_base,
        directions,
        cone_dim,
        field: c.field(),
        maximal: e.is_maximal(),
    })
}

impl LiftingSpaces {
    pub fn a_dim(&self) -> usize {
        self.w_f.len()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// `xi_base + sum eps_lambda * direction_lambda`.
    pub fn point(&self, eps: &[Fe]) -> Vec<Fe> {
        let mut v = self.xi_base.clone();
        for (x, (_, dir)) in eps.iter().zip(&self.directions) {
            for (vi, di) in v.iter_mut().zip(dir) {
                *vi += *x * *di;
            }
        }
        v
    }

    /// Structural checks: `W_F` inside `B`, `xi_base` in `B`, lift
    /// directions spanning `W_F`; for the maximal field also
    /// `dim B = dim W_F + 1`, `xi_base` outside `W_F` and
    /// `dim A + dim K = ambient`.
    pub fn checks(&self) -> Vec<(&'static str, bool)> {
        let f = self.field();
        let dirs: Vec<Vec<Fe>> = self.directions.iter().map(|(_, d)| d.clone()).collect();
        let dirs_span = crate::exactalg::span_basis(f, &dirs, self.ambient_dim);
        let mut out = vec![
            (
                "W_F inside B",
                self.w_f.iter().all(|w| in_span(f, &self.b, w)),
            ),
            ("xi_base in B", in_span(f, &self.b, &self.xi_base)),
            (
                "lift directions span W_F",
                dirs_span.len() == self.w_f.len() && dirs.iter().all(|d| in_span(f, &self.w_f, d)),
            ),
        ];
        if self.maximal {
            out.extend([
                ("dim B = dim W_F + 1", self.b.len() == self.w_f.len() + 1),
                ("xi_base not in W_F", !in_span(f, &self.w_f, &self.xi_base)),
                (
                    "dim A + dim K = ambient",
                    self.a_dim() + self.cone_dim == self.ambient_dim,
                ),
            ]);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "ambient": { "degree": self.ambient_degree, "dim": self.ambient_dim },
            "W_F": { "dim": self.w_f.len(), "basis": self.w_f.iter().map(|v| strings(v)).collect::<Vec<_>>() },
            "B": { "dim": self.b.len(), "basis": self.b.iter().map(|v| strings(v)).collect::<Vec<_>>() },
            "A": { "dim": self.a_dim(), "xi_base": strings(&self.xi_base) },
            "K": { "dim": self.cone_dim },
            "directions": self.directions.iter().map(|(l, d)| json!({"point": l.to_string(), "class": strings(d)})).collect::<Vec<_>>(),
        })
    }
}

/// A sub line bundle `O(threshold) -> H_xi` and its composite `s` to the
/// quotient `F^*O(l1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeWitness {
    pub threshold: i64,
    pub section: GlobalSection,
    pub s: SectionHom,
    pub divisor: Option<Divisor>,
}

impl ConeWitness {
    pub fn to_json(&self) -> Value {
        json!({
            "threshold": self.threshold,
            "s": self.s.s.to_string(),
            "divisor": self.divisor.as_ref().map(|d| json!({"finite": d.finite.to_string(), "at_inf": d.at_inf})),
        })
    }
}

/// The extension bundle of a class given by canonical coordinates.
pub fn extension_bundle(e: &GradedHiggs, coords: &[Fe]) -> Result<RankTwoBundle> {
    let c = &e.curve;
    let p = c.p() as i64;
    let xi = CechClass::canonical(c.field(), ambient_degree(e), coords, c.log_cover());
    extension_from_class(c, &xi, LineBundle::new(p * e.l2), LineBundle::new(p * e.l1))
}

/// Cone membership by sections of `H_xi(-threshold)`.
pub fn cone_member(coords: &[Fe], e: &GradedHiggs) -> Result<Option<ConeWitness>> {
    let h = extension_bundle(e, coords)?;
    let thr = cone_threshold(e);
    let secs = h.sections(thr, None);
    let Some(section) = secs.into_iter().next() else {
        return Ok(None);
    };
    let s = SectionHom::new(thr, h.quotient_degree(), section.y.clone())?;
    let divisor = s.div().ok();
    Ok(Some(ConeWitness {
        threshold: thr,
        section,
        s,
        divisor,
    }))
}

/// Matrices `xi -> t^j xi`, one per monomial of the witness degree.
fn cone_blocks(e: &GradedHiggs) -> Vec<Mat> {
    let f = e.curve.field();
    let d = ambient_degree(e);
    let ws = witness_degree(e);
    (0..=ws.max(-1))
        .map(|j| multiplication_map(f, &Poly::monomial(f.one(), j as usize), d, d + ws))
        .collect()
}

/// Cone membership by rank: some nonzero `s` kills `xi`.
fn member_by_rank(blocks: &[Mat], coords: &[Fe], e: &GradedHiggs) -> bool {
    if cone_threshold(e) <= e.curve.p() as i64 * e.l2 {
        return true;
    }
    if blocks.is_empty() {
        return false;
    }
    let f = e.curve.field();
    let cols: Vec<Vec<Fe>> = blocks
        .iter()
        .map(|m| m.apply(coords).expect("dimensions agree"))
        .collect();
    let rows = blocks[0].rows();
    rows == 0 || Mat::from_cols(f, &cols, rows).rank() < cols.len()
}

/// `Ker(phi_s)`: classes whose pullback along `s` splits.
pub fn section_kernel(s: &SectionHom, e: &GradedHiggs) -> Result<Vec<Vec<Fe>>> {
    if s.s.is_zero() {
        return Err(Error::ZeroSection);
    }
    let thr = cone_threshold(e);
    let target = e.curve.p() as i64 * e.l1;
    if s.source != thr || s.target != target {
        return Err(Error::Input(format!("s must map O({thr}) to O({target})")));
    }
    let d = ambient_degree(e);
    Ok(multiplication_map(e.curve.field(), &s.s, d, d + witness_degree(e)).nullspace())
}

/// `dim(Ker phi_s  meet  Ker phi_s')`.
pub fn kernel_intersection_dim(s: &SectionHom, s2: &SectionHom, e: &GradedHiggs) -> Result<usize> {
    let f = e.curve.field();
    let d = ambient_degree(e);
    let m1 = multiplication_map(f, &s.s, d, d + witness_degree(e));
    let m2 = multiplication_map(f, &s2.s, d, d + witness_degree(e));
    Ok(m1.vstack(&m2)?.nullspace().len())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionHit {
    /// Lift parameters, one per extra marked point.
    pub eps: Vec<Fe>,
    pub xi: Vec<Fe>,
    pub witness: ConeWitness,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intersection {
    /// Extension degree at which points were found.
    pub degree: Option<u32>,
    /// Points scanned per extension degree.
    pub scanned: Vec<(u32, usize)>,
    pub hits: Vec<IntersectionHit>,
}

impl Intersection {
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "scanned": self.scanned,
            "hits": self.hits.iter().map(|h| json!({
                "eps": strings(&h.eps), "xi": strings(&h.xi), "witness": h.witness.to_json(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Largest number of points of `A` scanned at one extension degree.
pub const SCAN_LIMIT: usize = 1 << 20;

/// Points of `A` over `F_{p^m}` lying in the cone, for the least `m <= max_m`
/// where any exist. `e` must be defined over the prime field.
pub fn lifts_in_cone(e: &GradedHiggs, max_m: u32) -> Result<Intersection> {
    let p = e.curve.p();
    let mut scanned = Vec::new();
    for m in 1..=max_m {
        let fq = field(p, m)?;
        let eq = e.over(fq);
        let spaces = compute_spaces(&eq)?;
        let blocks = cone_blocks(&eq);
        let k = spaces.directions.len();
        let q = fq.q() as usize;
        let count = q
            .checked_pow(k as u32)
            .filter(|&n| n <= SCAN_LIMIT)
            .ok_or_else(|| {
                Error::Input(format!(
                    "A has {q}^{k} points over F_{p}^{m}, beyond the scan limit"
                ))
            })?;
        let elems = fq.elements();
        let eps_of = |mut i: usize| -> Vec<Fe> {
            (0..k)
                .map(|_| {
                    let x = elems[i % q];
                    i /= q;
                    x
                })
                .collect()
        };
        let found: Vec<Vec<Fe>> = (0..count)
            .into_par_iter()
            .filter_map(|i| {
                let eps = eps_of(i);
                member_by_rank(&blocks, &spaces.point(&eps), &eq).then_some(eps)
            })
            .collect();
        scanned.push((m, count));
        if !found.is_empty() {
            let hits = found
                .into_iter()
                .map(|eps| {
                    let xi = spaces.point(&eps);
                    let witness = cone_member(&xi, &eq)?.ok_or_else(|| {
                        Error::Internal("rank test and sections disagree on membership".into())
                    })?;
                    Ok(IntersectionHit { eps, xi, witness })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Intersection {
                degree: Some(m),
                scanned,
                hits,
            });
        }
    }
    Ok(Intersection {
        degree: None,
        scanned,
        hits: Vec::new(),
    })
}

/// The lift choice attached to an intersection hit.
pub fn hit_choice(e: &GradedHiggs, eps: &[Fe]) -> W2LiftChoice {
    let f = eps.first().map(|x| x.field()).unwrap_or(e.curve.field());
    let pts = e.curve.over(f).extra_points();
    pts.into_iter()
        .zip(eps)
        .fold(W2LiftChoice::zero(), |acc, (l, &x)| acc.with(l, x))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowStep {
    pub input: GradedHiggs,
    pub splitting: (i64, i64),
    /// `None` for the trivial filtration used when the Higgs field vanishes.
    pub filtration: Option<SubLine>,
    pub output: GradedHiggs,
    /// Earlier term isomorphic to the output, with the twist used.
    pub iso_with: Option<(usize, i64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowTrace {
    pub steps: Vec<FlowStep>,
    pub period: Option<usize>,
    /// Why the flow stopped early, if it did.
    pub stop: Option<Error>,
}

impl FlowTrace {
    pub fn to_json(&self) -> Value {
        json!({
            "period": self.period,
            "stop": self.stop.as_ref().map(|e| e.to_string()),
            "steps": self.steps.iter().map(|s| json!({
                "input": s.input.to_json(),
                "splitting": [s.splitting.0, s.splitting.1],
                "filtration_degree": s.filtration.as_ref().map(|f| f.degree),
                "output": s.output.to_json(),
                "iso_with": s.iso_with.map(|(j, n)| json!({"term": j, "twist": n})),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Iterates `C^{-1}`, the maximal destabilizing filtration and grading, and
/// compares each output against all earlier terms. With `up_to_twist`,
/// terms are compared modulo tensoring with `O(n)`.
pub fn flow_run(
    e: &GradedHiggs,
    atlas: &FrobLiftAtlas,
    max_period: usize,
    up_to_twist: bool,
) -> Result<FlowTrace> {
    let mut terms = vec![e.clone()];
    let mut steps = Vec::new();
    for _ in 0..max_period {
        let cur = terms.last().expect("nonempty").clone();
        let hf = inverse_cartier_graded(&cur, atlas)?;
        let splitting = splitting_type(hf.bundle());
        let (filtration, output) = if cur.is_zero() {
            (
                None,
                GradedHiggs::new(
                    &cur.curve,
                    splitting.0,
                    splitting.1,
                    Poly::zero(cur.curve.field()),
                )?,
            )
        } else {
            let sub = match hf.bundle().max_sub_line() {
                Ok(s) => s,
                Err(err) => {
                    return Ok(FlowTrace {
                        steps,
                        period: None,
                        stop: Some(err),
                    })
                }
            };
            let g = grade(&hf, &sub)?;
            if g.is_zero() {
                return Ok(FlowTrace {
                    steps,
                    period: None,
                    stop: Some(Error::FiltrationFlat),
                });
            }
            (Some(sub), g)
        };
        let iso_with = terms.iter().enumerate().find_map(|(j, t)| {
            if up_to_twist {
                higgs_iso_up_to_twist(&output, t).map(|n| (j, n))
            } else {
                higgs_iso_test(&output, t).then_some((j, 0))
            }
        });
        steps.push(FlowStep {
            input: cur,
            splitting,
            filtration,
            output: output.clone(),
            iso_with,
        });
        if let Some((j, _)) = iso_with {
            let period = terms.len() - j;
            return Ok(FlowTrace {
                steps,
                period: Some(period),
                stop: None,
            });
        }
        terms.push(output);
    }
    Ok(FlowTrace {
        steps,
        period: None,
        stop: None,
    })
}

/// Injectivity of `H^1(L^-2) -> H^1(F^*L^-2) -> H^1(L^-2 (x) s^2)`, the
/// Frobenius pullback followed by multiplication with `s^2`.
pub fn ordinary_test(s: &SectionHom, e: &GradedHiggs) -> Result<bool> {
    if s.s.is_zero() {
        return Err(Error::ZeroSection);
    }
    let f = e.curve.field();
    let src = e.l2 - e.l1;
    let d = ambient_degree(e);
    let frob = frobenius_pullback_map(f, src);
    let ws = s.target - s.source;
    let mult = SemilinearMap::linear(multiplication_map(f, &s.s.pow(2), d, d + 2 * ws));
    let comp = mult.compose(&frob)?;
    Ok(comp.rank_kernel_image().rank == LineBundle::new(src).h1_dim())
}

/// The differential of `lift_class` relative to a filtration: `nu` goes to the
/// class of `-F^*(nu) phi^p y^2` in `H^1(Hom(Fil, H/Fil))`, where `y` is the
/// quotient coordinate of the filtration.
pub fn obstruction_differential(
    e: &GradedHiggs,
    hf: &FlatBundle,
    fil: &SubLine,
) -> Result<SemilinearMap> {
    let c = &e.curve;
    let f = c.field();
    let p = c.p() as i64;
    let h = hf.bundle();
    let wy = h.quotient_degree() - fil.degree;
    let y2 = fil.section.y.pow(2);
    let phi_p = e.phi.frob();
    let target_deg = ambient_degree(e) + 2 * wy;
    let cols: Vec<Vec<Fe>> = h1_basis(f, -c.omega_degree())
        .iter()
        .map(|nu| {
            nu.frobenius_pullback()
                .mul_section(&phi_p, p * e.theta_bound())
                .mul_section(&y2, 2 * wy)
                .scale(-f.one())
                .coords()
        })
        .collect();
    Ok(SemilinearMap::new(
        Mat::from_cols(f, &cols, LineBundle::new(target_deg).h1_dim()),
        1,
    ))
}

/// `lift_class(eps + nu) - lift_class(eps) = F^*theta-check(nu g)` for the lift of
/// `lambda`, where `g` is its Kodaira-Spencer direction.
pub fn torsor_identity_holds(e: &GradedHiggs, lambda: Fe, eps: Fe, nu: Fe) -> Result<bool> {
    let c = &e.curve;
    let at = |x: Fe| lift_class(&W2LiftChoice::zero().with(lambda, x), e).map(|r| r.coords());
    let lhs: Vec<Fe> = at(eps + nu)?
        .iter()
        .zip(at(eps)?)
        .map(|(a, b)| *a - b)
        .collect();
    let g: Vec<Fe> = kodaira_spencer_direction(c, lambda)
        .coords()
        .iter()
        .map(|x| *x * nu)
        .collect();
    let rhs = frobenius_image_map(e).apply(&g)?;
    Ok(lhs == rhs)
}

/// Compares `A` and cone verdicts of `e` and `e (x) O(n)` on the given
/// classes. Returns `(same A, same verdicts)`.
pub fn twist_invariance(e: &GradedHiggs, n: i64, classes: &[Vec<Fe>]) -> Result<(bool, bool)> {
    let t = e.twist(n);
    let s0 = compute_spaces(e)?;
    let s1 = compute_spaces(&t)?;
    let same_a = s0.xi_base == s1.xi_base && s0.w_f == s1.w_f && s0.directions == s1.directions;
    let mut same = true;
    for xi in classes {
        let a = cone_member(xi, e)?.is_some();
        let b = cone_member(xi, &t)?.is_some();
        same &= a == b;
    }
    Ok((same_a, same))
}
