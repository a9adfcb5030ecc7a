//! Totally degenerate curves: trees and cycles of three-pointed lines glued at
//! nodes. Each component is `(P^1; 0, 1, inf)`; a node joins two components
//! at points carrying the same label, so the local coordinates agree.
//!
//! Cohomology of glued sheaves is read off the normalization sequence
//! `0 -> G -> gamma_* gamma^* G -> (+)_nodes k -> 0`.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::bundles::{fmat_mul, FlatBundle, GradedHiggs, SubLine};
use crate::cartier::{inverse_cartier_graded, FrobLiftAtlas};
use crate::error::{Error, Result};
use crate::exactalg::{field, Fe, Field, Mat, Poly, RatFn, SemilinearMap};
use crate::logcurve::{h0_basis, h1_basis, MarkedProjLine, Point};

/// Label of a special point of a component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Zero,
    One,
    Inf,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Zero, Slot::One, Slot::Inf];

    pub fn parse(s: &str) -> Result<Slot> {
        match s.trim() {
            "0" => Ok(Slot::Zero),
            "1" => Ok(Slot::One),
            "inf" | "oo" => Ok(Slot::Inf),
            other => Err(Error::Input(format!(
                "label {other:?} is not one of 0, 1, inf"
            ))),
        }
    }

    pub fn point(self, f: Field) -> Point {
        match self {
            Slot::Zero => Point::Fin(f.zero()),
            Slot::One => Point::Fin(f.one()),
            Slot::Inf => Point::Inf,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::Zero => "0",
            Slot::One => "1",
            Slot::Inf => "inf",
        }
    }
}

/// A totally degenerate `(g, r)` curve as a labeled trivalent graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TDCurve {
    pub g: i64,
    pub r: i64,
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub legs: Vec<usize>,
    pub edge_labels: Vec<Slot>,
    pub leg_labels: Vec<Slot>,
}

/// Validates counts and trivalence and finds (or checks) a labeling with
/// distinct labels at every vertex, one label per node.
pub fn build_td(
    g: i64,
    r: i64,
    edges: &[(usize, usize)],
    legs: &[usize],
    labels: Option<(&[Slot], &[Slot])>,
) -> Result<TDCurve> {
    let nu = 2 * g - 2 + r;
    let delta = 3 * g - 3 + r;
    if g < 0 || r < 0 || nu < 1 {
        return Err(Error::CountMismatch(format!(
            "(g, r) = ({g}, {r}) is not stable"
        )));
    }
    if edges.len() as i64 != delta {
        return Err(Error::CountMismatch(format!(
            "{} nodes, expected {delta}",
            edges.len()
        )));
    }
    if legs.len() as i64 != r {
        return Err(Error::CountMismatch(format!(
            "{} legs, expected {r}",
            legs.len()
        )));
    }
    let n = nu as usize;
    let mut valence = vec![0usize; n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::CountMismatch(format!(
                "node ({a}, {b}) names a vertex beyond {}",
                n - 1
            )));
        }
        if a == b {
            return Err(Error::LabelingNotExcellent(format!(
                "node at vertex {a} joins it to itself"
            )));
        }
        valence[a] += 1;
        valence[b] += 1;
    }
    for &v in legs {
        if v >= n {
            return Err(Error::CountMismatch(format!(
                "leg on vertex {v} beyond {}",
                n - 1
            )));
        }
        valence[v] += 1;
    }
    if let Some(v) = valence.iter().position(|&k| k != 3) {
        return Err(Error::CountMismatch(format!(
            "vertex {v} has {} special points",
            valence[v]
        )));
    }
    let (edge_labels, leg_labels) = match labels {
        Some((el, ll)) => {
            if el.len() != edges.len() || ll.len() != legs.len() {
                return Err(Error::CountMismatch(
                    "one label per node and per leg".into(),
                ));
            }
            (el.to_vec(), ll.to_vec())
        }
        None => find_labeling(n, edges, legs).ok_or_else(|| {
            Error::LabelingNotExcellent("no labeling with distinct labels at each vertex".into())
        })?,
    };
    let curve = TDCurve {
        g,
        r,
        vertices: n,
        edges: edges.to_vec(),
        legs: legs.to_vec(),
        edge_labels,
        leg_labels,
    };
    for v in 0..n {
        let labels = curve.labels_at(v);
        let distinct: BTreeSet<Slot> = labels.iter().copied().collect();
        if distinct.len() != labels.len() {
            return Err(Error::LabelingNotExcellent(format!(
                "labels at vertex {v} repeat"
            )));
        }
    }
    Ok(curve)
}

/// Backtracking over nodes then legs.
fn find_labeling(
    n: usize,
    edges: &[(usize, usize)],
    legs: &[usize],
) -> Option<(Vec<Slot>, Vec<Slot>)> {
    let items: Vec<Vec<usize>> = edges
        .iter()
        .map(|&(a, b)| vec![a, b])
        .chain(legs.iter().map(|&v| vec![v]))
        .collect();
    let mut used = vec![BTreeSet::new(); n];
    let mut out = Vec::with_capacity(items.len());
    fn go(
        i: usize,
        items: &[Vec<usize>],
        used: &mut [BTreeSet<Slot>],
        out: &mut Vec<Slot>,
    ) -> bool {
        if i == items.len() {
            return true;
        }
        for s in Slot::ALL {
            if items[i].iter().all(|&v| !used[v].contains(&s)) {
                for &v in &items[i] {
                    used[v].insert(s);
                }
                out.push(s);
                if go(i + 1, items, used, out) {
                    return true;
                }
                out.pop();
                for &v in &items[i] {
                    used[v].remove(&s);
                }
            }
        }
        false
    }
    go(0, &items, &mut used, &mut out).then(|| {
        let legs_out = out.split_off(edges.len());
        (out, legs_out)
    })
}

impl TDCurve {
    pub fn nu(&self) -> usize {
        self.vertices
    }

    pub fn delta(&self) -> usize {
        self.edges.len()
    }

    pub fn labels_at(&self, v: usize) -> Vec<Slot> {
        let mut out = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if a == v || b == v {
                out.push(self.edge_labels[i]);
            }
        }
        for (i, &w) in self.legs.iter().enumerate() {
            if w == v {
                out.push(self.leg_labels[i]);
            }
        }
        out
    }

    /// Connected components of the dual graph, as a vertex-to-root map.
    fn roots(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.vertices).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        (0..self.vertices).map(|v| find(&mut parent, v)).collect()
    }

    pub fn components(&self) -> usize {
        self.roots().into_iter().collect::<BTreeSet<_>>().len()
    }

    /// Nodes outside a spanning forest; each closes one independent cycle
    /// whose node set is returned.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.vertices;
        let mut tree_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        let mut extra = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                extra.push(i);
            } else {
                parent[ra] = rb;
                tree_adj[a].push((b, i));
                tree_adj[b].push((a, i));
            }
        }
        let path = |from: usize, to: usize| -> Vec<usize> {
            // depth-first search in the forest
            let mut stack = vec![(from, usize::MAX, Vec::new())];
            while let Some((v, prev, edges)) = stack.pop() {
                if v == to {
                    return edges;
                }
                for &(w, e) in &tree_adj[v] {
                    if w != prev {
                        let mut next = edges.clone();
                        next.push(e);
                        stack.push((w, v, next));
                    }
                }
            }
            Vec::new()
        };
        extra
            .into_iter()
            .map(|i| {
                let (a, b) = self.edges[i];
                let mut c = path(a, b);
                c.push(i);
                c
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "type": "td", "g": self.g, "r": self.r,
            "edges": self.edges.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
            "legs": self.legs,
            "labels": self.edge_labels.iter().chain(&self.leg_labels).map(|s| s.name()).collect::<Vec<_>>(),
        })
    }
}

/// The three-pointed component.
pub fn component(f: Field) -> MarkedProjLine {
    MarkedProjLine::with_points(f, &[]).expect("0, 1, inf")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodalDims {
    pub f_star_t: usize,
    pub f_star_t_closed: i64,
    pub w_f: usize,
    pub w_f_closed: i64,
    pub b: usize,
    pub b_closed: i64,
}

impl NodalDims {
    pub fn consistent(&self) -> bool {
        self.f_star_t as i64 == self.f_star_t_closed
            && self.w_f as i64 == self.w_f_closed
            && self.b as i64 == self.b_closed
    }

    pub fn to_json(&self) -> Value {
        json!({
            "F*T": { "computed": self.f_star_t, "closed_form": self.f_star_t_closed },
            "W_F": { "computed": self.w_f, "closed_form": self.w_f_closed },
            "B": { "computed": self.b, "closed_form": self.b_closed },
        })
    }
}

/// `h^1` of a glued line bundle of degree `d` on every component, from
/// `h^1 = delta - rank(restriction to nodes) + sum h^1(components)`.
fn glued_h1(curve: &TDCurve, f: Field, d: i64) -> usize {
    let comp_h0 = h0_basis(f, d);
    let comp_h1 = h1_basis(f, d).len();
    let cols = curve.nu() * comp_h0.len();
    let rank = if cols == 0 || curve.delta() == 0 {
        0
    } else {
        // a section on each component, compared across each node in the
        // shared local coordinate
        let mut rows = Vec::new();
        for (i, &(a, b)) in curve.edges.iter().enumerate() {
            let pt = curve.edge_labels[i].point(f);
            let mut row = vec![f.zero(); cols];
            for (k, s) in comp_h0.iter().enumerate() {
                let val = value_at(s, d, pt);
                row[a * comp_h0.len() + k] = row[a * comp_h0.len() + k] + val;
                row[b * comp_h0.len() + k] = row[b * comp_h0.len() + k] - val;
            }
            rows.push(row);
        }
        Mat::from_rows(f, &rows, cols).rank()
    };
    curve.delta() - rank + curve.nu() * comp_h1
}

fn value_at(s: &Poly, d: i64, pt: Point) -> Fe {
    match pt {
        Point::Fin(a) => s.eval(a),
        Point::Inf => s.coeff(d as usize),
    }
}

/// Dimensions of `H^1(F^*T)`, `W_F = F^*H^1(T)` and `B` on a totally
/// degenerate curve, computed and in closed form.
pub fn h1_dims(curve: &TDCurve, p: u32) -> Result<NodalDims> {
    let f = field(p, 1)?;
    let pi = p as i64;
    let t_deg = 2 - 3;
    let f_star_t = glued_h1(curve, f, pi * t_deg);
    let w_f = glued_h1(curve, f, t_deg);
    // per component the flat classes form a line, parametrized by the Higgs
    // scalar; residues at a node force equal scalars on both sides
    let mut rows = Vec::new();
    for &(a, b) in &curve.edges {
        let mut row = vec![f.zero(); curve.nu()];
        row[a] = f.one();
        row[b] = -f.one();
        rows.push(row);
    }
    let scalars = if rows.is_empty() {
        curve.nu()
    } else {
        Mat::from_rows(f, &rows, curve.nu()).nullspace().len()
    };
    let (g, r) = (curve.g, curve.r);
    Ok(NodalDims {
        f_star_t,
        f_star_t_closed: (2 * pi + 1) * (g - 1) + pi * r,
        w_f,
        w_f_closed: 3 * g - 3 + r,
        b: curve.delta() + scalars,
        b_closed: 3 * g - 2 + r,
    })
}

/// Frobenius on node coordinates: `lambda -> lambda^p` componentwise.
pub fn frobenius_coords(lambda: &[Fe]) -> Vec<Fe> {
    lambda.iter().map(|x| x.frob(1)).collect()
}

/// The component flat bundle `C^{-1}(omega + O, theta_max)` with its maximal
/// sub line, and the values read off at the nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseFlat {
    pub flat: FlatBundle,
    pub sub: SubLine,
    /// `b` at the labels `0, 1, inf`.
    pub b_by_label: [Fe; 3],
    /// `b` at the two branches of each node, in the order of the edge's
    /// endpoints.
    pub b: Vec<[Fe; 2]>,
    /// Number of residue parameter pairs compatible across a node.
    pub compatible_pairs: usize,
}

/// Order and leading coefficient of `g` at `pt` in the local parameter.
fn leading(g: &RatFn, pt: Point) -> Option<(i64, Fe)> {
    if g.is_zero() {
        return None;
    }
    match pt {
        Point::Fin(a) => {
            let (v, c) = g.laurent_at(a, 1);
            Some((v, c[0]))
        }
        Point::Inf => Some((-g.degree_at_inf(), g.numerator().lead())),
    }
}

/// `lim_{t -> pt} num / den`, `None` on a pole or a vanishing denominator.
fn limit_ratio(num: &RatFn, den: &RatFn, pt: Point) -> Option<Fe> {
    let (vd, cd) = leading(den, pt)?;
    let Some((vn, cn)) = leading(num, pt) else {
        return Some(num.field().zero());
    };
    match vn.cmp(&vd) {
        std::cmp::Ordering::Greater => Some(num.field().zero()),
        std::cmp::Ordering::Equal => Some(cn / cd),
        std::cmp::Ordering::Less => None,
    }
}

/// `N_P^e` as a rational function; `N_P = 1/u_P` relates the natural frame
/// `dlog_P` to `Omega`.
fn natural_power(c: &MarkedProjLine, pt: Point, e: i64) -> RatFn {
    if e >= 0 {
        c.natural_factor(pt).pow(e as u32)
    } else {
        c.u(pt).pow((-e) as u32)
    }
}

pub fn base_flat_bundle(curve: &TDCurve, p: u32) -> Result<BaseFlat> {
    let f = field(p, 1)?;
    let c = component(f);
    let e = GradedHiggs::maximal(&c);
    let atlas = FrobLiftAtlas::standard(&c)?;
    let flat = inverse_cartier_graded(&e, &atlas)?;
    let sub = flat.bundle().max_sub_line()?;
    let mut b_by_label = [f.zero(); 3];
    for (i, s) in Slot::ALL.iter().enumerate() {
        // y / (x N^p), the sub line's slope in the natural frames
        let pt = s.point(f);
        let v = sub.section.chart_vector(flat.bundle(), pt);
        let b = limit_ratio(&v[1].mul(&natural_power(&c, pt, -(p as i64))), &v[0], pt)
            .ok_or_else(|| Error::Internal(format!("sub line is vertical at {pt}")))?;
        if b.is_zero() {
            return Err(Error::Internal(format!("b vanishes at {}", s.name())));
        }
        b_by_label[i] = b;
    }
    let idx = |s: Slot| Slot::ALL.iter().position(|&x| x == s).expect("slot");
    // shared local coordinates: both branches see the same label
    let b = curve
        .edge_labels
        .iter()
        .map(|&s| [b_by_label[idx(s)]; 2])
        .collect();
    let compatible_pairs = residue_compatible_pairs(&c, &atlas)?;
    Ok(BaseFlat {
        flat,
        sub,
        b_by_label,
        b,
        compatible_pairs,
    })
}

impl BaseFlat {
    pub fn to_json(&self) -> Value {
        json!({
            "splitting_type": self.flat.bundle().splitting_type(),
            "b_by_label": Slot::ALL.iter().zip(&self.b_by_label)
                .map(|(s, b)| (s.name().to_string(), Value::String(b.to_string())))
                .collect::<serde_json::Map<_, _>>(),
            "b": self.b.iter().map(|b| [b[0].to_string(), b[1].to_string()]).collect::<Vec<_>>(),
            "compatible_residue_pairs": self.compatible_pairs,
        })
    }
}

/// Pairs `(a1, a2)` for which the residues of `C^{-1}(theta_{a1})` and
/// `C^{-1}(theta_{a2})` at a node match: `Res2 = -B Res1 B^{-1}` for every
/// gluing `B = [[1, mu], [0, -1]]` in natural frames.
fn residue_compatible_pairs(c: &MarkedProjLine, atlas: &FrobLiftAtlas) -> Result<usize> {
    let f = c.field();
    let p = f.p() as i64;
    let base = GradedHiggs::maximal(c);
    let pt = Point::Fin(f.zero());
    let nat = c
        .natural_factor(pt)
        .pow(f.p())
        .eval(f.zero())
        .ok_or_else(|| Error::Internal("frame".into()))?;
    let res = |a: Fe| -> Result<Fe> {
        let e = GradedHiggs::new(c, base.l1, base.l2, Poly::constant(a))?;
        let r = inverse_cartier_graded(&e, atlas)?.residue(pt)?;
        Ok(r[0][1] * nat)
    };
    let table: Vec<Fe> = f.elements().into_iter().map(res).collect::<Result<_>>()?;
    for (i, a) in f.elements().into_iter().enumerate() {
        if table[i] != a.pow(p) {
            return Err(Error::Internal(format!(
                "natural residue of theta_{a} is not {a}^p"
            )));
        }
    }
    let mut count = 0;
    for r1 in &table {
        for r2 in &table {
            let res1 = [[f.zero(), *r1], [f.zero(), f.zero()]];
            let res2 = [[f.zero(), *r2], [f.zero(), f.zero()]];
            let ok = f.elements().into_iter().any(|mu| {
                // B is an involution
                let b = [[f.one(), mu], [f.zero(), -f.one()]];
                let conj = fmat_mul(&fmat_mul(&b, &res1), &b);
                let neg = [[-conj[0][0], -conj[0][1]], [-conj[1][0], -conj[1][1]]];
                neg == res2
            });
            if ok {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoTorsionClass {
    /// Sign around each independent cycle.
    pub signs: Vec<i8>,
}

impl TwoTorsionClass {
    pub fn is_trivial(&self) -> bool {
        self.signs.iter().all(|&s| s == 1)
    }

    pub fn square(&self) -> TwoTorsionClass {
        TwoTorsionClass {
            signs: self.signs.iter().map(|s| s * s).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodalIntersection {
    pub mu: Vec<Fe>,
    pub u: Fe,
    /// Gluable vectors found by the exhaustive scan.
    pub scan_solutions: usize,
    pub two_torsion: TwoTorsionClass,
}

impl NodalIntersection {
    pub fn to_json(&self) -> Value {
        json!({
            "mu": self.mu.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "u": self.u.to_string(),
            "scan_solutions": self.scan_solutions,
            "two_torsion": self.two_torsion.signs,
        })
    }
}

/// `B (1, b1) = u (1, b2)` with `B = [[1, mu], [0, -1]]`; returns `u`.
fn gluable(mu: Fe, b: [Fe; 2]) -> Option<Fe> {
    let u = mu * b[0] + mu.field().one();
    (-b[0] == u * b[1] && !u.is_zero()).then_some(u)
}

/// The unique gluing of the maximal sub lines across all nodes.
pub fn solve_unique_intersection(curve: &TDCurve, base: &BaseFlat) -> Result<NodalIntersection> {
    let f = base.flat.curve().field();
    let p = f.p();
    let mut mu = Vec::new();
    let mut u_all = BTreeSet::new();
    for &b in &base.b {
        let sols: Vec<(Fe, Fe)> = f
            .elements()
            .into_iter()
            .filter_map(|m| gluable(m, b).map(|u| (m, u)))
            .collect();
        if sols.len() != 1 {
            return Err(Error::Internal(format!(
                "{} gluings at a node with b = {b:?}",
                sols.len()
            )));
        }
        mu.push(sols[0].0);
        u_all.insert(sols[0].1);
    }
    let u = match u_all.len() {
        0 => -f.one(),
        1 => *u_all.iter().next().expect("one element"),
        _ => {
            return Err(Error::Internal(
                "nodes disagree on the gluing scalar".into(),
            ))
        }
    };
    let delta = curve.delta();
    let total = (p as usize).pow(delta as u32);
    let elems = f.elements();
    let scan_solutions = (0..total)
        .filter(|&i| {
            let mut i = i;
            base.b.iter().all(|&b| {
                let m = elems[i % p as usize];
                i /= p as usize;
                gluable(m, b).is_some()
            })
        })
        .count();
    // compare with omega^k, k = (p+1)/2, whose node gluing is (-1)^k
    let k = (p as i64 + 1) / 2;
    let omega_sign = if k % 2 == 0 { f.one() } else { -f.one() };
    let edge_sign: i8 = if u == omega_sign { 1 } else { -1 };
    let signs = curve
        .cycles()
        .iter()
        .map(|c| if c.len() % 2 == 0 { 1 } else { edge_sign })
        .collect();
    Ok(NodalIntersection {
        mu,
        u,
        scan_solutions,
        two_torsion: TwoTorsionClass { signs },
    })
}

/// `s(P)` at a special point of a component: the witness section in natural
/// frames, `y N_P^{k-p}` with `k = (p+1)/2`.
pub fn witness_value(base: &BaseFlat, slot: Slot) -> Result<Fe> {
    let c = base.flat.curve();
    let f = c.field();
    let p = f.p() as i64;
    let k = (p + 1) / 2;
    let pt = slot.point(f);
    let v = base.sub.section.chart_vector(base.flat.bundle(), pt);
    limit_ratio(&v[1].mul(&natural_power(c, pt, k - p)), &RatFn::one(f), pt)
        .ok_or_else(|| Error::Internal(format!("witness has a pole at {pt}")))
}

/// `s(P_j)` at each node.
pub fn node_s_values(curve: &TDCurve, base: &BaseFlat) -> Result<Vec<Fe>> {
    curve
        .edge_labels
        .iter()
        .map(|&s| witness_value(base, s))
        .collect()
}

/// The composite `k^delta -> k^delta`, `lambda_j -> s(P_j)^2 lambda_j^p`.
pub fn nodal_ordinary_map(f: Field, s_values: &[Fe]) -> SemilinearMap {
    let n = s_values.len();
    let mut m = Mat::zeros(f, n, n);
    for (i, s) in s_values.iter().enumerate() {
        m.set(i, i, *s * *s);
    }
    SemilinearMap::new(m, 1)
}

/// Injectivity of the ordinariness composite.
pub fn nodal_ordinary(map: &SemilinearMap) -> bool {
    map.rank_kernel_image().rank == map.matrix.cols()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn theta() -> TDCurve {
        build_td(2, 0, &[(0, 1), (0, 1), (0, 1)], &[], None).unwrap()
    }

    fn genus_one_two_legs() -> TDCurve {
        build_td(1, 2, &[(0, 1), (0, 1)], &[0, 1], None).unwrap()
    }

    fn curves() -> Vec<TDCurve> {
        vec![
            build_td(0, 3, &[], &[0, 0, 0], None).unwrap(),
            build_td(0, 4, &[(0, 1)], &[0, 0, 1, 1], None).unwrap(),
            build_td(0, 5, &[(0, 1), (1, 2)], &[0, 0, 1, 2, 2], None).unwrap(),
            genus_one_two_legs(),
            theta(),
            // genus two dumbbell is not excellent, genus three K4 is
            build_td(
                3,
                0,
                &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
                &[],
                None,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn labels_distinct_and_shared_per_node() {
        for c in curves() {
            for v in 0..c.nu() {
                let l = c.labels_at(v);
                assert_eq!(l.len(), 3);
                assert_eq!(l.iter().collect::<BTreeSet<_>>().len(), 3);
            }
        }
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(matches!(
            build_td(1, 1, &[(0, 0)], &[0], None),
            Err(Error::LabelingNotExcellent(_))
        ));
        assert!(matches!(
            build_td(2, 0, &[(0, 1), (0, 1)], &[], None),
            Err(Error::CountMismatch(_))
        ));
        assert!(matches!(
            build_td(0, 4, &[(0, 1)], &[0, 0, 0, 1], None),
            Err(Error::CountMismatch(_))
        ));
        let same = [Slot::Zero, Slot::Zero, Slot::One];
        assert!(matches!(
            build_td(2, 0, &[(0, 1), (0, 1), (0, 1)], &[], Some((&same, &[]))),
            Err(Error::LabelingNotExcellent(_))
        ));
        // a tree of two genus one pieces has a bridge forcing two equal labels
        assert!(build_td(2, 0, &[(0, 0), (1, 1), (0, 1)], &[], None).is_err());
    }

    #[test]
    fn dims_match_closed_forms() {
        for p in [3, 5, 7] {
            for c in curves() {
                let d = h1_dims(&c, p).unwrap();
                assert!(d.consistent(), "{:?} {d:?}", c.to_json());
            }
        }
        let d = h1_dims(&theta(), 5).unwrap();
        assert_eq!((d.f_star_t, d.w_f, d.b), (11, 3, 4));
    }

    #[test]
    fn frobenius_on_node_coordinates_is_injective() {
        let f = field(5, 1).unwrap();
        let mut seen = BTreeSet::new();
        for a in f.elements() {
            for b in f.elements() {
                assert!(seen.insert(frobenius_coords(&[a, b])));
            }
        }
    }

    #[test]
    fn gluing_by_brute_force() {
        let f = field(5, 1).unwrap();
        for (b, mu) in [(1, 3), (2, 4)] {
            let b = f.int(b);
            let sols: Vec<Fe> = f
                .elements()
                .into_iter()
                .filter(|&m| gluable(m, [b, b]).is_some())
                .collect();
            assert_eq!(sols, vec![f.int(mu)]);
            assert_eq!(gluable(f.int(mu), [b, b]), Some(-f.one()));
        }
    }

    #[test]
    fn frobenius_coords_injective_over_extension() {
        let f = field(5, 2).unwrap();
        let mut seen = BTreeSet::new();
        for a in f.elements() {
            for b in f.elements() {
                let img = frobenius_coords(&[a, b]);
                assert_eq!(img[0], a.pow(5));
                assert!(seen.insert(img));
            }
        }
        assert_eq!(frobenius_coords(&[f.one(); 3]), vec![f.one(); 3]);
    }

    #[test]
    fn flat_extensions_differ_by_scalar() {
        // C^{-1}(theta_a) on a component: same bundle, classes a^p apart
        for p in [3, 5] {
            let f = field(p, 1).unwrap();
            let c = component(f);
            let atlas = FrobLiftAtlas::standard(&c).unwrap();
            let base = GradedHiggs::maximal(&c);
            let one = inverse_cartier_graded(&base, &atlas).unwrap();
            let ref_coords = one.bundle().class().coords();
            for a in f.elements().into_iter().filter(|a| !a.is_zero()) {
                let e = GradedHiggs::new(&c, base.l1, base.l2, Poly::constant(a)).unwrap();
                let hf = inverse_cartier_graded(&e, &atlas).unwrap();
                assert_eq!(hf.bundle().splitting_type(), one.bundle().splitting_type());
                let coords = hf.bundle().class().coords();
                // solve coords = lambda * ref_coords
                let k = ref_coords.iter().position(|x| !x.is_zero()).unwrap();
                let lambda = coords[k] / ref_coords[k];
                assert!(coords
                    .iter()
                    .zip(&ref_coords)
                    .all(|(x, y)| *x == lambda * *y));
                assert_eq!(lambda, a.pow(p as i64));
            }
        }
    }

    #[test]
    fn base_bundle_values() {
        for p in [3, 5, 7] {
            let c = theta();
            let base = base_flat_bundle(&c, p).unwrap();
            assert!(base.b_by_label.iter().all(|b| !b.is_zero()));
            assert_eq!(
                base.flat.bundle().splitting_type(),
                ((p as i64 + 1) / 2, (p as i64 - 1) / 2)
            );
            assert_eq!(base.compatible_pairs, p as usize);
        }
    }

    #[test]
    fn unique_gluing_and_two_torsion() {
        for p in [3, 5, 7] {
            for c in curves() {
                let base = base_flat_bundle(&c, p).unwrap();
                let sol = solve_unique_intersection(&c, &base).unwrap();
                let f = base.flat.curve().field();
                assert_eq!(sol.scan_solutions, 1);
                assert_eq!(sol.u, -f.one());
                for (m, b) in sol.mu.iter().zip(&base.b) {
                    assert_eq!(*m, -f.int(2) / b[0]);
                }
                assert!(sol.two_torsion.square().is_trivial());
                if p.div_ceil(2) % 2 == 1 {
                    assert!(sol.two_torsion.is_trivial());
                }
            }
        }
    }

    #[test]
    fn ordinary_at_nodes() {
        for p in [3, 5, 7] {
            let c = theta();
            let base = base_flat_bundle(&c, p).unwrap();
            let s = node_s_values(&c, &base).unwrap();
            assert!(s.iter().all(|x| !x.is_zero()));
            let f = base.flat.curve().field();
            assert!(nodal_ordinary(&nodal_ordinary_map(f, &s)));
            assert!(!nodal_ordinary(&nodal_ordinary_map(
                f,
                &vec![f.zero(); s.len()]
            )));
        }
    }

    proptest! {
        #[test]
        fn frobenius_coords_additive(a in proptest::collection::vec(0i64..7, 3), b in proptest::collection::vec(0i64..7, 3)) {
            let f = field(7, 1).unwrap();
            let x: Vec<Fe> = a.iter().map(|&v| f.int(v)).collect();
            let y: Vec<Fe> = b.iter().map(|&v| f.int(v)).collect();
            let sum: Vec<Fe> = x.iter().zip(&y).map(|(u, v)| *u + *v).collect();
            let lhs = frobenius_coords(&sum);
            let rhs: Vec<Fe> = frobenius_coords(&x).iter().zip(frobenius_coords(&y)).map(|(u, v)| *u + v).collect();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn relabeling_keeps_dims(perm in 0usize..6, p in prop_oneof![Just(3u32), Just(5), Just(7)]) {
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let c = theta();
            let labels: Vec<Slot> = c.edge_labels.iter()
                .map(|s| Slot::ALL[perms[perm][Slot::ALL.iter().position(|x| x == s).unwrap()]])
                .collect();
            let c2 = build_td(2, 0, &c.edges, &[], Some((&labels, &[]))).unwrap();
            prop_assert_eq!(h1_dims(&c, p).unwrap(), h1_dims(&c2, p).unwrap());
            let base = base_flat_bundle(&c2, p).unwrap();
            prop_assert_eq!(solve_unique_intersection(&c2, &base).unwrap().scan_solutions, 1);
        }
    }
}
