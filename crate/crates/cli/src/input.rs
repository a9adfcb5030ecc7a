//! Curve files: JSON descriptions of a marked line or a totally degenerate
//! curve, with an optional graded Higgs field for the line.

use anyhow::{anyhow, bail};
use serde_json::Value;

use hdflow::bundles::GradedHiggs;
use hdflow::exactalg::{field, Poly};
use hdflow::logcurve::{MarkedProjLine, Point};
use hdflow::nodal::{build_td, Slot, TDCurve};

pub enum CurveInput {
    Rational {
        curve: MarkedProjLine,
        higgs: GradedHiggs,
    },
    Degenerate(TDCurve),
}

/// A malformed file; reported with exit status 2.
#[derive(Debug)]
pub struct ParseFailure(pub String);

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseFailure {}

fn fail(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ParseFailure(msg.into()))
}

/// Parses the text of a curve file. `p` comes from the command line and must
/// agree with a `"p"` field if one is present.
pub fn parse_curve(text: &str, origin: &str, p: u32) -> anyhow::Result<CurveInput> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        fail(format!(
            "{origin}: line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    if let Some(q) = v.get("p") {
        let q = q
            .as_u64()
            .ok_or_else(|| fail(format!("{origin}: \"p\" must be an integer")))?;
        if q != p as u64 {
            return Err(fail(format!("{origin}: file has p = {q} but --p is {p}")));
        }
    }
    match v.get("type").and_then(Value::as_str) {
        Some("rational") => parse_rational(&v, origin, p),
        Some("td") => parse_td(&v, origin).map(CurveInput::Degenerate),
        Some(other) => Err(fail(format!("{origin}: unknown curve type {other:?}"))),
        None => Err(fail(format!(
            "{origin}: missing \"type\" (\"rational\" or \"td\")"
        ))),
    }
}

fn strings<'a>(v: &'a Value, key: &str, origin: &str) -> anyhow::Result<Vec<&'a str>> {
    let arr = v
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| fail(format!("{origin}: \"{key}\" must be a list")))?;
    arr.iter()
        .map(|x| {
            x.as_str()
                .ok_or_else(|| fail(format!("{origin}: entries of \"{key}\" must be strings")))
        })
        .collect()
}

fn parse_rational(v: &Value, origin: &str, p: u32) -> anyhow::Result<CurveInput> {
    let f = field(p, 1).map_err(|e| fail(format!("{origin}: {e}")))?;
    let pts = strings(v, "marked", origin)?
        .into_iter()
        .map(|s| Point::parse(f, s).map_err(|e| fail(format!("{origin}: marked point {s:?}: {e}"))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let curve = MarkedProjLine::new(f, &pts).map_err(|e| fail(format!("{origin}: {e}")))?;
    let higgs = match v.get("higgs") {
        None => GradedHiggs::maximal(&curve),
        Some(h) => {
            let int = |k: &str| {
                h.get(k)
                    .and_then(Value::as_i64)
                    .ok_or_else(|| fail(format!("{origin}: higgs.{k} must be an integer")))
            };
            let coeffs = strings(h, "phi", origin)?
                .into_iter()
                .map(|s| {
                    f.parse(s)
                        .map_err(|e| fail(format!("{origin}: coefficient {s:?}: {e}")))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            GradedHiggs::new(&curve, int("l1")?, int("l2")?, Poly::new(f, coeffs))
                .map_err(|e| fail(format!("{origin}: {e}")))?
        }
    };
    Ok(CurveInput::Rational { curve, higgs })
}

fn parse_td(v: &Value, origin: &str) -> anyhow::Result<TDCurve> {
    let int = |k: &str| {
        v.get(k)
            .and_then(Value::as_i64)
            .ok_or_else(|| fail(format!("{origin}: \"{k}\" must be an integer")))
    };
    let (g, r) = (int("g")?, int("r")?);
    let edges = v
        .get("edges")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            fail(format!(
                "{origin}: \"edges\" must be a list of vertex pairs"
            ))
        })?
        .iter()
        .map(|e| {
            match e
                .as_array()
                .map(|a| a.iter().map(Value::as_u64).collect::<Vec<_>>())
                .as_deref()
            {
                Some([Some(a), Some(b)]) => Ok((*a as usize, *b as usize)),
                _ => Err(fail(format!(
                    "{origin}: edge {e} is not a pair of vertex indices"
                ))),
            }
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let legs = match v.get("legs") {
        None => Vec::new(),
        Some(l) => l
            .as_array()
            .ok_or_else(|| fail(format!("{origin}: \"legs\" must be a list")))?
            .iter()
            .map(|x| {
                x.as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| fail(format!("{origin}: leg {x} is not a vertex index")))
            })
            .collect::<anyhow::Result<Vec<_>>>()?,
    };
    let labels = match v.get("labels") {
        None => None,
        Some(_) => {
            let all = strings(v, "labels", origin)?
                .into_iter()
                .map(|s| Slot::parse(s).map_err(|e| fail(format!("{origin}: {e}"))))
                .collect::<anyhow::Result<Vec<_>>>()?;
            if all.len() != edges.len() + legs.len() {
                bail!(ParseFailure(format!(
                    "{origin}: {} labels given, expected one per node then one per leg ({})",
                    all.len(),
                    edges.len() + legs.len()
                )));
            }
            Some(all)
        }
    };
    let split = labels.as_ref().map(|l| l.split_at(edges.len()));
    build_td(g, r, &edges, &legs, split).map_err(|e| fail(format!("{origin}: {e}")))
}
