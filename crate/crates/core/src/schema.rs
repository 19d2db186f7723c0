//! JSON documents for witnesses and reports (schema version 1).
//!
//! Exact coefficients are written as `{"num", "den", "tag"}` and never as
//! floats. Integers that do not fit an `i64` are written as decimal strings.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::approx::{Connective, PolyApproxResult};
use crate::certify::{HalfGraphReport, MarginMode, SFunctionalReport, SearchMethod, SearchResult};
use crate::constructions::{ConstructionError, VcWitness, WitnessFamily, WitnessKind};
use crate::linalg::{BasisLabel, Mode, SparseVector};
use crate::scalar::{parse_rational, ExactScalar, ScaleTag, Value};
use crate::vc::VcReport;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unsupported schema version {0}")]
    UnsupportedSchema(String),
    #[error("missing field {0:?}")]
    Missing(&'static str),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

fn invalid(field: &'static str, reason: impl ToString) -> SchemaError {
    SchemaError::Invalid {
        field,
        reason: reason.to_string(),
    }
}

fn int_json(n: &BigInt) -> Json {
    match n.to_i64() {
        Some(v) => json!(v),
        None => json!(n.to_string()),
    }
}

fn parse_int(v: &Json, field: &'static str) -> Result<BigInt, SchemaError> {
    if let Some(i) = v.as_i64() {
        return Ok(i.into());
    }
    if let Some(u) = v.as_u64() {
        return Ok(u.into());
    }
    v.as_str()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| invalid(field, format!("expected an integer, got {v}")))
}

/// `{"num", "den"}` in lowest terms.
pub fn rational_json(r: &BigRational) -> Json {
    json!({"num": int_json(r.numer()), "den": int_json(r.denom())})
}

/// Accepts `{"num", "den"}`, an integer, or a string such as `"1/3"`.
pub fn parse_rational_json(v: &Json, field: &'static str) -> Result<BigRational, SchemaError> {
    match v {
        Json::Object(o) => {
            let num = parse_int(o.get("num").ok_or(SchemaError::Missing("num"))?, field)?;
            let den = parse_int(o.get("den").ok_or(SchemaError::Missing("den"))?, field)?;
            if den.is_zero() {
                return Err(invalid(field, "zero denominator"));
            }
            Ok(BigRational::new(num, den))
        }
        Json::String(s) => parse_rational(s).map_err(|e| invalid(field, e)),
        Json::Number(_) => {
            if v.is_i64() || v.is_u64() {
                Ok(BigRational::from_integer(parse_int(v, field)?))
            } else {
                let x = v.as_f64().expect("number");
                BigRational::from_float(x).ok_or_else(|| invalid(field, "non-finite"))
            }
        }
        _ => Err(invalid(field, format!("expected a rational, got {v}"))),
    }
}

fn float_json(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn parse_float(v: &Json, field: &'static str) -> Result<f64, SchemaError> {
    match v {
        Json::Number(n) => Ok(n.as_f64().expect("number")),
        Json::String(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            _ => Err(invalid(field, format!("expected a float, got {s:?}"))),
        },
        _ => Err(invalid(field, format!("expected a float, got {v}"))),
    }
}

/// Exact values as `{"num", "den"}`, enclosures as `{"lo", "hi"}`, floats as
/// numbers.
pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Exact(r) => rational_json(r),
        Value::Bounds { lo, hi } => json!({"lo": rational_json(lo), "hi": rational_json(hi)}),
        Value::Float(x) => float_json(*x),
    }
}

pub fn parse_value_json(v: &Json, field: &'static str) -> Result<Value, SchemaError> {
    match v {
        Json::Object(o) if o.contains_key("lo") => Ok(Value::Bounds {
            lo: parse_rational_json(&o["lo"], field)?,
            hi: parse_rational_json(o.get("hi").ok_or(SchemaError::Missing("hi"))?, field)?,
        }),
        Json::Object(_) => Ok(Value::Exact(parse_rational_json(v, field)?)),
        _ => Ok(Value::Float(parse_float(v, field)?)),
    }
}

fn coefficient_json(c: &ExactScalar) -> Json {
    let r = c.cofactor();
    json!({"num": int_json(r.numer()), "den": int_json(r.denom()), "tag": c.tag().to_string()})
}

fn parse_coefficient(v: &Json) -> Result<ExactScalar, SchemaError> {
    let r = parse_rational_json(v, "coefficient")?;
    let tag = v.get("tag").and_then(Json::as_str).unwrap_or("1");
    let (fold, tag) = ScaleTag::parse(tag).map_err(|e| invalid("tag", e))?;
    ExactScalar::new(r * fold, tag.radicand()).map_err(|e| invalid("coefficient", e))
}

pub fn vector_json(v: &SparseVector) -> Json {
    let mut out = Map::new();
    match v {
        SparseVector::Exact(m) => {
            for (k, c) in m {
                out.insert(k.to_string(), coefficient_json(c));
            }
        }
        SparseVector::Float(m) => {
            for (k, c) in m {
                out.insert(k.to_string(), float_json(*c));
            }
        }
    }
    Json::Object(out)
}

/// Parses a label-to-coefficient object in the given mode.
pub fn parse_vector(v: &Json, mode: Mode) -> Result<SparseVector, SchemaError> {
    let obj = v.as_object().ok_or_else(|| invalid("vector", format!("expected an object, got {v}")))?;
    let label = |k: &str| k.parse::<BasisLabel>().map_err(|e| invalid("label", e));
    match mode {
        Mode::Exact => {
            let mut entries = Vec::with_capacity(obj.len());
            for (k, c) in obj {
                if !c.is_object() {
                    return Err(invalid("vector", format!("float coefficient {c} in an exact document")));
                }
                entries.push((label(k)?, parse_coefficient(c)?));
            }
            Ok(SparseVector::from_exact(entries))
        }
        Mode::Float => {
            let mut entries = Vec::with_capacity(obj.len());
            for (k, c) in obj {
                let x = if c.is_object() {
                    parse_coefficient(c)?.to_f64()
                } else {
                    parse_float(c, "coefficient")?
                };
                entries.push((label(k)?, x));
            }
            Ok(SparseVector::from_float(entries))
        }
    }
}

fn header(kind: &str, mode: Mode) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA_VERSION));
    m.insert("kind".into(), json!(kind));
    m.insert("mode".into(), json!(mode.as_str()));
    m
}

fn labels_json(labels: &[BasisLabel]) -> Json {
    Json::Array(labels.iter().map(|l| json!(l.to_string())).collect())
}

pub fn witness_to_json(w: &WitnessFamily) -> Json {
    let mut m = header(w.kind().name(), w.mode());
    match w.kind() {
        WitnessKind::Tree { m: depth } => {
            m.insert("m".into(), json!(depth));
        }
        WitnessKind::Shifted { m: depth, alpha } => {
            m.insert("m".into(), json!(depth));
            if let Some(a) = alpha {
                m.insert("alpha".into(), json!(a));
            }
        }
        WitnessKind::Vc { d, epsilon } => {
            m.insert("d".into(), json!(d));
            m.insert("epsilon".into(), rational_json(epsilon));
        }
        WitnessKind::Custom => {}
    }
    m.insert("basis".into(), labels_json(w.basis()));
    let pairs = w
        .pairs()
        .iter()
        .map(|(x, y)| json!({"x": vector_json(x), "y": vector_json(y)}))
        .collect();
    m.insert("pairs".into(), Json::Array(pairs));
    Json::Object(m)
}

/// VC documents carry `points` and mask-keyed `realizers` in place of
/// `pairs`.
pub fn vc_witness_to_json(w: &VcWitness) -> Json {
    let mut m = header("vc", Mode::Exact);
    m.insert("d".into(), json!(w.d));
    m.insert("epsilon".into(), rational_json(&w.epsilon));
    m.insert("threshold".into(), rational_json(&w.threshold));
    let mut labels: Vec<BasisLabel> = w.points.iter().flat_map(|p| p.labels()).cloned().collect();
    labels.sort();
    labels.dedup();
    m.insert("basis".into(), labels_json(&labels));
    m.insert("points".into(), Json::Array(w.points.iter().map(vector_json).collect()));
    let realizers: Map<String, Json> = w.realizers.iter().map(|(k, y)| (k.to_string(), vector_json(y))).collect();
    m.insert("realizers".into(), Json::Object(realizers));
    Json::Object(m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessDocument {
    Family(WitnessFamily),
    Vc(VcWitness),
}

fn field<'a>(doc: &'a Json, name: &'static str) -> Result<&'a Json, SchemaError> {
    doc.get(name).ok_or(SchemaError::Missing(name))
}

fn parse_u32(doc: &Json, name: &'static str) -> Result<u32, SchemaError> {
    field(doc, name)?
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| invalid(name, "expected a small nonnegative integer"))
}

pub fn parse_witness(doc: &Json) -> Result<WitnessDocument, SchemaError> {
    let version = field(doc, "schema")?;
    if version.as_u64() != Some(SCHEMA_VERSION) {
        return Err(SchemaError::UnsupportedSchema(version.to_string()));
    }
    let mode: Mode = field(doc, "mode")?
        .as_str()
        .ok_or_else(|| invalid("mode", "expected a string"))?
        .parse()
        .map_err(|e| invalid("mode", e))?;
    let kind = field(doc, "kind")?.as_str().ok_or_else(|| invalid("kind", "expected a string"))?;
    let basis: Vec<BasisLabel> = match doc.get("basis") {
        None | Some(Json::Null) => Vec::new(),
        Some(Json::Array(a)) => a
            .iter()
            .map(|l| {
                l.as_str()
                    .ok_or_else(|| invalid("basis", "labels are strings"))?
                    .parse()
                    .map_err(|e| invalid("basis", e))
            })
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(invalid("basis", format!("expected an array, got {other}"))),
    };

    if kind == "vc" && doc.get("points").is_some() {
        let points = field(doc, "points")?
            .as_array()
            .ok_or_else(|| invalid("points", "expected an array"))?
            .iter()
            .map(|p| parse_vector(p, mode))
            .collect::<Result<Vec<_>, _>>()?;
        let mut realizers = BTreeMap::new();
        for (k, y) in field(doc, "realizers")?
            .as_object()
            .ok_or_else(|| invalid("realizers", "expected an object"))?
        {
            let mask: u64 = k.parse().map_err(|_| invalid("realizers", format!("bad mask {k:?}")))?;
            realizers.insert(mask, parse_vector(y, mode)?);
        }
        let d = doc.get("d").and_then(Json::as_u64).map_or(points.len() as u64, |d| d);
        if d != points.len() as u64 {
            return Err(invalid("d", format!("{d} declared, {} points given", points.len())));
        }
        return Ok(WitnessDocument::Vc(VcWitness {
            d: d as u32,
            epsilon: parse_rational_json(field(doc, "epsilon")?, "epsilon")?,
            threshold: parse_rational_json(field(doc, "threshold")?, "threshold")?,
            points,
            realizers,
        }));
    }

    let kind = match kind {
        "tree" => WitnessKind::Tree { m: parse_u32(doc, "m")? },
        "shifted" => WitnessKind::Shifted {
            m: parse_u32(doc, "m")?,
            alpha: match doc.get("alpha") {
                None | Some(Json::Null) => None,
                Some(a) => Some(a.as_f64().ok_or_else(|| invalid("alpha", "expected a number"))?),
            },
        },
        "vc" => WitnessKind::Vc {
            d: parse_u32(doc, "d")?,
            epsilon: parse_rational_json(field(doc, "epsilon")?, "epsilon")?,
        },
        "custom" => WitnessKind::Custom,
        other => return Err(invalid("kind", format!("unknown kind {other:?}"))),
    };
    let pairs = field(doc, "pairs")?
        .as_array()
        .ok_or_else(|| invalid("pairs", "expected an array"))?
        .iter()
        .map(|p| Ok((parse_vector(field(p, "x")?, mode)?, parse_vector(field(p, "y")?, mode)?)))
        .collect::<Result<Vec<_>, SchemaError>>()?;
    Ok(WitnessDocument::Family(WitnessFamily::new(kind, mode, basis, pairs)?))
}

pub fn parse_witness_str(s: &str) -> Result<WitnessDocument, SchemaError> {
    let doc: Json = serde_json::from_str(s).map_err(|e| SchemaError::Json(e.to_string()))?;
    parse_witness(&doc)
}

fn report(kind: &str) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA_VERSION));
    m.insert("type".into(), json!(kind));
    m
}

fn range_json(r: &Option<(Value, Value)>) -> Json {
    match r {
        Some((lo, hi)) => json!([value_json(lo), value_json(hi)]),
        None => Json::Null,
    }
}

/// `margin_min` is written as `"inf"` when there are no pairs to compare.
pub fn halfgraph_report_json(r: &HalfGraphReport) -> Json {
    let mut m = report("halfgraph");
    m.insert("n".into(), json!(r.n));
    m.insert("epsilon".into(), value_json(&r.epsilon));
    m.insert("predicate".into(), r.predicate.to_json());
    m.insert(
        "margin_mode".into(),
        json!(match r.mode {
            MarginMode::Signed => "signed",
            MarginMode::AbsoluteValue => "abs",
        }),
    );
    m.insert("tol".into(), json!(r.tol));
    m.insert(
        "margin_min".into(),
        r.margin_min.as_ref().map_or(json!("inf"), value_json),
    );
    m.insert("argmin".into(), r.argmin.map_or(Json::Null, |(i, j)| json!([i, j])));
    m.insert("forward_range".into(), range_json(&r.forward_range));
    m.insert("backward_range".into(), range_json(&r.backward_range));
    m.insert("exact".into(), json!(r.exact));
    m.insert("is_half_graph".into(), json!(r.is_half_graph));
    Json::Object(m)
}

/// Reads `margin_min` back; `None` stands for `+inf`.
pub fn parse_margin_min(doc: &Json) -> Result<Option<Value>, SchemaError> {
    match field(doc, "margin_min")? {
        Json::String(s) if s == "inf" => Ok(None),
        v => parse_value_json(v, "margin_min").map(Some),
    }
}

pub fn sfunctional_report_json(r: &SFunctionalReport, epsilon: Option<&Value>) -> Json {
    let mut m = report("sfunctional");
    m.insert("n".into(), json!(r.n));
    if let Some(e) = epsilon {
        m.insert("epsilon".into(), value_json(e));
    }
    m.insert("S".into(), value_json(&r.s));
    m.insert("S_float".into(), float_json(r.s_f64()));
    m.insert("pi_n".into(), float_json(r.pi_n));
    m.insert("harmonic_pairs".into(), float_json(r.harmonic_pairs));
    m.insert("harmonic_closed".into(), float_json(r.harmonic_closed));
    m.insert("n_log_n".into(), float_json(r.n_log_n));
    m.insert("epsilon_certified".into(), float_json(r.epsilon_certified));
    m.insert("linearized_S".into(), float_json(r.linearized_s));
    m.insert("x_norm_sq_sum".into(), float_json(r.x_norm_sq_sum));
    m.insert("y_norm_sq_sum".into(), float_json(r.y_norm_sq_sum));
    m.insert("z_norm_sq_sum".into(), float_json(r.z_norm_sq_sum));
    m.insert("cauchy_schwarz_bound".into(), float_json(r.cauchy_schwarz_bound));
    Json::Object(m)
}

pub fn search_report_json(r: &SearchResult, method: SearchMethod) -> Json {
    let mut m = report("search");
    m.insert("n".into(), json!(r.report.n));
    m.insert(
        "method".into(),
        json!(match method {
            SearchMethod::BruteForce => "brute_force",
            SearchMethod::Greedy => "greedy",
        }),
    );
    m.insert("epsilon".into(), value_json(&r.report.epsilon));
    m.insert("predicate".into(), r.report.predicate.to_json());
    m.insert("k".into(), json!(r.k));
    m.insert("ordering".into(), json!(r.ordering));
    m.insert(
        "margin_min".into(),
        r.report.margin_min.as_ref().map_or(json!("inf"), value_json),
    );
    m.insert("verified".into(), json!(r.report.is_half_graph));
    Json::Object(m)
}

pub fn vc_report_json(r: &VcReport) -> Json {
    let mut m = report("vc");
    m.insert("d".into(), json!(r.d));
    m.insert("epsilon".into(), rational_json(&r.epsilon));
    m.insert("threshold".into(), rational_json(&r.threshold));
    m.insert("realized_patterns".into(), json!(r.realized_patterns));
    m.insert("total_patterns".into(), json!(r.total_patterns));
    m.insert("shattered".into(), json!(r.shattered));
    m.insert("upper_bound_dim".into(), json!(r.upper_bound_dim));
    m.insert("upper_bound_margin".into(), float_json(r.upper_bound_margin));
    m.insert("failures".into(), json!(r.failures));
    m.insert("exact".into(), json!(r.exact));
    Json::Object(m)
}

/// The approximation report states both caveats: the estimate is an upper
/// bound for the degree-capped problem and only grid-feasible.
pub fn approx_report_json(r: &PolyApproxResult, g: &Connective) -> Json {
    let mut m = report("approx");
    m.insert("g".into(), json!(g.to_string()));
    m.insert("degree".into(), json!(r.degree));
    m.insert("coefficients".into(), Json::Array(r.coefficients.iter().map(|&c| float_json(c)).collect()));
    m.insert("A_estimate".into(), float_json(r.a_estimate));
    m.insert("eta".into(), float_json(r.eta));
    m.insert("grid_size".into(), json!(r.grid_size));
    m.insert("sup_error_on_grid".into(), float_json(r.sup_error_on_grid));
    m.insert("sup_error_bound".into(), float_json(r.sup_error_bound));
    m.insert("degenerate".into(), json!(r.is_degenerate()));
    m.insert(
        "caveats".into(),
        json!([
            "A_estimate is optimal only among polynomials of the stated degree",
            "the sup-norm constraint is imposed on the grid; sup_error_bound covers [-1,1]"
        ]),
    );
    Json::Object(m)
}
