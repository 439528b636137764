//! JSON data format for coalgebra and moduli fixtures. Rationals travel as
//! exact `"p/q"` strings; formal parameters are declared in a header and
//! coefficients are term lists over them. Every type invariant is checked
//! at load time with a located diagnostic.

use crate::graded::{BasisIndex, GradedMap, GradedSpace};
use crate::moduli::{Family, ModuliElement};
use crate::ring::{Coefficient, ParameterRing, Rat};
use crate::series::Iv;
use crate::virasoro::{LocalCoordinate, VanishingAt};
use crate::voc::{RowFunctional, VocData};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_rat(s: &str, at: &str) -> Result<Rat, DataError> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n = BigInt::from_str(num)
        .map_err(|_| DataError::SchemaError(format!("{at}: bad numerator in {s:?}")))?;
    let d = BigInt::from_str(den)
        .map_err(|_| DataError::SchemaError(format!("{at}: bad denominator in {s:?}")))?;
    if d.is_zero() {
        return Err(DataError::SchemaError(format!("{at}: zero denominator")));
    }
    Ok(Rat::new(n, d))
}

/// A coefficient literal: either a plain `"p/q"` string or a term list
/// `[[ [e1, e2, ...], "p/q" ], ...]` over the declared parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CoeffLit {
    Constant(String),
    Terms(Vec<(Vec<i32>, String)>),
}

impl CoeffLit {
    fn build(&self, ring: &Arc<ParameterRing>, at: &str) -> Result<Coefficient, DataError> {
        match self {
            CoeffLit::Constant(s) => Ok(Coefficient::from_rat(ring, parse_rat(s, at)?)),
            CoeffLit::Terms(terms) => {
                let mut out = Coefficient::zero(ring);
                for (e, r) in terms {
                    if e.len() != ring.arity() {
                        return Err(DataError::SchemaError(format!(
                            "{at}: exponent vector length {} but {} parameters declared",
                            e.len(),
                            ring.arity()
                        )));
                    }
                    out = out.add(&Coefficient::monomial(ring, e.clone(), parse_rat(r, at)?));
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct Header {
    pub kind: String,
    #[serde(default)]
    pub parameters: Vec<(String, bool)>,
    #[serde(default = "default_degree")]
    pub max_degree: i64,
}

fn default_degree() -> i64 {
    4
}

#[derive(Debug, Deserialize)]
struct VocFile {
    kind: String,
    #[serde(default)]
    parameters: Vec<(String, bool)>,
    #[serde(default = "default_degree")]
    max_degree: i64,
    space: SpaceLit,
    k_window: (i64, i64),
    delta: Vec<DeltaEntry>,
    #[serde(default)]
    covacuum: Vec<(i64, usize, String)>,
    #[serde(default)]
    covirasoro: Vec<(i64, usize, String)>,
    rank: String,
}

#[derive(Debug, Deserialize)]
struct SpaceLit {
    wmin: i64,
    dims: Vec<usize>,
}

/// `[k, in_weight, in_index, out_weights, out_indices, "p/q"]`
#[derive(Debug, Deserialize)]
struct DeltaEntry(i64, i64, usize, Vec<i64>, Vec<usize>, String);

#[derive(Debug, Deserialize)]
struct ModuliFile {
    kind: String,
    family: String,
    arity: usize,
    #[serde(default)]
    parameters: Vec<(String, bool)>,
    #[serde(default = "default_degree")]
    max_degree: i64,
    /// puncture locations in slot order, mirroring the canonical tuple
    #[serde(default)]
    positions: Vec<CoeffLit>,
    /// coordinate data at infinity
    #[serde(default)]
    infinity: Option<Vec<CoeffLit>>,
    /// coordinate data per finite puncture: `[a0, [A1, A2, ...]]`
    #[serde(default)]
    coords: Vec<(CoeffLit, Vec<CoeffLit>)>,
    /// coordinate data at the origin
    #[serde(default)]
    origin: Option<(CoeffLit, Vec<CoeffLit>)>,
}

/// What a data file can contain.
#[derive(Debug)]
pub enum Loaded {
    Voc(VocData),
    Moduli(ModuliElement),
    Graded(GradedMap),
}

/// Ring with the standard suite parameters plus any declared in the file.
fn file_ring(extra: &[(String, bool)], max_degree: i64) -> Result<Arc<ParameterRing>, DataError> {
    let mut params: Vec<(String, bool)> = vec![
        ("scl".into(), true),
        ("bb".into(), false),
        ("eps".into(), false),
        ("z1".into(), true),
        ("z2".into(), true),
    ];
    for (n, inv) in extra {
        if params.iter().any(|(p, _)| p == n) {
            return Err(DataError::SchemaError(format!(
                "parameter {n} shadows a reserved name"
            )));
        }
        params.push((n.clone(), *inv));
    }
    let refs: Vec<(&str, bool)> = params.iter().map(|(n, i)| (n.as_str(), *i)).collect();
    Ok(ParameterRing::new(&refs, max_degree))
}

/// Parse, build, and validate a data file.
pub fn validate_and_load(text: &str) -> Result<Loaded, DataError> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| DataError::SchemaError(format!("header: {e}")))?;
    match header.kind.as_str() {
        "voc" => load_voc(text).map(Loaded::Voc),
        "moduli" => load_moduli(text).map(Loaded::Moduli),
        "graded" => load_graded(text).map(Loaded::Graded),
        other => Err(DataError::SchemaError(format!(
            "unknown kind {other:?}; expected \"voc\", \"moduli\", or \"graded\""
        ))),
    }
}

fn load_voc(text: &str) -> Result<VocData, DataError> {
    let f: VocFile =
        serde_json::from_str(text).map_err(|e| DataError::SchemaError(e.to_string()))?;
    debug_assert_eq!(f.kind, "voc");
    let ring = file_ring(&f.parameters, f.max_degree)?;
    let space = GradedSpace::new(f.space.wmin, f.space.dims.clone());
    let k_window = Iv::new(f.k_window.0, f.k_window.1);
    if k_window.is_empty() {
        return Err(DataError::SchemaError("empty coproduct window".into()));
    }
    let mut delta: BTreeMap<i64, GradedMap> = BTreeMap::new();
    for k in k_window.lo..=k_window.hi {
        delta.insert(k, GradedMap::zero(&space, 2));
    }
    for (n, e) in f.delta.iter().enumerate() {
        let DeltaEntry(k, in_w, in_i, out_ws, out_is, val) = e;
        let at = format!("delta entry {n}");
        if !k_window.contains(*k) {
            return Err(DataError::SchemaError(format!(
                "{at}: component {k} outside the declared window"
            )));
        }
        if out_ws.len() != 2 || out_is.len() != 2 {
            return Err(DataError::SchemaError(format!(
                "{at}: coproduct blocks have two output factors"
            )));
        }
        if space.dim(*in_w) <= *in_i {
            return Err(DataError::InvariantViolation(format!(
                "{at}: input index ({in_w}, {in_i}) outside the space"
            )));
        }
        for (w, i) in out_ws.iter().zip(out_is) {
            if space.dim(*w) <= *i {
                return Err(DataError::InvariantViolation(format!(
                    "{at}: output index ({w}, {i}) outside the space"
                )));
            }
        }
        // the weight law is a load-time invariant
        if out_ws[0] + out_ws[1] != in_w + k + 1 {
            return Err(DataError::InvariantViolation(format!(
                "{at}: weight law violated; output weight {} but input {} with component {}",
                out_ws[0] + out_ws[1],
                in_w,
                k
            )));
        }
        let c = Coefficient::from_rat(&ring, parse_rat(val, &at)?);
        delta.get_mut(k).unwrap().push(
            (*in_w, *in_i),
            vec![(out_ws[0], out_is[0]), (out_ws[1], out_is[1])],
            c,
        );
    }
    let row = |items: &[(i64, usize, String)], what: &str| -> Result<RowFunctional, DataError> {
        let mut out: RowFunctional = BTreeMap::new();
        for (w, i, val) in items {
            if space.dim(*w) <= *i {
                return Err(DataError::InvariantViolation(format!(
                    "{what}: index ({w}, {i}) outside the space"
                )));
            }
            out.insert(
                (*w, *i),
                Coefficient::from_rat(&ring, parse_rat(val, what)?),
            );
        }
        Ok(out)
    };
    let covacuum = row(&f.covacuum, "covacuum")?;
    let covirasoro = row(&f.covirasoro, "covirasoro")?;
    let rank = parse_rat(&f.rank, "rank")?;
    Ok(VocData {
        ring,
        space,
        k_window,
        delta,
        covacuum,
        covirasoro,
        rank,
    })
}

#[derive(Debug, Deserialize)]
struct GradedFile {
    kind: String,
    #[serde(default)]
    parameters: Vec<(String, bool)>,
    #[serde(default = "default_degree")]
    max_degree: i64,
    space: SpaceLit,
    arity: usize,
    /// `[in_weight, in_index, out_weights, out_indices, "p/q"]`
    #[allow(clippy::type_complexity)]
    entries: Vec<(i64, usize, Vec<i64>, Vec<usize>, String)>,
    #[serde(default)]
    in_window: Option<(i64, i64)>,
}

fn load_graded(text: &str) -> Result<GradedMap, DataError> {
    let f: GradedFile =
        serde_json::from_str(text).map_err(|e| DataError::SchemaError(e.to_string()))?;
    debug_assert_eq!(f.kind, "graded");
    let ring = file_ring(&f.parameters, f.max_degree)?;
    let space = GradedSpace::new(f.space.wmin, f.space.dims.clone());
    let mut m = GradedMap::zero(&space, f.arity);
    if let Some((lo, hi)) = f.in_window {
        m.in_window = Iv::new(lo, hi);
    }
    for (n, (in_w, in_i, out_ws, out_is, val)) in f.entries.iter().enumerate() {
        let at = format!("entry {n}");
        if out_ws.len() != f.arity || out_is.len() != f.arity {
            return Err(DataError::SchemaError(format!(
                "{at}: output tuple length must equal the arity {}",
                f.arity
            )));
        }
        if space.dim(*in_w) <= *in_i {
            return Err(DataError::InvariantViolation(format!(
                "{at}: input index ({in_w}, {in_i}) outside the space"
            )));
        }
        for (w, i) in out_ws.iter().zip(out_is) {
            if space.dim(*w) <= *i {
                return Err(DataError::InvariantViolation(format!(
                    "{at}: output index ({w}, {i}) outside the space"
                )));
            }
        }
        let t: Vec<BasisIndex> = out_ws.iter().cloned().zip(out_is.iter().cloned()).collect();
        m.push(
            (*in_w, *in_i),
            t,
            Coefficient::from_rat(&ring, parse_rat(val, &at)?),
        );
    }
    Ok(m)
}

fn load_moduli(text: &str) -> Result<ModuliElement, DataError> {
    let f: ModuliFile =
        serde_json::from_str(text).map_err(|e| DataError::SchemaError(e.to_string()))?;
    debug_assert_eq!(f.kind, "moduli");
    let ring = file_ring(&f.parameters, f.max_degree)?;
    let family = match f.family.as_str() {
        "kstar" => Family::Kstar,
        "k" => Family::K,
        other => {
            return Err(DataError::SchemaError(format!(
                "unknown family {other:?}; expected \"kstar\" or \"k\""
            )))
        }
    };
    let build_coord = |lit: &(CoeffLit, Vec<CoeffLit>),
                       at: &str,
                       vanishing: VanishingAt|
     -> Result<LocalCoordinate, DataError> {
        let a0 = lit.0.build(&ring, at)?;
        let mut a = Vec::new();
        for (i, c) in lit.1.iter().enumerate() {
            a.push(c.build(&ring, &format!("{at} coefficient {}", i + 1))?);
        }
        Ok(LocalCoordinate::new(vanishing, a0, a))
    };
    let positions: Vec<Coefficient> = f
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| p.build(&ring, &format!("position {i}")))
        .collect::<Result<_, _>>()?;
    // distinctness at load time
    for i in 0..positions.len() {
        if positions[i].is_zero() {
            return Err(DataError::InvariantViolation(format!(
                "position {i} coincides with the origin"
            )));
        }
        for j in (i + 1)..positions.len() {
            if positions[i].sub(&positions[j]).is_zero() {
                return Err(DataError::InvariantViolation(format!(
                    "positions {i} and {j} coincide"
                )));
            }
        }
    }
    let finite_tag = match family {
        Family::Kstar => VanishingAt::Infinity,
        Family::K => VanishingAt::Zero,
    };
    let coords: Vec<LocalCoordinate> = f
        .coords
        .iter()
        .enumerate()
        .map(|(i, c)| build_coord(c, &format!("coordinate {i}"), finite_tag))
        .collect::<Result<_, _>>()?;
    if coords.len() != positions.len() {
        return Err(DataError::SchemaError(
            "positions and coordinates must pair up".into(),
        ));
    }
    let a_inf = match &f.infinity {
        None => None,
        Some(lits) => {
            let mut a = Vec::new();
            for (i, c) in lits.iter().enumerate() {
                a.push(c.build(&ring, &format!("infinity coefficient {}", i + 1))?);
            }
            Some(a)
        }
    };
    let origin = match &f.origin {
        None => None,
        Some(o) => Some(build_coord(o, "origin", VanishingAt::Zero)?),
    };
    // arity and presence cross-checks
    match family {
        Family::Kstar => {
            if f.arity == 0 {
                if a_inf.is_some() || !positions.is_empty() {
                    return Err(DataError::InvariantViolation(
                        "arity-0 outgoing element has only the origin coordinate".into(),
                    ));
                }
                let o = origin.as_ref().ok_or_else(|| {
                    DataError::InvariantViolation("missing origin coordinate".into())
                })?;
                if !o.a0.is_one() || !o.a_j(1).is_zero() {
                    return Err(DataError::InvariantViolation(
                        "arity-0 canonical form requires a0 = 1 and A_1 = 0".into(),
                    ));
                }
            } else {
                if a_inf.is_none() || origin.is_none() {
                    return Err(DataError::InvariantViolation(
                        "element needs infinity and origin coordinates".into(),
                    ));
                }
                if positions.len() + 1 != f.arity {
                    return Err(DataError::InvariantViolation(format!(
                        "arity {} needs {} finite positions, found {}",
                        f.arity,
                        f.arity - 1,
                        positions.len()
                    )));
                }
            }
        }
        Family::K => {
            if f.arity == 0 {
                if origin.is_some() || !positions.is_empty() {
                    return Err(DataError::InvariantViolation(
                        "arity-0 incoming element has only the infinity coordinate".into(),
                    ));
                }
                let a = a_inf.as_ref().ok_or_else(|| {
                    DataError::InvariantViolation("missing infinity coordinate".into())
                })?;
                if a.first().is_some_and(|c| !c.is_zero()) {
                    return Err(DataError::InvariantViolation(
                        "arity-0 canonical form requires A_1 = 0".into(),
                    ));
                }
            } else if a_inf.is_none() || origin.is_none() || positions.len() + 1 != f.arity {
                return Err(DataError::InvariantViolation(
                    "element needs infinity, origin, and matching positions".into(),
                ));
            }
        }
    }
    Ok(ModuliElement {
        family,
        arity: f.arity,
        a_inf,
        positions,
        coords,
        origin,
    })
}

/// Serialize a coalgebra fixture (used to ship generated fixtures).
pub fn voc_to_json(v: &VocData) -> serde_json::Value {
    let mut delta = Vec::new();
    for (k, m) in &v.delta {
        for (input, row) in &m.entries {
            for (t, c) in row {
                let r = c
                    .as_rat()
                    .expect("only constant coefficients serialize to fixtures");
                delta.push(serde_json::json!([
                    k,
                    input.0,
                    input.1,
                    [t[0].0, t[1].0],
                    [t[0].1, t[1].1],
                    r.to_string()
                ]));
            }
        }
    }
    let rowv = |row: &RowFunctional| -> Vec<serde_json::Value> {
        row.iter()
            .map(|((w, i), c)| {
                serde_json::json!([w, i, c.as_rat().expect("constant row").to_string()])
            })
            .collect()
    };
    serde_json::json!({
        "kind": "voc",
        "max_degree": v.ring.max_degree(),
        "space": { "wmin": v.space.wmin, "dims": v.space.dims },
        "k_window": [v.k_window.lo, v.k_window.hi],
        "delta": delta,
        "covacuum": rowv(&v.covacuum),
        "covirasoro": rowv(&v.covirasoro),
        "rank": v.rank.to_string(),
    })
}

/// Dual-row helper used by fixture-driven reconstruction checks.
pub fn unit_triple_row(
    ring: &Arc<ParameterRing>,
    b: BasisIndex,
) -> BTreeMap<Vec<BasisIndex>, Coefficient> {
    let mut out = BTreeMap::new();
    out.insert(vec![b, b, b], Coefficient::one(ring));
    out
}
