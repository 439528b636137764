//! Graded vector spaces with finite-dimensional homogeneous components,
//! maps from the space into tensor powers of its completion, the
//! contraction with an intermediate-weight bookkeeping variable, and the
//! symmetric-group action on output factors.

use crate::ring::{Coefficient, ParameterRing};
use crate::series::Iv;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum GradedError {
    #[error("window-limited: {0}")]
    WindowLimited(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Weight-graded space with explicitly listed dimensions. Weights below
/// `wmin` are zero (the truncation floor); weights above `wmax` are zero as
/// well at desk scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedSpace {
    pub wmin: i64,
    pub wmax: i64,
    pub dims: Vec<usize>,
}

impl GradedSpace {
    pub fn new(wmin: i64, dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty());
        GradedSpace {
            wmin,
            wmax: wmin + dims.len() as i64 - 1,
            dims,
        }
    }

    pub fn dim(&self, w: i64) -> usize {
        if w < self.wmin || w > self.wmax {
            0
        } else {
            self.dims[(w - self.wmin) as usize]
        }
    }

    pub fn weights(&self) -> impl Iterator<Item = i64> + '_ {
        (self.wmin..=self.wmax).filter(|w| self.dim(*w) > 0)
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }
}

/// Basis vector index: weight and position within the homogeneous component.
pub type BasisIndex = (i64, usize);

/// Sparse linear map from the space into the n-th tensor power. Blocks are
/// only known for input weights inside `in_window`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedMap {
    pub space: GradedSpace,
    pub arity: usize,
    pub in_window: Iv,
    /// for each input basis vector, the image as a sparse tensor
    pub entries: BTreeMap<BasisIndex, Vec<(Vec<BasisIndex>, Coefficient)>>,
    /// note recording which expansion region produced the entries
    pub expansion_note: Option<String>,
}

impl GradedMap {
    pub fn zero(space: &GradedSpace, arity: usize) -> Self {
        GradedMap {
            space: space.clone(),
            arity,
            in_window: Iv::new(space.wmin, space.wmax),
            entries: BTreeMap::new(),
            expansion_note: None,
        }
    }

    /// The identity map (arity 1).
    pub fn identity(space: &GradedSpace, ring: &Arc<ParameterRing>) -> Self {
        let mut m = GradedMap::zero(space, 1);
        for w in space.wmin..=space.wmax {
            for i in 0..space.dim(w) {
                m.push((w, i), vec![(w, i)], Coefficient::one(ring));
            }
        }
        m
    }

    pub fn push(&mut self, input: BasisIndex, output: Vec<BasisIndex>, c: Coefficient) {
        if c.is_zero() {
            return;
        }
        assert_eq!(output.len(), self.arity);
        debug_assert!(self.space.dim(input.0) > input.1);
        for o in &output {
            debug_assert!(self.space.dim(o.0) > o.1, "bad output index {o:?}");
        }
        let row = self.entries.entry(input).or_default();
        for (t, v) in row.iter_mut() {
            if *t == output {
                *v = v.add(&c);
                if v.is_zero() {
                    row.retain(|(_, v)| !v.is_zero());
                }
                return;
            }
        }
        row.push((output, c));
    }

    pub fn row(&self, input: &BasisIndex) -> &[(Vec<BasisIndex>, Coefficient)] {
        self.entries.get(input).map_or(&[], |r| r.as_slice())
    }

    pub fn is_zero(&self) -> bool {
        self.entries
            .values()
            .all(|r| r.iter().all(|(_, c)| c.is_zero()))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.arity, other.arity);
        let mut out = self.clone();
        out.in_window = self.in_window.inter(&other.in_window);
        for (input, row) in &other.entries {
            for (t, c) in row {
                out.push(*input, t.clone(), c.clone());
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for row in out.entries.values_mut() {
            for (_, c) in row.iter_mut() {
                *c = c.neg();
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Coefficient) -> Self {
        let mut out = self.clone();
        for row in out.entries.values_mut() {
            for (_, c) in row.iter_mut() {
                *c = c.mul(k);
            }
            row.retain(|(_, c)| !c.is_zero());
        }
        out
    }

    /// Compare on the common input window; mismatch returns a witness.
    pub fn compare(&self, other: &Self) -> Result<(), String> {
        let win = self.in_window.inter(&other.in_window);
        let mut keys: Vec<BasisIndex> = self.entries.keys().cloned().collect();
        for k in other.entries.keys() {
            if !keys.contains(k) {
                keys.push(*k);
            }
        }
        for input in keys {
            if !win.contains(input.0) {
                continue;
            }
            let mut diff: BTreeMap<Vec<BasisIndex>, Coefficient> = BTreeMap::new();
            for (t, c) in self.row(&input) {
                diff.entry(t.clone())
                    .and_modify(|x| *x = x.add(c))
                    .or_insert_with(|| c.clone());
            }
            for (t, c) in other.row(&input) {
                diff.entry(t.clone())
                    .and_modify(|x| *x = x.sub(c))
                    .or_insert_with(|| c.neg());
            }
            for (t, c) in diff {
                if !c.is_zero() {
                    return Err(format!("input {input:?}, output {t:?}: difference {c}"));
                }
            }
        }
        Ok(())
    }

    /// Act by a permutation on the output tensor factors:
    /// slot r of the image receives the old factor at slot sigma^{-1}(r).
    pub fn sym_act(&self, sigma: &[usize]) -> Self {
        assert_eq!(sigma.len(), self.arity, "permutation arity mismatch");
        let mut out = GradedMap::zero(&self.space, self.arity);
        out.in_window = self.in_window;
        out.expansion_note = self.expansion_note.clone();
        for (input, row) in &self.entries {
            for (t, c) in row {
                let mut t2 = t.clone();
                for (i, &si) in sigma.iter().enumerate() {
                    t2[si - 1] = t[i];
                }
                out.push(*input, t2, c.clone());
            }
        }
        out
    }
}

/// The transposition on arity-2 maps.
pub fn transposition() -> Vec<usize> {
    vec![2, 1]
}

/// Result of a contraction before evaluation: slices keyed by the
/// intermediate weight (the exponent of the bookkeeping variable).
#[derive(Debug, Clone)]
pub struct TContraction {
    pub arity: usize,
    pub terms: BTreeMap<i64, GradedMap>,
    /// intermediate weights whose slice is fully determined
    pub tracked: Iv,
    space: GradedSpace,
}

impl TContraction {
    pub fn slice(&self, k: i64) -> Option<&GradedMap> {
        self.terms.get(&k)
    }
}

/// Contract `f` into slot `i` of `g`'s output, inserting the resolution of
/// the identity at the intermediate weight; the intermediate weight is
/// recorded as the exponent of the bookkeeping variable.
pub fn t_contract(f: &GradedMap, g: &GradedMap, i: usize) -> Result<TContraction, GradedError> {
    if f.space != g.space {
        return Err(GradedError::ShapeMismatch("different graded spaces".into()));
    }
    if i < 1 || i > g.arity {
        return Err(GradedError::ShapeMismatch(format!("slot {i} out of range")));
    }
    let space = f.space.clone();
    let arity = f.arity + g.arity - 1;
    let mut terms: BTreeMap<i64, GradedMap> = BTreeMap::new();
    for (input, row) in &g.entries {
        for (t, cg) in row {
            let mid = t[i - 1];
            if !f.in_window.contains(mid.0) {
                // this slice is not determined; handled by `tracked`
                continue;
            }
            for (ft, cf) in f.row(&mid) {
                let mut out_t: Vec<BasisIndex> = Vec::with_capacity(arity);
                out_t.extend_from_slice(&t[..i - 1]);
                out_t.extend_from_slice(ft);
                out_t.extend_from_slice(&t[i..]);
                terms
                    .entry(mid.0)
                    .or_insert_with(|| {
                        let mut m = GradedMap::zero(&space, arity);
                        m.in_window = g.in_window;
                        m
                    })
                    .push(*input, out_t, cg.mul(cf));
            }
        }
    }
    let tracked = f.in_window.inter(&Iv::new(space.wmin, space.wmax));
    Ok(TContraction {
        arity,
        terms,
        tracked,
        space,
    })
}

/// Evaluate the bookkeeping variable at 1. Slices at untracked intermediate
/// weights must be provably absent; otherwise the sum is window-limited.
pub fn contract_at_one(ct: &TContraction, g_window: Iv) -> Result<GradedMap, GradedError> {
    let full = Iv::new(ct.space.wmin, ct.space.wmax);
    if ct.tracked.lo > full.lo || ct.tracked.hi < full.hi {
        // some intermediate weights were untracked; the contraction is only
        // complete if nothing can land there, which is not visible from here
        return Err(GradedError::WindowLimited(format!(
            "intermediate weights outside [{}, {}] are untracked",
            ct.tracked.lo, ct.tracked.hi
        )));
    }
    let mut out = GradedMap::zero(&ct.space, ct.arity);
    out.in_window = g_window;
    for m in ct.terms.values() {
        out = out.add(m);
        out.in_window = g_window;
    }
    Ok(out)
}

/// Double contraction slices keyed by the two bookkeeping exponents
/// `(t1, t2)`.
#[derive(Debug, Clone)]
pub struct TContraction2 {
    pub arity: usize,
    pub terms: BTreeMap<(i64, i64), GradedMap>,
    pub tracked1: Iv,
    pub tracked2: Iv,
}

impl TContraction2 {
    /// Compare on commonly tracked cells; mismatch returns a witness.
    pub fn compare(&self, other: &Self) -> Result<(), String> {
        if self.arity != other.arity {
            return Err("arity mismatch".into());
        }
        let t1 = self.tracked1.inter(&other.tracked1);
        let t2 = self.tracked2.inter(&other.tracked2);
        let mut keys: Vec<(i64, i64)> = self.terms.keys().cloned().collect();
        for k in other.terms.keys() {
            if !keys.contains(k) {
                keys.push(*k);
            }
        }
        for key in keys {
            if !t1.contains(key.0) || !t2.contains(key.1) {
                continue;
            }
            let zero_space = self
                .terms
                .values()
                .next()
                .or_else(|| other.terms.values().next())
                .map(|m| m.space.clone());
            let empty = zero_space.as_ref().map(|s| GradedMap::zero(s, self.arity));
            let a = self
                .terms
                .get(&key)
                .or(empty.as_ref())
                .ok_or("no slices to compare")?;
            let b = other
                .terms
                .get(&key)
                .or(empty.as_ref())
                .ok_or("no slices to compare")?;
            if let Err(w) = a.compare(b) {
                return Err(format!("t-exponents {key:?}: {w}"));
            }
        }
        Ok(())
    }
}

/// `(f1 contracted into slot i of [inner])_{t2}` where `inner` is already a
/// single contraction in `t1`.
pub fn t_contract_outer(
    f1: &GradedMap,
    inner: &TContraction,
    i: usize,
) -> Result<TContraction2, GradedError> {
    let mut terms: BTreeMap<(i64, i64), GradedMap> = BTreeMap::new();
    let mut tracked2 = Iv::new(inner.space.wmin, inner.space.wmax);
    for (k1, slice) in &inner.terms {
        let c = t_contract(f1, slice, i)?;
        tracked2 = tracked2.inter(&c.tracked);
        for (k2, m) in c.terms {
            terms
                .entry((*k1, k2))
                .and_modify(|x| *x = x.add(&m))
                .or_insert(m);
        }
    }
    // when inner has no slices at all, the tracking is still that of f1
    if inner.terms.is_empty() {
        tracked2 = f1
            .in_window
            .inter(&Iv::new(inner.space.wmin, inner.space.wmax));
    }
    Ok(TContraction2 {
        arity: f1.arity + inner.arity - 1,
        terms,
        tracked1: inner.tracked,
        tracked2,
    })
}

/// `([inner] contracted into slot j of f3)_{t1}` where `inner` is already a
/// single contraction in `t2`.
pub fn t_contract_inner(
    inner: &TContraction,
    f3: &GradedMap,
    j: usize,
) -> Result<TContraction2, GradedError> {
    let mut terms: BTreeMap<(i64, i64), GradedMap> = BTreeMap::new();
    let mut tracked1 = Iv::new(inner.space.wmin, inner.space.wmax);
    let mut any = false;
    for (k2, slice) in &inner.terms {
        let c = t_contract(slice, f3, j)?;
        tracked1 = tracked1.inter(&c.tracked);
        any = true;
        for (k1, m) in c.terms {
            terms
                .entry((k1, *k2))
                .and_modify(|x| *x = x.add(&m))
                .or_insert(m);
        }
    }
    if !any {
        tracked1 = Iv::new(inner.space.wmin, inner.space.wmax);
    }
    Ok(TContraction2 {
        arity: inner.arity + f3.arity - 1,
        terms,
        tracked1,
        tracked2: inner.tracked,
    })
}

/// Which of the three contraction-associativity cases applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssocCase {
    /// `i < j`
    Disjoint,
    /// `j <= i < j + m`
    Nested,
    /// `i >= j + m`
    DisjointAbove,
}

pub fn assoc_case(i: usize, j: usize, m: usize) -> AssocCase {
    if i < j {
        AssocCase::Disjoint
    } else if i < j + m {
        AssocCase::Nested
    } else {
        AssocCase::DisjointAbove
    }
}

#[derive(Debug, Clone)]
pub struct ContractionLawReport {
    pub case: AssocCase,
    pub ok: bool,
    pub witness: Option<String>,
}

/// Check the applicable associativity case for
/// `(f1 into slot i of (f2 into slot j of f3))` as an identity of double
/// series in the two bookkeeping variables.
pub fn verify_contraction_associativity(
    f1: &GradedMap,
    f2: &GradedMap,
    f3: &GradedMap,
    i: usize,
    j: usize,
) -> Result<ContractionLawReport, GradedError> {
    let ell = f1.arity;
    let m = f2.arity;
    let case = assoc_case(i, j, m);
    let inner = t_contract(f2, f3, j)?; // (f2 1*_{-j} f3)_{t1}
    let lhs = t_contract_outer(f1, &inner, i)?;
    let rhs = match case {
        AssocCase::Disjoint => {
            // (f2 1*_{-j-ell+1} (f1 1*_{-i} f3)_{t2})_{t1}
            let inner2 = t_contract(f1, f3, i)?; // t2
            let r = t_contract_outer(f2, &inner2, j + ell - 1)?;
            // r has (t1', t2') = (inner2's key, f2's key): keys come out as
            // (k1, k2) = (t2, t1): swap to align
            TContraction2 {
                arity: r.arity,
                terms: r.terms.into_iter().map(|((a, b), m)| ((b, a), m)).collect(),
                tracked1: r.tracked2,
                tracked2: r.tracked1,
            }
        }
        AssocCase::Nested => {
            // ((f1 1*_{-i+j-1} f2)_{t2} 1*_{-j} f3)_{t1}
            let inner2 = t_contract(f1, f2, i - j + 1)?; // t2
            t_contract_inner(&inner2, f3, j)?
        }
        AssocCase::DisjointAbove => {
            // (f2 1*_{-j} (f1 1*_{-i+m-1} f3)_{t2})_{t1}
            let inner2 = t_contract(f1, f3, i - m + 1)?; // t2
            let r = t_contract_outer(f2, &inner2, j)?;
            TContraction2 {
                arity: r.arity,
                terms: r.terms.into_iter().map(|((a, b), m)| ((b, a), m)).collect(),
                tracked1: r.tracked2,
                tracked2: r.tracked1,
            }
        }
    };
    match lhs.compare(&rhs) {
        Ok(()) => Ok(ContractionLawReport {
            case,
            ok: true,
            witness: None,
        }),
        Err(w) => Ok(ContractionLawReport {
            case,
            ok: false,
            witness: Some(w),
        }),
    }
}

/// The transposition compatibility for arity-2 maps:
/// `f1 1*_{-1} f2 = (Id x T)(T x Id)(f1 1*_{-2} (T f2))` as single-variable
/// series in the bookkeeping exponent.
pub fn verify_contraction_transposition(
    f1: &GradedMap,
    f2: &GradedMap,
) -> Result<ContractionLawReport, GradedError> {
    if f1.arity != 2 || f2.arity != 2 {
        return Err(GradedError::ShapeMismatch(
            "transposition law needs arity-2 maps".into(),
        ));
    }
    let lhs = t_contract(f1, f2, 1)?;
    let tf2 = f2.sym_act(&transposition());
    let pre = t_contract(f1, &tf2, 2)?;
    // apply (Id x T)(T x Id) to every slice: first swap slots 1,2 then 2,3
    let mut rhs_terms = BTreeMap::new();
    for (k, m) in &pre.terms {
        let swapped = m.sym_act(&[2, 1, 3]).sym_act(&[1, 3, 2]);
        rhs_terms.insert(*k, swapped);
    }
    let rhs = TContraction {
        arity: pre.arity,
        terms: rhs_terms,
        tracked: pre.tracked,
        space: pre.space.clone(),
    };
    // compare slicewise on the common tracked range
    let tracked = lhs.tracked.inter(&rhs.tracked);
    let mut keys: Vec<i64> = lhs.terms.keys().cloned().collect();
    for k in rhs.terms.keys() {
        if !keys.contains(k) {
            keys.push(*k);
        }
    }
    for k in keys {
        if !tracked.contains(k) {
            continue;
        }
        let empty = GradedMap::zero(&rhs.space, lhs.arity);
        let a = lhs.terms.get(&k).unwrap_or(&empty);
        let b = rhs.terms.get(&k).unwrap_or(&empty);
        if let Err(w) = a.compare(b) {
            return Ok(ContractionLawReport {
                case: AssocCase::Nested,
                ok: false,
                witness: Some(format!("t-exponent {k}: {w}")),
            });
        }
    }
    Ok(ContractionLawReport {
        case: AssocCase::Nested,
        ok: true,
        witness: None,
    })
}

impl fmt::Display for GradedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (input, row) in &self.entries {
            for (t, c) in row {
                writeln!(f, "  {input:?} -> {t:?}: {c}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::rat_int;

    fn ring() -> Arc<ParameterRing> {
        ParameterRing::empty(4)
    }

    fn space() -> GradedSpace {
        GradedSpace::new(-2, vec![1, 2, 1, 2, 1])
    }

    /// deterministic pseudo-random rationals
    struct Mix(u64);
    impl Mix {
        fn next(&mut self) -> i64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((self.0 >> 33) % 7) as i64 - 3
        }
    }

    fn random_map(
        space: &GradedSpace,
        ring: &Arc<ParameterRing>,
        arity: usize,
        seed: u64,
    ) -> GradedMap {
        let mut m = GradedMap::zero(space, arity);
        let mut mix = Mix(seed);
        for w in space.wmin..=space.wmax {
            for i in 0..space.dim(w) {
                // a few random output tensors
                for _ in 0..2 {
                    let mut t = Vec::new();
                    let mut ok = true;
                    for _ in 0..arity {
                        let ow = space.wmin + mix.next().rem_euclid(space.wmax - space.wmin + 1);
                        let d = space.dim(ow);
                        if d == 0 {
                            ok = false;
                            break;
                        }
                        let oi = (mix.next().rem_euclid(d as i64)) as usize;
                        t.push((ow, oi));
                    }
                    let v = mix.next();
                    if ok && v != 0 {
                        m.push((w, i), t, Coefficient::from_rat(ring, rat_int(v)));
                    }
                }
            }
        }
        m
    }

    #[test]
    fn identity_resolves_in_contraction() {
        // contracting the identity into any slot reproduces the map slicewise
        let r = ring();
        let s = space();
        let id = GradedMap::identity(&s, &r);
        let g = random_map(&s, &r, 2, 7);
        for slot in 1..=2usize {
            let ct = t_contract(&id, &g, slot).unwrap();
            let summed = contract_at_one(&ct, g.in_window).unwrap();
            summed.compare(&g).unwrap();
        }
    }

    #[test]
    fn zero_map_contracts_to_zero() {
        let r = ring();
        let s = space();
        let z = GradedMap::zero(&s, 1);
        let g: GradedMap = random_map(&s, &r, 2, 3);
        let ct = t_contract(&z, &g, 1).unwrap();
        assert!(ct.terms.values().all(|m| m.is_zero()));
        let ct2 = t_contract(&g, &z, 1).unwrap();
        assert!(ct2.terms.is_empty());
    }

    #[test]
    fn diagonal_grading_square() {
        // f = g = the grading-like diagonal map k^2 on weight k gives
        // t-slices with diagonal entries k^2 * k^2 at t^k... the slice at
        // intermediate weight k carries exactly the weight-k part
        let r = ring();
        let s = space();
        let mut f = GradedMap::zero(&s, 1);
        for w in s.wmin..=s.wmax {
            for i in 0..s.dim(w) {
                f.push((w, i), vec![(w, i)], Coefficient::from_int(&r, w * w));
            }
        }
        let ct = t_contract(&f, &f, 1).unwrap();
        for (k, slice) in &ct.terms {
            for (input, row) in &slice.entries {
                assert_eq!(input.0, *k, "slice key is the intermediate weight");
                for (t, c) in row {
                    assert_eq!(t[0], *input);
                    assert_eq!(*c, Coefficient::from_int(&r, k * k * k * k));
                }
            }
        }
    }

    #[test]
    fn window_limited_when_interior_weights_untracked() {
        let r = ring();
        let s = space();
        let mut f = GradedMap::identity(&s, &r);
        f.in_window = Iv::new(s.wmin + 1, s.wmax); // missing the lowest weight
        let g = random_map(&s, &r, 2, 11);
        let ct = t_contract(&f, &g, 1).unwrap();
        assert!(matches!(
            contract_at_one(&ct, g.in_window),
            Err(GradedError::WindowLimited(_))
        ));
    }

    #[test]
    fn sym_act_identity_and_involution() {
        let r = ring();
        let s = space();
        let g = random_map(&s, &r, 2, 19);
        assert_eq!(g.sym_act(&[1, 2]), g);
        assert_eq!(g.sym_act(&transposition()).sym_act(&transposition()), g);
    }

    #[test]
    fn sym_act_is_a_left_action() {
        // (sigma tau) . f = sigma . (tau . f) on arity-3 maps
        let r = ring();
        let s = GradedSpace::new(-1, vec![1, 2, 1]);
        let f = random_map(&s, &r, 3, 23);
        let sigma = [2usize, 3, 1]; // 1->2, 2->3, 3->1
        let tau = [3usize, 1, 2];
        let lhs = f.sym_act(&tau).sym_act(&sigma);
        // compose: i -> sigma(tau(i))
        let mut st = [0usize; 3];
        for i in 0..3 {
            st[i] = sigma[tau[i] - 1];
        }
        let rhs = f.sym_act(&st);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn associativity_all_three_cases() {
        let r = ring();
        let s = GradedSpace::new(-1, vec![2, 1, 2]);
        let f1 = random_map(&s, &r, 2, 31);
        let f2 = random_map(&s, &r, 2, 37);
        let f3 = random_map(&s, &r, 2, 41);
        // f3 arity 2: j in 1..=2; i in 1..=(m + n - 1) = 3
        for j in 1..=2usize {
            for i in 1..=3usize {
                let rep = verify_contraction_associativity(&f1, &f2, &f3, i, j).unwrap();
                assert!(
                    rep.ok,
                    "case {:?} (i={i}, j={j}): {:?}",
                    rep.case, rep.witness
                );
            }
        }
    }

    #[test]
    fn transposition_law() {
        let r = ring();
        let s = GradedSpace::new(-1, vec![2, 2, 1]);
        let f1 = random_map(&s, &r, 2, 43);
        let f2 = random_map(&s, &r, 2, 47);
        let rep = verify_contraction_transposition(&f1, &f2).unwrap();
        assert!(rep.ok, "{:?}", rep.witness);
    }

    #[test]
    fn transposition_law_detects_mutation() {
        let r = ring();
        let s = GradedSpace::new(-1, vec![2, 2, 1]);
        let f1 = random_map(&s, &r, 2, 53);
        let mut f2 = random_map(&s, &r, 2, 59);
        f2.push((0, 0), vec![(0, 1), (1, 0)], Coefficient::one(&r));
        // compare against the unmutated law partner: mutate only one side of
        // the identity by perturbing after the fact
        let lhs = t_contract(&f1, &f2, 1).unwrap();
        let mut f2b = f2.clone();
        f2b.push((0, 0), vec![(1, 0), (0, 1)], Coefficient::from_int(&r, 5));
        let pre = t_contract(&f1, &f2b.sym_act(&transposition()), 2).unwrap();
        let _ = (lhs, pre);
        let rep = verify_contraction_transposition(&f1, &f2).unwrap();
        assert!(rep.ok);
        // a genuinely asymmetric check: compare f2 against its mutation
        let rep2 = {
            let a = t_contract(&f1, &f2, 1).unwrap();
            let b = t_contract(&f1, &f2b, 1).unwrap();
            let mut wit = None;
            for (k, m) in &a.terms {
                if let Some(bm) = b.terms.get(k) {
                    if let Err(w) = m.compare(bm) {
                        wit = Some(w);
                        break;
                    }
                } else if !m.is_zero() {
                    wit = Some(format!("slice {k} missing"));
                    break;
                }
            }
            wit.or_else(|| {
                b.terms
                    .iter()
                    .find(|(k, m)| !a.terms.contains_key(k) && !m.is_zero())
                    .map(|(k, _)| format!("extra slice {k}"))
            })
        };
        assert!(rep2.is_some(), "mutation must leave a witness");
    }

    #[test]
    fn contraction_agrees_with_direct_composition() {
        // for arity-1 maps the evaluated contraction is plain composition;
        // the oracle composes matrices brute force without the intermediate
        // basis resolution
        let r = ring();
        let s = GradedSpace::new(-1, vec![2, 3, 2]);
        let f = random_map(&s, &r, 1, 101);
        let g = random_map(&s, &r, 1, 103);
        let ct = t_contract(&f, &g, 1).unwrap();
        let got = contract_at_one(&ct, g.in_window).unwrap();
        // brute force: (f o g)(v) = sum over g-terms of f applied again
        let mut want = GradedMap::zero(&s, 1);
        for (input, row) in &g.entries {
            for (t, cg) in row {
                for (t2, cf) in f.row(&t[0]) {
                    want.push(*input, t2.clone(), cg.mul(cf));
                }
            }
        }
        got.compare(&want).unwrap();
    }

    #[test]
    fn diagonal_maps_satisfy_all_cases_trivially() {
        let r = ring();
        let s = GradedSpace::new(-1, vec![1, 2, 1]);
        let mut d = GradedMap::zero(&s, 2);
        for w in s.wmin..=s.wmax {
            for i in 0..s.dim(w) {
                d.push(
                    (w, i),
                    vec![(w, i), (w, i)],
                    Coefficient::from_int(&r, w + 2),
                );
            }
        }
        for j in 1..=2usize {
            for i in 1..=3usize {
                let rep = verify_contraction_associativity(&d, &d, &d, i, j).unwrap();
                assert!(rep.ok, "case {:?}", rep.case);
            }
        }
        let rep = verify_contraction_transposition(&d, &d).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn bilinearity_of_t_contract() {
        let r = ring();
        let s = GradedSpace::new(-1, vec![1, 2, 1]);
        let f = random_map(&s, &r, 1, 61);
        let f2 = random_map(&s, &r, 1, 67);
        let g = random_map(&s, &r, 2, 71);
        let both = t_contract(&f.add(&f2), &g, 1).unwrap();
        let split1 = t_contract(&f, &g, 1).unwrap();
        let split2 = t_contract(&f2, &g, 1).unwrap();
        for (k, m) in &both.terms {
            let empty = GradedMap::zero(&s, 2);
            let a = split1.terms.get(k).unwrap_or(&empty);
            let b = split2.terms.get(k).unwrap_or(&empty);
            m.compare(&a.add(b)).unwrap();
        }
    }
}
