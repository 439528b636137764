//! Finitely truncated vertex-operator-coalgebra data and its checkers: the
//! seven defining axioms, the derived identities, rational reconstruction of
//! the double coproduct series, and the two functors between the algebraic
//! and geometric presentations verified on the generator cases.

use crate::graded::{contract_at_one, t_contract, BasisIndex, GradedMap, GradedSpace};
use crate::moduli::{permute, sew, Family, ModuliElement, ModuliError};
use crate::report::{Check, Status};
use crate::ring::{binomial, inv_factorial, rat_int, Coefficient, ParameterRing, Rat, RingError};
use crate::series::Iv;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum VocError {
    #[error("window-limited: {0}")]
    WindowLimited(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("no rational certificate within bounds: {0}")]
    NoCertificateWithinBounds(String),
    #[error(transparent)]
    Moduli(#[from] ModuliError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Graded(#[from] crate::graded::GradedError),
}

/// Row functional on the graded space.
pub type RowFunctional = BTreeMap<BasisIndex, Coefficient>;

/// A finitely truncated coalgebra datum: graded dimensions, coproduct
/// components on a tracked index window, covacuum and grading-current rows,
/// and the central rank.
#[derive(Debug, Clone)]
pub struct VocData {
    pub ring: Arc<ParameterRing>,
    pub space: GradedSpace,
    /// tracked coproduct indices
    pub k_window: Iv,
    pub delta: BTreeMap<i64, GradedMap>,
    pub covacuum: RowFunctional,
    pub covirasoro: RowFunctional,
    pub rank: Rat,
}

/// Parameters every coalgebra fixture ring carries: a formal invertible
/// scaling, a formal nilpotent, a deformation parameter, and two formal
/// invertible positions.
pub fn standard_ring(degree: i64) -> Arc<ParameterRing> {
    ParameterRing::new(
        &[
            ("scl", true),
            ("bb", false),
            ("eps", false),
            ("z1", true),
            ("z2", true),
        ],
        degree,
    )
}

impl VocData {
    /// The rank-zero coalgebra on a one-dimensional weight-0 space.
    pub fn trivial(ring: &Arc<ParameterRing>) -> Self {
        let space = GradedSpace::new(0, vec![1, 0, 0, 0, 0, 0, 0]);
        let mut delta = BTreeMap::new();
        let k_window = Iv::new(2 * space.wmin - space.wmax - 2, 2 * space.wmax - space.wmin);
        for k in k_window.lo..=k_window.hi {
            delta.insert(k, GradedMap::zero(&space, 2));
        }
        let mut d = GradedMap::zero(&space, 2);
        d.push((0, 0), vec![(0, 0), (0, 0)], Coefficient::one(ring));
        delta.insert(-1, d);
        let mut covacuum = BTreeMap::new();
        covacuum.insert((0, 0), Coefficient::one(ring));
        VocData {
            ring: ring.clone(),
            space,
            k_window,
            delta,
            covacuum,
            covirasoro: BTreeMap::new(),
            rank: Rat::zero(),
        }
    }

    /// A weight-0 coalgebra of the given dimension with pointwise coproduct,
    /// conjugated by an invertible rational change of basis.
    pub fn group_like(ring: &Arc<ParameterRing>, dim: usize, basis: &[Vec<Rat>]) -> Self {
        Self::try_group_like(ring, dim, basis).expect("basis change must be invertible")
    }

    /// As [`VocData::group_like`]; `None` when the basis change is singular.
    pub fn try_group_like(
        ring: &Arc<ParameterRing>,
        dim: usize,
        basis: &[Vec<Rat>],
    ) -> Option<Self> {
        assert_eq!(basis.len(), dim);
        let mut dims = vec![dim];
        dims.extend(std::iter::repeat_n(0, 6));
        let space = GradedSpace::new(0, dims);
        let g = basis;
        let ginv = invert_matrix(g)?;
        // delta(e_i) = e_i (x) e_i in the diagonal basis; conjugate:
        // new basis f_a = sum_i g[i][a] e_i  =>  e_i = sum_a ginv[a][i] f_a
        let k_window = Iv::new(2 * space.wmin - space.wmax - 2, 2 * space.wmax - space.wmin);
        let mut delta = BTreeMap::new();
        for k in k_window.lo..=k_window.hi {
            delta.insert(k, GradedMap::zero(&space, 2));
        }
        let mut d = GradedMap::zero(&space, 2);
        for a in 0..dim {
            // Delta(f_a) = sum_i g[i][a] e_i (x) e_i
            //            = sum_{b,c} (sum_i g[i][a] ginv[b][i] ginv[c][i]) f_b (x) f_c
            for b in 0..dim {
                for c in 0..dim {
                    let mut v = Rat::zero();
                    for (i, row) in g.iter().enumerate() {
                        v += row[a].clone() * ginv[b][i].clone() * ginv[c][i].clone();
                    }
                    if !v.is_zero() {
                        d.push((0, a), vec![(0, b), (0, c)], Coefficient::from_rat(ring, v));
                    }
                }
            }
        }
        delta.insert(-1, d);
        // c(e_i) = 1: c(f_a) = sum_i g[i][a]
        let mut covacuum = BTreeMap::new();
        for a in 0..dim {
            let mut v = Rat::zero();
            for row in g.iter() {
                v += row[a].clone();
            }
            if !v.is_zero() {
                covacuum.insert((0, a), Coefficient::from_rat(ring, v));
            }
        }
        Some(VocData {
            ring: ring.clone(),
            space,
            k_window,
            delta,
            covacuum,
            covirasoro: BTreeMap::new(),
            rank: Rat::zero(),
        })
    }

    pub fn basis(&self) -> Vec<BasisIndex> {
        let mut v = Vec::new();
        for w in self.space.wmin..=self.space.wmax {
            for i in 0..self.space.dim(w) {
                v.push((w, i));
            }
        }
        v
    }

    /// Coproduct-index range allowed by the weight structure: outside it the
    /// component is structurally zero on every tracked vector.
    pub fn weight_allowed_k(&self) -> Iv {
        // wt Delta_k(v) = wt v + k + 1 must land in [2 wmin, 2 wmax]
        Iv::new(
            2 * self.space.wmin - self.space.wmax - 1,
            2 * self.space.wmax - self.space.wmin - 1,
        )
    }

    /// Every weight-allowed component is tracked.
    pub fn complete(&self) -> bool {
        let a = self.weight_allowed_k();
        self.k_window.lo <= a.lo && a.hi <= self.k_window.hi
    }

    /// The tracked component, `None` when the index is untracked and not
    /// structurally zero.
    pub fn delta_at(&self, k: i64) -> Option<GradedMap> {
        if self.k_window.contains(k) {
            return Some(
                self.delta
                    .get(&k)
                    .cloned()
                    .unwrap_or_else(|| GradedMap::zero(&self.space, 2)),
            );
        }
        let a = self.weight_allowed_k();
        if !a.contains(k) {
            return Some(GradedMap::zero(&self.space, 2));
        }
        None
    }

    /// Validate the weight law on every stored block.
    pub fn validate_weight_law(&self) -> Result<(), VocError> {
        for (k, m) in &self.delta {
            for (input, row) in &m.entries {
                for (t, c) in row {
                    if c.is_zero() {
                        continue;
                    }
                    let out: i64 = t.iter().map(|b| b.0).sum();
                    if out != input.0 + k + 1 {
                        return Err(VocError::InvariantViolation(format!(
                            "weight law violated at component {k}: input {input:?} maps to {t:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn invert_matrix(g: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = g.len();
    let mut a: Vec<Vec<Rat>> = g.to_vec();
    let mut inv: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Rat::one() } else { Rat::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                a[r][j] = a[r][j].clone() - f.clone() * a[col][j].clone();
                inv[r][j] = inv[r][j].clone() - f.clone() * inv[col][j].clone();
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// operator plumbing
// ---------------------------------------------------------------------------

/// Apply a row functional to one output slot of a tensor map, contracting
/// the arity by one.
pub fn row_on_slot(row: &RowFunctional, m: &GradedMap, slot: usize) -> GradedMap {
    assert!(slot >= 1 && slot <= m.arity);
    let mut out = GradedMap::zero(&m.space, m.arity - 1);
    out.in_window = m.in_window;
    for (input, rw) in &m.entries {
        for (t, c) in rw {
            if let Some(rv) = row.get(&t[slot - 1]) {
                let mut t2 = t.clone();
                t2.remove(slot - 1);
                out.push(*input, t2, c.mul(rv));
            }
        }
    }
    out
}

/// Compose two arity-1 maps: `(a o b)(v) = a(b(v))`.
pub fn op_compose(a: &GradedMap, b: &GradedMap) -> GradedMap {
    assert_eq!(a.arity, 1);
    assert_eq!(b.arity, 1);
    let mut out = GradedMap::zero(&a.space, 1);
    out.in_window = b.in_window;
    for (input, row) in &b.entries {
        for (t, c) in row {
            if !a.in_window.contains(t[0].0) {
                // unknown region of a: shrink the claimed window instead of
                // guessing; desk-scale maps are complete so this is unusual
                continue;
            }
            for (t2, c2) in a.row(&t[0]) {
                out.push(*input, t2.clone(), c.mul(c2));
            }
        }
    }
    out
}

/// Apply an arity-1 operator to one output slot of a tensor map.
pub fn op_on_slot(op: &GradedMap, m: &GradedMap, slot: usize) -> GradedMap {
    assert_eq!(op.arity, 1);
    assert!(slot >= 1 && slot <= m.arity);
    let mut out = GradedMap::zero(&m.space, m.arity);
    out.in_window = m.in_window;
    for (input, row) in &m.entries {
        for (t, c) in row {
            for (t2, c2) in op.row(&t[slot - 1]) {
                let mut tt = t.clone();
                tt[slot - 1] = t2[0];
                out.push(*input, tt, c.mul(c2));
            }
        }
    }
    out
}

/// Apply an arity-1 operator before a map: `m o op`.
pub fn precompose(m: &GradedMap, op: &GradedMap) -> GradedMap {
    assert_eq!(op.arity, 1);
    let mut out = GradedMap::zero(&m.space, m.arity);
    out.in_window = op.in_window;
    for (input, row) in &op.entries {
        for (t, c) in row {
            for (t2, c2) in m.row(&t[0]) {
                out.push(*input, t2.clone(), c.mul(c2));
            }
        }
    }
    out
}

/// Row functional composed with an arity-1 operator.
pub fn row_compose(row: &RowFunctional, op: &GradedMap) -> RowFunctional {
    let mut out: RowFunctional = BTreeMap::new();
    for (input, r) in &op.entries {
        for (t, c) in r {
            if let Some(rv) = row.get(&t[0]) {
                let v = c.mul(rv);
                out.entry(*input)
                    .and_modify(|x| *x = x.add(&v))
                    .or_insert(v);
            }
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// `exp(op)` for a weight-shifting (hence nilpotent) or degree-positive
/// operator on the finite graded space.
pub fn op_exp(op: &GradedMap, ring: &Arc<ParameterRing>) -> GradedMap {
    let id = GradedMap::identity(&op.space, ring);
    let mut out = id.clone();
    out.in_window = op.in_window;
    let mut pow = id;
    let cap = (op.space.wmax - op.space.wmin + 2).max(ring.max_degree() + 1);
    for n in 1..=cap {
        pow = op_compose(op, &pow);
        if pow.is_zero() {
            break;
        }
        out = out.add(&pow.scale(&Coefficient::from_rat(ring, inv_factorial(n as u32))));
    }
    out
}

/// Linear combination of tracked coproduct components weighted by powers of
/// an invertible value: `sum_k Delta_k z^{-k-1}` (the coproduct series
/// evaluated at a point).
pub fn coproduct_at(v: &VocData, z: &Coefficient) -> Result<GradedMap, VocError> {
    let mut out = GradedMap::zero(&v.space, 2);
    let allowed = v.weight_allowed_k();
    for k in allowed.lo..=allowed.hi {
        let d = v
            .delta_at(k)
            .ok_or_else(|| VocError::WindowLimited(format!("component {k} untracked")))?;
        if d.is_zero() {
            continue;
        }
        let zk = z
            .pow_i(-k - 1)
            .map_err(|e| VocError::InvariantViolation(e.to_string()))?;
        out = out.add(&d.scale(&zk));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// derived grading operators
// ---------------------------------------------------------------------------

/// The graded operators read off the grading-current row: the operator of
/// index k is the row applied to the left slot of the component of index
/// `1 - k`.
#[derive(Debug, Clone)]
pub struct VirasoroOps {
    pub window: Iv,
    pub l: BTreeMap<i64, GradedMap>,
}

impl VirasoroOps {
    pub fn at(&self, k: i64) -> Option<&GradedMap> {
        if self.window.contains(k) {
            self.l.get(&k)
        } else {
            None
        }
    }
}

pub fn derive_virasoro_ops(v: &VocData) -> VirasoroOps {
    let window = Iv::new(1 - v.k_window.hi, 1 - v.k_window.lo);
    let mut l = BTreeMap::new();
    for k in window.lo..=window.hi {
        if let Some(d) = v.delta_at(1 - k) {
            l.insert(k, row_on_slot(&v.covirasoro, &d, 1));
        }
    }
    VirasoroOps { window, l }
}

// ---------------------------------------------------------------------------
// axiom checkers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub checks: Vec<Check>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status.passed())
    }

    pub fn find(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

fn tensor1(v: BasisIndex, ring: &Arc<ParameterRing>) -> BTreeMap<Vec<BasisIndex>, Coefficient> {
    let mut m = BTreeMap::new();
    m.insert(vec![v], Coefficient::one(ring));
    m
}

/// Check the seven defining axioms on determined blocks.
pub fn check_axioms(v: &VocData) -> Result<AxiomReport, VocError> {
    let mut checks = Vec::new();
    let ring = &v.ring;
    let allowed = v.weight_allowed_k();
    let window_note = format!(
        "k in [{}, {}], weights [{}, {}]",
        v.k_window.lo, v.k_window.hi, v.space.wmin, v.space.wmax
    );

    // 1. left counit: the covacuum row on the left slot resolves the
    //    component of index -1 to the identity and kills the others
    let counit = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let d = match v.delta_at(k) {
                Some(d) => d,
                None => return Status::WindowLimited(format!("component {k} untracked")),
            };
            let got = row_on_slot(&v.covacuum, &d, 1);
            let want = if k == -1 {
                GradedMap::identity(&v.space, ring)
            } else {
                GradedMap::zero(&v.space, 1)
            };
            if let Err(w) = got.compare(&want) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("counit", counit, window_note.clone()));

    // 2. cocreation: the covacuum row on the right slot vanishes for k >= 0
    //    and resolves to the identity at k = -1
    let cocreation = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let d = match v.delta_at(k) {
                Some(d) => d,
                None => return Status::WindowLimited(format!("component {k} untracked")),
            };
            let got = row_on_slot(&v.covacuum, &d, 2);
            if k >= 0 {
                if let Err(w) = got.compare(&GradedMap::zero(&v.space, 1)) {
                    return Status::Fail(format!(
                        "negative power of the formal variable at component {k}: {w}"
                    ));
                }
            }
            if k == -1 {
                if let Err(w) = got.compare(&GradedMap::identity(&v.space, ring)) {
                    return Status::Fail(format!("limit at 0: {w}"));
                }
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("cocreation", cocreation, window_note.clone()));

    // 3. truncation: components below the weight floor vanish; report the
    //    observed floor
    let truncation = (|| -> Status {
        match v.validate_weight_law() {
            Err(VocError::InvariantViolation(w)) => return Status::Fail(w),
            Err(e) => return Status::Fail(e.to_string()),
            Ok(()) => {}
        }
        let floor = v
            .delta
            .iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(k, _)| *k)
            .min();
        match floor {
            Some(f) => {
                if f < allowed.lo {
                    Status::Fail(format!("component below the structural floor at {f}"))
                } else {
                    Status::Pass
                }
            }
            None => Status::Pass,
        }
    })();
    checks.push(Check::new("truncation", truncation, window_note.clone()));

    // 4. Jacobi identity on a box of exponents
    let radius = 6;
    let jacobi = jacobi_status(v, radius);
    checks.push(Check::new(
        "jacobi",
        jacobi,
        format!("exponent box radius {radius}"),
    ));

    // 5. the grading-current bracket with its central term
    let ops = derive_virasoro_ops(v);
    let virasoro = (|| -> Status {
        if !v.complete() {
            return Status::WindowLimited("coproduct window incomplete".into());
        }
        for j in ops.window.lo..=ops.window.hi {
            for k in ops.window.lo..=ops.window.hi {
                let (lj, lk) = match (ops.at(j), ops.at(k)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                };
                let bracket = op_compose(lj, lk).sub(&op_compose(lk, lj));
                let mut want = GradedMap::zero(&v.space, 1);
                if j != k {
                    if let Some(ljk) = ops.at(j + k) {
                        want = ljk.scale(&Coefficient::from_int(ring, j - k));
                    } else if !bracket.is_zero() {
                        return Status::WindowLimited(format!(
                            "bracket ({j},{k}) needs the operator of index {}",
                            j + k
                        ));
                    }
                }
                if j + k == 0 {
                    let central = Rat::new((j * j * j - j).into(), 12.into()) * v.rank.clone();
                    if !central.is_zero() {
                        let id = GradedMap::identity(&v.space, ring);
                        want = want.add(&id.scale(&Coefficient::from_rat(ring, central)));
                    }
                }
                if let Err(w) = bracket.compare(&want) {
                    return Status::Fail(format!("bracket ({j},{k}): {w}"));
                }
            }
        }
        Status::Pass
    })();
    checks.push(Check::new(
        "virasoro-bracket",
        virasoro,
        format!("indices in [{}, {}]", ops.window.lo, ops.window.hi),
    ));

    // 6. grading: the index-0 operator is the weight
    let grading = (|| -> Status {
        let l0 = match ops.at(0) {
            Some(l) => l.clone(),
            None => return Status::WindowLimited("index-0 operator untracked".into()),
        };
        let mut want = GradedMap::zero(&v.space, 1);
        for b in v.basis() {
            want.push(b, vec![b], Coefficient::from_int(ring, b.0));
        }
        Status::from_result(l0.compare(&want).map_err(|w| format!("grading: {w}")))
    })();
    checks.push(Check::new("grading", grading, window_note.clone()));

    // 7. derivative compatibility: the index-1 operator on the left slot
    //    lowers the component index
    let deriv = (|| -> Status {
        let l1 = match ops.at(1) {
            Some(l) => l.clone(),
            None => return Status::WindowLimited("index-1 operator untracked".into()),
        };
        for m in allowed.lo..=allowed.hi {
            let (dm, dm1) = match (v.delta_at(m), v.delta_at(m - 1)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Status::WindowLimited(format!("components {m}, {} untracked", m - 1)),
            };
            let lhs = op_on_slot(&l1, &dm, 1);
            let rhs = dm1.scale(&Coefficient::from_int(ring, -m));
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("component {m}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("derivative", deriv, window_note));

    Ok(AxiomReport { checks })
}

type TensorCells = BTreeMap<(i64, i64, i64), BTreeMap<Vec<BasisIndex>, Coefficient>>;

fn add_cell(
    cells: &mut TensorCells,
    cell: (i64, i64, i64),
    tensor: &BTreeMap<Vec<BasisIndex>, Coefficient>,
    scale: &Rat,
) {
    if scale.is_zero() {
        return;
    }
    let slot = cells.entry(cell).or_default();
    for (t, c) in tensor {
        let v = c.scale(scale);
        slot.entry(t.clone())
            .and_modify(|x| *x = x.add(&v))
            .or_insert(v);
    }
    slot.retain(|_, c| !c.is_zero());
}

/// Apply the second component to slot `slot` of an arity-2 tensor image.
fn expand_slot(
    v: &VocData,
    base: &BTreeMap<Vec<BasisIndex>, Coefficient>,
    k: i64,
    slot: usize,
) -> Option<BTreeMap<Vec<BasisIndex>, Coefficient>> {
    let d = v.delta_at(k)?;
    let mut out: BTreeMap<Vec<BasisIndex>, Coefficient> = BTreeMap::new();
    for (t, c) in base {
        for (t2, c2) in d.row(&t[slot - 1]) {
            let mut tt = t.clone();
            tt.remove(slot - 1);
            tt.splice((slot - 1)..(slot - 1), t2.iter().cloned());
            let val = c.mul(c2);
            out.entry(tt)
                .and_modify(|x| *x = x.add(&val))
                .or_insert(val);
        }
    }
    out.retain(|_, c| !c.is_zero());
    Some(out)
}

fn swap12(t: &BTreeMap<Vec<BasisIndex>, Coefficient>) -> BTreeMap<Vec<BasisIndex>, Coefficient> {
    let mut out = BTreeMap::new();
    for (k, c) in t {
        let mut k2 = k.clone();
        k2.swap(0, 1);
        out.insert(k2, c.clone());
    }
    out
}

/// The two sides of the coalgebraic Jacobi identity applied to one basis
/// vector, as exact tensors per exponent cell `(a, b, c)` of the three
/// formal variables. `Err` carries a window-limited status.
fn jacobi_cells(
    v: &VocData,
    b: BasisIndex,
    boxr: i64,
) -> Result<(TensorCells, TensorCells), Status> {
    let ring = &v.ring;
    let allowed = v.weight_allowed_k();
    let in_box = |c: (i64, i64, i64)| c.0.abs() <= boxr && c.1.abs() <= boxr && c.2.abs() <= boxr;
    let base = tensor1(b, ring);
    let mut lhs: TensorCells = BTreeMap::new();
    let mut rhs: TensorCells = BTreeMap::new();
    for k1 in allowed.lo..=allowed.hi {
        let first = match expand_slot(v, &base, k1, 1) {
            Some(f) => f,
            None => return Err(Status::WindowLimited(format!("component {k1} untracked"))),
        };
        for k2 in allowed.lo..=allowed.hi {
            // term 1: expand the last slot of Delta_{k1} by Delta_{k2};
            // exponents x0^{-n-1} x1^{n-k-k1-1} x2^{k-k2-1}
            let t1 = if first.is_empty() {
                BTreeMap::new()
            } else {
                expand_slot(v, &first, k2, 2).unwrap_or_default()
            };
            if !t1.is_empty() {
                for n in (-boxr - 1)..=(boxr - 1) {
                    for k in 0..=(2 * boxr + allowed.hi.abs() + 2) {
                        let cell = (-n - 1, n - k - k1 - 1, k - k2 - 1);
                        if !in_box(cell) {
                            continue;
                        }
                        let mut coeff = binomial(n, k);
                        if k % 2 == 1 {
                            coeff = -coeff;
                        }
                        add_cell(&mut lhs, cell, &t1, &coeff);
                    }
                }
            }
            // term 2 (subtracted): the swapped opposite-order expansion;
            // exponents x0^{-n-1} x1^{k-k1-1} x2^{n-k-k2-1}, sign (-1)^{k+n}
            let inner = match expand_slot(v, &base, k2, 1) {
                Some(f) => f,
                None => return Err(Status::WindowLimited(format!("component {k2} untracked"))),
            };
            let t2 = swap12(&expand_slot(v, &inner, k1, 2).unwrap_or_default());
            if !t2.is_empty() {
                for n in (-boxr - 1)..=(boxr - 1) {
                    for k in 0..=(2 * boxr + allowed.hi.abs() + 2) {
                        let cell = (-n - 1, k - k1 - 1, n - k - k2 - 1);
                        if !in_box(cell) {
                            continue;
                        }
                        let mut coeff = binomial(n, k);
                        if (k + n).rem_euclid(2) == 1 {
                            coeff = -coeff;
                        }
                        add_cell(&mut lhs, cell, &t2, &(-coeff));
                    }
                }
            }
            // rhs: first slot of Delta_{k2} expanded by the x0-series;
            // exponents x0^{k-k1-1} x1^{n-k} x2^{-n-k2-2}
            let t3 = expand_slot(v, &inner, k1, 1).unwrap_or_default();
            if !t3.is_empty() {
                for n in (-2 * boxr - 2)..=(2 * boxr + 2) {
                    for k in 0..=(2 * boxr + allowed.hi.abs() + 2) {
                        let cell = (k - k1 - 1, n - k, -n - k2 - 2);
                        if !in_box(cell) {
                            continue;
                        }
                        let mut coeff = binomial(n, k);
                        if k % 2 == 1 {
                            coeff = -coeff;
                        }
                        add_cell(&mut rhs, cell, &t3, &coeff);
                    }
                }
            }
        }
    }
    Ok((lhs, rhs))
}

fn compare_cells(lhs: &TensorCells, rhs: &TensorCells) -> Result<(), ((i64, i64, i64), String)> {
    let mut keys: Vec<(i64, i64, i64)> = lhs.keys().cloned().collect();
    for k in rhs.keys() {
        if !keys.contains(k) {
            keys.push(*k);
        }
    }
    for cell in keys {
        let empty = BTreeMap::new();
        let a = lhs.get(&cell).unwrap_or(&empty);
        let bt = rhs.get(&cell).unwrap_or(&empty);
        let mut diff = a.clone();
        for (t, c) in bt {
            diff.entry(t.clone())
                .and_modify(|x| *x = x.sub(c))
                .or_insert_with(|| c.neg());
        }
        diff.retain(|_, c| !c.is_zero());
        if let Some((t, c)) = diff.iter().next() {
            return Err((cell, format!("slot {t:?}: difference {c}")));
        }
    }
    Ok(())
}

fn jacobi_status(v: &VocData, radius: i64) -> Status {
    if !v.complete() {
        return Status::WindowLimited("coproduct window incomplete".into());
    }
    for b in v.basis() {
        let (lhs, rhs) = match jacobi_cells(v, b, radius) {
            Ok(c) => c,
            Err(st) => return st,
        };
        if let Err((cell, w)) = compare_cells(&lhs, &rhs) {
            return Status::Fail(format!("input {b:?}, exponents {cell:?}, {w}"));
        }
    }
    Status::Pass
}

// ---------------------------------------------------------------------------
// derived properties
// ---------------------------------------------------------------------------

/// Check the derived identities on determined blocks.
pub fn check_derived_properties(v: &VocData) -> Result<AxiomReport, VocError> {
    let ring = &v.ring;
    let mut checks = Vec::new();
    let allowed = v.weight_allowed_k();
    let ops = derive_virasoro_ops(v);
    let win = format!("k in [{}, {}]", allowed.lo, allowed.hi);
    if !v.complete() {
        return Ok(AxiomReport {
            checks: vec![Check::new(
                "derived",
                Status::WindowLimited("coproduct window incomplete".into()),
                win,
            )],
        });
    }
    let l1 = ops
        .at(1)
        .cloned()
        .unwrap_or_else(|| GradedMap::zero(&v.space, 1));
    let l0 = ops
        .at(0)
        .cloned()
        .unwrap_or_else(|| GradedMap::zero(&v.space, 1));
    let lm1 = ops
        .at(-1)
        .cloned()
        .unwrap_or_else(|| GradedMap::zero(&v.space, 1));
    let span = (v.space.wmax - v.space.wmin + 2) as u32;

    // powers of the index-1 operator over the factorial
    let mut l1_pows = vec![GradedMap::identity(&v.space, ring)];
    for n in 1..=span {
        let next = op_compose(&l1, &l1_pows[(n - 1) as usize]);
        l1_pows.push(next);
    }
    let l1_fact = |m: usize| -> GradedMap {
        l1_pows[m].scale(&Coefficient::from_rat(ring, inv_factorial(m as u32)))
    };

    // translation: (exp(x0 L1) (x) Id) of the series shifts the argument
    let shift = (|| -> Status {
        for m in 1..=(span as i64 - 1) {
            for k in allowed.lo..=allowed.hi {
                let dk = v.delta_at(k).unwrap();
                let lhs = op_on_slot(&l1_fact(m as usize), &dk, 1);
                let rhs = match v.delta_at(k - m) {
                    Some(d) => d.scale(&Coefficient::from_rat(ring, binomial(-k + m - 1, m))),
                    None => return Status::WindowLimited(format!("component {} untracked", k - m)),
                };
                if let Err(w) = lhs.compare(&rhs) {
                    return Status::Fail(format!("order {m}, component {k}: {w}"));
                }
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("shift", shift, win.clone()));

    // commutation of the raising operator through the coproduct
    let l1_com = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let dk = v.delta_at(k).unwrap();
            let lhs = precompose(&dk, &l1);
            let rhs = op_on_slot(&l1, &dk, 2).add(&op_on_slot(&l1, &dk, 1));
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("l1-commutation", l1_com, win.clone()));

    let l0_com = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let dk = v.delta_at(k).unwrap();
            let dk1 = match v.delta_at(k + 1) {
                Some(d) => d,
                None => return Status::WindowLimited(format!("component {} untracked", k + 1)),
            };
            let lhs = precompose(&dk, &l0);
            let rhs = op_on_slot(&l0, &dk, 2)
                .add(&op_on_slot(&l0, &dk, 1))
                .add(&op_on_slot(&l1, &dk1, 1));
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("l0-commutation", l0_com, win.clone()));

    let lm1_com = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let dk = v.delta_at(k).unwrap();
            let (dk1, dk2) = match (v.delta_at(k + 1), v.delta_at(k + 2)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Status::WindowLimited("components untracked".into()),
            };
            let lhs = precompose(&dk, &lm1);
            let rhs = op_on_slot(&lm1, &dk, 2)
                .add(&op_on_slot(&lm1, &dk, 1))
                .add(&op_on_slot(&l0, &dk1, 1).scale(&Coefficient::from_int(ring, 2)))
                .add(&op_on_slot(&l1, &dk2, 1));
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("lm1-commutation", lm1_com, win.clone()));

    // the グ current through the coproduct: residue form
    let current = (|| -> Status {
        // the grading-current identity is the row contraction of the first
        // tensor slot of the Jacobi sides at the residue slice of the
        // auxiliary variable; additionally the left side must match the
        // direct operator compositions
        let boxr = 6i64;
        let contract_rho =
            |cells: &TensorCells| -> BTreeMap<(i64, i64), BTreeMap<Vec<BasisIndex>, Coefficient>> {
                let mut out: BTreeMap<(i64, i64), BTreeMap<Vec<BasisIndex>, Coefficient>> =
                    BTreeMap::new();
                for (cell, tensor) in cells {
                    if cell.0 != -1 {
                        continue;
                    }
                    let slot = out.entry((cell.1, cell.2)).or_default();
                    for (t, c) in tensor {
                        if let Some(rv) = v.covirasoro.get(&t[0]) {
                            let val = c.mul(rv);
                            let key = t[1..].to_vec();
                            slot.entry(key)
                                .and_modify(|x| *x = x.add(&val))
                                .or_insert(val);
                        }
                    }
                    slot.retain(|_, c| !c.is_zero());
                }
                out.retain(|_, t| !t.is_empty());
                out
            };
        for b in v.basis() {
            let (lhs_cells, rhs_cells) = match jacobi_cells(v, b, boxr) {
                Ok(c) => c,
                Err(st) => return st,
            };
            let lhs = contract_rho(&lhs_cells);
            let rhs = contract_rho(&rhs_cells);
            // the two residue contractions agree cell by cell
            let mut keys: Vec<(i64, i64)> = lhs.keys().cloned().collect();
            for k in rhs.keys() {
                if !keys.contains(k) {
                    keys.push(*k);
                }
            }
            for st in keys {
                let empty = BTreeMap::new();
                let a = lhs.get(&st).unwrap_or(&empty);
                let bt = rhs.get(&st).unwrap_or(&empty);
                let mut diff = a.clone();
                for (t, c) in bt {
                    diff.entry(t.clone())
                        .and_modify(|x| *x = x.sub(c))
                        .or_insert_with(|| c.neg());
                }
                diff.retain(|_, c| !c.is_zero());
                if let Some((t, c)) = diff.iter().next() {
                    return Status::Fail(format!(
                        "input {b:?}, exponents {st:?}, slot {t:?}: difference {c}"
                    ));
                }
            }
            // the left side also equals the direct operator compositions
            // Delta_j L(m) - (Id x L(m)) Delta_j at (x1, x2) = (m-2, -j-1)
            for (st, tensor) in &lhs {
                let m = st.0 + 2;
                let j = -st.1 - 1;
                let (lm, dj) = match (ops.at(m), v.delta_at(j)) {
                    (Some(a), Some(b)) => (a.clone(), b),
                    _ => continue,
                };
                let direct = precompose(&dj, &lm).sub(&op_on_slot(&lm, &dj, 2));
                let mut want: BTreeMap<Vec<BasisIndex>, Coefficient> = BTreeMap::new();
                for (t, c) in direct.row(&b) {
                    want.entry(t.clone())
                        .and_modify(|x| *x = x.add(c))
                        .or_insert_with(|| c.clone());
                }
                want.retain(|_, c| !c.is_zero());
                if &want != tensor {
                    return Status::Fail(format!(
                        "direct composition disagrees at input {b:?}, exponents {st:?}"
                    ));
                }
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("current-commutation", current, win.clone()));

    // conjugation form of the translation property
    let distrib = (|| -> Status {
        for m in 1..=(span as i64 - 1) {
            for k in allowed.lo..=allowed.hi {
                let dk = v.delta_at(k).unwrap();
                let lhs = op_on_slot(&l1_fact(m as usize), &dk, 1);
                let mut rhs = GradedMap::zero(&v.space, 2);
                for p in 0..=(m as usize) {
                    let q = m as usize - p;
                    let sign = if p % 2 == 1 { -Rat::one() } else { Rat::one() };
                    let term = op_on_slot(&l1_fact(p), &dk, 2);
                    let term = precompose(&term, &l1_fact(q));
                    rhs = rhs.add(&term.scale(&Coefficient::from_rat(ring, sign)));
                }
                if let Err(w) = lhs.compare(&rhs) {
                    return Status::Fail(format!("order {m}, component {k}: {w}"));
                }
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("conjugated-shift", distrib, win.clone()));

    // covacuum resolves the exponential of the raising operator
    let cocreate2 = (|| -> Status {
        for m in 0..=(span as i64 - 1) {
            let d = match v.delta_at(-m - 1) {
                Some(d) => d,
                None => return Status::WindowLimited(format!("component {} untracked", -m - 1)),
            };
            let got = row_on_slot(&v.covacuum, &d, 2);
            let want = l1_fact(m as usize);
            if let Err(w) = got.compare(&want) {
                return Status::Fail(format!("order {m}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("covacuum-exponential", cocreate2, win.clone()));

    // antisymmetry
    let antisym = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let dk = v.delta_at(k).unwrap();
            let lhs = dk.sym_act(&[2, 1]);
            let mut rhs = GradedMap::zero(&v.space, 2);
            for m in 0..=(span as i64 - 1) {
                let dkm = match v.delta_at(k + m) {
                    Some(d) => d,
                    None => return Status::WindowLimited(format!("component {} untracked", k + m)),
                };
                let sign = if (k + m + 1).rem_euclid(2) == 1 {
                    -Rat::one()
                } else {
                    Rat::one()
                };
                rhs = rhs.add(
                    &precompose(&dkm, &l1_fact(m as usize))
                        .scale(&Coefficient::from_rat(ring, sign)),
                );
            }
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("antisymmetry", antisym, win.clone()));

    // covacuum annihilates the operators of index <= 1
    let cl = (|| -> Status {
        for j in ops.window.lo..=1.min(ops.window.hi) {
            if let Some(lj) = ops.at(j) {
                let got = row_compose(&v.covacuum, lj);
                if !got.is_empty() {
                    return Status::Fail(format!("index {j}: row {got:?}"));
                }
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("covacuum-annihilation", cl, win.clone()));

    // covacuum composed with the index-2 operator gives the current row
    let cl2 = match ops.at(2) {
        None => Status::WindowLimited("index-2 operator untracked".into()),
        Some(l2) => {
            let got = row_compose(&v.covacuum, l2);
            if got == v.covirasoro {
                Status::Pass
            } else {
                Status::Fail(format!("{got:?} vs {:?}", v.covirasoro))
            }
        }
    };
    checks.push(Check::new("covacuum-current", cl2, win.clone()));

    // the current row doubles on the grading operator
    let rl0 = {
        let got = row_compose(&v.covirasoro, &l0);
        let want: RowFunctional = v
            .covirasoro
            .iter()
            .map(|(k, c)| (*k, c.scale(&rat_int(2))))
            .collect();
        let want: RowFunctional = want.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if got == want {
            Status::Pass
        } else {
            Status::Fail(format!("{got:?} vs {want:?}"))
        }
    };
    checks.push(Check::new("current-doubling", rl0, win.clone()));

    // weight law as a block-shape statement
    let weight = Status::from_result(v.validate_weight_law().map_err(|e| e.to_string()));
    checks.push(Check::new("weight-law", weight, win.clone()));

    // scaling conjugation with a formal invertible parameter
    let scl = Coefficient::param(ring, "scl");
    let exp_l0 = (|| -> Status {
        for k in allowed.lo..=allowed.hi {
            let dk = v.delta_at(k).unwrap();
            let mut lhs = GradedMap::zero(&v.space, 2);
            let mut rhs = GradedMap::zero(&v.space, 2);
            for (input, row) in &dk.entries {
                for (t, c) in row {
                    // (Id (x) a^{-L0}) Delta_k a^{L0}: a^{wt v - wt t2}
                    let le = scl.pow_i(input.0 - t[1].0);
                    let re = scl.pow_i(t[0].0 - k - 1);
                    match (le, re) {
                        (Ok(le), Ok(re)) => {
                            lhs.push(*input, t.clone(), c.mul(&le));
                            rhs.push(*input, t.clone(), c.mul(&re));
                        }
                        _ => return Status::Fail("scaling power failed".into()),
                    }
                }
            }
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("scaling-conjugation", exp_l0, win.clone()));

    // group-like commutation through exponentials with formal parameters
    let bb = Coefficient::param(ring, "bb");
    let l0lk = (|| -> Status {
        for k in ops.window.lo..=ops.window.hi {
            let lk = match ops.at(k) {
                Some(l) => l,
                None => continue,
            };
            // a^{L0} e^{b L(k)} = e^{a^{-k} b L(k)} a^{L0}
            let a_l0 = {
                let mut m = GradedMap::zero(&v.space, 1);
                for bidx in v.basis() {
                    match scl.pow_i(bidx.0) {
                        Ok(p) => m.push(bidx, vec![bidx], p),
                        Err(_) => return Status::Fail("scaling power failed".into()),
                    }
                }
                m
            };
            let e_blk = op_exp(&lk.scale(&bb), ring);
            let lhs = op_compose(&a_l0, &e_blk);
            let scaled = match scl.pow_i(-k) {
                Ok(p) => lk.scale(&bb.mul(&p)),
                Err(_) => return Status::Fail("scaling power failed".into()),
            };
            let rhs = op_compose(&op_exp(&scaled, ring), &a_l0);
            if let Err(w) = lhs.compare(&rhs) {
                return Status::Fail(format!("index {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new("scaling-exponential-commutation", l0lk, win));

    Ok(AxiomReport { checks })
}

// ---------------------------------------------------------------------------
// rational reconstruction
// ---------------------------------------------------------------------------

/// Bivariate Laurent polynomial keyed by exponent pairs.
type Biv = BTreeMap<(i64, i64), Coefficient>;

fn biv_mul_monomial(p: &Biv, e: (i64, i64), c: &Coefficient) -> Biv {
    p.iter()
        .map(|(k, v)| ((k.0 + e.0, k.1 + e.1), v.mul(c)))
        .collect()
}

fn biv_add(a: &Biv, b: &Biv) -> Biv {
    let mut out = a.clone();
    for (k, v) in b {
        out.entry(*k)
            .and_modify(|x| *x = x.add(v))
            .or_insert_with(|| v.clone());
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn biv_scale(a: &Biv, r: &Rat) -> Biv {
    a.iter()
        .map(|(k, v)| (*k, v.scale(r)))
        .filter(|(_, v)| !v.is_zero())
        .collect()
}

/// Certificate that the double coproduct series is the expansion of a
/// rational function with poles only at 0 and on the diagonal.
#[derive(Debug, Clone)]
pub struct RationalCertificate {
    pub g: Biv,
    pub r: i64,
    pub s: i64,
    pub t: i64,
    pub commutativity_ok: bool,
    pub associativity_ok: bool,
}

/// Pairing of a dual row with a tensor image.
fn pair_row(
    row3: &BTreeMap<Vec<BasisIndex>, Coefficient>,
    t: &[BasisIndex],
) -> Option<Coefficient> {
    row3.get(t).cloned()
}

/// Reconstruct `<v', (Id x Y(x2)) Y(x1) v>` as a rational function within
/// the stated bounds and verify commutativity and associativity by
/// re-expanding. Failure is inconclusive, never a refutation.
pub fn rational_reconstruct(
    v: &VocData,
    vin: BasisIndex,
    vout: &BTreeMap<Vec<BasisIndex>, Coefficient>,
    max_r: i64,
    max_t: i64,
    max_deg: i64,
) -> Result<RationalCertificate, VocError> {
    if !v.complete() {
        return Err(VocError::WindowLimited(
            "coproduct window incomplete".into(),
        ));
    }
    let ring = &v.ring;
    let allowed = v.weight_allowed_k();
    let base = tensor1(vin, ring);
    // D(x1, x2) = sum <v', (Id x D_{k2}) D_{k1} v> x1^{-k1-1} x2^{-k2-1}
    let mut d12: Biv = BTreeMap::new();
    let mut d21: Biv = BTreeMap::new(); // <v', T_{12}(Id x D)(D) ...> with roles of x1, x2 swapped
    let mut d02: Biv = BTreeMap::new(); // <v', (D(x0) x Id) D(x2) v>
    for ka in allowed.lo..=allowed.hi {
        let first = expand_slot(v, &base, ka, 1).unwrap_or_default();
        if first.is_empty() {
            continue;
        }
        for kb in allowed.lo..=allowed.hi {
            let second = expand_slot(v, &first, kb, 2).unwrap_or_default();
            for (t, c) in &second {
                if let Some(p) = pair_row(vout, t) {
                    let val = c.mul(&p);
                    d12.entry((-ka - 1, -kb - 1))
                        .and_modify(|x| *x = x.add(&val))
                        .or_insert(val);
                }
            }
            let sw = swap12(&second);
            for (t, c) in &sw {
                if let Some(p) = pair_row(vout, t) {
                    let val = c.mul(&p);
                    // x2 carries -ka-1, x1 carries -kb-1
                    d21.entry((-kb - 1, -ka - 1))
                        .and_modify(|x| *x = x.add(&val))
                        .or_insert(val);
                }
            }
            let third = expand_slot(v, &first, kb, 1).unwrap_or_default();
            for (t, c) in &third {
                if let Some(p) = pair_row(vout, t) {
                    let val = c.mul(&p);
                    // x0 carries -kb-1, x2 carries -ka-1
                    d02.entry((-kb - 1, -ka - 1))
                        .and_modify(|x| *x = x.add(&val))
                        .or_insert(val);
                }
            }
        }
    }
    d12.retain(|_, c| !c.is_zero());
    d21.retain(|_, c| !c.is_zero());
    d02.retain(|_, c| !c.is_zero());
    // search bounds
    for t in 0..=max_t {
        // (x1 - x2)^t expanded
        let mut denom_t: Biv = BTreeMap::new();
        for k in 0..=t {
            let mut c = binomial(t, k);
            if k % 2 == 1 {
                c = -c;
            }
            denom_t.insert((t - k, k), Coefficient::from_rat(ring, c));
        }
        for r in 0..=max_r {
            for s in 0..=max_r {
                // g = D * x1^r x2^s (x1-x2)^t must be polynomial of bounded degree
                let mut g: Biv = BTreeMap::new();
                for (e, c) in &denom_t {
                    let shifted = biv_mul_monomial(&d12, (e.0 + r, e.1 + s), c);
                    g = biv_add(&g, &shifted);
                }
                let poly = g
                    .keys()
                    .all(|e| e.0 >= 0 && e.1 >= 0 && e.0 + e.1 <= max_deg);
                if !poly {
                    continue;
                }
                // commutativity: g == D21 * x1^r x2^s (x1-x2)^t
                let mut g2: Biv = BTreeMap::new();
                for (e, c) in &denom_t {
                    g2 = biv_add(&g2, &biv_mul_monomial(&d21, (e.0 + r, e.1 + s), c));
                }
                let comm = biv_add(&g, &biv_scale(&g2, &-Rat::one())).is_empty();
                // associativity: g(x0 + x2, x2) == D02 * x0^t x2^s (x0+x2)^r
                let mut h: Biv = BTreeMap::new(); // g with x1 -> x0 + x2
                for (e, c) in &g {
                    for k in 0..=e.0 {
                        let bc = binomial(e.0, k);
                        let val = c.scale(&bc);
                        h.entry((k, e.1 + e.0 - k))
                            .and_modify(|x| *x = x.add(&val))
                            .or_insert(val);
                    }
                }
                h.retain(|_, c| !c.is_zero());
                let mut denom_r: Biv = BTreeMap::new();
                for k in 0..=r {
                    denom_r.insert((r - k, k), Coefficient::from_rat(ring, binomial(r, k)));
                }
                let mut h2: Biv = BTreeMap::new();
                for (e, c) in &denom_r {
                    h2 = biv_add(&h2, &biv_mul_monomial(&d02, (e.0 + t, e.1 + s), c));
                }
                let assoc = biv_add(&h, &biv_scale(&h2, &-Rat::one())).is_empty();
                return Ok(RationalCertificate {
                    g,
                    r,
                    s,
                    t,
                    commutativity_ok: comm,
                    associativity_ok: assoc,
                });
            }
        }
    }
    Err(VocError::NoCertificateWithinBounds(format!(
        "no polynomial numerator with r,s <= {max_r}, t <= {max_t}, degree <= {max_deg}"
    )))
}

// ---------------------------------------------------------------------------
// the two functors on generator inputs
// ---------------------------------------------------------------------------

/// Evaluate the geometric comultiplication on a canonical element of small
/// arity, exactly; positions become formal or rational parameter powers.
pub fn voc_to_gvoc_mu(v: &VocData, q: &ModuliElement, _order: i64) -> Result<GradedMap, VocError> {
    if q.family != Family::Kstar {
        return Err(VocError::InvariantViolation(
            "comultiplication takes outgoing-family elements".into(),
        ));
    }
    let ring = &v.ring;
    let ops = derive_virasoro_ops(v);
    let exp_minus = |a: &[Coefficient]| -> Result<GradedMap, VocError> {
        // exp(-sum_j A_j L(-j))
        let mut gen = GradedMap::zero(&v.space, 1);
        for (i, c) in a.iter().enumerate() {
            let j = (i + 1) as i64;
            let l = ops
                .at(-j)
                .ok_or_else(|| VocError::WindowLimited(format!("operator -{j} untracked")))?;
            gen = gen.add(&l.scale(&c.neg()));
        }
        Ok(op_exp(&gen, ring))
    };
    let exp_plus = |a: &[Coefficient]| -> Result<GradedMap, VocError> {
        let mut gen = GradedMap::zero(&v.space, 1);
        for (i, c) in a.iter().enumerate() {
            let j = (i + 1) as i64;
            let l = ops
                .at(j)
                .ok_or_else(|| VocError::WindowLimited(format!("operator {j} untracked")))?;
            gen = gen.add(&l.scale(&c.neg()));
        }
        Ok(op_exp(&gen, ring))
    };
    let diag_scaling = |a0: &Coefficient| -> Result<GradedMap, VocError> {
        let mut m = GradedMap::zero(&v.space, 1);
        for b in v.basis() {
            let p = a0
                .pow_i(-b.0)
                .map_err(|e| VocError::InvariantViolation(e.to_string()))?;
            m.push(b, vec![b], p);
        }
        Ok(m)
    };
    if q.arity == 0 {
        let o = q.origin.as_ref().unwrap();
        let e = exp_plus(&o.a)?;
        let row = row_compose(&v.covacuum, &e);
        let mut m = GradedMap::zero(&v.space, 0);
        for (b, c) in row {
            m.push(b, vec![], c);
        }
        return Ok(m);
    }
    let o = q.origin.as_ref().unwrap();
    // input side: exp(-sum A_j^{(1)} L(j)) a0^{-L0}
    let input_op = op_compose(&exp_plus(&o.a)?, &diag_scaling(&o.a0)?);
    // the iterated coproduct with positions substituted
    let n = q.arity;
    let mut chain = GradedMap::identity(&v.space, ring);
    let mut note = Vec::new();
    for i in 1..n {
        // puncture -i sits at positions[n - 1 - i]; the substituted value is
        // the reciprocal of the stored location
        let loc = &q.positions[n - 1 - i];
        let zi = loc
            .invert()
            .map_err(|e| VocError::InvariantViolation(e.to_string()))?;
        note.push(format!("x{i} = 1/loc(-{i})"));
        let y_at = coproduct_at(v, &zi)?;
        // apply to the last slot of the current chain
        chain = apply_to_last_slot(&y_at, &chain);
    }
    let mut m = precompose(&chain, &input_op);
    // output side: slot i gets (a0^{(-i)})^{-L0} exp(-sum A^{(-i)}_j L(-j));
    // slot n gets exp(-sum A^{(-n)}_j L(-j))
    for i in 1..n {
        let c = &q.coords[n - 1 - i];
        let op = op_compose(&diag_scaling(&c.a0)?, &exp_minus(&c.a)?);
        m = op_on_slot(&op, &m, i);
    }
    let e_inf = exp_minus(q.a_inf.as_ref().unwrap())?;
    m = op_on_slot(&e_inf, &m, n);
    // record the observed degree in the position parameters: the uniform
    // bound cannot be certified beyond the window, only observed
    let mut observed = 0i32;
    for row in m.entries.values() {
        for (_, c) in row {
            for pname in ["z1", "z2"] {
                if c.ring().index_of(pname).is_some() {
                    if let Some(d) = c.max_param_exponent(pname) {
                        observed = observed.max(d);
                    }
                }
            }
        }
    }
    note.push(format!("observed position degree <= {observed}"));
    m.expansion_note = Some(note.join(", "));
    Ok(m)
}

/// Apply an arity-2 map to the last slot of an arity-n map.
fn apply_to_last_slot(y: &GradedMap, m: &GradedMap) -> GradedMap {
    let mut out = GradedMap::zero(&m.space, m.arity + 1);
    out.in_window = m.in_window;
    for (input, row) in &m.entries {
        for (t, c) in row {
            let last = t[m.arity - 1];
            for (t2, c2) in y.row(&last) {
                let mut tt = t.clone();
                tt.pop();
                tt.extend_from_slice(t2);
                out.push(*input, tt, c.mul(c2));
            }
        }
    }
    out
}

/// The extracted triple from an evaluation handle on the generator inputs.
pub struct ExtractedTriple {
    pub delta: BTreeMap<i64, GradedMap>,
    pub covacuum: RowFunctional,
    pub covirasoro: RowFunctional,
}

/// Extract the coalgebra data back from the geometric evaluations:
/// the covacuum from the arity-0 sphere, the current row from the first
/// pole of the deformed sphere, and the coproduct components by residue.
pub fn gvoc_to_voc_extract(v: &VocData, order: i64) -> Result<ExtractedTriple, VocError> {
    let ring = &v.ring;
    // c: mu_0 of the trivial arity-0 sphere
    let q0 = ModuliElement::kstar0(ring, vec![]);
    let m0 = voc_to_gvoc_mu(v, &q0, order)?;
    let mut covacuum: RowFunctional = BTreeMap::new();
    for (b, row) in &m0.entries {
        for (t, c) in row {
            assert!(t.is_empty());
            covacuum.insert(*b, c.clone());
        }
    }
    // rho: minus the first-order coefficient of mu_0 on the deformed sphere
    let eps = Coefficient::param(ring, "eps");
    let q_eps = ModuliElement::kstar0(ring, vec![Coefficient::zero(ring), eps]);
    let m_eps = voc_to_gvoc_mu(v, &q_eps, order)?;
    let mut covirasoro: RowFunctional = BTreeMap::new();
    for (b, row) in &m_eps.entries {
        for (t, c) in row {
            assert!(t.is_empty());
            let d = c.extract_param_power("eps", 1).neg();
            if !d.is_zero() {
                covirasoro.insert(*b, d);
            }
        }
    }
    // Y: residues of mu_2 on the two-puncture generator at the formal point
    let z1 = Coefficient::param(ring, "z1");
    let q2 = ModuliElement::kstar2_generator(ring, z1.invert()?);
    let m2 = voc_to_gvoc_mu(v, &q2, order)?;
    let mut delta: BTreeMap<i64, GradedMap> = BTreeMap::new();
    for (input, row) in &m2.entries {
        for (t, c) in row {
            // c is a Laurent polynomial in z1; the coefficient of z1^{-k-1}
            // belongs to the component of index k
            for k in v.k_window.lo..=v.k_window.hi {
                let part = c.extract_param_power("z1", (-k - 1) as i32);
                if part.is_zero() {
                    continue;
                }
                delta
                    .entry(k)
                    .or_insert_with(|| GradedMap::zero(&v.space, 2))
                    .push(*input, t.clone(), part);
            }
        }
    }
    Ok(ExtractedTriple {
        delta,
        covacuum,
        covirasoro,
    })
}

/// Round-trip and specialized-case report for the two functors, plus one
/// instance of the geometric sewing compatibility with the central factor.
pub fn check_roundtrip_generators(v: &VocData, order: i64) -> Result<AxiomReport, VocError> {
    let ring = &v.ring;
    let mut checks = Vec::new();
    let extracted = gvoc_to_voc_extract(v, order)?;
    // round trip on the coproduct components
    let rt = (|| -> Status {
        for k in v.k_window.lo..=v.k_window.hi {
            let want = v
                .delta
                .get(&k)
                .cloned()
                .unwrap_or_else(|| GradedMap::zero(&v.space, 2));
            let got = extracted
                .delta
                .get(&k)
                .cloned()
                .unwrap_or_else(|| GradedMap::zero(&v.space, 2));
            if let Err(w) = got.compare(&want) {
                return Status::Fail(format!("component {k}: {w}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new(
        "roundtrip-coproduct",
        rt,
        format!("k in [{}, {}]", v.k_window.lo, v.k_window.hi),
    ));
    let rc = if extracted.covacuum == v.covacuum {
        Status::Pass
    } else {
        Status::Fail(format!("{:?} vs {:?}", extracted.covacuum, v.covacuum))
    };
    checks.push(Check::new(
        "roundtrip-covacuum",
        rc,
        "full space".to_string(),
    ));
    let rr = if extracted.covirasoro == v.covirasoro {
        Status::Pass
    } else {
        Status::Fail(format!("{:?} vs {:?}", extracted.covirasoro, v.covirasoro))
    };
    checks.push(Check::new(
        "roundtrip-current",
        rr,
        "full space".to_string(),
    ));

    // specialized case: mu_1 on a formal (1,1) element equals the operator
    // word built from the derived operators
    let ops = derive_virasoro_ops(v);
    let special = (|| -> Status {
        let bb = Coefficient::param(ring, "bb");
        let eps = Coefficient::param(ring, "eps");
        let scl = Coefficient::param(ring, "scl");
        let q = ModuliElement::kstar1(vec![eps.clone()], scl.clone(), vec![bb.clone()]);
        let got = match voc_to_gvoc_mu(v, &q, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        // want: exp(-eps L(-1)) exp(-bb L(1)) scl^{-L0}
        let lm1 = match ops.at(-1) {
            Some(l) => l.clone(),
            None => return Status::WindowLimited("operator -1 untracked".into()),
        };
        let l1 = match ops.at(1) {
            Some(l) => l.clone(),
            None => return Status::WindowLimited("operator 1 untracked".into()),
        };
        let e_minus = op_exp(&lm1.scale(&eps.neg()), ring);
        let e_plus = op_exp(&l1.scale(&bb.neg()), ring);
        let mut diag = GradedMap::zero(&v.space, 1);
        for b in v.basis() {
            match scl.pow_i(-b.0) {
                Ok(p) => diag.push(b, vec![b], p),
                Err(_) => return Status::Fail("scaling power failed".into()),
            }
        }
        let want = op_compose(&e_minus, &op_compose(&e_plus, &diag));
        Status::from_result(got.compare(&want))
    })();
    checks.push(Check::new(
        "specialized-arity1",
        special,
        "formal coordinates".to_string(),
    ));

    // specialized case: mu_0 of the trivial sphere is the covacuum (by the
    // extraction above) and mu_2 at the formal point is the coproduct series
    let special2 = (|| -> Status {
        let z1 = Coefficient::param(ring, "z1");
        let q2 = match z1.invert() {
            Ok(zi) => ModuliElement::kstar2_generator(ring, zi),
            Err(e) => return Status::Fail(e.to_string()),
        };
        let got = match voc_to_gvoc_mu(v, &q2, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let want = match coproduct_at(v, &z1) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        Status::from_result(got.compare(&want))
    })();
    checks.push(Check::new(
        "specialized-arity2",
        special2,
        "formal position".to_string(),
    ));

    // grading instance: mu_1 of a pure scaling acts by inverse weight powers
    let grading = (|| -> Status {
        let scl = Coefficient::param(ring, "scl");
        let q = ModuliElement::kstar1(vec![], scl.clone(), vec![]);
        let got = match voc_to_gvoc_mu(v, &q, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let mut want = GradedMap::zero(&v.space, 1);
        for b in v.basis() {
            match scl.pow_i(-b.0) {
                Ok(p) => want.push(b, vec![b], p),
                Err(_) => return Status::Fail("power failed".into()),
            }
        }
        Status::from_result(got.compare(&want))
    })();
    checks.push(Check::new(
        "grading-instance",
        grading,
        "formal scaling".to_string(),
    ));

    // sewing instance on a formal (1,1) pair, including the central factor
    let sewing = (|| -> Status {
        let bb = Coefficient::param(ring, "bb");
        let eps = Coefficient::param(ring, "eps");
        let scl = Coefficient::param(ring, "scl");
        let q1 = ModuliElement::kstar1(vec![], scl.clone(), vec![bb.clone()]);
        let q2 = ModuliElement::kstar1(vec![eps.clone()], Coefficient::one(ring), vec![]);
        let sewn = match sew(&q1, 1, &q2, order) {
            Ok(s) => s,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let mu1 = match voc_to_gvoc_mu(v, &q1, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let mu2 = match voc_to_gvoc_mu(v, &q2, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let contracted =
            match t_contract(&mu1, &mu2, 1).and_then(|ct| contract_at_one(&ct, mu2.in_window)) {
                Ok(m) => m,
                Err(e) => return Status::Fail(e.to_string()),
            };
        let mu_sewn = match voc_to_gvoc_mu(v, &sewn.element, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let gamma = match &sewn.gamma {
            Some(g) => g.clone(),
            None => return Status::Fail("no central scalar recorded".into()),
        };
        // mu(sewn) * e^{-Gamma d} with d the rank
        let factor = gamma.scale(&-v.rank.clone()).exp_series();
        let rhs = mu_sewn.scale(&factor);
        Status::from_result(contracted.compare(&rhs))
    })();
    checks.push(Check::new(
        "sewing-instance",
        sewing,
        "formal (1,1) pair".to_string(),
    ));

    // permutation instance on the arity-2 generator
    let perm = (|| -> Status {
        let z1 = Coefficient::param(ring, "z1");
        let q = match z1.invert() {
            Ok(zi) => ModuliElement::kstar2_generator(ring, zi),
            Err(e) => return Status::Fail(e.to_string()),
        };
        let sq = match permute(&[2, 1], &q, order) {
            Ok(s) => s,
            Err(e) => return Status::Fail(e.to_string()),
        };
        let lhs = match voc_to_gvoc_mu(v, &q, order) {
            Ok(m) => m.sym_act(&[2, 1]),
            Err(e) => return Status::Fail(e.to_string()),
        };
        let rhs = match voc_to_gvoc_mu(v, &sq, order) {
            Ok(m) => m,
            Err(e) => return Status::Fail(e.to_string()),
        };
        Status::from_result(lhs.compare(&rhs))
    })();
    checks.push(Check::new(
        "permutation-instance",
        perm,
        "formal position".to_string(),
    ));

    Ok(AxiomReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::rat;

    fn ring() -> Arc<ParameterRing> {
        standard_ring(4)
    }

    #[test]
    fn trivial_passes_all_axioms() {
        let r = ring();
        let v = VocData::trivial(&r);
        let rep = check_axioms(&v).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
    }

    #[test]
    fn trivial_passes_derived_properties() {
        let r = ring();
        let v = VocData::trivial(&r);
        let rep = check_derived_properties(&v).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
    }

    #[test]
    fn rank_mutation_fails_bracket() {
        let r = ring();
        let mut v = VocData::trivial(&r);
        v.rank = Rat::one();
        let rep = check_axioms(&v).unwrap();
        let bracket = rep.find("virasoro-bracket").unwrap();
        assert!(bracket.status.failed(), "{:?}", bracket);
        // all other axioms survive
        assert!(rep.find("counit").unwrap().status.passed());
        assert!(rep.find("jacobi").unwrap().status.passed());
    }

    #[test]
    fn coproduct_mutation_fails_counit_and_jacobi() {
        let r = ring();
        let mut v2 = VocData::trivial(&r);
        let d = v2.delta.get_mut(&-1).unwrap();
        d.push((0, 0), vec![(0, 0), (0, 0)], Coefficient::one(&r));
        let rep = check_axioms(&v2).unwrap();
        assert!(rep.find("counit").unwrap().status.failed());
        if let Status::Fail(w) = &rep.find("counit").unwrap().status {
            assert!(w.contains("component"), "witness: {w}");
        }
    }

    #[test]
    fn asymmetric_coproduct_mutation_fails_jacobi_with_witness() {
        let r = ring();
        let basis = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]];
        let mut v = VocData::group_like(&r, 2, &basis);
        let d = v.delta.get_mut(&-1).unwrap();
        d.push((0, 0), vec![(0, 0), (0, 1)], Coefficient::one(&r));
        let rep = check_axioms(&v).unwrap();
        let jac = rep.find("jacobi").unwrap();
        assert!(jac.status.failed());
        if let Status::Fail(w) = &jac.status {
            assert!(w.contains("exponents"), "witness locates the cell: {w}");
            assert!(w.contains("slot"), "witness locates the tensor slot: {w}");
        }
    }

    #[test]
    fn group_like_family_passes() {
        let r = ring();
        let basis = vec![
            vec![rat(1, 1), rat(2, 1), rat(0, 1)],
            vec![rat(0, 1), rat(1, 1), rat(3, 1)],
            vec![rat(1, 1), rat(1, 1), rat(1, 1)],
        ];
        let v = VocData::group_like(&r, 3, &basis);
        let rep = check_axioms(&v).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
        let rep = check_derived_properties(&v).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
    }

    #[test]
    fn trivial_roundtrip() {
        let r = ring();
        let v = VocData::trivial(&r);
        let rep = check_roundtrip_generators(&v, 8).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
    }

    #[test]
    fn group_like_roundtrip() {
        let r = ring();
        let basis = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]];
        let v = VocData::group_like(&r, 2, &basis);
        let rep = check_roundtrip_generators(&v, 8).unwrap();
        assert!(rep.all_passed(), "{:#?}", rep.checks);
    }

    #[test]
    fn rational_reconstruction_trivial() {
        let r = ring();
        let v = VocData::trivial(&r);
        let mut vout = BTreeMap::new();
        vout.insert(
            vec![(0usize as i64, 0usize), (0, 0), (0, 0)]
                .into_iter()
                .collect::<Vec<BasisIndex>>(),
            Coefficient::one(&r),
        );
        let cert = rational_reconstruct(&v, (0, 0), &vout, 2, 4, 8).unwrap();
        assert_eq!(cert.r, 0);
        assert_eq!(cert.s, 0);
        assert_eq!(cert.t, 0);
        assert!(cert.commutativity_ok);
        assert!(cert.associativity_ok);
        // g = 1
        assert_eq!(cert.g.len(), 1);
        assert!(cert.g.get(&(0, 0)).unwrap().is_one());
    }

    #[test]
    fn rational_reconstruction_flags_mutation() {
        let r = ring();
        let mut v = VocData::trivial(&r);
        // break cocommutativity-like structure: distort one double block
        let d = v.delta.get_mut(&-2).unwrap();
        d.push((0, 0), vec![(0, 0), (0, 0)], Coefficient::one(&r));
        // weight law fails for that block, so fix the space: use weight -1...
        // instead, mutate within the law: impossible on a 1-dim space without
        // shifting weights, so verify the reconstruction notices the changed
        // series via associativity
        let mut vout = BTreeMap::new();
        vout.insert(
            vec![(0i64, 0usize), (0, 0), (0, 0)] as Vec<BasisIndex>,
            Coefficient::one(&r),
        );
        let cert = rational_reconstruct(&v, (0, 0), &vout, 2, 4, 8);
        match cert {
            Ok(c) => assert!(!(c.commutativity_ok && c.associativity_ok)),
            Err(VocError::NoCertificateWithinBounds(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn current_commutation_holds_for_arbitrary_current_rows() {
        // the residue identity for the grading current is a consequence of
        // the coalgebraic Jacobi identity alone, so it must hold for any
        // current row over a Jacobi-passing coproduct, even when the other
        // current-row laws fail
        let r = ring();
        let basis = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]];
        let mut v = VocData::group_like(&r, 2, &basis);
        v.covirasoro.insert((0, 0), Coefficient::from_int(&r, 3));
        v.covirasoro.insert((0, 1), Coefficient::from_int(&r, -2));
        let ax = check_axioms(&v).unwrap();
        assert!(ax.find("jacobi").unwrap().status.passed());
        let rep = check_derived_properties(&v).unwrap();
        let cc = rep.find("current-commutation").unwrap();
        assert!(cc.status.passed(), "{cc:?}");
        // while the row itself is not a lawful current
        assert!(rep.find("current-doubling").unwrap().status.failed());
    }

    #[test]
    fn arity3_comultiplication_matches_iterated_coproduct() {
        // the trivial three-puncture element at formal locations evaluates
        // to the doubly iterated coproduct; the oracle expands slot by slot
        // through the checker-side helper
        let r = ring();
        let basis = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]];
        let v = VocData::group_like(&r, 2, &basis);
        let z1 = Coefficient::param(&r, "z1");
        let z2 = Coefficient::param(&r, "z2");
        let q3 = ModuliElement {
            family: Family::Kstar,
            arity: 3,
            a_inf: Some(vec![]),
            positions: vec![z2.invert().unwrap(), z1.invert().unwrap()],
            coords: vec![
                crate::virasoro::LocalCoordinate::trivial(
                    &r,
                    crate::virasoro::VanishingAt::Infinity,
                ),
                crate::virasoro::LocalCoordinate::trivial(
                    &r,
                    crate::virasoro::VanishingAt::Infinity,
                ),
            ],
            origin: Some(crate::virasoro::LocalCoordinate::trivial(
                &r,
                crate::virasoro::VanishingAt::Zero,
            )),
        };
        let got = voc_to_gvoc_mu(&v, &q3, 8).unwrap();
        assert!(got
            .expansion_note
            .as_ref()
            .is_some_and(|n| n.contains("observed position degree")));
        let allowed = v.weight_allowed_k();
        let mut want = GradedMap::zero(&v.space, 3);
        for b in v.basis() {
            let base = tensor1(b, &r);
            for k1 in allowed.lo..=allowed.hi {
                let first = expand_slot(&v, &base, k1, 1).unwrap();
                if first.is_empty() {
                    continue;
                }
                for k2 in allowed.lo..=allowed.hi {
                    let second = expand_slot(&v, &first, k2, 2).unwrap();
                    if second.is_empty() {
                        continue;
                    }
                    let zpow = z1.pow_i(-k1 - 1).unwrap().mul(&z2.pow_i(-k2 - 1).unwrap());
                    for (t, c) in &second {
                        want.push(b, t.clone(), c.mul(&zpow));
                    }
                }
            }
        }
        got.compare(&want).unwrap();
    }

    #[test]
    fn sewing_compatibility_beyond_arity_one() {
        // the comultiplication respects sewing an arity-2 element over an
        // arity-1 one: the contraction of the evaluations equals the
        // evaluation of the sewn element (the central factor is 1 at rank 0,
        // and the requested central scalar vanishes for a trivial incoming
        // coordinate)
        use crate::graded::{contract_at_one, t_contract};
        let r = ring();
        let basis = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]];
        let v = VocData::group_like(&r, 2, &basis);
        let z1 = Coefficient::param(&r, "z1");
        let eps = Coefficient::param(&r, "eps");
        let bb = Coefficient::param(&r, "bb");
        let q1 = ModuliElement::kstar2_generator(&r, z1.invert().unwrap());
        let q2 = ModuliElement::kstar1(
            vec![Coefficient::zero(&r), eps],
            Coefficient::one(&r),
            vec![bb],
        );
        let sewn = sew(&q1, 1, &q2, 8).unwrap();
        assert!(sewn.gamma.as_ref().is_some_and(|g| g.is_zero()));
        let mu1 = voc_to_gvoc_mu(&v, &q1, 8).unwrap();
        let mu2 = voc_to_gvoc_mu(&v, &q2, 8).unwrap();
        let lhs = contract_at_one(&t_contract(&mu1, &mu2, 1).unwrap(), mu2.in_window).unwrap();
        let rhs = voc_to_gvoc_mu(&v, &sewn.element, 8).unwrap();
        lhs.compare(&rhs).unwrap();
    }

    #[test]
    fn reconstruction_reports_window_limited_input() {
        let r = ring();
        let mut v = VocData::trivial(&r);
        // shrink the tracked window below the weight-allowed range
        v.k_window = crate::series::Iv::new(-2, 2);
        v.delta.retain(|k, _| v.k_window.contains(*k));
        let vout = BTreeMap::new();
        match rational_reconstruct(&v, (0, 0), &vout, 2, 4, 8) {
            Err(VocError::WindowLimited(_)) => {}
            other => panic!("expected a window-limited report, got {other:?}"),
        }
    }

    #[test]
    fn derive_ops_trivial_all_zero() {
        let r = ring();
        let v = VocData::trivial(&r);
        let ops = derive_virasoro_ops(&v);
        for l in ops.l.values() {
            assert!(l.is_zero());
        }
    }

    #[test]
    fn derived_ops_indexing() {
        // a nonzero current row makes the operator of index k read the
        // component of index 1-k
        let r = ring();
        let mut v = VocData::trivial(&r);
        v.covirasoro.insert((0, 0), Coefficient::one(&r));
        let ops = derive_virasoro_ops(&v);
        // component -1 is the only nonzero one: so only index k = 2 sees it
        for (k, l) in ops.l.iter() {
            if *k == 2 {
                assert!(!l.is_zero(), "index 2 reads component -1");
            } else {
                assert!(l.is_zero(), "index {k} must be zero");
            }
        }
    }
}
