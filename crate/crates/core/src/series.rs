//! Exact truncated formal Laurent series in finitely many commuting variables.
//!
//! A series value tracks, per variable, two intervals: the *window* of
//! exponents whose coefficients are explicitly known, and an outer *support*
//! band outside of which the true series is known to vanish. Coefficients
//! inside the support band but outside the window are unknown. Every
//! operation computes the largest window on which its output is fully
//! determined by the inputs' windows; comparisons only ever look at
//! determined exponents.

use crate::ring::{binomial, inv_factorial, Coefficient, ParameterRing, Rat};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub const NEG_INF: i64 = i64::MIN / 4;
pub const POS_INF: i64 = i64::MAX / 4;

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("no output exponent is fully determined by the input windows")]
    EmptyResultWindow,
    #[error("ill-defined composition: {0}")]
    IllDefinedComposition(String),
    #[error("series is not invertible: {0}")]
    NotInvertible(String),
    #[error("window for {var} excludes exponent -1")]
    WindowExcludesResidue { var: String },
    #[error("substitution limit is not resolvable on the window: {0}")]
    LimitUndetermined(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
}

/// Closed integer interval with infinity sentinels; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Iv {
    pub lo: i64,
    pub hi: i64,
}

fn sat(x: i64) -> i64 {
    x.clamp(NEG_INF, POS_INF)
}

fn sat_add(a: i64, b: i64) -> i64 {
    if a <= NEG_INF || b <= NEG_INF {
        NEG_INF
    } else if a >= POS_INF || b >= POS_INF {
        POS_INF
    } else {
        sat(a + b)
    }
}

impl Iv {
    pub fn new(lo: i64, hi: i64) -> Self {
        Iv { lo, hi }
    }

    pub fn all() -> Self {
        Iv {
            lo: NEG_INF,
            hi: POS_INF,
        }
    }

    pub fn empty() -> Self {
        Iv { lo: 1, hi: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn add(&self, o: &Iv) -> Iv {
        if self.is_empty() || o.is_empty() {
            return Iv::empty();
        }
        Iv {
            lo: sat_add(self.lo, o.lo),
            hi: sat_add(self.hi, o.hi),
        }
    }

    pub fn inter(&self, o: &Iv) -> Iv {
        Iv {
            lo: self.lo.max(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    pub fn hull(&self, o: &Iv) -> Iv {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        Iv {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    fn subtract_all(&self, cuts: &[Iv]) -> Vec<Iv> {
        let mut parts = vec![*self];
        for c in cuts {
            if c.is_empty() {
                continue;
            }
            let mut next = Vec::new();
            for p in parts {
                if p.is_empty() || c.hi < p.lo || c.lo > p.hi {
                    next.push(p);
                    continue;
                }
                if c.lo > p.lo {
                    next.push(Iv::new(p.lo, c.lo - 1));
                }
                if c.hi < p.hi {
                    next.push(Iv::new(c.hi + 1, p.hi));
                }
            }
            parts = next;
        }
        parts
    }
}

/// Per-variable bookkeeping: name, known window, support band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub win: Iv,
    pub supp: Iv,
}

impl VarInfo {
    /// Fully known object: support equals the window.
    pub fn poly(name: &str, lo: i64, hi: i64) -> Self {
        VarInfo {
            name: name.to_string(),
            win: Iv::new(lo, hi),
            supp: Iv::new(lo, hi),
        }
    }

    /// Window into a series of unbounded support in both directions.
    pub fn window(name: &str, lo: i64, hi: i64) -> Self {
        VarInfo {
            name: name.to_string(),
            win: Iv::new(lo, hi),
            supp: Iv::all(),
        }
    }

    /// Window into a series supported on `[supp_lo, +inf)`.
    pub fn lower_bounded(name: &str, lo: i64, hi: i64, supp_lo: i64) -> Self {
        VarInfo {
            name: name.to_string(),
            win: Iv::new(lo, hi),
            supp: Iv::new(supp_lo, POS_INF),
        }
    }

    /// Window into a series supported on `(-inf, supp_hi]`.
    pub fn upper_bounded(name: &str, lo: i64, hi: i64, supp_hi: i64) -> Self {
        VarInfo {
            name: name.to_string(),
            win: Iv::new(lo, hi),
            supp: Iv::new(NEG_INF, supp_hi),
        }
    }

    /// Largest interval of exponents whose value is known (explicitly stored
    /// or forced to zero by the support band).
    pub fn known(&self) -> Iv {
        let lo = if self.supp.lo >= self.win.lo {
            NEG_INF
        } else {
            self.win.lo
        };
        let hi = if self.supp.hi <= self.win.hi {
            POS_INF
        } else {
            self.win.hi
        };
        Iv::new(lo, hi)
    }

    fn unknown(&self) -> Vec<Iv> {
        let mut v = Vec::new();
        let below = Iv::new(self.supp.lo, self.win.lo - 1);
        let above = Iv::new(self.win.hi + 1, self.supp.hi);
        if !below.is_empty() {
            v.push(below);
        }
        if !above.is_empty() {
            v.push(above);
        }
        v
    }
}

fn determined_interval(a: &VarInfo, b: &VarInfo) -> (Iv, Iv) {
    // returns (widest fully-determined interval of the convolution, support sum)
    let supp_sum = a.supp.add(&b.supp);
    let mut bad: Vec<Iv> = Vec::new();
    for u in a.unknown() {
        bad.push(u.add(&b.supp));
    }
    for u in b.unknown() {
        bad.push(a.supp.add(&u));
    }
    let widest = supp_sum
        .subtract_all(&bad)
        .into_iter()
        .max_by_key(|p| p.hi.saturating_sub(p.lo))
        .unwrap_or(Iv::empty());
    (widest, supp_sum)
}

#[derive(Clone)]
pub struct TruncatedSeries {
    ring: Arc<ParameterRing>,
    vars: Vec<VarInfo>,
    coeffs: BTreeMap<Vec<i64>, Coefficient>,
}

impl TruncatedSeries {
    pub fn zero(ring: &Arc<ParameterRing>, vars: Vec<VarInfo>) -> Self {
        TruncatedSeries {
            ring: ring.clone(),
            vars,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn ring(&self) -> &Arc<ParameterRing> {
        &self.ring
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> usize {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .unwrap_or_else(|| panic!("unknown series variable {name}"))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<i64>, &Coefficient)> {
        self.coeffs.iter()
    }

    pub fn in_window(&self, e: &[i64]) -> bool {
        e.iter().zip(&self.vars).all(|(x, v)| v.win.contains(*x))
    }

    pub fn is_known(&self, e: &[i64]) -> bool {
        e.iter()
            .zip(&self.vars)
            .all(|(x, v)| v.win.contains(*x) || !v.supp.contains(*x))
    }

    /// Known coefficient at `e`; `None` when the exponent is undetermined.
    pub fn coeff_at(&self, e: &[i64]) -> Option<Coefficient> {
        if !self.is_known(e) {
            return None;
        }
        Some(
            self.coeffs
                .get(e)
                .cloned()
                .unwrap_or_else(|| Coefficient::zero(&self.ring)),
        )
    }

    /// Insert (add) a term; exponents must lie inside the window.
    pub fn set(&mut self, e: Vec<i64>, c: Coefficient) {
        assert!(self.in_window(&e), "exponent {e:?} outside window");
        if c.is_zero() {
            return;
        }
        for (i, x) in e.iter().enumerate() {
            self.vars[i].supp = self.vars[i].supp.hull(&Iv::new(*x, *x));
        }
        match self.coeffs.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    fn set_clipped(&mut self, e: Vec<i64>, c: Coefficient) {
        if self.in_window(&e) {
            self.set(e, c);
        }
    }

    pub fn is_zero_on_window(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn has_empty_window(&self) -> bool {
        self.vars.iter().any(|v| v.win.is_empty())
    }

    fn assert_same_vars(&self, other: &Self) {
        assert_eq!(self.vars.len(), other.vars.len(), "variable lists differ");
        for (a, b) in self.vars.iter().zip(&other.vars) {
            assert_eq!(a.name, b.name, "variable lists differ");
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_vars(other);
        let vars: Vec<VarInfo> = self
            .vars
            .iter()
            .zip(&other.vars)
            .map(|(a, b)| {
                let known = a.known().inter(&b.known());
                VarInfo {
                    name: a.name.clone(),
                    win: known.inter(&a.win.hull(&b.win)),
                    supp: a.supp.hull(&b.supp),
                }
            })
            .collect();
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars,
            coeffs: BTreeMap::new(),
        };
        if out.has_empty_window() {
            return out;
        }
        for (e, c) in &self.coeffs {
            out.set_clipped(e.clone(), c.clone());
        }
        for (e, c) in &other.coeffs {
            out.set_clipped(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn scale(&self, k: &Coefficient) -> Self {
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars: self.vars.clone(),
            coeffs: BTreeMap::new(),
        };
        for (e, c) in &self.coeffs {
            let prod = c.mul(k);
            if !prod.is_zero() {
                out.coeffs.insert(e.clone(), prod);
            }
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        self.scale(&Coefficient::from_rat(&self.ring, r.clone()))
    }

    /// Shift all exponents of one variable by `k` (multiplication by `x^k`).
    pub fn shift_var(&self, name: &str, k: i64) -> Self {
        let i = self.var_index(name);
        let mut out = self.clone();
        out.vars[i].win = out.vars[i].win.add(&Iv::new(k, k));
        out.vars[i].supp = out.vars[i].supp.add(&Iv::new(k, k));
        let coeffs = std::mem::take(&mut out.coeffs);
        for (mut e, c) in coeffs {
            e[i] += k;
            out.coeffs.insert(e, c);
        }
        out
    }

    /// Formal derivative in one variable.
    pub fn derivative(&self, name: &str) -> Self {
        let i = self.var_index(name);
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars: self.vars.clone(),
            coeffs: BTreeMap::new(),
        };
        out.vars[i].win = out.vars[i].win.add(&Iv::new(-1, -1));
        out.vars[i].supp = out.vars[i].supp.add(&Iv::new(-1, -1));
        for (e, c) in &self.coeffs {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.set(e2, c.scale(&Rat::from_integer(e[i].into())));
        }
        out
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, SeriesError> {
        self.assert_same_vars(other);
        let mut vars = Vec::with_capacity(self.vars.len());
        for (a, b) in self.vars.iter().zip(&other.vars) {
            let (widest, supp_sum) = determined_interval(a, b);
            if widest.is_empty() {
                return Err(SeriesError::EmptyResultWindow);
            }
            let band = a.win.add(&b.win);
            let mut win = widest.inter(&band);
            if win.is_empty() {
                // determined but entirely outside the reachable band: all zero
                let tok = if widest.lo > NEG_INF {
                    widest.lo
                } else {
                    widest.hi
                };
                win = Iv::new(tok, tok);
            }
            vars.push(VarInfo {
                name: a.name.clone(),
                win,
                supp: supp_sum,
            });
        }
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars,
            coeffs: BTreeMap::new(),
        };
        for (ea, ca) in &self.coeffs {
            for (eb, cb) in &other.coeffs {
                let e: Vec<i64> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                if out.in_window(&e) {
                    out.set(e, ca.mul(cb));
                }
            }
        }
        Ok(out)
    }

    /// Declare a tighter support band (a structural fact the series
    /// arithmetic cannot see, e.g. that a map vanishes at a point).
    pub fn set_supp(&mut self, name: &str, supp: Iv) {
        let i = self.var_index(name);
        self.vars[i].supp = supp;
    }

    /// Widen the window of a variable; only valid where the series is
    /// already fully determined (the new window must lie in the known region).
    pub fn widen_window(&self, name: &str, lo: i64, hi: i64) -> Self {
        let i = self.var_index(name);
        let k = self.vars[i].known();
        assert!(
            k.lo <= lo && hi <= k.hi,
            "cannot widen window of {name} beyond the known region"
        );
        let mut out = self.clone();
        out.vars[i].win = out.vars[i].win.hull(&Iv::new(lo, hi));
        out
    }

    /// Restrict the window (keeps support).
    pub fn clip(&self, name: &str, lo: i64, hi: i64) -> Self {
        let i = self.var_index(name);
        let mut out = self.clone();
        out.vars[i].win = out.vars[i].win.inter(&Iv::new(lo, hi));
        let w = out.vars[i].win;
        out.coeffs.retain(|e, _| w.contains(e[i]));
        out
    }

    /// Coefficient-of-`v^{-1}` slice as a series in the remaining variables.
    pub fn residue(&self, name: &str) -> Result<Self, SeriesError> {
        self.slice(name, -1)
            .map_err(|_| SeriesError::WindowExcludesResidue {
                var: name.to_string(),
            })
    }

    /// Slice at a fixed exponent of one variable.
    pub fn slice(&self, name: &str, k: i64) -> Result<Self, SeriesError> {
        let i = self.var_index(name);
        if !(self.vars[i].win.contains(k) || !self.vars[i].supp.contains(k)) {
            return Err(SeriesError::WindowTooSmall(format!(
                "exponent {k} of {name} is not determined"
            )));
        }
        let mut vars = self.vars.clone();
        vars.remove(i);
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in &self.coeffs {
            if e[i] == k {
                let mut e2 = e.clone();
                e2.remove(i);
                out.set(e2, c.clone());
            }
        }
        Ok(out)
    }

    /// Value of a zero-variable series.
    pub fn as_coefficient(&self) -> Coefficient {
        assert!(self.vars.is_empty(), "series still has variables");
        self.coeffs
            .values()
            .next()
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(&self.ring))
    }

    /// Substitute a ring element for a variable. The variable must be fully
    /// determined (support inside the known region).
    pub fn eval_var(&self, name: &str, value: &Coefficient) -> Result<Self, SeriesError> {
        let i = self.var_index(name);
        let k = self.vars[i].known();
        if self.vars[i].supp.lo < k.lo || self.vars[i].supp.hi > k.hi {
            return Err(SeriesError::WindowTooSmall(format!(
                "variable {name} is not fully determined; cannot evaluate"
            )));
        }
        let mut vars = self.vars.clone();
        vars.remove(i);
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in &self.coeffs {
            let p = value
                .pow_i(e[i])
                .map_err(|err| SeriesError::NotInvertible(err.to_string()))?;
            let mut e2 = e.clone();
            e2.remove(i);
            let term = c.mul(&p);
            if !term.is_zero() {
                out.set(e2, term);
            }
        }
        Ok(out)
    }

    /// Set `from := to` (merge two variables), for window-resolvable limits.
    pub fn merge_vars(&self, from: &str, to: &str) -> Result<Self, SeriesError> {
        let i = self.var_index(from);
        let j = self.var_index(to);
        assert_ne!(i, j);
        let (widest, supp_sum) = determined_interval(&self.vars[i], &self.vars[j]);
        if widest.is_empty() {
            return Err(SeriesError::LimitUndetermined(format!(
                "{from} -> {to} substitution undetermined everywhere"
            )));
        }
        let band = self.vars[i].win.add(&self.vars[j].win);
        let mut win = widest.inter(&band);
        if win.is_empty() {
            let tok = if widest.lo > NEG_INF {
                widest.lo
            } else {
                widest.hi
            };
            win = Iv::new(tok, tok);
        }
        let mut vars = self.vars.clone();
        vars[j] = VarInfo {
            name: self.vars[j].name.clone(),
            win,
            supp: supp_sum,
        };
        vars.remove(i);
        let mut out = TruncatedSeries {
            ring: self.ring.clone(),
            vars,
            coeffs: BTreeMap::new(),
        };
        for (e, c) in &self.coeffs {
            let mut e2 = e.clone();
            let xi = e2.remove(i);
            let jj = if i < j { j - 1 } else { j };
            e2[jj] += xi;
            out.set_clipped(e2, c.clone());
        }
        Ok(out)
    }

    /// Strict equality in the declared sense: coefficients agree on the
    /// intersection of the windows and each side is zero (or known zero)
    /// on its own window outside that intersection.
    pub fn eq_strict(&self, other: &Self) -> bool {
        self.assert_same_vars(other);
        for (e, c) in &self.coeffs {
            match other.coeff_at(e) {
                Some(oc) => {
                    if oc != *c {
                        return false;
                    }
                }
                None => {
                    if !c.is_zero() {
                        return false;
                    }
                }
            }
        }
        for (e, c) in &other.coeffs {
            if self.coeff_at(e).is_none() && !c.is_zero() {
                return false;
            }
        }
        true
    }

    /// Compare on the common determined region; returns the first witness
    /// exponent on mismatch.
    pub fn compare_on_common(
        &self,
        other: &Self,
    ) -> Result<(), (Vec<i64>, Coefficient, Coefficient)> {
        self.assert_same_vars(other);
        for (e, c) in &self.coeffs {
            if let Some(oc) = other.coeff_at(e) {
                if oc != *c {
                    return Err((e.clone(), c.clone(), oc));
                }
            }
        }
        for (e, oc) in &other.coeffs {
            if let Some(c) = self.coeff_at(e) {
                if c != *oc {
                    return Err((e.clone(), c, oc.clone()));
                }
            }
        }
        Ok(())
    }

    /// The common determined window with `other`, per variable.
    pub fn common_window(&self, other: &Self) -> Vec<(String, Iv)> {
        self.vars
            .iter()
            .zip(&other.vars)
            .map(|(a, b)| (a.name.clone(), a.known().inter(&b.known())))
            .collect()
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.vars.iter().map(|v| v.name.as_str()).collect();
        writeln!(f, "series in {names:?}")?;
        for v in &self.vars {
            let lo = if v.supp.lo <= NEG_INF {
                "-inf".to_string()
            } else {
                v.supp.lo.to_string()
            };
            let hi = if v.supp.hi >= POS_INF {
                "+inf".to_string()
            } else {
                v.supp.hi.to_string()
            };
            writeln!(
                f,
                "  {}: win [{}, {}], supp [{}, {}]",
                v.name, v.win.lo, v.win.hi, lo, hi
            )?;
        }
        for (e, c) in &self.coeffs {
            writeln!(f, "  {e:?}: {c}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// single-variable helpers
// ---------------------------------------------------------------------------

/// The monomial `c * x^k` as a fully-known single-variable series.
pub fn monomial(
    ring: &Arc<ParameterRing>,
    var: &str,
    k: i64,
    c: Coefficient,
    win: Iv,
) -> TruncatedSeries {
    assert!(win.contains(k), "monomial exponent outside window");
    let mut s = TruncatedSeries::zero(
        ring,
        vec![VarInfo {
            name: var.to_string(),
            win,
            supp: Iv::new(k, k),
        }],
    );
    s.set(vec![k], c);
    s
}

/// The identity series `x` on a window.
pub fn identity(ring: &Arc<ParameterRing>, var: &str, win: Iv) -> TruncatedSeries {
    monomial(ring, var, 1, Coefficient::one(ring), win)
}

/// Multiplicative inverse of a single-variable series whose support is
/// bounded on at least one side with an invertible extreme coefficient.
pub fn invert_series(f: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(f.vars.len(), 1);
    let v = f.vars[0].clone();
    let name = v.name.clone();
    let from_below = v.supp.lo > NEG_INF;
    let from_above = v.supp.hi < POS_INF;
    if !from_below && !from_above {
        return Err(SeriesError::NotInvertible(
            "support unbounded on both sides".into(),
        ));
    }
    // locate the actual extreme nonzero coefficient (the support band is
    // only an upper bound on the support)
    let mut val = if from_below { v.supp.lo } else { v.supp.hi };
    loop {
        if !v.win.contains(val) {
            return Err(SeriesError::NotInvertible(
                "cannot locate the leading coefficient inside the window".into(),
            ));
        }
        if f.coeff_at(&[val]).is_some_and(|c| !c.is_zero()) {
            break;
        }
        val += if from_below { 1 } else { -1 };
    }
    let lead = f.coeff_at(&[val]).unwrap();
    let lead_inv = lead
        .invert()
        .map_err(|e| SeriesError::NotInvertible(e.to_string()))?;
    // f = lead x^val (1 + h) with h supported strictly toward the interior
    let mut h = f.shift_var(&name, -val).scale(&lead_inv);
    h.vars[0].supp = if from_below {
        Iv::new(0, POS_INF)
    } else {
        Iv::new(NEG_INF, 0)
    };
    let one = monomial(&f.ring, &name, 0, Coefficient::one(&f.ring), h.vars[0].win);
    let h = h.sub(&one);
    let width = (v.win.hi - v.win.lo).max(0);
    let mut acc = one.clone();
    let mut pow = one;
    for _ in 0..width {
        pow = pow.multiply(&h)?.neg();
        if pow.is_zero_on_window() {
            break;
        }
        acc = acc.add(&pow);
    }
    let mut out = acc.scale(&lead_inv).shift_var(&name, -val);
    out.vars[0].supp = if from_below {
        Iv::new(-val, POS_INF)
    } else {
        Iv::new(NEG_INF, -val)
    };
    Ok(out)
}

/// Composition `g(f(x))` for single-variable series. `f` must have strictly
/// positive valuation; negative exponents of `g` additionally require the
/// valuation to be exactly 1 with an invertible linear coefficient.
pub fn compose(g: &TruncatedSeries, f: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(g.vars.len(), 1);
    assert_eq!(f.vars.len(), 1);
    let gv = g.vars[0].clone();
    if gv.supp.lo <= NEG_INF {
        return Err(SeriesError::IllDefinedComposition(
            "outer series support unbounded below".into(),
        ));
    }
    if f.vars[0].supp.lo < 1 {
        return Err(SeriesError::IllDefinedComposition(
            "inner series must have positive valuation".into(),
        ));
    }
    let needs_inverse = gv.supp.lo < 0;
    if needs_inverse && f.vars[0].supp.lo != 1 {
        return Err(SeriesError::IllDefinedComposition(
            "negative exponents of the outer series need valuation-1 inner series".into(),
        ));
    }
    let f_inv = if needs_inverse {
        Some(invert_series(f)?)
    } else {
        None
    };
    let e_lo = gv.supp.lo;
    let e_hi = gv.win.hi.min(gv.supp.hi);
    let mut out: Option<TruncatedSeries> = None;
    let mut pow: Option<TruncatedSeries> = None;
    for e in e_lo..=e_hi {
        let fe = match &mut pow {
            None => {
                let first = match e.cmp(&0) {
                    std::cmp::Ordering::Equal => monomial(
                        &f.ring,
                        &f.vars[0].name,
                        0,
                        Coefficient::one(&f.ring),
                        f.vars[0].win,
                    ),
                    std::cmp::Ordering::Greater => {
                        let mut acc = f.clone();
                        for _ in 1..e {
                            acc = acc.multiply(f)?;
                        }
                        acc
                    }
                    std::cmp::Ordering::Less => {
                        let fi = f_inv.as_ref().unwrap();
                        let mut acc = fi.clone();
                        for _ in 1..(-e) {
                            acc = acc.multiply(fi)?;
                        }
                        acc
                    }
                };
                pow = Some(first);
                pow.as_ref().unwrap().clone()
            }
            Some(p) => {
                *p = p.multiply(f)?;
                p.clone()
            }
        };
        let c = g.coeff_at(&[e]).ok_or_else(|| {
            SeriesError::IllDefinedComposition(format!("outer coefficient at {e} undetermined"))
        })?;
        if c.is_zero() {
            continue;
        }
        let term = fe.scale(&c);
        out = Some(match out {
            None => term,
            Some(o) => o.add(&term),
        });
    }
    let mut out = match out {
        Some(o) => o,
        None => TruncatedSeries::zero(
            &g.ring,
            vec![VarInfo {
                name: f.vars[0].name.clone(),
                win: f.vars[0].win,
                supp: Iv::new(e_lo.min(0), POS_INF),
            }],
        ),
    };
    if gv.supp.hi > gv.win.hi {
        // unknown high exponents of g reach output exponents above the window top
        let name = out.vars[0].name.clone();
        let cap = gv.win.hi.min(out.vars[0].win.hi);
        out = out.clip(&name, out.vars[0].win.lo, cap);
        out.vars[0].supp = Iv::new(out.vars[0].supp.lo, POS_INF);
    }
    Ok(out)
}

/// The constant `c` as a single-variable series.
pub fn constant_series(
    ring: &Arc<ParameterRing>,
    var: &str,
    c: Coefficient,
    win: Iv,
) -> TruncatedSeries {
    monomial(ring, var, 0, c, win.hull(&Iv::new(0, 0)))
}

/// `sum_e f_e inner^e` over the window of `f`. The inner series may have a
/// constant term; negative exponents of `f` require it to be invertible.
/// Exactness relies on the window of `f` covering every exponent whose
/// coefficient survives degree truncation.
pub fn eval_series_at(
    f: &TruncatedSeries,
    inner: &TruncatedSeries,
) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(f.vars.len(), 1);
    assert_eq!(inner.vars.len(), 1);
    let e_lo = f.vars[0].win.lo.max(f.vars[0].supp.lo);
    let e_hi = f.vars[0].win.hi.min(f.vars[0].supp.hi);
    let inner_inv = if e_lo < 0 {
        Some(invert_series(inner)?)
    } else {
        None
    };
    let one = monomial(
        &inner.ring,
        &inner.vars[0].name,
        0,
        Coefficient::one(&inner.ring),
        inner.vars[0].win.hull(&Iv::new(0, 0)),
    );
    let mut out: Option<TruncatedSeries> = None;
    let mut pow: Option<TruncatedSeries> = None;
    for e in e_lo..=e_hi {
        let pe = match &mut pow {
            None => {
                let first = match e.cmp(&0) {
                    std::cmp::Ordering::Equal => one.clone(),
                    std::cmp::Ordering::Greater => {
                        let mut acc = inner.clone();
                        for _ in 1..e {
                            acc = acc.multiply(inner)?;
                        }
                        acc
                    }
                    std::cmp::Ordering::Less => {
                        let fi = inner_inv.as_ref().unwrap();
                        let mut acc = fi.clone();
                        for _ in 1..(-e) {
                            acc = acc.multiply(fi)?;
                        }
                        acc
                    }
                };
                pow = Some(first);
                pow.as_ref().unwrap().clone()
            }
            Some(p) => {
                *p = p.multiply(inner)?;
                p.clone()
            }
        };
        let c = match f.coeff_at(&[e]) {
            Some(c) => c,
            None => continue,
        };
        if c.is_zero() {
            continue;
        }
        let term = pe.scale(&c);
        out = Some(match out {
            None => term,
            Some(o) => o.add(&term),
        });
    }
    out.ok_or(SeriesError::EmptyResultWindow)
}

/// Compositional inverse through `x^order`: returns `g` with `f(g(x)) = x`.
pub fn compositional_inverse(
    f: &TruncatedSeries,
    order: i64,
) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(f.vars.len(), 1);
    assert!(order >= 1);
    let name = f.vars[0].name.clone();
    if f.vars[0].supp.lo < 0 || f.coeff_at(&[0]).is_none_or(|c| !c.is_zero()) {
        return Err(SeriesError::NotInvertible(
            "compositional inverse needs zero constant term".into(),
        ));
    }
    let c1 = f
        .coeff_at(&[1])
        .ok_or_else(|| SeriesError::NotInvertible("linear coefficient unknown".into()))?;
    let c1_inv = c1
        .invert()
        .map_err(|_| SeriesError::NotInvertible("linear coefficient not invertible".into()))?;
    let mut g = monomial(&f.ring, &name, 1, c1_inv.clone(), Iv::new(1, order));
    for m in 2..=order {
        let fg = compose(f, &g)?;
        let r = fg.coeff_at(&[m]).ok_or_else(|| {
            SeriesError::WindowTooSmall(format!("window cannot determine inverse coefficient {m}"))
        })?;
        // f(g + d x^m) = f(g) + c1 d x^m + higher
        g.set(vec![m], r.neg().mul(&c1_inv));
    }
    Ok(g)
}

/// Composition `F(H(w))` where both series have the shape `w + c + O(1/w)`.
pub fn compose_at_infinity(
    f: &TruncatedSeries,
    h: &TruncatedSeries,
) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(f.vars.len(), 1);
    assert_eq!(h.vars.len(), 1);
    let name = h.vars[0].name.clone();
    let h_inv = invert_series(h)?;
    let mut out: Option<TruncatedSeries> = None;
    for e in f.vars[0].win.lo..=1 {
        let c = match f.coeff_at(&[e]) {
            Some(c) => c,
            None => continue,
        };
        if c.is_zero() {
            continue;
        }
        let he = match e.cmp(&0) {
            std::cmp::Ordering::Equal => {
                monomial(&f.ring, &name, 0, Coefficient::one(&f.ring), h.vars[0].win)
            }
            std::cmp::Ordering::Greater => h.clone(),
            std::cmp::Ordering::Less => {
                let mut acc = h_inv.clone();
                for _ in 1..(-e) {
                    acc = acc.multiply(&h_inv)?;
                }
                acc
            }
        };
        let term = he.scale(&c);
        out = Some(match out {
            None => term,
            Some(o) => o.add(&term),
        });
    }
    let mut out = out.ok_or(SeriesError::EmptyResultWindow)?;
    // knowledge of f below its window floor is missing; those terms only
    // affect exponents at or below the floor
    let floor = f.vars[0].known().lo;
    let name = out.vars[0].name.clone();
    let hi = out.vars[0].win.hi;
    let lo = out.vars[0].win.lo.max(floor);
    out = out.clip(&name, lo, hi);
    Ok(out)
}

/// Compositional inverse at infinity for `F(w) = w + c + O(1/w)`:
/// returns `H` of the same shape with `F(H(w)) = w` on exponents `[-order, 1]`.
pub fn invert_at_infinity(f: &TruncatedSeries, order: i64) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(f.vars.len(), 1);
    let name = f.vars[0].name.clone();
    if f.vars[0].supp.hi != 1 {
        return Err(SeriesError::NotInvertible(
            "expected a series of the shape w + c + O(1/w)".into(),
        ));
    }
    if f.coeff_at(&[1]).is_none_or(|c| !c.is_one()) {
        return Err(SeriesError::NotInvertible(
            "leading coefficient at infinity must be 1".into(),
        ));
    }
    let mut h = identity(&f.ring, &name, Iv::new(-order, 1));
    h.vars[0].supp = Iv::new(NEG_INF, 1);
    for m in (-order..=0).rev() {
        let fh = compose_at_infinity(f, &h)?;
        let r = fh.coeff_at(&[m]).ok_or_else(|| {
            SeriesError::WindowTooSmall(format!("cannot determine inverse coefficient {m}"))
        })?;
        if !r.is_zero() {
            h.set(vec![m], r.neg());
        }
    }
    Ok(h)
}

/// `exp(sum_m c_m x^m d/dx)` applied to a single-variable series.
///
/// Terminates either because every generator coefficient has positive
/// parameter degree (degree truncation) or because all exponent shifts
/// `m - 1` share a strict sign (the window bounds the sum).
pub fn exp_derivation(
    terms: &[(i64, Coefficient)],
    g: &TruncatedSeries,
) -> Result<TruncatedSeries, SeriesError> {
    assert_eq!(g.vars.len(), 1);
    let live: Vec<(i64, Coefficient)> = terms
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .cloned()
        .collect();
    if live.is_empty() {
        return Ok(g.clone());
    }
    let degree_bounded = live
        .iter()
        .all(|(_, c)| c.min_degree().is_none_or(|d| d >= 1));
    let all_up = live.iter().all(|(m, _)| *m > 1);
    let all_down = live.iter().all(|(m, _)| *m - 1 <= -1);
    let window_span = (g.vars[0].win.hi - g.vars[0].win.lo).max(0) + 2;
    let mut n_max = i64::MAX / 2;
    if degree_bounded {
        n_max = n_max.min(g.ring().max_degree());
    }
    if all_up || all_down {
        n_max = n_max.min(window_span);
    }
    if n_max >= i64::MAX / 2 {
        return Err(SeriesError::IllDefinedComposition(
            "exponential of a mixed-direction derivation with degree-zero coefficients".into(),
        ));
    }
    let name = g.vars[0].name.clone();
    let apply = |s: &TruncatedSeries| -> TruncatedSeries {
        let d = s.derivative(&name);
        let mut acc: Option<TruncatedSeries> = None;
        for (m, c) in &live {
            let t = d.shift_var(&name, *m).scale(c);
            acc = Some(match acc {
                None => t,
                Some(a) => a.add(&t),
            });
        }
        acc.unwrap()
    };
    let mut out = g.clone();
    let mut pow = g.clone();
    for n in 1..=n_max {
        pow = apply(&pow);
        let ps = pow.vars[0].supp;
        let ow = out.vars[0].win;
        if (all_up && ps.lo > ow.hi) || (all_down && ps.hi < ow.lo) {
            break;
        }
        out = out.add(&pow.scale_rat(&inv_factorial(n as u32)));
        if out.has_empty_window() {
            break;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// iota expansions and delta series
// ---------------------------------------------------------------------------

/// Which variable of a binomial carries nonnegative powers after expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NonnegativeInFirst,
    NonnegativeInSecond,
}

/// `(x_a + sign * x_b)^n` expanded with nonnegative powers of the designated
/// variable, on the given two-variable window.
#[allow(clippy::too_many_arguments)]
pub fn iota_expand(
    ring: &Arc<ParameterRing>,
    var_a: &str,
    sign: i64,
    var_b: &str,
    n: i64,
    direction: Direction,
    win_a: Iv,
    win_b: Iv,
) -> TruncatedSeries {
    assert!(sign == 1 || sign == -1);
    if n >= 0 {
        let mut s = TruncatedSeries::zero(
            ring,
            vec![
                VarInfo {
                    name: var_a.to_string(),
                    win: win_a.hull(&Iv::new(0, n)),
                    supp: Iv::new(0, n),
                },
                VarInfo {
                    name: var_b.to_string(),
                    win: win_b.hull(&Iv::new(0, n)),
                    supp: Iv::new(0, n),
                },
            ],
        );
        for k in 0..=n {
            let mut c = binomial(n, k);
            if sign == -1 && k % 2 == 1 {
                c = -c;
            }
            s.set(vec![n - k, k], Coefficient::from_rat(ring, c));
        }
        return s;
    }
    let pos_is_b = matches!(direction, Direction::NonnegativeInSecond);
    let (supp_a, supp_b) = if pos_is_b {
        (Iv::new(NEG_INF, n), Iv::new(0, POS_INF))
    } else {
        (Iv::new(0, POS_INF), Iv::new(NEG_INF, n))
    };
    let mut s = TruncatedSeries::zero(
        ring,
        vec![
            VarInfo {
                name: var_a.to_string(),
                win: win_a,
                supp: supp_a,
            },
            VarInfo {
                name: var_b.to_string(),
                win: win_b,
                supp: supp_b,
            },
        ],
    );
    // nonneg in b: (x_a + s x_b)^n = sum_{k>=0} C(n,k) s^k x_a^{n-k} x_b^k
    // nonneg in a: (x_a + s x_b)^n = s^n sum_{k>=0} C(n,k) s^k x_b^{n-k} x_a^k
    let pos_hi = if pos_is_b { win_b.hi } else { win_a.hi };
    for k in 0..=pos_hi.max(0) {
        let mut c = binomial(n, k);
        if sign == -1 && k % 2 == 1 {
            c = -c;
        }
        if !pos_is_b && sign == -1 && n % 2 != 0 {
            c = -c;
        }
        let e = if pos_is_b {
            vec![n - k, k]
        } else {
            vec![k, n - k]
        };
        if s.in_window(&e) {
            s.set(e, Coefficient::from_rat(ring, c));
        }
    }
    s
}

/// `delta(x1/x2) = sum_n x1^n x2^{-n}` restricted to a window.
pub fn delta_ratio(
    ring: &Arc<ParameterRing>,
    x1: &str,
    x2: &str,
    win1: Iv,
    win2: Iv,
) -> TruncatedSeries {
    let mut s = TruncatedSeries::zero(
        ring,
        vec![
            VarInfo {
                name: x1.to_string(),
                win: win1,
                supp: Iv::all(),
            },
            VarInfo {
                name: x2.to_string(),
                win: win2,
                supp: Iv::all(),
            },
        ],
    );
    for n in win1.lo..=win1.hi {
        if win2.contains(-n) {
            s.set(vec![n, -n], Coefficient::one(ring));
        }
    }
    s
}

/// `delta((x_a + sign*x_b)/x_c) = sum_n (x_a + sign x_b)^n x_c^{-n}` with the
/// binomials expanded in nonnegative powers of `x_b`. Variables are in the
/// constructed order `(x_a, x_b, x_c)`.
#[allow(clippy::too_many_arguments)]
pub fn delta_composite(
    ring: &Arc<ParameterRing>,
    var_a: &str,
    sign: i64,
    var_b: &str,
    var_c: &str,
    win_a: Iv,
    win_b: Iv,
    win_c: Iv,
) -> TruncatedSeries {
    let mut s = TruncatedSeries::zero(
        ring,
        vec![
            VarInfo {
                name: var_a.to_string(),
                win: win_a,
                supp: Iv::all(),
            },
            VarInfo {
                name: var_b.to_string(),
                win: win_b,
                supp: Iv::new(0, POS_INF),
            },
            VarInfo {
                name: var_c.to_string(),
                win: win_c,
                supp: Iv::all(),
            },
        ],
    );
    for n in (-win_c.hi)..=(-win_c.lo) {
        for k in 0..=win_b.hi.max(0) {
            let a_exp = n - k;
            if !win_a.contains(a_exp) || !win_b.contains(k) {
                continue;
            }
            let mut c = binomial(n, k);
            if sign == -1 && k % 2 == 1 {
                c = -c;
            }
            if c != Rat::from_integer(0.into()) {
                s.set(vec![a_exp, k, -n], Coefficient::from_rat(ring, c));
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// delta-function laws
// ---------------------------------------------------------------------------

/// Outcome of one identity comparison.
#[derive(Debug, Clone)]
pub enum LawOutcome {
    Pass { window: String },
    Fail { witness: String },
}

impl LawOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, LawOutcome::Pass { .. })
    }
}

#[derive(Debug, Clone)]
pub struct DeltaLawsReport {
    pub substitution: LawOutcome,
    pub shift: LawOutcome,
    pub three_term: LawOutcome,
}

impl DeltaLawsReport {
    pub fn all_passed(&self) -> bool {
        self.substitution.passed() && self.shift.passed() && self.three_term.passed()
    }
}

fn outcome(cmp: Result<(), (Vec<i64>, Coefficient, Coefficient)>, window: String) -> LawOutcome {
    match cmp {
        Ok(()) => LawOutcome::Pass { window },
        Err((e, l, r)) => LawOutcome::Fail {
            witness: format!("exponent {e:?}: {l} vs {r}"),
        },
    }
}

/// Reorder a three-variable series: `perm[i]` is the new position of the
/// i-th constructed variable.
pub fn reorder3(s: &TruncatedSeries, perm: [usize; 3]) -> TruncatedSeries {
    let mut vars = vec![
        s.vars()[0].clone(),
        s.vars()[0].clone(),
        s.vars()[0].clone(),
    ];
    for (i, p) in perm.iter().enumerate() {
        vars[*p] = s.vars()[i].clone();
    }
    let mut out = TruncatedSeries::zero(s.ring(), vars);
    let entries: Vec<(Vec<i64>, Coefficient)> =
        s.entries().map(|(e, c)| (e.clone(), c.clone())).collect();
    for (e, c) in entries {
        let mut e2 = vec![0i64; 3];
        for (i, p) in perm.iter().enumerate() {
            e2[*p] = e[i];
        }
        out.set(e2, c);
    }
    out
}

/// Drop the two outermost layers of every window, where convolution with a
/// delta series is incomplete.
pub fn interior(s: &TruncatedSeries) -> TruncatedSeries {
    let mut out = s.clone();
    let names: Vec<String> = out.vars().iter().map(|v| v.name.clone()).collect();
    for n in names {
        let i = out.var_index(&n);
        let w = out.vars()[i].win;
        out = out.clip(&n, w.lo + 2, w.hi - 2);
    }
    out
}

/// Check the three delta-function laws on interior windows of the given
/// radius. `x_factor` is the series X(x1, x2) used in the substitution law;
/// it must have a window-resolvable x1 -> x2 limit. `mutate` perturbs one
/// coefficient on the left of the three-term law to demonstrate witnesses.
pub fn delta_laws_check(
    ring: &Arc<ParameterRing>,
    x_factor: &TruncatedSeries,
    radius: i64,
    mutate: bool,
) -> Result<DeltaLawsReport, SeriesError> {
    let r = radius;
    let wide = Iv::new(-2 * r, 2 * r);

    // substitution law: delta(x1/x2) X(x1,x2) = delta(x1/x2) X(x2,x2)
    let d = delta_ratio(ring, "x1", "x2", wide, wide);
    let lhs = d.multiply(x_factor)?;
    let x_limit_1v = x_factor.merge_vars("x1", "x2")?;
    let mut x_limit = TruncatedSeries::zero(
        ring,
        vec![
            VarInfo {
                name: "x1".into(),
                win: Iv::new(0, 0),
                supp: Iv::new(0, 0),
            },
            x_limit_1v.vars()[0].clone(),
        ],
    );
    let entries: Vec<(Vec<i64>, Coefficient)> = x_limit_1v
        .entries()
        .map(|(e, c)| (e.clone(), c.clone()))
        .collect();
    for (e, c) in entries {
        x_limit.set(vec![0, e[0]], c);
    }
    let rhs = d.multiply(&x_limit)?;
    let substitution = outcome(
        lhs.compare_on_common(&rhs),
        format!("{:?}", lhs.common_window(&rhs)),
    );

    // two-term shift law:
    // x1^{-1} delta((x2+x0)/x1) = x2^{-1} delta((x1-x0)/x2), vars (x0,x1,x2)
    let win = Iv::new(-r, r);
    let lhs2 = {
        let d = delta_composite(ring, "x2", 1, "x0", "x1", win, win, win);
        reorder3(&d, [2, 0, 1]).shift_var("x1", -1)
    };
    let rhs2 = {
        let d = delta_composite(ring, "x1", -1, "x0", "x2", win, win, win);
        reorder3(&d, [1, 0, 2]).shift_var("x2", -1)
    };
    let shift = outcome(
        interior(&lhs2).compare_on_common(&interior(&rhs2)),
        format!("interior radius {}", r - 2),
    );

    // three-term law:
    // x0^{-1} d((x1-x2)/x0) - x0^{-1} d((x2-x1)/(-x0)) = x2^{-1} d((x1-x0)/x2)
    let mut t1 = {
        let d = delta_composite(ring, "x1", -1, "x2", "x0", win, win, win);
        reorder3(&d, [1, 2, 0]).shift_var("x0", -1)
    };
    if mutate {
        t1.set(vec![-1, 1, 1], Coefficient::one(ring));
    }
    let t2 = {
        // delta((x2-x1)/(-x0)): flip the sign of odd x0-frequencies
        let d = delta_composite(ring, "x2", -1, "x1", "x0", win, win, win);
        let mut flipped = TruncatedSeries::zero(
            ring,
            vec![
                VarInfo {
                    name: "x0".into(),
                    win,
                    supp: Iv::all(),
                },
                VarInfo {
                    name: "x1".into(),
                    win,
                    supp: Iv::new(0, POS_INF),
                },
                VarInfo {
                    name: "x2".into(),
                    win,
                    supp: Iv::all(),
                },
            ],
        );
        let entries: Vec<(Vec<i64>, Coefficient)> =
            d.entries().map(|(e, c)| (e.clone(), c.clone())).collect();
        for (e, c) in entries {
            let n = -e[2];
            let c = if n % 2 != 0 { c.neg() } else { c };
            flipped.set(vec![e[2], e[1], e[0]], c);
        }
        flipped.shift_var("x0", -1)
    };
    let rhs3 = {
        let d = delta_composite(ring, "x1", -1, "x0", "x2", win, win, win);
        reorder3(&d, [1, 0, 2]).shift_var("x2", -1)
    };
    let lhs3 = interior(&t1.sub(&t2));
    let three_term = outcome(
        lhs3.compare_on_common(&interior(&rhs3)),
        format!("interior radius {}", r - 2),
    );

    Ok(DeltaLawsReport {
        substitution,
        shift,
        three_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{rat, rat_int};

    fn ring() -> Arc<ParameterRing> {
        ParameterRing::empty(6)
    }

    fn pring() -> Arc<ParameterRing> {
        ParameterRing::new(&[("z", true), ("a", false)], 6)
    }

    #[test]
    fn multiply_polynomials() {
        let r = ring();
        let mut a = TruncatedSeries::zero(&r, vec![VarInfo::poly("w", 0, 1)]);
        a.set(vec![0], Coefficient::one(&r));
        a.set(vec![1], Coefficient::one(&r));
        let mut b = TruncatedSeries::zero(&r, vec![VarInfo::poly("w", 0, 1)]);
        b.set(vec![0], Coefficient::one(&r));
        b.set(vec![1], Coefficient::from_int(&r, -1));
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.coeff_at(&[0]).unwrap(), Coefficient::one(&r));
        assert_eq!(p.coeff_at(&[1]).unwrap(), Coefficient::zero(&r));
        assert_eq!(p.coeff_at(&[2]).unwrap(), Coefficient::from_int(&r, -1));
    }

    #[test]
    fn unit_monomial_multiplication_is_identity() {
        let r = ring();
        let mut s = TruncatedSeries::zero(&r, vec![VarInfo::window("w", -3, 3)]);
        s.set(vec![-2], Coefficient::from_int(&r, 5));
        s.set(vec![1], Coefficient::from_int(&r, 7));
        let one = monomial(&r, "w", 0, Coefficient::one(&r), Iv::new(0, 0));
        let p = s.multiply(&one).unwrap();
        assert_eq!(p.vars()[0].win, Iv::new(-3, 3));
        assert!(p.eq_strict(&s));
    }

    #[test]
    fn delta_annihilates_x1_minus_x2() {
        let r = ring();
        let win = Iv::new(-10, 10);
        let d = delta_ratio(&r, "x1", "x2", win, win);
        let mut f = TruncatedSeries::zero(
            &r,
            vec![VarInfo::poly("x1", 0, 1), VarInfo::poly("x2", 0, 1)],
        );
        f.set(vec![1, 0], Coefficient::one(&r));
        f.set(vec![0, 1], Coefficient::from_int(&r, -1));
        let p = d.multiply(&f).unwrap();
        assert!(p.is_zero_on_window());
        assert!(!p.vars()[0].win.is_empty());
    }

    #[test]
    fn geometric_iota_expansion() {
        let r = ring();
        let s = iota_expand(
            &r,
            "x1",
            -1,
            "x2",
            -1,
            Direction::NonnegativeInSecond,
            Iv::new(-8, 0),
            Iv::new(0, 8),
        );
        for k in 0..=6 {
            assert_eq!(s.coeff_at(&[-k - 1, k]).unwrap(), Coefficient::one(&r));
        }
        let mut f = TruncatedSeries::zero(
            &r,
            vec![VarInfo::poly("x1", 0, 1), VarInfo::poly("x2", 0, 1)],
        );
        f.set(vec![1, 0], Coefficient::one(&r));
        f.set(vec![0, 1], Coefficient::from_int(&r, -1));
        let p = s.multiply(&f).unwrap();
        assert!(p.coeff_at(&[0, 0]).unwrap().is_one());
        let entries: Vec<_> = p.entries().collect();
        assert_eq!(entries.len(), 1, "{p:?}");
    }

    #[test]
    fn iota_negative_power_of_sum() {
        // (x2 + x0)^{-1} in nonnegative powers of x0: sum_k (-1)^k x2^{-k-1} x0^k
        let r = ring();
        let s = iota_expand(
            &r,
            "x2",
            1,
            "x0",
            -1,
            Direction::NonnegativeInSecond,
            Iv::new(-8, 0),
            Iv::new(0, 8),
        );
        for k in 0..=6i64 {
            let expect = Coefficient::from_int(&r, if k % 2 == 0 { 1 } else { -1 });
            assert_eq!(s.coeff_at(&[-k - 1, k]).unwrap(), expect);
        }
    }

    #[test]
    fn iota_finite_binomial() {
        let r = ring();
        let s = iota_expand(
            &r,
            "x1",
            -1,
            "x2",
            2,
            Direction::NonnegativeInFirst,
            Iv::new(0, 4),
            Iv::new(0, 4),
        );
        assert_eq!(s.coeff_at(&[2, 0]).unwrap(), Coefficient::one(&r));
        assert_eq!(s.coeff_at(&[1, 1]).unwrap(), Coefficient::from_int(&r, -2));
        assert_eq!(s.coeff_at(&[0, 2]).unwrap(), Coefficient::one(&r));
    }

    #[test]
    fn compose_polynomial() {
        let r = ring();
        let g = monomial(&r, "x", 2, Coefficient::one(&r), Iv::new(0, 8));
        let mut f = TruncatedSeries::zero(&r, vec![VarInfo::poly("x", 1, 2)]);
        f.set(vec![1], Coefficient::one(&r));
        f.set(vec![2], Coefficient::one(&r));
        let c = compose(&g, &f).unwrap();
        assert_eq!(c.coeff_at(&[2]).unwrap(), Coefficient::one(&r));
        assert_eq!(c.coeff_at(&[3]).unwrap(), Coefficient::from_int(&r, 2));
        assert_eq!(c.coeff_at(&[4]).unwrap(), Coefficient::one(&r));
    }

    #[test]
    fn compose_identity_returns_g() {
        let r = ring();
        let mut g = TruncatedSeries::zero(&r, vec![VarInfo::lower_bounded("x", -3, 5, -3)]);
        g.set(vec![-3], Coefficient::from_int(&r, 4));
        g.set(vec![2], Coefficient::from_int(&r, -7));
        let f = identity(&r, "x", Iv::new(1, 9));
        let c = compose(&g, &f).unwrap();
        assert!(c.compare_on_common(&g).is_ok());
        assert_eq!(c.coeff_at(&[-3]).unwrap(), Coefficient::from_int(&r, 4));
        assert_eq!(c.coeff_at(&[2]).unwrap(), Coefficient::from_int(&r, -7));
    }

    #[test]
    fn reciprocal_of_exp_image() {
        // g = x^{-1}, f = exp(-z x^2 d/dx) x = x/(1+zx); g(f) = x^{-1} + z
        let r = pring();
        let z = Coefficient::param(&r, "z");
        let g = monomial(&r, "x", -1, Coefficient::one(&r), Iv::new(-1, 6));
        let f = exp_derivation(&[(2, z.neg())], &identity(&r, "x", Iv::new(1, 8))).unwrap();
        let c = compose(&g, &f).unwrap();
        assert_eq!(c.coeff_at(&[-1]).unwrap(), Coefficient::one(&r));
        assert_eq!(c.coeff_at(&[0]).unwrap(), z);
        assert!(c.coeff_at(&[1]).unwrap().is_zero());
        assert!(c.coeff_at(&[2]).unwrap().is_zero());
    }

    #[test]
    fn compositional_inverse_catalan_signs() {
        let r = ring();
        let mut f = TruncatedSeries::zero(&r, vec![VarInfo::poly("x", 1, 2)]);
        f.set(vec![1], Coefficient::one(&r));
        f.set(vec![2], Coefficient::one(&r));
        let g = compositional_inverse(&f, 6).unwrap();
        let expect = [1i64, -1, 2, -5, 14, -42];
        for (i, v) in expect.iter().enumerate() {
            assert_eq!(
                g.coeff_at(&[(i + 1) as i64]).unwrap(),
                Coefficient::from_int(&r, *v),
                "coefficient {}",
                i + 1
            );
        }
        let fg = compose(&f, &g).unwrap();
        let gf = compose(&g, &f).unwrap();
        for m in 1..=6 {
            let want = Coefficient::from_int(&r, if m == 1 { 1 } else { 0 });
            assert_eq!(fg.coeff_at(&[m]).unwrap(), want, "f(g) at {m}");
            assert_eq!(gf.coeff_at(&[m]).unwrap(), want, "g(f) at {m}");
        }
    }

    #[test]
    fn lagrange_inversion_oracle_agrees() {
        // independent oracle: g_m = (1/m) [x^{m-1}] (x/f)^m
        let r = ring();
        let mut f = TruncatedSeries::zero(&r, vec![VarInfo::poly("x", 1, 3)]);
        f.set(vec![1], Coefficient::one(&r));
        f.set(vec![2], Coefficient::from_int(&r, 3));
        f.set(vec![3], Coefficient::from_int(&r, -2));
        let g = compositional_inverse(&f, 7).unwrap();
        let inv = invert_series(&f.widen_window("x", 1, 9)).unwrap();
        let x_over_f = inv.shift_var("x", 1);
        for m in 1..=7i64 {
            let mut p = monomial(&r, "x", 0, Coefficient::one(&r), x_over_f.vars()[0].win);
            for _ in 0..m {
                p = p.multiply(&x_over_f).unwrap();
            }
            let oracle = p.coeff_at(&[m - 1]).unwrap().scale(&rat(1, m));
            assert_eq!(g.coeff_at(&[m]).unwrap(), oracle, "order {m}");
        }
    }

    #[test]
    fn scaling_inverse() {
        // f = 2x -> inverse x/2
        let r = ring();
        let f = monomial(&r, "x", 1, Coefficient::from_int(&r, 2), Iv::new(1, 5));
        let g = compositional_inverse(&f, 5).unwrap();
        assert_eq!(
            g.coeff_at(&[1]).unwrap(),
            Coefficient::from_rat(&r, rat(1, 2))
        );
        for m in 2..=5 {
            assert!(g.coeff_at(&[m]).unwrap().is_zero());
        }
    }

    #[test]
    fn invert_series_from_above() {
        // f = w^{-1} - z has support bounded above; 1/f = w/(1 - z w) restricted
        let r = pring();
        let z = Coefficient::param(&r, "z");
        let mut f = TruncatedSeries::zero(&r, vec![VarInfo::upper_bounded("w", -6, 0, 0)]);
        f.set(vec![-1], Coefficient::one(&r));
        f.set(vec![0], z.neg());
        let inv = invert_series(&f).unwrap();
        // 1/f = w (1 - zw)^{-1}... check f * inv = 1
        let p = f.multiply(&inv).unwrap();
        assert!(p.coeff_at(&[0]).unwrap().is_one());
        for e in 1..=3i64 {
            if p.is_known(&[e]) {
                assert!(p.coeff_at(&[e]).unwrap().is_zero(), "at {e}: {p:?}");
            }
        }
    }

    #[test]
    fn invert_at_infinity_round_trip() {
        let r = pring();
        let z = Coefficient::param(&r, "z");
        let mut f = TruncatedSeries::zero(&r, vec![VarInfo::upper_bounded("w", -6, 1, 1)]);
        f.set(vec![1], Coefficient::one(&r));
        f.set(vec![0], z.clone());
        f.set(vec![-1], Coefficient::from_int(&r, 3));
        let h = invert_at_infinity(&f, 6).unwrap();
        let fh = compose_at_infinity(&f, &h).unwrap();
        assert!(fh.coeff_at(&[1]).unwrap().is_one());
        for m in (-4..=0).rev() {
            assert!(fh.coeff_at(&[m]).unwrap().is_zero(), "residual at {m}");
        }
    }

    #[test]
    fn residue_examples() {
        let r = ring();
        let mut s = TruncatedSeries::zero(&r, vec![VarInfo::window("w", -2, 2)]);
        s.set(vec![-1], Coefficient::from_int(&r, 3));
        s.set(vec![1], Coefficient::one(&r));
        let res = s.residue("w").unwrap();
        assert_eq!(res.as_coefficient(), Coefficient::from_int(&r, 3));
        let s2 = monomial(&r, "w", 2, Coefficient::one(&r), Iv::new(-2, 2));
        assert!(s2.residue("w").unwrap().as_coefficient().is_zero());
        let mut s3 = monomial(&r, "w", 2, Coefficient::one(&r), Iv::new(0, 2));
        s3.vars[0].supp = Iv::all();
        assert!(s3.residue("w").is_err());
    }

    #[test]
    fn delta_laws_pass_and_mutation_fails() {
        let r = ring();
        let mut x = TruncatedSeries::zero(
            &r,
            vec![VarInfo::poly("x1", 0, 1), VarInfo::poly("x2", 0, 1)],
        );
        x.set(vec![1, 1], Coefficient::one(&r));
        let rep = delta_laws_check(&r, &x, 8, false).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        let rep = delta_laws_check(&r, &x, 8, true).unwrap();
        assert!(!rep.three_term.passed());
        if let LawOutcome::Fail { witness } = &rep.three_term {
            assert!(witness.contains("exponent"));
        }
    }

    #[test]
    fn residue_of_delta_slice() {
        // Res_{x1} of x1 * delta(x1/x2): the term at x1^{-1} comes from the
        // frequency n = -2 of the delta series, so the slice is x2^2
        let r = ring();
        let win = Iv::new(-10, 10);
        let d = delta_ratio(&r, "x1", "x2", win, win).shift_var("x1", 1);
        let res = d.residue("x1").unwrap();
        assert!(res.coeff_at(&[2]).unwrap().is_one());
        for e in [-3i64, -1, 0, 1, 3, 5] {
            assert!(res.coeff_at(&[e]).unwrap().is_zero(), "exponent {e}");
        }
    }

    #[test]
    fn delta_laws_trivial_x() {
        let r = ring();
        let mut x = TruncatedSeries::zero(
            &r,
            vec![VarInfo::poly("x1", 0, 0), VarInfo::poly("x2", 0, 0)],
        );
        x.set(vec![0, 0], Coefficient::one(&r));
        let rep = delta_laws_check(&r, &x, 6, false).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
    }

    #[test]
    fn limit_of_bi_infinite_series_is_undetermined() {
        let r = ring();
        let win = Iv::new(-6, 6);
        let d = delta_ratio(&r, "x1", "x2", win, win);
        assert!(matches!(
            d.merge_vars("x1", "x2"),
            Err(SeriesError::LimitUndetermined(_))
        ));
    }

    #[test]
    fn negative_exponents_need_invertible_inner_series() {
        let r = ring();
        let mut g = TruncatedSeries::zero(&r, vec![VarInfo::lower_bounded("x", -2, 4, -2)]);
        g.set(vec![-1], Coefficient::one(&r));
        let f = monomial(&r, "x", 2, Coefficient::one(&r), Iv::new(1, 6));
        assert!(matches!(
            compose(&g, &f),
            Err(SeriesError::IllDefinedComposition(_))
        ));
    }

    #[test]
    fn compositional_inverse_rejects_vanishing_linear_term() {
        let r = ring();
        let f = monomial(&r, "x", 2, Coefficient::one(&r), Iv::new(1, 6));
        assert!(matches!(
            compositional_inverse(&f, 5),
            Err(SeriesError::NotInvertible(_))
        ));
    }

    #[test]
    fn exp_derivation_matches_geometric_series() {
        // exp(a w^2 d/dw) w = w / (1 - a w) = sum a^n w^{n+1}
        let r = pring();
        let a = Coefficient::param(&r, "a");
        let g = identity(&r, "w", Iv::new(1, 7));
        let s = exp_derivation(&[(2, a.clone())], &g).unwrap();
        for n in 0..=5u32 {
            assert_eq!(s.coeff_at(&[(n + 1) as i64]).unwrap(), a.pow(n));
        }
    }

    #[test]
    fn exp_derivation_rational_coefficients_window_bounded() {
        // rational coefficients, upward shifts only: terminates via the window
        let r = ring();
        let g = identity(&r, "w", Iv::new(1, 6));
        let s = exp_derivation(&[(2, Coefficient::from_int(&r, 1))], &g).unwrap();
        for n in 0..=4i64 {
            assert_eq!(
                s.coeff_at(&[n + 1]).unwrap(),
                Coefficient::one(&r),
                "at {n}"
            );
        }
    }

    #[test]
    fn merge_vars_diagonal() {
        let r = ring();
        let mut s = TruncatedSeries::zero(
            &r,
            vec![VarInfo::poly("x1", 0, 2), VarInfo::poly("x2", 0, 2)],
        );
        s.set(vec![1, 1], Coefficient::from_int(&r, 2));
        s.set(vec![2, 0], Coefficient::from_int(&r, 3));
        let m = s.merge_vars("x1", "x2").unwrap();
        assert_eq!(m.coeff_at(&[2]).unwrap(), Coefficient::from_int(&r, 5));
        assert_eq!(rat_int(5), rat(10, 2));
    }
}
