//! Exponential coordinates for local coordinate maps, the derivation action
//! on series, and a weight-truncated PBW realization of the Virasoro algebra
//! with an order-by-order factorizer for products of exponentials.

use crate::ring::{inv_factorial, Coefficient, ParameterRing, Rat, RingError};
use crate::series::{exp_derivation, monomial, Iv, SeriesError, TruncatedSeries, VarInfo};
use num_traits::Zero;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum VirasoroError {
    #[error("not a coordinate map: {0}")]
    NotACoordinateMap(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("factorization underdetermined at degree {degree}: residual word {word}")]
    UnderdeterminedAtDegree { degree: i64, word: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

// ---------------------------------------------------------------------------
// local coordinates in exponential form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VanishingAt {
    Zero,
    Infinity,
}

/// The pair `(a0, A)` encoding a local coordinate map vanishing at 0 or at
/// infinity in exponential form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalCoordinate {
    pub vanishing_at: VanishingAt,
    pub a0: Coefficient,
    pub a: Vec<Coefficient>,
}

impl LocalCoordinate {
    pub fn new(vanishing_at: VanishingAt, a0: Coefficient, a: Vec<Coefficient>) -> Self {
        LocalCoordinate {
            vanishing_at,
            a0,
            a,
        }
    }

    /// Standard coordinate `(1, 0)`.
    pub fn trivial(ring: &Arc<ParameterRing>, vanishing_at: VanishingAt) -> Self {
        LocalCoordinate {
            vanishing_at,
            a0: Coefficient::one(ring),
            a: Vec::new(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.a0.is_one() && self.a.iter().all(|c| c.is_zero())
    }

    /// The coordinate data is fractional-linear (all entries beyond the
    /// first vanish).
    pub fn is_mobius(&self) -> bool {
        self.a.iter().skip(1).all(|c| c.is_zero())
    }

    pub fn a_j(&self, j: usize) -> Coefficient {
        assert!(j >= 1);
        self.a
            .get(j - 1)
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(self.a0.ring()))
    }
}

/// Expand the coordinate map through the requested order, as a series in
/// `var`. For data vanishing at 0 this is
/// `exp(sum_j A_j w^{j+1} d/dw) a0^{w d/dw} w`; at infinity it is the same
/// expression in the reciprocal variable, expanded in powers of `1/w`.
pub fn map_from_coords(
    c: &LocalCoordinate,
    var: &str,
    order: i64,
) -> Result<TruncatedSeries, VirasoroError> {
    assert!(order >= 1);
    let ring = c.a0.ring();
    match c.vanishing_at {
        VanishingAt::Zero => {
            let base = monomial(ring, var, 1, c.a0.clone(), Iv::new(1, order));
            let terms: Vec<(i64, Coefficient)> =
                c.a.iter()
                    .enumerate()
                    .map(|(i, aj)| ((i + 2) as i64, aj.clone()))
                    .collect();
            Ok(exp_derivation(&terms, &base)?)
        }
        VanishingAt::Infinity => {
            // exp(-sum A_j w^{-j+1} d/dw) a0^{-w d/dw} (1/w), a series in 1/w
            let base = monomial(ring, var, -1, c.a0.clone(), Iv::new(-order, -1));
            let terms: Vec<(i64, Coefficient)> =
                c.a.iter()
                    .enumerate()
                    .map(|(i, aj)| (-(i as i64 + 1) + 1, aj.neg()))
                    .collect();
            Ok(exp_derivation(&terms, &base)?)
        }
    }
}

/// Recover the unique `(a0, A)` with `map_from_coords(result) = f` through
/// the order, peeling the scaling off the leading term and solving for the
/// higher coefficients degree by degree.
pub fn coords_from_coordinate_map(
    f: &TruncatedSeries,
    vanishing_at: VanishingAt,
    order: i64,
) -> Result<LocalCoordinate, VirasoroError> {
    assert_eq!(f.vars().len(), 1);
    let ring = f.ring().clone();
    let var = f.vars()[0].name.clone();
    let (lead_exp, step): (i64, i64) = match vanishing_at {
        VanishingAt::Zero => (1, 1),
        VanishingAt::Infinity => (-1, -1),
    };
    if let Some(c) = f.coeff_at(&[0]) {
        if !c.is_zero() {
            return Err(VirasoroError::NotACoordinateMap(
                "nonzero constant term".into(),
            ));
        }
    }
    let a0 = f
        .coeff_at(&[lead_exp])
        .ok_or_else(|| VirasoroError::WindowTooSmall("leading coefficient not in window".into()))?;
    let a0_inv = a0.invert().map_err(|_| {
        VirasoroError::NotACoordinateMap("leading coefficient not invertible".into())
    })?;
    let mut coord = LocalCoordinate::new(vanishing_at, a0.clone(), Vec::new());
    for j in 1..order {
        coord.a.push(Coefficient::zero(&ring));
        let probe = map_from_coords(&coord, &var, order)?;
        let target_exp = lead_exp + step * j;
        let have = probe.coeff_at(&[target_exp]).ok_or_else(|| {
            VirasoroError::WindowTooSmall(format!("cannot determine coefficient {target_exp}"))
        })?;
        let want = f.coeff_at(&[target_exp]).ok_or_else(|| {
            VirasoroError::WindowTooSmall(format!("input window misses {target_exp}"))
        })?;
        let delta = want.sub(&have).mul(&a0_inv);
        let last = coord.a.len() - 1;
        coord.a[last] = delta;
    }
    while coord.a.last().is_some_and(|c| c.is_zero()) {
        coord.a.pop();
    }
    Ok(coord)
}

/// `exp(sum_k A_k x^{k+1} d/dx) g` for positive-index coordinate data.
pub fn apply_exp_derivation(
    a: &[Coefficient],
    g: &TruncatedSeries,
) -> Result<TruncatedSeries, VirasoroError> {
    let terms: Vec<(i64, Coefficient)> = a
        .iter()
        .enumerate()
        .map(|(i, c)| ((i + 2) as i64, c.clone()))
        .collect();
    Ok(exp_derivation(&terms, g)?)
}

/// Negate every exponent of a single-variable series (`w -> 1/w`).
pub fn flip_exponents(s: &TruncatedSeries) -> TruncatedSeries {
    assert_eq!(s.vars().len(), 1);
    let v = &s.vars()[0];
    let flip = |iv: Iv| Iv::new(-iv.hi, -iv.lo);
    let mut out = TruncatedSeries::zero(
        s.ring(),
        vec![VarInfo {
            name: v.name.clone(),
            win: flip(v.win),
            supp: flip(v.supp),
        }],
    );
    for (e, c) in s.entries() {
        out.set(vec![-e[0]], c.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// PBW algebra
// ---------------------------------------------------------------------------

/// PBW word: generator indices in weakly ascending order (index 0 stands for
/// the grading generator), times a power of the central symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PbwWord {
    pub gens: Vec<i64>,
    pub d: u32,
}

impl PbwWord {
    pub fn unit() -> Self {
        PbwWord {
            gens: Vec::new(),
            d: 0,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.gens.is_empty() && self.d == 0
    }

    /// ad-weight of the word: the generator of index k has weight -k.
    pub fn weight(&self) -> i64 {
        -self.gens.iter().sum::<i64>()
    }

    fn is_ordered(&self) -> bool {
        self.gens.windows(2).all(|p| p[0] <= p[1])
    }
}

impl fmt::Display for PbwWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unit() {
            return write!(f, "1");
        }
        let mut parts: Vec<String> = self.gens.iter().map(|k| format!("L({k})")).collect();
        if self.d > 0 {
            parts.push(if self.d == 1 {
                "d".into()
            } else {
                format!("d^{}", self.d)
            });
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// Weight-truncated element of the universal enveloping algebra.
#[derive(Clone)]
pub struct VirasoroElement {
    ring: Arc<ParameterRing>,
    weight_bound: i64,
    terms: BTreeMap<PbwWord, Coefficient>,
    band_limited: bool,
}

impl VirasoroElement {
    pub fn zero(ring: &Arc<ParameterRing>, weight_bound: i64) -> Self {
        VirasoroElement {
            ring: ring.clone(),
            weight_bound,
            terms: BTreeMap::new(),
            band_limited: false,
        }
    }

    pub fn one(ring: &Arc<ParameterRing>, weight_bound: i64) -> Self {
        let mut t = Self::zero(ring, weight_bound);
        t.insert(PbwWord::unit(), Coefficient::one(ring));
        t
    }

    pub fn generator(ring: &Arc<ParameterRing>, weight_bound: i64, k: i64) -> Self {
        let mut t = Self::zero(ring, weight_bound);
        t.insert(
            PbwWord {
                gens: vec![k],
                d: 0,
            },
            Coefficient::one(ring),
        );
        t
    }

    pub fn central(ring: &Arc<ParameterRing>, weight_bound: i64) -> Self {
        let mut t = Self::zero(ring, weight_bound);
        t.insert(
            PbwWord {
                gens: Vec::new(),
                d: 1,
            },
            Coefficient::one(ring),
        );
        t
    }

    /// Linear combination `sum_j c_j L(k_j)`.
    pub fn linear(
        ring: &Arc<ParameterRing>,
        weight_bound: i64,
        terms: &[(i64, Coefficient)],
    ) -> Self {
        let mut t = Self::zero(ring, weight_bound);
        for (k, c) in terms {
            t.insert(
                PbwWord {
                    gens: vec![*k],
                    d: 0,
                },
                c.clone(),
            );
        }
        t
    }

    pub fn ring(&self) -> &Arc<ParameterRing> {
        &self.ring
    }

    pub fn weight_bound(&self) -> i64 {
        self.weight_bound
    }

    pub fn band_limited(&self) -> bool {
        self.band_limited
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PbwWord, &Coefficient)> {
        self.terms.iter()
    }

    pub fn coefficient_of(&self, w: &PbwWord) -> Coefficient {
        self.terms
            .get(w)
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(&self.ring))
    }

    fn insert(&mut self, w: PbwWord, c: Coefficient) {
        debug_assert!(w.is_ordered());
        if c.is_zero() {
            return;
        }
        if w.weight().abs() > self.weight_bound {
            self.band_limited = true;
            return;
        }
        match self.terms.entry(w) {
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

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.weight_bound, other.weight_bound);
        let mut out = self.clone();
        out.band_limited |= other.band_limited;
        for (w, c) in &other.terms {
            out.insert(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn scale(&self, k: &Coefficient) -> Self {
        let mut out = VirasoroElement::zero(&self.ring, self.weight_bound);
        out.band_limited = self.band_limited;
        for (w, c) in &self.terms {
            out.insert(w.clone(), c.mul(k));
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        self.scale(&Coefficient::from_rat(&self.ring, r.clone()))
    }

    /// PBW normal form of the product; words leaving the weight band are
    /// dropped and the result flagged band-limited.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.weight_bound, other.weight_bound);
        let mut out = VirasoroElement::zero(&self.ring, self.weight_bound);
        out.band_limited = self.band_limited || other.band_limited;
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                let mut seq = wa.gens.clone();
                seq.extend_from_slice(&wb.gens);
                normal_order_into(&self.ring, seq, wa.d + wb.d, ca.mul(cb), &mut out);
            }
        }
        out
    }

    /// Truncated exponential; requires positive parameter degree throughout.
    pub fn exp(&self) -> Self {
        assert!(
            self.terms
                .values()
                .all(|c| c.min_degree().is_none_or(|d| d >= 1)),
            "exp of an element with degree-zero coefficients"
        );
        let mut out = VirasoroElement::one(&self.ring, self.weight_bound);
        out.band_limited = self.band_limited;
        let mut pow = VirasoroElement::one(&self.ring, self.weight_bound);
        for n in 1..=self.ring.max_degree() {
            pow = pow.mul(self);
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow.scale_rat(&inv_factorial(n as u32)));
        }
        out
    }

    /// Terms of exact total parameter degree `d`.
    pub fn degree_part(&self, d: i64) -> Self {
        let mut out = VirasoroElement::zero(&self.ring, self.weight_bound);
        for (w, c) in &self.terms {
            out.insert(w.clone(), c.degree_part(d));
        }
        out
    }

    /// Compare; `Err` carries a witness word and the two coefficients.
    pub fn compare(&self, other: &Self) -> Result<(), (PbwWord, Coefficient, Coefficient)> {
        for (w, c) in &self.terms {
            let oc = other.coefficient_of(w);
            if oc != *c {
                return Err((w.clone(), c.clone(), oc));
            }
        }
        for (w, oc) in &other.terms {
            let c = self.coefficient_of(w);
            if c != *oc {
                return Err((w.clone(), c, oc.clone()));
            }
        }
        Ok(())
    }
}

impl PartialEq for VirasoroElement {
    fn eq(&self, other: &Self) -> bool {
        self.compare(other).is_ok()
    }
}

impl fmt::Debug for VirasoroElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| format!("({c}) {w}"))
            .collect();
        write!(f, "{}", parts.join(" + "))?;
        if self.band_limited {
            write!(f, " [band-limited]")?;
        }
        Ok(())
    }
}

/// Bracket constant: `[L(m), L(n)] = (m-n) L(m+n) + (m^3-m)/12 delta_{m,-n} d`.
fn bracket_central(m: i64) -> Rat {
    Rat::new((m * m * m - m).into(), 12.into())
}

fn normal_order_into(
    _ring: &Arc<ParameterRing>,
    seq: Vec<i64>,
    d: u32,
    coeff: Coefficient,
    out: &mut VirasoroElement,
) {
    if coeff.is_zero() {
        return;
    }
    // weight is invariant under reordering; drop early when out of band
    let weight: i64 = -seq.iter().sum::<i64>();
    if weight.abs() > out.weight_bound {
        out.band_limited = true;
        return;
    }
    let mut work: Vec<(Vec<i64>, u32, Coefficient)> = vec![(seq, d, coeff)];
    while let Some((seq, d, coeff)) = work.pop() {
        let pos = seq.windows(2).position(|p| p[0] > p[1]);
        match pos {
            None => out.insert(PbwWord { gens: seq, d }, coeff),
            Some(i) => {
                let (m, n) = (seq[i], seq[i + 1]);
                let mut swapped = seq.clone();
                swapped.swap(i, i + 1);
                work.push((swapped, d, coeff.clone()));
                // commutator term (m-n) L(m+n)
                let mut merged = seq.clone();
                merged.remove(i + 1);
                merged[i] = m + n;
                work.push((merged, d, coeff.scale(&Rat::from_integer((m - n).into()))));
                // central term
                if m == -n {
                    let r = bracket_central(m);
                    if !r.is_zero() {
                        let mut dropped = seq.clone();
                        dropped.remove(i + 1);
                        dropped.remove(i);
                        work.push((dropped, d + 1, coeff.scale(&r)));
                    }
                }
            }
        }
    }
}

/// `a^{L(0)} u a^{-L(0)}`: the generator of index k picks up `a^{-k}`.
pub fn conjugate_scaling(
    a: &Coefficient,
    u: &VirasoroElement,
) -> Result<VirasoroElement, RingError> {
    let mut out = VirasoroElement::zero(u.ring(), u.weight_bound());
    out.band_limited = u.band_limited();
    for (w, c) in u.terms() {
        let s: i64 = w.gens.iter().sum();
        out.insert(w.clone(), c.mul(&a.pow_i(-s)?));
    }
    Ok(out)
}

/// An element times a group-like scaling symbol `s^{L(0)}` kept symbolic.
#[derive(Clone, Debug)]
pub struct ScaledElement {
    pub body: VirasoroElement,
    pub scale: Coefficient,
}

impl ScaledElement {
    pub fn plain(body: VirasoroElement) -> Self {
        let one = Coefficient::one(body.ring());
        ScaledElement { body, scale: one }
    }

    pub fn scaling(ring: &Arc<ParameterRing>, weight_bound: i64, s: Coefficient) -> Self {
        ScaledElement {
            body: VirasoroElement::one(ring, weight_bound),
            scale: s,
        }
    }

    /// `(u s^{L0})(v t^{L0}) = u (s^{L0} v s^{-L0}) (st)^{L0}`.
    pub fn mul(&self, other: &Self) -> Result<Self, RingError> {
        let conj = conjugate_scaling(&self.scale, &other.body)?;
        Ok(ScaledElement {
            body: self.body.mul(&conj),
            scale: self.scale.mul(&other.scale),
        })
    }

    pub fn compare(&self, other: &Self) -> Result<(), String> {
        if self.scale != other.scale {
            return Err(format!(
                "scaling symbols differ: {} vs {}",
                self.scale, other.scale
            ));
        }
        self.body
            .compare(&other.body)
            .map_err(|(w, a, b)| format!("word {w}: {a} vs {b}"))
    }
}

// ---------------------------------------------------------------------------
// exponential factorization
// ---------------------------------------------------------------------------

/// Solution of `g = exp(U) exp(u0 L(0)) exp(V) exp(gamma d)` with `U` spanned
/// by lowering generators and `V` by raising generators.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub lower: BTreeMap<i64, Coefficient>,
    pub l0: Coefficient,
    pub upper: BTreeMap<i64, Coefficient>,
    pub gamma: Coefficient,
}

impl Factorization {
    pub fn lower_element(&self, ring: &Arc<ParameterRing>, n: i64) -> VirasoroElement {
        let terms: Vec<(i64, Coefficient)> =
            self.lower.iter().map(|(j, c)| (-j, c.clone())).collect();
        VirasoroElement::linear(ring, n, &terms)
    }

    pub fn upper_element(&self, ring: &Arc<ParameterRing>, n: i64) -> VirasoroElement {
        let terms: Vec<(i64, Coefficient)> =
            self.upper.iter().map(|(j, c)| (*j, c.clone())).collect();
        VirasoroElement::linear(ring, n, &terms)
    }

    /// Rebuild `exp(U) exp(u0 L0) exp(V) exp(gamma d)`.
    pub fn rebuild(&self, ring: &Arc<ParameterRing>, n: i64) -> VirasoroElement {
        let e_lower = self.lower_element(ring, n).exp();
        let e_l0 = VirasoroElement::linear(ring, n, &[(0, self.l0.clone())]).exp();
        let e_upper = self.upper_element(ring, n).exp();
        let mut e_d = VirasoroElement::zero(ring, n);
        e_d.insert(
            PbwWord {
                gens: Vec::new(),
                d: 1,
            },
            self.gamma.clone(),
        );
        let e_d = e_d.exp();
        e_lower.mul(&e_l0).mul(&e_upper).mul(&e_d)
    }
}

/// Factor a group-like element (a product of exponentials that is 1 at
/// parameter degree 0) into lowering, grading, raising, and central parts,
/// solving order by order in total parameter degree.
pub fn factor_exponentials(g: &VirasoroElement) -> Result<Factorization, VirasoroError> {
    factor_exponentials_banded(g, None)
}

/// Like [`factor_exponentials`] but for inputs built from a weight-truncated
/// family of generators: residual words whose weight leaves the exact band
/// are contaminated by the truncation and are ignored rather than treated
/// as defects.
pub fn factor_exponentials_banded(
    g: &VirasoroElement,
    exact_band: Option<i64>,
) -> Result<Factorization, VirasoroError> {
    let ring = g.ring().clone();
    let n = g.weight_bound();
    let in_band = |w: &PbwWord| -> bool { exact_band.is_none_or(|b| w.weight().abs() <= b) };
    let unit = g.degree_part(0);
    let expected_unit = VirasoroElement::one(&ring, n);
    if unit.compare(&expected_unit).is_err() {
        return Err(VirasoroError::UnderdeterminedAtDegree {
            degree: 0,
            word: "degree-0 part is not 1".into(),
        });
    }
    let mut fac = Factorization {
        lower: BTreeMap::new(),
        l0: Coefficient::zero(&ring),
        upper: BTreeMap::new(),
        gamma: Coefficient::zero(&ring),
    };
    for deg in 1..=ring.max_degree() {
        let rebuilt = fac.rebuild(&ring, n);
        let residual = g.sub(&rebuilt).degree_part(deg);
        for (w, c) in residual.terms() {
            if c.is_zero() || !in_band(w) {
                continue;
            }
            match (w.gens.len(), w.d) {
                (1, 0) => {
                    let k = w.gens[0];
                    if k < 0 {
                        fac.lower
                            .entry(-k)
                            .and_modify(|x| *x = x.add(c))
                            .or_insert_with(|| c.clone());
                    } else if k > 0 {
                        fac.upper
                            .entry(k)
                            .and_modify(|x| *x = x.add(c))
                            .or_insert_with(|| c.clone());
                    } else {
                        fac.l0 = fac.l0.add(c);
                    }
                }
                (0, 1) => {
                    fac.gamma = fac.gamma.add(c);
                }
                _ => {
                    return Err(VirasoroError::UnderdeterminedAtDegree {
                        degree: deg,
                        word: w.to_string(),
                    })
                }
            }
        }
    }
    // verify on the exact band
    let rebuilt = fac.rebuild(&ring, n);
    for (w, c) in g.sub(&rebuilt).terms() {
        if !c.is_zero() && in_band(w) {
            return Err(VirasoroError::UnderdeterminedAtDegree {
                degree: -1,
                word: format!("final residual at {w}: {c}"),
            });
        }
    }
    Ok(fac)
}

// ---------------------------------------------------------------------------
// the two-sided exponential identity
// ---------------------------------------------------------------------------

/// The factorization data of the two-sided exponential identity: the unique
/// `Psi` family and central scalar `Gamma` with
/// `exp(-sum A_j L(j)) (a0 b0)^{-L0} exp(-sum B_j L(-j))
///  = exp(-sum Psi_{-j} L(-j)) (a0 b0)^{-L0} exp(Psi_0 L0)
///    exp(-sum Psi_j L(j)) exp(Gamma d)`.
#[derive(Clone, Debug)]
pub struct BchFactorization {
    pub psi_minus: Vec<Coefficient>,
    pub psi0: Coefficient,
    pub psi_plus: Vec<Coefficient>,
    pub gamma: Coefficient,
    pub scale: Coefficient,
}

impl BchFactorization {
    pub fn psi_minus_j(&self, j: usize) -> Coefficient {
        assert!(j >= 1);
        self.psi_minus
            .get(j - 1)
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(self.psi0.ring()))
    }

    pub fn psi_plus_j(&self, j: usize) -> Coefficient {
        assert!(j >= 1);
        self.psi_plus
            .get(j - 1)
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(self.psi0.ring()))
    }
}

/// Solve the two-sided exponential identity for `Psi` and `Gamma`.
///
/// The group-like scalings are commuted out symbolically first, reducing the
/// problem to factoring `exp(-sum A_j L(j)) exp(-sum s^{-j} B_j L(-j))` in the
/// symbol-free truncated PBW algebra, where `s = a0 b0`.
pub fn bch_factorize(
    a: &[Coefficient],
    b: &[Coefficient],
    alpha0: &Coefficient,
    beta0: &Coefficient,
    weight_bound: i64,
) -> Result<BchFactorization, VirasoroError> {
    let ring = alpha0.ring().clone();
    let s = alpha0.mul(beta0);
    let s_inv = s.invert()?;
    let x_plus: Vec<(i64, Coefficient)> = a
        .iter()
        .enumerate()
        .map(|(i, c)| ((i + 1) as i64, c.neg()))
        .collect();
    let y_minus: Vec<(i64, Coefficient)> = b
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let j = (i + 1) as i64;
            (-j, c.neg().mul(&s_inv.pow((i + 1) as u32)))
        })
        .collect();
    let lhs = VirasoroElement::linear(&ring, weight_bound, &x_plus)
        .exp()
        .mul(&VirasoroElement::linear(&ring, weight_bound, &y_minus).exp());
    if lhs.band_limited() {
        return Err(VirasoroError::WindowTooSmall(format!(
            "weight bound {weight_bound} too small for the requested inputs"
        )));
    }
    let fac = factor_exponentials(&lhs)?;
    // match against exp(-sum Psi_{-j} L(-j)) exp(Psi0 L0) exp(-sum s^j Psi_j L(j)) exp(Gamma d)
    let max_j = fac
        .lower
        .keys()
        .chain(fac.upper.keys())
        .copied()
        .max()
        .unwrap_or(0);
    let mut psi_minus = Vec::new();
    let mut psi_plus = Vec::new();
    for j in 1..=max_j {
        let u = fac
            .lower
            .get(&j)
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(&ring));
        psi_minus.push(u.neg());
        let v = fac
            .upper
            .get(&j)
            .cloned()
            .unwrap_or_else(|| Coefficient::zero(&ring));
        psi_plus.push(v.neg().mul(&s_inv.pow(j as u32)));
    }
    Ok(BchFactorization {
        psi_minus,
        psi0: fac.l0,
        psi_plus,
        gamma: fac.gamma,
        scale: s,
    })
}

/// Left side of the two-sided exponential identity as a scaled element.
pub fn bch_lhs(
    a: &[Coefficient],
    b: &[Coefficient],
    alpha0: &Coefficient,
    beta0: &Coefficient,
    weight_bound: i64,
) -> Result<ScaledElement, VirasoroError> {
    let ring = alpha0.ring().clone();
    let n = weight_bound;
    let ea = ScaledElement::plain(
        VirasoroElement::linear(
            &ring,
            n,
            &a.iter()
                .enumerate()
                .map(|(i, c)| ((i + 1) as i64, c.neg()))
                .collect::<Vec<_>>(),
        )
        .exp(),
    );
    let sa = ScaledElement::scaling(&ring, n, alpha0.invert()?);
    let sb = ScaledElement::scaling(&ring, n, beta0.invert()?);
    let eb = ScaledElement::plain(
        VirasoroElement::linear(
            &ring,
            n,
            &b.iter()
                .enumerate()
                .map(|(i, c)| ((-(i as i64 + 1)), c.neg()))
                .collect::<Vec<_>>(),
        )
        .exp(),
    );
    Ok(ea.mul(&sa)?.mul(&sb)?.mul(&eb)?)
}

/// Right side of the two-sided exponential identity built from a solution.
pub fn bch_rhs(fac: &BchFactorization, weight_bound: i64) -> Result<ScaledElement, VirasoroError> {
    let ring = fac.psi0.ring().clone();
    let n = weight_bound;
    let e_minus = ScaledElement::plain(
        VirasoroElement::linear(
            &ring,
            n,
            &fac.psi_minus
                .iter()
                .enumerate()
                .map(|(i, c)| ((-(i as i64 + 1)), c.neg()))
                .collect::<Vec<_>>(),
        )
        .exp(),
    );
    let scaling = ScaledElement::scaling(&ring, n, fac.scale.invert()?);
    let e_l0 =
        ScaledElement::plain(VirasoroElement::linear(&ring, n, &[(0, fac.psi0.clone())]).exp());
    let e_plus = ScaledElement::plain(
        VirasoroElement::linear(
            &ring,
            n,
            &fac.psi_plus
                .iter()
                .enumerate()
                .map(|(i, c)| ((i as i64 + 1), c.neg()))
                .collect::<Vec<_>>(),
        )
        .exp(),
    );
    let mut gd = VirasoroElement::zero(&ring, n);
    gd.insert(
        PbwWord {
            gens: Vec::new(),
            d: 1,
        },
        fac.gamma.clone(),
    );
    let e_d = ScaledElement::plain(gd.exp());
    Ok(e_minus.mul(&scaling)?.mul(&e_l0)?.mul(&e_plus)?.mul(&e_d)?)
}
