//! Ground ring for every series and operator coefficient.
//!
//! Coefficients are exact rational polynomials in a declared list of formal
//! parameters. Parameters marked invertible may carry negative (Laurent)
//! exponents and do not count toward the total-degree truncation bound;
//! all other parameters have nonnegative exponents and their total degree
//! is truncated at `max_degree`. Truncation is part of the ring: products
//! silently drop terms beyond the bound, so every identity checked on top
//! of this ring is an identity "through degree `max_degree`".

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub type Rat = BigRational;

/// Exact rational from a numerator/denominator pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDef {
    pub name: String,
    pub invertible: bool,
}

/// Declaration of the formal parameters in play and the degree bound.
#[derive(Debug, PartialEq, Eq)]
pub struct ParameterRing {
    params: Vec<ParamDef>,
    max_degree: i64,
}

#[derive(Debug, thiserror::Error)]
pub enum RingError {
    #[error("coefficient is not invertible: {0}")]
    NotInvertible(String),
}

impl ParameterRing {
    pub fn new(params: &[(&str, bool)], max_degree: i64) -> Arc<Self> {
        let defs: Vec<ParamDef> = params
            .iter()
            .map(|(n, inv)| ParamDef {
                name: (*n).to_string(),
                invertible: *inv,
            })
            .collect();
        for i in 0..defs.len() {
            for j in (i + 1)..defs.len() {
                assert_ne!(
                    defs[i].name, defs[j].name,
                    "parameter symbols must be distinct"
                );
            }
        }
        assert!(max_degree >= 0);
        Arc::new(ParameterRing {
            params: defs,
            max_degree,
        })
    }

    pub fn empty(max_degree: i64) -> Arc<Self> {
        Self::new(&[], max_degree)
    }

    pub fn params(&self) -> &[ParamDef] {
        &self.params
    }

    pub fn max_degree(&self) -> i64 {
        self.max_degree
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Total degree of a term over the non-invertible parameters.
    fn term_degree(&self, expts: &[i32]) -> i64 {
        expts
            .iter()
            .zip(&self.params)
            .filter(|(_, p)| !p.invertible)
            .map(|(e, _)| *e as i64)
            .sum()
    }

    fn admissible(&self, expts: &[i32]) -> bool {
        for (e, p) in expts.iter().zip(&self.params) {
            if !p.invertible && *e < 0 {
                return false;
            }
        }
        self.term_degree(expts) <= self.max_degree
    }
}

/// A truncated rational polynomial in the ring's parameters.
#[derive(Clone)]
pub struct Coefficient {
    ring: Arc<ParameterRing>,
    terms: BTreeMap<Vec<i32>, Rat>,
}

impl Coefficient {
    pub fn zero(ring: &Arc<ParameterRing>) -> Self {
        Coefficient {
            ring: ring.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(ring: &Arc<ParameterRing>) -> Self {
        Self::from_rat(ring, Rat::one())
    }

    pub fn from_rat(ring: &Arc<ParameterRing>, r: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(vec![0; ring.arity()], r);
        }
        Coefficient {
            ring: ring.clone(),
            terms,
        }
    }

    pub fn from_int(ring: &Arc<ParameterRing>, n: i64) -> Self {
        Self::from_rat(ring, rat_int(n))
    }

    /// The parameter itself, as a coefficient.
    pub fn param(ring: &Arc<ParameterRing>, name: &str) -> Self {
        let idx = ring
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        let mut e = vec![0; ring.arity()];
        e[idx] = 1;
        Self::monomial(ring, e, Rat::one())
    }

    pub fn monomial(ring: &Arc<ParameterRing>, expts: Vec<i32>, r: Rat) -> Self {
        assert_eq!(expts.len(), ring.arity());
        assert!(ring.admissible(&expts), "inadmissible monomial exponents");
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(expts, r);
        }
        Coefficient {
            ring: ring.clone(),
            terms,
        }
    }

    pub fn ring(&self) -> &Arc<ParameterRing> {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(vec![0; self.ring.arity()].as_slice())
                .is_some_and(|r| r.is_one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &Rat)> {
        self.terms.iter()
    }

    /// Rational value of a constant coefficient, if it is one.
    pub fn as_rat(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            let (e, r) = self.terms.iter().next().unwrap();
            if e.iter().all(|x| *x == 0) {
                return Some(r.clone());
            }
        }
        None
    }

    /// Minimum total degree over stored terms; `None` when zero.
    pub fn min_degree(&self) -> Option<i64> {
        self.terms.keys().map(|e| self.ring.term_degree(e)).min()
    }

    fn insert(&mut self, expts: Vec<i32>, r: Rat) {
        if r.is_zero() || !self.ring.admissible(&expts) {
            return;
        }
        match self.terms.entry(expts) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(r);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + r;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(Arc::ptr_eq(&self.ring, &other.ring) || *self.ring == *other.ring);
        let mut out = self.clone();
        for (e, r) in &other.terms {
            out.insert(e.clone(), r.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for r in out.terms.values_mut() {
            *r = -r.clone();
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Coefficient::zero(&self.ring);
        for (ea, ra) in &self.terms {
            for (eb, rb) in &other.terms {
                let e: Vec<i32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(e, ra * rb);
            }
        }
        out
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Coefficient::zero(&self.ring);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.clone() * r;
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Coefficient::one(&self.ring);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Integer power, inverting first when negative.
    pub fn pow_i(&self, k: i64) -> Result<Self, RingError> {
        if k >= 0 {
            Ok(self.pow(k as u32))
        } else {
            Ok(self.invert()?.pow((-k) as u32))
        }
    }

    /// Invert a unit: a single degree-zero monomial in invertible parameters
    /// times (1 + nilpotent), where nilpotency comes from degree truncation.
    pub fn invert(&self) -> Result<Self, RingError> {
        let units: Vec<(&Vec<i32>, &Rat)> = self
            .terms
            .iter()
            .filter(|(e, _)| self.ring.term_degree(e) == 0)
            .collect();
        if units.len() != 1 {
            return Err(RingError::NotInvertible(format!("{self}")));
        }
        let (ue, ur) = (units[0].0.clone(), units[0].1.clone());
        let m_inv = Coefficient::monomial(&self.ring, ue.iter().map(|e| -e).collect(), ur.recip());
        // self = m (1 + n) with n of positive degree
        let n = m_inv.mul(self).sub(&Coefficient::one(&self.ring));
        debug_assert!(n.min_degree().is_none_or(|d| d >= 1));
        let mut geom = Coefficient::one(&self.ring);
        let mut pow = Coefficient::one(&self.ring);
        for _ in 0..self.ring.max_degree() {
            pow = pow.mul(&n).neg();
            if pow.is_zero() {
                break;
            }
            geom = geom.add(&pow);
        }
        Ok(m_inv.mul(&geom))
    }

    /// Terms of exact total parameter degree `d`.
    pub fn degree_part(&self, d: i64) -> Self {
        let mut out = Coefficient::zero(&self.ring);
        for (e, r) in &self.terms {
            if self.ring.term_degree(e) == d {
                out.insert(e.clone(), r.clone());
            }
        }
        out
    }

    /// Truncated exponential series of a coefficient of positive degree.
    pub fn exp_series(&self) -> Self {
        assert!(
            self.min_degree().is_none_or(|d| d >= 1),
            "exp of a coefficient with a degree-zero part"
        );
        let mut out = Coefficient::one(&self.ring);
        let mut pow = Coefficient::one(&self.ring);
        for n in 1..=self.ring.max_degree() {
            pow = pow.mul(self);
            if pow.is_zero() {
                break;
            }
            out = out.add(&pow.scale(&inv_factorial(n as u32)));
        }
        out
    }

    /// Truncated logarithm of `1 + n` with `n` of positive degree.
    pub fn log_series(&self) -> Result<Self, RingError> {
        let n = self.sub(&Coefficient::one(&self.ring));
        if n.min_degree().is_some_and(|d| d < 1) {
            return Err(RingError::NotInvertible(format!(
                "log of a coefficient whose unit part is not 1: {self}"
            )));
        }
        let mut out = Coefficient::zero(&self.ring);
        let mut pow = Coefficient::one(&self.ring);
        for k in 1..=self.ring.max_degree() {
            pow = pow.mul(&n);
            if pow.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            out = out.add(&pow.scale(&rat(sign, k)));
        }
        Ok(out)
    }

    /// Terms whose exponent of `name` equals `k`, with that exponent removed.
    pub fn extract_param_power(&self, name: &str, k: i32) -> Self {
        let idx = self.ring.index_of(name).expect("unknown parameter");
        let mut out = Coefficient::zero(&self.ring);
        for (e, r) in &self.terms {
            if e[idx] == k {
                let mut e2 = e.clone();
                e2[idx] = 0;
                out.insert(e2, r.clone());
            }
        }
        out
    }

    /// Formal partial derivative with respect to a parameter.
    pub fn partial_derivative(&self, name: &str) -> Self {
        let idx = self.ring.index_of(name).expect("unknown parameter");
        let mut out = Coefficient::zero(&self.ring);
        for (e, r) in &self.terms {
            if e[idx] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[idx] -= 1;
            out.insert(e2, r * rat_int(e[idx] as i64));
        }
        out
    }

    /// Substitute a value for one parameter (the value must be invertible
    /// when negative exponents of that parameter are present).
    pub fn eval_param(&self, name: &str, value: &Self) -> Result<Self, RingError> {
        let idx = self.ring.index_of(name).expect("unknown parameter");
        let mut out = Coefficient::zero(&self.ring);
        for (e, r) in &self.terms {
            let mut e2 = e.clone();
            e2[idx] = 0;
            let base = Coefficient::monomial(&self.ring, e2, r.clone());
            out = out.add(&base.mul(&value.pow_i(e[idx] as i64)?));
        }
        Ok(out)
    }

    /// Largest exponent of a parameter over the stored terms.
    pub fn max_param_exponent(&self, name: &str) -> Option<i32> {
        let idx = self.ring.index_of(name).expect("unknown parameter");
        self.terms.keys().map(|e| e[idx]).max()
    }

    /// True when every parameter exponent of `name` matches that of `other_name`
    /// in every stored term (used to confirm dependence only through a product).
    pub fn exponents_locked(&self, name: &str, other_name: &str) -> bool {
        let i = self.ring.index_of(name).expect("unknown parameter");
        let j = self.ring.index_of(other_name).expect("unknown parameter");
        self.terms.keys().all(|e| e[i] == e[j])
    }
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring && self.terms == other.terms
    }
}

impl Eq for Coefficient {}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, r) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mut factors: Vec<String> = Vec::new();
            if !r.is_one() || e.iter().all(|x| *x == 0) {
                factors.push(r.to_string());
            }
            for (k, p) in e.iter().zip(self.ring.params()) {
                match k {
                    0 => {}
                    1 => factors.push(p.name.clone()),
                    _ => factors.push(format!("{}^{}", p.name, k)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// Binomial coefficient `C(n, k)` for integer (possibly negative) `n`.
pub fn binomial(n: i64, k: i64) -> Rat {
    if k < 0 {
        return Rat::zero();
    }
    let mut out = Rat::one();
    for i in 0..k {
        out = out * Rat::from(BigInt::from(n - i)) / Rat::from(BigInt::from(i + 1));
    }
    out
}

/// 1/n! as an exact rational.
pub fn inv_factorial(n: u32) -> Rat {
    let mut out = Rat::one();
    for i in 1..=n {
        out /= Rat::from(BigInt::from(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring() -> Arc<ParameterRing> {
        ParameterRing::new(&[("a1", false), ("a2", false), ("z", true)], 4)
    }

    #[test]
    fn truncation_drops_high_degree() {
        let r = ring();
        let a = Coefficient::param(&r, "a1");
        let p = a.pow(4);
        assert!(!p.is_zero());
        assert!(a.pow(5).is_zero());
    }

    #[test]
    fn invertible_parameter_laurent_exponents() {
        let r = ring();
        let z = Coefficient::param(&r, "z");
        let zi = z.invert().unwrap();
        assert!(z.mul(&zi).is_one());
        // z^-3 is representable and degree-exempt
        let z3 = zi.pow(3);
        assert!(!z3.is_zero());
    }

    #[test]
    fn invert_unit_with_nilpotent_tail() {
        let r = ring();
        let z = Coefficient::param(&r, "z");
        let a = Coefficient::param(&r, "a1");
        let c = z.add(&a); // z (1 + a1/z)
        let ci = c.invert().unwrap();
        assert!(c.mul(&ci).is_one());
    }

    #[test]
    fn sum_of_two_units_is_not_invertible() {
        let r = ParameterRing::new(&[("z", true), ("w", true)], 3);
        let c = Coefficient::param(&r, "z").add(&Coefficient::param(&r, "w"));
        assert!(c.invert().is_err());
    }

    #[test]
    fn derivative_and_extraction() {
        let r = ring();
        let a1 = Coefficient::param(&r, "a1");
        let a2 = Coefficient::param(&r, "a2");
        // 3 a1^2 a2 -> d/da1 = 6 a1 a2
        let c = a1.pow(2).mul(&a2).scale(&rat_int(3));
        let d = c.partial_derivative("a1");
        assert_eq!(d, a1.mul(&a2).scale(&rat_int(6)));
        assert_eq!(c.extract_param_power("a2", 1), a1.pow(2).scale(&rat_int(3)));
    }

    #[test]
    fn binomial_negative_upper() {
        assert_eq!(binomial(-1, 2), rat_int(1));
        assert_eq!(binomial(-2, 3), rat_int(-4));
        assert_eq!(binomial(3, 2), rat_int(3));
        assert_eq!(binomial(3, 5), rat_int(0));
    }
}
