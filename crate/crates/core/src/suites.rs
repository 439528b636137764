//! Named verification suites. Each suite runs a family of exact checks at a
//! chosen truncation order and parameter degree and reports one line per
//! check; deliberate-mutation checks assert that the engine produces a
//! located witness.

use crate::graded::{GradedMap, GradedSpace};
use crate::moduli::{
    operad_transform, permute, sew, verify_first_sewing_identity, verify_second_sewing_identity,
    Family, ModuliElement,
};
use crate::report::{Check, Status};
use crate::ring::{rat, Coefficient, ParameterRing, Rat};
use crate::series::{compose, delta_laws_check, LawOutcome, TruncatedSeries, VarInfo};
use crate::virasoro::{
    apply_exp_derivation, bch_factorize, bch_lhs, bch_rhs, map_from_coords, LocalCoordinate,
    VanishingAt,
};
use crate::voc::{
    check_axioms, check_derived_properties, check_roundtrip_generators, rational_reconstruct,
    standard_ring, VocData,
};
use num_traits::One;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub order: i64,
    pub degree: i64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            order: 8,
            degree: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status.passed())
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.status.failed())
    }

    pub fn any_limited(&self) -> bool {
        self.checks
            .iter()
            .any(|c| matches!(c.status, Status::WindowLimited(_) | Status::Unsupported(_)))
    }
}

pub const SUITE_NAMES: &[&str] = &[
    "delta",
    "compose",
    "bch",
    "sewing-identities",
    "moduli-laws",
    "l-i",
    "contraction-laws",
    "voc-axioms",
    "voc-properties",
    "functor-roundtrip",
];

/// Deterministic pseudo-random stream for the randomized suites.
pub struct Mix(pub u64);

impl Mix {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// small signed rational numerator in [-4, 4]
    fn small(&mut self) -> i64 {
        (self.next_u64() % 9) as i64 - 4
    }

    fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next_u64() % ((hi - lo + 1) as u64)) as i64
    }
}

fn law_check(id: &str, outcome: &LawOutcome) -> Check {
    match outcome {
        LawOutcome::Pass { window } => Check::pass(id, window.clone()),
        LawOutcome::Fail { witness } => {
            Check::new(id, Status::Fail(witness.clone()), "".to_string())
        }
    }
}

fn expect_witness(id: &str, failed: bool, witness: Option<String>) -> Check {
    if failed {
        Check::pass(
            id,
            format!(
                "mutation refused with witness: {}",
                witness.unwrap_or_default()
            ),
        )
    } else {
        Check::new(
            id,
            Status::Fail("deliberate mutation went undetected".into()),
            "".to_string(),
        )
    }
}

// ---------------------------------------------------------------------------
// delta suite
// ---------------------------------------------------------------------------

pub fn suite_delta(_cfg: SuiteConfig) -> SuiteReport {
    let ring = ParameterRing::empty(2);
    let mut checks = Vec::new();
    let mut x_simple = TruncatedSeries::zero(
        &ring,
        vec![VarInfo::poly("x1", 0, 1), VarInfo::poly("x2", 0, 1)],
    );
    x_simple.set(vec![1, 1], Coefficient::one(&ring));
    for radius in [8i64, 10, 12] {
        match delta_laws_check(&ring, &x_simple, radius, false) {
            Ok(rep) => {
                checks.push(law_check(
                    &format!("substitution-radius-{radius}"),
                    &rep.substitution,
                ));
                checks.push(law_check(&format!("shift-radius-{radius}"), &rep.shift));
                checks.push(law_check(
                    &format!("three-term-radius-{radius}"),
                    &rep.three_term,
                ));
            }
            Err(e) => checks.push(Check::new(
                format!("laws-radius-{radius}"),
                Status::Unsupported(e.to_string()),
                "".to_string(),
            )),
        }
    }
    // the identity-factor instance reduces the substitution law to a tautology
    let mut x_one = TruncatedSeries::zero(
        &ring,
        vec![VarInfo::poly("x1", 0, 0), VarInfo::poly("x2", 0, 0)],
    );
    x_one.set(vec![0, 0], Coefficient::one(&ring));
    match delta_laws_check(&ring, &x_one, 8, false) {
        Ok(rep) => checks.push(law_check("substitution-trivial-factor", &rep.substitution)),
        Err(e) => checks.push(Check::new(
            "substitution-trivial-factor",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    // deliberate mutation must fail with a located witness
    match delta_laws_check(&ring, &x_simple, 8, true) {
        Ok(rep) => {
            let failed = !rep.three_term.passed();
            let witness = match &rep.three_term {
                LawOutcome::Fail { witness } => Some(witness.clone()),
                _ => None,
            };
            checks.push(expect_witness("three-term-mutation", failed, witness));
        }
        Err(e) => checks.push(Check::new(
            "three-term-mutation",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    SuiteReport {
        suite: "delta".into(),
        checks,
    }
}

// ---------------------------------------------------------------------------
// compose suite
// ---------------------------------------------------------------------------

pub fn suite_compose(cfg: SuiteConfig) -> SuiteReport {
    let ring = ParameterRing::empty(cfg.degree);
    let mut instances = Vec::new();
    let mut mix = Mix(0xC0FFEE);
    let order = cfg.order;
    for case in 0..50 {
        let len = mix.range(0, 4) as usize;
        let a: Vec<Coefficient> = (0..len)
            .map(|_| Coefficient::from_rat(&ring, rat(mix.small(), mix.range(1, 3))))
            .collect();
        let mut g = TruncatedSeries::zero(&ring, vec![VarInfo::poly("x", -4, 6)]);
        for e in -4..=6 {
            let v = mix.small();
            if v != 0 {
                g.set(vec![e], Coefficient::from_int(&ring, v));
            }
        }
        instances.push((case, a, g));
    }
    // instances are independent; evaluate them on a few worker threads
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut checks: Vec<Option<Check>> = vec![None; instances.len()];
    std::thread::scope(|scope| {
        let chunk = instances.len().div_ceil(workers);
        for (batch, out) in instances.chunks(chunk).zip(checks.chunks_mut(chunk)) {
            scope.spawn(move || {
                for ((case, a, g), slot) in batch.iter().zip(out.iter_mut()) {
                    *slot = Some(compose_instance(*case, a, g, order));
                }
            });
        }
    });
    let checks = checks.into_iter().flatten().collect();
    SuiteReport {
        suite: "compose".into(),
        checks,
    }
}

fn compose_instance(case: usize, a: &[Coefficient], g: &TruncatedSeries, order: i64) -> Check {
    let ring = g.ring().clone();
    let id = format!("exp-derivation-vs-composition-{case}");
    let status = (|| -> Status {
        let lhs = match apply_exp_derivation(a, g) {
            Ok(s) => s,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let f = match map_from_coords(
            &LocalCoordinate::new(VanishingAt::Zero, Coefficient::one(&ring), a.to_vec()),
            "x",
            order + 6,
        ) {
            Ok(s) => s,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let rhs = match compose(g, &f) {
            Ok(s) => s,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let lhs = lhs.clip("x", -4, order);
        let rhs = rhs.clip("x", -4, order);
        if lhs.vars()[0].win.is_empty() {
            return Status::WindowLimited("empty comparison window".into());
        }
        Status::from_result(
            lhs.compare_on_common(&rhs)
                .map_err(|(e, l, r)| format!("exponent {e:?}: {l} vs {r}")),
        )
    })();
    Check::new(id, status, format!("order {order}"))
}

// ---------------------------------------------------------------------------
// bch suite
// ---------------------------------------------------------------------------

/// Exact 2x2 matrices over the coefficient ring.
#[derive(Clone, Debug, PartialEq)]
struct M2([[Coefficient; 2]; 2]);

impl M2 {
    fn identity(ring: &Arc<ParameterRing>) -> Self {
        M2([
            [Coefficient::one(ring), Coefficient::zero(ring)],
            [Coefficient::zero(ring), Coefficient::one(ring)],
        ])
    }

    fn mul(&self, o: &Self) -> Self {
        let mut out = M2([
            [
                Coefficient::zero(self.0[0][0].ring()),
                Coefficient::zero(self.0[0][0].ring()),
            ],
            [
                Coefficient::zero(self.0[0][0].ring()),
                Coefficient::zero(self.0[0][0].ring()),
            ],
        ]);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Coefficient::zero(self.0[0][0].ring());
                for k in 0..2 {
                    acc = acc.add(&self.0[i][k].mul(&o.0[k][j]));
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    fn scale(&self, c: &Coefficient) -> Self {
        M2([
            [self.0[0][0].mul(c), self.0[0][1].mul(c)],
            [self.0[1][0].mul(c), self.0[1][1].mul(c)],
        ])
    }

    fn add(&self, o: &Self) -> Self {
        M2([
            [self.0[0][0].add(&o.0[0][0]), self.0[0][1].add(&o.0[0][1])],
            [self.0[1][0].add(&o.0[1][0]), self.0[1][1].add(&o.0[1][1])],
        ])
    }

    fn exp(&self, ring: &Arc<ParameterRing>) -> Self {
        // entries are nilpotent by degree truncation
        let mut out = M2::identity(ring);
        let mut pow = M2::identity(ring);
        for n in 1..=ring.max_degree() {
            pow = pow.mul(self);
            if pow.0.iter().all(|r| r.iter().all(|c| c.is_zero())) {
                break;
            }
            out = out.add(&pow.scale(&Coefficient::from_rat(
                ring,
                crate::ring::inv_factorial(n as u32),
            )));
        }
        out
    }
}

pub fn suite_bch(cfg: SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    let d = cfg.degree;

    // defining identity with formal data of length 3 and formal scalings
    {
        let ring = ParameterRing::new(
            &[
                ("A1", false),
                ("A2", false),
                ("A3", false),
                ("B1", false),
                ("B2", false),
                ("B3", false),
                ("al0", true),
                ("be0", true),
            ],
            d,
        );
        let a: Vec<Coefficient> = (1..=3)
            .map(|j| Coefficient::param(&ring, &format!("A{j}")))
            .collect();
        let b: Vec<Coefficient> = (1..=3)
            .map(|j| Coefficient::param(&ring, &format!("B{j}")))
            .collect();
        let al0 = Coefficient::param(&ring, "al0");
        let be0 = Coefficient::param(&ring, "be0");
        let nbound = 2 * d * 5 + 8;
        let id_status = (|| -> Status {
            let fac = match bch_factorize(&a, &b, &al0, &be0, nbound) {
                Ok(f) => f,
                Err(e) => return Status::Fail(e.to_string()),
            };
            let lhs = match bch_lhs(&a, &b, &al0, &be0, nbound) {
                Ok(l) => l,
                Err(e) => return Status::Fail(e.to_string()),
            };
            let rhs = match bch_rhs(&fac, nbound) {
                Ok(r) => r,
                Err(e) => return Status::Fail(e.to_string()),
            };
            Status::from_result(lhs.compare(&rhs))
        })();
        checks.push(Check::new(
            "defining-identity-formal",
            id_status,
            format!("length 3, degree {d}, weight band {nbound}"),
        ));

        // scaling dependence only through the product
        let dep = (|| -> Status {
            let fac = match bch_factorize(&a, &b, &al0, &be0, nbound) {
                Ok(f) => f,
                Err(e) => return Status::Fail(e.to_string()),
            };
            let mut all = vec![fac.gamma.clone(), fac.psi0.clone()];
            all.extend(fac.psi_minus.iter().cloned());
            all.extend(fac.psi_plus.iter().cloned());
            for c in all {
                if !c.exponents_locked("al0", "be0") {
                    return Status::Fail(format!("dependence on the scalings separately: {c}"));
                }
            }
            Status::Pass
        })();
        checks.push(Check::new(
            "scaling-product-dependence",
            dep,
            "formal scalings".to_string(),
        ));

        // stability under enlarging the weight band
        let stab = (|| -> Status {
            let f1 = match bch_factorize(&a, &b, &al0, &be0, nbound) {
                Ok(f) => f,
                Err(e) => return Status::Fail(e.to_string()),
            };
            let f2 = match bch_factorize(&a, &b, &al0, &be0, nbound + 2) {
                Ok(f) => f,
                Err(e) => return Status::Fail(e.to_string()),
            };
            if f1.gamma != f2.gamma || f1.psi0 != f2.psi0 {
                return Status::Fail("central or grading part changed with the band".into());
            }
            for j in 1..=(nbound as usize) {
                if f1.psi_minus_j(j) != f2.psi_minus_j(j) || f1.psi_plus_j(j) != f2.psi_plus_j(j) {
                    return Status::Fail(format!("coefficient {j} changed with the band"));
                }
            }
            Status::Pass
        })();
        checks.push(Check::new(
            "band-stability",
            stab,
            format!("bands {nbound} and {}", nbound + 2),
        ));
    }

    // pure subalgebra inputs against the exact 2x2 matrix representation
    {
        let ring = ParameterRing::new(&[("a", false), ("b", false)], 6);
        let a = Coefficient::param(&ring, "a");
        let b = Coefficient::param(&ring, "b");
        let one = Coefficient::one(&ring);
        let status = (|| -> Status {
            let fac = match bch_factorize(
                std::slice::from_ref(&a),
                std::slice::from_ref(&b),
                &one,
                &one,
                16,
            ) {
                Ok(f) => f,
                Err(e) => return Status::Fail(e.to_string()),
            };
            if !fac.gamma.is_zero() {
                return Status::Fail(format!(
                    "central scalar must vanish on the subalgebra: {}",
                    fac.gamma
                ));
            }
            // generators: index 1 -> f, index -1 -> -e, index 0 -> h/2
            let e_mat = |ring: &Arc<ParameterRing>, c: &Coefficient| {
                M2([
                    [Coefficient::zero(ring), c.clone()],
                    [Coefficient::zero(ring), Coefficient::zero(ring)],
                ])
            };
            let f_mat = |ring: &Arc<ParameterRing>, c: &Coefficient| {
                M2([
                    [Coefficient::zero(ring), Coefficient::zero(ring)],
                    [c.clone(), Coefficient::zero(ring)],
                ])
            };
            let h_half = |ring: &Arc<ParameterRing>, c: &Coefficient| {
                M2([
                    [c.scale(&rat(1, 2)), Coefficient::zero(ring)],
                    [Coefficient::zero(ring), c.scale(&rat(-1, 2))],
                ])
            };
            // lhs: exp(-a L(1)) exp(-b L(-1)) = exp(-a f) exp(b e)
            let lhs = f_mat(&ring, &a.neg())
                .exp(&ring)
                .mul(&e_mat(&ring, &b).exp(&ring));
            // rhs: exp(-Psi_{-1} L(-1)) exp(Psi_0 L(0)) exp(-Psi_1 L(1))
            //    = exp(Psi_{-1} e) exp(Psi_0 h/2) exp(-Psi_1 f)
            let rhs = e_mat(&ring, &fac.psi_minus_j(1))
                .exp(&ring)
                .mul(&h_half(&ring, &fac.psi0).exp(&ring))
                .mul(&f_mat(&ring, &fac.psi_plus_j(1).neg()).exp(&ring));
            for i in 0..2 {
                for j in 0..2 {
                    if lhs.0[i][j] != rhs.0[i][j] {
                        return Status::Fail(format!(
                            "matrix entry ({i},{j}): {} vs {}",
                            lhs.0[i][j], rhs.0[i][j]
                        ));
                    }
                }
            }
            Status::Pass
        })();
        checks.push(Check::new(
            "matrix-oracle-degree-6",
            status,
            "exact 2x2 representation".to_string(),
        ));
    }

    // the central scalar vanishes whenever only the indices 0, +1, -1 occur
    {
        let ring = ParameterRing::new(
            &[("a", false), ("b", false), ("al0", true), ("be0", true)],
            d,
        );
        let a = Coefficient::param(&ring, "a");
        let b = Coefficient::param(&ring, "b");
        let al0 = Coefficient::param(&ring, "al0");
        let be0 = Coefficient::param(&ring, "be0");
        let status = match bch_factorize(&[a], &[b], &al0, &be0, 12) {
            Ok(f) => {
                if f.gamma.is_zero() {
                    Status::Pass
                } else {
                    Status::Fail(format!("central scalar {}", f.gamma))
                }
            }
            Err(e) => Status::Fail(e.to_string()),
        };
        checks.push(Check::new(
            "central-vanishes-on-subalgebra",
            status,
            "formal scalings, index-1 data".to_string(),
        ));
    }

    // leading central term carries the cubic bracket factor
    {
        let ring = ParameterRing::new(&[("a2", false), ("b2", false)], d.max(2));
        let a2 = Coefficient::param(&ring, "a2");
        let b2 = Coefficient::param(&ring, "b2");
        let zero = Coefficient::zero(&ring);
        let one = Coefficient::one(&ring);
        let status = (|| -> Status {
            let fac = match bch_factorize(
                &[zero.clone(), a2.clone()],
                &[zero.clone(), b2.clone()],
                &one,
                &one,
                16,
            ) {
                Ok(f) => f,
                Err(e) => return Status::Fail(e.to_string()),
            };
            let lead = fac.gamma.degree_part(2);
            let want = a2.mul(&b2).scale(&rat(1, 2));
            if lead == want {
                Status::Pass
            } else {
                Status::Fail(format!("leading central term {lead} vs {want}"))
            }
        })();
        checks.push(Check::new(
            "central-leading-term",
            status,
            "index-2 inputs".to_string(),
        ));
    }
    SuiteReport {
        suite: "bch".into(),
        checks,
    }
}

// ---------------------------------------------------------------------------
// sewing identities
// ---------------------------------------------------------------------------

pub fn suite_sewing_identities(cfg: SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    let order = cfg.order;
    let degree = cfg.degree;
    match verify_second_sewing_identity(2, order, degree, false) {
        Ok(rep) => {
            checks.push(Check::new(
                "second-identity-pbw",
                if rep.pbw_ok {
                    Status::Pass
                } else {
                    Status::Fail(rep.witness.clone().unwrap_or_default())
                },
                format!("({order}, {degree})"),
            ));
            checks.push(Check::new(
                "second-identity-derivation",
                if rep.derivation_ok {
                    Status::Pass
                } else {
                    Status::Fail(rep.witness.unwrap_or_default())
                },
                format!("({order}, {degree})"),
            ));
        }
        Err(e) => checks.push(Check::new(
            "second-identity",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    match verify_first_sewing_identity(2, order, degree, false) {
        Ok(rep) => {
            checks.push(Check::new(
                "first-identity-pbw",
                if rep.pbw_ok {
                    Status::Pass
                } else {
                    Status::Fail(rep.witness.clone().unwrap_or_default())
                },
                format!("({order}, {degree})"),
            ));
            checks.push(Check::new(
                "first-identity-derivation",
                if rep.derivation_ok {
                    Status::Pass
                } else {
                    Status::Fail(rep.witness.unwrap_or_default())
                },
                format!("({order}, {degree})"),
            ));
        }
        Err(e) => checks.push(Check::new(
            "first-identity",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    // trivial data reduces both sides to the pure shift exponential
    match verify_second_sewing_identity(0, order.min(6), degree.min(2), false) {
        Ok(rep) => checks.push(Check::new(
            "second-identity-trivial-data",
            if rep.passed() {
                Status::Pass
            } else {
                Status::Fail(rep.witness.unwrap_or_default())
            },
            "empty coordinate data".to_string(),
        )),
        Err(e) => checks.push(Check::new(
            "second-identity-trivial-data",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    // mutating one expansion coefficient must produce a witness
    match verify_second_sewing_identity(1, order.min(6), degree, true) {
        Ok(rep) => checks.push(expect_witness(
            "second-identity-mutation",
            !rep.passed(),
            rep.witness,
        )),
        Err(e) => checks.push(Check::new(
            "second-identity-mutation",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    SuiteReport {
        suite: "sewing-identities".into(),
        checks,
    }
}

// ---------------------------------------------------------------------------
// moduli laws
// ---------------------------------------------------------------------------

pub fn suite_moduli_laws(cfg: SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    let order = cfg.order;
    let ring = ParameterRing::new(
        &[("a1", false), ("a2", false), ("b1", false), ("al0", true)],
        cfg.degree,
    );
    let a1 = Coefficient::param(&ring, "a1");
    let a2 = Coefficient::param(&ring, "a2");
    let b1 = Coefficient::param(&ring, "b1");
    let al0 = Coefficient::param(&ring, "al0");
    let one = Coefficient::one(&ring);
    let q_a = ModuliElement::kstar1(vec![a2.clone()], al0.clone(), vec![a1.clone()]);
    let q_b = ModuliElement::kstar1(vec![b1.clone()], one.clone(), vec![b1.clone()]);
    let q_c = ModuliElement::kstar1(vec![a1.clone()], one.clone(), vec![a2.clone()]);
    let gen2 = ModuliElement::kstar2_generator(&ring, Coefficient::from_int(&ring, 2));

    // associativity, nested case: a chain of three arity-1 elements
    let nested = (|| -> Status {
        let inner = match sew(&q_b, 1, &q_c, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let lhs = match sew(&q_a, 1, &inner, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let first = match sew(&q_a, 1, &q_b, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let rhs = match sew(&first, 1, &q_c, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        if lhs == rhs {
            Status::Pass
        } else {
            Status::Fail(format!("{lhs:?} vs {rhs:?}"))
        }
    })();
    checks.push(Check::new(
        "associativity-nested",
        nested,
        format!("arity-1 chain, order {order}"),
    ));

    // associativity, disjoint case: two arity-1 factors into the generator
    let disjoint = (|| -> Status {
        let inner = match sew(&q_b, 2, &gen2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let lhs = match sew(&q_a, 1, &inner, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let inner2 = match sew(&q_a, 1, &gen2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let rhs = match sew(&q_b, 2, &inner2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        if lhs == rhs {
            Status::Pass
        } else {
            Status::Fail(format!("{lhs:?} vs {rhs:?}"))
        }
    })();
    checks.push(Check::new(
        "associativity-disjoint",
        disjoint,
        format!("two factors into the two-puncture generator, order {order}"),
    ));

    // associativity, disjoint-above case
    let above = (|| -> Status {
        let inner = match sew(&q_b, 1, &gen2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let lhs = match sew(&q_a, 2, &inner, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let inner2 = match sew(&q_a, 2, &gen2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let rhs = match sew(&q_b, 1, &inner2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        if lhs == rhs {
            Status::Pass
        } else {
            Status::Fail(format!("{lhs:?} vs {rhs:?}"))
        }
    })();
    checks.push(Check::new(
        "associativity-disjoint-above",
        above,
        format!("order {order}"),
    ));

    // permutation law on fractional-linear two-puncture elements
    let perm_law = (|| -> Status {
        let rring = ParameterRing::empty(cfg.degree);
        let p2 = Coefficient::from_int(&rring, 2);
        let p3 = Coefficient::from_int(&rring, 3);
        let q1 = ModuliElement::kstar2_generator(&rring, p2);
        let q2 = ModuliElement::kstar2_generator(&rring, p3);
        let lhs = match sew(&q1, 1, &q2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let sq2 = match permute(&[2, 1], &q2, order) {
            Ok(s) => s,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let pre = match sew(&q1, 2, &sq2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let rhs = match permute(&[3, 1, 2], &pre, order) {
            Ok(s) => s,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        if lhs == rhs {
            Status::Pass
        } else {
            Status::Fail(format!("{lhs:?} vs {rhs:?}"))
        }
    })();
    checks.push(Check::new(
        "permutation-law",
        perm_law,
        "fractional-linear pair".to_string(),
    ));

    // the orientation transform is involutive
    let invol = (|| -> Status {
        for q in [&q_a, &gen2] {
            let t = match operad_transform(q, order) {
                Ok(t) => t,
                Err(e) => return Status::Unsupported(e.to_string()),
            };
            let back = match operad_transform(&t, order) {
                Ok(b) => b,
                Err(e) => return Status::Unsupported(e.to_string()),
            };
            if back != *q {
                return Status::Fail(format!("{back:?} vs {q:?}"));
            }
        }
        Status::Pass
    })();
    checks.push(Check::new(
        "transform-involution",
        invol,
        format!("order {order}"),
    ));

    // functoriality of the transform on an arity-1 pair
    let functorial = (|| -> Status {
        let s1 = ModuliElement {
            family: Family::K,
            ..q_a.clone()
        };
        let s2 = ModuliElement {
            family: Family::K,
            ..q_b.clone()
        };
        let sewn = match sew(&s1, 1, &s2, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let lhs = match operad_transform(&sewn, order) {
            Ok(t) => t,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let t1 = match operad_transform(&s1, order) {
            Ok(t) => t,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let t2 = match operad_transform(&s2, order) {
            Ok(t) => t,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        let rhs = match sew(&t2, 1, &t1, order) {
            Ok(r) => r.element,
            Err(e) => return Status::Unsupported(e.to_string()),
        };
        if lhs == rhs {
            Status::Pass
        } else {
            Status::Fail(format!("{lhs:?} vs {rhs:?}"))
        }
    })();
    checks.push(Check::new(
        "transform-functoriality",
        functorial,
        "arity-1 pair".to_string(),
    ));

    SuiteReport {
        suite: "moduli-laws".into(),
        checks,
    }
}

// ---------------------------------------------------------------------------
// tangent functional suite
// ---------------------------------------------------------------------------

pub fn suite_tangent(_cfg: SuiteConfig) -> SuiteReport {
    use crate::moduli::{tangent_family, tangent_functional_with, tangent_ring};
    let mut checks = Vec::new();
    let k_max = 6usize;
    let ring = tangent_ring(k_max, 3);
    let fam = match tangent_family(&ring, (k_max + 3) as i64) {
        Ok(f) => f,
        Err(e) => {
            return SuiteReport {
                suite: "l-i".into(),
                checks: vec![Check::new(
                    "tangent-family",
                    Status::Unsupported(e.to_string()),
                    "".to_string(),
                )],
            }
        }
    };
    let z = Coefficient::param(&ring, "z");
    let push_coord = |name: String, want: Coefficient, checks: &mut Vec<Check>| {
        let f = Coefficient::param(&ring, &name);
        match tangent_functional_with(&fam, &f, k_max) {
            Ok((deriv, closed)) => {
                let status = if deriv != closed {
                    Status::Fail(format!("paths disagree: {deriv} vs {closed}"))
                } else if deriv != want {
                    Status::Fail(format!("value {deriv} vs stated {want}"))
                } else {
                    Status::Pass
                };
                checks.push(Check::new(
                    format!("coordinate-{name}"),
                    status,
                    "formal point".to_string(),
                ));
            }
            Err(e) => checks.push(Check::new(
                format!("coordinate-{name}"),
                Status::Unsupported(e.to_string()),
                "".to_string(),
            )),
        }
    };
    push_coord("a0p".to_string(), z.pow_i(-2).unwrap().neg(), &mut checks);
    for k in 1..=k_max {
        push_coord(
            format!("Ap{k}"),
            z.pow_i(k as i64 - 2).unwrap().neg(),
            &mut checks,
        );
        push_coord(
            format!("Am{k}"),
            z.pow_i(-(k as i64) - 2).unwrap().neg(),
            &mut checks,
        );
    }
    // constants vanish
    match tangent_functional_with(&fam, &Coefficient::from_int(&ring, 7), k_max) {
        Ok((d, c)) => checks.push(Check::new(
            "constant",
            if d.is_zero() && c.is_zero() {
                Status::Pass
            } else {
                Status::Fail(format!("{d} / {c}"))
            },
            "".to_string(),
        )),
        Err(e) => checks.push(Check::new(
            "constant",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    // a mixed monomial exercises the product rule
    {
        let f = Coefficient::param(&ring, "Ap1").mul(&Coefficient::param(&ring, "a0p"));
        match tangent_functional_with(&fam, &f, k_max) {
            Ok((d, c)) => checks.push(Check::new(
                "mixed-monomial",
                Status::from_result(if d == c {
                    Ok(())
                } else {
                    Err(format!("{d} vs {c}"))
                }),
                "".to_string(),
            )),
            Err(e) => checks.push(Check::new(
                "mixed-monomial",
                Status::Unsupported(e.to_string()),
                "".to_string(),
            )),
        }
    }
    SuiteReport {
        suite: "l-i".into(),
        checks,
    }
}

// ---------------------------------------------------------------------------
// contraction suite
// ---------------------------------------------------------------------------

fn random_graded_map(
    space: &GradedSpace,
    ring: &Arc<ParameterRing>,
    arity: usize,
    mix: &mut Mix,
) -> GradedMap {
    let mut m = GradedMap::zero(space, arity);
    for w in space.wmin..=space.wmax {
        for i in 0..space.dim(w) {
            for _ in 0..2 {
                let mut t = Vec::new();
                let mut ok = true;
                for _ in 0..arity {
                    let ow = mix.range(space.wmin, space.wmax);
                    let d = space.dim(ow);
                    if d == 0 {
                        ok = false;
                        break;
                    }
                    t.push((ow, mix.range(0, d as i64 - 1) as usize));
                }
                let v = mix.small();
                if ok && v != 0 {
                    m.push((w, i), t, Coefficient::from_int(ring, v));
                }
            }
        }
    }
    m
}

pub fn suite_contraction_laws(cfg: SuiteConfig) -> SuiteReport {
    use crate::graded::{verify_contraction_associativity, verify_contraction_transposition};
    let mut checks = Vec::new();
    let ring = ParameterRing::empty(cfg.degree);
    let mut mix = Mix(0xFEED);
    // window radius 6, dimensions at most 2 per weight
    let dims: Vec<usize> = (0..13).map(|_| mix.range(0, 2) as usize).collect();
    let dims = {
        let mut d = dims;
        d[6] = d[6].max(1);
        d
    };
    let space = GradedSpace::new(-6, dims);
    for trial in 0..3 {
        let f1 = random_graded_map(&space, &ring, 2, &mut mix);
        let f2 = random_graded_map(&space, &ring, 2, &mut mix);
        let f3 = random_graded_map(&space, &ring, 2, &mut mix);
        for j in 1..=2usize {
            for i in 1..=3usize {
                match verify_contraction_associativity(&f1, &f2, &f3, i, j) {
                    Ok(rep) => checks.push(Check::new(
                        format!("associativity-{:?}-i{i}-j{j}-trial{trial}", rep.case),
                        if rep.ok {
                            Status::Pass
                        } else {
                            Status::Fail(rep.witness.unwrap_or_default())
                        },
                        "radius 6, dims <= 2".to_string(),
                    )),
                    Err(e) => checks.push(Check::new(
                        format!("associativity-i{i}-j{j}-trial{trial}"),
                        Status::Unsupported(e.to_string()),
                        "".to_string(),
                    )),
                }
            }
        }
        match verify_contraction_transposition(&f1, &f2) {
            Ok(rep) => checks.push(Check::new(
                format!("transposition-trial{trial}"),
                if rep.ok {
                    Status::Pass
                } else {
                    Status::Fail(rep.witness.unwrap_or_default())
                },
                "radius 6, dims <= 2".to_string(),
            )),
            Err(e) => checks.push(Check::new(
                format!("transposition-trial{trial}"),
                Status::Unsupported(e.to_string()),
                "".to_string(),
            )),
        }
    }
    // mutation check: perturbing one block must leave a witness
    {
        let f1 = random_graded_map(&space, &ring, 2, &mut mix);
        let f2 = random_graded_map(&space, &ring, 2, &mut mix);
        let mut f2m = f2.clone();
        // find a legal block to perturb
        let w = 0;
        f2m.push((w, 0), vec![(w, 0), (w, 0)], Coefficient::one(&ring));
        let a = crate::graded::t_contract(&f1, &f2, 1).ok();
        let b = crate::graded::t_contract(&f1, &f2m, 1).ok();
        let witnessed = match (a, b) {
            (Some(a), Some(b)) => {
                let mut wtn = None;
                for (k, m) in &a.terms {
                    if let Some(bm) = b.terms.get(k) {
                        if let Err(w) = m.compare(bm) {
                            wtn = Some(w);
                            break;
                        }
                    } else if !m.is_zero() {
                        wtn = Some(format!("slice {k} vanished"));
                        break;
                    }
                }
                wtn.or_else(|| {
                    b.terms
                        .iter()
                        .find(|(k, m)| !a.terms.contains_key(k) && !m.is_zero())
                        .map(|(k, _)| format!("new slice {k}"))
                })
            }
            _ => None,
        };
        checks.push(expect_witness(
            "block-mutation",
            witnessed.is_some(),
            witnessed,
        ));
    }
    SuiteReport {
        suite: "contraction-laws".into(),
        checks,
    }
}

// ---------------------------------------------------------------------------
// coalgebra suites
// ---------------------------------------------------------------------------

/// Built-in fixtures used when no input file is given.
pub fn builtin_trivial(degree: i64) -> VocData {
    VocData::trivial(&standard_ring(degree))
}

pub fn builtin_rank1(degree: i64) -> VocData {
    let mut v = builtin_trivial(degree);
    v.rank = Rat::one();
    v
}

pub fn builtin_delta_mutation(degree: i64) -> VocData {
    let mut v = builtin_trivial(degree);
    let ring = v.ring.clone();
    let d = v.delta.get_mut(&-1).unwrap();
    d.push((0, 0), vec![(0, 0), (0, 0)], Coefficient::one(&ring));
    v
}

pub fn builtin_group_like(degree: i64, seed: u64) -> VocData {
    let ring = standard_ring(degree);
    let mut mix = Mix(seed);
    for _ in 0..50 {
        let dim = mix.range(2, 3) as usize;
        let basis: Vec<Vec<Rat>> = (0..dim)
            .map(|_| (0..dim).map(|_| rat(mix.small(), 1)).collect())
            .collect();
        if let Some(v) = VocData::try_group_like(&ring, dim, &basis) {
            return v;
        }
    }
    VocData::group_like(
        &ring,
        2,
        &[vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(1, 1)]],
    )
}

pub fn suite_voc_axioms(cfg: SuiteConfig, input: Option<&VocData>) -> SuiteReport {
    let mut checks = Vec::new();
    let fallback = builtin_trivial(cfg.degree.max(4));
    let v = input.unwrap_or(&fallback);
    match check_axioms(v) {
        Ok(rep) => {
            for c in rep.checks {
                checks.push(Check::new(format!("axiom-{}", c.id), c.status, c.window));
            }
        }
        Err(e) => checks.push(Check::new(
            "axioms",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    if input.is_none() {
        // mutation fixtures demonstrate witnesses
        let rank1 = builtin_rank1(cfg.degree.max(4));
        match check_axioms(&rank1) {
            Ok(rep) => {
                let bracket = rep.find("virasoro-bracket");
                let failed = bracket.is_some_and(|c| c.status.failed());
                let witness = bracket.and_then(|c| match &c.status {
                    Status::Fail(w) => Some(w.clone()),
                    _ => None,
                });
                checks.push(expect_witness("rank-mutation", failed, witness));
            }
            Err(e) => checks.push(Check::new(
                "rank-mutation",
                Status::Unsupported(e.to_string()),
                "".to_string(),
            )),
        }
        let dm = builtin_delta_mutation(cfg.degree.max(4));
        match check_axioms(&dm) {
            Ok(rep) => {
                let counit = rep.find("counit");
                let failed = counit.is_some_and(|c| c.status.failed());
                let witness = counit.and_then(|c| match &c.status {
                    Status::Fail(w) => Some(w.clone()),
                    _ => None,
                });
                checks.push(expect_witness("coproduct-mutation", failed, witness));
            }
            Err(e) => checks.push(Check::new(
                "coproduct-mutation",
                Status::Unsupported(e.to_string()),
                "".to_string(),
            )),
        }
        // rational reconstruction certifies the trivial fixture with g = 1
        let rr = {
            let ring = v.ring.clone();
            let mut vout = BTreeMap::new();
            vout.insert(
                vec![(0i64, 0usize), (0, 0), (0, 0)],
                Coefficient::one(&ring),
            );
            match rational_reconstruct(v, (0, 0), &vout, 2, 4, 8) {
                Ok(cert) => {
                    if cert.r == 0
                        && cert.s == 0
                        && cert.t == 0
                        && cert.commutativity_ok
                        && cert.associativity_ok
                        && cert.g.len() == 1
                        && cert.g.get(&(0, 0)).is_some_and(|c| c.is_one())
                    {
                        Status::Pass
                    } else {
                        Status::Fail(format!("unexpected certificate {cert:?}"))
                    }
                }
                Err(e) => Status::Fail(e.to_string()),
            }
        };
        checks.push(Check::new(
            "rational-reconstruction-trivial",
            rr,
            "bounds (2, 4, 8)".to_string(),
        ));
    }
    SuiteReport {
        suite: "voc-axioms".into(),
        checks,
    }
}

pub fn suite_voc_properties(cfg: SuiteConfig, input: Option<&VocData>) -> SuiteReport {
    let mut checks = Vec::new();
    let fallback = builtin_trivial(cfg.degree.max(4));
    let v = input.unwrap_or(&fallback);
    match check_derived_properties(v) {
        Ok(rep) => {
            for c in rep.checks {
                checks.push(Check::new(format!("property-{}", c.id), c.status, c.window));
            }
        }
        Err(e) => checks.push(Check::new(
            "properties",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    if input.is_none() {
        // engine consistency: random passing fixtures never disagree between
        // the axioms and the derived identities
        for seed in [5u64, 17] {
            let g = builtin_group_like(cfg.degree.max(4), seed);
            let ax = check_axioms(&g).map(|r| r.all_passed()).unwrap_or(false);
            let dp = check_derived_properties(&g)
                .map(|r| r.all_passed())
                .unwrap_or(false);
            checks.push(Check::new(
                format!("axioms-imply-properties-seed{seed}"),
                if ax && dp {
                    Status::Pass
                } else if !ax {
                    Status::Unsupported("random fixture failed the axioms".into())
                } else {
                    Status::Fail("derived identity failed on an axiom-passing fixture".into())
                },
                "randomized fixture".to_string(),
            ));
        }
    }
    SuiteReport {
        suite: "voc-properties".into(),
        checks,
    }
}

pub fn suite_functor_roundtrip(cfg: SuiteConfig, input: Option<&VocData>) -> SuiteReport {
    let mut checks = Vec::new();
    let fallback = builtin_trivial(cfg.degree.max(4));
    let v = input.unwrap_or(&fallback);
    match check_roundtrip_generators(v, cfg.order) {
        Ok(rep) => {
            for c in rep.checks {
                checks.push(c);
            }
        }
        Err(e) => checks.push(Check::new(
            "roundtrip",
            Status::Unsupported(e.to_string()),
            "".to_string(),
        )),
    }
    if input.is_none() {
        for seed in [3u64, 29] {
            let g = builtin_group_like(cfg.degree.max(4), seed);
            let passes = check_axioms(&g).map(|r| r.all_passed()).unwrap_or(false);
            if !passes {
                checks.push(Check::new(
                    format!("random-roundtrip-seed{seed}"),
                    Status::Unsupported("random fixture failed the axioms".into()),
                    "".to_string(),
                ));
                continue;
            }
            match check_roundtrip_generators(&g, cfg.order) {
                Ok(rep) => checks.push(Check::new(
                    format!("random-roundtrip-seed{seed}"),
                    if rep.all_passed() {
                        Status::Pass
                    } else {
                        Status::Fail(
                            rep.checks
                                .iter()
                                .find(|c| !c.status.passed())
                                .map(|c| format!("{}: {:?}", c.id, c.status))
                                .unwrap_or_default(),
                        )
                    },
                    "randomized fixture".to_string(),
                )),
                Err(e) => checks.push(Check::new(
                    format!("random-roundtrip-seed{seed}"),
                    Status::Unsupported(e.to_string()),
                    "".to_string(),
                )),
            }
        }
    }
    SuiteReport {
        suite: "functor-roundtrip".into(),
        checks,
    }
}

/// Run a suite by name.
pub fn run_suite(name: &str, cfg: SuiteConfig, input: Option<&VocData>) -> Option<SuiteReport> {
    match name {
        "delta" => Some(suite_delta(cfg)),
        "compose" => Some(suite_compose(cfg)),
        "bch" => Some(suite_bch(cfg)),
        "sewing-identities" => Some(suite_sewing_identities(cfg)),
        "moduli-laws" => Some(suite_moduli_laws(cfg)),
        "l-i" => Some(suite_tangent(cfg)),
        "contraction-laws" => Some(suite_contraction_laws(cfg)),
        "voc-axioms" => Some(suite_voc_axioms(cfg, input)),
        "voc-properties" => Some(suite_voc_properties(cfg, input)),
        "functor-roundtrip" => Some(suite_functor_roundtrip(cfg, input)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_suite_passes_at_defaults() {
        // the heavier suites are exercised individually by the acceptance
        // tests; here we spot-check the fast ones end to end
        for name in [
            "delta",
            "bch",
            "contraction-laws",
            "voc-axioms",
            "voc-properties",
        ] {
            let rep = run_suite(name, SuiteConfig::default(), None).unwrap();
            assert!(
                rep.checks.iter().all(|c| c.status.passed()),
                "{name}: {:#?}",
                rep.checks
                    .iter()
                    .filter(|c| !c.status.passed())
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn unknown_suite_is_none() {
        assert!(run_suite("nope", SuiteConfig::default(), None).is_none());
    }
}
