//! Helpers shared by the integration tests: program corpora, random state
//! generators and independent oracles.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use minicpa::cpa::{compose, AnyState, CompositeCpa, CompositeState, Cpa, DynCpa};
use minicpa::domains::octagon::INF;
use minicpa::domains::{
    Dbm, ExplicitCpa, ExplicitState, LocationCpa, OctagonCpa, OctagonState, Predicate, PredicateCpa, PredicateState,
};
use minicpa::config::{CounterMode, Threshold};
use minicpa::frontend::{parse, LocationId};
use minicpa::solver::{Conjunction, LinearConstraint, LinearTerm, Relation, Solver};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, RngAlgorithm, TestRng, TestRunner};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn suite_dir() -> PathBuf {
    manifest_dir().join("suite")
}

pub fn programs_dir() -> PathBuf {
    manifest_dir().join("tests").join("programs")
}

fn mc_files(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// The ten benchmark programs, by name.
pub fn suite_programs() -> Vec<(String, String)> {
    mc_files(&suite_dir())
}

/// Benchmark programs followed by the extra test programs.
pub fn bounded_programs() -> Vec<(String, String)> {
    let mut all = suite_programs();
    all.extend(mc_files(&programs_dir()));
    all
}

pub fn is_deterministic(source: &str) -> bool {
    !source.contains("nondet")
}

/// A runner with a fixed seed so failures reproduce.
pub fn runner(cases: u32) -> TestRunner {
    let cfg = RunnerConfig {
        cases,
        failure_persistence: None,
        ..RunnerConfig::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Partial-order and join laws on one random triple. Equality is checked up
/// to mutual inclusion where the domain has several spellings of bottom.
pub fn lattice_laws<C: Cpa>(cpa: &C, a: &C::State, b: &C::State, c: &C::State) -> Result<(), String> {
    let le = |x: &C::State, y: &C::State| cpa.less_or_equal(x, y);
    let same = |x: &C::State, y: &C::State| x == y || (cpa.is_bottom(x) && cpa.is_bottom(y));
    let fail = |law: &str| Err(format!("{law} fails on a={a}, b={b}, c={c}"));
    let ab = cpa.join(a, b);
    if !le(a, a) {
        return fail("reflexivity");
    }
    if le(a, b) && le(b, a) && !same(a, b) {
        return fail("antisymmetry");
    }
    if le(a, b) && le(b, c) && !le(a, c) {
        return fail("transitivity");
    }
    if !le(a, &ab) || !le(b, &ab) {
        return fail("join is an upper bound");
    }
    if le(a, c) && le(b, c) && !le(&ab, c) {
        return fail("join is least");
    }
    let ba = cpa.join(b, a);
    if !(le(&ab, &ba) && le(&ba, &ab)) {
        return fail("join commutes");
    }
    let aa = cpa.join(a, a);
    if !(le(&aa, a) && le(a, &aa)) {
        return fail("join is idempotent");
    }
    let (l, r) = (cpa.join(&ab, c), cpa.join(a, &cpa.join(b, c)));
    if !(le(&l, &r) && le(&r, &l)) {
        return fail("join is associative");
    }
    Ok(())
}

/// Runs `cases` random triples through [`lattice_laws`].
pub fn check_lattice<C: Cpa, S: Strategy<Value = C::State> + Clone>(cpa: &C, strategy: S, cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(strategy.clone(), strategy.clone(), strategy), |(a, b, c)| {
            lattice_laws(cpa, &a, &b, &c).map_err(proptest::test_runner::TestCaseError::fail)
        })
        .map_err(|e| e.to_string())
}

const VARS: [&str; 3] = ["x", "y", "z"];

pub fn explicit_cpa() -> ExplicitCpa {
    let program = Arc::new(parse("int x; int y; int z; void main() {}").unwrap());
    ExplicitCpa::new(program, Threshold::Infinite, CounterMode::PerLocation)
}

pub fn explicit_state() -> impl Strategy<Value = ExplicitState> + Clone {
    prop_oneof![
        1 => Just(ExplicitState::Bottom),
        12 => prop::collection::btree_map(prop::sample::select(VARS.to_vec()), -1i64..=1, 0..=3)
            .prop_map(ExplicitState::from_pairs),
    ]
}

pub fn predicate_pool() -> Vec<Predicate> {
    let atom = |parts: &[(&str, i64)], k: i64, rel: Relation| {
        Predicate::new(LinearConstraint::new(LinearTerm::from_parts(parts.iter().copied(), k), rel))
    };
    vec![
        atom(&[("x", 1)], 0, Relation::Le),
        atom(&[("x", 1)], -1, Relation::Le),
        atom(&[("y", 1)], 0, Relation::Eq),
        atom(&[("x", 1), ("y", -1)], 0, Relation::Le),
        atom(&[("x", 1)], -2, Relation::Ne),
        atom(&[("z", 1)], 1, Relation::Le),
    ]
}

pub fn predicate_state() -> impl Strategy<Value = PredicateState> + Clone {
    prop_oneof![
        1 => Just(PredicateState::Bottom),
        12 => prop::sample::subsequence(predicate_pool(), 0..=4).prop_map(PredicateState::holding),
    ]
}

pub fn octagon_cpa() -> OctagonCpa {
    OctagonCpa::over(VARS)
}

/// Closed octagons over three variables, built from a few random bounds.
pub fn octagon_state() -> impl Strategy<Value = OctagonState> + Clone {
    prop::collection::vec((0usize..6, 0usize..6, -4i64..=6), 0..=4).prop_map(|cs| {
        let mut d = Dbm::top(3);
        for (i, j, c) in cs {
            if i != j {
                d.constrain(i, j, c);
            }
        }
        match d.close() {
            Some(d) => OctagonState::Dbm(Arc::new(d)),
            None => OctagonState::Bottom,
        }
    })
}

/// Location, explicit and predicate analyses in one product.
pub fn composite_cpa() -> CompositeCpa {
    let parts: Vec<Box<dyn DynCpa>> = vec![
        Box::new(LocationCpa),
        Box::new(explicit_cpa()),
        Box::new(PredicateCpa::standalone(Solver::default())),
    ];
    compose(parts).unwrap()
}

pub fn composite_state() -> impl Strategy<Value = CompositeState> + Clone {
    (explicit_state(), predicate_state()).prop_map(|(e, p)| {
        let loc = Cpa::initial_state(&LocationCpa, LocationId(0));
        CompositeState::new(vec![AnyState::new(loc), AnyState::new(e), AnyState::new(p)])
    })
}

/// Random coherent matrix over `n` variables with bounds in [-8, 8] or +∞.
pub fn random_dbm(max_vars: usize) -> impl Strategy<Value = Dbm> {
    (1..=max_vars).prop_flat_map(|n| {
        let d = 2 * n;
        prop::collection::vec((0..d, 0..d, prop_oneof![4 => -8i64..=8, 1 => Just(INF)]), 0..=2 * d).prop_map(
            move |cs| {
                let mut m = Dbm::top(n);
                for (i, j, c) in cs {
                    if i != j {
                        m.constrain(i, j, c);
                    }
                }
                m
            },
        )
    })
}

fn oracle_add(a: i64, b: i64) -> i64 {
    if a == INF || b == INF {
        INF
    } else {
        a + b
    }
}

/// Tightening to a fixpoint, one rule at a time: path shortening, unary
/// parity tightening and strengthening through unary bounds. `None` when a
/// diagonal entry turns negative.
pub fn oracle_close(d: &Dbm) -> Option<Vec<i64>> {
    let size = d.dim();
    let mut m: Vec<i64> = d.entries().to_vec();
    let at = |i: usize, j: usize| i * size + j;
    loop {
        let mut changed = false;
        let mut lower = |m: &mut Vec<i64>, i: usize, j: usize, v: i64| {
            if v < m[at(i, j)] {
                m[at(i, j)] = v;
                changed = true;
            }
        };
        for i in 0..size {
            for j in 0..size {
                for k in 0..size {
                    let v = oracle_add(m[at(i, k)], m[at(k, j)]);
                    lower(&mut m, i, j, v);
                }
            }
        }
        for i in 0..size {
            let u = m[at(i, i ^ 1)];
            if u != INF {
                lower(&mut m, i, i ^ 1, 2 * u.div_euclid(2));
            }
        }
        for i in 0..size {
            for j in 0..size {
                let s = oracle_add(m[at(i, i ^ 1)], m[at(j ^ 1, j)]);
                if s != INF {
                    lower(&mut m, i, j, s.div_euclid(2));
                }
            }
        }
        if (0..size).any(|i| m[at(i, i)] < 0) {
            return None;
        }
        if !changed {
            return Some(m);
        }
    }
}

/// Integer points of `d` inside the box [-8, 8]^n, checked bound by bound.
pub fn box_points(d: &Dbm) -> Vec<Vec<i64>> {
    let n = d.vars();
    let mut out = Vec::new();
    let mut p = vec![-8i64; n];
    loop {
        if d.contains(&p) {
            out.push(p.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            if p[k] < 8 {
                p[k] += 1;
                break;
            }
            p[k] = -8;
            k += 1;
        }
    }
}

/// Random conjunction over at most four variables with coefficients in
/// [-3, 3].
pub fn random_conjunction() -> impl Strategy<Value = Conjunction> {
    let names = ["a", "b", "c", "d"];
    (1usize..=4).prop_flat_map(move |n| {
        let atom = (
            prop::collection::vec(-3i64..=3, n),
            -10i64..=10,
            prop_oneof![6 => Just(Relation::Le), 2 => Just(Relation::Eq), 1 => Just(Relation::Ne)],
        )
            .prop_map(move |(cs, k, rel)| {
                let parts: Vec<(&str, i64)> = names.iter().copied().zip(cs).filter(|(_, c)| *c != 0).collect();
                LinearConstraint::new(LinearTerm::from_parts(parts, k), rel)
            });
        prop::collection::vec(atom, 1..=5).prop_map(Conjunction::from_constraints)
    })
}

/// Integer point of `c` in [-r, r]^vars by plain enumeration.
pub fn brute_force_point(c: &Conjunction, r: i64) -> Option<BTreeMap<String, i64>> {
    let vars: Vec<String> = c.vars().into_iter().collect();
    let rows: Vec<(Vec<i64>, i64, Relation)> = c
        .iter()
        .map(|k| {
            let t = k.term();
            let coeffs = vars.iter().map(|v| i64::try_from(t.coeff(v)).unwrap()).collect();
            (coeffs, i64::try_from(t.constant_part().clone()).unwrap(), k.relation())
        })
        .collect();
    let holds = |p: &[i64]| {
        rows.iter().all(|(cs, k, rel)| {
            let v: i64 = cs.iter().zip(p).map(|(c, x)| c * x).sum::<i64>() + k;
            match rel {
                Relation::Le => v <= 0,
                Relation::Eq => v == 0,
                Relation::Ne => v != 0,
            }
        })
    };
    let mut p = vec![-r; vars.len()];
    loop {
        if holds(&p) {
            return Some(vars.iter().cloned().zip(p).collect());
        }
        let mut k = 0;
        loop {
            if k == vars.len() {
                return None;
            }
            if p[k] < r {
                p[k] += 1;
                break;
            }
            p[k] = -r;
            k += 1;
        }
    }
}
