mod common;

use std::collections::BTreeSet;

use metacp_core::analysis::{
    check_executability, check_goals, derivable, missing_subterm, saturate, trace, Context,
};
use metacp_core::diagnostic::{Code, Severity};
use metacp_core::fixtures;
use metacp_core::model::{normalize, Bundle, BundleSet, ProtocolSpec, SecurityGoal, Sort, Term};
use metacp_core::xml::parse_psv;
use proptest::prelude::*;

fn fixture(name: &str) -> ProtocolSpec {
    parse_psv(fixtures::get(name).unwrap().psv.as_bytes()).unwrap().spec
}

fn g() -> Term {
    Term::constant("g", Sort::Public)
}

fn exp(b: Term, e: Term) -> Term {
    Term::apply(&Bundle::exp_symbol(), vec![b, e]).unwrap()
}

fn senc(m: Term, k: Term) -> Term {
    Term::apply(&Bundle::SymmetricEncryption.symbols()[0], vec![m, k]).unwrap()
}

fn h(m: Term) -> Term {
    Term::apply(&Bundle::Hashing.symbols()[0], vec![m]).unwrap()
}

#[test]
fn fixtures_are_executable() {
    for f in fixtures::ALL {
        let report = check_executability(&fixture(f.name));
        assert!(report.ok, "{}: {:?}", f.name, report.violations);
        assert!(report.violations.is_empty());
    }
}

#[test]
fn dhke_both_sides_hold_the_shared_key() {
    let spec = fixture("dhke");
    let report = check_executability(&spec);
    let key = normalize(&exp(exp(g(), Term::fresh("y")), Term::fresh("x")), spec.bundles());
    let ctx = Context::for_spec(&spec);
    for role in ["A", "B"] {
        assert!(derivable(&report.final_knowledge[role].known, &key, &ctx), "{role}");
    }
    assert!(!report.final_knowledge["A"].known.contains(&Term::fresh("y")));
}

#[test]
fn nsp_unknown_key_mutation() {
    let src = fixtures::NSP.psv.replacen(
        "<var name=\"skB\" sort=\"fresh\"/>",
        "<var name=\"skC\" sort=\"fresh\"/>",
        1,
    );
    let spec = parse_psv(src.as_bytes()).unwrap().spec;
    let report = check_executability(&spec);
    assert!(!report.ok);
    let first = &report.violations[0];
    assert_eq!(first.step_index, 1);
    assert_eq!(first.role, "A");
    assert_eq!(first.code, Code::NotConstructible);
    assert_eq!(first.missing_term.to_string(), "pk(~skC)");
    let json = serde_json::to_value(first).unwrap();
    assert_eq!(json["stepIndex"], 1);
    assert_eq!(json["missingTerm"], "pk(~skC)");
}

#[test]
fn swapped_sender_cannot_build_peer_nonce() {
    let src = fixtures::NSP.psv.replacen(
        "<message from=\"B\" index=\"2\" to=\"A\">",
        "<message from=\"A\" index=\"2\" to=\"B\">",
        1,
    );
    let report = check_executability(&parse_psv(src.as_bytes()).unwrap().spec);
    let first = &report.violations[0];
    assert_eq!((first.step_index, first.code), (2, Code::NotConstructible));
    assert_eq!(first.missing_term, Term::fresh("nb"));
}

#[test]
fn goal_checks() {
    let spec = fixture("dhke");
    let key = exp(exp(g(), Term::fresh("y")), Term::fresh("x"));
    let with_goal = |term: Term| {
        let mut b = spec.clone().into_builder();
        b.goals_mut().push(SecurityGoal::Secrecy {
            term,
            viewpoint: "A".into(),
        });
        b.build().unwrap()
    };
    let ok = with_goal(key);
    assert!(check_goals(&ok, &check_executability(&ok)).is_empty());

    let bad = with_goal(Term::fresh("y"));
    let diags = check_goals(&bad, &check_executability(&bad));
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].code, Code::GoalUnknown);
    assert_eq!(diags[0].severity, Severity::Error);

    for f in fixtures::ALL {
        let s = fixture(f.name);
        assert!(check_goals(&s, &check_executability(&s)).is_empty(), "{}", f.name);
    }
}

#[test]
fn missing_subterm_points_inside() {
    let ctx = Context::new([Bundle::SymmetricEncryption].into_iter().collect(), Bundle::SymmetricEncryption.equations());
    let known: BTreeSet<Term> = [Term::msg("m")].into_iter().collect();
    let goal = Term::pair(Term::msg("m"), senc(Term::msg("m"), Term::msg("k")));
    assert_eq!(missing_subterm(&known, &goal, &ctx), Some(Term::msg("k")));
    assert_eq!(missing_subterm(&known, &Term::msg("m"), &ctx), None);
}

fn pool_ctx() -> (Context, BundleSet) {
    let bundles: BundleSet = [Bundle::SymmetricEncryption, Bundle::Hashing, Bundle::DiffieHellman, Bundle::Pairing]
        .into_iter()
        .collect();
    let eqs = bundles.iter().flat_map(|b| b.equations()).collect::<Vec<_>>();
    (Context::new(bundles.clone(), eqs), bundles)
}

fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::msg("a")),
        Just(Term::msg("b")),
        Just(Term::fresh("n")),
        Just(Term::public("A")),
        Just(g()),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::pair(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(m, k)| senc(m, k)),
            inner.clone().prop_map(h),
            (inner.clone(), inner).prop_map(|(b, e)| exp(b, e)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivability_is_monotone(
        small in prop::collection::btree_set(term_strategy(), 0..4),
        extra in prop::collection::btree_set(term_strategy(), 0..3),
        goal in term_strategy(),
    ) {
        let (ctx, _) = pool_ctx();
        let mut big = small.clone();
        big.extend(extra);
        let s = saturate(&small, &ctx);
        let b = saturate(&big, &ctx);
        prop_assert!(s.is_subset(&b));
        if derivable(&s, &goal, &ctx) {
            prop_assert!(derivable(&b, &goal, &ctx));
        }
    }

    #[test]
    fn saturation_is_idempotent_and_extensive(known in prop::collection::btree_set(term_strategy(), 0..5)) {
        let (ctx, bundles) = pool_ctx();
        let once = saturate(&known, &ctx);
        prop_assert_eq!(saturate(&once, &ctx), once.clone());
        for t in &known {
            prop_assert!(once.contains(&normalize(t, &bundles)));
            prop_assert!(derivable(&once, t, &ctx));
        }
    }

    #[test]
    fn dh_equality_is_respected(b in term_strategy(), x in term_strategy(), y in term_strategy()) {
        let (ctx, bundles) = pool_ctx();
        let l = exp(exp(b.clone(), x.clone()), y.clone());
        let r = exp(exp(b, y), x);
        prop_assert_eq!(normalize(&l, &bundles), normalize(&r, &bundles));
        let known: BTreeSet<Term> = [l].into_iter().collect();
        prop_assert!(derivable(&saturate(&known, &ctx), &r, &ctx));
    }

    #[test]
    fn knowledge_never_shrinks_and_analysis_is_deterministic(seed in any::<u64>()) {
        let spec = common::random_specs(seed, 1).remove(0);
        let t = trace(&spec);
        for history in t.states.values() {
            prop_assert_eq!(history.len(), spec.exchange().len() + 1);
            for w in history.windows(2) {
                prop_assert!(w[0].known.is_subset(&w[1].known));
            }
        }
        prop_assert_eq!(check_executability(&spec), check_executability(&spec));
    }
}
