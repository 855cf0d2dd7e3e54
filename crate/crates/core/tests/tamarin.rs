mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use metacp_core::diagnostic::Code;
use metacp_core::fixtures;
use metacp_core::model::{
    Bundle, Equation, FunctionSymbol, KeyKind, Orientation, ProtocolSpec, Role, SecurityGoal, Sort,
    Term, Visibility,
};
use metacp_core::tamarin::{
    compile_tamarin, gen_lemmas, render_theory, LemmaKind, TamarinTheory, VarSort,
};
use metacp_core::xml::parse_psv;

fn fixture(name: &str) -> ProtocolSpec {
    parse_psv(fixtures::get(name).unwrap().psv.as_bytes()).unwrap().spec
}

fn theory(spec: &ProtocolSpec) -> TamarinTheory {
    compile_tamarin(spec).unwrap_or_else(|e| panic!("{}: {e:?}", spec.name())).theory
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("fixtures/golden/{name}.spthy"))
}

/// Structural checks every generated theory must pass.
fn assert_well_formed(spec: &ProtocolSpec, t: &TamarinTheory) {
    let asym = spec.roles().iter().filter(|r| r.asymmetric_key().is_some()).count();
    assert_eq!(t.rules.len(), 2 * spec.exchange().len() + spec.roles().len() + asym, "{}", spec.name());
    let mut names = BTreeSet::new();
    let mut fr: BTreeMap<String, usize> = BTreeMap::new();
    for r in &t.rules {
        assert!(names.insert(r.name.clone()), "duplicate rule {}", r.name);
        assert!(r.unbound_vars().is_empty(), "{} in {}: {:?}", spec.name(), r.name, r.unbound_vars());
        assert!(r.sort_clashes().is_empty(), "{} in {}", spec.name(), r.name);
        for f in r.premises.iter().filter(|f| f.name == "Fr") {
            for (v, sort) in f.vars() {
                assert_eq!(sort, VarSort::Fresh);
                *fr.entry(v).or_default() += 1;
            }
        }
        for f in r.premises.iter().chain(&r.actions).chain(&r.conclusions) {
            assert!(f.name.starts_with(|c: char| c.is_ascii_uppercase()), "{}", f.name);
        }
    }
    assert!(fr.values().all(|n| *n == 1), "{}: {fr:?}", spec.name());
    if !spec.exchange().is_empty() {
        assert!(t.lemmas.iter().any(|l| l.kind == LemmaKind::ExistsTrace));
    }
}

#[test]
fn goldens() {
    let bless = std::env::var_os("METACP_BLESS").is_some();
    for f in fixtures::ALL {
        let text = render_theory(&theory(&fixture(f.name)));
        let path = golden_path(f.name);
        if bless {
            std::fs::write(&path, &text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, golden, "{} differs from {}", f.name, path.display());
    }
}

#[test]
fn dhke_shape() {
    let spec = fixture("dhke");
    let t = theory(&spec);
    assert_eq!(t.builtins, ["diffie-hellman"]);
    let names: Vec<&str> = t.rules.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        ["Init_A", "Init_B", "A_send_1", "B_recv_1", "B_send_2", "A_recv_2"]
    );
    assert_eq!(t.lemmas.len(), 1);
    assert_eq!(t.lemmas[0].name, "executable");
    assert!(t.restrictions.is_empty());
    let text = render_theory(&t);
    assert!(text.starts_with("theory DHKE\nbegin\n"));
    assert!(text.ends_with("\nend\n"));
    assert!(text.contains("Out('g'^~x)"));
    assert!(!text.contains('\r'));
}

#[test]
fn nsp_shape() {
    let t = theory(&fixture("nsp"));
    assert_eq!(t.builtins, ["asymmetric-encryption"]);
    let text = render_theory(&t);
    assert!(text.contains("lemma secrecy_na_A:\n  all-traces\n"));
    assert!(text.contains("rule Register_pk_A:\n    [ Fr(~skA)\n    ]\n  -->\n    [ !Ltk($A, ~skA)\n    , !Pk($A, pk(~skA))\n    , Out(pk(~skA))\n"));
    assert!(text.contains("In(aenc(<na, $A>, pk(~skB)))"));
}

#[test]
fn fixtures_are_well_formed() {
    for f in fixtures::ALL {
        let spec = fixture(f.name);
        assert_well_formed(&spec, &theory(&spec));
    }
}

#[test]
fn single_role_without_messages() {
    let spec = ProtocolSpec::builder("Solo").role(Role::new("A")).build().unwrap();
    let t = theory(&spec);
    assert_eq!(t.rules.len(), 1);
    assert_eq!(t.rules[0].name, "Init_A");
    assert!(t.lemmas.is_empty());
    let text = render_theory(&t);
    assert_eq!(
        text,
        "theory Solo\nbegin\n\nrule Init_A:\n    [ Fr(~tidA)\n    ]\n  --[ Finish_A()\n    ]->\n    [ ]\n\nend\n"
    );
}

#[test]
fn lemma_templates() {
    let dhke = fixture("dhke");
    let lemmas = gen_lemmas(&dhke);
    assert_eq!(lemmas.len(), 1);
    assert_eq!(lemmas[0].formula, "Ex #i1 #i2. Finish_A()@i1 & Finish_B()@i2");

    let exp = |b: Term, e: Term| Term::apply(&Bundle::exp_symbol(), vec![b, e]).unwrap();
    let key = exp(exp(Term::constant("g", Sort::Public), Term::fresh("y")), Term::fresh("x"));
    let mut b = dhke.into_builder();
    b.goals_mut().push(SecurityGoal::Secrecy {
        term: key,
        viewpoint: "A".into(),
    });
    let spec = b.build().unwrap();
    let lemmas = gen_lemmas(&spec);
    assert_eq!(lemmas.len(), 2);
    assert_eq!(lemmas[1].name, "secrecy_exp_exp_g_y_x_A");
    assert_eq!(lemmas[1].kind, LemmaKind::AllTraces);
    assert_eq!(lemmas[1].formula, "All x #i. Secret_1(x)@i ==> not (Ex #j. K(x)@j)");
    let text = render_theory(&theory(&spec));
    assert!(text.contains("Secret_1(('g'^~x)^y)"), "{text}");

    let nslp = gen_lemmas(&fixture("nslp"));
    let agreement = nslp.iter().find(|l| l.name == "agreement_B_A").unwrap();
    assert_eq!(
        agreement.formula,
        "All a b t #i. Commit_B_1(a, b, t)@i ==> (Ex #j. Running_A_1(b, a, t)@j & j < i) & not (Ex a2 b2 #i2. Commit_B_1(a2, b2, t)@i2 & not (#i2 = #i))"
    );
    let text = render_theory(&theory(&fixture("nslp")));
    assert!(text.contains("Running_A_1($A, $B, <~na, nb>)"));
    assert!(text.contains("Commit_B_1($B, $A, <na, ~nb>)"));
}

#[test]
fn duplicate_lemma_names_are_numbered() {
    let mut b = fixture("nsp").into_builder();
    b.goals_mut().push(SecurityGoal::Secrecy {
        term: Term::fresh("na"),
        viewpoint: "A".into(),
    });
    let names: Vec<String> = gen_lemmas(&b.build().unwrap()).into_iter().map(|l| l.name).collect();
    assert_eq!(names, ["executable", "secrecy_na_A", "secrecy_nb_B", "secrecy_na_A_2"]);
}

#[test]
fn deterministic_output() {
    for f in fixtures::ALL {
        let spec = fixture(f.name);
        let first = render_theory(&theory(&spec));
        for _ in 0..10 {
            assert_eq!(render_theory(&theory(&spec)), first);
        }
    }
}

#[test]
fn executability_errors_block_compilation() {
    let spec = ProtocolSpec::builder("Bad")
        .bundle(Bundle::SymmetricEncryption)
        .role(Role::new("A").fresh("m"))
        .role(Role::new("B"))
        .send(
            "A",
            "B",
            Term::apply(&Bundle::SymmetricEncryption.symbols()[0], vec![Term::fresh("m"), Term::msg("k")]).unwrap(),
        )
        .build()
        .unwrap();
    let err = compile_tamarin(&spec).unwrap_err();
    assert_eq!(err[0].code, Code::NotConstructible);
}

#[test]
fn unoriented_user_equation_is_unsupported() {
    let f = FunctionSymbol::new("f", 2, Visibility::Public).unwrap();
    let (x, y) = (Term::msg("x"), Term::msg("y"));
    let eq = Equation::new(
        Term::apply(&f, vec![x.clone(), y.clone()]).unwrap(),
        Term::apply(&f, vec![y, x]).unwrap(),
        Orientation::Unoriented,
    )
    .unwrap();
    let spec = ProtocolSpec::builder("Comm")
        .function(f)
        .equation(eq)
        .role(Role::new("A"))
        .build()
        .unwrap();
    let err = compile_tamarin(&spec).unwrap_err();
    assert_eq!(err.len(), 1);
    assert_eq!(err[0].code, Code::Unsupported);
}

#[test]
fn message_constants_warn() {
    let spec = ProtocolSpec::builder("Lbl")
        .role(Role::new("A").knows(Term::constant("hello", Sort::Message)))
        .role(Role::new("B"))
        .send("A", "B", Term::constant("hello", Sort::Message))
        .build()
        .unwrap();
    let c = compile_tamarin(&spec).unwrap();
    assert_eq!(c.warnings.len(), 1);
    assert_eq!(c.warnings[0].code, Code::PrivateConstRendered);
    assert!(render_theory(&c.theory).contains("Out('hello')"));
}

#[test]
fn signatures_are_verified_with_equality_restriction() {
    let sign = Bundle::Signing.symbols()[0].clone();
    let spec = ProtocolSpec::builder("Sig")
        .bundle(Bundle::Signing)
        .role(Role::new("A").fresh("m").ltk("skA", KeyKind::AsymmetricPrivate))
        .role(Role::new("B"))
        .send(
            "A",
            "B",
            Term::pair(Term::fresh("m"), Term::apply(&sign, vec![Term::fresh("m"), Term::fresh("skA")]).unwrap()),
        )
        .build()
        .unwrap();
    let t = theory(&spec);
    assert_well_formed(&spec, &t);
    let text = render_theory(&t);
    assert!(text.contains("restriction Equality:\n  \"All x y #i. Eq(x, y)@i ==> x = y\""));
    assert!(text.contains("In(<m, sig>)"), "{text}");
    assert!(text.contains("Eq(verify(sig, m, pkA), true)"), "{text}");
}

#[test]
fn atomic_delivery_uses_projections_and_destructors() {
    let senc = Bundle::SymmetricEncryption.symbols()[0].clone();
    let mut b = ProtocolSpec::builder("Atomic")
        .bundle(Bundle::SymmetricEncryption)
        .role(Role::new("A").fresh("na").ltk("k", KeyKind::Symmetric))
        .role(Role::new("B").ltk("k", KeyKind::Symmetric))
        .send(
            "A",
            "B",
            Term::apply(&senc, vec![Term::pair(Term::fresh("na"), Term::public("A")), Term::fresh("k")]).unwrap(),
        )
        .send("B", "A", Term::fresh("na"));
    b.exchange_mut()[0].delivery = metacp_core::model::Delivery::Atomic;
    let spec = b.build().unwrap();
    let t = theory(&spec);
    assert_well_formed(&spec, &t);
    let text = render_theory(&t);
    assert!(text.contains("In(m1)"), "{text}");
    assert!(text.contains("Eq(snd(sdec(m1, ~k)), $A)"), "{text}");
    assert!(text.contains("Out(fst(sdec(m1, ~k)))"), "{text}");
    assert!(text.contains("!Shared_k(~k)"), "{text}");
}

#[test]
fn random_specs_compile_to_well_formed_theories() {
    for spec in common::random_specs(7, 150) {
        let t = theory(&spec);
        assert_well_formed(&spec, &t);
        assert_eq!(render_theory(&t), render_theory(&theory(&spec)));
    }
}
