use std::collections::BTreeSet;

use probsum_core::syntax::*;
use proptest::prelude::*;

fn sig() -> Signature {
    Signature::unbounded(&["X", "Y", "Z"]).unwrap()
}

fn x() -> Var {
    Var::new("X")
}

fn p(s: &str) -> Formula {
    parse_formula(s, &sig()).unwrap_or_else(|e| panic!("{s}: {e}"))
}

#[test]
fn parses_grammar_images() {
    let f = p("P(X=c1) >= 0");
    assert_eq!(f, Formula::geq(Term::prob(Event::atom(Sym::constant(&x(), 1))), Term::zero()));

    let t = parse_term("sum x1 . P(X=x1)", &sig()).unwrap();
    assert_eq!(t, Term::sum(RangeVar::new(&x(), 1), Term::prob(Event::atom(Sym::range(&x(), 1)))));

    let t = parse_term("P([X=c1] Y=y1 | Z=c2)", &sig()).unwrap();
    let (y, z) = (Var::new("Y"), Var::new("Z"));
    let expected = Term::cond(
        Event::boxed(Intervention(vec![Sym::constant(&x(), 1)]), Event::atom(Sym::range(&y, 1))),
        Event::boxed(Intervention::default(), Event::atom(Sym::constant(&z, 2))),
    );
    assert_eq!(t, expected);
}

#[test]
fn rational_literals_clear_denominators() {
    let t = Term::prob(Event::atom(Sym::constant(&x(), 1)));
    let f = p("P(X=c1) >= 1/2");
    assert_eq!(f, Formula::geq(Term::mul(t.clone(), Term::add(Term::one(), Term::one())), Term::one()));
    assert_eq!(p("P(X=c1) >= 0"), Formula::geq(t, Term::prob(Event::not(Event::Top))));
}

#[test]
fn bound_variable_in_denominator_is_rejected() {
    let err = parse_formula("sum x1 . P(Y=c1) / P(X=x1) >= P(Y=c1)", &sig()).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::BoundInDenominator);
    // A free variable in a denominator is fine.
    assert!(parse_formula("P(Y=c1) / P(X=x1) >= 1", &sig()).is_ok());
}

#[test]
fn parse_errors_are_positioned() {
    let err = parse_formula("P(X=c1) >= ", &sig()).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::Syntax);
    assert_eq!(err.pos.col, 12);
    let err = parse_formula("P(W=c1) >= 0", &sig()).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::UnknownSymbol);
    let err = parse_formula("x1 ~ y1", &sig()).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::CrossVariable);
    let err = parse_formula("P(X=y1) >= 0", &sig()).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::CrossVariable);
    let err = parse_formula("P([X=c1 & X=c2] Y=c1) >= 0", &sig()).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::Intervention);
}

#[test]
fn derived_connectives_expand() {
    let a = p("P(X=c1) >= P(X=c2)");
    let b = p("P(Y=c1) >= P(Y=c2)");
    assert_eq!(p("P(X=c1) >= P(X=c2) -> P(Y=c1) >= P(Y=c2)"), Formula::implies(a.clone(), b.clone()));
    assert_eq!(p("P(X=c1) >= P(X=c2) \\/ P(Y=c1) >= P(Y=c2)"), Formula::or(a.clone(), b.clone()));
    assert_eq!(p("(P(X=c1) >= P(X=c2)) <-> (P(Y=c1) >= P(Y=c2))"), Formula::iff(a, b));
    let (t1, t2) = (parse_term("P(X=c1)", &sig()).unwrap(), parse_term("P(X=c2)", &sig()).unwrap());
    assert_eq!(p("P(X=c1) > P(X=c2)"), Formula::gt(t1.clone(), t2.clone()));
    assert_eq!(p("P(X=c1) < P(X=c2)"), Formula::lt(t1.clone(), t2.clone()));
    assert_eq!(p("P(X=c1) == P(X=c2)"), Formula::approx(t1.clone(), t2.clone()));
    assert_eq!(p("P(X=c1) <= P(X=c2)"), Formula::geq(t2, t1));
    assert_eq!(p("P(X=c1) ≿ 0 ∧ ¬ x1 ≡ c2"), p("P(X=c1) >= 0 & !(x1 ~ c2)"));
}

#[test]
fn numerals_are_left_associated_sums() {
    assert_eq!(Term::numeral(3), Term::add(Term::add(Term::one(), Term::one()), Term::one()));
    assert_eq!(Term::numeral(3).as_numeral(), Some(3));
    assert_eq!(parse_term("3", &sig()).unwrap(), Term::numeral(3));
    assert_eq!(print_term(&Term::numeral(5)), "5");
}

/// Independent substitution oracle: rename every binder apart first, then
/// substitute without any capture check.
fn oracle_subst(f: &Formula, v: &RangeVar, d: &Sym) -> Formula {
    fn fresh_term(t: &Term, next: &mut u32) -> Term {
        match t {
            Term::Sum { bound, body } => {
                *next += 1;
                let fresh = RangeVar::new(&bound.var, 500 + *next);
                let body = naive_term(body, bound, &Sym::Range(fresh.clone()));
                Term::sum(fresh, fresh_term(&body, next))
            }
            Term::Add(a, b) => Term::add(fresh_term(a, next), fresh_term(b, next)),
            Term::Mul(a, b) => Term::mul(fresh_term(a, next), fresh_term(b, next)),
            Term::Neg(a) => Term::neg(fresh_term(a, next)),
            other => other.clone(),
        }
    }
    fn naive_term(t: &Term, v: &RangeVar, d: &Sym) -> Term {
        let rep = |s: &Sym| if s.as_range() == Some(v) { d.clone() } else { s.clone() };
        match t {
            Term::Prob { event, given } => Term::Prob {
                event: event.map_syms(&mut |s| rep(s)),
                given: given.map_syms(&mut |s| rep(s)),
            },
            Term::Sum { bound, .. } if bound == v => t.clone(),
            Term::Sum { bound, body } => Term::sum(bound.clone(), naive_term(body, v, d)),
            Term::Add(a, b) => Term::add(naive_term(a, v, d), naive_term(b, v, d)),
            Term::Mul(a, b) => Term::mul(naive_term(a, v, d), naive_term(b, v, d)),
            Term::Neg(a) => Term::neg(naive_term(a, v, d)),
            Term::Sym(s) => Term::Sym(rep(s)),
        }
    }
    fn go(f: &Formula, v: &RangeVar, d: &Sym, next: &mut u32) -> Formula {
        let rep = |s: &Sym| if s.as_range() == Some(v) { d.clone() } else { s.clone() };
        match f {
            Formula::Eq(a, b) => Formula::Eq(rep(a), rep(b)),
            Formula::Geq(a, b) => {
                let a = fresh_term(a, next);
                let b = fresh_term(b, next);
                Formula::Geq(naive_term(&a, v, d), naive_term(&b, v, d))
            }
            Formula::Not(x) => Formula::not(go(x, v, d, next)),
            Formula::And(a, b) => Formula::and(go(a, v, d, next), go(b, v, d, next)),
        }
    }
    go(f, v, d, &mut 0)
}

#[test]
fn substitution_examples() {
    let x1 = RangeVar::new(&x(), 1);
    let c1 = Sym::constant(&x(), 1);
    let c2 = Sym::constant(&x(), 2);
    assert_eq!(substitute_range_var(&p("P(X=x1) > 0"), &x1, &c1).unwrap(), p("P(X=c1) > 0"));
    let bound = p("(sum x1 . P(X=x1)) >= 0");
    assert_eq!(substitute_range_var(&bound, &x1, &c1).unwrap(), bound);

    let f = p("x1 ~ x2 & (sum x1 . P(X=x1)) > 0");
    let got = substitute_range_var(&f, &x1, &c2).unwrap();
    assert_eq!(got, p("c2@X ~ x2 & (sum x1 . P(X=x1)) > 0"));
    assert_eq!(rename_bound_canonical(&got), rename_bound_canonical(&oracle_subst(&f, &x1, &c2)));

    // Capture: substituting x2 for x1 under a binder of x2 renames the binder.
    let f = p("(sum x2 . P(X=x1) * P(X=x2)) >= 0");
    let got = substitute_range_var(&f, &x1, &Sym::range(&x(), 2)).unwrap();
    assert_eq!(free_vars(&got), BTreeSet::from([RangeVar::new(&x(), 2)]));
    assert_eq!(
        rename_bound_canonical(&got),
        rename_bound_canonical(&oracle_subst(&f, &x1, &Sym::range(&x(), 2)))
    );

    let err = substitute_range_var(&f, &x1, &Sym::constant(&Var::new("Y"), 1)).unwrap_err();
    assert!(matches!(err, SubstError::KindMismatch { .. }));
}

#[test]
fn event_substitution_examples() {
    let x1 = RangeVar::new(&x(), 1);
    let eps = Event::or(Event::atom(Sym::constant(&x(), 1)), Event::atom(Sym::constant(&x(), 2)));
    let t = parse_term("P(X=x1)", &sig()).unwrap();
    assert_eq!(substitute_event(&t, &x1, &eps).unwrap(), parse_term("P(X=c1 \\/ X=c2)", &sig()).unwrap());
    let top = Term::one();
    assert_eq!(substitute_event(&top, &x1, &eps).unwrap(), top);
    let bound = parse_term("sum x1 . P(X=x1)", &sig()).unwrap();
    assert_eq!(substitute_event(&bound, &x1, &eps).unwrap(), bound);
}

fn scan_free(f: &Formula) -> BTreeSet<RangeVar> {
    fn term(t: &Term, bound: &mut Vec<RangeVar>, out: &mut BTreeSet<RangeVar>) {
        let mut note = |s: &Sym, bound: &Vec<RangeVar>| {
            if let Some(rv) = s.as_range() {
                if !bound.contains(rv) {
                    out.insert(rv.clone());
                }
            }
        };
        match t {
            Term::Prob { event, given } => {
                event.for_each_sym(&mut |s| note(s, bound));
                given.for_each_sym(&mut |s| note(s, bound));
            }
            Term::Sum { bound: b, body } => {
                bound.push(b.clone());
                term(body, bound, out);
                bound.pop();
            }
            Term::Add(a, c) | Term::Mul(a, c) => {
                term(a, bound, out);
                term(c, bound, out);
            }
            Term::Neg(a) => term(a, bound, out),
            Term::Sym(s) => note(s, bound),
        }
    }
    let mut out = BTreeSet::new();
    match f {
        Formula::Eq(a, b) => {
            for s in [a, b] {
                if let Some(rv) = s.as_range() {
                    out.insert(rv.clone());
                }
            }
        }
        Formula::Geq(a, b) => {
            term(a, &mut vec![], &mut out);
            term(b, &mut vec![], &mut out);
        }
        Formula::Not(g) => out = scan_free(g),
        Formula::And(a, b) => {
            out = scan_free(a);
            out.extend(scan_free(b));
        }
    }
    out
}

#[test]
fn free_variable_examples() {
    assert_eq!(free_vars(&p("P(X=x1) > 0")), BTreeSet::from([RangeVar::new(&x(), 1)]));
    assert!(free_vars(&p("(sum x1 . P(X=x1)) > 0")).is_empty());
    let f = p("x1 ~ c1 & (sum x1 . P(X=x1) * P(Y=y2)) > 0");
    let expected = BTreeSet::from([RangeVar::new(&x(), 1), RangeVar::new(&Var::new("Y"), 2)]);
    assert_eq!(free_vars(&f), expected);
    assert_eq!(scan_free(&f), expected);
}

#[test]
fn classification_examples() {
    let f = classify_fragment(&p("(sum x1 . P(X=x1)) >= P(T)"));
    assert!(!f.causal && f.closed && f.circle);
    assert!(!classify_fragment(&p("-P(X=c1) <= P(T)")).circle);
    assert!(!classify_fragment(&p("x1 * P(X=c1) <= 1")).circle);
    let f = classify_fragment(&p("P(Y=c1 | X!=c1 & X!=c2) >= 0"));
    assert!(!f.cond_guarded, "two literals on X are outside L_cond");
    let f = classify_fragment(&p("P(Y=c1 | !X=c1 & !Z=c2) >= 0"));
    assert!(f.cond_guarded);
    assert_eq!(f.max_constant, 2);
    assert!(classify_fragment(&p("P([X=c1] Y=c1) >= 0")).causal);
}

/// L_cond by enumerating literal multisets: every conjunction (in either
/// association) of literals over distinct variables is accepted; repeating a
/// variable or using a non-literal is rejected.
#[test]
fn cond_language_by_enumeration() {
    let vars = [x(), Var::new("Y"), Var::new("Z")];
    let mut literals = Vec::new();
    for v in &vars {
        for i in 1..=2 {
            literals.push((v.clone(), Event::atom(Sym::constant(v, i))));
            literals.push((v.clone(), Event::not(Event::atom(Sym::constant(v, i)))));
        }
    }
    for a in &literals {
        assert!(in_cond_language(&a.1));
        for b in &literals {
            let distinct = a.0 != b.0;
            assert_eq!(in_cond_language(&Event::and(a.1.clone(), b.1.clone())), distinct);
            for c in &literals {
                let distinct3 = distinct && a.0 != c.0 && b.0 != c.0;
                let left = Event::and(Event::and(a.1.clone(), b.1.clone()), c.1.clone());
                let right = Event::and(a.1.clone(), Event::and(b.1.clone(), c.1.clone()));
                assert_eq!(in_cond_language(&left), distinct3);
                assert_eq!(in_cond_language(&right), distinct3);
            }
        }
    }
    assert!(in_cond_language(&Event::Top));
    assert!(!in_cond_language(&Event::not(Event::and(literals[0].1.clone(), literals[4].1.clone()))));
}

#[test]
fn signature_invariants() {
    assert!(Signature::bounded(&["X"], 0).is_err());
    assert!(Signature::unbounded(&["X", "x"]).is_err());
    assert!(Signature::unbounded(&["P"]).is_err());
    assert!(Signature::unbounded(&["A_"]).is_err());
    let s = Signature::unbounded(&["V1", "V2"]).unwrap();
    let f = parse_formula("P(V1=v1_3) >= P(V2=c1)", &s).unwrap();
    assert_eq!(print_formula(&f), "P(V1=v1_3) >= P(V2=c1)");
}

#[test]
fn sequents_parse_and_print() {
    let s = parse_sequent("P(X=c1) > 0; P(Y=c1) > 0 |- P(X=c1 & Y=c1) >= 0", &sig()).unwrap();
    assert_eq!(s.premises.len(), 2);
    assert_eq!(parse_sequent(&print_sequent(&s), &sig()).unwrap(), s);
    let s = parse_sequent("|- P(T) >= 1", &sig()).unwrap();
    assert!(s.premises.is_empty());
}

// ---------- property tests ----------

fn arb_sym(var: Var) -> impl Strategy<Value = Sym> {
    let v2 = var.clone();
    prop_oneof![(1u32..4).prop_map(move |i| Sym::constant(&var, i)), (1u32..3).prop_map(move |i| Sym::range(&v2, i))]
}

fn arb_var() -> impl Strategy<Value = Var> {
    prop_oneof![Just(Var::new("X")), Just(Var::new("Y")), Just(Var::new("Z"))]
}

fn arb_atom() -> impl Strategy<Value = Event> {
    arb_var().prop_flat_map(arb_sym).prop_map(Event::Atom)
}

fn arb_prob_event() -> impl Strategy<Value = Event> {
    let leaf = prop_oneof![Just(Event::Top), arb_atom()];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Event::not),
            (inner.clone(), inner).prop_map(|(a, b)| Event::and(a, b)),
        ]
    })
}

fn arb_intervention() -> impl Strategy<Value = Intervention> {
    proptest::sample::subsequence(vec![Var::new("X"), Var::new("Y"), Var::new("Z")], 0..=2)
        .prop_flat_map(|vars| vars.into_iter().map(arb_sym).collect::<Vec<_>>())
        .prop_map(Intervention)
}

fn arb_causal_event() -> impl Strategy<Value = Event> {
    let leaf = (arb_intervention(), arb_prob_event()).prop_map(|(i, b)| Event::boxed(i, b));
    leaf.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Event::not),
            (inner.clone(), inner).prop_map(|(a, b)| Event::and(a, b)),
        ]
    })
}

fn arb_prob_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        (arb_prob_event(), prop_oneof![Just(Event::Top), arb_prob_event()]).prop_map(|(e, g)| Term::cond(e, g)),
        (arb_causal_event(), prop_oneof![Just(Event::Top), arb_causal_event()]).prop_map(|(e, g)| Term::cond(e, g)),
    ]
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        4 => arb_prob_term(),
        1 => (0u64..4).prop_map(Term::numeral),
        1 => arb_var().prop_flat_map(arb_sym).prop_map(Term::Sym),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::mul(a, b)),
            inner.clone().prop_map(Term::neg),
            (arb_var(), 1u32..3, inner).prop_map(|(v, i, b)| Term::sum(RangeVar::new(&v, i), b)),
        ]
    })
}

fn arb_formula() -> impl Strategy<Value = Formula> {
    let eq = arb_var().prop_flat_map(|v| (arb_sym(v.clone()), arb_sym(v))).prop_map(|(a, b)| Formula::Eq(a, b));
    let leaf = prop_oneof![1 => eq, 3 => (arb_term(), arb_term()).prop_map(|(a, b)| Formula::Geq(a, b))];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::iff(a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parse_print_round_trip(f in arb_formula()) {
        let text = print_formula(&f);
        let back = parse_formula(&text, &sig()).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, f, "{}", text);
    }

    #[test]
    fn substitution_composes(f in arb_formula(), i in 1u32..3, c in 1u32..4, c2 in 1u32..4) {
        let v = RangeVar::new(&x(), i);
        let once = substitute_range_var(&f, &v, &Sym::constant(&x(), c)).unwrap();
        let twice = substitute_range_var(&once, &v, &Sym::constant(&x(), c2)).unwrap();
        prop_assert_eq!(&once, &twice);
        let mut expected = free_vars(&f);
        expected.remove(&v);
        prop_assert_eq!(free_vars(&once), expected);
    }

    #[test]
    fn substitution_agrees_with_oracle(f in arb_formula(), i in 1u32..3, j in 1u32..3) {
        let v = RangeVar::new(&x(), i);
        let d = Sym::range(&x(), j);
        let got = substitute_range_var(&f, &v, &d).unwrap();
        prop_assert_eq!(rename_bound_canonical(&got), rename_bound_canonical(&oracle_subst(&f, &v, &d)));
    }

    #[test]
    fn free_vars_match_scan(f in arb_formula()) {
        prop_assert_eq!(free_vars(&f), scan_free(&f));
    }
}
