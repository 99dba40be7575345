use probsum_core::proofs::*;
use probsum_core::scm::parse_scm;
use probsum_core::semantics::valid_in_model;
use probsum_core::syntax::*;
use proptest::prelude::*;

fn sig_x(n: u32) -> Signature {
    Signature::bounded(&["X".to_string()], n).unwrap()
}

fn formula(text: &str, sig: &Signature) -> Formula {
    parse_formula(text, sig).unwrap()
}

fn system(name: &str, n: Option<u32>) -> System {
    System::parse(name, n).unwrap()
}

fn verdict(text: &str, sys: &str, n: Option<u32>, n_max: u32) -> ProofVerdict {
    check_script(text, &system(sys, n), n_max).unwrap()
}

#[test]
fn eq_reflex_accepts_identity() {
    let sig = sig_x(2);
    assert!(check_axiom_instance(&formula("c1@X ~ c1@X", &sig), Schema::EqReflex, Some(2)).is_ok());
    assert!(check_axiom_instance(&formula("c1@X ~ c2@X", &sig), Schema::EqReflex, Some(2)).is_err());
}

#[test]
fn eq_dist_accepts_unequal_constants() {
    let sig = sig_x(2);
    let f = formula("c1@X !~ c2@X -> P(X=c1 & X=c2) == 0", &sig);
    assert!(check_axiom_instance(&f, Schema::EqDist, Some(2)).is_ok());
    let wrong = formula("c1@X ~ c2@X -> P(X=c1 & X=c2) == 0", &sig);
    assert!(check_axiom_instance(&wrong, Schema::EqDist, Some(2)).is_err());
}

#[test]
fn pos_rejects_repeated_variable_condition() {
    let sig = sig_x(2);
    let bad = formula("P(!X=c1 & X=c1) > 0", &sig);
    assert!(check_axiom_instance(&bad, Schema::Pos, Some(2)).is_err());
    let good = formula("P(!X=c1) > 0", &sig);
    assert!(check_axiom_instance(&good, Schema::Pos, Some(2)).is_ok());
}

#[test]
fn cond_and_sum_lower_shapes() {
    let sig = Signature::bounded(&["X".to_string(), "Y".to_string()], 2).unwrap();
    let cond = formula("P(X=c1 | Y=c2) >= 1/3 <-> P(X=c1 & Y=c2) >= 1/3 * P(Y=c2)", &sig);
    assert!(check_axiom_instance(&cond, Schema::Cond, Some(2)).is_ok());
    let cond = formula("P(X=c1 | !Y=c2) >= P(Y=c1) <-> P(X=c1 & !Y=c2) >= P(Y=c1) * P(!Y=c2)", &sig);
    assert!(check_axiom_instance(&cond, Schema::Cond, Some(2)).is_ok());
    let swapped = formula("P(X=c1 | Y=c2) >= 1/3 <-> P(X=c1 & Y=c2) >= 1/3", &sig);
    assert!(check_axiom_instance(&swapped, Schema::Cond, Some(2)).is_err());
    let lower = formula("c1@X !~ c2@X -> sum x1 . P(X=x1) >= P(X=c1) + P(X=c2)", &sig);
    assert!(check_axiom_instance(&lower, Schema::SumLower, Some(2)).is_ok());
    let missing = formula("sum x1 . P(X=x1) >= P(X=c1) + P(X=c2)", &sig);
    assert!(check_axiom_instance(&missing, Schema::SumLower, Some(2)).is_err());
}

#[test]
fn fin_n_needs_the_exact_count() {
    let sig = sig_x(3);
    assert!(check_axiom_instance(&formula("sum x1 . P(T) == 3", &sig), Schema::FinN, Some(3)).is_ok());
    assert!(check_axiom_instance(&formula("sum x1 . P(T) == 2", &sig), Schema::FinN, Some(3)).is_err());
}

#[test]
fn schema_names_round_trip() {
    for s in Schema::ALL.iter().copied() {
        assert_eq!(s.to_string().parse::<Schema>().unwrap(), s);
    }
    for r in Rule::ALL.iter().copied() {
        assert_eq!(r.to_string().to_lowercase().parse::<Rule>().unwrap(), r);
    }
}

#[test]
fn system_names() {
    let s = system("AX_N", Some(3));
    assert_eq!((s.base, s.bound, s.closed), (Base::Bounded, Some(3), false));
    let s = system("AX^closed_2", None);
    assert!(s.bound == Some(2));
    assert!(System::parse("AX_closed", None).unwrap().closed);
    assert_eq!(system("AX_fin", None).base, Base::Fin);
    assert!(System::parse("AX_N", None).is_err());
    assert!(System::parse("AX_2", Some(3)).is_err());
    assert!(System::parse("AX+Distinct", None).is_err());
    assert!(System::parse("BX", None).is_err());
    assert!(!system("AX_closed", None).allows_rule(Rule::FreeElim));
    assert!(!system("AX", None).allows_schema(Schema::FinN));
}

#[test]
fn modus_ponens_verifies() {
    let script = "vars: X\nhyp: P(X=c1) >= 1/2\nhyp: P(X=c1) >= 1/2 -> P(X=c2) <= 1/2\n\
                  A: P(X=c1) >= 1/2 BY hyp 0\n\
                  B: P(X=c1) >= 1/2 -> P(X=c2) <= 1/2 BY hyp 1\n\
                  C: P(X=c2) <= 1/2 BY rule MP FROM A, B\n";
    assert_eq!(verdict(script, "AX_closed", None, 64), ProofVerdict::Verified);
}

#[test]
fn script_errors_are_located() {
    let err = check_script("vars: X\nA: P(X=c1) >= 0\n", &system("AX", None), 64).unwrap_err();
    assert!(matches!(err, ProofError::Script { line: 2, .. }));
    let v = verdict("vars: X\nA: P(X=c1) >= 0 BY rule MP FROM Z\n", "AX", None, 64);
    assert!(matches!(v, ProofVerdict::Rejected { ref line, .. } if line.starts_with('A')));
    let v = verdict("vars: X\nA: P(X=c1) >= 0 BY hyp 0\n", "AX", None, 64);
    assert_eq!(v.label(), "rejected");
}

fn conv_explicit(upto: u32) -> String {
    let mut s = String::from("vars: X\n");
    for k in 1..=upto {
        s += &format!("hyp: P(X=c1) <= 1/{}\n", k);
    }
    let mut labels = Vec::new();
    for k in 1..=upto {
        s += &format!("H{}: P(X=c1) <= 1/{} BY hyp {}\n", k, k, k - 1);
        labels.push(format!("H{}", k));
    }
    s += &format!("Z: P(X=c1) <= 0 BY rule Conv FROM {}\n", labels.join(", "));
    s
}

const CONV_GENERATOR: &str = "vars: X\nhyp: P(X=c1) <= 1/{n}\n\
    G: P(X=c1) <= 1/{n} BY hyp 0\n\
    Z: P(X=c1) <= 0 BY rule Conv FROM G\n";

#[test]
fn conv_with_missing_premises_is_rejected() {
    let v = verdict(&conv_explicit(50), "AX_closed", None, 64);
    match v {
        ProofVerdict::Rejected { reason, .. } => assert!(reason.contains("51"), "{}", reason),
        other => panic!("expected rejection, got {:?}", other),
    }
}

#[test]
fn conv_with_a_generator_is_bounded() {
    let v = verdict(CONV_GENERATOR, "AX_closed", None, 64);
    assert_eq!(v, ProofVerdict::VerifiedBounded { rules: vec![Rule::Conv], n_max: 64 });
    let v = verdict(&conv_explicit(64), "AX_closed", None, 64);
    assert_eq!(v.label(), "verified-bounded");
}

#[test]
fn conv_rejects_a_wrong_premise_family() {
    let wrong = CONV_GENERATOR.replace("1/{n}", "2/{n}");
    assert_eq!(verdict(&wrong, "AX_closed", None, 16).label(), "rejected");
}

#[test]
fn a_generator_instance_failing_late_is_found() {
    let script = "vars: X\nhyp: P(X=c1) <= 1/40\n\
        H: P(X=c1) <= 1/40 BY hyp 0\n\
        W: (P(X=c1) <= 1/40) -> (P(X=c1) <= 1/{n}) BY axiom poly arith\n\
        G: P(X=c1) <= 1/{n} BY rule MP FROM H, W\n\
        Z: P(X=c1) <= 0 BY rule Conv FROM G\n";
    assert_eq!(verdict(script, "AX_closed", None, 40).label(), "verified-bounded");
    assert_eq!(verdict(script, "AX_closed", None, 41).label(), "rejected");
}

#[test]
fn bounded_free_intro_needs_every_constant() {
    let base = "vars: X\nhyp: P(X=x1) >= 0\nA: P(X=x1) >= 0 BY hyp 0\n\
        B1: P(X=c1) >= 0 BY rule FreeElim FROM A\n\
        B2: P(X=c2) >= 0 BY rule FreeElim FROM A\n";
    let full = format!("{}C: P(X=x2) >= 0 BY rule FreeIntro FROM B1, B2\n", base);
    assert_eq!(verdict(&full, "AX_2", None, 64), ProofVerdict::Verified);
    let partial = format!("{}C: P(X=x2) >= 0 BY rule FreeIntro FROM B1\n", base);
    assert_eq!(verdict(&partial, "AX_2", None, 64).label(), "rejected");
    assert_eq!(verdict(&full, "AX_2_closed", None, 64).label(), "rejected");
}

#[test]
fn corpus_verdicts() {
    assert_eq!(corpus_names().len(), CORPUS.len());
    for e in CORPUS {
        let v = verdict(e.text, e.system, e.n, DEFAULT_N_MAX);
        assert_eq!(v.label(), e.expected, "{}: {:?}", e.name, v);
    }
    assert!(corpus_entry("sum_eq_2").is_some());
    assert!(corpus_entry("no_such_proof").is_none());
}

#[test]
fn sum_eq_2_verifies_in_the_open_system_too() {
    let e = corpus_entry("sum_eq_2").unwrap();
    assert_eq!(verdict(e.text, "AX_2", None, 64), ProofVerdict::Verified);
}

#[test]
fn corrupted_corpus_lines_are_rejected() {
    let e = corpus_entry("distinct_from_fin_2").unwrap();
    let lines: Vec<&str> = e.text.lines().collect();
    let mut tried = 0;
    for (i, l) in lines.iter().enumerate() {
        if !l.contains(" BY ") || !l.contains("!~") {
            continue;
        }
        let mut copy = lines.clone();
        let broken = l.replacen("!~", "~", 1);
        copy[i] = &broken;
        let v = verdict(&copy.join("\n"), e.system, e.n, 64);
        assert_eq!(v.label(), "rejected", "line {} still accepted", i + 1);
        tried += 1;
    }
    assert!(tried > 0);
}

#[test]
fn deduction_pair_both_directions() {
    let e = corpus_entry("deduction_pair").unwrap();
    assert_eq!(verdict(e.text, e.system, e.n, 64), ProofVerdict::Verified);
}

/// X three-valued, Y binary; the cell (1, 1) factorizes and (2, 1) does not.
const REMARK_MODEL: &str = "vars X Y\nranges\nX: 1 2 3\nY: 1 2\nexo\n\
    u1: 1/12\nu2: 1/12\nu3: 3/12\nu4: 1/12\nu5: 2/12\nu6: 4/12\n\
    fn X\nu1 -> 1\nu2 -> 1\nu3 -> 2\nu4 -> 2\nu5 -> 3\nu6 -> 3\n\
    fn Y\nu1 -> 1\nu2 -> 2\nu3 -> 1\nu4 -> 2\nu5 -> 1\nu6 -> 2\n";

#[test]
fn relabelled_discharge_is_refused_and_invalid() {
    let e = corpus_entry("relabel_discharge").unwrap();
    match verdict(e.text, e.system, e.n, 64) {
        ProofVerdict::Rejected { line, reason } => {
            assert!(line.starts_with('D'));
            assert!(reason.contains("free variables"), "{}", reason);
        }
        other => panic!("expected rejection, got {:?}", other),
    }
    // With A as a hypothesis instead of an assumption, C follows.
    let as_hyp: String = e
        .text
        .lines()
        .filter(|l| !l.starts_with("D:") && !l.starts_with("goal:"))
        .map(|l| if l.starts_with("A:") { format!("hyp: {}\n{}\n", &l[3..l.find(" BY").unwrap()], l.replace("assume", "hyp 0")) } else { format!("{}\n", l) })
        .collect();
    assert_eq!(verdict(&as_hyp, e.system, e.n, 64).label(), "verified-bounded");
    // The refused implication fails in a concrete model.
    let scm = parse_scm(REMARK_MODEL).unwrap();
    let sig = Signature::unbounded(&["X".to_string(), "Y".to_string()]).unwrap();
    let goal = e.text.lines().find_map(|l| l.strip_prefix("goal:")).unwrap();
    assert!(!valid_in_model(&scm, &formula(goal, &sig)).unwrap());
    let a = formula("P(X=c1 & Y=c1) == P(X=c1) * P(Y=c1)", &sig);
    assert!(valid_in_model(&scm, &a).unwrap());
}

#[test]
fn fin_n_fuzz_has_no_violations() {
    let r = soundness_fuzz(Schema::FinN, &FuzzConfig::new(300, 11));
    assert_eq!(r.class, "M_2+");
    assert_eq!(r.violation_count, 0, "{:?}", r.violations);
    assert!(r.accepted > 0);
}

#[test]
fn cond_fuzz_has_no_violations() {
    let r = soundness_fuzz(Schema::Cond, &FuzzConfig::new(300, 12));
    assert_eq!(r.violation_count, 0, "{:?}", r.violations);
    assert_eq!(r.accepted, r.trials);
}

#[test]
fn every_schema_survives_fuzzing() {
    for s in Schema::ALL.iter().copied() {
        let r = soundness_fuzz(s, &FuzzConfig::new(150, 5));
        assert_eq!(r.violation_count, 0, "{}: {:?}", s, r.violations);
    }
}

#[test]
fn corrupted_eq_dist_is_caught() {
    let r = mutant_fuzz(Mutant::EqDistWithEq, &FuzzConfig::new(300, 13));
    assert!(r.violation_count > 0);
    assert!(!r.violations.is_empty());
}

#[test]
fn every_mutant_is_caught() {
    let mutants = mutant_schemas();
    assert!(mutants.len() >= 5);
    for m in mutants {
        let r = mutant_fuzz(m, &FuzzConfig::new(300, 17));
        assert!(r.violation_count > 0, "{:?} not caught", m);
    }
}

#[test]
fn rules_preserve_validity() {
    for r in [Rule::MP, Rule::FreeElim, Rule::FreeIntro, Rule::SumUpper] {
        let rep = rule_fuzz(r, &FuzzConfig::new(200, 19));
        assert!(rep.premises_held > 0, "{:?} never exercised", r);
        assert_eq!(rep.violation_count, 0, "{:?}: {:?}", r, rep.violations);
    }
}

#[test]
fn fuzz_is_deterministic_in_the_seed() {
    let a = soundness_fuzz(Schema::SumLower, &FuzzConfig::new(100, 3));
    let b = soundness_fuzz(Schema::SumLower, &FuzzConfig::new(100, 3));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

/// Scripts whose generator lines are correct at every index.
fn uniform_script(kind: u8, k: u32) -> (String, &'static str) {
    match kind {
        0 => (CONV_GENERATOR.replace("X=c1", &format!("X=c{}", k)), "AX_closed"),
        1 => (
            format!(
                "vars: X\nhyp: {k} * P(X=c1) <= 1/{{n}}\n\
                 G: {k} * P(X=c1) <= 1/{{n}} BY hyp 0\n\
                 Z: {k} * P(X=c1) <= 0 BY rule Conv FROM G\n\
                 W: ({k} * P(X=c1) <= 0) -> (P(X=c1) <= 0) BY axiom poly arith\n\
                 Y: P(X=c1) <= 0 BY rule MP FROM Z, W\n"
            ),
            "AX_closed",
        ),
        2 => (
            "vars: X\nhyp: P(X=x1) >= 0\nA: P(X=x1) >= 0 BY hyp 0\n\
             B: P(X=c{n}) >= 0 BY rule FreeElim FROM A\n\
             C: P(X=x2) >= 0 BY rule FreeIntro FROM B\n"
                .to_string(),
            "AX",
        ),
        _ => (corpus_entry("mp_chain").unwrap().text.to_string(), "AX_closed"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn acceptance_is_monotone_in_n_max(kind in 0u8..4, k in 1u32..4, a in 1u32..40, b in 1u32..40) {
        let (script, sys) = uniform_script(kind, k);
        let (lo, hi) = (a.min(b), a.max(b));
        let v_lo = verdict(&script, sys, None, lo);
        let v_hi = verdict(&script, sys, None, hi);
        if v_lo.is_accepted() {
            prop_assert!(v_hi.is_accepted(), "{:?} at {} but {:?} at {}", v_lo, lo, v_hi, hi);
        }
    }

    #[test]
    fn free_elim_closure(lhs in 1u32..3, rhs in 1u32..3, c in 1u32..3, strict in any::<bool>()) {
        let op = if strict { ">" } else { ">=" };
        let phi = format!(
            "(P(X=x1 & Y=c{lhs}) {op} P(Y=c{rhs})) -> (P(X=x1 & Y=c{lhs}) + P(X=x1) {op} P(Y=c{rhs}))"
        );
        let inst = phi.replace("x1", &format!("c{}", c));
        let head = "vars: X, Y\nhyp: P(X=x1) >= 0\nN: P(X=x1) >= 0 BY hyp 0\n";
        let body = format!(
            "{head}W: (P(X=x1) >= 0) -> ({phi}) BY axiom poly arith\nA: {phi} BY rule MP FROM N, W\n"
        );
        let v = verdict(&body, "AX_2", None, 16);
        prop_assert_eq!(v.label(), "verified");
        let extended = format!("{body}B: {inst} BY rule FreeElim FROM A\n");
        prop_assert_eq!(verdict(&extended, "AX_2", None, 16).label(), "verified");
    }
}
