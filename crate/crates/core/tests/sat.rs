use std::collections::BTreeSet;

use num_bigint::BigUint;
use probsum_core::grounding::{eliminate_conditionals_guarded, universal_closure, unfold_sums, GroundingContext};
use probsum_core::num::{rat, Rational};
use probsum_core::sat::*;
use probsum_core::scenarios::{self, conv_family, single_var_signature, sum_upper_family, FormulaShape};
use probsum_core::scm::{random_scm, GenConfig};
use probsum_core::semantics::satisfies_sequent;
use probsum_core::syntax::{parse_formula, parse_sequent, Event, Formula, Intervention, Sequent, Signature, Sym, Var};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sig(names: &[&str], n: u32) -> Signature {
    Signature::bounded(names, n).unwrap()
}

fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(n)).collect()
}

/// Every (intervention, full assignment agreeing with it) pair, listed
/// without reference to the library's counting.
fn naive_count(interventions: &[Setting], ranges: &[Vec<u32>]) -> usize {
    interventions
        .iter()
        .map(|s| {
            let mut n = 0;
            let total: usize = ranges.iter().map(Vec::len).product();
            for code in 0..total {
                let mut c = code;
                let mut ok = true;
                for (p, r) in ranges.iter().enumerate() {
                    let v = r[c % r.len()];
                    c /= r.len();
                    if let Some(&(_, w)) = s.iter().find(|(q, _)| *q == p) {
                        ok &= v == w;
                    }
                }
                n += ok as usize;
            }
            n
        })
        .product()
}

#[test]
fn binary_variable_descriptions_pair_every_intervention() {
    let s = sig(&["X"], 2);
    let phi = parse_formula("P(X=c1) >= 0", &s).unwrap();
    let interp = Interpretation::identity(vars(&["X"]), &[2], 2);
    let all = enumerate_state_descriptions(&phi, &interp, Scope::All, 1000).unwrap();
    assert_eq!(all.interventions.len(), 3);
    // The observational row is free; both intervened rows are forced.
    assert_eq!(all.descriptions.len(), 2);
    assert_eq!(all.count, BigUint::from(2u32));
    assert_eq!(naive_count(&all.interventions, &interp.ranges), 2);
    assert_eq!(all.descriptions[1], vec![vec![2], vec![1], vec![2]]);
    let obs = enumerate_state_descriptions(&phi, &interp, Scope::Appearing, 1000).unwrap();
    assert_eq!(obs.descriptions, vec![vec![vec![1]], vec![vec![2]]]);
}

#[test]
fn zero_variables_give_a_single_description() {
    let s = sig(&["X"], 1);
    let phi = parse_formula("P(T) >= 1", &s).unwrap();
    let interp = Interpretation::identity(Vec::new(), &[], 1);
    let d = enumerate_state_descriptions(&phi, &interp, Scope::All, 10).unwrap();
    assert_eq!(d.descriptions, vec![vec![Vec::<u32>::new()]]);
}

#[test]
fn frontdoor_descriptions_match_closed_form() {
    let fd = scenarios::frontdoor_signature();
    let conclusion = parse_formula(scenarios::FRONTDOOR_CONCLUSION, &fd).unwrap();
    let ctx = GroundingContext::new(2).unwrap();
    let ground = eliminate_conditionals_guarded(&unfold_sums(&universal_closure(&conclusion, &ctx).unwrap(), &ctx).unwrap())
        .unwrap();
    let v = fd.variables().to_vec();
    let interp = Interpretation::identity(v, &[2, 2, 2], 2);
    let d = enumerate_state_descriptions(&ground, &interp, Scope::Appearing, 1 << 20).unwrap();
    assert_eq!(d.descriptions.len(), naive_count(&d.interventions, &interp.ranges));
    assert_eq!(d.count, BigUint::from(d.descriptions.len()));
    let distinct: BTreeSet<_> = d.descriptions.iter().collect();
    assert_eq!(distinct.len(), d.descriptions.len());
    // Every partial assignment of three binary variables: 27 interventions.
    let all = intervention_set(&ground, &interp, Scope::All).unwrap();
    assert_eq!(all.len(), 27);
    assert_eq!(count_descriptions(&all, &interp), BigUint::from(1u64 << 27));
    assert!(enumerate_state_descriptions(&ground, &interp, Scope::All, 1000).is_err());
}

#[test]
fn open_formula_is_rejected() {
    let s = sig(&["X"], 2);
    let phi = parse_formula("P(X=x1) >= 0", &s).unwrap();
    let interp = Interpretation::identity(vars(&["X"]), &[2], 2);
    assert!(matches!(
        enumerate_state_descriptions(&phi, &interp, Scope::All, 10),
        Err(SatError::NotClosed(_))
    ));
}

#[test]
fn compatibility_examples() {
    let interventions: Vec<Setting> = vec![vec![], vec![(0, 1)], vec![(0, 2)]];
    // Y copies X in every row.
    let responsive = vec![vec![1, 1], vec![1, 1], vec![2, 2]];
    assert!(check_support_compatibility(&interventions, &[responsive.clone()], &[0, 1]));
    assert!(!check_support_compatibility(&interventions, &[responsive], &[1, 0]));
    let constant = vec![vec![1, 2], vec![1, 2], vec![2, 2]];
    assert!(check_support_compatibility(&interventions, &[constant], &[1, 0]));
    assert!(check_support_compatibility(&interventions, &[], &[1, 0]));
}

#[test]
fn realizable_descriptions_follow_the_order() {
    let interp = Interpretation::identity(vars(&["X", "Y"]), &[2, 2], 2);
    let interventions: Vec<Setting> = vec![vec![], vec![(0, 1)], vec![(0, 2)]];
    let forward = realizable_descriptions(&interp, &interventions, &[0, 1], 1000).unwrap();
    // X free in the observational row; Y any function of X: 2 · 4.
    assert_eq!(forward.len(), 8);
    for d in &forward {
        assert!(check_support_compatibility(&interventions, std::slice::from_ref(d), &[0, 1]));
    }
    let backward = realizable_descriptions(&interp, &interventions, &[1, 0], 1000).unwrap();
    // Y cannot see X: Y fixed across rows, X a function of Y.
    assert_eq!(backward.len(), 4);
    for d in &backward {
        assert!(d.iter().all(|row| row[1] == d[0][1]));
    }
}

fn unit(k: usize, m: usize) -> Vec<Rational> {
    (0..m).map(|i| if i == k { rat(1, 1) } else { rat(0, 1) }).collect()
}

#[test]
fn reduce_probability_of_top_is_normalization() {
    let s = sig(&["X"], 2);
    let phi = parse_formula("P(T) == 1", &s).unwrap();
    let interp = Interpretation::identity(vars(&["X"]), &[2], 2);
    let support = vec![vec![vec![1]], vec![vec![2]]];
    let cs = reduce_to_constraints(&phi, &interp, &[vec![]], &support, false).unwrap();
    assert_eq!(cs.root, BoolExpr::Const(true));
}

#[test]
fn reduce_single_membership() {
    let s = sig(&["X"], 2);
    let phi = parse_formula("P(X=c1) >= 1/2", &s).unwrap();
    let interp = Interpretation::identity(vars(&["X"]), &[2], 2);
    let support = vec![vec![vec![1]], vec![vec![2]]];
    let cs = reduce_to_constraints(&phi, &interp, &[vec![]], &support, false).unwrap();
    assert_eq!(cs.atoms.len(), 1);
    let p = &cs.atoms[0].poly;
    // Only the first unknown appears.
    assert!(p.terms().all(|(m, _)| m.iter().all(|&v| v == 0)));
    assert!(cs.satisfied_by(&[rat(1, 2), rat(1, 2)]));
    assert!(!cs.satisfied_by(&[rat(1, 4), rat(3, 4)]));
}

#[test]
fn reduce_counterfactual_conjunction_by_rows() {
    let s = sig(&["X", "Y"], 2);
    let phi = parse_formula("P([X=c1] Y=c1 & [X=c2] Y=c1) >= 1", &s).unwrap();
    let interp = Interpretation::identity(vars(&["X", "Y"]), &[2, 2], 2);
    let d = enumerate_state_descriptions(&phi, &interp, Scope::Appearing, 1000).unwrap();
    assert_eq!(d.interventions, vec![vec![], vec![(0, 1)], vec![(0, 2)]]);
    let cs = reduce_to_constraints(&phi, &interp, &d.interventions, &d.descriptions, false).unwrap();
    let m = d.descriptions.len();
    for (k, desc) in d.descriptions.iter().enumerate() {
        let expected = desc[1][1] == 1 && desc[2][1] == 1;
        assert_eq!(cs.satisfied_by(&unit(k, m)), expected, "description {:?}", desc);
    }
}

#[test]
fn reduce_rejects_foreign_variables() {
    let s = sig(&["X", "Y"], 2);
    let phi = parse_formula("P(Y=c1) >= 0", &s).unwrap();
    let interp = Interpretation::identity(vars(&["X"]), &[2], 2);
    assert!(matches!(
        reduce_to_constraints(&phi, &interp, &[vec![]], &[vec![vec![1]]], false),
        Err(SatError::OutOfScope(_))
    ));
}

fn system(unknowns: usize, strict: bool, atoms: Vec<Atom>) -> ConstraintSystem {
    let root = (0..atoms.len())
        .map(BoolExpr::Atom)
        .reduce(|a, b| BoolExpr::And(Box::new(a), Box::new(b)))
        .unwrap_or(BoolExpr::Const(true));
    ConstraintSystem::new(unknowns, Domain::Simplex { strict }, atoms, root)
}

#[test]
fn solver_half_example() {
    let atom = Atom { poly: Poly::var(0).sub(&Poly::constant(rat(1, 2))), rel: Rel::Ge };
    let strict = system(2, true, vec![atom.clone()]);
    match solve_constraints_small(&strict, 2).unwrap() {
        SolveOutcome::Witness(p) => assert_eq!(p, vec![rat(1, 2), rat(1, 2)]),
        other => panic!("{:?}", other),
    }
    let loose = system(2, false, vec![atom]);
    match solve_constraints_small(&loose, 2).unwrap() {
        SolveOutcome::Witness(p) => assert!(loose.satisfied_by(&p)),
        other => panic!("{:?}", other),
    }
}

#[test]
fn solver_contradiction_with_normalization() {
    let atom = Atom { poly: Poly::var(0).sub(&Poly::constant(rat(1, 1))), rel: Rel::Gt };
    let cs = system(2, false, vec![atom]);
    assert!(interval_infeasible(&cs, 100));
    for d in 1..=16 {
        let out = solve_constraints_small(&cs, d).unwrap();
        assert!(matches!(out, SolveOutcome::Infeasible | SolveOutcome::NoWitnessAtBound), "{:?}", out);
    }
}

#[test]
fn solver_product_example() {
    let atom = Atom { poly: Poly::var(0).mul(&Poly::var(1)).sub(&Poly::constant(rat(1, 4))), rel: Rel::Ge };
    let cs = system(2, false, vec![atom]);
    match solve_constraints_small(&cs, 4).unwrap() {
        SolveOutcome::Witness(p) => assert_eq!(p, vec![rat(1, 2), rat(1, 2)]),
        other => panic!("{:?}", other),
    }
    // Grid oracle: the only points with denominator 1 are the vertices.
    match solve_constraints_small(&cs, 1).unwrap() {
        SolveOutcome::Witness(p) => panic!("unexpected {:?}", p),
        _ => {}
    }
}

#[test]
fn solver_cap_is_reported() {
    let cs = system(100, false, Vec::new());
    assert!(matches!(solve_constraints_small(&cs, 2), Err(SatError::Cap(_))));
}

fn sat(text: &str, names: &[&str], n: u32, d: u64) -> SatReport {
    let s = parse_sequent(text, &sig(names, n)).unwrap();
    sat_bounded(&s, &SatConfig::new(n, d)).unwrap()
}

#[test]
fn sat_uniform_witness() {
    let r = sat("|- P(X=c1) > 0 & P(X=c2) > 0", &["X"], 2, 4);
    let Verdict::Sat(w) = r.verdict else { panic!("{:?}", r.verdict) };
    let x = Var::new("X");
    for j in 1..=2 {
        let p = w.scm.event_probability(&Event::atom(Sym::constant(&x, j))).unwrap();
        assert_eq!(p, rat(1, 2));
    }
}

#[test]
fn conv_family_is_satisfiable() {
    let s = single_var_signature(2);
    for n in 1..=10 {
        let r = sat_formulas(&conv_family(n, &s), &SatConfig::new(2, 16)).unwrap();
        let Verdict::Sat(w) = &r.verdict else { panic!("n = {}: {:?}", n, r.verdict) };
        let p = w.scm.event_probability(&Event::atom(Sym::constant(&Var::new("X"), 1))).unwrap();
        assert!(p > rat(0, 1) && p <= rat(1, n as i64));
    }
}

#[test]
fn top_below_bottom_is_analytically_unsat() {
    for n in 1..=3 {
        for d in [1, 4, 16] {
            let r = sat("|- P(T) < P(F)", &["X"], n, d);
            assert!(matches!(r.verdict, Verdict::Unsat { analytic: true }), "{:?}", r.verdict);
        }
    }
}

#[test]
fn sum_upper_boundary() {
    for big in 2..=3 {
        let s = single_var_signature(big);
        for n in 1..big {
            let r = sat_formulas(&[sum_upper_family(n, &s)], &SatConfig::new(big, 16)).unwrap();
            assert!(r.verdict.is_sat(), "N = {}, n = {}", big, n);
        }
        let r = sat_formulas(&[sum_upper_family(big, &s)], &SatConfig::new(big, 16)).unwrap();
        assert!(matches!(r.verdict, Verdict::Unsat { analytic: true }), "N = {}: {:?}", big, r.verdict);
    }
}

#[test]
fn causal_formula_in_prob_mode_is_rejected() {
    let s = parse_sequent("|- P([X=c1] Y=c1) > 0", &sig(&["X", "Y"], 2)).unwrap();
    let mut cfg = SatConfig::new(2, 4);
    cfg.mode = Mode::Prob;
    assert!(matches!(sat_bounded(&s, &cfg), Err(SatError::CausalInProbMode)));
}

#[test]
fn caps_are_enforced() {
    let s = parse_sequent("|- P(X=c1) > 0", &sig(&["X"], 4)).unwrap();
    assert!(matches!(sat_bounded(&s, &SatConfig::new(4, 4)), Err(SatError::Cap(_))));
    assert!(matches!(sat_bounded(&s, &SatConfig::new(2, 17)), Err(SatError::Cap(_))));
}

#[test]
fn premises_can_make_a_sequent_trivially_satisfiable() {
    // A model violating the premise satisfies the sequent.
    let r = sat("P(X=c1) >= 1 |- P(X=c1) < 1/2", &["X"], 2, 4);
    assert!(r.verdict.is_sat());
    let r = sat("P(X=c1) >= 0 |- P(X=c1) > 1", &["X"], 2, 4);
    assert!(matches!(r.verdict, Verdict::Unsat { .. }));
}

#[test]
fn counterfactual_witness_has_a_responsive_mechanism() {
    let r = sat("|- P([X=c1] Y=c1) == 1 & P([X=c2] Y=c2) == 1", &["X", "Y"], 2, 4);
    let Verdict::Sat(w) = r.verdict else { panic!("{:?}", r.verdict) };
    assert_eq!(w.order[0], Var::new("X"));
}

#[test]
fn positive_mode_covers_every_cell() {
    let s = parse_sequent("|- P(X=c1) > 0", &sig(&["X", "Y"], 2)).unwrap();
    let mut cfg = SatConfig::new(2, 8);
    cfg.positive = true;
    let r = sat_bounded(&s, &cfg).unwrap();
    let Verdict::Sat(w) = r.verdict else { panic!("{:?}", r.verdict) };
    assert!(w.scm.check_positivity());
}

#[test]
fn coefficient_symbols_get_labelled_cases() {
    // Satisfiable only when c1 and c2 name different values, one of them 2.
    let r = sat("|- c2@X * P(X=c2) >= 2 & c1@X ~ c1", &["X"], 2, 4);
    let Verdict::Sat(w) = r.verdict else { panic!("{:?}", r.verdict) };
    assert_eq!(w.scm.constant_value(&Var::new("X"), 2).unwrap(), 2);
}

fn brute(text: &str, names: &[&str]) -> BruteVerdict {
    let s = parse_sequent(text, &sig(names, 2)).unwrap();
    brute_force_sat(&s, &BruteConfig { n: 2, denominator: 4, max_outcomes: 4, positive: false }).unwrap()
}

#[test]
fn brute_force_examples() {
    assert!(brute("|- P(X=c1) >= 0", &["X"]).is_sat());
    assert!(brute("|- !(P(X=c1) > 0 & P(X=c1) <= 0)", &["X"]).is_sat());
    assert!(!brute("|- P(X=c1) > 1", &["X"]).is_sat());
    assert!(brute("|- P([X=c1] Y=c1) == 1 & P([X=c2] Y=c2) == 1", &["X", "Y"]).is_sat());
    assert!(!brute("|- P(X=c1 & Y=c1) > P(X=c1)", &["X", "Y"]).is_sat());
}

#[test]
fn brute_force_caps() {
    let s = parse_sequent("|- P(X=c1 & Y=c1 & Z=c1) >= 0", &sig(&["X", "Y", "Z"], 2)).unwrap();
    assert!(brute_force_sat(&s, &BruteConfig { n: 2, denominator: 4, max_outcomes: 4, positive: false }).is_err());
}

#[test]
fn set_partitions_are_bell_numbers() {
    let counts: Vec<usize> = (0..6).map(|n| set_partitions(n).len()).collect();
    assert_eq!(counts, vec![1, 1, 2, 5, 15, 52]);
}

fn description_event(d: &Description, interventions: &[Setting], vars: &[Var]) -> Event {
    let rows = interventions.iter().zip(d).map(|(s, row)| {
        let body = Event::conj(row.iter().enumerate().map(|(p, &v)| Event::atom(Sym::constant(&vars[p], v))));
        if s.is_empty() {
            body
        } else {
            Event::boxed(Intervention(s.iter().map(|&(p, v)| Sym::constant(&vars[p], v)).collect()), body)
        }
    });
    Event::conj(rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn descriptions_partition_unity(seed in any::<u64>(), range in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vs = vars(&["X", "Y"]);
        let scm = random_scm(&mut rng, &vs, &GenConfig::uniform(2, range, 3, 6));
        let n = range as u32;
        let s = sig(&["X", "Y"], n);
        let phi = parse_formula("P([X=c1] Y=c1) >= P([Y=c2] X=c1 & [X=c2] T)", &s).unwrap();
        let interp = Interpretation::identity(vs.clone(), &[n, n], n);
        let d = enumerate_state_descriptions(&phi, &interp, Scope::Appearing, 1 << 16).unwrap();
        let mut total = rat(0, 1);
        for desc in &d.descriptions {
            let p = scm.event_probability(&description_event(desc, &d.interventions, &vs)).unwrap();
            total += p;
        }
        prop_assert_eq!(total, rat(1, 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sat_witnesses_verify(seed in any::<u64>(), causal in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vs = vars(&["X", "Y"]);
        let shape = FormulaShape { constants: 2, sum_depth: 1, depth: 2, causal, conditional: false };
        let f: Formula = scenarios::random_formula(&mut rng, &vs, shape);
        let seq = Sequent::new(Vec::new(), f);
        let mut cfg = SatConfig::new(2, 4);
        cfg.support_cap = 3;
        let r = sat_bounded(&seq, &cfg).unwrap();
        if let Verdict::Sat(w) = r.verdict {
            prop_assert!(w.scm.validate().is_ok());
            prop_assert!(satisfies_sequent(&w.scm, &seq).unwrap());
        }
    }
}
