use std::collections::BTreeSet;

use probsum_core::num::{int, rat, Rational};
use probsum_core::scm::*;
use probsum_core::syntax::{parse_formula, Event, Formula, Intervention, Signature, Sym, Var};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CHAIN: &str = "
vars X Y
ranges
X: 1 2
Y: 1 2
exo
u1: 1/2
u2: 1/2
fn X
u1 -> 1
u2 -> 2
fn Y(X)
1, * -> 1
2, * -> 2
";

fn chain() -> Scm {
    parse_scm(CHAIN).unwrap()
}

fn v(name: &str) -> Var {
    Var::new(name)
}

fn setting(pairs: &[(&str, u32)]) -> Setting {
    pairs.iter().map(|(n, x)| (v(n), *x)).collect()
}

#[test]
fn chain_validates() {
    assert_eq!(chain().validate(), Ok(()));
}

#[test]
fn reversed_order_reports_witness() {
    let text = "
vars Y X
ranges
X: 1 2
Y: 1 2
exo
u1: 1/2
u2: 1/2
fn X
u1 -> 1
u2 -> 2
fn Y(X)
1, * -> 1
2, * -> 2
";
    let scm = parse_scm(text).unwrap();
    match scm.validate() {
        Err(Violation::NotRecursive { var, parent, out_a, out_b, .. }) => {
            assert_eq!((var.as_str(), parent.as_str()), ("Y", "X"));
            assert_ne!(out_a, out_b);
        }
        other => panic!("expected recursiveness violation, got {:?}", other),
    }
}

#[test]
fn unnormalized_pmf_is_reported() {
    let text = CHAIN.replace("u1: 1/2", "u1: 2/3");
    let scm = parse_scm(&text).unwrap();
    assert!(matches!(scm.validate(), Err(Violation::NotNormalized { .. })));
}

#[test]
fn closed_world_violation_is_reported() {
    let text = CHAIN.replace("exo", "constants\nX: 1 1\nY: 1 2\nexo");
    let scm = parse_scm(&text).unwrap();
    assert_eq!(scm.validate(), Err(Violation::NotSurjective { var: "X".into(), value: 2 }));
}

#[test]
fn strict_format_checks_rows() {
    let missing = CHAIN.replace("2, * -> 2\n", "2, u1 -> 2\n");
    assert!(matches!(parse_scm(&missing), Err(ScmError::Format { .. })));
    let dup = CHAIN.replace("2, * -> 2\n", "2, * -> 2\n2, u1 -> 1\n");
    assert!(matches!(parse_scm(&dup), Err(ScmError::Format { .. })));
    let out_of_range = CHAIN.replace("2, * -> 2\n", "2, * -> 3\n");
    assert!(parse_scm(&out_of_range).is_err());
}

#[test]
fn format_round_trips() {
    let scm = chain();
    assert_eq!(parse_scm(&write_scm(&scm)).unwrap(), scm);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let m = random_scm(&mut rng, &[v("A"), v("B"), v("C")], &GenConfig::uniform(3, 3, 4, 12));
        assert_eq!(parse_scm(&write_scm(&m)).unwrap(), m);
    }
}

#[test]
fn interventions() {
    let scm = chain();
    let m = scm.apply_intervention(&setting(&[("X", 1)])).unwrap();
    assert_eq!(m.mechanism(0), &Mechanism::Constant(1));
    assert_eq!(scm.apply_intervention(&Setting::new()).unwrap(), scm);
    let twice = scm
        .apply_intervention(&setting(&[("X", 1)]))
        .unwrap()
        .apply_intervention(&setting(&[("X", 2)]))
        .unwrap();
    let once = scm.apply_intervention(&setting(&[("X", 2)])).unwrap();
    assert_eq!(twice.mechanism(0), once.mechanism(0));
    assert_eq!(twice.mechanism(1), once.mechanism(1));
    assert!(matches!(scm.apply_intervention(&setting(&[("X", 7)])), Err(ScmError::OutOfRange { .. })));
}

#[test]
fn solve_examples() {
    assert_eq!(chain().solve(1), vec![2, 2]);
    let constant = parse_scm("vars X\nranges\nX: 1 2\nexo\nu1: 1/3\nu2: 2/3\nfn X\n* -> 2\n").unwrap();
    assert_eq!(constant.solve(0), vec![2]);
    assert_eq!(constant.solve(1), vec![2]);
}

/// Brute-force fixed point: the solution satisfies every structural equation
/// and is the only complete assignment that does.
#[test]
fn solve_is_the_unique_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vars = [v("A"), v("B"), v("C")];
    for _ in 0..30 {
        let scm = random_scm(&mut rng, &vars, &GenConfig::uniform(3, 3, 3, 6));
        for u in 0..scm.outcomes().len() {
            let sol = scm.solve(u);
            let mut fixed = Vec::new();
            for a in 1..=3u32 {
                for b in 1..=3u32 {
                    for c in 1..=3u32 {
                        let cand = [a, b, c];
                        let ok = (0..3).all(|i| match scm.mechanism(i) {
                            Mechanism::Constant(x) => cand[i] == *x,
                            Mechanism::Table { parents, table } => {
                                let mut row = 0;
                                for &p in parents {
                                    row = row * 3 + (cand[p] as usize - 1);
                                }
                                cand[i] == table[row * scm.outcomes().len() + u]
                            }
                        });
                        if ok {
                            fixed.push(cand.to_vec());
                        }
                    }
                }
            }
            assert_eq!(fixed, vec![sol]);
        }
    }
}

fn atom(var: &str, c: u32) -> Event {
    Event::atom(Sym::constant(&v(var), c))
}

fn boxed(var: &str, c: u32, body: Event) -> Event {
    Event::boxed(Intervention(vec![Sym::constant(&v(var), c)]), body)
}

#[test]
fn event_probability_examples() {
    let scm = chain();
    assert_eq!(scm.event_probability(&Event::Top).unwrap(), int(1));
    let e = Event::and(boxed("X", 1, atom("Y", 1)), boxed("X", 2, atom("Y", 2)));
    assert_eq!(scm.event_probability(&e).unwrap(), int(1));
    assert_eq!(scm.event_probability(&atom("X", 1)).unwrap(), rat(1, 2));
    let err = scm.event_probability(&Event::atom(Sym::range(&v("X"), 1))).unwrap_err();
    assert!(matches!(err, ScmError::FreeRangeVariable(_)));
    let err = scm.event_probability(&atom("X", 9)).unwrap_err();
    assert!(matches!(err, ScmError::UninterpretedConstant { .. }));
}

#[test]
fn influences() {
    let scm = chain();
    assert_eq!(scm.induced_influences(&[v("X"), v("Y")]).unwrap(), BTreeSet::from([(v("X"), v("Y"))]));
    let indep = parse_scm(
        "vars X Y\nranges\nX: 1 2\nY: 1 2\nexo\nu1: 1/2\nu2: 1/2\nfn X\nu1 -> 1\nu2 -> 2\nfn Y\nu1 -> 2\nu2 -> 1\n",
    )
    .unwrap();
    assert!(indep.induced_influences(&[v("X"), v("Y")]).unwrap().is_empty());
}

#[test]
fn positivity() {
    let degenerate = parse_scm("vars X\nranges\nX: 1 2\nexo\nu1: 1\nfn X\nu1 -> 1\n").unwrap();
    assert!(!degenerate.check_positivity());
    let uniform = parse_scm("vars X\nranges\nX: 1 2\nexo\nu1: 1/2\nu2: 1/2\nfn X\nu1 -> 1\nu2 -> 2\n").unwrap();
    assert!(uniform.check_positivity());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let m = random_positive_scm(&mut rng, &[v("A"), v("B"), v("C")], &GenConfig::uniform(3, 3, 0, 40));
        assert!(m.validate().is_ok() && m.check_positivity());
    }
}

fn model_strategy() -> impl Strategy<Value = Scm> {
    (any::<u64>(), 1usize..4, 1usize..4).prop_map(|(seed, r, k)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_scm(&mut rng, &[v("A"), v("B")], &GenConfig { range_sizes: vec![r, 2], ..GenConfig::uniform(2, r, k, 12) })
    })
}

fn event_of(f: &Formula) -> Event {
    match f {
        Formula::Geq(probsum_core::Term::Prob { event, .. }, _) => event.clone(),
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interventional_joint_sums_to_one(scm in model_strategy(), a in 1u32..3) {
        let alpha = setting(&[("B", a)]);
        let total: Rational = scm.joint_distribution(&alpha).unwrap().values().sum();
        prop_assert_eq!(total, int(1));
        // Reading the intervened variable gives the intervened value.
        let e = boxed("B", a, Event::atom(Sym::constant(&v("B"), a)));
        let scm_identity = scm.with_constants(vec![scm.range(0).to_vec(), vec![1, 2]]).unwrap();
        prop_assert_eq!(scm_identity.event_probability(&e).unwrap(), int(1));
    }

    #[test]
    fn inclusion_exclusion(scm in model_strategy(), i in 1u32..3, j in 1u32..3, cross in any::<bool>()) {
        let sig = Signature::unbounded(&["A", "B"]).unwrap();
        let scm = scm.with_constants(vec![scm.range(0).to_vec(), vec![1, 2]]).unwrap();
        let d1 = event_of(&parse_formula(&format!("P(A=c{}) >= 0", i.min(scm.range(0).len() as u32)), &sig).unwrap());
        let d2 = if cross {
            event_of(&parse_formula(&format!("P([A=c1] B=c{}) >= 0", j), &sig).unwrap())
        } else {
            event_of(&parse_formula(&format!("P(B=c{}) >= 0", j), &sig).unwrap())
        };
        let (d1, d2) = if cross {
            (Event::boxed(Intervention::default(), d1), d2)
        } else {
            (d1, d2)
        };
        let p = |e: &Event| scm.event_probability(e).unwrap();
        let lhs = p(&Event::or(d1.clone(), d2.clone())) + p(&Event::and(d1.clone(), d2.clone()));
        prop_assert_eq!(lhs, p(&d1) + p(&d2));
    }

    #[test]
    fn influences_respect_declared_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vars = [v("A"), v("B"), v("C")];
        let scm = random_scm(&mut rng, &vars, &GenConfig::uniform(3, 2, 3, 6));
        for (a, b) in scm.induced_influences(&vars).unwrap() {
            prop_assert!(scm.var_index(&a) < scm.var_index(&b));
        }
    }
}
