use std::collections::HashMap;

use probsum_core::circuits::*;
use probsum_core::num::{int, rat, Rational};
use probsum_core::sat::{solve_constraints_small, SolveOutcome};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(s: &str) -> Vec<bool> {
    parse_bits(s).unwrap()
}

#[test]
fn identity_wiring_echoes_input() {
    let c = BooleanCircuit::new(3, vec![Gate::Input(0), Gate::Input(1), Gate::Input(2)], vec![0, 1, 2]).unwrap();
    for a in 0..8u32 {
        let input: Vec<bool> = (0..3).map(|i| a >> i & 1 == 1).collect();
        assert_eq!(eval_circuit(&c, &input).unwrap(), input);
    }
}

#[test]
fn single_and() {
    let c = parse_netlist("inputs 2\ng2 = AND i0 i1\noutputs g2\n").unwrap();
    assert_eq!(eval_circuit(&c, &bits("11")).unwrap(), bits("1"));
    assert_eq!(eval_circuit(&c, &bits("10")).unwrap(), bits("0"));
}

#[test]
fn input_length_mismatch() {
    let c = parse_netlist("inputs 2\ng2 = OR i0 i1\noutputs g2\n").unwrap();
    assert!(matches!(eval_circuit(&c, &bits("1")), Err(CircuitError::InputLength { expected: 2, got: 1 })));
}

/// Recursive evaluation from the outputs, one gate at a time, with no
/// ordering assumptions.
fn oracle(gates: &HashMap<String, (String, Vec<String>)>, name: &str, input: &[bool]) -> bool {
    if let Some(k) = name.strip_prefix('i') {
        return input[k.parse::<usize>().unwrap()];
    }
    let (op, args) = &gates[name];
    let v: Vec<bool> = args.iter().map(|a| oracle(gates, a, input)).collect();
    match op.as_str() {
        "AND" => v[0] && v[1],
        "OR" => v[0] || v[1],
        _ => !v[0],
    }
}

#[test]
fn random_circuits_match_truth_table_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = 3;
        let mut names: Vec<String> = (0..n).map(|i| format!("i{}", i)).collect();
        let mut gates = HashMap::new();
        let mut lines = Vec::new();
        for g in 0..8 {
            let name = format!("g{}", 10 + g);
            let pick = |rng: &mut ChaCha8Rng| names[rng.gen_range(0..names.len())].clone();
            let (op, args) = match rng.gen_range(0..3) {
                0 => ("AND", vec![pick(&mut rng), pick(&mut rng)]),
                1 => ("OR", vec![pick(&mut rng), pick(&mut rng)]),
                _ => ("NOT", vec![pick(&mut rng)]),
            };
            lines.push(format!("{} = {} {}", name, op, args.join(" ")));
            gates.insert(name.clone(), (op.to_string(), args));
            names.push(name);
        }
        // Declaration order is irrelevant to the parser.
        lines.reverse();
        let outs = ["g17", "g15", "g12"];
        let text = format!("inputs {}\n{}\noutputs {}\n", n, lines.join("\n"), outs.join(" "));
        let c = parse_netlist(&text).unwrap();
        assert_eq!(c.size(), n + 8);
        let again = parse_netlist(&write_netlist(&c)).unwrap();
        for a in 0..1u32 << n {
            let input: Vec<bool> = (0..n).map(|i| a >> i & 1 == 1).collect();
            let want: Vec<bool> = outs.iter().map(|o| oracle(&gates, o, &input)).collect();
            assert_eq!(eval_circuit(&c, &input).unwrap(), want);
            assert_eq!(eval_circuit(&again, &input).unwrap(), want);
        }
    }
}

#[test]
fn netlist_errors() {
    let cyc = parse_netlist("inputs 1\ng1 = AND i0 g2\ng2 = NOT g1\noutputs g2\n").unwrap_err();
    assert!(cyc.to_string().contains("cycle"), "{}", cyc);
    let unknown = parse_netlist("inputs 1\ng1 = NOT g9\noutputs g1\n").unwrap_err();
    assert!(unknown.to_string().contains("g9"));
    assert!(parse_netlist("inputs 1\ng1 = AND i0\noutputs g1\n").is_err());
    assert!(parse_netlist("inputs 1\ng1 = NOT i0\n").is_err());
    assert!(parse_netlist("inputs 1\ng1 = NOT i0\ng1 = NOT i0\noutputs g1\n").is_err());
    let explicit = parse_netlist("inputs 2\na = INPUT 1\ng = NOT a\noutputs g\n").unwrap();
    assert_eq!(eval_circuit(&explicit, &bits("01")).unwrap(), bits("0"));
    assert!(BooleanCircuit::new(1, vec![Gate::Input(0), Gate::And(0, 2), Gate::Not(0)], vec![1]).is_err());
}

/// Hand-written records for `x1 + x1` at width 2 (null pointer `11`).
fn x1_plus_x1_table(second_parent: &str) -> Vec<Vec<bool>> {
    let rows = [
        format!("{}{}{}{}", "00000001", "11", "01", "10"),
        format!("{}{}{}{}", "10000001", "00", "11", "11"),
        format!("{}{}{}{}", "10000001", second_parent, "11", "11"),
        format!("{}{}{}{}", "00000000", "11", "11", "11"),
    ];
    rows.iter().map(|r| bits(r)).collect()
}

#[test]
fn decodes_hand_built_sum() {
    let c = minterm_circuit(2, record_width(2), &x1_plus_x1_table("00"));
    let d = decode_etr(&c, 2).unwrap();
    assert_eq!(d.tree.len(), 3);
    assert_eq!(d.tree.nodes[&0].label, Label::Op(Op::Add));
    assert_eq!(d.queries, 4);
    assert_eq!(print_sexpr(&d.tree.to_expr().unwrap()), "(+ x1 x1)");
}

#[test]
fn inconsistent_pointers_are_rejected() {
    let c = minterm_circuit(2, record_width(2), &x1_plus_x1_table("01"));
    let e = decode_etr(&c, 2).unwrap_err();
    assert!(matches!(e, EtrError::Inconsistent { .. }), "{}", e);
}

#[test]
fn decode_reports_malformed_records() {
    let mut t = x1_plus_x1_table("00");
    t[3] = bits("00100000111111");
    let e = decode_etr(&minterm_circuit(2, record_width(2), &t), 2).unwrap_err();
    assert!(matches!(e, EtrError::MalformedLabel { address: 3, byte: 0x20 }), "{}", e);

    let mut t = x1_plus_x1_table("00");
    t[0] = bits("10000000110110");
    let e = decode_etr(&minterm_circuit(2, record_width(2), &t), 2).unwrap_err();
    assert!(matches!(e, EtrError::Arity { .. }), "{}", e);

    let mut t = x1_plus_x1_table("00");
    t[2] = bits("00000000111111");
    let e = decode_etr(&minterm_circuit(2, record_width(2), &t), 2).unwrap_err();
    assert!(matches!(e, EtrError::Dangling { from: 0, to: 2 }), "{}", e);

    let c = minterm_circuit(2, record_width(2), &x1_plus_x1_table("00"));
    assert!(matches!(decode_etr(&c, 3), Err(EtrError::Shape(_))));
}

#[test]
fn decode_queries_every_address() {
    for w in 1..=6usize {
        // A chain of negations filling every non-null address.
        let mut e = Expr::Var(0);
        for _ in 0..(1usize << w) - 2 {
            e = Expr::app(Op::Neg, vec![e]);
        }
        let t = EtrTree::from_expr(&e);
        assert_eq!(t.len(), (1 << w) - 1);
        assert_eq!(min_width(&t), w);
        let d = decode_etr(&encode_etr(&t, w).unwrap(), w).unwrap();
        assert_eq!(d.queries, 1 << w);
        assert_eq!(d.tree, t);
    }
}

#[test]
fn shipped_trees_round_trip() {
    assert!(etr_corpus().len() >= 5);
    for (name, text) in etr_corpus() {
        let e = parse_sexpr(text).unwrap_or_else(|err| panic!("{}: {}", name, err));
        assert_eq!(parse_sexpr(&print_sexpr(&e)).unwrap(), e);
        let t = EtrTree::from_expr(&e);
        let w = min_width(&t);
        for width in [w, w + 1] {
            let d = decode_etr(&encode_etr(&t, width).unwrap(), width).unwrap();
            assert_eq!(d.tree, t, "{}", name);
            assert_eq!(d.tree.to_expr().unwrap(), e);
            assert_eq!(d.queries, 1 << width);
        }
        assert!(encode_etr(&t, w - 1).is_err() || w == 1);
    }
}

fn shipped(name: &str) -> EtrTree {
    let text = etr_corpus().iter().find(|(n, _)| *n == name).unwrap().1;
    EtrTree::from_expr(&parse_sexpr(text).unwrap())
}

#[test]
fn square_equals_one_has_a_witness() {
    match etr_feasible_small(&shipped("square_one"), 1).unwrap() {
        SolveOutcome::Witness(x) => assert_eq!(&x[0] * &x[0], int(1)),
        other => panic!("{:?}", other),
    }
}

#[test]
fn square_equals_minus_one_is_pruned() {
    assert_eq!(etr_feasible_small(&shipped("square_minus_one"), 4).unwrap(), SolveOutcome::Infeasible);
}

/// Every point `(p/q, r/s)` with denominators up to `d` in the box.
fn grid_points(d: i64, mag: i64) -> Vec<Rational> {
    let mut pts = Vec::new();
    for q in 1..=d {
        for p in -mag * q..=mag * q {
            let r = rat(p, q);
            if !pts.contains(&r) {
                pts.push(r);
            }
        }
    }
    pts
}

#[test]
fn sum_product_witness_agrees_with_grid_oracle() {
    let pts = grid_points(2, 4);
    let mut sols = Vec::new();
    for x in &pts {
        for y in &pts {
            if x + y == int(1) && int(4) * x * y == int(1) {
                sols.push((x.clone(), y.clone()));
            }
        }
    }
    assert_eq!(sols, vec![(rat(1, 2), rat(1, 2))]);
    assert_eq!(
        etr_feasible_small(&shipped("sum_product"), 2).unwrap(),
        SolveOutcome::Witness(vec![rat(1, 2), rat(1, 2)])
    );
    assert!(!matches!(etr_feasible_small(&shipped("sum_product"), 1).unwrap(), SolveOutcome::Witness(_)));
}

#[test]
fn term_roots_are_rejected() {
    let t = EtrTree::from_expr(&parse_sexpr("(+ x1 x1)").unwrap());
    assert!(matches!(etr_feasible_small(&t, 2), Err(EtrError::Sort(_))));
    assert!(matches!(parse_sexpr("(and x0 x1)").unwrap().sort(), Err(EtrError::Sort(_))));
}

#[test]
fn sexpr_errors() {
    assert!(parse_sexpr("(+ x0)").is_err());
    assert!(parse_sexpr("(= x0 64)").is_err());
    assert!(parse_sexpr("(= x0 x128)").is_err());
    assert!(parse_sexpr("(= x0 1) x1").is_err());
    assert!(parse_sexpr("(^ x0 1)").is_err());
}

#[test]
fn translated_systems_agree_with_the_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut kinds = HashMap::new();
    for _ in 0..25 {
        let vars = rng.gen_range(1..=2);
        let cs = random_free_system(&mut rng, vars);
        let direct = solve_constraints_small(&cs, 2).unwrap();
        let e = system_to_etr(&cs).unwrap();
        let t = EtrTree::from_expr(&e);
        let w = min_width(&t);
        let decoded = decode_etr(&encode_etr(&t, w).unwrap(), w).unwrap().tree;
        let via_etr = etr_feasible_small(&decoded, 2).unwrap();
        assert_eq!(std::mem::discriminant(&direct), std::mem::discriminant(&via_etr), "{}", e);
        if let SolveOutcome::Witness(x) = &via_etr {
            assert!(cs.satisfied_by(x));
        }
        *kinds.entry(format!("{:?}", std::mem::discriminant(&direct))).or_insert(0) += 1;
    }
    assert!(kinds.len() >= 2, "instances should not all have the same outcome: {:?}", kinds);
}

fn arb_term() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0u8..64).prop_map(Expr::Const), (0u8..4).prop_map(Expr::Var)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(Op::Add, vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(Op::Mul, vec![a, b])),
            inner.prop_map(|a| Expr::app(Op::Neg, vec![a])),
        ]
    })
}

fn arb_formula() -> impl Strategy<Value = Expr> {
    let atom = (arb_term(), arb_term(), 0..3usize)
        .prop_map(|(a, b, k)| Expr::app([Op::Eq, Op::Le, Op::Lt][k], vec![a, b]));
    atom.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(Op::And, vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(Op::Or, vec![a, b])),
            inner.prop_map(|a| Expr::app(Op::Not, vec![a])),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encode_decode_is_identity(e in arb_formula()) {
        let t = EtrTree::from_expr(&e);
        let w = min_width(&t);
        let d = decode_etr(&encode_etr(&t, w).unwrap(), w).unwrap();
        prop_assert_eq!(d.queries, 1usize << w);
        prop_assert_eq!(d.tree.to_expr().unwrap(), e.clone());
        prop_assert_eq!(parse_sexpr(&print_sexpr(&e)).unwrap(), e);
    }

    #[test]
    fn etr_search_matches_direct_search(e in arb_formula()) {
        prop_assume!(e.variables() <= 2);
        let t = EtrTree::from_expr(&e);
        let cs = etr_to_constraints(&e, ETR_MAGNITUDE).unwrap();
        prop_assert_eq!(etr_feasible_small(&t, 2).unwrap(), solve_constraints_small(&cs, 2).unwrap());
    }
}
