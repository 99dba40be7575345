//! Boolean circuits and succinct encodings of ETR trees.
//!
//! Netlist files name one gate per line:
//!
//! ```text
//! inputs 2
//! g2 = AND i0 i1
//! g3 = NOT g2
//! outputs g2 g3
//! ```
//!
//! `inputs N` defines the gates `i0 .. i{N-1}`; `g = INPUT k` names an input
//! explicitly. Gates may appear in any order as long as the wiring is acyclic.

mod etr;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use etr::{
    decode_etr, encode_etr, etr_corpus, etr_feasible_small, etr_feasible_with, etr_to_constraints, min_width,
    parse_sexpr, print_sexpr, record_width, system_to_etr, DecodedTree, EtrError, EtrNode, EtrTree, Expr, Label, Op,
    ETR_MAGNITUDE, LABEL_BITS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Input(usize),
    And(usize, usize),
    Or(usize, usize),
    Not(usize),
}

/// Gates in topological order: every operand index is smaller than the
/// gate's own index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanCircuit {
    gates: Vec<Gate>,
    inputs: usize,
    outputs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("line {line}: {message}")]
    Netlist { line: usize, message: String },
    #[error("gate {gate}: {message}")]
    Structure { gate: usize, message: String },
    #[error("expected {expected} input bits, got {got}")]
    InputLength { expected: usize, got: usize },
}

impl BooleanCircuit {
    pub fn new(inputs: usize, gates: Vec<Gate>, outputs: Vec<usize>) -> Result<Self, CircuitError> {
        for (i, g) in gates.iter().enumerate() {
            let bad = |message: String| Err(CircuitError::Structure { gate: i, message });
            let operands: &[usize] = match g {
                Gate::Input(k) => {
                    if *k >= inputs {
                        return bad(format!("input {} out of range (the circuit has {})", k, inputs));
                    }
                    &[]
                }
                Gate::And(a, b) | Gate::Or(a, b) => &[*a, *b],
                Gate::Not(a) => &[*a],
            };
            if let Some(&o) = operands.iter().find(|&&o| o >= i) {
                return bad(format!("operand {} is not an earlier gate", o));
            }
        }
        if let Some(&o) = outputs.iter().find(|&&o| o >= gates.len()) {
            return Err(CircuitError::Structure { gate: o, message: "output refers to a missing gate".into() });
        }
        Ok(BooleanCircuit { gates, inputs, outputs })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }
}

/// Gate-by-gate evaluation.
pub fn eval_circuit(c: &BooleanCircuit, input: &[bool]) -> Result<Vec<bool>, CircuitError> {
    if input.len() != c.inputs {
        return Err(CircuitError::InputLength { expected: c.inputs, got: input.len() });
    }
    let mut v = Vec::with_capacity(c.gates.len());
    for g in &c.gates {
        let b = match *g {
            Gate::Input(k) => input[k],
            Gate::And(a, b) => v[a] && v[b],
            Gate::Or(a, b) => v[a] || v[b],
            Gate::Not(a) => !v[a],
        };
        v.push(b);
    }
    Ok(c.outputs.iter().map(|&o| v[o]).collect())
}

/// Parses `0`/`1` strings such as `0110`.
pub fn parse_bits(s: &str) -> Result<Vec<bool>, String> {
    s.trim()
        .chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("`{}` is not a bit", other)),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

enum Draft {
    Input(usize),
    Op(&'static str, Vec<String>),
}

pub fn parse_netlist(text: &str) -> Result<BooleanCircuit, CircuitError> {
    let mut inputs = None;
    let mut defs: Vec<(String, Draft, usize)> = Vec::new();
    let mut outputs: Option<(Vec<String>, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| CircuitError::Netlist { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["inputs", n] => {
                if inputs.is_some() {
                    return Err(err("`inputs` given twice".into()));
                }
                inputs = Some(n.parse::<usize>().map_err(|_| err(format!("bad input count `{}`", n)))?);
            }
            ["outputs", rest @ ..] => {
                if outputs.is_some() {
                    return Err(err("`outputs` given twice".into()));
                }
                outputs = Some((rest.iter().map(|s| s.to_string()).collect(), line_no));
            }
            [name, "=", op, args @ ..] => {
                let draft = match (op.to_ascii_uppercase().as_str(), args) {
                    ("INPUT", [k]) => Draft::Input(k.parse().map_err(|_| err(format!("bad input index `{}`", k)))?),
                    ("AND", [_, _]) => Draft::Op("AND", args.iter().map(|s| s.to_string()).collect()),
                    ("OR", [_, _]) => Draft::Op("OR", args.iter().map(|s| s.to_string()).collect()),
                    ("NOT", [_]) => Draft::Op("NOT", args.iter().map(|s| s.to_string()).collect()),
                    (op, _) => return Err(err(format!("`{}` with {} operands is not a gate", op, args.len()))),
                };
                defs.push((name.to_string(), draft, line_no));
            }
            _ => return Err(err(format!("cannot read `{}`", line))),
        }
    }
    let inputs = inputs.ok_or(CircuitError::Netlist { line: 0, message: "missing `inputs N`".into() })?;
    for k in 0..inputs {
        defs.insert(k, (format!("i{}", k), Draft::Input(k), 0));
    }
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (j, (name, _, line)) in defs.iter().enumerate() {
        if by_name.insert(name.as_str(), j).is_some() {
            return Err(CircuitError::Netlist { line: *line, message: format!("gate `{}` defined twice", name) });
        }
    }
    let lookup = |name: &str, line: usize| {
        by_name
            .get(name)
            .copied()
            .ok_or_else(|| CircuitError::Netlist { line, message: format!("unknown gate `{}`", name) })
    };
    let mut operands: Vec<Vec<usize>> = Vec::with_capacity(defs.len());
    for (_, d, line) in &defs {
        operands.push(match d {
            Draft::Input(_) => Vec::new(),
            Draft::Op(_, args) => args.iter().map(|a| lookup(a, *line)).collect::<Result<_, _>>()?,
        });
    }
    // Depth-first topological order with cycle detection.
    let mut order = Vec::with_capacity(defs.len());
    let mut state = vec![0u8; defs.len()];
    for root in 0..defs.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = operands[node].get(*next) {
                *next += 1;
                match state[child] {
                    0 => {
                        state[child] = 1;
                        stack.push((child, 0));
                    }
                    1 => {
                        return Err(CircuitError::Netlist {
                            line: defs[node].2,
                            message: format!("gate `{}` is part of a cycle", defs[node].0),
                        })
                    }
                    _ => {}
                }
            } else {
                state[node] = 2;
                order.push(node);
                stack.pop();
            }
        }
    }
    let mut position = vec![0; defs.len()];
    for (p, &j) in order.iter().enumerate() {
        position[j] = p;
    }
    let gates = order
        .iter()
        .map(|&j| match &defs[j].1 {
            Draft::Input(k) => Gate::Input(*k),
            Draft::Op(op, _) => {
                let o = &operands[j];
                match *op {
                    "AND" => Gate::And(position[o[0]], position[o[1]]),
                    "OR" => Gate::Or(position[o[0]], position[o[1]]),
                    _ => Gate::Not(position[o[0]]),
                }
            }
        })
        .collect();
    let (names, line) = outputs.ok_or(CircuitError::Netlist { line: 0, message: "missing `outputs ...`".into() })?;
    let outputs = names.iter().map(|n| lookup(n, line).map(|j| position[j])).collect::<Result<_, _>>()?;
    BooleanCircuit::new(inputs, gates, outputs)
}

pub fn write_netlist(c: &BooleanCircuit) -> String {
    let name = |j: usize| match c.gates[j] {
        Gate::Input(k) if j == k => format!("i{}", k),
        _ => format!("g{}", j),
    };
    let mut s = format!("inputs {}\n", c.inputs);
    for (j, g) in c.gates.iter().enumerate() {
        match *g {
            Gate::Input(k) if j == k => {}
            Gate::Input(k) => writeln!(s, "g{} = INPUT {}", j, k).unwrap(),
            Gate::And(a, b) => writeln!(s, "g{} = AND {} {}", j, name(a), name(b)).unwrap(),
            Gate::Or(a, b) => writeln!(s, "g{} = OR {} {}", j, name(a), name(b)).unwrap(),
            Gate::Not(a) => writeln!(s, "g{} = NOT {}", j, name(a)).unwrap(),
        }
    }
    let outs: Vec<String> = c.outputs.iter().map(|&o| name(o)).collect();
    writeln!(s, "outputs {}", outs.join(" ")).unwrap();
    s
}

/// A circuit computing the given truth table (row `a` is the output for
/// the address `a`, most significant input first), as a sum of minterms.
pub fn minterm_circuit(width: usize, outputs: usize, table: &[Vec<bool>]) -> BooleanCircuit {
    assert_eq!(table.len(), 1 << width, "one row per address");
    assert!(width > 0, "at least one input");
    let mut gates: Vec<Gate> = (0..width).map(Gate::Input).collect();
    let negated: Vec<usize> = (0..width)
        .map(|k| {
            gates.push(Gate::Not(k));
            gates.len() - 1
        })
        .collect();
    let zero = {
        gates.push(Gate::And(0, negated[0]));
        gates.len() - 1
    };
    let mut minterm = vec![None; table.len()];
    for (a, row) in table.iter().enumerate() {
        if !row.iter().any(|&b| b) {
            continue;
        }
        let lit = |k: usize| if a >> (width - 1 - k) & 1 == 1 { k } else { negated[k] };
        let mut acc = lit(0);
        for k in 1..width {
            gates.push(Gate::And(acc, lit(k)));
            acc = gates.len() - 1;
        }
        minterm[a] = Some(acc);
    }
    let mut outs = Vec::with_capacity(outputs);
    for bit in 0..outputs {
        let mut acc: Option<usize> = None;
        for (a, row) in table.iter().enumerate() {
            if !row[bit] {
                continue;
            }
            let m = minterm[a].expect("rows with a one bit have a minterm");
            acc = Some(match acc {
                None => m,
                Some(x) => {
                    gates.push(Gate::Or(x, m));
                    gates.len() - 1
                }
            });
        }
        outs.push(acc.unwrap_or(zero));
    }
    BooleanCircuit::new(width, gates, outs).expect("minterm circuits are well formed")
}

/// A random constraint system over unrestricted reals with small integer
/// coefficients, degree at most two and every unknown in use.
pub fn random_free_system<R: rand::Rng + ?Sized>(rng: &mut R, unknowns: usize) -> crate::sat::ConstraintSystem {
    use crate::num::int;
    use crate::sat::{Atom, BoolExpr, ConstraintSystem, Domain, Poly, Rel};
    assert!(unknowns > 0);
    let mut atoms = Vec::new();
    let count = rng.gen_range(1..=3);
    for _ in 0..count {
        let mut p = Poly::constant(int(rng.gen_range(-3..=3)));
        for _ in 0..rng.gen_range(1..=3) {
            let mut m = Poly::constant(int(rng.gen_range(1..=4) * if rng.gen_bool(0.5) { 1 } else { -1 }));
            for _ in 0..rng.gen_range(1..=2) {
                m = m.mul(&Poly::var(rng.gen_range(0..unknowns)));
            }
            p = p.add(&m);
        }
        let rel = [Rel::Ge, Rel::Gt, Rel::Eq][rng.gen_range(0..3)];
        atoms.push(Atom { poly: p, rel });
    }
    for v in 0..unknowns {
        if !atoms.iter().any(|a| a.poly.terms().any(|(m, _)| m.contains(&v))) {
            let bound = Poly::constant(int(rng.gen_range(1..=4))).sub(&Poly::var(v).mul(&Poly::var(v)));
            atoms.push(Atom { poly: bound, rel: Rel::Ge });
        }
    }
    let mut root = BoolExpr::Atom(0);
    for i in 1..atoms.len() {
        let next = if rng.gen_bool(0.2) { BoolExpr::Not(Box::new(BoolExpr::Atom(i))) } else { BoolExpr::Atom(i) };
        root = if rng.gen_bool(0.7) {
            BoolExpr::And(Box::new(root), Box::new(next))
        } else {
            BoolExpr::Or(Box::new(root), Box::new(next))
        };
    }
    ConstraintSystem::new(unknowns, Domain::Free { magnitude: ETR_MAGNITUDE }, atoms, root)
}
