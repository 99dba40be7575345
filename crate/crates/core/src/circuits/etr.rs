//! ETR trees and their circuit encoding.
//!
//! A node record is `label(8) | parent(w) | child0(w) | child1(w)`, most
//! significant bit first, where `w` is the address width. The all-ones
//! address is the null pointer, so a width-`w` encoding holds at most
//! `2^w - 1` nodes. The root lives at address 0 and addresses are assigned
//! breadth first. Label bytes:
//!
//! | byte          | meaning                |
//! |---------------|------------------------|
//! | `0x00`        | no node at the address |
//! | `0x01..=0x09` | operation (see [`Op`]) |
//! | `0x40 + k`    | integer constant `k`   |
//! | `0x80 + k`    | variable `x<k>`        |

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use super::{eval_circuit, minterm_circuit, BooleanCircuit};
use crate::num::Rational;
use crate::sat::{
    solve_with_limits, Atom, BoolExpr, ConstraintSystem, Domain, Poly, Rel, SatError, SolveLimits, SolveOutcome,
};

pub const LABEL_BITS: usize = 8;

/// Default search box `|x_i| ≤ 4` for [`etr_feasible_small`].
pub const ETR_MAGNITUDE: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Op {
    Add = 1,
    Mul = 2,
    Neg = 3,
    Eq = 4,
    Le = 5,
    Lt = 6,
    And = 7,
    Or = 8,
    Not = 9,
}

impl Op {
    pub const ALL: [Op; 9] = [Op::Add, Op::Mul, Op::Neg, Op::Eq, Op::Le, Op::Lt, Op::And, Op::Or, Op::Not];

    pub fn arity(self) -> usize {
        match self {
            Op::Neg | Op::Not => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Mul => "*",
            Op::Neg => "-",
            Op::Eq => "=",
            Op::Le => "<=",
            Op::Lt => "<",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
        }
    }

    fn from_symbol(s: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|o| o.symbol() == s)
    }

    /// Whether the operation yields a truth value.
    pub fn is_boolean(self) -> bool {
        !matches!(self, Op::Add | Op::Mul | Op::Neg)
    }

    /// Whether the operands are truth values.
    fn takes_boolean(self) -> bool {
        matches!(self, Op::And | Op::Or | Op::Not)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Label {
    Op(Op),
    Const(u8),
    Var(u8),
}

impl Label {
    pub fn to_byte(self) -> u8 {
        match self {
            Label::Op(o) => o as u8,
            Label::Const(k) => 0x40 + k,
            Label::Var(k) => 0x80 + k,
        }
    }

    /// `Ok(None)` for the empty label.
    pub fn from_byte(b: u8) -> Result<Option<Label>, u8> {
        match b {
            0 => Ok(None),
            1..=9 => Ok(Some(Label::Op(Op::ALL[b as usize - 1]))),
            0x40..=0x7f => Ok(Some(Label::Const(b - 0x40))),
            0x80..=0xff => Ok(Some(Label::Var(b - 0x80))),
            _ => Err(b),
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Label::Op(o) => o.arity(),
            _ => 0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Op(o) => f.write_str(o.symbol()),
            Label::Const(k) => write!(f, "{}", k),
            Label::Var(k) => write!(f, "x{}", k),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EtrError {
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("address {address}: malformed label byte {byte:#04x}")]
    MalformedLabel { address: u64, byte: u8 },
    #[error("address {address}: {message}")]
    Malformed { address: u64, message: String },
    #[error("address {address}: `{label}` expects {expected} children, found {found}")]
    Arity { address: u64, label: Label, expected: usize, found: usize },
    #[error("address {from}: pointer to {to}, where no node exists")]
    Dangling { from: u64, to: u64 },
    #[error("address {address}: parent and child pointers disagree ({message})")]
    Inconsistent { address: u64, message: String },
    #[error("node at address {0} is not reachable from the root")]
    Unreachable(u64),
    #[error("circuit shape: {0}")]
    Shape(String),
    #[error("tree has {nodes} nodes, which needs address width {needed} (got {width})")]
    TooWide { nodes: usize, needed: usize, width: usize },
    #[error("sort error: {0}")]
    Sort(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Solver(#[from] SatError),
}

/// Expression form of an ETR tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(u8),
    Var(u8),
    App(Op, Vec<Expr>),
}

impl Expr {
    pub fn label(&self) -> Label {
        match self {
            Expr::Const(k) => Label::Const(*k),
            Expr::Var(k) => Label::Var(*k),
            Expr::App(o, _) => Label::Op(*o),
        }
    }

    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::App(_, c) => c,
            _ => &[],
        }
    }

    pub fn app(op: Op, args: Vec<Expr>) -> Expr {
        assert_eq!(args.len(), op.arity(), "arity of {}", op.symbol());
        Expr::App(op, args)
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Expr::size).sum::<usize>()
    }

    /// One more than the largest variable index.
    pub fn variables(&self) -> usize {
        match self {
            Expr::Var(k) => *k as usize + 1,
            _ => self.children().iter().map(Expr::variables).max().unwrap_or(0),
        }
    }

    /// `Ok(true)` for formulas, `Ok(false)` for numeric terms.
    pub fn sort(&self) -> Result<bool, EtrError> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Ok(false),
            Expr::App(o, args) => {
                for a in args {
                    if a.sort()? != o.takes_boolean() {
                        let want = if o.takes_boolean() { "a formula" } else { "a term" };
                        return Err(EtrError::Sort(format!("`{}` needs {} operand in {}", o.symbol(), want, print_sexpr(self))));
                    }
                }
                Ok(o.is_boolean())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::App(o, args) => {
                write!(f, "({}", o.symbol())?;
                for a in args {
                    write!(f, " {}", a)?;
                }
                f.write_str(")")
            }
            leaf => write!(f, "{}", leaf.label()),
        }
    }
}

pub fn print_sexpr(e: &Expr) -> String {
    e.to_string()
}

/// Reads `(+ a b)`, `(* a b)`, `(- a)`, `(= a b)`, `(<= a b)`, `(< a b)`,
/// `(and a b)`, `(or a b)`, `(not a)`, integers `0..=63` and variables
/// `x0..=x127`. `;` starts a comment.
pub fn parse_sexpr(text: &str) -> Result<Expr, EtrError> {
    let mut toks = Vec::new();
    for (ln_start, line) in line_offsets(text) {
        let line = line.split(';').next().unwrap_or("");
        let mut i = 0;
        let b = line.as_bytes();
        while i < b.len() {
            match b[i] {
                c if c.is_ascii_whitespace() => i += 1,
                b'(' | b')' => {
                    toks.push((ln_start + i, &line[i..i + 1]));
                    i += 1;
                }
                _ => {
                    let s = i;
                    while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'(' && b[i] != b')' {
                        i += 1;
                    }
                    toks.push((ln_start + s, &line[s..i]));
                }
            }
        }
    }
    let mut pos = 0;
    let e = read_expr(&toks, &mut pos, text.len())?;
    if let Some(&(p, t)) = toks.get(pos) {
        return Err(EtrError::Parse { pos: p, message: format!("unexpected `{}` after the expression", t) });
    }
    Ok(e)
}

fn line_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut off = 0;
    text.split('\n').map(move |l| {
        let s = off;
        off += l.len() + 1;
        (s, l)
    })
}

fn read_expr(toks: &[(usize, &str)], pos: &mut usize, end: usize) -> Result<Expr, EtrError> {
    let &(p, t) = toks.get(*pos).ok_or(EtrError::Parse { pos: end, message: "unexpected end of input".into() })?;
    *pos += 1;
    let err = |message: String| Err(EtrError::Parse { pos: p, message });
    match t {
        "(" => {
            let &(q, head) = toks.get(*pos).ok_or(EtrError::Parse { pos: end, message: "unexpected end of input".into() })?;
            *pos += 1;
            let op = Op::from_symbol(head)
                .ok_or_else(|| EtrError::Parse { pos: q, message: format!("unknown operation `{}`", head) })?;
            let mut args = Vec::new();
            loop {
                match toks.get(*pos) {
                    Some(&(_, ")")) => {
                        *pos += 1;
                        break;
                    }
                    Some(_) => args.push(read_expr(toks, pos, end)?),
                    None => return Err(EtrError::Parse { pos: end, message: "missing `)`".into() }),
                }
            }
            if args.len() != op.arity() {
                return err(format!("`{}` takes {} operands, got {}", head, op.arity(), args.len()));
            }
            Ok(Expr::App(op, args))
        }
        ")" => err("unexpected `)`".into()),
        _ => {
            if let Some(k) = t.strip_prefix('x') {
                match k.parse::<u8>() {
                    Ok(v) if v < 128 && v.to_string() == k => Ok(Expr::Var(v)),
                    _ => err(format!("variable `{}` is not x0..x127", t)),
                }
            } else {
                match t.parse::<u8>() {
                    Ok(k) if k < 64 => Ok(Expr::Const(k)),
                    _ => err(format!("`{}` is not a constant in 0..63 or a variable", t)),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct EtrNode {
    pub label: Label,
    pub parent: Option<u64>,
    pub children: Vec<u64>,
}

/// Nodes keyed by address; the root sits at address 0.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct EtrTree {
    pub nodes: BTreeMap<u64, EtrNode>,
}

impl EtrTree {
    /// Breadth-first addressing.
    pub fn from_expr(e: &Expr) -> EtrTree {
        let mut nodes = BTreeMap::new();
        let mut queue: VecDeque<(&Expr, Option<u64>)> = VecDeque::from([(e, None)]);
        let mut next = 0u64;
        let mut pending: Vec<(u64, u64)> = Vec::new();
        while let Some((x, parent)) = queue.pop_front() {
            let addr = next;
            next += 1;
            if let Some(p) = parent {
                pending.push((p, addr));
            }
            nodes.insert(addr, EtrNode { label: x.label(), parent, children: Vec::new() });
            for c in x.children() {
                queue.push_back((c, Some(addr)));
            }
        }
        for (p, c) in pending {
            nodes.get_mut(&p).expect("parent inserted first").children.push(c);
        }
        EtrTree { nodes }
    }

    pub fn to_expr(&self) -> Result<Expr, EtrError> {
        fn go(t: &EtrTree, a: u64) -> Result<Expr, EtrError> {
            let n = t.nodes.get(&a).ok_or(EtrError::Dangling { from: a, to: a })?;
            Ok(match n.label {
                Label::Const(k) => Expr::Const(k),
                Label::Var(k) => Expr::Var(k),
                Label::Op(o) => Expr::App(o, n.children.iter().map(|&c| go(t, c)).collect::<Result<_, _>>()?),
            })
        }
        go(self, 0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_address(&self) -> u64 {
        self.nodes.keys().next_back().copied().unwrap_or(0)
    }
}

/// Output bits per node record at address width `w`.
pub fn record_width(w: usize) -> usize {
    LABEL_BITS + 3 * w
}

/// Smallest width whose non-null addresses cover the tree.
pub fn min_width(t: &EtrTree) -> usize {
    let top = t.max_address();
    (1..64).find(|&w| top < (1u64 << w) - 1).expect("addresses fit in 63 bits")
}

fn push_bits(out: &mut Vec<bool>, value: u64, bits: usize) {
    out.extend((0..bits).rev().map(|i| value >> i & 1 == 1));
}

fn read_bits(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| acc << 1 | u64::from(b))
}

fn record(t: &EtrTree, addr: u64, w: usize) -> Vec<bool> {
    let null = (1u64 << w) - 1;
    let mut out = Vec::with_capacity(record_width(w));
    match t.nodes.get(&addr) {
        None => {
            push_bits(&mut out, 0, LABEL_BITS);
            for _ in 0..3 {
                push_bits(&mut out, null, w);
            }
        }
        Some(n) => {
            push_bits(&mut out, n.label.to_byte() as u64, LABEL_BITS);
            push_bits(&mut out, n.parent.unwrap_or(null), w);
            for i in 0..2 {
                push_bits(&mut out, n.children.get(i).copied().unwrap_or(null), w);
            }
        }
    }
    out
}

/// A circuit with `w` inputs and [`record_width`]`(w)` outputs answering
/// every address with its node record.
pub fn encode_etr(t: &EtrTree, w: usize) -> Result<BooleanCircuit, EtrError> {
    let needed = min_width(t);
    if w < needed {
        return Err(EtrError::TooWide { nodes: t.len(), needed, width: w });
    }
    if w > 20 {
        return Err(EtrError::Unsupported(format!("address width {} is too large to tabulate", w)));
    }
    let table: Vec<Vec<bool>> = (0..1u64 << w).map(|a| record(t, a, w)).collect();
    Ok(minterm_circuit(w, record_width(w), &table))
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct DecodedTree {
    pub tree: EtrTree,
    pub width: usize,
    /// Circuit evaluations issued while decoding.
    pub queries: usize,
}

/// Queries every address of a width-`w` circuit and rebuilds the tree,
/// checking labels, arities and pointer consistency.
pub fn decode_etr(c: &BooleanCircuit, w: usize) -> Result<DecodedTree, EtrError> {
    if w == 0 || w > 24 {
        return Err(EtrError::Shape(format!("address width {} is outside 1..=24", w)));
    }
    if c.inputs() != w {
        return Err(EtrError::Shape(format!("circuit has {} inputs, width is {}", c.inputs(), w)));
    }
    if c.outputs().len() != record_width(w) {
        return Err(EtrError::Shape(format!(
            "circuit has {} outputs, a width-{} record has {}",
            c.outputs().len(),
            w,
            record_width(w)
        )));
    }
    let null = (1u64 << w) - 1;
    let queries = AtomicUsize::new(0);
    let records: Vec<(u64, Option<EtrNode>)> = (0..1u64 << w)
        .into_par_iter()
        .map(|addr| {
            let mut input = Vec::with_capacity(w);
            push_bits(&mut input, addr, w);
            let out = eval_circuit(c, &input).expect("input length checked");
            queries.fetch_add(1, Ordering::Relaxed);
            let byte = read_bits(&out[..LABEL_BITS]) as u8;
            let field = |k: usize| {
                let v = read_bits(&out[LABEL_BITS + k * w..LABEL_BITS + (k + 1) * w]);
                (v != null).then_some(v)
            };
            let (parent, c0, c1) = (field(0), field(1), field(2));
            let label = Label::from_byte(byte).map_err(|byte| EtrError::MalformedLabel { address: addr, byte })?;
            let Some(label) = label else {
                if parent.is_some() || c0.is_some() || c1.is_some() {
                    return Err(EtrError::Malformed {
                        address: addr,
                        message: "empty label with non-null pointers".into(),
                    });
                }
                return Ok((addr, None));
            };
            if addr == null {
                return Err(EtrError::Malformed { address: addr, message: "the null address holds a node".into() });
            }
            if c0.is_none() && c1.is_some() {
                return Err(EtrError::Malformed { address: addr, message: "second child without a first".into() });
            }
            let children: Vec<u64> = [c0, c1].into_iter().flatten().collect();
            if children.len() != label.arity() {
                return Err(EtrError::Arity { address: addr, label, expected: label.arity(), found: children.len() });
            }
            Ok((addr, Some(EtrNode { label, parent, children })))
        })
        .collect::<Result<_, _>>()?;
    let nodes: BTreeMap<u64, EtrNode> = records.into_iter().filter_map(|(a, n)| n.map(|n| (a, n))).collect();

    let root = nodes.get(&0).ok_or(EtrError::Malformed { address: 0, message: "no root node".into() })?;
    if root.parent.is_some() {
        return Err(EtrError::Inconsistent { address: 0, message: "the root has a parent".into() });
    }
    for (&a, n) in &nodes {
        for &ch in &n.children {
            let child = nodes.get(&ch).ok_or(EtrError::Dangling { from: a, to: ch })?;
            if child.parent != Some(a) {
                return Err(EtrError::Inconsistent {
                    address: a,
                    message: format!("child {} names parent {}", ch, fmt_ptr(child.parent)),
                });
            }
        }
        if n.children.len() == 2 && n.children[0] == n.children[1] {
            return Err(EtrError::Inconsistent { address: a, message: "both children are the same node".into() });
        }
        match n.parent {
            None if a != 0 => {
                return Err(EtrError::Inconsistent { address: a, message: "a second node without a parent".into() })
            }
            None => {}
            Some(p) => {
                let parent = nodes.get(&p).ok_or(EtrError::Dangling { from: a, to: p })?;
                if !parent.children.contains(&a) {
                    return Err(EtrError::Inconsistent {
                        address: a,
                        message: format!("parent {} does not list it as a child", p),
                    });
                }
            }
        }
    }
    let mut seen = 0usize;
    let mut stack = vec![0u64];
    while let Some(a) = stack.pop() {
        seen += 1;
        stack.extend(&nodes[&a].children);
        if seen > nodes.len() {
            break;
        }
    }
    if seen != nodes.len() {
        // With consistent pointers every unreached node sits on a parent cycle.
        let mut reached = std::collections::BTreeSet::new();
        let mut stack = vec![0u64];
        while let Some(a) = stack.pop() {
            if reached.insert(a) {
                stack.extend(&nodes[&a].children);
            }
        }
        let lost = nodes.keys().find(|a| !reached.contains(a)).copied().unwrap_or(0);
        return Err(EtrError::Unreachable(lost));
    }
    Ok(DecodedTree { tree: EtrTree { nodes }, width: w, queries: queries.into_inner() })
}

fn fmt_ptr(p: Option<u64>) -> String {
    p.map_or_else(|| "null".to_string(), |p| p.to_string())
}

// ---------------------------------------------------------------------------
// Constraint systems

fn term_poly(e: &Expr) -> Poly {
    match e {
        Expr::Const(k) => Poly::constant(Rational::from_integer(BigInt::from(*k))),
        Expr::Var(k) => Poly::var(*k as usize),
        Expr::App(Op::Add, a) => term_poly(&a[0]).add(&term_poly(&a[1])),
        Expr::App(Op::Mul, a) => term_poly(&a[0]).mul(&term_poly(&a[1])),
        Expr::App(Op::Neg, a) => term_poly(&a[0]).neg(),
        Expr::App(o, _) => unreachable!("`{}` in term position after sort check", o.symbol()),
    }
}

fn formula_expr(e: &Expr, atoms: &mut Vec<Atom>) -> BoolExpr {
    let mut atom = |poly: Poly, rel: Rel| {
        atoms.push(Atom { poly, rel });
        BoolExpr::Atom(atoms.len() - 1)
    };
    match e {
        Expr::App(Op::Eq, a) => atom(term_poly(&a[0]).sub(&term_poly(&a[1])), Rel::Eq),
        Expr::App(Op::Le, a) => atom(term_poly(&a[1]).sub(&term_poly(&a[0])), Rel::Ge),
        Expr::App(Op::Lt, a) => atom(term_poly(&a[1]).sub(&term_poly(&a[0])), Rel::Gt),
        Expr::App(Op::And, a) => {
            BoolExpr::And(Box::new(formula_expr(&a[0], atoms)), Box::new(formula_expr(&a[1], atoms)))
        }
        Expr::App(Op::Or, a) => BoolExpr::Or(Box::new(formula_expr(&a[0], atoms)), Box::new(formula_expr(&a[1], atoms))),
        Expr::App(Op::Not, a) => BoolExpr::Not(Box::new(formula_expr(&a[0], atoms))),
        _ => unreachable!("term in formula position after sort check"),
    }
}

/// Translation to a constraint system over unrestricted reals, one
/// unknown per variable index up to the largest one used.
pub fn etr_to_constraints(e: &Expr, magnitude: u32) -> Result<ConstraintSystem, EtrError> {
    if !e.sort()? {
        return Err(EtrError::Sort(format!("the root of {} is a term, not a formula", print_sexpr(e))));
    }
    let mut atoms = Vec::new();
    let root = formula_expr(e, &mut atoms);
    Ok(ConstraintSystem::new(e.variables(), Domain::Free { magnitude }, atoms, root))
}

pub fn etr_feasible_small(t: &EtrTree, denominator: u64) -> Result<SolveOutcome, EtrError> {
    etr_feasible_with(t, denominator, ETR_MAGNITUDE, &SolveLimits::default())
}

/// Bounded-denominator search over `|x_i| ≤ magnitude`; witnesses are
/// checked exactly by the solver before being returned.
pub fn etr_feasible_with(
    t: &EtrTree,
    denominator: u64,
    magnitude: u32,
    limits: &SolveLimits,
) -> Result<SolveOutcome, EtrError> {
    let cs = etr_to_constraints(&t.to_expr()?, magnitude)?;
    Ok(solve_with_limits(&cs, denominator, limits)?)
}

fn int_expr(k: &BigInt) -> Expr {
    if k.is_negative() {
        return Expr::app(Op::Neg, vec![int_expr(&-k)]);
    }
    match k.to_u8() {
        Some(v) if v < 64 => Expr::Const(v),
        _ => {
            let (q, r) = k.div_rem(&BigInt::from(63));
            let high = Expr::app(Op::Mul, vec![int_expr(&q), Expr::Const(63)]);
            if r.is_zero() {
                high
            } else {
                Expr::app(Op::Add, vec![high, int_expr(&r)])
            }
        }
    }
}

fn poly_expr(p: &Poly) -> Result<Expr, EtrError> {
    let p = p.clear_denominators();
    let mut acc: Option<Expr> = None;
    for (m, c) in p.terms() {
        let neg = c.is_negative();
        let coeff = c.numer().abs();
        let mut term: Option<Expr> = (!coeff.is_one() || m.is_empty()).then(|| int_expr(&coeff));
        for &i in m {
            let v = Expr::Var(u8::try_from(i).ok().filter(|&i| i < 128).ok_or_else(|| {
                EtrError::Unsupported(format!("unknown {} has no variable label", i))
            })?);
            term = Some(match term {
                None => v,
                Some(t) => Expr::app(Op::Mul, vec![t, v]),
            });
        }
        let mut term = term.expect("monomials are non-empty or carry a constant");
        if neg {
            term = Expr::app(Op::Neg, vec![term]);
        }
        acc = Some(match acc {
            None => term,
            Some(a) => Expr::app(Op::Add, vec![a, term]),
        });
    }
    Ok(acc.unwrap_or(Expr::Const(0)))
}

fn bool_to_expr(b: &BoolExpr, atoms: &[Expr]) -> Expr {
    match b {
        BoolExpr::Const(true) => Expr::app(Op::Eq, vec![Expr::Const(0), Expr::Const(0)]),
        BoolExpr::Const(false) => Expr::app(Op::Eq, vec![Expr::Const(0), Expr::Const(1)]),
        BoolExpr::Atom(i) => atoms[*i].clone(),
        BoolExpr::Not(x) => Expr::app(Op::Not, vec![bool_to_expr(x, atoms)]),
        BoolExpr::And(x, y) => Expr::app(Op::And, vec![bool_to_expr(x, atoms), bool_to_expr(y, atoms)]),
        BoolExpr::Or(x, y) => Expr::app(Op::Or, vec![bool_to_expr(x, atoms), bool_to_expr(y, atoms)]),
    }
}

/// ETR formula equivalent to a constraint system over unrestricted reals.
/// Each polynomial is scaled to integer coefficients first.
pub fn system_to_etr(cs: &ConstraintSystem) -> Result<Expr, EtrError> {
    if !matches!(cs.domain, Domain::Free { .. }) {
        return Err(EtrError::Unsupported("only systems over unrestricted reals translate".into()));
    }
    let atoms = cs
        .atoms
        .iter()
        .map(|a| {
            let p = poly_expr(&a.poly)?;
            Ok(match a.rel {
                Rel::Eq => Expr::app(Op::Eq, vec![p, Expr::Const(0)]),
                Rel::Ge => Expr::app(Op::Le, vec![Expr::Const(0), p]),
                Rel::Gt => Expr::app(Op::Lt, vec![Expr::Const(0), p]),
            })
        })
        .collect::<Result<Vec<_>, EtrError>>()?;
    Ok(bool_to_expr(&cs.root, &atoms))
}

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../../corpus/etr/", $name, ".sexp")))),*]
    };
}

const ETR_CORPUS: &[(&str, &str)] = shipped!["square_one", "square_minus_one", "sum_product", "double_x", "disjunction", "strict_chain", "big_constant"];

/// The shipped ETR trees as `(name, source)` pairs.
pub fn etr_corpus() -> &'static [(&'static str, &'static str)] {
    ETR_CORPUS
}
