//! The polynomial core: terms as polynomials over opaque leaves, and
//! validity of Boolean combinations of comparisons modulo linear arithmetic.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::num::Rational;
use crate::sat::Poly;
use crate::syntax::{print_event, print_term, Event, Formula, Sym, Term};

/// Interns leaf terms (probabilities, sums, coefficient symbols) as
/// polynomial unknowns.
#[derive(Default, Debug, Clone)]
pub struct Leaves {
    index: HashMap<String, usize>,
}

impl Leaves {
    pub fn new() -> Self {
        Leaves::default()
    }

    fn id(&mut self, key: String) -> usize {
        let n = self.index.len();
        *self.index.entry(key).or_insert(n)
    }

    pub fn prob_leaf(&mut self, event: &Event, given: &Event) -> usize {
        self.id(format!("P({} | {})", print_event(event), print_event(given)))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// `P(⊤) = 1` and `P(¬⊤) = 0`; every other probability, sum and symbol
    /// is an unknown.
    pub fn poly(&mut self, t: &Term) -> Poly {
        match t {
            Term::Prob { event, given } => {
                if *given == Event::Top {
                    if *event == Event::Top {
                        return Poly::constant(Rational::one());
                    }
                    if *event == Event::bottom() {
                        return Poly::zero();
                    }
                }
                Poly::var(self.prob_leaf(event, given))
            }
            Term::Sum { .. } => Poly::var(self.id(format!("S {}", print_term(t)))),
            Term::Sym(s) => Poly::var(self.sym_leaf(s)),
            Term::Add(a, b) => self.poly(a).add(&self.poly(b)),
            Term::Mul(a, b) => self.poly(a).mul(&self.poly(b)),
            Term::Neg(a) => self.poly(a).neg(),
        }
    }

    fn sym_leaf(&mut self, s: &Sym) -> usize {
        self.id(format!("C {}", s))
    }

    /// `a − b` for the comparison `a ≿ b`.
    pub fn difference(&mut self, a: &Term, b: &Term) -> Poly {
        self.poly(a).sub(&self.poly(b))
    }
}

/// Scales by a positive rational so coefficients are coprime integers.
pub fn primitive(p: &Poly) -> Poly {
    if p.is_zero() {
        return Poly::zero();
    }
    let den = p.terms().fold(num_bigint::BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
    let scaled = p.scale(&Rational::from_integer(den));
    let g = scaled.terms().fold(num_bigint::BigInt::zero(), |acc, (_, c)| acc.gcd(c.numer()));
    scaled.scale(&Rational::new(num_bigint::BigInt::one(), g))
}

/// True when `p = μ·q` for some rational `μ > 0`.
pub fn positive_multiple(p: &Poly, q: &Poly) -> bool {
    primitive(p) == primitive(q)
}

/// A comparison literal `p ≥ 0` or `p > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lit {
    pub poly: Poly,
    pub strict: bool,
}

/// `f` as one literal: `a ≿ b`, `¬(a ≿ b)` or double negations thereof.
pub fn literal(leaves: &mut Leaves, f: &Formula) -> Option<Lit> {
    match f {
        Formula::Geq(a, b) => Some(Lit { poly: leaves.difference(a, b), strict: false }),
        Formula::Not(inner) => match &**inner {
            Formula::Geq(a, b) => Some(Lit { poly: leaves.difference(b, a), strict: true }),
            Formula::Not(x) => literal(leaves, x),
            _ => None,
        },
        _ => None,
    }
}

/// The strict literal of `a ≻ b` (its non-strict half is implied).
pub fn strict_literal(leaves: &mut Leaves, f: &Formula) -> Option<Lit> {
    if let Some((a, b)) = f.as_gt() {
        return Some(Lit { poly: leaves.difference(a, b), strict: true });
    }
    literal(leaves, f).filter(|l| l.strict)
}

const FM_LIMIT: usize = 4000;

/// Fourier–Motzkin elimination over the linearization (each monomial an
/// independent unknown). `Some(true)` when the literals have no common
/// real solution, `None` when the elimination grew too large.
pub fn infeasible(lits: &[Lit]) -> Option<bool> {
    type Row = (BTreeMap<Vec<usize>, Rational>, Rational, bool);
    let mut rows: Vec<Row> = lits
        .iter()
        .map(|l| {
            let mut coeffs = BTreeMap::new();
            let mut c = Rational::zero();
            for (m, k) in l.poly.terms() {
                if m.is_empty() {
                    c = k.clone();
                } else {
                    coeffs.insert(m.clone(), k.clone());
                }
            }
            (coeffs, c, l.strict)
        })
        .collect();
    loop {
        for (coeffs, c, strict) in &rows {
            if coeffs.is_empty() && (c.is_negative() || (*strict && c.is_zero())) {
                return Some(true);
            }
        }
        let Some(var) = rows.iter().find_map(|(coeffs, _, _)| coeffs.keys().next().cloned()) else {
            return Some(false);
        };
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for row in rows {
            match row.0.get(&var).map(|k| k.is_positive()) {
                Some(true) => pos.push(row),
                Some(false) => neg.push(row),
                None => rest.push(row),
            }
        }
        if rest.len() + pos.len() * neg.len() > FM_LIMIT {
            return None;
        }
        for p in &pos {
            for n in &neg {
                let a = p.0[&var].clone();
                let b = -n.0[&var].clone();
                let mut coeffs = BTreeMap::new();
                for (m, k) in p.0.iter() {
                    *coeffs.entry(m.clone()).or_insert_with(Rational::zero) += k * &b;
                }
                for (m, k) in n.0.iter() {
                    *coeffs.entry(m.clone()).or_insert_with(Rational::zero) += k * &a;
                }
                coeffs.retain(|_, k| !k.is_zero());
                let c = &p.1 * &b + &n.1 * &a;
                rest.push((coeffs, c, p.2 || n.2));
            }
        }
        rest.sort();
        rest.dedup();
        rows = rest;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum AtomKey {
    Eq(String, String),
    Geq(Vec<(Vec<usize>, String)>),
}

struct Skeleton {
    atoms: Vec<(AtomKey, Option<Poly>)>,
}

#[derive(Clone, Debug)]
enum Prop {
    Atom(usize),
    Const(bool),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
}

impl Prop {
    fn eval(&self, v: &[bool]) -> bool {
        match self {
            Prop::Atom(i) => v[*i],
            Prop::Const(b) => *b,
            Prop::Not(p) => !p.eval(v),
            Prop::And(a, b) => a.eval(v) && b.eval(v),
        }
    }
}

fn poly_key(p: &Poly) -> Vec<(Vec<usize>, String)> {
    p.terms().map(|(m, c)| (m.clone(), c.to_string())).collect()
}

impl Skeleton {
    fn atom(&mut self, key: AtomKey, poly: Option<Poly>) -> usize {
        if let Some(i) = self.atoms.iter().position(|(k, _)| *k == key) {
            return i;
        }
        self.atoms.push((key, poly));
        self.atoms.len() - 1
    }

    fn build(&mut self, leaves: &mut Leaves, f: &Formula) -> Prop {
        match f {
            Formula::Eq(a, b) => {
                if a == b {
                    return Prop::Const(true);
                }
                let (x, y) = (a.to_string(), b.to_string());
                let key = if x <= y { AtomKey::Eq(x, y) } else { AtomKey::Eq(y, x) };
                Prop::Atom(self.atom(key, None))
            }
            Formula::Geq(a, b) => {
                let p = primitive(&leaves.difference(a, b));
                if let Some(c) = p.as_constant() {
                    return Prop::Const(!c.is_negative());
                }
                Prop::Atom(self.atom(AtomKey::Geq(poly_key(&p)), Some(p)))
            }
            Formula::Not(x) => Prop::Not(Box::new(self.build(leaves, x))),
            Formula::And(a, b) => Prop::And(Box::new(self.build(leaves, a)), Box::new(self.build(leaves, b))),
        }
    }
}

/// Largest number of distinct atoms a tautology check will enumerate.
pub const MAX_ATOMS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Check {
    Valid,
    Invalid(String),
    TooLarge,
}

/// Validity of `f` as a Boolean combination of its atoms, where comparison
/// atoms equal up to positive scaling are identified and, when `theory` is
/// set, truth assignments whose comparison literals are jointly infeasible
/// over the reals are discarded.
pub fn valid(f: &Formula, theory: bool) -> Check {
    let mut leaves = Leaves::new();
    let mut sk = Skeleton { atoms: Vec::new() };
    let prop = sk.build(&mut leaves, f);
    let n = sk.atoms.len();
    if n > MAX_ATOMS {
        return Check::TooLarge;
    }
    let mut v = vec![false; n];
    for code in 0u64..(1u64 << n) {
        for (i, b) in v.iter_mut().enumerate() {
            *b = code >> i & 1 == 1;
        }
        if prop.eval(&v) {
            continue;
        }
        if theory {
            let lits: Vec<Lit> = sk
                .atoms
                .iter()
                .zip(&v)
                .filter_map(|((_, p), &b)| {
                    p.as_ref().map(|p| if b { Lit { poly: p.clone(), strict: false } } else { Lit { poly: p.neg(), strict: true } })
                })
                .collect();
            match infeasible(&lits) {
                Some(true) => continue,
                Some(false) => {}
                None => return Check::TooLarge,
            }
        }
        let row: Vec<String> = sk
            .atoms
            .iter()
            .zip(&v)
            .map(|((k, _), b)| format!("{}={}", atom_label(k), b))
            .collect();
        return Check::Invalid(format!("falsified by {}", row.join(", ")));
    }
    Check::Valid
}

fn atom_label(k: &AtomKey) -> String {
    match k {
        AtomKey::Eq(a, b) => format!("{} ~ {}", a, b),
        AtomKey::Geq(terms) => {
            let parts: Vec<String> = terms.iter().map(|(m, c)| format!("{}{:?}", c, m)).collect();
            format!("[{}] >= 0", parts.join(" + "))
        }
    }
}

/// Formulas equal up to the arithmetic meaning of their comparison atoms.
pub fn equivalent_atoms(a: &Formula, b: &Formula) -> bool {
    fn go(l: &mut Leaves, a: &Formula, b: &Formula) -> bool {
        match (a, b) {
            (Formula::Eq(x, y), Formula::Eq(u, v)) => (x == u && y == v) || (x == v && y == u),
            (Formula::Geq(x, y), Formula::Geq(u, v)) => {
                let p = l.difference(x, y);
                let q = l.difference(u, v);
                positive_multiple(&p, &q)
            }
            (Formula::Not(x), Formula::Not(y)) => go(l, x, y),
            (Formula::And(x, y), Formula::And(u, v)) => go(l, x, u) && go(l, y, v),
            _ => false,
        }
    }
    a == b || go(&mut Leaves::new(), a, b)
}
