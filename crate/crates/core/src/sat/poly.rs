//! Sparse polynomials over exact rationals and Boolean combinations of
//! polynomial comparisons.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::num::{fmt_short, Rational};

/// A monomial is the sorted multiset of its variable indices.
pub type Monomial = Vec<usize>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Poly::zero();
        p.push(Vec::new(), c);
        p
    }

    pub fn var(i: usize) -> Self {
        let mut p = Poly::zero();
        p.push(vec![i], Rational::one());
        p
    }

    /// `c · m` for a sorted monomial `m`.
    pub fn monomial(m: Monomial, c: Rational) -> Self {
        let mut p = Poly::zero();
        p.push(m, c);
        p
    }

    /// `Σ_{i ∈ vars} p_i`.
    pub fn sum_of_vars(vars: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Poly::zero();
        for i in vars {
            p.push(vec![i], Rational::one());
        }
        p
    }

    fn push(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.push(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Rational) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.push(m.clone(), c * k);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                m.sort_unstable();
                out.push(m, ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, point: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &i in m {
                t *= &point[i];
            }
            acc += t;
        }
        acc
    }

    /// Renames variables through `map`; monomials touching an unmapped
    /// variable are dropped (the variable is fixed to zero).
    pub fn restrict(&self, map: &[Option<usize>]) -> Poly {
        let mut out = Poly::zero();
        'terms: for (m, c) in &self.terms {
            let mut nm = Vec::with_capacity(m.len());
            for &i in m {
                match map[i] {
                    Some(j) => nm.push(j),
                    None => continue 'terms,
                }
            }
            nm.sort_unstable();
            out.push(nm, c.clone());
        }
        out
    }

    /// Multiplies by the least common multiple of the coefficient
    /// denominators, giving integer coefficients with the same sign pattern.
    pub fn clear_denominators(&self) -> Poly {
        let l = self.terms.values().fold(num_bigint::BigInt::one(), |acc, c| num_integer::lcm(acc, c.denom().clone()));
        self.scale(&Rational::from_integer(l))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if k > 0 {
                f.write_str(if neg { " - " } else { " + " })?;
            } else if neg {
                f.write_str("-")?;
            }
            let a = c.abs();
            let vars: Vec<String> = m.iter().map(|i| format!("p{}", i)).collect();
            if m.is_empty() {
                write!(f, "{}", fmt_short(&a))?;
            } else if a.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{}*{}", fmt_short(&a), vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Relation of a polynomial to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Ge,
    Gt,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub poly: Poly,
    pub rel: Rel,
}

impl Atom {
    pub fn holds(&self, point: &[Rational]) -> bool {
        let v = self.poly.eval(point);
        match self.rel {
            Rel::Ge => !v.is_negative(),
            Rel::Gt => v.is_positive(),
            Rel::Eq => v.is_zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    Atom(usize),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn eval(&self, atom: &mut impl FnMut(usize) -> bool) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Atom(i) => atom(*i),
            BoolExpr::Not(x) => !x.eval(atom),
            BoolExpr::And(a, b) => a.eval(atom) && b.eval(atom),
            BoolExpr::Or(a, b) => a.eval(atom) || b.eval(atom),
        }
    }

    /// Kleene three-valued evaluation.
    pub fn eval3(&self, atom: &impl Fn(usize) -> Option<bool>) -> Option<bool> {
        match self {
            BoolExpr::Const(b) => Some(*b),
            BoolExpr::Atom(i) => atom(*i),
            BoolExpr::Not(x) => x.eval3(atom).map(|b| !b),
            BoolExpr::And(a, b) => match (a.eval3(atom), b.eval3(atom)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            BoolExpr::Or(a, b) => match (a.eval3(atom), b.eval3(atom)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    /// Folds constant subexpressions.
    pub fn simplify(self) -> BoolExpr {
        match self {
            BoolExpr::Not(x) => match x.simplify() {
                BoolExpr::Const(b) => BoolExpr::Const(!b),
                BoolExpr::Not(y) => *y,
                y => BoolExpr::Not(Box::new(y)),
            },
            BoolExpr::And(a, b) => match (a.simplify(), b.simplify()) {
                (BoolExpr::Const(false), _) | (_, BoolExpr::Const(false)) => BoolExpr::Const(false),
                (BoolExpr::Const(true), y) | (y, BoolExpr::Const(true)) => y,
                (x, y) => BoolExpr::And(Box::new(x), Box::new(y)),
            },
            BoolExpr::Or(a, b) => match (a.simplify(), b.simplify()) {
                (BoolExpr::Const(true), _) | (_, BoolExpr::Const(true)) => BoolExpr::Const(true),
                (BoolExpr::Const(false), y) | (y, BoolExpr::Const(false)) => y,
                (x, y) => BoolExpr::Or(Box::new(x), Box::new(y)),
            },
            other => other,
        }
    }

    fn collect_atoms(&self, out: &mut Vec<usize>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Atom(i) => out.push(*i),
            BoolExpr::Not(x) => x.collect_atoms(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    fn renumber(&self, map: &[usize]) -> BoolExpr {
        match self {
            BoolExpr::Const(b) => BoolExpr::Const(*b),
            BoolExpr::Atom(i) => BoolExpr::Atom(map[*i]),
            BoolExpr::Not(x) => BoolExpr::Not(Box::new(x.renumber(map))),
            BoolExpr::And(a, b) => BoolExpr::And(Box::new(a.renumber(map)), Box::new(b.renumber(map))),
            BoolExpr::Or(a, b) => BoolExpr::Or(Box::new(a.renumber(map)), Box::new(b.renumber(map))),
        }
    }
}

/// Where the unknowns live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Probability vectors: `p_i ≥ 0` (or `> 0` when strict) and `Σ p_i = 1`.
    Simplex { strict: bool },
    /// Arbitrary reals; the grid search explores `|x_i| ≤ magnitude`.
    Free { magnitude: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub unknowns: usize,
    pub domain: Domain,
    pub atoms: Vec<Atom>,
    pub root: BoolExpr,
    /// Display names of the unknowns.
    pub labels: Vec<String>,
}

impl ConstraintSystem {
    pub fn new(unknowns: usize, domain: Domain, atoms: Vec<Atom>, root: BoolExpr) -> Self {
        let prefix = if matches!(domain, Domain::Free { .. }) { "x" } else { "p" };
        let labels = (0..unknowns).map(|i| format!("{}{}", prefix, i)).collect();
        ConstraintSystem { unknowns, domain, atoms, root, labels }
    }

    /// Exact check of a candidate point, side conditions included.
    pub fn satisfied_by(&self, point: &[Rational]) -> bool {
        if point.len() != self.unknowns {
            return false;
        }
        if let Domain::Simplex { strict } = self.domain {
            let bad = point.iter().any(|p| p.is_negative() || (strict && p.is_zero()));
            let total: Rational = point.iter().sum();
            if bad || !total.is_one() {
                return false;
            }
        }
        self.root.eval(&mut |i| self.atoms[i].holds(point))
    }

    /// The system on the unknowns in `keep` (in that order), all others fixed to zero.
    pub fn restrict(&self, keep: &[usize]) -> ConstraintSystem {
        let mut map = vec![None; self.unknowns];
        for (j, &i) in keep.iter().enumerate() {
            map[i] = Some(j);
        }
        ConstraintSystem {
            unknowns: keep.len(),
            domain: self.domain,
            atoms: self.atoms.iter().map(|a| Atom { poly: a.poly.restrict(&map), rel: a.rel }).collect(),
            root: self.root.clone(),
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Drops atoms that the Boolean structure no longer mentions.
    pub fn compact(mut self) -> ConstraintSystem {
        self.root = self.root.simplify();
        let mut used = Vec::new();
        self.root.collect_atoms(&mut used);
        used.sort_unstable();
        used.dedup();
        let mut map = vec![usize::MAX; self.atoms.len()];
        let mut atoms = Vec::with_capacity(used.len());
        for (j, &i) in used.iter().enumerate() {
            map[i] = j;
            atoms.push(self.atoms[i].clone());
        }
        self.root = self.root.renumber(&map);
        self.atoms = atoms;
        self
    }

    pub fn max_degree(&self) -> usize {
        self.atoms.iter().map(|a| a.poly.degree()).max().unwrap_or(0)
    }
}

impl fmt::Display for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "unknowns {} ({:?})", self.unknowns, self.domain)?;
        for (i, a) in self.atoms.iter().enumerate() {
            let rel = match a.rel {
                Rel::Ge => ">=",
                Rel::Gt => ">",
                Rel::Eq => "==",
            };
            writeln!(f, "a{}: {} {} 0", i, a.poly, rel)?;
        }
        write!(f, "root: {:?}", self.root)
    }
}
