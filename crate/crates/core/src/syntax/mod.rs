//! Abstract syntax for the probabilistic and causal languages with summation.
//!
//! Every language fragment shares one AST. Derived connectives (`∨`, `→`,
//! `≈`, `≻`, ...) and rational numerals are expanded by the parser into the
//! primitive grammar, so the semantics and the proof checker only ever see
//! [`Formula::Eq`], [`Formula::Geq`], [`Formula::Not`] and [`Formula::And`].

mod fragment;
mod parse;
mod print;
mod subst;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub use fragment::{classify_fragment, in_cond_language, Fragment};
pub use parse::{expand_comparison, MacroTerm, parse_formula, parse_formula_lines, parse_sequent, parse_term, ParseError, ParseErrorKind, Pos};
pub use print::{print_event, print_formula, print_sequent, print_term};
pub use subst::{
    free_vars, free_vars_event, free_vars_term, rename_bound_canonical, substitute_event,
    substitute_range_var, substitute_range_var_term, SubstError,
};

/// A random (endogenous) variable name such as `X` or `Age`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Prefix used for this variable's range variables (`X` -> `x`).
    pub fn range_prefix(&self) -> String {
        self.0.to_lowercase()
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The range variable `v_i` of a random variable `V`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RangeVar {
    pub var: Var,
    pub index: u32,
}

impl RangeVar {
    pub fn new(var: &Var, index: u32) -> Self {
        RangeVar { var: var.clone(), index }
    }
}

impl fmt::Display for RangeVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = self.var.range_prefix();
        if prefix.ends_with(|c: char| c.is_ascii_digit()) {
            write!(f, "{}_{}", prefix, self.index)
        } else {
            write!(f, "{}{}", prefix, self.index)
        }
    }
}

/// An element of `D_V`: either a constant `c^V_i` or a range variable `v_i`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sym {
    Const { var: Var, index: u32 },
    Range(RangeVar),
}

impl Sym {
    pub fn constant(var: &Var, index: u32) -> Self {
        Sym::Const { var: var.clone(), index }
    }

    pub fn range(var: &Var, index: u32) -> Self {
        Sym::Range(RangeVar::new(var, index))
    }

    pub fn var(&self) -> &Var {
        match self {
            Sym::Const { var, .. } => var,
            Sym::Range(rv) => &rv.var,
        }
    }

    pub fn as_range(&self) -> Option<&RangeVar> {
        match self {
            Sym::Range(rv) => Some(rv),
            Sym::Const { .. } => None,
        }
    }

    pub fn const_index(&self) -> Option<u32> {
        match self {
            Sym::Const { index, .. } => Some(*index),
            Sym::Range(_) => None,
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Const { var, index } => write!(f, "c{}@{}", index, var),
            Sym::Range(rv) => rv.fmt(f),
        }
    }
}

/// A conjunction of atoms `V = d` used as an intervention; empty means `⊤`.
///
/// At most one atom per variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Intervention(pub Vec<Sym>);

impl Intervention {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn atoms(&self) -> &[Sym] {
        &self.0
    }
}

/// Base formulas: `L_base^prob` when no [`Event::Box`] occurs, `L_base^causal`
/// when every leaf is a box (see [`Event::kind`]).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Event {
    Top,
    /// `V = d`, where `V` is the symbol's variable.
    Atom(Sym),
    Not(Box<Event>),
    And(Box<Event>, Box<Event>),
    /// `[α] β` with `β` box-free.
    Box(Intervention, Box<Event>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EventKind {
    Prob,
    Causal,
    Mixed,
}

impl Event {
    pub fn atom(sym: Sym) -> Self {
        Event::Atom(sym)
    }

    pub fn bottom() -> Self {
        Event::Not(Box::new(Event::Top))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Event) -> Self {
        Event::Not(Box::new(e))
    }

    pub fn and(a: Event, b: Event) -> Self {
        Event::And(Box::new(a), Box::new(b))
    }

    /// `a ∨ b` as `¬(¬a ∧ ¬b)`.
    pub fn or(a: Event, b: Event) -> Self {
        Event::not(Event::and(Event::not(a), Event::not(b)))
    }

    pub fn boxed(int: Intervention, body: Event) -> Self {
        Event::Box(int, Box::new(body))
    }

    /// Left-associated conjunction; `⊤` when empty.
    pub fn conj(items: impl IntoIterator<Item = Event>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Event::Top,
            Some(first) => it.fold(first, Event::and),
        }
    }

    /// Left-associated disjunction; `⊥` when empty.
    pub fn disj(items: impl IntoIterator<Item = Event>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Event::bottom(),
            Some(first) => it.fold(first, Event::or),
        }
    }

    pub fn has_box(&self) -> bool {
        match self {
            Event::Top | Event::Atom(_) => false,
            Event::Not(e) => e.has_box(),
            Event::And(a, b) => a.has_box() || b.has_box(),
            Event::Box(..) => true,
        }
    }

    pub fn kind(&self) -> EventKind {
        fn all_boxed(e: &Event) -> bool {
            match e {
                Event::Top | Event::Atom(_) => false,
                Event::Not(x) => all_boxed(x),
                Event::And(a, b) => all_boxed(a) && all_boxed(b),
                Event::Box(_, body) => !body.has_box(),
            }
        }
        if !self.has_box() {
            EventKind::Prob
        } else if all_boxed(self) {
            EventKind::Causal
        } else {
            EventKind::Mixed
        }
    }

    /// Variables mentioned anywhere in the event, including interventions.
    pub fn variables(&self, out: &mut BTreeSet<Var>) {
        match self {
            Event::Top => {}
            Event::Atom(s) => {
                out.insert(s.var().clone());
            }
            Event::Not(e) => e.variables(out),
            Event::And(a, b) => {
                a.variables(out);
                b.variables(out);
            }
            Event::Box(int, body) => {
                for s in int.atoms() {
                    out.insert(s.var().clone());
                }
                body.variables(out);
            }
        }
    }

    pub fn for_each_sym(&self, f: &mut impl FnMut(&Sym)) {
        match self {
            Event::Top => {}
            Event::Atom(s) => f(s),
            Event::Not(e) => e.for_each_sym(f),
            Event::And(a, b) => {
                a.for_each_sym(f);
                b.for_each_sym(f);
            }
            Event::Box(int, body) => {
                for s in int.atoms() {
                    f(s);
                }
                body.for_each_sym(f);
            }
        }
    }

    pub fn map_syms(&self, f: &mut impl FnMut(&Sym) -> Sym) -> Event {
        match self {
            Event::Top => Event::Top,
            Event::Atom(s) => Event::Atom(f(s)),
            Event::Not(e) => Event::not(e.map_syms(f)),
            Event::And(a, b) => Event::and(a.map_syms(f), b.map_syms(f)),
            Event::Box(int, body) => Event::boxed(
                Intervention(int.atoms().iter().map(&mut *f).collect()),
                body.map_syms(f),
            ),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Event::Top | Event::Atom(_) => 1,
            Event::Not(e) => 1 + e.size(),
            Event::And(a, b) => 1 + a.size() + b.size(),
            Event::Box(int, body) => 1 + int.atoms().len() + body.size(),
        }
    }
}

/// Probability terms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    /// `P(event | given)`; `P(δ)` is `P(δ | ⊤)`.
    Prob { event: Event, given: Event },
    Sum { bound: RangeVar, body: Box<Term> },
    Add(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Neg(Box<Term>),
    /// A constant or range-variable symbol used as a numeric coefficient.
    Sym(Sym),
}

impl Term {
    pub fn prob(event: Event) -> Self {
        Term::Prob { event, given: Event::Top }
    }

    pub fn cond(event: Event, given: Event) -> Self {
        Term::Prob { event, given }
    }

    /// The numeral `1` = `P(⊤)`.
    pub fn one() -> Self {
        Term::prob(Event::Top)
    }

    /// The numeral `0` = `P(⊥)`, with `⊥` spelled `¬⊤`.
    pub fn zero() -> Self {
        Term::prob(Event::bottom())
    }

    /// Numeral `n`: a left-associated `n`-term sum of `P(⊤)`, or `P(⊥)` for 0.
    pub fn numeral(n: u64) -> Self {
        if n == 0 {
            return Term::zero();
        }
        (1..n).fold(Term::one(), |acc, _| Term::add(acc, Term::one()))
    }

    /// Recognizes the canonical numeral shape produced by [`Term::numeral`].
    pub fn as_numeral(&self) -> Option<u64> {
        match self {
            Term::Prob { event, given: Event::Top } => match event {
                Event::Top => Some(1),
                Event::Not(inner) if **inner == Event::Top => Some(0),
                _ => None,
            },
            Term::Add(a, b) if **b == Term::one() => {
                let n = a.as_numeral()?;
                if n >= 1 {
                    Some(n + 1)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn add(a: Term, b: Term) -> Self {
        Term::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Term, b: Term) -> Self {
        Term::Mul(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Term) -> Self {
        Term::Neg(Box::new(a))
    }

    pub fn sub(a: Term, b: Term) -> Self {
        Term::add(a, Term::neg(b))
    }

    pub fn sum(bound: RangeVar, body: Term) -> Self {
        Term::Sum { bound, body: Box::new(body) }
    }

    /// Left-associated sum; `0` when empty.
    pub fn sum_of(items: impl IntoIterator<Item = Term>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Term::zero(),
            Some(first) => it.fold(first, Term::add),
        }
    }

    /// Left-associated product; `1` when empty.
    pub fn product_of(items: impl IntoIterator<Item = Term>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Term::one(),
            Some(first) => it.fold(first, Term::mul),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Prob { event, given } => 1 + event.size() + given.size(),
            Term::Sum { body, .. } => 1 + body.size(),
            Term::Add(a, b) | Term::Mul(a, b) => 1 + a.size() + b.size(),
            Term::Neg(a) => 1 + a.size(),
            Term::Sym(_) => 1,
        }
    }

    pub fn has_sum(&self) -> bool {
        match self {
            Term::Sum { .. } => true,
            Term::Prob { .. } | Term::Sym(_) => false,
            Term::Add(a, b) | Term::Mul(a, b) => a.has_sum() || b.has_sum(),
            Term::Neg(a) => a.has_sum(),
        }
    }

    pub fn for_each_prob(&self, f: &mut impl FnMut(&Event, &Event)) {
        match self {
            Term::Prob { event, given } => f(event, given),
            Term::Sum { body, .. } => body.for_each_prob(f),
            Term::Add(a, b) | Term::Mul(a, b) => {
                a.for_each_prob(f);
                b.for_each_prob(f);
            }
            Term::Neg(a) => a.for_each_prob(f),
            Term::Sym(_) => {}
        }
    }

    pub fn variables(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Prob { event, given } => {
                event.variables(out);
                given.variables(out);
            }
            Term::Sum { bound, body } => {
                out.insert(bound.var.clone());
                body.variables(out);
            }
            Term::Add(a, b) | Term::Mul(a, b) => {
                a.variables(out);
                b.variables(out);
            }
            Term::Neg(a) => a.variables(out),
            Term::Sym(s) => {
                out.insert(s.var().clone());
            }
        }
    }
}

/// Formulas of `L_prob` / `L_causal`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Formula {
    /// `d ≡ d'`, both symbols of the same variable.
    Eq(Sym, Sym),
    /// `t ≿ t'`.
    Geq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn eq(a: Sym, b: Sym) -> Self {
        Formula::Eq(a, b)
    }

    pub fn neq(a: Sym, b: Sym) -> Self {
        Formula::not(Formula::Eq(a, b))
    }

    pub fn geq(a: Term, b: Term) -> Self {
        Formula::Geq(a, b)
    }

    /// `a ≾ b` is `b ≿ a`.
    pub fn leq(a: Term, b: Term) -> Self {
        Formula::Geq(b, a)
    }

    /// `a ≻ b` is `a ≿ b ∧ ¬(b ≿ a)`.
    pub fn gt(a: Term, b: Term) -> Self {
        Formula::and(Formula::Geq(a.clone(), b.clone()), Formula::not(Formula::Geq(b, a)))
    }

    /// `a ≺ b` is `b ≿ a ∧ ¬(a ≿ b)`.
    pub fn lt(a: Term, b: Term) -> Self {
        Formula::gt(b, a)
    }

    /// `a ≈ b` is `a ≿ b ∧ b ≿ a`.
    pub fn approx(a: Term, b: Term) -> Self {
        Formula::and(Formula::Geq(a.clone(), b.clone()), Formula::Geq(b, a))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::not(Formula::and(a, Formula::not(b)))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::and(Formula::implies(a.clone(), b.clone()), Formula::implies(b, a))
    }

    /// Left-associated conjunction; `None` when empty (there is no `⊤` formula).
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Option<Self> {
        let mut it = items.into_iter();
        let first = it.next()?;
        Some(it.fold(first, Formula::and))
    }

    /// Matches `¬(a ∧ ¬b)`.
    pub fn as_implication(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::Not(inner) = self {
            if let Formula::And(a, nb) = &**inner {
                if let Formula::Not(b) = &**nb {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Matches `a ≿ b ∧ b ≿ a`.
    pub fn as_approx(&self) -> Option<(&Term, &Term)> {
        if let Formula::And(l, r) = self {
            if let (Formula::Geq(a, b), Formula::Geq(c, d)) = (&**l, &**r) {
                if a == d && b == c {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Matches `a ≿ b ∧ ¬(b ≿ a)`.
    pub fn as_gt(&self) -> Option<(&Term, &Term)> {
        if let Formula::And(l, r) = self {
            if let (Formula::Geq(a, b), Formula::Not(nr)) = (&**l, &**r) {
                if let Formula::Geq(c, d) = &**nr {
                    if a == d && b == c {
                        return Some((a, b));
                    }
                }
            }
        }
        None
    }

    /// Matches `(a → b) ∧ (b → a)`.
    pub fn as_iff(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::And(l, r) = self {
            let (a, b) = l.as_implication()?;
            let (c, d) = r.as_implication()?;
            if a == d && b == c {
                return Some((a, b));
            }
        }
        None
    }

    /// Flattens a conjunction tree into its conjuncts (left to right).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Eq(..) => 1,
            Formula::Geq(a, b) => 1 + a.size() + b.size(),
            Formula::Not(f) => 1 + f.size(),
            Formula::And(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn for_each_term(&self, f: &mut impl FnMut(&Term)) {
        match self {
            Formula::Eq(..) => {}
            Formula::Geq(a, b) => {
                f(a);
                f(b);
            }
            Formula::Not(x) => x.for_each_term(f),
            Formula::And(a, b) => {
                a.for_each_term(f);
                b.for_each_term(f);
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    pub fn collect_variables(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Eq(a, b) => {
                out.insert(a.var().clone());
                out.insert(b.var().clone());
            }
            Formula::Geq(a, b) => {
                a.variables(out);
                b.variables(out);
            }
            Formula::Not(x) => x.collect_variables(out),
            Formula::And(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    pub fn has_sum(&self) -> bool {
        let mut found = false;
        self.for_each_term(&mut |t| found |= t.has_sum());
        found
    }
}

/// `premises ⇒ conclusion`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Sequent {
    pub premises: Vec<Formula>,
    pub conclusion: Formula,
}

impl Sequent {
    pub fn new(premises: Vec<Formula>, conclusion: Formula) -> Self {
        Sequent { premises, conclusion }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for p in &self.premises {
            p.collect_variables(&mut out);
        }
        self.conclusion.collect_variables(&mut out);
        out
    }
}

/// Number of constant symbols per variable.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConstantCount {
    Unbounded,
    /// `C_V = {c_1, ..., c_N}` for every variable, `N ≥ 1`.
    Bounded(u32),
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum SignatureError {
    #[error("bounded signatures need N >= 1")]
    ZeroBound,
    #[error("invalid variable name `{0}` (must start with an uppercase letter and use [A-Za-z0-9_])")]
    BadName(String),
    #[error("`{0}` is reserved and cannot name a variable")]
    Reserved(String),
    #[error("variables `{0}` and `{1}` share the range-variable prefix `{2}`")]
    PrefixClash(String, String, String),
}

/// A signature: ordered random variables plus the constant count.
///
/// Range variables are unbounded per variable; constant and range-variable
/// sets of distinct variables are disjoint because every symbol carries its
/// variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Signature {
    variables: Vec<Var>,
    constants: ConstantCount,
}

impl Signature {
    pub fn new<S: AsRef<str>>(names: &[S], constants: ConstantCount) -> Result<Self, SignatureError> {
        if constants == ConstantCount::Bounded(0) {
            return Err(SignatureError::ZeroBound);
        }
        let mut variables: Vec<Var> = Vec::new();
        for name in names {
            let name = name.as_ref();
            let valid = name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !name.ends_with('_');
            if !valid {
                return Err(SignatureError::BadName(name.to_string()));
            }
            if matches!(name, "P" | "T" | "F") || name.eq_ignore_ascii_case("c") || name.eq_ignore_ascii_case("sum") {
                return Err(SignatureError::Reserved(name.to_string()));
            }
            let var = Var::new(name);
            if variables.contains(&var) {
                continue;
            }
            if let Some(other) = variables.iter().find(|v| v.range_prefix() == var.range_prefix()) {
                return Err(SignatureError::PrefixClash(
                    other.to_string(),
                    name.to_string(),
                    var.range_prefix(),
                ));
            }
            variables.push(var);
        }
        Ok(Signature { variables, constants })
    }

    pub fn unbounded<S: AsRef<str>>(names: &[S]) -> Result<Self, SignatureError> {
        Signature::new(names, ConstantCount::Unbounded)
    }

    pub fn bounded<S: AsRef<str>>(names: &[S], n: u32) -> Result<Self, SignatureError> {
        Signature::new(names, ConstantCount::Bounded(n))
    }

    pub fn variables(&self) -> &[Var] {
        &self.variables
    }

    pub fn constants(&self) -> ConstantCount {
        self.constants
    }

    pub fn bound(&self) -> Option<u32> {
        match self.constants {
            ConstantCount::Bounded(n) => Some(n),
            ConstantCount::Unbounded => None,
        }
    }

    pub fn with_constants(&self, constants: ConstantCount) -> Self {
        Signature { variables: self.variables.clone(), constants }
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.variables.iter().find(|v| v.name() == name)
    }

    pub fn position(&self, var: &Var) -> Option<usize> {
        self.variables.iter().position(|v| v == var)
    }

    pub fn var_for_prefix(&self, prefix: &str) -> Option<&Var> {
        self.variables.iter().find(|v| v.range_prefix() == prefix)
    }
}
