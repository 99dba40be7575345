//! Complete state descriptions and the reduction of a ground formula to a
//! polynomial constraint system over their probabilities.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::poly::{Atom, BoolExpr, ConstraintSystem, Domain, Poly, Rel};
use super::SatError;
use crate::num::Rational;
use crate::syntax::{print_event, Event, Formula, Sym, Term, Var};

/// A constant interpretation over value ranges: the part of a model fixed
/// before probabilities are chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interpretation {
    pub vars: Vec<Var>,
    pub ranges: Vec<Vec<u32>>,
    /// `constants[v][j-1]` is the value of `c_j` for variable `v`.
    pub constants: Vec<Vec<u32>>,
}

impl Interpretation {
    /// Ranges `1..=k` with `c_j` naming `j` (the last value is repeated when
    /// there are more constants than values).
    pub fn identity(vars: Vec<Var>, range_sizes: &[u32], n: u32) -> Self {
        let ranges: Vec<Vec<u32>> = range_sizes.iter().map(|&k| (1..=k).collect()).collect();
        let constants = range_sizes.iter().map(|&k| (1..=n).map(|j| j.min(k)).collect()).collect();
        Interpretation { vars, ranges, constants }
    }

    pub fn position(&self, v: &Var) -> Result<usize, SatError> {
        self.vars.iter().position(|w| w == v).ok_or_else(|| SatError::OutOfScope(format!("variable {}", v)))
    }

    pub fn value(&self, s: &Sym) -> Result<u32, SatError> {
        match s {
            Sym::Const { var, index } => {
                let p = self.position(var)?;
                self.constants[p]
                    .get((*index as usize).wrapping_sub(1))
                    .copied()
                    .ok_or_else(|| SatError::OutOfScope(format!("constant {}", s)))
            }
            Sym::Range(rv) => Err(SatError::NotClosed(rv.to_string())),
        }
    }

    /// The first constant naming `value`.
    pub fn constant_for(&self, var: usize, value: u32) -> Option<u32> {
        self.constants[var].iter().position(|&v| v == value).map(|j| j as u32 + 1)
    }

    /// Number of complete observational assignments.
    pub fn cells(&self) -> usize {
        self.ranges.iter().map(Vec::len).product()
    }
}

/// An intervention as sorted `(variable position, value)` pairs.
pub type Setting = Vec<(usize, u32)>;

/// A complete state description: one full assignment per intervention.
pub type Description = Vec<Vec<u32>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Every intervention over every value of the formula's variables.
    All,
    /// The empty intervention and those occurring in the formula.
    Appearing,
}

#[derive(Clone, Debug)]
pub struct StateDescriptions {
    pub interventions: Vec<Setting>,
    pub descriptions: Vec<Description>,
    pub count: BigUint,
}

fn resolve_setting(atoms: &[Sym], interp: &Interpretation) -> Result<Setting, SatError> {
    let mut out: Setting = Vec::new();
    for s in atoms {
        let p = interp.position(s.var())?;
        if out.iter().all(|(q, _)| *q != p) {
            out.push((p, interp.value(s)?));
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn collect_settings(e: &Event, interp: &Interpretation, out: &mut BTreeSet<Setting>) -> Result<(), SatError> {
    match e {
        Event::Top | Event::Atom(_) => Ok(()),
        Event::Not(x) => collect_settings(x, interp, out),
        Event::And(a, b) => {
            collect_settings(a, interp, out)?;
            collect_settings(b, interp, out)
        }
        Event::Box(int, body) => {
            out.insert(resolve_setting(int.atoms(), interp)?);
            collect_settings(body, interp, out)
        }
    }
}

/// The intervention set of `φ` for `scope`; the empty intervention comes first.
pub fn intervention_set(phi: &Formula, interp: &Interpretation, scope: Scope) -> Result<Vec<Setting>, SatError> {
    let mut set = BTreeSet::new();
    set.insert(Vec::new());
    match scope {
        Scope::Appearing => {
            let mut err = None;
            phi.for_each_term(&mut |t| {
                t.for_each_prob(&mut |e, g| {
                    for x in [e, g] {
                        if let Err(e) = collect_settings(x, interp, &mut set) {
                            err.get_or_insert(e);
                        }
                    }
                })
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Scope::All => {
            let mut all: Vec<Setting> = vec![Vec::new()];
            for (p, range) in interp.ranges.iter().enumerate() {
                let mut next = Vec::new();
                for s in &all {
                    next.push(s.clone());
                    for &v in range {
                        let mut t = s.clone();
                        t.push((p, v));
                        next.push(t);
                    }
                }
                all = next;
            }
            set.extend(all);
        }
    }
    let mut out: Vec<Setting> = set.into_iter().collect();
    out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(out)
}

/// `Π_α Π_{V ∉ dom α} |Val(V)|`.
pub fn count_descriptions(interventions: &[Setting], interp: &Interpretation) -> BigUint {
    let mut count = BigUint::one();
    for s in interventions {
        for (p, r) in interp.ranges.iter().enumerate() {
            if s.iter().all(|(q, _)| *q != p) {
                count *= BigUint::from(r.len());
            }
        }
    }
    count
}

/// All of `Δ_φ` for the scope, in lexicographic order (interventions in
/// [`intervention_set`] order, variables in declared order, last slot
/// fastest). Fails when the set is larger than `cap`.
pub fn enumerate_state_descriptions(
    phi: &Formula,
    interp: &Interpretation,
    scope: Scope,
    cap: usize,
) -> Result<StateDescriptions, SatError> {
    if let Some(rv) = crate::syntax::free_vars(phi).into_iter().next() {
        return Err(SatError::NotClosed(rv.to_string()));
    }
    let interventions = intervention_set(phi, interp, scope)?;
    let count = count_descriptions(&interventions, interp);
    if count > BigUint::from(cap) {
        return Err(SatError::Cap(format!("|Δ| = {} exceeds the cap of {}", count, cap)));
    }
    let n = interp.vars.len();
    let mut slots = Vec::new();
    let mut base: Description = Vec::new();
    for (a, s) in interventions.iter().enumerate() {
        let mut row = vec![0u32; n];
        for p in 0..n {
            match s.iter().find(|(q, _)| *q == p) {
                Some(&(_, v)) => row[p] = v,
                None => slots.push((a, p)),
            }
        }
        base.push(row);
    }
    let mut idx = vec![0usize; slots.len()];
    let mut descriptions = Vec::new();
    loop {
        let mut d = base.clone();
        for (k, &(a, p)) in slots.iter().enumerate() {
            d[a][p] = interp.ranges[p][idx[k]];
        }
        descriptions.push(d);
        let mut k = slots.len();
        loop {
            if k == 0 {
                return Ok(StateDescriptions { interventions, descriptions, count });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < interp.ranges[slots[k].1].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// The descriptions some recursive model with variable order `order` can
/// produce: each unintervened value is a function of the values of the
/// variables before it. Enumerated without repetition.
pub fn realizable_descriptions(
    interp: &Interpretation,
    interventions: &[Setting],
    order: &[usize],
    cap: usize,
) -> Result<Vec<Description>, SatError> {
    struct Walk<'a> {
        interp: &'a Interpretation,
        interventions: &'a [Setting],
        order: &'a [usize],
        current: Description,
        memo: HashMap<(usize, Vec<u32>), u32>,
        out: Vec<Description>,
        cap: usize,
    }
    impl Walk<'_> {
        fn go(&mut self, slot: usize) -> Result<(), SatError> {
            let n = self.order.len();
            if slot == self.interventions.len() * n {
                if self.out.len() >= self.cap {
                    return Err(SatError::Cap(format!("more than {} realizable state descriptions", self.cap)));
                }
                self.out.push(self.current.clone());
                return Ok(());
            }
            let (a, k) = (slot / n, slot % n);
            let v = self.order[k];
            if let Some(&(_, x)) = self.interventions[a].iter().find(|(q, _)| *q == v) {
                self.current[a][v] = x;
                return self.go(slot + 1);
            }
            let key: Vec<u32> = self.order[..k].iter().map(|&w| self.current[a][w]).collect();
            if let Some(&x) = self.memo.get(&(v, key.clone())) {
                self.current[a][v] = x;
                return self.go(slot + 1);
            }
            for i in 0..self.interp.ranges[v].len() {
                let x = self.interp.ranges[v][i];
                self.current[a][v] = x;
                self.memo.insert((v, key.clone()), x);
                let r = self.go(slot + 1);
                self.memo.remove(&(v, key.clone()));
                r?;
            }
            Ok(())
        }
    }
    let n = interp.vars.len();
    let mut w = Walk {
        interp,
        interventions,
        order,
        current: vec![vec![0; n]; interventions.len()],
        memo: HashMap::new(),
        out: Vec::new(),
        cap,
    };
    w.go(0)?;
    Ok(w.out)
}

/// Whether no description induces `V_i ⇝ V_j` with `V_j` before `V_i` in
/// `order`: within one description, two interventions that differ only in
/// the value imposed on `V_i` give `V_j` different values.
pub fn check_support_compatibility(interventions: &[Setting], support: &[Description], order: &[usize]) -> bool {
    let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(r, &v)| (v, r)).collect();
    for (a, sa) in interventions.iter().enumerate() {
        for (b, sb) in interventions.iter().enumerate().skip(a + 1) {
            let Some(i) = differs_only_in_value(sa, sb) else { continue };
            for d in support {
                for j in 0..d[a].len() {
                    if j != i && d[a][j] != d[b][j] && rank[&j] < rank[&i] {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn differs_only_in_value(a: &Setting, b: &Setting) -> Option<usize> {
    if a.len() != b.len() {
        return None;
    }
    let mut diff = None;
    for (x, y) in a.iter().zip(b) {
        if x.0 != y.0 {
            return None;
        }
        if x.1 != y.1 {
            if diff.is_some() {
                return None;
            }
            diff = Some(x.0);
        }
    }
    diff
}

/// A base formula with symbols resolved to values and boxes to intervention
/// indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompiledEvent {
    Top,
    Atom(usize, u32),
    Not(Box<CompiledEvent>),
    And(Box<CompiledEvent>, Box<CompiledEvent>),
    Box(usize, Box<CompiledEvent>),
}

impl CompiledEvent {
    pub fn compile(e: &Event, interp: &Interpretation, interventions: &[Setting]) -> Result<Self, SatError> {
        Ok(match e {
            Event::Top => CompiledEvent::Top,
            Event::Atom(s) => CompiledEvent::Atom(interp.position(s.var())?, interp.value(s)?),
            Event::Not(x) => CompiledEvent::Not(Box::new(Self::compile(x, interp, interventions)?)),
            Event::And(a, b) => CompiledEvent::And(
                Box::new(Self::compile(a, interp, interventions)?),
                Box::new(Self::compile(b, interp, interventions)?),
            ),
            Event::Box(int, body) => {
                let s = resolve_setting(int.atoms(), interp)?;
                let k = interventions
                    .iter()
                    .position(|t| *t == s)
                    .ok_or_else(|| SatError::OutOfScope(format!("intervention in {}", print_event(e))))?;
                CompiledEvent::Box(k, Box::new(Self::compile(body, interp, interventions)?))
            }
        })
    }

    pub fn holds(&self, d: &Description) -> bool {
        self.holds_at(d, 0)
    }

    fn holds_at(&self, d: &Description, a: usize) -> bool {
        match self {
            CompiledEvent::Top => true,
            CompiledEvent::Atom(v, x) => d[a][*v] == *x,
            CompiledEvent::Not(x) => !x.holds_at(d, a),
            CompiledEvent::And(x, y) => x.holds_at(d, a) && y.holds_at(d, a),
            CompiledEvent::Box(k, body) => body.holds_at(d, *k),
        }
    }
}

/// The distinct probability events of a ground formula, in first-occurrence order.
pub fn formula_events(phi: &Formula) -> Vec<Event> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    phi.for_each_term(&mut |t| {
        t.for_each_prob(&mut |e, _| {
            if seen.insert(e.clone()) {
                out.push(e.clone());
            }
        })
    });
    out
}

struct Reducer<'a> {
    interp: &'a Interpretation,
    interventions: &'a [Setting],
    support: &'a [Description],
    cache: HashMap<Event, Poly>,
    atoms: Vec<Atom>,
}

impl Reducer<'_> {
    fn prob(&mut self, e: &Event) -> Result<Poly, SatError> {
        if let Some(p) = self.cache.get(e) {
            return Ok(p.clone());
        }
        let c = CompiledEvent::compile(e, self.interp, self.interventions)?;
        let holds: Vec<usize> = (0..self.support.len()).filter(|&k| c.holds(&self.support[k])).collect();
        let m = self.support.len();
        // Σ p = 1 lets the larger side be written as a complement.
        let p = if 2 * holds.len() > m {
            let miss = (0..m).filter(|k| holds.binary_search(k).is_err());
            Poly::constant(Rational::one()).sub(&Poly::sum_of_vars(miss))
        } else {
            Poly::sum_of_vars(holds)
        };
        self.cache.insert(e.clone(), p.clone());
        Ok(p)
    }

    fn term(&mut self, t: &Term) -> Result<Poly, SatError> {
        Ok(match t {
            Term::Prob { event, given } => {
                if *given != Event::Top {
                    return Err(SatError::NotConditionFree);
                }
                self.prob(event)?
            }
            Term::Sum { .. } => return Err(SatError::NotSumFree),
            Term::Add(a, b) => self.term(a)?.add(&self.term(b)?),
            Term::Mul(a, b) => self.term(a)?.mul(&self.term(b)?),
            Term::Neg(a) => self.term(a)?.neg(),
            Term::Sym(s) => Poly::constant(Rational::from_integer(self.interp.value(s)?.into())),
        })
    }

    fn formula(&mut self, f: &Formula) -> Result<BoolExpr, SatError> {
        Ok(match f {
            Formula::Eq(a, b) => BoolExpr::Const(self.interp.value(a)? == self.interp.value(b)?),
            Formula::Geq(a, b) => {
                let poly = self.term(a)?.sub(&self.term(b)?);
                if let Some(c) = poly.as_constant() {
                    return Ok(BoolExpr::Const(c >= Rational::zero()));
                }
                self.atoms.push(Atom { poly, rel: Rel::Ge });
                BoolExpr::Atom(self.atoms.len() - 1)
            }
            Formula::Not(x) => BoolExpr::Not(Box::new(self.formula(x)?)),
            Formula::And(a, b) => BoolExpr::And(Box::new(self.formula(a)?), Box::new(self.formula(b)?)),
        })
    }
}

/// Replaces each `P(ε)` by `Σ_{δ ∈ Δ′, δ ⊨ ε} p_δ` and each constant
/// coefficient by its value. `φ` must be closed, sum-free and free of
/// conditional probabilities.
pub fn reduce_to_constraints(
    phi: &Formula,
    interp: &Interpretation,
    interventions: &[Setting],
    support: &[Description],
    strict: bool,
) -> Result<ConstraintSystem, SatError> {
    let mut r = Reducer { interp, interventions, support, cache: HashMap::new(), atoms: Vec::new() };
    let root = r.formula(phi)?;
    let mut cs = ConstraintSystem::new(support.len(), Domain::Simplex { strict }, r.atoms, root).compact();
    cs.labels = (0..support.len()).map(|k| format!("p{}", k + 1)).collect();
    Ok(cs)
}
