//! Soundness fuzzing: random schema instances and rule applications checked
//! against random positive models.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::schemas::{check_axiom_instance, PolyTag, Schema};
use super::{blocks_of, Rule};
use crate::sat::set_partitions;
use crate::scm::{random_positive_scm, write_scm, ConstantMode, GenConfig, Scm};
use crate::semantics::valid_in_model;
use crate::syntax::{print_formula, substitute_range_var, substitute_range_var_term, Event, Formula, RangeVar, Sym, Term, Var};

/// Positive model classes the fuzzer samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum FuzzClass {
    /// `𝓜+`: ranges of 2 to `n + 1` values, `n + 1` constants mapped onto them.
    /// A one-value range would give the literal `¬V=c` probability zero.
    Positive,
    /// `𝓜_N+`: ranges of exactly `n` values, constants distinct.
    PositiveN,
}

impl FuzzClass {
    pub fn name(self, n: u32) -> String {
        match self {
            FuzzClass::Positive => "M+".into(),
            FuzzClass::PositiveN => format!("M_{}+", n),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub trials: usize,
    pub seed: u64,
    /// Constants per variable.
    pub n: u32,
    pub vars: Vec<Var>,
    pub denominator: u64,
}

impl FuzzConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        FuzzConfig { trials, seed, n: 2, vars: vec![Var::new("X"), Var::new("Y")], denominator: 12 }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Violation {
    pub formula: String,
    pub model: String,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FuzzReport {
    pub schema: String,
    pub class: String,
    pub trials: usize,
    /// Instances the schema recognizer accepted.
    pub accepted: usize,
    pub violation_count: usize,
    /// The first few countermodels.
    pub violations: Vec<Violation>,
}

const KEEP: usize = 3;

/// Corrupted schemas used as mutation tests for the fuzzer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Mutant {
    /// `EqDist` with `≡` in place of `≢`.
    EqDistWithEq,
    /// `Cond` without the factor `P(δ')`.
    CondWithoutFactor,
    /// `SumLower` without its distinctness premise.
    SumLowerWithoutPremise,
    /// `Pos` over events outside `L_cond`.
    PosOutsideCond,
    /// `Fin_N` with `N + 1`.
    FinOffByOne,
    /// `SumEquals_N` missing its last summand.
    SumEqualsMissingSummand,
    /// `EqReplace` with `≢` in place of `≡`.
    EqReplaceWithNeq,
}

pub fn mutant_schemas() -> Vec<Mutant> {
    vec![
        Mutant::EqDistWithEq,
        Mutant::CondWithoutFactor,
        Mutant::SumLowerWithoutPremise,
        Mutant::PosOutsideCond,
        Mutant::FinOffByOne,
        Mutant::SumEqualsMissingSummand,
        Mutant::EqReplaceWithNeq,
    ]
}

impl Mutant {
    /// The schema this mutant corrupts.
    pub fn original(self) -> Schema {
        match self {
            Mutant::EqDistWithEq => Schema::EqDist,
            Mutant::CondWithoutFactor => Schema::Cond,
            Mutant::SumLowerWithoutPremise => Schema::SumLower,
            Mutant::PosOutsideCond => Schema::Pos,
            Mutant::FinOffByOne => Schema::FinN,
            Mutant::SumEqualsMissingSummand => Schema::SumEqualsN,
            Mutant::EqReplaceWithNeq => Schema::EqReplace,
        }
    }
}

fn class_for(schema: Schema) -> FuzzClass {
    match schema {
        Schema::FinN | Schema::DistinctN | Schema::SumEqualsN => FuzzClass::PositiveN,
        _ => FuzzClass::Positive,
    }
}

pub(crate) fn sample_model<R: Rng>(rng: &mut R, class: FuzzClass, cfg: &FuzzConfig) -> Scm {
    let n = cfg.n as usize;
    let (range_sizes, constants) = match class {
        FuzzClass::Positive => (cfg.vars.iter().map(|_| rng.gen_range(2..=n + 1)).collect(), ConstantMode::Count(n + 1)),
        FuzzClass::PositiveN => (vec![n; cfg.vars.len()], ConstantMode::Shuffled),
    };
    let gc = GenConfig { range_sizes, outcomes: 0, denominator: cfg.denominator, edge_probability: 0.5, constants };
    random_positive_scm(rng, &cfg.vars, &gc)
}

/// Random pieces of formulas over a fixed signature.
pub(crate) struct Gen<'a, R: Rng> {
    pub rng: &'a mut R,
    pub vars: &'a [Var],
    pub n: u32,
}

impl<R: Rng> Gen<'_, R> {
    pub fn var(&mut self) -> Var {
        self.vars.choose(self.rng).expect("nonempty signature").clone()
    }

    pub fn constant(&mut self, v: &Var) -> Sym {
        Sym::constant(v, self.rng.gen_range(1..=self.n))
    }

    /// An event; atoms of `free.var` use `free` about half of the time.
    pub fn event(&mut self, depth: u32, free: Option<&Sym>) -> Event {
        if depth == 0 || self.rng.gen_bool(0.4) {
            let v = self.var();
            let s = match free {
                Some(f) if f.var() == &v && self.rng.gen_bool(0.5) => f.clone(),
                _ => self.constant(&v),
            };
            return Event::atom(s);
        }
        match self.rng.gen_range(0..3) {
            0 => Event::not(self.event(depth - 1, free)),
            _ => Event::and(self.event(depth - 1, free), self.event(depth - 1, free)),
        }
    }

    /// `⊤` or a conjunction of literals over distinct variables.
    pub fn cond(&mut self, free: Option<&Sym>) -> Event {
        let mut lits = Vec::new();
        for v in self.vars {
            if self.rng.gen_bool(0.4) {
                let s = match free {
                    Some(f) if f.var() == v && self.rng.gen_bool(0.5) => f.clone(),
                    _ => Sym::constant(v, self.rng.gen_range(1..=self.n)),
                };
                let a = Event::atom(s);
                lits.push(if self.rng.gen_bool(0.3) { Event::not(a) } else { a });
            }
        }
        if lits.is_empty() {
            Event::Top
        } else {
            Event::conj(lits)
        }
    }

    pub fn nonempty_cond(&mut self) -> Event {
        loop {
            let c = self.cond(None);
            if c != Event::Top {
                return c;
            }
        }
    }

    pub fn prob(&mut self, free: Option<&Sym>) -> Term {
        let e = self.event(2, free);
        let g = if self.rng.gen_bool(0.3) { self.cond(free) } else { Event::Top };
        Term::cond(e, g)
    }

    /// A term without negation or symbol coefficients.
    pub fn term(&mut self, depth: u32, free: Option<&Sym>) -> Term {
        if depth == 0 {
            return self.prob(free);
        }
        match self.rng.gen_range(0..5) {
            0 => Term::add(self.term(depth - 1, free), self.term(depth - 1, free)),
            1 => Term::mul(self.term(depth - 1, free), self.term(depth - 1, free)),
            2 => Term::numeral(self.rng.gen_range(0..3)),
            _ => self.prob(free),
        }
    }

    pub fn comparison(&mut self, free: Option<&Sym>) -> Formula {
        let f = Formula::geq(self.term(1, free), self.term(1, free));
        if self.rng.gen_bool(0.3) {
            Formula::not(f)
        } else {
            f
        }
    }

    /// A formula mentioning `free` in comparisons or symbol equalities.
    pub fn formula(&mut self, depth: u32, free: Option<&Sym>) -> Formula {
        if depth > 0 {
            match self.rng.gen_range(0..4) {
                0 => return Formula::not(self.formula(depth - 1, free)),
                1 => return Formula::and(self.formula(depth - 1, free), self.formula(depth - 1, free)),
                _ => {}
            }
        }
        if let Some(f) = free {
            if self.rng.gen_bool(0.15) {
                let c = self.constant(f.var());
                return Formula::eq(f.clone(), c);
            }
        }
        self.comparison(free)
    }

    fn distinct_pairs(&self, var: &Var, set: &[u32]) -> Option<Formula> {
        let mut out = Vec::new();
        for (k, &i) in set.iter().enumerate() {
            for &j in &set[k + 1..] {
                out.push(Formula::neq(Sym::constant(var, i), Sym::constant(var, j)));
            }
        }
        Formula::conj(out)
    }
}

fn at(t: &Term, bound: &RangeVar, c: u32) -> Term {
    substitute_range_var_term(t, bound, &Sym::constant(&bound.var, c)).expect("same variable")
}

fn bound_var<R: Rng>(g: &mut Gen<'_, R>) -> (RangeVar, Sym) {
    let v = g.var();
    let rv = RangeVar::new(&v, 9);
    let s = Sym::Range(rv.clone());
    (rv, s)
}

/// A random instance of `schema`.
pub(crate) fn instance<R: Rng>(schema: Schema, g: &mut Gen<'_, R>) -> Formula {
    match schema {
        Schema::EqReflex => {
            let v = g.var();
            let c = g.constant(&v);
            Formula::eq(c.clone(), c)
        }
        Schema::EqReplace => eq_replace(g, false),
        Schema::EqDist => {
            let v = g.var();
            let (c, d) = (g.constant(&v), g.constant(&v));
            Formula::implies(
                Formula::neq(c.clone(), d.clone()),
                Formula::approx(Term::prob(Event::and(Event::atom(c), Event::atom(d))), Term::zero()),
            )
        }
        Schema::Cond => cond(g, true),
        Schema::SumLower => sum_lower(g, true),
        Schema::Pos => Formula::gt(Term::prob(g.nonempty_cond()), Term::zero()),
        Schema::FinN => {
            let (rv, _) = bound_var(g);
            Formula::approx(Term::sum(rv, Term::one()), Term::numeral(g.n as u64))
        }
        Schema::DistinctN => {
            let v = g.var();
            let all: Vec<u32> = (1..=g.n).collect();
            g.distinct_pairs(&v, &all).unwrap_or_else(|| Formula::eq(Sym::constant(&v, 1), Sym::constant(&v, 1)))
        }
        Schema::SumEqualsN => sum_equals(g, g.n),
        Schema::PolyBase(tag) => poly(tag, g),
    }
}

fn eq_replace<R: Rng>(g: &mut Gen<'_, R>, negated: bool) -> Formula {
    let (rv, s) = bound_var(g);
    let phi = g.formula(1, Some(&s));
    let (c, d) = (g.constant(&rv.var), g.constant(&rv.var));
    let a = substitute_range_var(&phi, &rv, &c).expect("same variable");
    let b = substitute_range_var(&phi, &rv, &d).expect("same variable");
    let premise = if negated { Formula::neq(c, d) } else { Formula::eq(c, d) };
    Formula::implies(premise, Formula::implies(a, b))
}

fn cond<R: Rng>(g: &mut Gen<'_, R>, with_factor: bool) -> Formula {
    let e = g.event(2, None);
    let c = g.cond(None);
    let t = g.term(1, None);
    let left = Formula::geq(Term::cond(e.clone(), c.clone()), t.clone());
    let scaled = if with_factor { Term::mul(t, Term::prob(c.clone())) } else { t };
    let right = Formula::geq(Term::prob(Event::and(e, c)), scaled);
    Formula::iff(left, right)
}

fn subset<R: Rng>(g: &mut Gen<'_, R>, min: usize) -> Vec<u32> {
    loop {
        let s: Vec<u32> = (1..=g.n).filter(|_| g.rng.gen_bool(0.5)).collect();
        if s.len() >= min {
            return s;
        }
    }
}

fn sum_lower<R: Rng>(g: &mut Gen<'_, R>, with_premise: bool) -> Formula {
    let (rv, s) = bound_var(g);
    let t = g.term(1, Some(&s));
    let set = subset(g, if with_premise { 0 } else { 2.min(g.n as usize) });
    let parts: Vec<Term> = set.iter().map(|&c| at(&t, &rv, c)).collect();
    let body = Formula::geq(Term::sum(rv.clone(), t), Term::sum_of(parts));
    match g.distinct_pairs(&rv.var, &set) {
        Some(p) if with_premise => Formula::implies(p, body),
        _ => body,
    }
}

fn sum_equals<R: Rng>(g: &mut Gen<'_, R>, upto: u32) -> Formula {
    let (rv, s) = bound_var(g);
    let t = g.term(1, Some(&s));
    let parts: Vec<Term> = (1..=upto).map(|c| at(&t, &rv, c)).collect();
    Formula::approx(Term::sum(rv, t), Term::sum_of(parts))
}

fn poly<R: Rng>(tag: PolyTag, g: &mut Gen<'_, R>) -> Formula {
    match tag {
        PolyTag::Taut => {
            let a = g.formula(1, None);
            let b = g.formula(1, None);
            match g.rng.gen_range(0..4) {
                0 => Formula::implies(a.clone(), a),
                1 => Formula::implies(Formula::and(a.clone(), b), a),
                2 => Formula::not(Formula::and(a.clone(), Formula::not(a))),
                _ => Formula::implies(a.clone(), Formula::implies(b, a)),
            }
        }
        PolyTag::Arith => {
            let (a, b, c) = (g.term(1, None), g.term(1, None), g.term(1, None));
            match g.rng.gen_range(0..4) {
                0 => Formula::implies(
                    Formula::and(Formula::geq(a.clone(), b.clone()), Formula::geq(b, c.clone())),
                    Formula::geq(a, c),
                ),
                1 => Formula::implies(
                    Formula::geq(a.clone(), b.clone()),
                    Formula::geq(Term::add(a, c.clone()), Term::add(b, c)),
                ),
                2 => Formula::approx(
                    Term::mul(Term::add(a.clone(), b.clone()), c.clone()),
                    Term::add(Term::mul(c.clone(), a), Term::mul(b, c)),
                ),
                _ => Formula::not(Formula::and(Formula::gt(a.clone(), b.clone()), Formula::geq(b, a))),
            }
        }
        PolyTag::NonNeg => Formula::geq(g.prob(None), Term::zero()),
        PolyTag::Add => {
            let (d, e, c) = (g.event(1, None), g.event(1, None), g.cond(None));
            Formula::approx(
                Term::add(
                    Term::cond(Event::and(d.clone(), e.clone()), c.clone()),
                    Term::cond(Event::and(d.clone(), Event::not(e)), c.clone()),
                ),
                Term::cond(d, c),
            )
        }
        PolyTag::Dist => {
            let (a, b, c) = (g.event(1, None), g.event(1, None), g.cond(None));
            let (l, r) = match g.rng.gen_range(0..3) {
                0 => (Event::and(a.clone(), b.clone()), Event::and(b, a)),
                1 => (Event::not(Event::not(a.clone())), a),
                _ => (
                    Event::not(Event::and(a.clone(), b.clone())),
                    Event::or(Event::not(a), Event::not(b)),
                ),
            };
            Formula::approx(Term::cond(l, c.clone()), Term::cond(r, c))
        }
    }
}

fn mutant_instance<R: Rng>(m: Mutant, g: &mut Gen<'_, R>) -> Formula {
    match m {
        Mutant::EqDistWithEq => {
            let v = g.var();
            let (c, d) = (g.constant(&v), g.constant(&v));
            Formula::implies(
                Formula::eq(c.clone(), d.clone()),
                Formula::approx(Term::prob(Event::and(Event::atom(c), Event::atom(d))), Term::zero()),
            )
        }
        Mutant::CondWithoutFactor => cond(g, false),
        Mutant::SumLowerWithoutPremise => sum_lower(g, false),
        Mutant::PosOutsideCond => {
            let v = g.var();
            let c = g.constant(&v);
            Formula::gt(Term::prob(Event::and(Event::not(Event::atom(c.clone())), Event::atom(c))), Term::zero())
        }
        Mutant::FinOffByOne => {
            let (rv, _) = bound_var(g);
            Formula::approx(Term::sum(rv, Term::one()), Term::numeral(g.n as u64 + 1))
        }
        Mutant::SumEqualsMissingSummand => sum_equals(g, g.n - 1),
        Mutant::EqReplaceWithNeq => eq_replace(g, true),
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run(
    name: String,
    class: FuzzClass,
    cfg: &FuzzConfig,
    make: impl Fn(&mut Gen<'_, ChaCha8Rng>) -> Formula + Sync,
    recognized: impl Fn(&Formula) -> bool + Sync,
) -> FuzzReport {
    let outcomes: Vec<(bool, Option<Violation>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial);
            let scm = sample_model(&mut rng, class, cfg);
            let f = make(&mut Gen { rng: &mut rng, vars: &cfg.vars, n: cfg.n });
            let ok = valid_in_model(&scm, &f).unwrap_or(false);
            let violation = (!ok).then(|| Violation { formula: print_formula(&f), model: write_scm(&scm) });
            (recognized(&f), violation)
        })
        .collect();
    let accepted = outcomes.iter().filter(|(a, _)| *a).count();
    let all: Vec<Violation> = outcomes.into_iter().filter_map(|(_, v)| v).collect();
    FuzzReport {
        schema: name,
        class: class.name(cfg.n),
        trials: cfg.trials,
        accepted,
        violation_count: all.len(),
        violations: all.into_iter().take(KEEP).collect(),
    }
}

/// Samples instances of `schema` and positive models of its class, and
/// checks each instance is valid in its model.
pub fn soundness_fuzz(schema: Schema, cfg: &FuzzConfig) -> FuzzReport {
    let bound = Some(cfg.n);
    run(
        schema.to_string(),
        class_for(schema),
        cfg,
        |g| instance(schema, g),
        |f| check_axiom_instance(f, schema, bound).is_ok(),
    )
}

/// As [`soundness_fuzz`] for a corrupted schema; `accepted` counts the
/// instances the original recognizer wrongly accepts.
pub fn mutant_fuzz(m: Mutant, cfg: &FuzzConfig) -> FuzzReport {
    let schema = m.original();
    let bound = Some(cfg.n);
    run(
        format!("{:?}", m),
        class_for(schema),
        cfg,
        |g| mutant_instance(m, g),
        |f| check_axiom_instance(f, schema, bound).is_ok(),
    )
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RuleFuzzReport {
    pub rule: Rule,
    pub trials: usize,
    /// Trials in which every premise was valid in the sampled model.
    pub premises_held: usize,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

/// One sampled application: premises and conclusion.
fn rule_instance<R: Rng>(rule: Rule, g: &mut Gen<'_, R>) -> Option<(Vec<Formula>, Formula)> {
    match rule {
        Rule::MP => {
            let a = g.formula(1, None);
            let b = g.formula(1, None);
            Some((vec![a.clone(), Formula::implies(a, b.clone())], b))
        }
        Rule::FreeElim => {
            let (rv, s) = bound_var(g);
            let phi = g.formula(1, Some(&s));
            let c = g.constant(&rv.var);
            let concl = substitute_range_var(&phi, &rv, &c).expect("same variable");
            Some((vec![phi], concl))
        }
        Rule::FreeIntro => {
            let (rv, s) = bound_var(g);
            let phi = g.formula(1, Some(&s));
            let premises = (1..=g.n)
                .map(|j| substitute_range_var(&phi, &rv, &Sym::constant(&rv.var, j)).expect("same variable"))
                .collect();
            Some((premises, phi))
        }
        Rule::SumUpper => {
            let (rv, s) = bound_var(g);
            let t = g.term(1, Some(&s));
            let upper = g.term(1, None);
            let mut premises = Vec::new();
            for n in 1..=g.n {
                for rgs in set_partitions(n as usize) {
                    premises.push(super::sum_upper_premise(None, &upper, &rv, &t, &blocks_of(&rgs)).ok()?);
                }
            }
            Some((premises, Formula::geq(upper, Term::sum(rv, t))))
        }
        Rule::Unity => {
            let q = g.rng.gen_range(1..4);
            let vars: Vec<Var> = g.vars.to_vec();
            let lhs = |e: Event| Term::mul(Term::sub(Term::one(), Term::prob(e)), Term::numeral(4));
            let e_star = Event::conj(vars.iter().map(|v| {
                let a = Event::atom(Sym::constant(v, 1));
                Event::or(a.clone(), Event::not(a))
            }));
            let premises = (1..=g.n)
                .map(|n| {
                    let e = Event::conj(vars.iter().map(|v| Event::disj((1..=n).map(|i| Event::atom(Sym::constant(v, i))))));
                    Formula::gt(lhs(e), Term::numeral(q))
                })
                .collect();
            Some((premises, Formula::gt(lhs(e_star), Term::numeral(q))))
        }
        _ => None,
    }
}

/// Local soundness of a rule: whenever every premise is valid in a sampled
/// positive model, so is the conclusion.
pub fn rule_fuzz(rule: Rule, cfg: &FuzzConfig) -> RuleFuzzReport {
    let outcomes: Vec<(bool, Option<Violation>)> = (0..cfg.trials)
        .into_par_iter()
        .filter_map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial);
            let scm = sample_model(&mut rng, FuzzClass::Positive, cfg);
            // Premise families range over every constant the model interprets.
            let (premises, concl) = rule_instance(rule, &mut Gen { rng: &mut rng, vars: &cfg.vars, n: cfg.n + 1 })?;
            let held = premises.iter().all(|p| valid_in_model(&scm, p).unwrap_or(false));
            if !held {
                return Some((false, None));
            }
            let ok = valid_in_model(&scm, &concl).unwrap_or(false);
            Some((true, (!ok).then(|| Violation { formula: print_formula(&concl), model: write_scm(&scm) })))
        })
        .collect();
    let premises_held = outcomes.iter().filter(|(h, _)| *h).count();
    let all: Vec<Violation> = outcomes.into_iter().filter_map(|(_, v)| v).collect();
    RuleFuzzReport {
        rule,
        trials: cfg.trials,
        premises_held,
        violation_count: all.len(),
        violations: all.into_iter().take(KEEP).collect(),
    }
}
