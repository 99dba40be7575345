//! Extended-real denotations of terms and the satisfaction relations.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::num::{fmt_pq, Rational};
use crate::scm::{random_positive_scm, random_scm, ConstantMode, GenConfig, Scm, ScmError};
use crate::syntax::{classify_fragment, free_vars, Event, Formula, RangeVar, Sequent, Sym, Term, Var};

/// `ℝ ∪ {∞, −∞, ⊥}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendedReal {
    Finite(Rational),
    PosInf,
    NegInf,
    Undef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtOp {
    Add,
    Mul,
    Neg,
}

impl ExtendedReal {
    pub fn finite(r: Rational) -> Self {
        ExtendedReal::Finite(r)
    }

    pub fn is_undef(&self) -> bool {
        matches!(self, ExtendedReal::Undef)
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            ExtendedReal::Finite(r) => Some(r),
            _ => None,
        }
    }

    fn sign(&self) -> i8 {
        match self {
            ExtendedReal::Finite(r) if r.is_zero() => 0,
            ExtendedReal::Finite(r) if r.is_positive() => 1,
            ExtendedReal::Finite(_) => -1,
            ExtendedReal::PosInf => 1,
            ExtendedReal::NegInf => -1,
            ExtendedReal::Undef => 0,
        }
    }

    fn infinity(sign: i8) -> Self {
        if sign > 0 {
            ExtendedReal::PosInf
        } else {
            ExtendedReal::NegInf
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(&self, other: &Self) -> Self {
        use ExtendedReal::*;
        match (self, other) {
            (Undef, _) | (_, Undef) => Undef,
            (Finite(a), Finite(b)) => Finite(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => Finite(Rational::zero()),
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(&self, other: &Self) -> Self {
        use ExtendedReal::*;
        match (self, other) {
            (Undef, _) | (_, Undef) => Undef,
            (Finite(a), Finite(b)) => Finite(a * b),
            _ => match self.sign() * other.sign() {
                0 => Finite(Rational::zero()),
                s => ExtendedReal::infinity(s),
            },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(&self) -> Self {
        use ExtendedReal::*;
        match self {
            Finite(a) => Finite(-a),
            PosInf => NegInf,
            NegInf => PosInf,
            Undef => Undef,
        }
    }

    /// Order on defined values; `None` when either side is `⊥`.
    pub fn compare(&self, other: &Self) -> Option<Ordering> {
        use ExtendedReal::*;
        match (self, other) {
            (Undef, _) | (_, Undef) => None,
            (Finite(a), Finite(b)) => Some(a.cmp(b)),
            (PosInf, PosInf) | (NegInf, NegInf) => Some(Ordering::Equal),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
        }
    }
}

pub fn ext_op(op: ExtOp, a: &ExtendedReal, b: &ExtendedReal) -> ExtendedReal {
    match op {
        ExtOp::Add => a.add(b),
        ExtOp::Mul => a.mul(b),
        ExtOp::Neg => a.neg(),
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(r) => f.write_str(&fmt_pq(r)),
            ExtendedReal::PosInf => f.write_str("inf"),
            ExtendedReal::NegInf => f.write_str("-inf"),
            ExtendedReal::Undef => f.write_str("undef"),
        }
    }
}

/// A partial map from range variables to values.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Assignment(pub BTreeMap<RangeVar, u32>);

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    pub fn with(&self, v: &RangeVar, value: u32) -> Self {
        let mut out = self.clone();
        out.0.insert(v.clone(), value);
        out
    }

    pub fn get(&self, v: &RangeVar) -> Option<u32> {
        self.0.get(v).copied()
    }

    pub fn to_json_map(&self) -> BTreeMap<String, u32> {
        self.0.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{}={}", k, v)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("range variable {0} is not assigned")]
    Unassigned(String),
    #[error(transparent)]
    Model(#[from] ScmError),
}

fn resolve(scm: &Scm, iota: &Assignment, s: &Sym) -> Result<u32, ScmError> {
    match s {
        Sym::Const { var, index } => scm.constant_value(var, *index),
        Sym::Range(rv) => iota.get(rv).ok_or_else(|| ScmError::FreeRangeVariable(rv.to_string())),
    }
}

fn event_prob(scm: &Scm, iota: &Assignment, e: &Event) -> Result<Rational, EvalError> {
    scm.event_probability_with(e, &|s| resolve(scm, iota, s)).map_err(|err| match err {
        ScmError::FreeRangeVariable(v) => EvalError::Unassigned(v),
        other => EvalError::Model(other),
    })
}

/// `⟦t⟧` at `(𝔐, ι)`.
pub fn eval_term(scm: &Scm, iota: &Assignment, t: &Term) -> Result<ExtendedReal, EvalError> {
    Ok(match t {
        Term::Prob { event, given } => {
            if *given == Event::Top {
                ExtendedReal::Finite(event_prob(scm, iota, event)?)
            } else {
                let denom = event_prob(scm, iota, given)?;
                if denom.is_zero() {
                    ExtendedReal::Undef
                } else {
                    let joint = event_prob(scm, iota, &Event::and(event.clone(), given.clone()))?;
                    ExtendedReal::Finite(joint / denom)
                }
            }
        }
        Term::Sum { bound, body } => {
            let range = scm.range_of(&bound.var)?.to_vec();
            let mut acc = ExtendedReal::Finite(Rational::zero());
            for n in range {
                let v = eval_term(scm, &iota.with(bound, n), body)?;
                acc = acc.add(&v);
            }
            acc
        }
        Term::Add(a, b) => eval_term(scm, iota, a)?.add(&eval_term(scm, iota, b)?),
        Term::Mul(a, b) => eval_term(scm, iota, a)?.mul(&eval_term(scm, iota, b)?),
        Term::Neg(a) => eval_term(scm, iota, a)?.neg(),
        Term::Sym(s) => {
            let v = match s {
                Sym::Const { var, index } => scm.constant_value(var, *index)?,
                Sym::Range(rv) => iota.get(rv).ok_or_else(|| EvalError::Unassigned(rv.to_string()))?,
            };
            ExtendedReal::Finite(Rational::from_integer(v.into()))
        }
    })
}

pub fn satisfies(scm: &Scm, iota: &Assignment, f: &Formula) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::Eq(a, b) => {
            let va = resolve(scm, iota, a).map_err(|e| match e {
                ScmError::FreeRangeVariable(v) => EvalError::Unassigned(v),
                other => EvalError::Model(other),
            })?;
            let vb = resolve(scm, iota, b).map_err(|e| match e {
                ScmError::FreeRangeVariable(v) => EvalError::Unassigned(v),
                other => EvalError::Model(other),
            })?;
            va == vb
        }
        Formula::Geq(a, b) => {
            let va = eval_term(scm, iota, a)?;
            let vb = eval_term(scm, iota, b)?;
            matches!(va.compare(&vb), Some(Ordering::Greater | Ordering::Equal))
        }
        Formula::Not(x) => !satisfies(scm, iota, x)?,
        Formula::And(a, b) => satisfies(scm, iota, a)? && satisfies(scm, iota, b)?,
    })
}

/// All assignments of `vars` into the model's ranges, lexicographic by
/// (variable position, index, value).
pub fn assignments(scm: &Scm, vars: &[RangeVar]) -> Result<Vec<Assignment>, EvalError> {
    let mut sorted: Vec<&RangeVar> = vars.iter().collect();
    let pos = |rv: &RangeVar| scm.var_index(&rv.var).unwrap_or(usize::MAX);
    sorted.sort_by_key(|rv| (pos(rv), rv.index));
    let mut out = vec![Assignment::new()];
    for rv in sorted {
        let range = scm.range_of(&rv.var)?;
        out = out.into_iter().flat_map(|a| range.iter().map(move |&n| a.with(rv, n))).collect();
    }
    Ok(out)
}

/// The first assignment (in enumeration order) at which `φ` fails.
pub fn first_violation(scm: &Scm, f: &Formula) -> Result<Option<Assignment>, EvalError> {
    let fv: Vec<RangeVar> = free_vars(f).into_iter().collect();
    let all = assignments(scm, &fv)?;
    let results: Vec<Result<bool, EvalError>> = if all.len() > 16 {
        all.par_iter().map(|a| satisfies(scm, a, f)).collect()
    } else {
        all.iter().map(|a| satisfies(scm, a, f)).collect()
    };
    for (a, r) in all.into_iter().zip(results) {
        if !r? {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// `𝔐 ⊨ φ`: satisfied under every assignment of its free variables.
pub fn valid_in_model(scm: &Scm, f: &Formula) -> Result<bool, EvalError> {
    Ok(first_violation(scm, f)?.is_none())
}

/// Some premise is not valid in the model, or the conclusion is.
pub fn satisfies_sequent(scm: &Scm, s: &Sequent) -> Result<bool, EvalError> {
    for p in &s.premises {
        if !valid_in_model(scm, p)? {
            return Ok(true);
        }
    }
    valid_in_model(scm, &s.conclusion)
}

/// Size part of a model class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClassSize {
    /// `𝓜`: any (runtime-finite) model.
    Any,
    /// `𝓜_fin`.
    Fin,
    /// `𝓜_N`: every range has exactly `N` values.
    Exactly(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModelClass {
    pub size: ClassSize,
    pub positive: bool,
}

impl ModelClass {
    pub const ANY: ModelClass = ModelClass { size: ClassSize::Any, positive: false };

    pub fn contains(&self, scm: &Scm) -> bool {
        if scm.validate().is_err() {
            return false;
        }
        if let ClassSize::Exactly(n) = self.size {
            if (0..scm.vars().len()).any(|i| scm.range(i).len() != n as usize) {
                return false;
            }
        }
        !self.positive || scm.check_positivity()
    }
}

impl std::str::FromStr for ModelClass {
    type Err = String;

    /// `M`, `M_fin`, `M_N` (e.g. `M_2`), each optionally followed by `+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (base, positive) = match s.strip_suffix('+') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let size = match base {
            "M" => ClassSize::Any,
            "M_fin" => ClassSize::Fin,
            _ => match base.strip_prefix("M_").and_then(|n| n.parse::<u32>().ok()) {
                Some(n) if n >= 1 => ClassSize::Exactly(n),
                _ => return Err(format!("unknown model class `{}` (use M, M_fin, M_N, with optional +)", s)),
            },
        };
        Ok(ModelClass { size, positive })
    }
}

/// Parameters of the random countermodel search.
#[derive(Clone, Debug)]
pub struct SearchBudget {
    pub trials: usize,
    /// Candidate range sizes (one is drawn per variable per trial).
    pub range_sizes: Vec<usize>,
    /// Maximum number of exogenous outcomes for non-positive classes.
    pub max_outcomes: usize,
    pub denominator: u64,
    pub seed: u64,
    pub class: ModelClass,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            trials: 2000,
            range_sizes: vec![2, 3],
            max_outcomes: 4,
            denominator: 12,
            seed: 0,
            class: ModelClass::ANY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Countermodel {
    pub scm: Scm,
    /// Assignment at which the conclusion fails.
    pub assignment: Assignment,
    pub trial: usize,
}

fn max_constant_index(s: &Sequent) -> u32 {
    s.premises.iter().chain(std::iter::once(&s.conclusion)).map(|f| classify_fragment(f).max_constant).max().unwrap_or(0)
}

/// Samples a model for trial `trial` of a countermodel search.
pub fn sample_model(vars: &[Var], budget: &SearchBudget, needed_constants: u32, trial: usize) -> Scm {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    rng.set_stream(trial as u64);
    use rand::seq::SliceRandom;
    use rand::Rng;
    // The generator wires variables in slice order, so shuffle it to reach every causal order.
    let mut order = vars.to_vec();
    order.shuffle(&mut rng);
    let vars = &order[..];
    let cap = match budget.class.size {
        ClassSize::Exactly(n) => n as usize,
        _ => usize::MAX,
    };
    let choices: Vec<usize> = budget.range_sizes.iter().copied().filter(|&r| r >= 1 && r <= cap).collect();
    let choices = if choices.is_empty() { vec![1] } else { choices };
    let range_sizes: Vec<usize> = vars.iter().map(|_| choices[rng.gen_range(0..choices.len())]).collect();
    let cfg = GenConfig {
        range_sizes: range_sizes.clone(),
        outcomes: rng.gen_range(1..=budget.max_outcomes.max(1)),
        denominator: budget.denominator,
        edge_probability: 0.5,
        constants: ConstantMode::Shuffled,
    };
    let scm = if budget.class.positive {
        random_positive_scm(&mut rng, vars, &cfg)
    } else {
        random_scm(&mut rng, vars, &cfg)
    };
    // Re-draw constants to match the class and the symbols used.
    let count = |r: usize| match budget.class.size {
        ClassSize::Exactly(n) => n as usize,
        _ => r.max(needed_constants as usize),
    };
    let constants = range_sizes
        .iter()
        .map(|&r| {
            let range: Vec<u32> = (1..=r as u32).collect();
            let mut c = range.clone();
            while c.len() < count(r) {
                c.push(range[rng.gen_range(0..r)]);
            }
            c.shuffle(&mut rng);
            c
        })
        .collect();
    scm.with_constants(constants).expect("constants lie in the ranges")
}

/// Random search for a model in the budget's class where every premise is
/// valid and the conclusion is not. The first hit in trial order is returned,
/// independent of thread count.
pub fn find_countermodel(s: &Sequent, budget: &SearchBudget) -> Option<Countermodel> {
    let vars: Vec<Var> = s.variables().into_iter().collect();
    let vars = if vars.is_empty() { vec![Var::new("X")] } else { vars };
    let needed = max_constant_index(s);
    (0..budget.trials).into_par_iter().find_map_first(|trial| {
        let scm = sample_model(&vars, budget, needed, trial);
        if !budget.class.contains(&scm) {
            return None;
        }
        for p in &s.premises {
            if !valid_in_model(&scm, p).ok()? {
                return None;
            }
        }
        let bad = first_violation(&scm, &s.conclusion).ok()??;
        Some(Countermodel { scm, assignment: bad, trial })
    })
}

/// One JSON-lines evaluation trace record.
#[derive(Serialize)]
struct TraceRecord<'a> {
    term: &'a str,
    assignment: BTreeMap<String, u32>,
    value: String,
}

pub fn trace_line(term: &str, iota: &Assignment, value: &ExtendedReal) -> String {
    serde_json::to_string(&TraceRecord { term, assignment: iota.to_json_map(), value: value.to_string() })
        .expect("trace serializes")
}
