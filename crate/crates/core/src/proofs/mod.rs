//! Proof scripts for the axiom systems over the positive probabilistic
//! language with sums, and a checker for them.
//!
//! A script is line oriented:
//!
//! ```text
//! vars: X
//! hyp: P(X=c1) <= 1/{n}
//! G: P(X=c1) <= 1/{n} BY hyp 0
//! L1: P(X=c1) <= 0 BY rule Conv FROM G
//! ```
//!
//! Lines whose text mentions `{n}` are generators: one line per positive
//! integer `n`, checked for every `n` an infinitary rule asks for.

pub mod arith;
mod corpus;
mod fuzz;
mod schemas;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::sat::set_partitions;
use crate::syntax::{
    classify_fragment, free_vars, parse_formula, rename_bound_canonical, substitute_event, substitute_range_var,
    Event, Formula, Signature, Sym, Term, Var,
};
use arith::{literal, positive_multiple, strict_literal, Leaves};

pub use corpus::{corpus_entry, corpus_names, CorpusEntry, CORPUS};
pub use fuzz::{
    mutant_fuzz, mutant_schemas, rule_fuzz, soundness_fuzz, FuzzClass, FuzzConfig, FuzzReport, Mutant, RuleFuzzReport, Violation,
};
pub use schemas::{check_axiom_instance, events_equivalent, in_circle, PolyTag, Schema};

/// Default truncation bound for infinitary rules.
pub const DEFAULT_N_MAX: u32 = 64;

/// Largest `n` checked for `SumUpper` premises over an unbounded signature.
pub const SUM_UPPER_OPEN_LIMIT: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Rule {
    MP,
    Conv,
    Unity,
    SumUpper,
    Fin,
    FreeElim,
    FreeIntro,
    /// Discharges an assumption: from `φ` assumed and `ψ` derived, `φ → ψ`.
    Deduction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Finitary,
    /// Finitely many premises once the signature has finitely many constants.
    FinitaryWhenBounded,
    Infinitary,
}

impl Rule {
    pub const ALL: [Rule; 8] =
        [Rule::MP, Rule::Conv, Rule::Unity, Rule::SumUpper, Rule::Fin, Rule::FreeElim, Rule::FreeIntro, Rule::Deduction];

    pub fn arity(self) -> Arity {
        match self {
            Rule::MP | Rule::FreeElim | Rule::Deduction => Arity::Finitary,
            Rule::Unity | Rule::SumUpper | Rule::FreeIntro => Arity::FinitaryWhenBounded,
            Rule::Conv | Rule::Fin => Arity::Infinitary,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule `{}`", s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Base {
    /// `AX`: no finiteness principle.
    Plain,
    /// `AX_N`: the axiom `Fin_N`.
    Bounded,
    /// `AX_fin`: the rule `Fin`.
    Fin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Extra {
    Distinct,
    SumEquals,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct System {
    pub name: String,
    pub base: Base,
    /// Closed systems lack `FreeElim` and `FreeIntro` and admit only closed formulas.
    pub closed: bool,
    pub extra: Option<Extra>,
    /// Constants per variable, when the signature is finite.
    pub bound: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProofError {
    #[error("unknown system: {0}")]
    System(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
}

impl System {
    /// Names such as `AX`, `AX_closed`, `AX_2`, `AX_N_closed`, `AX_fin` with an
    /// optional `+Distinct` or `+SumEquals`. `n` fixes the number of constants.
    pub fn parse(name: &str, n: Option<u32>) -> Result<System, ProofError> {
        let err = |m: &str| ProofError::System(format!("{}: {}", name, m));
        if n == Some(0) {
            return Err(err("the number of constants must be positive"));
        }
        let (core, extra) = match name.split_once('+') {
            None => (name, None),
            Some((core, x)) => {
                let x = x.trim();
                let extra = if x.starts_with("Distinct") {
                    Extra::Distinct
                } else if x.starts_with("SumEquals") {
                    Extra::SumEquals
                } else {
                    return Err(err("the only extensions are +Distinct and +SumEquals"));
                };
                (core.trim(), Some(extra))
            }
        };
        let core = core.replace('^', "_");
        let closed = core.contains("_closed");
        let core = core.replacen("_closed", "", 1);
        let (base, bound) = match core.as_str() {
            "AX" => (Base::Plain, n),
            "AX_fin" => (Base::Fin, n),
            "AX_N" => (Base::Bounded, Some(n.ok_or_else(|| err("AX_N needs the number of constants"))?)),
            other => {
                let k: u32 = other
                    .strip_prefix("AX_")
                    .and_then(|k| k.parse().ok())
                    .filter(|&k| k > 0)
                    .ok_or_else(|| err("expected AX, AX_N, AX_<k> or AX_fin"))?;
                if n.is_some_and(|n| n != k) {
                    return Err(err("the system name and the number of constants disagree"));
                }
                (Base::Bounded, Some(k))
            }
        };
        if extra.is_some() && bound.is_none() {
            return Err(err("Distinct_N and SumEquals_N need the number of constants"));
        }
        Ok(System { name: name.to_string(), base, closed, extra, bound })
    }

    pub fn allows_schema(&self, s: Schema) -> bool {
        match s {
            Schema::FinN => self.base == Base::Bounded,
            Schema::DistinctN => self.extra == Some(Extra::Distinct),
            Schema::SumEqualsN => self.extra == Some(Extra::SumEquals),
            _ => true,
        }
    }

    pub fn allows_rule(&self, r: Rule) -> bool {
        match r {
            Rule::Fin => self.base == Base::Fin,
            Rule::FreeElim | Rule::FreeIntro => !self.closed,
            _ => true,
        }
    }

    pub fn signature(&self, vars: &[String]) -> Result<Signature, String> {
        match self.bound {
            Some(n) => Signature::bounded(vars, n),
            None => Signature::unbounded(vars),
        }
        .map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Axiom(Schema),
    Rule(Rule, Vec<String>),
    Hyp(usize),
    Assume,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptLine {
    /// 1-based line number in the source text.
    pub number: usize,
    pub label: String,
    pub formula: String,
    pub justification: Justification,
    pub generator: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProofScript {
    pub vars: Vec<String>,
    /// Hypotheses `Γ`; texts containing `{n}` are families.
    pub hyps: Vec<String>,
    pub goal: Option<String>,
    pub lines: Vec<ScriptLine>,
}

const PARAM: &str = "{n}";

fn instance_text(text: &str, n: u32) -> String {
    text.replace(PARAM, &n.to_string())
}

fn parse_justification(text: &str) -> Result<Justification, String> {
    let text = text.trim();
    let (head, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let rest = rest.trim();
    match head {
        "axiom" => rest.parse().map(Justification::Axiom),
        "assume" if rest.is_empty() => Ok(Justification::Assume),
        "hyp" => rest.parse().map(Justification::Hyp).map_err(|_| format!("bad hypothesis index `{}`", rest)),
        "rule" => {
            let (name, from) = match rest.split_once(" FROM ") {
                Some((name, from)) => (name.trim(), from),
                None => (rest, ""),
            };
            let rule: Rule = name.parse()?;
            let refs = from.split([',', ' ']).map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
            Ok(Justification::Rule(rule, refs))
        }
        _ => Err(format!("unknown justification `{}`", text)),
    }
}

pub fn parse_script(text: &str) -> Result<ProofScript, ProofError> {
    let mut script = ProofScript::default();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let err = |message: String| ProofError::Script { line: number, message };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((label, body)) = line.split_once(':') else {
            return Err(err("expected `label: formula BY justification`".into()));
        };
        let (label, body) = (label.trim(), body.trim());
        match label {
            "vars" => {
                script.vars = body.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                continue;
            }
            "hyp" => {
                script.hyps.push(body.to_string());
                continue;
            }
            "goal" => {
                script.goal = Some(body.to_string());
                continue;
            }
            _ => {}
        }
        if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
            return Err(err(format!("bad label `{}`", label)));
        }
        let Some((formula, just)) = body.rsplit_once(" BY ") else {
            return Err(err("missing ` BY ` justification".into()));
        };
        let justification = parse_justification(just).map_err(err)?;
        script.lines.push(ScriptLine {
            number,
            label: label.to_string(),
            formula: formula.trim().to_string(),
            generator: formula.contains(PARAM) || just.contains(PARAM),
            justification,
        });
    }
    Ok(script)
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ProofVerdict {
    Verified,
    /// Every line checks, but some infinitary rule was checked only for premise indices up to `n_max`.
    VerifiedBounded { rules: Vec<Rule>, n_max: u32 },
    Rejected { line: String, reason: String },
}

impl ProofVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            ProofVerdict::Verified => "verified",
            ProofVerdict::VerifiedBounded { .. } => "verified-bounded",
            ProofVerdict::Rejected { .. } => "rejected",
        }
    }

    pub fn is_accepted(&self) -> bool {
        !matches!(self, ProofVerdict::Rejected { .. })
    }
}

fn reject(line: &ScriptLine, reason: impl Into<String>) -> ProofVerdict {
    ProofVerdict::Rejected { line: format!("{} (line {})", line.label, line.number), reason: reason.into() }
}

/// Checks a formula against the language of the system and brings its
/// binders into canonical form.
fn load(text: &str, sig: &Signature, sys: &System) -> Result<Formula, String> {
    let f = parse_formula(text, sig).map_err(|e| e.to_string())?;
    let frag = classify_fragment(&f);
    if frag.causal {
        return Err("interventions are outside the probabilistic language".into());
    }
    if !frag.cond_guarded {
        return Err("a condition is not a conjunction of literals with distinct variables".into());
    }
    if sys.closed && !frag.closed {
        return Err("closed systems admit only closed formulas".into());
    }
    if let Some(n) = sys.bound {
        if frag.max_constant > n {
            return Err(format!("constant c{} outside a signature with {} constants", frag.max_constant, n));
        }
    }
    Ok(rename_bound_canonical(&f))
}

/// Premises as seen by one rule application.
enum Premises<'a> {
    Fixed(Vec<&'a Formula>),
    /// One generator line, instantiated at every index the rule asked for.
    Family(&'a BTreeMap<u32, Formula>),
}

struct Ctx<'a> {
    sys: &'a System,
    n_max: u32,
    script: &'a ProofScript,
    fixed: Vec<Option<Formula>>,
    instances: Vec<BTreeMap<u32, Formula>>,
    hyps: Vec<Result<Formula, String>>,
    sig: Signature,
}

fn splits(f: &Formula) -> Vec<(Option<&Formula>, &Formula)> {
    let mut out = Vec::with_capacity(2);
    if let Some((a, b)) = f.as_implication() {
        out.push((Some(a), b));
    }
    out.push((None, f));
    out
}

fn guard_matches(premise: &Formula, guard: Option<&Formula>) -> Option<Formula> {
    match guard {
        None => Some(premise.clone()),
        Some(g) => premise.as_implication().filter(|(a, _)| *a == g).map(|(_, b)| b.clone()),
    }
}

fn indices(upto: u32) -> Vec<u32> {
    (1..=upto).collect()
}

impl Ctx<'_> {
    /// The indices an infinitary rule needs from its premise family, and
    /// whether that set is a truncation.
    fn demand(&self, rule: Rule) -> (Vec<u32>, bool) {
        match (rule, self.sys.bound) {
            (Rule::Unity | Rule::FreeIntro, Some(n)) => (indices(n), false),
            _ => (indices(self.n_max), true),
        }
    }

    fn covered(&self, rule: Rule, premises: &Premises, matches: impl Fn(u32, &Formula) -> bool) -> Result<bool, String> {
        let (need, truncated) = self.demand(rule);
        match premises {
            Premises::Family(inst) => {
                for n in &need {
                    let f = inst.get(n).ok_or_else(|| format!("generator not instantiated at n = {}", n))?;
                    if !matches(*n, f) {
                        return Err(format!("generator instance n = {} does not have the required form", n));
                    }
                }
            }
            Premises::Fixed(list) => {
                let mut seen = BTreeSet::new();
                for (k, p) in list.iter().enumerate() {
                    let hit = need.iter().copied().find(|&n| !seen.contains(&n) && matches(n, p));
                    match hit {
                        Some(n) => {
                            seen.insert(n);
                        }
                        None => return Err(format!("premise {} matches no required instance", k + 1)),
                    }
                }
                if let Some(n) = need.iter().find(|n| !seen.contains(n)) {
                    return Err(format!("missing premise for n = {} (checked up to {})", n, need.len()));
                }
            }
        }
        Ok(truncated)
    }

    fn fixed_only<'p>(premises: &'p Premises, want: usize) -> Result<&'p [&'p Formula], String> {
        match premises {
            Premises::Fixed(list) if list.len() == want => Ok(list),
            Premises::Fixed(list) => Err(format!("expected {} premises, got {}", want, list.len())),
            Premises::Family(_) => Err("this rule cannot take a generator".into()),
        }
    }

    /// `Ok(true)` when the application was checked only up to a truncation.
    fn check_rule(&self, rule: Rule, concl: &Formula, premises: &Premises) -> Result<bool, String> {
        if !self.sys.allows_rule(rule) {
            return Err(format!("rule {} is not part of {}", rule, self.sys.name));
        }
        match rule {
            Rule::MP => {
                let p = Self::fixed_only(premises, 2)?;
                let ok = |a: &Formula, b: &Formula| b.as_implication() == Some((a, concl));
                if ok(p[0], p[1]) || ok(p[1], p[0]) {
                    Ok(false)
                } else {
                    Err("premises are not φ and φ -> ψ for the conclusion ψ".into())
                }
            }
            Rule::Deduction => {
                let p = Self::fixed_only(premises, 2)?;
                if concl.as_implication() == Some((p[0], p[1])) {
                    Ok(false)
                } else {
                    Err("conclusion must be the assumption implying the derived line".into())
                }
            }
            Rule::Conv => self.check_conv(concl, premises),
            Rule::Fin => self.check_fin(concl, premises),
            Rule::Unity => self.check_unity(concl, premises),
            Rule::SumUpper => self.check_sum_upper(concl, premises),
            Rule::FreeElim => {
                let p = Self::fixed_only(premises, 1)?;
                let top = self.sys.bound.unwrap_or_else(|| classify_fragment(concl).max_constant.max(1));
                for v in free_vars(p[0]) {
                    for j in 1..=top {
                        let inst = substitute_range_var(p[0], &v, &Sym::constant(&v.var, j)).map_err(|e| e.to_string())?;
                        if rename_bound_canonical(&inst) == *concl {
                            return Ok(false);
                        }
                    }
                }
                Err("conclusion is not the premise with a free variable replaced by a constant".into())
            }
            Rule::FreeIntro => {
                let mut last = "the conclusion has no free variable".to_string();
                for v in free_vars(concl) {
                    let inst = |j: u32| {
                        substitute_range_var(concl, &v, &Sym::constant(&v.var, j)).map(|f| rename_bound_canonical(&f))
                    };
                    match self.covered(rule, premises, |j, f| inst(j).is_ok_and(|g| g == *f)) {
                        Ok(t) => return Ok(t),
                        Err(e) => last = format!("for {}: {}", v, e),
                    }
                }
                Err(last)
            }
        }
    }

    fn check_conv(&self, concl: &Formula, premises: &Premises) -> Result<bool, String> {
        let mut last = String::from("conclusion must be φ -> t <= 0");
        for (guard, body) in splits(concl) {
            let Formula::Geq(z, t) = body else { continue };
            if z.as_numeral() != Some(0) {
                continue;
            }
            let res = self.covered(Rule::Conv, premises, |n, p| {
                let Some(pb) = guard_matches(p, guard) else { return false };
                let mut leaves = Leaves::new();
                let target = Term::sub(Term::one(), Term::mul(t.clone(), Term::numeral(n as u64)));
                let want = leaves.poly(&target);
                matches!(literal(&mut leaves, &pb), Some(l) if !l.strict && positive_multiple(&l.poly, &want))
            });
            match res {
                Ok(_) => return Ok(true),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    fn check_fin(&self, concl: &Formula, premises: &Premises) -> Result<bool, String> {
        let mut last = String::from("conclusion must be φ -> sum x . P(T) < 0");
        for (guard, body) in splits(concl) {
            let Some((z, s)) = body.as_gt() else { continue };
            let Term::Sum { body: summand, .. } = s else { continue };
            if z.as_numeral() != Some(0) || **summand != Term::one() {
                continue;
            }
            let res = self.covered(Rule::Fin, premises, |n, p| {
                let Some(pb) = guard_matches(p, guard) else { return false };
                let mut leaves = Leaves::new();
                let want = leaves.difference(s, &Term::numeral(n as u64));
                matches!(literal(&mut leaves, &pb), Some(l) if !l.strict && positive_multiple(&l.poly, &want))
            });
            match res {
                Ok(_) => return Ok(true),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    fn check_unity(&self, concl: &Formula, premises: &Premises) -> Result<bool, String> {
        let mut last = String::from("conclusion must be φ -> 1 - P(⋀ X=c1 ∨ ¬X=c1) > q");
        for (guard, body) in splits(concl) {
            let mut leaves = Leaves::new();
            let Some(lit) = strict_literal(&mut leaves, body) else { continue };
            let mut star = None;
            body.for_each_term(&mut |t| {
                t.for_each_prob(&mut |e, g| {
                    if star.is_none() && *g == Event::Top {
                        star = unity_vars(e).map(|vars| (e.clone(), vars));
                    }
                })
            });
            let Some((e_star, vars)) = star else { continue };
            let id = leaves.prob_leaf(&e_star, &Event::Top);
            let mut coef = None;
            let mut constant = num_traits::Zero::zero();
            let mut shape_ok = true;
            for (m, c) in lit.poly.terms() {
                match m.as_slice() {
                    [] => constant = c.clone(),
                    [x] if *x == id => coef = Some(c.clone()),
                    _ => shape_ok = false,
                }
            }
            let Some(coef) = coef.filter(|_| shape_ok) else { continue };
            let mu: crate::num::Rational = -coef;
            if !(num_traits::Signed::is_positive(&mu) && constant < mu) {
                last = "Unity needs a positive rational q".into();
                continue;
            }
            let bound = self.sys.bound;
            let res = self.covered(Rule::Unity, premises, |n, p| {
                let Some(pb) = guard_matches(p, guard) else { return false };
                let top = bound.map_or(n, |b| n.min(b));
                let e_n = Event::conj(
                    vars.iter().map(|v| Event::disj((1..=top).map(|i| Event::atom(Sym::constant(v, i))))),
                );
                let swapped = replace_prob_event(&pb, &e_n, &e_star);
                let mut l2 = leaves.clone();
                matches!(strict_literal(&mut l2, &swapped), Some(q) if positive_multiple(&q.poly, &lit.poly))
            });
            match res {
                Ok(t) => return Ok(t),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    fn check_sum_upper(&self, concl: &Formula, premises: &Premises) -> Result<bool, String> {
        let Premises::Fixed(list) = premises else { return Err("SumUpper premises must be listed explicitly".into()) };
        let mut last = String::from("conclusion must be φ -> sum x . t <= t'");
        for (guard, body) in splits(concl) {
            let Formula::Geq(upper, Term::Sum { bound, body: summand }) = body else { continue };
            let (top, truncated) = match self.sys.bound {
                Some(n) => (n, false),
                None => (self.n_max.min(SUM_UPPER_OPEN_LIMIT), true),
            };
            let mut missing = None;
            'outer: for n in 1..=top {
                for rgs in set_partitions(n as usize) {
                    let blocks = blocks_of(&rgs);
                    let expected = sum_upper_premise(guard, upper, bound, summand, &blocks)?;
                    if !list.iter().any(|p| arith::equivalent_atoms(p, &expected)) {
                        missing = Some(format!("missing premise for n = {} and partition {:?}", n, blocks));
                        break 'outer;
                    }
                }
            }
            match missing {
                None => return Ok(truncated),
                Some(m) => last = m,
            }
        }
        Err(last)
    }
}

/// Blocks of a restricted-growth string, as 1-based constant indices.
fn blocks_of(rgs: &[usize]) -> Vec<Vec<u32>> {
    let k = rgs.iter().max().map_or(0, |m| m + 1);
    let mut blocks = vec![Vec::new(); k];
    for (i, &b) in rgs.iter().enumerate() {
        blocks[b].push(i as u32 + 1);
    }
    blocks
}

/// `φ_{n,Π}` for the conclusion `φ → Σ_x t ≾ t'` and the partition `blocks`.
pub fn sum_upper_premise(
    guard: Option<&Formula>,
    upper: &Term,
    bound: &crate::syntax::RangeVar,
    summand: &Term,
    blocks: &[Vec<u32>],
) -> Result<Formula, String> {
    let var = &bound.var;
    let c = |i: u32| Sym::constant(var, i);
    let mut eqs = Vec::new();
    let mut neqs = Vec::new();
    let all: Vec<(usize, u32)> =
        blocks.iter().enumerate().flat_map(|(b, blk)| blk.iter().map(move |&i| (b, i))).collect();
    let mut sorted = all.clone();
    sorted.sort_by_key(|&(_, i)| i);
    for (k, &(bi, i)) in sorted.iter().enumerate() {
        for &(bj, j) in &sorted[k + 1..] {
            if bi == bj {
                eqs.push(Formula::eq(c(i), c(j)));
            } else {
                neqs.push(Formula::neq(c(i), c(j)));
            }
        }
    }
    let mut parts = Vec::with_capacity(blocks.len());
    for blk in blocks {
        let eps = Event::disj(blk.iter().map(|&i| Event::atom(c(i))));
        parts.push(substitute_event(summand, bound, &eps).map_err(|e| e.to_string())?);
    }
    let mut f = Formula::geq(upper.clone(), Term::sum_of(parts));
    if let Some(g) = Formula::conj(eqs.into_iter().chain(neqs)) {
        f = Formula::implies(g, f);
    }
    if let Some(g) = guard {
        f = Formula::implies(g.clone(), f);
    }
    Ok(rename_bound_canonical(&f))
}

/// The variables `X` of an event `⋀_X (X=c1 ∨ ¬X=c1)`.
fn unity_vars(e: &Event) -> Option<Vec<Var>> {
    fn flatten<'a>(e: &'a Event, out: &mut Vec<&'a Event>) {
        match e {
            Event::And(a, b) => {
                flatten(a, out);
                flatten(b, out);
            }
            other => out.push(other),
        }
    }
    let mut items = Vec::new();
    flatten(e, &mut items);
    let mut vars = Vec::new();
    for it in items {
        let Event::Not(inner) = it else { return None };
        let Event::And(a, b) = &**inner else { return None };
        let Event::Not(x) = &**a else { return None };
        let Event::Atom(s) = &**x else { return None };
        if s.const_index() != Some(1) || **b != Event::not(Event::not(Event::atom(s.clone()))) {
            return None;
        }
        if vars.contains(s.var()) {
            return None;
        }
        vars.push(s.var().clone());
    }
    Some(vars)
}

fn replace_prob_event(f: &Formula, from: &Event, to: &Event) -> Formula {
    fn term(t: &Term, from: &Event, to: &Event) -> Term {
        match t {
            Term::Prob { event, given } if event == from && *given == Event::Top => Term::prob(to.clone()),
            Term::Sum { bound, body } => Term::sum(bound.clone(), term(body, from, to)),
            Term::Add(a, b) => Term::add(term(a, from, to), term(b, from, to)),
            Term::Mul(a, b) => Term::mul(term(a, from, to), term(b, from, to)),
            Term::Neg(a) => Term::neg(term(a, from, to)),
            other => other.clone(),
        }
    }
    match f {
        Formula::Eq(..) => f.clone(),
        Formula::Geq(a, b) => Formula::Geq(term(a, from, to), term(b, from, to)),
        Formula::Not(x) => Formula::not(replace_prob_event(x, from, to)),
        Formula::And(a, b) => Formula::and(replace_prob_event(a, from, to), replace_prob_event(b, from, to)),
    }
}

/// Checks every line of `script` in `system`. Infinitary rules are checked
/// for premise indices up to `n_max`.
pub fn check_proof(script: &ProofScript, system: &System, n_max: u32) -> ProofVerdict {
    let header = |reason: String| ProofVerdict::Rejected { line: "header".into(), reason };
    if n_max == 0 {
        return header("n_max must be positive".into());
    }
    let sig = match system.signature(&script.vars) {
        Ok(s) => s,
        Err(e) => return header(format!("bad vars: {}", e)),
    };
    let lines = &script.lines;
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut refs: Vec<Vec<usize>> = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        if index.insert(&l.label, i).is_some() {
            return reject(l, "duplicate label");
        }
        let mut r = Vec::new();
        if let Justification::Rule(_, names) = &l.justification {
            for name in names {
                match index.get(name.as_str()) {
                    Some(&j) if j < i => r.push(j),
                    _ => return reject(l, format!("premise `{}` is not an earlier line", name)),
                }
            }
        }
        refs.push(r);
    }
    let hyps: Vec<Result<Formula, String>> = script
        .hyps
        .iter()
        .map(|h| if h.contains(PARAM) { Err(h.clone()) } else { load(h, &sig, system) })
        .collect();
    for (k, h) in hyps.iter().enumerate() {
        if let Err(e) = h {
            if !script.hyps[k].contains(PARAM) {
                return header(format!("hypothesis {}: {}", k, e));
            }
        }
    }

    let probe = Ctx {
        sys: system,
        n_max,
        script,
        fixed: Vec::new(),
        instances: Vec::new(),
        hyps: Vec::new(),
        sig: sig.clone(),
    };
    // Indices at which each generator line is needed, propagated backwards.
    let mut demand: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); lines.len()];
    for i in (0..lines.len()).rev() {
        let l = &lines[i];
        let gen_refs: Vec<usize> = refs[i].iter().copied().filter(|&j| lines[j].generator).collect();
        if gen_refs.is_empty() {
            continue;
        }
        if l.generator {
            let d = demand[i].clone();
            for j in gen_refs {
                demand[j].extend(d.iter().copied());
            }
            continue;
        }
        let Justification::Rule(rule, _) = &l.justification else { unreachable!("only rules have premises") };
        if rule.arity() == Arity::Finitary || *rule == Rule::SumUpper || refs[i].len() != 1 {
            return reject(l, "a generator can only be the single premise of Conv, Fin, Unity or FreeIntro");
        }
        let (need, _) = probe.demand(*rule);
        demand[refs[i][0]].extend(need);
    }

    let mut fixed = vec![None; lines.len()];
    let mut instances = vec![BTreeMap::new(); lines.len()];
    let loaded: Vec<Result<(Option<Formula>, BTreeMap<u32, Formula>), (usize, String)>> = lines
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            if l.generator {
                let mut m = BTreeMap::new();
                for &n in &demand[i] {
                    let f = load(&instance_text(&l.formula, n), &sig, system).map_err(|e| (i, format!("n = {}: {}", n, e)))?;
                    m.insert(n, f);
                }
                Ok((None, m))
            } else {
                load(&l.formula, &sig, system).map(|f| (Some(f), BTreeMap::new())).map_err(|e| (i, e))
            }
        })
        .collect();
    for (i, r) in loaded.into_iter().enumerate() {
        match r {
            Ok((f, m)) => {
                fixed[i] = f;
                instances[i] = m;
            }
            Err((i, e)) => return reject(&lines[i], e),
        }
    }
    let ctx = Ctx { fixed, instances, hyps, ..probe };

    // Local checks: one job per fixed line and per generator instance.
    let jobs: Vec<(usize, Option<u32>)> = lines
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            if l.generator {
                demand[i].iter().map(|&n| (i, Some(n))).collect::<Vec<_>>()
            } else {
                vec![(i, None)]
            }
        })
        .collect();
    let results: Vec<Result<Option<Rule>, String>> =
        jobs.par_iter().map(|&(i, n)| ctx.check_line(i, n, &refs[i])).collect();
    let mut truncated = BTreeSet::new();
    for (&(i, n), r) in jobs.iter().zip(results) {
        match r {
            Ok(Some(rule)) => {
                truncated.insert(rule);
            }
            Ok(None) => {}
            Err(e) => {
                let e = match n {
                    Some(n) => format!("instance n = {}: {}", n, e),
                    None => e,
                };
                return reject(&lines[i], e);
            }
        }
    }

    // Open assumptions, and assumptions a free-variable rule has been applied under.
    let mut open: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); lines.len()];
    let mut tainted: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); lines.len()];
    for (i, l) in lines.iter().enumerate() {
        let mut o = BTreeSet::new();
        let mut t = BTreeSet::new();
        for &j in &refs[i] {
            o.extend(open[j].iter().copied());
            t.extend(tainted[j].iter().copied());
        }
        match &l.justification {
            Justification::Assume => {
                o.insert(i);
            }
            Justification::Rule(Rule::FreeElim | Rule::FreeIntro, _) => t.extend(o.iter().copied()),
            Justification::Rule(Rule::Deduction, _) => {
                let a = refs[i][0];
                let a_open = ctx.fixed[a].as_ref().is_some_and(|f| !free_vars(f).is_empty());
                if a_open && tainted[refs[i][1]].contains(&a) {
                    return reject(
                        l,
                        "cannot discharge an assumption with free variables after FreeElim or FreeIntro used it",
                    );
                }
                o.remove(&a);
                t.remove(&a);
            }
            _ => {}
        }
        open[i] = o;
        tainted[i] = t;
    }
    let Some(last) = lines.last() else { return header("the script has no lines".into()) };
    if !open[lines.len() - 1].is_empty() {
        return reject(last, "the final line depends on an undischarged assumption");
    }
    if let Some(goal) = &script.goal {
        let g = match load(goal, &sig, system) {
            Ok(g) => g,
            Err(e) => return header(format!("goal: {}", e)),
        };
        let hit = lines.iter().enumerate().any(|(i, _)| open[i].is_empty() && ctx.fixed[i].as_ref() == Some(&g));
        if !hit {
            return header("the goal is not derived by any line without open assumptions".into());
        }
    }
    if truncated.is_empty() {
        ProofVerdict::Verified
    } else {
        ProofVerdict::VerifiedBounded { rules: truncated.into_iter().collect(), n_max }
    }
}

impl Ctx<'_> {
    fn formula(&self, i: usize, n: Option<u32>) -> &Formula {
        match (&self.fixed[i], n) {
            (Some(f), _) => f,
            (None, Some(n)) => &self.instances[i][&n],
            (None, None) => unreachable!("generators are read through their family"),
        }
    }

    fn check_line(&self, i: usize, n: Option<u32>, refs: &[usize]) -> Result<Option<Rule>, String> {
        let l = &self.script.lines[i];
        let f = self.formula(i, n);
        match &l.justification {
            Justification::Axiom(schema) => {
                if !self.sys.allows_schema(*schema) {
                    return Err(format!("axiom {} is not part of {}", schema, self.sys.name));
                }
                check_axiom_instance(f, *schema, self.sys.bound).map(|_| None)
            }
            Justification::Assume => {
                if l.generator {
                    Err("assumptions cannot be generators".into())
                } else {
                    Ok(None)
                }
            }
            Justification::Hyp(k) => {
                let text = self.script.hyps.get(*k).ok_or_else(|| format!("there is no hypothesis {}", k))?;
                let h = match (&self.hyps[*k], n) {
                    (Ok(h), _) => h.clone(),
                    (Err(_), Some(n)) => load(&instance_text(text, n), &self.sig, self.sys)?,
                    (Err(_), None) => return Err("a hypothesis family needs a generator line".into()),
                };
                if h == *f {
                    Ok(None)
                } else {
                    Err(format!("formula differs from hypothesis {}", k))
                }
            }
            Justification::Rule(rule, _) => {
                if *rule == Rule::Deduction {
                    let a = refs.first().ok_or("Deduction needs an assumption and a derived line")?;
                    if self.script.lines[*a].justification != Justification::Assume {
                        return Err("the first premise of Deduction must be an assumption".into());
                    }
                }
                let premises = match (refs, n) {
                    ([j], None) if self.script.lines[*j].generator => Premises::Family(&self.instances[*j]),
                    _ => Premises::Fixed(refs.iter().map(|&j| self.formula(j, n)).collect()),
                };
                self.check_rule(*rule, f, &premises).map(|t| t.then_some(*rule))
            }
        }
    }
}

/// Parses and checks a script in one step.
pub fn check_script(text: &str, system: &System, n_max: u32) -> Result<ProofVerdict, ProofError> {
    Ok(check_proof(&parse_script(text)?, system, n_max))
}
