//! Syntactic grounding: sum unfolding over a bounded signature, universal
//! closure, conditional elimination and numeral expansion.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::syntax::{
    expand_comparison, free_vars, free_vars_event, substitute_range_var, substitute_range_var_term, Event, Formula,
    MacroTerm, ParseError, RangeVar, Signature, SubstError, Sym, Term, Var,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientMode {
    /// A constant `c_j` used as a coefficient becomes the numeral `j`.
    /// Exact only in models where `c_j` denotes the value `j`.
    Canonical,
    /// Coefficient constants stay symbolic and are read off the model.
    Symbolic,
}

#[derive(Clone, Debug)]
pub struct GroundingContext {
    n: u32,
    mode: CoefficientMode,
    representatives: BTreeMap<Var, Vec<u32>>,
}

#[derive(Debug, thiserror::Error)]
pub enum GroundingError {
    #[error("grounding needs a bounded signature")]
    Unbounded,
    #[error("constant count must be at least 1")]
    EmptySignature,
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error("{message} at {path}")]
    NotReducible { path: String, message: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl GroundingContext {
    pub fn new(n: u32) -> Result<Self, GroundingError> {
        if n == 0 {
            return Err(GroundingError::EmptySignature);
        }
        Ok(GroundingContext { n, mode: CoefficientMode::Canonical, representatives: BTreeMap::new() })
    }

    pub fn from_signature(sig: &Signature) -> Result<Self, GroundingError> {
        Self::new(sig.bound().ok_or(GroundingError::Unbounded)?)
    }

    pub fn with_mode(mut self, mode: CoefficientMode) -> Self {
        self.mode = mode;
        self
    }

    /// Restricts sums and closure over `var` to the given constant indices,
    /// one per block of a partition of the constants.
    pub fn with_representatives(mut self, var: &Var, indices: Vec<u32>) -> Self {
        self.representatives.insert(var.clone(), indices);
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mode(&self) -> CoefficientMode {
        self.mode
    }

    pub fn constants(&self, var: &Var) -> Vec<u32> {
        self.representatives.get(var).cloned().unwrap_or_else(|| (1..=self.n).collect())
    }
}

/// Replaces every `Σ_v t` by the explicit sum of `t[v/c_i]`. Sound in models
/// whose constants denote pairwise-distinct values.
pub fn unfold_sums(f: &Formula, ctx: &GroundingContext) -> Result<Formula, GroundingError> {
    Ok(match f {
        Formula::Eq(a, b) => Formula::Eq(a.clone(), b.clone()),
        Formula::Geq(a, b) => Formula::Geq(unfold_term(a, ctx)?, unfold_term(b, ctx)?),
        Formula::Not(x) => Formula::not(unfold_sums(x, ctx)?),
        Formula::And(a, b) => Formula::and(unfold_sums(a, ctx)?, unfold_sums(b, ctx)?),
    })
}

pub fn unfold_term(t: &Term, ctx: &GroundingContext) -> Result<Term, GroundingError> {
    let unfolded = unfold_inner(t, ctx)?;
    Ok(match ctx.mode {
        CoefficientMode::Symbolic => unfolded,
        CoefficientMode::Canonical => canonical_coefficients(&unfolded),
    })
}

fn unfold_inner(t: &Term, ctx: &GroundingContext) -> Result<Term, GroundingError> {
    Ok(match t {
        Term::Prob { .. } | Term::Sym(_) => t.clone(),
        Term::Sum { bound, body } => {
            let body = unfold_inner(body, ctx)?;
            let mut items = Vec::new();
            for i in ctx.constants(&bound.var) {
                items.push(substitute_range_var_term(&body, bound, &Sym::constant(&bound.var, i))?);
            }
            Term::sum_of(items)
        }
        Term::Add(a, b) => Term::add(unfold_inner(a, ctx)?, unfold_inner(b, ctx)?),
        Term::Mul(a, b) => Term::mul(unfold_inner(a, ctx)?, unfold_inner(b, ctx)?),
        Term::Neg(a) => Term::neg(unfold_inner(a, ctx)?),
    })
}

fn canonical_coefficients(t: &Term) -> Term {
    match t {
        Term::Sym(Sym::Const { index, .. }) => Term::numeral(u64::from(*index)),
        Term::Prob { .. } | Term::Sym(_) => t.clone(),
        Term::Sum { bound, body } => Term::sum(bound.clone(), canonical_coefficients(body)),
        Term::Add(a, b) => Term::add(canonical_coefficients(a), canonical_coefficients(b)),
        Term::Mul(a, b) => Term::mul(canonical_coefficients(a), canonical_coefficients(b)),
        Term::Neg(a) => Term::neg(canonical_coefficients(a)),
    }
}

/// Conjunction of `φ[x/c]` over every assignment of constants to the free
/// range variables, taken in sorted order. Closed formulas come back unchanged.
pub fn universal_closure(f: &Formula, ctx: &GroundingContext) -> Result<Formula, GroundingError> {
    let fv: Vec<RangeVar> = free_vars(f).into_iter().collect();
    if fv.is_empty() {
        return Ok(f.clone());
    }
    let mut acc = vec![f.clone()];
    for v in &fv {
        let mut next = Vec::with_capacity(acc.len() * ctx.n as usize);
        for g in &acc {
            for i in ctx.constants(&v.var) {
                next.push(substitute_range_var(g, v, &Sym::constant(&v.var, i))?);
            }
        }
        acc = next;
    }
    Ok(Formula::conj(acc).expect("closure has at least one conjunct"))
}

/// A term as `num / Π den`, with the denominator a multiset of conditions.
struct Frac {
    num: Term,
    den: Vec<Event>,
}

fn multiset_union(a: &[Event], b: &[Event]) -> Vec<Event> {
    let mut out = Vec::new();
    let mut counts: BTreeMap<&Event, (usize, usize)> = BTreeMap::new();
    for e in a {
        counts.entry(e).or_default().0 += 1;
    }
    for e in b {
        counts.entry(e).or_default().1 += 1;
    }
    for (e, (x, y)) in counts {
        out.extend(std::iter::repeat_n(e.clone(), x.max(y)));
    }
    out
}

fn multiset_minus(a: &[Event], b: &[Event]) -> Vec<Event> {
    let mut out = a.to_vec();
    for e in b {
        if let Some(i) = out.iter().position(|x| x == e) {
            out.remove(i);
        }
    }
    out
}

fn scale(t: Term, by: &[Event]) -> Term {
    if by.is_empty() {
        t
    } else {
        Term::mul(t, Term::product_of(by.iter().map(|c| Term::prob(c.clone()))))
    }
}

fn frac(t: &Term, path: &mut Vec<String>) -> Result<Frac, GroundingError> {
    Ok(match t {
        Term::Prob { event, given } => {
            if *given == Event::Top {
                Frac { num: t.clone(), den: Vec::new() }
            } else {
                Frac { num: Term::prob(Event::and(event.clone(), given.clone())), den: vec![given.clone()] }
            }
        }
        Term::Sym(_) => Frac { num: t.clone(), den: Vec::new() },
        Term::Neg(a) => {
            path.push("neg".into());
            let a = frac(a, path)?;
            path.pop();
            Frac { num: Term::neg(a.num), den: a.den }
        }
        Term::Add(a, b) | Term::Mul(a, b) => {
            let tag = if matches!(t, Term::Add(..)) { "add" } else { "mul" };
            path.push(format!("{tag}.0"));
            let fa = frac(a, path)?;
            path.pop();
            path.push(format!("{tag}.1"));
            let fb = frac(b, path)?;
            path.pop();
            if matches!(t, Term::Add(..)) {
                let den = multiset_union(&fa.den, &fb.den);
                let num = Term::add(scale(fa.num, &multiset_minus(&den, &fa.den)), scale(fb.num, &multiset_minus(&den, &fb.den)));
                Frac { num, den }
            } else {
                let mut den = fa.den;
                den.extend(fb.den);
                den.sort();
                Frac { num: Term::mul(fa.num, fb.num), den }
            }
        }
        Term::Sum { bound, body } => {
            path.push(format!("sum({bound})"));
            let fb = frac(body, path)?;
            if let Some(c) = fb.den.iter().find(|c| free_vars_event(c).contains(bound)) {
                return Err(GroundingError::NotReducible {
                    path: path.join("/"),
                    message: format!(
                        "condition {} mentions the bound variable {bound}",
                        crate::syntax::print_event(c)
                    ),
                });
            }
            path.pop();
            Frac { num: Term::sum(bound.clone(), fb.num), den: fb.den }
        }
    })
}

fn cleared_atom(a: &Term, b: &Term, guarded: bool, path: &mut Vec<String>) -> Result<Formula, GroundingError> {
    path.push("lhs".into());
    let fa = frac(a, path)?;
    path.pop();
    path.push("rhs".into());
    let fb = frac(b, path)?;
    path.pop();
    if fa.den.is_empty() && fb.den.is_empty() {
        return Ok(Formula::Geq(a.clone(), b.clone()));
    }
    let den = multiset_union(&fa.den, &fb.den);
    let atom = Formula::Geq(scale(fa.num, &multiset_minus(&den, &fa.den)), scale(fb.num, &multiset_minus(&den, &fb.den)));
    if !guarded {
        return Ok(atom);
    }
    let conds: BTreeSet<Event> = den.into_iter().collect();
    let guards = conds.into_iter().map(|c| Formula::gt(Term::prob(c), Term::zero()));
    Ok(Formula::conj(guards.chain(std::iter::once(atom))).expect("nonempty"))
}

fn elim(f: &Formula, guarded: bool, path: &mut Vec<String>) -> Result<Formula, GroundingError> {
    Ok(match f {
        Formula::Eq(..) => f.clone(),
        Formula::Geq(a, b) => {
            path.push("geq".into());
            let r = cleared_atom(a, b, guarded, path)?;
            path.pop();
            r
        }
        Formula::Not(x) => {
            path.push("not".into());
            let r = Formula::not(elim(x, guarded, path)?);
            path.pop();
            r
        }
        Formula::And(a, b) => {
            path.push("and.0".into());
            let l = elim(a, guarded, path)?;
            path.pop();
            path.push("and.1".into());
            let r = elim(b, guarded, path)?;
            path.pop();
            Formula::and(l, r)
        }
    })
}

/// Rewrites every comparison with conditional probabilities into one over
/// unconditional probabilities by multiplying out the conditions. Equivalent
/// to the input on models where every condition has positive probability.
pub fn eliminate_conditionals(f: &Formula) -> Result<Formula, GroundingError> {
    elim(f, false, &mut Vec::new())
}

/// Like [`eliminate_conditionals`], but each rewritten comparison also
/// requires `P(c) ≻ 0` for its conditions, which makes the result
/// equivalent to the input in every model.
pub fn eliminate_conditionals_guarded(f: &Formula) -> Result<Formula, GroundingError> {
    elim(f, true, &mut Vec::new())
}

/// `a ≿ b` over macro terms, with numerals expanded to `P(⊤)` sums and
/// rational denominators cleared.
pub fn expand_numerals(a: &MacroTerm, b: &MacroTerm) -> Result<Formula, GroundingError> {
    Ok(expand_comparison(a, b)?)
}

fn sum_depth(t: &Term) -> u32 {
    match t {
        Term::Prob { .. } | Term::Sym(_) => 0,
        Term::Sum { body, .. } => 1 + sum_depth(body),
        Term::Add(a, b) | Term::Mul(a, b) => sum_depth(a).max(sum_depth(b)),
        Term::Neg(a) => sum_depth(a),
    }
}

pub fn formula_sum_depth(f: &Formula) -> u32 {
    let mut d = 0;
    f.for_each_term(&mut |t| d = d.max(sum_depth(t)));
    d
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundingStats {
    pub n: u32,
    pub input_size: usize,
    pub output_size: usize,
    pub sum_depth: u32,
    /// `|φ| · 4N · N^depth`, the bound the unfolded size never exceeds.
    pub size_bound: u128,
    pub bound_formula: String,
}

impl GroundingStats {
    pub fn measure(input: &Formula, output: &Formula, n: u32) -> Self {
        let depth = formula_sum_depth(input);
        let size_bound = (input.size() as u128)
            .saturating_mul(4 * u128::from(n))
            .saturating_mul(u128::from(n).saturating_pow(depth));
        GroundingStats {
            n,
            input_size: input.size(),
            output_size: output.size(),
            sum_depth: depth,
            size_bound,
            bound_formula: "|phi| * 4N * N^depth".into(),
        }
    }
}
