//! Bounded satisfiability for sequents over a signature with `N` constants
//! per variable, by reduction to polynomial constraints over state
//! descriptions, plus a brute-force model enumeration oracle.
//!
//! Models searched here take their values from `1..=N` with every value
//! named by a constant.

mod brute;
mod delta;
mod poly;
mod solve;

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

pub use brute::{brute_force_sat, BruteConfig, BruteVerdict};
pub use delta::{
    check_support_compatibility, count_descriptions, enumerate_state_descriptions, formula_events, intervention_set,
    realizable_descriptions, reduce_to_constraints, CompiledEvent, Description, Interpretation, Scope, Setting,
    StateDescriptions,
};
pub use poly::{Atom, BoolExpr, ConstraintSystem, Domain, Monomial, Poly, Rel};
pub use solve::{for_each_composition, interval_infeasible, solve_constraints_small, solve_with_limits, SolveLimits, SolveOutcome};

use crate::grounding::{
    eliminate_conditionals_guarded, universal_closure, unfold_sums, CoefficientMode, GroundingContext, GroundingError,
};
use crate::num::{fmt_pq, Rational};
use crate::scm::{Mechanism, Scm};
use crate::semantics::satisfies_sequent;
use crate::syntax::{classify_fragment, Formula, Sequent, Sym, Term, Var};

#[derive(Debug, thiserror::Error)]
pub enum SatError {
    #[error("formula is not closed: free {0}")]
    NotClosed(String),
    #[error("sums must be unfolded first")]
    NotSumFree,
    #[error("conditional probabilities must be eliminated first")]
    NotConditionFree,
    #[error("outside the reduction's scope: {0}")]
    OutOfScope(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("interventions are not allowed in prob mode")]
    CausalInProbMode,
    #[error(transparent)]
    Grounding(#[from] GroundingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prob,
    Causal,
}

#[derive(Clone, Debug)]
pub struct SatConfig {
    /// Constants per variable; values range over `1..=n`.
    pub n: u32,
    /// Probabilities are multiples of `1/q` for some `q ≤ denominator`.
    pub denominator: u64,
    /// Largest support tried.
    pub support_cap: usize,
    /// Only models where every complete assignment has positive probability.
    pub positive: bool,
    pub mode: Mode,
    pub max_n: u32,
    pub max_denominator: u64,
    /// Realizable state descriptions per (case, order) before giving up.
    pub max_descriptions: usize,
    /// Candidate supports per (case, order) before giving up.
    pub max_supports: u64,
    /// Interval boxes for the global infeasibility check of each case.
    pub interval_nodes: usize,
}

impl SatConfig {
    pub fn new(n: u32, denominator: u64) -> Self {
        SatConfig {
            n,
            denominator,
            support_cap: 64,
            positive: false,
            mode: Mode::Causal,
            max_n: 3,
            max_denominator: 16,
            max_descriptions: 200_000,
            max_supports: 2_000_000,
            interval_nodes: 4_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportEntry {
    pub outcome: String,
    pub probability: String,
    /// One `intervention: assignment` line per intervention in scope.
    pub description: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SatWitness {
    pub scm: Scm,
    pub order: Vec<Var>,
    pub support: Vec<SupportEntry>,
    pub case: String,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Sat(Box<SatWitness>),
    /// No model at the configured scale; `analytic` when interval reasoning
    /// excluded every case outright, independent of the denominator bound.
    Unsat { analytic: bool },
    Unknown { reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "SAT",
            Verdict::Unsat { .. } => "UNSAT",
            Verdict::Unknown { .. } => "UNKNOWN",
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SatStats {
    pub cases: usize,
    pub orders: usize,
    pub analytic_cases: usize,
    pub descriptions: usize,
    pub classes: usize,
    pub supports_tried: u64,
    /// `|Δ_φ|` over every intervention, summed across cases.
    pub full_delta: String,
}

#[derive(Clone, Debug)]
pub struct SatReport {
    pub verdict: Verdict,
    pub stats: SatStats,
}

/// Restricted-growth strings of length `n`: set partitions of `1..=n` with
/// blocks numbered by first occurrence, in reverse lexicographic order so
/// the partition into singletons comes first.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let top = cur.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=top {
            cur.push(b);
            rec(n, cur, out);
            cur.pop();
        }
    }
    rec(n, &mut cur, &mut out);
    out.reverse();
    out
}

/// Injective labelings of `blocks` blocks by values in `1..=n`, lexicographic.
fn labelings(blocks: usize, n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    fn rec(blocks: usize, n: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == blocks {
            out.push(cur.clone());
            return;
        }
        for v in 1..=n {
            if !cur.contains(&v) {
                cur.push(v);
                rec(blocks, n, cur, out);
                cur.pop();
            }
        }
    }
    rec(blocks, n, &mut Vec::new(), &mut out);
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, &mut Vec::new(), &mut out);
    out
}

/// One per-variable choice of constant partition and value labels.
#[derive(Clone, Debug)]
struct Case {
    interp: Interpretation,
    representatives: Vec<Vec<u32>>,
    label: String,
}

fn coefficient_vars(f: &Formula) -> BTreeSet<Var> {
    fn walk(t: &Term, out: &mut BTreeSet<Var>) {
        match t {
            Term::Sym(s) => {
                out.insert(s.var().clone());
            }
            Term::Prob { .. } => {}
            Term::Sum { body, .. } => walk(body, out),
            Term::Add(a, b) | Term::Mul(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Term::Neg(a) => walk(a, out),
        }
    }
    let mut out = BTreeSet::new();
    f.for_each_term(&mut |t| walk(t, &mut out));
    out
}

fn cases(vars: &[Var], n: u32, coefficient: &BTreeSet<Var>) -> Vec<Case> {
    let per_var: Vec<Vec<(Vec<u32>, Vec<u32>, Vec<u32>)>> = vars
        .iter()
        .map(|v| {
            let mut opts = Vec::new();
            for rgs in set_partitions(n as usize) {
                let blocks = rgs.iter().max().map_or(0, |m| m + 1);
                let labels = if coefficient.contains(v) {
                    labelings(blocks, n)
                } else {
                    vec![(1..=blocks as u32).collect()]
                };
                let reps: Vec<u32> = (0..blocks).map(|b| rgs.iter().position(|&x| x == b).unwrap() as u32 + 1).collect();
                for lab in labels {
                    let consts: Vec<u32> = rgs.iter().map(|&b| lab[b]).collect();
                    let mut range = lab.clone();
                    range.sort_unstable();
                    opts.push((range, consts, reps.clone()));
                }
            }
            opts
        })
        .collect();
    let mut out = vec![Case {
        interp: Interpretation { vars: vars.to_vec(), ranges: Vec::new(), constants: Vec::new() },
        representatives: Vec::new(),
        label: String::new(),
    }];
    for (i, opts) in per_var.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for c in &out {
            for (range, consts, reps) in opts {
                let mut d = c.clone();
                d.interp.ranges.push(range.clone());
                d.interp.constants.push(consts.clone());
                d.representatives.push(reps.clone());
                if !d.label.is_empty() {
                    d.label.push_str("; ");
                }
                let names: Vec<String> = consts.iter().map(|v| v.to_string()).collect();
                d.label.push_str(&format!("{}: c = ({})", vars[i], names.join(",")));
                next.push(d);
            }
        }
        out = next;
    }
    out
}

/// `¬(⋀ closure(Γ) ∧ ¬closure(ψ))`, or `closure(ψ)` without premises.
pub fn sequent_formula(s: &Sequent, n: u32) -> Result<Formula, SatError> {
    let ctx = GroundingContext::new(n)?;
    let concl = universal_closure(&s.conclusion, &ctx)?;
    let prem: Vec<Formula> = s.premises.iter().map(|p| universal_closure(p, &ctx)).collect::<Result<_, _>>()?;
    Ok(match Formula::conj(prem) {
        None => concl,
        Some(g) => Formula::not(Formula::and(g, Formula::not(concl))),
    })
}

enum ItemResult {
    Sat(Box<SatWitness>),
    Infeasible,
    Exhausted,
    Capped(String),
}

struct ItemStats {
    descriptions: usize,
    classes: usize,
    supports: u64,
}

/// Advances a strictly increasing index vector to the next `k`-subset of
/// `0..m` in lexicographic order.
pub(crate) fn next_combination(pick: &mut [usize], m: usize) -> bool {
    let k = pick.len();
    for i in (0..k).rev() {
        if pick[i] < m - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn subsets(m: usize, k: usize, limit: u64) -> Option<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    if k > m {
        return Some(out);
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        if out.len() as u64 > limit {
            return None;
        }
        if !next_combination(&mut cur, m) {
            return Some(out);
        }
    }
}

fn describe(d: &Description, interventions: &[Setting], vars: &[Var]) -> Vec<String> {
    interventions
        .iter()
        .zip(d)
        .map(|(s, row)| {
            let alpha: Vec<String> = s.iter().map(|(p, v)| format!("{}={}", vars[*p], v)).collect();
            let beta: Vec<String> = row.iter().enumerate().map(|(p, v)| format!("{}={}", vars[p], v)).collect();
            format!("[{}] {}", alpha.join(","), beta.join(","))
        })
        .collect()
}

/// A model realizing `support` with the given weights under `order`.
fn build_witness(
    interp: &Interpretation,
    interventions: &[Setting],
    support: &[Description],
    weights: &[Rational],
    order: &[usize],
) -> Scm {
    let k = support.len();
    let vars: Vec<Var> = order.iter().map(|&i| interp.vars[i].clone()).collect();
    let ranges: Vec<Vec<u32>> = order.iter().map(|&i| interp.ranges[i].clone()).collect();
    let constants: Vec<Vec<u32>> = order.iter().map(|&i| interp.constants[i].clone()).collect();
    let mut mechanisms = Vec::with_capacity(order.len());
    for (r, &v) in order.iter().enumerate() {
        let rows: usize = order[..r].iter().map(|&w| interp.ranges[w].len()).product();
        let mut table = vec![interp.ranges[v][0]; rows * k];
        for (u, d) in support.iter().enumerate() {
            for (a, s) in interventions.iter().enumerate() {
                if s.iter().any(|(q, _)| *q == v) {
                    continue;
                }
                let mut row = 0;
                for &w in &order[..r] {
                    let pos = interp.ranges[w].binary_search(&d[a][w]).expect("value in range");
                    row = row * interp.ranges[w].len() + pos;
                }
                table[row * k + u] = d[a][v];
            }
        }
        mechanisms.push(Mechanism::Table { parents: (0..r).collect(), table });
    }
    let outcomes = (1..=k).map(|u| format!("d{}", u)).collect();
    Scm::new(vars, ranges, outcomes, weights.to_vec(), mechanisms, constants).expect("witness tables are well formed")
}

fn run_item(
    s: &Sequent,
    ground: &Formula,
    case: &Case,
    interventions: &[Setting],
    order: &[usize],
    cfg: &SatConfig,
) -> (ItemResult, ItemStats) {
    let mut stats = ItemStats { descriptions: 0, classes: 0, supports: 0 };
    let interp = &case.interp;
    let descs = match realizable_descriptions(interp, interventions, order, cfg.max_descriptions) {
        Ok(d) => d,
        Err(e) => return (ItemResult::Capped(e.to_string()), stats),
    };
    stats.descriptions = descs.len();
    let events: Vec<CompiledEvent> = match formula_events(ground)
        .iter()
        .map(|e| CompiledEvent::compile(e, interp, interventions))
        .collect::<Result<_, _>>()
    {
        Ok(e) => e,
        Err(e) => return (ItemResult::Capped(e.to_string()), stats),
    };
    let mut seen: HashMap<(Vec<bool>, Vec<u32>), usize> = HashMap::new();
    let mut classes: Vec<Description> = Vec::new();
    for d in descs {
        let sig: Vec<bool> = events.iter().map(|e| e.holds(&d)).collect();
        let obs = if cfg.positive { d[0].clone() } else { Vec::new() };
        seen.entry((sig, obs)).or_insert_with(|| {
            classes.push(d);
            classes.len() - 1
        });
    }
    stats.classes = classes.len();
    let cs = match reduce_to_constraints(ground, interp, interventions, &classes, false) {
        Ok(cs) => cs,
        Err(e) => return (ItemResult::Capped(e.to_string()), stats),
    };
    if cs.root == BoolExpr::Const(false) || interval_infeasible(&cs, cfg.interval_nodes) {
        return (ItemResult::Infeasible, stats);
    }
    let cells = interp.cells();
    let max_k = cfg.support_cap.min(classes.len()).min(cfg.denominator as usize);
    let limits = SolveLimits { interval_nodes: 0, ..SolveLimits::default() };
    for k in 1..=max_k {
        if cfg.positive && k < cells {
            continue;
        }
        let remaining = cfg.max_supports.saturating_sub(stats.supports);
        let Some(candidates) = subsets(classes.len(), k, remaining) else {
            return (ItemResult::Capped(format!("more than {} candidate supports", cfg.max_supports)), stats);
        };
        stats.supports += candidates.len() as u64;
        let hit = candidates.par_iter().find_map_first(|sub| {
            let support: Vec<Description> = sub.iter().map(|&i| classes[i].clone()).collect();
            if cfg.positive {
                let obs: BTreeSet<&Vec<u32>> = support.iter().map(|d| &d[0]).collect();
                if obs.len() < cells {
                    return None;
                }
            }
            if !check_support_compatibility(interventions, &support, order) {
                return None;
            }
            let mut sub_cs = cs.restrict(sub);
            sub_cs.domain = Domain::Simplex { strict: true };
            let point = match solve_with_limits(&sub_cs, cfg.denominator, &limits) {
                Ok(SolveOutcome::Witness(p)) => p,
                _ => return None,
            };
            let scm = build_witness(interp, interventions, &support, &point, order);
            let ok = scm.validate().is_ok()
                && (!cfg.positive || scm.check_positivity())
                && satisfies_sequent(&scm, s).unwrap_or(false);
            if !ok {
                return None;
            }
            let entries = support
                .iter()
                .zip(&point)
                .enumerate()
                .map(|(u, (d, p))| SupportEntry {
                    outcome: format!("d{}", u + 1),
                    probability: fmt_pq(p),
                    description: describe(d, interventions, &interp.vars),
                })
                .collect();
            Some(SatWitness {
                scm,
                order: order.iter().map(|&i| interp.vars[i].clone()).collect(),
                support: entries,
                case: case.label.clone(),
            })
        });
        if let Some(w) = hit {
            return (ItemResult::Sat(Box::new(w)), stats);
        }
    }
    (ItemResult::Exhausted, stats)
}

/// Decides satisfiability of the sequent at the configured scale: some
/// model with values in `1..=n`, `n` constants per variable and
/// probabilities on the `1/q` grid makes a premise fail or the conclusion
/// hold. Every SAT verdict carries a witness checked by the semantics.
pub fn sat_bounded(s: &Sequent, cfg: &SatConfig) -> Result<SatReport, SatError> {
    if cfg.n == 0 {
        return Err(SatError::Cap("n must be at least 1".into()));
    }
    if cfg.n > cfg.max_n {
        return Err(SatError::Cap(format!("n = {} exceeds the cap of {}", cfg.n, cfg.max_n)));
    }
    if cfg.denominator == 0 || cfg.denominator > cfg.max_denominator {
        return Err(SatError::Cap(format!("denominator {} outside 1..={}", cfg.denominator, cfg.max_denominator)));
    }
    let all: Vec<&Formula> = s.premises.iter().chain(std::iter::once(&s.conclusion)).collect();
    for f in &all {
        let frag = classify_fragment(f);
        if cfg.mode == Mode::Prob && frag.causal {
            return Err(SatError::CausalInProbMode);
        }
        if frag.max_constant > cfg.n {
            return Err(SatError::OutOfScope(format!("constant c{} with n = {}", frag.max_constant, cfg.n)));
        }
    }
    let vars: Vec<Var> = s.variables().into_iter().collect();
    let phi = sequent_formula(s, cfg.n)?;
    let all_cases = cases(&vars, cfg.n, &coefficient_vars(&phi));

    let mut items = Vec::new();
    let mut full_delta = BigUint::zero();
    for (ci, case) in all_cases.iter().enumerate() {
        let mut ctx = GroundingContext::new(cfg.n)?.with_mode(CoefficientMode::Symbolic);
        for (v, reps) in vars.iter().zip(&case.representatives) {
            ctx = ctx.with_representatives(v, reps.clone());
        }
        let ground = eliminate_conditionals_guarded(&unfold_sums(&phi, &ctx)?)?;
        let interventions = intervention_set(&ground, &case.interp, Scope::Appearing)?;
        let all_scope = intervention_set(&ground, &case.interp, Scope::All)?;
        full_delta += count_descriptions(&all_scope, &case.interp);
        let orders = if interventions.len() == 1 { vec![(0..vars.len()).collect()] } else { permutations(vars.len()) };
        for order in orders {
            items.push((ci, ground.clone(), interventions.clone(), order));
        }
    }

    let stats = std::sync::Mutex::new(SatStats {
        cases: all_cases.len(),
        orders: items.len(),
        full_delta: full_delta.to_string(),
        ..SatStats::default()
    });
    let flags = std::sync::Mutex::new((0usize, Vec::<String>::new()));
    let found = items.par_iter().find_map_first(|(ci, ground, interventions, order)| {
        let (res, st) = run_item(s, ground, &all_cases[*ci], interventions, order, cfg);
        {
            let mut g = stats.lock().expect("stats lock");
            g.descriptions += st.descriptions;
            g.classes += st.classes;
            g.supports_tried += st.supports;
        }
        match res {
            ItemResult::Sat(w) => Some(w),
            ItemResult::Infeasible => {
                flags.lock().expect("flags lock").0 += 1;
                None
            }
            ItemResult::Exhausted => None,
            ItemResult::Capped(reason) => {
                flags.lock().expect("flags lock").1.push(reason);
                None
            }
        }
    });
    let mut stats = stats.into_inner().expect("stats lock");
    let (analytic, capped) = flags.into_inner().expect("flags lock");
    stats.analytic_cases = analytic;
    let verdict = match found {
        Some(w) => Verdict::Sat(w),
        None if !capped.is_empty() => Verdict::Unknown { reason: capped[0].clone() },
        None => Verdict::Unsat { analytic: analytic == items.len() },
    };
    Ok(SatReport { verdict, stats })
}

/// Satisfiability of a set of formulas: some model validates all of them.
pub fn sat_formulas(fs: &[Formula], cfg: &SatConfig) -> Result<SatReport, SatError> {
    let conclusion = Formula::conj(fs.iter().cloned()).unwrap_or_else(|| Formula::Geq(Term::one(), Term::one()));
    sat_bounded(&Sequent::new(Vec::new(), conclusion), cfg)
}

/// Value of `c_j` as a symbol.
pub fn constant_symbol(var: &Var, j: u32) -> Sym {
    Sym::constant(var, j)
}
