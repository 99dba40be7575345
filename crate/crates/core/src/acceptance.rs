//! End-to-end acceptance scenarios. Each check runs a fixed, seeded
//! experiment and reports a single pass/fail line.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuits::{
    decode_etr, encode_etr, etr_corpus, etr_feasible_small, min_width, parse_sexpr, random_free_system, system_to_etr,
    EtrTree,
};
use crate::grounding::{formula_sum_depth, unfold_sums, CoefficientMode, GroundingContext};
use crate::proofs::{check_script, mutant_fuzz, mutant_schemas, soundness_fuzz, FuzzConfig, Schema, System, CORPUS, DEFAULT_N_MAX};
use crate::sat::{
    brute_force_sat, sat_bounded, sat_formulas, solve_constraints_small, BruteConfig, BruteVerdict, SatConfig,
    SolveOutcome, Verdict,
};
use crate::scenarios::{self, conv_family, single_var_signature, sum_upper_family, FormulaShape};
use crate::scm::{random_scm, ConstantMode, GenConfig, Setting};
use crate::semantics::{
    eval_term, find_countermodel, satisfies, satisfies_sequent, valid_in_model, Assignment, ExtendedReal, SearchBudget,
};
use crate::syntax::{parse_sequent, parse_term, Sequent, Signature, Var};

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {}: {} ({:.2}s, limit {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds,
            self.limit_seconds
        )
    }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    /// Short selector used by `--only`.
    pub key: &'static str,
    pub limit_seconds: f64,
    run: fn(&RunContext) -> (bool, String),
}

#[derive(Clone, Debug)]
pub struct RunContext {
    pub seed: u64,
    /// Read proof scripts (`<dir>/<name>.prf`) and ETR trees
    /// (`<dir>/etr/<name>.sexp`) from disk instead of the embedded copies.
    pub corpus_dir: Option<PathBuf>,
}

impl RunContext {
    pub fn new(seed: u64) -> Self {
        RunContext { seed, corpus_dir: None }
    }

    fn text(&self, rel: &str, embedded: &'static str) -> Result<String, String> {
        match &self.corpus_dir {
            None => Ok(embedded.to_string()),
            Some(d) => std::fs::read_to_string(d.join(rel)).map_err(|e| format!("{}: {}", d.join(rel).display(), e)),
        }
    }
}

impl Criterion {
    /// Runs the check; exceeding the time limit counts as a failure.
    pub fn run(&self, ctx: &RunContext) -> CriterionResult {
        let start = Instant::now();
        let (ok, detail) = (self.run)(ctx);
        let seconds = start.elapsed().as_secs_f64();
        let in_time = seconds <= self.limit_seconds;
        let detail = if in_time { detail } else { format!("{}; over the time limit", detail) };
        CriterionResult { id: self.id, name: self.name, passed: ok && in_time, detail, seconds, limit_seconds: self.limit_seconds }
    }
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "front-door identity", key: "frontdoor", limit_seconds: 60.0, run: frontdoor },
    Criterion { id: 2, name: "LATE identification", key: "late", limit_seconds: 60.0, run: late },
    Criterion { id: 3, name: "causation without correlation", key: "cwc", limit_seconds: 1.0, run: cwc },
    Criterion { id: 4, name: "grounding equivalence", key: "grounding", limit_seconds: 120.0, run: grounding },
    Criterion { id: 5, name: "reduction vs. brute force", key: "reduction", limit_seconds: 600.0, run: reduction },
    Criterion { id: 6, name: "incompactness families", key: "incompactness", limit_seconds: 60.0, run: incompactness },
    Criterion { id: 7, name: "axiom soundness fuzz", key: "fuzz", limit_seconds: 300.0, run: fuzz },
    Criterion { id: 8, name: "corpus proofs", key: "proofs", limit_seconds: 10.0, run: proofs },
    Criterion { id: 9, name: "circuit round trip", key: "circuits", limit_seconds: 30.0, run: circuits },
];

/// Criteria whose key, number or name contains `filter`.
pub fn select(filter: &str) -> Vec<&'static Criterion> {
    let f = filter.to_ascii_lowercase();
    CRITERIA
        .iter()
        .filter(|c| c.key.contains(&f) || c.id.to_string() == f || c.name.to_ascii_lowercase().contains(&f))
        .collect()
}

pub const DEFAULT_SEED: u64 = 2024;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn frontdoor(ctx: &RunContext) -> (bool, String) {
    let seed = ctx.seed;
    let seq = scenarios::frontdoor_sequent();
    let results: Vec<Result<(), String>> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let m = scenarios::random_frontdoor_scm(&mut rng_for(seed, i));
            if !m.check_positivity() {
                return Err(format!("model {} is not positive", i));
            }
            for (k, p) in seq.premises.iter().enumerate() {
                if !valid_in_model(&m, p).map_err(|e| e.to_string())? {
                    return Err(format!("model {}: premise {} fails", i, k + 1));
                }
            }
            if !valid_in_model(&m, &seq.conclusion).map_err(|e| e.to_string())? {
                return Err(format!("model {}: conclusion fails", i));
            }
            Ok(())
        })
        .collect();
    match results.into_iter().find_map(Result::err) {
        Some(e) => (false, e),
        None => (true, "100 positive models: 5 premises and the adjustment formula hold exactly".into()),
    }
}

fn late(ctx: &RunContext) -> (bool, String) {
    let seed = ctx.seed;
    let seq = scenarios::late_sequent();
    let den = parse_term(scenarios::late_denominator_text(), &scenarios::late_signature()).expect("parses");
    let zero = ExtendedReal::finite(crate::num::zero());
    let results: Vec<Result<bool, String>> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let m = scenarios::random_late_scm(&mut rng_for(seed, i));
            for p in &seq.premises {
                if !valid_in_model(&m, p).map_err(|e| e.to_string())? {
                    return Err(format!("model {} violates a premise", i));
                }
            }
            if eval_term(&m, &Assignment::new(), &den).map_err(|e| e.to_string())? == zero {
                return Ok(false);
            }
            if !valid_in_model(&m, &seq.conclusion).map_err(|e| e.to_string())? {
                return Err(format!("model {}: ratio identity fails", i));
            }
            Ok(true)
        })
        .collect();
    let mut checked = 0;
    for r in results {
        match r {
            Ok(b) => checked += usize::from(b),
            Err(e) => return (false, e),
        }
    }
    let unguarded = scenarios::late_unguarded_sequent();
    let budget = SearchBudget { trials: 4000, range_sizes: vec![2], seed, ..SearchBudget::default() };
    let Some(cm) = find_countermodel(&unguarded, &budget) else {
        return (false, "no countermodel to the unguarded implication".into());
    };
    let violates = seq.premises.iter().any(|p| !valid_in_model(&cm.scm, p).unwrap_or(true));
    if !violates {
        return (false, "countermodel satisfies the identifying premises".into());
    }
    (
        checked >= 50,
        format!("identity exact in {} of 100 models with nonzero denominator; countermodel at trial {}", checked, cm.trial),
    )
}

fn cwc(_ctx: &RunContext) -> (bool, String) {
    let (m, mp) = scenarios::cwc_models();
    let (Ok(a), Ok(b)) = (m.joint_distribution(&Setting::new()), mp.joint_distribution(&Setting::new())) else {
        return (false, "joint distribution failed".into());
    };
    let quarter = crate::num::rat(1, 4);
    let same = a == b && a.len() == 4 && a.values().all(|w| *w == quarter);
    let f = scenarios::cwc_formula();
    let holds = [valid_in_model(&m, &f).unwrap_or(false), valid_in_model(&mp, &f).unwrap_or(true)];
    let ok = same && holds == [true, false];
    (ok, format!("joint laws equal on 4 cells: {}; causal equality holds in [M, M']: {:?}", same, holds))
}

fn grounding(ctx: &RunContext) -> (bool, String) {
    let seed = ctx.seed;
    let vars = [Var::new("X"), Var::new("Y")];
    let results: Vec<Result<u32, String>> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let n: u32 = if i % 2 == 0 { 2 } else { 3 };
            let shape = FormulaShape { constants: n, sum_depth: 2, depth: 3, causal: true, conditional: true };
            let phi = scenarios::random_formula(&mut rng, &vars, shape);
            let cfg = GenConfig { constants: ConstantMode::Shuffled, ..GenConfig::uniform(2, n as usize, 4, 12) };
            let m = random_scm(&mut rng, &vars, &cfg);
            let ctx = GroundingContext::new(n).map_err(|e| e.to_string())?.with_mode(CoefficientMode::Symbolic);
            let out = unfold_sums(&phi, &ctx).map_err(|e| e.to_string())?;
            let before = satisfies(&m, &Assignment::new(), &phi).map_err(|e| e.to_string())?;
            let after = satisfies(&m, &Assignment::new(), &out).map_err(|e| e.to_string())?;
            if before != after {
                return Err(format!("trial {}: {}", i, crate::syntax::print_formula(&phi)));
            }
            Ok(formula_sum_depth(&phi))
        })
        .collect();
    let mut nested = 0;
    for r in results {
        match r {
            Ok(d) => nested += usize::from(d >= 2),
            Err(e) => return (false, e),
        }
    }
    (true, format!("500 of 500 trials agree ({} with nested sums)", nested))
}

/// Contradictory sequents over at most two variables.
pub const UNSAT_TEMPLATES: &[&str] = &[
    "|- P(X=c1 & Y=c1) > P(X=c1)",
    "|- P(X=c1) + P(X=c2) > 1 & c1@X !~ c2@X",
    "|- P(X=c1) < 0",
    "|- P([X=c1] Y=c1) + P([X=c1] Y=c2) < 1 & c1@Y !~ c2@Y",
    "|- P(T) < 1",
    "|- P(X=c1) > 1/2 & P(X=c1) < 1/2",
    "|- (sum x1 . P(X=x1)) > 2",
    "|- P([X=c1] Y=c1) > 0 & P([X=c1] Y=c1) == 0",
    "|- P(X=c1 & Y=c2) > P(Y=c2)",
    "|- P(X=c1) * P(X=c1) > P(X=c1)",
    "|- P([Y=c1] X=c1) > 1",
    "|- P(X=c1 \\/ Y=c1) < P(X=c1)",
    "|- P(X=c1 & !X=c1) > 0",
    "P(X=c1) >= 0 |- P(X=c1) > 1",
    "|- P([X=c1] Y=c1) > P([X=c1] T)",
];

pub fn reduction_instances(seed: u64, random: usize) -> Vec<Sequent> {
    let sig = Signature::bounded(&["X", "Y"], 2).expect("valid signature");
    let mut out: Vec<Sequent> = UNSAT_TEMPLATES.iter().map(|t| parse_sequent(t, &sig).expect("template parses")).collect();
    let vars = [Var::new("X"), Var::new("Y")];
    let mut rng = rng_for(seed, 5);
    for _ in 0..random {
        let causal = rng.gen_bool(0.5);
        let shape = FormulaShape { constants: 2, sum_depth: 1, depth: 2, causal, conditional: false };
        out.push(Sequent::new(Vec::new(), scenarios::random_formula(&mut rng, &vars, shape)));
    }
    out
}

fn reduction(ctx: &RunContext) -> (bool, String) {
    let seed = ctx.seed;
    let instances = reduction_instances(seed, 40);
    let brute_cfg = BruteConfig { n: 2, denominator: 8, max_outcomes: 4, positive: false };
    let results: Vec<Result<(&'static str, bool), String>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let report = sat_bounded(s, &SatConfig::new(2, 8)).map_err(|e| format!("instance {}: {}", i, e))?;
            let brute = brute_force_sat(s, &brute_cfg).map_err(|e| format!("instance {}: {}", i, e))?;
            let agree = match (&report.verdict, &brute) {
                (Verdict::Sat(w), BruteVerdict::Sat(_)) => {
                    if !satisfies_sequent(&w.scm, s).unwrap_or(false) {
                        return Err(format!("instance {}: witness does not re-verify", i));
                    }
                    true
                }
                (Verdict::Unsat { .. }, BruteVerdict::Unsat) => true,
                (Verdict::Unknown { .. }, _) => return Ok(("unknown", true)),
                _ => false,
            };
            Ok((report.verdict.label(), agree))
        })
        .collect();
    let (mut sat, mut unsat, mut unknown) = (0, 0, 0);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Err(e) => return (false, e),
            Ok((_, false)) => return (false, format!("instance {} disagrees with brute force", i)),
            Ok(("SAT", _)) => sat += 1,
            Ok(("UNSAT", _)) => unsat += 1,
            Ok(_) => unknown += 1,
        }
    }
    let definitive = sat + unsat;
    (
        definitive >= 50,
        format!("{} instances: {} SAT, {} UNSAT agree with brute force; {} unknown", instances.len(), sat, unsat, unknown),
    )
}

fn incompactness(_ctx: &RunContext) -> (bool, String) {
    let s = single_var_signature(2);
    for n in 1..=10 {
        match sat_formulas(&conv_family(n, &s), &SatConfig::new(2, 16)) {
            Ok(r) if r.verdict.is_sat() => {}
            other => return (false, format!("Conv family n = {}: {:?}", n, other.map(|r| r.verdict.label()))),
        }
    }
    for big in 2..=3 {
        let s = single_var_signature(big);
        for n in 1..big {
            match sat_formulas(&[sum_upper_family(n, &s)], &SatConfig::new(big, 16)) {
                Ok(r) if r.verdict.is_sat() => {}
                other => {
                    return (false, format!("SumUpper N = {}, n = {}: {:?}", big, n, other.map(|r| r.verdict.label())))
                }
            }
        }
        match sat_formulas(&[sum_upper_family(big, &s)], &SatConfig::new(big, 16)) {
            Ok(r) if matches!(r.verdict, Verdict::Unsat { analytic: true }) => {}
            other => return (false, format!("SumUpper N = n = {}: {:?}", big, other.map(|r| r.verdict.label()))),
        }
    }
    (true, "Conv SAT for n <= 10; SumUpper SAT below N and analytically UNSAT at n = N (N = 2, 3)".into())
}

fn fuzz(ctx: &RunContext) -> (bool, String) {
    let seed = ctx.seed;
    let cfg = FuzzConfig::new(1000, seed);
    let reports: Vec<_> = Schema::ALL.par_iter().map(|&s| soundness_fuzz(s, &cfg)).collect();
    let violations: usize = reports.iter().map(|r| r.violation_count).sum();
    if let Some(r) = reports.iter().find(|r| r.violation_count > 0) {
        return (false, format!("{} has {} violations", r.schema, r.violation_count));
    }
    let mutants = mutant_schemas();
    let caught: Vec<_> = mutants.par_iter().map(|&m| (m, mutant_fuzz(m, &cfg).violation_count)).collect();
    if let Some((m, _)) = caught.iter().find(|(_, c)| *c == 0) {
        return (false, format!("mutant {:?} survived", m));
    }
    (
        mutants.len() >= 5 && violations == 0,
        format!("{} schemas x 1000 trials: 0 violations; {} of {} mutants caught", reports.len(), caught.len(), mutants.len()),
    )
}

fn proofs(ctx: &RunContext) -> (bool, String) {
    let mut bad = Vec::new();
    for e in CORPUS {
        let label = ctx
            .text(&format!("{}.prf", e.name), e.text)
            .and_then(|text| {
                let sys = System::parse(e.system, e.n).map_err(|err| err.to_string())?;
                check_script(&text, &sys, DEFAULT_N_MAX).map_err(|err| err.to_string())
            })
            .map(|v| v.label().to_string())
            .unwrap_or_else(|err| format!("error ({})", err));
        if label != e.expected {
            bad.push(format!("{}: {} (expected {})", e.name, label, e.expected));
        }
    }
    if bad.is_empty() {
        (true, format!("{} scripts return their expected verdicts", CORPUS.len()))
    } else {
        (false, bad.join("; "))
    }
}

fn circuits(ctx: &RunContext) -> (bool, String) {
    let seed = ctx.seed;
    for (name, text) in etr_corpus() {
        let text = match ctx.text(&format!("etr/{}.sexp", name), text) {
            Ok(t) => t,
            Err(err) => return (false, err),
        };
        let e = match parse_sexpr(&text) {
            Ok(e) => e,
            Err(err) => return (false, format!("{}: {}", name, err)),
        };
        let t = EtrTree::from_expr(&e);
        let w = min_width(&t);
        let decoded = encode_etr(&t, w).and_then(|c| decode_etr(&c, w));
        match decoded {
            Ok(d) if d.tree == t && d.queries == 1 << w => {}
            Ok(d) => return (false, format!("{}: round trip differs or issued {} queries at width {}", name, d.queries, w)),
            Err(err) => return (false, format!("{}: {}", name, err)),
        }
    }
    let mut rng = rng_for(seed, 9);
    for i in 0..25 {
        let vars = rng.gen_range(1..=2);
        let cs = random_free_system(&mut rng, vars);
        let direct = solve_constraints_small(&cs, 2);
        let via = system_to_etr(&cs).and_then(|e| {
            let t = EtrTree::from_expr(&e);
            let w = min_width(&t);
            let d = decode_etr(&encode_etr(&t, w)?, w)?;
            etr_feasible_small(&d.tree, 2)
        });
        let agree = match (&direct, &via) {
            (Ok(SolveOutcome::Witness(_)), Ok(SolveOutcome::Witness(x))) => cs.satisfied_by(x),
            (Ok(a), Ok(b)) => std::mem::discriminant(a) == std::mem::discriminant(b),
            _ => false,
        };
        if !agree {
            return (false, format!("instance {}: {:?} vs {:?}", i, direct, via));
        }
    }
    (true, format!("{} shipped trees round trip with 2^w queries; 25 of 25 instances agree", etr_corpus().len()))
}
