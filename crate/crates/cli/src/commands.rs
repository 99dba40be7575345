use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use probsum_core::acceptance::{self, RunContext, CRITERIA};
use probsum_core::circuits::{
    decode_etr, encode_etr, eval_circuit, format_bits, etr_corpus, etr_feasible_with, min_width, parse_bits,
    parse_netlist, parse_sexpr, print_sexpr, write_netlist, EtrTree,
};
use probsum_core::grounding::{unfold_sums, universal_closure, CoefficientMode, GroundingContext, GroundingStats};
use probsum_core::proofs::{check_script, mutant_fuzz, mutant_schemas, soundness_fuzz, FuzzConfig, Schema, System, CORPUS};
use probsum_core::sat::{brute_force_sat, sat_bounded, BruteConfig, BruteVerdict, Mode, SatConfig, SolveLimits, SolveOutcome, Verdict};
use probsum_core::scm::{parse_scm, write_scm};
use probsum_core::semantics::{
    assignments, eval_term, find_countermodel, satisfies, satisfies_sequent, trace_line, ModelClass, SearchBudget,
};
use probsum_core::syntax::{
    classify_fragment, free_vars, parse_formula_lines, parse_sequent, print_formula, print_sequent, print_term,
    Formula, Sequent, Signature, Term,
};
use probsum_core::{Rational, Scm};

use crate::{CircuitCommand, Command, SigArgs, Status};

pub struct Output {
    pub json: Option<PathBuf>,
    pub quiet: bool,
}

impl Output {
    /// Prints the report and writes the JSON summary, tagged with the
    /// schema version and command name.
    fn emit(&self, command: &str, human: &str, mut summary: Value) -> Result<()> {
        if let Value::Object(m) = &mut summary {
            m.insert("schema".into(), json!(1));
            m.insert("command".into(), json!(command));
        }
        let text = serde_json::to_string_pretty(&summary)? + "\n";
        let to_stdout = self.json.as_deref() == Some(Path::new("-"));
        if !self.quiet {
            if to_stdout {
                eprint!("{}", human);
            } else {
                print!("{}", human);
            }
        }
        match &self.json {
            Some(_) if to_stdout => print!("{}", text),
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
            None => {}
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Drops `#` comment lines so sequents may span several lines.
fn strip_comments(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with('#')).collect::<Vec<_>>().join("\n")
}

/// Variable names in order of first use: identifiers starting with an
/// uppercase letter that appear as `V=...` or `...@V`.
fn infer_vars(text: &str) -> Vec<String> {
    let b = text.as_bytes();
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_alphabetic() && (i == 0 || !(b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'_')) {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            let word = &text[s..i];
            let mut j = i;
            while j < b.len() && b[j] == b' ' {
                j += 1;
            }
            let assigned = b.get(j) == Some(&b'=') && b.get(j + 1) != Some(&b'=');
            let after_at = s > 0 && b[s - 1] == b'@';
            if word.as_bytes()[0].is_ascii_uppercase() && (assigned || after_at) && !out.iter().any(|w| w == word) {
                out.push(word.to_string());
            }
        } else {
            i += 1;
        }
    }
    out
}

fn signature(sig: &SigArgs, text: &str) -> Result<Signature> {
    let vars = if sig.vars.is_empty() { infer_vars(text) } else { sig.vars.clone() };
    if vars.is_empty() {
        bail!("no variables found; pass --vars");
    }
    Ok(match sig.n {
        Some(n) => Signature::bounded(&vars, n)?,
        None => Signature::unbounded(&vars)?,
    })
}

fn model_signature(m: &Scm) -> Result<Signature> {
    let names: Vec<&str> = m.vars().iter().map(|v| v.name()).collect();
    Ok(Signature::unbounded(&names)?)
}

fn load_sequent(path: &Path, sig: &SigArgs) -> Result<Sequent> {
    let text = strip_comments(&read(path)?);
    let s = signature(sig, &text)?;
    parse_sequent(&text, &s).with_context(|| format!("parsing {}", path.display()))
}

fn load_model(path: &Path) -> Result<Scm> {
    let m = parse_scm(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    m.validate().map_err(|v| anyhow!("{}: {}", path.display(), v))?;
    Ok(m)
}

pub fn run(cmd: Command, out: &Output) -> Result<Status> {
    match cmd {
        Command::Parse { file, sig } => parse(&file, &sig, out),
        Command::Print { file, sig } => print(&file, &sig, out),
        Command::Eval { model, formula, trace } => eval(&model, &formula, trace.as_deref(), out),
        Command::EntailCheck { model, sequent } => entail_check(&model, &sequent, out),
        Command::FindCountermodel { sequent, sig, class, trials, seed, out: o } => {
            countermodel(&sequent, &sig, &class, trials, seed, o.as_deref(), out)
        }
        Command::Ground { file, n, vars, symbolic, stats } => ground(&file, n, vars, symbolic, stats, out),
        Command::Sat { sequent, n, denom, vars, positive, prob, support_cap, out: o } => {
            let mut cfg = SatConfig::new(n, denom);
            cfg.positive = positive;
            cfg.support_cap = support_cap;
            if prob {
                cfg.mode = Mode::Prob;
            }
            sat(&sequent, vars, &cfg, o.as_deref(), out)
        }
        Command::BruteSat { sequent, n, denom, outcomes, vars, positive, out: o } => {
            let cfg = BruteConfig { n, denominator: denom, max_outcomes: outcomes, positive };
            brute(&sequent, vars, &cfg, o.as_deref(), out)
        }
        Command::Prove { script, system, n, nmax } => prove(&script, &system, n, nmax, out),
        Command::FuzzSoundness { schema, trials, seed, mutants } => fuzz(&schema, trials, seed, mutants, out),
        Command::Circuit { command } => circuit(command, out),
        Command::Corpus { only, seed, corpus_dir, list } => corpus(only.as_deref(), seed, corpus_dir, list, out),
    }
}

fn parse(file: &Path, sig: &SigArgs, out: &Output) -> Result<Status> {
    let text = read(file)?;
    let s = signature(sig, &text)?;
    let fs = parse_formula_lines(&text, &s).with_context(|| format!("parsing {}", file.display()))?;
    let mut human = String::new();
    let mut items = Vec::new();
    for f in &fs {
        let frag = classify_fragment(f);
        let printed = print_formula(f);
        writeln!(
            human,
            "{}\n  causal={} closed={} circle={} max_constant={} cond_guarded={}",
            printed, frag.causal, frag.closed, frag.circle, frag.max_constant, frag.cond_guarded
        )?;
        items.push(json!({ "formula": printed, "fragment": frag }));
    }
    out.emit("parse", &human, json!({ "formulas": items }))?;
    Ok(Status::Definitive)
}

fn print(file: &Path, sig: &SigArgs, out: &Output) -> Result<Status> {
    let text = read(file)?;
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
    let printed = match ext {
        "scm" => write_scm(&parse_scm(&text)?),
        "ckt" => write_netlist(&parse_netlist(&text)?),
        "sexp" => print_sexpr(&parse_sexpr(&text)?) + "\n",
        "seq" => print_sequent(&load_sequent(file, sig)?) + "\n",
        _ => {
            let s = signature(sig, &text)?;
            let fs = parse_formula_lines(&text, &s).with_context(|| format!("parsing {}", file.display()))?;
            fs.iter().map(|f| print_formula(f) + "\n").collect()
        }
    };
    out.emit("print", &printed, json!({ "text": printed }))?;
    Ok(Status::Definitive)
}

/// The two sides of a comparison, if the formula is one.
fn sides(f: &Formula) -> Option<(&Term, &Term)> {
    if let Some(p) = f.as_approx().or_else(|| f.as_gt()) {
        return Some(p);
    }
    match f {
        Formula::Geq(a, b) => Some((a, b)),
        Formula::Not(inner) => match &**inner {
            Formula::Geq(a, b) => Some((a, b)),
            _ => None,
        },
        _ => None,
    }
}

fn eval(model: &Path, formula: &Path, trace: Option<&Path>, out: &Output) -> Result<Status> {
    let m = load_model(model)?;
    let sig = model_signature(&m)?;
    let fs = parse_formula_lines(&read(formula)?, &sig).with_context(|| format!("parsing {}", formula.display()))?;
    let mut human = String::new();
    let mut traces = String::new();
    let mut items = Vec::new();
    for f in &fs {
        let free: Vec<_> = free_vars(f).into_iter().collect();
        writeln!(human, "{}", print_formula(f))?;
        let mut rows = Vec::new();
        let mut valid = true;
        for iota in assignments(&m, &free)? {
            let holds = satisfies(&m, &iota, f)?;
            valid &= holds;
            let label: Vec<String> = iota.0.iter().map(|(v, x)| format!("{}={}", v, x)).collect();
            let mut row = json!({ "assignment": iota.to_json_map(), "holds": holds });
            if let Some((a, b)) = sides(f) {
                let (va, vb) = (eval_term(&m, &iota, a)?, eval_term(&m, &iota, b)?);
                writeln!(human, "  [{}] lhs = {}, rhs = {}, holds = {}", label.join(", "), va, vb, holds)?;
                for (t, v) in [(a, &va), (b, &vb)] {
                    traces.push_str(&trace_line(&print_term(t), &iota, v));
                    traces.push('\n');
                }
                row["lhs"] = json!(va.to_string());
                row["rhs"] = json!(vb.to_string());
            } else {
                writeln!(human, "  [{}] holds = {}", label.join(", "), holds)?;
            }
            rows.push(row);
        }
        writeln!(human, "  valid in model: {}", valid)?;
        items.push(json!({ "formula": print_formula(f), "valid": valid, "assignments": rows }));
    }
    if let Some(t) = trace {
        write(t, &traces)?;
    }
    out.emit("eval", &human, json!({ "model": model.display().to_string(), "results": items }))?;
    Ok(Status::Definitive)
}

fn entail_check(model: &Path, sequent: &Path, out: &Output) -> Result<Status> {
    let m = load_model(model)?;
    let names: Vec<String> = m.vars().iter().map(|v| v.name().to_string()).collect();
    let s = load_sequent(sequent, &SigArgs { vars: names, n: None })?;
    let ok = satisfies_sequent(&m, &s)?;
    let human = format!("{}\nsatisfied: {}\n", print_sequent(&s), ok);
    out.emit("entail-check", &human, json!({ "sequent": print_sequent(&s), "satisfied": ok }))?;
    Ok(Status::Definitive)
}

fn countermodel(
    sequent: &Path,
    sig: &SigArgs,
    class: &str,
    trials: usize,
    seed: u64,
    write_to: Option<&Path>,
    out: &Output,
) -> Result<Status> {
    let s = load_sequent(sequent, sig)?;
    let class: ModelClass = class.parse().map_err(|e: String| anyhow!(e))?;
    let budget = SearchBudget { trials, seed, class, ..SearchBudget::default() };
    match find_countermodel(&s, &budget) {
        Some(cm) => {
            let text = write_scm(&cm.scm);
            if let Some(p) = write_to {
                write(p, &text)?;
            }
            let human = format!("countermodel found at trial {} (assignment {:?})\n{}", cm.trial, cm.assignment.to_json_map(), text);
            let summary = json!({
                "result": "countermodel",
                "trial": cm.trial,
                "assignment": cm.assignment.to_json_map(),
                "model": text,
            });
            out.emit("find-countermodel", &human, summary)?;
            Ok(Status::Definitive)
        }
        None => {
            let human = format!("no countermodel in {} trials (unknown)\n", trials);
            out.emit("find-countermodel", &human, json!({ "result": "unknown", "trials": trials }))?;
            Ok(Status::Unknown)
        }
    }
}

fn ground(file: &Path, n: u32, vars: Vec<String>, symbolic: bool, stats: bool, out: &Output) -> Result<Status> {
    let text = read(file)?;
    let sig = signature(&SigArgs { vars, n: Some(n) }, &text)?;
    let fs = parse_formula_lines(&text, &sig).with_context(|| format!("parsing {}", file.display()))?;
    let mode = if symbolic { CoefficientMode::Symbolic } else { CoefficientMode::Canonical };
    let ctx = GroundingContext::new(n)?.with_mode(mode);
    let mut human = String::new();
    let mut items = Vec::new();
    for f in &fs {
        let closed = universal_closure(f, &ctx)?;
        let g = unfold_sums(&closed, &ctx)?;
        writeln!(human, "{}", print_formula(&g))?;
        let mut item = json!({ "input": print_formula(f), "ground": print_formula(&g) });
        if stats {
            let st = GroundingStats::measure(&closed, &g, n);
            writeln!(
                human,
                "  input size {}, output size {}, sum depth {}, bound {} = {}",
                st.input_size, st.output_size, st.sum_depth, st.bound_formula, st.size_bound
            )?;
            item["stats"] = json!({
                "input_size": st.input_size,
                "output_size": st.output_size,
                "sum_depth": st.sum_depth,
                "size_bound": st.size_bound.to_string(),
            });
        }
        items.push(item);
    }
    out.emit("ground", &human, json!({ "n": n, "formulas": items }))?;
    Ok(Status::Definitive)
}

fn sat(path: &Path, vars: Vec<String>, cfg: &SatConfig, write_to: Option<&Path>, out: &Output) -> Result<Status> {
    let s = load_sequent(path, &SigArgs { vars, n: Some(cfg.n) })?;
    let report = sat_bounded(&s, cfg)?;
    let mut summary = json!({
        "verdict": report.verdict.label(),
        "n": cfg.n,
        "denominator": cfg.denominator,
        "stats": report.stats,
    });
    let mut human = format!("{}\n", report.verdict.label());
    let status = match &report.verdict {
        Verdict::Sat(w) => {
            let text = write_scm(&w.scm);
            if let Some(p) = write_to {
                write(p, &text)?;
            }
            let order: Vec<&str> = w.order.iter().map(|v| v.name()).collect();
            writeln!(human, "case: {}\norder: {}", w.case, order.join(" < "))?;
            for e in &w.support {
                writeln!(human, "  {} = {}: {}", e.outcome, e.probability, e.description.join("; "))?;
            }
            human.push_str(&text);
            summary["witness"] = json!({ "case": w.case, "order": order, "support": w.support, "model": text });
            Status::Definitive
        }
        Verdict::Unsat { analytic } => {
            writeln!(human, "{}", if *analytic { "excluded analytically" } else { "no model at this scale" })?;
            summary["analytic"] = json!(analytic);
            Status::Definitive
        }
        Verdict::Unknown { reason } => {
            writeln!(human, "{}", reason)?;
            summary["reason"] = json!(reason);
            Status::Unknown
        }
    };
    writeln!(
        human,
        "cases {}, orders {}, descriptions {}, classes {}, supports tried {}, |Delta| {}",
        report.stats.cases,
        report.stats.orders,
        report.stats.descriptions,
        report.stats.classes,
        report.stats.supports_tried,
        report.stats.full_delta
    )?;
    out.emit("sat", &human, summary)?;
    Ok(status)
}

fn brute(path: &Path, vars: Vec<String>, cfg: &BruteConfig, write_to: Option<&Path>, out: &Output) -> Result<Status> {
    let s = load_sequent(path, &SigArgs { vars, n: Some(cfg.n) })?;
    let (human, summary) = match brute_force_sat(&s, cfg)? {
        BruteVerdict::Sat(m) => {
            let text = write_scm(&m);
            if let Some(p) = write_to {
                write(p, &text)?;
            }
            (format!("SAT\n{}", text), json!({ "verdict": "SAT", "model": text }))
        }
        BruteVerdict::Unsat => ("UNSAT\n".to_string(), json!({ "verdict": "UNSAT" })),
    };
    out.emit("brute-sat", &human, summary)?;
    Ok(Status::Definitive)
}

fn prove(script: &Path, system: &str, n: Option<u32>, nmax: u32, out: &Output) -> Result<Status> {
    let sys = System::parse(system, n)?;
    let v = check_script(&read(script)?, &sys, nmax)?;
    let mut human = format!("{}\n", v.label());
    if let probsum_core::proofs::ProofVerdict::Rejected { line, reason } = &v {
        writeln!(human, "  at {}: {}", line, reason)?;
    }
    out.emit("prove", &human, json!({ "system": system, "n_max": nmax, "result": v }))?;
    Ok(Status::Definitive)
}

fn fuzz(schema: &str, trials: usize, seed: u64, mutants: bool, out: &Output) -> Result<Status> {
    let cfg = FuzzConfig::new(trials, seed);
    let schemas: Vec<Schema> = if schema == "all" {
        Schema::ALL.to_vec()
    } else {
        vec![schema.parse().map_err(|e| anyhow!("{}", e))?]
    };
    let mut human = String::new();
    let mut reports = Vec::new();
    for s in schemas {
        let r = soundness_fuzz(s, &cfg);
        writeln!(human, "{:<14} {:<6} {} trials, {} accepted, {} violations", r.schema, r.class, r.trials, r.accepted, r.violation_count)?;
        reports.push(r);
    }
    let mut mutant_reports = Vec::new();
    if mutants {
        for m in mutant_schemas() {
            let r = mutant_fuzz(m, &cfg);
            writeln!(human, "mutant {:<24} {} violations", format!("{:?}", m), r.violation_count)?;
            mutant_reports.push(json!({ "mutant": format!("{:?}", m), "report": r }));
        }
    }
    let violations: usize = reports.iter().map(|r| r.violation_count).sum();
    writeln!(human, "total violations: {}", violations)?;
    out.emit("fuzz-soundness", &human, json!({ "seed": seed, "reports": reports, "mutants": mutant_reports }))?;
    Ok(Status::Definitive)
}

fn load_tree(path: &Path, width: Option<usize>) -> Result<EtrTree> {
    let text = read(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("sexp") {
        return Ok(EtrTree::from_expr(&parse_sexpr(&text)?));
    }
    let w = width.ok_or_else(|| anyhow!("decoding a netlist needs --width"))?;
    Ok(decode_etr(&parse_netlist(&text)?, w)?.tree)
}

fn outcome_json(o: &SolveOutcome) -> (String, Value) {
    match o {
        SolveOutcome::Witness(x) => {
            let xs: Vec<String> = x.iter().map(Rational::to_string).collect();
            (format!("witness: {}", xs.join(", ")), json!({ "result": "witness", "point": xs }))
        }
        SolveOutcome::Infeasible => ("infeasible over the reals".into(), json!({ "result": "infeasible" })),
        SolveOutcome::NoWitnessAtBound => ("no witness at this bound".into(), json!({ "result": "no-witness-at-bound" })),
        SolveOutcome::BudgetExhausted => ("search budget exhausted".into(), json!({ "result": "budget-exhausted" })),
    }
}

fn circuit(cmd: CircuitCommand, out: &Output) -> Result<Status> {
    match cmd {
        CircuitCommand::Eval { file, input } => {
            let c = parse_netlist(&read(&file)?)?;
            let bits = parse_bits(&input).map_err(|e| anyhow!(e))?;
            let o = format_bits(&eval_circuit(&c, &bits)?);
            out.emit("circuit eval", &format!("{}\n", o), json!({ "input": input, "output": o }))?;
            Ok(Status::Definitive)
        }
        CircuitCommand::Decode { file, width } => {
            let c = parse_netlist(&read(&file)?)?;
            let d = decode_etr(&c, width)?;
            let e = d.tree.to_expr()?;
            let mut human = format!("{}\n{} nodes, {} queries at width {}\n", print_sexpr(&e), d.tree.len(), d.queries, width);
            for (a, n) in &d.tree.nodes {
                let p = n.parent.map_or("-".to_string(), |p| p.to_string());
                let ch: Vec<String> = n.children.iter().map(u64::to_string).collect();
                writeln!(human, "  {:>4}: {:<4} parent {:<4} children [{}]", a, n.label.to_string(), p, ch.join(", "))?;
            }
            let summary = json!({ "tree": print_sexpr(&e), "nodes": d.tree.len(), "queries": d.queries, "width": width });
            out.emit("circuit decode", &human, summary)?;
            Ok(Status::Definitive)
        }
        CircuitCommand::Encode { file, width } => {
            let t = EtrTree::from_expr(&parse_sexpr(&read(&file)?)?);
            let w = width.unwrap_or_else(|| min_width(&t));
            let c = encode_etr(&t, w)?;
            let text = write_netlist(&c);
            out.emit("circuit encode", &text, json!({ "width": w, "gates": c.size(), "netlist": text }))?;
            Ok(Status::Definitive)
        }
        CircuitCommand::Feasible { file, width, denom, magnitude } => {
            let t = load_tree(&file, width)?;
            let o = etr_feasible_with(&t, denom, magnitude, &SolveLimits::default())?;
            let (human, mut summary) = outcome_json(&o);
            summary["tree"] = json!(print_sexpr(&t.to_expr()?));
            out.emit("circuit feasible", &(human + "\n"), summary)?;
            Ok(match o {
                SolveOutcome::Witness(_) | SolveOutcome::Infeasible => Status::Definitive,
                _ => Status::Unknown,
            })
        }
    }
}

fn corpus(only: Option<&str>, seed: u64, corpus_dir: Option<PathBuf>, list: bool, out: &Output) -> Result<Status> {
    let selected = match only {
        Some(f) => acceptance::select(f),
        None => CRITERIA.iter().collect(),
    };
    if selected.is_empty() {
        bail!("no scenario matches `{}`", only.unwrap_or(""));
    }
    if list {
        let mut human = String::new();
        for c in &selected {
            writeln!(human, "{:>2}  {:<14} {}", c.id, c.key, c.name)?;
        }
        let proofs: Vec<&str> = CORPUS.iter().map(|e| e.name).collect();
        let trees: Vec<&str> = etr_corpus().iter().map(|(n, _)| *n).collect();
        writeln!(human, "proof scripts: {}\nETR trees: {}", proofs.join(", "), trees.join(", "))?;
        let keys: Vec<&str> = selected.iter().map(|c| c.key).collect();
        out.emit("corpus", &human, json!({ "scenarios": keys, "proofs": proofs, "trees": trees }))?;
        return Ok(Status::Definitive);
    }
    let ctx = RunContext { seed, corpus_dir };
    let start = Instant::now();
    let mut human = String::new();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for c in selected {
        let r = c.run(&ctx);
        writeln!(human, "{}", r.line())?;
        if !r.passed {
            failed.push(format!("{}. {}", r.id, r.name));
        }
        rows.push(json!({ "id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail }));
    }
    writeln!(human, "{} of {} passed in {:.2}s", rows.len() - failed.len(), rows.len(), start.elapsed().as_secs_f64())?;
    out.emit("corpus", &human, json!({ "seed": seed, "results": rows }))?;
    if failed.is_empty() {
        Ok(Status::Definitive)
    } else {
        bail!("failing scenarios: {}", failed.join(", "))
    }
}
