//! Line-oriented model files.
//!
//! ```text
//! vars X Z
//! ranges
//! X: 1 2
//! Z: 1 2
//! constants
//! X: 1 2
//! Z: 2 1
//! exo
//! u1: 1/2
//! u2: 1/2
//! fn X
//! u1 -> 1
//! u2 -> 2
//! fn Z(X)
//! 1, * -> 2
//! 2, u1 -> 1
//! 2, u2 -> 2
//! ```
//!
//! `constants` is optional (default: `c_i` names the `i`-th range value).
//! `*` in the outcome position covers every outcome. Each function must cover
//! every (parent values, outcome) row exactly once.

use std::collections::BTreeMap;

use super::{Mechanism, Scm, ScmError};
use crate::num::{fmt_short, parse_rational, Rational};
use crate::syntax::Var;

fn ferr<T>(line: usize, message: impl Into<String>) -> Result<T, ScmError> {
    Err(ScmError::Format { line, message: message.into() })
}

#[derive(PartialEq)]
enum Section {
    None,
    Ranges,
    Constants,
    Exo,
    Fn(usize),
}

struct FnDraft {
    parents: Vec<usize>,
    rows: BTreeMap<(Vec<u32>, usize), u32>,
    line: usize,
}

fn parse_values(s: &str, line: usize) -> Result<Vec<u32>, ScmError> {
    s.split_whitespace()
        .map(|t| t.parse::<u32>().or_else(|_| ferr(line, format!("expected a positive integer, found `{}`", t))))
        .collect()
}

pub fn parse_scm(text: &str) -> Result<Scm, ScmError> {
    let mut vars: Vec<Var> = Vec::new();
    let mut ranges: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut constants: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut outcomes: Vec<String> = Vec::new();
    let mut pmf: Vec<Rational> = Vec::new();
    let mut fns: BTreeMap<usize, FnDraft> = BTreeMap::new();
    let mut section = Section::None;

    let find_var = |vars: &[Var], name: &str, line: usize| -> Result<usize, ScmError> {
        vars.iter().position(|v| v.name() == name).map_or_else(|| ferr(line, format!("unknown variable `{}`", name)), Ok)
    };

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("vars") {
            if rest.starts_with(|c: char| !c.is_whitespace()) && !rest.is_empty() {
                return ferr(line, "expected `vars NAME ...`");
            }
            if !vars.is_empty() {
                return ferr(line, "duplicate `vars` line");
            }
            vars = rest.split_whitespace().map(Var::new).collect();
            if vars.is_empty() {
                return ferr(line, "`vars` needs at least one variable");
            }
            section = Section::None;
            continue;
        }
        match content {
            "ranges" => {
                section = Section::Ranges;
                continue;
            }
            "constants" => {
                section = Section::Constants;
                continue;
            }
            "exo" => {
                section = Section::Exo;
                continue;
            }
            _ => {}
        }
        if let Some(rest) = content.strip_prefix("fn ") {
            let rest = rest.trim();
            let (name, parents) = match rest.split_once('(') {
                Some((name, ps)) => {
                    let ps = ps.strip_suffix(')').map_or_else(|| ferr(line, "missing `)`"), Ok)?;
                    let parents: Vec<&str> = ps.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                    (name.trim(), parents)
                }
                None => (rest, Vec::new()),
            };
            let i = find_var(&vars, name, line)?;
            let parents = parents.iter().map(|p| find_var(&vars, p, line)).collect::<Result<Vec<_>, _>>()?;
            if fns.contains_key(&i) {
                return ferr(line, format!("duplicate function for {}", name));
            }
            fns.insert(i, FnDraft { parents, rows: BTreeMap::new(), line });
            section = Section::Fn(i);
            continue;
        }
        match section {
            Section::None => return ferr(line, format!("unexpected line `{}`", content)),
            Section::Ranges | Section::Constants => {
                let (name, vals) = content.split_once(':').map_or_else(|| ferr(line, "expected `NAME: values`"), Ok)?;
                let i = find_var(&vars, name.trim(), line)?;
                let vals = parse_values(vals, line)?;
                let target = if section == Section::Ranges { &mut ranges } else { &mut constants };
                if target.insert(i, vals).is_some() {
                    return ferr(line, format!("duplicate entry for {}", name.trim()));
                }
            }
            Section::Exo => {
                let (name, w) = content.split_once(':').map_or_else(|| ferr(line, "expected `outcome: weight`"), Ok)?;
                let name = name.trim();
                if name == "*" || name.is_empty() || outcomes.iter().any(|o| o == name) {
                    return ferr(line, format!("invalid or duplicate outcome `{}`", name));
                }
                let w = parse_rational(w).map_or_else(|| ferr(line, format!("bad weight `{}`", w.trim())), Ok)?;
                outcomes.push(name.to_string());
                pmf.push(w);
            }
            Section::Fn(i) => {
                let (lhs, rhs) = content.split_once("->").map_or_else(|| ferr(line, "expected `values, outcome -> value`"), Ok)?;
                let value: u32 = rhs.trim().parse().or_else(|_| ferr(line, format!("bad value `{}`", rhs.trim())))?;
                let fields: Vec<&str> = lhs.split(',').map(str::trim).collect();
                let draft = fns.get_mut(&i).expect("open function");
                if fields.len() != draft.parents.len() + 1 {
                    return ferr(line, format!("expected {} parent values and an outcome", draft.parents.len()));
                }
                let pvals = fields[..fields.len() - 1]
                    .iter()
                    .map(|s| s.parse::<u32>().or_else(|_| ferr(line, format!("bad parent value `{}`", s))))
                    .collect::<Result<Vec<_>, _>>()?;
                let out = fields[fields.len() - 1];
                let targets: Vec<usize> = if out == "*" {
                    (0..outcomes.len()).collect()
                } else {
                    vec![outcomes.iter().position(|o| o == out).map_or_else(|| ferr(line, format!("unknown outcome `{}`", out)), Ok)?]
                };
                for u in targets {
                    if draft.rows.insert((pvals.clone(), u), value).is_some() {
                        return ferr(line, format!("row {:?}, {} is defined twice", pvals, outcomes[u]));
                    }
                }
            }
        }
    }

    if vars.is_empty() {
        return ferr(1, "missing `vars` line");
    }
    if outcomes.is_empty() {
        return ferr(1, "missing `exo` section");
    }
    let mut range_list = Vec::new();
    let mut const_list = Vec::new();
    let mut mechs = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        let mut r = ranges.get(&i).cloned().map_or_else(|| ferr(1, format!("no range for {}", v)), Ok)?;
        r.sort_unstable();
        r.dedup();
        const_list.push(constants.get(&i).cloned().unwrap_or_else(|| r.clone()));
        range_list.push(r);
    }
    for (i, v) in vars.iter().enumerate() {
        let draft = fns.remove(&i).map_or_else(|| ferr(1, format!("no function for {}", v)), Ok)?;
        let mut table = Vec::new();
        let mut combos: Vec<Vec<u32>> = vec![vec![]];
        for &p in &draft.parents {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    range_list[p].iter().map(move |&x| {
                        let mut c = c.clone();
                        c.push(x);
                        c
                    })
                })
                .collect();
        }
        for combo in &combos {
            for u in 0..outcomes.len() {
                match draft.rows.get(&(combo.clone(), u)) {
                    Some(&val) => table.push(val),
                    None => {
                        return ferr(
                            draft.line,
                            format!("function {} is missing the row {:?}, {}", v, combo, outcomes[u]),
                        )
                    }
                }
            }
        }
        if draft.rows.len() != table.len() {
            return ferr(draft.line, format!("function {} has rows outside the parent ranges", v));
        }
        mechs.push(Mechanism::Table { parents: draft.parents, table });
    }
    Scm::new(vars, range_list, outcomes, pmf, mechs, const_list)
}

pub fn write_scm(scm: &Scm) -> String {
    let mut out = String::new();
    let names: Vec<&str> = scm.vars().iter().map(Var::name).collect();
    out.push_str(&format!("vars {}\nranges\n", names.join(" ")));
    let join = |vals: &[u32]| vals.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    for (i, v) in scm.vars().iter().enumerate() {
        out.push_str(&format!("{}: {}\n", v, join(scm.range(i))));
    }
    out.push_str("constants\n");
    for (i, v) in scm.vars().iter().enumerate() {
        out.push_str(&format!("{}: {}\n", v, join(scm.constants(i))));
    }
    out.push_str("exo\n");
    for (o, w) in scm.outcomes().iter().zip(scm.pmf()) {
        out.push_str(&format!("{}: {}\n", o, fmt_short(w)));
    }
    let k = scm.outcomes().len();
    for (i, v) in scm.vars().iter().enumerate() {
        match scm.mechanism(i) {
            Mechanism::Constant(c) => {
                out.push_str(&format!("fn {}\n* -> {}\n", v, c));
            }
            Mechanism::Table { parents, table } => {
                if parents.is_empty() {
                    out.push_str(&format!("fn {}\n", v));
                } else {
                    let ps: Vec<&str> = parents.iter().map(|&p| scm.vars()[p].name()).collect();
                    out.push_str(&format!("fn {}({})\n", v, ps.join(", ")));
                }
                for (row, chunk) in table.chunks(k).enumerate() {
                    let mut rest = row;
                    let mut pvals = Vec::new();
                    for &p in parents.iter().rev() {
                        let r = scm.range(p);
                        pvals.push(r[rest % r.len()]);
                        rest /= r.len();
                    }
                    pvals.reverse();
                    let prefix: String = pvals.iter().map(|x| format!("{}, ", x)).collect();
                    if chunk.iter().all(|&x| x == chunk[0]) && k > 1 {
                        out.push_str(&format!("{}* -> {}\n", prefix, chunk[0]));
                    } else {
                        for (u, val) in chunk.iter().enumerate() {
                            out.push_str(&format!("{}{} -> {}\n", prefix, scm.outcomes()[u], val));
                        }
                    }
                }
            }
        }
    }
    out
}
