use num_integer::Integer;
use rayon::prelude::*;

use super::{for_each_composition, next_combination, permutations, SatError};
use crate::num::Rational;
use crate::scm::{Mechanism, Scm};
use crate::semantics::satisfies_sequent;
use crate::syntax::{classify_fragment, Sequent, Var};

#[derive(Clone, Debug)]
pub struct BruteConfig {
    pub n: u32,
    pub denominator: u64,
    pub max_outcomes: usize,
    pub positive: bool,
}

#[derive(Clone, Debug)]
pub enum BruteVerdict {
    Sat(Box<Scm>),
    Unsat,
}

impl BruteVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, BruteVerdict::Sat(_))
    }
}

/// Value sets `S ⊆ 1..=n` with every surjection from the constants onto `S`.
fn var_options(n: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let set: Vec<u32> = (1..=n).filter(|v| mask & (1 << (v - 1)) != 0).collect();
        let total = set.len().pow(n);
        for code in 0..total {
            let mut c = code;
            let consts: Vec<u32> = (0..n)
                .map(|_| {
                    let v = set[c % set.len()];
                    c /= set.len();
                    v
                })
                .collect();
            if set.iter().all(|v| consts.contains(v)) {
                out.push((set.clone(), consts));
            }
        }
    }
    out
}

/// Every function table for each variable in `order` given all earlier ones.
fn response_types(ranges: &[Vec<u32>], order: &[usize]) -> Vec<Vec<Vec<u32>>> {
    let mut types: Vec<Vec<Vec<u32>>> = vec![Vec::new()];
    for (r, &v) in order.iter().enumerate() {
        let rows: usize = order[..r].iter().map(|&w| ranges[w].len()).product();
        let k = ranges[v].len();
        let count = k.pow(rows as u32);
        let mut next = Vec::with_capacity(types.len() * count);
        for t in &types {
            for code in 0..count {
                let mut c = code;
                let table: Vec<u32> = (0..rows)
                    .map(|_| {
                        let val = ranges[v][c % k];
                        c /= k;
                        val
                    })
                    .collect();
                let mut u = t.clone();
                u.push(table);
                next.push(u);
            }
        }
        types = next;
    }
    types
}

fn search(
    s: &Sequent,
    vars: &[Var],
    ranges: &[Vec<u32>],
    constants: &[Vec<u32>],
    order: &[usize],
    cfg: &BruteConfig,
) -> Option<Scm> {
    let types = response_types(ranges, order);
    let ord_vars: Vec<Var> = order.iter().map(|&i| vars[i].clone()).collect();
    let ord_ranges: Vec<Vec<u32>> = order.iter().map(|&i| ranges[i].clone()).collect();
    let ord_consts: Vec<Vec<u32>> = order.iter().map(|&i| constants[i].clone()).collect();
    let max_k = cfg.max_outcomes.min(types.len()).min(cfg.denominator as usize);
    for k in 1..=max_k {
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            let mechanisms: Vec<Mechanism> = (0..order.len())
                .map(|r| {
                    let rows = types[0][r].len();
                    let mut table = vec![0; rows * k];
                    for (u, &t) in pick.iter().enumerate() {
                        for row in 0..rows {
                            table[row * k + u] = types[t][r][row];
                        }
                    }
                    Mechanism::Table { parents: (0..r).collect(), table }
                })
                .collect();
            let outcomes: Vec<String> = (1..=k).map(|u| format!("u{}", u)).collect();
            let mut found = None;
            for q in 1..=cfg.denominator {
                let done = !for_each_composition(q, k, 1, &mut |parts: &[u64]| {
                    if parts.iter().fold(q, |g, &p| g.gcd(&p)) != 1 {
                        return true;
                    }
                    let pmf: Vec<Rational> =
                        parts.iter().map(|&p| Rational::new((p as i64).into(), (q as i64).into())).collect();
                    let scm = Scm::new(
                        ord_vars.clone(),
                        ord_ranges.clone(),
                        outcomes.clone(),
                        pmf,
                        mechanisms.clone(),
                        ord_consts.clone(),
                    )
                    .expect("enumerated tables are well formed");
                    if cfg.positive && !scm.check_positivity() {
                        return true;
                    }
                    if satisfies_sequent(&scm, s).unwrap_or(false) {
                        found = Some(scm);
                        return false;
                    }
                    true
                });
                if done {
                    break;
                }
            }
            if found.is_some() {
                return found;
            }
            if !next_combination(&mut pick, types.len()) {
                break;
            }
        }
    }
    None
}

/// Enumerates small models directly: value sets and constant maps, causal
/// orders, sets of distinct response types and grid distributions over them.
pub fn brute_force_sat(s: &Sequent, cfg: &BruteConfig) -> Result<BruteVerdict, SatError> {
    let vars: Vec<Var> = s.variables().into_iter().collect();
    if vars.len() > 2 || cfg.n == 0 || cfg.n > 2 || cfg.max_outcomes > 4 || cfg.denominator == 0 {
        return Err(SatError::Cap("brute force handles at most 2 variables, n in 1..=2 and 4 outcomes".into()));
    }
    for f in s.premises.iter().chain(std::iter::once(&s.conclusion)) {
        let frag = classify_fragment(f);
        if frag.max_constant > cfg.n {
            return Err(SatError::OutOfScope(format!("constant c{} with n = {}", frag.max_constant, cfg.n)));
        }
    }
    let opts = var_options(cfg.n);
    let mut interps: Vec<(Vec<Vec<u32>>, Vec<Vec<u32>>)> = vec![(Vec::new(), Vec::new())];
    for _ in &vars {
        interps = interps
            .into_iter()
            .flat_map(|(r, c)| {
                opts.iter().map(move |(set, consts)| {
                    let mut r = r.clone();
                    let mut c = c.clone();
                    r.push(set.clone());
                    c.push(consts.clone());
                    (r, c)
                })
            })
            .collect();
    }
    let orders = permutations(vars.len());
    let items: Vec<(usize, &Vec<usize>)> =
        (0..interps.len()).flat_map(|i| orders.iter().map(move |o| (i, o))).collect();
    let found = items.par_iter().find_map_first(|(i, order)| {
        let (ranges, constants) = &interps[*i];
        search(s, &vars, ranges, constants, order, cfg)
    });
    Ok(match found {
        Some(scm) => BruteVerdict::Sat(Box::new(scm)),
        None => BruteVerdict::Unsat,
    })
}
