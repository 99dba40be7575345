//! Seeded random model generators.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{Mechanism, Scm};
use crate::num::Rational;
use crate::syntax::Var;

/// How constants are interpreted in generated models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantMode {
    /// `c_i` names the `i`-th range value; `N = |Val(V)|`.
    Identity,
    /// A random bijection between `c_1..c_k` and the range.
    Shuffled,
    /// Exactly `n` constants mapped surjectively (requires `n ≥ |Val(V)|`).
    Count(usize),
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Range size per variable; values are `1..=k`.
    pub range_sizes: Vec<usize>,
    /// Number of exogenous outcomes (ignored by the positive generator).
    pub outcomes: usize,
    /// Weights are multiples of `1/denominator`.
    pub denominator: u64,
    /// Probability that an earlier variable is a parent.
    pub edge_probability: f64,
    pub constants: ConstantMode,
}

impl GenConfig {
    pub fn uniform(vars: usize, range: usize, outcomes: usize, denominator: u64) -> Self {
        GenConfig {
            range_sizes: vec![range; vars],
            outcomes,
            denominator,
            edge_probability: 0.5,
            constants: ConstantMode::Identity,
        }
    }
}

/// Random composition of `total` into `parts` parts, each ≥ `min`.
pub(crate) fn composition<R: Rng + ?Sized>(rng: &mut R, total: u64, parts: usize, min: u64) -> Vec<u64> {
    assert!(parts >= 1 && total >= min * parts as u64);
    let free = total - min * parts as u64;
    // Stars and bars over `free + parts - 1` slots.
    let slots = (free + parts as u64 - 1) as usize;
    let mut bars: Vec<usize> = rand::seq::index::sample(rng, slots, parts - 1).into_vec();
    bars.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0usize;
    for (k, &b) in bars.iter().enumerate() {
        let start = if k == 0 { 0 } else { prev + 1 };
        out.push((b - start) as u64 + min);
        prev = b;
    }
    let start = if bars.is_empty() { 0 } else { prev + 1 };
    out.push((slots - start) as u64 + min);
    out
}

fn weights(parts: &[u64], denominator: u64) -> Vec<Rational> {
    parts.iter().map(|&p| Rational::new(BigInt::from(p), BigInt::from(denominator))).collect()
}

fn constants_for<R: Rng + ?Sized>(rng: &mut R, range: &[u32], mode: ConstantMode) -> Vec<u32> {
    match mode {
        ConstantMode::Identity => range.to_vec(),
        ConstantMode::Shuffled => {
            let mut c = range.to_vec();
            c.shuffle(rng);
            c
        }
        ConstantMode::Count(n) => {
            assert!(n >= range.len(), "need at least as many constants as values");
            let mut c = range.to_vec();
            while c.len() < n {
                c.push(range[rng.gen_range(0..range.len())]);
            }
            c.shuffle(rng);
            c
        }
    }
}

fn random_parents<R: Rng + ?Sized>(rng: &mut R, i: usize, p: f64) -> Vec<usize> {
    (0..i).filter(|_| rng.gen_bool(p)).collect()
}

/// A validated model with arbitrary (possibly zero) weights and random tables.
pub fn random_scm<R: Rng + ?Sized>(rng: &mut R, vars: &[Var], cfg: &GenConfig) -> Scm {
    let k = cfg.outcomes.max(1);
    let denominator = cfg.denominator.max(1);
    let pmf = weights(&composition(rng, denominator, k, 0), denominator);
    let ranges: Vec<Vec<u32>> = cfg.range_sizes.iter().map(|&r| (1..=r as u32).collect()).collect();
    let mut mechanisms = Vec::new();
    for (i, range) in ranges.iter().enumerate() {
        let parents = random_parents(rng, i, cfg.edge_probability);
        let rows: usize = parents.iter().map(|&p| ranges[p].len()).product::<usize>() * k;
        let table = (0..rows).map(|_| range[rng.gen_range(0..range.len())]).collect();
        mechanisms.push(Mechanism::Table { parents, table });
    }
    let constants = ranges.iter().map(|r| constants_for(rng, r, cfg.constants)).collect();
    let outcomes = (1..=k).map(|u| format!("u{}", u)).collect();
    let scm = Scm::new(vars.to_vec(), ranges, outcomes, pmf, mechanisms, constants).expect("generated model is well-formed");
    debug_assert!(scm.validate().is_ok());
    scm
}

/// A validated model whose observational distribution is strictly positive.
///
/// The exogenous space is the product of one noise coordinate per variable
/// with a joint (confounded) positive pmf, and `f_V(pa, u)` applies a random
/// permutation of `Val(V)`, chosen per parent setting, to `V`'s noise
/// coordinate. `cfg.outcomes` is ignored.
pub fn random_positive_scm<R: Rng + ?Sized>(rng: &mut R, vars: &[Var], cfg: &GenConfig) -> Scm {
    let ranges: Vec<Vec<u32>> = cfg.range_sizes.iter().map(|&r| (1..=r as u32).collect()).collect();
    let cells: usize = ranges.iter().map(Vec::len).product();
    let denominator = cfg.denominator.max(cells as u64);
    let pmf = weights(&composition(rng, denominator, cells, 1), denominator);
    // Noise coordinate of V at outcome u: digit of u in the mixed radix of ranges.
    let digit = |u: usize, i: usize| -> usize {
        let stride: usize = ranges[i + 1..].iter().map(Vec::len).product();
        (u / stride) % ranges[i].len()
    };
    let mut mechanisms = Vec::new();
    for (i, range) in ranges.iter().enumerate() {
        let parents = random_parents(rng, i, cfg.edge_probability);
        let combos: usize = parents.iter().map(|&p| ranges[p].len()).product();
        let perms: Vec<Vec<u32>> = (0..combos)
            .map(|_| {
                let mut p = range.clone();
                p.shuffle(rng);
                p
            })
            .collect();
        let mut table = Vec::with_capacity(combos * cells);
        for perm in &perms {
            for u in 0..cells {
                table.push(perm[digit(u, i)]);
            }
        }
        mechanisms.push(Mechanism::Table { parents, table });
    }
    let constants = ranges.iter().map(|r| constants_for(rng, r, cfg.constants)).collect();
    let outcomes = (1..=cells).map(|u| format!("u{}", u)).collect();
    let scm = Scm::new(vars.to_vec(), ranges, outcomes, pmf, mechanisms, constants).expect("generated model is well-formed");
    debug_assert!(scm.validate().is_ok() && scm.check_positivity());
    scm
}
