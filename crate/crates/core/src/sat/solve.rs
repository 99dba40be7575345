//! Small-instance feasibility: exact interval branch-and-bound for
//! infeasibility proofs and a bounded-denominator grid search for witnesses.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::poly::{ConstraintSystem, Domain, Monomial, Poly, Rel};
use super::SatError;
use crate::num::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// An exactly verified point.
    Witness(Vec<Rational>),
    /// Interval reasoning shows no real point satisfies the system.
    Infeasible,
    /// The whole grid at this denominator bound was searched without success.
    NoWitnessAtBound,
    /// The point budget ran out before the grid was exhausted.
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveLimits {
    /// Largest number of unknowns accepted for the simplex domain.
    pub max_simplex_unknowns: usize,
    /// Largest number of unknowns accepted for the free domain.
    pub max_free_unknowns: usize,
    /// Grid points checked before giving up.
    pub max_points: u64,
    /// Boxes examined by the interval search.
    pub interval_nodes: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_simplex_unknowns: 64, max_free_unknowns: 6, max_points: 2_000_000, interval_nodes: 2_000 }
    }
}

/// Searches for a witness with denominators at most `denominator`, after a
/// quick interval check for outright infeasibility.
pub fn solve_constraints_small(cs: &ConstraintSystem, denominator: u64) -> Result<SolveOutcome, SatError> {
    solve_with_limits(cs, denominator, &SolveLimits::default())
}

pub fn solve_with_limits(cs: &ConstraintSystem, denominator: u64, limits: &SolveLimits) -> Result<SolveOutcome, SatError> {
    let cap = match cs.domain {
        Domain::Simplex { .. } => limits.max_simplex_unknowns,
        Domain::Free { .. } => limits.max_free_unknowns,
    };
    if cs.unknowns > cap {
        return Err(SatError::Cap(format!("{} unknowns exceed the solver cap of {}", cs.unknowns, cap)));
    }
    if interval_infeasible(cs, limits.interval_nodes) {
        return Ok(SolveOutcome::Infeasible);
    }
    Ok(grid_search(cs, denominator, limits.max_points))
}

// ---------------------------------------------------------------------------
// Grid search

/// Calls `f` on every composition of `total` into `parts` parts, each at
/// least `min`, largest first part first. Stops early when `f` returns false;
/// the return value says whether the enumeration ran to completion.
pub fn for_each_composition(total: u64, parts: usize, min: u64, f: &mut impl FnMut(&[u64]) -> bool) -> bool {
    fn rec(rest: u64, parts: usize, min: u64, buf: &mut Vec<u64>, f: &mut impl FnMut(&[u64]) -> bool) -> bool {
        if parts == 1 {
            buf.push(rest);
            let go = f(buf);
            buf.pop();
            return go;
        }
        let reserve = min * (parts as u64 - 1);
        if rest < reserve + min {
            return true;
        }
        let mut x = rest - reserve;
        loop {
            buf.push(x);
            let go = rec(rest - x, parts - 1, min, buf, f);
            buf.pop();
            if !go {
                return false;
            }
            if x == min {
                break;
            }
            x -= 1;
        }
        true
    }
    if parts == 0 {
        return true;
    }
    if total < min * parts as u64 {
        return true;
    }
    rec(total, parts, min, &mut Vec::with_capacity(parts), f)
}

fn gcd_all(xs: impl IntoIterator<Item = u64>, q: u64) -> u64 {
    xs.into_iter().fold(q, |g, x| g.gcd(&x))
}

fn grid_search(cs: &ConstraintSystem, denominator: u64, max_points: u64) -> SolveOutcome {
    let mut points = 0u64;
    let mut found = None;
    let mut exhausted = false;
    match cs.domain {
        Domain::Simplex { strict } => {
            if cs.unknowns == 0 {
                return SolveOutcome::NoWitnessAtBound;
            }
            let min = u64::from(strict);
            for q in 1..=denominator.max(1) {
                let complete = for_each_composition(q, cs.unknowns, min, &mut |parts| {
                    if q > 1 && gcd_all(parts.iter().copied(), q) != 1 {
                        return true;
                    }
                    points += 1;
                    if points > max_points {
                        exhausted = true;
                        return false;
                    }
                    let point: Vec<Rational> =
                        parts.iter().map(|&k| Rational::new(BigInt::from(k), BigInt::from(q))).collect();
                    if cs.satisfied_by(&point) {
                        found = Some(point);
                        return false;
                    }
                    true
                });
                if !complete {
                    break;
                }
            }
        }
        Domain::Free { magnitude } => {
            if cs.unknowns == 0 {
                return if cs.satisfied_by(&[]) { SolveOutcome::Witness(Vec::new()) } else { SolveOutcome::NoWitnessAtBound };
            }
            'outer: for q in 1..=denominator.max(1) {
                let bound = i64::from(magnitude) * q as i64;
                let values: Vec<i64> = std::iter::once(0)
                    .chain((1..=bound).flat_map(|k| [k, -k]))
                    .collect();
                let mut idx = vec![0usize; cs.unknowns];
                loop {
                    let nums: Vec<i64> = idx.iter().map(|&i| values[i]).collect();
                    if q == 1 || gcd_all(nums.iter().map(|k| k.unsigned_abs()), q) == 1 {
                        points += 1;
                        if points > max_points {
                            exhausted = true;
                            break 'outer;
                        }
                        let point: Vec<Rational> =
                            nums.iter().map(|&k| Rational::new(BigInt::from(k), BigInt::from(q))).collect();
                        if cs.satisfied_by(&point) {
                            found = Some(point);
                            break 'outer;
                        }
                    }
                    let mut k = cs.unknowns;
                    loop {
                        if k == 0 {
                            continue 'outer;
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < values.len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
        }
    }
    match found {
        Some(p) => SolveOutcome::Witness(p),
        None if exhausted => SolveOutcome::BudgetExhausted,
        None => SolveOutcome::NoWitnessAtBound,
    }
}

// ---------------------------------------------------------------------------
// Interval reasoning

#[derive(Clone, Debug, PartialEq, Eq)]
struct Iv {
    lo: Rational,
    hi: Rational,
}

impl Iv {
    fn point(x: Rational) -> Iv {
        Iv { lo: x.clone(), hi: x }
    }

    fn add(&self, o: &Iv) -> Iv {
        Iv { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    fn mul(&self, o: &Iv) -> Iv {
        let c = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = c.iter().min().expect("four products").clone();
        let hi = c.iter().max().expect("four products").clone();
        Iv { lo, hi }
    }

    fn scale(&self, k: &Rational) -> Iv {
        let a = &self.lo * k;
        let b = &self.hi * k;
        if a <= b {
            Iv { lo: a, hi: b }
        } else {
            Iv { lo: b, hi: a }
        }
    }

    fn pow(&self, k: usize) -> Iv {
        let mut p = Iv::point(Rational::one());
        for _ in 0..k {
            p = p.mul(self);
        }
        if k % 2 == 0 && self.lo.is_negative() && self.hi.is_positive() {
            p.lo = Rational::zero();
        }
        p
    }
}

fn monomial_iv(m: &Monomial, bx: &[Iv]) -> Iv {
    let mut out = Iv::point(Rational::one());
    let mut i = 0;
    while i < m.len() {
        let mut j = i;
        while j < m.len() && m[j] == m[i] {
            j += 1;
        }
        out = out.mul(&bx[m[i]].pow(j - i));
        i = j;
    }
    out
}

/// Exact range of `Σ c_i x_i` over `{lo ≤ x ≤ hi, Σ x = 1}` (assumed nonempty).
fn linear_on_simplex(coeffs: &[Rational], bx: &[Iv]) -> Iv {
    let base: Rational = coeffs.iter().zip(bx).map(|(c, b)| c * &b.lo).sum();
    let slack: Rational = Rational::one() - bx.iter().map(|b| b.lo.clone()).sum::<Rational>();
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&a, &b| coeffs[a].cmp(&coeffs[b]));
    let fill = |order: &mut dyn Iterator<Item = &usize>| {
        let mut rest = slack.clone();
        let mut acc = base.clone();
        for &i in order {
            if !rest.is_positive() {
                break;
            }
            let room = &bx[i].hi - &bx[i].lo;
            let take = if room < rest { room } else { rest.clone() };
            acc += &coeffs[i] * &take;
            rest -= take;
        }
        acc
    };
    let lo = fill(&mut order.iter());
    let hi = fill(&mut order.iter().rev());
    Iv { lo, hi }
}

fn poly_iv(p: &Poly, bx: &[Iv], simplex: bool) -> Iv {
    let mut out = Iv::point(Rational::zero());
    let mut linear = vec![Rational::zero(); bx.len()];
    for (m, c) in p.terms() {
        if simplex && m.len() == 1 {
            linear[m[0]] += c;
        } else {
            out = out.add(&monomial_iv(m, bx).scale(c));
        }
    }
    if simplex {
        out = out.add(&linear_on_simplex(&linear, bx));
    }
    out
}

/// Intersects the box with `Σ x = 1`; `false` when that is empty.
fn tighten(bx: &mut [Iv]) -> bool {
    for _ in 0..2 {
        let sum_lo: Rational = bx.iter().map(|b| b.lo.clone()).sum();
        let sum_hi: Rational = bx.iter().map(|b| b.hi.clone()).sum();
        if sum_lo > Rational::one() || sum_hi < Rational::one() {
            return false;
        }
        for b in bx.iter_mut() {
            let lo = Rational::one() - (&sum_hi - &b.hi);
            let hi = Rational::one() - (&sum_lo - &b.lo);
            if lo > b.lo {
                b.lo = lo;
            }
            if hi < b.hi {
                b.hi = hi;
            }
            if b.lo > b.hi {
                return false;
            }
        }
    }
    true
}

fn atom_truth(iv: &Iv, rel: Rel) -> Option<bool> {
    match rel {
        Rel::Ge if !iv.lo.is_negative() => Some(true),
        Rel::Ge if iv.hi.is_negative() => Some(false),
        Rel::Gt if iv.lo.is_positive() => Some(true),
        Rel::Gt if !iv.hi.is_positive() => Some(false),
        Rel::Eq if iv.lo.is_zero() && iv.hi.is_zero() => Some(true),
        Rel::Eq if iv.lo.is_positive() || iv.hi.is_negative() => Some(false),
        _ => None,
    }
}

/// Truth of `p rel 0` on all of `ℝ^n` when every non-constant monomial has
/// only even exponents and all their coefficients share a sign, so that `p`
/// is bounded on one side by its constant term.
fn sign_truth(p: &Poly, rel: Rel) -> Option<bool> {
    let mut c = Rational::zero();
    let (mut pos, mut neg) = (false, false);
    for (m, k) in p.terms() {
        if m.is_empty() {
            c = k.clone();
            continue;
        }
        if m.chunk_by(|a, b| a == b).any(|run| run.len() % 2 == 1) {
            return None;
        }
        if k.is_positive() {
            pos = true;
        } else {
            neg = true;
        }
    }
    let lo = (!neg).then(|| c.clone());
    let hi = (!pos).then_some(c);
    let lo_at = |f: fn(&Rational) -> bool| lo.as_ref().is_some_and(f);
    let hi_at = |f: fn(&Rational) -> bool| hi.as_ref().is_some_and(f);
    let constant = lo.is_some() && hi.is_some();
    match rel {
        Rel::Ge if lo_at(|x| !x.is_negative()) => Some(true),
        Rel::Ge if hi_at(|x| x.is_negative()) => Some(false),
        Rel::Gt if lo_at(|x| x.is_positive()) => Some(true),
        Rel::Gt if hi_at(|x| !x.is_positive()) => Some(false),
        Rel::Eq if constant && lo_at(|x| x.is_zero()) => Some(true),
        Rel::Eq if lo_at(|x| x.is_positive()) || hi_at(|x| x.is_negative()) => Some(false),
        _ => None,
    }
}

/// True only when interval branch-and-bound proves that no real point of
/// the domain satisfies the system. Strict simplex coordinates are relaxed
/// to the closed simplex, which keeps the proof sound.
pub fn interval_infeasible(cs: &ConstraintSystem, node_budget: usize) -> bool {
    let (simplex, start) = match cs.domain {
        Domain::Simplex { .. } => {
            if cs.unknowns == 0 {
                return true;
            }
            (true, Iv { lo: Rational::zero(), hi: Rational::one() })
        }
        Domain::Free { .. } => {
            // Unbounded reals: sign analysis over the whole line.
            return cs.root.eval3(&|i| sign_truth(&cs.atoms[i].poly, cs.atoms[i].rel)) == Some(false);
        }
    };
    let mut stack = vec![vec![start; cs.unknowns]];
    let mut nodes = 0;
    let min_width = Rational::new(BigInt::one(), BigInt::from(1u64 << 20));
    while let Some(mut bx) = stack.pop() {
        nodes += 1;
        if nodes > node_budget {
            return false;
        }
        if simplex && !tighten(&mut bx) {
            continue;
        }
        let verdict = cs.root.eval3(&|i| atom_truth(&poly_iv(&cs.atoms[i].poly, &bx, simplex), cs.atoms[i].rel));
        match verdict {
            Some(false) => continue,
            Some(true) => return false,
            None => {}
        }
        let (k, width) = bx
            .iter()
            .enumerate()
            .map(|(k, b)| (k, &b.hi - &b.lo))
            .max_by(|a, b| a.1.cmp(&b.1))
            .expect("nonempty box");
        if width < min_width {
            return false;
        }
        let mid = (&bx[k].lo + &bx[k].hi) / Rational::from_integer(BigInt::from(2));
        let mut left = bx.clone();
        left[k].hi = mid.clone();
        let mut right = bx;
        right[k].lo = mid;
        stack.push(right);
        stack.push(left);
    }
    true
}
