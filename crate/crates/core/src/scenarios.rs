//! Worked scenarios: the causation-without-correlation pair, front-door
//! identification, the local average treatment effect, and the incompactness
//! families used by the bounded satisfiability checks.
//!
//! Binary variables use the values `1` and `2` for the textbook `0` and `1`
//! (ranges are positive integers); constants `c1`, `c2` name them in order.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::num::Rational;
use crate::scm::{Mechanism, Scm};
use crate::syntax::{
    parse_formula, parse_sequent, Event, Formula, Intervention, RangeVar, Sequent, Signature, Sym, Term, Var,
};

fn weights<R: Rng + ?Sized>(rng: &mut R, parts: usize, denominator: u64, min: u64) -> Vec<Rational> {
    crate::scm::composition(rng, denominator.max(min * parts as u64), parts, min)
        .into_iter()
        .map(|p| Rational::new(BigInt::from(p), BigInt::from(denominator.max(min * parts as u64))))
        .collect()
}

fn outcome_names(k: usize) -> Vec<String> {
    (1..=k).map(|u| format!("u{}", u)).collect()
}

// ---------------------------------------------------------------------------
// Causation without correlation

pub fn cwc_signature() -> Signature {
    Signature::bounded(&["V1", "V2"], 2).expect("valid signature")
}

/// The two models `(𝔐, 𝔐′)`. Outcomes enumerate `(U1, U2)` in
/// lexicographic order, each with weight 1/4.
pub fn cwc_models() -> (Scm, Scm) {
    let vars = vec![Var::new("V1"), Var::new("V2")];
    let ranges = vec![vec![1, 2], vec![1, 2]];
    let us: Vec<(u32, u32)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
    let pmf = vec![Rational::new(1.into(), 4.into()); 4];
    let enc = |b: u32| b + 1;

    let m_v1: Vec<u32> = us.iter().map(|&(u1, _)| enc(u1)).collect();
    let m_v2: Vec<u32> = us.iter().map(|&(_, u2)| enc(u2)).collect();
    let m = Scm::new(
        vars.clone(),
        ranges.clone(),
        outcome_names(4),
        pmf.clone(),
        vec![
            Mechanism::Table { parents: vec![], table: m_v1 },
            Mechanism::Table { parents: vec![], table: m_v2 },
        ],
        ranges.clone(),
    )
    .expect("well-formed");

    let p_v1: Vec<u32> = us.iter().map(|&(u1, u2)| enc(u32::from(u1 == u2))).collect();
    // Rows: V1 value (1 then 2) outer, outcome inner.
    let mut p_v2 = Vec::new();
    for v1 in [0u32, 1] {
        for &(u1, u2) in &us {
            p_v2.push(enc(u1 + u32::from(v1 == 1 && u1 == 0 && u2 == 1)));
        }
    }
    let m_prime = Scm::new(
        vars,
        ranges.clone(),
        outcome_names(4),
        pmf,
        vec![
            Mechanism::Table { parents: vec![], table: p_v1 },
            Mechanism::Table { parents: vec![0], table: p_v2 },
        ],
        ranges,
    )
    .expect("well-formed");
    (m, m_prime)
}

/// `P([V1=1] V2=1) ≈ P([V1=1] V2=0)`.
pub fn cwc_formula() -> Formula {
    parse_formula("P([V1=c2] V2=c2) == P([V1=c2] V2=c1)", &cwc_signature()).expect("parses")
}

// ---------------------------------------------------------------------------
// Front-door

pub fn frontdoor_signature() -> Signature {
    Signature::unbounded(&["X", "Z", "Y"]).expect("valid signature")
}

pub const FRONTDOOR_PREMISES: [&str; 5] = [
    "P([X=x1] Z=z1) == P(Z=z1 | X=x1)",
    "P([Z=z1] X=x1) == P(X=x1)",
    "P([X=x1] Y=y1 | [X=x1] Z=z1) == P([X=x1 & Z=z1] Y=y1)",
    "P([X=x1 & Z=z1] Y=y1) == P([Z=z1] Y=y1)",
    "P([Z=z1] Y=y1 | [Z=z1] X=x1) == P(Y=y1 | X=x1 & Z=z1)",
];

pub const FRONTDOOR_CONCLUSION: &str =
    "P([X=x1] Y=y1) == sum z1 . P(Z=z1 | X=x1) * sum x2 . P(Y=y1 | X=x2 & Z=z1) * P(X=x2)";

pub fn frontdoor_sequent() -> Sequent {
    let text = format!("{} |- {}", FRONTDOOR_PREMISES.join("; "), FRONTDOOR_CONCLUSION);
    parse_sequent(&text, &frontdoor_signature()).expect("parses")
}

/// A positive model with the front-door graph: a confounder feeding `X` and
/// `Y`, `X → Z → Y`, and independent noise on `Z`. Range sizes are drawn
/// from `{2, 3}`.
///
/// The exogenous outcome is a triple `(a, r, s)`: `f_X = a`,
/// `f_Z(x, s) = π_Z[(s + x) mod |Z|]`, `f_Y(z, a, r) = π_Y[(r + z + σ_a) mod |Y|]`.
/// `(a, r)` has a confounded positive joint law and `s` is independent.
pub fn random_frontdoor_scm<R: Rng + ?Sized>(rng: &mut R) -> Scm {
    let nx = rng.gen_range(2..=3usize);
    let nz = rng.gen_range(2..=3usize);
    let ny = rng.gen_range(2..=3usize);
    let p_ar = weights(rng, nx * ny, 60, 1);
    let p_s = weights(rng, nz, 12, 1);
    let mut pi_z: Vec<usize> = (0..nz).collect();
    pi_z.shuffle(rng);
    let mut pi_y: Vec<usize> = (0..ny).collect();
    pi_y.shuffle(rng);
    let sigma: Vec<usize> = (0..nx).map(|_| rng.gen_range(0..ny)).collect();

    let mut triples = Vec::new();
    let mut pmf = Vec::new();
    for a in 0..nx {
        for r in 0..ny {
            for s in 0..nz {
                triples.push((a, r, s));
                pmf.push(&p_ar[a * ny + r] * &p_s[s]);
            }
        }
    }
    let k = triples.len();
    let f_x: Vec<u32> = triples.iter().map(|&(a, _, _)| a as u32 + 1).collect();
    let mut f_z = Vec::with_capacity(nx * k);
    for x in 0..nx {
        for &(_, _, s) in &triples {
            f_z.push(pi_z[(s + x) % nz] as u32 + 1);
        }
    }
    let mut f_y = Vec::with_capacity(nz * k);
    for z in 0..nz {
        for &(a, r, _) in &triples {
            f_y.push(pi_y[(r + z + sigma[a]) % ny] as u32 + 1);
        }
    }
    let ranges: Vec<Vec<u32>> = [nx, nz, ny].iter().map(|&n| (1..=n as u32).collect()).collect();
    Scm::new(
        vec![Var::new("X"), Var::new("Z"), Var::new("Y")],
        ranges.clone(),
        outcome_names(k),
        pmf,
        vec![
            Mechanism::Table { parents: vec![], table: f_x },
            Mechanism::Table { parents: vec![0], table: f_z },
            Mechanism::Table { parents: vec![1], table: f_y },
        ],
        ranges,
    )
    .expect("well-formed")
}

// ---------------------------------------------------------------------------
// Local average treatment effect

/// Assignment `Z`, treatment `X`, outcome `Y`; all binary.
pub fn late_signature() -> Signature {
    Signature::bounded(&["Z", "X", "Y"], 2).expect("valid signature")
}

/// Exclusion restriction and no defiers.
pub const LATE_PREMISES: [&str; 2] = [
    "y1 !~ y2 -> P([X=x1 & Z=c2] Y=y1 & [X=x1 & Z=c1] Y=y2) == 0",
    "P([Z=c2] X=c1 & [Z=c1] X=c2) == 0",
];

/// Compliers: `X_{z+} = x+ ∧ X_{z−} = x−`.
pub const LATE_COMPLIERS: &str = "[Z=c2] X=c2 & [Z=c1] X=c1";

/// `E(Y_{x+} − Y_{x−} | compliers) ≈ E(Y_{z+} − Y_{z−}) / E(X_{z+} − X_{z−})`,
/// with expectations written as coefficient sums and the division cleared.
pub fn late_conclusion_text() -> String {
    format!(
        "(sum y1 . sum y2 . (y1 - y2) * P([X=c2] Y=y1 & [X=c1] Y=y2 | {c})) \
         == ((sum y1 . y1 * P([Z=c2] Y=y1)) - (sum y1 . y1 * P([Z=c1] Y=y1))) \
          / ((sum x1 . x1 * P([Z=c2] X=x1)) - (sum x1 . x1 * P([Z=c1] X=x1)))",
        c = LATE_COMPLIERS
    )
}

pub fn late_sequent() -> Sequent {
    let text = format!("{} |- {}", LATE_PREMISES.join("; "), late_conclusion_text());
    parse_sequent(&text, &late_signature()).expect("parses")
}

/// Only the guard `P(compliers) ≻ 0`; without the identifying assumptions the
/// identity is expected to fail in some model.
pub fn late_unguarded_sequent() -> Sequent {
    let text = format!("P({}) > 0 |- {}", LATE_COMPLIERS, late_conclusion_text());
    parse_sequent(&text, &late_signature()).expect("parses")
}

/// `E(X_{z+} − X_{z−})` as a formula-free term, for checking the side condition.
pub fn late_denominator_text() -> &'static str {
    "(sum x1 . x1 * P([Z=c2] X=x1)) - (sum x1 . x1 * P([Z=c1] X=x1))"
}

/// A binary model satisfying exclusion and no defiers. The exogenous outcome
/// is `(z, type, y(1), y(2))` with `type ∈ {never, always, complier}` and a
/// random joint law (zeros allowed). `Y` reads only `X`.
pub fn random_late_scm<R: Rng + ?Sized>(rng: &mut R) -> Scm {
    let mut cells = Vec::new();
    for z in 1..=2u32 {
        for ty in 0..3u8 {
            for y1 in 1..=2u32 {
                for y2 in 1..=2u32 {
                    cells.push((z, ty, y1, y2));
                }
            }
        }
    }
    let k = cells.len();
    let pmf = weights(rng, k, 48, 0);
    let f_z: Vec<u32> = cells.iter().map(|c| c.0).collect();
    let mut f_x = Vec::new();
    for z in 1..=2u32 {
        for &(_, ty, _, _) in &cells {
            f_x.push(match ty {
                0 => 1,
                1 => 2,
                _ => z,
            });
        }
    }
    let mut f_y = Vec::new();
    for x in 1..=2u32 {
        for &(_, _, y1, y2) in &cells {
            f_y.push(if x == 1 { y1 } else { y2 });
        }
    }
    let ranges = vec![vec![1, 2]; 3];
    Scm::new(
        vec![Var::new("Z"), Var::new("X"), Var::new("Y")],
        ranges.clone(),
        outcome_names(k),
        pmf,
        vec![
            Mechanism::Table { parents: vec![], table: f_z },
            Mechanism::Table { parents: vec![0], table: f_x },
            Mechanism::Table { parents: vec![1], table: f_y },
        ],
        ranges,
    )
    .expect("well-formed")
}

// ---------------------------------------------------------------------------
// Incompactness families

pub fn single_var_signature(n: u32) -> Signature {
    Signature::bounded(&["X"], n).expect("valid signature")
}

/// `{P(X=c1) ≾ 1/k : k ≤ n} ∪ {P(X=c1) ≻ 0}`.
pub fn conv_family(n: u32, sig: &Signature) -> Vec<Formula> {
    let mut out: Vec<Formula> =
        (1..=n).map(|k| parse_formula(&format!("P(X=c1) <= 1/{}", k), sig).expect("parses")).collect();
    out.push(parse_formula("P(X=c1) > 0", sig).expect("parses"));
    out
}

/// `⋀_{i<j≤n} c_i ≢ c_j ∧ Σ_{i≤n} P(X=c_i) ≾ 1/2`.
pub fn sum_upper_family(n: u32, sig: &Signature) -> Formula {
    let mut parts = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            parts.push(format!("c{}@X !~ c{}@X", i, j));
        }
    }
    let sum: Vec<String> = (1..=n).map(|i| format!("P(X=c{})", i)).collect();
    parts.push(format!("{} <= 1/2", sum.join(" + ")));
    parse_formula(&parts.join(" & "), sig).expect("parses")
}

// ---------------------------------------------------------------------------
// Random formulas

/// Shape limits for [`random_formula`].
#[derive(Clone, Copy, Debug)]
pub struct FormulaShape {
    /// Constants per variable that may appear.
    pub constants: u32,
    /// Maximum nesting of sums.
    pub sum_depth: u32,
    /// Maximum depth of the term and formula trees.
    pub depth: u32,
    /// Whether interventions may appear.
    pub causal: bool,
    /// Whether conditional probabilities may appear.
    pub conditional: bool,
}

struct FormulaGen<'a, R: Rng + ?Sized> {
    rng: &'a mut R,
    vars: &'a [Var],
    shape: FormulaShape,
    next_index: u32,
}

impl<R: Rng + ?Sized> FormulaGen<'_, R> {
    fn sym(&mut self, var: &Var, scope: &[RangeVar]) -> Sym {
        let bound: Vec<&RangeVar> = scope.iter().filter(|r| &r.var == var).collect();
        if !bound.is_empty() && self.rng.gen_bool(0.6) {
            Sym::Range((*bound.choose(self.rng).expect("nonempty")).clone())
        } else {
            Sym::constant(var, self.rng.gen_range(1..=self.shape.constants))
        }
    }

    fn atom(&mut self, scope: &[RangeVar]) -> Event {
        let var = self.vars.choose(self.rng).expect("nonempty signature").clone();
        Event::atom(self.sym(&var, scope))
    }

    fn base(&mut self, scope: &[RangeVar], depth: u32) -> Event {
        if depth == 0 {
            return if self.rng.gen_bool(0.1) { Event::Top } else { self.atom(scope) };
        }
        match self.rng.gen_range(0..4) {
            0 => Event::not(self.base(scope, depth - 1)),
            1 => Event::and(self.base(scope, depth - 1), self.base(scope, depth - 1)),
            _ => self.atom(scope),
        }
    }

    fn event(&mut self, scope: &[RangeVar]) -> Event {
        if self.shape.causal && self.vars.len() > 1 && self.rng.gen_bool(0.4) {
            let target = self.vars.choose(self.rng).expect("nonempty").clone();
            let sym = self.sym(&target, scope);
            let body = self.base(scope, 1);
            Event::boxed(Intervention(vec![sym]), body)
        } else {
            self.base(scope, 2)
        }
    }

    fn prob(&mut self, scope: &[RangeVar]) -> Term {
        let e = self.event(scope);
        if self.shape.conditional && self.rng.gen_bool(0.25) {
            let given = self.base(scope, 1);
            Term::cond(e, given)
        } else {
            Term::prob(e)
        }
    }

    fn term(&mut self, scope: &mut Vec<RangeVar>, depth: u32, sums: u32) -> Term {
        if depth == 0 {
            return self.prob(scope);
        }
        match self.rng.gen_range(0..7) {
            0 if sums < self.shape.sum_depth => {
                let var = self.vars.choose(self.rng).expect("nonempty").clone();
                self.next_index += 1;
                let bound = RangeVar::new(&var, self.next_index);
                scope.push(bound.clone());
                let body = self.term(scope, depth - 1, sums + 1);
                scope.pop();
                Term::sum(bound, body)
            }
            1 => Term::add(self.term(scope, depth - 1, sums), self.term(scope, depth - 1, sums)),
            2 => {
                let coeff = if self.rng.gen_bool(0.5) {
                    let var = self.vars.choose(self.rng).expect("nonempty").clone();
                    Term::Sym(self.sym(&var, scope))
                } else {
                    self.term(scope, depth - 1, sums)
                };
                Term::mul(coeff, self.term(scope, depth - 1, sums))
            }
            3 => Term::neg(self.term(scope, depth - 1, sums)),
            4 => Term::numeral(self.rng.gen_range(0..3)),
            _ => self.prob(scope),
        }
    }

    fn formula(&mut self, depth: u32) -> Formula {
        if depth > 0 {
            match self.rng.gen_range(0..5) {
                0 => return Formula::not(self.formula(depth - 1)),
                1 => return Formula::and(self.formula(depth - 1), self.formula(depth - 1)),
                _ => {}
            }
        }
        if self.rng.gen_bool(0.1) {
            let var = self.vars.choose(self.rng).expect("nonempty").clone();
            let a = self.sym(&var, &[]);
            let b = self.sym(&var, &[]);
            return Formula::Eq(a, b);
        }
        let d = self.shape.depth;
        let a = self.term(&mut Vec::new(), d, 0);
        let b = self.term(&mut Vec::new(), d, 0);
        Formula::Geq(a, b)
    }
}

/// A random closed formula over `vars`; sums bind fresh range variables.
pub fn random_formula<R: Rng + ?Sized>(rng: &mut R, vars: &[Var], shape: FormulaShape) -> Formula {
    let mut g = FormulaGen { rng, vars, shape, next_index: 0 };
    g.formula(2)
}
