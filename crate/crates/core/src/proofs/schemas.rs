use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;

use super::arith::{self, Check, Leaves};
use crate::sat::Poly;
use crate::syntax::{in_cond_language, substitute_range_var_term, Event, Formula, RangeVar, Sym, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum PolyTag {
    /// Propositional tautology over comparison and equality atoms.
    Taut,
    /// Tautology modulo linear real arithmetic over opaque leaves.
    Arith,
    /// `P(δ | δ') ≿ 0`.
    NonNeg,
    /// `P(δ ∧ δ') + P(δ ∧ ¬δ') ≈ P(δ)`, under a common condition.
    Add,
    /// `P(δ | γ) ≈ P(δ' | γ')` for propositionally equivalent events.
    Dist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Schema {
    EqReflex,
    EqReplace,
    EqDist,
    Cond,
    SumLower,
    Pos,
    FinN,
    DistinctN,
    SumEqualsN,
    PolyBase(PolyTag),
}

impl Schema {
    pub const ALL: [Schema; 14] = [
        Schema::EqReflex,
        Schema::EqReplace,
        Schema::EqDist,
        Schema::Cond,
        Schema::SumLower,
        Schema::Pos,
        Schema::FinN,
        Schema::DistinctN,
        Schema::SumEqualsN,
        Schema::PolyBase(PolyTag::Taut),
        Schema::PolyBase(PolyTag::Arith),
        Schema::PolyBase(PolyTag::NonNeg),
        Schema::PolyBase(PolyTag::Add),
        Schema::PolyBase(PolyTag::Dist),
    ];
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Schema::EqReflex => "EqReflex",
            Schema::EqReplace => "EqReplace",
            Schema::EqDist => "EqDist",
            Schema::Cond => "Cond",
            Schema::SumLower => "SumLower",
            Schema::Pos => "Pos",
            Schema::FinN => "Fin_N",
            Schema::DistinctN => "Distinct_N",
            Schema::SumEqualsN => "SumEquals_N",
            Schema::PolyBase(PolyTag::Taut) => "poly taut",
            Schema::PolyBase(PolyTag::Arith) => "poly arith",
            Schema::PolyBase(PolyTag::NonNeg) => "poly nonneg",
            Schema::PolyBase(PolyTag::Add) => "poly add",
            Schema::PolyBase(PolyTag::Dist) => "poly dist",
        };
        f.write_str(s)
    }
}

impl FromStr for Schema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let schema = match words.as_slice() {
            ["EqReflex"] => Schema::EqReflex,
            ["EqReplace"] => Schema::EqReplace,
            ["EqDist"] => Schema::EqDist,
            ["Cond"] => Schema::Cond,
            ["SumLower"] => Schema::SumLower,
            ["Pos"] => Schema::Pos,
            ["Fin_N"] | ["FinN"] => Schema::FinN,
            ["Distinct_N"] | ["Distinct"] => Schema::DistinctN,
            ["SumEquals_N"] | ["SumEquals"] => Schema::SumEqualsN,
            ["poly", tag] | ["PolyBase", tag] => Schema::PolyBase(match *tag {
                "taut" => PolyTag::Taut,
                "arith" => PolyTag::Arith,
                "nonneg" => PolyTag::NonNeg,
                "add" => PolyTag::Add,
                "dist" => PolyTag::Dist,
                other => return Err(format!("unknown poly tag `{}`", other)),
            }),
            _ => {
                let bounded = words.first().and_then(|w| {
                    let (name, n) = w.rsplit_once('_')?;
                    n.parse::<u32>().ok()?;
                    Some(name)
                });
                match bounded {
                    Some("Fin") => Schema::FinN,
                    Some("Distinct") => Schema::DistinctN,
                    Some("SumEquals") => Schema::SumEqualsN,
                    _ => return Err(format!("unknown axiom schema `{}`", s)),
                }
            }
        };
        Ok(schema)
    }
}

type Res = Result<(), String>;

fn fail<T>(msg: impl Into<String>) -> Result<T, String> {
    Err(msg.into())
}

fn is_zero(t: &Term) -> bool {
    t.as_numeral() == Some(0)
}

fn same_value(a: &Term, b: &Term) -> bool {
    let mut l = Leaves::new();
    l.difference(a, b).is_zero()
}

/// Every pair `c_i ≢ c_j` in a conjunction, as sorted index pairs of one variable.
fn distinct_pairs(f: &Formula) -> Result<(crate::syntax::Var, BTreeSet<(u32, u32)>), String> {
    let mut var = None;
    let mut pairs = BTreeSet::new();
    for c in f.conjuncts() {
        let Formula::Not(inner) = c else { return fail("expected a conjunction of c ≢ c'") };
        let Formula::Eq(a, b) = &**inner else { return fail("expected a conjunction of c ≢ c'") };
        let (Some(i), Some(j)) = (a.const_index(), b.const_index()) else {
            return fail("distinctness premises must compare constants");
        };
        if a.var() != b.var() || i == j {
            return fail("distinctness premise compares different variables or a constant with itself");
        }
        if var.get_or_insert_with(|| a.var().clone()) != a.var() {
            return fail("distinctness premises mix variables");
        }
        pairs.insert((i.min(j), i.max(j)));
    }
    Ok((var.expect("a conjunction has a conjunct"), pairs))
}

fn all_pairs(indices: &BTreeSet<u32>) -> BTreeSet<(u32, u32)> {
    let v: Vec<u32> = indices.iter().copied().collect();
    let mut out = BTreeSet::new();
    for (k, &i) in v.iter().enumerate() {
        for &j in &v[k + 1..] {
            out.insert((i, j));
        }
    }
    out
}

/// No negation and no symbol coefficient anywhere in the term.
pub fn in_circle(t: &Term) -> bool {
    match t {
        Term::Prob { .. } => true,
        Term::Sum { body, .. } => in_circle(body),
        Term::Add(a, b) | Term::Mul(a, b) => in_circle(a) && in_circle(b),
        Term::Neg(_) | Term::Sym(_) => false,
    }
}

fn instantiate(body: &Term, bound: &RangeVar, index: u32) -> Result<Term, String> {
    substitute_range_var_term(body, bound, &Sym::constant(&bound.var, index)).map_err(|e| e.to_string())
}

/// Checks whether `a` and `b` agree except where `a` has `c` and `b` has `d`.
struct Replace<'a> {
    c: &'a Sym,
    d: &'a Sym,
}

impl Replace<'_> {
    fn sym(&self, a: &Sym, b: &Sym) -> bool {
        a == b || (a == self.c && b == self.d)
    }

    fn event(&self, a: &Event, b: &Event) -> bool {
        match (a, b) {
            (Event::Top, Event::Top) => true,
            (Event::Atom(x), Event::Atom(y)) => self.sym(x, y),
            (Event::Not(x), Event::Not(y)) => self.event(x, y),
            (Event::And(x, y), Event::And(u, v)) => self.event(x, u) && self.event(y, v),
            (Event::Box(i, x), Event::Box(j, y)) => {
                i.atoms().len() == j.atoms().len()
                    && i.atoms().iter().zip(j.atoms()).all(|(s, t)| self.sym(s, t))
                    && self.event(x, y)
            }
            _ => false,
        }
    }

    fn term(&self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Prob { event: e, given: g }, Term::Prob { event: f, given: h }) => self.event(e, f) && self.event(g, h),
            (Term::Sum { bound: x, body: s }, Term::Sum { bound: y, body: t }) => x == y && self.term(s, t),
            (Term::Add(x, y), Term::Add(u, v)) | (Term::Mul(x, y), Term::Mul(u, v)) => self.term(x, u) && self.term(y, v),
            (Term::Neg(x), Term::Neg(y)) => self.term(x, y),
            (Term::Sym(x), Term::Sym(y)) => self.sym(x, y),
            _ => false,
        }
    }

    fn formula(&self, a: &Formula, b: &Formula) -> bool {
        match (a, b) {
            (Formula::Eq(x, y), Formula::Eq(u, v)) => self.sym(x, u) && self.sym(y, v),
            (Formula::Geq(x, y), Formula::Geq(u, v)) => self.term(x, u) && self.term(y, v),
            (Formula::Not(x), Formula::Not(y)) => self.formula(x, y),
            (Formula::And(x, y), Formula::And(u, v)) => self.formula(x, u) && self.formula(y, v),
            _ => false,
        }
    }
}

fn event_atoms(e: &Event, out: &mut Vec<Sym>) {
    match e {
        Event::Top => {}
        Event::Atom(s) => {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        Event::Not(x) => event_atoms(x, out),
        Event::And(a, b) => {
            event_atoms(a, out);
            event_atoms(b, out);
        }
        Event::Box(_, body) => event_atoms(body, out),
    }
}

fn event_value(e: &Event, atoms: &[Sym], v: u64) -> bool {
    match e {
        Event::Top => true,
        Event::Atom(s) => v >> atoms.iter().position(|a| a == s).expect("collected") & 1 == 1,
        Event::Not(x) => !event_value(x, atoms, v),
        Event::And(a, b) => event_value(a, atoms, v) && event_value(b, atoms, v),
        Event::Box(..) => unreachable!("boxes are rejected before"),
    }
}

/// Propositional equivalence of two intervention-free events, atoms keyed
/// by their symbols.
pub fn events_equivalent(a: &Event, b: &Event) -> Result<bool, String> {
    if a.has_box() || b.has_box() {
        return fail("interventions are outside the probabilistic language");
    }
    let mut atoms = Vec::new();
    event_atoms(a, &mut atoms);
    event_atoms(b, &mut atoms);
    if atoms.len() > arith::MAX_ATOMS {
        return fail("too many atoms for a truth table");
    }
    Ok((0u64..1 << atoms.len()).all(|v| event_value(a, &atoms, v) == event_value(b, &atoms, v)))
}

fn approx_sides(f: &Formula) -> Option<(&Term, &Term)> {
    f.as_approx()
}

/// Accepts exactly the substitution instances of `schema`. `n` is the
/// signature bound where the schema needs one.
pub fn check_axiom_instance(f: &Formula, schema: Schema, n: Option<u32>) -> Res {
    match schema {
        Schema::EqReflex => match f {
            Formula::Eq(a, b) if a == b => Ok(()),
            Formula::Eq(..) => fail("EqReflex needs the same symbol on both sides"),
            _ => fail("EqReflex instances have the form c ~ c"),
        },
        Schema::EqReplace => {
            let Some((Formula::Eq(c, d), rest)) = f.as_implication() else {
                return fail("EqReplace instances have the form c ~ c' -> (φ -> φ')");
            };
            let Some((a, b)) = rest.as_implication() else { return fail("EqReplace needs an inner implication") };
            if c.var() != d.var() {
                return fail("EqReplace compares symbols of different variables");
            }
            if (Replace { c, d }).formula(a, b) {
                Ok(())
            } else {
                fail("the two sides differ other than by replacing the first symbol with the second")
            }
        }
        Schema::EqDist => {
            let Some((Formula::Not(eq), body)) = f.as_implication() else {
                return fail("EqDist instances have the form c !~ c' -> P(V=c & V=c') == 0");
            };
            let Formula::Eq(c, d) = &**eq else { return fail("EqDist premise must be c !~ c'") };
            let Some((l, r)) = approx_sides(body) else { return fail("EqDist conclusion must be an equality") };
            let p = if is_zero(r) { l } else if is_zero(l) { r } else { return fail("EqDist conclusion compares with 0") };
            let expected = Event::and(Event::atom(c.clone()), Event::atom(d.clone()));
            match p {
                Term::Prob { event, given: Event::Top } if *event == expected => Ok(()),
                _ => fail("EqDist conclusion must be P(V=c & V=c') for the compared symbols"),
            }
        }
        Schema::Cond => {
            let Some((l, r)) = f.as_iff() else { return fail("Cond instances are biconditionals") };
            let (Formula::Geq(a, b), Formula::Geq(c, d)) = (l, r) else {
                return fail("Cond instances compare P(δ | δ') with a term on both sides");
            };
            if let Term::Prob { event, given } = a {
                let literal = Formula::Geq(
                    Term::prob(Event::and(event.clone(), given.clone())),
                    Term::mul(b.clone(), Term::prob(given.clone())),
                );
                if in_cond_language(given) && arith::equivalent_atoms(r, &literal) {
                    return Ok(());
                }
            }
            let mut conds = Vec::new();
            for t in [a, b] {
                outer_conditionals(t, &mut conds);
            }
            conds.sort();
            conds.dedup();
            if conds.is_empty() {
                return fail("Cond left side must be P(δ | δ') >= t");
            }
            let mut last = String::new();
            for (event, given) in &conds {
                match cond_instance(event, given, (a, b), (c, d)) {
                    Ok(()) => return Ok(()),
                    Err(e) => last = e,
                }
            }
            Err(last)
        }
        Schema::SumLower => {
            let (premise, body) = match f.as_implication() {
                Some((p, b)) => (Some(p), b),
                None => (None, f),
            };
            let Formula::Geq(Term::Sum { bound, body: t }, _) = body else {
                return fail("SumLower conclusion must be sum v . t >= ...");
            };
            if !in_circle(t) {
                return fail("SumLower needs a summand without negation or symbol coefficients");
            }
            let candidates: Vec<BTreeSet<u32>> = match premise {
                Some(p) => {
                    let (var, pairs) = distinct_pairs(p)?;
                    if var != bound.var {
                        return fail("distinctness premise is about another variable");
                    }
                    let s: BTreeSet<u32> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
                    if pairs != all_pairs(&s) {
                        return fail("distinctness premise must cover every pair of the chosen constants");
                    }
                    vec![s]
                }
                None => {
                    let top = n.unwrap_or_else(|| crate::syntax::classify_fragment(f).max_constant.max(1));
                    std::iter::once(BTreeSet::new()).chain((1..=top).map(|c| BTreeSet::from([c]))).collect()
                }
            };
            for s in candidates {
                let parts: Vec<Term> = s.iter().map(|&c| instantiate(t, bound, c)).collect::<Result<_, _>>()?;
                let expected = Formula::Geq(Term::sum(bound.clone(), (**t).clone()), Term::sum_of(parts));
                if arith::equivalent_atoms(body, &expected) {
                    return Ok(());
                }
            }
            fail("SumLower right side must add the summand at each constant of the distinct set")
        }
        Schema::Pos => {
            let Some((Term::Prob { event, given: Event::Top }, zero)) = f.as_gt() else {
                return fail("Pos instances have the form P(α) > 0");
            };
            if !is_zero(zero) {
                return fail("Pos compares with 0");
            }
            if in_cond_language(event) {
                Ok(())
            } else {
                fail("the event is not a conjunction of literals with distinct variables")
            }
        }
        Schema::FinN => {
            let Some(n) = n else { return fail("Fin_N needs a bounded signature") };
            let Some((l, r)) = approx_sides(f) else { return fail("Fin_N instances are equalities") };
            let (sum, other) = if matches!(l, Term::Sum { .. }) { (l, r) } else { (r, l) };
            let Term::Sum { body, .. } = sum else { return fail("Fin_N needs sum v . P(T)") };
            if **body != Term::one() {
                return fail("Fin_N sums P(T)");
            }
            if same_value(other, &Term::numeral(n as u64)) {
                Ok(())
            } else {
                fail(format!("Fin_N compares with {}", n))
            }
        }
        Schema::DistinctN => {
            let Some(n) = n else { return fail("Distinct_N needs a bounded signature") };
            let (_, pairs) = distinct_pairs(f)?;
            if pairs == all_pairs(&(1..=n).collect()) {
                Ok(())
            } else {
                fail(format!("Distinct_N must separate every pair of c1..c{}", n))
            }
        }
        Schema::SumEqualsN => {
            let Some(n) = n else { return fail("SumEquals_N needs a bounded signature") };
            let Some((l, r)) = approx_sides(f) else { return fail("SumEquals_N instances are equalities") };
            let (sum, other) = if matches!(l, Term::Sum { .. }) { (l, r) } else { (r, l) };
            let Term::Sum { bound, body } = sum else { return fail("SumEquals_N needs a sum") };
            let parts: Vec<Term> = (1..=n).map(|c| instantiate(body, bound, c)).collect::<Result<_, _>>()?;
            if same_value(other, &Term::sum_of(parts)) {
                Ok(())
            } else {
                fail(format!("SumEquals_N must add the summand at c1..c{}", n))
            }
        }
        Schema::PolyBase(tag) => check_poly(f, tag),
    }
}

fn check_poly(f: &Formula, tag: PolyTag) -> Res {
    match tag {
        PolyTag::Taut | PolyTag::Arith => match arith::valid(f, tag == PolyTag::Arith) {
            Check::Valid => Ok(()),
            Check::Invalid(why) => fail(format!("not a tautology: {}", why)),
            Check::TooLarge => fail("formula too large for the tautology check"),
        },
        PolyTag::NonNeg => match f {
            Formula::Geq(Term::Prob { .. }, z) if is_zero(z) => Ok(()),
            _ => fail("nonneg instances have the form P(δ | δ') >= 0"),
        },
        PolyTag::Add => {
            let Some((l, r)) = approx_sides(f) else { return fail("add instances are equalities") };
            let (sum, whole) = if matches!(l, Term::Add(..)) { (l, r) } else { (r, l) };
            let (Term::Add(x, y), Term::Prob { event: d, given: g }) = (sum, whole) else {
                return fail("add instances have the form P(δ & δ') + P(δ & ~δ') == P(δ)");
            };
            let (Term::Prob { event: ex, given: gx }, Term::Prob { event: ey, given: gy }) = (&**x, &**y) else {
                return fail("add needs two probabilities");
            };
            if gx != g || gy != g {
                return fail("add needs a common condition");
            }
            match (ex, ey) {
                (Event::And(d1, e1), Event::And(d2, ne)) if **d1 == *d && **d2 == *d && **ne == Event::not((**e1).clone()) => Ok(()),
                _ => fail("add instances have the form P(δ & δ') + P(δ & ~δ') == P(δ)"),
            }
        }
        PolyTag::Dist => {
            let Some((Term::Prob { event: a, given: g }, Term::Prob { event: b, given: h })) = approx_sides(f) else {
                return fail("dist instances have the form P(δ) == P(δ')");
            };
            if events_equivalent(a, b)? && events_equivalent(g, h)? {
                Ok(())
            } else {
                fail("the events are not propositionally equivalent")
            }
        }
    }
}

/// Probabilities outside any sum.
fn outer_conditionals(t: &Term, out: &mut Vec<(Event, Event)>) {
    match t {
        Term::Prob { event, given } => out.push((event.clone(), given.clone())),
        Term::Add(a, b) | Term::Mul(a, b) => {
            outer_conditionals(a, out);
            outer_conditionals(b, out);
        }
        Term::Neg(a) => outer_conditionals(a, out),
        _ => {}
    }
}

/// Left side `μ·P(δ | δ') + R ≥ 0` with `μ > 0` and `R` free of `P(δ | δ')`;
/// the right side must be a positive multiple of `μ·P(δ ∧ δ') + R·P(δ')`.
fn cond_instance(event: &Event, given: &Event, (a, b): (&Term, &Term), (c, d): (&Term, &Term)) -> Res {
    if !in_cond_language(given) {
        return fail("the condition is not a conjunction of literals with distinct variables");
    }
    let mut leaves = Leaves::new();
    let x = leaves.prob_leaf(event, given);
    let left = leaves.difference(a, b);
    let mut mu = None;
    let mut rest = Poly::zero();
    for (m, k) in left.terms() {
        if m.as_slice() == [x] {
            mu = Some(k.clone());
        } else if m.contains(&x) {
            return fail("the conditional probability occurs non-linearly");
        } else {
            rest = rest.add(&Poly::monomial(m.clone(), k.clone()));
        }
    }
    let Some(mu) = mu.filter(|m| m.is_positive()) else {
        return fail("Cond left side must be P(δ | δ') >= t");
    };
    let joint = leaves.poly(&Term::prob(Event::and(event.clone(), given.clone())));
    let marginal = leaves.poly(&Term::prob(given.clone()));
    let expected = joint.scale(&mu).add(&rest.mul(&marginal));
    if arith::positive_multiple(&leaves.difference(c, d), &expected) {
        Ok(())
    } else {
        fail("Cond right side must be P(δ & δ') >= t * P(δ')")
    }
}
