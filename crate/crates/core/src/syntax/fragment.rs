use std::collections::BTreeSet;

use super::{free_vars, Event, Formula, Sym, Term, Var};

/// Which of the eight languages a formula belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Fragment {
    pub causal: bool,
    pub closed: bool,
    /// All compared terms avoid negation and symbol coefficients.
    pub circle: bool,
    /// Largest constant index used; the formula lies in `L(N)` for every `N` at least this.
    pub max_constant: u32,
    /// Every condition of a conditional probability is in `L_cond`.
    pub cond_guarded: bool,
}

impl Fragment {
    pub fn in_bounded(&self, n: u32) -> bool {
        self.max_constant <= n
    }
}

/// `⊤` or a conjunction of literals with at most one literal per variable.
pub fn in_cond_language(e: &Event) -> bool {
    fn literals<'a>(e: &'a Event, out: &mut Vec<&'a Sym>) -> bool {
        match e {
            Event::Atom(s) => {
                out.push(s);
                true
            }
            Event::Not(inner) => match &**inner {
                Event::Atom(s) => {
                    out.push(s);
                    true
                }
                _ => false,
            },
            Event::And(a, b) => literals(a, out) && literals(b, out),
            _ => false,
        }
    }
    if *e == Event::Top {
        return true;
    }
    let mut lits = Vec::new();
    if !literals(e, &mut lits) {
        return false;
    }
    let mut seen: BTreeSet<&Var> = BTreeSet::new();
    lits.iter().all(|s| seen.insert(s.var()))
}

pub fn classify_fragment(f: &Formula) -> Fragment {
    let mut causal = false;
    let mut circle = true;
    let mut max_constant = 0;
    let mut cond_guarded = true;

    fn note_sym(s: &Sym, max: &mut u32) {
        if let Some(i) = s.const_index() {
            *max = (*max).max(i);
        }
    }

    fn walk_term(t: &Term, causal: &mut bool, circle: &mut bool, max: &mut u32, guarded: &mut bool) {
        match t {
            Term::Prob { event, given } => {
                *causal |= event.has_box() || given.has_box();
                event.for_each_sym(&mut |s| note_sym(s, max));
                given.for_each_sym(&mut |s| note_sym(s, max));
                if !in_cond_language(given) {
                    *guarded = false;
                }
            }
            Term::Sum { body, .. } => walk_term(body, causal, circle, max, guarded),
            Term::Add(a, b) | Term::Mul(a, b) => {
                walk_term(a, causal, circle, max, guarded);
                walk_term(b, causal, circle, max, guarded);
            }
            Term::Neg(a) => {
                *circle = false;
                walk_term(a, causal, circle, max, guarded);
            }
            Term::Sym(s) => {
                *circle = false;
                note_sym(s, max);
            }
        }
    }

    fn walk(f: &Formula, causal: &mut bool, circle: &mut bool, max: &mut u32, guarded: &mut bool) {
        match f {
            Formula::Eq(a, b) => {
                note_sym(a, max);
                note_sym(b, max);
            }
            Formula::Geq(a, b) => {
                walk_term(a, causal, circle, max, guarded);
                walk_term(b, causal, circle, max, guarded);
            }
            Formula::Not(x) => walk(x, causal, circle, max, guarded),
            Formula::And(a, b) => {
                walk(a, causal, circle, max, guarded);
                walk(b, causal, circle, max, guarded);
            }
        }
    }

    walk(f, &mut causal, &mut circle, &mut max_constant, &mut cond_guarded);
    Fragment { causal, closed: free_vars(f).is_empty(), circle, max_constant, cond_guarded }
}
