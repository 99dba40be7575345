use std::collections::BTreeSet;

use super::{Event, Formula, Intervention, RangeVar, Sym, Term};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SubstError {
    #[error("cannot substitute {replacement} for {target}: they belong to different variables")]
    KindMismatch { target: String, replacement: String },
    #[error("cannot substitute a compound event into the intervention atom for {0}")]
    NonAtomicIntervention(String),
}

pub fn free_vars(f: &Formula) -> BTreeSet<RangeVar> {
    let mut out = BTreeSet::new();
    fv_formula(f, &mut out);
    out
}

pub fn free_vars_term(t: &Term) -> BTreeSet<RangeVar> {
    let mut out = BTreeSet::new();
    fv_term(t, &mut out);
    out
}

pub fn free_vars_event(e: &Event) -> BTreeSet<RangeVar> {
    let mut out = BTreeSet::new();
    e.for_each_sym(&mut |s| {
        if let Sym::Range(rv) = s {
            out.insert(rv.clone());
        }
    });
    out
}

fn fv_formula(f: &Formula, out: &mut BTreeSet<RangeVar>) {
    match f {
        Formula::Eq(a, b) => {
            for s in [a, b] {
                if let Sym::Range(rv) = s {
                    out.insert(rv.clone());
                }
            }
        }
        Formula::Geq(a, b) => {
            fv_term(a, out);
            fv_term(b, out);
        }
        Formula::Not(x) => fv_formula(x, out),
        Formula::And(a, b) => {
            fv_formula(a, out);
            fv_formula(b, out);
        }
    }
}

fn fv_term(t: &Term, out: &mut BTreeSet<RangeVar>) {
    match t {
        Term::Prob { event, given } => {
            out.extend(free_vars_event(event));
            out.extend(free_vars_event(given));
        }
        Term::Sum { bound, body } => {
            let mut inner = BTreeSet::new();
            fv_term(body, &mut inner);
            inner.remove(bound);
            out.extend(inner);
        }
        Term::Add(a, b) | Term::Mul(a, b) => {
            fv_term(a, out);
            fv_term(b, out);
        }
        Term::Neg(a) => fv_term(a, out),
        Term::Sym(Sym::Range(rv)) => {
            out.insert(rv.clone());
        }
        Term::Sym(Sym::Const { .. }) => {}
    }
}

/// Largest index of any range variable of `rv.var` occurring (free or bound) in `t`.
fn max_index_term(t: &Term, var: &super::Var) -> u32 {
    let mut m = 0;
    fn go(t: &Term, var: &super::Var, m: &mut u32) {
        match t {
            Term::Prob { event, given } => {
                for e in [event, given] {
                    e.for_each_sym(&mut |s| {
                        if let Sym::Range(rv) = s {
                            if &rv.var == var {
                                *m = (*m).max(rv.index);
                            }
                        }
                    });
                }
            }
            Term::Sum { bound, body } => {
                if &bound.var == var {
                    *m = (*m).max(bound.index);
                }
                go(body, var, m);
            }
            Term::Add(a, b) | Term::Mul(a, b) => {
                go(a, var, m);
                go(b, var, m);
            }
            Term::Neg(a) => go(a, var, m),
            Term::Sym(Sym::Range(rv)) if &rv.var == var => *m = (*m).max(rv.index),
            Term::Sym(_) => {}
        }
    }
    go(t, var, &mut m);
    m
}

fn replace_sym(s: &Sym, v: &RangeVar, d: &Sym) -> Sym {
    match s {
        Sym::Range(rv) if rv == v => d.clone(),
        other => other.clone(),
    }
}

fn subst_term(t: &Term, v: &RangeVar, d: &Sym) -> Term {
    match t {
        Term::Prob { event, given } => Term::Prob {
            event: event.map_syms(&mut |s| replace_sym(s, v, d)),
            given: given.map_syms(&mut |s| replace_sym(s, v, d)),
        },
        Term::Sum { bound, body } => {
            if bound == v || !free_vars_term(body).contains(v) {
                return t.clone();
            }
            if let Sym::Range(w) = d {
                if w == bound {
                    let fresh = RangeVar::new(&bound.var, max_index_term(body, &bound.var).max(w.index).max(v.index) + 1);
                    let renamed = subst_term(body, bound, &Sym::Range(fresh.clone()));
                    return Term::sum(fresh, subst_term(&renamed, v, d));
                }
            }
            Term::sum(bound.clone(), subst_term(body, v, d))
        }
        Term::Add(a, b) => Term::add(subst_term(a, v, d), subst_term(b, v, d)),
        Term::Mul(a, b) => Term::mul(subst_term(a, v, d), subst_term(b, v, d)),
        Term::Neg(a) => Term::neg(subst_term(a, v, d)),
        Term::Sym(s) => Term::Sym(replace_sym(s, v, d)),
    }
}

fn subst_formula(f: &Formula, v: &RangeVar, d: &Sym) -> Formula {
    match f {
        Formula::Eq(a, b) => Formula::Eq(replace_sym(a, v, d), replace_sym(b, v, d)),
        Formula::Geq(a, b) => Formula::Geq(subst_term(a, v, d), subst_term(b, v, d)),
        Formula::Not(x) => Formula::not(subst_formula(x, v, d)),
        Formula::And(a, b) => Formula::and(subst_formula(a, v, d), subst_formula(b, v, d)),
    }
}

fn check_kind(v: &RangeVar, d: &Sym) -> Result<(), SubstError> {
    if d.var() != &v.var {
        return Err(SubstError::KindMismatch { target: v.to_string(), replacement: d.to_string() });
    }
    Ok(())
}

/// `φ[v/d]`: replaces every free occurrence of `v`, renaming binders to avoid capture.
pub fn substitute_range_var(f: &Formula, v: &RangeVar, d: &Sym) -> Result<Formula, SubstError> {
    check_kind(v, d)?;
    Ok(subst_formula(f, v, d))
}

pub fn substitute_range_var_term(t: &Term, v: &RangeVar, d: &Sym) -> Result<Term, SubstError> {
    check_kind(v, d)?;
    Ok(subst_term(t, v, d))
}

fn subst_event_in_event(e: &Event, v: &RangeVar, eps: &Event) -> Result<Event, SubstError> {
    let is_target = |s: &Sym| matches!(s, Sym::Range(rv) if rv == v);
    Ok(match e {
        Event::Top => Event::Top,
        Event::Atom(s) if is_target(s) => eps.clone(),
        Event::Atom(s) => Event::Atom(s.clone()),
        Event::Not(x) => Event::not(subst_event_in_event(x, v, eps)?),
        Event::And(a, b) => Event::and(subst_event_in_event(a, v, eps)?, subst_event_in_event(b, v, eps)?),
        Event::Box(int, body) => {
            let mut atoms = Vec::with_capacity(int.atoms().len());
            for s in int.atoms() {
                if is_target(s) {
                    match eps {
                        Event::Atom(r) if r.var() == &v.var => atoms.push(r.clone()),
                        _ => return Err(SubstError::NonAtomicIntervention(v.var.to_string())),
                    }
                } else {
                    atoms.push(s.clone());
                }
            }
            Event::boxed(Intervention(atoms), subst_event_in_event(body, v, eps)?)
        }
    })
}

/// `t[V=v / ε]`: replaces every free atom `V = v` inside probability operators by `ε`.
pub fn substitute_event(t: &Term, v: &RangeVar, eps: &Event) -> Result<Term, SubstError> {
    Ok(match t {
        Term::Prob { event, given } => Term::Prob {
            event: subst_event_in_event(event, v, eps)?,
            given: subst_event_in_event(given, v, eps)?,
        },
        Term::Sum { bound, body } => {
            if bound == v {
                return Ok(t.clone());
            }
            if free_vars_event(eps).contains(bound) && free_vars_term(body).contains(v) {
                let top = max_index_term(body, &bound.var)
                    .max(free_vars_event(eps).iter().filter(|r| r.var == bound.var).map(|r| r.index).max().unwrap_or(0));
                let fresh = RangeVar::new(&bound.var, top + 1);
                let renamed = subst_term(body, bound, &Sym::Range(fresh.clone()));
                return Ok(Term::sum(fresh, substitute_event(&renamed, v, eps)?));
            }
            Term::sum(bound.clone(), substitute_event(body, v, eps)?)
        }
        Term::Add(a, b) => Term::add(substitute_event(a, v, eps)?, substitute_event(b, v, eps)?),
        Term::Mul(a, b) => Term::mul(substitute_event(a, v, eps)?, substitute_event(b, v, eps)?),
        Term::Neg(a) => Term::neg(substitute_event(a, v, eps)?),
        Term::Sym(s) => Term::Sym(s.clone()),
    })
}

/// Renames every sum binder to a canonical index determined by its nesting
/// depth, so alpha-equivalent formulas become equal.
pub fn rename_bound_canonical(f: &Formula) -> Formula {
    const BASE: u32 = 1 << 30;
    fn term(t: &Term, depth: u32) -> Term {
        match t {
            Term::Sum { bound, body } => {
                let canon = RangeVar::new(&bound.var, BASE + depth);
                let body = subst_term(body, bound, &Sym::Range(canon.clone()));
                Term::sum(canon, term(&body, depth + 1))
            }
            Term::Add(a, b) => Term::add(term(a, depth), term(b, depth)),
            Term::Mul(a, b) => Term::mul(term(a, depth), term(b, depth)),
            Term::Neg(a) => Term::neg(term(a, depth)),
            other => other.clone(),
        }
    }
    fn formula(f: &Formula) -> Formula {
        match f {
            Formula::Eq(..) => f.clone(),
            Formula::Geq(a, b) => Formula::Geq(term(a, 0), term(b, 0)),
            Formula::Not(x) => Formula::not(formula(x)),
            Formula::And(a, b) => Formula::and(formula(a), formula(b)),
        }
    }
    formula(f)
}
