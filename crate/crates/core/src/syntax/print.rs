//! Printer producing text that parses back to the identical AST.
//!
//! Sugar (`->`, `\/`, `<->`, `==`, `!=`, `>`, `-`, numerals) is emitted only
//! for shapes whose parse is exactly that shape.

use super::{Event, Formula, Sequent, Sym, Term};

fn sym_full(s: &Sym) -> String {
    s.to_string()
}

/// Right-hand side of `V=d`: constants positionally.
fn sym_positional(s: &Sym) -> String {
    match s {
        Sym::Const { index, .. } => format!("c{}", index),
        Sym::Range(rv) => rv.to_string(),
    }
}

const EV_OR: u8 = 1;
const EV_AND: u8 = 2;
const EV_UNARY: u8 = 3;

fn as_event_or(e: &Event) -> Option<(&Event, &Event)> {
    if let Event::Not(inner) = e {
        if let Event::And(a, b) = &**inner {
            if let (Event::Not(a), Event::Not(b)) = (&**a, &**b) {
                return Some((a, b));
            }
        }
    }
    None
}

fn event_prec(e: &Event) -> u8 {
    if as_event_or(e).is_some() {
        EV_OR
    } else if matches!(e, Event::And(..)) {
        EV_AND
    } else {
        EV_UNARY
    }
}

fn event_at(e: &Event, min: u8, out: &mut String) {
    if event_prec(e) < min {
        out.push('(');
        write_event(e, out);
        out.push(')');
    } else {
        write_event(e, out);
    }
}

fn write_event(e: &Event, out: &mut String) {
    if let Some((a, b)) = as_event_or(e) {
        event_at(a, EV_OR, out);
        out.push_str(" \\/ ");
        event_at(b, EV_AND, out);
        return;
    }
    match e {
        Event::Top => out.push('T'),
        Event::Atom(s) => {
            out.push_str(s.var().name());
            out.push('=');
            out.push_str(&sym_positional(s));
        }
        Event::Not(inner) => match &**inner {
            Event::Top => out.push('F'),
            Event::Atom(s) => {
                out.push_str(s.var().name());
                out.push_str("!=");
                out.push_str(&sym_positional(s));
            }
            other => {
                out.push('!');
                event_at(other, EV_UNARY, out);
            }
        },
        Event::And(a, b) => {
            event_at(a, EV_AND, out);
            out.push_str(" & ");
            event_at(b, EV_UNARY, out);
        }
        Event::Box(int, body) => {
            out.push('[');
            if int.is_empty() {
                out.push('T');
            } else {
                let parts: Vec<String> = int
                    .atoms()
                    .iter()
                    .map(|s| format!("{}={}", s.var(), sym_positional(s)))
                    .collect();
                out.push_str(&parts.join(" & "));
            }
            out.push_str("] ");
            event_at(body, EV_UNARY, out);
        }
    }
}

pub fn print_event(e: &Event) -> String {
    let mut s = String::new();
    write_event(e, &mut s);
    s
}

const T_ADD: u8 = 1;
const T_MUL: u8 = 2;
const T_UNARY: u8 = 3;

fn term_prec(t: &Term) -> u8 {
    if t.as_numeral().is_some() {
        return T_UNARY;
    }
    match t {
        Term::Add(..) => T_ADD,
        Term::Mul(..) => T_MUL,
        _ => T_UNARY,
    }
}

fn term_at(t: &Term, min: u8, out: &mut String) {
    if term_prec(t) < min {
        out.push('(');
        write_term(t, out);
        out.push(')');
    } else {
        write_term(t, out);
    }
}

fn write_term(t: &Term, out: &mut String) {
    if let Some(n) = t.as_numeral() {
        out.push_str(&n.to_string());
        return;
    }
    match t {
        Term::Prob { event, given } => {
            out.push_str("P(");
            write_event(event, out);
            if *given != Event::Top {
                out.push_str(" | ");
                write_event(given, out);
            }
            out.push(')');
        }
        Term::Sum { bound, body } => {
            out.push_str("(sum ");
            out.push_str(&bound.to_string());
            out.push_str(" . ");
            term_at(body, T_MUL, out);
            out.push(')');
        }
        Term::Add(a, b) => {
            term_at(a, T_ADD, out);
            match &**b {
                Term::Neg(inner) => {
                    out.push_str(" - ");
                    term_at(inner, T_MUL, out);
                }
                other => {
                    out.push_str(" + ");
                    term_at(other, T_MUL, out);
                }
            }
        }
        Term::Mul(a, b) => {
            term_at(a, T_MUL, out);
            out.push_str(" * ");
            term_at(b, T_UNARY, out);
        }
        Term::Neg(a) => {
            out.push('-');
            term_at(a, T_UNARY, out);
        }
        Term::Sym(s) => out.push_str(&sym_full(s)),
    }
}

pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(t, &mut s);
    s
}

const F_IFF: u8 = 1;
const F_IMP: u8 = 2;
const F_OR: u8 = 3;
const F_AND: u8 = 4;
const F_UNARY: u8 = 5;

enum Shape<'a> {
    Iff(&'a Formula, &'a Formula),
    Or(&'a Formula, &'a Formula),
    Implies(&'a Formula, &'a Formula),
    And(&'a Formula, &'a Formula),
    Not(&'a Formula),
    Cmp(&'a Term, &'static str, &'a Term),
    SymEq(&'a Sym, &'static str, &'a Sym),
}

fn shape(f: &Formula) -> Shape<'_> {
    if let Some((a, b)) = f.as_iff() {
        return Shape::Iff(a, b);
    }
    if let Some((a, b)) = f.as_approx() {
        return Shape::Cmp(a, "==", b);
    }
    if let Some((a, b)) = f.as_gt() {
        return Shape::Cmp(a, ">", b);
    }
    if let Formula::Not(inner) = f {
        if let Some((a, b)) = inner.as_approx() {
            return Shape::Cmp(a, "!=", b);
        }
        if let Formula::Eq(a, b) = &**inner {
            return Shape::SymEq(a, "!~", b);
        }
        if let Formula::And(a, b) = &**inner {
            if let (Formula::Not(a), Formula::Not(b)) = (&**a, &**b) {
                return Shape::Or(a, b);
            }
        }
        if let Some((a, b)) = f.as_implication() {
            return Shape::Implies(a, b);
        }
        return Shape::Not(inner);
    }
    match f {
        Formula::Eq(a, b) => Shape::SymEq(a, "~", b),
        Formula::Geq(a, b) => Shape::Cmp(a, ">=", b),
        Formula::And(a, b) => Shape::And(a, b),
        Formula::Not(_) => unreachable!(),
    }
}

fn formula_prec(f: &Formula) -> u8 {
    match shape(f) {
        Shape::Iff(..) => F_IFF,
        Shape::Implies(..) => F_IMP,
        Shape::Or(..) => F_OR,
        Shape::And(..) => F_AND,
        _ => F_UNARY,
    }
}

fn formula_at(f: &Formula, min: u8, out: &mut String) {
    if formula_prec(f) < min {
        out.push('(');
        write_formula(f, out);
        out.push(')');
    } else {
        write_formula(f, out);
    }
}

fn write_formula(f: &Formula, out: &mut String) {
    match shape(f) {
        Shape::Iff(a, b) => {
            formula_at(a, F_IFF, out);
            out.push_str(" <-> ");
            formula_at(b, F_IMP, out);
        }
        Shape::Implies(a, b) => {
            formula_at(a, F_OR, out);
            out.push_str(" -> ");
            formula_at(b, F_IMP, out);
        }
        Shape::Or(a, b) => {
            formula_at(a, F_OR, out);
            out.push_str(" \\/ ");
            formula_at(b, F_AND, out);
        }
        Shape::And(a, b) => {
            formula_at(a, F_AND, out);
            out.push_str(" & ");
            formula_at(b, F_UNARY, out);
        }
        Shape::Not(a) => {
            out.push('!');
            formula_at(a, F_UNARY, out);
        }
        Shape::Cmp(a, op, b) => {
            write_term(a, out);
            out.push(' ');
            out.push_str(op);
            out.push(' ');
            write_term(b, out);
        }
        Shape::SymEq(a, op, b) => {
            out.push_str(&sym_full(a));
            out.push(' ');
            out.push_str(op);
            out.push(' ');
            out.push_str(&sym_positional(b));
        }
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    write_formula(f, &mut s);
    s
}

pub fn print_sequent(s: &Sequent) -> String {
    let premises = s.premises.iter().map(print_formula).collect::<Vec<_>>().join("; ");
    if premises.is_empty() {
        format!("|- {}", print_formula(&s.conclusion))
    } else {
        format!("{} |- {}", premises, print_formula(&s.conclusion))
    }
}
