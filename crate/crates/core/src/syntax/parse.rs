use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::{Event, Formula, Intervention, RangeVar, Sequent, Signature, Sym, Term, Var};
use crate::syntax::subst::free_vars_term;

/// Source position (1-based line and column, 0-based byte offset).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownSymbol,
    CrossVariable,
    BoundInDenominator,
    Intervention,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.pos.line, self.pos.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    Dot,
    Semi,
    Bar,
    At,
    And,
    Or,
    Not,
    Tilde,
    NTilde,
    Assign,
    NEq,
    Plus,
    Minus,
    Star,
    Slash,
    Ge,
    Gt,
    Le,
    Lt,
    EqEq,
    Arrow,
    DArrow,
    Turnstile,
    Top,
    Bot,
    Sigma,
    Ident(String),
    Num(BigUint),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::Dot => ".",
            Tok::Semi => ";",
            Tok::Bar => "|",
            Tok::At => "@",
            Tok::And => "&",
            Tok::Or => "\\/",
            Tok::Not => "!",
            Tok::Tilde => "~",
            Tok::NTilde => "!~",
            Tok::Assign => "=",
            Tok::NEq => "!=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Lt => "<",
            Tok::EqEq => "==",
            Tok::Arrow => "->",
            Tok::DArrow => "<->",
            Tok::Turnstile => "|-",
            Tok::Top => "T",
            Tok::Bot => "F",
            Tok::Sigma => "sum",
            Tok::Ident(s) => return write!(f, "`{}`", s),
            Tok::Num(n) => return write!(f, "`{}`", n),
            Tok::Eof => "end of input",
        };
        write!(f, "`{}`", s)
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        let pos = Pos { offset: off, line, col: text[line_start..off].chars().count() + 1 };
        let next = chars.get(i + 1).map(|&(_, c)| c);
        let next2 = chars.get(i + 2).map(|&(_, c)| c);
        if c == '\n' {
            line += 1;
            line_start = off + 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(text.len(), |&(o, _)| o);
            let word = &text[chars[start].0..end];
            let tok = match word {
                "T" => Tok::Top,
                "F" => Tok::Bot,
                "sum" => Tok::Sigma,
                _ => Tok::Ident(word.to_string()),
            };
            out.push((tok, pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let end = chars.get(i).map_or(text.len(), |&(o, _)| o);
            let n: BigUint = text[chars[start].0..end].parse().expect("digits");
            out.push((Tok::Num(n), pos));
            continue;
        }
        let (tok, len) = match (c, next, next2) {
            ('<', Some('-'), Some('>')) => (Tok::DArrow, 3),
            ('<', Some('='), _) => (Tok::Le, 2),
            ('<', _, _) => (Tok::Lt, 1),
            ('>', Some('='), _) => (Tok::Ge, 2),
            ('>', _, _) => (Tok::Gt, 1),
            ('-', Some('>'), _) => (Tok::Arrow, 2),
            ('-', _, _) | ('−', _, _) => (Tok::Minus, 1),
            ('=', Some('='), _) => (Tok::EqEq, 2),
            ('=', _, _) => (Tok::Assign, 1),
            ('!', Some('='), _) => (Tok::NEq, 2),
            ('!', Some('~'), _) => (Tok::NTilde, 2),
            ('!', _, _) | ('¬', _, _) => (Tok::Not, 1),
            ('|', Some('-'), _) => (Tok::Turnstile, 2),
            ('|', _, _) => (Tok::Bar, 1),
            ('/', Some('\\'), _) => (Tok::And, 2),
            ('/', _, _) => (Tok::Slash, 1),
            ('\\', Some('/'), _) => (Tok::Or, 2),
            ('&', _, _) | ('∧', _, _) => (Tok::And, 1),
            ('∨', _, _) => (Tok::Or, 1),
            ('(', _, _) => (Tok::LParen, 1),
            (')', _, _) => (Tok::RParen, 1),
            ('[', _, _) => (Tok::LBrack, 1),
            (']', _, _) => (Tok::RBrack, 1),
            ('.', _, _) => (Tok::Dot, 1),
            (';', _, _) => (Tok::Semi, 1),
            ('@', _, _) => (Tok::At, 1),
            ('~', _, _) | ('≡', _, _) => (Tok::Tilde, 1),
            ('≢', _, _) => (Tok::NTilde, 1),
            ('+', _, _) => (Tok::Plus, 1),
            ('*', _, _) | ('·', _, _) | ('×', _, _) => (Tok::Star, 1),
            ('≿', _, _) | ('≥', _, _) => (Tok::Ge, 1),
            ('≻', _, _) => (Tok::Gt, 1),
            ('≾', _, _) | ('≤', _, _) => (Tok::Le, 1),
            ('≺', _, _) => (Tok::Lt, 1),
            ('≈', _, _) => (Tok::EqEq, 1),
            ('≠', _, _) => (Tok::NEq, 1),
            ('→', _, _) => (Tok::Arrow, 1),
            ('↔', _, _) => (Tok::DArrow, 1),
            ('⊢', _, _) => (Tok::Turnstile, 1),
            ('⊤', _, _) => (Tok::Top, 1),
            ('⊥', _, _) => (Tok::Bot, 1),
            ('Σ', _, _) => (Tok::Sigma, 1),
            _ => {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Syntax,
                    message: format!("unexpected character `{}`", c),
                })
            }
        };
        out.push((tok, pos));
        i += len;
    }
    let end = text.len();
    let pos = Pos { offset: end, line, col: text[line_start.min(end)..].chars().count() + 1 };
    out.push((Tok::Eof, pos));
    Ok(out)
}

enum Ident {
    Const(u32),
    Range(String, u32),
    Other,
}

fn classify_ident(s: &str) -> Ident {
    if let Some(rest) = s.strip_prefix('c') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            return rest.parse().map_or(Ident::Other, Ident::Const);
        }
    }
    if !s.starts_with(|c: char| c.is_ascii_lowercase()) {
        return Ident::Other;
    }
    if let Some((prefix, digits)) = s.rsplit_once('_') {
        if !prefix.is_empty() && !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            return digits.parse().map_or(Ident::Other, |n| Ident::Range(prefix.to_string(), n));
        }
    }
    let split = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if split == s.len() || split == 0 {
        return Ident::Other;
    }
    s[split..].parse().map_or(Ident::Other, |n| Ident::Range(s[..split].to_string(), n))
}

/// A term before numeral expansion and denominator clearing, as written.
#[derive(Clone, Debug)]
pub enum MacroTerm {
    Core(Term),
    Num(BigUint),
    Add(Box<MacroTerm>, Box<MacroTerm>),
    Sub(Box<MacroTerm>, Box<MacroTerm>),
    Mul(Box<MacroTerm>, Box<MacroTerm>),
    Div(Box<MacroTerm>, Box<MacroTerm>),
    Neg(Box<MacroTerm>),
    Sum(RangeVar, Box<MacroTerm>, Pos),
}

/// A cleared term `num / den`; `den = None` means 1.
struct Frac {
    num: Term,
    den: Option<Term>,
}

fn mul_opt(a: Option<Term>, b: Option<Term>) -> Option<Term> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(Term::mul(a, b)),
    }
}

fn times(t: Term, d: &Option<Term>) -> Term {
    match d {
        None => t,
        Some(d) => Term::mul(t, d.clone()),
    }
}

fn numeral(n: &BigUint, pos: Pos) -> Result<Term, ParseError> {
    let v = n.to_u64().filter(|&v| v <= 1 << 16).ok_or(ParseError {
        pos,
        kind: ParseErrorKind::Syntax,
        message: format!("numeral {} is too large to expand", n),
    })?;
    Ok(Term::numeral(v))
}

fn clear(m: &MacroTerm, pos: Pos) -> Result<Frac, ParseError> {
    Ok(match m {
        MacroTerm::Core(t) => Frac { num: t.clone(), den: None },
        MacroTerm::Num(n) => Frac { num: numeral(n, pos)?, den: None },
        MacroTerm::Add(a, b) | MacroTerm::Sub(a, b) => {
            let a = clear(a, pos)?;
            let b = clear(b, pos)?;
            let right = times(b.num, &a.den);
            let right = if matches!(m, MacroTerm::Sub(..)) { Term::neg(right) } else { right };
            Frac { num: Term::add(times(a.num, &b.den), right), den: mul_opt(a.den, b.den) }
        }
        MacroTerm::Mul(a, b) => {
            let a = clear(a, pos)?;
            let b = clear(b, pos)?;
            Frac { num: Term::mul(a.num, b.num), den: mul_opt(a.den, b.den) }
        }
        MacroTerm::Div(a, b) => {
            let a = clear(a, pos)?;
            let b = clear(b, pos)?;
            Frac { num: times(a.num, &b.den), den: Some(times(b.num, &a.den)) }
        }
        MacroTerm::Neg(a) => {
            let a = clear(a, pos)?;
            Frac { num: Term::neg(a.num), den: a.den }
        }
        MacroTerm::Sum(v, body, spos) => {
            let b = clear(body, pos)?;
            if let Some(d) = &b.den {
                if free_vars_term(d).contains(v) {
                    return Err(ParseError {
                        pos: *spos,
                        kind: ParseErrorKind::BoundInDenominator,
                        message: format!("bound variable {} occurs in a denominator", v),
                    });
                }
            }
            Frac { num: Term::sum(v.clone(), b.num), den: b.den }
        }
    })
}

/// `a ≿ b` with numerals expanded and denominators cleared: `na·db ≿ nb·da`.
pub fn expand_comparison(a: &MacroTerm, b: &MacroTerm) -> Result<Formula, ParseError> {
    cleared_geq(a, b, Pos::default())
}

fn cleared_geq(a: &MacroTerm, b: &MacroTerm, pos: Pos) -> Result<Formula, ParseError> {
    let fa = clear(a, pos)?;
    let fb = clear(b, pos)?;
    Ok(Formula::Geq(times(fa.num, &fb.den), times(fb.num, &fa.den)))
}

struct Parser<'a> {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    sig: &'a Signature,
    /// Furthest error seen, used to report the better message after backtracking.
    best: Option<ParseError>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(text: &str, sig: &'a Signature) -> PResult<Self> {
        Ok(Parser { toks: lex(text)?, i: 0, sig, best: None })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, kind: ParseErrorKind, message: impl Into<String>) -> PResult<T> {
        Err(ParseError { pos: self.pos(), kind, message: message.into() })
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(ParseErrorKind::Syntax, format!("expected {}, found {}", t, self.peek()))
        }
    }

    fn record(&mut self, e: ParseError) {
        if self.best.as_ref().is_none_or(|b| e.pos.offset > b.pos.offset) {
            self.best = Some(e);
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            let e = ParseError {
                pos: self.pos(),
                kind: ParseErrorKind::Syntax,
                message: format!("unexpected {}", self.peek()),
            };
            Err(self.best.take().filter(|b| b.pos.offset > e.pos.offset).unwrap_or(e))
        }
    }

    fn variable(&mut self) -> PResult<Var> {
        match self.peek().clone() {
            Tok::Ident(name) => match self.sig.var(&name) {
                Some(v) => {
                    let v = v.clone();
                    self.bump();
                    Ok(v)
                }
                None => self.err(ParseErrorKind::UnknownSymbol, format!("unknown variable `{}`", name)),
            },
            other => self.err(ParseErrorKind::Syntax, format!("expected a variable, found {}", other)),
        }
    }

    /// A symbol; `expected` supplies the variable for bare constants and is
    /// checked against explicit annotations.
    fn symbol(&mut self, expected: Option<&Var>) -> PResult<Sym> {
        let pos = self.pos();
        let name = match self.peek().clone() {
            Tok::Ident(name) => name,
            other => return self.err(ParseErrorKind::Syntax, format!("expected a symbol, found {}", other)),
        };
        let sym = match classify_ident(&name) {
            Ident::Const(0) | Ident::Range(_, 0) => {
                return self.err(ParseErrorKind::UnknownSymbol, format!("symbol indices start at 1: `{}`", name))
            }
            Ident::Const(idx) => {
                self.bump();
                let var = if self.eat(&Tok::At) {
                    self.variable()?
                } else if let Some(v) = expected {
                    v.clone()
                } else {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownSymbol,
                        message: format!("constant `{}` needs a variable annotation such as `{}@X`", name, name),
                    });
                };
                Sym::Const { var, index: idx }
            }
            Ident::Range(prefix, idx) => match self.sig.var_for_prefix(&prefix) {
                Some(var) => {
                    let var = var.clone();
                    self.bump();
                    Sym::range(&var, idx)
                }
                None => {
                    return self.err(ParseErrorKind::UnknownSymbol, format!("unknown range variable `{}`", name))
                }
            },
            Ident::Other => return self.err(ParseErrorKind::UnknownSymbol, format!("unknown symbol `{}`", name)),
        };
        if let Some(v) = expected {
            if sym.var() != v {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::CrossVariable,
                    message: format!("`{}` belongs to {}, not {}", name, sym.var(), v),
                });
            }
        }
        Ok(sym)
    }

    // ---- events ----

    fn event(&mut self) -> PResult<Event> {
        let mut e = self.event_and()?;
        while self.eat(&Tok::Or) {
            let r = self.event_and()?;
            e = Event::or(e, r);
        }
        Ok(e)
    }

    fn event_and(&mut self) -> PResult<Event> {
        let mut e = self.event_unary()?;
        while self.eat(&Tok::And) {
            let r = self.event_unary()?;
            e = Event::and(e, r);
        }
        Ok(e)
    }

    fn event_unary(&mut self) -> PResult<Event> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Event::not(self.event_unary()?))
            }
            Tok::LBrack => {
                let pos = self.pos();
                self.bump();
                let int = self.intervention()?;
                self.expect(&Tok::RBrack)?;
                let body = self.event_unary()?;
                if body.has_box() {
                    return Err(ParseError {
                        pos,
                        kind: ParseErrorKind::Intervention,
                        message: "interventions cannot be nested".into(),
                    });
                }
                Ok(Event::boxed(int, body))
            }
            Tok::Top => {
                self.bump();
                Ok(Event::Top)
            }
            Tok::Bot => {
                self.bump();
                Ok(Event::bottom())
            }
            Tok::LParen => {
                self.bump();
                let e = self.event()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            _ => {
                let var = self.variable()?;
                let negated = match self.bump() {
                    Tok::Assign => false,
                    Tok::NEq => true,
                    other => {
                        self.i -= 1;
                        return self.err(ParseErrorKind::Syntax, format!("expected `=` after {}, found {}", var, other));
                    }
                };
                let sym = self.symbol(Some(&var))?;
                let atom = Event::Atom(sym);
                Ok(if negated { Event::not(atom) } else { atom })
            }
        }
    }

    fn intervention(&mut self) -> PResult<Intervention> {
        if self.eat(&Tok::Top) {
            return Ok(Intervention::default());
        }
        let mut atoms: Vec<Sym> = Vec::new();
        loop {
            let pos = self.pos();
            let var = self.variable()?;
            self.expect(&Tok::Assign)?;
            let sym = self.symbol(Some(&var))?;
            if atoms.iter().any(|s| s.var() == &var) {
                return Err(ParseError {
                    pos,
                    kind: ParseErrorKind::Intervention,
                    message: format!("{} is intervened on twice", var),
                });
            }
            atoms.push(sym);
            if !self.eat(&Tok::And) {
                break;
            }
        }
        Ok(Intervention(atoms))
    }

    fn prob(&mut self) -> PResult<Term> {
        self.bump(); // P
        self.expect(&Tok::LParen)?;
        let event = self.event()?;
        let given = if self.eat(&Tok::Bar) { self.event()? } else { Event::Top };
        self.expect(&Tok::RParen)?;
        if event.has_box() || given.has_box() {
            Ok(Term::cond(wrap_observational(event), wrap_observational(given)))
        } else {
            Ok(Term::cond(event, given))
        }
    }

    // ---- terms ----

    fn term(&mut self) -> PResult<MacroTerm> {
        let mut t = self.product()?;
        loop {
            if self.eat(&Tok::Plus) {
                let r = self.product()?;
                t = MacroTerm::Add(Box::new(t), Box::new(r));
            } else if self.eat(&Tok::Minus) {
                let r = self.product()?;
                t = MacroTerm::Sub(Box::new(t), Box::new(r));
            } else {
                return Ok(t);
            }
        }
    }

    fn product(&mut self) -> PResult<MacroTerm> {
        let mut t = self.term_unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let r = self.term_unary()?;
                t = MacroTerm::Mul(Box::new(t), Box::new(r));
            } else if self.eat(&Tok::Slash) {
                let r = self.term_unary()?;
                t = MacroTerm::Div(Box::new(t), Box::new(r));
            } else {
                return Ok(t);
            }
        }
    }

    fn term_unary(&mut self) -> PResult<MacroTerm> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                Ok(MacroTerm::Neg(Box::new(self.term_unary()?)))
            }
            Tok::Sigma => {
                let pos = self.pos();
                self.bump();
                let sym = self.symbol(None)?;
                let bound = match sym {
                    Sym::Range(rv) => rv,
                    Sym::Const { .. } => {
                        return Err(ParseError {
                            pos,
                            kind: ParseErrorKind::Syntax,
                            message: "a sum must bind a range variable".into(),
                        })
                    }
                };
                self.expect(&Tok::Dot)?;
                let body = self.product()?;
                Ok(MacroTerm::Sum(bound, Box::new(body), pos))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(MacroTerm::Num(n))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(name) if name == "P" && *self.peek_at(1) == Tok::LParen => Ok(MacroTerm::Core(self.prob()?)),
            Tok::Ident(_) => Ok(MacroTerm::Core(Term::Sym(self.symbol(None)?))),
            other => self.err(ParseErrorKind::Syntax, format!("expected a term, found {}", other)),
        }
    }

    // ---- formulas ----

    fn formula(&mut self) -> PResult<Formula> {
        let mut f = self.implication()?;
        while self.eat(&Tok::DArrow) {
            let r = self.implication()?;
            f = Formula::iff(f, r);
        }
        Ok(f)
    }

    fn implication(&mut self) -> PResult<Formula> {
        let f = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let r = self.implication()?;
            Ok(Formula::implies(f, r))
        } else {
            Ok(f)
        }
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut f = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let r = self.conjunction()?;
            f = Formula::or(f, r);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut f = self.formula_unary()?;
        while self.eat(&Tok::And) {
            let r = self.formula_unary()?;
            f = Formula::and(f, r);
        }
        Ok(f)
    }

    fn formula_unary(&mut self) -> PResult<Formula> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.formula_unary()?))
            }
            Tok::LParen => {
                let save = self.i;
                match self.comparison() {
                    Ok(f) => Ok(f),
                    Err(e) => {
                        self.record(e);
                        self.i = save;
                        self.bump();
                        let f = self.formula().inspect_err(|e| self.record(e.clone()))?;
                        match self.expect(&Tok::RParen) {
                            Ok(()) => Ok(f),
                            Err(e) => {
                                self.record(e);
                                Err(self.best.clone().expect("recorded"))
                            }
                        }
                    }
                }
            }
            Tok::Ident(_) if matches!(self.peek_at(1), Tok::Tilde | Tok::NTilde)
                || (matches!(self.peek_at(1), Tok::At) && matches!(self.peek_at(3), Tok::Tilde | Tok::NTilde)) =>
            {
                self.symbol_equality()
            }
            _ => self.comparison(),
        }
    }

    fn symbol_equality(&mut self) -> PResult<Formula> {
        let pos = self.pos();
        // Parse the left symbol lazily: a bare constant takes its variable from the right side.
        let left_start = self.i;
        let left = self.symbol(None).ok();
        if left.is_none() {
            self.i = left_start;
            self.bump();
        }
        let negated = matches!(self.bump(), Tok::NTilde);
        let right = self.symbol(left.as_ref().map(|s| s.var()))?;
        let left = match left {
            Some(l) => l,
            None => {
                let after = self.i;
                self.i = left_start;
                let l = self.symbol(Some(right.var()))?;
                self.i = after;
                l
            }
        };
        if left.var() != right.var() {
            return Err(ParseError {
                pos,
                kind: ParseErrorKind::CrossVariable,
                message: format!("cannot compare symbols of {} and {}", left.var(), right.var()),
            });
        }
        let f = Formula::Eq(left, right);
        Ok(if negated { Formula::not(f) } else { f })
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let pos = self.pos();
        let a = self.term()?;
        let op = self.bump();
        let b = match op {
            Tok::Ge | Tok::Gt | Tok::Le | Tok::Lt | Tok::EqEq | Tok::NEq => self.term()?,
            other => {
                self.i -= 1;
                return self.err(ParseErrorKind::Syntax, format!("expected a comparison, found {}", other));
            }
        };
        Ok(match op {
            Tok::Ge => cleared_geq(&a, &b, pos)?,
            Tok::Le => cleared_geq(&b, &a, pos)?,
            Tok::Gt => Formula::and(cleared_geq(&a, &b, pos)?, Formula::not(cleared_geq(&b, &a, pos)?)),
            Tok::Lt => Formula::and(cleared_geq(&b, &a, pos)?, Formula::not(cleared_geq(&a, &b, pos)?)),
            Tok::EqEq => Formula::and(cleared_geq(&a, &b, pos)?, cleared_geq(&b, &a, pos)?),
            Tok::NEq => Formula::not(Formula::and(cleared_geq(&a, &b, pos)?, cleared_geq(&b, &a, pos)?)),
            _ => unreachable!(),
        })
    }
}

/// Wraps every box-free maximal subevent in `[⊤]` so that an event mixing
/// boxed and unboxed parts becomes a causal base formula. `⊤` alone is kept.
fn wrap_observational(e: Event) -> Event {
    fn go(e: Event) -> Event {
        if !e.has_box() {
            return Event::boxed(Intervention::default(), e);
        }
        match e {
            Event::Not(x) => Event::not(go(*x)),
            Event::And(a, b) => Event::and(go(*a), go(*b)),
            other => other,
        }
    }
    if e == Event::Top {
        e
    } else {
        go(e)
    }
}

pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text, sig)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

/// Parses a term; division is only meaningful inside comparisons and is rejected here.
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, ParseError> {
    let mut p = Parser::new(text, sig)?;
    let pos = p.pos();
    let t = p.term()?;
    p.expect_eof()?;
    let f = clear(&t, pos)?;
    if f.den.is_some() {
        return Err(ParseError {
            pos,
            kind: ParseErrorKind::Syntax,
            message: "division is only allowed inside comparisons".into(),
        });
    }
    Ok(f.num)
}

/// `premise; premise |- conclusion` (premises may be empty: `|- conclusion`).
pub fn parse_sequent(text: &str, sig: &Signature) -> Result<Sequent, ParseError> {
    let mut p = Parser::new(text, sig)?;
    let mut premises = Vec::new();
    if !p.eat(&Tok::Turnstile) {
        loop {
            premises.push(p.formula()?);
            if p.eat(&Tok::Turnstile) {
                break;
            }
            p.expect(&Tok::Semi)?;
        }
    }
    let conclusion = p.formula()?;
    p.expect_eof()?;
    Ok(Sequent { premises, conclusion })
}

/// One formula per non-blank, non-comment line.
pub fn parse_formula_lines(text: &str, sig: &Signature) -> Result<Vec<Formula>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = parse_formula(line, sig).map_err(|mut e| {
            e.pos.line = lineno + 1;
            e
        })?;
        out.push(f);
    }
    Ok(out)
}
