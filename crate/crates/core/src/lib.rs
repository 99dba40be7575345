//! Probabilistic and causal logics with summation: syntax, exact semantics
//! over finite structural causal models, grounding, bounded satisfiability,
//! proof checking and succinct circuit encodings.

pub mod acceptance;
pub mod circuits;
pub mod grounding;
pub mod num;
pub mod proofs;
pub mod sat;
pub mod scenarios;
pub mod scm;
pub mod semantics;
pub mod syntax;

pub use syntax::{ConstantCount, Event, Formula, Intervention, RangeVar, Sequent, Signature, Sym, Term, Var};
pub use num::Rational;
pub use scm::{Mechanism, Scm, Setting};
