//! Exact rational helpers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `p`, `-p` or `p/q`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(Rational::new(p, q))
            }
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

/// Always `p/q`, as used in traces and JSON.
pub fn fmt_pq(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `p` for integers, `p/q` otherwise.
pub fn fmt_short(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        fmt_pq(r)
    }
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}
