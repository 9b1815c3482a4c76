//! Exact-arithmetic engine for mixed-Tsirelson-type norms.
//!
//! Everything here runs on exact rationals and big integers: finitely
//! supported vectors, parameter schedules `(m_j, n_j)` with their growth
//! audits, norming-set functionals given by tree analyses, an interval
//! dynamic program that computes norms together with optimal-functional
//! certificates, the Jamesification norm over interval ground sets, the
//! sigma-coded special-sequence machinery, and diagonal operators with
//! boundedness and non-compactness audits.
//!
//! No floating point appears anywhere on a norm path.

pub mod constructions;
pub mod core;
pub mod diagonal_ops;
pub mod jamesification;
pub mod norm_engine;
pub mod normset;

pub use crate::core::{Interval, ParameterSchedule, RationalVector, Regime, ScheduleReport};
pub use crate::normset::{FamilySpec, Functional, FunctionalTree, OpKind, OpTag};

/// Exact rational scalar used throughout the crate.
pub type Rational = num_rational::BigRational;
/// Exact integer used for schedule entries and cardinality bounds.
pub type Int = num_bigint::BigInt;

use num_traits::{One, Zero};

/// `n` as an exact integer.
pub fn int(n: i64) -> Int {
    Int::from(n)
}

/// `n/d` as an exact rational in canonical (reduced, positive-denominator) form.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(Int::from(n), Int::from(d))
}

/// `1/d` for an exact integer `d`.
pub fn recip(d: &Int) -> Rational {
    Rational::new(Int::one(), d.clone())
}

/// Exact zero.
pub fn rat_zero() -> Rational {
    Rational::zero()
}

/// Renders a rational as `num/den` (denominator kept even when 1, so the
/// output is unambiguous to re-parse).
pub fn rat_to_string(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `num/den` or a bare integer into a canonical rational.
pub fn rat_from_str(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let numer: Int = n.parse().map_err(|_| format!("bad numerator {n:?}"))?;
    let denom: Int = d.parse().map_err(|_| format!("bad denominator {d:?}"))?;
    if denom.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(Rational::new(numer, denom))
}
