//! Exact vectors, intervals, parameter schedules and schedule audits.
//!
//! A [`RationalVector`] is a finitely supported map from positive indices to
//! nonzero exact rationals. A [`ParameterSchedule`] holds the big-integer
//! sequences `(m_j)`, `(n_j)` together with the derived products
//! `p_j = n_1 * ... * n_{j-1}` (empty product for `j = 1`), and
//! [`validate_schedule`] recomputes every growth condition the downstream
//! lemma audits rely on, by exact comparison.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::{rat_from_str, rat_to_string, Int, Rational};

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("duplicate index {0} in vector entries")]
    DuplicateIndex(u64),
    #[error("index 0 is not a valid coordinate (indices start at 1)")]
    ZeroIndex,
    #[error("interval requires lo <= hi, got [{0}, {1}]")]
    BadInterval(u64, u64),
    #[error("schedule entries must be positive")]
    NonPositiveEntry,
    #[error("m must be nondecreasing (violated at position {0})")]
    MNotMonotone(usize),
    #[error("n must be strictly increasing (violated at position {0})")]
    NNotMonotone(usize),
    #[error("schedule defines indices 1..={len} but index {want} is required")]
    ScheduleTooShort { len: usize, want: usize },
    #[error("minimal paper schedule needs J >= 3 (n_1 is pinned to m_3), got {0}")]
    PaperScheduleTooSmall(usize),
    #[error("resource budget: {0}")]
    Budget(String),
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// Closed interval `[lo, hi]` of positive integers.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Interval {
    lo: u64,
    hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Result<Self, CoreError> {
        if lo == 0 {
            return Err(CoreError::ZeroIndex);
        }
        if lo > hi {
            return Err(CoreError::BadInterval(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: u64) -> bool {
        self.lo <= k && k <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// `self` entirely to the left of `other`.
    pub fn before(&self, other: &Interval) -> bool {
        self.hi < other.lo
    }

    pub fn disjoint(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Finitely supported sequence of exact rationals; the support is exactly
/// the key set (no stored coordinate is zero).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RationalVector {
    coords: BTreeMap<u64, Rational>,
}

impl RationalVector {
    pub fn zero() -> Self {
        RationalVector::default()
    }

    /// Unit basis vector `e_k`.
    pub fn unit(k: u64) -> Self {
        let mut coords = BTreeMap::new();
        coords.insert(k, Rational::one());
        RationalVector { coords }
    }

    /// Builds a vector from `(index, value)` entries. Duplicate indices are
    /// rejected; zero values are dropped so the support stays canonical.
    pub fn make(entries: Vec<(u64, Rational)>) -> Result<Self, CoreError> {
        let mut coords = BTreeMap::new();
        for (k, v) in entries {
            if k == 0 {
                return Err(CoreError::ZeroIndex);
            }
            if v.is_zero() {
                continue;
            }
            if coords.insert(k, v).is_some() {
                return Err(CoreError::DuplicateIndex(k));
            }
        }
        Ok(RationalVector { coords })
    }

    pub fn coeff(&self, k: u64) -> Rational {
        self.coords.get(&k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.coords.keys().copied()
    }

    pub fn support_len(&self) -> usize {
        self.coords.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Rational)> {
        self.coords.iter().map(|(k, v)| (*k, v))
    }

    /// Smallest interval containing the support, `None` for the zero vector.
    pub fn range(&self) -> Option<Interval> {
        let lo = *self.coords.keys().next()?;
        let hi = *self.coords.keys().next_back()?;
        Some(Interval { lo, hi })
    }

    /// Restriction `Ex`: coordinates outside `e` dropped.
    pub fn restrict(&self, e: &Interval) -> RationalVector {
        let coords = self
            .coords
            .range(e.lo..=e.hi)
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        RationalVector { coords }
    }

    /// Restriction to an arbitrary index set.
    pub fn restrict_set(&self, keep: &dyn Fn(u64) -> bool) -> RationalVector {
        let coords = self
            .coords
            .iter()
            .filter(|(k, _)| keep(**k))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        RationalVector { coords }
    }

    pub fn add(&self, other: &RationalVector) -> RationalVector {
        let mut coords = self.coords.clone();
        for (k, v) in &other.coords {
            let entry = coords.entry(*k).or_insert_with(Rational::zero);
            *entry += v;
            if entry.is_zero() {
                coords.remove(k);
            }
        }
        RationalVector { coords }
    }

    pub fn scale(&self, c: &Rational) -> RationalVector {
        if c.is_zero() {
            return RationalVector::zero();
        }
        let coords = self.coords.iter().map(|(k, v)| (*k, v * c)).collect();
        RationalVector { coords }
    }

    /// Sum of the coordinates inside `e` (the action of `chi_e`).
    pub fn interval_sum(&self, e: &Interval) -> Rational {
        self.coords
            .range(e.lo..=e.hi)
            .fold(Rational::zero(), |acc, (_, v)| acc + v)
    }

    /// `(l1, sup)` norms; both zero for the zero vector.
    pub fn elementary_norms(&self) -> (Rational, Rational) {
        let mut l1 = Rational::zero();
        let mut sup = Rational::zero();
        for v in self.coords.values() {
            let a = v.abs();
            if a > sup {
                sup = a.clone();
            }
            l1 += a;
        }
        (l1, sup)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "coords": self
                .coords
                .iter()
                .map(|(k, v)| json!([k, rat_to_string(v)]))
                .collect::<Vec<_>>()
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, CoreError> {
        let coords = v
            .get("coords")
            .and_then(Value::as_array)
            .ok_or_else(|| CoreError::Json("expected {\"coords\": [...]}".into()))?;
        let mut entries = Vec::with_capacity(coords.len());
        for pair in coords {
            let arr = pair
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| CoreError::Json("coordinate must be [index, \"num/den\"]".into()))?;
            let k = arr[0]
                .as_u64()
                .ok_or_else(|| CoreError::Json("index must be a positive integer".into()))?;
            let q = arr[1]
                .as_str()
                .ok_or_else(|| CoreError::Json("value must be a string rational".into()))?;
            entries.push((k, rat_from_str(q).map_err(CoreError::Json)?));
        }
        RationalVector::make(entries)
    }
}

/// Builds a vector from integer-pair entries; test and CLI convenience.
pub fn make_vector(entries: Vec<(u64, Rational)>) -> Result<RationalVector, CoreError> {
    RationalVector::make(entries)
}

/// `(l1, sup)` of a vector.
pub fn elementary_norms(x: &RationalVector) -> (Rational, Rational) {
    x.elementary_norms()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Regime {
    PaperMinimal,
    ToyRelaxed,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::PaperMinimal => "paper-minimal",
            Regime::ToyRelaxed => "toy-relaxed",
        }
    }
}

/// The double sequence `(m_j, n_j)` with derived products `p_j`.
///
/// Entries are 1-indexed through the accessors. The constructor enforces
/// positivity, `m` nondecreasing and `n` strictly increasing; everything
/// else (the growth conditions) is report-only via [`validate_schedule`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParameterSchedule {
    m: Vec<Int>,
    n: Vec<Int>,
    p: Vec<Int>,
    regime: Regime,
}

impl ParameterSchedule {
    pub fn new(m: Vec<Int>, n: Vec<Int>, regime: Regime) -> Result<Self, CoreError> {
        if m.iter().chain(n.iter()).any(|v| !v.is_positive()) {
            return Err(CoreError::NonPositiveEntry);
        }
        for i in 1..m.len() {
            if m[i] < m[i - 1] {
                return Err(CoreError::MNotMonotone(i + 1));
            }
        }
        for i in 1..n.len() {
            if n[i] <= n[i - 1] {
                return Err(CoreError::NNotMonotone(i + 1));
            }
        }
        // p_j = n_1 * ... * n_{j-1}, empty product for j = 1.
        let mut p = Vec::with_capacity(n.len() + 1);
        let mut acc = Int::one();
        p.push(acc.clone());
        for nj in &n {
            acc *= nj;
            p.push(acc.clone());
        }
        Ok(ParameterSchedule { m, n, p, regime })
    }

    /// Toy schedule from small integers.
    pub fn toy(m: &[i64], n: &[i64]) -> Self {
        ParameterSchedule::new(
            m.iter().map(|&v| Int::from(v)).collect(),
            n.iter().map(|&v| Int::from(v)).collect(),
            Regime::ToyRelaxed,
        )
        .expect("toy schedule entries must be monotone and positive")
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn len_m(&self) -> usize {
        self.m.len()
    }

    pub fn len_n(&self) -> usize {
        self.n.len()
    }

    pub fn m(&self, j: usize) -> Result<&Int, CoreError> {
        if j == 0 || j > self.m.len() {
            return Err(CoreError::ScheduleTooShort {
                len: self.m.len(),
                want: j,
            });
        }
        Ok(&self.m[j - 1])
    }

    pub fn n(&self, j: usize) -> Result<&Int, CoreError> {
        if j == 0 || j > self.n.len() {
            return Err(CoreError::ScheduleTooShort {
                len: self.n.len(),
                want: j,
            });
        }
        Ok(&self.n[j - 1])
    }

    /// `p_j = n_1 * ... * n_{j-1}` (so `p_1 = 1`); defined for `j <= len_n + 1`.
    pub fn p(&self, j: usize) -> Result<&Int, CoreError> {
        if j == 0 || j > self.p.len() {
            return Err(CoreError::ScheduleTooShort {
                len: self.p.len(),
                want: j,
            });
        }
        Ok(&self.p[j - 1])
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "n": self.n.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "regime": self.regime.as_str(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, CoreError> {
        let parse_list = |key: &str| -> Result<Vec<Int>, CoreError> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| CoreError::Json(format!("expected \"{key}\" array")))?
                .iter()
                .map(|e| {
                    e.as_str()
                        .ok_or_else(|| CoreError::Json("entries must be decimal strings".into()))?
                        .parse::<Int>()
                        .map_err(|_| CoreError::Json("bad integer".into()))
                })
                .collect()
        };
        let regime = match v.get("regime").and_then(Value::as_str) {
            Some("paper-minimal") => Regime::PaperMinimal,
            Some("toy-relaxed") | None => Regime::ToyRelaxed,
            Some(other) => return Err(CoreError::Json(format!("unknown regime {other:?}"))),
        };
        ParameterSchedule::new(parse_list("m")?, parse_list("n")?, regime)
    }
}

/// One audited condition: either it holds at every checked index, or the
/// failures are listed with both sides of the comparison.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub name: &'static str,
    pub holds: bool,
    /// `(j, lhs, rhs)` for each violated instance of `lhs >= rhs` (or `=`).
    pub failures: Vec<(usize, Int, Int)>,
}

impl ConditionReport {
    fn checked(name: &'static str, failures: Vec<(usize, Int, Int)>) -> Self {
        ConditionReport {
            name,
            holds: failures.is_empty(),
            failures,
        }
    }
}

/// Outcome of [`validate_schedule`]: one entry per condition of the
/// schedule definition, plus the two derived growth conditions.
#[derive(Clone, Debug)]
pub struct ScheduleReport {
    pub horizon: usize,
    pub conditions: Vec<ConditionReport>,
}

impl ScheduleReport {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "horizon": self.horizon,
            "all_hold": self.all_hold(),
            "conditions": self.conditions.iter().map(|c| json!({
                "name": c.name,
                "holds": c.holds,
                "failures": c.failures.iter().map(|(j, lhs, rhs)| json!({
                    "j": j, "lhs": lhs.to_string(), "rhs": rhs.to_string(),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Checks every schedule condition up to `horizon` by exact big-integer
/// comparison. Toy schedules report failures without erroring; the only
/// error is a schedule too short to state the conditions.
pub fn validate_schedule(
    s: &ParameterSchedule,
    horizon: usize,
) -> Result<ScheduleReport, CoreError> {
    // The m_{j+2} condition at j = horizon needs m up to horizon + 2.
    s.m(horizon + 2)?;
    s.n(horizon)?;

    let two = Int::from(2);
    let mut conditions = Vec::new();

    // m_1 = m_2 = 2
    let mut fails = Vec::new();
    for j in 1..=2 {
        let mj = s.m(j)?;
        if *mj != two {
            fails.push((j, mj.clone(), two.clone()));
        }
    }
    conditions.push(ConditionReport::checked("m1=m2=2", fails));

    // m_j = m_{j-1}^2 for 3 <= j <= horizon + 2
    let mut fails = Vec::new();
    for j in 3..=horizon + 2 {
        let mj = s.m(j)?;
        let sq = s.m(j - 1)? * s.m(j - 1)?;
        if *mj != sq {
            fails.push((j, mj.clone(), sq));
        }
    }
    conditions.push(ConditionReport::checked("m_j=m_{j-1}^2", fails));

    // n_1 >= 2^3 m_3
    let mut fails = Vec::new();
    let rhs = Int::from(8) * s.m(3)?;
    if *s.n(1)? < rhs {
        fails.push((1, s.n(1)?.clone(), rhs));
    }
    conditions.push(ConditionReport::checked("n1>=2^3*m3", fails));

    // n_j >= (4 n_{j-1})^5 m_j for 2 <= j <= horizon
    let mut fails = Vec::new();
    for j in 2..=horizon {
        let four_prev = Int::from(4) * s.n(j - 1)?;
        let rhs = four_prev.pow(5) * s.m(j)?;
        if *s.n(j)? < rhs {
            fails.push((j, s.n(j)?.clone(), rhs));
        }
    }
    conditions.push(ConditionReport::checked("n_j>=(4n_{j-1})^5*m_j", fails));

    // Derived: n_j >= 2^{j+2} m_{j+2}
    let mut fails = Vec::new();
    for j in 1..=horizon {
        let rhs = (Int::one() << (j + 2)) * s.m(j + 2)?;
        if *s.n(j)? < rhs {
            fails.push((j, s.n(j)?.clone(), rhs));
        }
    }
    conditions.push(ConditionReport::checked("n_j>=2^{j+2}*m_{j+2}", fails));

    // Derived: n_j >= j p_j
    let mut fails = Vec::new();
    for j in 1..=horizon {
        let rhs = Int::from(j as u64) * s.p(j)?;
        if *s.n(j)? < rhs {
            fails.push((j, s.n(j)?.clone(), rhs));
        }
    }
    conditions.push(ConditionReport::checked("n_j>=j*p_j", fails));

    // Monotonicity re-checks (constructor-enforced, recomputed for the report).
    let mut fails = Vec::new();
    for j in 2..=horizon + 2 {
        if s.m(j)? < s.m(j - 1)? {
            fails.push((j, s.m(j)?.clone(), s.m(j - 1)?.clone()));
        }
    }
    conditions.push(ConditionReport::checked("m nondecreasing", fails));

    let mut fails = Vec::new();
    for j in 2..=horizon {
        if s.n(j)? <= s.n(j - 1)? {
            fails.push((j, s.n(j)?.clone(), s.n(j - 1)?.clone()));
        }
    }
    conditions.push(ConditionReport::checked("n strictly increasing", fails));

    Ok(ScheduleReport {
        horizon,
        conditions,
    })
}

/// Largest `J` for which the minimal paper schedule is materialized; the
/// bit size of `n_J` grows like `5^J`, so `J = 8` is already ~600k bits.
pub const PAPER_SCHEDULE_MAX_J: usize = 8;

/// The schedule with every inequality of the definition taken as equality:
/// `m_1 = m_2 = 2`, `m_j = m_{j-1}^2`, `n_1 = 2^3 m_3`,
/// `n_j = (4 n_{j-1})^5 m_j`. All entries exact big integers.
pub fn minimal_paper_schedule(j_max: usize) -> Result<ParameterSchedule, CoreError> {
    if j_max < 3 {
        return Err(CoreError::PaperScheduleTooSmall(j_max));
    }
    if j_max > PAPER_SCHEDULE_MAX_J {
        return Err(CoreError::Budget(format!(
            "n_j for j = {j_max} needs on the order of 5^{j_max} bits; J <= {PAPER_SCHEDULE_MAX_J}"
        )));
    }
    let mut m = vec![Int::from(2), Int::from(2)];
    for j in 3..=j_max {
        let prev = &m[j - 2];
        m.push(prev * prev);
    }
    let mut n = vec![Int::from(8) * &m[2]];
    for j in 2..=j_max {
        let four_prev = Int::from(4) * &n[j - 2];
        n.push(four_prev.pow(5) * &m[j - 1]);
    }
    ParameterSchedule::new(m, n, Regime::PaperMinimal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;
    use proptest::prelude::*;

    #[test]
    fn make_vector_drops_zeros_and_rejects_duplicates() {
        let v = make_vector(vec![(1, rat(1, 1)), (2, rat(0, 1))]).unwrap();
        assert_eq!(v.support().collect::<Vec<_>>(), vec![1]);

        let v = make_vector(vec![(3, rat(-1, 2)), (1, rat(2, 1))]).unwrap();
        assert_eq!(v.support().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(v.coeff(3), rat(-1, 2));

        assert!(matches!(
            make_vector(vec![(1, rat(1, 1)), (1, rat(2, 1))]),
            Err(CoreError::DuplicateIndex(1))
        ));
    }

    #[test]
    fn elementary_norm_values() {
        let v = make_vector(vec![(1, rat(1, 1)), (2, rat(1, 1))]).unwrap();
        assert_eq!(v.elementary_norms(), (rat(2, 1), rat(1, 1)));

        assert_eq!(
            RationalVector::zero().elementary_norms(),
            (rat(0, 1), rat(0, 1))
        );

        let v = make_vector(vec![(1, rat(2, 1)), (3, rat(-1, 2))]).unwrap();
        assert_eq!(v.elementary_norms(), (rat(5, 2), rat(2, 1)));
    }

    #[test]
    fn paper_schedule_small_values() {
        let s = minimal_paper_schedule(4).unwrap();
        assert_eq!(*s.m(1).unwrap(), Int::from(2));
        assert_eq!(*s.m(3).unwrap(), Int::from(4));
        assert_eq!(*s.m(4).unwrap(), Int::from(16));
        // n_1 = 2^3 * m_3 = 32, n_2 = (4*32)^5 * m_2 = 2^36.
        assert_eq!(*s.n(1).unwrap(), Int::from(32));
        assert_eq!(*s.n(2).unwrap(), Int::from(1u64 << 36));
        // p_3 = n_1 * n_2.
        assert_eq!(*s.p(3).unwrap(), s.n(1).unwrap() * s.n(2).unwrap());
        // p_2 = n_1 and p_1 = empty product.
        assert_eq!(*s.p(1).unwrap(), Int::one());
        assert_eq!(*s.p(2).unwrap(), *s.n(1).unwrap());
    }

    #[test]
    fn paper_schedule_rejects_small_and_huge_j() {
        assert!(matches!(
            minimal_paper_schedule(2),
            Err(CoreError::PaperScheduleTooSmall(2))
        ));
        assert!(matches!(
            minimal_paper_schedule(PAPER_SCHEDULE_MAX_J + 1),
            Err(CoreError::Budget(_))
        ));
        // J = 7 must succeed.
        assert!(minimal_paper_schedule(7).is_ok());
    }

    #[test]
    fn paper_schedule_validates_clean() {
        let s = minimal_paper_schedule(7).unwrap();
        let report = validate_schedule(&s, 5).unwrap();
        assert!(report.all_hold(), "{report:?}");
    }

    #[test]
    fn derived_conditions_hold_through_j6() {
        let s = minimal_paper_schedule(8).unwrap();
        for j in 3..=6 {
            let lhs = s.n(j).unwrap();
            assert!(*lhs >= Int::from(j as u64) * s.p(j).unwrap());
            assert!(*lhs >= (Int::one() << (j + 2)) * s.m(j + 2).unwrap());
        }
    }

    #[test]
    fn toy_schedule_reports_growth_failures() {
        let s = ParameterSchedule::toy(&[2, 2, 4, 16], &[3, 4, 6, 8]);
        let report = validate_schedule(&s, 2).unwrap();
        assert!(!report.all_hold());
        assert!(!report.condition("n1>=2^3*m3").unwrap().holds); // 3 < 32
        assert!(report.condition("m1=m2=2").unwrap().holds);
        assert!(report.condition("m nondecreasing").unwrap().holds);
        assert!(report.condition("n strictly increasing").unwrap().holds);
    }

    #[test]
    fn bad_m_start_is_flagged() {
        let s = ParameterSchedule::toy(&[2, 3, 9, 81, 6561, 43046721], &[3, 4, 6, 8]);
        let report = validate_schedule(&s, 2).unwrap();
        assert!(!report.condition("m1=m2=2").unwrap().holds);
    }

    #[test]
    fn schedule_json_round_trip() {
        let s = minimal_paper_schedule(5).unwrap();
        let v = s.to_json();
        let back = ParameterSchedule::from_json(&v).unwrap();
        assert_eq!(s, back);

        let x = make_vector(vec![(1, rat(1, 1)), (4, rat(-3, 7))]).unwrap();
        let back = RationalVector::from_json(&x.to_json()).unwrap();
        assert_eq!(x, back);
    }

    proptest! {
        #[test]
        fn p_is_multiplicative(n in proptest::collection::vec(1i64..50, 1..8)) {
            // Force strict increase.
            let mut acc = 0i64;
            let n: Vec<i64> = n.into_iter().map(|d| { acc += d; acc }).collect();
            let m: Vec<i64> = std::iter::repeat(2).take(n.len() + 2).collect();
            let s = ParameterSchedule::toy(&m, &n);
            for j in 1..=n.len() {
                prop_assert_eq!(
                    s.p(j + 1).unwrap().clone(),
                    s.p(j).unwrap() * s.n(j).unwrap()
                );
            }
        }

        #[test]
        fn elementary_norms_homogeneous(
            entries in proptest::collection::vec((1u64..30, -20i64..20, 1i64..9), 0..8),
            cn in -12i64..12, cd in 1i64..7,
        ) {
            let mut seen = std::collections::HashSet::new();
            let entries: Vec<(u64, Rational)> = entries
                .into_iter()
                .filter(|(k, _, _)| seen.insert(*k))
                .map(|(k, n, d)| (k, rat(n, d)))
                .collect();
            let x = make_vector(entries).unwrap();
            let c = rat(cn, cd);
            let (l1, sup) = x.elementary_norms();
            let (l1c, supc) = x.scale(&c).elementary_norms();
            prop_assert_eq!(l1c, l1 * c.abs());
            prop_assert_eq!(supc, sup * c.abs());
        }
    }
}
