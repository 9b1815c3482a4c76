//! Functionals given by tree analyses over a declared norming-set family.
//!
//! A [`FamilySpec`] names a ground set (unit leaves `±e_k*` or interval
//! leaves `±chi_I`) and a finite list of operations, each identified by an
//! [`OpTag`] `(j, kind)` that resolves to a size bound and a weight. A
//! [`FunctionalTree`] is a concrete tree analysis; [`check_membership`]
//! re-verifies every node against the family (size bounds, successive or
//! disjoint children, factor correctness), and evaluation, interval
//! restriction and spreading are exact.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::core::{CoreError, Interval, ParameterSchedule, RationalVector};
use crate::{Int, Rational};

#[derive(Debug, Error)]
pub enum NormsetError {
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("unknown operation tag {0} in this family")]
    UnknownTag(OpTag),
    #[error("spread map must be defined and strictly increasing on the support (index {0})")]
    BadSpreadMap(u64),
    #[error("spread is defined for unit-leaf trees only")]
    SpreadOnChiLeaf,
    #[error("malformed tree JSON: {0}")]
    Json(String),
    #[error("special-kind node at {path}: {reason}")]
    SpecialValidation { path: String, reason: String },
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum OpKind {
    /// Successive children, no side conditions.
    Plain,
    /// Successive children forming a coded special sequence (the auxiliary
    /// families use the same shape with the coding requirement dropped).
    Special,
    /// Children need only pairwise disjoint supports.
    Modified,
}

impl OpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::Plain => "plain",
            OpKind::Special => "special",
            OpKind::Modified => "modified",
        }
    }

    pub fn from_str(s: &str) -> Option<OpKind> {
        match s {
            "plain" => Some(OpKind::Plain),
            "special" => Some(OpKind::Special),
            "modified" => Some(OpKind::Modified),
            _ => None,
        }
    }
}

/// Identifies an operation of a family; what `(j, kind)` means (size bound,
/// weight) is the family's business.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct OpTag {
    pub j: usize,
    pub kind: OpKind,
}

impl OpTag {
    pub fn plain(j: usize) -> Self {
        OpTag {
            j,
            kind: OpKind::Plain,
        }
    }

    pub fn special(j: usize) -> Self {
        OpTag {
            j,
            kind: OpKind::Special,
        }
    }

    pub fn modified(j: usize) -> Self {
        OpTag {
            j,
            kind: OpKind::Modified,
        }
    }
}

impl fmt::Display for OpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.j, self.kind.as_str())
    }
}

/// One operation of a family: trees tagged `tag` may combine up to `size`
/// children under the factor `1/weight`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OpRule {
    pub tag: OpTag,
    pub size: Int,
    pub weight: Int,
    /// Special-kind rules with this flag demand an external special-sequence
    /// validator at membership-checking time; the auxiliary families keep the
    /// special shape but drop the coding requirement.
    pub needs_coding: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GroundSet {
    UnitLeaves,
    IntervalLeaves,
}

/// A declared norming-set family: ground set, operations, schedule.
#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub ground: GroundSet,
    ops: BTreeMap<OpTag, OpRule>,
    schedule: ParameterSchedule,
    pub name: String,
}

impl FamilySpec {
    pub fn new(
        name: impl Into<String>,
        ground: GroundSet,
        rules: Vec<OpRule>,
        schedule: ParameterSchedule,
    ) -> Self {
        let ops = rules.into_iter().map(|r| (r.tag, r)).collect();
        FamilySpec {
            ground,
            ops,
            schedule,
            name: name.into(),
        }
    }

    /// `K[(m_j, n_j)]` over unit leaves, operations `j = 1..=j_max`.
    pub fn standard(schedule: &ParameterSchedule, j_max: usize) -> Result<Self, NormsetError> {
        let mut rules = Vec::new();
        for j in 1..=j_max {
            rules.push(OpRule {
                tag: OpTag::plain(j),
                size: schedule.n(j)?.clone(),
                weight: schedule.m(j)?.clone(),
                needs_coding: false,
            });
        }
        Ok(FamilySpec::new(
            format!("T[(A_n_j,1/m_j) j<={j_max}]"),
            GroundSet::UnitLeaves,
            rules,
            schedule.clone(),
        ))
    }

    /// `T[(A_{n_{j+1}}, 1/m_j)]`: the shifted family whose dual carries the
    /// catalogued sparsity profile `(n_j)^2`.
    pub fn shifted(schedule: &ParameterSchedule, j_max: usize) -> Result<Self, NormsetError> {
        let mut rules = Vec::new();
        for j in 1..=j_max {
            rules.push(OpRule {
                tag: OpTag::plain(j),
                size: schedule.n(j + 1)?.clone(),
                weight: schedule.m(j)?.clone(),
                needs_coding: false,
            });
        }
        Ok(FamilySpec::new(
            format!("T[(A_n_{{j+1}},1/m_j) j<={j_max}]"),
            GroundSet::UnitLeaves,
            rules,
            schedule.clone(),
        ))
    }

    /// Modified family: same parameters as [`standard`](Self::standard) but
    /// children need only pairwise disjoint supports.
    pub fn modified(schedule: &ParameterSchedule, j_max: usize) -> Result<Self, NormsetError> {
        let mut rules = Vec::new();
        for j in 1..=j_max {
            rules.push(OpRule {
                tag: OpTag::modified(j),
                size: schedule.n(j)?.clone(),
                weight: schedule.m(j)?.clone(),
                needs_coding: false,
            });
        }
        Ok(FamilySpec::new(
            format!("T_M[(A_n_j,1/m_j) j<={j_max}]"),
            GroundSet::UnitLeaves,
            rules,
            schedule.clone(),
        ))
    }

    /// The auxiliary family `W'`: `(A_{4n_i}, 1/m_i)` for all `i <= j_max`
    /// plus the relaxed special shape `(A_{4n_{2j+1}}, 1/m_{2j})` for all
    /// `2j + 1 <= j_max`.
    pub fn auxiliary_w_prime(
        schedule: &ParameterSchedule,
        j_max: usize,
    ) -> Result<Self, NormsetError> {
        Self::auxiliary_w_prime_excluding(schedule, j_max, None)
    }

    /// `W'_{j0}`: as `W'` with the special-shape operation at `j = j0` removed.
    pub fn auxiliary_w_prime_excluding(
        schedule: &ParameterSchedule,
        j_max: usize,
        excluded_j0: Option<usize>,
    ) -> Result<Self, NormsetError> {
        let mut rules = Vec::new();
        for i in 1..=j_max {
            rules.push(OpRule {
                tag: OpTag::plain(i),
                size: Int::from(4) * schedule.n(i)?,
                weight: schedule.m(i)?.clone(),
                needs_coding: false,
            });
        }
        for j in 1.. {
            if 2 * j + 1 > j_max {
                break;
            }
            if excluded_j0 == Some(j) {
                continue;
            }
            rules.push(OpRule {
                tag: OpTag::special(j),
                size: Int::from(4) * schedule.n(2 * j + 1)?,
                weight: schedule.m(2 * j)?.clone(),
                needs_coding: false,
            });
        }
        let name = match excluded_j0 {
            Some(j0) => format!("W'_{{{j0}}} j<={j_max}"),
            None => format!("W' j<={j_max}"),
        };
        Ok(FamilySpec::new(
            name,
            GroundSet::UnitLeaves,
            rules,
            schedule.clone(),
        ))
    }

    /// The coded family shape: plain `(A_{n_j}, 1/m_j)` plus special
    /// `(A_{n_{2j+1}}, 1/m_{2j})` whose nodes demand special-sequence
    /// verification.
    pub fn coded(schedule: &ParameterSchedule, j_max: usize) -> Result<Self, NormsetError> {
        let mut rules = Vec::new();
        for j in 1..=j_max {
            rules.push(OpRule {
                tag: OpTag::plain(j),
                size: schedule.n(j)?.clone(),
                weight: schedule.m(j)?.clone(),
                needs_coding: false,
            });
        }
        for j in 1.. {
            if 2 * j + 1 > j_max {
                break;
            }
            rules.push(OpRule {
                tag: OpTag::special(j),
                size: schedule.n(2 * j + 1)?.clone(),
                weight: schedule.m(2 * j)?.clone(),
                needs_coding: true,
            });
        }
        Ok(FamilySpec::new(
            format!("K_d-like j<={j_max}"),
            GroundSet::UnitLeaves,
            rules,
            schedule.clone(),
        ))
    }

    /// The Jamesification ground family: interval leaves, plain operations.
    pub fn interval_ground(schedule: &ParameterSchedule, j_max: usize) -> Result<Self, NormsetError> {
        let mut rules = Vec::new();
        for j in 1..=j_max {
            rules.push(OpRule {
                tag: OpTag::plain(j),
                size: schedule.n(j)?.clone(),
                weight: schedule.m(j)?.clone(),
                needs_coding: false,
            });
        }
        Ok(FamilySpec::new(
            format!("J-T0 D0 j<={j_max}"),
            GroundSet::IntervalLeaves,
            rules,
            schedule.clone(),
        ))
    }

    pub fn schedule(&self) -> &ParameterSchedule {
        &self.schedule
    }

    pub fn rule(&self, tag: &OpTag) -> Option<&OpRule> {
        self.ops.get(tag)
    }

    pub fn rules(&self) -> impl Iterator<Item = &OpRule> {
        self.ops.values()
    }

    pub fn has_special_ops(&self) -> bool {
        self.ops.keys().any(|t| t.kind == OpKind::Special)
    }

    pub fn has_modified_ops(&self) -> bool {
        self.ops.keys().any(|t| t.kind == OpKind::Modified)
    }

    pub fn plain_only(&self) -> bool {
        self.ops.keys().all(|t| t.kind == OpKind::Plain)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "ground": match self.ground {
                GroundSet::UnitLeaves => "unit",
                GroundSet::IntervalLeaves => "interval",
            },
            "schedule": self.schedule.to_json(),
            "ops": self.ops.values().map(|r| json!({
                "j": r.tag.j,
                "kind": r.tag.kind.as_str(),
                "size": r.size.to_string(),
                "weight": r.weight.to_string(),
                "needs_coding": r.needs_coding,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, NormsetError> {
        let ground = match v.get("ground").and_then(Value::as_str) {
            Some("unit") | None => GroundSet::UnitLeaves,
            Some("interval") => GroundSet::IntervalLeaves,
            Some(other) => return Err(NormsetError::Json(format!("unknown ground {other:?}"))),
        };
        let schedule = ParameterSchedule::from_json(
            v.get("schedule")
                .ok_or_else(|| NormsetError::Json("missing schedule".into()))?,
        )?;
        let mut rules = Vec::new();
        for op in v
            .get("ops")
            .and_then(Value::as_array)
            .ok_or_else(|| NormsetError::Json("missing ops".into()))?
        {
            let j = op
                .get("j")
                .and_then(Value::as_u64)
                .ok_or_else(|| NormsetError::Json("op needs j".into()))? as usize;
            let kind = op
                .get("kind")
                .and_then(Value::as_str)
                .and_then(OpKind::from_str)
                .ok_or_else(|| NormsetError::Json("op needs kind".into()))?;
            let parse_int = |key: &str| -> Result<Int, NormsetError> {
                op.get(key)
                    .and_then(Value::as_str)
                    .ok_or_else(|| NormsetError::Json(format!("op needs {key}")))?
                    .parse()
                    .map_err(|_| NormsetError::Json(format!("bad {key}")))
            };
            rules.push(OpRule {
                tag: OpTag { j, kind },
                size: parse_int("size")?,
                weight: parse_int("weight")?,
                needs_coding: op
                    .get("needs_coding")
                    .and_then(Value::as_bool)
                    .unwrap_or(false),
            });
        }
        let name = v
            .get("name")
            .and_then(Value::as_str)
            .unwrap_or("family")
            .to_string();
        Ok(FamilySpec::new(name, ground, rules, schedule))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(q: &Rational) -> Sign {
        if q.is_negative() {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn as_i8(&self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn flip(&self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn apply(&self, q: Rational) -> Rational {
        match self {
            Sign::Plus => q,
            Sign::Minus => -q,
        }
    }
}

/// Tree analysis of a norming-set functional. Internal nodes carry the
/// declared operation tag together with the resolved weight; the weight is
/// attached to the tree, never recomputed from the functional's values.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum FunctionalTree {
    UnitLeaf {
        sign: Sign,
        index: u64,
    },
    ChiLeaf {
        sign: Sign,
        interval: Interval,
    },
    Internal {
        tag: OpTag,
        weight: Int,
        children: Vec<FunctionalTree>,
    },
}

/// A functional is either a tree or the explicit zero marker.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Functional {
    Zero,
    Tree(FunctionalTree),
}

impl Functional {
    pub fn evaluate(&self, x: &RationalVector) -> Rational {
        match self {
            Functional::Zero => Rational::zero(),
            Functional::Tree(t) => t.evaluate(x),
        }
    }

    pub fn tree(&self) -> Option<&FunctionalTree> {
        match self {
            Functional::Zero => None,
            Functional::Tree(t) => Some(t),
        }
    }
}

impl FunctionalTree {
    pub fn unit(sign: Sign, index: u64) -> Self {
        FunctionalTree::UnitLeaf { sign, index }
    }

    pub fn chi(sign: Sign, interval: Interval) -> Self {
        FunctionalTree::ChiLeaf { sign, interval }
    }

    /// Internal node; the weight is resolved from the family's rule for `tag`.
    pub fn internal(
        tag: OpTag,
        children: Vec<FunctionalTree>,
        fam: &FamilySpec,
    ) -> Result<Self, NormsetError> {
        let rule = fam.rule(&tag).ok_or(NormsetError::UnknownTag(tag))?;
        Ok(FunctionalTree::Internal {
            tag,
            weight: rule.weight.clone(),
            children,
        })
    }

    /// Internal node with an explicitly supplied weight.
    pub fn internal_raw(tag: OpTag, weight: Int, children: Vec<FunctionalTree>) -> Self {
        FunctionalTree::Internal {
            tag,
            weight,
            children,
        }
    }

    /// Smallest interval containing the support. Trees always have nonempty
    /// support (the zero functional is a separate marker).
    pub fn range(&self) -> Interval {
        match self {
            FunctionalTree::UnitLeaf { index, .. } => Interval::new(*index, *index).unwrap(),
            FunctionalTree::ChiLeaf { interval, .. } => *interval,
            FunctionalTree::Internal { children, .. } => {
                let lo = children.iter().map(|c| c.range().lo()).min().unwrap();
                let hi = children.iter().map(|c| c.range().hi()).max().unwrap();
                Interval::new(lo, hi).unwrap()
            }
        }
    }

    /// Leaf order 1, internal `1 + max` child order.
    pub fn order(&self) -> u32 {
        match self {
            FunctionalTree::UnitLeaf { .. } | FunctionalTree::ChiLeaf { .. } => 1,
            FunctionalTree::Internal { children, .. } => {
                1 + children.iter().map(|c| c.order()).max().unwrap_or(0)
            }
        }
    }

    /// The weight of the top operation, `None` for leaves.
    pub fn top_weight(&self) -> Option<&Int> {
        match self {
            FunctionalTree::Internal { weight, .. } => Some(weight),
            _ => None,
        }
    }

    pub fn top_tag(&self) -> Option<OpTag> {
        match self {
            FunctionalTree::Internal { tag, .. } => Some(*tag),
            _ => None,
        }
    }

    pub fn children(&self) -> &[FunctionalTree] {
        match self {
            FunctionalTree::Internal { children, .. } => children,
            _ => &[],
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            FunctionalTree::Internal { children, .. } => {
                1 + children.iter().map(|c| c.node_count()).sum::<usize>()
            }
            _ => 1,
        }
    }

    /// The coefficient of the induced functional at index `k`.
    pub fn coefficient(&self, k: u64) -> Rational {
        self.evaluate(&RationalVector::unit(k))
    }

    /// The functional as a coefficient vector (its action on each unit
    /// vector); exact, support-finite.
    pub fn as_vector(&self) -> RationalVector {
        let mut acc: BTreeMap<u64, Rational> = BTreeMap::new();
        self.collect_coeffs(&Rational::one(), &mut acc);
        let entries = acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        RationalVector::make(entries).expect("tree coefficients have distinct indices")
    }

    fn collect_coeffs(&self, factor: &Rational, acc: &mut BTreeMap<u64, Rational>) {
        match self {
            FunctionalTree::UnitLeaf { sign, index } => {
                let entry = acc.entry(*index).or_insert_with(Rational::zero);
                *entry += sign.apply(factor.clone());
            }
            FunctionalTree::ChiLeaf { sign, interval } => {
                for k in interval.lo()..=interval.hi() {
                    let entry = acc.entry(k).or_insert_with(Rational::zero);
                    *entry += sign.apply(factor.clone());
                }
            }
            FunctionalTree::Internal {
                weight, children, ..
            } => {
                let f = factor / Rational::from(weight.clone());
                for c in children {
                    c.collect_coeffs(&f, acc);
                }
            }
        }
    }

    /// Exact action `f(x)`.
    pub fn evaluate(&self, x: &RationalVector) -> Rational {
        match self {
            FunctionalTree::UnitLeaf { sign, index } => sign.apply(x.coeff(*index)),
            FunctionalTree::ChiLeaf { sign, interval } => sign.apply(x.interval_sum(interval)),
            FunctionalTree::Internal {
                weight, children, ..
            } => {
                let sum = children
                    .iter()
                    .fold(Rational::zero(), |acc, c| acc + c.evaluate(x));
                sum / Rational::from(weight.clone())
            }
        }
    }

    /// Restriction `Ef` to an interval; children that vanish are dropped and
    /// an entirely vanished tree collapses to the zero marker.
    pub fn restrict(&self, e: &Interval) -> Functional {
        match self {
            FunctionalTree::UnitLeaf { index, .. } => {
                if e.contains(*index) {
                    Functional::Tree(self.clone())
                } else {
                    Functional::Zero
                }
            }
            FunctionalTree::ChiLeaf { sign, interval } => match interval.intersect(e) {
                Some(cut) => Functional::Tree(FunctionalTree::chi(*sign, cut)),
                None => Functional::Zero,
            },
            FunctionalTree::Internal {
                tag,
                weight,
                children,
            } => {
                let kept: Vec<FunctionalTree> = children
                    .iter()
                    .filter_map(|c| match c.restrict(e) {
                        Functional::Zero => None,
                        Functional::Tree(t) => Some(t),
                    })
                    .collect();
                if kept.is_empty() {
                    Functional::Zero
                } else {
                    Functional::Tree(FunctionalTree::Internal {
                        tag: *tag,
                        weight: weight.clone(),
                        children: kept,
                    })
                }
            }
        }
    }

    /// Re-indexes unit leaves through a strictly increasing map; membership
    /// is preserved because successive stays successive.
    pub fn spread(&self, map: &BTreeMap<u64, u64>) -> Result<FunctionalTree, NormsetError> {
        let mut support = Vec::new();
        self.unit_support(&mut support)?;
        support.sort_unstable();
        support.dedup();
        let mut prev: Option<u64> = None;
        for k in &support {
            let image = *map.get(k).ok_or(NormsetError::BadSpreadMap(*k))?;
            if let Some(p) = prev {
                if image <= p {
                    return Err(NormsetError::BadSpreadMap(*k));
                }
            }
            prev = Some(image);
        }
        Ok(self.spread_unchecked(map))
    }

    fn unit_support(&self, acc: &mut Vec<u64>) -> Result<(), NormsetError> {
        match self {
            FunctionalTree::UnitLeaf { index, .. } => {
                acc.push(*index);
                Ok(())
            }
            FunctionalTree::ChiLeaf { .. } => Err(NormsetError::SpreadOnChiLeaf),
            FunctionalTree::Internal { children, .. } => {
                children.iter().try_for_each(|c| c.unit_support(acc))
            }
        }
    }

    fn spread_unchecked(&self, map: &BTreeMap<u64, u64>) -> FunctionalTree {
        match self {
            FunctionalTree::UnitLeaf { sign, index } => FunctionalTree::UnitLeaf {
                sign: *sign,
                index: map[index],
            },
            FunctionalTree::ChiLeaf { .. } => unreachable!("checked by unit_support"),
            FunctionalTree::Internal {
                tag,
                weight,
                children,
            } => FunctionalTree::Internal {
                tag: *tag,
                weight: weight.clone(),
                children: children.iter().map(|c| c.spread_unchecked(map)).collect(),
            },
        }
    }

    /// Flips every leaf sign (`f -> -f`; families are symmetric).
    pub fn negate(&self) -> FunctionalTree {
        match self {
            FunctionalTree::UnitLeaf { sign, index } => FunctionalTree::UnitLeaf {
                sign: sign.flip(),
                index: *index,
            },
            FunctionalTree::ChiLeaf { sign, interval } => FunctionalTree::ChiLeaf {
                sign: sign.flip(),
                interval: *interval,
            },
            FunctionalTree::Internal {
                tag,
                weight,
                children,
            } => FunctionalTree::Internal {
                tag: *tag,
                weight: weight.clone(),
                children: children.iter().map(|c| c.negate()).collect(),
            },
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            FunctionalTree::UnitLeaf { sign, index } => {
                json!({"leaf": {"sign": sign.as_i8(), "index": index}})
            }
            FunctionalTree::ChiLeaf { sign, interval } => json!({
                "chi": {"sign": sign.as_i8(), "lo": interval.lo(), "hi": interval.hi()}
            }),
            FunctionalTree::Internal { tag, children, .. } => json!({
                "op": {"j": tag.j, "kind": tag.kind.as_str()},
                "children": children.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            }),
        }
    }

    /// Parses the tree JSON; the family resolves op tags to weights.
    pub fn from_json(v: &Value, fam: &FamilySpec) -> Result<Self, NormsetError> {
        if let Some(leaf) = v.get("leaf") {
            let sign = leaf
                .get("sign")
                .and_then(Value::as_i64)
                .and_then(Sign::from_i64)
                .ok_or_else(|| NormsetError::Json("leaf sign must be 1 or -1".into()))?;
            let index = leaf
                .get("index")
                .and_then(Value::as_u64)
                .ok_or_else(|| NormsetError::Json("leaf needs index".into()))?;
            return Ok(FunctionalTree::unit(sign, index));
        }
        if let Some(chi) = v.get("chi") {
            let sign = chi
                .get("sign")
                .and_then(Value::as_i64)
                .and_then(Sign::from_i64)
                .ok_or_else(|| NormsetError::Json("chi sign must be 1 or -1".into()))?;
            let lo = chi
                .get("lo")
                .and_then(Value::as_u64)
                .ok_or_else(|| NormsetError::Json("chi needs lo".into()))?;
            let hi = chi
                .get("hi")
                .and_then(Value::as_u64)
                .ok_or_else(|| NormsetError::Json("chi needs hi".into()))?;
            return Ok(FunctionalTree::chi(
                sign,
                Interval::new(lo, hi).map_err(CoreError::from)?,
            ));
        }
        if let Some(op) = v.get("op") {
            let j = op
                .get("j")
                .and_then(Value::as_u64)
                .ok_or_else(|| NormsetError::Json("op needs j".into()))? as usize;
            let kind = op
                .get("kind")
                .and_then(Value::as_str)
                .and_then(OpKind::from_str)
                .ok_or_else(|| NormsetError::Json("op needs kind".into()))?;
            let children = v
                .get("children")
                .and_then(Value::as_array)
                .ok_or_else(|| NormsetError::Json("op needs children".into()))?
                .iter()
                .map(|c| FunctionalTree::from_json(c, fam))
                .collect::<Result<Vec<_>, _>>()?;
            return FunctionalTree::internal(OpTag { j, kind }, children, fam);
        }
        Err(NormsetError::Json(
            "node must be one of leaf / chi / op".into(),
        ))
    }
}

/// Supplied by the constructions layer: verifies that the children of a
/// coded special node really form a special sequence for the registry the
/// caller has in scope.
pub trait SpecialSequenceValidator {
    fn validate(&self, children: &[FunctionalTree], j: usize) -> Result<(), String>;
}

#[derive(Clone, Debug)]
pub struct MembershipReport {
    pub ok: bool,
    /// Node path (child indices from the root) and rule name per violation.
    pub violations: Vec<(String, String)>,
    pub weight: Option<Int>,
    pub order: Option<u32>,
}

impl MembershipReport {
    pub fn to_json(&self) -> Value {
        json!({
            "ok": self.ok,
            "violations": self.violations.iter().map(|(p, r)| json!({
                "path": p, "rule": r,
            })).collect::<Vec<_>>(),
            "weight": self.weight.as_ref().map(|w| w.to_string()),
            "order": self.order,
        })
    }
}

/// Verifies every node of `t` against `fam`: known tags, stored factor
/// equal to the family's, child counts within the size bound, successive
/// ranges (or pairwise disjoint supports for modified-kind nodes), leaves
/// drawn from the declared ground set. Special-kind nodes that demand
/// coding are run through `validator` when supplied and flagged otherwise.
pub fn check_membership(
    t: &FunctionalTree,
    fam: &FamilySpec,
    validator: Option<&dyn SpecialSequenceValidator>,
) -> MembershipReport {
    let mut violations = Vec::new();
    walk(t, fam, validator, &mut String::from("root"), &mut violations);
    let ok = violations.is_empty();
    MembershipReport {
        ok,
        violations,
        weight: if ok { t.top_weight().cloned() } else { None },
        order: if ok { Some(t.order()) } else { None },
    }
}

fn walk(
    t: &FunctionalTree,
    fam: &FamilySpec,
    validator: Option<&dyn SpecialSequenceValidator>,
    path: &mut String,
    violations: &mut Vec<(String, String)>,
) {
    match t {
        FunctionalTree::UnitLeaf { .. } => {}
        FunctionalTree::ChiLeaf { .. } => {
            if fam.ground == GroundSet::UnitLeaves {
                violations.push((
                    path.clone(),
                    "interval leaf in a unit-leaf ground set".into(),
                ));
            }
        }
        FunctionalTree::Internal {
            tag,
            weight,
            children,
        } => {
            let rule = match fam.rule(tag) {
                Some(r) => r,
                None => {
                    violations.push((path.clone(), format!("unknown operation tag {tag}")));
                    return;
                }
            };
            if *weight != rule.weight {
                violations.push((
                    path.clone(),
                    format!(
                        "stored factor 1/{weight} differs from the family's 1/{}",
                        rule.weight
                    ),
                ));
            }
            if children.is_empty() {
                violations.push((path.clone(), "operation node with no children".into()));
                return;
            }
            if Int::from(children.len()) > rule.size {
                violations.push((
                    path.clone(),
                    format!("child count {} exceeds size bound {}", children.len(), rule.size),
                ));
            }
            match tag.kind {
                OpKind::Plain | OpKind::Special => {
                    for w in children.windows(2) {
                        if !w[0].range().before(&w[1].range()) {
                            violations.push((
                                path.clone(),
                                format!(
                                    "children not successive: {} !< {}",
                                    w[0].range(),
                                    w[1].range()
                                ),
                            ));
                            break;
                        }
                    }
                }
                OpKind::Modified => {
                    // Pairwise disjoint supports; supports are small at the
                    // scales the modified engine admits.
                    let supports: Vec<Vec<u64>> = children
                        .iter()
                        .map(|c| c.as_vector().support().collect())
                        .collect();
                    'outer: for a in 0..supports.len() {
                        for b in a + 1..supports.len() {
                            if supports[a].iter().any(|k| supports[b].contains(k)) {
                                violations.push((
                                    path.clone(),
                                    format!("children {a} and {b} have overlapping supports"),
                                ));
                                break 'outer;
                            }
                        }
                    }
                }
            }
            if rule.needs_coding {
                match validator {
                    Some(v) => {
                        if let Err(reason) = v.validate(children, tag.j) {
                            violations.push((
                                path.clone(),
                                format!("special-sequence validation failed: {reason}"),
                            ));
                        }
                    }
                    None => violations.push((
                        path.clone(),
                        "special-kind node requires a coding validator".into(),
                    )),
                }
            }
            let base = path.len();
            for (i, c) in children.iter().enumerate() {
                path.push_str(&format!(".{i}"));
                walk(c, fam, validator, path, violations);
                path.truncate(base);
            }
        }
    }
}

/// Spreads a vector through a strictly increasing index map (test helper for
/// the subsymmetry properties).
pub fn spread_vector(x: &RationalVector, map: &BTreeMap<u64, u64>) -> Option<RationalVector> {
    let mut entries = Vec::new();
    let mut prev: Option<u64> = None;
    for (k, v) in x.iter() {
        let image = *map.get(&k)?;
        if let Some(p) = prev {
            if image <= p {
                return None;
            }
        }
        prev = Some(image);
        entries.push((image, v.clone()));
    }
    RationalVector::make(entries).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_vector;
    use crate::{rat, rat_zero};
    use proptest::prelude::*;

    fn toy_fam() -> FamilySpec {
        // K[(2,2),(4,4)]: m = (2,4), n = (2,4).
        let s = ParameterSchedule::toy(&[2, 4], &[2, 4]);
        FamilySpec::standard(&s, 2).unwrap()
    }

    fn half_sum(fam: &FamilySpec, indices: &[u64]) -> FunctionalTree {
        FunctionalTree::internal(
            OpTag::plain(1),
            indices
                .iter()
                .map(|&k| FunctionalTree::unit(Sign::Plus, k))
                .collect(),
            fam,
        )
        .unwrap()
    }

    #[test]
    fn membership_accepts_admissible_tree() {
        let fam = toy_fam();
        let t = half_sum(&fam, &[1, 2]);
        let report = check_membership(&t, &fam, None);
        assert!(report.ok, "{:?}", report.violations);
        assert_eq!(report.weight, Some(Int::from(2)));
        assert_eq!(report.order, Some(2));
    }

    #[test]
    fn membership_rejects_oversized_node() {
        let fam = toy_fam();
        let t = half_sum(&fam, &[1, 2, 3]);
        let report = check_membership(&t, &fam, None);
        assert!(!report.ok);
        assert!(report.violations[0].1.contains("child count 3"));
    }

    #[test]
    fn membership_rejects_non_successive_children() {
        let fam = toy_fam();
        let inner_a = half_sum(&fam, &[1, 3]);
        let inner_b = half_sum(&fam, &[2, 4]);
        let t = FunctionalTree::internal(OpTag::plain(2), vec![inner_a, inner_b], &fam).unwrap();
        let report = check_membership(&t, &fam, None);
        assert!(!report.ok);
        assert!(report.violations[0].1.contains("not successive"));
    }

    #[test]
    fn evaluation_examples() {
        let fam = toy_fam();
        let t = half_sum(&fam, &[1, 2]);
        let x = make_vector(vec![(1, rat(1, 1)), (2, rat(1, 1))]).unwrap();
        assert_eq!(t.evaluate(&x), rat(1, 1));

        let quarter = FunctionalTree::internal(
            OpTag::plain(2),
            (1..=4).map(|k| FunctionalTree::unit(Sign::Plus, k)).collect(),
            &fam,
        )
        .unwrap();
        let x = make_vector((1..=4).map(|k| (k, rat(1, 1))).collect()).unwrap();
        assert_eq!(quarter.evaluate(&x), rat(1, 1));

        let chi = FunctionalTree::chi(Sign::Plus, Interval::new(1, 3).unwrap());
        let x = make_vector(vec![(1, rat(1, 1)), (2, rat(-1, 1)), (3, rat(1, 1))]).unwrap();
        assert_eq!(chi.evaluate(&x), rat(1, 1));
    }

    #[test]
    fn restriction_examples() {
        let fam = toy_fam();
        let t = half_sum(&fam, &[1, 2]);
        let e = Interval::new(2, 5).unwrap();
        match t.restrict(&e) {
            Functional::Tree(r) => {
                assert_eq!(r.children().len(), 1);
                assert_eq!(r.coefficient(2), rat(1, 2));
            }
            Functional::Zero => panic!("nonzero restriction expected"),
        }

        let chi = FunctionalTree::chi(Sign::Plus, Interval::new(1, 4).unwrap());
        match chi.restrict(&Interval::new(3, 9).unwrap()) {
            Functional::Tree(FunctionalTree::ChiLeaf { interval, .. }) => {
                assert_eq!((interval.lo(), interval.hi()), (3, 4));
            }
            other => panic!("expected chi leaf, got {other:?}"),
        }

        assert_eq!(
            t.restrict(&Interval::new(7, 9).unwrap()),
            Functional::Zero
        );
    }

    #[test]
    fn spread_examples() {
        let fam = toy_fam();
        let t = half_sum(&fam, &[1, 2]);
        let map: BTreeMap<u64, u64> = [(1, 5), (2, 9)].into_iter().collect();
        let spread = t.spread(&map).unwrap();
        assert_eq!(spread.coefficient(5), rat(1, 2));
        assert_eq!(spread.coefficient(9), rat(1, 2));
        assert!(check_membership(&spread, &fam, None).ok);

        let identity: BTreeMap<u64, u64> = [(1, 1), (2, 2)].into_iter().collect();
        assert_eq!(t.spread(&identity).unwrap(), t);

        let bad: BTreeMap<u64, u64> = [(1, 5), (2, 3)].into_iter().collect();
        assert!(matches!(
            t.spread(&bad),
            Err(NormsetError::BadSpreadMap(_))
        ));
    }

    #[test]
    fn tree_json_round_trip() {
        let fam = toy_fam();
        let inner = half_sum(&fam, &[2, 3]);
        let t = FunctionalTree::internal(
            OpTag::plain(2),
            vec![FunctionalTree::unit(Sign::Minus, 1), inner],
            &fam,
        )
        .unwrap();
        let v = t.to_json();
        let back = FunctionalTree::from_json(&v, &fam).unwrap();
        assert_eq!(t, back);
    }

    fn arb_vector() -> impl Strategy<Value = RationalVector> {
        proptest::collection::vec((-8i64..8, 1i64..5), 4).prop_map(|cs| {
            make_vector(
                cs.into_iter()
                    .enumerate()
                    .map(|(i, (n, d))| (i as u64 + 1, rat(n, d)))
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn evaluation_is_linear(x in arb_vector(), y in arb_vector(), an in -5i64..5, bn in -5i64..5) {
            let fam = toy_fam();
            let t = FunctionalTree::internal(
                OpTag::plain(2),
                vec![
                    half_sum(&fam, &[1, 2]),
                    FunctionalTree::unit(Sign::Minus, 3),
                    FunctionalTree::unit(Sign::Plus, 4),
                ],
                &fam,
            ).unwrap();
            let a = rat(an, 2);
            let b = rat(bn, 3);
            let combo = x.scale(&a).add(&y.scale(&b));
            prop_assert_eq!(
                t.evaluate(&combo),
                a * t.evaluate(&x) + b * t.evaluate(&y)
            );
        }

        #[test]
        fn action_bounded_by_l1(x in arb_vector()) {
            let fam = toy_fam();
            let t = FunctionalTree::internal(
                OpTag::plain(2),
                vec![half_sum(&fam, &[1, 2]), half_sum(&fam, &[3, 4])],
                &fam,
            ).unwrap();
            let (l1, _) = x.elementary_norms();
            let action = t.evaluate(&x);
            let abs = if action < rat_zero() { -action } else { action };
            prop_assert!(abs <= l1);
        }

        #[test]
        fn restrict_commutes_with_evaluate(x in arb_vector(), lo in 1u64..4, len in 0u64..4) {
            let fam = toy_fam();
            let t = FunctionalTree::internal(
                OpTag::plain(2),
                vec![half_sum(&fam, &[1, 2]), half_sum(&fam, &[3, 4])],
                &fam,
            ).unwrap();
            let e = Interval::new(lo, lo + len).unwrap();
            let lhs = t.restrict(&e).evaluate(&x);
            let rhs = t.evaluate(&x.restrict(&e));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn spread_preserves_action(x in arb_vector(), gaps in proptest::collection::vec(1u64..4, 4)) {
            let fam = toy_fam();
            let t = FunctionalTree::internal(
                OpTag::plain(2),
                vec![half_sum(&fam, &[1, 2]), half_sum(&fam, &[3, 4])],
                &fam,
            ).unwrap();
            let mut map = BTreeMap::new();
            let mut pos = 0;
            for (i, g) in gaps.iter().enumerate() {
                pos += g;
                map.insert(i as u64 + 1, pos);
            }
            let spread_t = t.spread(&map).unwrap();
            let spread_x = spread_vector(&x, &map).unwrap();
            prop_assert_eq!(spread_t.evaluate(&spread_x), t.evaluate(&x));
            prop_assert!(check_membership(&spread_t, &fam, None).ok);
        }
    }
}
