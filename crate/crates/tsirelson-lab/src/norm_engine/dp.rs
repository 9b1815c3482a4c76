//! Interval dynamic program with optimal-functional certificates, plus a
//! collapsed length-indexed variant for uniform-magnitude vectors that
//! reaches supports far beyond the generic table.

use num_traits::{Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::core::{Interval, RationalVector};
use crate::normset::{
    check_membership, FamilySpec, Functional, FunctionalTree, GroundSet, OpTag, Sign,
};
use crate::{Int, Rational};

use super::EngineError;

/// Default cap on the support size of the generic interval DP; beyond it
/// only the structured fast paths run.
pub const DEFAULT_DP_SUPPORT_CAP: usize = 64;

/// A norm value together with the optimal functional and the family it was
/// computed against; `evaluate(tree, x) = value` and membership both
/// re-assert.
#[derive(Clone, Debug)]
pub struct NormCertificate {
    pub value: Rational,
    pub functional: Functional,
    pub family_name: String,
}

impl NormCertificate {
    pub fn verify(&self, x: &RationalVector, fam: &FamilySpec) -> bool {
        if self.functional.evaluate(x) != self.value {
            return false;
        }
        match self.functional.tree() {
            None => self.value.is_zero(),
            Some(t) => check_membership(t, fam, None).ok,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "value": crate::rat_to_string(&self.value),
            "family": self.family_name,
            "tree": match self.functional.tree() {
                Some(t) => t.to_json(),
                None => Value::Null,
            },
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum LeafKind {
    /// Ground set `{±e_k*}`: the leaf on an interval is the largest |coordinate|.
    UnitMax,
    /// Ground set `{±chi_I}`: the leaf optimizes over subintervals of its slot.
    ChiWindow,
}

#[derive(Clone, Debug)]
struct DpOp {
    tag: OpTag,
    size: usize,
    weight: Int,
}

fn int_capped(v: &Int, cap: usize) -> usize {
    v.to_usize().unwrap_or(cap).min(cap)
}

fn plain_ops(fam: &FamilySpec, support_len: usize) -> Result<Vec<DpOp>, EngineError> {
    if fam.has_special_ops() || fam.has_modified_ops() {
        return Err(EngineError::UnsupportedFamily(format!(
            "{} has special or modified operations; the interval DP handles plain families only",
            fam.name
        )));
    }
    Ok(fam
        .rules()
        .map(|r| DpOp {
            tag: r.tag,
            // More pieces than points never helps.
            size: int_capped(&r.size, support_len),
            weight: r.weight.clone(),
        })
        .collect())
}

/// The generic interval DP over the support of `x`.
struct Engine {
    leaf: LeafKind,
    pos: Vec<u64>,
    coords: Vec<Rational>,
    abs: Vec<Rational>,
    /// Prefix sums of the signed coordinates, length `d + 1`.
    prefix: Vec<Rational>,
    ops: Vec<DpOp>,
    /// `val[a][b - a]` = norm of the restriction to support positions `a..=b`.
    val: Vec<Vec<Rational>>,
}

impl Engine {
    fn new(x: &RationalVector, fam: &FamilySpec, leaf: LeafKind) -> Result<Engine, EngineError> {
        let pos: Vec<u64> = x.support().collect();
        let coords: Vec<Rational> = pos.iter().map(|&k| x.coeff(k)).collect();
        let abs: Vec<Rational> = coords.iter().map(|c| c.abs()).collect();
        let mut prefix = Vec::with_capacity(pos.len() + 1);
        prefix.push(Rational::zero());
        for c in &coords {
            let last = prefix.last().unwrap().clone();
            prefix.push(last + c);
        }
        let ops = plain_ops(fam, pos.len())?;
        Ok(Engine {
            leaf,
            pos,
            coords,
            abs,
            prefix,
            ops,
            val: Vec::new(),
        })
    }

    fn d(&self) -> usize {
        self.pos.len()
    }

    fn value(&self, a: usize, b: usize) -> &Rational {
        &self.val[a][b - a]
    }

    fn run(&mut self) {
        let d = self.d();
        self.val = (0..d).map(|a| Vec::with_capacity(d - a)).collect();
        for len in 1..=d {
            for a in 0..=d - len {
                let b = a + len - 1;
                let mut best = self.leaf_value(a, b).0;
                for oi in 0..self.ops.len() {
                    let cap = self.ops[oi].size.min(len);
                    if cap == 0 {
                        continue;
                    }
                    let pieces = self.best_pieces(a, b, cap);
                    let cand = pieces / Rational::from(self.ops[oi].weight.clone());
                    if cand > best {
                        best = cand;
                    }
                }
                debug_assert_eq!(self.val[a].len(), len - 1);
                self.val[a].push(best);
            }
        }
    }

    fn leaf_value(&self, a: usize, b: usize) -> (Rational, FunctionalTree) {
        match self.leaf {
            LeafKind::UnitMax => {
                let mut arg = a;
                for i in a + 1..=b {
                    if self.abs[i] > self.abs[arg] {
                        arg = i;
                    }
                }
                (
                    self.abs[arg].clone(),
                    FunctionalTree::unit(Sign::of(&self.coords[arg]), self.pos[arg]),
                )
            }
            LeafKind::ChiWindow => {
                // max |prefix[k + 1] - prefix[i]| over a <= i <= k <= b.
                let (mut best, mut bi, mut bk) = (Rational::zero(), a, a);
                let mut min_i = a;
                let mut max_i = a;
                for k in a..=b {
                    if self.prefix[k] < self.prefix[min_i] {
                        min_i = k;
                    }
                    if self.prefix[k] > self.prefix[max_i] {
                        max_i = k;
                    }
                    let up = &self.prefix[k + 1] - &self.prefix[min_i];
                    if up > best {
                        best = up;
                        bi = min_i;
                        bk = k;
                    }
                    let down = &self.prefix[max_i] - &self.prefix[k + 1];
                    if down > best {
                        best = down;
                        bi = max_i;
                        bk = k;
                    }
                }
                let agg = &self.prefix[bk + 1] - &self.prefix[bi];
                let sign = Sign::of(&agg);
                let iv = Interval::new(self.pos[bi], self.pos[bk])
                    .expect("support positions increase");
                (best, FunctionalTree::chi(sign, iv))
            }
        }
    }

    /// Best sum of `val` over at most `cap` successive subintervals of
    /// positions `a..=b`, the single full piece excluded.
    fn best_pieces(&self, a: usize, b: usize, cap: usize) -> Rational {
        let width = b - a + 2; // boundary index 0..=b-a+1
        let mut prev = vec![Rational::zero(); width];
        let mut cur = vec![Rational::zero(); width];
        for _t in 1..=cap {
            for i in 1..width {
                let mut v = cur[i - 1].clone();
                if prev[i] > v {
                    v = prev[i].clone();
                }
                for s in 0..i {
                    if s == 0 && i == width - 1 {
                        continue; // proper-subinterval restriction
                    }
                    let cand = &prev[s] + self.value(a + s, a + i - 1);
                    if cand > v {
                        v = cand;
                    }
                }
                cur[i] = v;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        prev[width - 1].clone()
    }

    /// Re-runs the inner DP with backpointers and returns the chosen pieces.
    fn backtrack_pieces(&self, a: usize, b: usize, cap: usize) -> Vec<(usize, usize)> {
        let width = b - a + 2;
        // g[t][i], full table.
        let mut g = vec![vec![Rational::zero(); width]; cap + 1];
        for t in 1..=cap {
            for i in 1..width {
                let mut v = g[t][i - 1].clone();
                if g[t - 1][i] > v {
                    v = g[t - 1][i].clone();
                }
                for s in 0..i {
                    if s == 0 && i == width - 1 {
                        continue;
                    }
                    let cand = &g[t - 1][s] + self.value(a + s, a + i - 1);
                    if cand > v {
                        v = cand;
                    }
                }
                g[t][i] = v;
            }
        }
        let mut pieces = Vec::new();
        let (mut t, mut i) = (cap, width - 1);
        while t > 0 && i > 0 {
            if g[t][i] == g[t][i - 1] {
                i -= 1;
                continue;
            }
            if g[t][i] == g[t - 1][i] {
                t -= 1;
                continue;
            }
            let mut found = false;
            for s in 0..i {
                if s == 0 && i == width - 1 {
                    continue;
                }
                if &g[t - 1][s] + self.value(a + s, a + i - 1) == g[t][i] {
                    pieces.push((a + s, a + i - 1));
                    t -= 1;
                    i = s;
                    found = true;
                    break;
                }
            }
            debug_assert!(found, "inner DP backtrack must close");
            if !found {
                break;
            }
        }
        pieces.reverse();
        pieces
    }

    fn build_cert(&self, a: usize, b: usize) -> FunctionalTree {
        let v = self.value(a, b).clone();
        let (leaf_v, leaf_tree) = self.leaf_value(a, b);
        if v == leaf_v {
            return leaf_tree;
        }
        for op in &self.ops {
            let cap = op.size.min(b - a + 1);
            if cap == 0 {
                continue;
            }
            if self.best_pieces(a, b, cap) == &v * Rational::from(op.weight.clone()) {
                let pieces = self.backtrack_pieces(a, b, cap);
                let children = pieces
                    .iter()
                    .map(|&(s, e)| self.build_cert(s, e))
                    .collect();
                return FunctionalTree::internal_raw(op.tag, op.weight.clone(), children);
            }
        }
        unreachable!("every DP value is witnessed by the leaf or an operation")
    }

    fn norm(mut self, fam: &FamilySpec) -> NormCertificate {
        self.run();
        let d = self.d();
        let value = self.value(0, d - 1).clone();
        let tree = self.build_cert(0, d - 1);
        debug_assert_eq!(tree.evaluate_positions(&self.pos, &self.coords), value);
        NormCertificate {
            value,
            functional: Functional::Tree(tree),
            family_name: fam.name.clone(),
        }
    }
}

impl FunctionalTree {
    /// Evaluation against a position/coordinate table; debug helper for the
    /// engines, equivalent to building the vector and calling `evaluate`.
    fn evaluate_positions(&self, pos: &[u64], coords: &[Rational]) -> Rational {
        let entries: Vec<(u64, Rational)> = pos
            .iter()
            .copied()
            .zip(coords.iter().cloned())
            .collect();
        let x = RationalVector::make(entries).expect("positions are distinct");
        self.evaluate(&x)
    }
}

/// Exact mixed-Tsirelson norm with an optimal certificate; plain operations
/// and unit leaves only. Supports larger than the budget are served by the
/// collapsed path when the vector has uniform coordinate magnitude, and
/// refused otherwise.
pub fn norm_mixed(x: &RationalVector, fam: &FamilySpec) -> Result<NormCertificate, EngineError> {
    norm_mixed_with_budget(x, fam, DEFAULT_DP_SUPPORT_CAP)
}

pub fn norm_mixed_with_budget(
    x: &RationalVector,
    fam: &FamilySpec,
    budget: usize,
) -> Result<NormCertificate, EngineError> {
    if fam.ground != GroundSet::UnitLeaves {
        return Err(EngineError::UnsupportedFamily(
            "norm_mixed needs a unit-leaf ground set".into(),
        ));
    }
    if x.is_zero() {
        return Ok(NormCertificate {
            value: Rational::zero(),
            functional: Functional::Zero,
            family_name: fam.name.clone(),
        });
    }
    let d = x.support_len();
    if d <= budget {
        return Ok(Engine::new(x, fam, LeafKind::UnitMax)?.norm(fam));
    }
    if uniform_magnitude(x).is_some() {
        return collapsed_uniform_norm(x, fam);
    }
    Err(EngineError::Refusal(format!(
        "support {d} exceeds the interval-DP budget {budget} and the vector is not uniform"
    )))
}

/// The seminorm contributed by the single operation of weight `m_j`:
/// `(1/m_j) sup sum ||E_k x||` over at most `n_j` successive intervals.
pub fn seminorm_weight(
    x: &RationalVector,
    fam: &FamilySpec,
    j: usize,
) -> Result<Rational, EngineError> {
    if x.is_zero() {
        return Ok(Rational::zero());
    }
    let d = x.support_len();
    if d > DEFAULT_DP_SUPPORT_CAP {
        return Err(EngineError::Refusal(format!(
            "support {d} exceeds the interval-DP budget"
        )));
    }
    let rule = fam
        .rule(&OpTag::plain(j))
        .ok_or_else(|| EngineError::UnsupportedFamily(format!("no plain operation {j}")))?
        .clone();
    let mut engine = Engine::new(x, fam, LeafKind::UnitMax)?;
    engine.run();
    let cap = int_capped(&rule.size, d);
    let best = engine.best_pieces(0, d - 1, cap);
    Ok(best / Rational::from(rule.weight))
}

/// The Jamesification-side engine: the interval DP with interval-leaf
/// ground semantics, preceded by the two structured fast paths.
///
/// When all coordinates share a sign, the full-range chi functional already
/// realizes the l1 mass, which also bounds every tree action, so the norm
/// is `l1(x)` with a one-leaf certificate at any support size. A contiguous
/// strictly-alternating uniform pattern collapses to the length-indexed DP.
pub fn jnorm_value(
    x: &RationalVector,
    fam: &FamilySpec,
    budget: usize,
) -> Result<NormCertificate, EngineError> {
    if fam.ground != GroundSet::IntervalLeaves {
        return Err(EngineError::UnsupportedFamily(
            "jnorm needs an interval-leaf ground set".into(),
        ));
    }
    if x.is_zero() {
        return Ok(NormCertificate {
            value: Rational::zero(),
            functional: Functional::Zero,
            family_name: fam.name.clone(),
        });
    }
    if let Some(cert) = same_sign_chi_norm(x, fam) {
        return Ok(cert);
    }
    let d = x.support_len();
    if d <= budget {
        return Ok(Engine::new(x, fam, LeafKind::ChiWindow)?.norm(fam));
    }
    if alternating_pattern(x).is_some() {
        return collapsed_uniform_norm(x, fam);
    }
    Err(EngineError::Refusal(format!(
        "support {d} exceeds the interval-DP budget {budget} and no structured fast path applies"
    )))
}

fn same_sign_chi_norm(x: &RationalVector, fam: &FamilySpec) -> Option<NormCertificate> {
    let mut sign: Option<Sign> = None;
    for (_, v) in x.iter() {
        let s = Sign::of(v);
        match sign {
            None => sign = Some(s),
            Some(prev) if prev == s => {}
            _ => return None,
        }
    }
    let sign = sign?;
    let (l1, _) = x.elementary_norms();
    let tree = FunctionalTree::chi(sign, x.range()?);
    debug_assert_eq!(tree.evaluate(x), l1);
    Some(NormCertificate {
        value: l1,
        functional: Functional::Tree(tree),
        family_name: fam.name.clone(),
    })
}

/// `Some(c)` when every coordinate of `x` has absolute value `c > 0`.
pub(crate) fn uniform_magnitude(x: &RationalVector) -> Option<Rational> {
    let mut c: Option<Rational> = None;
    for (_, v) in x.iter() {
        let a = v.abs();
        match &c {
            None => c = Some(a),
            Some(prev) if *prev == a => {}
            _ => return None,
        }
    }
    c
}

// ---------------------------------------------------------------------------
// Collapsed path.
//
// For a vector with uniform coordinate magnitude `c`, 1-unconditionality and
// subsymmetry collapse the interval DP to lengths: with `V(len)` the
// normalized norm of `len` uniform coordinates,
//
//   V(len) = max( 1, max_j (1/m_j) B_j(len) ),
//   B_j(len) = max over partitions of `len` into exactly min(n_j, len)
//              pieces of the sum of `V` over the pieces.
//
// Exactly the maximal piece count suffices because V is subadditive
// (splitting a piece never lowers the sum) and gaps never help (V is
// nondecreasing). Every tree the collapsed DP considers has at least two
// children per internal node, so its depth is at most floor(log2 len) + 1
// and every value has denominator dividing P^(depth) for P the product of
// the distinct weights; values are therefore stored exactly as integers
// scaled by P^(floor(log2 N) + 2). The equivalence with the generic DP is
// unit-tested on every small length.
// ---------------------------------------------------------------------------

struct Collapsed {
    ops: Vec<DpOp>,
    n: usize,
    scale: Int,
    /// `v[len]` = scaled normalized value, `v[0]` unused.
    v: Vec<Int>,
    /// `stages[r][len]` = scaled best over exactly `2^(r+1)` pieces.
    stages: Vec<Vec<Option<Int>>>,
    /// Per op needing one: chain of arrays folding the binary digits of the
    /// piece count; each entry is `(pieces, array)`.
    chains: Vec<Vec<(usize, Vec<Option<Int>>)>>,
    /// Piece count per op (`min(n_j, N)`), aligned with `ops`.
    counts: Vec<usize>,
}

impl Collapsed {
    fn new(fam: &FamilySpec, n: usize) -> Result<Collapsed, EngineError> {
        let ops: Vec<DpOp> = plain_ops(fam, n)?
            .into_iter()
            .filter(|op| op.size >= 2) // single-child applications are dominated
            .collect();
        if ops.is_empty() {
            return Err(EngineError::UnsupportedFamily(
                "family has no usable operations".into(),
            ));
        }
        let mut distinct: Vec<&Int> = ops.iter().map(|o| &o.weight).collect();
        distinct.sort();
        distinct.dedup();
        let p: Int = distinct.into_iter().product();
        let log2 = usize::BITS - (n.max(1)).leading_zeros();
        let scale = p.pow(log2 + 2);
        let counts: Vec<usize> = ops.iter().map(|op| op.size.min(n)).collect();
        Ok(Collapsed {
            ops,
            n,
            scale,
            v: Vec::new(),
            stages: Vec::new(),
            chains: Vec::new(),
            counts,
        })
    }

    fn run(&mut self) {
        let n = self.n;
        // Stage r holds exactly-2^(r+1) pieces; enough stages to cover the
        // largest needed count.
        let max_count = self.counts.iter().copied().max().unwrap_or(2).min(n.max(2));
        let mut r_max = 0usize;
        while (2usize << r_max) <= max_count {
            r_max += 1;
        }
        self.stages = vec![vec![None; n + 1]; r_max.max(1)];
        // Per-op chains fold the binary digits of the piece count, high to
        // low; only non-power-of-two counts below the support size need one.
        self.chains = Vec::with_capacity(self.ops.len());
        for &count in &self.counts {
            let mut chain = Vec::new();
            if count > 2 && !count.is_power_of_two() && count < n {
                let bits: Vec<usize> = (0..usize::BITS as usize)
                    .filter(|&r| count & (1 << r) != 0)
                    .rev()
                    .collect();
                let mut pieces = 1usize << bits[0];
                for &r in &bits[1..] {
                    pieces += 1 << r;
                    chain.push((pieces, vec![None; n + 1]));
                }
            }
            self.chains.push(chain);
        }

        self.v = vec![Int::from(0); n + 1];
        for len in 1..=n {
            // Stage arrays at this length (reads strictly smaller lengths).
            for r in 0..self.stages.len() {
                let half = 1usize << r; // operand piece count
                let mut best: Option<Int> = None;
                if len >= 2 * half {
                    for l in half..=len - half {
                        if let (Some(x), Some(y)) =
                            (self.entry_of(half, l), self.entry_of(half, len - l))
                        {
                            let cand = x + y;
                            if best.as_ref().map_or(true, |b| cand > *b) {
                                best = Some(cand);
                            }
                        }
                    }
                }
                self.stages[r][len] = best;
            }
            self.run_chains_at(len);
            // The value at this length.
            let mut best = self.scale.clone(); // ground leaf, normalized 1
            for oi in 0..self.ops.len() {
                if let Some(b) = self.pieces_best(oi, len) {
                    let cand = b / &self.ops[oi].weight;
                    if cand > best {
                        best = cand;
                    }
                }
            }
            self.v[len] = best;
        }
    }

    fn entry_of(&self, pieces: usize, len: usize) -> Option<Int> {
        if pieces == 1 {
            (len >= 1).then(|| self.v[len].clone())
        } else if pieces.is_power_of_two() {
            self.stages[pieces.trailing_zeros() as usize - 1][len].clone()
        } else {
            None
        }
    }

    /// `B_j(len)`, scaled: `len` singletons when the size bound allows,
    /// otherwise the exactly-`count` convolution.
    fn pieces_best(&self, oi: usize, len: usize) -> Option<Int> {
        if len < 2 {
            return None; // single-piece applications are dominated
        }
        let count = self.counts[oi];
        if len <= count {
            return Some(Int::from(len as u64) * &self.scale);
        }
        if count.is_power_of_two() {
            return self.entry_of(count, len);
        }
        self.chains[oi].last().and_then(|(p, arr)| {
            debug_assert_eq!(*p, count);
            arr[len].clone()
        })
    }
}

// The chain-filling code above needs simultaneous reads of earlier chain
// entries while writing the current one; rewritten without aliasing below.
impl Collapsed {
    fn run_chains_at(&mut self, len: usize) {
        for oi in 0..self.ops.len() {
            let count = self.counts[oi];
            if self.chains[oi].is_empty() {
                continue;
            }
            let bits: Vec<usize> = (0..usize::BITS as usize)
                .filter(|&r| count & (1 << r) != 0)
                .rev()
                .collect();
            let mut acc_pieces = 1usize << bits[0];
            for (ci, &r) in bits[1..].iter().enumerate() {
                let operand_pieces = 1usize << r;
                let mut best: Option<Int> = None;
                if len >= acc_pieces + operand_pieces {
                    for l in acc_pieces..=len - operand_pieces {
                        let left = if ci == 0 {
                            self.entry_of(acc_pieces, l)
                        } else {
                            self.chains[oi][ci - 1].1[l].clone()
                        };
                        let right = self.entry_of(operand_pieces, len - l);
                        if let (Some(x), Some(y)) = (left, right) {
                            let cand = x + y;
                            if best.as_ref().map_or(true, |b| cand > *b) {
                                best = Some(cand);
                            }
                        }
                    }
                }
                self.chains[oi][ci].1[len] = best;
                acc_pieces += operand_pieces;
            }
        }
    }
}

/// `Some(c)` when the support is a contiguous index block carrying
/// coordinates of uniform magnitude `c` and strictly alternating sign, so
/// that every interval aggregate lies in `{-c, 0, c}`.
pub(crate) fn alternating_pattern(x: &RationalVector) -> Option<Rational> {
    let c = uniform_magnitude(x)?;
    let range = x.range()?;
    if range.len() != x.support_len() as u64 {
        return None;
    }
    let mut prev: Option<Rational> = None;
    for (_, v) in x.iter() {
        if let Some(p) = prev {
            if !(p + v).is_zero() {
                return None;
            }
        }
        prev = Some(v.clone());
    }
    Some(c)
}

/// Exact norm of a uniform-magnitude vector through the collapsed DP, with
/// a full certificate over the actual support and signs.
///
/// For a unit-leaf ground set, uniform |coordinates| suffice. For an
/// interval-leaf ground set the leaf on every window must also evaluate to
/// the coordinate magnitude, which is exactly the strictly-alternating
/// contiguous pattern; anything else is refused.
pub fn collapsed_uniform_norm(
    x: &RationalVector,
    fam: &FamilySpec,
) -> Result<NormCertificate, EngineError> {
    let c = match fam.ground {
        GroundSet::UnitLeaves => uniform_magnitude(x).ok_or_else(|| {
            EngineError::Precondition("collapsed path needs uniform |coordinates|".into())
        })?,
        GroundSet::IntervalLeaves => alternating_pattern(x).ok_or_else(|| {
            EngineError::Precondition(
                "collapsed interval-leaf path needs a contiguous alternating pattern".into(),
            )
        })?,
    };
    let n = x.support_len();
    let mut eng = Collapsed::new(fam, n)?;
    eng.run();
    let value = Rational::new(eng.v[n].clone(), eng.scale.clone()) * &c;

    let pos: Vec<u64> = x.support().collect();
    let coords: Vec<Rational> = pos.iter().map(|&k| x.coeff(k)).collect();
    let tree = eng.build_cert(n, 0, &pos, &coords, fam.ground);
    debug_assert_eq!(tree.evaluate(x), value);
    Ok(NormCertificate {
        value,
        functional: Functional::Tree(tree),
        family_name: fam.name.clone(),
    })
}

impl Collapsed {
    /// Reconstructs an optimal tree for `len` uniform positions starting at
    /// support offset `start`.
    fn build_cert(
        &self,
        len: usize,
        start: usize,
        pos: &[u64],
        coords: &[Rational],
        ground: GroundSet,
    ) -> FunctionalTree {
        if self.v[len] == self.scale {
            // Ground leaf: a sign-aligned singleton at the first position.
            let sign = Sign::of(&coords[start]);
            return match ground {
                GroundSet::UnitLeaves => FunctionalTree::unit(sign, pos[start]),
                GroundSet::IntervalLeaves => FunctionalTree::chi(
                    sign,
                    Interval::new(pos[start], pos[start]).expect("positive index"),
                ),
            };
        }
        for oi in 0..self.ops.len() {
            if let Some(b) = self.pieces_best(oi, len) {
                if &b / &self.ops[oi].weight == self.v[len] {
                    let lens = self.piece_lengths(oi, len);
                    debug_assert_eq!(lens.iter().sum::<usize>(), len);
                    let mut children = Vec::with_capacity(lens.len());
                    let mut off = start;
                    for l in lens {
                        children.push(self.build_cert(l, off, pos, coords, ground));
                        off += l;
                    }
                    return FunctionalTree::internal_raw(
                        self.ops[oi].tag,
                        self.ops[oi].weight.clone(),
                        children,
                    );
                }
            }
        }
        unreachable!("collapsed value must be witnessed")
    }

    fn piece_lengths(&self, oi: usize, len: usize) -> Vec<usize> {
        let count = self.counts[oi];
        if len <= count {
            return vec![1; len];
        }
        if count.is_power_of_two() {
            return self.split_power(count, len);
        }
        // Walk the chain backwards.
        let bits: Vec<usize> = (0..usize::BITS as usize)
            .filter(|&r| count & (1 << r) != 0)
            .rev()
            .collect();
        let piece_counts: Vec<usize> = {
            let mut acc = 1usize << bits[0];
            let mut v = vec![acc];
            for &r in &bits[1..] {
                acc += 1 << r;
                v.push(acc);
            }
            v
        };
        let mut lens = Vec::new();
        let mut remaining = len;
        // chains[oi][ci] corresponds to piece_counts[ci + 1].
        for ci in (0..self.chains[oi].len()).rev() {
            let left_pieces = piece_counts[ci];
            let right_pieces = piece_counts[ci + 1] - left_pieces;
            let target = if ci == self.chains[oi].len() - 1 {
                self.chains[oi][ci].1[remaining].clone().unwrap()
            } else {
                self.chains[oi][ci].1[remaining].clone().unwrap()
            };
            let mut split_at = None;
            for l in left_pieces..=remaining - right_pieces {
                let left = if ci == 0 {
                    self.entry_of(left_pieces, l)
                } else {
                    self.chains[oi][ci - 1].1[l].clone()
                };
                let right = self.entry_of(right_pieces, remaining - l);
                if let (Some(x), Some(y)) = (left, right) {
                    if x + y == target {
                        split_at = Some(l);
                        break;
                    }
                }
            }
            let l = split_at.expect("chain split must exist");
            let mut right_lens = self.split_power(right_pieces, remaining - l);
            right_lens.reverse();
            lens.extend(right_lens); // collected reversed; fixed below
            remaining = l;
        }
        let mut left_lens = self.split_power(piece_counts[0], remaining);
        left_lens.reverse();
        lens.extend(left_lens);
        lens.reverse();
        lens
    }

    /// Splits `len` into exactly `pieces` (a power of two) lengths matching
    /// the stored stage values.
    fn split_power(&self, pieces: usize, len: usize) -> Vec<usize> {
        if pieces == 1 {
            return vec![len];
        }
        let half = pieces / 2;
        let target = self.entry_of(pieces, len).expect("stage entry exists");
        for l in half..=len - half {
            if let (Some(x), Some(y)) = (self.entry_of(half, l), self.entry_of(half, len - l)) {
                if x + y == target {
                    let mut out = self.split_power(half, l);
                    out.extend(self.split_power(half, len - l));
                    return out;
                }
            }
        }
        unreachable!("stage split must exist")
    }
}
