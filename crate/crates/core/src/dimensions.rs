//! Sequential fat-shattering dimension with witness trees, and the
//! fat-shattering and Littlestone oracles used to cross-check it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::concept::{ConceptClass, ConceptSet, TOL};
use crate::error::{Error, Result};

/// Complete binary tree of `(point, threshold)` pairs certifying a
/// sequential fat-shattering lower bound.
///
/// Serializes as `{"x": i, "a": v, "left": .., "right": ..}` for internal
/// nodes and `{"leaf": id}` for leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShatterTree {
    Leaf {
        leaf: u64,
    },
    Node {
        x: usize,
        a: f64,
        left: Box<ShatterTree>,
        right: Box<ShatterTree>,
    },
}

impl ShatterTree {
    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            ShatterTree::Leaf { .. } => 0,
            ShatterTree::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaf ids from left to right.
    pub fn leaves(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<u64>) {
        match self {
            ShatterTree::Leaf { leaf } => out.push(*leaf),
            ShatterTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Follows `bits` from the root (false = left) and returns the subtree
    /// reached, or `None` if a leaf is hit first.
    pub fn descend(&self, bits: &[bool]) -> Option<&ShatterTree> {
        let mut node = self;
        for &bit in bits {
            match node {
                ShatterTree::Leaf { .. } => return None,
                ShatterTree::Node { left, right, .. } => {
                    node = if bit { right } else { left };
                }
            }
        }
        Some(node)
    }

    /// Checks completeness, leaf ids and the margin conditions at every node.
    pub fn validate(&self, class: &ConceptClass, margin: f64) -> Result<()> {
        let depth = self.depth();
        self.validate_rec(class, margin, depth)?;
        Ok(())
    }

    // returns the class positions of the leaves below this node
    fn validate_rec(
        &self,
        class: &ConceptClass,
        margin: f64,
        remaining: usize,
    ) -> Result<Vec<usize>> {
        match self {
            ShatterTree::Leaf { leaf } => {
                if remaining != 0 {
                    return Err(Error::InvalidTree("leaves at unequal depth".into()));
                }
                let idx = class
                    .index_of(*leaf)
                    .map_err(|_| Error::InvalidTree(format!("unknown leaf concept {leaf}")))?;
                Ok(vec![idx])
            }
            ShatterTree::Node { x, a, left, right } => {
                if remaining == 0 {
                    return Err(Error::InvalidTree("leaves at unequal depth".into()));
                }
                if *x >= class.domain_size() {
                    return Err(Error::InvalidTree(format!("point {x} outside the domain")));
                }
                if !(0.0..=1.0).contains(a) {
                    return Err(Error::InvalidTree(format!("threshold {a} outside [0, 1]")));
                }
                let l = left.validate_rec(class, margin, remaining - 1)?;
                let r = right.validate_rec(class, margin, remaining - 1)?;
                if let Some(&bad) = l.iter().find(|&&i| class.value(i, *x) > a - margin + TOL) {
                    return Err(Error::InvalidTree(format!(
                        "left leaf {} has value {} > {} at point {x}",
                        class.concept(bad).id,
                        class.value(bad, *x),
                        a - margin
                    )));
                }
                if let Some(&bad) = r.iter().find(|&&i| class.value(i, *x) < a + margin - TOL) {
                    return Err(Error::InvalidTree(format!(
                        "right leaf {} has value {} < {} at point {x}",
                        class.concept(bad).id,
                        class.value(bad, *x),
                        a + margin
                    )));
                }
                Ok(l.into_iter().chain(r).collect())
            }
        }
    }
}

/// Exact dimension with a complete witness tree of that depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub dimension: usize,
    pub witness: ShatterTree,
}

/// Dimension assigned to the empty set, below every nonempty subset.
pub const fn sfat_empty_convention() -> i32 {
    -1
}

#[derive(Clone, Copy, Debug)]
struct Split {
    x: usize,
    a: f64,
    left: ConceptSet,
    right: ConceptSet,
}

/// Memoized sfat evaluator for one class at one margin.
///
/// The memo is keyed by the surviving-set bitmask, which is what makes
/// repeated calls inside a learner cheap.
#[derive(Debug)]
pub struct SfatOracle<'a> {
    class: &'a ConceptClass,
    margin: f64,
    memo: HashMap<ConceptSet, (i32, Option<Split>)>,
}

fn floor_log2(n: usize) -> i32 {
    if n == 0 {
        -1
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as i32
    }
}

impl<'a> SfatOracle<'a> {
    pub fn new(class: &'a ConceptClass, margin: f64) -> Result<Self> {
        class.full_set()?;
        if !(margin > 0.0) {
            return Err(Error::OutOfRange {
                name: "zeta",
                value: margin,
                reason: "margin must be positive",
            });
        }
        Ok(SfatOracle {
            class,
            margin,
            memo: HashMap::new(),
        })
    }

    pub fn class(&self) -> &'a ConceptClass {
        self.class
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// sfat of `set`, with −1 for the empty set.
    pub fn dim(&mut self, set: ConceptSet) -> i32 {
        self.solve(set).0
    }

    fn solve(&mut self, set: ConceptSet) -> (i32, Option<Split>) {
        if set.len() <= 1 {
            return (if set.is_empty() { sfat_empty_convention() } else { 0 }, None);
        }
        if let Some(&hit) = self.memo.get(&set) {
            return hit;
        }
        let ceiling = floor_log2(set.len());
        let mut best: (i32, Option<Split>) = (0, None);
        let mut values: Vec<f64> = Vec::with_capacity(set.len());
        'points: for x in 0..self.class.domain_size() {
            values.clear();
            values.extend(set.iter().map(|i| self.class.value(i, x)));
            values.sort_by(f64::total_cmp);
            values.dedup();
            // Each admissible threshold induces a split dominated by one whose
            // left side is {f <= v} and whose right side starts at the first
            // value at least 2·margin above v.
            let mut j = 0;
            for (i, &v) in values.iter().enumerate() {
                j = j.max(i + 1);
                while j < values.len() && values[j] - v < 2.0 * self.margin - TOL {
                    j += 1;
                }
                if j == values.len() {
                    break;
                }
                let w = values[j];
                let left = set.filter(|c| self.class.value(c, x) <= v);
                let right = set.filter(|c| self.class.value(c, x) >= w);
                let bound = 1 + floor_log2(left.len().min(right.len()));
                if bound <= best.0 {
                    continue;
                }
                let value = 1 + self.dim(left).min(self.dim(right));
                if value > best.0 {
                    best = (
                        value,
                        Some(Split {
                            x,
                            a: (v + w) / 2.0,
                            left,
                            right,
                        }),
                    );
                    if value >= ceiling {
                        break 'points;
                    }
                }
            }
        }
        self.memo.insert(set, best);
        best
    }

    /// Exact sfat of a nonempty set together with a witness tree.
    pub fn result(&mut self, set: ConceptSet) -> Result<DimensionResult> {
        if set.is_empty() {
            return Err(Error::EmptySubset);
        }
        let dimension = self.dim(set) as usize;
        let witness = self.witness(set, dimension);
        Ok(DimensionResult { dimension, witness })
    }

    // set must have sfat >= depth
    fn witness(&mut self, set: ConceptSet, depth: usize) -> ShatterTree {
        if depth == 0 {
            let first = set.first().expect("witness set is nonempty");
            return ShatterTree::Leaf {
                leaf: self.class.concept(first).id,
            };
        }
        let split = self.solve(set).1.expect("positive dimension has a split");
        ShatterTree::Node {
            x: split.x,
            a: split.a,
            left: Box::new(self.witness(split.left, depth - 1)),
            right: Box::new(self.witness(split.right, depth - 1)),
        }
    }
}

/// Sequential fat-shattering dimension of `subset` at margin `zeta`.
pub fn sfat(class: &ConceptClass, subset: ConceptSet, zeta: f64) -> Result<DimensionResult> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut oracle = SfatOracle::new(class, zeta)?;
    if !subset.is_subset_of(class.full_set()?) {
        return Err(Error::OutOfRange {
            name: "subset",
            value: subset.0 as f64,
            reason: "subset refers to concepts outside the class",
        });
    }
    oracle.result(subset)
}

/// sfat of the whole class.
pub fn sfat_class(class: &ConceptClass, zeta: f64) -> Result<DimensionResult> {
    sfat(class, class.full_set()?, zeta)
}

/// Largest domain size accepted by [`fat`].
pub const FAT_MAX_DOMAIN: usize = 12;

/// Fat-shattering dimension at scale `gamma` by exhaustive search.
pub fn fat(class: &ConceptClass, gamma: f64) -> Result<usize> {
    let n = class.domain_size();
    if n > FAT_MAX_DOMAIN {
        return Err(Error::TooLarge(format!(
            "fat-shattering search supports at most {FAT_MAX_DOMAIN} points, got {n}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            reason: "scale must be positive",
        });
    }
    let all = class.full_set()?;
    // per point, the (below, above) concept sets for every useful witness
    let splits: Vec<Vec<(ConceptSet, ConceptSet)>> = (0..n)
        .map(|x| {
            let mut vals: Vec<f64> = all.iter().map(|i| class.value(i, x)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mut out = Vec::new();
            for (i, &v) in vals.iter().enumerate() {
                if let Some(&w) = vals[i + 1..].iter().find(|&&w| w - v >= 2.0 * gamma - TOL) {
                    out.push((
                        all.filter(|c| class.value(c, x) <= v),
                        all.filter(|c| class.value(c, x) >= w),
                    ));
                }
            }
            out
        })
        .collect();
    let max_k = floor_log2(class.len()).max(0) as usize;
    for k in (1..=max_k.min(n)).rev() {
        for points in combinations(n, k) {
            if shatters(&splits, &points, vec![all]) {
                return Ok(k);
            }
        }
    }
    Ok(0)
}

// patterns[b] holds the concepts realizing bit pattern b on the points fixed so far
fn shatters(
    splits: &[Vec<(ConceptSet, ConceptSet)>],
    points: &[usize],
    patterns: Vec<ConceptSet>,
) -> bool {
    let Some((&x, rest)) = points.split_first() else {
        return true;
    };
    splits[x].iter().any(|&(below, above)| {
        let next: Vec<ConceptSet> = patterns
            .iter()
            .flat_map(|p| [ConceptSet(p.0 & below.0), ConceptSet(p.0 & above.0)])
            .collect();
        next.iter().all(|s| !s.is_empty()) && shatters(splits, rest, next)
    })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Littlestone dimension of a {0,1}-valued class by direct recursion on
/// exact labels.
pub fn ldim_oracle(class: &ConceptClass) -> Result<usize> {
    for c in class.concepts() {
        if let Some(&v) = c.values.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::NotBoolean { id: c.id, value: v });
        }
    }
    let all = class.full_set()?;
    let mut memo = HashMap::new();
    Ok(ldim_rec(class, all, &mut memo))
}

fn ldim_rec(class: &ConceptClass, set: ConceptSet, memo: &mut HashMap<ConceptSet, usize>) -> usize {
    if set.len() <= 1 {
        return 0;
    }
    if let Some(&d) = memo.get(&set) {
        return d;
    }
    let mut best = 0;
    for x in 0..class.domain_size() {
        let ones = set.filter(|c| class.value(c, x) == 1.0);
        let zeros = ConceptSet(set.0 & !ones.0);
        if ones.is_empty() || zeros.is_empty() {
            continue;
        }
        best = best.max(1 + ldim_rec(class, zeros, memo).min(ldim_rec(class, ones, memo)));
    }
    memo.insert(set, best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four_constants() -> ConceptClass {
        ConceptClass::constants(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 1).unwrap()
    }

    #[test]
    fn singleton_is_zero() {
        let c = ConceptClass::constants(&[0.4], 3).unwrap();
        let r = sfat_class(&c, 0.1).unwrap();
        assert_eq!(r.dimension, 0);
        assert_eq!(r.witness, ShatterTree::Leaf { leaf: 0 });
    }

    #[test]
    fn four_constants_depth_two() {
        let c = four_constants();
        let r = sfat_class(&c, 1.0 / 6.0).unwrap();
        assert_eq!(r.dimension, 2);
        r.witness.validate(&c, 1.0 / 6.0).unwrap();
        // a hand-built tree with root 1/2 and children 1/6, 5/6 also validates
        let hand = ShatterTree::Node {
            x: 0,
            a: 0.5,
            left: Box::new(ShatterTree::Node {
                x: 0,
                a: 1.0 / 6.0,
                left: Box::new(ShatterTree::Leaf { leaf: 0 }),
                right: Box::new(ShatterTree::Leaf { leaf: 1 }),
            }),
            right: Box::new(ShatterTree::Node {
                x: 0,
                a: 5.0 / 6.0,
                left: Box::new(ShatterTree::Leaf { leaf: 2 }),
                right: Box::new(ShatterTree::Leaf { leaf: 3 }),
            }),
        };
        hand.validate(&c, 1.0 / 6.0).unwrap();
    }

    #[test]
    fn split_may_skip_middle_values() {
        // at margin 0.3 the best root split puts 0.5 on neither side
        let c = ConceptClass::constants(&[0.0, 0.1, 0.5, 0.9, 1.0], 1).unwrap();
        assert_eq!(sfat_class(&c, 0.2).unwrap().dimension, 1);
        let c = ConceptClass::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let r = sfat_class(&c, 0.3).unwrap();
        assert_eq!(r.dimension, 2);
        r.witness.validate(&c, 0.3).unwrap();
    }

    #[test]
    fn boolean_cube() {
        for d in 1..=4 {
            let c = ConceptClass::boolean_cube(d).unwrap();
            assert_eq!(sfat_class(&c, 0.25).unwrap().dimension, d);
            assert_eq!(ldim_oracle(&c).unwrap(), d);
            assert_eq!(fat(&c, 0.25).unwrap(), d);
        }
    }

    #[test]
    fn empty_convention() {
        assert_eq!(sfat_empty_convention(), -1);
        let c = four_constants();
        let mut o = SfatOracle::new(&c, 0.1).unwrap();
        assert!(o.dim(ConceptSet::EMPTY) < o.dim(ConceptSet::singleton(0)));
        assert!(matches!(sfat(&c, ConceptSet::EMPTY, 0.1), Err(Error::EmptySubset)));
    }

    #[test]
    fn ldim_small() {
        let c = ConceptClass::constants(&[0.0, 1.0], 1).unwrap();
        assert_eq!(ldim_oracle(&c).unwrap(), 1);
        let c = ConceptClass::constants(&[1.0], 2).unwrap();
        assert_eq!(ldim_oracle(&c).unwrap(), 0);
        assert!(matches!(
            ldim_oracle(&four_constants()),
            Err(Error::NotBoolean { .. })
        ));
    }

    #[test]
    fn fat_guards() {
        let c = ConceptClass::constants(&[0.5], 13).unwrap();
        assert!(matches!(fat(&c, 0.1), Err(Error::TooLarge(_))));
        let c = ConceptClass::constants(&[0.5], 3).unwrap();
        assert_eq!(fat(&c, 0.1).unwrap(), 0);
    }

    #[test]
    fn sequential_beats_batch_on_thresholds() {
        // thresholds on a line: Littlestone dimension grows, VC stays 1
        let n = 7;
        let rows: Vec<Vec<f64>> = (0..=n)
            .map(|t| (0..n).map(|x| if x < t { 1.0 } else { 0.0 }).collect())
            .collect();
        let c = ConceptClass::from_rows(rows).unwrap();
        assert_eq!(fat(&c, 0.25).unwrap(), 1);
        assert_eq!(sfat_class(&c, 0.25).unwrap().dimension, 3);
        assert_eq!(ldim_oracle(&c).unwrap(), 3);
    }

    #[test]
    fn tree_json_shape() {
        let c = ConceptClass::constants(&[0.0, 1.0], 1).unwrap();
        let w = sfat_class(&c, 0.25).unwrap().witness;
        let json = serde_json::to_value(&w).unwrap();
        assert_eq!(json["x"], 0);
        assert_eq!(json["left"]["leaf"], 0);
        let back: ShatterTree = serde_json::from_value(json).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn validate_rejects_bad_trees() {
        let c = ConceptClass::constants(&[0.0, 1.0], 1).unwrap();
        let swapped = ShatterTree::Node {
            x: 0,
            a: 0.5,
            left: Box::new(ShatterTree::Leaf { leaf: 1 }),
            right: Box::new(ShatterTree::Leaf { leaf: 0 }),
        };
        assert!(swapped.validate(&c, 0.25).is_err());
        let ragged = ShatterTree::Node {
            x: 0,
            a: 0.5,
            left: Box::new(ShatterTree::Leaf { leaf: 0 }),
            right: Box::new(swapped.clone()),
        };
        assert!(ragged.validate(&c, 0.25).is_err());
    }

    fn grid_class() -> impl Strategy<Value = ConceptClass> {
        (1usize..=3, 1usize..=7).prop_flat_map(|(n, k)| {
            prop::collection::vec(prop::collection::vec(0u8..=5, n), k).prop_map(|rows| {
                ConceptClass::from_rows(
                    rows.into_iter()
                        .map(|r| r.into_iter().map(|v| v as f64 / 5.0).collect())
                        .collect(),
                )
                .unwrap()
            })
        })
    }

    // Plain recursion over every threshold on a fine grid: the independent oracle.
    fn sfat_grid_oracle(
        class: &ConceptClass,
        set: ConceptSet,
        margin: f64,
        memo: &mut HashMap<ConceptSet, usize>,
    ) -> usize {
        if set.len() <= 1 {
            return 0;
        }
        if let Some(&d) = memo.get(&set) {
            return d;
        }
        let mut splits = std::collections::BTreeSet::new();
        for x in 0..class.domain_size() {
            for step in 0..=200 {
                let a = step as f64 / 200.0;
                let l = set.filter(|c| class.value(c, x) <= a - margin + TOL);
                let r = set.filter(|c| class.value(c, x) >= a + margin - TOL);
                if !l.is_empty() && !r.is_empty() {
                    splits.insert((l, r));
                }
            }
        }
        let best = splits
            .into_iter()
            .map(|(l, r)| {
                1 + sfat_grid_oracle(class, l, margin, memo)
                    .min(sfat_grid_oracle(class, r, margin, memo))
            })
            .max()
            .unwrap_or(0);
        memo.insert(set, best);
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_grid_oracle(c in grid_class()) {
            let all = c.full_set().unwrap();
            for margin in [0.1, 0.2, 0.3] {
                let r = sfat(&c, all, margin).unwrap();
                prop_assert_eq!(r.dimension, sfat_grid_oracle(&c, all, margin, &mut HashMap::new()));
                prop_assert_eq!(r.witness.depth(), r.dimension);
                r.witness.validate(&c, margin).unwrap();
            }
        }

        #[test]
        fn monotone_in_subset_and_margin(c in grid_class(), mask in any::<u64>()) {
            let all = c.full_set().unwrap();
            let sub = ConceptSet(mask & all.0);
            prop_assume!(!sub.is_empty());
            let mut small = SfatOracle::new(&c, 0.1).unwrap();
            let mut large = SfatOracle::new(&c, 0.2).unwrap();
            prop_assert!(small.dim(sub) <= small.dim(all));
            prop_assert!(large.dim(all) <= small.dim(all));
            prop_assert!(fat(&c, 0.1).unwrap() as i32 <= small.dim(all));
        }

        #[test]
        fn deterministic(c in grid_class()) {
            let a = sfat_class(&c, 0.1).unwrap();
            let b = sfat_class(&c, 0.1).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn boolean_agreement(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 1..12)) {
            let c = ConceptClass::from_rows(
                rows.into_iter().map(|r| r.into_iter().map(|b| b as u8 as f64).collect()).collect()
            ).unwrap();
            for margin in [0.25, 0.5] {
                prop_assert_eq!(sfat_class(&c, margin).unwrap().dimension, ldim_oracle(&c).unwrap());
            }
        }
    }
}
