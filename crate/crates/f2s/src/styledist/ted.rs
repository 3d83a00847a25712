//! Exact ordered tree edit distance with unit costs.
//!
//! [`tree_edit_distance`] implements the classic dynamic program over
//! keyroots and forest distances. Node kinds compare for equality; matching
//! kinds cost 0, a relabel costs 1, and every insertion or deletion costs 1.
//!
//! [`brute_force_tree_edit_distance`] is an independent reference that
//! enumerates valid tree mappings directly (order-preserving,
//! ancestor-consistent, one-to-one) with branch-and-bound pruning. It shares
//! no recurrence with the dynamic program and is exponential — use it only to
//! validate small trees (≤ ~12 nodes).

use std::collections::HashMap;

use super::{StyleError, SyntaxTree};

/// Trees above this node count are rejected by default: the dynamic program
/// keeps an |T1|×|T2| distance table, so unbounded inputs could exhaust
/// memory. Callers may raise the budget explicitly.
pub const DEFAULT_NODE_BUDGET: usize = 20_000;

/// Postorder view of a tree: interned labels, leftmost-leaf indices,
/// keyroots.
struct PostOrder {
    labels: Vec<u32>,
    /// Postorder index of the leftmost leaf in each node's subtree.
    lld: Vec<usize>,
    /// Nodes with no matching later node sharing their leftmost leaf.
    keyroots: Vec<usize>,
}

impl PostOrder {
    fn build(tree: &SyntaxTree, interner: &mut HashMap<String, u32>) -> Self {
        let mut labels = Vec::new();
        let mut lld = Vec::new();
        walk(tree, interner, &mut labels, &mut lld);
        // A keyroot is the highest node for its leftmost leaf: collect the
        // maximum postorder index per lld value.
        let mut highest: HashMap<usize, usize> = HashMap::new();
        for (idx, &leaf) in lld.iter().enumerate() {
            highest.insert(leaf, idx); // postorder ascends, so last write wins
        }
        let mut keyroots: Vec<usize> = highest.into_values().collect();
        keyroots.sort_unstable();
        Self {
            labels,
            lld,
            keyroots,
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }
}

fn walk(
    node: &SyntaxTree,
    interner: &mut HashMap<String, u32>,
    labels: &mut Vec<u32>,
    lld: &mut Vec<usize>,
) -> usize {
    let mut first_child_idx = None;
    for child in &node.children {
        let idx = walk(child, interner, labels, lld);
        first_child_idx.get_or_insert(idx);
    }
    let idx = labels.len();
    let next_label = interner.len() as u32;
    let label = *interner
        .entry(node.kind.clone())
        .or_insert(next_label);
    labels.push(label);
    lld.push(first_child_idx.map_or(idx, |c| lld[c]));
    idx
}

/// Exact ordered tree edit distance, rejecting trees above
/// [`DEFAULT_NODE_BUDGET`] nodes.
pub fn tree_edit_distance(t1: &SyntaxTree, t2: &SyntaxTree) -> Result<u64, StyleError> {
    tree_edit_distance_with_budget(t1, t2, DEFAULT_NODE_BUDGET)
}

/// Exact ordered tree edit distance with an explicit per-tree node budget.
pub fn tree_edit_distance_with_budget(
    t1: &SyntaxTree,
    t2: &SyntaxTree,
    budget: usize,
) -> Result<u64, StyleError> {
    for tree in [t1, t2] {
        let nodes = tree.node_count();
        if nodes > budget {
            return Err(StyleError::TreeTooLarge { nodes, budget });
        }
    }
    let mut interner = HashMap::new();
    let a = PostOrder::build(t1, &mut interner);
    let b = PostOrder::build(t2, &mut interner);
    let (n1, n2) = (a.len(), b.len());

    // td[i][j] = distance between the subtrees rooted at postorder i and j.
    let mut td = vec![0u32; n1 * n2];
    // Forest-distance scratch, reallocated per keyroot pair at the needed size.
    for &x in &a.keyroots {
        let lx = a.lld[x];
        let rows = x - lx + 2;
        for &y in &b.keyroots {
            let ly = b.lld[y];
            let cols = y - ly + 2;
            let mut fd = vec![0u32; rows * cols];
            let at = |dx: usize, dy: usize| dx * cols + dy;
            for dx in 1..rows {
                fd[at(dx, 0)] = fd[at(dx - 1, 0)] + 1;
            }
            for dy in 1..cols {
                fd[at(0, dy)] = fd[at(0, dy - 1)] + 1;
            }
            for i in lx..=x {
                let dx = i - lx + 1;
                for j in ly..=y {
                    let dy = j - ly + 1;
                    let delete = fd[at(dx - 1, dy)] + 1;
                    let insert = fd[at(dx, dy - 1)] + 1;
                    let value = if a.lld[i] == lx && b.lld[j] == ly {
                        // Both prefixes end in whole subtrees: tree-vs-tree case.
                        let relabel = u32::from(a.labels[i] != b.labels[j]);
                        let replace = fd[at(dx - 1, dy - 1)] + relabel;
                        let best = delete.min(insert).min(replace);
                        td[i * n2 + j] = best;
                        best
                    } else {
                        // Splice in the already-computed subtree distance.
                        let fx = a.lld[i] - lx;
                        let fy = b.lld[j] - ly;
                        let replace = fd[at(fx, fy)] + td[i * n2 + j];
                        delete.min(insert).min(replace)
                    };
                    fd[at(dx, dy)] = value;
                }
            }
        }
    }
    Ok(u64::from(td[(n1 - 1) * n2 + (n2 - 1)]))
}

/// Flat postorder view used by the brute-force reference: labels plus a
/// descendant bitmask per node.
struct FlatTree {
    labels: Vec<u32>,
    /// descendants[i] has bit d set iff postorder node d is a proper
    /// descendant of node i.
    descendants: Vec<u64>,
}

impl FlatTree {
    fn build(tree: &SyntaxTree, interner: &mut HashMap<String, u32>) -> Self {
        let mut flat = Self {
            labels: Vec::new(),
            descendants: Vec::new(),
        };
        flat.walk(tree, interner);
        flat
    }

    fn walk(&mut self, node: &SyntaxTree, interner: &mut HashMap<String, u32>) -> u64 {
        let mut mask = 0u64;
        for child in &node.children {
            let child_idx = self.walk(child, interner);
            mask |= self.descendants[child_idx as usize] | (1u64 << child_idx);
        }
        let idx = self.labels.len() as u64;
        let next_label = interner.len() as u32;
        let label = *interner.entry(node.kind.clone()).or_insert(next_label);
        self.labels.push(label);
        self.descendants.push(mask);
        idx
    }
}

/// Reference tree edit distance by exhaustive mapping search.
///
/// Enumerates every one-to-one node mapping that preserves postorder and the
/// ancestor relation; the cheapest such mapping's cost (unmapped nodes on
/// either side plus label mismatches) equals the edit distance. Exponential;
/// panics on trees larger than 64 nodes.
#[must_use]
pub fn brute_force_tree_edit_distance(t1: &SyntaxTree, t2: &SyntaxTree) -> u64 {
    let mut interner = HashMap::new();
    let a = FlatTree::build(t1, &mut interner);
    let b = FlatTree::build(t2, &mut interner);
    assert!(
        a.labels.len() <= 64 && b.labels.len() <= 64,
        "brute-force reference is for small trees only"
    );
    let mut best = (a.labels.len() + b.labels.len()) as u64;
    let mut pairs = Vec::new();
    search(&a, &b, 0, 0, 0, &mut pairs, &mut best);
    best
}

fn search(
    a: &FlatTree,
    b: &FlatTree,
    i: usize,
    j: usize,
    cost: u64,
    pairs: &mut Vec<(usize, usize)>,
    best: &mut u64,
) {
    let (n1, n2) = (a.labels.len(), b.labels.len());
    // Admissible lower bound: the side with more unprocessed nodes must
    // delete or insert at least the difference.
    let bound = (n1 - i).abs_diff(n2 - j) as u64;
    if cost + bound >= *best {
        return;
    }
    if i == n1 && j == n2 {
        *best = cost;
        return;
    }
    // Try matching first so the bound tightens early.
    if i < n1 && j < n2 {
        // Postorder already guarantees order preservation; check that the
        // ancestor relation to every previous pair agrees. Earlier nodes can
        // only be descendants (postorder lists ancestors after descendants).
        let consistent = pairs.iter().all(|&(pa, pb)| {
            (a.descendants[i] >> pa) & 1 == (b.descendants[j] >> pb) & 1
        });
        if consistent {
            let relabel = u64::from(a.labels[i] != b.labels[j]);
            pairs.push((i, j));
            search(a, b, i + 1, j + 1, cost + relabel, pairs, best);
            pairs.pop();
        }
    }
    if i < n1 {
        search(a, b, i + 1, j, cost + 1, pairs, best);
    }
    if j < n2 {
        search(a, b, i, j + 1, cost + 1, pairs, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn leaf(kind: &str) -> SyntaxTree {
        SyntaxTree::leaf(kind)
    }

    fn node(kind: &str, children: Vec<SyntaxTree>) -> SyntaxTree {
        SyntaxTree::node(kind, children)
    }

    /// Random ordered tree with `nodes` nodes over a small kind alphabet.
    pub(crate) fn random_tree(rng: &mut ChaCha8Rng, nodes: usize) -> SyntaxTree {
        const KINDS: [&str; 4] = ["a", "b", "c", "d"];
        let mut parents = vec![usize::MAX; nodes];
        for (idx, parent) in parents.iter_mut().enumerate().skip(1) {
            *parent = rng.gen_range(0..idx);
        }
        fn assemble(
            idx: usize,
            parents: &[usize],
            kinds: &[&str],
            rng_kinds: &[usize],
        ) -> SyntaxTree {
            let children = (idx + 1..parents.len())
                .filter(|&c| parents[c] == idx)
                .map(|c| assemble(c, parents, kinds, rng_kinds))
                .collect();
            SyntaxTree::node(kinds[rng_kinds[idx]], children)
        }
        let rng_kinds: Vec<usize> = (0..nodes).map(|_| rng.gen_range(0..KINDS.len())).collect();
        assemble(0, &parents, &KINDS, &rng_kinds)
    }

    #[test]
    fn identical_trees_have_zero_distance() {
        let t = node("a", vec![leaf("b"), node("c", vec![leaf("d")])]);
        assert_eq!(tree_edit_distance(&t, &t).unwrap(), 0);
    }

    #[test]
    fn single_deletion() {
        let t1 = node("a", vec![leaf("b"), leaf("c")]);
        let t2 = node("a", vec![leaf("b")]);
        assert_eq!(tree_edit_distance(&t1, &t2).unwrap(), 1);
        assert_eq!(tree_edit_distance(&t2, &t1).unwrap(), 1);
    }

    #[test]
    fn classic_keyroot_example() {
        // f(d(a, c(b)), e) vs f(c(d(a, b)), e): distance 2 — the standard
        // worked example for this algorithm family.
        let t1 = node(
            "f",
            vec![
                node("d", vec![leaf("a"), node("c", vec![leaf("b")])]),
                leaf("e"),
            ],
        );
        let t2 = node(
            "f",
            vec![
                node("c", vec![node("d", vec![leaf("a"), leaf("b")])]),
                leaf("e"),
            ],
        );
        assert_eq!(tree_edit_distance(&t1, &t2).unwrap(), 2);
        assert_eq!(brute_force_tree_edit_distance(&t1, &t2), 2);
    }

    #[test]
    fn pure_relabel_costs_one_per_mismatch() {
        let t1 = node("a", vec![leaf("b"), leaf("c")]);
        let t2 = node("x", vec![leaf("b"), leaf("y")]);
        assert_eq!(tree_edit_distance(&t1, &t2).unwrap(), 2);
    }

    #[test]
    fn budget_guard_rejects_oversized_trees() {
        let wide = node("root", (0..40).map(|_| leaf("x")).collect());
        let err = tree_edit_distance_with_budget(&wide, &wide, 10).unwrap_err();
        assert!(matches!(
            err,
            StyleError::TreeTooLarge { nodes: 41, budget: 10 }
        ));
        assert!(tree_edit_distance_with_budget(&wide, &wide, 41).is_ok());
    }

    #[test]
    fn matches_brute_force_on_random_small_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for round in 0..150 {
            let (s1, s2) = (rng.gen_range(1..=10), rng.gen_range(1..=10));
            let t1 = random_tree(&mut rng, s1);
            let t2 = random_tree(&mut rng, s2);
            let fast = tree_edit_distance(&t1, &t2).unwrap();
            let reference = brute_force_tree_edit_distance(&t1, &t2);
            assert_eq!(
                fast, reference,
                "round {round}: dynamic program {fast} != mapping search {reference}\n\
                 t1: {t1:?}\n t2: {t2:?}"
            );
        }
    }

    #[test]
    fn distance_is_symmetric_and_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..60 {
            let (s1, s2, s3) = (
                rng.gen_range(1..=12),
                rng.gen_range(1..=12),
                rng.gen_range(1..=12),
            );
            let t1 = random_tree(&mut rng, s1);
            let t2 = random_tree(&mut rng, s2);
            let t3 = random_tree(&mut rng, s3);
            let d12 = tree_edit_distance(&t1, &t2).unwrap();
            let d21 = tree_edit_distance(&t2, &t1).unwrap();
            assert_eq!(d12, d21, "symmetry");
            let d13 = tree_edit_distance(&t1, &t3).unwrap();
            let d23 = tree_edit_distance(&t2, &t3).unwrap();
            assert!(d13 <= d12 + d23, "triangle: {d13} > {d12} + {d23}");
        }
    }

    #[test]
    fn deep_chains_and_wide_stars() {
        let mut chain = leaf("k");
        for _ in 0..30 {
            chain = node("k", vec![chain]);
        }
        let star = node("k", (0..30).map(|_| leaf("k")).collect());
        // Same node count and labels, maximally different shape: the chain's
        // 30 nested nodes must be unwound. Both directions agree.
        let d = tree_edit_distance(&chain, &star).unwrap();
        assert_eq!(d, tree_edit_distance(&star, &chain).unwrap());
        assert!(d > 0 && d <= 60, "got {d}");
    }
}
