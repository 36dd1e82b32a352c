//! Continuous-time Galton–Watson genealogies.
//!
//! Every particle lives an `Exp(1)` time and is then replaced by `k` children
//! drawn from the offspring law. Trees are generated depth-first with an
//! explicit stack. Children of one split receive consecutive node ids, and a
//! node id is always larger than its parent's; leaves are numbered in the order
//! the traversal reaches them, so the leaves of any subtree form a contiguous
//! range.

use std::fmt::Write as _;

use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::offspring::OffspringDistribution;
use crate::rng::{stream_rng, Stream};

/// Default cap on the number of nodes of one tree (2^27).
pub const DEFAULT_NODE_BUDGET: u64 = 1 << 27;

/// Default cap on the number of leaves accepted by [`GwTree::overlap_matrix`].
pub const DEFAULT_PAIRWISE_CAP: usize = 4096;

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    parent: u32,
    first_child: u32,
    child_count: u32,
    birth: f64,
    /// End of the edge: the split time, or the horizon for leaves.
    end: f64,
}

/// The genealogy of a Galton–Watson process up to a horizon `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GwTree {
    nodes: Vec<Node>,
    leaves: Vec<u32>,
    horizon: f64,
    seed: u64,
}

impl GwTree {
    /// Samples a tree with the default node budget.
    pub fn sample(dist: &OffspringDistribution, t: f64, seed: u64) -> Result<Self> {
        Self::sample_with_budget(dist, t, seed, DEFAULT_NODE_BUDGET)
    }

    pub fn sample_with_budget(
        dist: &OffspringDistribution,
        t: f64,
        seed: u64,
        node_budget: u64,
    ) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("horizon must be finite and nonnegative, got {t}")));
        }
        let projected = projected_node_count(dist, t);
        if projected > node_budget as f64 {
            return Err(Error::ResourceLimit {
                what: "projected tree nodes",
                requested: projected.min(u64::MAX as f64) as u64,
                budget: node_budget,
            });
        }

        let mut rng = stream_rng(seed, Stream::Tree);
        let mut nodes = vec![Node {
            parent: NO_PARENT,
            first_child: 0,
            child_count: 0,
            birth: 0.0,
            end: t,
        }];
        let mut leaves = Vec::new();
        let mut stack = vec![0u32];

        while let Some(id) = stack.pop() {
            let birth = nodes[id as usize].birth;
            let lifetime: f64 = Exp1.sample(&mut rng);
            let split = birth + lifetime;
            if split >= t {
                leaves.push(id);
                continue;
            }
            let k = dist.sample(&mut rng);
            let first = nodes.len();
            if (first + k) as u64 > node_budget {
                return Err(Error::ResourceLimit {
                    what: "tree nodes",
                    requested: (first + k) as u64,
                    budget: node_budget,
                });
            }
            {
                let node = &mut nodes[id as usize];
                node.end = split;
                node.first_child = first as u32;
                node.child_count = k as u32;
            }
            nodes.extend((0..k).map(|_| Node {
                parent: id,
                first_child: 0,
                child_count: 0,
                birth: split,
                end: t,
            }));
            // Reverse push so the first child is explored first.
            stack.extend((first..first + k).rev().map(|c| c as u32));
        }

        Ok(Self {
            nodes,
            leaves,
            horizon: t,
            seed,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `n(t)`, the number of particles alive at the horizon.
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Node ids of the leaves, indexed by leaf id.
    pub fn leaves(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.leaves.iter().map(|&i| NodeId(i))
    }

    pub fn leaf_node(&self, leaf: usize) -> Result<NodeId> {
        self.leaves
            .get(leaf)
            .map(|&i| NodeId(i))
            .ok_or_else(|| invalid(format!("unknown leaf id {leaf} (tree has {})", self.leaves.len())))
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        let p = self.nodes[node.index()].parent;
        (p != NO_PARENT).then_some(NodeId(p))
    }

    pub fn children(&self, node: NodeId) -> impl ExactSizeIterator<Item = NodeId> {
        let n = &self.nodes[node.index()];
        (n.first_child..n.first_child + n.child_count).map(NodeId)
    }

    pub fn birth_time(&self, node: NodeId) -> f64 {
        self.nodes[node.index()].birth
    }

    /// Split time of an internal node, `None` for a leaf (alive at the horizon).
    pub fn split_time(&self, node: NodeId) -> Option<f64> {
        let n = &self.nodes[node.index()];
        (n.child_count > 0).then_some(n.end)
    }

    /// End of the edge above `node`: its split time, or the horizon for leaves.
    pub fn edge_end(&self, node: NodeId) -> f64 {
        self.nodes[node.index()].end
    }

    pub(crate) fn edge_bounds(&self) -> impl ExactSizeIterator<Item = (u32, f64, f64)> + '_ {
        self.nodes.iter().map(|n| (n.parent, n.birth, n.end))
    }

    pub(crate) fn leaf_indices(&self) -> &[u32] {
        &self.leaves
    }

    /// Split time of the most recent common ancestor of two leaves; the horizon
    /// when `k == l`.
    pub fn overlap(&self, k: usize, l: usize) -> Result<f64> {
        let a = self.leaf_node(k)?;
        let b = self.leaf_node(l)?;
        Ok(self.node_overlap(a, b))
    }

    fn node_overlap(&self, a: NodeId, b: NodeId) -> f64 {
        let (mut a, mut b) = (a.0, b.0);
        // Parents always carry smaller ids, so stepping up from the larger id
        // meets the common ancestor.
        while a != b {
            if a > b {
                a = self.nodes[a as usize].parent;
            } else {
                b = self.nodes[b as usize].parent;
            }
        }
        self.nodes[a as usize].end
    }

    pub fn overlap_matrix(&self) -> Result<OverlapMatrix> {
        self.overlap_matrix_with_cap(DEFAULT_PAIRWISE_CAP)
    }

    /// All pairwise overlaps. Uses the fact that, with leaves in depth-first
    /// order, `q(k, l) = min_{k <= j < l} q(j, j + 1)`.
    pub fn overlap_matrix_with_cap(&self, cap: usize) -> Result<OverlapMatrix> {
        let n = self.leaves.len();
        if n > cap {
            return Err(Error::ResourceLimit {
                what: "leaves for a pairwise overlap matrix (query pairs individually instead)",
                requested: n as u64,
                budget: cap as u64,
            });
        }
        let adjacent: Vec<f64> = self
            .leaves
            .windows(2)
            .map(|w| self.node_overlap(NodeId(w[0]), NodeId(w[1])))
            .collect();
        let mut q = vec![0.0; n * n];
        for k in 0..n {
            q[k * n + k] = self.horizon;
            let mut running = self.horizon;
            for l in k + 1..n {
                running = running.min(adjacent[l - 1]);
                q[k * n + l] = running;
                q[l * n + k] = running;
            }
        }
        Ok(OverlapMatrix {
            n,
            horizon: self.horizon,
            q,
        })
    }

    /// Line-oriented debug dump: `node_id,parent_id,birth,split` with `-` for
    /// the root's parent and for the split time of leaves.
    pub fn dump_text(&self) -> String {
        let mut out = String::from("# node_id,parent_id,birth,split\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = if n.parent == NO_PARENT {
                "-".to_string()
            } else {
                n.parent.to_string()
            };
            let split = if n.child_count > 0 {
                n.end.to_string()
            } else {
                "-".to_string()
            };
            let _ = writeln!(out, "{i},{parent},{},{split}", n.birth);
        }
        out
    }

    /// Lifetimes `end - birth` of internal nodes. Each is an `Exp(1)` draw
    /// conditioned on ending before the horizon; leaf edges are censored.
    pub fn completed_lifetimes(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.child_count > 0)
            .map(|n| n.end - n.birth)
    }
}

/// Expected node count of a tree with horizon `t`: `1 + mean * E[#splits]`,
/// where `E[#splits] = int_0^t E n(s) ds`.
pub fn projected_node_count(dist: &OffspringDistribution, t: f64) -> f64 {
    let growth = dist.mean_children() - 1.0;
    let splits = if growth.abs() < 1e-12 {
        t
    } else {
        (growth * t).exp_m1() / growth
    };
    1.0 + dist.mean_children() * splits
}

/// Symmetric matrix of genealogical overlaps between leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    n: usize,
    horizon: f64,
    q: Vec<f64>,
}

impl OverlapMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.q[k * self.n + l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.q[k * self.n..(k + 1) * self.n]
    }

    /// Checks `q(k, l) >= min(q(k, m), q(m, l))` on every triple.
    pub fn is_ultrametric(&self) -> bool {
        let n = self.n;
        (0..n).all(|k| {
            (0..n).all(|l| (0..n).all(|m| self.get(k, l) >= self.get(k, m).min(self.get(m, l))))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::MeanPolicy;

    #[test]
    fn single_lineage_never_branches() {
        let tree = GwTree::sample(&OffspringDistribution::single_lineage(), 5.0, 3).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        let m = tree.overlap_matrix().unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), 5.0);
    }

    #[test]
    fn zero_horizon_is_root_only() {
        let tree = GwTree::sample(&OffspringDistribution::binary(), 0.0, 11).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.leaf_node(0).unwrap(), tree.root());
        assert_eq!(tree.split_time(tree.root()), None);
    }

    #[test]
    fn structural_invariants() {
        let dist = OffspringDistribution::from_pairs(&[(1, 0.2), (2, 0.6), (3, 0.2)], MeanPolicy::Normalized).unwrap();
        for seed in 0..20 {
            let tree = GwTree::sample(&dist, 3.0, seed).unwrap();
            assert_eq!(tree.birth_time(tree.root()), 0.0);
            assert!(tree.parent(tree.root()).is_none());
            let mut leaf_count = 0;
            for i in 0..tree.node_count() as u32 {
                let id = NodeId(i);
                if i > 0 {
                    assert!(tree.parent(id).is_some());
                }
                match tree.split_time(id) {
                    Some(s) => {
                        assert!(tree.birth_time(id) < s && s <= 3.0);
                        for c in tree.children(id) {
                            assert_eq!(tree.birth_time(c), s);
                            assert_eq!(tree.parent(c), Some(id));
                        }
                    }
                    None => leaf_count += 1,
                }
            }
            assert_eq!(leaf_count, tree.leaf_count());
        }
    }

    #[test]
    fn siblings_of_the_root_overlap_at_first_split() {
        let tree = (0..200)
            .map(|s| GwTree::sample(&OffspringDistribution::binary(), 1.0, s).unwrap())
            .find(|t| t.leaf_count() == 2)
            .expect("some seed yields exactly one split");
        let s = tree.split_time(tree.root()).unwrap();
        assert_eq!(tree.overlap(0, 1).unwrap(), s);
        assert_eq!(tree.overlap(1, 0).unwrap(), s);
        assert_eq!(tree.overlap(0, 0).unwrap(), 1.0);
        let m = tree.overlap_matrix().unwrap();
        assert_eq!(m.get(0, 1), s);
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn unknown_leaf_is_an_argument_error() {
        let tree = GwTree::sample(&OffspringDistribution::binary(), 1.0, 5).unwrap();
        let n = tree.leaf_count();
        assert!(matches!(tree.overlap(0, n), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let dist = OffspringDistribution::binary();
        let err = GwTree::sample(&dist, 30.0, 1).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
        let err = GwTree::sample_with_budget(&dist, 6.0, 1, 50).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
    }

    #[test]
    fn pairwise_cap_is_enforced() {
        let tree = GwTree::sample(&OffspringDistribution::binary(), 4.0, 9).unwrap();
        assert!(tree.leaf_count() > 2);
        assert!(matches!(
            tree.overlap_matrix_with_cap(2),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn dump_has_one_line_per_node() {
        let tree = GwTree::sample(&OffspringDistribution::binary(), 2.0, 2).unwrap();
        let dump = tree.dump_text();
        assert_eq!(dump.lines().count(), tree.node_count() + 1);
        assert!(dump.lines().nth(1).unwrap().starts_with("0,-,0,"));
    }
}
