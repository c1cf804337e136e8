//! Arrival schedules: the order in which jobs or edges reach the algorithm.
//!
//! Random-order experiments come in two equivalent flavours. A uniform
//! permutation fixes the order directly; independent uniform arrival times
//! in `[0, 1)` fix it through sorting while also giving each item a
//! timestamp that the tree analyzers bucket into intervals. On top of those
//! two, trees support a bottom-up sweep (leaf edges first, ties shuffled)
//! and a deliberately adversarial sweep that presents edges by round label.

use crate::error::{Error, Result};
use crate::graphbal::Tree;
use rand::seq::SliceRandom;
use rand::Rng;

/// How one trial's items arrive.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalSchedule {
    /// Items listed in arrival order.
    Permutation(Vec<usize>),
    /// Item `i` arrives at `times[i]`; all times are distinct.
    Times(Vec<f64>),
}

impl ArrivalSchedule {
    /// Number of scheduled items.
    pub fn len(&self) -> usize {
        match self {
            ArrivalSchedule::Permutation(order) => order.len(),
            ArrivalSchedule::Times(times) => times.len(),
        }
    }

    /// True when the schedule covers no items.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Arrival order: item ids sorted by when they arrive.
    pub fn order(&self) -> Vec<usize> {
        match self {
            ArrivalSchedule::Permutation(order) => order.clone(),
            ArrivalSchedule::Times(times) => {
                let mut ids: Vec<usize> = (0..times.len()).collect();
                ids.sort_by(|&a, &b| {
                    times[a].partial_cmp(&times[b]).expect("arrival times are finite")
                });
                ids
            }
        }
    }

    /// Arrival timestamps, when this schedule carries them.
    pub fn times(&self) -> Option<&[f64]> {
        match self {
            ArrivalSchedule::Permutation(_) => None,
            ArrivalSchedule::Times(times) => Some(times),
        }
    }
}

/// Uniform random permutation of `count` items.
pub fn sample_permutation<R: Rng>(count: usize, rng: &mut R) -> ArrivalSchedule {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    ArrivalSchedule::Permutation(order)
}

/// Independent uniform arrival times in `[0, 1)`, redrawn until distinct.
///
/// A collision among 64-bit doubles has probability about `n^2 / 2^54` and
/// has never been observed in practice; the redraw loop exists so that
/// downstream sorting and interval bucketing never see a tie.
pub fn sample_arrival_times<R: Rng>(count: usize, rng: &mut R) -> ArrivalSchedule {
    loop {
        let times: Vec<f64> = (0..count).map(|_| rng.gen::<f64>()).collect();
        let mut sorted = times.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
        if sorted.windows(2).all(|w| w[0] < w[1]) {
            return ArrivalSchedule::Times(times);
        }
    }
}

/// Edge order that sweeps a tree from its leaves toward its root.
///
/// Edges are bucketed by height (a leaf edge has height 0) and each bucket
/// is shuffled before the buckets are concatenated in ascending height, so
/// every edge appears after all strictly lower edges but in random relative
/// order within its own level.
pub fn bottom_up_order<R: Rng>(tree: &Tree, rng: &mut R) -> Vec<usize> {
    let edge_count = tree.edge_count();
    let max_height = (0..edge_count).map(|e| tree.edge_height(e)).max().unwrap_or(0);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); max_height + 1];
    for e in 0..edge_count {
        buckets[tree.edge_height(e)].push(e);
    }
    let mut order = Vec::with_capacity(edge_count);
    for mut bucket in buckets {
        bucket.shuffle(rng);
        order.extend(bucket);
    }
    order
}

/// Edge order sorted by round label, the presentation a pairing adversary
/// would choose: all round-1 edges, then round 2, and so on. Ties within a
/// round break by child id so the order is deterministic.
pub fn round_label_order(tree: &Tree) -> Result<Vec<usize>> {
    if tree.labels().is_none() {
        return Err(Error::InvalidInput(
            "round-label order needs a labeled tree".into(),
        ));
    }
    let mut edges: Vec<usize> = (0..tree.edge_count()).collect();
    edges.sort_by_key(|&e| {
        let child = tree.edge_child(e);
        (tree.label(child).expect("labels checked above"), child)
    });
    Ok(edges)
}

/// Uniformly permutes node identities, preserving structure and labels.
///
/// Returns the shuffled tree together with the permutation `perm`, where
/// node `u` of the original tree becomes node `perm[u]`. Analyses that are
/// functions of structure alone are unaffected; per-node reports can be
/// mapped back through `perm`.
pub fn shuffle_node_ids<R: Rng>(tree: &Tree, rng: &mut R) -> (Tree, Vec<usize>) {
    let n = tree.node_count();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);

    let mut parents: Vec<Option<usize>> = vec![None; n];
    for u in 0..n {
        if let Some(p) = tree.parent(u) {
            parents[perm[u]] = Some(perm[p]);
        }
    }
    let labels = tree.labels().map(|original| {
        let mut moved = vec![0usize; n];
        for (u, &label) in original.iter().enumerate() {
            moved[perm[u]] = label;
        }
        moved
    });
    let shuffled = Tree::from_parents(perm[tree.root()], parents, labels)
        .expect("a relabeled tree is still a tree");
    (shuffled, perm)
}
