//! Structural analyzers for tree trials.
//!
//! When edges arrive at independent uniform times, splitting `[0, 1]` into
//! `k` equal intervals ties arrival time to tree level: a node of height `h`
//! whose children mostly arrive in the `h`-th interval sees those edges
//! after its own subtrees have already filled up. The analyzers here detect
//! that structure trial by trial: which nodes are bad (enough child edges in
//! their own interval), whether a full bad subtree can be carved out, which
//! nodes ended up fully loaded, and whether a given edge arrived in the
//! unlucky relative order that forces the greedy orienter's hand.

use crate::error::{Error, Result};
use crate::graphbal::Tree;
use crate::model::check_order;

/// Index of the interval `((h-1)/k, h/k]` containing `t`, computed as
/// `ceil(t * k)`. Boundary points belong to the lower interval; `t = 0`
/// yields 0, which matches no interval.
pub fn interval_index(t: f64, k: usize) -> usize {
    (t * k as f64).ceil() as usize
}

/// Per-node badness flags for one draw of arrival times.
#[derive(Clone, Debug)]
pub struct BadNodes {
    /// `bad[u]` is true when node `u` is internal and at least `k^2` of its
    /// child edges arrived in the interval matching `u`'s height.
    pub bad: Vec<bool>,
    /// Number of internal (non-leaf) nodes.
    pub internal_nodes: usize,
    /// Number of internal nodes flagged bad.
    pub bad_internal_nodes: usize,
}

impl BadNodes {
    /// Fraction of internal nodes that are bad. A tree with no internal
    /// nodes (a single root) counts as vacuously all bad.
    pub fn fraction(&self) -> f64 {
        if self.internal_nodes == 0 {
            1.0
        } else {
            self.bad_internal_nodes as f64 / self.internal_nodes as f64
        }
    }
}

fn check_analysis_input(tree: &Tree, times: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("interval count k must be positive".into()));
    }
    if times.len() != tree.edge_count() {
        return Err(Error::InvalidInput(format!(
            "got {} arrival times for a tree with {} edges",
            times.len(),
            tree.edge_count()
        )));
    }
    Ok(())
}

/// Counts child edges of `u` whose times fall in interval `h`.
fn children_in_interval(tree: &Tree, times: &[f64], k: usize, u: usize, h: usize) -> usize {
    tree.children(u)
        .iter()
        .filter(|&&c| interval_index(times[tree.edge_of(c)], k) == h)
        .count()
}

/// Flags every internal node whose own interval received at least `k^2` of
/// its child edges. `times[e]` is the arrival time of edge `e`.
pub fn detect_bad_nodes(tree: &Tree, times: &[f64], k: usize) -> Result<BadNodes> {
    check_analysis_input(tree, times, k)?;
    let threshold = k * k;
    let mut bad = vec![false; tree.node_count()];
    let mut internal_nodes = 0;
    let mut bad_internal_nodes = 0;
    for u in 0..tree.node_count() {
        if tree.is_leaf(u) {
            continue;
        }
        internal_nodes += 1;
        if children_in_interval(tree, times, k, u, tree.height(u)) >= threshold {
            bad[u] = true;
            bad_internal_nodes += 1;
        }
    }
    Ok(BadNodes { bad, internal_nodes, bad_internal_nodes })
}

/// A full `k^2`-ary subtree of bad nodes, witnessing a lower bound.
///
/// Internal witness nodes carry exactly `k^2` children; leaves carry none.
#[derive(Clone, Debug)]
pub struct SubtreeWitness {
    /// Tree node at this position of the witness.
    pub node: usize,
    /// Witness subtrees rooted at children of `node`.
    pub children: Vec<SubtreeWitness>,
}

impl SubtreeWitness {
    /// Total number of nodes in the witness.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(SubtreeWitness::size).sum::<usize>()
    }
}

/// Searches for a full `k^2`-ary witness of height `k` rooted at the root.
///
/// The search walks levels `k, k-1, ..., 0` downward from the root. A node
/// qualifies at level 0 outright; at level `h` it must be bad for interval
/// `h` and have `k^2` children whose edges arrived in interval `h` and which
/// themselves qualify at level `h - 1`. Children are scanned in id order and
/// the first `k^2` qualifiers win. On the intended fat trees a node's level
/// equals its height, so every internal witness node is also flagged by
/// [`detect_bad_nodes`].
pub fn find_bad_subtree(tree: &Tree, times: &[f64], k: usize) -> Result<Option<SubtreeWitness>> {
    check_analysis_input(tree, times, k)?;
    Ok(qualify(tree, times, k, tree.root(), k))
}

fn qualify(tree: &Tree, times: &[f64], k: usize, node: usize, level: usize) -> Option<SubtreeWitness> {
    if level == 0 {
        return Some(SubtreeWitness { node, children: Vec::new() });
    }
    let needed = k * k;
    if children_in_interval(tree, times, k, node, level) < needed {
        return None;
    }
    let mut picked = Vec::with_capacity(needed);
    for &child in tree.children(node) {
        if interval_index(times[tree.edge_of(child)], k) != level {
            continue;
        }
        if let Some(witness) = qualify(tree, times, k, child, level - 1) {
            picked.push(witness);
            if picked.len() == needed {
                return Some(SubtreeWitness { node, children: picked });
            }
        }
    }
    None
}

/// Independently re-checks a witness: full `k^2`-ary shape of height `k`,
/// every internal witness node bad for its level, every witness edge timed
/// in its parent's interval, and no node used twice.
pub fn validate_bad_subtree(
    tree: &Tree,
    times: &[f64],
    k: usize,
    witness: &SubtreeWitness,
) -> bool {
    if check_analysis_input(tree, times, k).is_err() || witness.node != tree.root() {
        return false;
    }
    let mut used = std::collections::HashSet::new();
    validate_level(tree, times, k, witness, k, &mut used)
}

fn validate_level(
    tree: &Tree,
    times: &[f64],
    k: usize,
    witness: &SubtreeWitness,
    level: usize,
    used: &mut std::collections::HashSet<usize>,
) -> bool {
    if !used.insert(witness.node) {
        return false;
    }
    if level == 0 {
        return witness.children.is_empty();
    }
    if witness.children.len() != k * k {
        return false;
    }
    if children_in_interval(tree, times, k, witness.node, level) < k * k {
        return false;
    }
    witness.children.iter().all(|child| {
        tree.parent(child.node) == Some(witness.node)
            && interval_index(times[tree.edge_of(child.node)], k) == level
            && validate_level(tree, times, k, child, level - 1, used)
    })
}

/// Flags nodes whose in-degree reached their height.
///
/// A leaf is trivially fully loaded (height 0). The root of a height-`k`
/// tree is fully loaded only when `k` edges point at it, which forces
/// makespan `k` on the corresponding scheduling instance.
pub fn check_fully_loaded(tree: &Tree, in_degrees: &[usize]) -> Result<Vec<bool>> {
    if in_degrees.len() != tree.node_count() {
        return Err(Error::InvalidInput(format!(
            "got {} in-degrees for a tree with {} nodes",
            in_degrees.len(),
            tree.node_count()
        )));
    }
    Ok((0..tree.node_count()).map(|u| in_degrees[u] >= tree.height(u)).collect())
}

/// Positions of each edge within an arrival order.
fn ranks_of(order: &[usize], edge_count: usize) -> Result<Vec<usize>> {
    check_order(order, edge_count)?;
    let mut rank = vec![0usize; edge_count];
    for (position, &edge) in order.iter().enumerate() {
        rank[edge] = position;
    }
    Ok(rank)
}

/// Core badness test against precomputed ranks. Assumes a labeled tree and
/// a valid edge index.
fn bad_with_ranks(tree: &Tree, rank: &[usize], edge: usize) -> bool {
    let (parent, child) = tree.edge_endpoints(edge);
    let my_rank = rank[edge];
    let my_label = tree.label(child).expect("caller checked labels");
    if parent != tree.root() && rank[tree.edge_of(parent)] <= my_rank {
        return false;
    }
    tree.children(parent)
        .iter()
        .filter(|&&sibling| sibling != child)
        .filter(|&&sibling| tree.label(sibling).expect("caller checked labels") >= my_label)
        .all(|&sibling| rank[tree.edge_of(sibling)] > my_rank)
}

/// Tests whether `edge` arrived badly: before its parent's own edge and
/// before every sibling edge of equal or larger label.
///
/// An edge into the root has no parent edge, so only the sibling clause
/// applies there. Both clauses holding means the greedy orienter meets
/// `edge` while the full subtree below it is already in place and no
/// heavier sibling has softened the parent's side.
pub fn is_bad_permutation(tree: &Tree, order: &[usize], edge: usize) -> Result<bool> {
    if tree.labels().is_none() {
        return Err(Error::InvalidInput("bad-permutation test needs a labeled tree".into()));
    }
    if edge >= tree.edge_count() {
        return Err(Error::InvalidInput(format!(
            "edge {edge} is not in a tree with {} edges",
            tree.edge_count()
        )));
    }
    let rank = ranks_of(order, tree.edge_count())?;
    Ok(bad_with_ranks(tree, &rank, edge))
}

/// Per-label badness of the first root edge, with a phantom parent edge.
///
/// The root is the one node without a parent edge, so its children face a
/// weaker test than everyone else's. To put them on equal footing the
/// analyzer inserts a phantom parent edge at a uniform slot among the
/// `edge_count + 1` gaps of the order; a root edge then also has to precede
/// the phantom. For each label `d` below the root's own label, entry `d`
/// reports whether the first-arriving root child edge with label `d` is bad
/// under that extended test.
pub fn bad_permutation_by_label(
    tree: &Tree,
    order: &[usize],
    phantom_slot: usize,
) -> Result<Vec<bool>> {
    let labels_present = tree.labels().is_some();
    if !labels_present {
        return Err(Error::InvalidInput("bad-permutation analyzer needs a labeled tree".into()));
    }
    if phantom_slot > tree.edge_count() {
        return Err(Error::InvalidInput(format!(
            "phantom slot {phantom_slot} exceeds the {} gaps of the order",
            tree.edge_count() + 1
        )));
    }
    let rank = ranks_of(order, tree.edge_count())?;
    let root = tree.root();
    let root_label = tree.label(root).expect("labels checked above");
    let mut flags = vec![false; root_label];
    for d in 0..root_label {
        let first = tree
            .children(root)
            .iter()
            .filter(|&&child| tree.label(child) == Some(d))
            .map(|&child| tree.edge_of(child))
            .min_by_key(|&edge| rank[edge]);
        if let Some(edge) = first {
            flags[d] = rank[edge] < phantom_slot && bad_with_ranks(tree, &rank, edge);
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_fat_tree, gen_full_tree, gen_recursive_tree};
    use crate::sim::rng::{stream, stream_rng};
    use crate::sim::schedule::{sample_arrival_times, sample_permutation};
    use rand::Rng;

    #[test]
    fn interval_indices_put_boundaries_low() {
        assert_eq!(interval_index(0.0, 2), 0);
        assert_eq!(interval_index(0.3, 2), 1);
        assert_eq!(interval_index(0.5, 2), 1);
        assert_eq!(interval_index(0.51, 2), 2);
        assert_eq!(interval_index(1.0, 2), 2);
        assert_eq!(interval_index(0.34, 3), 2);
        assert_eq!(interval_index(1.0 / 3.0, 3), 1);
    }

    /// Star with one root and `leaves` children; edge `i` leads to child `i`.
    fn star(leaves: usize) -> Tree {
        let mut parents = vec![Some(leaves); leaves];
        parents.push(None);
        Tree::from_parents(leaves, parents, None).unwrap()
    }

    #[test]
    fn a_height_one_node_needs_four_early_edges_when_k_is_two() {
        let tree = star(5);
        let bad = detect_bad_nodes(&tree, &[0.1, 0.2, 0.3, 0.45, 0.9], 2).unwrap();
        assert!(bad.bad[5], "four of five edges in (0, 0.5] reach the threshold of 4");
        assert_eq!(bad.internal_nodes, 1);
        assert_eq!(bad.bad_internal_nodes, 1);
        assert_eq!(bad.fraction(), 1.0);

        let bad = detect_bad_nodes(&tree, &[0.1, 0.2, 0.3, 0.55, 0.9], 2).unwrap();
        assert!(!bad.bad[5], "three early edges fall short of 4");
        assert_eq!(bad.fraction(), 0.0);
    }

    #[test]
    fn bad_flags_match_a_direct_recount() {
        let tree = gen_full_tree(5, 3, false).unwrap();
        let mut rng = stream_rng(11, 0, stream::ORDER);
        let times: Vec<f64> = (0..tree.edge_count()).map(|_| rng.gen()).collect();
        let k = 3usize;
        let report = detect_bad_nodes(&tree, &times, k).unwrap();
        for u in 0..tree.node_count() {
            if tree.is_leaf(u) {
                assert!(!report.bad[u]);
                continue;
            }
            let h = tree.height(u);
            let lo = (h as f64 - 1.0) / k as f64;
            let hi = h as f64 / k as f64;
            let count = tree
                .children(u)
                .iter()
                .filter(|&&c| {
                    let t = times[tree.edge_of(c)];
                    t > lo && t <= hi
                })
                .count();
            assert_eq!(report.bad[u], count >= k * k, "node {u} at height {h}");
        }
    }

    #[test]
    fn singleton_trees_are_vacuously_bad() {
        let tree = Tree::from_parents(0, vec![None], None).unwrap();
        let report = detect_bad_nodes(&tree, &[], 2).unwrap();
        assert_eq!(report.internal_nodes, 0);
        assert_eq!(report.fraction(), 1.0);
    }

    #[test]
    fn analysis_rejects_bad_input() {
        let tree = star(3);
        assert!(detect_bad_nodes(&tree, &[0.5, 0.5], 2).is_err());
        assert!(detect_bad_nodes(&tree, &[0.5; 3], 0).is_err());
        assert!(find_bad_subtree(&tree, &[0.5], 2).is_err());
        assert!(check_fully_loaded(&tree, &[0, 0]).is_err());
    }

    /// Times that make every node of a full 4-ary depth-2 tree bad for k=2:
    /// edges into height-1 nodes get 0.75 (interval 2), edges into leaves
    /// get 0.25 (interval 1).
    fn all_bad_times(tree: &Tree) -> Vec<f64> {
        (0..tree.edge_count())
            .map(|e| if tree.edge_height(e) == 0 { 0.25 } else { 0.75 })
            .collect()
    }

    #[test]
    fn a_fully_bad_tree_yields_a_witness() {
        let tree = gen_full_tree(4, 2, false).unwrap();
        let times = all_bad_times(&tree);
        let report = detect_bad_nodes(&tree, &times, 2).unwrap();
        assert_eq!(report.fraction(), 1.0);
        let witness = find_bad_subtree(&tree, &times, 2).unwrap().expect("witness");
        assert_eq!(witness.size(), 21, "1 + 4 + 16 nodes");
        assert!(validate_bad_subtree(&tree, &times, 2, &witness));
    }

    #[test]
    fn a_quiet_root_yields_no_witness() {
        let tree = gen_full_tree(4, 2, false).unwrap();
        let mut times = all_bad_times(&tree);
        for e in 0..tree.edge_count() {
            if tree.edge_height(e) == 1 {
                times[e] = 0.25;
            }
        }
        assert!(find_bad_subtree(&tree, &times, 2).unwrap().is_none());
    }

    #[test]
    fn the_validator_rejects_tampered_witnesses() {
        let tree = gen_full_tree(4, 2, false).unwrap();
        let times = all_bad_times(&tree);
        let witness = find_bad_subtree(&tree, &times, 2).unwrap().unwrap();

        let mut pruned = witness.clone();
        pruned.children.pop();
        assert!(!validate_bad_subtree(&tree, &times, 2, &pruned));

        let mut doubled = witness.clone();
        doubled.children[0] = doubled.children[1].clone();
        assert!(!validate_bad_subtree(&tree, &times, 2, &doubled));

        let mut rerooted = witness;
        rerooted.node = 1;
        assert!(!validate_bad_subtree(&tree, &times, 2, &rerooted));
    }

    #[test]
    fn random_times_usually_produce_a_witness_on_fat_trees() {
        let tree = gen_fat_tree(2, false).unwrap();
        let mut found = 0;
        for trial in 0..50 {
            let mut rng = stream_rng(12, trial, stream::ORDER);
            let schedule = sample_arrival_times(tree.edge_count(), &mut rng);
            let times = schedule.times().unwrap();
            if let Some(witness) = find_bad_subtree(&tree, times, 2).unwrap() {
                found += 1;
                assert!(validate_bad_subtree(&tree, times, 2, &witness));
                let flags = detect_bad_nodes(&tree, times, 2).unwrap();
                assert!(internal_witness_nodes_are_bad(&witness, &flags.bad, 2));
            }
        }
        assert!(found >= 35, "witness found in only {found} of 50 trials");
    }

    fn internal_witness_nodes_are_bad(witness: &SubtreeWitness, bad: &[bool], level: usize) -> bool {
        if level == 0 {
            return true;
        }
        bad[witness.node]
            && witness
                .children
                .iter()
                .all(|c| internal_witness_nodes_are_bad(c, bad, level - 1))
    }

    #[test]
    fn full_loading_compares_in_degree_to_height() {
        let tree = gen_full_tree(2, 2, false).unwrap();
        // Leaves are trivially loaded; the root (height 2) needs 2.
        let loaded = check_fully_loaded(&tree, &[1, 1, 0, 0, 0, 0, 0]).unwrap();
        assert!(!loaded[0], "root with in-degree 1 is not loaded at height 2");
        assert!(loaded[1], "height-1 node with in-degree 1 is loaded");
        assert!(!loaded[2]);
        assert!(loaded[3] && loaded[4] && loaded[5] && loaded[6], "leaves are trivially loaded");

        let loaded = check_fully_loaded(&tree, &[2, 1, 1, 0, 0, 0, 0]).unwrap();
        assert!(loaded.iter().all(|&b| b));
    }

    /// Labeled star: root 0, child 1 labeled 0, children 2 and 3 labeled 1.
    fn labeled_star() -> Tree {
        Tree::from_parents(
            0,
            vec![None, Some(0), Some(0), Some(0)],
            Some(vec![2, 0, 1, 1]),
        )
        .unwrap()
    }

    #[test]
    fn badness_tracks_parent_and_heavy_siblings() {
        // Path 2 -> 1 -> 0 with labels descending from the root.
        let path = Tree::from_parents(2, vec![Some(1), Some(2), None], Some(vec![0, 1, 2])).unwrap();
        // Edge 0 = (1, 0), edge 1 = (2, 1).
        assert!(is_bad_permutation(&path, &[0, 1], 0).unwrap(), "first edge is always bad");
        assert!(!is_bad_permutation(&path, &[1, 0], 0).unwrap(), "parent edge arrived first");
        assert!(is_bad_permutation(&path, &[1, 0], 1).unwrap(), "root edges skip the parent clause");

        let star = labeled_star();
        // Edges: 0 -> child 1 (label 0), 1 -> child 2 (label 1), 2 -> child 3 (label 1).
        assert!(is_bad_permutation(&star, &[0, 1, 2], 0).unwrap());
        assert!(
            !is_bad_permutation(&star, &[1, 0, 2], 0).unwrap(),
            "a heavier sibling arrived earlier"
        );
        assert!(
            is_bad_permutation(&star, &[1, 2, 0], 1).unwrap(),
            "equal-label sibling later, lighter sibling ignored"
        );
        assert!(!is_bad_permutation(&star, &[2, 1, 0], 1).unwrap());
    }

    #[test]
    fn badness_rejects_unlabeled_trees_and_foreign_edges() {
        let unlabeled = star(3);
        assert!(is_bad_permutation(&unlabeled, &[0, 1, 2], 0).is_err());
        let star = labeled_star();
        assert!(is_bad_permutation(&star, &[0, 1, 2], 3).is_err());
        assert!(is_bad_permutation(&star, &[0, 1], 0).is_err());
        assert!(bad_permutation_by_label(&star, &[0, 1, 2], 4).is_err());
    }

    #[test]
    fn first_root_edges_face_the_phantom() {
        let star = labeled_star();
        // Ranks: edge 1 first, then edge 0, then edge 2.
        let order = vec![1, 0, 2];
        let flags = bad_permutation_by_label(&star, &order, 3).unwrap();
        // Label 0: edge 0 arrived after the label-1 edge 1, so it is not bad.
        // Label 1: edge 1 arrived first overall and precedes slot 3.
        assert_eq!(flags, vec![false, true]);

        let flags = bad_permutation_by_label(&star, &order, 0).unwrap();
        assert_eq!(flags, vec![false, false], "slot 0 puts the phantom before everything");

        let flags = bad_permutation_by_label(&star, &[0, 1, 2], 3).unwrap();
        assert_eq!(flags, vec![true, true]);
    }

    #[test]
    fn first_root_edge_badness_has_the_predicted_frequency() {
        // In the depth-2 recursive tree the root has four label-0 children
        // and two label-1 children. The first label-1 edge is bad exactly
        // when it beats its twin and the phantom, probability 2/3; the first
        // label-0 edge must beat all six siblings and the phantom, and the
        // four label-0 edges share the win, probability 4/7.
        let tree = gen_recursive_tree(2, false).unwrap();
        let trials = 5000u64;
        let mut hits = [0u64; 2];
        for trial in 0..trials {
            let mut order_rng = stream_rng(13, trial, stream::ORDER);
            let order = sample_permutation(tree.edge_count(), &mut order_rng).order();
            let mut phantom_rng = stream_rng(13, trial, stream::PHANTOM);
            let slot = phantom_rng.gen_range(0..=tree.edge_count());
            let flags = bad_permutation_by_label(&tree, &order, slot).unwrap();
            for (d, &flag) in flags.iter().enumerate() {
                if flag {
                    hits[d] += 1;
                }
            }
        }
        let freq0 = hits[0] as f64 / trials as f64;
        let freq1 = hits[1] as f64 / trials as f64;
        assert!((freq0 - 4.0 / 7.0).abs() < 0.03, "label 0 frequency {freq0}");
        assert!((freq1 - 2.0 / 3.0).abs() < 0.03, "label 1 frequency {freq1}");
    }
}
