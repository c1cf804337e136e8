//! Rooted trees, edge orientations, and the greedy orienter.
//!
//! Graph balancing is the unit-load special case of unrelated machines: each
//! vertex is a machine and each edge a job runnable on exactly its two
//! endpoints. Orienting an edge toward an endpoint assigns the job there, so
//! the makespan of the induced assignment is the maximum in-degree. On any
//! tree the offline optimum orients every edge away from the root and attains
//! maximum in-degree 1.
//!
//! Edges are identified by their child node, which gives a dense edge index
//! in `0..n-1` used in schedules and JSON.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{check_order, Assignment, Instance, Job, LoadVector};

/// Immutable rooted tree with per-node depth, height, and optional labels.
///
/// Height is distance to the closest leaf: leaves have height 0 and an
/// internal node has 1 plus the minimum height among its children.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    node_count: usize,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    height: Vec<usize>,
    labels: Option<Vec<usize>>,
}

impl Tree {
    /// Builds a tree from parent pointers, checking shape and connectivity.
    pub fn from_parents(
        root: usize,
        parent: Vec<Option<usize>>,
        labels: Option<Vec<usize>>,
    ) -> Result<Tree> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::InvalidInput("tree needs at least one node".into()));
        }
        if root >= n {
            return Err(Error::InvalidInput(format!(
                "root {root} out of range for {n} nodes"
            )));
        }
        if parent[root].is_some() {
            return Err(Error::InvalidInput(format!("root {root} must have no parent")));
        }
        for (u, p) in parent.iter().enumerate() {
            if u == root {
                continue;
            }
            match p {
                None => {
                    return Err(Error::InvalidInput(format!(
                        "node {u} has no parent but is not the root"
                    )))
                }
                Some(p) if *p >= n => {
                    return Err(Error::InvalidInput(format!(
                        "node {u} has parent {p}, out of range for {n} nodes"
                    )))
                }
                _ => {}
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {n} nodes",
                    l.len()
                )));
            }
        }
        let mut children = vec![Vec::new(); n];
        for u in 0..n {
            if let Some(p) = parent[u] {
                children[p].push(u);
            }
        }
        let mut depth = vec![0usize; n];
        let mut bfs = Vec::with_capacity(n);
        bfs.push(root);
        let mut head = 0;
        while head < bfs.len() {
            let u = bfs[head];
            head += 1;
            for &c in &children[u] {
                depth[c] = depth[u] + 1;
                bfs.push(c);
            }
        }
        if bfs.len() != n {
            return Err(Error::InvalidInput(
                "parent pointers contain a cycle: not every node reaches the root".into(),
            ));
        }
        let mut height = vec![0usize; n];
        for &u in bfs.iter().rev() {
            if !children[u].is_empty() {
                height[u] = 1 + children[u].iter().map(|&c| height[c]).min().unwrap();
            }
        }
        Ok(Tree { node_count: n, root, parent, children, depth, height, labels })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn height(&self, node: usize) -> usize {
        self.height[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[node])
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn edge_count(&self) -> usize {
        self.node_count - 1
    }

    /// Child node of the edge with the given dense index.
    pub fn edge_child(&self, edge: usize) -> usize {
        debug_assert!(edge < self.edge_count());
        if edge < self.root {
            edge
        } else {
            edge + 1
        }
    }

    /// Dense index of the edge between `child` and its parent.
    pub fn edge_of(&self, child: usize) -> usize {
        debug_assert_ne!(child, self.root, "the root has no parent edge");
        if child < self.root {
            child
        } else {
            child - 1
        }
    }

    /// Endpoints of an edge as (parent, child).
    pub fn edge_endpoints(&self, edge: usize) -> (usize, usize) {
        let child = self.edge_child(edge);
        (self.parent[child].expect("non-root node has a parent"), child)
    }

    /// Height of an edge: the height of its child endpoint. Leaf edges have
    /// height 0, so ascending edge height is a leaf-to-root sweep.
    pub fn edge_height(&self, edge: usize) -> usize {
        self.height[self.edge_child(edge)]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TreeWire {
    n: usize,
    root: usize,
    parents: Vec<Option<usize>>,
    /// Written as an all-`null` array for unlabeled trees; `null` or a
    /// missing field is accepted on input too.
    #[serde(default)]
    labels: Option<Vec<Option<usize>>>,
}

impl serde::Serialize for Tree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let labels = match &self.labels {
            Some(l) => l.iter().map(|&v| Some(v)).collect(),
            None => vec![None; self.node_count],
        };
        TreeWire {
            n: self.node_count,
            root: self.root,
            parents: self.parent.clone(),
            labels: Some(labels),
        }
        .serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for Tree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = TreeWire::deserialize(deserializer)?;
        if wire.parents.len() != wire.n {
            return Err(serde::de::Error::custom(format!(
                "{} parent entries for n = {}",
                wire.parents.len(),
                wire.n
            )));
        }
        let labels = match wire.labels {
            None => None,
            Some(entries) => {
                if entries.len() != wire.n {
                    return Err(serde::de::Error::custom(format!(
                        "{} label entries for n = {}",
                        entries.len(),
                        wire.n
                    )));
                }
                let present = entries.iter().filter(|l| l.is_some()).count();
                if present == 0 {
                    None
                } else if present == wire.n {
                    Some(entries.into_iter().map(Option::unwrap).collect())
                } else {
                    return Err(serde::de::Error::custom(
                        "labels must be all null or all present",
                    ));
                }
            }
        };
        Tree::from_parents(wire.root, wire.parents, labels)
            .map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

/// A per-edge choice of endpoint, with running in-degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct Orientation {
    toward: Vec<Option<usize>>,
    in_degree: Vec<usize>,
}

impl Orientation {
    pub fn new(edges: usize, nodes: usize) -> Self {
        Orientation { toward: vec![None; edges], in_degree: vec![0; nodes] }
    }

    pub fn assign(&mut self, edge: usize, node: usize) {
        debug_assert!(self.toward[edge].is_none(), "edge {edge} oriented twice");
        self.toward[edge] = Some(node);
        self.in_degree[node] += 1;
    }

    pub fn toward(&self, edge: usize) -> Option<usize> {
        self.toward[edge]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_degree[node]
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.in_degree
    }

    pub fn oriented_edges(&self) -> usize {
        self.toward.iter().filter(|t| t.is_some()).count()
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_degree.iter().copied().max().unwrap_or(0)
    }

    /// In-degrees as a load vector over the node machines.
    pub fn loads(&self) -> LoadVector {
        LoadVector(self.in_degree.iter().map(|&d| d as f64).collect())
    }
}

/// Endpoint the greedy rule picks for an edge `(u, v)` given current
/// in-degrees: the strictly less loaded endpoint, a fair coin on ties.
pub fn greedy_orient_step<R: Rng>(in_degrees: &[usize], u: usize, v: usize, rng: &mut R) -> usize {
    match in_degrees[u].cmp(&in_degrees[v]) {
        std::cmp::Ordering::Less => u,
        std::cmp::Ordering::Greater => v,
        std::cmp::Ordering::Equal => {
            if rng.gen_bool(0.5) {
                u
            } else {
                v
            }
        }
    }
}

/// Greedy orientation of a tree's edges in schedule order.
///
/// The schedule must list every edge index exactly once. Tie coins are drawn
/// up front, one per edge in edge-index order, so the coin an edge consumes
/// depends only on the rng seed and the edge, not on its position in the
/// schedule; the orientation is distributed exactly as if each tie flipped a
/// fresh coin.
pub fn greedy_run<R: Rng>(tree: &Tree, schedule: &[usize], rng: &mut R) -> Result<Orientation> {
    check_order(schedule, tree.edge_count())?;
    greedy_run_subset(tree, schedule, rng)
}

/// [`greedy_run`] for schedules covering only some edges; the rest stay
/// unoriented. Coins are still drawn for every edge, so a run on a schedule
/// with one edge removed consumes the same coin stream as the full run.
pub fn greedy_run_subset<R: Rng>(tree: &Tree, schedule: &[usize], rng: &mut R) -> Result<Orientation> {
    let edges = tree.edge_count();
    let coins: Vec<bool> = (0..edges).map(|_| rng.gen_bool(0.5)).collect();
    let mut seen = vec![false; edges];
    let mut orientation = Orientation::new(edges, tree.node_count());
    for &edge in schedule {
        if edge >= edges {
            return Err(Error::InvalidSchedule(format!(
                "schedule mentions edge {edge}, but valid edges run 0..{edges}"
            )));
        }
        if seen[edge] {
            return Err(Error::InvalidSchedule(format!("schedule lists edge {edge} twice")));
        }
        seen[edge] = true;
        let (parent, child) = tree.edge_endpoints(edge);
        let du = orientation.in_degree(parent);
        let dv = orientation.in_degree(child);
        let target = match du.cmp(&dv) {
            std::cmp::Ordering::Less => parent,
            std::cmp::Ordering::Greater => child,
            std::cmp::Ordering::Equal => {
                if coins[edge] {
                    parent
                } else {
                    child
                }
            }
        };
        orientation.assign(edge, target);
    }
    Ok(orientation)
}

/// The offline optimum on a tree: every edge oriented toward its child, so
/// every node receives at most the one edge from its parent.
pub fn tree_opt_orientation(tree: &Tree) -> Orientation {
    let mut orientation = Orientation::new(tree.edge_count(), tree.node_count());
    for edge in 0..tree.edge_count() {
        orientation.assign(edge, tree.edge_child(edge));
    }
    orientation
}

/// The unrelated-machines instance of a tree: one machine per node, one job
/// per edge with unit load on exactly its two endpoints.
pub fn graph_to_instance(tree: &Tree) -> Instance {
    let jobs = (0..tree.edge_count())
        .map(|edge| {
            let (parent, child) = tree.edge_endpoints(edge);
            Job::new(edge, [(parent, 1.0), (child, 1.0)])
        })
        .collect();
    Instance { machines: tree.node_count(), jobs }
}

/// The assignment induced by an orientation: each edge job goes to the
/// machine of the endpoint it points at.
pub fn orientation_to_assignment(tree: &Tree, orientation: &Orientation) -> Assignment {
    let mut assignment = Assignment::empty(tree.edge_count());
    for edge in 0..tree.edge_count() {
        if let Some(node) = orientation.toward(edge) {
            assignment.assign(edge, node);
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::makespan;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3() -> Tree {
        // a(0) - b(1) - c(2), rooted at c.
        Tree::from_parents(2, vec![Some(1), Some(2), None], None).unwrap()
    }

    fn star(leaves: usize) -> Tree {
        let mut parent = vec![None];
        parent.extend((0..leaves).map(|_| Some(0)));
        Tree::from_parents(0, parent, None).unwrap()
    }

    #[test]
    fn from_parents_rejects_malformed_trees() {
        assert!(Tree::from_parents(0, vec![], None).is_err());
        assert!(Tree::from_parents(5, vec![None, Some(0)], None).is_err());
        assert!(Tree::from_parents(0, vec![Some(1), Some(0)], None).is_err());
        assert!(Tree::from_parents(0, vec![None, None], None).is_err());
        assert!(Tree::from_parents(0, vec![None, Some(7)], None).is_err());
        // 1 -> 2 -> 1 cycle, unreachable from the root.
        assert!(Tree::from_parents(0, vec![None, Some(2), Some(1)], None).is_err());
        assert!(Tree::from_parents(0, vec![None, Some(0)], Some(vec![1])).is_err());
    }

    #[test]
    fn depth_height_and_edges_of_a_path() {
        let t = path3();
        assert_eq!(t.depth(2), 0);
        assert_eq!(t.depth(1), 1);
        assert_eq!(t.depth(0), 2);
        assert_eq!(t.height(0), 0);
        assert_eq!(t.height(1), 1);
        assert_eq!(t.height(2), 2);
        assert_eq!(t.edge_count(), 2);
        // Root is node 2, so children 0 and 1 map straight to edges 0 and 1.
        assert_eq!(t.edge_endpoints(0), (1, 0));
        assert_eq!(t.edge_endpoints(1), (2, 1));
        assert_eq!(t.edge_of(0), 0);
        assert_eq!(t.edge_of(1), 1);
        assert_eq!(t.edge_height(0), 0);
        assert_eq!(t.edge_height(1), 1);
    }

    #[test]
    fn edge_indexing_skips_the_root() {
        let t = Tree::from_parents(1, vec![Some(1), None, Some(1)], None).unwrap();
        assert_eq!(t.edge_child(0), 0);
        assert_eq!(t.edge_child(1), 2);
        assert_eq!(t.edge_of(0), 0);
        assert_eq!(t.edge_of(2), 1);
    }

    #[test]
    fn height_uses_the_closest_leaf() {
        // Root with a leaf child and a path of length 2.
        let t = Tree::from_parents(0, vec![None, Some(0), Some(0), Some(2)], None).unwrap();
        assert_eq!(t.height(0), 1);
        assert_eq!(t.height(2), 1);
    }

    #[test]
    fn json_round_trip() {
        let t = path3();
        let text = t.to_json().unwrap();
        assert_eq!(text, r#"{"n":3,"root":2,"parents":[1,2,null],"labels":[null,null,null]}"#);
        assert_eq!(Tree::from_json(&text).unwrap(), t);

        let labeled = Tree::from_parents(2, vec![Some(1), Some(2), None], Some(vec![0, 1, 2])).unwrap();
        let text = labeled.to_json().unwrap();
        assert_eq!(text, r#"{"n":3,"root":2,"parents":[1,2,null],"labels":[0,1,2]}"#);
        assert_eq!(Tree::from_json(&text).unwrap(), labeled);
    }

    #[test]
    fn json_rejects_mixed_labels() {
        let text = r#"{"n":2,"root":0,"parents":[null,0],"labels":[0,null]}"#;
        assert!(Tree::from_json(text).is_err());
    }

    #[test]
    fn orient_step_prefers_the_less_loaded_endpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(greedy_orient_step(&[2, 1], 0, 1, &mut rng), 1);
        assert_eq!(greedy_orient_step(&[0, 3], 0, 1, &mut rng), 0);
        let tie = greedy_orient_step(&[1, 1], 0, 1, &mut rng);
        assert!(tie == 0 || tie == 1);
    }

    #[test]
    fn path_trace_forces_the_second_edge() {
        // First tie resolved toward b leaves c strictly less loaded.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let after_first_tie = [0usize, 1, 0];
        assert_eq!(greedy_orient_step(&after_first_tie, 1, 2, &mut rng), 2);
    }

    #[test]
    fn ties_split_evenly_over_seeds() {
        let t = star(1);
        let mut toward_root = 0usize;
        for seed in 0..10_000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let o = greedy_run(&t, &[0], &mut rng).unwrap();
            if o.toward(0) == Some(0) {
                toward_root += 1;
            }
        }
        assert!((4700..=5300).contains(&toward_root), "toward root: {toward_root}");
    }

    #[test]
    fn greedy_run_validates_the_schedule() {
        let t = path3();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(greedy_run(&t, &[0], &mut rng), Err(Error::InvalidSchedule(_))));
        assert!(matches!(greedy_run(&t, &[0, 2], &mut rng), Err(Error::InvalidSchedule(_))));
        assert!(matches!(greedy_run(&t, &[0, 0], &mut rng), Err(Error::InvalidSchedule(_))));
        assert!(matches!(
            greedy_run_subset(&t, &[1, 1], &mut rng),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn greedy_on_a_star_stays_within_bounds() {
        for leaves in 1..=8 {
            let t = star(leaves);
            let schedule: Vec<usize> = (0..leaves).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(leaves as u64);
            let o = greedy_run(&t, &schedule, &mut rng).unwrap();
            assert_eq!(o.oriented_edges(), leaves);
            assert_eq!(o.in_degrees().iter().sum::<usize>(), leaves);
            let max = o.max_in_degree();
            assert!(max >= 1 && max <= leaves);
        }
    }

    #[test]
    fn subset_runs_consume_the_same_coins() {
        let t = star(6);
        let full: Vec<usize> = (0..6).collect();
        let reduced: Vec<usize> = (1..6).collect();
        for seed in 0..50u64 {
            let mut rng_full = ChaCha8Rng::seed_from_u64(seed);
            let mut rng_reduced = ChaCha8Rng::seed_from_u64(seed);
            let of = greedy_run(&t, &full, &mut rng_full).unwrap();
            let or = greedy_run_subset(&t, &reduced, &mut rng_reduced).unwrap();
            assert_eq!(or.toward(0), None);
            assert!(or.max_in_degree() <= of.max_in_degree());
        }
    }

    #[test]
    fn opt_orientation_has_max_in_degree_one()  {
        for t in [path3(), star(5)] {
            let o = tree_opt_orientation(&t);
            assert_eq!(o.max_in_degree(), 1);
            assert_eq!(o.oriented_edges(), t.edge_count());
        }
        let singleton = Tree::from_parents(0, vec![None], None).unwrap();
        assert_eq!(tree_opt_orientation(&singleton).max_in_degree(), 0);
    }

    #[test]
    fn instance_mirrors_the_tree() {
        let t = path3();
        let inst = graph_to_instance(&t);
        assert_eq!(inst.machines, 3);
        assert_eq!(inst.jobs.len(), 2);
        for job in &inst.jobs {
            assert_eq!(job.loads.len(), 2);
            assert!(job.loads.values().all(|&p| p == 1.0));
        }
        let opt = tree_opt_orientation(&t);
        let assignment = orientation_to_assignment(&t, &opt);
        assert_eq!(makespan(&inst, &assignment).unwrap(), 1.0);
    }

    #[test]
    fn makespan_equals_max_in_degree() {
        let t = star(7);
        let inst = graph_to_instance(&t);
        let schedule: Vec<usize> = (0..7).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let o = greedy_run(&t, &schedule, &mut rng).unwrap();
        let assignment = orientation_to_assignment(&t, &o);
        assert_eq!(makespan(&inst, &assignment).unwrap(), o.max_in_degree() as f64);
    }
}
