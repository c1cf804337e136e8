//! Instance generators: lower-bound tree families, planted-optimum random
//! instances, and the interactive pairing adversary.
//!
//! All generators are pure functions of their parameters and rng, so callers
//! get identical instances from identical seeds. Tree generators refuse sizes
//! beyond desk scale unless explicitly overridden, and refuse outright sizes
//! that cannot be built in memory.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graphbal::Tree;
use crate::model::{Assignment, Instance, Job};

/// Largest node count built without `allow_large`.
pub const SOFT_NODE_LIMIT: u128 = 1_000_000;

/// Largest node count built at all.
pub const HARD_NODE_LIMIT: u128 = 100_000_000;

/// Node count of a full `arity`-ary tree of the given depth, if it fits u128.
pub fn full_tree_nodes(arity: u128, depth: u32) -> Option<u128> {
    let mut total: u128 = 1;
    let mut level: u128 = 1;
    for _ in 0..depth {
        level = level.checked_mul(arity)?;
        total = total.checked_add(level)?;
    }
    Some(total)
}

fn size_gate(nodes: u128, allow_large: bool, what: &str) -> Result<()> {
    if nodes > HARD_NODE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{what} has {nodes} nodes, above the hard limit of {HARD_NODE_LIMIT}"
        )));
    }
    if nodes > SOFT_NODE_LIMIT && !allow_large {
        return Err(Error::TooLarge(format!(
            "{what} has {nodes} nodes, above the default limit of {SOFT_NODE_LIMIT}; set allow_large to build it"
        )));
    }
    Ok(())
}

/// Full `arity`-ary tree of the given depth, nodes in level order.
pub fn gen_full_tree(arity: usize, depth: u32, allow_large: bool) -> Result<Tree> {
    if arity == 0 {
        return Err(Error::InvalidInput("tree arity must be at least 1".into()));
    }
    let what = format!("full {arity}-ary tree of depth {depth}");
    let nodes = full_tree_nodes(arity as u128, depth)
        .ok_or_else(|| Error::TooLarge(format!("{what} overflows the node counter")))?;
    size_gate(nodes, allow_large, &what)?;
    let nodes = nodes as usize;
    let mut parent = Vec::with_capacity(nodes);
    parent.push(None);
    for i in 1..nodes {
        parent.push(Some((i - 1) / arity));
    }
    Tree::from_parents(0, parent, None)
}

/// The fat tree with parameter `k`: a full k⁴-ary tree of depth k, so every
/// leaf sits at depth exactly k and a node at depth d has height k−d.
pub fn gen_fat_tree(k: u32, allow_large: bool) -> Result<Tree> {
    if k == 0 {
        return Err(Error::InvalidInput("fat tree parameter k must be at least 1".into()));
    }
    let arity = (k as u128).pow(4);
    let what = format!("fat tree with k={k}");
    let nodes = full_tree_nodes(arity, k)
        .ok_or_else(|| Error::TooLarge(format!("{what} overflows the node counter")))?;
    size_gate(nodes, allow_large, &what)?;
    gen_full_tree(arity as usize, k, allow_large)
}

/// Per-label node counts of the recursive labeled tree family.
///
/// A node labeled d roots a subtree of n(d) nodes, where
/// `n(d) = 1 + sum over d' < d of 2^(D-d') * n(d')`, equivalently
/// `n(d+1) = n(d) * (1 + 2^(D-d))`. Returns `n(0..=D)`.
pub fn count_recursive_nodes(d_max: u32) -> Result<Vec<u128>> {
    let overflow =
        || Error::TooLarge(format!("recursive tree with D={d_max} overflows the node counter"));
    let mut counts = Vec::with_capacity(d_max as usize + 1);
    let mut n: u128 = 1;
    counts.push(n);
    for d in 0..d_max {
        let copies = 1u128.checked_shl(d_max - d).ok_or_else(overflow)?;
        let factor = copies.checked_add(1).ok_or_else(overflow)?;
        n = n.checked_mul(factor).ok_or_else(overflow)?;
        counts.push(n);
    }
    // Size bound: n(D) <= 4^(D^2). Checkable in u128 only while 2*D^2 < 128;
    // beyond that the bound exceeds u128::MAX >= n(D) anyway.
    if let Some(bound) = 1u128.checked_shl(2 * d_max * d_max) {
        debug_assert!(n <= bound);
    }
    Ok(counts)
}

/// The recursive labeled tree with root label `d_max`: every node labeled d
/// has, for each d' < d, exactly 2^(D−d') children labeled d'. Nodes are in
/// level order, children grouped by ascending label.
pub fn gen_recursive_tree(d_max: u32, allow_large: bool) -> Result<Tree> {
    let counts = count_recursive_nodes(d_max)?;
    let total = counts[d_max as usize];
    size_gate(total, allow_large, &format!("recursive tree with D={d_max}"))?;
    let total = total as usize;
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(total);
    let mut labels: Vec<usize> = Vec::with_capacity(total);
    parent.push(None);
    labels.push(d_max as usize);
    let mut head = 0;
    while head < parent.len() {
        let d = labels[head];
        for child_label in 0..d {
            let copies = 1usize << (d_max as usize - child_label);
            for _ in 0..copies {
                parent.push(Some(head));
                labels.push(child_label);
            }
        }
        head += 1;
    }
    debug_assert_eq!(parent.len(), total);
    Tree::from_parents(0, parent, Some(labels))
}

/// The tree realized by the pairing adversary when the algorithm always takes
/// the higher-indexed machine of each pair: losers point at their pair's
/// winner, the final winner m−1 is the root, and each node's label is the
/// round it dropped out (root: one past the last round).
pub fn gen_classic_pairs_tree(m: usize, allow_large: bool) -> Result<Tree> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "pairing adversary needs a power-of-two machine count >= 2, got {m}"
        )));
    }
    size_gate(m as u128, allow_large, &format!("pairing tree over {m} machines"))?;
    let mut parent = vec![None; m];
    let mut labels = vec![0usize; m];
    let mut active: Vec<usize> = (0..m).collect();
    let mut round = 1;
    while active.len() > 1 {
        let mut winners = Vec::with_capacity(active.len() / 2);
        for pair in active.chunks(2) {
            let (loser, winner) = (pair[0], pair[1]);
            parent[loser] = Some(winner);
            labels[loser] = round;
            winners.push(winner);
        }
        active = winners;
        round += 1;
    }
    labels[m - 1] = round;
    Tree::from_parents(m - 1, parent, Some(labels))
}

/// Interactive lower-bound construction: pairs of machines get unit jobs, and
/// whichever machines the algorithm loads get paired again next round, until
/// one machine has taken log2(m) jobs.
#[derive(Clone, Debug)]
pub struct AdaptiveAdversary {
    machines: usize,
    active: Vec<usize>,
    pending: Vec<(usize, usize)>,
    next_job_id: usize,
    rounds_done: usize,
}

/// One adversary round: either the next batch of jobs or the end of the game.
#[derive(Clone, Debug, PartialEq)]
pub enum AdversaryStep {
    Jobs(Vec<Job>),
    Done,
}

impl AdaptiveAdversary {
    pub fn new(machines: usize) -> Result<Self> {
        if machines < 2 || !machines.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "pairing adversary needs a power-of-two machine count >= 2, got {machines}"
            )));
        }
        Ok(AdaptiveAdversary {
            machines,
            active: (0..machines).collect(),
            pending: Vec::new(),
            next_job_id: 0,
            rounds_done: 0,
        })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    /// Total rounds the game will run: log2(m).
    pub fn total_rounds(&self) -> usize {
        self.machines.trailing_zeros() as usize
    }

    /// Advance one round. The first call takes no choices; every later call
    /// takes the machine the algorithm picked for each job of the previous
    /// batch, in batch order.
    pub fn next(&mut self, previous_choices: &[usize]) -> Result<AdversaryStep> {
        if self.rounds_done == 0 {
            if !previous_choices.is_empty() {
                return Err(Error::Protocol(
                    "the first round takes no previous choices".into(),
                ));
            }
        } else {
            if previous_choices.len() != self.pending.len() {
                return Err(Error::Protocol(format!(
                    "expected {} choices for the previous batch, got {}",
                    self.pending.len(),
                    previous_choices.len()
                )));
            }
            let mut chosen = Vec::with_capacity(previous_choices.len());
            for (&(a, b), &pick) in self.pending.iter().zip(previous_choices) {
                if pick != a && pick != b {
                    return Err(Error::Protocol(format!(
                        "job was offered machines {a} and {b}, but the algorithm chose {pick}"
                    )));
                }
                chosen.push(pick);
            }
            self.active = chosen;
        }
        if self.active.len() == 1 {
            return Ok(AdversaryStep::Done);
        }
        self.pending = self.active.chunks(2).map(|p| (p[0], p[1])).collect();
        let jobs = self
            .pending
            .iter()
            .map(|&(a, b)| {
                let job = Job::new(self.next_job_id, [(a, 1.0), (b, 1.0)]);
                self.next_job_id += 1;
                job
            })
            .collect();
        self.rounds_done += 1;
        Ok(AdversaryStep::Jobs(jobs))
    }
}

/// Parameters for a random instance with a known-good hidden assignment.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct PlantedSpec {
    pub machines: usize,
    pub jobs: usize,
    /// Target makespan: the hidden assignment's loads all land in
    /// [0.9 * opt_value, opt_value], so the true optimum is at most this.
    pub opt_value: f64,
    /// Finite machines per job, the hidden one included.
    #[serde(default = "default_finite_machines")]
    pub finite_machines: usize,
    /// Lower bound on every job's size.
    #[serde(default)]
    pub min_job_size: f64,
}

fn default_finite_machines() -> usize {
    3
}

/// A planted instance together with the hidden assignment that certifies its
/// optimum is at most the requested value.
#[derive(Clone, Debug)]
pub struct Planted {
    pub instance: Instance,
    pub hidden: Assignment,
}

/// Random instance around a hidden assignment: jobs go round-robin to hidden
/// machines whose total load lands just under `opt_value`, and each job gets
/// finite decoy loads, at least its hidden size, on random other machines.
/// Every finite load is at most `opt_value` and each job's cheapest load is
/// its hidden one.
pub fn gen_planted<R: Rng>(spec: &PlantedSpec, rng: &mut R) -> Result<Planted> {
    let m = spec.machines;
    let n = spec.jobs;
    if m == 0 {
        return Err(Error::InvalidInput("planted instance needs at least one machine".into()));
    }
    if n < m {
        return Err(Error::InvalidInput(format!(
            "planted instance needs at least as many jobs as machines, got {n} < {m}"
        )));
    }
    if !(spec.opt_value.is_finite() && spec.opt_value > 0.0) {
        return Err(Error::InvalidInput(format!(
            "opt_value must be positive and finite, got {}",
            spec.opt_value
        )));
    }
    if spec.finite_machines == 0 || spec.finite_machines > m {
        return Err(Error::InvalidInput(format!(
            "finite_machines must be in 1..={m}, got {}",
            spec.finite_machines
        )));
    }
    if !(spec.min_job_size.is_finite() && spec.min_job_size >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "min_job_size must be nonnegative and finite, got {}",
            spec.min_job_size
        )));
    }
    if (n as f64) * spec.min_job_size > (m as f64) * spec.opt_value {
        return Err(Error::InvalidInput(format!(
            "{n} jobs of size >= {} cannot fit {m} machines of capacity {}",
            spec.min_job_size, spec.opt_value
        )));
    }

    let mut hidden = Assignment::empty(n);
    let mut sizes = vec![0.0f64; n];
    for machine in 0..m {
        let held: Vec<usize> = (machine..n).step_by(m).collect();
        let floor = held.len() as f64 * spec.min_job_size;
        if floor > spec.opt_value {
            return Err(Error::InvalidInput(format!(
                "machine {machine} holds {} jobs of size >= {}, exceeding opt_value {}",
                held.len(),
                spec.min_job_size,
                spec.opt_value
            )));
        }
        let fill_lo = (0.9f64).max(floor / spec.opt_value);
        let fill = if fill_lo >= 1.0 { 1.0 } else { rng.gen_range(fill_lo..1.0) };
        let budget = spec.opt_value * fill;
        let weights: Vec<f64> = held.iter().map(|_| rng.gen::<f64>()).collect();
        let weight_sum: f64 = weights.iter().sum();
        for (&job, &w) in held.iter().zip(&weights) {
            let share = if weight_sum > 0.0 { w / weight_sum } else { 1.0 / held.len() as f64 };
            sizes[job] = spec.min_job_size + (budget - floor) * share;
            hidden.assign(job, machine);
        }
    }

    let mut jobs = Vec::with_capacity(n);
    for j in 0..n {
        let home = hidden.machine_of(j).unwrap();
        let mut loads = vec![(home, sizes[j])];
        for idx in rand::seq::index::sample(rng, m - 1, spec.finite_machines - 1) {
            let decoy = if idx < home { idx } else { idx + 1 };
            let value = sizes[j] + rng.gen::<f64>() * (spec.opt_value - sizes[j]);
            loads.push((decoy, value));
        }
        jobs.push(Job::new(j, loads));
    }
    Ok(Planted { instance: Instance { machines: m, jobs }, hidden })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{loads_under, validate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_tree_counts() {
        assert_eq!(full_tree_nodes(16, 2), Some(273));
        assert_eq!(full_tree_nodes(81, 3), Some(538_084));
        assert_eq!(full_tree_nodes(1, 1), Some(2));
        assert_eq!(full_tree_nodes(9, 3), Some(820));
        assert_eq!(full_tree_nodes(u128::MAX, 2), None);
    }

    #[test]
    fn fat_tree_shapes() {
        let t = gen_fat_tree(2, false).unwrap();
        assert_eq!(t.node_count(), 273);
        for u in 0..t.node_count() {
            if t.is_leaf(u) {
                assert_eq!(t.depth(u), 2);
            } else {
                assert_eq!(t.children(u).len(), 16);
            }
            assert_eq!(t.height(u), 2 - t.depth(u));
        }
        assert_eq!(gen_fat_tree(1, false).unwrap().node_count(), 2);
        assert_eq!(gen_fat_tree(3, false).unwrap().node_count(), 538_084);
    }

    #[test]
    fn fat_tree_k4_is_refused_even_with_the_flag() {
        assert!(matches!(gen_fat_tree(4, false), Err(Error::TooLarge(_))));
        assert!(matches!(gen_fat_tree(4, true), Err(Error::TooLarge(_))));
        assert!(matches!(gen_fat_tree(0, false), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn full_tree_gates_and_errors() {
        assert!(matches!(gen_full_tree(0, 1, false), Err(Error::InvalidInput(_))));
        assert!(matches!(gen_full_tree(2, 40, true), Err(Error::TooLarge(_))));
        let t = gen_full_tree(9, 3, false).unwrap();
        assert_eq!(t.node_count(), 820);
        assert_eq!(t.height(t.root()), 3);
    }

    #[test]
    fn recursive_counts_match_the_recurrence() {
        assert_eq!(count_recursive_nodes(0).unwrap(), vec![1]);
        assert_eq!(count_recursive_nodes(2).unwrap(), vec![1, 5, 15]);
        assert_eq!(count_recursive_nodes(3).unwrap(), vec![1, 9, 45, 135]);
        assert_eq!(count_recursive_nodes(4).unwrap(), vec![1, 17, 153, 765, 2295]);
        assert_eq!(count_recursive_nodes(6).unwrap()[6], 4_922_775);
        assert!(matches!(count_recursive_nodes(9999), Err(Error::TooLarge(_))));
    }

    #[test]
    fn recursive_tree_matches_its_counts() {
        for d_max in 0..=3u32 {
            let t = gen_recursive_tree(d_max, false).unwrap();
            let counts = count_recursive_nodes(d_max).unwrap();
            assert_eq!(t.node_count() as u128, counts[d_max as usize]);
            assert_eq!(t.label(t.root()), Some(d_max as usize));
            for u in 0..t.node_count() {
                let d = t.label(u).unwrap();
                if d == 0 {
                    assert!(t.is_leaf(u));
                    continue;
                }
                for child_label in 0..d {
                    let found = t
                        .children(u)
                        .iter()
                        .filter(|&&c| t.label(c) == Some(child_label))
                        .count();
                    assert_eq!(found as u128, 1u128 << (d_max as usize - child_label));
                }
            }
        }
    }

    #[test]
    fn recursive_tree_gates() {
        assert!(matches!(gen_recursive_tree(6, false), Err(Error::TooLarge(_))));
        assert!(matches!(gen_recursive_tree(7, true), Err(Error::TooLarge(_))));
    }

    #[test]
    fn classic_pairs_tree_for_four_machines() {
        let t = gen_classic_pairs_tree(4, false).unwrap();
        assert_eq!(t.root(), 3);
        assert_eq!(t.parent(0), Some(1));
        assert_eq!(t.parent(1), Some(3));
        assert_eq!(t.parent(2), Some(3));
        let labels: Vec<usize> = (0..4).map(|u| t.label(u).unwrap()).collect();
        assert_eq!(labels, vec![1, 2, 1, 3]);
        assert!(matches!(gen_classic_pairs_tree(3, false), Err(Error::InvalidInput(_))));
        assert!(matches!(gen_classic_pairs_tree(1, false), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn classic_pairs_tree_depth_grows_with_rounds() {
        let t = gen_classic_pairs_tree(16, false).unwrap();
        assert_eq!(t.node_count(), 16);
        assert_eq!(t.label(15), Some(5));
        // Node 0 loses round 1 to node 1, which loses to 3, then 7, then 15.
        assert_eq!(t.depth(0), 4);
    }

    #[test]
    fn adversary_eventually_loads_one_machine() {
        let mut adv = AdaptiveAdversary::new(4).unwrap();
        assert_eq!(adv.total_rounds(), 2);
        let step = adv.next(&[]).unwrap();
        let AdversaryStep::Jobs(batch) = step else { panic!("expected jobs") };
        assert_eq!(batch.len(), 2);
        assert_eq!(batch[0], Job::new(0, [(0, 1.0), (1, 1.0)]));
        assert_eq!(batch[1], Job::new(1, [(2, 1.0), (3, 1.0)]));

        // Always pick the lower-indexed machine: its load is the round count.
        let step = adv.next(&[0, 2]).unwrap();
        let AdversaryStep::Jobs(batch) = step else { panic!("expected jobs") };
        assert_eq!(batch, vec![Job::new(2, [(0, 1.0), (2, 1.0)])]);
        assert_eq!(adv.next(&[0]).unwrap(), AdversaryStep::Done);
    }

    #[test]
    fn adversary_enforces_the_protocol() {
        let mut adv = AdaptiveAdversary::new(4).unwrap();
        assert!(matches!(adv.next(&[0]), Err(Error::Protocol(_))));
        adv.next(&[]).unwrap();
        assert!(matches!(adv.next(&[0]), Err(Error::Protocol(_))));
        assert!(matches!(adv.next(&[0, 1]), Err(Error::Protocol(_))));
        assert!(matches!(AdaptiveAdversary::new(6), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn two_machine_adversary_is_a_single_job() {
        let mut adv = AdaptiveAdversary::new(2).unwrap();
        let AdversaryStep::Jobs(batch) = adv.next(&[]).unwrap() else { panic!() };
        assert_eq!(batch, vec![Job::new(0, [(0, 1.0), (1, 1.0)])]);
        assert_eq!(adv.next(&[1]).unwrap(), AdversaryStep::Done);
    }

    fn spec(machines: usize, jobs: usize) -> PlantedSpec {
        PlantedSpec {
            machines,
            jobs,
            opt_value: 1.0,
            finite_machines: 3,
            min_job_size: 0.0,
        }
    }

    #[test]
    fn planted_instances_are_wellformed_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let planted = gen_planted(&spec(6, 30), &mut rng).unwrap();
        assert!(validate(&planted.instance).is_empty());
        assert!(planted.hidden.is_complete());
        let loads = loads_under(&planted.instance, &planted.hidden).unwrap();
        assert!(loads.max() <= 1.0 + 1e-12);
        assert!(loads.max() >= 0.9 - 1e-12);
        for job in &planted.instance.jobs {
            assert_eq!(job.loads.len(), 3);
            let home = planted.hidden.machine_of(job.id).unwrap();
            let hidden_size = job.load_on(home);
            for (&machine, &p) in &job.loads {
                assert!(p <= 1.0 + 1e-12);
                if machine != home {
                    assert!(p >= hidden_size - 1e-12);
                }
            }
            assert_eq!(job.min_load().unwrap().1, hidden_size);
        }
    }

    #[test]
    fn planted_generation_is_deterministic() {
        let a = gen_planted(&spec(4, 12), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_planted(&spec(4, 12), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let c = gen_planted(&spec(4, 12), &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_ne!(a.instance, c.instance);
    }

    #[test]
    fn planted_respects_min_job_size() {
        let mut s = spec(3, 9);
        s.min_job_size = 0.2;
        let planted = gen_planted(&s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for job in &planted.instance.jobs {
            assert!(job.min_load().unwrap().1 >= 0.2 - 1e-12);
        }
    }

    #[test]
    fn planted_rejects_infeasible_specs() {
        let mut s = spec(2, 4);
        s.min_job_size = 0.6;
        assert!(matches!(gen_planted(&s, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::InvalidInput(_))));

        // Globally feasible, but round-robin puts two jobs on machine 0.
        let mut s = spec(2, 3);
        s.min_job_size = 0.55;
        assert!(matches!(gen_planted(&s, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::InvalidInput(_))));

        assert!(gen_planted(&spec(5, 3), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let mut s = spec(2, 4);
        s.finite_machines = 5;
        assert!(gen_planted(&s, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
