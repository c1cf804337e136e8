//! The acceptance suite: thirteen self-contained criteria covering the
//! potential function, the two-phase scheduler, the adversary, the tree
//! analyzers, the generators, and the output pipeline.
//!
//! Each criterion owns its seeds and tolerances, which are pinned here as
//! constants so the suite is a fixed contract: reruns print byte-identical
//! reports, and a change in any measured value is a regression, not noise.
//! Statistical floors sit several standard deviations clear of pilot
//! measurements; the pilot itself is `loadbal`'s `pilot_thresholds` example.

use std::fmt::Write as _;
use std::time::Instant;

use loadbal::error::Result;
use loadbal::generators::{
    count_recursive_nodes, gen_fat_tree, gen_full_tree, gen_planted, gen_recursive_tree,
    AdaptiveAdversary, AdversaryStep, PlantedSpec,
};
use loadbal::graphbal::{graph_to_instance, greedy_run, greedy_run_subset, tree_opt_orientation, Tree};
use loadbal::model::{Instance, Job};
use loadbal::oracle::{brute_force_opt, check_phase1_inequality, chernoff_lower_tail};
use loadbal::potential::{
    doubling_run, grad_psi, psi, softmax_run, softmax_step, PotentialParams, SchedulerState,
};
use loadbal::sim::report::{render_csv, render_json};
use loadbal::sim::rng::stream_rng;
use loadbal::sim::runner::{run_trials, Algorithm, Analyzer, InstanceSource, OrderMode, RunConfig};
use loadbal::sim::schedule::sample_permutation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Absolute slack for the max <= psi <= max + ln(m)/a sandwich.
pub const SANDWICH_ABS_TOL: f64 = 1e-9;
/// Absolute slack for the gradient coordinates summing to one.
pub const GRAD_SUM_ABS_TOL: f64 = 1e-9;
/// Step for central finite differences against the analytic gradient.
pub const FD_STEP: f64 = 1e-5;
/// Absolute slack for the finite-difference comparison.
pub const FINITE_DIFF_ABS_TOL: f64 = 1e-6;
/// Relative slack for the e^a coordinatewise gradient growth cap.
pub const GROWTH_REL_SLACK: f64 = 1e-12;
/// Absolute slack for the phase-one peak against its bound.
pub const PHASE_INEQ_TOL: f64 = 1e-6;
/// 2 * (2e^{2a} + ln(100)/a) at a = ln(ln(100))/6, the two-phase makespan
/// cap for 100 machines at optimum 1.
pub const UPPER_BOUND_CAP: f64 = 42.84059128337208;
/// e^{-6}, the simplified lower-tail bound for Bin(81, 1/3) below 9.
pub const CHERNOFF_SIMPLIFIED_BOUND: f64 = 0.0024787521766663585;
/// Per-trial floor on the fraction of bad internal nodes in the k = 3 fat
/// tree under arrival times.
pub const BAD_NODE_FLOOR: f64 = 0.96;
/// Probability that the first label-2 root edge of the recursive tree with
/// root label 4 is bad, phantom slot included: 2^2 / (2^3 + 2^2 + 2 + 1).
pub const BAD_PERM_TARGET: f64 = 4.0 / 7.0;
/// Two-sided window around the bad-permutation target at 20000 trials.
pub const BAD_PERM_WINDOW: f64 = 0.02;
/// Floor on the frequency of a fully loaded root for the 9-ary depth-3
/// tree under bottom-up greedy at 1000 trials. A 4000-trial pilot measured
/// 0.9915 with a standard error near 0.003 at this trial count.
pub const ROOT_LOADED_FLOOR: f64 = 0.97;

/// Outcome of one criterion: its stable index and name, whether it passed
/// within its time budget, and a measured-versus-expected summary.
#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

type Criterion = fn() -> Result<(bool, String)>;

const CRITERIA: [(usize, &str, f64, Criterion); 13] = [
    (1, "potential-sandwich-gradient", 5.0, sandwich_and_gradient),
    (2, "gradient-growth", 5.0, gradient_growth),
    (3, "phase-inequality", 30.0, phase_inequality),
    (4, "softmax-upper-bound", 120.0, softmax_upper_bound),
    (5, "adaptive-adversary", 1.0, adaptive_adversary),
    (6, "fat-tree-bad-nodes", 120.0, fat_tree_bad_nodes),
    (7, "chernoff-binomial-tail", 30.0, chernoff_binomial_tail),
    (8, "recursive-bad-permutation", 120.0, recursive_bad_permutation),
    (9, "recursive-tree-structure", 1.0, recursive_tree_structure),
    (10, "bottom-up-greedy-loading", 30.0, bottom_up_greedy_loading),
    (11, "brute-force-cross-check", 60.0, brute_force_cross_check),
    (12, "output-determinism", 60.0, output_determinism),
    (13, "greedy-monotonicity", 30.0, greedy_monotonicity),
];

/// Runs every criterion in order. A criterion fails by measuring out of
/// tolerance, erroring, or blowing its time budget.
pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .map(|&(index, name, budget, criterion)| {
            let started = Instant::now();
            let (mut pass, mut detail) = match criterion() {
                Ok(outcome) => outcome,
                Err(error) => (false, format!("errored: {error}")),
            };
            let seconds = started.elapsed().as_secs_f64();
            if seconds > budget {
                pass = false;
                write!(detail, "; exceeded the {budget} s budget").unwrap();
            }
            CriterionReport { index, name, pass, detail, seconds }
        })
        .collect()
}

/// Runs a single criterion by index; panics on an unknown index.
pub fn run_one(index: usize) -> CriterionReport {
    let position = CRITERIA
        .iter()
        .position(|&(i, ..)| i == index)
        .unwrap_or_else(|| panic!("no criterion {index}"));
    let &(index, name, budget, criterion) = &CRITERIA[position];
    let started = Instant::now();
    let (mut pass, mut detail) = match criterion() {
        Ok(outcome) => outcome,
        Err(error) => (false, format!("errored: {error}")),
    };
    let seconds = started.elapsed().as_secs_f64();
    if seconds > budget {
        pass = false;
        write!(detail, "; exceeded the {budget} s budget").unwrap();
    }
    CriterionReport { index, name, pass, detail, seconds }
}

fn random_loads<R: Rng>(machines: usize, rng: &mut R) -> Vec<f64> {
    (0..machines).map(|_| rng.gen::<f64>() * 20.0).collect()
}

fn sandwich_and_gradient() -> Result<(bool, String)> {
    let mut rng = stream_rng(0xAC01, 0, 0);
    let mut worst_sandwich = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut worst_fd = 0.0f64;
    for _ in 0..1000 {
        let machines = rng.gen_range(2..=512);
        let params = PotentialParams::for_machines(machines)?;
        let x = random_loads(machines, &mut rng);
        let value = psi(&params, &x);
        let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ceiling = top + (machines as f64).ln() / params.a;
        worst_sandwich = worst_sandwich.max(top - value).max(value - ceiling);
        let grad = grad_psi(&params, &x);
        worst_sum = worst_sum.max((grad.iter().sum::<f64>() - 1.0).abs());
        let mut probe = x.clone();
        for i in 0..machines {
            probe[i] = x[i] + FD_STEP;
            let up = psi(&params, &probe);
            probe[i] = x[i] - FD_STEP;
            let down = psi(&params, &probe);
            probe[i] = x[i];
            worst_fd = worst_fd.max(((up - down) / (2.0 * FD_STEP) - grad[i]).abs());
        }
    }
    let pass = worst_sandwich <= SANDWICH_ABS_TOL
        && worst_sum <= GRAD_SUM_ABS_TOL
        && worst_fd <= FINITE_DIFF_ABS_TOL;
    Ok((
        pass,
        format!(
            "1000 vectors, m in 2..=512: sandwich slack {worst_sandwich:.3e} (tol {SANDWICH_ABS_TOL:.0e}), \
             gradient sum off by {worst_sum:.3e} (tol {GRAD_SUM_ABS_TOL:.0e}), \
             finite-difference error {worst_fd:.3e} (tol {FINITE_DIFF_ABS_TOL:.0e})"
        ),
    ))
}

fn gradient_growth() -> Result<(bool, String)> {
    let mut rng = stream_rng(0xAC02, 0, 0);
    let mut worst_ratio = 0.0f64;
    for _ in 0..1000 {
        let machines = rng.gen_range(2..=512);
        let params = PotentialParams::for_machines(machines)?;
        let x = random_loads(machines, &mut rng);
        let target = rng.gen_range(0..machines);
        let increment: f64 = rng.gen();
        let before = grad_psi(&params, &x);
        let mut bumped = x.clone();
        bumped[target] += increment;
        let after = grad_psi(&params, &bumped);
        let cap = params.a.exp();
        for j in 0..machines {
            worst_ratio = worst_ratio.max(after[j] / (cap * before[j]));
        }
    }
    let pass = worst_ratio <= 1.0 + GROWTH_REL_SLACK;
    Ok((
        pass,
        format!(
            "1000 unit-bounded increments: max gradient growth {worst_ratio:.12} of the e^a cap \
             (slack {GROWTH_REL_SLACK:.0e})"
        ),
    ))
}

fn phase_inequality() -> Result<(bool, String)> {
    let spec = PlantedSpec {
        machines: 50,
        jobs: 1000,
        opt_value: 1.0,
        finite_machines: 3,
        min_job_size: 0.0,
    };
    let planted = gen_planted(&spec, &mut stream_rng(0xAC03, 0, 0))?;
    let params = PotentialParams::for_machines(spec.machines)?;
    let mut min_margin = f64::INFINITY;
    let mut holds = true;
    for trial in 0..100 {
        let order = sample_permutation(spec.jobs, &mut stream_rng(0xAC03, trial + 1, 0)).order();
        let check = check_phase1_inequality(&planted.instance, &planted.hidden, &order, params)?;
        holds &= check.holds(PHASE_INEQ_TOL);
        min_margin = min_margin.min(check.bound - check.phase1_peak);
    }
    Ok((
        holds,
        format!(
            "planted m=50 n=1000, 100 orders: phase-one peak within its bound every trial, \
             min margin {min_margin:.3} (tol {PHASE_INEQ_TOL:.0e})"
        ),
    ))
}

fn softmax_upper_bound() -> Result<(bool, String)> {
    let spec = PlantedSpec {
        machines: 100,
        jobs: 2000,
        opt_value: 1.0,
        finite_machines: 3,
        min_job_size: 0.0,
    };
    let planted = gen_planted(&spec, &mut stream_rng(0xAC04, 0, 0))?;
    let params = PotentialParams::for_machines(spec.machines)?;
    let cap = 2.0 * (2.0 * (2.0 * params.a).exp() + (spec.machines as f64).ln() / params.a);
    if (cap - UPPER_BOUND_CAP).abs() > 1e-9 {
        return Ok((false, format!("cap drifted: computed {cap}, pinned {UPPER_BOUND_CAP}")));
    }
    let mut total = 0.0f64;
    let trials = 200u64;
    for trial in 0..trials {
        let order = sample_permutation(spec.jobs, &mut stream_rng(0xAC04, trial + 1, 0)).order();
        let run = softmax_run(&planted.instance, &order, params)?;
        total += run.state.true_loads.max();
    }
    let mean = total / trials as f64;
    Ok((
        mean <= UPPER_BOUND_CAP,
        format!(
            "planted m=100 n=2000 opt 1, {trials} trials: mean makespan {mean:.4} <= cap {UPPER_BOUND_CAP}"
        ),
    ))
}

/// Plays one full adversary game and returns the forced makespan and the
/// realized pairing tree, whose edges are the jobs oriented as placed.
fn adversary_game(
    machines: usize,
    mut place: impl FnMut(&Job) -> Result<usize>,
) -> Result<(f64, Tree)> {
    let mut adversary = AdaptiveAdversary::new(machines)?;
    let mut loads = vec![0.0f64; machines];
    let mut parents: Vec<Option<usize>> = vec![None; machines];
    let mut choices: Vec<usize> = Vec::new();
    loop {
        match adversary.next(&choices)? {
            AdversaryStep::Done => break,
            AdversaryStep::Jobs(batch) => {
                choices = batch
                    .iter()
                    .map(|job| {
                        let pair: Vec<usize> = job.loads.keys().copied().collect();
                        let pick = place(job)?;
                        loads[pick] += 1.0;
                        let loser = if pair[0] == pick { pair[1] } else { pair[0] };
                        parents[loser] = Some(pick);
                        Ok(pick)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
        }
    }
    let root = (0..machines)
        .find(|&node| parents[node].is_none())
        .expect("the tournament leaves one machine unbeaten");
    let tree = Tree::from_parents(root, parents, None)?;
    let makespan = loads.iter().copied().fold(0.0, f64::max);
    Ok((makespan, tree))
}

fn adaptive_adversary() -> Result<(bool, String)> {
    let machines = 64usize;
    let required = 6.0f64;

    let params = PotentialParams::for_machines(machines)?;
    let mut state = SchedulerState::new(params, machines - 1);
    let (softmax_makespan, softmax_tree) =
        adversary_game(machines, |job| softmax_step(&mut state, job))?;

    let mut counts = vec![0usize; machines];
    let (greedy_makespan, greedy_tree) = adversary_game(machines, |job| {
        let pair: Vec<usize> = job.loads.keys().copied().collect();
        let (a, b) = (pair[0], pair[1]);
        let pick = match counts[a].cmp(&counts[b]) {
            std::cmp::Ordering::Less => a,
            std::cmp::Ordering::Greater => b,
            std::cmp::Ordering::Equal => a.min(b),
        };
        counts[pick] += 1;
        Ok(pick)
    })?;

    let softmax_opt = tree_opt_orientation(&softmax_tree).max_in_degree();
    let greedy_opt = tree_opt_orientation(&greedy_tree).max_in_degree();
    let pass = softmax_makespan >= required
        && greedy_makespan >= required
        && softmax_opt == 1
        && greedy_opt == 1;
    Ok((
        pass,
        format!(
            "m=64: forced makespan {softmax_makespan} on softmax and {greedy_makespan} on greedy \
             (need >= {required}); both realized pairing trees have optimum 1"
        ),
    ))
}

fn fat_tree_bad_nodes() -> Result<(bool, String)> {
    let config = RunConfig {
        instance: InstanceSource::Tree(gen_fat_tree(3, false)?),
        algorithm: Algorithm::Opt,
        trials: 20,
        seed: 0xAC06,
        order: OrderMode::Times,
        analyzers: vec![Analyzer::BadNodes],
        shuffle_labels: false,
    };
    let outcome = run_trials(&config, 0)?;
    let min_fraction = outcome
        .aggregate
        .min_bad_node_fraction
        .expect("the bad-nodes analyzer was requested");
    Ok((
        min_fraction >= BAD_NODE_FLOOR,
        format!(
            "fat tree k=3, 20 trials: min per-trial bad fraction {min_fraction} >= {BAD_NODE_FLOOR}"
        ),
    ))
}

fn chernoff_binomial_tail() -> Result<(bool, String)> {
    let bound = chernoff_lower_tail(27.0, 2.0 / 3.0)?;
    if (bound.simplified - CHERNOFF_SIMPLIFIED_BOUND).abs() > 1e-15 {
        return Ok((
            false,
            format!(
                "simplified bound drifted: computed {}, pinned {CHERNOFF_SIMPLIFIED_BOUND}",
                bound.simplified
            ),
        ));
    }
    let mut rng = stream_rng(0xAC07, 0, 0);
    let samples = 1_000_000u32;
    let mut below = 0u32;
    for _ in 0..samples {
        let mut hits = 0u32;
        for _ in 0..81 {
            if rng.gen::<f64>() < 1.0 / 3.0 {
                hits += 1;
            }
        }
        if hits < 9 {
            below += 1;
        }
    }
    let phat = f64::from(below) / f64::from(samples);
    Ok((
        phat <= CHERNOFF_SIMPLIFIED_BOUND,
        format!(
            "10^6 draws of Bin(81, 1/3): empirical P[X < 9] = {phat:e} <= e^-6 = {CHERNOFF_SIMPLIFIED_BOUND:.4e}"
        ),
    ))
}

fn recursive_bad_permutation() -> Result<(bool, String)> {
    let config = RunConfig {
        instance: InstanceSource::Tree(gen_recursive_tree(4, false)?),
        algorithm: Algorithm::Opt,
        trials: 20_000,
        seed: 0xAC08,
        order: OrderMode::Permutation,
        analyzers: vec![Analyzer::BadPermutation],
        shuffle_labels: false,
    };
    let outcome = run_trials(&config, 0)?;
    let by_label = outcome
        .aggregate
        .freq_bad_permutation_by_label
        .expect("the bad-permutation analyzer was requested");
    let measured = by_label[2];
    let off = (measured - BAD_PERM_TARGET).abs();
    Ok((
        off <= BAD_PERM_WINDOW,
        format!(
            "recursive tree D=4, 20000 trials: first label-2 root edge bad with frequency \
             {measured} vs 4/7 = {BAD_PERM_TARGET:.6} (window {BAD_PERM_WINDOW})"
        ),
    ))
}

fn recursive_tree_structure() -> Result<(bool, String)> {
    let expected: [&[u128]; 5] =
        [&[1], &[1, 3], &[1, 5, 15], &[1, 9, 45, 135], &[1, 17, 153, 765, 2295]];
    let mut pass = true;
    let mut sizes = Vec::new();
    for (d, want) in expected.iter().enumerate() {
        let counts = count_recursive_nodes(d as u32)?;
        pass &= counts == *want;
        let tree = gen_recursive_tree(d as u32, false)?;
        pass &= tree.node_count() as u128 == *want.last().unwrap();
        sizes.push(tree.node_count().to_string());
    }
    let mut bounded = true;
    for d in 0..=6u32 {
        let total = *count_recursive_nodes(d)?.last().unwrap();
        bounded &= total <= 4u128.pow(d * d);
    }
    pass &= bounded;
    Ok((
        pass,
        format!(
            "generated sizes for D=0..4 are ({}) matching the level recurrence; \
             n(D) <= 4^(D^2) holds through D=6",
            sizes.join(", ")
        ),
    ))
}

fn bottom_up_greedy_loading() -> Result<(bool, String)> {
    let config = RunConfig {
        instance: InstanceSource::Tree(gen_full_tree(9, 3, false)?),
        algorithm: Algorithm::Greedy,
        trials: 1000,
        seed: 0xAC0A,
        order: OrderMode::BottomUp,
        analyzers: vec![Analyzer::FullyLoaded],
        shuffle_labels: false,
    };
    let outcome = run_trials(&config, 0)?;
    let freq = outcome
        .aggregate
        .freq_root_fully_loaded
        .expect("the fully-loaded analyzer was requested");
    Ok((
        freq >= ROOT_LOADED_FLOOR,
        format!(
            "9-ary depth-3 tree, bottom-up greedy, 1000 trials: root fully loaded with frequency \
             {freq} >= {ROOT_LOADED_FLOOR} (pilot measured 0.9915 over 4000 trials)"
        ),
    ))
}

fn brute_force_cross_check() -> Result<(bool, String)> {
    let mut pass = true;

    for trial in 0..100u64 {
        let mut rng = stream_rng(0xAC0B, trial, 0);
        let machines = rng.gen_range(2..=4);
        let jobs = rng.gen_range(1..=8);
        let jobs: Vec<Job> = (0..jobs)
            .map(|id| {
                let finite = rng.gen_range(1..=machines);
                let picked = rand::seq::index::sample(&mut rng, machines, finite);
                Job::new(id, picked.iter().map(|m| (m, rng.gen_range(0.01..4.0))))
            })
            .collect();
        let instance = Instance { machines, jobs };
        let opt = brute_force_opt(&instance)?;
        let order = sample_permutation(instance.job_count(), &mut rng).order();
        let run = doubling_run(&instance, &order, PotentialParams::for_machines(machines)?)?;
        pass &= opt.makespan <= run.state.true_loads.max() + 1e-9;
    }

    let mut tree_optimum_always_one = true;
    for trial in 0..100u64 {
        let mut rng = stream_rng(0xAC0B, trial, 1);
        let nodes = rng.gen_range(2..=4);
        let mut parents: Vec<Option<usize>> = vec![None];
        for node in 1..nodes {
            parents.push(Some(rng.gen_range(0..node)));
        }
        let tree = Tree::from_parents(0, parents, None)?;
        let instance = graph_to_instance(&tree);
        let opt = brute_force_opt(&instance)?;
        tree_optimum_always_one &= opt.makespan == 1.0;
        let order = sample_permutation(tree.edge_count(), &mut rng).order();
        let greedy = greedy_run(&tree, &order, &mut rng)?;
        pass &= opt.makespan <= greedy.max_in_degree() as f64 + 1e-9;
        let run = doubling_run(&instance, &order, PotentialParams::for_machines(nodes)?)?;
        pass &= opt.makespan <= run.state.true_loads.max() + 1e-9;
    }
    pass &= tree_optimum_always_one;
    Ok((
        pass,
        format!(
            "200 instances with m <= 4 and n <= 8: brute-force optimum never above a softmax or \
             greedy makespan; all 100 tree optima exactly 1 ({tree_optimum_always_one})"
        ),
    ))
}

fn output_determinism() -> Result<(bool, String)> {
    let tree_config = RunConfig {
        instance: InstanceSource::Tree(gen_full_tree(3, 3, false)?),
        algorithm: Algorithm::Greedy,
        trials: 50,
        seed: 0xAC0C,
        order: OrderMode::Times,
        analyzers: vec![Analyzer::BadNodes, Analyzer::BadSubtree, Analyzer::FullyLoaded],
        shuffle_labels: true,
    };
    let display = json!({"check": "output-determinism"});
    let csv_serial = render_csv(&display, tree_config.seed, &run_trials(&tree_config, 1)?);
    let csv_parallel = render_csv(&display, tree_config.seed, &run_trials(&tree_config, 8)?);
    let csv_again = render_csv(&display, tree_config.seed, &run_trials(&tree_config, 8)?);

    let planted = gen_planted(
        &PlantedSpec {
            machines: 6,
            jobs: 24,
            opt_value: 1.0,
            finite_machines: 3,
            min_job_size: 0.0,
        },
        &mut stream_rng(0xAC0C, 0, 1),
    )?;
    let job_config = RunConfig {
        instance: InstanceSource::Unrelated(planted.instance),
        algorithm: Algorithm::Softmax,
        trials: 40,
        seed: 0xAC0C,
        order: OrderMode::Permutation,
        analyzers: Vec::new(),
        shuffle_labels: false,
    };
    let json_serial = render_json(&display, job_config.seed, &run_trials(&job_config, 1)?)?;
    let json_parallel = render_json(&display, job_config.seed, &run_trials(&job_config, 8)?)?;

    let pass = csv_serial == csv_parallel && csv_parallel == csv_again && json_serial == json_parallel;
    Ok((
        pass,
        format!(
            "tree CSV and planted JSON runs byte-identical at 1 and 8 threads and across reruns: {pass}"
        ),
    ))
}

fn greedy_monotonicity() -> Result<(bool, String)> {
    let mut pass = true;
    for trial in 0..100u64 {
        let mut rng = stream_rng(0xAC0D, trial, 0);
        let nodes = rng.gen_range(3..=40);
        let mut parents: Vec<Option<usize>> = vec![None];
        for node in 1..nodes {
            parents.push(Some(rng.gen_range(0..node)));
        }
        let tree = Tree::from_parents(0, parents, None)?;
        let order = sample_permutation(tree.edge_count(), &mut rng).order();
        let coin_seed: u64 = rng.gen();

        let full = greedy_run(&tree, &order, &mut ChaCha8Rng::seed_from_u64(coin_seed))?;
        let leaf_edges: Vec<usize> =
            (0..tree.edge_count()).filter(|&e| tree.is_leaf(tree.edge_child(e))).collect();
        let removed = leaf_edges[rng.gen_range(0..leaf_edges.len())];
        let reduced_order: Vec<usize> = order.iter().copied().filter(|&e| e != removed).collect();
        let reduced =
            greedy_run_subset(&tree, &reduced_order, &mut ChaCha8Rng::seed_from_u64(coin_seed))?;

        pass &= reduced.max_in_degree() <= full.max_in_degree();
    }
    Ok((
        pass,
        format!(
            "100 coupled replays on random trees: deleting one leaf edge never raised the greedy \
             max in-degree ({pass})"
        ),
    ))
}
