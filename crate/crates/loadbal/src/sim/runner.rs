//! Experiment runner: configuration, trial execution, and parallelism.
//!
//! A run is a config plus a master seed. Every trial derives its own
//! generators from `(seed, trial, stream)` triples, so trials are
//! independent of each other and of the thread that happens to execute
//! them: the runner produces byte-identical reports at any `--threads`
//! setting. The `softmax` algorithm is always driven through the doubling
//! guess wrapper, which needs no prior knowledge of the optimum.

use crate::error::{Error, Result};
use crate::generators::{AdaptiveAdversary, AdversaryStep};
use crate::graphbal::{
    graph_to_instance, greedy_orient_step, greedy_run, tree_opt_orientation, Tree,
};
use crate::model::{loads_under, validate, Instance, Job, Violation};
use crate::oracle::{brute_force_opt, opt_lower_bound};
use crate::potential::{doubling_run, softmax_step, PotentialParams, SchedulerState};
use crate::sim::analyze::{
    bad_permutation_by_label, check_fully_loaded, detect_bad_nodes, find_bad_subtree,
};
use crate::sim::report::{aggregate, RunOutcome, TrialEvents, TrialReport};
use crate::sim::rng::{child_seed, stream, stream_rng};
use crate::sim::schedule::{
    bottom_up_order, round_label_order, sample_arrival_times, sample_permutation,
    shuffle_node_ids, ArrivalSchedule,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// What one trial runs on.
///
/// Serialized untagged: a tree document, a job-instance document, or an
/// `{"adversary": {"machines": m}}` object selecting the live pairing game.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Tree(Tree),
    Unrelated(Instance),
    Adversary(AdversarySource),
}

/// Wrapper naming the adversary in source documents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversarySource {
    pub adversary: AdversaryParams,
}

/// Parameters of the pairing adversary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdversaryParams {
    /// Machine count; a power of two, at least 2.
    pub machines: usize,
}

/// Scheduling algorithm to run in each trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Potential-guided scheduler under the doubling guess wrapper.
    Softmax,
    /// Greedy edge orienter with fair-coin ties (trees only).
    Greedy,
    /// Offline optimum: orient toward children on trees, brute force on
    /// job instances.
    Opt,
}

/// How arrivals are drawn each trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    /// Uniform random permutation.
    Permutation,
    /// Independent uniform arrival times in `[0, 1)`.
    Times,
    /// Leaf edges first, shuffled within levels (trees only).
    BottomUp,
    /// Worst-case presentation: round labels ascending on labeled trees,
    /// or the live adversary's own order.
    Adversarial,
}

/// Optional per-trial analyses (trees only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analyzer {
    /// Fraction of internal nodes with enough child edges in their own
    /// arrival interval. Needs the `times` order.
    BadNodes,
    /// Search for a full bad subtree under the root. Needs `times`.
    BadSubtree,
    /// Badness of the first root edge per label, with a phantom parent
    /// edge. Needs a labeled tree and a uniform order.
    BadPermutation,
    /// Whether the root's in-degree reached its height.
    FullyLoaded,
}

/// Full description of one experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceSource,
    pub algorithm: Algorithm,
    pub trials: u64,
    pub seed: u64,
    pub order: OrderMode,
    #[serde(default)]
    pub analyzers: Vec<Analyzer>,
    #[serde(default)]
    pub shuffle_labels: bool,
}

/// Maps instance violations onto errors: a job that fits nowhere makes the
/// instance infeasible; anything else is a malformed input.
fn instance_feasible(instance: &Instance) -> Result<()> {
    let violations = validate(instance);
    for violation in &violations {
        if let Violation::NoFeasibleMachine { job } = violation {
            return Err(Error::NoFiniteLoad { job: *job });
        }
    }
    match violations.into_iter().next() {
        Some(violation) => Err(Error::InvalidInput(violation.to_string())),
        None => Ok(()),
    }
}

impl RunConfig {
    /// Rejects configurations whose pieces cannot work together.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("a run needs at least one trial".into()));
        }
        match &self.instance {
            InstanceSource::Unrelated(instance) => {
                instance_feasible(instance)?;
                if self.algorithm == Algorithm::Greedy {
                    return Err(Error::InvalidInput(
                        "the greedy orienter runs on tree instances only".into(),
                    ));
                }
                if !matches!(self.order, OrderMode::Permutation | OrderMode::Times) {
                    return Err(Error::InvalidInput(
                        "job instances support the permutation and times orders only".into(),
                    ));
                }
                if !self.analyzers.is_empty() {
                    return Err(Error::InvalidInput(
                        "tree analyzers do not apply to job instances".into(),
                    ));
                }
                if self.shuffle_labels {
                    return Err(Error::InvalidInput(
                        "node shuffling applies to tree instances only".into(),
                    ));
                }
            }
            InstanceSource::Tree(tree) => {
                let labeled = tree.labels().is_some();
                if self.order == OrderMode::Adversarial && !labeled {
                    return Err(Error::InvalidInput(
                        "the adversarial order needs a labeled tree".into(),
                    ));
                }
                if !self.analyzers.is_empty() && tree.edge_count() == 0 {
                    return Err(Error::InvalidInput(
                        "analyzers need a tree with at least one edge".into(),
                    ));
                }
                for analyzer in &self.analyzers {
                    match analyzer {
                        Analyzer::BadNodes | Analyzer::BadSubtree => {
                            if self.order != OrderMode::Times {
                                return Err(Error::InvalidInput(
                                    "the bad-nodes and bad-subtree analyzers bucket arrival \
                                     times; set order to \"times\""
                                        .into(),
                                ));
                            }
                        }
                        Analyzer::BadPermutation => {
                            if !labeled {
                                return Err(Error::InvalidInput(
                                    "the bad-permutation analyzer needs a labeled tree".into(),
                                ));
                            }
                            if !matches!(self.order, OrderMode::Permutation | OrderMode::Times) {
                                return Err(Error::InvalidInput(
                                    "the bad-permutation analyzer needs a uniform arrival order"
                                        .into(),
                                ));
                            }
                        }
                        Analyzer::FullyLoaded => {}
                    }
                }
            }
            InstanceSource::Adversary(source) => {
                let machines = source.adversary.machines;
                if machines < 2 || !machines.is_power_of_two() {
                    return Err(Error::InvalidInput(format!(
                        "the pairing adversary needs a power-of-two machine count of at \
                         least 2, got {machines}"
                    )));
                }
                if self.order != OrderMode::Adversarial {
                    return Err(Error::InvalidInput(
                        "adversary games use the adversarial order".into(),
                    ));
                }
                if self.algorithm == Algorithm::Opt {
                    return Err(Error::InvalidInput(
                        "the adversary reveals jobs online; run softmax or greedy against it"
                            .into(),
                    ));
                }
                if !self.analyzers.is_empty() {
                    return Err(Error::InvalidInput(
                        "tree analyzers do not apply to adversary games".into(),
                    ));
                }
                if self.shuffle_labels {
                    return Err(Error::InvalidInput(
                        "node shuffling applies to tree instances only".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Once-per-run work shared by all trials.
struct Prepared {
    /// Potential parameters, when the softmax scheduler will run.
    params: Option<PotentialParams>,
    /// Ratio denominator: the optimum, or its lower bound on job instances
    /// too large to brute-force.
    opt: f64,
    /// Optimal per-machine loads, when the opt algorithm runs on a job
    /// instance.
    opt_loads: Option<Vec<f64>>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    match &config.instance {
        InstanceSource::Tree(tree) => Ok(Prepared {
            params: match config.algorithm {
                Algorithm::Softmax => Some(PotentialParams::for_machines(tree.node_count())?),
                _ => None,
            },
            opt: if tree.edge_count() > 0 { 1.0 } else { 0.0 },
            opt_loads: None,
        }),
        InstanceSource::Unrelated(instance) => {
            let params = match config.algorithm {
                Algorithm::Softmax => Some(PotentialParams::for_machines(instance.machines)?),
                _ => None,
            };
            match brute_force_opt(instance) {
                Ok(exact) => {
                    let opt_loads = match config.algorithm {
                        Algorithm::Opt => Some(loads_under(instance, &exact.assignment)?.0),
                        _ => None,
                    };
                    Ok(Prepared { params, opt: exact.makespan, opt_loads })
                }
                Err(Error::SearchSpaceTooLarge { .. }) if config.algorithm != Algorithm::Opt => {
                    Ok(Prepared {
                        params,
                        opt: opt_lower_bound(&instance.jobs, instance.machines),
                        opt_loads: None,
                    })
                }
                Err(e) => Err(e),
            }
        }
        InstanceSource::Adversary(source) => Ok(Prepared {
            params: match config.algorithm {
                Algorithm::Softmax => {
                    Some(PotentialParams::for_machines(source.adversary.machines)?)
                }
                _ => None,
            },
            opt: 1.0,
            opt_loads: None,
        }),
    }
}

fn ratio_of(makespan: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        makespan / opt
    } else if makespan == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn max_of(loads: &[f64]) -> f64 {
    loads.iter().fold(0.0f64, |acc, &x| acc.max(x))
}

fn run_tree_trial(
    config: &RunConfig,
    prepared: &Prepared,
    base: &Tree,
    trial: u64,
) -> Result<TrialReport> {
    let mut order_rng = stream_rng(config.seed, trial, stream::ORDER);
    let shuffled = if config.shuffle_labels {
        let mut shuffle_rng = stream_rng(config.seed, trial, stream::SHUFFLE);
        Some(shuffle_node_ids(base, &mut shuffle_rng))
    } else {
        None
    };
    let (tree, perm) = match &shuffled {
        Some((tree, perm)) => (tree, Some(perm)),
        None => (base, None),
    };
    let edge_count = tree.edge_count();

    let schedule = match config.order {
        OrderMode::Permutation => sample_permutation(edge_count, &mut order_rng),
        OrderMode::Times => sample_arrival_times(edge_count, &mut order_rng),
        OrderMode::BottomUp => {
            ArrivalSchedule::Permutation(bottom_up_order(tree, &mut order_rng))
        }
        OrderMode::Adversarial => ArrivalSchedule::Permutation(round_label_order(tree)?),
    };
    let order = schedule.order();

    let (trial_loads, in_degrees) = match config.algorithm {
        Algorithm::Greedy => {
            let mut ties_rng = stream_rng(config.seed, trial, stream::TIES);
            let orientation = greedy_run(tree, &order, &mut ties_rng)?;
            (orientation.loads().0, orientation.in_degrees().to_vec())
        }
        Algorithm::Opt => {
            let orientation = tree_opt_orientation(tree);
            (orientation.loads().0, orientation.in_degrees().to_vec())
        }
        Algorithm::Softmax => {
            let instance = graph_to_instance(tree);
            let params = prepared.params.expect("prepared for the softmax run");
            let run = doubling_run(&instance, &order, params)?;
            let mut in_degrees = vec![0usize; tree.node_count()];
            for (_, machine) in run.assignment.iter() {
                if let Some(machine) = machine {
                    in_degrees[machine] += 1;
                }
            }
            (run.state.true_loads.0, in_degrees)
        }
    };
    let makespan = max_of(&trial_loads);

    let k = tree.height(tree.root());
    let mut events = TrialEvents::default();
    for analyzer in &config.analyzers {
        match analyzer {
            Analyzer::BadNodes => {
                let times = schedule.times().expect("validated: times order");
                events.bad_node_fraction = Some(detect_bad_nodes(tree, times, k)?.fraction());
            }
            Analyzer::BadSubtree => {
                let times = schedule.times().expect("validated: times order");
                events.bad_subtree_found = Some(find_bad_subtree(tree, times, k)?.is_some());
            }
            Analyzer::BadPermutation => {
                let mut phantom_rng = stream_rng(config.seed, trial, stream::PHANTOM);
                let slot = phantom_rng.gen_range(0..=edge_count);
                events.bad_permutation_by_label =
                    Some(bad_permutation_by_label(tree, &order, slot)?);
            }
            Analyzer::FullyLoaded => {
                let loaded = check_fully_loaded(tree, &in_degrees)?;
                events.root_fully_loaded = Some(loaded[tree.root()]);
            }
        }
    }

    let loads = match perm {
        Some(perm) => (0..base.node_count()).map(|u| trial_loads[perm[u]]).collect(),
        None => trial_loads,
    };
    Ok(TrialReport {
        trial,
        seed: child_seed(config.seed, trial, stream::ORDER),
        makespan,
        opt: prepared.opt,
        ratio: ratio_of(makespan, prepared.opt),
        loads,
        events,
    })
}

fn run_instance_trial(
    config: &RunConfig,
    prepared: &Prepared,
    instance: &Instance,
    trial: u64,
) -> Result<TrialReport> {
    let mut order_rng = stream_rng(config.seed, trial, stream::ORDER);
    let jobs = instance.job_count();
    let schedule = match config.order {
        OrderMode::Permutation => sample_permutation(jobs, &mut order_rng),
        OrderMode::Times => sample_arrival_times(jobs, &mut order_rng),
        _ => unreachable!("validated: job instances use permutation or times"),
    };
    let (loads, makespan) = match config.algorithm {
        Algorithm::Softmax => {
            let params = prepared.params.expect("prepared for the softmax run");
            let run = doubling_run(instance, &schedule.order(), params)?;
            let makespan = run.state.true_loads.max();
            (run.state.true_loads.0, makespan)
        }
        Algorithm::Opt => {
            let loads = prepared.opt_loads.clone().expect("prepared for the opt run");
            (loads, prepared.opt)
        }
        Algorithm::Greedy => unreachable!("validated: greedy needs a tree"),
    };
    Ok(TrialReport {
        trial,
        seed: child_seed(config.seed, trial, stream::ORDER),
        makespan,
        opt: prepared.opt,
        ratio: ratio_of(makespan, prepared.opt),
        loads,
        events: TrialEvents::default(),
    })
}

/// Online player in an adversary game.
enum Driver {
    Softmax(SchedulerState),
    Greedy { counts: Vec<usize>, ties: ChaCha8Rng },
}

impl Driver {
    fn place(&mut self, job: &Job) -> Result<usize> {
        match self {
            Driver::Softmax(state) => softmax_step(state, job),
            Driver::Greedy { counts, ties } => {
                let machines: Vec<usize> = job.loads.keys().copied().collect();
                if machines.len() != 2 {
                    return Err(Error::Protocol(format!(
                        "adversary job {} offers {} machines instead of 2",
                        job.id,
                        machines.len()
                    )));
                }
                let pick = greedy_orient_step(counts, machines[0], machines[1], ties);
                counts[pick] += 1;
                Ok(pick)
            }
        }
    }
}

fn run_adversary_trial(
    config: &RunConfig,
    prepared: &Prepared,
    machines: usize,
    trial: u64,
) -> Result<TrialReport> {
    let mut adversary = AdaptiveAdversary::new(machines)?;
    let mut driver = match config.algorithm {
        Algorithm::Softmax => {
            let params = prepared.params.expect("prepared for the softmax run");
            Driver::Softmax(SchedulerState::new(params, machines - 1))
        }
        Algorithm::Greedy => Driver::Greedy {
            counts: vec![0; machines],
            ties: stream_rng(config.seed, trial, stream::TIES),
        },
        Algorithm::Opt => unreachable!("validated: the adversary needs an online player"),
    };

    let mut loads = vec![0.0f64; machines];
    let mut choices: Vec<usize> = Vec::new();
    loop {
        match adversary.next(&choices)? {
            AdversaryStep::Done => break,
            AdversaryStep::Jobs(batch) => {
                choices = batch
                    .iter()
                    .map(|job| {
                        let machine = driver.place(job)?;
                        loads[machine] += job.load_on(machine);
                        Ok(machine)
                    })
                    .collect::<Result<Vec<usize>>>()?;
            }
        }
    }
    let makespan = max_of(&loads);
    Ok(TrialReport {
        trial,
        seed: child_seed(config.seed, trial, stream::ORDER),
        makespan,
        opt: prepared.opt,
        ratio: ratio_of(makespan, prepared.opt),
        loads,
        events: TrialEvents::default(),
    })
}

fn run_trial(config: &RunConfig, prepared: &Prepared, trial: u64) -> Result<TrialReport> {
    match &config.instance {
        InstanceSource::Tree(tree) => run_tree_trial(config, prepared, tree, trial),
        InstanceSource::Unrelated(instance) => {
            run_instance_trial(config, prepared, instance, trial)
        }
        InstanceSource::Adversary(source) => {
            run_adversary_trial(config, prepared, source.adversary.machines, trial)
        }
    }
}

/// Runs all trials of a config, on `threads` worker threads.
///
/// `threads == 0` uses one worker per CPU; `threads == 1` runs serially on
/// the calling thread. Reports come back in trial order and are identical
/// for every thread setting.
pub fn run_trials(config: &RunConfig, threads: usize) -> Result<RunOutcome> {
    config.validate()?;
    let prepared = prepare(config)?;
    let reports: Result<Vec<TrialReport>> = if threads == 1 {
        (0..config.trials).map(|t| run_trial(config, &prepared, t)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| {
            Error::InvalidInput(format!("could not build a pool of {threads} threads: {e}"))
        })?;
        pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|t| run_trial(config, &prepared, t))
                .collect()
        })
    };
    let reports = reports?;
    let summary = aggregate(&reports);
    Ok(RunOutcome { reports, aggregate: summary })
}
