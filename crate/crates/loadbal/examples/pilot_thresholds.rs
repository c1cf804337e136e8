//! Measures the empirical frequencies behind the frozen test thresholds.
//!
//! Run with `cargo run --release --example pilot_thresholds`. Each section
//! prints the statistic a test pins, at larger sample sizes than the test
//! itself uses, so the thresholds can be set with several standard
//! deviations of slack.

use loadbal::generators::{
    gen_fat_tree, gen_full_tree, gen_planted, gen_recursive_tree, PlantedSpec,
};
use loadbal::oracle::check_phase1_inequality;
use loadbal::potential::{softmax_run, PotentialParams};
use loadbal::sim::rng::{stream, stream_rng};
use loadbal::sim::runner::{
    run_trials, Algorithm, Analyzer, InstanceSource, OrderMode, RunConfig,
};
use loadbal::sim::schedule::sample_permutation;
use loadbal::Result;
use std::time::Instant;

fn binomial_sd(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn section(title: &str) {
    println!("\n== {title} ==");
}

fn root_loading_pilot() -> Result<()> {
    section("root fully loaded: 9-ary depth 3, greedy, bottom-up");
    let trials = 4000u64;
    let config = RunConfig {
        instance: InstanceSource::Tree(gen_full_tree(9, 3, false)?),
        algorithm: Algorithm::Greedy,
        trials,
        seed: 0x9A17,
        order: OrderMode::BottomUp,
        analyzers: vec![Analyzer::FullyLoaded],
        shuffle_labels: false,
    };
    let started = Instant::now();
    let outcome = run_trials(&config, 0)?;
    let freq = outcome.aggregate.freq_root_fully_loaded.unwrap();
    println!(
        "freq = {freq:.4} over {trials} trials (sd {:.4}, sd at 1000 trials {:.4}) in {:.1?}",
        binomial_sd(freq, trials),
        binomial_sd(freq, 1000),
        started.elapsed()
    );
    Ok(())
}

fn fat_tree_pilot() -> Result<()> {
    section("fat tree k=3: bad-node fractions and subtree witnesses, arrival times");
    let trials = 20u64;
    let config = RunConfig {
        instance: InstanceSource::Tree(gen_fat_tree(3, false)?),
        algorithm: Algorithm::Opt,
        trials,
        seed: 0xFA7,
        order: OrderMode::Times,
        analyzers: vec![Analyzer::BadNodes, Analyzer::BadSubtree],
        shuffle_labels: false,
    };
    let started = Instant::now();
    let outcome = run_trials(&config, 0)?;
    println!(
        "bad fraction: mean {:.5}, min {:.5}; subtree witness freq {:.3} over {trials} trials in {:.1?}",
        outcome.aggregate.mean_bad_node_fraction.unwrap(),
        outcome.aggregate.min_bad_node_fraction.unwrap(),
        outcome.aggregate.freq_bad_subtree.unwrap(),
        started.elapsed()
    );
    Ok(())
}

fn bad_permutation_pilot() -> Result<()> {
    section("recursive tree D=4: first root edge per label bad, with phantom");
    let trials = 5000u64;
    let config = RunConfig {
        instance: InstanceSource::Tree(gen_recursive_tree(4, false)?),
        algorithm: Algorithm::Opt,
        trials,
        seed: 0xBAD,
        order: OrderMode::Permutation,
        analyzers: vec![Analyzer::BadPermutation],
        shuffle_labels: false,
    };
    let started = Instant::now();
    let outcome = run_trials(&config, 0)?;
    let freqs = outcome.aggregate.freq_bad_permutation_by_label.unwrap();
    for (d, freq) in freqs.iter().enumerate() {
        println!("label {d}: freq {freq:.4} (sd {:.4})", binomial_sd(*freq, trials));
    }
    println!("label 2 target 4/7 = {:.4}; elapsed {:.1?}", 4.0 / 7.0, started.elapsed());
    Ok(())
}

fn softmax_upper_bound_pilot() -> Result<()> {
    section("softmax mean makespan: planted m=100, n=2000, opt 1");
    let spec = PlantedSpec {
        machines: 100,
        jobs: 2000,
        opt_value: 1.0,
        finite_machines: 3,
        min_job_size: 0.0,
    };
    let mut gen_rng = stream_rng(0x9E4, 0, stream::ORDER);
    let planted = gen_planted(&spec, &mut gen_rng)?;
    let params = PotentialParams::for_machines(100)?;
    let a = params.a;
    let cap = 2.0 * (2.0 * (2.0 * a).exp() + (100.0f64).ln() / a);
    let trials = 20u64;
    let started = Instant::now();
    let mut makespans = Vec::new();
    for trial in 0..trials {
        let mut rng = stream_rng(0x9E5, trial, stream::ORDER);
        let order = sample_permutation(2000, &mut rng).order();
        let run = softmax_run(&planted.instance, &order, params)?;
        makespans.push(run.state.true_loads.max());
    }
    let mean = makespans.iter().sum::<f64>() / trials as f64;
    let max = makespans.iter().fold(0.0f64, |acc, &x| acc.max(x));
    println!(
        "mean {mean:.3}, max {max:.3}, cap {cap:.3} over {trials} trials in {:.1?}",
        started.elapsed()
    );
    Ok(())
}

fn phase_inequality_pilot() -> Result<()> {
    section("first-phase inequality margin: planted m=50, n=1000, opt 1");
    let spec = PlantedSpec {
        machines: 50,
        jobs: 1000,
        opt_value: 1.0,
        finite_machines: 3,
        min_job_size: 0.0,
    };
    let mut gen_rng = stream_rng(0xE91, 0, stream::ORDER);
    let planted = gen_planted(&spec, &mut gen_rng)?;
    let params = PotentialParams::for_machines(50)?;
    let started = Instant::now();
    let mut min_margin = f64::INFINITY;
    for trial in 0..10u64 {
        let mut rng = stream_rng(0xE92, trial, stream::ORDER);
        let order = sample_permutation(1000, &mut rng).order();
        let check = check_phase1_inequality(&planted.instance, &planted.hidden, &order, params)?;
        min_margin = min_margin.min(check.bound - check.phase1_peak);
    }
    println!("min margin (bound - peak) {min_margin:.4} over 10 orders in {:.1?}", started.elapsed());
    Ok(())
}

fn adversary_pilot() -> Result<()> {
    section("pairing adversary m=64 vs softmax and greedy");
    for algorithm in [Algorithm::Softmax, Algorithm::Greedy] {
        let config = RunConfig {
            instance: InstanceSource::Adversary(loadbal::sim::runner::AdversarySource {
                adversary: loadbal::sim::runner::AdversaryParams { machines: 64 },
            }),
            algorithm,
            trials: 5,
            seed: 0xADE,
            order: OrderMode::Adversarial,
            analyzers: vec![],
            shuffle_labels: false,
        };
        let outcome = run_trials(&config, 1)?;
        println!(
            "{algorithm:?}: min makespan {}, target >= 6",
            outcome.aggregate.min_makespan
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    root_loading_pilot()?;
    fat_tree_pilot()?;
    bad_permutation_pilot()?;
    softmax_upper_bound_pilot()?;
    phase_inequality_pilot()?;
    adversary_pilot()?;
    println!();
    Ok(())
}
