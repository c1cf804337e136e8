//! Softmax potential and the two-phase online scheduler built on it.
//!
//! The potential `psi(x) = ln(sum_i e^{a*x_i}) / a` is a smoothed maximum of
//! the machine loads: `max(x) <= psi(x) <= max(x) + ln(m)/a`. Its gradient is
//! the softmax distribution over machines, and each arriving job is placed on
//! the machine whose (scaled) load increment raises the potential the least.
//! Halfway through the arrival sequence the scheduler zeroes its virtual loads
//! and continues, which caps how much any single phase can contribute to the
//! final maximum.

use crate::error::{Error, Result};
use crate::model::{check_order, Assignment, Instance, Job, LoadVector};

/// Smallest admissible smoothing rate; [`choose_a`] never returns less.
pub const A_MIN: f64 = 0.01;

/// Largest exponent fed to `exp` directly; beyond this [`delta_psi`] falls
/// back to an explicit potential difference.
const EXP_ARG_LIMIT: f64 = 700.0;

/// Smoothing rate `ln(ln m) / 6`, floored at [`A_MIN`].
pub fn choose_a(machines: usize) -> f64 {
    ((machines as f64).ln().ln() / 6.0).max(A_MIN)
}

/// Smoothing rate and machine count for one potential evaluation context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialParams {
    pub a: f64,
    pub machines: usize,
}

impl PotentialParams {
    pub fn new(a: f64, machines: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidInput(format!(
                "smoothing rate must be positive and finite, got {a}"
            )));
        }
        if machines == 0 {
            return Err(Error::InvalidInput(
                "potential needs at least one machine".into(),
            ));
        }
        Ok(PotentialParams { a, machines })
    }

    /// Parameters with the smoothing rate tuned to the machine count.
    pub fn for_machines(machines: usize) -> Result<Self> {
        Self::new(choose_a(machines), machines)
    }
}

fn max_entry(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smoothed maximum of the load vector, evaluated around the true maximum so
/// no intermediate exponential overflows.
pub fn psi(params: &PotentialParams, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), params.machines);
    let a = params.a;
    let m = max_entry(x);
    let s: f64 = x.iter().map(|&v| (a * (v - m)).exp()).sum();
    m + s.ln() / a
}

/// Gradient of [`psi`]: the softmax distribution over machines.
pub fn grad_psi(params: &PotentialParams, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    grad_psi_into(params, x, &mut out);
    out
}

/// [`grad_psi`] writing into a caller-provided buffer.
pub fn grad_psi_into(params: &PotentialParams, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), params.machines);
    debug_assert_eq!(out.len(), params.machines);
    let a = params.a;
    let m = max_entry(x);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        let e = (a * (v - m)).exp();
        *o = e;
        s += e;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Potential increase from adding `p` to coordinate `machine` of `x`.
///
/// Evaluated as `ln(1 + e^{a*(x_i - M)} * (e^{a*p} - 1) / S) / a`, which keeps
/// full precision when the increase is tiny relative to `psi(x)`. Exactly zero
/// when `p` is zero.
pub fn delta_psi(params: &PotentialParams, x: &[f64], machine: usize, p: f64) -> f64 {
    debug_assert_eq!(x.len(), params.machines);
    debug_assert!(machine < x.len());
    if p == 0.0 {
        return 0.0;
    }
    let a = params.a;
    if a * p <= EXP_ARG_LIMIT {
        let m = max_entry(x);
        let s: f64 = x.iter().map(|&v| (a * (v - m)).exp()).sum();
        let bump = (a * (x[machine] - m)).exp() * (a * p).exp_m1();
        (bump / s).ln_1p() / a
    } else {
        let mut y = x.to_vec();
        y[machine] += p;
        psi(params, &y) - psi(params, x)
    }
}

/// Mutable scheduler state threaded through a run.
///
/// `virtual_loads` are the guess-scaled loads the potential sees; they are
/// zeroed once, before the arrival with 0-based index `phase_boundary`.
/// `true_loads` are the unscaled loads actually accumulated on machines.
#[derive(Clone, Debug)]
pub struct SchedulerState {
    pub params: PotentialParams,
    pub virtual_loads: LoadVector,
    pub true_loads: LoadVector,
    /// Jobs placed so far.
    pub step: usize,
    /// Arrival index at which the virtual loads reset; `n/2` for `n` jobs.
    pub phase_boundary: usize,
    /// Current guess for the optimal makespan; job loads are divided by it.
    pub guess: f64,
    /// When set, loads at or above `guess` are treated as infinite.
    pub cutoff_at_guess: bool,
    phase_reset_done: bool,
}

impl SchedulerState {
    pub fn new(params: PotentialParams, jobs: usize) -> Self {
        Self::with_guess(params, jobs, 1.0, false)
    }

    pub fn with_guess(params: PotentialParams, jobs: usize, guess: f64, cutoff_at_guess: bool) -> Self {
        SchedulerState {
            params,
            virtual_loads: LoadVector::zeros(params.machines),
            true_loads: LoadVector::zeros(params.machines),
            step: 0,
            phase_boundary: jobs / 2,
            guess,
            cutoff_at_guess,
            phase_reset_done: false,
        }
    }

    /// Zero the virtual loads, e.g. after raising the guess.
    pub fn reset_virtual(&mut self) {
        self.virtual_loads.zero_out();
    }

    fn phase_reset_if_due(&mut self) {
        if self.phase_boundary > 0 && self.step == self.phase_boundary && !self.phase_reset_done {
            self.virtual_loads.zero_out();
            self.phase_reset_done = true;
        }
    }
}

/// Place one job on the machine minimizing [`delta_psi`] on the virtual loads.
///
/// Ties go to the lowest machine index. Machines where the job's load is at or
/// above the guess are skipped when the cutoff is active; if that leaves no
/// machine the result is [`Error::GuessTooSmall`].
pub fn softmax_step(state: &mut SchedulerState, job: &Job) -> Result<usize> {
    state.phase_reset_if_due();
    let g = state.guess;
    let mut best: Option<(usize, f64)> = None;
    let mut any_finite = false;
    for (&machine, &p) in &job.loads {
        if !p.is_finite() {
            continue;
        }
        if machine >= state.params.machines {
            return Err(Error::InvalidInput(format!(
                "job {} lists machine {machine}, but the scheduler has {} machines",
                job.id, state.params.machines
            )));
        }
        any_finite = true;
        if state.cutoff_at_guess && p >= g {
            continue;
        }
        let d = delta_psi(&state.params, state.virtual_loads.as_slice(), machine, p / g);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((machine, d));
        }
    }
    let (machine, _) = best.ok_or(if any_finite {
        Error::GuessTooSmall { job: job.id, guess: g }
    } else {
        Error::NoFiniteLoad { job: job.id }
    })?;
    let p = job.load_on(machine);
    state.virtual_loads.add(machine, p / g);
    state.true_loads.add(machine, p);
    state.step += 1;
    Ok(machine)
}

/// Snapshot handed to a run observer after each placement.
///
/// `grad_before` is the softmax gradient at the virtual loads the step saw
/// (after any phase reset); `virtual_after` includes the placed job.
pub struct StepObservation<'a> {
    /// 1-based arrival position.
    pub step: usize,
    pub job: &'a Job,
    pub chosen: usize,
    pub grad_before: &'a [f64],
    pub virtual_after: &'a [f64],
}

/// A completed scheduler run.
pub struct SoftmaxRun {
    pub assignment: Assignment,
    pub state: SchedulerState,
}

/// Run the two-phase scheduler over `instance` in the given arrival order.
pub fn softmax_run(instance: &Instance, order: &[usize], params: PotentialParams) -> Result<SoftmaxRun> {
    softmax_run_observed(instance, order, params, None)
}

/// [`softmax_run`] with an optional per-step observer.
pub fn softmax_run_observed(
    instance: &Instance,
    order: &[usize],
    params: PotentialParams,
    mut observer: Option<&mut dyn FnMut(StepObservation<'_>)>,
) -> Result<SoftmaxRun> {
    check_order(order, instance.job_count())?;
    let mut state = SchedulerState::new(params, instance.job_count());
    let mut assignment = Assignment::empty(instance.job_count());
    let mut grad_buf = vec![0.0; params.machines];
    for (t, &job_id) in order.iter().enumerate() {
        let job = &instance.jobs[job_id];
        if let Some(cb) = observer.as_mut() {
            state.phase_reset_if_due();
            grad_psi_into(&params, state.virtual_loads.as_slice(), &mut grad_buf);
            let chosen = softmax_step(&mut state, job)?;
            assignment.assign(job_id, chosen);
            cb(StepObservation {
                step: t + 1,
                job,
                chosen,
                grad_before: &grad_buf,
                virtual_after: state.virtual_loads.as_slice(),
            });
        } else {
            let chosen = softmax_step(&mut state, job)?;
            assignment.assign(job_id, chosen);
        }
    }
    Ok(SoftmaxRun { assignment, state })
}

/// A completed run of the guess-doubling wrapper.
pub struct DoublingRun {
    pub assignment: Assignment,
    pub state: SchedulerState,
    pub final_guess: f64,
    pub doublings: usize,
}

/// Run the scheduler with no prior makespan estimate.
///
/// The guess starts at the first job's cheapest load and is raised to
/// `2 * max(guess, LB)` whenever the running lower bound `LB` (the largest
/// cheapest-load seen) reaches half the guess; each raise zeroes the virtual
/// loads. Loads at or above the guess are treated as infinite throughout.
pub fn doubling_run(instance: &Instance, order: &[usize], params: PotentialParams) -> Result<DoublingRun> {
    check_order(order, instance.job_count())?;
    let mut state = SchedulerState::with_guess(params, instance.job_count(), 1.0, true);
    let mut assignment = Assignment::empty(instance.job_count());
    let mut lower_bound: f64 = 0.0;
    let mut doublings = 0usize;
    let mut first = true;
    for &job_id in order {
        let job = &instance.jobs[job_id];
        let (_, pmin) = job.min_load().ok_or(Error::NoFiniteLoad { job: job.id })?;
        if first {
            state.guess = if pmin > 0.0 { pmin } else { 1.0 };
            first = false;
        }
        lower_bound = lower_bound.max(pmin);
        if 2.0 * lower_bound > state.guess {
            state.guess = 2.0 * state.guess.max(lower_bound);
            state.reset_virtual();
            doublings += 1;
        }
        loop {
            match softmax_step(&mut state, job) {
                Ok(machine) => {
                    assignment.assign(job_id, machine);
                    break;
                }
                Err(Error::GuessTooSmall { .. }) => {
                    state.guess = 2.0 * state.guess.max(lower_bound);
                    state.reset_virtual();
                    doublings += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(DoublingRun {
        final_guess: state.guess,
        doublings,
        assignment,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(a: f64, machines: usize) -> PotentialParams {
        PotentialParams::new(a, machines).unwrap()
    }

    #[test]
    fn choose_a_matches_known_values() {
        assert!((choose_a(100) - 0.2545299376346502).abs() < 1e-15);
        assert!((choose_a(16) - 0.1699635734230377).abs() < 1e-15);
        assert!((choose_a(3) - 0.015674637936116516).abs() < 1e-15);
        assert_eq!(choose_a(2), A_MIN);
        assert_eq!(choose_a(1), A_MIN);
    }

    #[test]
    fn params_reject_bad_inputs() {
        assert!(PotentialParams::new(0.0, 2).is_err());
        assert!(PotentialParams::new(-1.0, 2).is_err());
        assert!(PotentialParams::new(f64::NAN, 2).is_err());
        assert!(PotentialParams::new(1.0, 0).is_err());
    }

    #[test]
    fn psi_matches_known_values() {
        let p = params(1.0, 4);
        assert!((psi(&p, &[0.0; 4]) - 1.3862943611198906).abs() < 1e-12);
        let p = params(2.0, 3);
        assert!((psi(&p, &[2.0, 0.0, 0.0]) - 2.0179881498740966).abs() < 1e-12);
    }

    #[test]
    fn psi_on_one_machine_is_the_load() {
        let p = params(0.7, 1);
        assert_eq!(psi(&p, &[3.25]), 3.25);
    }

    #[test]
    fn grad_matches_known_values() {
        let p = params(1.0, 2);
        let g = grad_psi(&p, &[1.0, 0.0]);
        assert!((g[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((g[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn delta_matches_known_values() {
        let p = params(1.0, 2);
        let x = [1.0, 0.0];
        assert!((delta_psi(&p, &x, 0, 0.2) - 0.15002077981980833).abs() < 1e-12);
        assert!((delta_psi(&p, &x, 1, 0.3) - 0.08992436136723514).abs() < 1e-12);
    }

    #[test]
    fn delta_of_zero_is_exactly_zero() {
        let p = params(0.3, 3);
        assert_eq!(delta_psi(&p, &[5.0, 1.0, 0.0], 1, 0.0), 0.0);
        assert!(delta_psi(&p, &[5.0, 1.0, 0.0], 1, 1e-12) > 0.0);
    }

    #[test]
    fn delta_survives_huge_increments() {
        let p = params(1.0, 2);
        let d = delta_psi(&p, &[0.0, 0.0], 0, 800.0);
        assert!(d.is_finite());
        assert!((d - (800.0 - 2.0f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn delta_agrees_with_potential_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.gen_range(1..=8);
            let p = params(rng.gen_range(0.01..2.0), m);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..20.0)).collect();
            let i = rng.gen_range(0..m);
            let inc = rng.gen_range(0.0..3.0);
            let mut y = x.clone();
            y[i] += inc;
            let direct = psi(&p, &y) - psi(&p, &x);
            assert!((delta_psi(&p, &x, i, inc) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn psi_sandwiched_between_max_and_max_plus_log_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let m = rng.gen_range(1..=64);
            let p = params(rng.gen_range(0.01..1.5), m);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..20.0)).collect();
            let hi = max_entry(&x);
            let v = psi(&p, &x);
            assert!(v >= hi - 1e-9);
            assert!(v <= hi + (m as f64).ln() / p.a + 1e-9);
        }
    }

    #[test]
    fn gradient_is_a_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let m = rng.gen_range(1..=64);
            let p = params(rng.gen_range(0.01..1.5), m);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..20.0)).collect();
            let g = grad_psi(&p, &x);
            assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(g.iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn gradient_grows_at_most_exponentially_per_unit_job() {
        // Adding p <= 1 to one coordinate multiplies no gradient entry by
        // more than e^{a*p}.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let m = rng.gen_range(2..=32);
            let p = params(rng.gen_range(0.01..1.5), m);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
            let i = rng.gen_range(0..m);
            let inc = rng.gen_range(0.0..=1.0);
            let before = grad_psi(&p, &x);
            let mut y = x.clone();
            y[i] += inc;
            let after = grad_psi(&p, &y);
            let cap = (p.a * inc).exp();
            for (b, a) in before.iter().zip(&after) {
                assert!(*a <= b * cap * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h = 1e-5;
        for _ in 0..20 {
            let m = rng.gen_range(2..=6);
            let p = params(rng.gen_range(0.05..1.0), m);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
            let g = grad_psi(&p, &x);
            for i in 0..m {
                let fd = delta_psi(&p, &x, i, h) / h;
                assert!((fd - g[i]).abs() < p.a * h + 1e-12);
            }
        }
    }

    #[test]
    fn psi_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100 {
            let m = rng.gen_range(1..=16);
            let p = params(rng.gen_range(0.01..1.5), m);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
            for lam in [0.25, 0.5, 0.75] {
                let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
                assert!(psi(&p, &mix) <= lam * psi(&p, &x) + (1.0 - lam) * psi(&p, &y) + 1e-9);
            }
        }
    }

    #[test]
    fn step_breaks_ties_toward_lowest_machine() {
        let p = params(1.0, 2);
        let mut state = SchedulerState::new(p, 1);
        let job = Job::new(0, [(0, 1.0), (1, 1.0)]);
        assert_eq!(softmax_step(&mut state, &job).unwrap(), 0);
    }

    #[test]
    fn step_reports_infeasible_jobs() {
        let p = params(1.0, 2);
        let mut state = SchedulerState::new(p, 1);
        let job = Job::new(3, []);
        match softmax_step(&mut state, &job) {
            Err(Error::NoFiniteLoad { job: 3 }) => {}
            other => panic!("expected NoFiniteLoad, got {other:?}"),
        }
    }

    #[test]
    fn cutoff_skips_machines_at_or_above_guess() {
        let p = params(1.0, 2);
        let mut state = SchedulerState::with_guess(p, 2, 2.0, true);
        let job = Job::new(0, [(0, 5.0), (1, 1.0)]);
        assert_eq!(softmax_step(&mut state, &job).unwrap(), 1);
        let stuck = Job::new(1, [(0, 5.0)]);
        match softmax_step(&mut state, &stuck) {
            Err(Error::GuessTooSmall { job: 1, guess }) => assert_eq!(guess, 2.0),
            other => panic!("expected GuessTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn virtual_loads_reset_halfway() {
        let inst = Instance {
            machines: 2,
            jobs: (0..4).map(|id| Job::new(id, [(0, 1.0), (1, 1.0)])).collect(),
        };
        let mut virtual_sums = Vec::new();
        let mut observer = |obs: StepObservation<'_>| {
            virtual_sums.push(obs.virtual_after.iter().sum::<f64>());
        };
        let run = softmax_run_observed(&inst, &[0, 1, 2, 3], params(1.0, 2), Some(&mut observer)).unwrap();
        // Two jobs accumulate, then the reset discards them before the third.
        assert_eq!(virtual_sums, vec![1.0, 2.0, 1.0, 2.0]);
        assert_eq!(run.state.true_loads.sum(), 4.0);
        assert!(run.assignment.is_complete());
    }

    #[test]
    fn single_job_run_never_resets() {
        let inst = Instance { machines: 2, jobs: vec![Job::new(0, [(0, 3.0)])] };
        let run = softmax_run(&inst, &[0], params(1.0, 2)).unwrap();
        assert_eq!(run.state.phase_boundary, 0);
        assert_eq!(run.state.virtual_loads.as_slice(), &[3.0, 0.0]);
    }

    #[test]
    fn run_rejects_bad_orders() {
        let inst = Instance { machines: 1, jobs: vec![Job::new(0, [(0, 1.0)])] };
        let p = params(1.0, 1);
        assert!(matches!(softmax_run(&inst, &[], p), Err(Error::InvalidSchedule(_))));
        assert!(matches!(softmax_run(&inst, &[1], p), Err(Error::InvalidSchedule(_))));
        assert!(matches!(
            doubling_run(&inst, &[0, 0], p),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn doubling_guess_tracks_the_largest_cheapest_load() {
        let inst = Instance {
            machines: 2,
            jobs: vec![Job::new(0, [(0, 1.0)]), Job::new(1, [(1, 10.0)])],
        };
        let run = doubling_run(&inst, &[0, 1], params(1.0, 2)).unwrap();
        assert_eq!(run.final_guess, 20.0);
        assert_eq!(run.doublings, 2);
        assert_eq!(run.assignment.machine_of(0), Some(0));
        assert_eq!(run.assignment.machine_of(1), Some(1));
        assert_eq!(run.state.true_loads.as_slice(), &[1.0, 10.0]);
    }

    #[test]
    fn doubling_places_every_job_below_the_guess() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let machines = 5;
        let jobs: Vec<Job> = (0..40)
            .map(|id| {
                Job::new(
                    id,
                    (0..machines).map(|m| (m, rng.gen_range(0.1..9.0))).collect::<Vec<_>>(),
                )
            })
            .collect();
        let inst = Instance { machines, jobs };
        let order: Vec<usize> = (0..40).collect();
        let run = doubling_run(&inst, &order, PotentialParams::for_machines(machines).unwrap()).unwrap();
        assert!(run.assignment.is_complete());
        for (job, machine) in run.assignment.iter() {
            let p = inst.jobs[job].load_on(machine.unwrap());
            assert!(p < run.final_guess);
        }
    }
}
