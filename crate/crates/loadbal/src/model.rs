//! Problem model: unrelated-machine instances, jobs, load vectors, and assignments.
//!
//! A job carries a sparse map from machine index to a finite nonnegative load;
//! machines absent from the map cannot run the job at all. Job ids are dense
//! `0..n` and double as indices into [`Instance::jobs`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance for load-sum conservation checks.
pub const CONSERVATION_ABS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub id: usize,
    pub loads: BTreeMap<usize, f64>,
}

impl Job {
    pub fn new(id: usize, loads: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Job { id, loads: loads.into_iter().collect() }
    }

    /// Load of this job on `machine`; infinite when the machine cannot run it.
    pub fn load_on(&self, machine: usize) -> f64 {
        self.loads.get(&machine).copied().unwrap_or(f64::INFINITY)
    }

    /// Machine with the smallest finite load, lowest index on ties.
    pub fn min_load(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (&i, &p) in &self.loads {
            if p.is_finite() && best.map_or(true, |(_, b)| p < b) {
                best = Some((i, p));
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub machines: usize,
    pub jobs: Vec<Job>,
}

impl Instance {
    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Per-machine load totals. Entries are finite and nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadVector(pub Vec<f64>);

impl LoadVector {
    pub fn zeros(machines: usize) -> Self {
        LoadVector(vec![0.0; machines])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Largest entry; 0 when there are no machines.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn add(&mut self, machine: usize, amount: f64) {
        self.0[machine] += amount;
    }

    pub fn zero_out(&mut self) {
        self.0.fill(0.0);
    }
}

/// New vector with the job's load on `machine` added to that single coordinate.
pub fn apply(loads: &LoadVector, job: &Job, machine: usize) -> Result<LoadVector> {
    if machine >= loads.len() {
        return Err(Error::InvalidInput(format!(
            "machine {machine} out of range for {} machines",
            loads.len()
        )));
    }
    let p = job.load_on(machine);
    if !p.is_finite() {
        return Err(Error::InfiniteAssignment { job: job.id, machine });
    }
    let mut out = loads.clone();
    out.0[machine] += p;
    Ok(out)
}

/// Job-to-machine map, indexed by dense job id.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    choices: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(jobs: usize) -> Self {
        Assignment { choices: vec![None; jobs] }
    }

    pub fn from_choices(choices: Vec<Option<usize>>) -> Self {
        Assignment { choices }
    }

    pub fn assign(&mut self, job: usize, machine: usize) {
        self.choices[job] = Some(machine);
    }

    pub fn machine_of(&self, job: usize) -> Option<usize> {
        self.choices.get(job).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.choices.iter().all(Option::is_some)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Option<usize>)> + '_ {
        self.choices.iter().enumerate().map(|(j, &m)| (j, m))
    }
}

/// Per-machine loads induced by a complete assignment.
pub fn loads_under(instance: &Instance, assignment: &Assignment) -> Result<LoadVector> {
    let mut loads = LoadVector::zeros(instance.machines);
    for job in &instance.jobs {
        let machine = assignment
            .machine_of(job.id)
            .ok_or(Error::UnassignedJob { job: job.id })?;
        if machine >= instance.machines {
            return Err(Error::InvalidInput(format!(
                "job {} assigned to machine {machine}, but the instance has {} machines",
                job.id, instance.machines
            )));
        }
        let p = job.load_on(machine);
        if !p.is_finite() {
            return Err(Error::InfiniteAssignment { job: job.id, machine });
        }
        loads.0[machine] += p;
    }
    Ok(loads)
}

/// Maximum machine load under a complete assignment.
pub fn makespan(instance: &Instance, assignment: &Assignment) -> Result<f64> {
    Ok(loads_under(instance, assignment)?.max())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoMachines,
    JobIdNotDense { position: usize, id: usize },
    NoFeasibleMachine { job: usize },
    MachineOutOfRange { job: usize, machine: usize },
    BadLoad { job: usize, machine: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoMachines => write!(f, "instance has no machines"),
            Violation::JobIdNotDense { position, id } => {
                write!(f, "job at position {position} has id {id}; ids must be dense 0..n")
            }
            Violation::NoFeasibleMachine { job } => {
                write!(f, "job {job} has no machine with finite load")
            }
            Violation::MachineOutOfRange { job, machine } => {
                write!(f, "job {job} lists machine {machine}, which does not exist")
            }
            Violation::BadLoad { job, machine, value } => {
                write!(f, "job {job} has load {value} on machine {machine}; loads must be finite and nonnegative")
            }
        }
    }
}

/// Checks that `order` is a permutation of `0..n`.
pub fn check_order(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidSchedule(format!(
            "order has {} entries, expected a permutation of 0..{n}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n {
            return Err(Error::InvalidSchedule(format!(
                "order mentions index {i}, but valid indices run 0..{n}"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidSchedule(format!("order lists index {i} twice")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// All structural problems with an instance, empty when it is well-formed.
pub fn validate(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    if instance.machines == 0 {
        out.push(Violation::NoMachines);
    }
    for (position, job) in instance.jobs.iter().enumerate() {
        if job.id != position {
            out.push(Violation::JobIdNotDense { position, id: job.id });
        }
        let mut feasible = 0usize;
        for (&machine, &value) in &job.loads {
            if machine >= instance.machines {
                out.push(Violation::MachineOutOfRange { job: job.id, machine });
            }
            if !value.is_finite() || value < 0.0 {
                out.push(Violation::BadLoad { job: job.id, machine, value });
            } else {
                feasible += 1;
            }
        }
        if feasible == 0 {
            out.push(Violation::NoFeasibleMachine { job: job.id });
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct JobWire {
    id: usize,
    loads: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceWire {
    machines: usize,
    jobs: Vec<JobWire>,
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = InstanceWire {
            machines: self.machines,
            jobs: self
                .jobs
                .iter()
                .map(|j| JobWire {
                    id: j.id,
                    loads: j.loads.iter().map(|(&m, &p)| (m.to_string(), p)).collect(),
                })
                .collect(),
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = InstanceWire::deserialize(deserializer)?;
        let mut jobs = Vec::with_capacity(wire.jobs.len());
        for wj in wire.jobs {
            let mut loads = BTreeMap::new();
            for (key, value) in wj.loads {
                let machine: usize = key.parse().map_err(|_| {
                    serde::de::Error::custom(format!("machine key {key:?} is not a decimal index"))
                })?;
                loads.insert(machine, value);
            }
            jobs.push(Job { id: wj.id, loads });
        }
        Ok(Instance { machines: wire.machines, jobs })
    }
}
