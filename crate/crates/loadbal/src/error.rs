use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("job {job} was never assigned")]
    UnassignedJob { job: usize },

    #[error("job {job} assigned to machine {machine}, where its load is infinite")]
    InfiniteAssignment { job: usize, machine: usize },

    /// The instance is unschedulable: some job cannot run on any machine.
    #[error("job {job} has no machine with finite load")]
    NoFiniteLoad { job: usize },

    /// Every machine that could take the job has load at or above the current guess.
    #[error("no machine feasible for job {job} under guess {guess}")]
    GuessTooSmall { job: usize, guess: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("size limit: {0}")]
    TooLarge(String),

    #[error("brute force search space of ~{space:.2e} states exceeds the limit of {limit:.0e}")]
    SearchSpaceTooLarge { space: f64, limit: f64 },

    #[error("adversary protocol violation: {0}")]
    Protocol(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
