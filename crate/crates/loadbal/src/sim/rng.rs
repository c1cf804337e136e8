//! Seed derivation for reproducible experiments.
//!
//! A run is identified by one master seed. Every trial draws from several
//! independent random streams (arrival order, greedy tie coins, node
//! shuffling, the phantom slot used by the permutation analyzer), and each
//! stream gets its own generator seeded by a `(master, trial, stream)`
//! triple. Trials therefore never share generator state, which is what lets
//! the runner execute them on any number of threads and still produce
//! identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per independent random decision a trial can make.
pub mod stream {
    /// Arrival order: permutation shuffles and arrival-time draws.
    pub const ORDER: u64 = 0;
    /// Tie-breaking coins for the greedy orienter.
    pub const TIES: u64 = 1;
    /// Node-identity shuffling.
    pub const SHUFFLE: u64 = 2;
    /// Phantom parent-edge slot in the permutation analyzer.
    pub const PHANTOM: u64 = 3;
}

/// Identifies one random stream of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSpec {
    /// Master seed of the whole run.
    pub master: u64,
    /// Trial index within the run.
    pub trial: u64,
    /// Stream tag from [`stream`].
    pub stream: u64,
}

impl RngSpec {
    /// Derived seed for this triple.
    pub fn seed(&self) -> u64 {
        child_seed(self.master, self.trial, self.stream)
    }

    /// Generator for this triple.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

/// One round of the splitmix64 mixer.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `(master, trial, stream)` triple.
///
/// Each coordinate passes through a full splitmix64 round before the next is
/// folded in, so neighbouring trials and streams land on unrelated seeds.
pub fn child_seed(master: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master).wrapping_add(trial)).wrapping_add(stream))
}

/// Generator for the `(master, trial, stream)` triple.
pub fn stream_rng(master: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, trial, stream))
}
