//! Counter-based random streams.
//!
//! Every random draw in the Monte Carlo harness comes from a stream keyed by
//! `(master seed, purpose, label, index)`: the first three select a ChaCha8
//! key, the index selects one of its 2⁶⁴ independent streams. A trial's
//! numbers therefore do not depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Purpose {
    /// H0 trajectories that set the detector threshold.
    Calibration,
    /// H1 trajectories that measure the miss probability.
    Evaluation,
    /// Long single-path runs.
    Ergodic,
    /// Ad hoc draws (tests, examples).
    Trajectory,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Calibration => 0x43_414c,
            Purpose::Evaluation => 0x45_5641,
            Purpose::Ergodic => 0x45_5247,
            Purpose::Trajectory => 0x54_524a,
        }
    }
}

/// Identifies one reproducible stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StreamId {
    pub master: u64,
    pub purpose: Purpose,
    pub label: u64,
    pub index: u64,
}

impl StreamId {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master
            ^ self.purpose.code().rotate_left(32)
            ^ self.label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.index);
        rng
    }
}

/// All streams sharing `(master, purpose, label)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StreamFamily {
    pub master: u64,
    pub purpose: Purpose,
    pub label: u64,
}

impl StreamFamily {
    pub fn new(master: u64, purpose: Purpose, label: u64) -> Self {
        Self {
            master,
            purpose,
            label,
        }
    }

    pub fn stream(&self, index: u64) -> StreamId {
        StreamId {
            master: self.master,
            purpose: self.purpose,
            label: self.label,
            index,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
