//! Deterministic random streams.
//!
//! Every noise source in a simulation draws from its own ChaCha stream keyed
//! by `(master seed, run index, channel)`, so runs are reproducible and
//! ensemble members never share randomness regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream channel reserved for process noise.
pub const PROCESS_CHANNEL: u64 = 0;
/// Stream channel for fault-schedule generation and fault signs.
pub const FAULT_CHANNEL: u64 = 1;
/// First channel used for sensor noise; sensor `i` uses `SENSOR_CHANNEL_BASE + i`.
pub const SENSOR_CHANNEL_BASE: u64 = 16;

/// Runs reserved per master seed before the offline-calibration block.
pub const CALIBRATION_RUN_OFFSET: u64 = 1 << 20;

pub fn stream(master_seed: u64, run: u64, channel: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((run << 8) | (channel & 0xff));
    rng
}

pub fn sensor_stream(master_seed: u64, run: u64, sensor: usize) -> SimRng {
    stream(master_seed, run, SENSOR_CHANNEL_BASE + sensor as u64)
}
