use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent, reproducible stream `stream` derived from `seed`.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream ids, one per consumer, so that adding draws in one place does not
// perturb another.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_BIAS_INIT: u64 = 2;
pub(crate) const STREAM_TRAIN: u64 = 3;
pub(crate) const STREAM_EVAL: u64 = 4;
pub(crate) const STREAM_SPLIT: u64 = 5;
pub(crate) const STREAM_GENERATE: u64 = 6;
pub(crate) const STREAM_DEFINITENESS: u64 = 7;
pub(crate) const STREAM_MC: u64 = 8;
