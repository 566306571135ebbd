//! Deterministic random streams.
//!
//! A run is driven by one master seed. Every consumer of randomness gets its
//! own ChaCha8 stream whose seed is `mix64(master ^ stream_id)`, where
//! `stream_id` is itself `mix64` of a fixed per-purpose tag (plus the node
//! index for per-node streams). Streams therefore never share state, and the
//! channel realisation of a seed does not depend on which policy consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Purpose of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Node placement.
    Topology,
    /// Log-normal shadowing draws.
    Shadowing,
    /// Small-scale fading of one node during training.
    Fading(usize),
    /// Small-scale fading of one node during testing.
    TestFading(usize),
    /// Epsilon-greedy exploration.
    Exploration,
    /// Prioritized replay sampling.
    Replay,
    /// Weight initialisation of one node's networks.
    NetworkInit(usize),
    /// Uniform action draws of the random and rule-based baselines.
    Baseline,
    /// Baseline draws during testing.
    TestBaseline,
}

impl Stream {
    pub fn id(self) -> u64 {
        let (tag, index) = match self {
            Stream::Topology => (1u64, 0u64),
            Stream::Shadowing => (2, 0),
            Stream::Fading(i) => (3, i as u64),
            Stream::TestFading(i) => (4, i as u64),
            Stream::Exploration => (5, 0),
            Stream::Replay => (6, 0),
            Stream::NetworkInit(i) => (7, i as u64),
            Stream::Baseline => (8, 0),
            Stream::TestBaseline => (9, 0),
        };
        mix64((tag << 32) ^ index)
    }
}

pub fn stream_seed(master: u64, stream: Stream) -> u64 {
    mix64(master ^ stream.id())
}

pub fn stream_rng(master: u64, stream: Stream) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(master, stream))
}
