//! Probabilistic circuits over categorical data with flow-based structure learning.
//!
//! - [`circuit`]: the circuit model, validation, log-space evaluation and layering
//! - [`flows`]: top-down probabilities and circuit flows
//! - [`sampler`]: exact ancestral sampling
//! - [`prune`]: edge scoring, pruning and likelihood-drop bounds
//! - [`grow`]: the growing operator
//! - [`train`]: EM parameter learning, the prune/grow loop and compression
//! - [`structures`]: Chow-Liu trees, hidden Chow-Liu tree circuits and test structures
//! - [`io`]: file formats, configuration and histograms

pub mod circuit;
pub mod dataset;
pub mod error;
pub mod flows;
pub mod grow;
pub mod io;
pub mod prune;
pub mod sampler;
pub mod structures;
pub mod train;

pub use circuit::{Circuit, CircuitBuilder, EvalTrace, Evidence, InputDistribution, Scope, Unit, UnitId, UnitKind};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use flows::{aggregate_flows, circuit_flow, top_down, FlowTable, TopDownTable};

/// Seed for every random choice in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent stream `stream` of this seed.
    pub fn stream(self, stream: u64) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// A new seed derived from this one and a label, for nested components.
    /// Derived seeds fit in 63 bits so they survive a TOML round trip.
    pub fn derive(self, label: u64) -> RngSeed {
        use rand::RngCore;
        RngSeed(self.stream(label.wrapping_add(1 << 63)).next_u64() >> 1)
    }
}
