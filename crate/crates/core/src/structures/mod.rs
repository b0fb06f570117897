//! Initial structures: Chow-Liu trees, hidden Chow-Liu tree circuits, and
//! generators for tests and synthetic experiments.

mod chow_liu;
mod generators;
mod hclt;

pub use chow_liu::{chow_liu, estimate_mutual_info, quantize, ChowLiuTree};
pub use generators::{
    dense_mixture, fully_factorized, planted_circuit, random_circuit, uniform_dataset, PlantedConfig, PlantedTree,
    RandomCircuitConfig,
};
pub use hclt::{build_hclt, compile_hclt, HcltConfig};
