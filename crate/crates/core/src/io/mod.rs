//! Reading and writing circuits, datasets, experiment configs and parameter
//! histograms.

mod circuit_io;
mod config;
mod dataset_io;
mod histogram;

pub use circuit_io::{
    circuit_from_bytes, circuit_from_bytes_unchecked, circuit_to_bytes, load_circuit, load_circuit_unchecked,
    parse_circuit_text, parse_circuit_text_unchecked, save_circuit, write_circuit_text, CircuitFormat, BINARY_VERSION,
    LOAD_RENORMALIZE_TOL, TEXT_VERSION,
};
pub use config::{CompressConfig, DataPaths, ExperimentConfig};
pub use dataset_io::{
    dataset_from_bytes, dataset_to_bytes, load_dataset, read_csv, save_dataset, write_csv, DATASET_VERSION,
};
pub use histogram::{bin_of, param_histogram, Histogram};
