#![no_main]

use circuitflow::io::{dataset_from_bytes, dataset_to_bytes};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = dataset_from_bytes(data) {
        let bytes = dataset_to_bytes(&d);
        assert_eq!(dataset_from_bytes(&bytes).unwrap(), d);
    }
});
