#![no_main]

use circuitflow::io::{circuit_from_bytes, circuit_from_bytes_unchecked, circuit_to_bytes};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = circuit_from_bytes_unchecked(data);
    if let Ok(c) = circuit_from_bytes(data) {
        // re-encoding is canonical even if the input was not
        let bytes = circuit_to_bytes(&c);
        let again = circuit_from_bytes(&bytes).unwrap();
        assert_eq!(again, c);
        assert_eq!(circuit_to_bytes(&again), bytes);
    }
});
