#![no_main]

use circuitflow::io::{parse_circuit_text, parse_circuit_text_unchecked, write_circuit_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_circuit_text_unchecked(text);
    if let Ok(c) = parse_circuit_text(text) {
        // anything accepted must survive its own writer
        let mut out = Vec::new();
        write_circuit_text(&c, &mut out).unwrap();
        let again = parse_circuit_text(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again, c);
    }
});
