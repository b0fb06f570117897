#![no_main]

use circuitflow::io::{read_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = read_csv(data, None) {
        let mut out = Vec::new();
        write_csv(&d, &mut out).unwrap();
        assert_eq!(read_csv(out.as_slice(), None).unwrap(), d);
    }
});
