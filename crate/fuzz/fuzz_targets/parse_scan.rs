#![no_main]

use libfuzzer_sys::fuzz_target;
use qudit_decoherence::formats::{parse_scan, write_scan};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((geom, scan)) = parse_scan(text) {
        let again = parse_scan(&write_scan(&geom, &scan)).expect("written scan file parses");
        assert_eq!(again, (geom, scan));
    }
});
