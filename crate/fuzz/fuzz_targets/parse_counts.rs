#![no_main]

use libfuzzer_sys::fuzz_target;
use qudit_decoherence::formats::{parse_counts, write_counts};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(blocks) = parse_counts(text) {
        let again = parse_counts(&write_counts(&blocks)).expect("written counts file parses");
        assert_eq!(again, blocks);
    }
});
