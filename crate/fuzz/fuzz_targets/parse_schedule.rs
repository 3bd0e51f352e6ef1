#![no_main]

use libfuzzer_sys::fuzz_target;
use qudit_decoherence::formats::{parse_schedule, write_schedule};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(film) = parse_schedule(text) {
        let again = parse_schedule(&write_schedule(&film)).expect("written schedule file parses");
        assert_eq!(again, film);
    }
});
