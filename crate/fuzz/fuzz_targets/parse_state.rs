#![no_main]

use libfuzzer_sys::fuzz_target;
use qudit_decoherence::formats::{parse_state, write_state};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(state) = parse_state(text) {
        let again = parse_state(&write_state(&state)).expect("written state file parses");
        assert_eq!(again, state);
    }
});
