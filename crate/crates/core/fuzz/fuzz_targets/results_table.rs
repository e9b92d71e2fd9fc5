#![no_main]

use headpop::training::{emit_table, parse_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_table(text) {
        if let Ok(again) = emit_table(&rows) {
            let reparsed = parse_table(&again).expect("emitted table parses");
            assert_eq!(reparsed.len(), rows.len());
        }
    }
});
