#![no_main]

use headpop::corpus::parse_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_csv(text) {
        for h in rows {
            assert!(h.metric.is_finite());
        }
    }
});
