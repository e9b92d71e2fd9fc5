#![no_main]

use headpop::corpus::{label_by_group_median, parse_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_jsonl(text) {
        for h in &rows {
            assert!(h.metric.is_finite());
            assert!(!h.id.is_empty());
        }
        if !rows.is_empty() {
            let labeled = label_by_group_median(rows.clone()).unwrap();
            assert_eq!(labeled.len(), rows.len());
        }
    }
});
