#![no_main]

use headpop_service::{parse_score_request, MAX_TITLE_BYTES};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(title) = parse_score_request(data) {
        assert!(!title.trim().is_empty());
        assert!(title.len() <= MAX_TITLE_BYTES);
    }
});
