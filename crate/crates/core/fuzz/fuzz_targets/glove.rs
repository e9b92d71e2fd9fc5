#![no_main]

use headpop::embeddings::parse_glove_reader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = parse_glove_reader(data) {
        if let Ok(d) = p.dim() {
            assert!(d > 0);
        } else {
            assert!(p.is_empty());
        }
    }
});
