#![no_main]

use headpop::persist::{from_json, from_slice, to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = from_slice(data) {
        let text = to_json(&model).expect("loaded model re-encodes");
        assert_eq!(from_json(&text).expect("re-encoded model loads"), model);
        let _ = model.predict("a short title");
    }
});
