#![no_main]

use headpop::text::{encode, tokenize, Vocabulary};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(title) = std::str::from_utf8(data) else {
        return;
    };
    let tokens = tokenize(title);
    assert!(tokens.iter().all(|t| !t.is_empty()));
    let vocab = Vocabulary::build(&[tokens.clone()], None, 1);
    match encode(title, &vocab, 30) {
        Ok(seq) => assert_eq!(seq.len(), tokens.len().min(30)),
        Err(_) => assert!(tokens.is_empty()),
    }
});
