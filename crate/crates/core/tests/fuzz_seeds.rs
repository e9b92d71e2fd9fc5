//! Replays the checked-in fuzz seeds through the parsers with the same
//! invariants the fuzz targets assert.

use std::fs;
use std::path::PathBuf;

use headpop::corpus::{parse_csv, parse_jsonl};
use headpop::embeddings::parse_glove_reader;
use headpop::persist::{from_json, from_slice, to_json};
use headpop::text::{encode, tokenize, Vocabulary};
use headpop::training::{emit_table, parse_table};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn jsonl_seeds() {
    let results: Vec<_> = seeds("jsonl").iter().map(|(n, b)| (n.clone(), parse_jsonl(text(b)).is_ok())).collect();
    assert_eq!(results, [("overflow".to_string(), false), ("two_rows".to_string(), true)]);
}

#[test]
fn csv_seeds() {
    for (name, bytes) in seeds("csv") {
        let rows = parse_csv(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(rows.iter().all(|h| h.metric.is_finite()));
    }
}

#[test]
fn glove_seeds() {
    for (name, bytes) in seeds("glove") {
        let parsed = parse_glove_reader(bytes.as_slice());
        match name.as_str() {
            "dim_mismatch" => assert!(parsed.is_err()),
            _ => {
                let p = parsed.unwrap();
                assert_eq!(p.dim().unwrap(), 3);
                assert_eq!(p.duplicates, 1);
            }
        }
    }
}

#[test]
fn vocab_seeds() {
    for (name, bytes) in seeds("vocab") {
        let v = Vocabulary::from_json(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(Vocabulary::from_json(&v.to_json()).unwrap().tokens(), v.tokens());
    }
}

#[test]
fn model_file_seeds() {
    for (name, bytes) in seeds("model_file") {
        let m = from_slice(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(from_json(&to_json(&m).unwrap()).unwrap(), m);
        for cut in [0, bytes.len() / 2] {
            assert!(from_slice(&bytes[..cut]).is_err());
        }
    }
}

#[test]
fn results_table_seeds() {
    for (name, bytes) in seeds("results_table") {
        let rows = parse_table(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_table(&emit_table(&rows).unwrap()).unwrap(), rows);
    }
}

#[test]
fn tokenize_seeds() {
    for (_, bytes) in seeds("tokenize") {
        let title = text(&bytes);
        let tokens = tokenize(title);
        assert!(!tokens.is_empty());
        let vocab = Vocabulary::build(&[tokens.clone()], None, 1);
        assert_eq!(encode(title, &vocab, 30).unwrap().len(), tokens.len().min(30));
    }
}
