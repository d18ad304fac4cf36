use std::path::{Path, PathBuf};

use renewal_asym::config::{parse_precision, parse_problem};
use renewal_asym::numeric::{parse_rational, rational_to_f64};

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn problem_seeds() {
    let files = seeds("parse_problem");
    assert!(!files.is_empty());
    let mut accepted = 0;
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        if parse_problem(&text).is_ok() {
            accepted += 1;
        }
    }
    assert!(accepted >= 8, "only {accepted} seeds parse");
}

#[test]
fn rational_seeds() {
    let files = seeds("parse_rational");
    assert!(!files.is_empty());
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        if let Ok(r) = parse_rational(&text) {
            let _ = rational_to_f64(&r);
        }
        let _ = parse_precision(&text);
    }
}
