use std::path::Path;

use renewal_asym::config::{load, parse_problem, ProblemConfig};
use renewal_asym::discrete::{ArithmeticMode, Precision};

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_load() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(cfg.name(), path.file_stem().and_then(|s| s.to_str()));
            count += 1;
        }
    }
    assert!(count >= 8);
}

#[test]
fn geom_renewal_config_is_exact() {
    let ProblemConfig::Discrete { problem, settings, .. } = load(&configs().join("geom-renewal.toml")).unwrap() else {
        panic!("expected a discrete problem");
    };
    assert_eq!(settings.options.n_max, 2000);
    assert_eq!(settings.options.precision, Precision::Fixed(ArithmeticMode::ExactRational));
    assert_eq!(problem.a.value(3), num_rational::BigRational::new(1.into(), 8.into()));
}

#[test]
fn rejects_unknown_keys_and_kinds() {
    assert!(parse_problem("kind = \"discrete\"\nbogus = 1\n").is_err());
    assert!(parse_problem("kind = \"spiral\"\n").is_err());
    assert!(parse_problem("name = \"x\"\n").is_err());
    assert!(parse_problem("kind = \"continuous\"\n[a]\nkind = \"exp_mixture\"\nterms = [[1, -1]]\n").is_err());
}

#[test]
fn minimal_continuous_problem() {
    let text = "kind = \"continuous\"\n[a]\nkind = \"exp_mixture\"\nterms = [[1, 1]]\n[r]\nkind = \"exp_mixture\"\nterms = [[1, 1]]\n[kernel]\nd = 1\n";
    let cfg = parse_problem(text).unwrap();
    assert!(matches!(cfg, ProblemConfig::Continuous { .. }));
}
