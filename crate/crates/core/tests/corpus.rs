use renewal_asym::corpus::{self, Observed};

fn run(name: &str) -> corpus::CorpusRun {
    corpus::run(&corpus::builtin(name).unwrap()).unwrap()
}

#[test]
fn every_entry_meets_its_expected_facts() {
    let runs: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus::NAMES.iter().map(|n| scope.spawn(move || run(n))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let failures: Vec<String> = runs
        .iter()
        .flat_map(|r| r.facts.iter().filter(|f| !f.pass).map(move |f| format!("{}: {} observed {:?}", r.name, f.name, f.observed)))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn catalog_matches_names() {
    let listed: Vec<_> = corpus::list().iter().map(|e| e.name).collect();
    assert_eq!(listed, corpus::NAMES.to_vec());
    for entry in corpus::list() {
        assert!(!entry.expected.is_empty(), "{} has no facts", entry.name);
    }
}

#[test]
fn gcd_two_fails_aperiodicity() {
    let r = run("gcd-two");
    assert_eq!(r.observations.get("r1"), Some(&Observed::Label("fail".into())));
}

#[test]
fn undamped_kernel_fails_integrability() {
    let r = run("cts-undamped");
    assert_eq!(r.observations.get("i6"), Some(&Observed::Label("fail".into())));
}

#[test]
fn unknown_entry_is_rejected() {
    assert!(matches!(corpus::builtin("missing"), Err(renewal_asym::Error::UnknownEntry(_))));
}
