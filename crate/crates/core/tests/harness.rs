use gqlab::harness::compare;
use gqlab::{run_suite, ConfigError, ScenarioConfig, Suite};

fn field_of(e: ConfigError) -> String {
    match e {
        ConfigError::Field { field, .. } => field,
        other => panic!("expected a field error, got {other}"),
    }
}

#[test]
fn config_errors_name_the_field() {
    let bad = [
        (r#"{"suite": "fermion-transport", "n": 9}"#, "n"),
        (r#"{"suite": "boson-transport", "family": "euclidean"}"#, "family"),
        (r#"{"suite": "fermion-transport", "b": [0.5, 2.0]}"#, "b[1]"),
        (r#"{"suite": "grassmann", "tol_scale": 0}"#, "tol_scale"),
        (r#"{"suite": "fermion-transport", "steps": 1}"#, "steps"),
    ];
    for (text, field) in bad {
        assert_eq!(field_of(ScenarioConfig::from_json(text).unwrap_err()), field, "{text}");
    }
    assert!(matches!(ScenarioConfig::from_json(r#"{"suite": "grassmann", "colour": 1}"#), Err(ConfigError::Parse(_))));
    assert!(matches!(ScenarioConfig::from_json(r#"{"suite": "nope"}"#), Err(ConfigError::Parse(_))));
}

#[test]
fn overrides_reach_the_checks() {
    let cfg = ScenarioConfig::from_json(r#"{"suite": "fermion-transport", "n": 2, "b": [0.5], "steps": 400}"#).unwrap();
    let rep = run_suite(&cfg).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures());
    assert!(rep.find("ferm.transport.n2.b0.5.ode-vs-bogoliubov").is_some());
    assert!(rep.find("ferm.transport.n3.b0.5.ode-vs-bogoliubov").is_none());

    let tight = ScenarioConfig::from_json(r#"{"suite": "grassmann", "tolerances": {"grass.associativity": 1e-300}}"#).unwrap();
    let rep = run_suite(&tight).unwrap();
    assert_eq!(rep.find("grass.associativity").unwrap().tol, 1e-300);
}

#[test]
fn seeds_change_samples_but_not_verdicts() {
    let a = run_suite(&ScenarioConfig::new(Suite::Grassmann)).unwrap();
    let mut cfg = ScenarioConfig::new(Suite::Grassmann);
    cfg.seed = 7;
    let b = run_suite(&cfg).unwrap();
    assert!(a.passed() && b.passed());
    assert_ne!(a.to_json(), b.to_json());
    let cmp = compare(&a, &b);
    assert!(cmp.missing.is_empty() && cmp.added.is_empty());
}
