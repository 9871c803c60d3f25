use lagmax::experiments::{
    run, weak_type_functional, ExperimentConfig, Scenario, Table, Value, CSV_SCHEMA_VERSION,
};
use lagmax::measure::{dist_fn_indicator, AxisBox, BoxUnion, CurveSample, CurveMethod, DistributionCurve};
use lagmax::Error;

#[test]
fn invalid_type_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default_for(Scenario::ChapmanKolmogorov);
    cfg.alpha = vec![-1.0];
    cfg.output_dir = Some(dir.path().join("out"));
    assert!(run(&cfg).is_err());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let err = "no-such-scenario".parse::<Scenario>().unwrap_err();
    assert!(matches!(err, Error::UnknownScenario(_)));
    let toml = "schema_version = 1\nscenario = \"no-such-scenario\"\n";
    assert!(ExperimentConfig::from_toml_str(toml).is_err());
}

#[test]
fn every_scenario_id_round_trips() {
    for s in Scenario::ALL {
        assert_eq!(s.id().parse::<Scenario>().unwrap(), s);
        ExperimentConfig::default_for(s).validate().unwrap();
    }
}

#[test]
fn seeded_runs_give_identical_csv() {
    let cfg = ExperimentConfig::default_for(Scenario::ChapmanKolmogorov);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert!(!a.tables.is_empty());
    for (x, y) in a.tables.iter().zip(&b.tables) {
        assert_eq!(x.to_csv_string().unwrap(), y.to_csv_string().unwrap());
    }
}

#[test]
fn written_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&ExperimentConfig::default_for(Scenario::EigenDecay)).unwrap();
    assert!(out.report.passed);
    out.write_to(dir.path()).unwrap();
    for (t, r) in out.tables.iter().zip(&out.report.tables) {
        let text = std::fs::read_to_string(dir.path().join(&r.file)).unwrap();
        assert!(text.starts_with(&format!("# lagmax-csv schema_version={CSV_SCHEMA_VERSION} kind={}", t.kind)));
        let back = Table::read(text.as_bytes()).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows.len(), r.rows);
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eigen-decay.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"], "eigen-decay");
    assert_eq!(json["passed"], true);
    assert!(json["verifies"].as_str().unwrap().contains("eigenfunctions"));
}

#[test]
fn exhausted_wall_clock_gives_a_partial_report() {
    let mut cfg = ExperimentConfig::default_for(Scenario::LevelsetLemma);
    cfg.budget.max_seconds = Some(1e-9);
    let out = run(&cfg).unwrap();
    assert!(out.report.budget_exceeded);
    assert!(!out.report.passed);
    assert!(out.report.warnings.iter().any(|w| w.contains("budget exceeded")));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default_for(Scenario::SharpnessCube);
    let toml_path = dir.path().join("cube.toml");
    std::fs::write(&toml_path, cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(ExperimentConfig::load(&toml_path).unwrap(), cfg);
    let json_path = dir.path().join("cube.json");
    std::fs::write(&json_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(ExperimentConfig::load(&json_path).unwrap(), cfg);
}

#[test]
fn weak_type_functional_of_an_indicator() {
    // λ·|{χ_[0,2] > λ}|^{1/2} peaks at the largest λ below 1
    let set = BoxUnion::single(AxisBox::new(vec![0.0], vec![2.0]).unwrap());
    let lambdas = [0.25, 0.5, 0.75];
    let curve = dist_fn_indicator(&set, 1.0, &lambdas).unwrap();
    let w = weak_type_functional(&curve, 2.0, 2f64.sqrt()).unwrap();
    assert!((w.value - 0.75).abs() < 1e-12);
    assert_eq!(w.argmax_lambda, 0.75);
    assert!(w.at_boundary);
}

#[test]
fn weak_type_functional_of_a_power_is_flat() {
    // |{x^{-1/2} > λ}| = λ^{-2} on the half line, so λ·|·|^{1/2} is 1
    let samples = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&l| CurveSample { lambda: l, measure: l.powi(-2), stderr: 0.0 })
        .collect();
    let curve = DistributionCurve::new(samples, CurveMethod::ClosedForm).unwrap();
    let w = weak_type_functional(&curve, 2.0, 1.0).unwrap();
    assert!((w.value - 1.0).abs() < 1e-12);
}

#[test]
fn csv_values_keep_their_type() {
    let mut t = Table::new("mixed", &["n", "x", "tag"]);
    t.push(vec![7usize.into(), 0.125.into(), "strong".into()]);
    let back = Table::read(t.to_csv_string().unwrap().as_bytes()).unwrap();
    assert_eq!(back.rows[0], vec![Value::Int(7), Value::Num(0.125), Value::Text("strong".into())]);
}
