use investesg::engine::{
    csv_header, run_episode, write_outputs, ScenarioConfig, ScriptedAssignment, SeedPair,
};

#[test]
fn trajectory_and_summary_files() {
    let c = ScenarioConfig::default();
    let rec = run_episode(
        &c,
        &ScriptedAssignment::from_config(&c),
        SeedPair::new(4, 4),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&rec, dir.path()).unwrap();

    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, csv_header(5, 3));
    assert_eq!(
        &header[..6],
        ["t", "year", "risk_h", "risk_p", "risk_d", "risk_overall"]
    );
    assert_eq!(header.len(), 9 + 5 * 8 + 3 * (5 + 2));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));
    assert!(rows[0].starts_with("1,2021,"));
    assert!(rows[99].starts_with("100,2120,"));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    for key in ["P100", "W100", "events_total", "bankruptcies"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["P100"].as_f64().unwrap(), rec.summary.final_risk);

    let again = tempfile::tempdir().unwrap();
    write_outputs(&rec, again.path()).unwrap();
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(again.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn csv_values_parse_back_exactly() {
    let c = ScenarioConfig::default();
    let rec = run_episode(
        &c,
        &ScriptedAssignment::from_config(&c),
        SeedPair::new(1, 1),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&rec, dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    for (row, rec_row) in reader.records().zip(&rec.rows) {
        let row = row.unwrap();
        let k0: f64 = row[9].parse().unwrap();
        assert_eq!(k0.to_bits(), rec_row.companies[0].capital.to_bits());
        let overall: f64 = row[5].parse().unwrap();
        assert_eq!(overall.to_bits(), rec_row.overall_risk().to_bits());
    }
}
