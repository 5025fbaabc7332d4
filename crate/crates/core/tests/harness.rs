use hybrid_leo::error::Error;
use hybrid_leo::feasible::Resolution;
use hybrid_leo::harness::*;
use hybrid_leo::model::{Architecture, PowerModel, SystemConfig};

fn tiny(kind: ExperimentKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::small_for(kind);
    spec.mc_samples = 50;
    spec
}

fn run(spec: &ExperimentSpec) -> ResultTable {
    run_experiment(spec, &SystemConfig::small(), &PowerModel::default()).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let spec = tiny(ExperimentKind::EeVsPowerBudget);
    let a = run(&spec).to_csv_string().unwrap();
    let b = run(&spec).to_csv_string().unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_point_gives_one_row_per_method() {
    let mut spec = tiny(ExperimentKind::EeVsRfChains);
    spec.sweep = vec![4.0];
    spec.architectures = vec![Architecture::FullyConnected];
    spec.resolutions = vec![Resolution::Bits(2)];
    let table = run(&spec);
    assert_eq!(table.rows.len(), 1);
    let row = &table.rows[0];
    assert_eq!(row.method, "aim_adp");
    assert_eq!(row.m_rf, 4);
    assert!(row.error.is_none());

    spec.kind = ExperimentKind::MethodCompare;
    let methods: Vec<String> = run(&spec).rows.into_iter().map(|r| r.method).collect();
    assert_eq!(methods, ["aim_adp", "npp"]);
}

#[test]
fn header_and_values_are_sane() {
    let table = run(&tiny(ExperimentKind::EeVsRfChains));
    let csv = table.to_csv_string().unwrap();
    let header = csv.lines().next().unwrap();
    let expected: Vec<&str> = COLUMNS.iter().chain(EXTRA_COLUMNS.iter()).copied().collect();
    assert_eq!(header, expected.join(","));
    assert!(header.starts_with(
        "experiment,architecture,resolution,m_rf,power_budget_dbw,seed_group,ee_mean_bit_per_j,ee_std,\
         sumrate_mean_bit_s,sumrate_mc_mean_bit_s,residual_frobenius,runtime_s"
    ));
    for row in &table.rows {
        assert!(row.error.is_none(), "{row:?}");
        assert!(row.ee_mean_bit_per_j.unwrap() >= 0.0);
        assert_eq!(row.runtime_s, 0.0);
        match row.architecture.as_str() {
            "fully_digital" => {
                assert_eq!(row.resolution, "none");
                assert!(row.residual_frobenius.is_none());
            }
            _ => assert!(row.residual_frobenius.unwrap() >= 0.0),
        }
    }
    // 3 RF counts x (2 hybrid x 4 resolutions + 1 digital)
    assert_eq!(table.rows.len(), 27);
}

#[test]
fn ee_matches_companion_columns_for_single_trial() {
    let cfg = SystemConfig::small();
    for row in run(&tiny(ExperimentKind::EeVsPowerBudget)).rows {
        let ee = row.ee_mean_bit_per_j.unwrap();
        let recomputed = row.sumrate_mean_bit_s.unwrap() / (cfg.xi * row.p_rad_w.unwrap() + row.p_static_w.unwrap());
        assert!((ee - recomputed).abs() <= 1e-9 * ee, "{ee} vs {recomputed}");
    }
}

#[test]
fn mc_column_empty_when_disabled() {
    let mut spec = tiny(ExperimentKind::BoundTightness);
    spec.mc_samples = 0;
    let table = run(&spec);
    assert!(table.rows.iter().all(|r| r.sumrate_mc_mean_bit_s.is_none()));
    let csv = table.to_csv_string().unwrap();
    let line = csv.lines().nth(1).unwrap();
    assert_eq!(line.split(',').nth(9), Some(""));
}

#[test]
fn grid_order_does_not_change_rows() {
    let mut spec = tiny(ExperimentKind::EeVsPowerBudget);
    spec.architectures = vec![Architecture::FullyDigital];
    let forward = run(&spec);
    spec.sweep.reverse();
    let mut backward = run(&spec);
    backward.rows.reverse();
    assert_eq!(forward, backward);
}

#[test]
fn json_round_trip() {
    let mut spec = tiny(ExperimentKind::BoundTightness);
    spec.mc_samples = 0;
    let table = run(&spec);
    let text = table.to_json_string().unwrap();
    assert!(text.contains("\"sumrate_mc_mean_bit_s\": null"));
    assert_eq!(ResultTable::from_json_str(&text).unwrap(), table);
}

#[test]
fn emit_writes_both_formats() {
    let table = run(&tiny(ExperimentKind::BoundTightness));
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("out.csv");
    emit_results(&table, OutputFormat::Csv, &csv_path).unwrap();
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), table.to_csv_string().unwrap());
    let json_path = dir.path().join("out.json");
    emit_results(&table, OutputFormat::Json, &json_path).unwrap();
    let back = ResultTable::from_json_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(back, table);
}

#[test]
fn emit_error_names_the_path() {
    let table = run(&tiny(ExperimentKind::BoundTightness));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    match emit_results(&table, OutputFormat::Csv, &path) {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("missing")),
        other => panic!("expected an I/O error, got {other:?}"),
    }
    assert!(emit_results(&ResultTable::default(), OutputFormat::Csv, &dir.path().join("x.csv")).is_err());
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = tiny(ExperimentKind::EeVsRfChains);
    spec.sweep = vec![2.5];
    assert!(matches!(spec.validate(), Err(Error::Config(_))));
    spec.sweep.clear();
    assert!(spec.validate().is_err());
    let mut spec = tiny(ExperimentKind::EeVsPowerBudget);
    spec.trials_per_point = 0;
    assert!(spec.validate().is_err());
    assert!("nonsense".parse::<ExperimentKind>().is_err());
    assert_eq!("ee-vs-rf-chains".parse::<ExperimentKind>().unwrap(), ExperimentKind::EeVsRfChains);
    assert!("xml".parse::<OutputFormat>().is_err());
}

#[test]
fn unsupported_cell_reports_error_in_row() {
    // 16 antennas cannot be split into 12 equal subarrays.
    let mut spec = tiny(ExperimentKind::EeVsRfChains);
    spec.sweep = vec![12.0];
    spec.architectures = vec![Architecture::PartiallyConnected, Architecture::FullyConnected];
    spec.resolutions = vec![Resolution::Bits(2)];
    let table = run(&spec);
    assert!(table.has_errors());
    assert!(table.rows[0].error.is_some());
    assert!(table.rows[0].ee_mean_bit_per_j.is_none());
    assert!(table.rows[1].error.is_none());
}

#[test]
fn trial_streams_are_distinct() {
    use rand::RngCore;
    let a = trial_rng(7, 0, false).next_u64();
    let b = trial_rng(7, 0, true).next_u64();
    let c = trial_rng(7, 1, false).next_u64();
    assert!(a != b && a != c && b != c);
    assert_eq!(a, trial_rng(7, 0, false).next_u64());
}
