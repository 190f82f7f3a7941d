use stochnls::estimators::{uniform_start, weak_error, Ensemble, Observable};
use stochnls::harness::{emit_csv, parse_config, read_csv, run, CSV_HEADER};
use stochnls::{Execution, HarnessError, LatticeConfig, NoiseOperators, Scheme};

fn small(text: &str) -> stochnls::harness::RunRecord {
    run(&parse_config(text).unwrap(), Execution::Sequential).unwrap()
}

#[test]
fn charge_run_produces_one_series_per_scheme_and_step() {
    let rec = small(
        "experiment = charge\nschemes = midpoint, implicit_euler\nM = 7\nK = 10\ntau = 2^-5, 2^-6\nT = 0.25\nn_paths = 4\nstride = 2\n",
    );
    assert_eq!(
        rec.series_names(),
        vec![
            "midpoint:tau=2^-5",
            "midpoint:tau=2^-6",
            "implicit_euler:tau=2^-5",
            "implicit_euler:tau=2^-6"
        ]
    );
    // 8 steps at stride 2 plus the initial sample
    assert_eq!(rec.series("midpoint:tau=2^-5").count(), 5);
    assert!(rec.series("midpoint:tau=2^-5").next().unwrap().value.abs() < 1e-15);
    assert!(rec
        .series("midpoint:tau=2^-6")
        .all(|r| r.value.abs() < 1e-12));
    assert!(rec.last_value("implicit_euler:tau=2^-5").unwrap() < -1e-3);
    assert!(rec.failure.is_none());
}

#[test]
fn csv_layout_and_roundtrip() {
    let rec = small("experiment = charge\nM = 5\nK = 8\ntau = 2^-4\nT = 0.25\nn_paths = 3\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.csv");
    emit_csv(&rec, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# stochnls "));
    assert!(text.contains("# experiment = charge\n"));
    assert!(text.contains("# seed = 0\n"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, CSV_HEADER.join(","));
    let rows = read_csv(&text).unwrap();
    assert_eq!(rows.len(), rec.rows.len());
    for (a, b) in rows.iter().zip(&rec.rows) {
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.x.to_bits(), b.x.to_bits());
    }
    let again = small("experiment = charge\nM = 5\nK = 8\ntau = 2^-4\nT = 0.25\nn_paths = 3\n");
    assert_eq!(again.to_csv_bytes(), rec.to_csv_bytes());
}

#[test]
fn io_errors_name_the_path() {
    let rec = small("experiment = hormander\nM_values = 2\n");
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    match emit_csv(&rec, &blocker.join("out.csv")) {
        Err(HarnessError::Io { path, .. }) => {
            assert!(path.ends_with("out.csv") || path.ends_with("file"))
        }
        other => panic!("expected an i/o error, got {other:?}"),
    }
}

#[test]
fn numerical_failure_keeps_earlier_rows() {
    let rec = small(
        "experiment = charge\nschemes = euler_maruyama, midpoint\nM = 7\nK = 10\ntau = 2^-4\nT = 0.25\nn_paths = 3\nfp_max_iters = 1\n",
    );
    assert!(rec.series("euler_maruyama:tau=2^-4").count() > 0);
    assert_eq!(rec.series("midpoint:tau=2^-4").count(), 0);
    let failure = rec.failure.as_deref().unwrap();
    assert!(failure.contains("converge"), "{failure}");
    assert!(String::from_utf8(rec.to_csv_bytes())
        .unwrap()
        .contains("# failure: "));
}

#[test]
fn hormander_report() {
    let rec = small("experiment = hormander\nK = 30\nM_values = 2, 19\n");
    assert_eq!(
        rec.series("rank").map(|r| r.value).collect::<Vec<_>>(),
        vec![4.0, 38.0]
    );
    assert_eq!(
        rec.series("rank_without_drift")
            .map(|r| r.value)
            .collect::<Vec<_>>(),
        vec![3.0, 37.0]
    );
    assert!(rec.notes.iter().any(|n| n
        == &format!(
            "M=19: rank 38 = 2M: PASS (max bracket fd gap {:.2e})",
            rec.series("bracket_fd_gap").last().unwrap().value
        )));
}

#[test]
fn ergodic_spread_row() {
    let rec = small("experiment = ergodic\nM = 7\nK = 10\ntau = 2^-5\nT = 0.5\ninitial = 1, 3\nn_paths = 6\nstride = 4\n");
    let a = rec.last_value("pnorm3:u0=1").unwrap();
    let b = rec.last_value("pnorm3:u0=3").unwrap();
    assert_eq!(rec.last_value("pnorm3:spread").unwrap(), (a - b).abs());
}

#[test]
fn weak_order_rows_and_fit() {
    let rec = small("experiment = weak_order\nM = 5\nK = 10\ntau = 2^-5, 2^-6, 2^-7\nT = 0.25\nrefinement = 2\nn_paths = 8\nobservables = pnorm3\n");
    let taus: Vec<f64> = rec.series("midpoint:pnorm3").map(|r| r.x).collect();
    assert_eq!(taus, vec![2f64.powi(-5), 2f64.powi(-6), 2f64.powi(-7)]);
    assert_eq!(rec.series("midpoint:pnorm3:order").count(), 1);
}

#[test]
fn weak_error_is_independent_of_execution_mode() {
    let cfg = LatticeConfig::focusing(7, 10).unwrap();
    let ops = NoiseOperators::new(&cfg);
    let mut ens = Ensemble::new(&cfg, &ops, uniform_start(&cfg));
    ens.n_paths = 24;
    ens.seed = 9;
    let obs = Observable::SinPNorm4;
    ens.exec = Execution::Sequential;
    let a = weak_error(&ens, Scheme::Midpoint, 2f64.powi(-5), 2, 0.25, &obs).unwrap();
    ens.exec = Execution::ParallelWith { threads: 3 };
    let b = weak_error(&ens, Scheme::Midpoint, 2f64.powi(-5), 2, 0.25, &obs).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert!(a > 0.0);
}

#[test]
fn symplectic_rows_per_step() {
    let rec = small(
        "experiment = symplectic\nM = 5\nK = 10\ntau = 2^-8\nT = 0.0625\nn_paths = 3\nstride = 4\n",
    );
    assert_eq!(rec.series("tau=2^-8:residual").count(), 4);
    assert!(rec.series("tau=2^-8:wedge_drift").all(|r| r.value < 1e-12));
}
