use qfunc::report::{from_json, render, to_csv, Format, CSV_HEADER};
use qfunc::runner::{run_parallel, Progress};
use qfunc_core::adaptive::{GridConfig, LMode};
use qfunc_core::sim::{run_experiment, EstimatorRule, ExperimentPlan};
use qfunc_core::{Density, Kernel};

fn plan(estimator: EstimatorRule) -> ExperimentPlan {
    ExperimentPlan {
        density: Density::mixture(0.5, -1.0, 0.5, 1.0, 1.0).unwrap(),
        kernel: Kernel::Epanechnikov,
        estimator,
        n_list: vec![150, 300, 600],
        replicates: 21,
        master_seed: 2024,
        ci_level: 0.9,
    }
}

fn plans() -> Vec<ExperimentPlan> {
    vec![
        plan(EstimatorRule::FixedH { alpha: 0.75, c: 0.8 }),
        plan(EstimatorRule::Adaptive(GridConfig { l_mode: LMode::Given(0.4), ..GridConfig::default() })),
        plan(EstimatorRule::Adaptive(GridConfig::default())),
    ]
}

#[test]
fn parallel_matches_sequential() {
    for p in plans() {
        let seq = run_experiment(&p).unwrap();
        for threads in [1, 3] {
            let mut par = run_parallel(&p, threads, Progress::Quiet).unwrap();
            assert!(par.wall_time_s.is_some());
            par.wall_time_s = None;
            assert_eq!(par, seq);
            assert_eq!(to_csv(&par), to_csv(&seq));
        }
    }
}

#[test]
fn json_round_trips() {
    for p in plans() {
        let rep = run_experiment(&p).unwrap();
        let text = render(&rep, Format::Json).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, rep);
        assert_eq!(render(&back, Format::Json).unwrap(), text);
    }
}

#[test]
fn csv_shape_and_metadata() {
    let p = plan(EstimatorRule::Adaptive(GridConfig::default()));
    let rep = run_experiment(&p).unwrap();
    let csv = to_csv(&rep);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let data: Vec<&str> = csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), p.n_list.len());
    for (row, n) in data.iter().zip(&p.n_list) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[0], n.to_string());
        for c in &cells[1..] {
            c.parse::<f64>().unwrap();
        }
    }
    // metadata only after the rows
    let first_meta = csv.lines().position(|l| l.starts_with('#')).unwrap();
    assert!(csv.lines().skip(first_meta).all(|l| l.starts_with('#')));
    for key in ["# mode: adaptive(grid=practical", "# seed: 2024", "# kernel: epanechnikov", "# density: mixture:"] {
        assert!(csv.contains(key), "missing {key}\n{csv}");
    }
}

#[test]
fn rows_satisfy_error_decomposition() {
    for p in plans() {
        let rep = run_experiment(&p).unwrap();
        for row in &rep.rows {
            let s = row.stats.as_ref().unwrap();
            let r = row.replicates as f64;
            let rhs = s.mean_error.powi(2) + s.sd_error.powi(2) * (r - 1.0) / r;
            assert!((s.rmse.powi(2) - rhs).abs() <= 1e-10 * rhs.max(f64::MIN_POSITIVE));
            assert!((0.0..=1.0).contains(&s.ci_coverage));
        }
        assert!(rep.rate.is_some());
    }
}

#[test]
fn emit_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_experiment(&plan(EstimatorRule::FixedH { alpha: 1.0, c: 1.0 })).unwrap();
    let path = dir.path().join("r.json");
    qfunc::report::emit(&rep, Format::Json, &path).unwrap();
    assert_eq!(from_json(&std::fs::read_to_string(&path).unwrap()).unwrap(), rep);
    assert!(qfunc::report::emit(&rep, Format::Csv, &dir.path().join("missing/r.csv")).is_err());
}

#[test]
fn gaussian_fixed_rule_clt_across_sizes() {
    // KS of the standardised errors below 0.1 at every n. With 300 replicates
    // the threshold sits near the 1% tail at n = 500 (seed 31 gives 0.1004).
    let p = ExperimentPlan {
        density: Density::gaussian(0.0, 1.0).unwrap(),
        kernel: Kernel::Gaussian,
        estimator: EstimatorRule::FixedH { alpha: 1.0, c: 1.0 },
        n_list: vec![500, 1000, 2000, 4000, 8000],
        replicates: 300,
        master_seed: 1,
        ci_level: 0.95,
    };
    let rep = run_parallel(&p, 0, Progress::Quiet).unwrap();
    for row in &rep.rows {
        let ks = row.stats.as_ref().unwrap().ks_statistic.unwrap();
        assert!(ks < 0.1, "n={}: KS {ks}", row.n);
    }
}
