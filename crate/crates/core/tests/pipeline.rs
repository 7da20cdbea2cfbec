use skyclust::config::PipelineConfig;
use skyclust::mobility::read_trace;
use skyclust::netsim::Scenario;
use skyclust::par::Execution;
use skyclust::pipeline::{self, run_all};
use skyclust::traffic::read_workload;

#[test]
fn default_pipeline_produces_every_artifact() {
    let cfg = PipelineConfig::default();
    let run = run_all(Execution::default(), &cfg).unwrap();
    assert_eq!(run.trace.num_stations(), 25);
    assert_eq!(run.predictions.len(), 25);
    assert_eq!(run.heads.heads.len(), run.clusters.k);
    for r in &run.runs {
        assert_eq!(r.conservation.sent, 25 * 100);
        assert_eq!(r.conservation.delivered + r.conservation.dropped, r.conservation.sent);
    }

    let dir = tempfile::tempdir().unwrap();
    run.write(dir.path()).unwrap();
    let mut names = vec![
        "config.toml",
        pipeline::TRACE_FILE,
        pipeline::MODEL_FILE,
        pipeline::RMSE_FILE,
        pipeline::PREDICTIONS_FILE,
        pipeline::CLUSTERS_FILE,
        pipeline::HEADS_FILE,
        pipeline::WORKLOAD_FILE,
        pipeline::COMPARISON_FILE,
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for s in Scenario::ALL {
        names.extend([
            pipeline::records_file(s),
            pipeline::report_file(s),
            pipeline::report_csv_file(s),
        ]);
    }
    for n in &names {
        assert!(dir.path().join(n).is_file(), "{n} missing");
    }
    assert_eq!(read_trace(&dir.path().join(pipeline::TRACE_FILE)).unwrap(), run.trace);
    assert_eq!(
        read_workload(&dir.path().join(pipeline::WORKLOAD_FILE)).unwrap(),
        run.workload
    );
}

#[test]
fn execution_strategy_does_not_change_results() {
    let cfg = PipelineConfig::from_toml("seed = 3\n[mobility]\nnum_stations = 10\nduration = 400.0\n").unwrap();
    let a = run_all(Execution::Sequential, &cfg).unwrap();
    let b = run_all(Execution::Parallel, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_matches_individual_runs() {
    let cfg = PipelineConfig::from_toml("[mobility]\nnum_stations = 8\nduration = 300.0\n").unwrap();
    let sums = pipeline::sweep(Execution::default(), &cfg, &[10, 11]).unwrap();
    for s in &sums {
        let run = run_all(Execution::Sequential, &cfg.with_seed(s.seed)).unwrap();
        assert_eq!(s.k, run.clusters.k);
        for sc in Scenario::ALL {
            assert_eq!(s.report(sc), run.report(sc));
        }
    }
}
