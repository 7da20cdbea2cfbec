//! End-to-end workflow: trace, predictor, predicted positions, clusters,
//! heads, then the four network scenarios on one shared workload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{create_clusters, ClusterAssignment};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::headselect::{assign_radios, select_heads, HeadSelection};
use crate::io::write_json;
use crate::metrics::{compare, compute_report, pairwise, Comparison, RunReport};
use crate::mobility::{simulate_random_waypoint_with, write_trace, Trace};
use crate::netsim::{
    build_topology, conservation_check, run_sim, write_records, ClusterLayout, ConservationReport, Mode, Scenario,
    SimOutput, Topology,
};
use crate::par::Execution;
use crate::predictor::{
    build_dataset, evaluate_rmse, predict_positions, train_predictor, write_predictions, PositionPredictor,
    PredictedPosition, RmseReport,
};
use crate::traffic::{generate_workload, write_workload, Packet};
use crate::Point;

pub const TRACE_FILE: &str = "trace.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RMSE_FILE: &str = "rmse.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const HEADS_FILE: &str = "heads.json";
pub const WORKLOAD_FILE: &str = "workload.csv";
pub const COMPARISON_FILE: &str = "comparison.json";

pub fn records_file(s: Scenario) -> String {
    format!("records_{}.csv", s.label())
}

pub fn report_file(s: Scenario) -> String {
    format!("report_{}.json", s.label())
}

pub fn report_csv_file(s: Scenario) -> String {
    format!("report_{}.csv", s.label())
}

pub fn simulate_mobility(exec: Execution, cfg: &PipelineConfig) -> Result<Trace> {
    simulate_random_waypoint_with(exec, &cfg.mobility)
}

pub fn train_stage(exec: Execution, cfg: &PipelineConfig, trace: &Trace) -> Result<(PositionPredictor, RmseReport)> {
    let ds = build_dataset(trace, cfg.predictor.window)?;
    let model = train_predictor(exec, &ds, &cfg.predictor.boost, cfg.predictor.encoding)?;
    let rmse = evaluate_rmse(&model, &ds, &ds.test)?;
    Ok((model, rmse))
}

/// Prediction epoch: the configured time or the last trace sample.
pub fn epoch(cfg: &PipelineConfig, trace: &Trace) -> f64 {
    cfg.predictor
        .at_time
        .unwrap_or_else(|| (trace.samples_per_station().saturating_sub(1)) as f64 * trace.config.sample_interval)
}

pub fn predict_stage(
    cfg: &PipelineConfig,
    predictor: &PositionPredictor,
    trace: &Trace,
) -> Result<Vec<PredictedPosition>> {
    predict_positions(predictor, trace, epoch(cfg, trace))
}

/// Actual positions at the prediction epoch; the network runs on these.
pub fn epoch_positions(cfg: &PipelineConfig, trace: &Trace) -> Result<Vec<Point>> {
    let t = epoch(cfg, trace);
    let idx = (t / trace.config.sample_interval).round() as usize;
    trace
        .stations()
        .map(|s| {
            s.get(idx)
                .map(|x| x.position())
                .ok_or_else(|| Error::Prediction(format!("trace has no sample at t={t}")))
        })
        .collect()
}

pub fn cluster_stage(exec: Execution, cfg: &PipelineConfig, preds: &[PredictedPosition]) -> Result<ClusterAssignment> {
    let points: Vec<Point> = preds.iter().map(|p| p.point()).collect();
    create_clusters(exec, &points, &cfg.clustering, cfg.clustering_seed())
}

pub fn heads_stage(
    exec: Execution,
    cfg: &PipelineConfig,
    preds: &[PredictedPosition],
    clusters: &ClusterAssignment,
) -> Result<HeadSelection> {
    let points: Vec<Point> = preds.iter().map(|p| p.point()).collect();
    let radios = assign_radios(
        &points,
        (cfg.heads.power_min_dbm, cfg.heads.power_max_dbm),
        cfg.radio_seed(),
    );
    select_heads(exec, &clusters.members(), &radios, &cfg.heads)
}

pub fn workload_stage(exec: Execution, cfg: &PipelineConfig, num_stations: usize) -> Result<Vec<Packet>> {
    generate_workload(exec, num_stations, &cfg.traffic)
}

pub fn layout(clusters: &ClusterAssignment, heads: &HeadSelection) -> ClusterLayout {
    ClusterLayout {
        members: clusters.members(),
        centroids: clusters.centroids.clone(),
        heads: heads.head_ids(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub topology: Topology,
    pub output: SimOutput,
    pub conservation: ConservationReport,
    pub report: RunReport,
}

pub fn run_scenario(
    cfg: &PipelineConfig,
    scenario: Scenario,
    positions: &[Point],
    layout: Option<&ClusterLayout>,
    workload: &[Packet],
) -> Result<ScenarioRun> {
    let layout = if scenario.clustering || scenario.mode == Mode::Decentralized {
        layout
    } else {
        None
    };
    let topology = build_topology(scenario, &cfg.network, positions, cfg.mobility.center(), layout)?;
    let output = run_sim(&topology, workload)?;
    let conservation = conservation_check(&output.records, workload, &topology)?;
    let report = compute_report(
        scenario.label(),
        Some(scenario),
        &output.records,
        cfg.metrics.throughput_window,
    )?;
    Ok(ScenarioRun {
        scenario,
        topology,
        output,
        conservation,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub trace: Trace,
    pub predictor: PositionPredictor,
    pub rmse: RmseReport,
    pub predictions: Vec<PredictedPosition>,
    pub clusters: ClusterAssignment,
    pub heads: HeadSelection,
    pub workload: Vec<Packet>,
    pub runs: Vec<ScenarioRun>,
}

/// Runs every stage; `cfg` is resolved (stage seeds derived) first.
pub fn run_all(exec: Execution, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let trace = simulate_mobility(exec, &cfg)?;
    let (predictor, rmse) = train_stage(exec, &cfg, &trace)?;
    let predictions = predict_stage(&cfg, &predictor, &trace)?;
    let clusters = cluster_stage(exec, &cfg, &predictions)?;
    let heads = heads_stage(exec, &cfg, &predictions, &clusters)?;
    let workload = workload_stage(exec, &cfg, trace.num_stations())?;
    let positions = epoch_positions(&cfg, &trace)?;
    let lay = layout(&clusters, &heads);
    let runs = exec.try_map(&Scenario::ALL, |&s| {
        run_scenario(&cfg, s, &positions, Some(&lay), &workload)
    })?;
    Ok(PipelineRun {
        config: cfg,
        trace,
        predictor,
        rmse,
        predictions,
        clusters,
        heads,
        workload,
        runs,
    })
}

impl PipelineRun {
    pub fn report(&self, s: Scenario) -> &RunReport {
        &self
            .runs
            .iter()
            .find(|r| r.scenario == s)
            .expect("all scenarios run")
            .report
    }

    /// Clustered vs non-clustered in each mode, then decentralized vs
    /// centralized with clustering.
    pub fn comparisons(&self) -> Result<Vec<Comparison>> {
        let [cn, cc, dn, dc] = Scenario::ALL;
        Ok(vec![
            compare(self.report(cn), self.report(cc))?,
            compare(self.report(dn), self.report(dc))?,
            compare(self.report(cc), self.report(dc))?,
        ])
    }

    /// Writes every artifact; `comparison.json` holds all scenario pairs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.config.echo(dir)?;
        write_trace(&self.trace, &dir.join(TRACE_FILE))?;
        self.predictor.save(&dir.join(MODEL_FILE))?;
        write_json(&dir.join(RMSE_FILE), &self.rmse)?;
        write_predictions(&self.predictions, &dir.join(PREDICTIONS_FILE))?;
        self.clusters.save(&dir.join(CLUSTERS_FILE))?;
        self.heads.save(&dir.join(HEADS_FILE))?;
        write_workload(&dir.join(WORKLOAD_FILE), &self.workload)?;
        for r in &self.runs {
            write_records(&dir.join(records_file(r.scenario)), &r.output.records)?;
            r.report.save(&dir.join(report_file(r.scenario)))?;
            r.report.write_csv(&dir.join(report_csv_file(r.scenario)))?;
        }
        let reports: Vec<RunReport> = self.runs.iter().map(|r| r.report.clone()).collect();
        write_json(&dir.join(COMPARISON_FILE), &pairwise(&reports)?)
    }
}

/// Scenario means of one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub k: usize,
    pub rmse_model: f64,
    pub rmse_persistence: f64,
    pub reports: Vec<RunReport>,
}

impl SeedSummary {
    pub fn report(&self, s: Scenario) -> &RunReport {
        self.reports
            .iter()
            .find(|r| r.scenario == Some(s))
            .expect("all scenarios present")
    }
}

/// Full workflow for each master seed. Seeds run concurrently under a
/// parallel `exec`.
pub fn sweep(exec: Execution, cfg: &PipelineConfig, seeds: &[u64]) -> Result<Vec<SeedSummary>> {
    exec.try_map(seeds, |&s| {
        let run = run_all(exec, &cfg.with_seed(s))?;
        Ok(SeedSummary {
            seed: s,
            k: run.clusters.k,
            rmse_model: run.rmse.model_combined(),
            rmse_persistence: run.rmse.persistence_combined(),
            reports: run.runs.into_iter().map(|r| r.report).collect(),
        })
    })
}

/// Directional outcomes of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directions {
    pub decentralized_delay_below_centralized: bool,
    pub clustering_helps_centralized: bool,
    pub clustering_helps_decentralized: bool,
    pub decentralized_jitter_below_centralized: bool,
}

pub fn directions(s: &SeedSummary) -> Directions {
    let [cn, cc, dn, dc] = Scenario::ALL;
    let m = |r: &RunReport, f: fn(&RunReport) -> Option<crate::metrics::Aggregate>| f(r).map(|a| a.mean);
    let delay = |sc| m(s.report(sc), |r| r.delay_ms);
    let jitter = |sc| m(s.report(sc), |r| r.jitter_ms);
    let thr = |sc| m(s.report(sc), |r| r.throughput);
    let lt = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if a < b);
    Directions {
        decentralized_delay_below_centralized: lt(delay(dc), delay(cc)),
        clustering_helps_centralized: lt(delay(cc), delay(cn)) && lt(thr(cn), thr(cc)),
        clustering_helps_decentralized: lt(delay(dc), delay(dn)) && lt(thr(dn), thr(dc)),
        decentralized_jitter_below_centralized: lt(jitter(dc), jitter(cc)),
    }
}
