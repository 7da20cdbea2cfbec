mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use skyclust::clustering::ClusterAssignment;
use skyclust::config::PipelineConfig;
use skyclust::headselect::bench::bench_ch;
use skyclust::headselect::HeadSelection;
use skyclust::io::{write_atomic, write_json};
use skyclust::metrics::{pairwise, RunReport};
use skyclust::mobility::{read_trace, write_trace};
use skyclust::netsim::{write_records, ClusterLayout, Mode, Scenario};
use skyclust::par::Execution;
use skyclust::pipeline::{self, directions, Directions, SeedSummary};
use skyclust::predictor::{read_predictions, write_predictions, PositionPredictor};
use skyclust::traffic::{read_workload, write_workload};

#[derive(Parser)]
#[command(
    name = "skyclust",
    version,
    about = "Mobility-aware clustering and relay simulation for UAV networks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: config `out_dir`, else `out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate random-waypoint traces.
    Mobility,
    /// Train the position predictor on a trace.
    Train {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Predict every station's position at the clustering epoch.
    Predict {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Cluster predicted positions, choosing k at the elbow knee.
    Cluster {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Elect one head per cluster.
    Heads {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
    },
    /// Simulate one network scenario.
    Run {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        clustering: Switch,
        /// Trace supplying the station positions at the epoch.
        #[arg(long)]
        trace: PathBuf,
        /// Required for clustered or decentralized runs.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Required for clustered runs.
        #[arg(long)]
        heads: Option<PathBuf>,
        /// Generated from the config (and written out) when omitted.
        #[arg(long)]
        workload: Option<PathBuf>,
    },
    /// Compare 2 to 4 run reports and emit plot data.
    Compare {
        #[arg(required = true, num_args = 2..=4)]
        reports: Vec<PathBuf>,
    },
    /// Time pairwise and kNN head selection against cluster size.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024,2048,4096")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 16)]
        k: usize,
    },
    /// Every stage and all four scenarios in one go.
    Pipeline,
    /// The full pipeline for master seeds `seed..seed+count`.
    Sweep {
        #[arg(long, default_value_t = 10)]
        count: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Centralized,
    Decentralized,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
    exec: Execution,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let mut cfg = match &g.config {
            Some(p) => PipelineConfig::load(require(p)?)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        let cfg = cfg.resolved();
        cfg.validate()?;
        let out = g
            .out
            .clone()
            .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let exec = if g.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        Ok(Self { cfg, out, exec })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn echo(&self) -> Result<()> {
        self.cfg.echo(&self.out)?;
        Ok(())
    }
}

fn require(p: &Path) -> Result<&Path> {
    if !p.exists() {
        bail!("missing input file: {}", p.display());
    }
    Ok(p)
}

fn write_plots(dir: &Path, reports: &[RunReport]) -> Result<()> {
    for m in &plot::METRICS {
        write_atomic(
            &dir.join(format!("{}_by_station.csv", m.name)),
            plot::station_csv(reports, m).as_bytes(),
        )?;
        write_atomic(
            &dir.join(format!("{}_by_station.svg", m.name)),
            plot::station_svg(reports, m).as_bytes(),
        )?;
    }
    write_atomic(&dir.join("summary.csv"), plot::summary_csv(reports).as_bytes())?;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.global)?;
    let cfg = &ctx.cfg;
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    match cli.command {
        Command::Mobility => {
            let trace = pipeline::simulate_mobility(ctx.exec, cfg)?;
            write_trace(&trace, &ctx.path(pipeline::TRACE_FILE))?;
        }
        Command::Train { trace } => {
            let trace = read_trace(require(&trace)?)?;
            let (model, rmse) = pipeline::train_stage(ctx.exec, cfg, &trace)?;
            model.save(&ctx.path(pipeline::MODEL_FILE))?;
            write_json(&ctx.path(pipeline::RMSE_FILE), &rmse)?;
            eprintln!(
                "held-out RMSE {:.4} m (persistence {:.4} m)",
                rmse.model_combined(),
                rmse.persistence_combined()
            );
        }
        Command::Predict { trace, model } => {
            let trace = read_trace(require(&trace)?)?;
            let model = PositionPredictor::load(require(&model)?)?;
            let preds = pipeline::predict_stage(cfg, &model, &trace)?;
            write_predictions(&preds, &ctx.path(pipeline::PREDICTIONS_FILE))?;
        }
        Command::Cluster { predictions } => {
            let preds = read_predictions(require(&predictions)?)?;
            let clusters = pipeline::cluster_stage(ctx.exec, cfg, &preds)?;
            clusters.save(&ctx.path(pipeline::CLUSTERS_FILE))?;
            eprintln!("k = {}", clusters.k);
        }
        Command::Heads { predictions, clusters } => {
            let preds = read_predictions(require(&predictions)?)?;
            let clusters = ClusterAssignment::load(require(&clusters)?)?;
            if clusters.assignment.len() != preds.len() {
                bail!(
                    "clusters cover {} stations but there are {} predictions",
                    clusters.assignment.len(),
                    preds.len()
                );
            }
            let heads = pipeline::heads_stage(ctx.exec, cfg, &preds, &clusters)?;
            heads.save(&ctx.path(pipeline::HEADS_FILE))?;
        }
        Command::Run {
            mode,
            clustering,
            trace,
            clusters,
            heads,
            workload,
        } => {
            let scenario = Scenario {
                mode: match mode {
                    ModeArg::Centralized => Mode::Centralized,
                    ModeArg::Decentralized => Mode::Decentralized,
                },
                clustering: clustering == Switch::On,
            };
            let trace = read_trace(require(&trace)?)?;
            let positions = pipeline::epoch_positions(cfg, &trace)?;
            let needs_clusters = scenario.clustering || scenario.mode == Mode::Decentralized;
            let layout = if needs_clusters {
                let Some(c) = clusters else {
                    bail!("scenario {} needs --clusters", scenario.label());
                };
                let c = ClusterAssignment::load(require(&c)?)?;
                let heads = match heads {
                    Some(h) => HeadSelection::load(require(&h)?)?.head_ids(),
                    None if scenario.clustering => bail!("scenario {} needs --heads", scenario.label()),
                    // Heads do not route anything without clustering.
                    None => c.members().iter().map(|m| m[0]).collect(),
                };
                Some(ClusterLayout {
                    members: c.members(),
                    centroids: c.centroids.clone(),
                    heads,
                })
            } else {
                None
            };
            let workload = match workload {
                Some(w) => read_workload(require(&w)?)?,
                None => {
                    let w = pipeline::workload_stage(ctx.exec, cfg, trace.num_stations())?;
                    write_workload(&ctx.path(pipeline::WORKLOAD_FILE), &w)?;
                    w
                }
            };
            let run = pipeline::run_scenario(cfg, scenario, &positions, layout.as_ref(), &workload)?;
            write_records(&ctx.path(&pipeline::records_file(scenario)), &run.output.records)?;
            run.report.save(&ctx.path(&pipeline::report_file(scenario)))?;
            run.report.write_csv(&ctx.path(&pipeline::report_csv_file(scenario)))?;
            eprintln!(
                "{}: {} delivered, {} dropped",
                scenario.label(),
                run.conservation.delivered,
                run.conservation.dropped
            );
        }
        Command::Compare { reports } => {
            let reports = reports
                .iter()
                .map(|p| Ok(RunReport::load(require(p)?)?))
                .collect::<Result<Vec<_>>>()?;
            write_json(&ctx.path(pipeline::COMPARISON_FILE), &pairwise(&reports)?)?;
            write_plots(&ctx.out, &reports)?;
        }
        Command::Bench { sizes, repetitions, k } => {
            let report = bench_ch(&sizes, repetitions, k, cfg.seed)?;
            report.write_csv(&ctx.path("bench.csv"))?;
            report.write_reference_csv(&ctx.path("bench_reference.csv"))?;
            write_json(&ctx.path("bench.json"), &report)?;
            eprintln!(
                "log-log slope: pairwise {:.3}, kNN {:.3} ({:.1} s)",
                report.pairwise_slope, report.knn_slope, report.total_seconds
            );
        }
        Command::Pipeline => {
            let run = pipeline::run_all(ctx.exec, cfg)?;
            run.write(&ctx.out)?;
            let reports: Vec<RunReport> = run.runs.iter().map(|r| r.report.clone()).collect();
            write_plots(&ctx.out, &reports)?;
            eprintln!("k = {}, outputs in {}", run.clusters.k, ctx.out.display());
        }
        Command::Sweep { count } => {
            let seeds: Vec<u64> = (0..count).map(|i| cfg.seed.wrapping_add(i)).collect();
            let summaries = pipeline::sweep(ctx.exec, cfg, &seeds)?;
            #[derive(serde::Serialize)]
            struct Row<'a> {
                summary: &'a SeedSummary,
                directions: Directions,
            }
            let rows: Vec<Row> = summaries
                .iter()
                .map(|s| Row {
                    summary: s,
                    directions: directions(s),
                })
                .collect();
            write_json(&ctx.path("sweep.json"), &rows)?;
            let held = |f: fn(&Directions) -> bool| rows.iter().filter(|r| f(&r.directions)).count();
            eprintln!(
                "over {} seeds: decentralized delay lower {}, clustering helps centralized {}, decentralized {}",
                rows.len(),
                held(|d| d.decentralized_delay_below_centralized),
                held(|d| d.clustering_helps_centralized),
                held(|d| d.clustering_helps_decentralized)
            );
        }
    }
    ctx.echo()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
