//! `las`: command-line entry point for simulated runs, training, the
//! convergence benchmark and the analysis reports.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use las_core::analysis::{
    centroid_vs_pb, kmeans, principal_axes_2d, write_assignments_csv, write_centroids_csv, write_diff_csv, ActionRow,
};
use las_core::harness::bench::{run_bench, BenchConfig};
use las_core::harness::{report, run, write_report, LoadedConfig, LoadedRun, Mode, RunConfig, Seeds, SlotStatus};
use las_core::pla::TransitionRecord;

#[derive(Debug, Parser)]
#[command(name = "las", version, about = "Interactive sculpture simulator and parameter-learning agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run only the pre-scripted behaviour slots of a config.
    Simulate(RunArgs),
    /// Run every slot of a config, training the agent in its slots.
    Train(RunArgs),
    /// Convergence benchmark on the brightest-LED line task.
    BenchSimplified(BenchArgs),
    /// Per-minute metrics, mode comparisons and daily trajectories.
    Analyze(AnalyzeArgs),
    /// K-means over the agent's logged actions.
    Cluster(ClusterArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seeds with three seeds derived from this one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; the run goes into `<out>/<run_id>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Benchmark settings file; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed; seeds `seed..seed + seeds` are run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Seeds that must converge for a zero exit code.
    #[arg(long, default_value_t = 3)]
    min_converged: usize,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "manifest", required = true)]
    manifests: Vec<PathBuf>,
    /// No-visitor window `START,END` in seconds for calibrated columns.
    #[arg(long, value_parser = parse_window)]
    calibration_window: Option<(f64, f64)>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long = "manifest", required = true)]
    manifests: Vec<PathBuf>,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "clusters")]
    out: PathBuf,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected START,END")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(b > a) {
        return Err("END must exceed START".into());
    }
    Ok((a, b))
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn load_run_config(args: &RunArgs) -> Result<(LoadedConfig, PathBuf), Box<dyn std::error::Error>> {
    let mut loaded = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        loaded.config.seeds = Seeds::from_base(seed);
    }
    let out = args
        .out
        .clone()
        .or_else(|| loaded.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    Ok((loaded, out))
}

fn cmd_run(args: &RunArgs, only: Option<Mode>) -> CliResult {
    let (loaded, out) = load_run_config(args)?;
    let manifest = run(&loaded, &out, only)?;
    info!("run {} finished with {} slots", manifest.run_id, manifest.slots.len());
    println!("{}", out.join(&manifest.run_id).join(las_core::harness::MANIFEST_FILE).display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<bool, Box<dyn std::error::Error>> {
    let mut config = match &args.config {
        Some(p) => toml::from_str::<BenchConfig>(&fs::read_to_string(p)?)?,
        None => BenchConfig::default(),
    };
    if let Some(e) = args.episodes {
        config.episodes = e;
        config.scored_episodes = config.scored_episodes.min(e);
    }
    if let Some(s) = args.steps {
        config.steps_per_episode = s;
    }
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    info!("training {} seeds for {} episodes of {} steps", seeds.len(), config.episodes, config.steps_per_episode);
    let outcomes = run_bench(&config, &seeds)?;

    fs::create_dir_all(&args.out)?;
    let mut csv = BufWriter::new(File::create(args.out.join("episodes.csv"))?);
    writeln!(csv, "seed,episode,mean_reward")?;
    for o in &outcomes {
        for (e, r) in o.episode_rewards.iter().enumerate() {
            writeln!(csv, "{},{e},{r}", o.seed)?;
        }
    }
    csv.flush()?;
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let summary = serde_json::json!({
        "config": config,
        "seeds": outcomes.iter().map(|o| serde_json::json!({
            "seed": o.seed, "final_mean": o.final_mean, "oracle": o.oracle, "converged": o.converged,
        })).collect::<Vec<_>>(),
        "converged": converged,
        "required": args.min_converged,
    });
    fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    for o in &outcomes {
        println!("seed {}: final mean {:.4} of oracle {} ({})", o.seed, o.final_mean, o.oracle, if o.converged { "converged" } else { "not converged" });
    }
    println!("{converged}/{} seeds converged, {} required", outcomes.len(), args.min_converged);
    Ok(converged >= args.min_converged)
}

fn load_runs(paths: &[PathBuf]) -> Result<Vec<LoadedRun>, Box<dyn std::error::Error>> {
    Ok(paths.iter().map(|p| LoadedRun::load(p)).collect::<Result<_, _>>()?)
}

fn cmd_analyze(args: &AnalyzeArgs) -> CliResult {
    let runs = load_runs(&args.manifests)?;
    let report = report(&runs, args.calibration_window)?;
    for path in write_report(&report, &args.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn read_actions(runs: &[LoadedRun]) -> Result<Vec<ActionRow>, Box<dyn std::error::Error>> {
    let mut rows = Vec::new();
    for run in runs {
        for slot in run.manifest.slots.iter().filter(|s| s.status == SlotStatus::Completed) {
            let Some(log) = &slot.transition_log else { continue };
            let path = run.dir.join(log);
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: TransitionRecord = serde_json::from_str(&line)?;
                rows.push(ActionRow { t: rec.t, day: slot.day, action: rec.action });
            }
        }
    }
    Ok(rows)
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> CliResult) -> CliResult {
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path)?);
    f(&mut out)?;
    out.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs) -> CliResult {
    let runs = load_runs(&args.manifests)?;
    let rows = read_actions(&runs)?;
    info!("clustering {} actions into {} clusters", rows.len(), args.k);
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.action.clone()).collect();
    let clustering = kmeans(&data, args.k, args.seed)?;
    let projection = principal_axes_2d(&data);
    let diffs = centroid_vs_pb(&clustering)?;
    fs::create_dir_all(&args.out)?;
    write_file(&args.out, "assignments.csv", |o| Ok(write_assignments_csv(o, &rows, &clustering, &projection)?))?;
    write_file(&args.out, "centroids.csv", |o| Ok(write_centroids_csv(o, &clustering)?))?;
    write_file(&args.out, "centroid_vs_pb.csv", |o| Ok(write_diff_csv(o, &diffs)?))?;
    write_file(&args.out, "inertia.csv", |o| {
        writeln!(o, "iteration,inertia")?;
        for (i, v) in clustering.inertia_history.iter().enumerate() {
            writeln!(o, "{i},{v}")?;
        }
        Ok(())
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_run(a, Some(Mode::Pb)),
        Command::Train(a) => cmd_run(a, None),
        Command::BenchSimplified(a) => match cmd_bench(a) {
            Ok(true) => Ok(()),
            Ok(false) => Err("too few seeds converged".into()),
            Err(e) => Err(e),
        },
        Command::Analyze(a) => cmd_analyze(a),
        Command::Cluster(a) => cmd_cluster(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
