//! `pcprep`: point-cloud preprocessing pipeline and benchmark harness.
//!
//! Two subcommands:
//!
//! - `pipeline`: ingest -> index -> sample -> gather -> feature map, with a
//!   JSON report and optional binary exports.
//! - `bench`: a sampling-method-by-frame grid with medians, memory-access
//!   savings ratios, gathering workload statistics, and throughput.
//!
//! Exit codes: 0 success, 1 data/runtime error, 2 flag/usage error. Set
//! `PCPREP_LOG=debug` for build and stage logging.

mod bench;
mod pipeline;
mod report;
mod stages;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pcprep::octree::BuildConfig;
use report::RunReport;
use stages::{parse_gather_spec, parse_gen_spec, GatherSpec, GenSpec, ModeArg, Preset, SampleArg};

#[derive(Parser)]
#[command(name = "pcprep", version, about = "Octree-indexed point cloud preprocessing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the chained pipeline on one frame.
    Pipeline(PipelineArgs),
    /// Run a method/frame benchmark grid.
    Bench(BenchArgs),
}

#[derive(Args)]
#[group(id = "frame_source", required = true, multiple = false)]
struct InputArgs {
    /// Input frame (.xyz whitespace ASCII, .bin/.f32 packed f32 quadruples).
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Synthetic frame: uniform:N or gaussian_mixture:N:COMPONENTS:SIGMA.
    #[arg(long, value_name = "SPEC")]
    gen: Option<String>,
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset preset supplying the sample size K.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Sample size; overrides the preset.
    #[arg(long)]
    k: Option<usize>,
    /// Gathering stage: METHOD[:K] with METHOD one of veg-knn, veg-ball,
    /// brute-knn, brute-ball (K defaults to 32).
    #[arg(long, value_name = "METHOD[:K]")]
    gather: Option<String>,
    /// Ring-expansion gathering mode.
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    /// Ball-query radius (required by veg-ball / brute-ball).
    #[arg(long)]
    radius: Option<f64>,
    /// Number of central points gathered around.
    #[arg(long, default_value_t = 64)]
    centrals: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Run brute-force oracles alongside and embed recall/equivalence.
    #[arg(long)]
    verify: bool,
    /// Worker threads for gathering (pipeline) or frames (bench).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Octree subdivision limit.
    #[arg(long, default_value_t = 12)]
    max_depth: u8,
    /// Points per leaf before subdivision.
    #[arg(long, default_value_t = 8)]
    leaf_capacity: usize,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Down-sampling method.
    #[arg(long, value_enum)]
    sample: Option<SampleArg>,
    /// Serialize the octree index to this path.
    #[arg(long, value_name = "PATH")]
    export_index: Option<PathBuf>,
    /// Write the assembled feature map (f32 block + JSON sidecar).
    #[arg(long, value_name = "PATH")]
    export_featuremap: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated sampling methods (fps, rs, ois, ois-approx).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<SampleArg>,
    /// Frames to run; synthetic frames draw fresh seeds per frame.
    #[arg(long, default_value_t = 1)]
    frames: usize,
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    eprintln!("run `pcprep --help` for usage");
    std::process::exit(2);
}

fn resolve_k(common: &CommonArgs) -> usize {
    common.k.or(common.preset.map(|p| p.k())).unwrap_or(1024)
}

fn resolve_gather(common: &CommonArgs) -> Option<GatherSpec> {
    let spec = common.gather.as_ref().map(|text| {
        parse_gather_spec(text).unwrap_or_else(|e| usage_error(&format!("{e:#}")))
    })?;
    if spec.k == 0 {
        usage_error("gather width must be positive");
    }
    if spec.method.is_ball() {
        match common.radius {
            Some(r) if r > 0.0 => {}
            _ => usage_error("ball-query gathering needs a positive --radius"),
        }
    }
    Some(spec)
}

fn resolve_gen(input: &InputArgs, rng_seed: u64) -> Option<GenSpec> {
    input.gen.as_ref().map(|text| {
        parse_gen_spec(text, rng_seed).unwrap_or_else(|e| usage_error(&format!("{e:#}")))
    })
}

fn resolve_build_cfg(common: &CommonArgs) -> BuildConfig {
    if common.max_depth == 0 || common.max_depth > pcprep::MAX_DEPTH {
        usage_error(&format!("--max-depth must be in 1..={}", pcprep::MAX_DEPTH));
    }
    if common.leaf_capacity == 0 {
        usage_error("--leaf-capacity must be at least 1");
    }
    if common.workers == 0 {
        usage_error("--workers must be at least 1");
    }
    BuildConfig { max_depth: common.max_depth, leaf_capacity: common.leaf_capacity }
}

fn common_echo(common: &CommonArgs, input: &InputArgs) -> serde_json::Value {
    json!({
        "in": input.input.as_ref().map(|p| p.display().to_string()),
        "gen": input.gen,
        "preset": common.preset.map(|p| format!("{p:?}").to_lowercase()),
        "k": resolve_k(common),
        "gather": common.gather,
        "mode": common.mode.name(),
        "radius": common.radius,
        "centrals": common.centrals,
        "rng_seed": common.rng_seed,
        "verify": common.verify,
        "workers": common.workers,
        "max_depth": common.max_depth,
        "leaf_capacity": common.leaf_capacity,
    })
}

fn emit(report: &RunReport, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let body = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => std::fs::write(path, body.as_bytes())?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(body.as_bytes())?;
            writeln!(lock)?;
        }
    }
    summarize(report);
    Ok(())
}

/// Short human-readable recap on stderr; the JSON report is the contract.
fn summarize(report: &RunReport) {
    for frame in &report.frames {
        let mut line = format!(
            "frame {}: N={} depth={} nodes={}",
            frame.frame, frame.ingest.n, frame.index.depth, frame.index.nodes
        );
        for s in &frame.samples {
            line.push_str(&format!(" | {} K={} reads={}", s.method, s.k, s.counters.point_reads));
            if let Some(cov) = s.coverage_radius {
                line.push_str(&format!(" cov={cov:.4}"));
            }
        }
        if let Some(g) = &frame.gather {
            line.push_str(&format!(
                " | {}{} K={} centrals={} mean_sort={:.1}",
                g.method,
                g.mode.as_ref().map(|m| format!("[{m}]")).unwrap_or_default(),
                g.k,
                g.centrals,
                g.workload.mean_sort_candidates,
            ));
            if let Some(r) = g.recall_vs_oracle {
                line.push_str(&format!(" recall={r:.4}"));
            }
            if let Some(eq) = g.equivalence_vs_oracle {
                line.push_str(&format!(" exact={eq}"));
            }
        }
        eprintln!("{line}");
    }
    for m in &report.aggregate.methods {
        if let Some(savings) = m.median_savings_vs_fps {
            eprintln!("savings fps -> {}: {savings:.1}x (median)", m.method);
        }
    }
    eprintln!(
        "{} frame(s), {:.2} frames/second",
        report.aggregate.frames, report.aggregate.frames_per_second
    );
}

fn run_pipeline(args: &PipelineArgs) -> anyhow::Result<()> {
    let common = &args.common;
    let build_cfg = resolve_build_cfg(common);
    let gather = resolve_gather(common);
    let mut echo = common_echo(common, &args.input);
    echo["sample"] = json!(args.sample.map(|s| s.name()));
    echo["export_index"] = json!(args.export_index.as_ref().map(|p| p.display().to_string()));
    echo["export_featuremap"] =
        json!(args.export_featuremap.as_ref().map(|p| p.display().to_string()));

    let plan = pipeline::PipelinePlan {
        input: args.input.input.clone(),
        gen: resolve_gen(&args.input, common.rng_seed),
        build_cfg,
        sample: args.sample.map(|method| (method, resolve_k(common))),
        gather,
        mode: common.mode,
        radius: common.radius,
        centrals: common.centrals,
        rng_seed: common.rng_seed,
        verify: common.verify,
        workers: common.workers,
        export_index: args.export_index.clone(),
        export_featuremap: args.export_featuremap.clone(),
        config_echo: echo,
    };
    let report = pipeline::run(&plan)?;
    emit(&report, &common.out)
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let common = &args.common;
    if args.frames == 0 {
        usage_error("--frames must be at least 1");
    }
    let build_cfg = resolve_build_cfg(common);
    let gather = resolve_gather(common);
    let mut echo = common_echo(common, &args.input);
    echo["methods"] = json!(args.methods.iter().map(|m| m.name()).collect::<Vec<_>>());
    echo["frames"] = json!(args.frames);

    let plan = bench::BenchPlan {
        input: args.input.input.clone(),
        gen: resolve_gen(&args.input, common.rng_seed),
        build_cfg,
        methods: args.methods.clone(),
        k: resolve_k(common),
        frames: args.frames,
        gather,
        mode: common.mode,
        radius: common.radius,
        centrals: common.centrals,
        rng_seed: common.rng_seed,
        verify: common.verify,
        workers: common.workers,
        config_echo: echo,
    };
    let report = bench::run(&plan)?;
    emit(&report, &common.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PCPREP_LOG")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pipeline(args) => run_pipeline(args),
        Command::Bench(args) => run_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
