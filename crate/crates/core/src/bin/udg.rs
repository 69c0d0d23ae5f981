//! `udg` — rain streak removal from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use udg::angle::estimate_angle_with;
use udg::config::{DatasetConfig, RunConfig};
use udg::dataset::{load_samples, procedural_samples, write_sample};
use udg::eval::{evaluate_pairs, format_db, run_sweep, LabeledPair};
use udg::io::{load_gray, load_image, save_image};
use udg::solver::AngleSource;
use udg::synth::make_pair;
use udg::{derain_image, BlendMode, Exec, TileConfig, Tiling, UdgError};

#[derive(Parser)]
#[command(name = "udg", version, about = "Directional-gradient rain streak removal")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split rainy PNGs into clean and rain layers.
    Derain(DerainArgs),
    /// Generate synthetic rainy images with ground truth.
    Synth(SynthArgs),
    /// Print the dominant streak angle of each input.
    EstimateAngle(EstimateArgs),
    /// Score predictions against ground truth (matched by file name).
    Evaluate(EvaluateArgs),
    /// Run a parameter / angle-error sweep described by a config file.
    Sweep(SweepArgs),
}

#[derive(clap::Args)]
#[command(allow_negative_numbers = true)]
struct DerainArgs {
    /// A PNG file or a directory of PNGs.
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Streak angle in degrees; skips estimation.
    #[arg(long)]
    angle: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Along-streak weight on the rain layer.
    #[arg(long)]
    lx: Option<f64>,
    /// Across-streak weight tying the rain layer to the observation.
    #[arg(long)]
    ly: Option<f64>,
    /// Outer iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Process in 128x128 tiles with 16-px overlap.
    #[arg(long, conflicts_with = "no_tile")]
    tile: bool,
    /// Never tile, whatever the image size.
    #[arg(long)]
    no_tile: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BlendArg {
    Screen,
    Additive,
}

#[derive(clap::Args)]
#[command(allow_negative_numbers = true)]
struct SynthArgs {
    /// Directory of clean PNGs to add rain to.
    #[arg(long, conflicts_with = "procedural", required_unless_present = "procedural")]
    clean_dir: Option<PathBuf>,
    /// Generate this many procedural clean scenes instead.
    #[arg(long)]
    procedural: Option<usize>,
    /// Side of procedural scenes.
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    angle: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    blend: Option<BlendArg>,
}

#[derive(clap::Args)]
#[command(allow_negative_numbers = true)]
struct EstimateArgs {
    /// A PNG file or a directory of PNGs.
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
#[command(allow_negative_numbers = true)]
struct EvaluateArgs {
    pred_dir: PathBuf,
    gt_dir: PathBuf,
    /// Per-image CSV.
    #[arg(long, default_value = "evaluation.csv")]
    out: PathBuf,
    /// Optional JSON report.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(clap::Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for sweep.csv and report.json.
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn config(e: UdgError) -> Self {
        Failure::Config(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(Failure::config),
        None => Ok(RunConfig::default()),
    }
}

fn png_inputs(input: &Path) -> Result<Vec<PathBuf>, Failure> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| Failure::runtime(format!("{}: {e}", input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        Ok(files)
    } else if input.exists() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(Failure::runtime(format!("{}: no such file or directory", input.display())))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct DerainMeta<'a> {
    input: String,
    angle_degrees: f64,
    angle_source: AngleSource,
    confidence: Option<f64>,
    iterations: usize,
    final_energy: f64,
    converged: bool,
    tiles: usize,
    warnings: &'a [String],
    params: &'a udg::UdgParams,
}

fn cmd_derain(args: DerainArgs, exec: Exec) -> CliResult {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(v) = args.tau {
        cfg.params.tau = v;
    }
    if let Some(v) = args.lx {
        cfg.params.lambda_along = v;
    }
    if let Some(v) = args.ly {
        cfg.params.lambda_across = v;
    }
    if let Some(v) = args.iters {
        cfg.params.outer_iters = v;
    }
    if args.tile {
        cfg.tiling = Tiling::Always(TileConfig::default());
    } else if args.no_tile {
        cfg.tiling = Tiling::Never;
    }
    cfg.validate().map_err(Failure::config)?;
    if let Some(a) = args.angle {
        if !a.is_finite() || a.abs() > 90.0 {
            return Err(Failure::Config(format!("invalid parameter `angle`: must be in [-90, 90], got {a}")));
        }
    }

    let inputs = png_inputs(&args.input)?;
    let per_image_dirs = args.input.is_dir();
    let mut failed = 0;
    for path in &inputs {
        let out_dir = if per_image_dirs {
            args.out.join(stem(path))
        } else {
            args.out.clone()
        };
        let outcome = (|| -> Result<(), Failure> {
            let y = load_image(path).map_err(Failure::runtime)?;
            let res = derain_image(&y, &cfg.params, args.angle, &cfg.search, cfg.tiling, exec).map_err(Failure::runtime)?;
            for w in &res.warnings {
                eprintln!("warning: {}: {w}", path.display());
            }
            create_dir(&out_dir)?;
            save_image(&res.x, out_dir.join("X.png")).map_err(Failure::runtime)?;
            save_image(&res.r, out_dir.join("R.png")).map_err(Failure::runtime)?;
            let meta = DerainMeta {
                input: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
                angle_degrees: res.angle.angle_degrees,
                angle_source: res.angle.source,
                confidence: res.angle.confidence,
                iterations: res.iters_used,
                final_energy: res.final_energy,
                converged: res.converged,
                tiles: res.tiles,
                warnings: &res.warnings,
                params: &cfg.params,
            };
            write_json(&out_dir.join("meta.json"), &meta)?;
            println!(
                "{}: angle {:.2} ({:?}), {} iterations -> {}",
                path.display(),
                res.angle.angle_degrees,
                res.angle.source,
                res.iters_used,
                out_dir.display()
            );
            Ok(())
        })();
        if let Err(Failure::Runtime(msg) | Failure::Config(msg)) = outcome {
            eprintln!("error: {}: {msg}", path.display());
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} inputs failed", inputs.len())));
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult {
    let mut cfg = load_config(args.config.as_deref())?;
    let spec = &mut cfg.rain;
    if let Some(v) = args.angle {
        spec.angle_degrees = v;
    }
    if let Some(v) = args.density {
        spec.density = v;
    }
    if let Some(v) = args.length {
        spec.length_px = v;
    }
    if let Some(v) = args.width {
        spec.width_px = v;
    }
    if let Some(v) = args.intensity {
        spec.intensity = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(b) = args.blend {
        cfg.blend = match b {
            BlendArg::Screen => BlendMode::Screen,
            BlendArg::Additive => BlendMode::Additive,
        };
    }
    cfg.validate().map_err(Failure::config)?;
    if args.size < 32 {
        return Err(Failure::Config("invalid parameter `size`: must be >= 32".into()));
    }

    let items: Vec<LabeledPair> = if let Some(n) = args.procedural {
        procedural_samples(n, args.size, cfg.rain.seed, &cfg.rain, 0.0, cfg.blend).map_err(Failure::runtime)?
    } else {
        let dir = args.clean_dir.as_deref().expect("clap requires one source");
        png_inputs(dir)?
            .iter()
            .enumerate()
            .map(|(k, path)| {
                let clean = load_gray(path)?;
                let spec = udg::RainSpec {
                    seed: cfg.rain.seed.wrapping_add(k as u64),
                    ..cfg.rain
                };
                Ok(LabeledPair {
                    id: stem(path),
                    pair: make_pair(&clean, &spec, cfg.blend)?,
                })
            })
            .collect::<udg::Result<_>>()
            .map_err(Failure::runtime)?
    };
    for it in &items {
        let sidecar = write_sample(&args.out, &it.id, &it.pair).map_err(Failure::runtime)?;
        println!("{}", sidecar.display());
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs, exec: Exec) -> CliResult {
    let cfg = load_config(args.config.as_deref())?;
    cfg.search.validate().map_err(Failure::config)?;
    let inputs = png_inputs(&args.input)?;
    let many = inputs.len() > 1 || args.input.is_dir();
    let mut failed = 0;
    for path in &inputs {
        let outcome = load_gray(path).and_then(|img| estimate_angle_with(&img, &cfg.search, exec));
        let prefix = if many { format!("{}: ", path.display()) } else { String::new() };
        match outcome {
            Ok(est) => {
                println!(
                    "{prefix}{:.1} ± {} deg (confidence {:.2})",
                    est.angle_degrees, cfg.search.refine_step_degrees, est.confidence
                );
                if est.is_low_confidence() {
                    eprintln!("warning: {}: low-confidence angle estimate", path.display());
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} inputs failed", inputs.len())));
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    if !args.gt_dir.is_dir() {
        return Err(Failure::runtime(format!("{}: not a directory", args.gt_dir.display())));
    }
    let preds = png_inputs(&args.pred_dir)?;
    let mut items = Vec::with_capacity(preds.len());
    for pred in &preds {
        let name = pred.file_name().expect("listed files have names");
        let gt = args.gt_dir.join(name);
        let a = load_gray(pred).map_err(Failure::runtime)?;
        let b = load_gray(&gt).map_err(Failure::runtime)?;
        items.push((stem(pred), a, b));
    }
    let report = evaluate_pairs(&items).map_err(Failure::runtime)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", report.table());
    let file = std::fs::File::create(&args.out).map_err(|e| Failure::runtime(format!("{}: {e}", args.out.display())))?;
    report.write_scores_csv(file).map_err(Failure::runtime)?;
    if let Some(json) = &args.json {
        write_json(json, &report)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, exec: Exec) -> CliResult {
    let cfg = load_config(Some(&args.config))?;
    cfg.validate().map_err(Failure::config)?;
    let dataset = match &cfg.dataset {
        None => return Err(Failure::Config("invalid parameter `dataset`: required for sweep".into())),
        Some(DatasetConfig::Procedural {
            count,
            size,
            seed,
            angle_spread_deg,
        }) => procedural_samples(*count, *size, *seed, &cfg.rain, *angle_spread_deg, cfg.blend),
        Some(DatasetConfig::Dir { path }) => load_samples(path),
    }
    .map_err(Failure::runtime)?;
    let report = run_sweep(&dataset, &cfg.params, &cfg.grid, cfg.tiling, exec).map_err(Failure::runtime)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    create_dir(&args.out)?;
    let csv_path = args.out.join("sweep.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Failure::runtime(format!("{}: {e}", csv_path.display())))?;
    report.write_csv(file).map_err(Failure::runtime)?;
    write_json(&args.out.join("report.json"), &report)?;
    println!("{:>8} {:>8} {:>10} {:>8} {:>12} {:>10}", "ratio", "err_deg", "psnr_db", "ssim", "detail_tv", "residual");
    for c in report.sweep_table.iter().flatten() {
        println!(
            "{:>8} {:>8} {:>10} {:>8.4} {:>12.3} {:>10.4}",
            c.ratio,
            c.angle_err_deg,
            format_db(c.psnr_db),
            c.ssim,
            c.detail_tv,
            c.residual_rain
        );
    }
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("error: {f}");
        }
        return Err(Failure::Runtime(format!("{} sweep cells failed", report.failures.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let result = match cli.command {
        Command::Derain(a) => cmd_derain(a, exec),
        Command::Synth(a) => cmd_synth(a),
        Command::EstimateAngle(a) => cmd_estimate(a, exec),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
