use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pcfmap_core::estimate::{estimate_feature_image, EstimateOptions};
use pcfmap_core::features::{FilterBank, DEFAULT_FEATURE_SEED};
use pcfmap_core::palette::{build_palette, PaletteOptions};
use pcfmap_core::realizer::{realize, DEFAULT_ITERATIONS as REALIZE_ITERATIONS, DEFAULT_STEP};
use pcfmap_core::spectrum::sample_spectra;
use pcfmap_core::synth::{realizability_metric, synthesize, SynthesisConfig, DEFAULT_ITERATIONS as SYNTH_ITERATIONS};
use serde_json::{json, Map, Value};

use pcfmap::{chart, palette_file, points, raster, render, spectra};

#[derive(Parser, Debug)]
#[command(name = "pcfmap", version, about = "Point patterns from density and correlation maps")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file whose keys mirror flag names; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw random target spectra and write them as JSON arrays.
    #[command(args_override_self = true)]
    SampleSpectra(SampleSpectraArgs),
    /// Realize a point pattern whose power spectrum matches a target.
    #[command(args_override_self = true)]
    Realize(RealizeArgs),
    /// Build a palette: basis patterns, embedding and lookup tables.
    #[command(args_override_self = true)]
    BuildPalette(BuildPaletteArgs),
    /// Chart a palette's latent space.
    #[command(args_override_self = true)]
    PaletteViz(PaletteVizArgs),
    /// Synthesize a point pattern from a LAB feature image.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Estimate a LAB feature image from a point pattern.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Render a point pattern as PNG or SVG.
    #[command(args_override_self = true)]
    Render(RenderArgs),
    /// Measure how well constant-correlation targets are reproduced.
    #[command(args_override_self = true)]
    CheckRealizability(RealizabilityArgs),
}

#[derive(Args, Debug)]
struct SampleSpectraArgs {
    #[arg(long)]
    count: usize,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RealizeArgs {
    /// JSON array with the target spectrum.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = REALIZE_ITERATIONS)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildPaletteArgs {
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 1024)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = REALIZE_ITERATIONS)]
    realize_iters: usize,
    /// Synthesis iterations per candidate rate in the learning-rate search.
    #[arg(long, default_value_t = 1000)]
    lr_iters: usize,
    #[arg(long, default_value_t = pcfmap_core::embedding::MDS_ITERATIONS)]
    mds_iters: usize,
    #[arg(long, default_value_t = DEFAULT_FEATURE_SEED)]
    feature_seed: u64,
}

#[derive(Args, Debug)]
struct PaletteVizArgs {
    #[arg(long)]
    palette: PathBuf,
    /// Scatter chart; the swatch chart goes next to it with a `_swatches` suffix.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    size: u32,
    /// Swatches per axis.
    #[arg(long, default_value_t = 8)]
    cells: u32,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    palette: PathBuf,
    #[arg(long, default_value_t = SYNTH_ITERATIONS)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Pixel size of the SVG canvas.
    #[arg(long, default_value_t = 1024)]
    size: u32,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    palette: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    resolution: usize,
    /// Window side as a fraction of the square.
    #[arg(long)]
    window: Option<f64>,
    /// Kernel bandwidth of the lightness estimate.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Window step in output pixels.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    points: PathBuf,
    /// `.png` or `.svg`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    size: u32,
    /// Dot radius in unit-square units when the CSV has none (default: 0.4 × mean nearest-neighbour distance).
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args, Debug)]
struct RealizabilityArgs {
    #[arg(long)]
    palette: PathBuf,
    #[arg(long, default_value_t = 16)]
    probes: usize,
    #[arg(long, default_value_t = 1024)]
    points: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
}

const GLOBAL_VALUE_FLAGS: [&str; 3] = ["--seed", "--threads", "--config"];

/// Path given to `--config`, if any, found without a full parse so that
/// required flags may come from the file.
fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn config_flags(path: &str) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    let map: Map<String, Value> = serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let mut out = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            bail!("config {path}: nested config is not supported");
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag),
            Value::Number(n) => out.extend([flag, n.to_string()]),
            Value::String(s) => out.extend([flag, s]),
            _ => bail!("config {path}: value of {key} must be a number, string or boolean"),
        }
    }
    Ok(out)
}

/// Puts config-derived flags right after the subcommand and every flag from
/// the command line after them, so the command line wins.
fn splice_config(args: &[String], extra: Vec<String>) -> Vec<String> {
    let mut i = 1;
    while i < args.len() && args[i].starts_with("--") {
        i += if GLOBAL_VALUE_FLAGS.contains(&args[i].as_str()) { 2 } else { 1 };
    }
    if i >= args.len() {
        return args.to_vec();
    }
    let mut out = vec![args[0].clone(), args[i].clone()];
    out.extend(extra);
    out.extend_from_slice(&args[1..i]);
    out.extend_from_slice(&args[i + 1..]);
    out
}

fn summary(command: &str, fields: Value) -> Value {
    let mut map = Map::new();
    map.insert("command".into(), json!(command));
    map.insert("status".into(), json!("ok"));
    if let Value::Object(f) = fields {
        map.extend(f);
    }
    Value::Object(map)
}

fn with_swatch_suffix(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "png".into());
    path.with_file_name(format!("{stem}_swatches.{ext}"))
}

fn run(cli: Cli) -> anyhow::Result<Value> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::SampleSpectra(a) => {
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            for (i, (_, s)) in sample_spectra(seed, a.count).iter().enumerate() {
                spectra::write_spectrum(s, &a.out.join(format!("spectrum_{i:04}.json")))?;
            }
            Ok(summary("sample-spectra", json!({ "count": a.count, "out": a.out })))
        }
        Command::Realize(a) => {
            let target = spectra::read_spectrum(&a.target)?;
            let r = realize(&target, a.n, a.iters, a.step, seed)?;
            points::write_points(&r.pattern, &a.out)?;
            Ok(summary(
                "realize",
                json!({ "n": a.n, "initial_loss": r.initial_loss, "final_loss": r.final_loss, "out": a.out }),
            ))
        }
        Command::BuildPalette(a) => {
            let opts = PaletteOptions {
                count: a.count,
                points: a.points,
                seed,
                feature_seed: a.feature_seed,
                realize_iterations: a.realize_iters,
                mds_iterations: a.mds_iters,
                lr_iterations: a.lr_iters,
                ..PaletteOptions::default()
            };
            let b = build_palette(&opts)?;
            palette_file::write_palette(&b.palette, &a.out)?;
            Ok(summary(
                "build-palette",
                json!({
                    "count": a.count,
                    "blue_index": b.blue_index,
                    "initial_stress": b.initial_stress,
                    "final_stress": b.final_stress,
                    "out": a.out,
                }),
            ))
        }
        Command::PaletteViz(a) => {
            let palette = palette_file::read_palette(&a.palette)?;
            let swatch_path = with_swatch_suffix(&a.out);
            raster::save_rgb(&chart::scatter(&palette, a.size), &a.out)?;
            let cell = (a.size / a.cells.max(1)).max(8);
            raster::save_rgb(&chart::swatches(&palette, a.cells.max(1), cell)?, &swatch_path)?;
            Ok(summary("palette-viz", json!({ "scatter": a.out, "swatches": swatch_path })))
        }
        Command::Synth(a) => {
            let img = raster::load_feature_image(&a.image)?;
            let palette = palette_file::read_palette(&a.palette)?;
            let cfg = SynthesisConfig { iterations: a.iters, seed, ..SynthesisConfig::default() };
            let start = Instant::now();
            let out = synthesize(&img, &palette, &cfg)?;
            let wall = start.elapsed().as_secs_f64();
            points::write_points(&out.pattern, &a.out)?;
            if let Some(svg) = &a.svg {
                render::write_svg(&out.pattern, a.size, render::base_radius(&out.pattern), svg)?;
            }
            Ok(summary(
                "synth",
                json!({
                    "N": out.pattern.len(),
                    "initial_objective": out.initial_objective,
                    "final_objective": out.final_objective,
                    "wall_time_s": wall,
                }),
            ))
        }
        Command::Estimate(a) => {
            let pattern = points::read_points(&a.points)?;
            let palette = palette_file::read_palette(&a.palette)?;
            let mut opts = EstimateOptions::with_resolution(a.resolution);
            opts.window = a.window.unwrap_or(opts.window);
            opts.bandwidth = a.bandwidth.unwrap_or(opts.bandwidth);
            opts.stride = a.stride.unwrap_or(opts.stride);
            let bank = FilterBank::new(palette.feature_seed());
            let (img, map) = estimate_feature_image(&pattern, &palette, &bank, &opts)?;
            raster::save_feature_image(&img, &a.out)?;
            let median = map.median();
            Ok(summary(
                "estimate",
                json!({ "resolution": a.resolution, "median_u": median.u, "median_v": median.v, "out": a.out }),
            ))
        }
        Command::Render(a) => {
            let pattern = points::read_points(&a.points)?;
            let radius = a.radius.or_else(|| render::base_radius(&pattern));
            match a.out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                Some("svg") => render::write_svg(&pattern, a.size, radius, &a.out)?,
                Some("png") => render::write_png(&pattern, a.size, radius, &a.out)?,
                _ => bail!("{}: output must end in .png or .svg", a.out.display()),
            }
            Ok(summary("render", json!({ "points": pattern.len(), "out": a.out })))
        }
        Command::CheckRealizability(a) => {
            let palette = palette_file::read_palette(&a.palette)?;
            let cfg = SynthesisConfig { iterations: a.iters, seed, ..SynthesisConfig::default() };
            let r = realizability_metric(&palette, a.probes, a.points, &cfg)?;
            Ok(summary("check-realizability", json!({ "A": r.a, "B": r.b, "ratio": r.ratio, "probes": a.probes })))
        }
    }
}

fn command_name(args: &[String]) -> String {
    args.iter().skip(1).find(|a| !a.starts_with('-')).cloned().unwrap_or_default()
}

fn failure(command: &str, status: &str, message: &str) {
    println!("{}", json!({ "command": command, "status": status, "error": message }));
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(path) = config_path(&args) {
        match config_flags(&path) {
            Ok(extra) => args = splice_config(&args, extra),
            Err(e) => {
                eprintln!("error: {e:#}");
                failure(&command_name(&args), "error", &format!("{e:#}"));
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            failure(&command_name(&args), "usage-error", &e.kind().to_string());
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            failure(&command_name(&args), "usage-error", "--threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            failure(&command_name(&args), "error", &e.to_string());
            return ExitCode::from(2);
        }
    }
    let name = command_name(&args);
    match run(cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            failure(&name, "error", &format!("{e:#}"));
            ExitCode::from(2)
        }
    }
}
