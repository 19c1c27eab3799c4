//! `wdc` command line tool.
//!
//! Exit status is 0 on success, 1 when processing fails and 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use wdc::synth::{load_scene, save_scene};
use wdc::{
    apply_messages_traced, dehaze_traced, load_image, make_test_scene, mse, save_image, ssim,
    synthesize_haze, AirLight, DehazeConfig, DehazeResult, Diagnostics, InitKind, Initializer,
    MessageFile, Mode, SceneKind, Trace,
};

#[derive(Parser)]
#[command(name = "wdc", version, about = "Weighted dark channel dehazing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dehaze one image, or every PNG/PPM in a directory.
    Dehaze(DehazeArgs),
    /// Apply a message file while dehazing.
    Messages(MessagesArgs),
    /// Synthesize a hazy image and its ground truth.
    Synth(SynthArgs),
    /// Compare two images; prints `mse=<v> ssim=<v>`.
    Eval { a: PathBuf, b: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Wdc,
    Cwdc,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Dilation,
    Opening,
}

#[derive(Args, Clone)]
struct Tuning {
    #[arg(long, value_enum, default_value = "wdc")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "dilation")]
    init: InitArg,
    /// Mask radius in pixels.
    #[arg(long, default_value_t = wdc::transmission::DEFAULT_MASK_RADIUS)]
    radius: usize,
    #[arg(long, default_value_t = wdc::graph::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long = "eps-t", default_value_t = wdc::dehaze::DEFAULT_EPS_T)]
    eps_t: f64,
    /// Fixed air-light `R,G,B` in [0, 1]; estimated from the image otherwise.
    #[arg(long, value_parser = parse_airlight)]
    airlight: Option<AirLight>,
    #[arg(long = "max-side", default_value_t = wdc::dehaze::DEFAULT_MAX_SIDE)]
    max_side: usize,
}

impl Tuning {
    fn config(&self) -> DehazeConfig {
        DehazeConfig {
            mode: match self.mode {
                ModeArg::Wdc => Mode::Wdc,
                ModeArg::Cwdc => Mode::Cwdc,
            },
            initializer: Initializer {
                kind: match self.init {
                    InitArg::Dilation => InitKind::Dilation,
                    InitArg::Opening => InitKind::Opening,
                },
                radius: self.radius,
            },
            lambda: self.lambda,
            eps_t: self.eps_t,
            airlight: self.airlight,
            max_side: self.max_side,
            ..Default::default()
        }
    }
}

fn parse_airlight(s: &str) -> Result<AirLight, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|v| (0.0..=1.0).contains(v)) => Ok(AirLight::new([r, g, b])),
        _ => Err("expected three comma separated values in [0, 1]".into()),
    }
}

#[derive(Args)]
struct Outputs {
    /// Recovered radiance (a directory in directory mode).
    #[arg(long)]
    out: PathBuf,
    /// Refined transmission as 16-bit PNG.
    #[arg(long)]
    trans: Option<PathBuf>,
    /// Write lower bound, initial transmission, weights and dark-pixel mask here.
    #[arg(long = "dump-intermediates")]
    dump_intermediates: Option<PathBuf>,
    /// Solver convergence log as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct DehazeArgs {
    input: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[command(flatten)]
    outputs: Outputs,
    /// Message file to apply.
    #[arg(long)]
    messages: Option<PathBuf>,
}

#[derive(Args)]
struct MessagesArgs {
    input: PathBuf,
    #[arg(long)]
    messages: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[command(flatten)]
    outputs: Outputs,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in scene.
    #[arg(long, conflicts_with = "spec", value_parser = clap::value_parser!(SceneKind))]
    scene: Option<SceneKind>,
    /// Scene descriptor written by an earlier `synth --truth`.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_parser = parse_airlight)]
    airlight: Option<AirLight>,
    /// Hazy image.
    #[arg(long)]
    out: PathBuf,
    /// Directory for the true transmission, radiance and scene descriptor.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Threshold on `t_init - b` for the dark-pixel mask dump.
const DARK_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct Manifest<'a> {
    input: &'a Path,
    config: &'a DehazeConfig,
    airlight: [f64; 3],
    airlight_estimated: bool,
    messages: Option<&'a Path>,
    width: usize,
    height: usize,
    /// Scale of the weight dump: stored values are `W / weights_max`.
    weights_max: f64,
    timings_ms: Timings,
    solver: &'a Diagnostics,
}

#[derive(Serialize)]
struct Timings {
    load: f64,
    solve: f64,
    write: f64,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn dump_intermediates(r: &DehazeResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    r.lower_bound.save_png16(dir.join("lower_bound.png"))?;
    r.initial_transmission
        .save_png16(dir.join("initial_transmission.png"))?;
    let wmax = r.weights.max();
    r.weights
        .map(|w| w / wmax)
        .save_png16(dir.join("weights.png"))?;
    r.dark_pixels(DARK_TOL)
        .save_png16(dir.join("dark_pixels.png"))?;
    Ok(())
}

struct Job<'a> {
    input: PathBuf,
    out: PathBuf,
    trans: Option<PathBuf>,
    dump: Option<PathBuf>,
    trace: Option<PathBuf>,
    messages: Option<&'a Path>,
}

fn run_one(job: &Job, cfg: &DehazeConfig, messages: Option<&MessageFile>) -> Result<()> {
    let t0 = Instant::now();
    let img = load_image(&job.input)?;
    let load = ms(t0);

    let t1 = Instant::now();
    let mut trace = if job.trace.is_some() {
        Trace::enabled()
    } else {
        Trace::disabled()
    };
    let r = match messages {
        Some(m) => apply_messages_traced(&img, cfg, &m.messages, &mut trace)?,
        None => dehaze_traced(&img, cfg, &mut trace)?,
    };
    let solve = ms(t1);
    for w in &r.diagnostics.warnings {
        eprintln!("warning: {}: {w}", job.input.display());
    }

    let t2 = Instant::now();
    create_parent(&job.out)?;
    save_image(&r.radiance, &job.out)?;
    if let Some(p) = &job.trans {
        create_parent(p)?;
        r.transmission.save_png16(p)?;
    }
    if let Some(dir) = &job.dump {
        dump_intermediates(&r, dir)?;
    }
    if let Some(p) = &job.trace {
        create_parent(p)?;
        trace
            .save_csv(p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let manifest = Manifest {
        input: &job.input,
        config: cfg,
        airlight: r.airlight.rgb(),
        airlight_estimated: r.diagnostics.airlight_estimated,
        messages: job.messages,
        width: r.transmission.width(),
        height: r.transmission.height(),
        weights_max: r.weights.max(),
        timings_ms: Timings {
            load,
            solve,
            write: ms(t2),
        },
        solver: &r.diagnostics,
    };
    let path = job.out.with_extension("manifest.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("png" | "ppm")
    )
}

fn dehaze_cmd(
    input: &Path,
    tuning: &Tuning,
    outputs: &Outputs,
    messages: Option<&Path>,
) -> Result<()> {
    let cfg = tuning.config();
    cfg.validate()?;
    let file = messages.map(MessageFile::load).transpose()?;

    if !input.is_dir() {
        let job = Job {
            input: input.to_path_buf(),
            out: outputs.out.clone(),
            trans: outputs.trans.clone(),
            dump: outputs.dump_intermediates.clone(),
            trace: outputs.trace.clone(),
            messages,
        };
        return run_one(&job, &cfg, file.as_ref());
    }

    // directory mode: <out>/<stem>.png, <stem>.t.png, per-file subdirectories for dumps
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        bail!("no PNG or PPM files in {}", input.display());
    }
    let jobs: Vec<Job> = inputs
        .into_iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Job {
                out: outputs.out.join(format!("{stem}.png")),
                trans: Some(outputs.out.join(format!("{stem}.t.png"))),
                dump: outputs.dump_intermediates.as_ref().map(|d| d.join(&stem)),
                trace: outputs
                    .trace
                    .as_ref()
                    .map(|d| d.join(format!("{stem}.csv"))),
                input: p,
                messages,
            }
        })
        .collect();
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|job| {
            run_one(job, &cfg, file.as_ref())
                .err()
                .map(|e| format!("{}: {e:#}", job.input.display()))
        })
        .collect();
    for f in &failures {
        eprintln!("error: {f}");
    }
    if !failures.is_empty() {
        bail!("{} of {} files failed", failures.len(), jobs.len());
    }
    Ok(())
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let mut spec = match (&args.scene, &args.spec) {
        (Some(kind), None) => make_test_scene(*kind, args.size)?,
        (None, Some(path)) => load_scene(path)?,
        _ => bail!("pass exactly one of --scene or --spec"),
    };
    if let Some(beta) = args.beta {
        spec = spec.with_beta(beta);
    }
    if let Some(a) = args.airlight {
        spec = spec.with_airlight(a);
    }
    let (hazy, t) = synthesize_haze(&spec)?;
    create_parent(&args.out)?;
    save_image(&hazy, &args.out)?;
    if let Some(dir) = &args.truth {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        t.save_png16(dir.join("transmission.png"))?;
        save_image(&spec.radiance, dir.join("radiance.png"))?;
        save_scene(&spec, dir.join("scene.json"))?;
    }
    Ok(())
}

fn eval_cmd(a: &Path, b: &Path) -> Result<()> {
    let (ia, ib) = (load_image(a)?, load_image(b)?);
    println!("mse={} ssim={}", mse(&ia, &ib)?, ssim(&ia, &ib)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dehaze(a) => dehaze_cmd(&a.input, &a.tuning, &a.outputs, a.messages.as_deref()),
        Command::Messages(a) => dehaze_cmd(&a.input, &a.tuning, &a.outputs, Some(&a.messages)),
        Command::Synth(a) => synth_cmd(a),
        Command::Eval { a, b } => eval_cmd(a, b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
