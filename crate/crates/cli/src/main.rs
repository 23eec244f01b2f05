//! `cmaug`: batch front end for compliant motion augmentation.
//!
//! Exit codes: 0 on success, 1 on validation or runtime failure, 2 on usage
//! errors (bad flags, missing input files).

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use compliant_motion::analysis::{
    curve_to_csv, plateau_samples, stiffness_bounds, stiffness_curve, tracking_metrics,
    NoiseBudget, StiffnessBins,
};
use compliant_motion::augment::{augment_clip, AugmentedFrame};
use compliant_motion::config::AugmentConfig;
use compliant_motion::dataset::{
    load_dataset, read_frames_jsonl, sha256_hex, write_atomic, write_dataset, DatasetSource,
    RunInput, RunManifest, MANIFEST_FILE,
};
use compliant_motion::ik::StiffnessCommand;
use compliant_motion::model::{parse_clip, parse_model, Configuration, KinematicModel, MotionClip};
use compliant_motion::rlprep::{ObservationConfig, ObservationLayout};

#[derive(Parser)]
#[command(
    name = "cmaug",
    version,
    about = "Compliant motion augmentation for humanoid reference clips"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment clips with sampled interaction events and write datasets.
    GenData(GenDataArgs),
    /// Stiffness range resolvable under a sensing noise budget.
    Bounds(BoundsArgs),
    /// Effective-stiffness curve of a dataset.
    AnalyzeStiffness(AnalyzeArgs),
    /// Joint and keypoint tracking error between two trajectories.
    Metrics(MetricsArgs),
    /// Check a clip against a model's joint limits.
    Validate(ValidateArgs),
    /// Write the policy observation layout as JSON.
    ObsLayout(ObsLayoutArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    model: PathBuf,
    /// Reference clip; repeat for several clips.
    #[arg(long, required = true)]
    clip: Vec<PathBuf>,
    /// TOML configuration layered over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write the binary frame file.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Force estimate noise (N).
    #[arg(long)]
    force_noise: f64,
    /// Position estimate noise (m).
    #[arg(long)]
    pos_noise: f64,
    /// Required force accuracy (N).
    #[arg(long)]
    force_acc: f64,
    /// Required position accuracy (m).
    #[arg(long)]
    pos_acc: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Dataset directory, or a gen-data output directory of datasets.
    #[arg(long)]
    dataset: PathBuf,
    /// Number of log-spaced bins over the training range, or comma-separated edges.
    #[arg(long, default_value = "8")]
    bins: String,
    /// Output CSV; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Clip file, dataset directory or frames.jsonl (augmented trajectory).
    #[arg(long)]
    traj_a: PathBuf,
    #[arg(long)]
    traj_b: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    clip: PathBuf,
}

#[derive(Args)]
struct ObsLayoutArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output JSON; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<compliant_motion::Error> for Failure {
    fn from(e: compliant_motion::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn require_exists(flag: &str, path: &Path) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "--{flag}: no such file or directory: {}",
            path.display()
        )))
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_bytes(path)?)
        .map_err(|_| Failure::Runtime(format!("{}: not UTF-8 text", path.display())))
}

fn load_model(path: &Path) -> CliResult<(KinematicModel, String)> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Runtime(format!("{}: not UTF-8 text", path.display())))?;
    Ok((parse_model(&text, path)?, sha256_hex(&bytes)))
}

fn write_output(path: &Path, text: &str) -> CliResult {
    if path.as_os_str() == "-" {
        print!("{text}");
        Ok(())
    } else {
        Ok(write_atomic(path, text.as_bytes())?)
    }
}

/// Seed of the `index`-th clip; the first clip uses the run seed itself.
fn clip_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn clip_dir_names(clips: &[PathBuf]) -> Vec<String> {
    let mut used = HashSet::new();
    clips
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "clip".into());
            let mut name = stem.clone();
            if !used.insert(name.clone()) {
                name = format!("{stem}_{i}");
                used.insert(name.clone());
            }
            name
        })
        .collect()
}

fn gen_data(args: &GenDataArgs) -> CliResult {
    require_exists("model", &args.model)?;
    for c in &args.clip {
        require_exists("clip", c)?;
    }
    if let Some(c) = &args.config {
        require_exists("config", c)?;
    }
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let started = Instant::now();
    let (model, model_sha) = load_model(&args.model)?;
    let mut cfg = match &args.config {
        Some(p) => AugmentConfig::load(p)?,
        None => AugmentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.binary {
        cfg.binary = true;
    }
    cfg.validate()?;

    let mut clips: Vec<(MotionClip, String)> = Vec::new();
    for p in &args.clip {
        let bytes = read_bytes(p)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Failure::Runtime(format!("{}: not UTF-8 text", p.display())))?;
        clips.push((parse_clip(&text, &model, p)?, sha256_hex(&bytes)));
    }
    let names = clip_dir_names(&args.clip);
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    let results: Vec<compliant_motion::Result<_>> = pool.install(|| {
        clips
            .par_iter()
            .enumerate()
            .map(|(i, (clip, clip_sha))| {
                let mut clip_cfg = cfg.clone();
                clip_cfg.seed = clip_seed(cfg.seed, i);
                let aug = augment_clip(&model, clip, &clip_cfg)?;
                let source = DatasetSource {
                    model_name: model.name().to_string(),
                    model_sha256: model_sha.clone(),
                    clip: args.clip[i].display().to_string(),
                    clip_sha256: clip_sha.clone(),
                    joint_names: model.movable_joint_names(),
                    feet: clip.feet.clone(),
                };
                write_dataset(args.out.join(&names[i]), &source, &aug, &clip_cfg)
            })
            .collect()
    });

    let mut inputs = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let manifest =
            r.map_err(|e| Failure::Runtime(format!("clip {}: {e}", args.clip[i].display())))?;
        println!(
            "{}: {} frames, {} events, {} accepted -> {}",
            args.clip[i].display(),
            manifest.frame_count,
            manifest.event_count,
            manifest.accepted_events,
            args.out.join(&names[i]).display()
        );
        inputs.push(RunInput {
            path: args.clip[i].display().to_string(),
            sha256: clips[i].1.clone(),
            output: names[i].clone(),
        });
    }
    let run = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: std::env::args().collect(),
        seed: cfg.seed,
        model: args.model.display().to_string(),
        model_sha256: model_sha,
        clips: inputs,
        config: cfg,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    run.write(args.out.join("run_manifest.json"))?;
    Ok(())
}

fn bounds(args: &BoundsArgs) -> CliResult {
    let budget = NoiseBudget::new(
        args.force_noise,
        args.pos_noise,
        args.force_acc,
        args.pos_acc,
    )
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let b = stiffness_bounds(&budget)?;
    println!("k_min={} k_max={}", b.k_min, b.k_max);
    Ok(())
}

fn parse_bins(text: &str) -> CliResult<StiffnessBins> {
    let (lo, hi) = StiffnessCommand::TRAINING_K_T;
    if let Ok(count) = text.trim().parse::<usize>() {
        return Ok(StiffnessBins::LogSpaced { count, lo, hi });
    }
    let edges: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    edges.map(StiffnessBins::Edges).map_err(|_| {
        Failure::Usage(format!(
            "--bins: expected a count or comma-separated edges, got `{text}`"
        ))
    })
}

/// Frames of one dataset directory, or of every dataset directly below it,
/// one entry per dataset.
fn dataset_frames(dir: &Path) -> CliResult<Vec<Vec<AugmentedFrame>>> {
    if dir.join(MANIFEST_FILE).exists() {
        return Ok(vec![load_dataset(dir)?.1]);
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).exists())
        .collect();
    if subdirs.is_empty() {
        return Err(Failure::Runtime(format!(
            "{}: no dataset manifest found",
            dir.display()
        )));
    }
    subdirs.sort();
    let mut out = Vec::new();
    for d in subdirs {
        out.push(load_dataset(&d)?.1);
    }
    Ok(out)
}

fn analyze_stiffness(args: &AnalyzeArgs) -> CliResult {
    require_exists("dataset", &args.dataset)?;
    let bins = parse_bins(&args.bins)?;
    bins.edges()
        .map_err(|e| Failure::Usage(format!("--bins: {e}")))?;
    let samples: Vec<_> = dataset_frames(&args.dataset)?
        .iter()
        .flat_map(|f| plateau_samples(f))
        .collect();
    let curve = stiffness_curve(&samples, &bins)?;
    if curve.is_empty() {
        log::warn!("no plateau frames in {}", args.dataset.display());
    }
    write_output(&args.out, &curve_to_csv(&curve))
}

fn trajectory(path: &Path, model: &KinematicModel) -> CliResult<Vec<Configuration>> {
    if path.is_dir() {
        return Ok(dataset_frames(path)?
            .into_iter()
            .flatten()
            .map(|f| f.q_aug)
            .collect());
    }
    if path.extension().is_some_and(|e| e == "jsonl") {
        return Ok(read_frames_jsonl(path)?
            .into_iter()
            .map(|f| f.q_aug)
            .collect());
    }
    let text = read_text(path)?;
    Ok(parse_clip(&text, model, path)?.frames)
}

fn metrics(args: &MetricsArgs) -> CliResult {
    require_exists("model", &args.model)?;
    require_exists("traj-a", &args.traj_a)?;
    require_exists("traj-b", &args.traj_b)?;
    let (model, _) = load_model(&args.model)?;
    let a = trajectory(&args.traj_a, &model)?;
    let b = trajectory(&args.traj_b, &model)?;
    let m = tracking_metrics(&model, &a, &b)?;
    print!("{}", m.to_csv());
    Ok(())
}

fn validate(args: &ValidateArgs) -> CliResult {
    require_exists("model", &args.model)?;
    require_exists("clip", &args.clip)?;
    let (model, _) = load_model(&args.model)?;
    let clip = parse_clip(&read_text(&args.clip)?, &model, &args.clip)?;
    let violations = clip.limit_violations(&model);
    if violations.is_empty() {
        println!(
            "ok: {} frames, {} joints within limits",
            clip.len(),
            model.joint_count()
        );
        return Ok(());
    }
    for v in &violations {
        eprintln!(
            "frame {}: joint `{}` = {} outside [{}, {}]",
            v.frame, v.joint, v.value, v.lower, v.upper
        );
    }
    Err(Failure::Runtime(format!(
        "{}: {} joint-limit violations",
        args.clip.display(),
        violations.len()
    )))
}

fn obs_layout(args: &ObsLayoutArgs) -> CliResult {
    require_exists("model", &args.model)?;
    let (model, _) = load_model(&args.model)?;
    let layout = ObservationLayout::new(&model, &ObservationConfig::default());
    write_output(&args.out, &layout.to_json())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Bounds(a) => bounds(a),
        Command::AnalyzeStiffness(a) => analyze_stiffness(a),
        Command::Metrics(a) => metrics(a),
        Command::Validate(a) => validate(a),
        Command::ObsLayout(a) => obs_layout(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
