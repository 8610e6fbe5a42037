//! Command-line surface. Every command prints one JSON object per line on
//! stdout (step records, file summaries, metric reports) and human-readable
//! logs on stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clip::MotionClip;
use crate::dataio::{
    generate_synthetic, read_features, read_skeleton, write_features, write_skeleton, Checkpoint, ClipFile,
    GeneratorKind, SyntheticMotionSpec,
};
use crate::denoiser::{Activation, AdamConfig, Denoiser, DenoiserConfig, Real, TrainConfig, Trainer, TrainingSet};
use crate::diffusion::{sample, DiffusionSchedule, ReverseVariance, ScheduleKind};
use crate::error::{Error, Result};
use crate::losses::{ContactThresholds, LossConfig};
use crate::metrics::{evaluate, FlattenExtractor, MetricConfig};
use crate::postprocess::{smooth_motion, SmootherConfig};
use crate::representation::{decode, decode_positions, encode, FeatureMatrix, ReprKind};
use crate::rotations::Vec3;
use crate::skeleton::Skeleton;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) | Error::Numeric(_) | Error::DegenerateFeatures { .. } | Error::DegenerateSixD(_) => {
            EXIT_NUMERIC
        }
        Error::UnknownKind(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(name = "motiondiff", version, about = "Motion diffusion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a denoiser on clip files.
    Train(TrainArgs),
    /// Draw clips from a trained checkpoint.
    Sample(SampleArgs),
    /// Score generated clips against reference clips.
    Eval(EvalArgs),
    /// Encode a clip file to a feature file, or decode back with --inverse.
    Convert(ConvertArgs),
    /// Gaussian-smooth a feature or clip file along time.
    Smooth(SmoothArgs),
    /// Write a seeded synthetic dataset of clip files.
    GenSynth(GenSynthArgs),
}

fn parse_kind(s: &str) -> std::result::Result<ReprKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Cosine,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VarianceArg {
    Posterior,
    Beta,
    None,
}

/// Model shape independent of the data it is trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub latent_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub activation: Activation,
    pub positional_encoding: bool,
    pub dropout: f64,
}

impl ModelShape {
    pub fn from_preset(p: Preset) -> Self {
        let c = match p {
            Preset::Desk => DenoiserConfig::desk(1, 1),
            Preset::Full => DenoiserConfig::full_scale(1, 1),
        };
        ModelShape {
            latent_dim: c.latent_dim,
            num_layers: c.num_layers,
            num_heads: c.num_heads,
            ffn_dim: c.ffn_dim,
            activation: c.activation,
            positional_encoding: c.positional_encoding,
            dropout: c.dropout,
        }
    }

    pub fn config(&self, feature_dim: usize, max_frames: usize) -> DenoiserConfig {
        DenoiserConfig {
            feature_dim,
            max_frames,
            latent_dim: self.latent_dim,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            ffn_dim: self.ffn_dim,
            activation: self.activation,
            positional_encoding: self.positional_encoding,
            dropout: self.dropout,
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kind: ReprKind,
    /// Skeleton JSON; when absent the skeleton stored in the clip files is used.
    pub skeleton: Option<PathBuf>,
    /// Clip files or directories of them.
    pub data: Vec<PathBuf>,
    pub model: ModelShape,
    pub timesteps: usize,
    pub schedule: ScheduleKind,
    pub loss: LossConfig,
    pub contact: ContactThresholds,
    pub train: TrainConfig,
    pub steps: u64,
    pub seed: u64,
    pub precision: Precision,
    /// Checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: u64,
    /// Emit a step record every this many steps.
    pub log_every: u64,
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON RunConfig; its fields override the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_parser = parse_kind, default_value = "rp6jr")]
    pub kind: ReprKind,
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, default_value_t = 100)]
    pub timesteps: usize,
    #[arg(long, value_enum, default_value = "cosine")]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = 10_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_pos: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_vel: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_fc: f64,
    /// Train on the v loss alone.
    #[arg(long)]
    pub no_geometric: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: u64,
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
    /// Continue from a checkpoint written by an earlier run with the same config.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

impl TrainArgs {
    /// RunConfig from the flags, with any fields present in `--config`
    /// taking precedence.
    pub fn run_config(&self) -> Result<RunConfig> {
        let flags = self.flag_config();
        let Some(path) = &self.config else {
            return Ok(flags);
        };
        let mut merged = serde_json::to_value(&flags)?;
        overlay(&mut merged, serde_json::from_slice(&fs::read(path)?)?);
        Ok(serde_json::from_value(merged)?)
    }

    fn flag_config(&self) -> RunConfig {
        RunConfig {
            kind: self.kind,
            skeleton: self.skeleton.clone(),
            data: self.data.clone(),
            model: ModelShape::from_preset(self.preset),
            timesteps: self.timesteps,
            schedule: match self.schedule {
                ScheduleArg::Cosine => ScheduleKind::Cosine,
                ScheduleArg::Linear => ScheduleKind::Linear,
            },
            loss: LossConfig {
                lambda_pos: self.lambda_pos,
                lambda_vel: self.lambda_vel,
                lambda_fc: self.lambda_fc,
                geometric_enabled: !self.no_geometric,
            },
            contact: ContactThresholds::default(),
            train: TrainConfig {
                batch_size: self.batch_size,
                optimizer: AdamConfig {
                    lr: self.lr,
                    weight_decay: self.weight_decay,
                    ..Default::default()
                },
            },
            steps: self.steps,
            seed: self.seed,
            precision: self.precision,
            checkpoint_every: self.checkpoint_every,
            log_every: self.log_every.max(1),
            out: self.out.clone(),
        }
    }
}

fn overlay(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "samples")]
    pub out: PathBuf,
    /// Apply temporal smoothing (default).
    #[arg(long, overrides_with = "no_smooth")]
    pub smooth: bool,
    #[arg(long)]
    pub no_smooth: bool,
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 4.0)]
    pub truncate: f64,
    #[arg(long, value_enum, default_value = "posterior")]
    variance: VarianceArg,
    /// Samples per denoiser call.
    #[arg(long, default_value_t = 64)]
    pub chunk: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, num_args = 1..)]
    pub real: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub generated: Vec<PathBuf>,
    /// Needed to decode rotation feature files.
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
    #[arg(long, default_value = "flatten")]
    pub extractor: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ReprKind>,
    /// Decode a feature file back to a clip file.
    #[arg(long)]
    pub inverse: bool,
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 4.0)]
    pub truncate: f64,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "gait")]
    generator: GeneratorArg,
    #[arg(long, default_value_t = 4)]
    pub joints: usize,
    #[arg(long, default_value_t = 32)]
    pub frames: usize,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 512)]
    pub clips: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorArg {
    Gait,
    FigureEight,
}

fn emit(v: serde_json::Value) {
    println!("{v}");
}

/// Clip (`.clip`) or feature (`.feat`) files named by `paths`, expanding
/// directories in sorted order.
pub fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.retain(|e| matches!(e.extension().and_then(|s| s.to_str()), Some("clip" | "feat")));
            // a sample directory holds both forms of each clip; count it once
            let feats: std::collections::HashSet<PathBuf> =
                entries.iter().filter(|e| is_feature_file(e)).map(|e| e.with_extension("")).collect();
            entries.retain(|e| is_feature_file(e) || !feats.contains(&e.with_extension("")));
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no input files"));
    }
    Ok(out)
}

fn is_feature_file(p: &Path) -> bool {
    p.extension().and_then(|s| s.to_str()) == Some("feat")
}

pub fn cmd_gen_synth(a: &GenSynthArgs) -> Result<()> {
    let spec = SyntheticMotionSpec {
        generator: match a.generator {
            GeneratorArg::Gait => GeneratorKind::SinusoidalGait,
            GeneratorArg::FigureEight => GeneratorKind::FigureEight,
        },
        joints: a.joints,
        frames: a.frames,
        fps: a.fps,
        clips: a.clips,
        seed: a.seed,
        ..Default::default()
    };
    let skel = spec.skeleton()?;
    let clips = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out)?;
    write_skeleton(a.out.join("skeleton.json"), &skel)?;
    for (i, c) in clips.into_iter().enumerate() {
        ClipFile::new(skel.clone(), c)?.write(a.out.join(format!("clip_{i:05}.clip")))?;
    }
    emit(json!({"event": "gen-synth", "spec": spec, "out": a.out}));
    Ok(())
}

fn load_training_clips(cfg: &RunConfig) -> Result<(Skeleton, Vec<FeatureMatrix>)> {
    let files = collect_files(&cfg.data)?;
    let mut skel = cfg.skeleton.as_ref().map(read_skeleton).transpose()?;
    let mut feats = Vec::with_capacity(files.len());
    for f in &files {
        let cf = ClipFile::read(f)?;
        let s = skel.get_or_insert_with(|| cf.skeleton.clone());
        feats.push(encode(&cf.clip, cfg.kind, s)?);
    }
    Ok((skel.expect("at least one file"), feats))
}

pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<()> {
    match cfg.precision {
        Precision::F32 => train_in::<f32>(cfg, resume),
        Precision::F64 => train_in::<f64>(cfg, resume),
    }
}

fn train_in<F: Real>(cfg: &RunConfig, resume: Option<&Path>) -> Result<()> {
    let (skel, feats) = load_training_clips(cfg)?;
    let frames = feats[0].frames;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("run.json"), serde_json::to_vec_pretty(cfg)?)?;
    let run_json = serde_json::to_value(cfg)?;
    let mut trainer: Trainer<F> = match resume {
        Some(path) => {
            let ck = Checkpoint::read(path)?;
            let data = TrainingSet::with_normalizer(feats, skel, ck.normalizer.clone(), cfg.contact)?;
            ck.into_trainer(data)?
        }
        None => {
            let data = TrainingSet::new(feats, skel, cfg.contact)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let model = Denoiser::new(cfg.model.config(data.feature_dim(), frames), &mut rng)?;
            let schedule = DiffusionSchedule::new(cfg.schedule, cfg.timesteps)?;
            Trainer::new(model, schedule, cfg.loss, cfg.train, data, rng)?
        }
    };
    log::info!(
        "training {} parameters on {} clips ({}, D={}, N={frames}) from step {}",
        trainer.model.param_count(),
        trainer.data.len(),
        cfg.kind,
        trainer.data.feature_dim(),
        trainer.step
    );
    let ckpt_path = cfg.out.join("checkpoint.ckpt");
    while trainer.step < cfg.steps {
        let r = trainer.step()?;
        if r.step % cfg.log_every.max(1) == 0 || r.step == cfg.steps {
            emit(json!({"event": "step", "step": r.step, "loss": r.loss, "grad_norm": r.grad_norm, "seconds": r.seconds}));
        }
        if cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0 {
            let p = cfg.out.join(format!("checkpoint_{:08}.ckpt", r.step));
            Checkpoint::from_trainer(&trainer, cfg.seed, run_json.clone()).write(&p)?;
            emit(json!({"event": "checkpoint", "step": r.step, "path": p}));
        }
    }
    Checkpoint::from_trainer(&trainer, cfg.seed, run_json).write(&ckpt_path)?;
    emit(json!({"event": "checkpoint", "step": trainer.step, "path": ckpt_path}));
    Ok(())
}

pub fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let ck = Checkpoint::read(&a.checkpoint)?;
    let model = ck.model::<f64>()?;
    let (kind, skel) = (ck.kind, &ck.skeleton);
    let (d, frames) = (ck.meta.denoiser.feature_dim, ck.meta.frames);
    if ck.normalizer.dim() != d || kind.feature_dim(skel.joint_count()) != d {
        return Err(Error::Format("checkpoint sections disagree on feature layout".into()));
    }
    let variance = match a.variance {
        VarianceArg::Posterior => ReverseVariance::Posterior,
        VarianceArg::Beta => ReverseVariance::Beta,
        VarianceArg::None => ReverseVariance::None,
    };
    let smooth = !a.no_smooth;
    let smoother = SmootherConfig { sigma: a.sigma, truncate: a.truncate, ..Default::default() };
    if smooth {
        smoother.validate()?;
    }
    fs::create_dir_all(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut written = 0;
    while written < a.count {
        let n = a.chunk.max(1).min(a.count - written);
        for x in sample(&model, &ck.schedule, d, frames, n, variance, &mut rng)? {
            let fm = ck.normalizer.denormalize(&FeatureMatrix::new(kind, skel.joint_count(), frames, ck.meta.fps, x)?);
            let fm = if smooth { smooth_motion(&fm, &smoother)? } else { fm };
            write_features(a.out.join(format!("sample_{written:05}.feat")), &fm)?;
            if let Some(clip) = decode(&fm, skel)?.clip {
                ClipFile::new(skel.clone(), clip)?.write(a.out.join(format!("sample_{written:05}.clip")))?;
            }
            written += 1;
        }
        log::info!("sampled {written}/{}", a.count);
    }
    emit(json!({"event": "sample", "count": written, "kind": kind, "smoothed": smooth, "seed": a.seed, "out": a.out}));
    Ok(())
}

/// Joint positions of every clip or feature file. Feature files in a
/// rotation kind need `skeleton`.
pub fn load_positions(files: &[PathBuf], skeleton: Option<&Skeleton>) -> Result<(f64, Vec<Vec<Vec<Vec3>>>)> {
    let mut fps = None;
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let (rate, pos) = if is_feature_file(f) {
            let fm = read_features(f)?;
            let pos = match (fm.kind, skeleton) {
                (ReprKind::Jp, _) => decode_positions(&fm, &Skeleton::chain(fm.joints, 1.0)?)?,
                (_, Some(s)) => decode_positions(&fm, s)?,
                (k, None) => return Err(Error::invalid(format!("{}: {k} features need --skeleton", f.display()))),
            };
            (fm.fps, pos)
        } else {
            let cf = ClipFile::read(f)?;
            (cf.clip.fps, cf.clip.joint_positions(skeleton.unwrap_or(&cf.skeleton))?)
        };
        fps.get_or_insert(rate);
        out.push(pos);
    }
    Ok((fps.unwrap_or(30.0), out))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    if a.extractor != "flatten" {
        return Err(Error::invalid(format!("unknown extractor '{}'", a.extractor)));
    }
    let skel = a.skeleton.as_ref().map(read_skeleton).transpose()?;
    // clip files use their own skeleton; feature files share one
    let skel_gen = match &skel {
        Some(s) => Some(s.clone()),
        None => first_clip_skeleton(&collect_files(&a.real)?)?,
    };
    let (fps, real) = load_positions(&collect_files(&a.real)?, skel.as_ref())?;
    let (_, gen) = load_positions(&collect_files(&a.generated)?, skel_gen.as_ref())?;
    let shape = |s: &[Vec<Vec<Vec3>>]| (s[0].len(), s[0][0].len());
    if shape(&real) != shape(&gen) {
        return Err(Error::shape(format!(
            "real clips are (N, J) = {:?}, generated {:?}",
            shape(&real),
            shape(&gen)
        )));
    }
    let cfg = MetricConfig { k: a.k, diversity_pairs: a.pairs, alpha: a.alpha, seed: a.seed };
    let report = evaluate(&real, &gen, fps, &FlattenExtractor, cfg)?;
    emit(json!({"event": "eval", "report": report}));
    Ok(())
}

fn first_clip_skeleton(files: &[PathBuf]) -> Result<Option<Skeleton>> {
    match files.iter().find(|f| !is_feature_file(f)) {
        Some(f) => Ok(Some(ClipFile::read(f)?.skeleton)),
        None => Ok(None),
    }
}

pub fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    if a.inverse {
        let fm = read_features(&a.input)?;
        let skel = match &a.skeleton {
            Some(p) => read_skeleton(p)?,
            None if fm.joints == 24 => Skeleton::smpl24(),
            None => return Err(Error::invalid("--skeleton is required to decode this feature file")),
        };
        let clip = decode(&fm, &skel)?
            .clip
            .ok_or_else(|| Error::invalid("JP features carry no rotations and cannot become a clip file"))?;
        ClipFile::new(skel, clip)?.write(&a.out)?;
        emit(json!({"event": "convert", "from": fm.kind, "to": "clip", "out": a.out}));
    } else {
        let kind = a.kind.ok_or_else(|| Error::UnknownKind("(missing --kind)".into()))?;
        let cf = ClipFile::read(&a.input)?;
        let skel = a.skeleton.as_ref().map(read_skeleton).transpose()?.unwrap_or(cf.skeleton);
        let fm = encode(&cf.clip, kind, &skel)?;
        write_features(&a.out, &fm)?;
        emit(json!({"event": "convert", "kind": kind, "dim": fm.dim(), "frames": fm.frames, "out": a.out}));
    }
    Ok(())
}

pub fn cmd_smooth(a: &SmoothArgs) -> Result<()> {
    let cfg = SmootherConfig { sigma: a.sigma, truncate: a.truncate, ..Default::default() };
    cfg.validate()?;
    if is_feature_file(&a.input) {
        let fm = smooth_motion(&read_features(&a.input)?, &cfg)?;
        write_features(&a.out, &fm)?;
    } else {
        let cf = ClipFile::read(&a.input)?;
        let fm = smooth_motion(&encode(&cf.clip, ReprKind::Rpqjr, &cf.skeleton)?, &cfg)?;
        let clip: MotionClip = decode(&fm, &cf.skeleton)?.clip.expect("rotation kind");
        ClipFile::new(cf.skeleton, clip)?.write(&a.out)?;
    }
    emit(json!({"event": "smooth", "sigma": a.sigma, "truncate": a.truncate, "out": a.out}));
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a.run_config()?, a.resume.as_deref()),
        Command::Sample(a) => cmd_sample(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Convert(a) => cmd_convert(&a),
        Command::Smooth(a) => cmd_smooth(&a),
        Command::GenSynth(a) => cmd_gen_synth(&a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
