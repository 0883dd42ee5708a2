use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hfr_core::aligner::{
    aligner_from_archive, aligner_to_archive, base_from_archive, base_to_archive,
    init_from_single_frame, video_forward, Pooling, SingleFrameAlignerParams, VisualTokens,
};
use hfr_core::analysis::{cosine_report, cost_model, token_budget, CostConfig, LlmProxy};
use hfr_core::decoding::{decode_repeat, decode_trimmed, trim_aligner, DecodeConfig, DecodeMethod};
use hfr_core::features::{
    encode_video, generate_rotating_dot, read_features, sample_frame_indices, write_features,
    Direction, EncoderStub, FrameFeatures, DEFAULT_ENCODER_SEED, DEFAULT_FRAME_CAP,
};
use hfr_core::numerics::io::NamedArchive;
use hfr_core::numerics::Tensor;
use hfr_core::trainer::{
    evaluate, make_motion_dataset, train, ModelConfig, ToyModel, TrainConfig, DEFAULT_SIDE,
};
use hfr_core::verify;

/// High-frame-rate visual-token aligner toolkit.
#[derive(Parser, Debug)]
#[command(name = "hfr", version, about)]
struct Cli {
    /// Worker threads for window-parallel passes.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a rotating-dot clip and write its per-frame features.
    Gen(GenArgs),
    /// Build a window aligner from a single-frame aligner.
    Init(InitArgs),
    /// Run the window aligner over a feature file at its native rate.
    Forward(ForwardArgs),
    /// Decode a feature file at a lower frame rate.
    Decode(DecodeArgs),
    /// Train the toy direction classifier and report test accuracy.
    Train(TrainArgs),
    /// Evaluate a trained classifier checkpoint.
    Eval(EvalArgs),
    /// Reports: feature cosine similarity, token budget, compute cost.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Check that an aligner archive averages per-frame outputs.
    VerifyAvg(VerifyAvgArgs),
    /// Compare every backward pass with finite differences.
    VerifyGrad(VerifyGradArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirArg {
    Ccw,
    Cw,
}

impl From<DirArg> for Direction {
    fn from(d: DirArg) -> Self {
        match d {
            DirArg::Ccw => Direction::Ccw,
            DirArg::Cw => Direction::Cw,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoolingArg {
    Post,
    Pre,
}

impl From<PoolingArg> for Pooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::Post => Pooling::Post,
            PoolingArg::Pre => Pooling::Pre,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Repeat,
    Trim,
}

impl From<MethodArg> for DecodeMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Repeat => DecodeMethod::Repeat,
            MethodArg::Trim => DecodeMethod::Trim,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    /// Stub encoder at the desk-scale dimensions.
    Desk,
    /// SigLIP-sized encoder, 729 patches, width-3584 language model.
    SevenB,
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite value >= 0"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite value > 0"))
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Args, Debug)]
struct EncoderArgs {
    /// Frame side in pixels.
    #[arg(long, default_value_t = DEFAULT_SIDE, value_parser = at_least_one)]
    side: usize,
    /// Patches per frame side (p = patch_grid²).
    #[arg(long, default_value_t = 4, value_parser = at_least_one)]
    patch_grid: usize,
    /// Feature dimension d.
    #[arg(long, default_value_t = 24, value_parser = at_least_one)]
    d: usize,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GenArgs {
    /// Seed for the starting phase.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rotation speed in revolutions per second.
    #[arg(long, default_value_t = 0.75, value_parser = non_negative)]
    rps: f64,
    /// Rotation direction.
    #[arg(long, value_enum, default_value_t = DirArg::Ccw)]
    dir: DirArg,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    dur: f64,
    /// Sampling rate of the written features.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    fps: u32,
    /// Render rate; must be at least 16 and at least --fps.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(16..))]
    native_fps: u32,
    #[command(flatten)]
    encoder: EncoderArgs,
    /// Output feature file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct InitArgs {
    /// Frames per window.
    #[arg(long, default_value_t = 16, value_parser = at_least_one)]
    w: usize,
    /// Off-diagonal noise scale.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    noise: f64,
    /// Single-frame aligner archive (base/W_A, base/b_A, base/W_B, base/b_B);
    /// drawn from --seed when absent.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Feature dimension when drawing a random base.
    #[arg(long, default_value_t = 24, value_parser = at_least_one)]
    d: usize,
    /// Hidden dimension when drawing a random base.
    #[arg(long, default_value_t = 32, value_parser = at_least_one)]
    h: usize,
    /// Patches per frame recorded with the weights.
    #[arg(long, default_value_t = 16, value_parser = at_least_one)]
    p: usize,
    /// Where the 2x2 max pool runs.
    #[arg(long, value_enum, default_value_t = PoolingArg::Post)]
    pooling: PoolingArg,
    /// Seed for the random base and the noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output weight archive (base and window aligner).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    /// Weight archive written by `init`.
    #[arg(long)]
    weights: PathBuf,
    /// Feature file written by `gen`.
    #[arg(long)]
    features: PathBuf,
    /// Output token archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Weight archive written by `init`.
    #[arg(long)]
    weights: PathBuf,
    /// Feature file sampled at --train-fps.
    #[arg(long)]
    features: PathBuf,
    /// Decoding method.
    #[arg(long, value_enum, default_value_t = MethodArg::Repeat)]
    method: MethodArg,
    /// Rate the features are resampled to; must divide --train-fps.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    test_fps: u32,
    /// Rate the aligner was trained at and the features are sampled at.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    train_fps: u32,
    /// Output token archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Training items.
    #[arg(long, default_value_t = 400)]
    n_train: usize,
    /// Test items.
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    dur: f64,
    /// Comma-separated rotation speeds in rev/s.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.75])]
    speeds: Vec<f64>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct TrainArgs {
    /// Sampling rate seen by the model (1 or 16).
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    fps: u32,
    /// Seed for data, initialization and shuffling.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    data: DataArgs,
    /// SGD learning rate.
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    lr: f64,
    /// Passes over the training split.
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Items per SGD step.
    #[arg(long, default_value_t = 8, value_parser = at_least_one)]
    batch: usize,
    /// Aligner hidden dimension.
    #[arg(long, default_value_t = 16, value_parser = at_least_one)]
    h: usize,
    /// Where the 2x2 max pool runs.
    #[arg(long, value_enum, default_value_t = PoolingArg::Post)]
    pooling: PoolingArg,
    /// Off-diagonal noise scale at initialization.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    noise: f64,
    /// Checkpoint archive for `eval`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint written by `train --out`.
    #[arg(long)]
    model: PathBuf,
    /// Sampling rate seen by the model (1 or 16).
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    fps: u32,
    /// Dataset seed; with the same data flags, reproduces the test split of `train`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct CsvArg {
    /// Emit comma-separated values instead of a table.
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Cosine similarity of each frame to a reference frame, before and after pooling.
    Cosine {
        /// Feature file.
        #[arg(long)]
        features: PathBuf,
        /// Position of the reference frame in the file.
        #[arg(long, default_value_t = 0)]
        reference: usize,
        #[command(flatten)]
        csv: CsvArg,
    },
    /// Windows, tokens per window and total visual tokens.
    Budget {
        /// Frames in the video.
        #[arg(long, value_parser = at_least_one)]
        frames: usize,
        /// Frames per window.
        #[arg(long, default_value_t = 16, value_parser = at_least_one)]
        w: usize,
        /// Patches per frame.
        #[arg(long, default_value_t = 729, value_parser = at_least_one)]
        p: usize,
        #[command(flatten)]
        csv: CsvArg,
    },
    /// Multiply-accumulate counts for encoder, aligner and language model.
    ///
    /// Presets: desk (stub encoder p=16, d=24, h=32, proxy width 32, alpha 2,
    /// beta 12) and seven-b (3.33e11 encoder MACs per frame, p=729, d=1152,
    /// h=3584, proxy width 3584, alpha 56, beta 508, i.e. 28 layers folded in).
    Cost(CostArgs),
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct CostArgs {
    /// Dimension preset; the flags below override it.
    #[arg(long, value_enum, default_value_t = PresetArg::SevenB)]
    preset: PresetArg,
    /// Decoding rate.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    fps: Option<u32>,
    /// Training rate.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    train_fps: Option<u32>,
    /// Video length in seconds.
    #[arg(long, value_parser = positive)]
    dur: Option<f64>,
    /// Decoding method below the training rate.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Frames per window.
    #[arg(long, value_parser = at_least_one)]
    w: Option<usize>,
    /// Patches per frame.
    #[arg(long, value_parser = at_least_one)]
    p: Option<usize>,
    /// Feature dimension.
    #[arg(long, value_parser = at_least_one)]
    d: Option<usize>,
    /// Aligner hidden dimension.
    #[arg(long, value_parser = at_least_one)]
    h: Option<usize>,
    /// Encoder MACs per frame.
    #[arg(long, value_parser = positive)]
    encoder_macs: Option<f64>,
    /// Generated tokens.
    #[arg(long)]
    output_tokens: Option<usize>,
    /// Language-model width.
    #[arg(long, value_parser = positive)]
    width: Option<f64>,
    /// Coefficient of T²·width.
    #[arg(long, value_parser = non_negative)]
    alpha: Option<f64>,
    /// Coefficient of T·width².
    #[arg(long, value_parser = non_negative)]
    beta: Option<f64>,
    #[command(flatten)]
    csv: CsvArg,
}

#[derive(Args, Debug)]
struct VerifyAvgArgs {
    /// Weight archive written by `init`.
    #[arg(long)]
    weights: PathBuf,
    /// Random windows to check.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    seeds: usize,
}

#[derive(Args, Debug)]
struct VerifyGradArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    seeds: usize,
}

/// A flag combination clap cannot reject on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(usize::from(cli.threads))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Init(a) => cmd_init(a),
        Command::Forward(a) => cmd_forward(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::VerifyAvg(a) => cmd_verify_avg(a),
        Command::VerifyGrad(a) => cmd_verify_grad(a),
    }
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<()> {
    if a.fps > a.native_fps {
        return Err(usage(format!(
            "--fps {} exceeds --native-fps {}",
            a.fps, a.native_fps
        )));
    }
    let video = generate_rotating_dot(
        a.seed,
        a.rps,
        a.dir.into(),
        a.dur,
        a.native_fps,
        a.encoder.side,
    )?;
    let enc = EncoderStub::<f32>::new(
        DEFAULT_ENCODER_SEED,
        a.encoder.side,
        a.encoder.patch_grid,
        a.encoder.d,
    )?;
    let feats = encode_video(&video, &enc, a.fps, DEFAULT_FRAME_CAP)?;
    write_features(&a.out, &feats).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} frames to {}", feats.len(), a.out.display());
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<NamedArchive> {
    NamedArchive::load(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_init(a: InitArgs) -> anyhow::Result<()> {
    let base = match &a.base {
        Some(path) => base_from_archive(&load(path)?)?,
        None => SingleFrameAlignerParams::random(a.seed, a.d, a.h),
    };
    let params =
        init_from_single_frame(&base, a.w, a.noise, a.seed)?.with_pooling(a.pooling.into());
    let mut archive = base_to_archive(&base);
    archive.merge(aligner_to_archive(&params, a.p)?);
    archive
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "wrote w={} d={} h={} p={} aligner to {}",
        a.w,
        base.feature_dim(),
        base.hidden_dim(),
        a.p,
        a.out.display()
    );
    Ok(())
}

fn load_features(path: &Path) -> anyhow::Result<Vec<FrameFeatures<f32>>> {
    read_features(path).with_context(|| format!("reading {}", path.display()))
}

fn write_tokens(path: &Path, tokens: &[VisualTokens<f32>]) -> anyhow::Result<()> {
    let mut archive = NamedArchive::new();
    for t in tokens {
        archive.insert(
            format!("window/{}/tokens", t.window_index),
            t.tokens.clone(),
        );
    }
    if let Some(first) = tokens.first() {
        let dims = first.tokens.dims();
        let meta = [tokens.len(), dims[0], dims[1]].map(|v| v as f32);
        archive.insert("tokens/meta", Tensor::new(vec![3], meta.to_vec())?);
    }
    archive
        .save(path)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} windows to {}", tokens.len(), path.display());
    Ok(())
}

fn cmd_forward(a: ForwardArgs) -> anyhow::Result<()> {
    let (params, _) = aligner_from_archive(&load(&a.weights)?)?;
    let feats = load_features(&a.features)?;
    write_tokens(&a.out, &video_forward(&feats, &params)?)
}

fn cmd_decode(a: DecodeArgs) -> anyhow::Result<()> {
    let cfg = DecodeConfig::new(a.train_fps, a.test_fps, a.method.into())
        .map_err(|e| usage(e.to_string()))?;
    let (params, _) = aligner_from_archive(&load(&a.weights)?)?;
    let s = cfg
        .frames_per_window(params.window)
        .map_err(|e| usage(e.to_string()))?;
    let feats = load_features(&a.features)?;
    let keep = sample_frame_indices(feats.len(), a.train_fps, a.test_fps, usize::MAX)?;
    let seq: Vec<_> = keep.into_iter().map(|i| feats[i].clone()).collect();
    let tokens = match cfg.method {
        DecodeMethod::Repeat => decode_repeat(&seq, &params, &cfg)?,
        DecodeMethod::Trim => decode_trimmed(&seq, &trim_aligner(&params, s)?)?,
    };
    write_tokens(&a.out, &tokens)
}

fn check_fps(fps: u32) -> anyhow::Result<()> {
    if fps == 1 || fps == 16 {
        Ok(())
    } else {
        Err(usage(format!("--fps must be 1 or 16, got {fps}")))
    }
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    check_fps(a.fps)?;
    let dataset = make_motion_dataset(
        a.seed,
        a.data.n_train,
        a.data.n_test,
        &a.data.speeds,
        a.data.dur,
        16,
    )?;
    let mut model = ToyModel::<f32>::build(&ModelConfig {
        h: a.h,
        noise_scale: a.noise,
        pooling: a.pooling.into(),
        seed: a.seed,
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch: a.batch,
        seed: a.seed,
        fps: a.fps,
    };
    let report = train(&mut model, &dataset, &cfg)?;
    print!("{report}");
    if let Some(out) = &a.out {
        model
            .to_archive()?
            .save(out)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    check_fps(a.fps)?;
    let model = ToyModel::<f32>::from_archive(&load(&a.model)?)?;
    let dataset = make_motion_dataset(
        a.seed,
        a.data.n_train,
        a.data.n_test,
        &a.data.speeds,
        a.data.dur,
        16,
    )?;
    println!(
        "test_accuracy {:.4}",
        evaluate(&model, &dataset.test, a.fps)?
    );
    Ok(())
}

fn emit(table: String, csv: String, as_csv: bool) {
    print!("{}", if as_csv { csv } else { table });
}

fn cmd_analyze(cmd: AnalyzeCommand) -> anyhow::Result<()> {
    match cmd {
        AnalyzeCommand::Cosine {
            features,
            reference,
            csv,
        } => {
            let feats = load_features(&features)?;
            if reference >= feats.len() {
                return Err(usage(format!(
                    "--reference {reference} out of range for {} frames",
                    feats.len()
                )));
            }
            let report = cosine_report(&feats, reference)?;
            emit(report.to_table(), report.to_csv(), csv.csv);
        }
        AnalyzeCommand::Budget { frames, w, p, csv } => {
            let b = token_budget(frames, w, p)?;
            emit(
                format!("{} {} {}\n", b.windows, b.tokens_per_window, b.total_tokens),
                format!(
                    "windows,tokens_per_window,total_tokens\n{},{},{}\n",
                    b.windows, b.tokens_per_window, b.total_tokens
                ),
                csv.csv,
            );
        }
        AnalyzeCommand::Cost(a) => {
            let mut cfg = match a.preset {
                PresetArg::Desk => CostConfig::desk(),
                PresetArg::SevenB => CostConfig::seven_b(),
            };
            cfg.test_fps = a.fps.unwrap_or(cfg.test_fps);
            cfg.train_fps = a.train_fps.unwrap_or(cfg.train_fps);
            cfg.duration_s = a.dur.unwrap_or(cfg.duration_s);
            cfg.method = a.method.map_or(cfg.method, Into::into);
            cfg.w = a.w.unwrap_or(cfg.w);
            cfg.p = a.p.unwrap_or(cfg.p);
            cfg.d = a.d.unwrap_or(cfg.d);
            cfg.h = a.h.unwrap_or(cfg.h);
            cfg.encoder_macs_per_frame = a.encoder_macs.or(cfg.encoder_macs_per_frame);
            cfg.output_tokens = a.output_tokens.unwrap_or(cfg.output_tokens);
            cfg.llm = LlmProxy {
                width: a.width.unwrap_or(cfg.llm.width),
                alpha: a.alpha.unwrap_or(cfg.llm.alpha),
                beta: a.beta.unwrap_or(cfg.llm.beta),
            };
            DecodeConfig::new(cfg.train_fps, cfg.test_fps, cfg.method)
                .and_then(|d| d.frames_per_window(cfg.w))
                .map_err(|e| usage(e.to_string()))?;
            let report = cost_model(&cfg)?;
            emit(report.to_table(), report.to_csv(), a.csv.csv);
        }
    }
    Ok(())
}

fn cmd_verify_avg(a: VerifyAvgArgs) -> anyhow::Result<()> {
    let archive = load(&a.weights)?;
    let base = base_from_archive(&archive)?;
    let (params, p) = aligner_from_archive(&archive)?;
    let report = verify::check_averaging(&base, &params, p, a.seeds)?;
    println!(
        "f32 max gap {:.3e} (tolerance {:.0e}), f64 max gap {:.3e} (tolerance {:.0e}) over {} windows",
        report.max_gap_f32,
        verify::AVG_TOLERANCE_F32,
        report.max_gap_f64,
        verify::AVG_TOLERANCE_F64,
        report.seeds
    );
    if !report.passed() {
        bail!("window aligner does not average per-frame outputs");
    }
    println!("PASS");
    Ok(())
}

fn cmd_verify_grad(a: VerifyGradArgs) -> anyhow::Result<()> {
    let checks = verify::gradient_checks(a.seeds)?;
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<28} worst relative error {:.3e} over {} seeds",
            c.name, c.worst, c.seeds
        );
        failed += usize::from(!c.passed());
    }
    if failed > 0 {
        bail!(
            "{failed} gradient checks exceeded {:.0e}",
            verify::GRAD_TOLERANCE
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
