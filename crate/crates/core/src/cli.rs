//! `nircolor` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{
    self, load_dataset, load_image, rgb_to_grayscale, save_png, synth_dataset, write_dataset,
    Dataset,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, write_preview};
use crate::nets::{Domain, InferencePath};
use crate::train::{
    self, read_header, Ablation, Checkpoint, ConfigOverrides, Preset, TrainConfig, TrainLog,
};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  2  bad command line
  3  file system error
  4  unreadable or invalid image
  5  invalid configuration or architecture
  6  dataset error
  7  corrupt or incompatible checkpoint
  8  training diverged (non-finite loss or gradient)
  9  shape or channel mismatch

Errors are printed as `error[<kind>]: <message>` on one line.";

#[derive(Debug, Parser)]
#[command(name = "nircolor", version, about = "NIR and grayscale colorization with bilateral domain translation", after_help = EXIT_CODES)]
pub struct Cli {
    /// Directory that relative paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset.
    SynthData(SynthArgs),
    /// Train models according to a configuration file and flags.
    Train(TrainArgs),
    /// Run an inference path over PNG images.
    Infer(InferArgs),
    /// Score an inference path on a dataset.
    Eval(EvalArgs),
    /// Print checkpoint metadata.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_paired: usize,
    #[arg(long, default_value_t = 200)]
    pub n_gray: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat TOML configuration; flags override its values.
    #[arg(long, env = "NIRCOLOR_CONFIG")]
    pub config: Option<PathBuf>,
    /// Dataset root.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints and the step log.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs_phase1: Option<usize>,
    #[arg(long)]
    pub epochs_phase2: Option<usize>,
    #[arg(long)]
    pub epochs_phase3: Option<usize>,
    #[arg(long)]
    pub lr_phase1: Option<f64>,
    #[arg(long)]
    pub lr_phase2: Option<f64>,
    #[arg(long)]
    pub lr_phase3: Option<f64>,
    /// Disable training augmentation.
    #[arg(long)]
    pub no_augment: bool,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

impl TrainArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            preset: self.preset,
            ablation: self.ablation,
            seed: self.seed,
            image_size: self.image_size,
            base_channels: self.base_channels,
            batch_size: self.batch_size,
            epochs_phase1: self.epochs_phase1,
            epochs_phase2: self.epochs_phase2,
            epochs_phase3: self.epochs_phase3,
            lr_phase1: self.lr_phase1,
            lr_phase2: self.lr_phase2,
            lr_phase3: self.lr_phase3,
            augment: self.no_augment.then_some(false),
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One of N2C, N2G, N2G2C, G2C, G2N, G2N2C.
    #[arg(long, value_parser = parse_path)]
    pub path: InferencePath,
    /// A PNG file or a directory of PNG files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_path)]
    pub path: InferencePath,
    /// Report file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional preview grid PNG (input | prediction | ground truth).
    #[arg(long)]
    pub preview: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub preview_rows: usize,
    /// Dataset name recorded in the report; defaults to the directory name.
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

fn parse_path(s: &str) -> std::result::Result<InferencePath, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    match s {
        "desk" => Ok(Preset::Desk),
        "full" => Ok(Preset::Full),
        _ => Err(format!("unknown preset {s:?} (desk or full)")),
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::InvalidImage(_) | Error::TooSmall(_) | Error::Image { .. } => 4,
        Error::InvalidConfig(_) | Error::InvalidSpec(_) => 5,
        Error::Dataset(_) => 6,
        Error::CheckpointVersion { .. } | Error::CorruptCheckpoint(_) => 7,
        Error::Diverged { .. } | Error::NonFinite(_) => 8,
        Error::ShapeMismatch { .. } | Error::ChannelMismatch { .. } => 9,
    }
}

fn resolve(workdir: &Path, p: &Path) -> PathBuf {
    workdir.join(p)
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let wd = &cli.workdir;
    match &cli.command {
        Command::SynthData(a) => synth(wd, a),
        Command::Train(a) => train_cmd(wd, a),
        Command::Infer(a) => infer(wd, a),
        Command::Eval(a) => eval_cmd(wd, a),
        Command::Inspect(a) => inspect(wd, a),
    }
}

fn synth(wd: &Path, a: &SynthArgs) -> Result<()> {
    let (paired, gray) = synth_dataset(
        &mut ChaCha8Rng::seed_from_u64(a.seed),
        a.n_paired,
        a.n_gray,
        a.size,
    )?;
    let out = resolve(wd, &a.out);
    write_dataset(&out, &Dataset::new(paired, gray))?;
    println!(
        "wrote {} paired and {} grayscale-only samples to {}",
        a.n_paired,
        a.n_gray,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RunMeta {
    started_unix: u64,
    finished_unix: u64,
    config_digest: String,
    checkpoints: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn train_cmd(wd: &Path, a: &TrainArgs) -> Result<()> {
    let started = unix_now();
    let config_path = a.config.as_ref().map(|p| resolve(wd, p));
    let cfg = TrainConfig::resolve(config_path.as_deref(), &a.overrides())?;
    let data = load_dataset(&resolve(wd, &a.data))?;
    let out = resolve(wd, &a.out);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let config_json = serde_json::to_string_pretty(&cfg).expect("config serializes");
    let config_out = out.join("config.json");
    std::fs::write(&config_out, config_json).map_err(|e| Error::io(&config_out, e))?;

    let mut log = TrainLog::to_file(&out.join("train_log.jsonl"))?;
    if !a.quiet {
        log = log.on_epoch(|e| {
            eprintln!(
                "{} epoch {:>3}: total {:.5} pair {:.5} blt {:.5} tran {:.5}",
                e.phase, e.epoch, e.mean.total, e.mean.pair, e.mean.blt, e.mean.tran
            )
        });
    }
    let checkpoints = train::train_full(&data, &cfg, &mut log)?;
    log.flush()?;
    let mut names = Vec::new();
    for ck in &checkpoints {
        let name = format!("{}.ckpt", ck.stage);
        ck.save(&out.join(&name))?;
        println!("{name}: {} steps, digest {}", ck.step, ck.bundle.digest());
        names.push(name);
    }
    let meta = RunMeta {
        started_unix: started,
        finished_unix: unix_now(),
        config_digest: cfg.digest(),
        checkpoints: names,
    };
    let meta_path = out.join("run_meta.json");
    std::fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("serializes"),
    )
    .map_err(|e| Error::io(&meta_path, e))
}

/// Input files of `infer`: one PNG or every PNG in a directory.
fn input_files(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    if input.is_dir() {
        let files: Vec<_> = data::layout::list_pngs(input)?
            .into_iter()
            .map(|(stem, p)| (format!("{stem}.png"), p))
            .collect();
        if files.is_empty() {
            return Err(Error::Dataset(format!(
                "no PNG files in {}",
                input.display()
            )));
        }
        Ok(files)
    } else {
        let name = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file", input.display())))?;
        Ok(vec![(name, input.to_path_buf())])
    }
}

fn infer(wd: &Path, a: &InferArgs) -> Result<()> {
    let ck = Checkpoint::load(&resolve(wd, &a.checkpoint))?;
    let out = resolve(wd, &a.out);
    let files = input_files(&resolve(wd, &a.input))?;
    for (name, path) in &files {
        let mut img = load_image(path)?;
        if img.channels() == 3 {
            if a.path.input() == Domain::Gray {
                img = rgb_to_grayscale(&img)?;
            } else {
                return Err(Error::ChannelMismatch {
                    expected: 1,
                    actual: 3,
                });
            }
        }
        let y = ck.bundle.run_path(a.path, img.tensor())?;
        let y = data::ImageTensor::from_tensor(y)?;
        save_png(&y, &out.join(name))?;
    }
    println!(
        "wrote {} {} output(s) to {}",
        files.len(),
        a.path,
        out.display()
    );
    Ok(())
}

fn eval_cmd(wd: &Path, a: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&resolve(wd, &a.checkpoint))?;
    let data_dir = resolve(wd, &a.data);
    let data = load_dataset(&data_dir)?;
    let tag = a.tag.clone().unwrap_or_else(|| {
        data_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let report = evaluate(&ck.bundle, &data, a.path, &tag)?;
    report.write(&resolve(wd, &a.out))?;
    if let Some(p) = &a.preview {
        write_preview(&ck.bundle, &data, a.path, a.preview_rows, &resolve(wd, p))?;
    }
    let agg = &report.aggregate;
    match agg.ae {
        Some(ae) => println!(
            "{} on {tag}: {} images, PSNR {:.3} dB, SSIM {:.4}, AE {:.3} deg, LPIPS absent",
            a.path,
            report.records.len(),
            agg.psnr,
            agg.ssim,
            ae
        ),
        None => println!(
            "{} on {tag}: {} images, PSNR {:.3} dB, SSIM {:.4}, LPIPS absent",
            a.path,
            report.records.len(),
            agg.psnr,
            agg.ssim
        ),
    }
    Ok(())
}

fn inspect(wd: &Path, a: &InspectArgs) -> Result<()> {
    let path = resolve(wd, &a.checkpoint);
    let header = read_header(&path)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&header).expect("header serializes")
    );
    Ok(())
}
