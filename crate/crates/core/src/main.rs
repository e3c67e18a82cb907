//! Command-line front end: corrupt, denoise, sweep, build datasets, train,
//! predict and evaluate.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 data or validation
//! error.

use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use lambda3d::bm3d::{denoise, Bm3dProfile, DEFAULT_LAMBDA_3D};
use lambda3d::cnn::{self, CnnModel, TrainConfig};
use lambda3d::dataset::{generate_dataset, DatasetManifest};
use lambda3d::harness::{evaluate, evaluation_csv, summarize, summary_table, LambdaSource};
use lambda3d::image::{add_awgn, load_image, save_image, NoiseSpec};
use lambda3d::report::format_sig;
use lambda3d::sweep::{emit_curve, sweep_lambdas, LambdaGrid};

#[derive(Parser, Debug)]
#[command(name = "lambda3d", version, about = "BM3D denoising with a CNN-predicted threshold multiplier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ProfileArgs {
    /// `key=value` lines overriding the default BM3D profile.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,
    /// Print the effective BM3D profile before running.
    #[arg(long)]
    print_profile: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Add seeded white Gaussian noise to a clean image.
    Corrupt {
        #[arg(long = "in", value_name = "PGM")]
        input: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Denoise with a fixed multiplier, a model prediction, or the default.
    Denoise {
        #[arg(long = "in", value_name = "PGM")]
        input: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, conflicts_with = "model")]
        lambda: Option<f64>,
        #[arg(long, value_name = "MODEL")]
        model: Option<PathBuf>,
        /// Use a model trained for a different sigma.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Sweep the multiplier grid and write the MSE curve.
    Sweep {
        #[arg(long, value_name = "PGM")]
        clean: PathBuf,
        #[arg(long, value_name = "PGM")]
        noisy: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Corrupt and label every clean image at every sigma.
    Dataset {
        #[arg(long, value_name = "DIR")]
        clean_dir: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Comma-separated noise levels.
        #[arg(long = "sigma", value_delimiter = ',', default_values_t = [15.0, 30.0, 50.0])]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Train one model on the manifest records at one sigma.
    Train {
        #[arg(long, value_name = "JSONL")]
        manifest: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_name = "MODEL")]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        /// Seeds both weight initialization and example shuffling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the model's multiplier for a noisy image.
    Predict {
        #[arg(long = "in", value_name = "PGM")]
        input: PathBuf,
        #[arg(long, value_name = "MODEL")]
        model: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Compare predicted and default multipliers on a manifest.
    Evaluate {
        #[arg(long, value_name = "JSONL")]
        manifest: PathBuf,
        #[arg(long, value_name = "MODEL", required_unless_present = "oracle", conflicts_with = "oracle")]
        model: Option<PathBuf>,
        /// Use the manifest's sweep labels instead of a model.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        /// Report mean prediction latency (informational).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Write one MSE curve per manifest record from the stored sweeps.
    Curves {
        #[arg(long, value_name = "JSONL")]
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

/// A failure with a message and a process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

const EXIT_IO: u8 = 2;
const EXIT_DATA: u8 = 3;

impl Failure {
    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

/// I/O failures anywhere in the source chain map to exit code 2, all other
/// library errors to 3.
impl<E: Error + 'static> From<E> for Failure {
    fn from(err: E) -> Self {
        let mut message = err.to_string();
        let mut code = EXIT_DATA;
        let mut cur: Option<&(dyn Error + 'static)> = Some(&err);
        while let Some(e) = cur {
            if e.is::<std::io::Error>() {
                code = EXIT_IO;
            }
            cur = e.source();
            if let Some(s) = cur {
                let text = s.to_string();
                if !message.contains(&text) {
                    let _ = write!(message, ": {text}");
                }
            }
        }
        Self { code, message }
    }
}

type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, err: std::io::Error) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {err}", path.display()) }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn load_profile(args: &ProfileArgs) -> Result<Bm3dProfile, Failure> {
    let profile = match &args.profile {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            Bm3dProfile::parse_overrides(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?
        }
        None => Bm3dProfile::default(),
    };
    if args.print_profile {
        print!("{profile}");
    }
    Ok(profile)
}

fn load_checked_model(path: &Path, sigma: Option<f64>, force: bool) -> Result<CnnModel, Failure> {
    let model = cnn::load_model(path)?;
    if let Some(sigma) = sigma {
        if (model.sigma - sigma).abs() > 1e-9 {
            let msg = format!("model {} was trained for sigma {} but sigma is {sigma}", path.display(), model.sigma);
            if !force {
                return Err(Failure::data(format!("{msg}; pass --force to use it anyway")));
            }
            eprintln!("warning: {msg}");
        }
    }
    Ok(model)
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Corrupt { input, out, sigma, seed } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Failure::data(format!("sigma must be finite and >= 0, got {sigma}")));
            }
            let clean = load_image(&input)?;
            save_image(&add_awgn(&clean, NoiseSpec::new(sigma, seed)), &out)?;
        }
        Command::Denoise { input, out, sigma, lambda, model, force, profile } => {
            let profile = load_profile(&profile)?;
            let noisy = load_image(&input)?;
            let lambda = match (lambda, model) {
                (Some(l), _) => l,
                (None, Some(path)) => load_checked_model(&path, Some(sigma), force)?.predict(&noisy)?,
                (None, None) => DEFAULT_LAMBDA_3D,
            };
            let result = denoise(&noisy, sigma, lambda, &profile)?;
            save_image(&result, &out)?;
            println!("lambda={lambda}");
        }
        Command::Sweep { clean, noisy, sigma, out, profile } => {
            let profile = load_profile(&profile)?;
            let clean = load_image(&clean)?;
            let noisy = load_image(&noisy)?;
            let sweep = sweep_lambdas(&clean, &noisy, sigma, &LambdaGrid::default(), &profile)?;
            emit_curve(&sweep, &out).map_err(|e| io_failure(&out, e))?;
            println!("lambda_star={} mse_star={}", sweep.lambda_star, format_sig(sweep.mse_star, 6));
        }
        Command::Dataset { clean_dir, out, sigmas, seed, profile } => {
            let profile = load_profile(&profile)?;
            if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(Failure::data(format!("sigma must be positive, got {s}")));
            }
            let outcome = generate_dataset(&clean_dir, &sigmas, &LambdaGrid::default(), seed, &out, &profile)?;
            for (path, sigma, err) in &outcome.failures {
                eprintln!("skipped {} at sigma {sigma}: {err}", path.display());
            }
            println!("{} records written to {}", outcome.manifest.records.len(), out.display());
            if outcome.manifest.records.is_empty() {
                return Err(Failure::data("no records could be generated"));
            }
        }
        Command::Train { manifest, sigma, out, epochs, learning_rate, seed } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let config =
                TrainConfig { epochs, learning_rate, shuffle_seed: seed, init_seed: seed, ..Default::default() };
            let outcome = cnn::train(&manifest, sigma, &config)?;
            cnn::save_model(&outcome.model, &out)?;
            let mut csv = String::from("epoch,loss\n");
            for (i, l) in outcome.loss_history.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", i + 1, format_sig(*l, 8));
            }
            let loss_path = out.parent().unwrap_or(Path::new("")).join("loss.csv");
            write_file(&loss_path, csv)?;
            if let Some(last) = outcome.loss_history.last() {
                println!("final_loss={}", format_sig(*last, 6));
            }
        }
        Command::Predict { input, model, sigma, force } => {
            let model = load_checked_model(&model, sigma, force)?;
            println!("lambda={}", model.predict(&load_image(&input)?)?);
        }
        Command::Evaluate { manifest, model, oracle, sigma, out, timing, force, profile } => {
            let profile = load_profile(&profile)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let model = match (&model, oracle) {
                (Some(path), false) => Some(load_checked_model(path, Some(sigma), force)?),
                _ => None,
            };
            let source = model.as_ref().map_or(LambdaSource::Oracle, LambdaSource::Model);
            let records = evaluate(&manifest, sigma, source, &profile)?;
            write_file(&out, evaluation_csv(&records))?;
            if let Some(summary) = summarize(&records) {
                print!("{}", summary_table(&summary));
            }
            if let (true, Some(model)) = (timing, &model) {
                let images = manifest
                    .at_sigma(sigma)
                    .map(|r| load_image(manifest.example(r).noisy_path))
                    .collect::<Result<Vec<_>, _>>()?;
                let start = Instant::now();
                for img in &images {
                    model.predict(img)?;
                }
                let ms = start.elapsed().as_secs_f64() * 1e3 / images.len() as f64;
                eprintln!("mean prediction time: {ms:.3} ms/image");
            }
        }
        Command::Curves { manifest, out } => {
            let manifest = DatasetManifest::load(&manifest)?;
            if manifest.records.is_empty() {
                return Err(Failure::data("manifest has no records"));
            }
            fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
            for rec in &manifest.records {
                let path = out.join(format!("{}_{}.csv", rec.image_id(), rec.sigma));
                emit_curve(&rec.sweep(), &path).map_err(|e| io_failure(&path, e))?;
            }
            println!("{} curves written to {}", manifest.records.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
