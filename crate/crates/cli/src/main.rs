//! `wsr` — train, run, and inspect the wavelet-domain super-resolution model.
//!
//! Subcommands:
//! - `train`: the alternating generator/discriminator loop with checkpoints
//!   and a CSV loss log.
//! - `sr`:    ×4 super-resolution of a single image with a trained model.
//! - `eval`:  the full metric suite over paired SR/HR directories.
//! - `wpt`:   wavelet-packet sub-band visualization (and inverse check).
//!
//! Exit codes: 0 on success, 1 for operational failures (missing files,
//! bad image extents, ...), 2 for usage and configuration errors. Every
//! subcommand is deterministic given its inputs and seeds; output payloads
//! never contain timestamps.

use clap::{Args, Parser, Subcommand};
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use wsr_core::data::{load_image, save_image, Dataset, ImageBuffer};
use wsr_core::metrics::{self, ColorMode, EvalConfig};
use wsr_core::trainer::{load_generator, StepStats, TrainConfig, Trainer};
use wsr_core::wavelet;
use wsr_core::{Error, Result, Tensor};

#[derive(Parser)]
#[command(
    name = "wsr",
    version,
    about = "Wavelet-domain single-image super-resolution (x4)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model: alternating discriminator/generator updates.
    Train(TrainArgs),
    /// Super-resolve one image by x4 with a trained model.
    Sr(SrArgs),
    /// Compute PSNR/SSIM/FSIM/UIQ/LBP for paired SR/HR directories.
    Eval(EvalArgs),
    /// Render the 16 wavelet-packet sub-bands of an image as a 4x4 grid.
    Wpt(WptArgs),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct TrainArgs {
    /// Config file: one `key = value` per line, `#` comments.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dataset directory of .png/.ppm images (config key `dataset`).
    #[arg(long, value_name = "DIR")]
    data: Option<String>,
    /// Output directory for checkpoints and logs (config key `out_dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Iteration budget (config key `iterations`).
    #[arg(long, value_name = "N")]
    iters: Option<String>,
    /// Epoch budget, used when iterations = 0 (config key `epochs`).
    #[arg(long, value_name = "N")]
    epochs: Option<String>,
    /// RNG seed (config key `seed`).
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    /// Learning rate (config key `learning_rate`).
    #[arg(long, value_name = "F")]
    lr: Option<String>,
    /// Batch size (config key `batch_size`).
    #[arg(long, value_name = "N")]
    batch: Option<String>,
    /// HR crop size, a multiple of 4 (config key `crop_size`).
    #[arg(long, value_name = "N")]
    crop: Option<String>,
    /// Set any config key directly, e.g. `--set features=64` (repeatable).
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Resume from a checkpoint written by an earlier run with this config.
    #[arg(long, value_name = "CKPT")]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SrArgs {
    /// Trained model checkpoint (.wsr).
    #[arg(long, value_name = "CKPT")]
    model: PathBuf,
    /// Input image (.png/.ppm), at least 16x16.
    #[arg(long = "in", value_name = "IMAGE")]
    input: PathBuf,
    /// Output image path; extents are exactly 4x the input's.
    #[arg(long, value_name = "IMAGE")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of super-resolved images.
    #[arg(long, value_name = "DIR")]
    sr: PathBuf,
    /// Directory of ground-truth images, matched to `--sr` by filename.
    #[arg(long, value_name = "DIR")]
    hr: PathBuf,
    /// Color handling: `y` (luma with border crop) or `rgb` (channel mean).
    #[arg(long, default_value = "y", value_name = "MODE")]
    mode: String,
    /// Also write the report as CSV to this path.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct WptArgs {
    /// Input image; both extents must be divisible by 4.
    #[arg(long = "in", value_name = "IMAGE")]
    input: PathBuf,
    /// Output path for the 4x4 tiled sub-band image (same extents as input).
    #[arg(long, value_name = "IMAGE")]
    out: PathBuf,
    /// Reconstruct via the inverse transform into this directory and report
    /// the maximum reconstruction error.
    #[arg(long, value_name = "DIR")]
    inverse: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Clap itself exits 2 on usage errors and 0 on --help/--version.
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => run_train(args),
        Command::Sr(args) => run_sr(args),
        Command::Eval(args) => run_eval(args),
        Command::Wpt(args) => run_wpt(args),
        Command::Version => {
            println!("wsr {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

/// Resolves the training configuration: defaults, then the config file, then
/// `--set` pairs in order, then the dedicated flags.
fn resolve_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    for pair in &args.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        config.apply(key.trim(), value.trim())?;
    }
    let direct: [(&str, &Option<String>); 8] = [
        ("dataset", &args.data),
        ("out_dir", &args.out),
        ("iterations", &args.iters),
        ("epochs", &args.epochs),
        ("seed", &args.seed),
        ("learning_rate", &args.lr),
        ("batch_size", &args.batch),
        ("crop_size", &args.crop),
    ];
    for (key, value) in direct {
        if let Some(v) = value {
            config.apply(key, v)?;
        }
    }
    config.validate()?;
    if config.dataset.as_os_str().is_empty() {
        return Err(Error::config(
            "no dataset directory given (use --data or the `dataset` config key)",
        ));
    }
    Ok(config)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let config = resolve_config(&args)?;
    let dataset = Dataset::load_dir(&config.dataset)?;
    let out_dir = config.out_dir.clone();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::file(&out_dir, format!("cannot create output directory: {e}")))?;
    // Echo the resolved configuration so the run can be reproduced.
    config.to_file(&out_dir.join("config.txt"))?;

    let mut trainer = match &args.resume {
        Some(ckpt) => Trainer::resume(config, dataset, ckpt)?,
        None => Trainer::new(config, dataset)?,
    };

    let loss_path = out_dir.join("loss.csv");
    let file = std::fs::File::create(&loss_path)
        .map_err(|e| Error::file(&loss_path, format!("cannot create loss log: {e}")))?;
    let mut log = std::io::BufWriter::new(file);
    let log_line = |log: &mut std::io::BufWriter<std::fs::File>, line: &str| {
        writeln!(log, "{line}").map_err(|e| Error::file(&loss_path, format!("write failed: {e}")))
    };
    log_line(&mut log, StepStats::csv_header())?;

    let target = trainer.target_iterations();
    let interval = trainer.config().checkpoint_interval;
    while trainer.iteration() < target {
        let stats = trainer.train_step()?;
        log_line(&mut log, &stats.csv_row())?;
        eprintln!(
            "iter {:>6}/{} l_d={:.6} l_c={:.6} l_a={:.6} l_w={:.6} l_total={:.6}",
            stats.iteration, target, stats.l_d, stats.l_content, stats.l_adv, stats.l_wavelet,
            stats.l_total
        );
        // The final iteration is covered by final.wsr below.
        if interval > 0 && stats.iteration % interval == 0 && stats.iteration < target {
            let name = format!("ckpt-{:06}.wsr", stats.iteration);
            trainer.save_checkpoint(&out_dir.join(name))?;
        }
    }
    log.flush()
        .map_err(|e| Error::file(&loss_path, format!("write failed: {e}")))?;
    let final_path = out_dir.join("final.wsr");
    trainer.save_checkpoint(&final_path)?;
    println!(
        "trained {} iterations; final checkpoint {}; loss log {}",
        trainer.iteration(),
        final_path.display(),
        loss_path.display()
    );
    Ok(())
}

fn run_sr(args: SrArgs) -> Result<()> {
    let (generator, _meta, _iteration) = load_generator(&args.model)?;
    let img = load_image(&args.input)?;
    let (w, h) = (img.width(), img.height());
    if h < 16 || w < 16 {
        return Err(Error::dimension(format!(
            "input image is {w}x{h}; the minimum supported size is 16x16"
        )));
    }
    let mut sr = generator.sr_reconstruct(&img.to_tensor())?;
    for v in sr.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    save_image(&args.out, &ImageBuffer::from_tensor(&sr, 0)?)?;
    println!(
        "{} ({}x{}) -> {} ({}x{})",
        args.input.display(),
        w,
        h,
        args.out.display(),
        4 * w,
        4 * h
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let config = EvalConfig {
        mode: ColorMode::parse(&args.mode)?,
        ..EvalConfig::default()
    };
    let report = metrics::evaluate_dataset(&args.sr, &args.hr, &config)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv())
            .map_err(|e| Error::file(path, format!("cannot write CSV: {e}")))?;
    }
    Ok(())
}

fn run_wpt(args: WptArgs) -> Result<()> {
    let img = load_image(&args.input)?;
    let t = img.to_tensor();

    // The luma plane drives the visualization; bands are laid out row-major
    // in packet order (tile r,c = band 4r+c), each min-max normalized
    // independently. A zero-range band renders mid-gray.
    let luma = metrics::luma(&t, 0)?;
    let mut lt = Tensor::zeros([1, 1, luma.h(), luma.w()]);
    luma.copy_into_channel(&mut lt, 0, 0);
    let sets = wavelet::wpt2(&lt)?;
    let bands = sets[0].bands();
    let (bh, bw) = (bands[0].h(), bands[0].w());

    let mut tiles = Tensor::zeros([1, 3, 4 * bh, 4 * bw]);
    for (b, band) in bands.iter().enumerate() {
        let (tr, tc) = (b / 4, b % 4);
        let (lo, hi) = band
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        for y in 0..bh {
            for x in 0..bw {
                let v = if range == 0.0 {
                    0.5
                } else {
                    (band.at(y, x) - lo) / range
                };
                for c in 0..3 {
                    *tiles.at_mut(0, c, tr * bh + y, tc * bw + x) = v;
                }
            }
        }
    }
    save_image(&args.out, &ImageBuffer::from_tensor(&tiles, 0)?)?;
    println!(
        "wrote {}: 4x4 grid of {}x{} sub-band tiles",
        args.out.display(),
        bw,
        bh
    );

    if let Some(dir) = &args.inverse {
        let coeffs = wavelet::wpt2_packed(&t)?;
        let recon = wavelet::iwpt2_packed(&coeffs)?;
        let max_err = t
            .data()
            .iter()
            .zip(recon.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::file(dir, format!("cannot create directory: {e}")))?;
        save_image(
            &dir.join("reconstructed.png"),
            &ImageBuffer::from_tensor(&recon, 0)?,
        )?;
        println!("max reconstruction error: {max_err:.3e}");
    }
    Ok(())
}
