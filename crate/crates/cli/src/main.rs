//! `aams` — attention-guided multi-stroke style transfer from the command
//! line. Exit codes: 0 success, 2 bad configuration or usage, 3 input/format
//! problems, 4 numerical failure. `AAMS_THREADS` caps worker threads.

mod imgio;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aams_core::pipeline::{
    self, LossRecord, RenderReport, StylizeConfig, SweepResult,
};
use aams_core::weights::WeightBundle;
use aams_core::{set_thread_cap, thread_cap_from_env, Error};

#[derive(Parser)]
#[command(
    name = "aams",
    version,
    about = "Attention-guided multi-stroke neural style transfer",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a content image in the texture of a style image
    Stylize(StylizeArgs),
    /// Round-trip an image through the attention autoencoder and report losses
    Reconstruct(ReconstructArgs),
    /// Write an image's normalized self-attention map as grayscale PNG
    AttentionMap(AttentionMapArgs),
    /// Render a gamma x strokes x sigma grid into a montage and a timing CSV
    Sweep(SweepArgs),
    /// Generate a reproducible randomly initialized weight bundle
    GenWeights(GenWeightsArgs),
}

#[derive(Args)]
struct StylizeArgs {
    /// Content image (PNG)
    #[arg(long)]
    content: PathBuf,
    /// Style image (PNG)
    #[arg(long)]
    style: PathBuf,
    /// Weight bundle file
    #[arg(long)]
    weights: PathBuf,
    /// Output image (written as PNG)
    #[arg(long)]
    out: PathBuf,
    /// Number of swapped strokes K (K+1 strokes total)
    #[arg(long, default_value_t = 2)]
    strokes: usize,
    /// Comma-separated style scale per swapped stroke; default spreads over [0.5, 1]
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f32>>,
    /// Stroke-weight softmax sharpness; 0 = uniform blend, higher = harder edges
    #[arg(long, default_value_t = 50.0)]
    gamma: f32,
    /// Gaussian sigma smoothing the attention map
    #[arg(long, default_value_t = 1.0)]
    sigma: f32,
    /// Patch side length for style matching (odd)
    #[arg(long, default_value_t = 3)]
    patch: usize,
    /// Shrink inputs so the longer side fits this many pixels
    #[arg(long, default_value_t = 512)]
    max_side: usize,
    /// Also write the attention map to this path (8-bit grayscale PNG)
    #[arg(long)]
    emit_attention: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Input image (PNG)
    #[arg(long)]
    input: PathBuf,
    /// Weight bundle file
    #[arg(long)]
    weights: PathBuf,
    /// Output image (written as PNG)
    #[arg(long)]
    out: PathBuf,
    /// Also write the loss breakdown to this CSV path
    #[arg(long)]
    losses: Option<PathBuf>,
    /// Shrink the input so the longer side fits this many pixels
    #[arg(long, default_value_t = 512)]
    max_side: usize,
}

#[derive(Args)]
struct AttentionMapArgs {
    /// Input image (PNG)
    #[arg(long)]
    input: PathBuf,
    /// Weight bundle file
    #[arg(long)]
    weights: PathBuf,
    /// Output map (8-bit grayscale PNG)
    #[arg(long)]
    out: PathBuf,
    /// Gaussian sigma smoothing the attention map
    #[arg(long, default_value_t = 1.0)]
    sigma: f32,
    /// Shrink the input so the longer side fits this many pixels
    #[arg(long, default_value_t = 512)]
    max_side: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Content image (PNG)
    #[arg(long)]
    content: PathBuf,
    /// Style image (PNG)
    #[arg(long)]
    style: PathBuf,
    /// Weight bundle file
    #[arg(long)]
    weights: PathBuf,
    /// Comma-separated gamma values (montage rows)
    #[arg(long, value_delimiter = ',', required = true)]
    gammas: Vec<f32>,
    /// Comma-separated swapped-stroke counts (montage columns)
    #[arg(long, value_delimiter = ',', required = true)]
    strokes_list: Vec<usize>,
    /// Comma-separated attention-filter sigmas (columns within each stroke count)
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    sigmas: Vec<f32>,
    /// Directory receiving montage.png and timings.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Patch side length for style matching (odd)
    #[arg(long, default_value_t = 3)]
    patch: usize,
    /// Shrink inputs so the longer side fits this many pixels
    #[arg(long, default_value_t = 512)]
    max_side: usize,
}

#[derive(Args)]
struct GenWeightsArgs {
    /// Destination bundle file
    #[arg(long)]
    out: PathBuf,
    /// Seed for the weight generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    if let Some(n) = thread_cap_from_env() {
        set_thread_cap(n);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stylize(a) => stylize_cmd(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::AttentionMap(a) => attention_map_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::GenWeights(a) => gen_weights_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_bundle(path: &Path) -> Result<WeightBundle, Error> {
    let bytes =
        fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    WeightBundle::load(&bytes)
}

fn write_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {err}", path.display()))
}

fn report_line(report: &RenderReport) -> String {
    format!(
        "{}x{} in {:.2}s (encode {:.2}, attention {:.2}, whiten {:.2}, swap {:.2}, \
         fusion {:.2}, color {:.2}, decode {:.2})",
        report.width,
        report.height,
        report.total_s,
        report.encode_s,
        report.attention_s,
        report.whiten_s,
        report.swap_s,
        report.fusion_s,
        report.color_s,
        report.decode_s,
    )
}

fn stylize_cmd(a: StylizeArgs) -> Result<(), Error> {
    let content = imgio::read_rgb(&a.content)?;
    let style = imgio::read_rgb(&a.style)?;
    let bundle = load_bundle(&a.weights)?;
    let cfg = StylizeConfig {
        strokes: a.strokes,
        betas: a.betas.unwrap_or_else(|| pipeline::default_betas(a.strokes)),
        gamma: a.gamma,
        sigma: a.sigma,
        patch: a.patch,
        max_side: a.max_side,
    };
    let (image, report, map) = pipeline::stylize(&content, &style, &bundle, &cfg)?;
    imgio::write_rgb(&a.out, &image)?;
    if let Some(path) = &a.emit_attention {
        imgio::write_gray(path, map.values(), map.height(), map.width())?;
    }
    if report.fallback_single_stroke {
        eprintln!(
            "warning: attention map has fewer than {} distinct values; \
             rendered single-stroke instead",
            a.strokes + 1
        );
    }
    println!("{}", report_line(&report));
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<(), Error> {
    let input = imgio::read_rgb(&a.input)?;
    let bundle = load_bundle(&a.weights)?;
    let prepared = pipeline::prepare_image(&input, a.max_side)?;
    let (image, losses) = pipeline::reconstruct(&prepared, &bundle)?;
    imgio::write_rgb(&a.out, &image)?;
    if let Some(path) = &a.losses {
        let csv = format!("{}\n{}\n", LossRecord::CSV_HEADER, losses.csv_row());
        fs::write(path, csv).map_err(|e| write_error(path, e))?;
    }
    println!(
        "content {:.6} attention {:.6} tv {:.6} total {:.6}",
        losses.content, losses.attention, losses.tv, losses.total
    );
    Ok(())
}

fn attention_map_cmd(a: AttentionMapArgs) -> Result<(), Error> {
    let input = imgio::read_rgb(&a.input)?;
    let bundle = load_bundle(&a.weights)?;
    let prepared = pipeline::prepare_image(&input, a.max_side)?;
    let map = pipeline::compute_attention_map(&prepared, &bundle, a.sigma)?;
    imgio::write_gray(&a.out, map.values(), map.height(), map.width())
}

fn sweep_cmd(a: SweepArgs) -> Result<(), Error> {
    let content = imgio::read_rgb(&a.content)?;
    let style = imgio::read_rgb(&a.style)?;
    let bundle = load_bundle(&a.weights)?;
    let base = StylizeConfig {
        patch: a.patch,
        max_side: a.max_side,
        ..StylizeConfig::default()
    };
    let result: SweepResult = pipeline::sweep(
        &content,
        &style,
        &bundle,
        &base,
        &a.gammas,
        &a.strokes_list,
        &a.sigmas,
    )?;
    fs::create_dir_all(&a.out_dir).map_err(|e| write_error(&a.out_dir, e))?;
    let montage_path = a.out_dir.join("montage.png");
    imgio::write_rgb(&montage_path, &result.montage)?;
    let csv_path = a.out_dir.join("timings.csv");
    fs::write(&csv_path, pipeline::sweep_csv(&result.cells))
        .map_err(|e| write_error(&csv_path, e))?;
    for cell in &result.cells {
        println!(
            "gamma {} strokes {} sigma {}: {}",
            cell.gamma,
            cell.strokes,
            cell.sigma,
            report_line(&cell.report)
        );
    }
    println!(
        "{} cells -> {} and {}",
        result.cells.len(),
        montage_path.display(),
        csv_path.display()
    );
    Ok(())
}

fn gen_weights_cmd(a: GenWeightsArgs) -> Result<(), Error> {
    let bundle = WeightBundle::random(a.seed);
    fs::write(&a.out, bundle.save()).map_err(|e| write_error(&a.out, e))?;
    println!("wrote {} ({} records)", a.out.display(), bundle.entries().len());
    Ok(())
}
