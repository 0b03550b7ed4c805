use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qcseg_core::geometry;
use qcseg_core::hbs::{
    hbs_pipeline, mean_hbs, reconstruct_shape, write_points, Contour, HbsOptions, HbsSignature,
    ReconstructOptions, DEFAULT_GRID, DEFAULT_SAMPLES, DEFAULT_SPECTRAL,
};
use qcseg_core::imaging::{
    add_gaussian_noise, load_image, render_overlay, synth_image, GrayImage, SynthKind,
};
use qcseg_core::metrics::{self, Mask};
use qcseg_core::segmentation::{log_csv, segment, SegParams};

/// Shape-prior image segmentation with quasi-conformal maps.
#[derive(Parser)]
#[command(name = "qcseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the normalised signature of a closed contour.
    Hbs(HbsArgs),
    /// Average signatures of equal grid size.
    Mean(MeanArgs),
    /// Recover the shape of a signature.
    Reconstruct(ReconstructArgs),
    /// Segment an image with a signature prior.
    Segment(SegmentArgs),
    /// Write a synthetic scene: image, truth mask and prior contour.
    Synth(SynthArgs),
    /// Compare a predicted mask with a reference mask.
    Metrics(MetricsArgs),
    /// Add seeded Gaussian noise to an image.
    Noise(NoiseArgs),
}

#[derive(Args)]
struct HbsArgs {
    /// Contour file with one "x y" point per line.
    contour: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SPECTRAL)]
    spectral: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeanArgs {
    #[arg(short, long)]
    out: PathBuf,
    #[arg(required = true)]
    signatures: Vec<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    signature: PathBuf,
    /// Output contour file.
    #[arg(long)]
    contour: PathBuf,
    /// Output PNG of the filled shape.
    #[arg(long)]
    png: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    size: usize,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    /// Prior signature; required unless --no-prior is given.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// JSON file with the segmentation weights.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Reference mask; the Dice score is printed when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Drop the shape prior (lambda = eta = 0).
    #[arg(long)]
    no_prior: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene name.
    kind: String,
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    pred: PathBuf,
    truth: PathBuf,
    /// Write the rows to a file instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    image: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    mean: f64,
    #[arg(long)]
    var: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Hbs(a) => cmd_hbs(a),
        Command::Mean(a) => cmd_mean(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Noise(a) => cmd_noise(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_hbs(a: HbsArgs) -> Result<()> {
    let contour = Contour::load(&a.contour).context("reading contour")?;
    let opts = HbsOptions {
        grid: a.grid,
        samples: a.samples,
        spectral: a.spectral,
    };
    let pipe = hbs_pipeline(&contour, &opts).context("signature pipeline")?;
    let residual = pipe
        .maps
        .conformality_residual(64)
        .context("conformality check")?;
    pipe.signature.save(&a.out).context("writing signature")?;
    println!("max_abs,{}", pipe.signature.max_abs());
    println!("conformality_residual,{residual}");
    if pipe.capped > 0 {
        eprintln!("warning: {} samples capped below magnitude 1", pipe.capped);
    }
    Ok(())
}

fn cmd_mean(a: MeanArgs) -> Result<()> {
    let sigs = a
        .signatures
        .iter()
        .map(|p| HbsSignature::load(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let (mean, capped) = mean_hbs(&sigs).context("averaging signatures")?;
    mean.save(&a.out).context("writing signature")?;
    println!("max_abs,{}", mean.max_abs());
    if capped > 0 {
        eprintln!("warning: {capped} samples capped below magnitude 1");
    }
    Ok(())
}

/// Fills the closed polygon scaled into a `size × size` frame with a margin.
fn render_shape(points: &[qcseg_core::C64], size: usize) -> Mask {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let s = 0.8 * size as f64 / (x1 - x0).max(y1 - y0);
    let c = qcseg_core::C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mid = (size as f64 - 1.0) / 2.0;
    let px: Vec<_> = points
        .iter()
        .map(|p| qcseg_core::C64::new(mid + s * (p.re - c.re), mid - s * (p.im - c.im)))
        .collect();
    Mask::new(size, size, geometry::fill_polygon(&px, size, size)).expect("size matches")
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let b = HbsSignature::load(&a.signature).context("reading signature")?;
    let shape = reconstruct_shape(&b, &ReconstructOptions::default()).context("reconstruction")?;
    write(&a.contour, &write_points(&shape))?;
    if let Some(png) = &a.png {
        render_shape(&shape, a.size).save_png(png).context("writing rendering")?;
    }
    Ok(())
}

fn load_params(path: Option<&Path>) -> Result<SegParams> {
    let p = match path {
        None => SegParams::default(),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    p.validate().context("invalid configuration")?;
    Ok(p)
}

fn cmd_segment(a: SegmentArgs) -> Result<()> {
    let mut params = load_params(a.config.as_deref())?;
    let img = load_image(&a.image).context("reading image")?;
    let prior = match (&a.prior, a.no_prior) {
        (Some(p), _) => HbsSignature::load(p).context("reading prior")?,
        (None, true) => HbsSignature::zero(DEFAULT_GRID)?,
        (None, false) => bail!("--prior is required unless --no-prior is given"),
    };
    if a.no_prior {
        params = params.without_prior();
    }
    let truth = a
        .truth
        .as_ref()
        .map(|p| Mask::load(p).context("reading truth mask"))
        .transpose()?;
    let res = segment(&img, &prior, &params).context("segmentation")?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    render_overlay(&img, &res.contour, a.out.join("overlay.png")).context("writing overlay")?;
    res.mask.save_png(a.out.join("mask.png")).context("writing mask")?;
    write(&a.out.join("contour.txt"), &write_points(&res.contour))?;
    write(&a.out.join("log.csv"), &log_csv(&res.log, res.converged))?;

    println!("iterations,{}", res.log.len());
    println!("converged,{}", res.converged);
    println!("flipped_faces,{}", res.flipped_faces);
    if !res.converged {
        eprintln!("warning: stopped at the iteration cap without converging");
    }
    if let Some(t) = truth {
        println!("dice,{}", metrics::dice(&res.mask, &t)?);
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let kind: SynthKind = a.kind.parse()?;
    let syn = synth_image(kind, a.size)?;
    let image: GrayImage = if a.noise > 0.0 {
        add_gaussian_noise(&syn.image, 0.0, a.noise * a.noise, a.seed)?.0
    } else {
        syn.image
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    image.save_png(a.out.join("image.png"))?;
    syn.truth.save_png(a.out.join("truth.png"))?;
    syn.prior.save(a.out.join("prior.txt"))?;
    let (cx, cy, r) = syn.init;
    println!("init_center,{cx} {cy}");
    println!("init_radius,{r}");
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let pred = Mask::load(&a.pred).context("reading prediction")?;
    let truth = Mask::load(&a.truth).context("reading truth")?;
    let rows = metrics::format_rows(&metrics::report(&pred, &truth)?);
    match &a.out {
        Some(p) => write(p, &rows),
        None => {
            print!("{rows}");
            Ok(())
        }
    }
}

fn cmd_noise(a: NoiseArgs) -> Result<()> {
    let img = load_image(&a.image).context("reading image")?;
    let (noisy, snr) = add_gaussian_noise(&img, a.mean, a.var, a.seed)?;
    noisy.save_png(&a.out).context("writing image")?;
    println!("snr_db,{snr}");
    Ok(())
}
