//! Command-line front end: synthesize datasets, run learning-curve
//! experiments and baselines, re-render charts, and inspect the filter
//! responses of a single patch.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::s;

use scaletex::harness::{
    cfs_baseline, export_curves, export_results, load_grayscale, mh_baseline, parse_curve_csv,
    run_learning_curve, write_chart, write_pgm, ExperimentConfig, FusionMode, LearningCurve,
    SyntheticKind, SyntheticSpec,
};
use scaletex::patching::preprocess_patch;
use scaletex::scale_space::compute_njet;
use scaletex::Image;

#[derive(Parser)]
#[command(
    name = "scaletex",
    version,
    about = "Multiscale texture classification workbench",
    propagate_version = true
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic texture images as PGM files
    Synth(SynthArgs),
    /// Run the full learning-curve experiment and export curves + chart
    Curve(CurveArgs),
    /// Run a reference method (moment summaries or fused features)
    Baseline(BaselineArgs),
    /// Re-render a chart from previously exported curve CSV files
    Plot(PlotArgs),
    /// Dump the filter responses of one patch as PGM images
    Inspect(InspectArgs),
}

/// Experiment configuration source plus per-field overrides. Flags use
/// the exact TOML field names.
#[derive(Args)]
struct ConfigOverrides {
    /// TOML experiment config (default: the bundled four-class preset)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named dataset preset: four-class
    #[arg(long)]
    preset: Option<String>,
    /// Master RNG seed
    #[arg(long = "rng_seed", alias = "seed")]
    rng_seed: Option<u64>,
    /// PCA retained-variance fraction, e.g. 0.95
    #[arg(long = "pca_fraction")]
    pca_fraction: Option<f64>,
    /// Comma-separated training sizes, e.g. 10,20,40
    #[arg(long = "training_sizes", value_delimiter = ',')]
    training_sizes: Option<Vec<usize>>,
    /// Total test patches per evaluation
    #[arg(long = "test_size")]
    test_size: Option<usize>,
    /// Repetitions per training size
    #[arg(long = "repetitions")]
    repetitions: Option<usize>,
    /// Base classifier: qdc, knn or parzen
    #[arg(long = "base_classifier")]
    base_classifier: Option<String>,
    /// Combiner topology: one_stage, scales_then_derivatives,
    /// derivatives_then_scales, fuse_scales_then_combine,
    /// fuse_derivatives_then_combine
    #[arg(long)]
    topology: Option<String>,
    /// Stage-1 combine rule: min, prod, median, mean, max, vote
    #[arg(long = "rule_stage1")]
    rule_stage1: Option<String>,
    /// Stage-2 combine rule
    #[arg(long = "rule_stage2")]
    rule_stage2: Option<String>,
    /// Comma-separated Gaussian scales, e.g. 1,2,2.6458
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Comma-separated central crop sides, one per scale
    #[arg(long = "crop_sizes", value_delimiter = ',')]
    crop_sizes: Option<Vec<usize>>,
    /// Comma-separated subsampling strides, one per scale
    #[arg(long = "subsample_strides", value_delimiter = ',')]
    subsample_strides: Option<Vec<usize>>,
    /// Patch side in pixels
    #[arg(long = "patch_size")]
    patch_size: Option<usize>,
    /// Patch grid stride in pixels
    #[arg(long = "patch_stride")]
    patch_stride: Option<usize>,
    /// Per-scale QDC shrinkage as eta,lambda pairs: "0.01,0.01;0,0;0,0"
    #[arg(long)]
    regularization: Option<String>,
    /// Comma-separated class image paths (replaces any synthetic recipes)
    #[arg(long = "class_image_paths", value_delimiter = ',')]
    class_image_paths: Option<Vec<PathBuf>>,
    /// Synthetic recipes (replaces any image paths):
    /// "sinusoid,wavelength=13,angle=0;checkerboard,cell=7"
    #[arg(long)]
    synthetic: Option<String>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, self.preset.as_deref()) {
            (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
            (Some(path), None) => ExperimentConfig::from_toml_path(path)?,
            (None, Some("four-class" | "four_class")) => ExperimentConfig::four_class_preset(),
            (None, Some(other)) => bail!("unknown preset '{other}' (expected: four-class)"),
            (None, None) => {
                eprintln!("note: no --config or --preset given; using the four-class preset");
                ExperimentConfig::four_class_preset()
            }
        };

        if self.class_image_paths.is_some() && self.synthetic.is_some() {
            bail!("--class_image_paths and --synthetic are mutually exclusive");
        }
        if let Some(v) = self.rng_seed {
            config.rng_seed = v;
        }
        if let Some(v) = self.pca_fraction {
            config.pca_fraction = v;
        }
        if let Some(v) = &self.training_sizes {
            config.training_sizes = v.clone();
        }
        if let Some(v) = self.test_size {
            config.test_size = v;
        }
        if let Some(v) = self.repetitions {
            config.repetitions = v;
        }
        if let Some(v) = &self.base_classifier {
            config.base_classifier = v.parse()?;
        }
        if let Some(v) = &self.topology {
            config.combiner.topology = v.parse()?;
        }
        if let Some(v) = &self.rule_stage1 {
            config.combiner.rule_stage1 = v.parse()?;
        }
        if let Some(v) = &self.rule_stage2 {
            config.combiner.rule_stage2 = v.parse()?;
        }
        if let Some(v) = &self.sigmas {
            config.sigmas = v.clone();
        }
        if let Some(v) = &self.crop_sizes {
            config.crop_sizes = v.clone();
        }
        if let Some(v) = &self.subsample_strides {
            config.subsample_strides = v.clone();
        }
        if let Some(v) = self.patch_size {
            config.patch_size = v;
        }
        if let Some(v) = self.patch_stride {
            config.patch_stride = v;
        }
        if let Some(v) = &self.regularization {
            config.regularization = parse_regularization(v)?;
        }
        if let Some(v) = &self.class_image_paths {
            config.class_image_paths = v.clone();
            config.synthetic.clear();
        }
        if let Some(v) = &self.synthetic {
            config.synthetic = parse_synth_list(v)?;
            config.class_image_paths.clear();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Named dataset preset: four-class
    #[arg(long)]
    preset: Option<String>,
    /// Inline recipe list, e.g. "sinusoid,wavelength=13,angle=0.79"
    #[arg(long)]
    kind: Option<String>,
    /// Master seed for derived per-class seeds
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Image side for every recipe that does not set its own size
    #[arg(long)]
    size: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "textures")]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Output directory for curve CSVs and chart.svg
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    /// Reference method: mh (moment summaries) or cfs (fused features)
    #[arg(long)]
    method: String,
    /// Fusion for cfs: all, per-derivative or per-scale
    #[arg(long, default_value = "all")]
    fusion: String,
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Curve CSV files exported by `curve` or `baseline`
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Output SVG path
    #[arg(long, default_value = "results/chart.svg")]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Image to take the patch from
    #[arg(long)]
    image: PathBuf,
    /// Patch origin row
    #[arg(long, default_value_t = 0)]
    row: usize,
    /// Patch origin column
    #[arg(long, default_value_t = 0)]
    col: usize,
    /// Patch side in pixels
    #[arg(long = "patch_size", default_value_t = 32)]
    patch_size: usize,
    /// Comma-separated Gaussian scales
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Output directory for the response images
    #[arg(long, default_value = "inspect")]
    out: PathBuf,
}

/// Parses "eta,lambda;eta,lambda;..." into per-scale pairs.
fn parse_regularization(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(';')
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').collect();
            if parts.len() != 2 {
                bail!("regularization entry '{pair}' must be 'eta,lambda'");
            }
            Ok((
                parts[0].trim().parse::<f64>().context("bad eta value")?,
                parts[1].trim().parse::<f64>().context("bad lambda value")?,
            ))
        })
        .collect()
}

/// Parses one recipe: `kind,key=value,...`. Unset keys take the same
/// defaults as the TOML form.
fn parse_synth_entry(entry: &str) -> Result<SyntheticSpec> {
    let mut tokens = entry.split(',').map(str::trim);
    let kind_name = tokens.next().unwrap_or_default();
    let mut wavelength = None;
    let mut angle = 0.0_f64;
    let mut noise_amplitude = 20.0_f64;
    let mut cell = None;
    let mut sigma = None;
    let mut threshold = 0.5_f64;
    let mut size: Option<usize> = None;
    let mut seed: Option<u64> = None;
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .with_context(|| format!("expected key=value, got '{token}'"))?;
        let value = value.trim();
        match key.trim() {
            "wavelength" => wavelength = Some(value.parse()?),
            "angle" => angle = value.parse()?,
            "noise_amplitude" => noise_amplitude = value.parse()?,
            "cell" => cell = Some(value.parse()?),
            "sigma" => sigma = Some(value.parse()?),
            "threshold" => threshold = value.parse()?,
            "size" => size = Some(value.parse()?),
            "seed" => seed = Some(value.parse()?),
            other => bail!("unknown recipe key '{other}'"),
        }
    }
    let kind = match kind_name {
        "sinusoid" => SyntheticKind::Sinusoid {
            wavelength: wavelength.context("sinusoid needs wavelength=")?,
            angle,
            noise_amplitude,
        },
        "checkerboard" => SyntheticKind::Checkerboard {
            cell: cell.context("checkerboard needs cell=")?,
            noise_amplitude,
        },
        "filtered_noise" => SyntheticKind::FilteredNoise {
            sigma: sigma.context("filtered_noise needs sigma=")?,
        },
        "blobs" => SyntheticKind::Blobs {
            sigma: sigma.context("blobs needs sigma=")?,
            threshold,
        },
        other => bail!(
            "unknown texture kind '{other}' (expected sinusoid, checkerboard, \
             filtered_noise or blobs)"
        ),
    };
    Ok(SyntheticSpec {
        kind,
        size: size.unwrap_or(640),
        seed,
    })
}

/// Parses a semicolon-separated recipe list.
fn parse_synth_list(text: &str) -> Result<Vec<SyntheticSpec>> {
    text.split(';')
        .filter(|entry| !entry.trim().is_empty())
        .map(parse_synth_entry)
        .collect()
}

/// Min-max rescales a response to [0, 255] for export; constant maps to 0.
fn rescale_for_export(response: &Image) -> Image {
    let min = response.iter().copied().fold(f64::INFINITY, f64::min);
    let max = response.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        response.mapv(|v| (v - min) / (max - min) * 255.0)
    } else {
        Image::zeros(response.dim())
    }
}

fn print_curve_summary(curve: &LearningCurve) {
    let last = curve.sizes.len() - 1;
    println!(
        "{}: error {:.4} +/- {:.4} at {} training patches per class \
         ({} sizes x {} repetitions)",
        curve.name,
        curve.mean(last),
        curve.std(last),
        curve.sizes[last],
        curve.sizes.len(),
        curve.repetitions()
    );
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut specs = match (&args.preset, &args.kind) {
        (Some(_), Some(_)) => bail!("--preset and --kind are mutually exclusive"),
        (Some(preset), None) => match preset.as_str() {
            "four-class" | "four_class" => ExperimentConfig::four_class_preset().synthetic,
            other => bail!("unknown preset '{other}' (expected: four-class)"),
        },
        (None, Some(kind)) => parse_synth_list(kind)?,
        (None, None) => bail!("pass --preset four-class or --kind <recipe>"),
    };
    if specs.is_empty() {
        bail!("no recipes given");
    }
    if let Some(size) = args.size {
        for spec in &mut specs {
            spec.size = size;
        }
    }
    std::fs::create_dir_all(&args.out)?;
    for (class, spec) in specs.iter().enumerate() {
        let image = spec.generate(args.seed, class)?;
        let path = args.out.join(format!("class_{class}.pgm"));
        write_pgm(&path, &image)?;
        println!(
            "wrote {} ({}x{})",
            path.display(),
            image.ncols(),
            image.nrows()
        );
    }
    Ok(())
}

fn cmd_curve(args: &CurveArgs) -> Result<()> {
    let config = args.overrides.resolve()?;
    let bundle = run_learning_curve(&config)?;
    let written = export_results(&bundle, &args.out)?;
    print_curve_summary(&bundle.combined);
    for group in &bundle.groups {
        print_curve_summary(group);
    }
    println!(
        "wrote {} files to {} (chart: {})",
        written.len(),
        args.out.display(),
        args.out.join("chart.svg").display()
    );
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let config = args.overrides.resolve()?;
    let curve = match args.method.as_str() {
        "mh" => mh_baseline(&config)?,
        "cfs" => {
            let fusion: FusionMode = args.fusion.parse()?;
            cfs_baseline(&config, fusion)?
        }
        other => bail!("unknown method '{other}' (expected mh or cfs)"),
    };
    let chart_name = format!("{}_chart", curve.name);
    let written = export_curves(std::slice::from_ref(&curve), &args.out, &chart_name)?;
    print_curve_summary(&curve);
    println!("wrote {} files to {}", written.len(), args.out.display());
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let curves: Vec<LearningCurve> = args
        .csv
        .iter()
        .map(parse_curve_csv)
        .collect::<scaletex::Result<_>>()?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let refs: Vec<&LearningCurve> = curves.iter().collect();
    write_chart(&refs, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let image = load_grayscale(&args.image)?;
    let (rows, cols) = image.dim();
    let p = args.patch_size;
    if args.row + p > rows || args.col + p > cols {
        bail!(
            "patch of size {p} at ({}, {}) does not fit in a {rows}x{cols} image",
            args.row,
            args.col
        );
    }
    let patch = image
        .slice(s![args.row..args.row + p, args.col..args.col + p])
        .to_owned();
    let (standardized, constant) = preprocess_patch(&patch)?;
    if constant {
        println!("note: the patch is constant; every response is zero");
    }
    let sigmas = args
        .sigmas
        .clone()
        .unwrap_or_else(|| ExperimentConfig::default().sigmas);
    let jet = compute_njet(&standardized, &sigmas, 2)?;
    std::fs::create_dir_all(&args.out)?;
    println!("derivative  scale      sigma        min        max       mean");
    for (derivative, scale_index, response) in jet.iter() {
        let min = response.iter().copied().fold(f64::INFINITY, f64::min);
        let max = response.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = response.sum() / response.len() as f64;
        println!(
            "{:<11} {:<6} {:>8.4} {:>10.4} {:>10.4} {:>10.4}",
            derivative.label(),
            scale_index + 1,
            sigmas[scale_index],
            min,
            max,
            mean
        );
        let path = args
            .out
            .join(format!("{}_s{}.pgm", derivative.label(), scale_index + 1));
        write_pgm(&path, &rescale_for_export(response))?;
    }
    println!(
        "wrote {} response images to {}",
        jet.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to initialize the thread pool")?;
    }
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_entries_parse_with_defaults() {
        let spec = parse_synth_entry("sinusoid,wavelength=12").unwrap();
        assert_eq!(spec.size, 640);
        assert_eq!(spec.seed, None);
        match spec.kind {
            SyntheticKind::Sinusoid {
                wavelength,
                angle,
                noise_amplitude,
            } => {
                assert_eq!(wavelength, 12.0);
                assert_eq!(angle, 0.0);
                assert_eq!(noise_amplitude, 20.0);
            }
            other => panic!("wrong kind: {other:?}"),
        }

        let spec = parse_synth_entry("blobs,sigma=3,threshold=0.4,size=128,seed=7").unwrap();
        assert_eq!(spec.size, 128);
        assert_eq!(spec.seed, Some(7));
        assert!(matches!(
            spec.kind,
            SyntheticKind::Blobs { sigma, threshold } if sigma == 3.0 && threshold == 0.4
        ));
    }

    #[test]
    fn recipe_lists_and_errors() {
        let specs =
            parse_synth_list("sinusoid,wavelength=12;checkerboard,cell=10;filtered_noise,sigma=3")
                .unwrap();
        assert_eq!(specs.len(), 3);
        assert!(parse_synth_entry("sinusoid").is_err(), "missing wavelength");
        assert!(parse_synth_entry("plaid,weave=2").is_err(), "unknown kind");
        assert!(
            parse_synth_entry("sinusoid,wavelength=12,stripes=4").is_err(),
            "unknown key"
        );
    }

    #[test]
    fn regularization_pairs_parse() {
        assert_eq!(
            parse_regularization("0.01,0.01;0,0;0,0").unwrap(),
            vec![(0.01, 0.01), (0.0, 0.0), (0.0, 0.0)]
        );
        assert!(parse_regularization("0.01;0,0").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
