//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error (reported before
//! any model runs), 2 runtime failure, including a failure rate above
//! `max_failure_rate`.

use std::path::{Path, PathBuf};

use camquant_core::{resize_bilinear, score_pair, Grid, Heatmap, KldOrientation, MetricConfig, PrecisionLevel, Preprocess, DEFAULT_EPSILON};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{resolve, AuditConfig, GeneratorConfig};
use crate::error::{Error, Result};
use crate::harness::overlay::{emit_overlays, OverlayRow};
use crate::harness::report::{emit_report, RecordsFile, ReportFormat, RECORDS_FILE};
use crate::harness::plan_audit;
use crate::heatmap_io::read_heatmap;
use crate::preprocess::{load_rgb, prepare};
use crate::saliency::{load_mask, read_gray};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "camquant", version, about = "Audit how quantization shifts Grad-CAM++ heatmaps")]
pub struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,

    /// Log more detail to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the model x precision matrix and write reports.
    Audit(Box<AuditArgs>),
    /// Score two maps and print SIM, CC and KLD as JSON.
    Score(ScoreArgs),
    /// Render an image | mask | f32 | int16 | int8 overlay row.
    Overlay(OverlayArgs),
    /// Re-render reports from a records.json file.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Orientation {
    CamWeighted,
    Conventional,
}

impl From<Orientation> for KldOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::CamWeighted => KldOrientation::CamWeighted,
            Orientation::Conventional => KldOrientation::Conventional,
        }
    }
}

/// Every flag mirrors a config-file key and overrides it.
#[derive(Debug, Args)]
pub struct AuditArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub precisions: Option<Vec<PrecisionLevel>>,
    #[arg(long)]
    pub image_dir: Option<PathBuf>,
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    /// Also settable through CAMQUANT_CACHE_DIR; the flag wins.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub weights_dir: Option<PathBuf>,
    #[arg(long)]
    pub weights_seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub kld_orientation: Option<Orientation>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub formats: Option<Vec<ReportFormat>>,
    #[arg(long)]
    pub overlays: Option<usize>,
    #[arg(long)]
    pub max_failure_rate: Option<f64>,
    /// Salient-object generator program.
    #[arg(long)]
    pub generator: Option<String>,
    /// Generator argument; `{input}` and `{output}` are substituted. Repeatable.
    #[arg(long = "generator-arg", allow_hyphen_values = true)]
    pub generator_args: Vec<String>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Ground-truth map (grayscale image or heatmap .bin).
    pub gt: PathBuf,
    /// CAM (grayscale image or heatmap .bin); resized to the ground truth if needed.
    pub cam: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Orientation::CamWeighted)]
    pub kld_orientation: Orientation,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// CAM files in f32, int16, int8 order (up to three).
    #[arg(long = "cam")]
    pub cams: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "out/records.json")]
    pub records: PathBuf,
    /// Defaults to the directory holding the records file.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "md,csv")]
    pub formats: Vec<ReportFormat>,
}

/// Errors that mean the inputs are wrong rather than the run failing.
fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. }
            | Error::UnsupportedModel(_)
            | Error::WeightsNotFound { .. }
            | Error::GeneratorNotConfigured
            | Error::InsufficientImages { .. }
            | Error::DuplicateImageId(_)
            | Error::NoCams
    )
}

pub fn run(cli: Cli) -> i32 {
    let workdir = cli.workdir.as_path();
    let result = match cli.command {
        Command::Audit(args) => return audit(*args, workdir),
        Command::Score(args) => score(&args, workdir),
        Command::Overlay(args) => overlay(&args, workdir),
        Command::Report(args) => report(&args, workdir),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// File values, then the cache-directory environment variable, then flags.
pub fn effective_config(args: &AuditArgs, workdir: &Path) -> Result<AuditConfig> {
    let mut c = match &args.config {
        Some(path) => AuditConfig::from_file(&resolve(workdir, path))?,
        None => AuditConfig::default(),
    };
    c.apply_env();
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &args.$field {
                c.$field = v.clone().into();
            }
        )*};
    }
    set!(models, precisions, cache_dir, output_dir, n, seed, epsilon, workers, formats, overlays, max_failure_rate);
    if let Some(v) = &args.image_dir {
        c.image_dir = Some(v.clone());
    }
    if let Some(v) = &args.mask_dir {
        c.mask_dir = Some(v.clone());
    }
    if let Some(v) = &args.weights_dir {
        c.weights_dir = Some(v.clone());
        c.weights_seed = None;
    }
    if let Some(v) = args.weights_seed {
        c.weights_seed = Some(v);
        c.weights_dir = None;
    }
    if let Some(o) = args.kld_orientation {
        c.kld_orientation = o.into();
    }
    if let Some(program) = &args.generator {
        c.generator = Some(GeneratorConfig {
            program: program.clone(),
            args: args.generator_args.clone(),
        });
    }
    Ok(c)
}

fn audit(args: AuditArgs, workdir: &Path) -> i32 {
    let config = match effective_config(&args, workdir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.print_config {
        print!("{}", config.to_toml());
        return EXIT_OK;
    }
    let plan = match plan_audit(&config, workdir) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    log::info!(
        "{} models x {} precisions x {} images",
        plan.models.len(),
        config.levels().len(),
        plan.data.len()
    );
    let outcome = match plan.execute() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    log::info!(
        "{} records, {} failures, cache {} hits / {} misses",
        outcome.run.records.len(),
        outcome.run.failures.len(),
        outcome.cache_hits,
        outcome.cache_misses
    );
    for path in &outcome.written {
        log::info!("wrote {}", path.display());
    }
    if outcome.failure_rate > config.max_failure_rate {
        eprintln!(
            "error: {:.1}% of (model, image) pairs failed, above max_failure_rate {:.1}%",
            outcome.failure_rate * 100.0,
            config.max_failure_rate * 100.0
        );
        return EXIT_RUNTIME;
    }
    EXIT_OK
}

/// A map from a heatmap `.bin` (with sidecar) or a grayscale image.
pub fn read_map(path: &Path) -> Result<Grid<f32>> {
    let is_bin = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"));
    if is_bin {
        Ok(read_heatmap(path)?.0.into_grid())
    } else {
        read_gray(path)
    }
}

fn score(args: &ScoreArgs, workdir: &Path) -> Result<()> {
    let gt = read_map(&resolve(workdir, &args.gt))?;
    let mut cam = read_map(&resolve(workdir, &args.cam))?;
    if cam.dims() != gt.dims() {
        cam = resize_bilinear(&cam, gt.height(), gt.width());
    }
    let config = MetricConfig {
        epsilon: args.epsilon,
        orientation: args.kld_orientation.into(),
    };
    if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
        return Err(Error::config("epsilon", "must be a positive finite number"));
    }
    let scored = score_pair(&gt.to_f64(), &cam.to_f64(), &config)?;
    println!("{}", serde_json::to_string(&scored)?);
    Ok(())
}

fn overlay(args: &OverlayArgs, workdir: &Path) -> Result<()> {
    if args.cams.is_empty() {
        return Err(Error::NoCams);
    }
    if args.cams.len() > 3 {
        return Err(Error::config("cam", "at most three CAMs (f32, int16, int8)"));
    }
    let cams = args
        .cams
        .iter()
        .map(|p| Ok(Heatmap::from_grid(read_map(&resolve(workdir, p))?)?))
        .collect::<Result<Vec<_>>>()?;
    let (h, w) = (cams[0].height(), cams[0].width());
    let image_path = resolve(workdir, &args.image);
    let mask_path = resolve(workdir, &args.mask);
    let rgb = load_rgb(&image_path)?;
    let (rgb, mask) = if rgb.dimensions() == (w as u32, h as u32) {
        (rgb, load_mask(&mask_path, h, w)?.into_grid())
    } else {
        // raw dataset image: apply the classifier's resize and crop to both
        let pp = Preprocess {
            crop: h,
            ..Preprocess::default()
        };
        if h != w || h > pp.resize {
            return Err(Error::SizeMismatch(format!(
                "image is {:?} and CAM is {h}x{w}",
                rgb.dimensions()
            )));
        }
        let prepared = prepare(&rgb, &pp)?;
        let g = prepared.geometry;
        let mask = load_mask(&mask_path, g.resized_h, g.resized_w)?;
        (prepared.rgb, g.crop_grid(mask.grid())?)
    };
    let row = OverlayRow {
        image: &rgb,
        mask: &mask,
        cams: [cams.first(), cams.get(1), cams.get(2)],
    };
    emit_overlays(&[row], &resolve(workdir, &args.out))
}

fn report(args: &ReportArgs, workdir: &Path) -> Result<()> {
    let records = resolve(workdir, &args.records);
    let run = RecordsFile::read(&records)?;
    let out = match &args.output_dir {
        Some(d) => resolve(workdir, d),
        None => records.parent().map_or_else(|| workdir.to_path_buf(), Path::to_path_buf),
    };
    let formats: Vec<ReportFormat> = args
        .formats
        .iter()
        .copied()
        .filter(|f| *f != ReportFormat::Json || out.join(RECORDS_FILE) != records)
        .collect();
    for path in emit_report(&run, &formats, &out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("camquant").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("audit.toml"),
            "models = [\"vgg16\"]\nn = 9\nseed = 4\nweights_dir = \"w\"\n",
        )
        .unwrap();
        let cli = parse(&[
            "audit",
            "--config",
            "audit.toml",
            "--models",
            "squeezenet1_0,resnet50",
            "--precisions",
            "f32,int8",
            "--n",
            "5",
            "--weights-seed",
            "2",
        ]);
        let Command::Audit(args) = cli.command else { panic!() };
        let c = effective_config(&args, dir.path()).unwrap();
        assert_eq!(c.models, vec!["squeezenet1_0", "resnet50"]);
        assert_eq!(c.precisions, vec![PrecisionLevel::F32, PrecisionLevel::Int8]);
        assert_eq!((c.n, c.seed), (5, 4));
        assert_eq!((c.weights_seed, c.weights_dir.clone()), (Some(2), None));
    }

    #[test]
    fn generator_args_keep_placeholders() {
        let cli = parse(&["audit", "--generator", "sod", "--generator-arg", "-i", "--generator-arg", "{input}"]);
        let Command::Audit(args) = cli.command else { panic!() };
        let c = effective_config(&args, Path::new(".")).unwrap();
        let g = c.generator.unwrap();
        assert_eq!((g.program.as_str(), g.args), ("sod", vec!["-i".to_string(), "{input}".to_string()]));
    }

    #[test]
    fn overlay_without_cams_is_an_input_error() {
        let cli = parse(&["overlay", "--image", "a.png", "--mask", "m.png", "--out", "o.png"]);
        assert_eq!(run(cli), EXIT_CONFIG);
    }
}
