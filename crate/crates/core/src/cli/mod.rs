//! The `ledsna` command-line front end.

mod compare;
mod overlay;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use overlay::render_overlay;

use crate::blackbox::{serve_ndjson, BlackBoxSpec};
use crate::error::Error;
use crate::image::{Rgb, RgbImage};
use crate::instance::{HideColor, Instance, InterpretableSpace};
use crate::sampling::{group_tokens, DependencyFile, DependencyGroups, Metric, WindowGrouper};
use crate::segmentation::{grid_segment, slic_segment, SegmentMap, SlicParams};
use crate::surrogate::{explain, ExplainConfig, Explanation, KernelSpec, SamplerKind, SurrogateKind};

#[derive(Debug, Parser)]
#[command(name = "ledsna", version, about = "Local explanations for black-box classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain one image prediction.
    ExplainImage(ExplainImageArgs),
    /// Explain the prediction for a text (or each line of a file).
    ExplainText(ExplainTextArgs),
    /// Compare two surrogates over a corpus and report win rates.
    Compare(compare::CompareArgs),
    /// Serve a built-in classifier over the line protocol on stdin/stdout.
    ServeBuiltin(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SurrogateArg {
    Svr,
    Ridge,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Cosine,
    L2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Connected,
    Clique,
    Independent,
}

/// Surrogate and sampling settings shared by all explaining commands.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Black box: builtin:<name>[:args] | subprocess:<cmdline> | http:<url>
    #[arg(long)]
    pub blackbox: String,
    #[arg(long, value_enum, default_value = "svr")]
    pub surrogate: SurrogateArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// Gaussian kernel width (default 1/d').
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Ridge strength of the linear surrogate.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1000)]
    pub n_samples: usize,
    /// Proximity kernel width (default 0.25*sqrt(d') for l2, 25 for cosine).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Proximity distance (default l2 for images, cosine for text).
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Number of top features reported.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SMO stopping tolerance on the maximal KKT violation.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Concurrent black-box batches (capped by the adapter).
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    /// Retries for transient black-box failures.
    #[arg(long, default_value_t = 2)]
    pub retries: usize,
}

impl ModelArgs {
    fn spec(&self) -> Result<BlackBoxSpec, CliError> {
        self.blackbox.parse().map_err(usage)
    }

    fn config(&self) -> Result<ExplainConfig, CliError> {
        let kernel = match (self.kernel, self.gamma) {
            (KernelArg::Linear, Some(_)) => {
                return Err(CliError::Usage("--gamma only applies to --kernel gaussian".into()))
            }
            (KernelArg::Linear, None) => Some(KernelSpec::Linear),
            (KernelArg::Gaussian, Some(g)) => Some(KernelSpec::gaussian(g).map_err(usage)?),
            (KernelArg::Gaussian, None) => None,
        };
        for (name, v, strict) in [
            ("--c", self.c, true),
            ("--epsilon", self.epsilon, false),
            ("--lambda", self.lambda, false),
            ("--tol", self.tol, true),
        ] {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if !ok {
                return Err(CliError::Usage(format!(
                    "{name} must be {} (got {v})",
                    if strict { "positive" } else { "non-negative" }
                )));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::Usage(format!("--sigma must be positive (got {s})")));
            }
        }
        if self.n_samples == 0 || self.batch_size == 0 {
            return Err(CliError::Usage(
                "--n-samples and --batch-size must be at least 1".into(),
            ));
        }
        Ok(ExplainConfig {
            surrogate: match self.surrogate {
                SurrogateArg::Svr => SurrogateKind::Svr,
                SurrogateArg::Ridge => SurrogateKind::Ridge,
            },
            kernel,
            c: self.c,
            epsilon: self.epsilon,
            lambda: self.lambda,
            n_samples: self.n_samples,
            sigma: self.sigma,
            metric: self.metric.map(|m| match m {
                MetricArg::Cosine => Metric::Cosine,
                MetricArg::L2 => Metric::L2,
            }),
            k: self.k,
            seed: self.seed,
            tol: self.tol,
            batch_size: self.batch_size,
            parallelism: self.parallelism.max(1),
            ..ExplainConfig::default()
        })
    }
}

/// How an image is cut into interpretable segments.
#[derive(Debug, Clone, Args)]
pub struct SegmentationArgs {
    /// SLIC superpixels: k[,compactness[,iterations]]
    #[arg(long, group = "segmentation")]
    pub slic: Option<String>,
    /// Regular grid: RxC
    #[arg(long, group = "segmentation")]
    pub grid: Option<String>,
    /// Precomputed label map (.pgm or .json)
    #[arg(long, group = "segmentation")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "connected")]
    pub sampler: SamplerArg,
    /// Fill for hidden segments: `mean` or r,g,b
    #[arg(long, default_value = "mean")]
    pub hide: String,
}

impl SegmentationArgs {
    fn segment(&self, image: &RgbImage) -> Result<SegmentMap, CliError> {
        let map = match (&self.slic, &self.grid, &self.labels) {
            (Some(s), None, None) => slic_segment(image, parse_slic(s)?).map_err(usage)?,
            (None, Some(g), None) => {
                let (r, c) = parse_grid(g)?;
                grid_segment(image, r, c).map_err(usage)?
            }
            (None, None, Some(path)) => {
                let map = SegmentMap::load(path).map_err(usage)?;
                if map.width() != image.width() || map.height() != image.height() {
                    return Err(CliError::Usage(format!(
                        "label map is {}x{} but the image is {}x{}",
                        map.width(),
                        map.height(),
                        image.width(),
                        image.height()
                    )));
                }
                map
            }
            _ => {
                return Err(CliError::Usage(
                    "exactly one of --slic, --grid or --labels is required".into(),
                ))
            }
        };
        Ok(map)
    }

    fn apply(&self, config: &mut ExplainConfig) -> Result<(), CliError> {
        config.sampler = match self.sampler {
            SamplerArg::Connected => SamplerKind::Connected,
            SamplerArg::Clique => SamplerKind::Clique,
            SamplerArg::Independent => SamplerKind::Independent,
        };
        config.hide = parse_hide(&self.hide)?;
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct ExplainImageArgs {
    /// Binary PPM (P6) input.
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub segmentation: SegmentationArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Explanation JSON destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a PPM with all but the top-K segments dimmed.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TextGroupingArgs {
    /// Dependency groups as JSON {"n_tokens": n, "groups": [[..], ..]}.
    #[arg(long, conflicts_with = "window")]
    pub deps: Option<PathBuf>,
    /// Group consecutive runs of this many tokens.
    #[arg(long)]
    pub window: Option<usize>,
}

impl TextGroupingArgs {
    fn groups(&self, instance: &Instance) -> Result<DependencyGroups, CliError> {
        match (&self.deps, self.window) {
            (Some(path), _) => {
                let file = DependencyFile::load(path).map_err(usage)?;
                group_tokens(instance, &file).map_err(usage)
            }
            (None, w) => group_tokens(instance, &WindowGrouper { window: w.unwrap_or(1) }).map_err(usage),
        }
    }
}

#[derive(Debug, Args)]
pub struct ExplainTextArgs {
    /// UTF-8 text file; whitespace separates tokens.
    #[arg(long)]
    pub text: PathBuf,
    /// Treat every non-empty line as its own instance.
    #[arg(long)]
    pub per_line: bool,
    #[command(flatten)]
    pub grouping: TextGroupingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// builtin:constant:<p> or builtin:lexicon[:<weights.json>]
    #[arg(long)]
    pub blackbox: String,
}

/// Failure classes mapped to exit codes: 2 for misuse, 1 otherwise.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Run(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Run(e.into())
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("LEDSNA_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::ExplainImage(args) => cmd_explain_image(&args),
        Command::ExplainText(args) => cmd_explain_text(&args),
        Command::Compare(args) => compare::cmd_compare(&args),
        Command::ServeBuiltin(args) => cmd_serve(&args),
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    RgbImage::from_ppm(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_explain_image(args: &ExplainImageArgs) -> Result<(), CliError> {
    let spec = args.model.spec()?;
    let mut config = args.model.config()?;
    args.segmentation.apply(&mut config)?;
    let image = load_image(&args.image)?;
    let map = Arc::new(args.segmentation.segment(&image)?);
    log::info!("{} segments", map.n_segments());
    let space = InterpretableSpace::ImageSegments(map.clone());
    let instance = Instance::image(stem(&args.image), image);
    let blackbox = spec.build(space.d_prime(), 0, args.model.retries)?;
    let explanation = explain(&instance, &space, blackbox.as_ref(), &config)?;
    write_json(args.out.as_deref(), &explanation.to_json())?;
    if let Some(path) = &args.overlay {
        let img = instance.as_image().expect("image instance");
        fs::write(path, render_overlay(img, &map, &explanation.top_k).to_ppm())?;
    }
    Ok(())
}

fn cmd_explain_text(args: &ExplainTextArgs) -> Result<(), CliError> {
    let spec = args.model.spec()?;
    let config = args.model.config()?;
    let text = fs::read_to_string(&args.text)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.text.display())))?;
    let id = stem(&args.text);
    let instances: Vec<Instance> = if args.per_line {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| Instance::from_text(format!("{id}:{}", i + 1), l))
            .collect::<Result<_, _>>()
            .map_err(usage)?
    } else {
        vec![Instance::from_text(id, &text).map_err(usage)?]
    };
    if args.per_line && args.grouping.deps.is_some() && instances.len() > 1 {
        return Err(CliError::Usage(
            "--deps describes one instance; it cannot be combined with several --per-line instances".into(),
        ));
    }

    let mut explanations: Vec<Explanation> = Vec::with_capacity(instances.len());
    let mut shared: Option<Box<dyn crate::blackbox::BlackBox>> = None;
    for (index, instance) in instances.iter().enumerate() {
        let groups = args.grouping.groups(instance)?;
        let space = InterpretableSpace::TextGroups(groups);
        let per_instance;
        let blackbox = if spec.is_per_instance() {
            per_instance = spec.build(space.d_prime(), index as u64, args.model.retries)?;
            per_instance.as_ref()
        } else {
            if shared.is_none() {
                shared = Some(spec.build(space.d_prime(), 0, args.model.retries)?);
            }
            shared.as_deref().expect("built above")
        };
        explanations.push(explain(instance, &space, blackbox, &config)?);
    }
    let json = if args.per_line {
        serde_json::to_string_pretty(&explanations).map_err(Error::from)?
    } else {
        explanations[0].to_json()
    };
    write_json(args.out.as_deref(), &json)
}

fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let spec: BlackBoxSpec = args.blackbox.parse().map_err(usage)?;
    if !matches!(spec, BlackBoxSpec::Constant(_) | BlackBoxSpec::Lexicon(_)) {
        return Err(CliError::Usage(
            "serve-builtin serves builtin:constant and builtin:lexicon; quadratic-logit scores masks, which the wire format does not carry".into(),
        ));
    }
    let adapter = spec.build(1, 0, 0)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_ndjson(adapter.as_ref(), stdin.lock(), BufWriter::new(stdout.lock()))?;
    Ok(())
}

fn write_json(path: Option<&Path>, json: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, format!("{json}\n"))?,
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{json}")?;
        }
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid expects RxC, e.g. 4x4 (got `{s}`)"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

fn parse_slic(s: &str) -> Result<SlicParams, CliError> {
    let bad = || CliError::Usage(format!("--slic expects k[,compactness[,iterations]] (got `{s}`)"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.is_empty() || parts.len() > 3 {
        return Err(bad());
    }
    let mut params = SlicParams {
        k: parts[0].parse().map_err(|_| bad())?,
        ..SlicParams::default()
    };
    if let Some(c) = parts.get(1) {
        params.compactness = c.parse().map_err(|_| bad())?;
    }
    if let Some(i) = parts.get(2) {
        params.iterations = i.parse().map_err(|_| bad())?;
    }
    Ok(params)
}

fn parse_hide(s: &str) -> Result<HideColor, CliError> {
    if s.eq_ignore_ascii_case("mean") {
        return Ok(HideColor::Mean);
    }
    let bad = || CliError::Usage(format!("--hide expects `mean` or r,g,b (got `{s}`)"));
    let v: Vec<u8> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [r, g, b] => Ok(HideColor::Fixed(Rgb([r, g, b]))),
        _ => Err(bad()),
    }
}
