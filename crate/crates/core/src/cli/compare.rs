use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{load_image, stem, usage, CliError, ModelArgs, SegmentationArgs};
use crate::blackbox::BlackBox;
use crate::image::{Rgb, RgbImage};
use crate::instance::{Instance, InterpretableSpace};
use crate::sampling::{group_tokens, DependencyFile, WindowGrouper};
use crate::surrogate::{explain_on, perturb, ExplainConfig, SurrogateKind};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory of .ppm images and .txt texts; `<stem>.deps.json` next to
    /// a text supplies its dependency groups.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    /// Generate this many seeded synthetic images instead of reading a corpus.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Candidate and baseline surrogates.
    #[arg(long, default_value = "svr,ridge")]
    pub methods: String,
    /// Independent perturbation sets per instance; metrics are averaged.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Split text files into one instance per non-empty line.
    #[arg(long)]
    pub per_line: bool,
    /// Text grouping window when no deps file is present.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    #[command(flatten)]
    pub segmentation: SegmentationArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Per-row CSV destination.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Pretty table destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum Item {
    Image(Instance),
    Text(Instance, Option<PathBuf>),
}

impl Item {
    fn instance(&self) -> &Instance {
        match self {
            Self::Image(i) | Self::Text(i, _) => i,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub instance_id: String,
    pub trial: usize,
    pub method: SurrogateKind,
    pub f_x: f64,
    pub g_x: f64,
    pub err: f64,
    pub r_squared: Option<f64>,
}

/// Wins, ties and losses of the candidate over the baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Tally {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

impl Tally {
    fn add(&mut self, candidate_better: bool, tie: bool) {
        if tie {
            self.ties += 1;
        } else if candidate_better {
            self.wins += 1;
        } else {
            self.losses += 1;
        }
    }

    /// Ties count one half.
    pub fn win_rate(&self) -> f64 {
        let n = self.wins + self.ties + self.losses;
        if n == 0 {
            return 0.0;
        }
        (self.wins as f64 + 0.5 * self.ties as f64) / n as f64
    }
}

fn parse_methods(s: &str) -> Result<[SurrogateKind; 2], CliError> {
    let parsed: Vec<SurrogateKind> = s
        .split(',')
        .map(|m| match m.trim() {
            "svr" => Ok(SurrogateKind::Svr),
            "ridge" | "linear" => Ok(SurrogateKind::Ridge),
            other => Err(CliError::Usage(format!("unknown method `{other}` (svr, ridge)"))),
        })
        .collect::<Result<_, _>>()?;
    match parsed[..] {
        [a, b] => Ok([a, b]),
        _ => Err(CliError::Usage(
            "--methods expects two comma-separated surrogates, e.g. svr,ridge".into(),
        )),
    }
}

/// A seeded 32x32 image of soft colour blobs.
fn synthetic_image(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, [f64; 3])> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.0..32.0),
                rng.random_range(0.0..32.0),
                [
                    rng.random_range(0.0..255.0),
                    rng.random_range(0.0..255.0),
                    rng.random_range(0.0..255.0),
                ],
            )
        })
        .collect();
    RgbImage::from_fn(32, 32, |x, y| {
        let (mut acc, mut total) = ([0.0; 3], 0.0);
        for (bx, by, c) in &blobs {
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            let w = (-d2 / 60.0).exp() + 1e-9;
            total += w;
            for k in 0..3 {
                acc[k] += w * c[k];
            }
        }
        Rgb(acc.map(|v| (v / total).round().clamp(0.0, 255.0) as u8))
    })
    .expect("fixed dimensions")
}

fn load_corpus(args: &CompareArgs) -> Result<Vec<Item>, CliError> {
    if let Some(n) = args.synthetic {
        return Ok((0..n)
            .map(|i| {
                Item::Image(Instance::image(
                    format!("synthetic-{i:03}"),
                    synthetic_image(args.model.seed + i as u64),
                ))
            })
            .collect());
    }
    let dir = args.corpus.as_ref().expect("clap requires corpus or synthetic");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read corpus {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    let mut items = Vec::new();
    for path in paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match path.extension().and_then(|e| e.to_str()) {
            Some("ppm") => items.push(Item::Image(Instance::image(stem(&path), load_image(&path)?))),
            Some("txt") => {
                let text = fs::read_to_string(&path)?;
                let deps = path.with_file_name(format!("{}.deps.json", stem(&path)));
                let deps = deps.exists().then_some(deps);
                if args.per_line {
                    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                        let inst = Instance::from_text(format!("{}:{}", stem(&path), i + 1), line).map_err(usage)?;
                        items.push(Item::Text(inst, None));
                    }
                } else {
                    items.push(Item::Text(
                        Instance::from_text(stem(&path), &text).map_err(usage)?,
                        deps,
                    ));
                }
            }
            _ => log::debug!("skipping {name}"),
        }
    }
    if items.is_empty() {
        return Err(CliError::Usage(format!(
            "corpus {} has no .ppm or .txt instances",
            dir.display()
        )));
    }
    Ok(items)
}

pub(super) fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let methods = parse_methods(&args.methods)?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let spec = args.model.spec()?;
    let mut base = args.model.config()?;
    args.segmentation.apply(&mut base)?;
    let items = load_corpus(args)?;
    let n = items.len();

    let mut rows = Vec::new();
    let mut err_tally = Tally::default();
    let mut r2_tally = Tally::default();
    let mut shared: Option<Box<dyn BlackBox>> = None;

    for (index, item) in items.iter().enumerate() {
        let space = match item {
            Item::Image(inst) => {
                let img = inst.as_image().expect("image item");
                InterpretableSpace::ImageSegments(Arc::new(args.segmentation.segment(img)?))
            }
            Item::Text(inst, Some(deps)) => {
                let file = DependencyFile::load(deps).map_err(usage)?;
                InterpretableSpace::TextGroups(group_tokens(inst, &file).map_err(usage)?)
            }
            Item::Text(inst, None) => InterpretableSpace::TextGroups(
                group_tokens(inst, &WindowGrouper { window: args.window }).map_err(usage)?,
            ),
        };
        let per_instance;
        let blackbox: &dyn BlackBox = if spec.is_per_instance() {
            per_instance = spec.build(space.d_prime(), index as u64, args.model.retries)?;
            per_instance.as_ref()
        } else {
            if shared.is_none() {
                shared = Some(spec.build(space.d_prime(), 0, args.model.retries)?);
            }
            shared.as_deref().expect("built above")
        };

        let mut sums = [(0.0, 0.0, true); 2];
        for trial in 0..args.trials {
            let config = ExplainConfig {
                seed: base.seed.wrapping_add((trial * n + index) as u64),
                ..base.clone()
            };
            let data = perturb(item.instance(), &space, blackbox, &config)?;
            for (m, &method) in methods.iter().enumerate() {
                let cfg = ExplainConfig {
                    surrogate: method,
                    ..config.clone()
                };
                let e = explain_on(&data, item.instance(), &space, &cfg)?;
                sums[m].0 += e.err;
                match e.r_squared {
                    Some(r) => sums[m].1 += r,
                    None => sums[m].2 = false,
                }
                rows.push(Row {
                    instance_id: e.instance_id,
                    trial,
                    method,
                    f_x: e.f_at_x,
                    g_x: e.g_at_x,
                    err: e.err,
                    r_squared: e.r_squared,
                });
            }
        }
        let t = args.trials as f64;
        let err = [sums[0].0 / t, sums[1].0 / t];
        let r2 = [0, 1].map(|m| if sums[m].2 { sums[m].1 / t } else { f64::NEG_INFINITY });
        err_tally.add(err[0] < err[1], err[0] == err[1]);
        r2_tally.add(r2[0] > r2[1], r2[0] == r2[1]);
    }

    if let Some(path) = &args.csv {
        fs::write(path, to_csv(&rows))?;
    }
    let table = render_table(&rows, methods, err_tally, r2_tally);
    match &args.out {
        Some(path) => fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v}"))
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::from("instance_id,trial,method,f_x,g_x,err,r_squared\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.instance_id,
            r.trial,
            r.method.name(),
            r.f_x,
            r.g_x,
            r.err,
            fmt_opt(r.r_squared)
        );
    }
    s
}

fn render_table(rows: &[Row], methods: [SurrogateKind; 2], err: Tally, r2: Tally) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>5} {:<6} {:>8} {:>8} {:>10} {:>10}",
        "instance", "trial", "method", "f(x)", "g(x)", "Err", "R2"
    );
    for r in rows {
        let r2 = r.r_squared.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{:<24} {:>5} {:<6} {:>8.4} {:>8.4} {:>10.6} {:>10}",
            r.instance_id,
            r.trial,
            r.method.name(),
            r.f_x,
            r.g_x,
            r.err,
            r2
        );
    }
    let (a, b) = (methods[0].name(), methods[1].name());
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "Err {a} < {b}: {} wins, {} ties, {} losses, win rate {:.4}",
        err.wins,
        err.ties,
        err.losses,
        err.win_rate()
    );
    let _ = writeln!(
        s,
        "R2  {a} > {b}: {} wins, {} ties, {} losses, win rate {:.4}",
        r2.wins,
        r2.ties,
        r2.losses,
        r2.win_rate()
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_rates() {
        let mut t = Tally::default();
        t.add(true, false);
        t.add(false, true);
        t.add(false, false);
        t.add(true, false);
        assert_eq!((t.wins, t.ties, t.losses), (2, 1, 1));
        assert_eq!(t.win_rate(), 0.625);
    }

    #[test]
    fn methods_flag() {
        assert_eq!(
            parse_methods("svr,ridge").unwrap(),
            [SurrogateKind::Svr, SurrogateKind::Ridge]
        );
        assert!(parse_methods("svr").is_err());
        assert!(parse_methods("svr,tree").is_err());
    }

    #[test]
    fn synthetic_images_are_seeded() {
        assert_eq!(synthetic_image(3), synthetic_image(3));
        assert_ne!(synthetic_image(3), synthetic_image(4));
    }
}
