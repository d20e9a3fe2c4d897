use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::{default_lexicon, BlackBox, Constant, HttpBlackBox, LexiconSentiment, QuadraticLogit, SubprocessBlackBox};
use crate::error::{Error, Result};

/// Parsed `builtin:<name>[:args] | subprocess:<cmdline> | http:<url>`.
///
/// Built-ins: `constant:<p>`, `quadratic-logit[:<seed>]`, `lexicon[:<weights.json>]`.
#[derive(Clone, Debug, PartialEq)]
pub enum BlackBoxSpec {
    Constant(f64),
    QuadraticLogit { seed: u64 },
    Lexicon(Option<PathBuf>),
    Subprocess(String),
    Http(String),
}

impl BlackBoxSpec {
    /// Whether the classifier depends on the interpretable dimension or on
    /// the instance position, and so must be built per instance.
    pub fn is_per_instance(&self) -> bool {
        matches!(self, Self::QuadraticLogit { .. })
    }

    /// Instantiates the adapter for an instance with `d_prime` features.
    /// Seeded built-ins offset their seed by `index` so each instance of a
    /// corpus gets its own classifier.
    pub fn build(&self, d_prime: usize, index: u64, retries: usize) -> Result<Box<dyn BlackBox>> {
        Ok(match self {
            Self::Constant(p) => Box::new(Constant::new(*p)?),
            Self::QuadraticLogit { seed } => Box::new(QuadraticLogit::from_seed(d_prime, seed.wrapping_add(index))?),
            Self::Lexicon(None) => Box::new(default_lexicon()),
            Self::Lexicon(Some(path)) => Box::new(LexiconSentiment::load(path)?),
            Self::Subprocess(cmd) => Box::new(SubprocessBlackBox::spawn(cmd, retries)?),
            Self::Http(url) => Box::new(HttpBlackBox::new(url, retries, 4)),
        })
    }
}

impl FromStr for BlackBoxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("black-box spec `{s}`: {msg}"));
        let (scheme, rest) = s.split_once(':').ok_or_else(|| bad("expected <kind>:<target>"))?;
        match scheme {
            "builtin" => {
                let (name, arg) = match rest.split_once(':') {
                    Some((n, a)) => (n, Some(a)),
                    None => (rest, None),
                };
                match (name, arg) {
                    ("constant", Some(p)) => {
                        let p: f64 = p.parse().map_err(|_| bad("constant needs a number"))?;
                        if !(0.0..=1.0).contains(&p) {
                            return Err(bad("constant must be in [0, 1]"));
                        }
                        Ok(Self::Constant(p))
                    }
                    ("constant", None) => Err(bad("constant needs a value, e.g. builtin:constant:0.7")),
                    ("quadratic-logit", arg) => {
                        let seed = arg
                            .map_or(Ok(0), str::parse)
                            .map_err(|_| bad("seed must be an integer"))?;
                        Ok(Self::QuadraticLogit { seed })
                    }
                    ("lexicon", arg) => Ok(Self::Lexicon(arg.map(PathBuf::from))),
                    _ => Err(bad("unknown builtin (constant, quadratic-logit, lexicon)")),
                }
            }
            "subprocess" if !rest.trim().is_empty() => Ok(Self::Subprocess(rest.to_owned())),
            "http" if !rest.is_empty() => {
                let url = if rest.starts_with("//") {
                    format!("http:{rest}")
                } else {
                    rest.to_owned()
                };
                Ok(Self::Http(url))
            }
            _ => Err(bad("kind must be builtin, subprocess or http")),
        }
    }
}

impl fmt::Display for BlackBoxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(p) => write!(f, "builtin:constant:{p}"),
            Self::QuadraticLogit { seed } => write!(f, "builtin:quadratic-logit:{seed}"),
            Self::Lexicon(None) => write!(f, "builtin:lexicon"),
            Self::Lexicon(Some(p)) => write!(f, "builtin:lexicon:{}", p.display()),
            Self::Subprocess(cmd) => write!(f, "subprocess:{cmd}"),
            Self::Http(url) => write!(f, "http:{url}"),
        }
    }
}
