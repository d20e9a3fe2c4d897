//! Small in-process classifiers used for demos and tests.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{BlackBox, Probe};
use crate::error::{contract, BlackBoxError, Error, Result};
use crate::instance::Payload;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Predicts the same probability for every input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(f64);

impl Constant {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return contract(format!("constant prediction {p} is not in [0, 1]"));
        }
        Ok(Self(p))
    }
}

impl BlackBox for Constant {
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
        Ok(vec![self.0; batch.len()])
    }

    fn max_parallelism(&self) -> usize {
        usize::MAX
    }

    fn describe(&self) -> String {
        format!("builtin:constant:{}", self.0)
    }
}

/// `sigmoid(m^T Q m + q^T m + b)` over the interpretable mask `m`.
///
/// Scores the mask a probe was recovered from, so it stands in for any
/// classifier whose response to segment visibility has pairwise
/// interactions.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticLogit {
    d: usize,
    /// Row-major, symmetric.
    quad: Vec<f64>,
    linear: Vec<f64>,
    bias: f64,
}

/// Standard deviations of the randomly drawn quadratic-logit parameters.
/// Interaction entries are drawn with sd `quad/d'` and linear terms with
/// sd `linear/sqrt(d')`, so the logit stays O(1) for any `d'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticScales {
    pub quad: f64,
    pub linear: f64,
    pub bias: f64,
}

impl Default for QuadraticScales {
    fn default() -> Self {
        Self {
            quad: 2.0,
            linear: 0.5,
            bias: 0.5,
        }
    }
}

impl QuadraticLogit {
    pub fn new(quad: Vec<f64>, linear: Vec<f64>, bias: f64) -> Result<Self> {
        let d = linear.len();
        if d == 0 {
            return contract("quadratic-logit needs at least one feature");
        }
        if quad.len() != d * d {
            return contract(format!("Q has {} entries, expected {}", quad.len(), d * d));
        }
        for i in 0..d {
            for j in 0..i {
                if quad[i * d + j] != quad[j * d + i] {
                    return contract(format!("Q is not symmetric at ({i}, {j})"));
                }
            }
        }
        if !quad.iter().chain(&linear).chain([&bias]).all(|v| v.is_finite()) {
            return contract("quadratic-logit parameters must be finite");
        }
        Ok(Self { d, quad, linear, bias })
    }

    /// Deterministic parameters drawn from a generator seeded with `seed`.
    pub fn from_seed(d_prime: usize, seed: u64) -> Result<Self> {
        Self::from_seed_with(d_prime, seed, QuadraticScales::default())
    }

    pub fn from_seed_with(d_prime: usize, seed: u64, scales: QuadraticScales) -> Result<Self> {
        if d_prime == 0 {
            return contract("quadratic-logit needs at least one feature");
        }
        let d = d_prime;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q_dist = Normal::new(0.0, scales.quad / d as f64).expect("valid sd");
        let l_dist = Normal::new(0.0, scales.linear / (d as f64).sqrt()).expect("valid sd");
        let b_dist = Normal::new(0.0, scales.bias).expect("valid sd");
        let mut quad = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = q_dist.sample(&mut rng);
                quad[i * d + j] = v;
                quad[j * d + i] = v;
            }
        }
        let linear = (0..d).map(|_| l_dist.sample(&mut rng)).collect();
        let bias = b_dist.sample(&mut rng);
        Self::new(quad, linear, bias)
    }

    pub fn d_prime(&self) -> usize {
        self.d
    }

    pub fn quad(&self) -> &[f64] {
        &self.quad
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn logit(&self, bits: &[u8]) -> f64 {
        let mut z = self.bias;
        for (i, &mi) in bits.iter().enumerate() {
            if mi == 0 {
                continue;
            }
            z += self.linear[i];
            let row = &self.quad[i * self.d..(i + 1) * self.d];
            for (j, &mj) in bits.iter().enumerate() {
                if mj == 1 {
                    z += row[j];
                }
            }
        }
        z
    }
}

impl BlackBox for QuadraticLogit {
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
        batch
            .iter()
            .map(|p| match p.mask {
                Some(m) if m.len() == self.d => Ok(sigmoid(self.logit(m.bits()))),
                Some(m) => Err(BlackBoxError::Unsupported(format!(
                    "quadratic-logit built for {} features got a {}-bit mask",
                    self.d,
                    m.len()
                ))),
                None => Err(BlackBoxError::Unsupported(
                    "quadratic-logit scores interpretable masks; none was supplied".into(),
                )),
            })
            .collect()
    }

    fn max_parallelism(&self) -> usize {
        usize::MAX
    }

    fn describe(&self) -> String {
        format!("builtin:quadratic-logit(d'={})", self.d)
    }
}

/// `sigmoid(bias + sum of per-token weights)`, counting repeated tokens
/// each time. Lookup is case-insensitive; unknown tokens weigh 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LexiconSentiment {
    weights: BTreeMap<String, f64>,
    bias: f64,
}

impl LexiconSentiment {
    pub fn new(weights: BTreeMap<String, f64>, bias: f64) -> Self {
        let weights = weights.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        Self { weights, bias }
    }

    /// Reads a JSON object mapping words to weights.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let weights: BTreeMap<String, f64> =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(Self::new(weights, 0.0))
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.weights.get(&token.to_lowercase()).copied().unwrap_or(0.0)
    }

    pub fn score(&self, tokens: &[String]) -> f64 {
        sigmoid(self.bias + tokens.iter().map(|t| self.weight(t)).sum::<f64>())
    }
}

/// A small English polarity lexicon.
pub fn default_lexicon() -> LexiconSentiment {
    let entries = [
        ("good", 1.0),
        ("great", 1.5),
        ("excellent", 2.0),
        ("love", 1.8),
        ("wonderful", 1.7),
        ("nice", 0.8),
        ("happy", 1.2),
        ("best", 1.6),
        ("enjoyed", 1.1),
        ("delicious", 1.4),
        ("bad", -1.0),
        ("poor", -1.2),
        ("terrible", -2.0),
        ("awful", -1.9),
        ("hate", -1.8),
        ("worst", -1.7),
        ("boring", -1.1),
        ("disappointing", -1.5),
        ("rude", -1.3),
        ("not", -0.6),
    ];
    LexiconSentiment::new(entries.iter().map(|&(w, v)| (w.to_string(), v)).collect(), 0.0)
}

impl BlackBox for LexiconSentiment {
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
        batch
            .iter()
            .map(|p| match p.instance.payload() {
                Payload::Text(tokens) => Ok(self.score(tokens)),
                Payload::Image(_) => Err(BlackBoxError::Unsupported("lexicon sentiment scores text only".into())),
            })
            .collect()
    }

    fn max_parallelism(&self) -> usize {
        usize::MAX
    }

    fn describe(&self) -> String {
        format!("builtin:lexicon({} words)", self.weights.len())
    }
}
