//! Access to the classifier being explained.
//!
//! Every adapter scores a batch of [`Probe`]s and returns one class
//! probability per probe, in batch order. Built-in classifiers run
//! in-process; external ones are reached over a line-delimited JSON
//! subprocess protocol or an HTTP endpoint sharing the same message shapes.

mod builtin;
mod http;
mod spec;
mod subprocess;
mod wire;

pub use builtin::{default_lexicon, sigmoid, Constant, LexiconSentiment, QuadraticLogit, QuadraticScales};
pub use http::HttpBlackBox;
pub use spec::BlackBoxSpec;
pub use subprocess::SubprocessBlackBox;
pub use wire::{serve_ndjson, PredictRequest, PredictResponse, WireInstance};

use crate::error::BlackBoxError;
use crate::instance::{BinaryMask, Instance};

/// One input to score: the (possibly perturbed) instance, and the
/// interpretable mask it was recovered from when there is one.
#[derive(Clone, Copy, Debug)]
pub struct Probe<'a> {
    pub instance: &'a Instance,
    pub mask: Option<&'a BinaryMask>,
}

impl<'a> Probe<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Self { instance, mask: None }
    }

    pub fn with_mask(instance: &'a Instance, mask: &'a BinaryMask) -> Self {
        Self {
            instance,
            mask: Some(mask),
        }
    }
}

pub trait BlackBox: Send + Sync {
    /// Raw scores for `batch`. Callers should go through [`query`], which
    /// validates length and range.
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError>;

    /// How many `predict` calls may run concurrently. Adapters that wrap a
    /// single stateful channel return 1.
    fn max_parallelism(&self) -> usize {
        1
    }

    fn describe(&self) -> String;
}

/// Scores a non-empty batch and checks that predictions are aligned with
/// it and are finite probabilities.
pub fn query(adapter: &dyn BlackBox, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
    query_batch(adapter, batch, 0)
}

pub(crate) fn query_batch(
    adapter: &dyn BlackBox,
    batch: &[Probe<'_>],
    batch_index: usize,
) -> Result<Vec<f64>, BlackBoxError> {
    if batch.is_empty() {
        return Err(BlackBoxError::Unsupported("empty batch".into()));
    }
    let preds = adapter.predict(batch).map_err(|e| e.with_batch(batch_index))?;
    if preds.len() != batch.len() {
        return Err(BlackBoxError::LengthMismatch {
            batch: batch_index,
            expected: batch.len(),
            got: preds.len(),
        });
    }
    if let Some((item, &value)) = preds
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
    {
        return Err(BlackBoxError::OutOfRange {
            batch: batch_index,
            item,
            value,
        });
    }
    Ok(preds)
}

/// Runs `op` once plus up to `retries` more times while it fails with a
/// transient error.
pub(crate) fn with_retries<T>(
    retries: usize,
    mut op: impl FnMut(usize) -> Result<T, BlackBoxError>,
) -> Result<T, BlackBoxError> {
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Err(e) if e.is_transient() && attempt < retries => {
                log::info!("black box attempt {} failed, retrying: {e}", attempt + 1);
                attempt += 1;
            }
            other => return other,
        }
    }
}
