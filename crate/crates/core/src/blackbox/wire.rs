//! JSON message shapes shared by the subprocess and HTTP adapters.
//!
//! Request: `{"id": n, "kind": "image"|"text", "batch": [...]}` where image
//! items are base64-encoded binary PPM files and text items are token arrays.
//! Response: `{"id": n, "predictions": [...]}`.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{query, BlackBox, Probe};
use crate::error::{contract, Error, Result};
use crate::image::RgbImage;
use crate::instance::{Instance, InstanceKind, Payload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireInstance {
    Image(String),
    Text(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub id: u64,
    pub kind: InstanceKind,
    pub batch: Vec<WireInstance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub predictions: Vec<f64>,
}

impl PredictRequest {
    pub fn from_instances<'a>(id: u64, batch: impl IntoIterator<Item = &'a Instance>) -> Result<Self> {
        let mut kind = None;
        let mut items = Vec::new();
        for inst in batch {
            if kind.is_some_and(|k| k != inst.kind()) {
                return contract("a request batch must not mix images and text");
            }
            kind = Some(inst.kind());
            items.push(match inst.payload() {
                Payload::Image(img) => WireInstance::Image(STANDARD.encode(img.to_ppm())),
                Payload::Text(tokens) => WireInstance::Text(tokens.clone()),
            });
        }
        let Some(kind) = kind else {
            return contract("a request batch must not be empty");
        };
        Ok(Self { id, kind, batch: items })
    }

    pub fn to_instances(&self) -> Result<Vec<Instance>> {
        if self.batch.is_empty() {
            return contract("a request batch must not be empty");
        }
        self.batch
            .iter()
            .enumerate()
            .map(|(i, item)| match (self.kind, item) {
                (InstanceKind::Image, WireInstance::Image(b64)) => {
                    let bytes = STANDARD
                        .decode(b64)
                        .map_err(|e| Error::Parse(format!("batch item {i}: {e}")))?;
                    Ok(Instance::image(format!("{}:{i}", self.id), RgbImage::from_ppm(&bytes)?))
                }
                (InstanceKind::Text, WireInstance::Text(tokens)) => {
                    Ok(Instance::text_unchecked(format!("{}:{i}", self.id), tokens.clone()))
                }
                _ => Err(Error::Parse(format!(
                    "batch item {i} does not match kind {:?}",
                    self.kind
                ))),
            })
            .collect()
    }
}

/// Serves the line protocol on the given streams with an in-process black
/// box: one request per input line, one response per output line, until
/// end of input. Reference implementation for external classifiers.
pub fn serve_ndjson(adapter: &dyn BlackBox, input: impl BufRead, mut output: impl Write) -> Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: PredictRequest = serde_json::from_str(&line)?;
        let instances = request.to_instances()?;
        let probes: Vec<Probe<'_>> = instances.iter().map(Probe::new).collect();
        let predictions = query(adapter, &probes)?;
        let response = PredictResponse {
            id: Some(request.id),
            predictions,
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}
