use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::wire::{PredictRequest, PredictResponse};
use super::{with_retries, BlackBox, Probe};
use crate::error::BlackBoxError;

/// Classifier behind `POST <base>/predict`.
pub struct HttpBlackBox {
    url: String,
    agent: ureq::Agent,
    retries: usize,
    parallelism: usize,
    next_id: AtomicU64,
}

impl HttpBlackBox {
    /// `base` may be the server root or the full `/predict` URL.
    pub fn new(base: &str, retries: usize, parallelism: usize) -> Self {
        let trimmed = base.trim_end_matches('/');
        let url = if trimmed.ends_with("/predict") {
            trimmed.to_owned()
        } else {
            format!("{trimmed}/predict")
        };
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        Self {
            url,
            agent,
            retries,
            parallelism: parallelism.max(1),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl BlackBox for HttpBlackBox {
    fn predict(&self, batch: &[Probe<'_>]) -> Result<Vec<f64>, BlackBoxError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let request = PredictRequest::from_instances(id, batch.iter().map(|p| p.instance))
            .map_err(|e| BlackBoxError::Unsupported(e.to_string()))?;
        with_retries(self.retries, |_| {
            let response = match self.agent.post(&self.url).send_json(&request) {
                Ok(r) if r.status() == 200 => r,
                Ok(r) => {
                    return Err(BlackBoxError::Transport {
                        batch: 0,
                        message: format!("{} answered HTTP {}", self.url, r.status()),
                    })
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(BlackBoxError::Transport {
                        batch: 0,
                        message: format!("{} answered HTTP {code}", self.url),
                    })
                }
                Err(e) => {
                    return Err(BlackBoxError::Transport {
                        batch: 0,
                        message: e.to_string(),
                    })
                }
            };
            let body: PredictResponse = response.into_json().map_err(|e| BlackBoxError::Malformed {
                batch: 0,
                message: e.to_string(),
            })?;
            Ok(body.predictions)
        })
    }

    fn max_parallelism(&self) -> usize {
        self.parallelism
    }

    fn describe(&self) -> String {
        format!("http:{}", self.url)
    }
}
