//! Perturbation sampling: which interpretable features to switch off, how
//! the black box responds, and how close each perturbation is to the
//! explained instance.

mod graph;
mod proximity;
mod text;

use std::thread;

pub use graph::{sample_connected, GrowthMode, SizeSampler};
pub use proximity::{proximity, Metric};
pub use text::{
    group_tokens, sample_groups, sample_independent, DependencyFile, DependencyGroups, DependencyProvider,
    WindowGrouper,
};

use serde::{Deserialize, Serialize};

use crate::blackbox::{query_batch, BlackBox, Probe};
use crate::error::{contract, Error, Result};
use crate::instance::{BinaryMask, HideColor, Instance, InstanceKind, InterpretableSpace};
use crate::segmentation::SegmentGraph;

/// Sampled masks with black-box labels and proximity weights. The last
/// entry is always the unperturbed instance (all-ones mask).
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSet {
    masks: Vec<BinaryMask>,
    labels: Vec<f64>,
    weights: Vec<f64>,
}

impl PerturbationSet {
    pub fn new(masks: Vec<BinaryMask>, labels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if masks.is_empty() {
            return contract("a perturbation set needs at least one sample");
        }
        if masks.len() != labels.len() || masks.len() != weights.len() {
            return contract(format!(
                "perturbation set lengths differ: {} masks, {} labels, {} weights",
                masks.len(),
                labels.len(),
                weights.len()
            ));
        }
        let d = masks[0].len();
        if let Some(i) = masks.iter().position(|m| m.len() != d) {
            return contract(format!("mask {i} has length {} but mask 0 has {d}", masks[i].len()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return contract(format!("weight {i} is {} (must be positive)", weights[i]));
        }
        if let Some(i) = labels.iter().position(|l| !l.is_finite()) {
            return contract(format!("label {i} is not finite"));
        }
        Ok(Self { masks, labels, weights })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn d_prime(&self) -> usize {
        self.masks[0].len()
    }

    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn instance_mask(&self) -> BinaryMask {
        BinaryMask::ones(self.d_prime())
    }

    /// Black-box output at the explained instance. Falls back to searching
    /// for the all-ones mask if the set was assembled by hand.
    pub fn f_at_instance(&self) -> Option<f64> {
        let ones = self.instance_mask();
        self.masks.iter().rposition(|m| *m == ones).map(|i| self.labels[i])
    }
}

/// Which masks to draw.
#[derive(Clone, Copy, Debug)]
pub enum Sampler<'a> {
    /// Grow active sets over the segment graph.
    Graph { graph: &'a SegmentGraph, mode: GrowthMode },
    /// Independent fair bit per feature (per group for text).
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub n_samples: usize,
    /// Proximity kernel width; `None` uses the metric's default for `d'`.
    pub sigma: Option<f64>,
    /// `None` picks L2 for images and cosine for text.
    pub metric: Option<Metric>,
    pub sizes: SizeSampler,
    pub seed: u64,
    pub batch_size: usize,
    pub parallelism: usize,
    pub hide: HideColor,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            sigma: None,
            metric: None,
            sizes: SizeSampler::Uniform,
            seed: 0,
            batch_size: 64,
            parallelism: 4,
            hide: HideColor::Mean,
        }
    }
}

impl SamplingOptions {
    pub fn resolved_metric(&self, kind: InstanceKind) -> Metric {
        self.metric.unwrap_or(match kind {
            InstanceKind::Image => Metric::L2,
            InstanceKind::Text => Metric::Cosine,
        })
    }

    pub fn resolved_sigma(&self, kind: InstanceKind, d_prime: usize) -> f64 {
        self.sigma
            .unwrap_or_else(|| self.resolved_metric(kind).default_sigma(d_prime))
    }
}

/// Draws masks, recovers and scores the perturbed instances in batches,
/// and weights each sample by proximity to the all-ones mask. The all-ones
/// mask is appended last with the black-box output at the instance itself.
pub fn build_perturbation_set(
    instance: &Instance,
    space: &InterpretableSpace,
    sampler: Sampler<'_>,
    blackbox: &dyn BlackBox,
    opts: &SamplingOptions,
) -> Result<PerturbationSet> {
    space.check_instance(instance)?;
    let d = space.d_prime();
    if d == 0 {
        return contract("interpretable space has no features");
    }
    if opts.n_samples == 0 {
        return contract("n_samples must be at least 1");
    }
    if opts.batch_size == 0 {
        return contract("batch_size must be at least 1");
    }

    let mut masks = match sampler {
        Sampler::Graph { graph, mode } => {
            if graph.n_vertices() != d {
                return contract(format!(
                    "graph has {} vertices but the space has {d} features",
                    graph.n_vertices()
                ));
            }
            sample_connected(graph, opts.n_samples, &opts.sizes, opts.seed, mode)?
        }
        Sampler::Independent => sample_independent(d, opts.n_samples, opts.seed),
    };
    let reference = BinaryMask::ones(d);
    masks.push(reference.clone());

    let labels = score_masks(instance, space, &masks, blackbox, opts)?;

    let kind = space.kind();
    let metric = opts.resolved_metric(kind);
    let sigma = opts.resolved_sigma(kind, d);
    let weights = masks
        .iter()
        .map(|m| proximity(&reference, m, sigma, metric))
        .collect::<Result<Vec<_>>>()?;

    PerturbationSet::new(masks, labels, weights)
}

fn score_masks(
    instance: &Instance,
    space: &InterpretableSpace,
    masks: &[BinaryMask],
    blackbox: &dyn BlackBox,
    opts: &SamplingOptions,
) -> Result<Vec<f64>> {
    let batches: Vec<&[BinaryMask]> = masks.chunks(opts.batch_size).collect();
    let run = |index: usize| -> Result<Vec<f64>> {
        let recovered = batches[index]
            .iter()
            .map(|m| space.recover(m, instance, opts.hide))
            .collect::<Result<Vec<_>>>()?;
        let probes: Vec<Probe<'_>> = recovered
            .iter()
            .zip(batches[index])
            .map(|(inst, m)| Probe::with_mask(inst, m))
            .collect();
        query_batch(blackbox, &probes, index).map_err(Error::from)
    };

    let workers = opts
        .parallelism
        .min(blackbox.max_parallelism())
        .min(batches.len())
        .max(1);
    let results: Vec<Result<Vec<f64>>> = if workers == 1 {
        (0..batches.len()).map(run).collect()
    } else {
        // batch i goes to worker i % workers; results are put back in batch order
        let mut slots: Vec<Option<Result<Vec<f64>>>> = (0..batches.len()).map(|_| None).collect();
        thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run = &run;
                    let n = batches.len();
                    scope.spawn(move || (w..n).step_by(workers).map(|i| (i, run(i))).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("black-box worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every batch scored")).collect()
    };

    let mut labels = Vec::with_capacity(masks.len());
    for r in results {
        labels.extend(r?);
    }
    Ok(labels)
}
