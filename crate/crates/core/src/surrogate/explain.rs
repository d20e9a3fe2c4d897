use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::ridge::{fit_ridge, LinearModel};
use super::svr::{fit_svr, SvrModel, SvrParams};
use crate::blackbox::BlackBox;
use crate::error::{contract, Result};
use crate::instance::{BinaryMask, HideColor, Instance, InterpretableSpace};
use crate::metrics::{approx_error, r_squared, FidelityReport};
use crate::sampling::{
    build_perturbation_set, GrowthMode, Metric, PerturbationSet, Sampler, SamplingOptions, SizeSampler,
};
use crate::segmentation::build_adjacency;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    #[default]
    Svr,
    #[serde(alias = "linear")]
    Ridge,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Svr => "svr",
            Self::Ridge => "ridge",
        }
    }
}

/// A fitted local surrogate.
#[derive(Clone, Debug, PartialEq)]
pub enum Surrogate {
    Svr(SvrModel),
    Linear(LinearModel),
}

impl Surrogate {
    pub fn predict(&self, mask: &BinaryMask) -> Result<f64> {
        match self {
            Self::Svr(m) => m.predict(mask),
            Self::Linear(m) => m.predict(mask),
        }
    }

    pub fn kind(&self) -> SurrogateKind {
        match self {
            Self::Svr(_) => SurrogateKind::Svr,
            Self::Linear(_) => SurrogateKind::Ridge,
        }
    }

    fn d_prime(&self) -> usize {
        match self {
            Self::Svr(m) => m.d_prime,
            Self::Linear(m) => m.coeffs.len(),
        }
    }
}

/// Drop in the surrogate output when each feature of `reference` is
/// switched off: `g(reference) - g(reference without j)`. Features already
/// off in `reference` get 0. For a linear model this is the coefficient.
pub fn attribute(model: &Surrogate, reference: &BinaryMask) -> Result<Vec<f64>> {
    if reference.len() != model.d_prime() {
        return contract(format!(
            "reference has {} features, model has {}",
            reference.len(),
            model.d_prime()
        ));
    }
    match model {
        Surrogate::Linear(m) => Ok(reference
            .bits()
            .iter()
            .zip(&m.coeffs)
            .map(|(&b, &c)| if b == 1 { c } else { 0.0 })
            .collect()),
        Surrogate::Svr(_) => {
            let g = model.predict(reference)?;
            (0..reference.len())
                .map(|j| {
                    if reference.is_set(j) {
                        Ok(g - model.predict(&reference.with_cleared(j))?)
                    } else {
                        Ok(0.0)
                    }
                })
                .collect()
        }
    }
}

/// Indices of the `k` largest attributions, largest first; ties go to the
/// lower index.
pub fn top_k(attributions: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..attributions.len()).collect();
    idx.sort_by(|&a, &b| {
        attributions[b]
            .partial_cmp(&attributions[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// How image masks are drawn. Text always samples whole groups
/// independently.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Connected,
    Clique,
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub surrogate: SurrogateKind,
    /// `None` is a gaussian kernel with `gamma = 1/d'`.
    pub kernel: Option<KernelSpec>,
    pub c: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub n_samples: usize,
    pub sigma: Option<f64>,
    pub metric: Option<Metric>,
    pub k: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub sizes: SizeSampler,
    pub hide: HideColor,
    pub tol: f64,
    pub max_passes: usize,
    pub batch_size: usize,
    pub parallelism: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            surrogate: SurrogateKind::Svr,
            kernel: None,
            c: 10.0,
            epsilon: 1e-4,
            lambda: 1.0,
            n_samples: 1000,
            sigma: None,
            metric: None,
            k: 5,
            seed: 0,
            sampler: SamplerKind::Connected,
            sizes: SizeSampler::Uniform,
            hide: HideColor::Mean,
            tol: 1e-3,
            max_passes: 10_000,
            batch_size: 64,
            parallelism: 4,
        }
    }
}

impl ExplainConfig {
    pub fn sampling_options(&self) -> SamplingOptions {
        SamplingOptions {
            n_samples: self.n_samples,
            sigma: self.sigma,
            metric: self.metric,
            sizes: self.sizes.clone(),
            seed: self.seed,
            batch_size: self.batch_size,
            parallelism: self.parallelism,
            hide: self.hide,
        }
    }

    pub fn svr_params(&self, d_prime: usize) -> SvrParams {
        SvrParams {
            kernel: self.kernel.unwrap_or_else(|| KernelSpec::default_for(d_prime)),
            c: self.c,
            epsilon: self.epsilon,
            tol: self.tol,
            max_passes: self.max_passes,
        }
    }

    pub fn fit(&self, data: &PerturbationSet) -> Result<Surrogate> {
        Ok(match self.surrogate {
            SurrogateKind::Svr => Surrogate::Svr(fit_svr(data, &self.svr_params(data.d_prime()))?),
            SurrogateKind::Ridge => Surrogate::Linear(fit_ridge(data, self.lambda)?),
        })
    }

    fn resolved(&self, space: &InterpretableSpace) -> ResolvedConfig {
        let d = space.d_prime();
        let kind = space.kind();
        let opts = self.sampling_options();
        let svr = self.surrogate == SurrogateKind::Svr;
        ResolvedConfig {
            kernel: svr.then(|| self.svr_params(d).kernel),
            c: svr.then_some(self.c),
            epsilon: svr.then_some(self.epsilon),
            tol: svr.then_some(self.tol),
            lambda: (!svr).then_some(self.lambda),
            n_samples: self.n_samples,
            sigma: opts.resolved_sigma(kind, d),
            metric: opts.resolved_metric(kind),
            k: self.k,
            sampler: match space {
                InterpretableSpace::ImageSegments(_) => self.sampler,
                InterpretableSpace::TextGroups(_) => SamplerKind::Independent,
            },
            sizes: matches!(space, InterpretableSpace::ImageSegments(_))
                .then(|| self.sizes.clone())
                .filter(|_| self.sampler != SamplerKind::Independent),
            hide: matches!(space, InterpretableSpace::ImageSegments(_)).then_some(self.hide),
        }
    }
}

/// The settings that determined an explanation, with defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub n_samples: usize,
    pub sigma: f64,
    pub metric: Metric,
    pub k: usize,
    pub sampler: SamplerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<SizeSampler>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hide: Option<HideColor>,
}

/// What an interpretable feature stands for in the original input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Feature {
    Segment {
        segment: usize,
        pixels: usize,
    },
    Group {
        group: usize,
        token_indices: Vec<usize>,
        tokens: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub instance_id: String,
    pub surrogate: SurrogateKind,
    pub attributions: Vec<f64>,
    pub top_k: Vec<usize>,
    pub g_at_x: f64,
    pub f_at_x: f64,
    pub err: f64,
    /// `None` when the labels were constant and the fit was not exact.
    pub r_squared: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub config: ResolvedConfig,
    pub features: Vec<Feature>,
    pub fidelity: FidelityReport,
}

impl Explanation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("explanation serializes")
    }
}

/// Samples perturbations around `instance`, fits the configured surrogate
/// and reports attributions and fidelity.
pub fn explain(
    instance: &Instance,
    space: &InterpretableSpace,
    blackbox: &dyn BlackBox,
    config: &ExplainConfig,
) -> Result<Explanation> {
    let data = perturb(instance, space, blackbox, config)?;
    explain_on(&data, instance, space, config)
}

/// The perturbation set `explain` would build for this configuration.
pub fn perturb(
    instance: &Instance,
    space: &InterpretableSpace,
    blackbox: &dyn BlackBox,
    config: &ExplainConfig,
) -> Result<PerturbationSet> {
    let opts = config.sampling_options();
    match space {
        InterpretableSpace::ImageSegments(map) if config.sampler != SamplerKind::Independent => {
            let graph = build_adjacency(map);
            let mode = if config.sampler == SamplerKind::Clique {
                GrowthMode::Clique
            } else {
                GrowthMode::Connected
            };
            build_perturbation_set(instance, space, Sampler::Graph { graph: &graph, mode }, blackbox, &opts)
        }
        _ => build_perturbation_set(instance, space, Sampler::Independent, blackbox, &opts),
    }
}

/// Fits and evaluates the configured surrogate on an existing set.
pub fn explain_on(
    data: &PerturbationSet,
    instance: &Instance,
    space: &InterpretableSpace,
    config: &ExplainConfig,
) -> Result<Explanation> {
    if data.d_prime() != space.d_prime() {
        return contract(format!(
            "perturbation set has {} features, space has {}",
            data.d_prime(),
            space.d_prime()
        ));
    }
    let Some(f_at_x) = data.f_at_instance() else {
        return contract("perturbation set does not contain the explained instance");
    };
    let model = config.fit(data)?;
    let reference = data.instance_mask();
    let g_at_x = model.predict(&reference)?;
    let attributions = attribute(&model, &reference)?;
    let top = top_k(&attributions, config.k);
    let predictions = data
        .masks()
        .iter()
        .map(|m| model.predict(m))
        .collect::<Result<Vec<_>>>()?;
    let err = approx_error(f_at_x, g_at_x);
    let fidelity = r_squared(data.labels(), &predictions)?.with_err(err);

    Ok(Explanation {
        instance_id: instance.id.clone(),
        surrogate: model.kind(),
        attributions,
        top_k: top,
        g_at_x,
        f_at_x,
        err,
        r_squared: fidelity.defined.then_some(fidelity.r_squared),
        n_samples: config.n_samples,
        seed: config.seed,
        config: config.resolved(space),
        features: features(space, instance),
        fidelity,
    })
}

fn features(space: &InterpretableSpace, instance: &Instance) -> Vec<Feature> {
    match space {
        InterpretableSpace::ImageSegments(map) => map
            .segment_sizes()
            .into_iter()
            .enumerate()
            .map(|(segment, pixels)| Feature::Segment { segment, pixels })
            .collect(),
        InterpretableSpace::TextGroups(groups) => {
            let tokens = instance.as_tokens().unwrap_or_default();
            groups
                .groups()
                .iter()
                .enumerate()
                .map(|(group, idx)| Feature::Group {
                    group,
                    token_indices: idx.clone(),
                    tokens: idx.iter().filter_map(|&t| tokens.get(t).cloned()).collect(),
                })
                .collect()
        }
    }
}
