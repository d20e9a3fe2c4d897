//! Local surrogates fitted to a perturbation set: kernel ε-SVR and the
//! weighted ridge baseline, plus toggle attributions and the end-to-end
//! explanation pipeline.

mod explain;
mod kernel;
mod ridge;
mod svr;

pub use explain::{
    attribute, explain, explain_on, perturb, top_k, ExplainConfig, Explanation, Feature, ResolvedConfig, SamplerKind,
    Surrogate, SurrogateKind,
};
pub use kernel::{kernel_eval, KernelSpec};
pub use ridge::{fit_ridge, LinearModel};
pub use svr::{dual_objective, fit_svr, fit_svr_full, svr_predict, SvrFit, SvrModel, SvrParams};
