//! ε-insensitive support vector regression solved by sequential minimal
//! optimization on the dual.
//!
//! The dual is posed over 2N variables `a = (α, α̂)` with sign vector
//! `y = (+1.., -1..)`:
//!
//! ```text
//! min  ½ aᵀQa + pᵀa    s.t.  yᵀa = 0,  0 ≤ a_t ≤ C_i
//! Q_ts = y_t y_s K(z_i, z_j),   p = (ε - f, ε + f)
//! ```
//!
//! and the model is `g(z) = Σ β_i K(z_i, z) + b` with `β = α - α̂`.
//! The box of sample `i` is `C_i = C·π_i`, so proximity acts as a sample
//! weight on the slack penalty. `C` corresponds to `1/(2λ)` when the primal
//! is written with a `λ‖w‖²` regularizer.

use serde::{Deserialize, Serialize};

use super::kernel::{kernel_eval, KernelSpec};
use crate::error::{contract, Error, Result};
use crate::instance::BinaryMask;
use crate::sampling::PerturbationSet;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    /// Iteration cap, in units of N pair updates.
    pub max_passes: usize,
}

impl SvrParams {
    pub fn new(kernel: KernelSpec, c: f64, epsilon: f64) -> Self {
        Self {
            kernel,
            c,
            epsilon,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }

    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return contract(format!("C must be positive and finite, got {}", self.c));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return contract(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return contract(format!("tolerance must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    /// `β_i` for every retained sample; zero coefficients are dropped.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub support_masks: Vec<BinaryMask>,
    pub kernel: KernelSpec,
    pub epsilon: f64,
    pub c: f64,
    pub d_prime: usize,
    pub iterations: usize,
}

impl SvrModel {
    pub fn predict(&self, mask: &BinaryMask) -> Result<f64> {
        svr_predict(self, mask)
    }

    pub fn n_support(&self) -> usize {
        self.dual_coeffs.len()
    }
}

/// Full solver output, including the coefficients of non-support samples.
#[derive(Clone, Debug)]
pub struct SvrFit {
    pub model: SvrModel,
    /// `β_i` for every training sample, in training order.
    pub beta: Vec<f64>,
    /// Per-sample box bounds `C_i`.
    pub bounds: Vec<f64>,
}

/// `Σ β_i K(z_i, mask) + b`.
pub fn svr_predict(model: &SvrModel, mask: &BinaryMask) -> Result<f64> {
    if mask.len() != model.d_prime {
        return contract(format!(
            "mask has {} features, model was trained on {}",
            mask.len(),
            model.d_prime
        ));
    }
    let sum: f64 = model
        .dual_coeffs
        .iter()
        .zip(&model.support_masks)
        .map(|(b, s)| b * kernel_eval(&model.kernel, s, mask))
        .sum();
    Ok(sum + model.bias)
}

/// `½ βᵀKβ + ε Σ|β_i| - Σ f_i β_i` for coefficients over the given masks.
pub fn dual_objective(kernel: &KernelSpec, masks: &[BinaryMask], labels: &[f64], epsilon: f64, beta: &[f64]) -> f64 {
    let mut quad = 0.0;
    for (i, bi) in beta.iter().enumerate() {
        if *bi == 0.0 {
            continue;
        }
        for (j, bj) in beta.iter().enumerate() {
            if *bj != 0.0 {
                quad += bi * bj * kernel_eval(kernel, &masks[i], &masks[j]);
            }
        }
    }
    let lin: f64 = beta.iter().zip(labels).map(|(b, f)| epsilon * b.abs() - f * b).sum();
    0.5 * quad + lin
}

pub fn fit_svr(data: &PerturbationSet, params: &SvrParams) -> Result<SvrModel> {
    fit_svr_full(data, params).map(|f| f.model)
}

pub fn fit_svr_full(data: &PerturbationSet, params: &SvrParams) -> Result<SvrFit> {
    params.validate()?;
    let n = data.len();
    if n < 2 {
        return contract(format!("SVR needs at least 2 samples, got {n}"));
    }
    let labels = data.labels();
    let masks = data.masks();
    let bounds: Vec<f64> = data.weights().iter().map(|w| params.c * w).collect();

    let first = labels[0];
    if labels.iter().all(|&f| f == first) {
        return Ok(SvrFit {
            model: SvrModel {
                dual_coeffs: Vec::new(),
                bias: first,
                support_masks: Vec::new(),
                kernel: params.kernel,
                epsilon: params.epsilon,
                c: params.c,
                d_prime: data.d_prime(),
                iterations: 0,
            },
            beta: vec![0.0; n],
            bounds,
        });
    }

    let mut kmat = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = kernel_eval(&params.kernel, &masks[i], &masks[j]);
            kmat[i * n + j] = k;
            kmat[j * n + i] = k;
        }
    }

    let mut solver = Smo::new(&kmat, labels, &bounds, params.epsilon);
    let cap = params.max_passes.saturating_mul(n);
    let iterations = solver.solve(params.tol, cap)?;
    let bias = -solver.rho();

    let beta: Vec<f64> = (0..n).map(|i| solver.alpha[i] - solver.alpha[i + n]).collect();
    let (dual_coeffs, support_masks) = beta
        .iter()
        .zip(masks)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, m)| (*b, m.clone()))
        .unzip();
    Ok(SvrFit {
        model: SvrModel {
            dual_coeffs,
            bias,
            support_masks,
            kernel: params.kernel,
            epsilon: params.epsilon,
            c: params.c,
            d_prime: data.d_prime(),
            iterations,
        },
        beta,
        bounds,
    })
}

struct Smo<'a> {
    n: usize,
    kmat: &'a [f64],
    bounds: &'a [f64],
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(kmat: &'a [f64], labels: &[f64], bounds: &'a [f64], epsilon: f64) -> Self {
        let n = labels.len();
        let grad = labels
            .iter()
            .map(|f| epsilon - f)
            .chain(labels.iter().map(|f| epsilon + f))
            .collect();
        Self {
            n,
            kmat,
            bounds,
            alpha: vec![0.0; 2 * n],
            grad,
        }
    }

    fn y(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    fn bound(&self, t: usize) -> f64 {
        self.bounds[t % self.n]
    }

    /// `Q_ts` without the sign: `K(z_{t mod n}, z_{s mod n})`.
    fn k(&self, t: usize, s: usize) -> f64 {
        self.kmat[(t % self.n) * self.n + s % self.n]
    }

    fn in_up(&self, t: usize) -> bool {
        if t < self.n {
            self.alpha[t] < self.bound(t)
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if t < self.n {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.bound(t)
        }
    }

    /// Maximal violating pair and its violation `m - M`.
    fn select(&self) -> (usize, usize, f64) {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..2 * self.n {
            let v = -self.y(t) * self.grad[t];
            if self.in_up(t) && v > gmax {
                gmax = v;
                i = t;
            }
            if self.in_low(t) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        (i, j, gmax - gmin)
    }

    fn solve(&mut self, tol: f64, cap: usize) -> Result<usize> {
        let mut iter = 0;
        loop {
            let (i, j, violation) = self.select();
            if i == usize::MAX || j == usize::MAX || violation < tol {
                return Ok(iter);
            }
            if iter >= cap {
                return Err(Error::NotConverged {
                    iterations: iter,
                    max_violation: violation,
                });
            }
            self.update_pair(i, j);
            iter += 1;
        }
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let (yi, yj) = (self.y(i), self.y(j));
        let (ci, cj) = (self.bound(i), self.bound(j));
        let kii = self.k(i, i);
        let kjj = self.k(j, j);
        let kij = self.k(i, j);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if yi != yj {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let di = ai - old_i;
        let dj = aj - old_j;
        let n = self.n;
        let row_i = &self.kmat[(i % n) * n..(i % n + 1) * n];
        let row_j = &self.kmat[(j % n) * n..(j % n + 1) * n];
        // G_t += Q_ti Δα_i + Q_tj Δα_j with Q_ts = y_t y_s K
        let si = yi * di;
        let sj = yj * dj;
        for s in 0..n {
            let delta = row_i[s] * si + row_j[s] * sj;
            self.grad[s] += delta;
            self.grad[s + n] -= delta;
        }
    }

    /// Offset `ρ` with `b = -ρ`: the mean of `y_t G_t` over free
    /// variables, or the midpoint of the feasible interval if none is free.
    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut sum_free = 0.0;
        let mut n_free = 0usize;
        for t in 0..2 * self.n {
            let y = self.y(t);
            let yg = y * self.grad[t];
            if self.alpha[t] >= self.bound(t) {
                if y < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.alpha[t] <= 0.0 {
                if y > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}
