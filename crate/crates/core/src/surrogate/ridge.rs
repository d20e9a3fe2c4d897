use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::instance::BinaryMask;
use crate::sampling::PerturbationSet;

/// `g(z) = θ·z + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coeffs: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl LinearModel {
    pub fn predict(&self, mask: &BinaryMask) -> Result<f64> {
        if mask.len() != self.coeffs.len() {
            return contract(format!(
                "mask has {} features, model has {}",
                mask.len(),
                self.coeffs.len()
            ));
        }
        Ok(self.intercept + mask.active().map(|j| self.coeffs[j]).sum::<f64>())
    }
}

/// Minimizes `Σ π_i (f_i - θ·z_i - b)² + λ‖θ‖²`; the intercept is not
/// penalized.
pub fn fit_ridge(data: &PerturbationSet, lambda: f64) -> Result<LinearModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return contract(format!("lambda must be non-negative, got {lambda}"));
    }
    let d = data.d_prime();
    let labels = data.labels();
    let first = labels[0];
    if labels.iter().all(|&f| f == first) {
        return Ok(LinearModel {
            coeffs: vec![0.0; d],
            intercept: first,
            lambda,
        });
    }

    // columns 0..d are features, column d is the intercept
    let p = d + 1;
    let mut ata = DMatrix::<f64>::zeros(p, p);
    let mut aty = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for ((mask, &f), &w) in data.masks().iter().zip(labels).zip(data.weights()) {
        for (r, &b) in row.iter_mut().zip(mask.bits()) {
            *r = f64::from(b);
        }
        row[d] = 1.0;
        for a in 0..p {
            if row[a] == 0.0 {
                continue;
            }
            aty[a] += w * f;
            for b in 0..p {
                if row[b] != 0.0 {
                    ata[(a, b)] += w;
                }
            }
        }
    }
    for j in 0..d {
        ata[(j, j)] += lambda;
    }

    if lambda == 0.0 {
        let sv = ata.singular_values();
        let max = sv.max();
        if sv.min() <= max * 1e-12 {
            return Err(Error::Singular);
        }
    }
    let solution = match ata.clone().cholesky() {
        Some(ch) => ch.solve(&aty),
        None if lambda > 0.0 => ata.lu().solve(&aty).ok_or(Error::Singular)?,
        None => return Err(Error::Singular),
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(LinearModel {
        coeffs: solution.as_slice()[..d].to_vec(),
        intercept: solution[d],
        lambda,
    })
}
