use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::instance::BinaryMask;

/// Distance used inside the proximity kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    L2,
}

impl Metric {
    /// Kernel width used when none is configured.
    pub fn default_sigma(self, d_prime: usize) -> f64 {
        match self {
            Metric::L2 => 0.25 * (d_prime as f64).sqrt(),
            Metric::Cosine => 25.0,
        }
    }

    pub fn distance(self, a: &BinaryMask, b: &BinaryMask) -> f64 {
        match self {
            Metric::L2 => f64::from(a.squared_distance(b)).sqrt(),
            Metric::Cosine => {
                let na = a.count_ones() as f64;
                let nb = b.count_ones() as f64;
                if na == 0.0 || nb == 0.0 {
                    return 1.0;
                }
                (1.0 - f64::from(a.dot(b)) / (na * nb).sqrt()).max(0.0)
            }
        }
    }
}

/// `exp(-D(reference, sample)^2 / sigma^2)`, floored at the smallest
/// positive normal so the weight stays in `(0, 1]` when the exponential
/// underflows.
///
/// An all-zero `sample` under the cosine metric is at distance 1; an
/// all-zero `reference` is rejected.
pub fn proximity(reference: &BinaryMask, sample: &BinaryMask, sigma: f64, metric: Metric) -> Result<f64> {
    if reference.len() != sample.len() {
        return contract(format!(
            "proximity between masks of length {} and {}",
            reference.len(),
            sample.len()
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return contract(format!("proximity sigma must be positive, got {sigma}"));
    }
    if metric == Metric::Cosine && reference.count_ones() == 0 {
        return contract("cosine proximity to an all-zero reference is undefined");
    }
    let d = metric.distance(reference, sample);
    Ok((-(d * d) / (sigma * sigma)).exp().max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(b: &[u8]) -> BinaryMask {
        BinaryMask::from_bits(b.to_vec()).unwrap()
    }

    #[test]
    fn identical_masks_weigh_one() {
        for metric in [Metric::L2, Metric::Cosine] {
            assert_eq!(proximity(&m(&[1, 0, 1]), &m(&[1, 0, 1]), 0.3, metric).unwrap(), 1.0);
        }
    }

    #[test]
    fn wide_kernel_flattens() {
        let r = BinaryMask::ones(64);
        let s = BinaryMask::zeros(64);
        assert!(proximity(&r, &s, 1e6, Metric::L2).unwrap() >= 0.999999);
        assert!(proximity(&r, &s, 1e6, Metric::Cosine).unwrap() >= 0.999999);
    }

    #[test]
    fn l2_hand_value() {
        let w = proximity(&BinaryMask::ones(4), &m(&[1, 1, 0, 0]), 1.0, Metric::L2).unwrap();
        assert!((w - (-2.0f64).exp()).abs() < 1e-15);
        assert!((w - 0.1353).abs() < 1e-4);
    }

    #[test]
    fn underflow_is_floored() {
        let w = proximity(&BinaryMask::ones(5), &BinaryMask::zeros(5), 0.05, Metric::L2).unwrap();
        assert_eq!(w, f64::MIN_POSITIVE);
    }

    #[test]
    fn cosine_rejects_zero_reference() {
        assert!(proximity(&m(&[0, 0]), &m(&[1, 0]), 1.0, Metric::Cosine).is_err());
        assert!(proximity(&m(&[1, 0]), &m(&[1]), 1.0, Metric::L2).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            bits in proptest::collection::vec((0u8..2, 0u8..2), 1..20),
            sigma in 0.05f64..50.0,
        ) {
            let (a, b): (Vec<u8>, Vec<u8>) = bits.into_iter().unzip();
            let (a, b) = (m(&a), m(&b));
            let l2 = proximity(&a, &b, sigma, Metric::L2).unwrap();
            prop_assert_eq!(l2, proximity(&b, &a, sigma, Metric::L2).unwrap());
            prop_assert!(l2 > 0.0 && l2 <= 1.0);
            if a.count_ones() > 0 && b.count_ones() > 0 {
                let c = proximity(&a, &b, sigma, Metric::Cosine).unwrap();
                prop_assert_eq!(c, proximity(&b, &a, sigma, Metric::Cosine).unwrap());
                prop_assert!(c > 0.0 && c <= 1.0);
            }
        }
    }
}
