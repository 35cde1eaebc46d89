//! Linear projection heads producing (mean, variance) pairs.
//!
//! `mean = x W_M` and `variance_i = softplus_beta((x W_S)_i)`. The softplus
//! keeps every variance strictly positive, approaches zero smoothly from
//! above for very negative activations, and behaves like the identity for
//! large ones, so the KL arithmetic downstream never sees a zero or a blown
//! exponent from the head itself. Projections carry no bias terms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianEmbedding;

/// Toy encoder weights: one mean projection, one variance projection and the
/// softplus shape parameter. Matrices are row-major `feature_dim x k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub feature_dim: usize,
    pub k: usize,
    pub w_mean: Vec<f64>,
    pub w_var: Vec<f64>,
    pub beta: f64,
}

impl EncoderParams {
    /// Zero-initialized parameters.
    pub fn zeros(feature_dim: usize, k: usize, beta: f64) -> Result<Self> {
        let p = EncoderParams {
            feature_dim,
            k,
            w_mean: vec![0.0; feature_dim * k],
            w_var: vec![0.0; feature_dim * k],
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Gaussian random initialization with the given scale.
    pub fn random_init(
        feature_dim: usize,
        k: usize,
        beta: f64,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut p = EncoderParams::zeros(feature_dim, k, beta)?;
        for w in p.w_mean.iter_mut().chain(p.w_var.iter_mut()) {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *w = scale * z;
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.k == 0 {
            return Err(Error::ZeroDimension);
        }
        if self.w_mean.len() != self.feature_dim * self.k {
            return Err(Error::LengthMismatch {
                left: self.w_mean.len(),
                right: self.feature_dim * self.k,
            });
        }
        if self.w_var.len() != self.feature_dim * self.k {
            return Err(Error::LengthMismatch {
                left: self.w_var.len(),
                right: self.feature_dim * self.k,
            });
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if let Some(i) = self
            .w_mean
            .iter()
            .chain(&self.w_var)
            .position(|w| !w.is_finite())
        {
            return Err(Error::NonFinite {
                context: format!("encoder weight {i}"),
            });
        }
        Ok(())
    }

    /// `x W` for a row-major `feature_dim x k` matrix.
    pub(crate) fn project(&self, weights: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (j, &xj) in x.iter().enumerate() {
            let row = &weights[j * self.k..(j + 1) * self.k];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += xj * w;
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("params serialize");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let p: EncoderParams = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }
}

/// Softplus with shape `beta`: `(1/beta) * ln(1 + exp(beta * t))`.
///
/// Evaluated on the stable branch for positive arguments, so large inputs
/// return `t + (1/beta) * ln1p(exp(-beta t))` instead of overflowing.
pub fn softplus(beta: f64, t: f64) -> f64 {
    let bt = beta * t;
    if bt > 0.0 {
        t + (-bt).exp().ln_1p() / beta
    } else {
        bt.exp().ln_1p() / beta
    }
}

/// Derivative of [`softplus`] with respect to `t`: the logistic `s(beta t)`.
pub fn softplus_grad(beta: f64, t: f64) -> f64 {
    let bt = beta * t;
    if bt > 0.0 {
        1.0 / (1.0 + (-bt).exp())
    } else {
        let e = bt.exp();
        e / (1.0 + e)
    }
}

/// Encode a feature vector into a Gaussian embedding.
pub fn encode(params: &EncoderParams, id: &str, features: &[f64]) -> Result<GaussianEmbedding> {
    if features.len() != params.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: params.feature_dim,
            actual: features.len(),
        });
    }
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("feature {i} of {id}"),
        });
    }
    let mean = params.project(&params.w_mean, features);
    let pre_var = params.project(&params.w_var, features);
    if let Some(i) = mean.iter().chain(&pre_var).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("activation {i} of {id}"),
        });
    }
    let variance: Vec<f64> = pre_var.iter().map(|&a| softplus(params.beta, a)).collect();
    GaussianEmbedding::new(id, mean, variance)
}

/// Pre-softplus variance activations, needed by the backward pass.
pub(crate) fn variance_activations(params: &EncoderParams, features: &[f64]) -> Vec<f64> {
    params.project(&params.w_var, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softplus_at_zero_is_ln2_over_beta() {
        assert_relative_eq!(softplus(1.0, 0.0), 2.0f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(softplus(1.0, 0.0), 0.693147, epsilon = 1e-6);
        for beta in [0.5, 2.5, 5.0, 7.5, 10.0] {
            assert_relative_eq!(softplus(beta, 0.0), 2.0f64.ln() / beta, epsilon = 1e-15);
        }
    }

    #[test]
    fn softplus_approaches_identity_for_large_inputs() {
        let gap = softplus(1.0, 50.0) - 50.0;
        assert!(gap < 1e-20, "gap = {gap}");
        assert!(gap > 0.0);
    }

    #[test]
    fn softplus_stays_positive_deep_in_the_left_tail() {
        let v = softplus(1.0, -100.0);
        assert!(v > 0.0);
        assert!(v < 1e-40);
        assert_relative_eq!(v, (-100.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn softplus_is_monotone_for_the_beta_grid() {
        for beta in [0.5, 1.0, 2.5, 5.0, 7.5, 10.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..200 {
                let t = -10.0 + 0.1 * i as f64;
                let v = softplus(beta, t);
                assert!(v > prev, "not monotone at beta={beta} t={t}");
                prev = v;
            }
        }
    }

    #[test]
    fn softplus_gap_to_identity_shrinks_as_beta_grows() {
        // At any fixed positive t the curve hugs y = x more tightly for
        // larger beta.
        let t = 1.0;
        let gaps: Vec<f64> = [0.5, 1.0, 2.5, 5.0, 7.5, 10.0]
            .iter()
            .map(|&b| softplus(b, t) - t)
            .collect();
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "gaps not decreasing: {gaps:?}");
        }
    }

    #[test]
    fn softplus_grad_is_the_logistic() {
        for (beta, t) in [(1.0, 0.0), (2.5, 1.3), (0.5, -4.0)] {
            let h = 1e-6;
            let fd = (softplus(beta, t + h) - softplus(beta, t - h)) / (2.0 * h);
            assert_relative_eq!(softplus_grad(beta, t), fd, epsilon = 1e-8);
        }
        assert_relative_eq!(softplus_grad(1.0, 0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn encode_produces_valid_embeddings() {
        let params = EncoderParams {
            feature_dim: 3,
            k: 2,
            w_mean: vec![1.0, 0.0, 0.0, 1.0, 1.0, -1.0],
            w_var: vec![0.0; 6],
            beta: 1.0,
        };
        let e = encode(&params, "doc", &[2.0, -1.0, 0.5]).unwrap();
        assert_eq!(e.id(), "doc");
        assert_eq!(e.k(), 2);
        // mean = x W_M: [2*1 + -1*0 + 0.5*1, 2*0 + -1*1 + 0.5*-1]
        assert_relative_eq!(e.mean()[0], 2.5, epsilon = 1e-12);
        assert_relative_eq!(e.mean()[1], -1.5, epsilon = 1e-12);
        // zero variance weights: softplus(0) = ln 2 everywhere
        for &v in e.variance() {
            assert_relative_eq!(v, 2.0f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn encode_rejects_bad_inputs() {
        let params = EncoderParams::zeros(2, 2, 1.0).unwrap();
        assert!(matches!(
            encode(&params, "x", &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            encode(&params, "x", &[1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn params_validate_and_round_trip() {
        assert!(EncoderParams::zeros(0, 2, 1.0).is_err());
        assert!(EncoderParams::zeros(2, 2, -1.0).is_err());
        let p = EncoderParams::zeros(2, 3, 2.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        p.save(&path).unwrap();
        assert_eq!(EncoderParams::load(&path).unwrap(), p);
    }
}
