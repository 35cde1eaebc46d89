//! One SGD step through encode and the KL rank score.
//!
//! Scores are `y_j = rank_score(encode(x_q), encode(x_dj))` with the encoder
//! shared between the query and the documents, so gradients accumulate from
//! both sides of every score. The backward pass differentiates the exact
//! analytic form; rank-dependent pair weights are recomputed per step and
//! then held constant, as the loss module documents.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::rank_score;
use crate::trainer::encoder::{encode, softplus_grad, variance_activations, EncoderParams};
use crate::trainer::loss::{lambda_pairs, loss_and_score_grads, ranks_from_scores, LambdaPair};

/// One candidate document within a training instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub doc_id: String,
    pub features: Vec<f64>,
    /// Teacher score; `-inf` marks an in-batch negative that may only sit on
    /// the losing side of a pair.
    pub teacher_score: f64,
    pub is_positive: bool,
}

/// A query with its candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub query_id: String,
    pub query_features: Vec<f64>,
    pub candidates: Vec<Candidate>,
}

impl TrainingInstance {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        if self.candidates.len() < 2 {
            return Err(Error::TooFewItems {
                required: 2,
                actual: self.candidates.len(),
            });
        }
        if self.query_features.len() != feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim,
                actual: self.query_features.len(),
            });
        }
        for c in &self.candidates {
            if c.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: feature_dim,
                    actual: c.features.len(),
                });
            }
            if c.teacher_score.is_nan() || c.teacher_score == f64::INFINITY {
                return Err(Error::NonFinite {
                    context: format!("teacher score of {}", c.doc_id),
                });
            }
        }
        Ok(())
    }
}

/// Per-step behavior knobs.
#[derive(Debug, Clone)]
pub struct StepOptions {
    /// Append other instances' candidates as in-batch negatives.
    pub in_batch_negatives: bool,
    /// Cap on appended in-batch negatives per instance.
    pub max_in_batch: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            in_batch_negatives: false,
            max_in_batch: 16,
        }
    }
}

/// Student scores for every candidate of one instance.
pub fn instance_scores(params: &EncoderParams, instance: &TrainingInstance) -> Result<Vec<f64>> {
    let query = encode(params, &instance.query_id, &instance.query_features)?;
    instance
        .candidates
        .iter()
        .map(|c| {
            let doc = encode(params, &c.doc_id, &c.features)?;
            rank_score(&query, &doc)
        })
        .collect()
}

/// One plain-SGD update over a batch without in-batch negatives.
pub fn train_step(
    params: &mut EncoderParams,
    batch: &[TrainingInstance],
    lr: f64,
) -> Result<f64> {
    train_step_with(
        params,
        batch,
        lr,
        &StepOptions::default(),
        &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
    )
}

use rand::SeedableRng;

/// One plain-SGD update over a batch.
///
/// Returns the mean per-instance loss. With a zero learning rate the
/// parameters are left untouched and only the loss is reported.
pub fn train_step_with(
    params: &mut EncoderParams,
    batch: &[TrainingInstance],
    lr: f64,
    options: &StepOptions,
    rng: &mut impl Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for inst in batch {
        inst.validate(params.feature_dim)?;
    }

    let batch_view: Vec<TrainingInstance> = if options.in_batch_negatives {
        augment_with_in_batch(batch, options, rng)
    } else {
        batch.to_vec()
    };

    let mut grad_mean = vec![0.0; params.w_mean.len()];
    let mut grad_var = vec![0.0; params.w_var.len()];
    let mut total_loss = 0.0;
    for inst in &batch_view {
        let scores = instance_scores(params, inst)?;
        let ranks = ranks_from_scores(&scores);
        let pairs = lambda_pairs(
            &inst
                .candidates
                .iter()
                .map(|c| c.teacher_score)
                .collect::<Vec<f64>>(),
            &ranks,
        );
        let (loss, score_grads) = loss_and_score_grads(&scores, &pairs);
        total_loss += loss;
        accumulate_instance_gradient(params, inst, &score_grads, &mut grad_mean, &mut grad_var)?;
    }

    let scale = 1.0 / batch_view.len() as f64;
    let loss = total_loss * scale;
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged {
            step: 0,
            detail: format!("non-finite loss {loss}"),
        });
    }
    if lr != 0.0 {
        for (w, g) in params.w_mean.iter_mut().zip(&grad_mean) {
            let step = lr * scale * g;
            if !step.is_finite() {
                return Err(Error::TrainingDiverged {
                    step: 0,
                    detail: "non-finite mean-projection gradient".into(),
                });
            }
            *w -= step;
        }
        for (w, g) in params.w_var.iter_mut().zip(&grad_var) {
            let step = lr * scale * g;
            if !step.is_finite() {
                return Err(Error::TrainingDiverged {
                    step: 0,
                    detail: "non-finite variance-projection gradient".into(),
                });
            }
            *w -= step;
        }
    }
    Ok(loss)
}

/// Append a sample of other instances' candidate documents to each instance,
/// tagged with the `-inf` teacher sentinel.
fn augment_with_in_batch(
    batch: &[TrainingInstance],
    options: &StepOptions,
    rng: &mut impl Rng,
) -> Vec<TrainingInstance> {
    batch
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let own: std::collections::HashSet<&str> =
                inst.candidates.iter().map(|c| c.doc_id.as_str()).collect();
            let mut foreign: Vec<&Candidate> = Vec::new();
            let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
            for (j, other) in batch.iter().enumerate() {
                if i == j {
                    continue;
                }
                for c in &other.candidates {
                    if !own.contains(c.doc_id.as_str()) && seen.insert(c.doc_id.as_str()) {
                        foreign.push(c);
                    }
                }
            }
            foreign.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
            let take = options.max_in_batch.min(foreign.len());
            let chosen: Vec<&Candidate> = if take == foreign.len() {
                foreign
            } else {
                foreign
                    .choose_multiple(rng, take)
                    .copied()
                    .collect()
            };
            let mut augmented = inst.clone();
            for c in chosen {
                augmented.candidates.push(Candidate {
                    doc_id: c.doc_id.clone(),
                    features: c.features.clone(),
                    teacher_score: f64::NEG_INFINITY,
                    is_positive: false,
                });
            }
            augmented
        })
        .collect()
}

/// Backpropagate d(loss)/d(score) through the rank score and both encoder
/// heads into the weight gradients.
fn accumulate_instance_gradient(
    params: &EncoderParams,
    inst: &TrainingInstance,
    score_grads: &[f64],
    grad_mean: &mut [f64],
    grad_var: &mut [f64],
) -> Result<()> {
    let k = params.k;
    let query = encode(params, &inst.query_id, &inst.query_features)?;
    let q_act = variance_activations(params, &inst.query_features);
    let log_prod_q = query.log_variance_sum();

    // Accumulated d(loss)/d(mu_q) and d(loss)/d(var_q) across candidates.
    let mut d_mu_q = vec![0.0; k];
    let mut d_var_q = vec![0.0; k];

    for (c, &g) in inst.candidates.iter().zip(score_grads) {
        if g == 0.0 {
            continue;
        }
        let doc = encode(params, &c.doc_id, &c.features)?;
        let d_act = variance_activations(params, &c.features);
        let ratio = (log_prod_q - doc.log_variance_sum()).exp();

        let mut d_mu_d = vec![0.0; k];
        let mut d_var_d = vec![0.0; k];
        for i in 0..k {
            let vd = doc.variance()[i];
            let dm = query.mean()[i] - doc.mean()[i];
            // y = -(sum log vd + ratio + sum dm^2/vd)
            d_mu_q[i] += g * (-2.0 * dm / vd);
            d_mu_d[i] = g * (2.0 * dm / vd);
            d_var_q[i] += g * (-ratio / query.variance()[i]);
            d_var_d[i] = g * ((ratio - 1.0) / vd + dm * dm / (vd * vd));
        }
        // Chain through the document head.
        for i in 0..k {
            let sp = softplus_grad(params.beta, d_act[i]);
            for (j, &xj) in c.features.iter().enumerate() {
                grad_mean[j * k + i] += d_mu_d[i] * xj;
                grad_var[j * k + i] += d_var_d[i] * sp * xj;
            }
        }
    }

    // Chain through the query head once, with the accumulated sensitivities.
    for i in 0..k {
        let sp = softplus_grad(params.beta, q_act[i]);
        for (j, &xj) in inst.query_features.iter().enumerate() {
            grad_mean[j * k + i] += d_mu_q[i] * xj;
            grad_var[j * k + i] += d_var_q[i] * sp * xj;
        }
    }
    Ok(())
}
