//! Unreliable ACK/NACK observation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// What a misobserved report turns into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackModel {
    /// The jammer reads the opposite label.
    #[default]
    Flip,
    /// The jammer sees nothing; the report drops out of the average.
    Erasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub lambda_ack: f64,
    pub lambda_nack: f64,
    #[serde(default)]
    pub model: FeedbackModel,
}

impl FeedbackConfig {
    pub fn symmetric(lambda: f64) -> Self {
        FeedbackConfig {
            lambda_ack: lambda,
            lambda_nack: lambda,
            model: FeedbackModel::Flip,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in [self.lambda_ack, self.lambda_nack] {
            if !(0.0..=1.0).contains(&l) {
                return invalid(format!("lambda must lie in [0, 1], got {l}"));
            }
        }
        Ok(())
    }

    /// Expected observed BLER under the flip model for true BLER `b`.
    pub fn expected_observed(&self, b: f64) -> f64 {
        (1.0 - self.lambda_nack) * b + self.lambda_ack * (1.0 - b)
    }
}

fn misread<R: Rng + ?Sized>(ack: bool, cfg: &FeedbackConfig, rng: &mut R) -> bool {
    let lambda = if ack { cfg.lambda_ack } else { cfg.lambda_nack };
    lambda > 0.0 && rng.random_bool(lambda)
}

/// Corrupt true ACKs (`true` = ACK). Under the erasure model misread
/// reports are `None`; under the flip model every report is `Some`.
pub fn observe_reports<R: Rng + ?Sized>(
    true_acks: &[bool],
    cfg: &FeedbackConfig,
    rng: &mut R,
) -> Vec<Option<bool>> {
    true_acks
        .iter()
        .map(|&ack| match (misread(ack, cfg, rng), cfg.model) {
            (false, _) => Some(ack),
            (true, FeedbackModel::Flip) => Some(!ack),
            (true, FeedbackModel::Erasure) => None,
        })
        .collect()
}

/// Flip-model observation.
pub fn observe<R: Rng + ?Sized>(true_acks: &[bool], cfg: &FeedbackConfig, rng: &mut R) -> Vec<bool> {
    true_acks
        .iter()
        .map(|&ack| ack ^ misread(ack, cfg, rng))
        .collect()
}

/// NACK share of the observed reports.
pub fn observed_bler(observed_acks: &[bool]) -> Result<f64> {
    if observed_acks.is_empty() {
        return invalid("no reports to average");
    }
    let nacks = observed_acks.iter().filter(|&&a| !a).count();
    Ok(nacks as f64 / observed_acks.len() as f64)
}

/// NACK share over the reports that arrived. With nothing observed the
/// jammer learns nothing and reports `None`.
pub fn observed_bler_erasure(reports: &[Option<bool>]) -> Option<f64> {
    let seen: Vec<bool> = reports.iter().flatten().copied().collect();
    observed_bler(&seen).ok()
}

/// Observe and average in one go according to `cfg.model`. Returns `None`
/// only when every report was erased.
pub fn observe_bler<R: Rng + ?Sized>(
    true_acks: &[bool],
    cfg: &FeedbackConfig,
    rng: &mut R,
) -> Result<Option<f64>> {
    if true_acks.is_empty() {
        return invalid("no reports to average");
    }
    Ok(match cfg.model {
        FeedbackModel::Flip => Some(observed_bler(&observe(true_acks, cfg, rng))?),
        FeedbackModel::Erasure => observed_bler_erasure(&observe_reports(true_acks, cfg, rng)),
    })
}
