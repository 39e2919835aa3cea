//! SFT and ORPO objectives over any [`TrainerBackend`].
//!
//! ```text
//! sft  = -log P(chosen)
//! odds(y) = P(y) / (1 - P(y))
//! L_OR = -log sigmoid(log odds(chosen) - log odds(rejected))
//! orpo = sft + beta * L_OR
//! ```
//!
//! Probabilities entering the odds are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
//! The NLL term uses the unclamped log-probability, so `beta = 0` reproduces
//! the SFT loss bit for bit.

use super::backend::{BackendError, TrainerBackend};
use crate::pairs::PreferencePair;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("non-finite or zero probability for {0}")]
    Numerical(&'static str),
    #[error("orpo beta must be >= 0, got {0}")]
    Beta(f64),
}

fn checked_log_prob(lp: f64, what: &'static str) -> Result<f64, LossError> {
    if lp.is_finite() && lp <= 0.0 {
        Ok(lp)
    } else {
        Err(LossError::Numerical(what))
    }
}

fn require_sft<B: TrainerBackend + ?Sized>(backend: &B) -> Result<(), LossError> {
    if backend.capabilities().supports_sft {
        Ok(())
    } else {
        Err(BackendError::Unsupported("SFT").into())
    }
}

fn require_orpo<B: TrainerBackend + ?Sized>(backend: &B) -> Result<(), LossError> {
    if backend.capabilities().supports_orpo {
        Ok(())
    } else {
        Err(BackendError::Unsupported("ORPO").into())
    }
}

/// Negative log-likelihood of `target` given `prompt`.
pub fn sft_loss<B: TrainerBackend + ?Sized>(backend: &B, prompt: &str, target: &str) -> Result<f64, LossError> {
    require_sft(backend)?;
    let lp = checked_log_prob(backend.log_prob(prompt, target)?, "target")?;
    Ok(-lp)
}

pub fn sft_loss_and_grad<B: TrainerBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    target: &str,
) -> Result<(f64, Vec<f64>), LossError> {
    require_sft(backend)?;
    let (lp, mut grad) = backend.log_prob_and_grad(prompt, target)?;
    let lp = checked_log_prob(lp, "target")?;
    grad.iter_mut().for_each(|g| *g = -*g);
    Ok((-lp, grad))
}

/// Terms of the ORPO objective for one pair, with the derivative of the total
/// with respect to each log-probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrpoComponents {
    pub nll: f64,
    pub odds_ratio_loss: f64,
    pub total: f64,
    pub d_logp_chosen: f64,
    pub d_logp_rejected: f64,
}

fn log_sigmoid(x: f64) -> f64 {
    // -softplus(-x), stable on both tails
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log odds of a clamped probability, and d(log odds)/d(log p).
fn log_odds(lp: f64) -> (f64, f64) {
    let p = lp.exp();
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        let c = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        return (c.ln() - (1.0 - c).ln(), 0.0);
    }
    // log(1 - p) via ln_1p keeps precision near p = 0
    (lp - (-p).ln_1p(), 1.0 / (1.0 - p))
}

/// ORPO terms from the two completion log-probabilities.
pub fn orpo_components(logp_chosen: f64, logp_rejected: f64, beta: f64) -> Result<OrpoComponents, LossError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(LossError::Beta(beta));
    }
    let lc = checked_log_prob(logp_chosen, "chosen")?;
    let lr = checked_log_prob(logp_rejected, "rejected")?;
    let (odds_c, dodds_c) = log_odds(lc);
    let (odds_r, dodds_r) = log_odds(lr);
    let ratio = odds_c - odds_r;
    let odds_ratio_loss = -log_sigmoid(ratio);
    let nll = -lc;
    // d(-log sigmoid(r))/dr = -sigmoid(-r)
    let s = sigmoid(-ratio);
    Ok(OrpoComponents {
        nll,
        odds_ratio_loss,
        total: nll + beta * odds_ratio_loss,
        d_logp_chosen: -1.0 - beta * s * dodds_c,
        d_logp_rejected: beta * s * dodds_r,
    })
}

pub fn orpo_loss<B: TrainerBackend + ?Sized>(backend: &B, pair: &PreferencePair, beta: f64) -> Result<f64, LossError> {
    require_orpo(backend)?;
    let lc = backend.log_prob(&pair.prompt, &pair.chosen)?;
    let lr = backend.log_prob(&pair.prompt, &pair.rejected)?;
    Ok(orpo_components(lc, lr, beta)?.total)
}

pub fn orpo_loss_and_grad<B: TrainerBackend + ?Sized>(
    backend: &B,
    pair: &PreferencePair,
    beta: f64,
) -> Result<(f64, Vec<f64>), LossError> {
    require_orpo(backend)?;
    let (lc, gc) = backend.log_prob_and_grad(&pair.prompt, &pair.chosen)?;
    let (lr, gr) = backend.log_prob_and_grad(&pair.prompt, &pair.rejected)?;
    let c = orpo_components(lc, lr, beta)?;
    let grad = gc
        .iter()
        .zip(&gr)
        .map(|(a, b)| c.d_logp_chosen * a + c.d_logp_rejected * b)
        .collect();
    Ok((c.total, grad))
}
