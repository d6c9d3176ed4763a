use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// Added to masked logits before the softmax.
pub const MASK_PENALTY: f64 = 1e9;

/// Softmax over `logits` with masked-out (`false`) entries pushed down by
/// [`MASK_PENALTY`]. Masked entries come out as exactly 0 in practice.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
    assert_eq!(logits.len(), mask.len(), "mask width mismatch");
    if !mask.iter().any(|&m| m) {
        return Err(NnError::AllMasked);
    }
    let shifted: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { z } else { z - MASK_PENALTY })
        .collect();
    let top = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = shifted.iter().map(|&z| (z - top).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `-sum p ln p` over entries with positive probability.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Inverse-CDF draw that never returns a zero-probability index.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = Some(i);
        if u < cum {
            return i;
        }
    }
    last.expect("distribution has positive mass")
}

/// Highest-probability allowed index, lowest index on ties.
pub fn argmax_masked(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&v, &m)) in values.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Piecewise-constant learning rate with one optional decay point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay_at: Option<u64>,
    pub factor: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            initial: lr,
            decay_at: None,
            factor: 1.0,
        }
    }

    pub fn at(&self, iteration: u64) -> f64 {
        match self.decay_at {
            Some(d) if iteration >= d => self.initial * self.factor,
            _ => self.initial,
        }
    }
}

/// A sorted random subset of `ceil(fraction * n)` parameter indices (at least one).
pub fn sample_indices<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Vec<usize> {
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
    let mut v = index::sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

/// Largest relative deviation between `analytic[j]` and the central
/// difference of `loss_at(indices[j], ±h)`, where `loss_at(i, d)` is the
/// loss with parameter `i` shifted by `d`.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-7)`, so parameters the
/// loss does not depend on count as exact.
pub fn finite_diff_check(
    analytic: &[f64],
    indices: &[usize],
    h: f64,
    mut loss_at: impl FnMut(usize, f64) -> f64,
) -> f64 {
    assert_eq!(analytic.len(), indices.len());
    let mut worst: f64 = 0.0;
    for (&a, &i) in analytic.iter().zip(indices) {
        let numeric = (loss_at(i, h) - loss_at(i, -h)) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}
