//! Closed forms of the single access category backoff chain as functions of
//! the conditional collision probability `p`.
//!
//! Every quantity is evaluated as a finite sum over the `m + f + 1` stages
//! rather than through geometric-series ratios, so `p = 1/2` (where `1 - 2p`
//! vanishes) needs no special casing.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::params::MAX_RETRY_EXTRA;

/// Window schedule and burst length of one access category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainShape {
    /// Stage-0 window size.
    pub w0: u32,
    /// Doubling stages.
    pub m: u32,
    /// Extra retries at the maximum window.
    pub f: u32,
    /// Packets sent per successful access (TXOP burst).
    pub l: u32,
}

impl ChainShape {
    pub fn new(w0: u32, m: u32, f: u32, l: u32) -> Result<Self> {
        let shape = Self { w0, m, f, l };
        shape.check()?;
        Ok(shape)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.w0 < 1 || self.l < 1 {
            return Err(Error::InvalidShape(format!(
                "w0 and l must be ≥ 1 (w0={}, l={})",
                self.w0, self.l
            )));
        }
        if u64::from(self.w0) << self.m.min(40) > u64::from(u32::MAX) || self.m > 31 {
            return Err(Error::InvalidShape(format!(
                "w0·2^m overflows (w0={}, m={})",
                self.w0, self.m
            )));
        }
        if self.f > MAX_RETRY_EXTRA {
            return Err(Error::InvalidShape(format!("f={} exceeds {MAX_RETRY_EXTRA}", self.f)));
        }
        Ok(())
    }

    /// Index of the last stage, `m + f`.
    pub fn last_stage(&self) -> u32 {
        self.m + self.f
    }

    /// `W_i = w0 · 2^min(i, m)`.
    pub fn window(&self, stage: u32) -> u32 {
        self.w0 << stage.min(self.m)
    }

    pub fn windows(&self) -> impl Iterator<Item = u32> + '_ {
        (0..=self.last_stage()).map(|i| self.window(i))
    }
}

fn check_inputs(shape: &ChainShape, p: f64) -> Result<()> {
    shape.check()?;
    check_probability(p, "[0, 1)", true)
}

/// `p^i` for `i = 0..=m+f`, built by repeated multiplication.
fn stage_weights(shape: &ChainShape, p: f64) -> Vec<f64> {
    let mut weights = Vec::with_capacity(shape.last_stage() as usize + 1);
    let mut pi = 1.0;
    for _ in 0..=shape.last_stage() {
        weights.push(pi);
        pi *= p;
    }
    weights
}

/// Probability that a frame which is not dropped succeeds in stage `i`:
/// `p^i (1-p) / (1 - p^{m+f+1})`.
pub fn success_stage_distribution(shape: &ChainShape, p: f64) -> Result<Vec<f64>> {
    check_inputs(shape, p)?;
    let weights = stage_weights(shape, p);
    // Σ p^i = (1 - p^{m+f+1}) / (1 - p), so the conditional law is p^i / Σ p^i
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Stationary probability of state `(0, 0)`.
pub fn b00(shape: &ChainShape, p: f64) -> Result<f64> {
    check_inputs(shape, p)?;
    let w_max = f64::from(shape.window(shape.m));
    let mut denom = f64::from(shape.l) / f64::from(shape.w0);
    for (i, pi) in stage_weights(shape, p).into_iter().enumerate() {
        let w = if i as u32 <= shape.m {
            f64::from(shape.window(i as u32))
        } else {
            w_max
        };
        denom += (w + 1.0) / 2.0 * pi;
    }
    Ok(1.0 / denom)
}

/// Per-slot transmission probability `τ = b00 · Σ_{i=0}^{m+f} p^i`.
pub fn tau(shape: &ChainShape, p: f64) -> Result<f64> {
    let b = b00(shape, p)?;
    Ok(b * stage_weights(shape, p).iter().sum::<f64>())
}

/// Expected slots until a successful transmission: the counter drawn in the
/// successful stage plus one slot for the transmission itself, optionally
/// plus the `l` burst slots.
pub fn expected_attempt_slots(shape: &ChainShape, p: f64, include_txop_slots: bool) -> Result<f64> {
    let q = success_stage_distribution(shape, p)?;
    let mean: f64 = shape
        .windows()
        .zip(&q)
        .map(|(w, qi)| ((f64::from(w) - 1.0) / 2.0 + 1.0) * qi)
        .sum();
    Ok(if include_txop_slots {
        mean + f64::from(shape.l)
    } else {
        mean
    })
}

/// Variance of the attempt slot count.
///
/// The count is `N_i + 1` with `N_i` uniform on `0..W_i` and stage `i` drawn
/// from [`success_stage_distribution`]; the variance is the mixture variance
/// `Σ q_i [Var N_i + E²N_i] - (Σ q_i E N_i)²`, evaluated in the equivalent
/// form `Σ q_i [Var N_i + (E N_i - μ)²]` which is non-negative term by term.
pub fn variance_attempt_slots(shape: &ChainShape, p: f64) -> Result<f64> {
    let q = success_stage_distribution(shape, p)?;
    let mean_counter: f64 = shape
        .windows()
        .zip(&q)
        .map(|(w, qi)| (f64::from(w) - 1.0) / 2.0 * qi)
        .sum();
    let var = shape
        .windows()
        .zip(&q)
        .map(|(w, qi)| {
            let w = f64::from(w);
            let within = (w * w - 1.0) / 12.0;
            let offset = (w - 1.0) / 2.0 - mean_counter;
            (within + offset * offset) * qi
        })
        .sum();
    Ok(var)
}

/// Probability that a frame exhausts all `m + f + 1` attempts.
pub fn drop_probability(shape: &ChainShape, p: f64) -> Result<f64> {
    check_inputs(shape, p)?;
    Ok(p.powi(shape.last_stage() as i32 + 1))
}

/// All chain quantities at one collision probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub p: f64,
    pub b00: f64,
    pub tau: f64,
    pub e_n: f64,
    pub var_n: f64,
}

impl ChainPoint {
    pub fn evaluate(shape: &ChainShape, p: f64, include_txop_slots: bool) -> Result<Self> {
        Ok(Self {
            p,
            b00: b00(shape, p)?,
            tau: tau(shape, p)?,
            e_n: expected_attempt_slots(shape, p, include_txop_slots)?,
            var_n: variance_attempt_slots(shape, p)?,
        })
    }
}
