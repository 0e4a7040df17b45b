//! Brute-force reference for the single-AC chain.
//!
//! [`build_chain`] writes down the one-step transition probabilities state by
//! state and [`stationary`] solves `πᵀ P = πᵀ` numerically, knowing nothing
//! about the chain's structure. [`enumerate_attempt_moments`] sums over every
//! (stage, counter) outcome. [`verify_grid`] compares all three against the
//! closed forms in [`chain`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainShape};
use crate::error::{check_probability, Error, Result};

/// Largest explicit chain [`build_chain`] will construct.
pub const MAX_STATES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChainState {
    /// Packet `j` (1-based) of a TXOP burst.
    Burst(u32),
    Backoff { stage: u32, counter: u32 },
}

/// Explicit chain with a sparse row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitChain {
    pub shape: ChainShape,
    pub p: f64,
    pub states: Vec<ChainState>,
    /// `rows[s]` lists `(target, probability)` with positive probability.
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Number of states, `L + Σ_i W_i`.
pub fn state_count(shape: &ChainShape) -> usize {
    shape.l as usize + shape.windows().map(|w| w as usize).sum::<usize>()
}

impl ExplicitChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: ChainState) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect()
    }

    /// Dense copy of the transition matrix, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut dense = vec![vec![0.0; n]; n];
        for (from, row) in self.rows.iter().enumerate() {
            for &(to, w) in row {
                dense[from][to] += w;
            }
        }
        dense
    }

    /// `max_j |(πᵀ P)_j - π_j|`.
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let mut flow = vec![0.0; self.len()];
        for (from, row) in self.rows.iter().enumerate() {
            for &(to, w) in row {
                flow[to] += pi[from] * w;
            }
        }
        flow.iter()
            .zip(pi)
            .map(|(f, p)| (f - p).abs())
            .fold(0.0, f64::max)
    }
}

/// Construct the chain from its one-step transition rules:
///
/// * `(i, k) → (i, k-1)` with probability 1 for `k ≥ 1`;
/// * `(i, 0) → T₁` with `1 - p` and `→ (i+1, k)` with `p / W_{i+1}` for
///   `i < m + f`;
/// * `(m+f, 0) → T₁` with probability 1;
/// * `T_j → T_{j+1}` with probability 1 and `T_L → (0, k)` with `1 / W₀`.
pub fn build_chain(shape: &ChainShape, p: f64) -> Result<ExplicitChain> {
    shape.check()?;
    check_probability(p, "[0, 1)", true)?;
    let count = state_count(shape);
    if count > MAX_STATES {
        return Err(Error::ChainTooLarge {
            states: count,
            limit: MAX_STATES,
        });
    }

    let mut states = Vec::with_capacity(count);
    states.extend((1..=shape.l).map(ChainState::Burst));
    for stage in 0..=shape.last_stage() {
        states.extend((0..shape.window(stage)).map(|counter| ChainState::Backoff { stage, counter }));
    }
    debug_assert!(states.windows(2).all(|w| w[0] < w[1]));

    // first index of each stage, for direct addressing
    let l = shape.l as usize;
    let mut stage_start = Vec::with_capacity(shape.last_stage() as usize + 1);
    let mut next = l;
    for w in shape.windows() {
        stage_start.push(next);
        next += w as usize;
    }
    let backoff = |stage: u32, counter: u32| stage_start[stage as usize] + counter as usize;
    let burst = |j: u32| (j - 1) as usize;

    let mut rows = Vec::with_capacity(count);
    for state in &states {
        let row = match *state {
            ChainState::Burst(j) if j < shape.l => vec![(burst(j + 1), 1.0)],
            ChainState::Burst(_) => {
                let w0 = shape.window(0);
                (0..w0).map(|k| (backoff(0, k), 1.0 / f64::from(w0))).collect()
            }
            ChainState::Backoff { stage, counter } if counter > 0 => {
                vec![(backoff(stage, counter - 1), 1.0)]
            }
            ChainState::Backoff { stage, .. } if stage == shape.last_stage() => {
                vec![(burst(1), 1.0)]
            }
            ChainState::Backoff { stage, .. } => {
                let mut row = vec![(burst(1), 1.0 - p)];
                if p > 0.0 {
                    let w_next = shape.window(stage + 1);
                    let share = p / f64::from(w_next);
                    row.extend((0..w_next).map(|k| (backoff(stage + 1, k), share)));
                }
                row
            }
        };
        rows.push(row);
    }

    Ok(ExplicitChain {
        shape: *shape,
        p,
        states,
        rows,
    })
}

/// Stationary distribution by Grassmann–Taksar–Heyman state reduction.
///
/// States are censored out one at a time from the highest index down,
/// redirecting flow through the removed state; only non-negative quantities
/// are added, so no cancellation occurs. The sparse rows keep the cost
/// proportional to the fill-in, which stays small for chains whose states are
/// ordered as [`build_chain`] orders them.
pub fn stationary(chain: &ExplicitChain) -> Result<Vec<f64>> {
    let n = chain.len();
    if n == 0 {
        return Err(Error::SingularChain("empty chain".into()));
    }
    let mut out: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut preds: Vec<BTreeMap<usize, ()>> = vec![BTreeMap::new(); n];
    for (from, row) in chain.rows.iter().enumerate() {
        for &(to, w) in row {
            if w > 0.0 {
                *out[from].entry(to).or_insert(0.0) += w;
                preds[to].insert(from, ());
            }
        }
    }

    // For each censored state k: its outflow into lower states, and the
    // reduced inflow weights P(i, k) for i < k at that moment.
    let mut outflow = vec![0.0; n];
    let mut inflow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    for k in (1..n).rev() {
        let lower_out: Vec<(usize, f64)> = out[k].range(..k).map(|(&j, &w)| (j, w)).collect();
        let s: f64 = lower_out.iter().map(|&(_, w)| w).sum();
        if s <= 0.0 {
            return Err(Error::SingularChain(format!(
                "state {k} has no outflow to the remaining states"
            )));
        }
        let lower_in: Vec<(usize, f64)> = preds[k]
            .range(..k)
            .filter_map(|(&i, _)| out[i].get(&k).map(|&w| (i, w)))
            .collect();
        for &(i, w_ik) in &lower_in {
            let scale = w_ik / s;
            for &(j, w_kj) in &lower_out {
                *out[i].entry(j).or_insert(0.0) += scale * w_kj;
                preds[j].insert(i, ());
            }
        }
        outflow[k] = s;
        inflow[k] = lower_in;
        out[k].clear();
    }

    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let mass: f64 = inflow[k].iter().map(|&(i, w)| pi[i] * w).sum();
        pi[k] = mass / outflow[k];
    }
    let total: f64 = pi.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::SingularChain("degenerate normalization".into()));
    }
    for x in &mut pi {
        *x /= total;
    }
    Ok(pi)
}

/// `(E N, Var N)` by summing over every (stage, counter) outcome of a
/// successful frame, with `N = counter + 1`.
pub fn enumerate_attempt_moments(shape: &ChainShape, p: f64) -> Result<(f64, f64)> {
    shape.check()?;
    check_probability(p, "[0, 1)", true)?;
    // P(success in stage i | not dropped) ∝ p^i (1 - p)
    let stages = shape.last_stage() as usize + 1;
    let mut stage_prob = Vec::with_capacity(stages);
    let mut reach = 1.0;
    for _ in 0..stages {
        stage_prob.push(reach * (1.0 - p));
        reach *= p;
    }
    let delivered: f64 = stage_prob.iter().sum();

    let mut mean = 0.0;
    for (stage, q) in stage_prob.iter().enumerate() {
        let w = u64::from(shape.window(stage as u32));
        let total: u128 = (1..=u128::from(w)).sum();
        mean += q / delivered * total as f64 / w as f64;
    }
    let mut central = 0.0;
    for (stage, q) in stage_prob.iter().enumerate() {
        let w = u64::from(shape.window(stage as u32));
        let q = q / delivered;
        let mut acc = 0.0;
        for counter in 0..w {
            let d = (counter + 1) as f64 - mean;
            acc += d * d;
        }
        central += q * acc / w as f64;
    }
    Ok((mean, central))
}

/// Deviations between closed forms and the oracle at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub shape: ChainShape,
    pub p: f64,
    pub states: usize,
    pub b00_dev: f64,
    pub tau_dev: f64,
    /// Largest `|π(i,0) - b00·p^i|`.
    pub stage_head_dev: f64,
    /// Largest `|π(i,k) - (W_i - k)/W_i · π(i,0)|`.
    pub counter_dev: f64,
    pub mean_dev: f64,
    pub var_dev: f64,
    pub balance_residual: f64,
}

impl GridPoint {
    /// Largest of the distribution deviations (b00, τ, stage heads, counters).
    pub fn max_distribution_dev(&self) -> f64 {
        [self.b00_dev, self.tau_dev, self.stage_head_dev, self.counter_dev]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Moment deviations relative to `max(1, |value|)`.
    pub fn max_moment_dev(&self) -> f64 {
        self.mean_dev.max(self.var_dev)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub points: Vec<GridPoint>,
}

impl GridReport {
    pub fn max_distribution_dev(&self) -> f64 {
        self.points.iter().map(GridPoint::max_distribution_dev).fold(0.0, f64::max)
    }

    pub fn max_moment_dev(&self) -> f64 {
        self.points.iter().map(GridPoint::max_moment_dev).fold(0.0, f64::max)
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.points.iter().map(|p| p.balance_residual).fold(0.0, f64::max)
    }
}

/// The standard verification grid: `p ∈ {0, 0.1, …, 0.9}`.
pub fn default_p_grid() -> Vec<f64> {
    (0..10).map(|k| f64::from(k) / 10.0).collect()
}

pub fn default_shapes() -> Vec<ChainShape> {
    vec![
        ChainShape { w0: 8, m: 3, f: 2, l: 1 },
        ChainShape { w0: 16, m: 1, f: 2, l: 3 },
        ChainShape { w0: 32, m: 5, f: 2, l: 1 },
    ]
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Check the closed forms against the explicit chain at one point.
/// `b00_perturbation` is added to the closed-form `b00` before comparing.
pub fn verify_point(shape: &ChainShape, p: f64, b00_perturbation: f64) -> Result<GridPoint> {
    let explicit = build_chain(shape, p)?;
    let pi = stationary(&explicit)?;
    let head = |stage: u32| {
        explicit
            .index_of(ChainState::Backoff { stage, counter: 0 })
            .map(|i| pi[i])
            .expect("stage head exists")
    };

    let b00_closed = chain::b00(shape, p)? + b00_perturbation;
    let tau_closed = chain::tau(shape, p)?;
    let tau_oracle: f64 = (0..=shape.last_stage()).map(head).sum();

    let mut stage_head_dev: f64 = 0.0;
    let mut counter_dev: f64 = 0.0;
    let b00_oracle = head(0);
    let mut p_pow = 1.0;
    for stage in 0..=shape.last_stage() {
        let h = head(stage);
        stage_head_dev = stage_head_dev.max((h - b00_oracle * p_pow).abs());
        p_pow *= p;
        let w = shape.window(stage);
        for counter in 0..w {
            let idx = explicit
                .index_of(ChainState::Backoff { stage, counter })
                .expect("state exists");
            let expected = f64::from(w - counter) / f64::from(w) * h;
            counter_dev = counter_dev.max((pi[idx] - expected).abs());
        }
    }

    let (mean, var) = enumerate_attempt_moments(shape, p)?;
    let mean_closed = chain::expected_attempt_slots(shape, p, false)?;
    let var_closed = chain::variance_attempt_slots(shape, p)?;

    Ok(GridPoint {
        shape: *shape,
        p,
        states: explicit.len(),
        b00_dev: (b00_closed - b00_oracle).abs(),
        tau_dev: (tau_closed - tau_oracle).abs(),
        stage_head_dev,
        counter_dev,
        mean_dev: relative(mean_closed, mean),
        var_dev: relative(var_closed, var),
        balance_residual: explicit.balance_residual(&pi),
    })
}

/// Run [`verify_point`] over the product of shapes and probabilities.
pub fn verify_grid(shapes: &[ChainShape], p_values: &[f64], b00_perturbation: f64) -> Result<GridReport> {
    use rayon::prelude::*;
    if shapes.is_empty() || p_values.is_empty() {
        return Err(Error::InvalidArgument("verification grid is empty".into()));
    }
    let pairs: Vec<(ChainShape, f64)> = shapes
        .iter()
        .flat_map(|s| p_values.iter().map(move |&p| (*s, p)))
        .collect();
    let points = pairs
        .par_iter()
        .map(|(s, p)| verify_point(s, *p, b00_perturbation))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridReport { points })
}
