//! Coupling of the four per-AC chains across `n` identical stations.
//!
//! Each AC sees a conditional collision probability
//! `P_α = PI_α + (1 - PI_α) P_ex`, where `PI_α` is the chance that a higher
//! priority AC of the same station transmits in the same slot and `P_ex` the
//! chance that another station transmits. Feeding `P_α` back through
//! [`chain::tau`] closes the loop; [`solve_fixed_point`] finds the
//! self-consistent `τ` vector by damped successive substitution.

use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainShape};
use crate::error::{check_probability, Error, Result};
use crate::params::{ScenarioConfig, NUM_ACS};
use crate::timing;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    /// Per-AC transmission probability `τ_α`.
    pub tau_ac: [f64; NUM_ACS],
    /// Station transmission probability `τ`.
    pub tau_station: f64,
    /// Internal (virtual) collision probability `PI_α`.
    pub pi: [f64; NUM_ACS],
    pub p_ext: f64,
    /// Conditional collision probability `P_α`.
    pub p_coll: [f64; NUM_ACS],
    /// Conditional success share `P_Sα` given a busy slot.
    pub p_succ: [f64; NUM_ACS],
    /// Probability that a slot carries at least one transmission.
    pub p_tr: f64,
    pub iterations: u32,
    pub residual: f64,
}

fn check_tau_vector(tau_ac: &[f64; NUM_ACS]) -> Result<()> {
    tau_ac
        .iter()
        .try_for_each(|&t| check_probability(t, "[0, 1]", false))
}

/// `τ = τ₀ + τ₁(1-τ₀) + τ₂(1-τ₀)(1-τ₁) + τ₃(1-τ₀)(1-τ₁)(1-τ₂)`.
pub fn aggregate_tau(tau_ac: &[f64; NUM_ACS]) -> Result<f64> {
    check_tau_vector(tau_ac)?;
    Ok(timing::attempt_shares(tau_ac).iter().sum())
}

/// `PI₀ = 0`, `PI_α = 1 - Π_{β<α} (1 - τ_β)`.
pub fn internal_collision(tau_ac: &[f64; NUM_ACS]) -> Result<[f64; NUM_ACS]> {
    check_tau_vector(tau_ac)?;
    let [t0, t1, t2, _] = *tau_ac;
    Ok([
        0.0,
        t0,
        1.0 - (1.0 - t0) * (1.0 - t1),
        1.0 - (1.0 - t0) * (1.0 - t1) * (1.0 - t2),
    ])
}

/// `P_ex = 1 - (1 - τ)^{n-1}`.
pub fn external_collision(tau_station: f64, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidStationCount(n));
    }
    check_probability(tau_station, "[0, 1]", false)?;
    Ok(1.0 - (1.0 - tau_station).powi(n as i32 - 1))
}

/// `P_tr = 1 - (1 - τ)^n`.
pub fn busy_probability(tau_station: f64, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidStationCount(n));
    }
    check_probability(tau_station, "[0, 1]", false)?;
    Ok(1.0 - (1.0 - tau_station).powi(n as i32))
}

/// `P_Sα = n τ_α Π_{β<α}(1-τ_β) (1-τ)^{n-1} / P_tr`.
pub fn success_shares(tau_ac: &[f64; NUM_ACS], tau_station: f64, n: u32) -> Result<[f64; NUM_ACS]> {
    check_tau_vector(tau_ac)?;
    let p_tr = busy_probability(tau_station, n)?;
    if p_tr <= 0.0 {
        return Err(Error::ZeroBusyProbability);
    }
    let alone = f64::from(n) * (1.0 - tau_station).powi(n as i32 - 1) / p_tr;
    Ok(timing::attempt_shares(tau_ac).map(|share| share * alone))
}

/// Chain shape of every AC: `W₀ = cw_min`, `m` doubling stages, `f` extra
/// retries and the TXOP burst length.
pub fn chain_shapes(cfg: &ScenarioConfig) -> [ChainShape; NUM_ACS] {
    let bursts = timing::burst_lengths(cfg);
    let mut shapes = [ChainShape { w0: 1, m: 0, f: 0, l: 1 }; NUM_ACS];
    for (idx, ac) in cfg.acs.iter().enumerate() {
        shapes[idx] = ChainShape {
            w0: ac.cw_min,
            m: ac.stages(),
            f: ac.retry_extra,
            l: bursts[idx],
        };
    }
    shapes
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Collision probabilities implied by a `τ` vector.
pub fn collision_probabilities(tau_ac: &[f64; NUM_ACS], n: u32) -> Result<[f64; NUM_ACS]> {
    let pi = internal_collision(tau_ac)?;
    let p_ext = external_collision(aggregate_tau(tau_ac)?, n)?;
    Ok(pi.map(|pi| pi + (1.0 - pi) * p_ext))
}

/// One application of the fixed-point map `τ ↦ (tau(shape_α, P_α(τ)))_α`.
pub fn fixed_point_map(shapes: &[ChainShape; NUM_ACS], n: u32, tau_ac: &[f64; NUM_ACS]) -> Result<[f64; NUM_ACS]> {
    let p = collision_probabilities(tau_ac, n)?;
    let mut next = [0.0; NUM_ACS];
    for idx in 0..NUM_ACS {
        next[idx] = chain::tau(&shapes[idx], p[idx].min(BELOW_ONE))?;
    }
    Ok(next)
}

impl SolverResult {
    /// Fill in every derived probability from a `τ` vector.
    pub fn from_tau(tau_ac: [f64; NUM_ACS], n: u32, iterations: u32, residual: f64) -> Result<Self> {
        let tau_station = aggregate_tau(&tau_ac)?;
        let pi = internal_collision(&tau_ac)?;
        let p_ext = external_collision(tau_station, n)?;
        let p_coll = pi.map(|pi| pi + (1.0 - pi) * p_ext);
        let p_succ = success_shares(&tau_ac, tau_station, n)?;
        let p_tr = busy_probability(tau_station, n)?;
        Ok(Self {
            tau_ac,
            tau_station,
            pi,
            p_ext,
            p_coll,
            p_succ,
            p_tr,
            iterations,
            residual,
        })
    }

    /// `max_α |F(τ)_α - τ_α|` for the stored `τ`.
    pub fn substitution_residual(&self, cfg: &ScenarioConfig) -> Result<f64> {
        let next = fixed_point_map(&chain_shapes(cfg), cfg.n_stations, &self.tau_ac)?;
        Ok(max_abs_diff(&next, &self.tau_ac))
    }
}

fn max_abs_diff(a: &[f64; NUM_ACS], b: &[f64; NUM_ACS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solve the coupled system with `τ ← (1-λ) τ + λ F(τ)`, starting from
/// `τ_α = 2 / (W₀ + 1)`. Stops once `max |F(τ) - τ|` is within the configured
/// tolerance and returns that `τ`, so re-substitution reproduces `residual`.
pub fn solve_fixed_point(cfg: &ScenarioConfig) -> Result<SolverResult> {
    cfg.validate().into_result()?;
    let shapes = chain_shapes(cfg);
    let n = cfg.n_stations;
    let settings = cfg.solver;
    let lambda = settings.damping;

    let mut tau = shapes.map(|s| (2.0 / (f64::from(s.w0) + 1.0)).min(0.5));
    let mut residual = f64::INFINITY;
    for iteration in 1..=settings.max_iterations {
        let next = fixed_point_map(&shapes, n, &tau)?;
        residual = max_abs_diff(&next, &tau);
        if residual <= settings.tolerance {
            return SolverResult::from_tau(tau, n, iteration, residual);
        }
        for idx in 0..NUM_ACS {
            tau[idx] = (1.0 - lambda) * tau[idx] + lambda * next[idx];
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{default_table1, AcParams};
    use proptest::prelude::*;

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_tau(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(aggregate_tau(&[1.0, 0.3, 0.9, 0.2]).unwrap(), 1.0);
        assert!((aggregate_tau(&[0.1; 4]).unwrap() - 0.3439).abs() < 1e-15);
        assert!(aggregate_tau(&[0.1, 1.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn internal_examples() {
        let pi = internal_collision(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(pi[0], 0.0);
        assert_eq!(pi[1], 0.1);
        assert!((pi[3] - 0.496).abs() < 1e-15);
        assert!(internal_collision(&[-0.1, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn external_examples() {
        assert_eq!(external_collision(0.7, 1).unwrap(), 0.0);
        assert!((external_collision(0.2, 2).unwrap() - 0.2).abs() < 1e-15);
        assert!((external_collision(0.1, 11).unwrap() - (1.0 - 0.9f64.powi(10))).abs() < 1e-15);
        assert!((external_collision(0.1, 11).unwrap() - 0.651_321_559_9).abs() < 1e-10);
        assert!(matches!(external_collision(0.1, 0), Err(Error::InvalidStationCount(0))));
    }

    #[test]
    fn success_share_examples() {
        let s = success_shares(&[0.2, 0.0, 0.0, 0.0], 0.2, 1).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);
        let s = success_shares(&[0.2, 0.2, 0.0, 0.0], 0.36, 1).unwrap();
        assert!((s[0] - 0.2 / 0.36).abs() < 1e-15);
        assert!((s[1] - 0.16 / 0.36).abs() < 1e-15);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(
            success_shares(&[0.0; 4], 0.0, 3),
            Err(Error::ZeroBusyProbability)
        ));
    }

    #[test]
    fn lone_ac0_has_no_collisions() {
        let mut cfg = default_table1();
        cfg.n_stations = 1;
        for ac in cfg.acs.iter_mut().skip(1) {
            *ac = AcParams::new(1 << 24, 1 << 24, 2, 0);
        }
        let r = solve_fixed_point(&cfg).unwrap();
        let shape0 = chain_shapes(&cfg)[0];
        assert_eq!(r.p_coll[0], 0.0);
        assert!((r.tau_ac[0] - chain::b00(&shape0, 0.0).unwrap()).abs() < 1e-11);
        assert!(r.p_succ[0] > 0.999_99);
    }

    #[test]
    fn default_ordering_at_ten_stations() {
        let r = solve_fixed_point(&default_table1()).unwrap();
        assert!(r.residual <= 1e-12);
        assert_eq!(r.pi[0], 0.0);
        assert!(r.p_coll[0] < r.p_coll[1]);
        assert!(r.p_coll[1] < r.p_coll[2]);
        assert!(r.p_coll[2] < r.p_coll[3]);
        assert!(r.p_succ.iter().sum::<f64>() < 1.0);
        let resub = r.substitution_residual(&default_table1()).unwrap();
        assert_eq!(resub, r.residual);
    }

    #[test]
    fn deterministic() {
        let a = solve_fixed_point(&default_table1()).unwrap();
        let b = solve_fixed_point(&default_table1()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn non_convergence_reported() {
        let mut cfg = default_table1();
        cfg.solver.max_iterations = 3;
        match solve_fixed_point(&cfg) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0 && residual.is_finite());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = default_table1();
        cfg.acs[0].aifsn = 1;
        assert!(matches!(solve_fixed_point(&cfg), Err(Error::InvalidConfig(_))));
    }

    proptest! {
        #[test]
        fn aggregate_equals_product_identity(t in proptest::array::uniform4(0.0f64..=1.0)) {
            let direct = aggregate_tau(&t).unwrap();
            let product = 1.0 - t.iter().map(|x| 1.0 - x).product::<f64>();
            prop_assert!((direct - product).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn internal_collisions_monotone(t in proptest::array::uniform4(0.0f64..=1.0)) {
            let pi = internal_collision(&t).unwrap();
            prop_assert!(pi[0] <= pi[1] && pi[1] <= pi[2] && pi[2] <= pi[3]);
        }
    }
}
