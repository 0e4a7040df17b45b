//! Per-AC delay and jitter.
//!
//! `E(D) = E(N) E(T) / L` and `J = sqrt(Var N) E(T) / L`, with `N` the attempt
//! slot count of [`chain`], `E(T)` from [`timing`] and `L` the TXOP burst.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainShape};
use crate::coupling::{self, SolverResult};
use crate::error::{Error, Result};
use crate::params::{ScenarioConfig, TransitionModel, NUM_ACS};
use crate::timing::{self, TransitionTime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcMetrics {
    pub ac: usize,
    /// Packets per TXOP burst.
    pub l: u32,
    pub e_n: f64,
    pub var_n: f64,
    /// Expected transition duration, µs.
    pub e_t: f64,
    /// Expected frame transmission delay, µs.
    pub e_delay: f64,
    /// Square root of the delay variance, µs.
    pub jitter: f64,
    pub tau: f64,
    pub p_coll: f64,
    pub p_drop: f64,
}

/// Analytic results for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub solver: SolverResult,
    pub transition: TransitionTime,
    pub acs: [AcMetrics; NUM_ACS],
}

/// Solve the scenario and assemble per-AC metrics.
pub fn evaluate(cfg: &ScenarioConfig) -> Result<[AcMetrics; NUM_ACS]> {
    Ok(evaluate_full(cfg)?.acs)
}

pub fn evaluate_full(cfg: &ScenarioConfig) -> Result<Evaluation> {
    let solver = coupling::solve_fixed_point(cfg)?;
    evaluate_at(cfg, &solver, cfg.model.transition_model)
}

/// Metrics at a given (typically frozen) set of probabilities.
pub fn evaluate_at(cfg: &ScenarioConfig, solver: &SolverResult, model: TransitionModel) -> Result<Evaluation> {
    let shapes = coupling::chain_shapes(cfg);
    let busy = timing::busy_durations(cfg);
    let transition = timing::expected_transition_time_with(cfg, solver, &busy, model);
    let mut acs = Vec::with_capacity(NUM_ACS);
    for ac in 0..NUM_ACS {
        acs.push(ac_metrics(
            ac,
            &shapes[ac],
            solver.p_coll[ac],
            solver.tau_ac[ac],
            transition.e_t[ac],
            cfg.model.include_txop_slots,
        )?);
    }
    let acs: [AcMetrics; NUM_ACS] = acs.try_into().expect("one entry per AC");
    Ok(Evaluation {
        solver: *solver,
        transition,
        acs,
    })
}

fn ac_metrics(
    ac: usize,
    shape: &ChainShape,
    p: f64,
    tau: f64,
    e_t: f64,
    include_txop_slots: bool,
) -> Result<AcMetrics> {
    let e_n = chain::expected_attempt_slots(shape, p, include_txop_slots)?;
    let var_n = chain::variance_attempt_slots(shape, p)?;
    let l = f64::from(shape.l);
    Ok(AcMetrics {
        ac,
        l: shape.l,
        e_n,
        var_n,
        e_t,
        e_delay: e_n * e_t / l,
        jitter: var_n.sqrt() * e_t / l,
        tau,
        p_coll: p,
        p_drop: chain::drop_probability(shape, p)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: u32,
    pub outcome: Result<Evaluation>,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&[AcMetrics; NUM_ACS]> {
        self.outcome.as_ref().ok().map(|e| &e.acs)
    }
}

/// Evaluate every station count independently. Rows come back in input
/// order; a failed point is recorded in its row and the sweep continues.
pub fn sweep(cfg: &ScenarioConfig, n_values: &[u32]) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one station count".into()));
    }
    if let Some(&bad) = n_values.iter().find(|&&n| n < 1) {
        return Err(Error::InvalidStationCount(bad));
    }
    Ok(n_values
        .par_iter()
        .map(|&n| SweepRow {
            n,
            outcome: evaluate_full(&cfg.with_stations(n)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{default_table1, AcParams};

    #[test]
    fn lone_ac_composes_factors() {
        let mut cfg = default_table1();
        cfg.n_stations = 1;
        cfg.acs[0] = AcParams::new(8, 8, 2, 0);
        for ac in cfg.acs.iter_mut().skip(1) {
            *ac = AcParams::new(1 << 24, 1 << 24, 2, 0);
        }
        let eval = evaluate_full(&cfg).unwrap();
        let m = eval.acs[0];
        assert_eq!(m.p_coll, 0.0);
        assert_eq!(m.e_n, 4.5);
        assert_eq!(m.l, 1);
        assert_eq!(m.e_delay, 4.5 * eval.transition.e_t[0]);
        // E(T) = (1 - P_tr) σ + P_tr · busy, with P_tr ≈ τ₀ ≈ 0.2
        let r = eval.solver;
        let busy = timing::busy_durations(&cfg);
        let literal: f64 = (0..4)
            .map(|b| r.p_succ[b] * busy.t_success[b] + (1.0 - r.p_succ[b]) * busy.t_collision[b])
            .sum();
        let e_t = (1.0 - r.p_tr) * 20.0 + r.p_tr * literal;
        assert!((m.e_t - e_t).abs() < 1e-9);
    }

    #[test]
    fn default_orderings() {
        let acs = evaluate(&default_table1()).unwrap();
        assert!(acs[0].e_delay.max(acs[1].e_delay) < acs[2].e_delay);
        assert!(acs[2].e_delay < acs[3].e_delay);
        assert!(acs[0].jitter.max(acs[1].jitter) < acs[2].jitter);
        assert!(acs[2].jitter < acs[3].jitter);
        for m in acs {
            assert_eq!(m.e_delay, m.e_n * m.e_t / f64::from(m.l));
            assert!(m.e_delay.is_finite() && m.jitter.is_finite() && m.jitter >= 0.0);
        }
    }

    #[test]
    fn sweep_rows_in_order() {
        let ns: Vec<u32> = (1..=10).map(|k| 5 * k).collect();
        let rows = sweep(&default_table1(), &ns).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), ns);
        assert!(rows.iter().all(|r| r.outcome.is_ok()));
        let first = rows[0].metrics().unwrap()[3].e_delay;
        let last = rows[9].metrics().unwrap()[3].e_delay;
        assert!(last >= first);
    }

    #[test]
    fn sweep_records_failures_in_row() {
        let mut cfg = default_table1();
        cfg.solver.max_iterations = 2;
        let rows = sweep(&cfg, &[3, 4]).unwrap();
        assert!(rows.iter().all(|r| matches!(r.outcome, Err(Error::NonConvergence { .. }))));
        assert!(sweep(&cfg, &[]).is_err());
        assert!(sweep(&cfg, &[0]).is_err());
    }
}
