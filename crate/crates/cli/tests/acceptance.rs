//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use edca_cli::table::{self, OutputRow};
use edca_core::chain::{self, ChainShape};
use edca_core::coupling::{self, SolverResult};
use edca_core::params::{default_table1, AcParams, AccessMode, ScenarioConfig, TransitionModel, NUM_ACS};
use edca_core::{metrics, oracle, sim, timing};

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let report = oracle::verify_grid(&oracle::default_shapes(), &oracle::default_p_grid(), 0.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let b00 = report.points.iter().map(|p| p.b00_dev).fold(0.0, f64::max);
    let tau = report.points.iter().map(|p| p.tau_dev).fold(0.0, f64::max);
    let structure = report
        .points
        .iter()
        .map(|p| p.stage_head_dev.max(p.counter_dev))
        .fold(0.0, f64::max);
    outcome(
        b00 <= 1e-9 && tau <= 1e-9 && elapsed < 10.0,
        format!(
            "max |b00 - pi(0,0)| = {b00:.3e}, max |tau - sum pi(i,0)| = {tau:.3e}, \
             b(i,0)/b(i,k) structure {structure:.1e}, {} points in {elapsed:.2} s",
            report.points.len()
        ),
    )
}

fn c2_moment_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for shape in oracle::default_shapes() {
        for p in oracle::default_p_grid() {
            let (mean, var) = oracle::enumerate_attempt_moments(&shape, p).unwrap();
            let e = chain::expected_attempt_slots(&shape, p, false).unwrap();
            let v = chain::variance_attempt_slots(&shape, p).unwrap();
            for (a, b) in [(e, mean), (v, var)] {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
                worst_abs = worst_abs.max((a - b).abs());
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max relative deviation {worst:.3e} (absolute {worst_abs:.3e})"),
    )
}

fn station_tau(shapes: &[ChainShape; NUM_ACS], x: f64) -> f64 {
    let mut idle_above = 1.0;
    for shape in shapes {
        let pi = 1.0 - idle_above;
        let p = (pi + (1.0 - pi) * x).min(1.0 - 1e-15);
        idle_above *= 1.0 - chain::tau(shape, p).unwrap();
    }
    1.0 - idle_above
}

fn bisection_tau(cfg: &ScenarioConfig) -> f64 {
    let shapes = coupling::chain_shapes(cfg);
    let n = f64::from(cfg.n_stations);
    let g = |x: f64| 1.0 - (1.0 - station_tau(&shapes, x)).powf(n - 1.0) - x;
    let (mut lo, mut hi) = (0.0_f64, 1.0 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    station_tau(&shapes, 0.5 * (lo + hi))
}

fn c3_fixed_point_health() -> Outcome {
    let (mut residual, mut iterations, mut gap) = (0.0_f64, 0_u32, 0.0_f64);
    for n in 2..=50 {
        let cfg = default_table1().with_stations(n);
        let r = match coupling::solve_fixed_point(&cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        };
        residual = residual.max(r.residual);
        iterations = iterations.max(r.iterations);
        gap = gap.max((r.tau_station - bisection_tau(&cfg)).abs());
    }
    outcome(
        residual <= 1e-12 && iterations <= 10_000 && gap <= 1e-8,
        format!("max residual {residual:.2e}, max iterations {iterations}, damped vs bisection {gap:.2e}"),
    )
}

fn c4_orderings() -> Outcome {
    let mut bad = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for n in 5..=50 {
        let acs = metrics::evaluate(&default_table1().with_stations(n)).unwrap();
        let d = acs.map(|m| m.e_delay);
        let j = acs.map(|m| m.jitter);
        for (name, v) in [("delay", d), ("jitter", j)] {
            if !(v[0].max(v[1]) < v[2] && v[2] < v[3]) {
                bad.push(format!("{name} n={n}"));
            }
        }
        min_ratio = min_ratio.min(d[2] / d[0].max(d[1]));
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("max(D0,D1) < D2 < D3 and same for jitter at every n in 5..=50; min D2/max(D0,D1) = {min_ratio:.1}")
        } else {
            format!("violations: {}", bad.join(", "))
        },
    )
}

fn identities_hold(r: &SolverResult, cfg: &ScenarioConfig) -> Result<(), String> {
    let eps = f64::EPSILON;
    let t = r.tau_ac;
    if r.pi[0] != 0.0 {
        return Err("PI0 != 0".into());
    }
    let pi3 = 1.0 - (1.0 - t[0]) * (1.0 - t[1]) * (1.0 - t[2]);
    if (r.pi[3] - pi3).abs() > 4.0 * eps {
        return Err(format!("PI3 off by {:.1e}", (r.pi[3] - pi3).abs()));
    }
    let agg = 1.0 - t.iter().map(|x| 1.0 - x).product::<f64>();
    if (r.tau_station - agg).abs() > 4.0 * eps {
        return Err(format!("aggregate tau off by {:.1e}", (r.tau_station - agg).abs()));
    }
    let busy = timing::busy_durations(cfg);
    for model in [TransitionModel::Literal, TransitionModel::Normalized] {
        let e_t = timing::expected_transition_time_with(cfg, r, &busy, model).e_t;
        let gap = e_t[3] - e_t[0];
        let expected = r.p_tr * 5.0 * cfg.phy.slot();
        if (gap - expected).abs() > 64.0 * eps * e_t[3] {
            return Err(format!("E(T3)-E(T0) off by {:.1e}", (gap - expected).abs()));
        }
    }
    Ok(())
}

fn c5_identities() -> Outcome {
    let mut checked = 0;
    for mode in [AccessMode::Basic, AccessMode::RtsCts] {
        for n in 1..=50 {
            let mut cfg = default_table1().with_stations(n);
            cfg.access_mode = mode;
            let r = coupling::solve_fixed_point(&cfg).unwrap();
            if let Err(e) = identities_hold(&r, &cfg) {
                return outcome(false, format!("{mode} n={n}: {e}"));
            }
            checked += 1;
        }
    }
    outcome(
        true,
        format!("PI0=0, PI3 product, aggregate tau, E(T3)-E(T0)=P_tr*5*slot in {checked} solver results"),
    )
}

fn c6_analytic_vs_sim() -> Outcome {
    let start = Instant::now();
    let seeds = [1, 2, 3, 4, 5];
    let cfg = default_table1();
    let stations = [5, 10, 20];
    let analytic = edca_cli::analytic_rows(&cfg, &stations).unwrap();
    let simulated = edca_cli::simulated_rows(&cfg, &stations, 10_000_000, &seeds).unwrap();
    let comparison = table::compare(&analytic, &simulated).unwrap();

    let mut normalized_cfg = cfg.clone();
    normalized_cfg.model.transition_model = TransitionModel::Normalized;
    let normalized = edca_cli::analytic_rows(&normalized_cfg, &stations).unwrap();
    let normalized_cmp = table::compare(&normalized, &simulated).unwrap();

    println!("    analytic (literal transition time) vs simulated:");
    for line in edca_cli::comparison_report(&comparison).lines() {
        println!("      {line}");
    }
    let worst = |c: &table::Comparison| {
        c.gaps
            .iter()
            .filter(|g| g.ac <= 1)
            .map(|g| g.delay_rel().abs())
            .fold(0.0, f64::max)
    };
    let literal_gap = worst(&comparison);
    let normalized_gap = worst(&normalized_cmp);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        comparison.ordering_agrees() && literal_gap <= 0.30 && elapsed <= 300.0,
        format!(
            "ordering agreement {}, max |rel. delay gap| AC0/AC1 = {:.1}% (normalized transition time: {:.1}%), {elapsed:.1} s",
            if comparison.ordering_agrees() { "yes" } else { "no" },
            100.0 * literal_gap,
            100.0 * normalized_gap
        ),
    )
}

fn c7_collision_free() -> Outcome {
    let mut cfg = default_table1().with_stations(1);
    for ac in cfg.acs.iter_mut().skip(1) {
        *ac = AcParams::new(1 << 30, 1 << 30, 2, 0);
    }
    let r = sim::simulate(&cfg, 1_000_000, 1).unwrap();
    let s = r.acs[0];
    let w0 = f64::from(cfg.acs[0].cw_min);
    let exact = (w0 - 1.0) / 2.0 * cfg.phy.slot() + timing::busy_durations(&cfg).t_success[0];
    let se = s.delay_stddev / (s.success_count as f64).sqrt();
    let z = (s.mean_access_delay - exact) / se;
    outcome(
        z.abs() <= 3.0 && s.attempt_count == s.success_count,
        format!(
            "mean {:.3} us vs exact {exact:.3} us, {} frames, SE {se:.3} us, z = {z:+.2}",
            s.mean_access_delay, s.success_count
        ),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_edca-perf"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

fn c8_determinism(dir: &Path) -> Outcome {
    let mut same = true;
    let mut notes = Vec::new();
    let runs: [(&str, Vec<&str>); 2] = [
        ("analyze", vec!["analyze", "--n-min", "5", "--n-max", "50", "--plot"]),
        (
            "simulate",
            vec!["simulate", "--n-min", "5", "--n-max", "15", "--horizon-slots", "200000", "--seeds", "7,8"],
        ),
    ];
    for (name, args) in runs {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.join(format!("{name}_{k}.csv"));
            let mut full = args.clone();
            let out_str = out.to_str().unwrap().to_string();
            full.extend(["--out", out_str.as_str()]);
            let (code, _) = run_cli(&full);
            let mut bytes = read(&out);
            if name == "analyze" {
                for svg in edca_cli::plot_paths(&out) {
                    bytes.extend(read(&svg));
                }
            }
            outputs.push((code, bytes));
        }
        let identical = outputs[0] == outputs[1] && outputs[0].0 == 0 && !outputs[0].1.is_empty();
        same &= identical;
        notes.push(format!("{name} {} ({} bytes)", if identical { "identical" } else { "DIFFERS" }, outputs[0].1.len()));
    }
    outcome(same, notes.join(", "))
}

fn c9_figures(dir: &Path) -> Outcome {
    let out = dir.join("fig.csv");
    let (code, _) = run_cli(&["analyze", "--n-min", "5", "--n-max", "50", "--n-step", "1", "--plot", "--out", out.to_str().unwrap()]);
    if code != 0 {
        return outcome(false, format!("analyze exited with {code}"));
    }
    let rows: Vec<OutputRow> = table::read_rows(&String::from_utf8(read(&out)).unwrap()).unwrap();
    let series = |ac: usize, f: fn(&OutputRow) -> f64| -> Vec<f64> { rows.iter().filter(|r| r.ac == ac).map(f).collect() };
    let mut problems = Vec::new();
    for (name, f) in [("delay", (|r: &OutputRow| r.e_delay_us) as fn(&OutputRow) -> f64), ("jitter", |r| r.jitter_us)] {
        let s: Vec<Vec<f64>> = (0..NUM_ACS).map(|ac| series(ac, f)).collect();
        for (i, (((a0, a1), a2), a3)) in s[0].iter().zip(&s[1]).zip(&s[2]).zip(&s[3]).enumerate() {
            if a2.min(*a3) < 2.0 * a0.max(*a1) {
                problems.push(format!("{name}: AC2/AC3 not well above AC0/AC1 at row {i}"));
            }
        }
    }
    let d0 = series(0, |r| r.e_delay_us);
    let ratio = d0.iter().cloned().fold(0.0, f64::max) / d0.iter().cloned().fold(f64::INFINITY, f64::min);
    if ratio > 3.0 {
        problems.push(format!("AC0 delay max/min {ratio:.2}"));
    }
    let mut svg_series = Vec::new();
    for svg in edca_cli::plot_paths(&out) {
        let text = String::from_utf8(read(&svg)).unwrap_or_default();
        let count = text.matches(r#"class="series""#).count();
        if count != 4 || !text.contains("number of stations") {
            problems.push(format!("{} has {count} series", svg.display()));
        }
        svg_series.push(count);
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("2 SVGs with {svg_series:?} series; AC2/AC3 >= 2x AC0/AC1 at every n; AC0 delay max/min {ratio:.2}")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Check)> = vec![
        ("closed-form/oracle equivalence", Box::new(c1_oracle_equivalence)),
        ("moment equivalence", Box::new(c2_moment_equivalence)),
        ("fixed-point health", Box::new(c3_fixed_point_health)),
        ("delay and jitter ordering", Box::new(c4_orderings)),
        ("structural identities", Box::new(c5_identities)),
        ("analytics vs simulation", Box::new(c6_analytic_vs_sim)),
        ("collision-free exactness", Box::new(c7_collision_free)),
        ("determinism", Box::new(|| c8_determinism(dir.path()))),
        ("figure reproduction", Box::new(|| c9_figures(dir.path()))),
    ];
    let mut failed = Vec::new();
    for (idx, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {verdict}: {name}: {}", idx + 1, o.detail);
        if !o.pass {
            failed.push(idx + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
