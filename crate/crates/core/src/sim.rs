//! Simulation of saturated EDCA stations.
//!
//! Every station holds four backoff entities, one per AC. Time advances in
//! idle slots of length `σ` and in busy periods of exact length (the success
//! or collision durations of [`timing::busy_durations`], plus the extra
//! packets of a TXOP burst). Runs of idle slots in which nobody can attempt
//! are skipped in one step, which leaves the outcome unchanged.
//!
//! An entity counts down only when its AIFS wait has elapsed. The wait is
//! `aifsn - 2` idle slots after every busy period, because the busy durations
//! already end with the minimum AIFS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chain::ChainShape;
use crate::coupling;
use crate::error::{Error, Result};
use crate::params::{BurstUnit, ScenarioConfig, MIN_AIFSN, NUM_ACS};
use crate::timing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Resolve same-slot attempts inside a station in favour of the lowest
    /// AC. When off, each AC contends as if it were a station of its own.
    pub virtual_collisions: bool,
    /// Keep a histogram of every freshly drawn counter.
    pub record_counters: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            virtual_collisions: true,
            record_counters: false,
        }
    }
}

/// Backoff state of one AC in one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcEntity {
    pub stage: u32,
    pub counter: u32,
    pub aifs_wait_remaining: u32,
    /// Attempts made for the head-of-line frame so far.
    pub attempt_count: u32,
    /// When the head-of-line frame reached the head of the queue, µs.
    pub head_frame_birth: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimAcStats {
    /// Mean per-packet access delay, µs.
    pub mean_access_delay: f64,
    /// Standard deviation of the per-packet access delay, µs.
    pub delay_stddev: f64,
    pub success_count: u64,
    pub packets_delivered: u64,
    pub internal_collision_count: u64,
    pub external_collision_count: u64,
    pub drop_count: u64,
    pub attempt_count: u64,
    /// Idle slots in which the counter was decremented.
    pub countdown_slots: u64,
}

impl SimAcStats {
    /// Attempts per backoff slot (countdown slots plus attempt slots).
    pub fn attempt_rate(&self) -> f64 {
        self.attempt_count as f64 / (self.attempt_count + self.countdown_slots) as f64
    }

    /// Fraction of attempts that ended in a collision of either kind.
    pub fn collision_rate(&self) -> f64 {
        (self.internal_collision_count + self.external_collision_count) as f64 / self.attempt_count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub n_stations: u32,
    pub horizon_slots: u64,
    /// Simulated time, µs. May overrun the horizon by the final busy period;
    /// frames still in backoff at the end are not counted.
    pub total_sim_time: f64,
    pub acs: [SimAcStats; NUM_ACS],
    /// `[ac][stage]` attempts and collisions (internal plus external).
    pub stage_attempts: Vec<Vec<u64>>,
    pub stage_collisions: Vec<Vec<u64>>,
    /// `[ac][stage][counter]` draw counts when requested.
    pub counter_histograms: Option<Vec<Vec<Vec<u64>>>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    weight: f64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64, weight: f64) {
        self.weight += weight;
        let delta = x - self.mean;
        self.mean += delta * weight / self.weight;
        self.m2 += weight * delta * (x - self.mean);
    }

    fn stddev(&self) -> f64 {
        if self.weight > 1.0 {
            (self.m2 / (self.weight - 1.0)).max(0.0).sqrt()
        } else {
            0.0
        }
    }
}

struct AcSetup {
    shape: ChainShape,
    aifs_wait: u32,
    t_burst: f64,
    t_collision: f64,
}

fn setup(cfg: &ScenarioConfig) -> [AcSetup; NUM_ACS] {
    let shapes = coupling::chain_shapes(cfg);
    let busy = timing::busy_durations(cfg);
    let per_packet = timing::packet_time(&cfg.phy, BurstUnit::Exchange);
    std::array::from_fn(|ac| {
        let shape = shapes[ac];
        AcSetup {
            shape,
            aifs_wait: cfg.acs[ac].aifsn.saturating_sub(MIN_AIFSN),
            t_burst: busy.t_success[ac] + f64::from(shape.l - 1) * per_packet,
            t_collision: busy.t_collision[ac],
        }
    })
}

struct Engine<'a> {
    acs: &'a [AcSetup; NUM_ACS],
    entities: Vec<[AcEntity; NUM_ACS]>,
    rngs: Vec<ChaCha8Rng>,
    stats: [SimAcStats; NUM_ACS],
    delays: [Accumulator; NUM_ACS],
    stage_attempts: Vec<Vec<u64>>,
    stage_collisions: Vec<Vec<u64>>,
    histograms: Option<Vec<Vec<Vec<u64>>>>,
}

impl Engine<'_> {
    fn draw(&mut self, station: usize, ac: usize, stage: u32) -> u32 {
        let w = self.acs[ac].shape.window(stage);
        let k = self.rngs[station].random_range(0..w);
        if let Some(h) = self.histograms.as_mut() {
            h[ac][stage as usize][k as usize] += 1;
        }
        k
    }

    fn restart(&mut self, station: usize, ac: usize, now: f64) {
        let counter = self.draw(station, ac, 0);
        let e = &mut self.entities[station][ac];
        e.stage = 0;
        e.counter = counter;
        e.attempt_count = 0;
        e.head_frame_birth = now;
    }

    /// Failed attempt: next stage, or drop after the last one.
    fn collide(&mut self, station: usize, ac: usize, now: f64) {
        let stage = self.entities[station][ac].stage;
        self.stage_collisions[ac][stage as usize] += 1;
        if stage >= self.acs[ac].shape.last_stage() {
            self.stats[ac].drop_count += 1;
            self.restart(station, ac, now);
        } else {
            let counter = self.draw(station, ac, stage + 1);
            let e = &mut self.entities[station][ac];
            e.stage = stage + 1;
            e.counter = counter;
        }
    }
}

/// Run one replication with the default options.
pub fn simulate(cfg: &ScenarioConfig, horizon_slots: u64, seed: u64) -> Result<SimReport> {
    simulate_with(cfg, horizon_slots, seed, SimOptions::default())
}

pub fn simulate_with(cfg: &ScenarioConfig, horizon_slots: u64, seed: u64, options: SimOptions) -> Result<SimReport> {
    cfg.validate().into_result()?;
    if horizon_slots == 0 {
        return Err(Error::InvalidArgument("horizon must be at least one slot".into()));
    }
    let acs = setup(cfg);
    let n = cfg.n_stations as usize;
    let slot = cfg.phy.slot();
    let horizon = horizon_slots as f64 * slot;

    let rngs = (0..n)
        .map(|station| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(station as u64);
            rng
        })
        .collect();
    let idle = AcEntity {
        stage: 0,
        counter: 0,
        aifs_wait_remaining: 0,
        attempt_count: 0,
        head_frame_birth: 0.0,
    };
    let mut engine = Engine {
        acs: &acs,
        entities: vec![[idle; NUM_ACS]; n],
        rngs,
        stats: [SimAcStats::default(); NUM_ACS],
        delays: [Accumulator::default(); NUM_ACS],
        stage_attempts: acs.iter().map(|a| vec![0; a.shape.last_stage() as usize + 1]).collect(),
        stage_collisions: acs.iter().map(|a| vec![0; a.shape.last_stage() as usize + 1]).collect(),
        histograms: options.record_counters.then(|| {
            acs.iter()
                .map(|a| a.shape.windows().map(|w| vec![0; w as usize]).collect())
                .collect()
        }),
    };
    for station in 0..n {
        for ac in 0..NUM_ACS {
            engine.restart(station, ac, 0.0);
            engine.entities[station][ac].aifs_wait_remaining = acs[ac].aifs_wait;
        }
    }

    let mut now = 0.0;
    // (station, ac) pairs that transmit in the current slot
    let mut transmitters: Vec<(usize, usize)> = Vec::with_capacity(n * NUM_ACS);
    while now < horizon {
        let gap = engine
            .entities
            .iter()
            .flatten()
            .map(|e| e.aifs_wait_remaining + e.counter)
            .min()
            .expect("at least one station");
        if gap > 0 {
            let remaining = ((horizon - now) / slot).ceil() as u64;
            if u64::from(gap) >= remaining {
                now += remaining as f64 * slot;
                break;
            }
            for station in engine.entities.iter_mut() {
                for (ac, e) in station.iter_mut().enumerate() {
                    let from_wait = gap.min(e.aifs_wait_remaining);
                    e.aifs_wait_remaining -= from_wait;
                    let countdown = gap - from_wait;
                    e.counter -= countdown;
                    engine.stats[ac].countdown_slots += u64::from(countdown);
                }
            }
            now += f64::from(gap) * slot;
        }

        transmitters.clear();
        for station in 0..n {
            let mut winner_found = false;
            for ac in 0..NUM_ACS {
                let e = engine.entities[station][ac];
                if e.aifs_wait_remaining != 0 || e.counter != 0 {
                    continue;
                }
                engine.stats[ac].attempt_count += 1;
                engine.stage_attempts[ac][e.stage as usize] += 1;
                engine.entities[station][ac].attempt_count += 1;
                if !options.virtual_collisions || !winner_found {
                    transmitters.push((station, ac));
                    winner_found = true;
                } else {
                    engine.stats[ac].internal_collision_count += 1;
                    engine.collide(station, ac, now);
                }
            }
        }

        let busy = if let [(station, ac)] = transmitters[..] {
            let setup = &acs[ac];
            let end = now + setup.t_burst;
            let l = f64::from(setup.shape.l);
            let delay = (end - engine.entities[station][ac].head_frame_birth) / l;
            engine.delays[ac].push(delay, l);
            engine.stats[ac].success_count += 1;
            engine.stats[ac].packets_delivered += u64::from(setup.shape.l);
            engine.restart(station, ac, end);
            setup.t_burst
        } else {
            let longest = transmitters
                .iter()
                .map(|&(_, ac)| acs[ac].t_collision)
                .fold(0.0, f64::max);
            let end = now + longest;
            for &(station, ac) in &transmitters {
                engine.stats[ac].external_collision_count += 1;
                engine.collide(station, ac, end);
            }
            longest
        };
        now += busy;
        for station in engine.entities.iter_mut() {
            for (ac, e) in station.iter_mut().enumerate() {
                e.aifs_wait_remaining = acs[ac].aifs_wait;
            }
        }
    }

    let mut stats = engine.stats;
    for (s, acc) in stats.iter_mut().zip(&engine.delays) {
        s.mean_access_delay = if acc.weight > 0.0 { acc.mean } else { f64::NAN };
        s.delay_stddev = if acc.weight > 0.0 { acc.stddev() } else { f64::NAN };
    }
    Ok(SimReport {
        seed,
        n_stations: cfg.n_stations,
        horizon_slots,
        total_sim_time: now,
        acs: stats,
        stage_attempts: engine.stage_attempts,
        stage_collisions: engine.stage_collisions,
        counter_histograms: engine.histograms,
    })
}

/// Sample mean, standard error and 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_half_width: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Estimate {
        if samples.is_empty() {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                ci_half_width: f64::NAN,
            };
        }
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        if samples.len() < 2 {
            return Estimate {
                mean,
                std_error: f64::NAN,
                ci_half_width: f64::NAN,
            };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let std_error = (var / k).sqrt();
        let t = StudentsT::new(0.0, 1.0, k - 1.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        Estimate {
            mean,
            std_error,
            ci_half_width: t * std_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateAcStats {
    /// Across runs that delivered at least one packet.
    pub mean_access_delay: Estimate,
    pub delay_stddev: Estimate,
    pub collision_rate: Estimate,
    pub drop_rate: Estimate,
    pub packets_delivered: u64,
    pub runs_with_deliveries: usize,
}

impl ReplicateAcStats {
    /// No packet was delivered in any run: the delay exceeds the horizon.
    pub fn censored(&self) -> bool {
        self.packets_delivered == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub runs: Vec<SimReport>,
    pub acs: [ReplicateAcStats; NUM_ACS],
}

/// Independent runs, one per seed, aggregated across seeds.
pub fn replicate(cfg: &ScenarioConfig, horizon_slots: u64, seeds: &[u64]) -> Result<ReplicateReport> {
    replicate_with(cfg, horizon_slots, seeds, SimOptions::default())
}

pub fn replicate_with(
    cfg: &ScenarioConfig,
    horizon_slots: u64,
    seeds: &[u64],
    options: SimOptions,
) -> Result<ReplicateReport> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument("replication needs at least two seeds".into()));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| simulate_with(cfg, horizon_slots, seed, options))
        .collect::<Result<Vec<_>>>()?;
    let acs = std::array::from_fn(|ac| {
        let per_run: Vec<&SimAcStats> = runs.iter().map(|r| &r.acs[ac]).collect();
        let delivered: Vec<&SimAcStats> = per_run.iter().copied().filter(|s| s.success_count > 0).collect();
        let column = |rows: &[&SimAcStats], f: &dyn Fn(&SimAcStats) -> f64| {
            Estimate::from_samples(&rows.iter().map(|s| f(s)).collect::<Vec<_>>())
        };
        let attempted: Vec<&SimAcStats> = per_run.iter().copied().filter(|s| s.attempt_count > 0).collect();
        let finished: Vec<&SimAcStats> = per_run
            .iter()
            .copied()
            .filter(|s| s.success_count + s.drop_count > 0)
            .collect();
        ReplicateAcStats {
            mean_access_delay: column(&delivered, &|s| s.mean_access_delay),
            delay_stddev: column(&delivered, &|s| s.delay_stddev),
            collision_rate: column(&attempted, &|s| s.collision_rate()),
            drop_rate: column(&finished, &|s| s.drop_count as f64 / (s.success_count + s.drop_count) as f64),
            packets_delivered: per_run.iter().map(|s| s.packets_delivered).sum(),
            runs_with_deliveries: delivered.len(),
        }
    });
    Ok(ReplicateReport { runs, acs })
}
