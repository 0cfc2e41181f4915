//! Fourth-order Hermite predictor-corrector with individual block time steps.
//!
//! One block step: pick the stars with the smallest t + dt (steps are powers
//! of two, so whole blocks fall due together), predict all N particles to
//! that time, recompute acceleration and jerk on the block members, correct
//! their positions and velocities to fourth order, then reassign their steps.
//! Prediction and correction happen on the "host" side in 64-bit regardless
//! of the force backend.
//!
//! All particle times and steps live on a dyadic grid (powers of two down to
//! dt_min, times below ~1e6), so every scheduling comparison in this module
//! is exact in f64 and blocks are selected by exact equality.

use std::time::Instant;

use crate::config::{floor_pow2, SimConfig};
use crate::diagnostics::{total_energy, RunStatistics};
use crate::error::{Error, Result};
use crate::force::{eval_block, eval_block_sorted, transfer_ledger, BlockRequest, SendPolicy};
use crate::system::ParticleSystem;
use crate::vec3::Vector3;

/// The set of particles due at the next block time.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSchedule {
    /// Earliest t + dt over all particles.
    pub t_next: f64,
    /// Indices due exactly at `t_next`, ascending.
    pub members: Vec<usize>,
}

/// Counters for one executed block step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub t_after: f64,
    pub block_size: usize,
    /// Pairwise interactions computed: block_size * (N - 1).
    pub force_evals: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

/// Read-only hook invoked after every block step.
pub trait Observer {
    fn on_step(&mut self, time: f64, sys: &ParticleSystem, report: &StepReport);
}

/// Predicted position and velocity after `dt`, in the Horner form
/// x_p = x + (v + (dt/2)(a + (dt/3)k)) dt,  v_p = v + (a + (dt/2)k) dt.
pub fn predict(pos: Vector3, vel: Vector3, acc: Vector3, jerk: Vector3, dt: f64) -> (Vector3, Vector3) {
    let x_p = pos + (vel + (acc + jerk * (dt / 3.0)) * (dt / 2.0)) * dt;
    let v_p = vel + (acc + jerk * (dt / 2.0)) * dt;
    (x_p, v_p)
}

/// Output of the Hermite corrector for one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub pos: Vector3,
    pub vel: Vector3,
    /// Scaled second derivative of the acceleration: a2 = d2a/dt2 * dt^2 / 2.
    pub a2: Vector3,
    /// Scaled third derivative: a3 = d3a/dt3 * dt^3 / 6.
    pub a3: Vector3,
}

/// Corrects a predicted state once the block forces have been recomputed.
///
/// `acc`/`jerk` are the values from the previous step, `acc_new`/`jerk_new`
/// the freshly summed ones at the predicted state:
///
/// a3 = 2 (a - a_new) + (k + k_new) dt
/// a2 = -3 (a - a_new) - (2 k + k_new) dt
/// x  = x_p + (a2/12 + a3/20) dt^2
/// v  = v_p + (a2/3  + a3/4 ) dt
pub fn correct(
    x_p: Vector3,
    v_p: Vector3,
    acc: Vector3,
    jerk: Vector3,
    acc_new: Vector3,
    jerk_new: Vector3,
    dt: f64,
) -> Correction {
    let da = acc - acc_new;
    let a3 = da * 2.0 + (jerk + jerk_new) * dt;
    let a2 = da * -3.0 - (jerk * 2.0 + jerk_new) * dt;
    let pos = x_p + (a2 * (1.0 / 12.0) + a3 * (1.0 / 20.0)) * (dt * dt);
    let vel = v_p + (a2 * (1.0 / 3.0) + a3 * (1.0 / 4.0)) * dt;
    Correction { pos, vel, a2, a3 }
}

/// Aarseth step criterion on the freshly corrected derivatives, quantized to
/// the power-of-two grid.
///
/// `a2`/`a3` are the scaled corrector outputs; they are unscaled here to true
/// time derivatives (d2a/dt2 = 2 a2/dt^2, d3a/dt3 = 6 a3/dt^3). The step may
/// halve (repeatedly) or double, but doubling is gated on `t_new` being an
/// exact multiple of the doubled step so the block structure survives.
pub fn new_timestep(
    acc: Vector3,
    jerk: Vector3,
    a2: Vector3,
    a3: Vector3,
    dt_old: f64,
    t_new: f64,
    cfg: &SimConfig,
) -> Result<f64> {
    let a0m = acc.norm();
    let a1m = jerk.norm();
    let a2m = (a2 * (2.0 / (dt_old * dt_old))).norm();
    let a3m = (a3 * (6.0 / (dt_old * dt_old * dt_old))).norm();

    let denom = a1m * a3m + a2m * a2m;
    let dt_star = if denom == 0.0 {
        cfg.dt_max
    } else {
        (cfg.eta * (a0m * a2m + a1m * a1m) / denom).sqrt()
    };

    let mut dt = dt_old;
    if dt_star < dt_old {
        while dt > dt_star {
            dt *= 0.5;
            if dt < cfg.dt_min {
                return Err(Error::TimeStepUnderflow { dt_min: cfg.dt_min });
            }
        }
    } else if dt_star >= 2.0 * dt_old && 2.0 * dt_old <= cfg.dt_max && t_new % (2.0 * dt_old) == 0.0 {
        dt = 2.0 * dt_old;
    }
    Ok(dt.min(cfg.dt_max))
}

/// Computes forces for the whole system and assigns initial individual steps:
/// the largest power of two at most min(dt_max, eta_init |a| / |k|), with
/// zero jerk mapping to dt_max.
pub fn initialize(sys: &mut ParticleSystem, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    let n = sys.len();

    // A system restarted from an arbitrary snapshot time may need a smaller
    // step ceiling to stay commensurable.
    let mut dt_cap = cfg.dt_max;
    while sys.time % dt_cap != 0.0 {
        dt_cap *= 0.5;
        if dt_cap < cfg.dt_min {
            return Err(Error::IncommensurableTime(sys.time));
        }
    }

    let targets: Vec<usize> = (0..n).collect();
    let req = BlockRequest {
        target_indices: &targets,
        predicted_pos: &sys.pos,
        predicted_vel: &sys.vel,
    };
    let force = if cfg.sorted_accumulation {
        eval_block_sorted(&req, &sys.mass, cfg)?
    } else {
        eval_block(&req, &sys.mass, cfg, cfg.backend)?
    };

    for i in 0..n {
        sys.acc[i] = force.acc[i];
        sys.jerk[i] = force.jerk[i];
        let jerk_mag = sys.jerk[i].norm();
        let raw = if jerk_mag == 0.0 {
            dt_cap
        } else {
            dt_cap.min(cfg.eta_init * sys.acc[i].norm() / jerk_mag)
        };
        if raw.is_nan() || raw < cfg.dt_min {
            return Err(Error::TimeStepUnderflow { dt_min: cfg.dt_min });
        }
        sys.dt[i] = floor_pow2(raw);
        sys.t_now[i] = sys.time;
    }
    sys.initialized = true;
    Ok(())
}

/// Finds the earliest due time t + dt and every particle that shares it.
pub fn select_block(sys: &ParticleSystem) -> Result<BlockSchedule> {
    if !sys.initialized {
        return Err(Error::NotInitialized);
    }
    let mut t_next = f64::INFINITY;
    for i in 0..sys.len() {
        let due = sys.t_now[i] + sys.dt[i];
        if due < t_next {
            t_next = due;
        }
    }
    let members: Vec<usize> =
        (0..sys.len()).filter(|&i| sys.t_now[i] + sys.dt[i] == t_next).collect();
    Ok(BlockSchedule { t_next, members })
}

/// Predicts every particle to `t_next`. Particles already at `t_next` are
/// passed through bit-exactly.
pub fn predict_all(sys: &ParticleSystem, t_next: f64) -> Result<(Vec<Vector3>, Vec<Vector3>)> {
    let n = sys.len();
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for i in 0..n {
        let dt = t_next - sys.t_now[i];
        if dt < 0.0 {
            return Err(Error::TimeReversal { index: i, t: t_next, t_part: sys.t_now[i] });
        }
        if dt == 0.0 {
            pos.push(sys.pos[i]);
            vel.push(sys.vel[i]);
        } else {
            let (x_p, v_p) = predict(sys.pos[i], sys.vel[i], sys.acc[i], sys.jerk[i], dt);
            pos.push(x_p);
            vel.push(v_p);
        }
    }
    Ok((pos, vel))
}

/// Executes one block step: select, predict, recompute forces on the block,
/// correct, reassign steps, advance the global clock.
pub fn step(sys: &mut ParticleSystem, cfg: &SimConfig) -> Result<StepReport> {
    let sched = select_block(sys)?;
    let (pred_pos, pred_vel) = predict_all(sys, sched.t_next)?;
    let req = BlockRequest {
        target_indices: &sched.members,
        predicted_pos: &pred_pos,
        predicted_vel: &pred_vel,
    };
    let force = if cfg.sorted_accumulation {
        eval_block_sorted(&req, &sys.mass, cfg)?
    } else {
        eval_block(&req, &sys.mass, cfg, cfg.backend)?
    };
    let ledger = transfer_ledger(&req, SendPolicy::AllParticles);

    for (slot, &i) in sched.members.iter().enumerate() {
        let dt = sched.t_next - sys.t_now[i];
        debug_assert_eq!(dt, sys.dt[i]);
        let corr = correct(
            pred_pos[i],
            pred_vel[i],
            sys.acc[i],
            sys.jerk[i],
            force.acc[slot],
            force.jerk[slot],
            dt,
        );
        sys.pos[i] = corr.pos;
        sys.vel[i] = corr.vel;
        sys.acc[i] = force.acc[slot];
        sys.jerk[i] = force.jerk[slot];
        sys.dt[i] = new_timestep(sys.acc[i], sys.jerk[i], corr.a2, corr.a3, dt, sched.t_next, cfg)?;
        sys.t_now[i] = sched.t_next;
    }
    sys.time = sched.t_next;

    let n = sys.len();
    Ok(StepReport {
        t_after: sched.t_next,
        block_size: sched.members.len(),
        force_evals: (sched.members.len() as u64) * ((n - 1) as u64),
        bytes_sent: ledger.bytes_sent,
        bytes_received: ledger.bytes_received,
    })
}

/// Runs until `time == t_end` exactly, accumulating counters and wall-clock
/// separately inside the window [measure_from, t_end]. Initialization and
/// energy bookkeeping are excluded from the wall-clock.
pub fn run(
    sys: &mut ParticleSystem,
    cfg: &SimConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<RunStatistics> {
    cfg.validate()?;
    if cfg.t_end % cfg.dt_max != 0.0 {
        return Err(Error::InvalidConfig(format!(
            "t_end ({}) must be a multiple of dt_max ({}) to be reachable on the step grid",
            cfg.t_end, cfg.dt_max
        )));
    }
    if !sys.initialized {
        initialize(sys, cfg)?;
    }

    let energy_initial = total_energy(sys, cfg.eps)?;
    let mut stats = RunStatistics {
        n_steps_total: 0,
        block_sizes: Vec::new(),
        wall_seconds: 0.0,
        energy_initial,
        energy_final: energy_initial,
        energy_error: 0.0,
        pairwise_interactions: 0,
        bytes_sent: 0,
        bytes_received: 0,
    };

    while sys.time < cfg.t_end {
        let start = Instant::now();
        let report = step(sys, cfg)?;
        let elapsed = start.elapsed().as_secs_f64();
        if report.t_after > cfg.measure_from && report.t_after <= cfg.t_end {
            stats.n_steps_total += 1;
            stats.block_sizes.push(report.block_size);
            stats.wall_seconds += elapsed;
            stats.pairwise_interactions += report.force_evals;
            stats.bytes_sent += report.bytes_sent;
            stats.bytes_received += report.bytes_received;
        }
        for obs in observers.iter_mut() {
            obs.on_step(sys.time, sys, &report);
        }
    }

    stats.energy_final = total_energy(sys, cfg.eps)?;
    stats.energy_error = ((stats.energy_final - stats.energy_initial) / stats.energy_initial).abs();
    Ok(stats)
}
