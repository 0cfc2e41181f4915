//! Conserved-quantity monitoring, run instrumentation, and log-log power-law
//! fits of the block-step statistics.

use crate::config::{Backend, SimConfig};
use crate::error::{Error, Result};
use crate::force::{eval_block, BlockRequest};
use crate::hermite;
use crate::plummer::{generate_plummer, PlummerParams};
use crate::system::ParticleSystem;

/// Instrumented counters from one run, restricted to the measurement window.
#[derive(Debug, Clone)]
pub struct RunStatistics {
    /// Block steps executed inside the window.
    pub n_steps_total: u64,
    /// Size of every block stepped inside the window.
    pub block_sizes: Vec<usize>,
    /// Wall-clock spent stepping inside the window.
    pub wall_seconds: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    /// |(E_final - E_initial) / E_initial|.
    pub energy_error: f64,
    /// Sum over window steps of block_size * (N - 1).
    pub pairwise_interactions: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

impl RunStatistics {
    pub fn mean_block_size(&self) -> f64 {
        if self.block_sizes.is_empty() {
            0.0
        } else {
            self.block_sizes.iter().sum::<usize>() as f64 / self.block_sizes.len() as f64
        }
    }
}

/// Least-squares power law value = prefactor * N^exponent, fitted in log-log.
#[derive(Debug, Clone)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub sample_points: Vec<(f64, f64)>,
    /// Log-space residual of every sample point.
    pub residuals: Vec<f64>,
}

impl PowerLawFit {
    pub fn residual_rms(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

/// Total energy K + W with the softened potential of the reference kernel,
/// consistent with the force law actually integrated. The potential is always
/// evaluated in 64-bit so the measurement does not inherit the 32-bit
/// backend's rounding noise.
pub fn total_energy(sys: &ParticleSystem, eps: f64) -> Result<f64> {
    let mut cfg = SimConfig::default();
    cfg.set_eps(eps);
    let targets: Vec<usize> = (0..sys.len()).collect();
    let req = BlockRequest {
        target_indices: &targets,
        predicted_pos: &sys.pos,
        predicted_vel: &sys.vel,
    };
    let force = eval_block(&req, &sys.mass, &cfg, Backend::Reference64)?;
    let mut w = 0.0;
    for i in 0..sys.len() {
        w += 0.5 * sys.mass[i] * force.pot[i];
    }
    Ok(sys.kinetic_energy() + w)
}

/// Ordinary least squares of log(value) on log(N).
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerLawFit> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if samples.len() < 3 || samples.iter().any(|&(n, v)| !positive(n) || !positive(v)) {
        return Err(Error::BadFitInput);
    }
    let logs: Vec<(f64, f64)> = samples.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|l| l.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|l| l.1).sum::<f64>() / count;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &logs {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::BadFitInput);
    }
    let exponent = sxy / sxx;
    let intercept = mean_y - exponent * mean_x;
    let residuals: Vec<f64> =
        logs.iter().map(|&(x, y)| y - (intercept + exponent * x)).collect();
    Ok(PowerLawFit {
        prefactor: intercept.exp(),
        exponent,
        sample_points: samples.to_vec(),
        residuals,
    })
}

/// Generates a Plummer realization, runs the full protocol, and returns the
/// window statistics. Generation and initialization are excluded from the
/// wall-clock by construction.
pub fn measure_run(cfg: &SimConfig, params: &PlummerParams) -> Result<RunStatistics> {
    let mut sys = generate_plummer(params)?;
    hermite::run(&mut sys, cfg, &mut [])
}
