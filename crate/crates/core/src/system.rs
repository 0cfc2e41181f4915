use crate::error::{Error, Result};
use crate::vec3::Vector3;

/// Full dynamical state of an N-body system.
///
/// Invariants maintained by the integrator:
/// - every `dt[i]` is an exact power of two within the configured bounds,
/// - `t_now[i]` is an exact multiple of `dt[i]`,
/// - `t_now[i] <= time <= min_i (t_now[i] + dt[i])`.
///
/// All times live on a dyadic grid, so the equalities above are exact in
/// 64-bit arithmetic.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub mass: Vec<f64>,
    pub pos: Vec<Vector3>,
    pub vel: Vec<Vector3>,
    pub acc: Vec<Vector3>,
    pub jerk: Vec<Vector3>,
    /// Time at which each particle was last corrected.
    pub t_now: Vec<f64>,
    /// Individual time step of each particle; meaningful only once
    /// `initialized` is set.
    pub dt: Vec<f64>,
    /// Current global simulation time.
    pub time: f64,
    /// Set by the integrator once forces and time steps have been assigned.
    pub initialized: bool,
}

impl ParticleSystem {
    /// Builds a fresh system at `time = 0` with pending time steps.
    pub fn new(masses: Vec<f64>, positions: Vec<Vector3>, velocities: Vec<Vector3>) -> Result<Self> {
        let n = masses.len();
        if positions.len() != n || velocities.len() != n {
            return Err(Error::LengthMismatch {
                masses: n,
                positions: positions.len(),
                velocities: velocities.len(),
            });
        }
        if n < 2 {
            return Err(Error::TooFewParticles(n));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if m <= 0.0 {
                return Err(Error::NonPositiveMass { index: i, mass: m });
            }
        }
        for i in 0..n {
            if !positions[i].is_finite() || !velocities[i].is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(ParticleSystem {
            mass: masses,
            pos: positions,
            vel: velocities,
            acc: vec![Vector3::ZERO; n],
            jerk: vec![Vector3::ZERO; n],
            t_now: vec![0.0; n],
            dt: vec![0.0; n],
            time: 0.0,
            initialized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Total linear momentum.
    pub fn momentum(&self) -> Vector3 {
        let mut p = Vector3::ZERO;
        for i in 0..self.len() {
            p += self.vel[i] * self.mass[i];
        }
        p
    }

    /// Center-of-mass position.
    pub fn center_of_mass(&self) -> Vector3 {
        let mut c = Vector3::ZERO;
        for i in 0..self.len() {
            c += self.pos[i] * self.mass[i];
        }
        c * (1.0 / self.total_mass())
    }

    /// Kinetic energy, (1/2) sum m v^2.
    pub fn kinetic_energy(&self) -> f64 {
        let mut k = 0.0;
        for i in 0..self.len() {
            k += 0.5 * self.mass[i] * self.vel[i].norm_sq();
        }
        k
    }
}
