//! Shared oracles for the integration and acceptance suites. Everything here
//! is deliberately written against the mathematical definitions, not against
//! the library's kernels, so the comparisons stay two-route.

#![allow(dead_code)]

use nbody_core::system::ParticleSystem;
use nbody_core::vec3::Vector3;

/// Brute-force pair summation of the softened acceleration, jerk and
/// potential. Loops over unordered pairs and scatters into both particles;
/// powers go through powf instead of reciprocal chains.
pub fn oracle_forces(
    masses: &[f64],
    pos: &[Vector3],
    vel: &[Vector3],
    eps2: f64,
) -> (Vec<Vector3>, Vec<Vector3>, Vec<f64>) {
    let n = masses.len();
    let mut acc = vec![Vector3::ZERO; n];
    let mut jerk = vec![Vector3::ZERO; n];
    let mut pot = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pos[j] - pos[i];
            let dv = vel[j] - vel[i];
            let d2 = dx.norm_sq() + eps2;
            let d1 = d2.powf(0.5);
            let d3 = d2.powf(1.5);
            let d5 = d2.powf(2.5);
            let xdotv = dx.dot(dv);

            acc[i] += dx * (masses[j] / d3);
            acc[j] -= dx * (masses[i] / d3);
            let jterm = dv * (1.0 / d3) - dx * (3.0 * xdotv / d5);
            jerk[i] += jterm * masses[j];
            jerk[j] -= jterm * masses[i];
            pot[i] -= masses[j] / d1;
            pot[j] -= masses[i] / d1;
        }
    }
    (acc, jerk, pot)
}

/// Potential energy as the direct sum over unordered pairs,
/// -m_i m_j / sqrt(r^2 + eps^2).
pub fn oracle_potential_energy(sys: &ParticleSystem, eps: f64) -> f64 {
    let eps2 = eps * eps;
    let mut w = 0.0;
    for i in 0..sys.len() {
        for j in (i + 1)..sys.len() {
            let d2 = (sys.pos[j] - sys.pos[i]).norm_sq() + eps2;
            w -= sys.mass[i] * sys.mass[j] / d2.powf(0.5);
        }
    }
    w
}

/// Deterministic low-state PRNG for test fixtures that do not need the
/// library's generator (keeps oracle inputs independent of it).
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [-0.5, 0.5).
    pub fn centered(&mut self) -> f64 {
        self.unit() - 0.5
    }
}

/// Random N-body configuration in a unit box with mild velocities.
pub fn random_configuration(n: usize, seed: u64) -> (Vec<f64>, Vec<Vector3>, Vec<Vector3>) {
    let mut rng = SplitMix64(seed);
    let mut masses = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        masses.push(0.5 + rng.unit()); // in [0.5, 1.5)
        pos.push(Vector3::new(rng.centered(), rng.centered(), rng.centered()));
        vel.push(Vector3::new(rng.centered(), rng.centered(), rng.centered()));
    }
    (masses, pos, vel)
}

/// Analytic two-body Kepler orbit with total mass 1 (two equal masses) and
/// semi-major axis 1, starting at apocenter along +x with the relative
/// velocity along -y. The mean motion is 1, the period 2 pi.
pub struct KeplerOrbit {
    pub eccentricity: f64,
}

impl KeplerOrbit {
    /// Initial conditions as a two-particle system (masses 0.5 each, center
    /// of mass at rest at the origin).
    pub fn initial_system(&self) -> ParticleSystem {
        let e = self.eccentricity;
        let r_apo = 1.0 + e;
        // vis-viva at apocenter: v^2 = GM (2/r - 1/a), GM = 1, a = 1
        let v_apo = (2.0 / r_apo - 1.0).sqrt();
        let rel_pos = Vector3::new(-r_apo, 0.0, 0.0);
        let rel_vel = Vector3::new(0.0, -v_apo, 0.0);
        ParticleSystem::new(
            vec![0.5, 0.5],
            vec![rel_pos * -0.5, rel_pos * 0.5],
            vec![rel_vel * -0.5, rel_vel * 0.5],
        )
        .unwrap()
    }

    /// Eccentric anomaly at time t (starts at apocenter: E = pi at t = 0).
    fn eccentric_anomaly(&self, t: f64) -> f64 {
        let e = self.eccentricity;
        let mean = std::f64::consts::PI + t; // mean motion is 1
        let mut ecc = mean;
        for _ in 0..64 {
            let f = ecc - e * ecc.sin() - mean;
            let fp = 1.0 - e * ecc.cos();
            let step = f / fp;
            ecc -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        ecc
    }

    /// Relative separation vector (particle 1 minus particle 0) at time t.
    pub fn relative_position(&self, t: f64) -> Vector3 {
        let e = self.eccentricity;
        let ecc = self.eccentric_anomaly(t);
        Vector3::new(ecc.cos() - e, (1.0 - e * e).sqrt() * ecc.sin(), 0.0)
    }

    /// Relative velocity at time t.
    pub fn relative_velocity(&self, t: f64) -> Vector3 {
        let e = self.eccentricity;
        let ecc = self.eccentric_anomaly(t);
        let rate = 1.0 / (1.0 - e * ecc.cos());
        Vector3::new(-ecc.sin() * rate, (1.0 - e * e).sqrt() * ecc.cos() * rate, 0.0)
    }

    /// Two-particle system at orbital phase `t` (time reset to zero).
    pub fn system_at_phase(&self, t: f64) -> ParticleSystem {
        let rel_pos = self.relative_position(t);
        let rel_vel = self.relative_velocity(t);
        ParticleSystem::new(
            vec![0.5, 0.5],
            vec![rel_pos * -0.5, rel_pos * 0.5],
            vec![rel_vel * -0.5, rel_vel * 0.5],
        )
        .unwrap()
    }

    /// Position of particle `which` (0 or 1) at time t.
    pub fn particle_position(&self, which: usize, t: f64) -> Vector3 {
        let rel = self.relative_position(t);
        if which == 0 {
            rel * -0.5
        } else {
            rel * 0.5
        }
    }
}
