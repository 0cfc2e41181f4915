//! Equal-mass Plummer-sphere initial conditions in virial equilibrium.
//!
//! Sampling follows the classic rejection recipe: radii come from inverting
//! the cumulative mass profile q = m(r)/M with q uniform in (0, mass_cut),
//! r = (q^(-2/3) - 1)^(-1/2); speeds come from von Neumann rejection on
//! g(q) ∝ q^2 (1 - q^2)^(7/2) with v = q v_esc(r); directions are isotropic.
//!
//! Reproducibility contract: the generator is ChaCha12 seeded through
//! rand_core's `seed_from_u64`, uniform doubles are (bits >> 11) * 2^-53, and
//! per particle the draws are consumed in the fixed order radius, two
//! position angles, speed-rejection loop (two draws per trial), two velocity
//! angles. Identical (n, seed, mass_cut) give bit-identical systems.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::system::ParticleSystem;
use crate::vec3::Vector3;

/// Parameters of one Plummer realization.
#[derive(Debug, Clone, Copy)]
pub struct PlummerParams {
    pub n: usize,
    pub seed: u64,
    /// Truncation of the cumulative mass profile; radii are sampled from
    /// q in (0, mass_cut) so the realization has a finite maximum radius.
    pub mass_cut: f64,
}

impl PlummerParams {
    pub fn new(n: usize, seed: u64) -> Self {
        PlummerParams { n, seed, mass_cut: 0.999 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewParticles(self.n));
        }
        if self.mass_cut.is_nan() || self.mass_cut <= 0.0 || self.mass_cut >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "mass_cut must lie in (0, 1), got {}",
                self.mass_cut
            )));
        }
        Ok(())
    }
}

#[inline]
fn unit_f64(rng: &mut ChaCha12Rng) -> f64 {
    // 53 random mantissa bits, uniform on [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Isotropic unit vector from two uniform draws.
fn random_direction(rng: &mut ChaCha12Rng) -> Vector3 {
    let z = 1.0 - 2.0 * unit_f64(rng);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let theta = 2.0 * std::f64::consts::PI * unit_f64(rng);
    Vector3::new(s * theta.cos(), s * theta.sin(), z)
}

/// Radius in structural units by inverting the cumulative mass profile,
/// truncated at `mass_cut`.
fn sample_radius(rng: &mut ChaCha12Rng, mass_cut: f64) -> f64 {
    let q = loop {
        let u = unit_f64(rng);
        if u > 0.0 {
            break mass_cut * u;
        }
    };
    (q.powf(-2.0 / 3.0) - 1.0).sqrt().recip()
}

/// Speed as a fraction of the local escape speed, by von Neumann rejection
/// on g(q) = q^2 (1 - q^2)^(7/2); 0.1 bounds the maximum of g (~0.0922 at
/// q^2 = 2/9). The accepted fraction is strictly inside (0, 1), so sampled
/// speeds never reach the escape speed.
fn sample_speed_fraction(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let x = unit_f64(rng);
        let y = unit_f64(rng);
        if 0.1 * y < x * x * (1.0 - x * x).powf(3.5) {
            return x;
        }
    }
}

/// Local escape speed of the structural-units Plummer model.
fn escape_speed(r: f64) -> f64 {
    std::f64::consts::SQRT_2 * (1.0 + r * r).powf(-0.25)
}

/// Generates an equal-mass Plummer sphere and scales it to standard N-body
/// units (M = 1, K = 1/4, W = -1/2).
pub fn generate_plummer(params: &PlummerParams) -> Result<ParticleSystem> {
    params.validate()?;
    let n = params.n;
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);

    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        let r = sample_radius(&mut rng, params.mass_cut);
        pos.push(random_direction(&mut rng) * r);
        let v = sample_speed_fraction(&mut rng) * escape_speed(r);
        vel.push(random_direction(&mut rng) * v);
    }

    let masses = vec![1.0 / n as f64; n];
    let mut sys = ParticleSystem::new(masses, pos, vel)?;
    scale_to_standard(&mut sys)?;
    Ok(sys)
}

/// Unsoftened potential energy by direct pair summation.
fn potential_energy_unsoftened(sys: &ParticleSystem) -> Result<f64> {
    let mut w = 0.0;
    for i in 0..sys.len() {
        for j in (i + 1)..sys.len() {
            let r2 = (sys.pos[j] - sys.pos[i]).norm_sq();
            if r2 == 0.0 {
                return Err(Error::Singularity { i, j });
            }
            w -= sys.mass[i] * sys.mass[j] / r2.sqrt();
        }
    }
    Ok(w)
}

/// Rescales a system to standard N-body units: total mass 1, center of mass
/// and momentum zero, kinetic energy 1/4 and potential energy -1/2 (so
/// E = -1/4 and the virial ratio is 1/2). Scaling uses the eps = 0 potential;
/// the softened dynamics pick their own eps afterwards.
///
/// Positions scale by -2 W and, when the system is not at rest, velocities by
/// sqrt(1/(4 K)); a system at rest (K = 0) has nothing to scale and keeps its
/// zero velocities.
pub fn scale_to_standard(sys: &mut ParticleSystem) -> Result<()> {
    let m_total = sys.total_mass();
    if m_total.is_nan() || m_total <= 0.0 {
        return Err(Error::DegenerateScaling);
    }
    for m in &mut sys.mass {
        *m /= m_total;
    }

    let com = sys.center_of_mass();
    let vcm = sys.momentum(); // total mass is 1 now
    for i in 0..sys.len() {
        sys.pos[i] -= com;
        sys.vel[i] -= vcm;
    }

    let w = potential_energy_unsoftened(sys)?;
    if w == 0.0 || !w.is_finite() {
        return Err(Error::DegenerateScaling);
    }
    let x_scale = -2.0 * w;
    for p in &mut sys.pos {
        *p = *p * x_scale;
    }

    let k = sys.kinetic_energy();
    if k > 0.0 {
        let v_scale = (0.25 / k).sqrt();
        for v in &mut sys.vel {
            *v = *v * v_scale;
        }
    }
    Ok(())
}
