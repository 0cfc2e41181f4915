use crate::error::{Error, Result};

/// Arithmetic backend for the force kernel.
///
/// `Reference64` accumulates every pairwise term in 64-bit. `Stream32`
/// reproduces the execution semantics of a 32-bit streaming accelerator:
/// inputs are quantized to single precision and every intermediate of the
/// pairwise term, including the running sums, is rounded to 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Reference64,
    Stream32,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ref64" | "reference64" => Ok(Backend::Reference64),
            "stream32" => Ok(Backend::Stream32),
            other => Err(format!("unknown backend \"{other}\" (expected ref64 or stream32)")),
        }
    }
}

/// Simulation configuration in N-body units (G = 1).
///
/// Times and time steps are kept in 64 bits under both backends; only the
/// force arithmetic precision varies. Bookkeeping stays on the "host" side
/// at full precision.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Softening length.
    pub eps: f64,
    /// eps squared, precomputed; must equal `eps * eps` exactly.
    pub eps2: f64,
    /// Maximum time step, a power of two.
    pub dt_max: f64,
    /// Minimum admissible time step, a power of two. Falling below it is a
    /// hard error, not a silent clamp: a collapsing step signals a close
    /// encounter, which this scheme does not treat.
    pub dt_min: f64,
    /// Aarseth time-step accuracy parameter.
    pub eta: f64,
    /// Accuracy parameter for the initial step assignment. The startup rule
    /// eta_init |a|/|jerk| over-estimates the safe step for a tight pair
    /// whose relative velocity is momentarily near-perpendicular (small
    /// jerk, short orbital time), and the damage of one over-long first step
    /// is never repaired, so the default is deliberately conservative.
    pub eta_init: f64,
    /// Newton constant; fixed at 1 in N-body units.
    pub grav_const: f64,
    /// End time of the run.
    pub t_end: f64,
    /// Start of the timing/statistics window.
    pub measure_from: f64,
    /// PRNG seed for initial conditions.
    pub seed: u64,
    pub backend: Backend,
    /// Accumulate force contributions in ascending order of magnitude.
    pub sorted_accumulation: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let eps = 1.0 / 256.0;
        SimConfig {
            eps,
            eps2: eps * eps,
            dt_max: 0.125,
            dt_min: 2f64.powi(-23),
            eta: 0.02,
            eta_init: 0.001,
            grav_const: 1.0,
            t_end: 0.5,
            measure_from: 0.25,
            seed: 1,
            backend: Backend::Reference64,
            sorted_accumulation: false,
        }
    }
}

impl SimConfig {
    /// Sets the softening length, keeping `eps2 = eps * eps` in sync.
    pub fn set_eps(&mut self, eps: f64) {
        self.eps = eps;
        self.eps2 = eps * eps;
    }

    /// Checks the structural invariants (softening, power-of-two step bounds).
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::InvalidConfig(format!("eps must be >= 0, got {}", self.eps)));
        }
        if self.eps2 != self.eps * self.eps {
            return Err(Error::InvalidConfig("eps2 is not exactly eps * eps".into()));
        }
        if !is_power_of_two(self.dt_max) || !is_power_of_two(self.dt_min) {
            return Err(Error::InvalidConfig(format!(
                "dt_max ({}) and dt_min ({}) must be powers of two",
                self.dt_max, self.dt_min
            )));
        }
        if self.dt_min > self.dt_max {
            return Err(Error::InvalidConfig(format!(
                "dt_min ({}) must not exceed dt_max ({})",
                self.dt_min, self.dt_max
            )));
        }
        if self.eta.is_nan() || self.eta <= 0.0 || self.eta_init.is_nan() || self.eta_init <= 0.0 {
            return Err(Error::InvalidConfig("eta and eta_init must be positive".into()));
        }
        // The kernels are written for N-body units.
        if self.grav_const != 1.0 {
            return Err(Error::InvalidConfig(format!(
                "grav_const is fixed at 1 in N-body units, got {}",
                self.grav_const
            )));
        }
        Ok(())
    }
}

/// True when `x` is an exact power of two (2^k for integer k, positive).
pub fn is_power_of_two(x: f64) -> bool {
    if x <= 0.0 || !x.is_finite() {
        return false;
    }
    let e = x.log2().round() as i32;
    2f64.powi(e) == x
}

/// Largest power of two that is <= `x`. Requires `x > 0`.
pub fn floor_pow2(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut p = 2f64.powi(x.log2().floor() as i32);
    // log2+floor can land one bin off at representation boundaries.
    while p > x {
        p *= 0.5;
    }
    while p * 2.0 <= x {
        p *= 2.0;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.eps, 1.0 / 256.0);
        assert_eq!(cfg.eps2, cfg.eps * cfg.eps);
        assert_eq!(cfg.dt_max, 0.125);
    }

    #[test]
    fn power_of_two_detection() {
        assert!(is_power_of_two(0.125));
        assert!(is_power_of_two(1.0));
        assert!(is_power_of_two(2f64.powi(-23)));
        assert!(!is_power_of_two(0.1));
        assert!(!is_power_of_two(0.0));
        assert!(!is_power_of_two(-0.25));
    }

    #[test]
    fn floor_pow2_exact_and_between() {
        assert_eq!(floor_pow2(0.125), 0.125);
        assert_eq!(floor_pow2(0.1), 0.0625);
        assert_eq!(floor_pow2(1.5), 1.0);
        assert_eq!(floor_pow2(0.01), 0.0078125);
    }

    #[test]
    fn non_power_step_rejected() {
        let mut cfg = SimConfig::default();
        cfg.dt_max = 0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_unit_gravitational_constant_rejected() {
        let mut cfg = SimConfig::default();
        cfg.grav_const = 2.0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn floor_pow2_is_power_and_bounds(x in 1e-12f64..1e12) {
            let p = floor_pow2(x);
            prop_assert!(is_power_of_two(p));
            prop_assert!(p <= x);
            prop_assert!(2.0 * p > x);
        }
    }
}
