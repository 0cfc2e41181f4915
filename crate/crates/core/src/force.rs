//! Direct O(N^2) evaluation of softened acceleration, jerk and potential on a
//! block of target particles.
//!
//! Two backends share one mathematical definition. `Reference64` accumulates
//! in 64-bit. `Stream32` reproduces a 32-bit streaming accelerator: mass,
//! position and velocity are quantized to single precision on "transfer", the
//! whole pairwise term is computed in 32-bit arithmetic without fused
//! multiply-adds, and the running sums are 32-bit as well. Both backends sweep
//! sources in the fixed order j = 0..n-1 (skipping the target itself), so
//! results are bit-identical between calls regardless of internal parallelism;
//! only the parallel split over *targets* is allowed.

use rayon::prelude::*;

use crate::config::{Backend, SimConfig};
use crate::error::{Error, Result};
use crate::vec3::Vector3;

/// Work size below which the target loop stays serial.
const PAR_THRESHOLD: usize = 1 << 16;

/// Accelerations, jerks and potentials for the members of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceResult {
    pub acc: Vec<Vector3>,
    pub jerk: Vec<Vector3>,
    /// Per-particle potential; negative for bound configurations.
    pub pot: Vec<f64>,
}

/// One force evaluation request: the block members plus the predicted state
/// of *all* N particles at the block time (the stream layout transfers the
/// whole system every block step).
#[derive(Debug, Clone, Copy)]
pub struct BlockRequest<'a> {
    pub target_indices: &'a [usize],
    pub predicted_pos: &'a [Vector3],
    pub predicted_vel: &'a [Vector3],
}

/// Which particles a transfer ships: the whole system (stream/texture
/// semantics) or just the current block (the proposed future scheme).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendPolicy {
    BlockOnly,
    AllParticles,
}

/// Byte counts of one emulated host/accelerator round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferLedger {
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

/// Bytes shipped per particle towards the accelerator: mass + position +
/// velocity, 7 values of 4 bytes.
pub const BYTES_SENT_PER_PARTICLE: u64 = 56;
/// Bytes received per particle: acceleration + jerk + potential, 7 x 4 bytes.
pub const BYTES_RECEIVED_PER_PARTICLE: u64 = 28;

impl<'a> BlockRequest<'a> {
    fn validate(&self, n_masses: usize) -> Result<()> {
        let n = self.predicted_pos.len();
        if self.predicted_vel.len() != n || n_masses != n {
            return Err(Error::InvalidBlock(format!(
                "predicted arrays and masses must all have length n (got {} pos, {} vel, {} masses)",
                n,
                self.predicted_vel.len(),
                n_masses
            )));
        }
        let mut seen = vec![false; n];
        for &i in self.target_indices {
            if i >= n {
                return Err(Error::InvalidBlock(format!("target index {i} out of range (n = {n})")));
            }
            if seen[i] {
                return Err(Error::InvalidBlock(format!("duplicate target index {i}")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Pure accounting of what the emulated transfer would move; no data flows.
pub fn transfer_ledger(req: &BlockRequest, policy: SendPolicy) -> TransferLedger {
    let count = match policy {
        SendPolicy::AllParticles => req.predicted_pos.len() as u64,
        SendPolicy::BlockOnly => req.target_indices.len() as u64,
    };
    TransferLedger {
        bytes_sent: BYTES_SENT_PER_PARTICLE * count,
        bytes_received: BYTES_RECEIVED_PER_PARTICLE * count,
    }
}

/// Evaluates acceleration, jerk and potential on every block member.
///
/// For target i: acc = sum_{j != i} m_j dx / (r^2 + eps^2)^(3/2), with
/// dx = x_j - x_i; jerk and potential follow the same softened kernel. The
/// self term is excluded by index, never by relying on dx = 0: with softening
/// a self term would wrongly contribute -m/eps to the potential.
pub fn eval_block(
    req: &BlockRequest,
    masses: &[f64],
    cfg: &SimConfig,
    backend: Backend,
) -> Result<ForceResult> {
    req.validate(masses.len())?;
    match backend {
        Backend::Reference64 => eval_ref64(req, masses, cfg.eps2, false),
        Backend::Stream32 => eval_stream32(req, masses, cfg.eps2, false),
    }
}

/// As [`eval_block`], but per target the partial contributions are
/// accumulated in ascending order of acceleration magnitude (ties broken by
/// source index). Summing the smallest forces first reduces the 32-bit
/// accumulation error; the backend is taken from `cfg`.
pub fn eval_block_sorted(req: &BlockRequest, masses: &[f64], cfg: &SimConfig) -> Result<ForceResult> {
    req.validate(masses.len())?;
    match cfg.backend {
        Backend::Reference64 => eval_ref64(req, masses, cfg.eps2, true),
        Backend::Stream32 => eval_stream32(req, masses, cfg.eps2, true),
    }
}

fn eval_ref64(req: &BlockRequest, masses: &[f64], eps2: f64, sorted: bool) -> Result<ForceResult> {
    let pos = req.predicted_pos;
    let vel = req.predicted_vel;
    let n = pos.len();
    let targets = req.target_indices;

    let one = |&i: &usize| -> Result<(Vector3, Vector3, f64)> {
        if sorted {
            target_ref64_sorted(i, pos, vel, masses, eps2)
        } else {
            target_ref64(i, pos, vel, masses, eps2)
        }
    };

    let rows: Vec<(Vector3, Vector3, f64)> = if targets.len() * n >= PAR_THRESHOLD {
        targets.par_iter().map(one).collect::<Result<_>>()?
    } else {
        targets.iter().map(one).collect::<Result<_>>()?
    };
    Ok(split_rows(rows))
}

fn target_ref64(
    i: usize,
    pos: &[Vector3],
    vel: &[Vector3],
    masses: &[f64],
    eps2: f64,
) -> Result<(Vector3, Vector3, f64)> {
    let (xi, vi) = (pos[i], vel[i]);
    let mut acc = Vector3::ZERO;
    let mut jerk = Vector3::ZERO;
    let mut pot = 0.0;
    for j in 0..pos.len() {
        if j == i {
            continue;
        }
        let dx = pos[j] - xi;
        let dv = vel[j] - vi;
        let r2 = eps2 + dx.norm_sq();
        if r2 == 0.0 {
            return Err(Error::Singularity { i, j });
        }
        let xdotv = dx.dot(dv);
        let r2inv = 1.0 / r2;
        let rinv = r2inv.sqrt();
        let r3inv = r2inv * rinv;
        let r5inv = r2inv * r3inv;
        let xdotvr5inv = 3.0 * xdotv * r5inv;
        let mj = masses[j];
        acc += dx * (mj * r3inv);
        jerk += (dv * r3inv - dx * xdotvr5inv) * mj;
        pot -= mj * rinv;
    }
    Ok((acc, jerk, pot))
}

fn target_ref64_sorted(
    i: usize,
    pos: &[Vector3],
    vel: &[Vector3],
    masses: &[f64],
    eps2: f64,
) -> Result<(Vector3, Vector3, f64)> {
    let (xi, vi) = (pos[i], vel[i]);
    let mut terms: Vec<SortedTerm<f64, Vector3>> = Vec::with_capacity(pos.len() - 1);
    for j in 0..pos.len() {
        if j == i {
            continue;
        }
        let dx = pos[j] - xi;
        let dv = vel[j] - vi;
        let r2 = eps2 + dx.norm_sq();
        if r2 == 0.0 {
            return Err(Error::Singularity { i, j });
        }
        let xdotv = dx.dot(dv);
        let r2inv = 1.0 / r2;
        let rinv = r2inv.sqrt();
        let r3inv = r2inv * rinv;
        let r5inv = r2inv * r3inv;
        let xdotvr5inv = 3.0 * xdotv * r5inv;
        let mj = masses[j];
        let a = dx * (mj * r3inv);
        let k = (dv * r3inv - dx * xdotvr5inv) * mj;
        terms.push((a.norm_sq(), j, a, k, -mj * rinv));
    }
    terms.sort_unstable_by(|l, r| l.0.partial_cmp(&r.0).unwrap().then(l.1.cmp(&r.1)));
    let mut acc = Vector3::ZERO;
    let mut jerk = Vector3::ZERO;
    let mut pot = 0.0;
    for &(_, _, a, k, p) in &terms {
        acc += a;
        jerk += k;
        pot += p;
    }
    Ok((acc, jerk, pot))
}

/// 32-bit view of the system state, the analogue of the input textures.
struct StreamInput {
    pos: Vec<[f32; 3]>,
    vel: Vec<[f32; 3]>,
    mass: Vec<f32>,
}

/// One pairwise contribution tagged for magnitude sorting:
/// (|acc|^2, source index, acc, jerk, potential).
type SortedTerm<T, V> = (T, usize, V, V, T);

impl StreamInput {
    fn quantize(pos: &[Vector3], vel: &[Vector3], masses: &[f64]) -> Self {
        StreamInput {
            pos: pos.iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
            vel: vel.iter().map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect(),
            mass: masses.iter().map(|&m| m as f32).collect(),
        }
    }
}

/// One pairwise term of the stream kernel, every operation in f32.
#[inline]
fn stream_term(
    inp: &StreamInput,
    i: usize,
    j: usize,
    eps2: f32,
) -> std::result::Result<([f32; 3], [f32; 3], f32), ()> {
    let dx = inp.pos[j][0] - inp.pos[i][0];
    let dy = inp.pos[j][1] - inp.pos[i][1];
    let dz = inp.pos[j][2] - inp.pos[i][2];
    let dvx = inp.vel[j][0] - inp.vel[i][0];
    let dvy = inp.vel[j][1] - inp.vel[i][1];
    let dvz = inp.vel[j][2] - inp.vel[i][2];
    let r2 = eps2 + (dx * dx + dy * dy + dz * dz);
    if r2 == 0.0 {
        return Err(());
    }
    let xdotv = dx * dvx + dy * dvy + dz * dvz;
    let r2inv = 1.0f32 / r2;
    let rinv = r2inv.sqrt();
    let r3inv = r2inv * rinv;
    let r5inv = r2inv * r3inv;
    let xdotvr5inv = 3.0f32 * xdotv * r5inv;
    let mj = inp.mass[j];
    let mr3 = mj * r3inv;
    let a = [mr3 * dx, mr3 * dy, mr3 * dz];
    let k = [
        mj * (r3inv * dvx - xdotvr5inv * dx),
        mj * (r3inv * dvy - xdotvr5inv * dy),
        mj * (r3inv * dvz - xdotvr5inv * dz),
    ];
    Ok((a, k, -(mj * rinv)))
}

fn eval_stream32(req: &BlockRequest, masses: &[f64], eps2: f64, sorted: bool) -> Result<ForceResult> {
    let n = req.predicted_pos.len();
    let inp = StreamInput::quantize(req.predicted_pos, req.predicted_vel, masses);
    let eps2 = eps2 as f32;
    let targets = req.target_indices;

    let one = |&i: &usize| -> Result<(Vector3, Vector3, f64)> {
        if sorted {
            target_stream32_sorted(&inp, i, eps2)
        } else {
            target_stream32(&inp, i, eps2)
        }
    };

    let rows: Vec<(Vector3, Vector3, f64)> = if targets.len() * n >= PAR_THRESHOLD {
        targets.par_iter().map(one).collect::<Result<_>>()?
    } else {
        targets.iter().map(one).collect::<Result<_>>()?
    };
    Ok(split_rows(rows))
}

fn target_stream32(inp: &StreamInput, i: usize, eps2: f32) -> Result<(Vector3, Vector3, f64)> {
    let mut acc = [0.0f32; 3];
    let mut jerk = [0.0f32; 3];
    let mut pot = 0.0f32;
    for j in 0..inp.pos.len() {
        if j == i {
            continue;
        }
        let (a, k, p) = stream_term(inp, i, j, eps2).map_err(|()| Error::Singularity { i, j })?;
        acc[0] += a[0];
        acc[1] += a[1];
        acc[2] += a[2];
        jerk[0] += k[0];
        jerk[1] += k[1];
        jerk[2] += k[2];
        pot += p;
    }
    Ok(widen(acc, jerk, pot))
}

fn target_stream32_sorted(inp: &StreamInput, i: usize, eps2: f32) -> Result<(Vector3, Vector3, f64)> {
    let n = inp.pos.len();
    let mut terms: Vec<SortedTerm<f32, [f32; 3]>> = Vec::with_capacity(n - 1);
    for j in 0..n {
        if j == i {
            continue;
        }
        let (a, k, p) = stream_term(inp, i, j, eps2).map_err(|()| Error::Singularity { i, j })?;
        let mag = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        terms.push((mag, j, a, k, p));
    }
    terms.sort_unstable_by(|l, r| l.0.partial_cmp(&r.0).unwrap().then(l.1.cmp(&r.1)));
    let mut acc = [0.0f32; 3];
    let mut jerk = [0.0f32; 3];
    let mut pot = 0.0f32;
    for &(_, _, a, k, p) in &terms {
        acc[0] += a[0];
        acc[1] += a[1];
        acc[2] += a[2];
        jerk[0] += k[0];
        jerk[1] += k[1];
        jerk[2] += k[2];
        pot += p;
    }
    Ok(widen(acc, jerk, pot))
}

fn widen(acc: [f32; 3], jerk: [f32; 3], pot: f32) -> (Vector3, Vector3, f64) {
    (
        Vector3::new(acc[0] as f64, acc[1] as f64, acc[2] as f64),
        Vector3::new(jerk[0] as f64, jerk[1] as f64, jerk[2] as f64),
        pot as f64,
    )
}

fn split_rows(rows: Vec<(Vector3, Vector3, f64)>) -> ForceResult {
    let mut acc = Vec::with_capacity(rows.len());
    let mut jerk = Vec::with_capacity(rows.len());
    let mut pot = Vec::with_capacity(rows.len());
    for (a, k, p) in rows {
        acc.push(a);
        jerk.push(k);
        pot.push(p);
    }
    ForceResult { acc, jerk, pot }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_request<'a>(
        pos: &'a [Vector3],
        vel: &'a [Vector3],
        targets: &'a [usize],
    ) -> BlockRequest<'a> {
        BlockRequest { target_indices: targets, predicted_pos: pos, predicted_vel: vel }
    }

    fn cfg_with_eps(eps: f64) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.set_eps(eps);
        cfg
    }

    #[test]
    fn symmetric_pair_unsoftened() {
        let pos = [Vector3::new(-0.5, 0.0, 0.0), Vector3::new(0.5, 0.0, 0.0)];
        let vel = [Vector3::ZERO, Vector3::ZERO];
        let masses = [1.0, 1.0];
        let targets = [0usize, 1];
        let req = pair_request(&pos, &vel, &targets);
        let out = eval_block(&req, &masses, &cfg_with_eps(0.0), Backend::Reference64).unwrap();
        assert_eq!(out.acc[0], Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(out.acc[1], Vector3::new(-1.0, 0.0, 0.0));
        assert_eq!(out.jerk[0], Vector3::ZERO);
        assert_eq!(out.pot[0], -1.0);
    }

    #[test]
    fn symmetric_pair_softened_closed_form() {
        // Frozen from the closed forms 1/(1 + 2^-16)^(3/2) and -1/(1 + 2^-16)^(1/2),
        // evaluated independently at 40 decimal digits.
        const ACC: f64 = 0.9999771122529559;
        const POT: f64 = -0.9999923706927791;
        let pos = [Vector3::new(-0.5, 0.0, 0.0), Vector3::new(0.5, 0.0, 0.0)];
        let vel = [Vector3::ZERO, Vector3::ZERO];
        let masses = [1.0, 1.0];
        let targets = [0usize];
        let req = pair_request(&pos, &vel, &targets);
        let out = eval_block(&req, &masses, &cfg_with_eps(1.0 / 256.0), Backend::Reference64).unwrap();
        assert!((out.acc[0].x - ACC).abs() < 1e-15, "acc {}", out.acc[0].x);
        assert!((out.pot[0] - POT).abs() < 1e-15, "pot {}", out.pot[0]);
        assert_eq!(out.acc[0].y, 0.0);
    }

    #[test]
    fn coincident_pair_is_singular() {
        let pos = [Vector3::ZERO, Vector3::ZERO];
        let vel = [Vector3::ZERO, Vector3::ZERO];
        let masses = [1.0, 1.0];
        let targets = [0usize];
        let req = pair_request(&pos, &vel, &targets);
        let err = eval_block(&req, &masses, &cfg_with_eps(0.0), Backend::Reference64);
        match err {
            Err(Error::Singularity { i: 0, j: 1 }) => {}
            other => panic!("expected singularity, got {other:?}"),
        }
        // Softening removes the singularity even for coincident particles.
        assert!(eval_block(&req, &masses, &cfg_with_eps(1.0 / 256.0), Backend::Reference64).is_ok());
    }

    #[test]
    fn duplicate_target_rejected() {
        let pos = [Vector3::ZERO, Vector3::new(1.0, 0.0, 0.0)];
        let vel = [Vector3::ZERO, Vector3::ZERO];
        let masses = [1.0, 1.0];
        let targets = [1usize, 1];
        let req = pair_request(&pos, &vel, &targets);
        assert!(matches!(
            eval_block(&req, &masses, &cfg_with_eps(0.0), Backend::Reference64),
            Err(Error::InvalidBlock(_))
        ));
    }

    #[test]
    fn transfer_ledger_counts() {
        let pos = vec![Vector3::ZERO; 1024];
        let vel = vec![Vector3::ZERO; 1024];
        let targets: Vec<usize> = (0..64).collect();
        let req = BlockRequest {
            target_indices: &targets,
            predicted_pos: &pos,
            predicted_vel: &vel,
        };
        let stream = transfer_ledger(&req, SendPolicy::AllParticles);
        assert_eq!((stream.bytes_sent, stream.bytes_received), (57344, 28672));
        let block = transfer_ledger(&req, SendPolicy::BlockOnly);
        assert_eq!((block.bytes_sent, block.bytes_received), (3584, 1792));

        let empty =
            BlockRequest { target_indices: &[], predicted_pos: &[], predicted_vel: &[] };
        let none = transfer_ledger(&empty, SendPolicy::AllParticles);
        assert_eq!((none.bytes_sent, none.bytes_received), (0, 0));
    }

    #[test]
    fn sorted_pair_matches_unsorted() {
        let pos = [Vector3::new(-0.3, 0.1, 0.0), Vector3::new(0.5, -0.2, 0.4)];
        let vel = [Vector3::new(0.1, 0.0, -0.2), Vector3::new(-0.1, 0.3, 0.0)];
        let masses = [0.5, 0.5];
        let targets = [0usize, 1];
        let req = pair_request(&pos, &vel, &targets);
        let mut cfg = cfg_with_eps(0.0);
        cfg.backend = Backend::Stream32;
        let sorted = eval_block_sorted(&req, &masses, &cfg).unwrap();
        let plain = eval_block(&req, &masses, &cfg, Backend::Stream32).unwrap();
        assert_eq!(sorted, plain);
    }

    #[test]
    fn sorted_sums_smallest_contribution_first() {
        // Collinear triple with mass ratio 1e6 : 1 : 1e-6 on target 0: the
        // ascending order is (j = 2, tiny) then (j = 1). With two terms IEEE
        // addition commutes, so assert against the ascending-order sum.
        let pos = [
            Vector3::ZERO,
            Vector3::new(4.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
        ];
        let vel = [Vector3::ZERO; 3];
        let masses = [1e6, 1.0, 1e-6];
        let targets = [0usize];
        let req = pair_request(&pos, &vel, &targets);
        let mut cfg = cfg_with_eps(0.0);
        cfg.backend = Backend::Stream32;
        let out = eval_block_sorted(&req, &masses, &cfg).unwrap();

        let a_j1 = (1.0f32 * (1.0 / 64.0)) * 4.0; // m * r3inv * dx
        let a_j2 = (1e-6f32 * (1.0 / 8.0)) * 2.0;
        assert_eq!(out.acc[0].x, (a_j2 + a_j1) as f64);
    }

    #[test]
    fn sorted_order_changes_f32_rounding() {
        // Target 0 sees one unit contribution and two ~3.5e-8 ones. Summed in
        // source order each small term is absorbed below the half-ulp of 1.0;
        // summed ascending they first combine to 7e-8, which survives.
        let pos = [
            Vector3::ZERO,
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(4.0, 0.0, 0.0),
        ];
        let vel = [Vector3::ZERO; 4];
        let masses = [1.0, 1.0, 1.4e-7, 5.6e-7];
        let targets = [0usize];
        let req = pair_request(&pos, &vel, &targets);
        let mut cfg = cfg_with_eps(0.0);
        cfg.backend = Backend::Stream32;

        let a1 = 1.0f32; // m=1 at r=1
        let a2 = (1.4e-7f32 * (1.0 / 8.0)) * 2.0;
        let a3 = (5.6e-7f32 * (1.0 / 64.0)) * 4.0;

        let plain = eval_block(&req, &masses, &cfg, Backend::Stream32).unwrap();
        assert_eq!(plain.acc[0].x, ((a1 + a2) + a3) as f64);

        let sorted = eval_block_sorted(&req, &masses, &cfg).unwrap();
        assert_eq!(sorted.acc[0].x, ((a2 + a3) + a1) as f64);

        // The two orders genuinely disagree in f32, so the assertions above
        // pin the accumulation order, not just the value.
        assert_ne!(sorted.acc[0].x, plain.acc[0].x);
    }

    #[test]
    fn deterministic_across_calls() {
        let n = 300;
        let mut pos = Vec::new();
        let mut vel = Vec::new();
        let mut masses = Vec::new();
        let mut s = 1234567u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) * (1.0 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..n {
            pos.push(Vector3::new(next(), next(), next()));
            vel.push(Vector3::new(next(), next(), next()));
            masses.push(1.0 / n as f64);
        }
        let targets: Vec<usize> = (0..n).collect();
        let req = BlockRequest {
            target_indices: &targets,
            predicted_pos: &pos,
            predicted_vel: &vel,
        };
        let cfg = cfg_with_eps(1.0 / 256.0);
        for backend in [Backend::Reference64, Backend::Stream32] {
            let a = eval_block(&req, &masses, &cfg, backend).unwrap();
            let b = eval_block(&req, &masses, &cfg, backend).unwrap();
            assert_eq!(a, b);
        }
    }
}
