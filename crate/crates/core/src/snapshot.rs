//! Plain-text snapshot format: one header line `n t_global`, then n lines
//! `mass px py pz vx vy vz`. Values are written with 18 significant digits,
//! enough for a bit-exact f64 round trip.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::system::ParticleSystem;
use crate::vec3::Vector3;

pub fn write_snapshot<W: Write>(out: &mut W, sys: &ParticleSystem) -> Result<()> {
    writeln!(out, "{} {:.17e}", sys.len(), sys.time)?;
    for i in 0..sys.len() {
        let p = sys.pos[i];
        let v = sys.vel[i];
        writeln!(
            out,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            sys.mass[i], p.x, p.y, p.z, v.x, v.y, v.z
        )?;
    }
    Ok(())
}

pub fn write_snapshot_file(path: &std::path::Path, sys: &ParticleSystem) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(&mut file, sys)
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<ParticleSystem> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::SnapshotFormat { line: 1, reason: "empty file".into() })?;
    let header = header?;
    let mut fields = header.split_whitespace();
    let n: usize = parse_field(fields.next(), 1, "particle count")?;
    let time: f64 = parse_field(fields.next(), 1, "global time")?;

    let mut masses = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        let (idx, line) = lines.next().ok_or_else(|| Error::SnapshotFormat {
            line: n + 1,
            reason: format!("expected {n} particle lines"),
        })?;
        let line = line?;
        let lineno = idx + 1;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::SnapshotFormat {
                    line: lineno,
                    reason: format!("bad number \"{s}\""),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 7 {
            return Err(Error::SnapshotFormat {
                line: lineno,
                reason: format!("expected 7 values, got {}", vals.len()),
            });
        }
        masses.push(vals[0]);
        pos.push(Vector3::new(vals[1], vals[2], vals[3]));
        vel.push(Vector3::new(vals[4], vals[5], vals[6]));
    }

    let mut sys = ParticleSystem::new(masses, pos, vel)?;
    sys.time = time;
    sys.t_now = vec![time; sys.len()];
    Ok(sys)
}

pub fn read_snapshot_file(path: &std::path::Path) -> Result<ParticleSystem> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    field
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::SnapshotFormat { line, reason: format!("missing or bad {what}") })
}
