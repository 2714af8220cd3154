//! Binary trajectory dumps for bit-exact replay.
//!
//! Layout, all little-endian: the 8-byte magic `LTHMTRJ1`; `u32` d; `u32` L;
//! `f64` t_0; `f64` Δt; `u64` number of slices; `f64` m; `u8` potential tag
//! (0 quadratic, 1 dipole); `f64` c; `f64` a_dip; `u8` sampler (0 Langevin,
//! 1 exact Gaussian); `u64` burn-in; `u64` master seed; `u64` stream; then the
//! values, slice after slice in site order.

use std::io::{Read, Write};

use super::{FieldTrajectory, Potential, Provenance};
use crate::error::{Error, Result};
use crate::lattice::PeriodicCube;
use crate::rng::SeedRecord;

const MAGIC: &[u8; 8] = b"LTHMTRJ1";

pub fn write_trajectory<W: Write>(traj: &FieldTrajectory, mut w: W) -> Result<()> {
    let p = traj.provenance();
    w.write_all(MAGIC)?;
    w.write_all(&(traj.cube().dim() as u32).to_le_bytes())?;
    w.write_all(&(traj.cube().side() as u32).to_le_bytes())?;
    w.write_all(&traj.t0().to_le_bytes())?;
    w.write_all(&traj.dt().to_le_bytes())?;
    w.write_all(&(traj.n_times() as u64).to_le_bytes())?;
    w.write_all(&p.mass.to_le_bytes())?;
    let (tag, c, a) = match p.potential {
        Potential::Quadratic { c } => (0u8, c, 0.0),
        Potential::Dipole { c, a } => (1u8, c, a),
    };
    w.write_all(&[tag])?;
    w.write_all(&c.to_le_bytes())?;
    w.write_all(&a.to_le_bytes())?;
    w.write_all(&[u8::from(p.sampler == "gaussian")])?;
    w.write_all(&(p.burn_in as u64).to_le_bytes())?;
    w.write_all(&p.seed.master.to_le_bytes())?;
    w.write_all(&p.seed.stream.to_le_bytes())?;
    for v in traj.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(mut r: R) -> Result<FieldTrajectory> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Integrity("not a trajectory dump".into()));
    }
    let dim = read_u32(&mut r)? as usize;
    let side = read_u32(&mut r)? as usize;
    let t0 = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let n_times = read_u64(&mut r)? as usize;
    let mass = read_f64(&mut r)?;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let c = read_f64(&mut r)?;
    let a = read_f64(&mut r)?;
    let mut sampler = [0u8; 1];
    r.read_exact(&mut sampler)?;
    let sampler = if sampler[0] == 1 { "gaussian" } else { "langevin" };
    let potential = match tag[0] {
        0 => Potential::Quadratic { c },
        1 => Potential::Dipole { c, a },
        t => return Err(Error::Integrity(format!("unknown potential tag {t}"))),
    };
    let burn_in = read_u64(&mut r)? as usize;
    let seed = SeedRecord::new(read_u64(&mut r)?, read_u64(&mut r)?);
    let cube = PeriodicCube::new(dim, side)?;
    let mut values = vec![0.0; n_times * cube.volume()];
    for v in values.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    let provenance = Provenance { sampler: sampler.into(), potential, mass, burn_in, seed };
    Ok(FieldTrajectory::new(cube, t0, dt, values, provenance))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{langevin_simulate, LangevinConfig};

    #[test]
    fn round_trip_is_bit_exact() {
        let cube = PeriodicCube::new(2, 4).unwrap();
        let mut cfg = LangevinConfig::new(Potential::dipole(1.0, 0.25).unwrap(), 0.8, 0.05, 12);
        cfg.burn_in = 5;
        let t = langevin_simulate(&cube, &cfg, SeedRecord::new(11, 4)).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&t, &mut buf).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back.values(), t.values());
        assert_eq!(back.provenance().seed, t.provenance().seed);
        assert_eq!(back.dt().to_bits(), t.dt().to_bits());
        assert!(read_trajectory(&b"garbage!"[..]).is_err());
    }
}
