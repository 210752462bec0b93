//! Binary checkpoints of full states.
//!
//! Layout (little endian): magic `XXCK`, format version `u32`, `N` `u32`,
//! geometry code `u32`, `lx` `u32`, `ly` `u32`, `alpha` `f64`, `t` `f64`, then the
//! `2^N` amplitudes as `(re, im)` pairs of `f64`, sector by sector in colex order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use super::{FullState, SpinSpace};
use crate::error::{Error, Result};
use crate::lattice::{Geometry, LatticeSpec};

const MAGIC: &[u8; 4] = b"XXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub lattice: LatticeSpec,
    pub t: f64,
}

/// Writes `state` at time `t`; the file is replaced atomically.
pub fn save_checkpoint(path: &Path, state: &FullState, lattice: &LatticeSpec, t: f64) -> Result<()> {
    if lattice.n_sites() != state.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "lattice has {} sites, state {} spins",
            lattice.n_sites(),
            state.n_sites()
        )));
    }
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        for v in [
            CHECKPOINT_VERSION,
            state.n_sites() as u32,
            lattice.geometry.code(),
            lattice.lx as u32,
            lattice.ly as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&lattice.alpha.to_le_bytes())?;
        w.write_all(&t.to_le_bytes())?;
        for a in state.sectors().iter().flatten() {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, FullState)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidArgument(format!("{} is not a state checkpoint", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let code = read_u32(&mut r)?;
    let geometry = Geometry::from_code(code)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown geometry code {code}")))?;
    let lx = read_u32(&mut r)? as usize;
    let ly = read_u32(&mut r)? as usize;
    let alpha = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let lattice = LatticeSpec::rectangular(geometry, lx, ly, alpha);
    if lattice.n_sites() != n {
        return Err(Error::InvalidArgument("checkpoint header is inconsistent".into()));
    }
    let mut state = FullState::zeros(Arc::new(SpinSpace::new(n)?));
    for k in 0..=n {
        for a in state.sector_mut(k).iter_mut() {
            *a = Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?);
        }
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::InvalidArgument("trailing data in checkpoint".into()));
    }
    Ok((CheckpointHeader { version, lattice, t }, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{css_theta_full, overlap_full, ExactEngine};
    use crate::lattice::XxModel;

    #[test]
    fn round_trip_and_resume() {
        let spec = LatticeSpec::square(2, 3.0);
        let e = ExactEngine::new(XxModel::new(&spec).unwrap()).unwrap();
        let mut psi = css_theta_full(e.space().clone(), 0.3);
        e.propagate(&mut psi, 1.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        save_checkpoint(&path, &psi, &spec, 1.5).unwrap();
        let (hdr, mut loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(hdr.lattice, spec);
        assert_eq!(hdr.t, 1.5);
        assert_eq!(loaded.to_dense(), psi.to_dense());
        e.propagate(&mut psi, 2.0).unwrap();
        e.propagate(&mut loaded, 2.0).unwrap();
        assert!((overlap_full(&psi, &loaded).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"nope").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
