//! `TCF1` binary checkpoints.
//!
//! Layout (little-endian): magic `TCF1`, version `u32`, `Nq`, `Ns` as `u64`, then
//! `L, t, nu, k, delta, eps_floor, U0, alpha` as `f64`, then `v1`, `v2`, `p` as
//! row-major `Nq × (Ns + 1)` arrays. Version 2 appends a `u8` history flag followed,
//! when set, by the two explicit-term arrays of the previous step.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::MappedGrid;
use crate::solver::State;

use super::config::RunConfig;
use super::output::write_atomic;

pub const MAGIC: &[u8; 4] = b"TCF1";
pub const VERSION_PLAIN: u32 = 1;
pub const VERSION_HISTORY: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointHeader {
    pub nq: usize,
    pub ns: usize,
    pub period: f64,
    pub t: f64,
    pub nu: f64,
    pub k: f64,
    pub delta: f64,
    pub eps_floor: f64,
    pub u0: f64,
    pub alpha: f64,
}

impl CheckpointHeader {
    pub fn from_config(cfg: &RunConfig, t: f64) -> Self {
        Self {
            nq: cfg.geometry.nq,
            ns: cfg.geometry.ns,
            period: cfg.geometry.period,
            t,
            nu: cfg.solver.nu,
            k: cfg.friction.k,
            delta: cfg.friction.delta,
            eps_floor: cfg.friction.eps_floor,
            u0: cfg.background.u0,
            alpha: cfg.background.alpha,
        }
    }

    /// Reject checkpoints written for a different resolution or period.
    pub fn check_grid(&self, grid: &MappedGrid) -> Result<()> {
        if self.nq != grid.nq || self.ns != grid.ns {
            return Err(Error::Checkpoint(format!(
                "dimension mismatch: checkpoint is {}×{}, config is {}×{}",
                self.nq, self.ns, grid.nq, grid.ns
            )));
        }
        if self.period != grid.period() {
            return Err(Error::Checkpoint(format!(
                "period mismatch: checkpoint L = {}, config L = {}",
                self.period,
                grid.period()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub state: State,
    pub history: Option<(Vec<f64>, Vec<f64>)>,
}

fn put_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(cp: &Checkpoint, version: u32) -> Result<Vec<u8>> {
    let h = &cp.header;
    let n = h.nq * (h.ns + 1);
    for (name, len) in [("v1", cp.state.v1.len()), ("v2", cp.state.v2.len()), ("p", cp.state.p.len())] {
        if len != n {
            return Err(Error::Checkpoint(format!("{name} has {len} values, header implies {n}")));
        }
    }
    if version != VERSION_PLAIN && version != VERSION_HISTORY {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut buf = Vec::with_capacity(4 + 4 + 16 + 64 + 8 * 5 * n + 1);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&version.to_le_bytes());
    buf.extend_from_slice(&(h.nq as u64).to_le_bytes());
    buf.extend_from_slice(&(h.ns as u64).to_le_bytes());
    put_f64s(
        &mut buf,
        &[h.period, cp.state.t, h.nu, h.k, h.delta, h.eps_floor, h.u0, h.alpha],
    );
    put_f64s(&mut buf, &cp.state.v1);
    put_f64s(&mut buf, &cp.state.v2);
    put_f64s(&mut buf, &cp.state.p);
    if version == VERSION_HISTORY {
        match &cp.history {
            Some((e1, e2)) => {
                if e1.len() != n || e2.len() != n {
                    return Err(Error::Checkpoint("history arrays do not match the grid".into()));
                }
                buf.push(1);
                put_f64s(&mut buf, e1);
                put_f64s(&mut buf, e2);
            }
            None => buf.push(0),
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated file: needed {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("array size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4).map_err(|_| Error::Checkpoint("file too short for magic `TCF1`".into()))?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected `TCF1`",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != VERSION_PLAIN && version != VERSION_HISTORY {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected `TCF1` version 1 or 2)"
        )));
    }
    let nq = r.u64()? as usize;
    let ns = r.u64()? as usize;
    let n = nq
        .checked_mul(ns.checked_add(1).unwrap_or(usize::MAX))
        .ok_or_else(|| Error::Checkpoint("grid size overflow".into()))?;
    let period = r.f64()?;
    let t = r.f64()?;
    let nu = r.f64()?;
    let k = r.f64()?;
    let delta = r.f64()?;
    let eps_floor = r.f64()?;
    let u0 = r.f64()?;
    let alpha = r.f64()?;
    let v1 = r.f64s(n)?;
    let v2 = r.f64s(n)?;
    let p = r.f64s(n)?;
    let history = if version == VERSION_HISTORY {
        match r.take(1)?[0] {
            0 => None,
            1 => Some((r.f64s(n)?, r.f64s(n)?)),
            other => return Err(Error::Checkpoint(format!("bad history flag {other}"))),
        }
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        header: CheckpointHeader {
            nq,
            ns,
            period,
            t,
            nu,
            k,
            delta,
            eps_floor,
            u0,
            alpha,
        },
        state: State { v1, v2, p, t },
        history,
    })
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint, version: u32) -> Result<()> {
    write_atomic(path, &encode(cp, version)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Save then reload a state through a version-1 file.
pub fn checkpoint_roundtrip(state: &State, header: CheckpointHeader, path: &Path) -> Result<State> {
    let cp = Checkpoint {
        header: CheckpointHeader { t: state.t, ..header },
        state: state.clone(),
        history: None,
    };
    save_checkpoint(path, &cp, VERSION_PLAIN)?;
    Ok(load_checkpoint(path)?.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(nq: usize, ns: usize, seed: u64) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = nq * (ns + 1);
        let mut draw = || (0..n).map(|_| rng.gen_range(-1e3..1e3) * rng.gen::<f64>().powi(7)).collect::<Vec<f64>>();
        let (v1, v2, p) = (draw(), draw(), draw());
        let history = Some((draw(), draw()));
        Checkpoint {
            header: CheckpointHeader {
                nq,
                ns,
                period: 2.0,
                t: 1.25,
                nu: 0.1,
                k: 0.05,
                delta: 0.3,
                eps_floor: 1e-6,
                u0: 1.0,
                alpha: 0.5,
            },
            state: State { v1, v2, p, t: 1.25 },
            history,
        }
    }

    #[test]
    fn header_layout_is_fixed() {
        let cp = sample(8, 4, 1);
        let b = encode(&cp, VERSION_PLAIN).unwrap();
        assert_eq!(&b[..4], b"TCF1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 8);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 1.25);
        assert_eq!(b.len(), 88 + 3 * 8 * 40);
        assert_eq!(f64::from_le_bytes(b[88..96].try_into().unwrap()), cp.state.v1[0]);
    }

    #[test]
    fn both_versions_round_trip_bit_exactly() {
        let cp = sample(16, 8, 2);
        let plain = decode(&encode(&cp, VERSION_PLAIN).unwrap()).unwrap();
        assert_eq!(plain.state, cp.state);
        assert!(plain.history.is_none());
        let full = decode(&encode(&cp, VERSION_HISTORY).unwrap()).unwrap();
        assert_eq!(full, cp);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&full.state.p), bits(&cp.state.p));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let cp = sample(8, 4, 3);
        let b = encode(&cp, VERSION_HISTORY).unwrap();
        for cut in [0, 3, 30, b.len() / 2, b.len() - 1] {
            assert_eq!(decode(&b[..cut]).unwrap_err().category(), "checkpoint");
        }
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode(&bad).unwrap_err().to_string().contains("TCF1"));
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(decode(&bad).unwrap_err().to_string().contains("TCF1"));
        let mut long = b;
        long.push(0);
        assert!(decode(&long).is_err());
    }

    #[test]
    fn file_round_trip_and_grid_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.tcf");
        let cp = sample(16, 8, 4);
        let back = checkpoint_roundtrip(&cp.state, cp.header, &path).unwrap();
        assert_eq!(back, cp.state);
        let g = crate::geometry::build_grid(&crate::geometry::ChannelGeometry::flat(2.0, 1.0, 16, 8).unwrap()).unwrap();
        assert!(cp.header.check_grid(&g).is_ok());
        let small = crate::geometry::build_grid(&crate::geometry::ChannelGeometry::flat(2.0, 1.0, 8, 8).unwrap()).unwrap();
        assert!(cp.header.check_grid(&small).unwrap_err().to_string().contains("dimension mismatch"));
        assert!(load_checkpoint(&dir.path().join("missing")).is_err());
    }
}
