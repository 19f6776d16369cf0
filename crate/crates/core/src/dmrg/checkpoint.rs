//! Versioned little-endian binary checkpoint of an [`MpsState`].
//!
//! Layout: magic `ZNQMPS\0\0`, `u32` version, model parameters, centre, bond
//! dimensions, every block (`u8` presence flag, `u64` rows, `u64` cols,
//! column-major `f64` data), then the sweep history. Floats are stored as
//! their bit patterns, so a save/load round trip is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::mps::{MpsState, SweepHistory};
use crate::basis::ChainGeometry;
use crate::hamiltonian::ModelParams;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"ZNQMPS\0\0";
pub const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: usize) -> Result<()> {
        Ok(self.0.write_all(&(v as u64).to_le_bytes())?)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_bits().to_le_bytes())?)
    }

    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        self.u64(v.len())?;
        v.iter().try_for_each(|&x| self.f64(x))
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(b)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.bytes()?);
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("count {v} does not fit")))
    }

    fn bounded(&mut self, limit: usize, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v > limit {
            return Err(Error::Checkpoint(format!("{what} = {v} exceeds {limit}")));
        }
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.bytes()?)))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.bounded(1 << 24, "vector length")?;
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn write_checkpoint<W: Write>(mps: &MpsState, w: W) -> Result<()> {
    let mut w = Writer(w);
    w.0.write_all(MAGIC)?;
    w.0.write_all(&VERSION.to_le_bytes())?;
    let p = &mps.params;
    w.u64(p.n)?;
    w.f64(p.t)?;
    w.f64(p.m)?;
    w.f64(p.phi)?;
    w.u64(p.pairs())?;
    w.u64(p.k0)?;
    w.u64(mps.center)?;
    for bond in &mps.bonds {
        bond.iter().try_for_each(|&d| w.u64(d))?;
    }
    for cell in &mps.cells {
        for codes in cell {
            for blk in codes {
                match blk {
                    None => w.0.write_all(&[0])?,
                    Some(b) => {
                        w.0.write_all(&[1])?;
                        w.u64(b.nrows())?;
                        w.u64(b.ncols())?;
                        b.as_slice().iter().try_for_each(|&x| w.f64(x))?;
                    }
                }
            }
        }
    }
    let h = &mps.history;
    w.f64s(&h.energies)?;
    w.f64s(&h.truncation)?;
    w.u64(h.chi.len())?;
    h.chi.iter().try_for_each(|&c| w.u64(c))?;
    w.f64s(&h.bond_truncation)?;
    w.0.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<MpsState> {
    let mut r = Reader(r);
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = r.bounded(1 << 16, "n")?;
    let t = r.f64()?;
    let m = r.f64()?;
    let phi = r.f64()?;
    let pairs = r.bounded(ChainGeometry::MAX_PAIRS, "pairs")?;
    let k0 = r.u64()?;
    let params = ModelParams { n, t, m, phi, geometry: ChainGeometry::new(pairs)?, k0 };
    params.validate()?;
    let center = r.bounded(pairs, "centre")?;
    let w = pairs + 1;
    let mut bonds = vec![vec![0; w]; w];
    for bond in bonds.iter_mut() {
        for d in bond.iter_mut() {
            *d = r.bounded(1 << 20, "bond dimension")?;
        }
    }
    let mut cells = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let mut cell = vec![<[Option<DMatrix<f64>>; 4]>::default(); w];
        for codes in cell.iter_mut() {
            for blk in codes.iter_mut() {
                let [flag] = r.bytes::<1>()?;
                if flag == 1 {
                    let rows = r.bounded(1 << 20, "rows")?;
                    let cols = r.bounded(1 << 20, "cols")?;
                    let data: Vec<f64> = (0..rows * cols).map(|_| r.f64()).collect::<Result<_>>()?;
                    *blk = Some(DMatrix::from_vec(rows, cols, data));
                } else if flag != 0 {
                    return Err(Error::Checkpoint(format!("bad block flag {flag}")));
                }
            }
        }
        cells.push(cell);
    }
    let energies = r.f64s()?;
    let truncation = r.f64s()?;
    let nchi = r.bounded(1 << 24, "sweeps")?;
    let chi = (0..nchi).map(|_| r.u64()).collect::<Result<_>>()?;
    let bond_truncation = r.f64s()?;
    let mps = MpsState {
        params,
        bonds,
        cells,
        center,
        history: SweepHistory { energies, truncation, chi, bond_truncation },
    };
    mps.validate()?;
    Ok(mps)
}

pub fn save(mps: &MpsState, path: &Path) -> Result<()> {
    write_checkpoint(mps, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<MpsState> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
