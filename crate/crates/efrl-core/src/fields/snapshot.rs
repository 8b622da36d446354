//! Field snapshot files: magic "EFRL", version, grid size, domain side, time,
//! then row-major little-endian f64 samples for ux and uy.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{GridSpec, RealField, VelocityField};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EFRL";
const VERSION: u32 = 1;

pub fn write_snapshot(path: &Path, u: &VelocityField, time: f64) -> Result<()> {
    let grid = u.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&grid.side().to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for component in [u.ux(), u.uy()] {
        for v in component.values().iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(VelocityField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let version = read_u32(&mut r, path)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported snapshot version {version}",
            path.display()
        )));
    }
    let n = read_u32(&mut r, path)? as usize;
    let side = read_f64(&mut r, path)?;
    let time = read_f64(&mut r, path)?;
    let grid = GridSpec::new(n, side)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut components = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut values = Array2::zeros((n, n));
        for v in values.iter_mut() {
            *v = read_f64(&mut r, path)?;
        }
        components.push(RealField::from_values(grid, values)?);
    }
    let uy = components.pop().expect("two components read");
    let ux = components.pop().expect("two components read");
    Ok((VelocityField::new(ux, uy)?, time))
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{}: truncated file", path.display())))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{}: truncated file", path.display())))?;
    Ok(f64::from_le_bytes(buf))
}
