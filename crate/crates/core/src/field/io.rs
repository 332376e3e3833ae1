//! `RLF1` snapshot files.
//!
//! Little-endian: magic `RLF1`, `nr` and `nz` as `u64`, then `r_max`,
//! `z_min`, `z_max`, `ε` as `f64`, then `(re, im)` pairs in storage order.
//! The grid always starts at the axis.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{ComplexField, Grid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RLF1";

pub fn write_snapshot<W: Write>(field: &ComplexField, mut w: W) -> Result<()> {
    let g = &field.grid;
    if g.r_min != 0.0 {
        return Err(Error::Format(format!("snapshots need r_min = 0, grid has {}", g.r_min)));
    }
    let mut buf = Vec::with_capacity(4 + 48 + 16 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(g.nr as u64).to_le_bytes());
    buf.extend_from_slice(&(g.nz as u64).to_le_bytes());
    for x in [g.r_max, g.z_min, g.z_max, field.epsilon] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for v in &field.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ComplexField> {
    let mut head = [0u8; 52];
    r.read_exact(&mut head).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u = |k: usize| u64::from_le_bytes(head[k..k + 8].try_into().unwrap()) as usize;
    let f = |k: usize| f64::from_le_bytes(head[k..k + 8].try_into().unwrap());
    let (nr, nz) = (u(4), u(12));
    let grid = Grid::new(0.0, f(20), f(28), f(36), nr, nz).map_err(|e| Error::Format(e.to_string()))?;
    let epsilon = f(44);
    let mut body = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut body).map_err(|e| Error::Format(format!("truncated body: {e}")))?;
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(ComplexField { grid, epsilon, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = Grid::new(0.0, 1.0, -1.0, 1.0, 16, 32).unwrap();
        let f = ComplexField::from_fn(g, 0.1, |r, z| Complex64::new(r.sin(), z.cos() / 3.0));
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 52 + 16 * 16 * 32);
        let back = read_snapshot(&buf[..]).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.epsilon, 0.1);
        assert_eq!(back.values, f.values);
        assert!(read_snapshot(&buf[..40]).is_err());
        buf[0] = b'X';
        assert!(read_snapshot(&buf[..]).is_err());
    }
}
