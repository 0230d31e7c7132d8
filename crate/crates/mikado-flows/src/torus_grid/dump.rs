//! Binary field dumps: the MKFD format.
//!
//! ```text
//!     header:   magic "MKFD" | version u32 | d u32 | n u32 | K u32 | T f64
//!     payload:  K+1 snapshots in time order, row-major little-endian f64;
//!               vector snapshots store d component blocks of n^d values.
//! ```
//!
//! The reader validates the magic, the version, and all lengths, and infers
//! whether the payload is scalar or vector from the snapshot size.

use super::{GridSpec, ScalarField, TimeField, TimeGrid, VectorField};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MKFD";
const VERSION: u32 = 1;

fn write_header(w: &mut impl Write, grid: GridSpec, tgrid: TimeGrid) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&(tgrid.intervals() as u32).to_le_bytes())?;
    w.write_all(&tgrid.horizon().to_le_bytes())?;
    Ok(())
}

fn write_values(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Dump a scalar time series.
pub fn write_scalar_series(path: &Path, series: &TimeField<ScalarField>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, series.grid(), series.tgrid())?;
    for snap in series.snapshots() {
        write_values(&mut w, snap.values())?;
    }
    w.flush()?;
    Ok(())
}

/// Dump a vector time series (component-major within each snapshot).
pub fn write_vector_series(path: &Path, series: &TimeField<VectorField>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, series.grid(), series.tgrid())?;
    for snap in series.snapshots() {
        for comp in snap.comps() {
            write_values(&mut w, comp.values())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// What a dump file contained.
#[derive(Debug)]
pub enum SeriesPayload {
    /// One scalar field per time sample.
    Scalar(TimeField<ScalarField>),
    /// One vector field per time sample.
    Vector(TimeField<VectorField>),
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

/// Read a dump written by the writers above.
pub fn read_series(path: &Path) -> Result<SeriesPayload> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Domain(format!(
            "not an MKFD dump: magic {magic:?} at {}",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Domain(format!("unsupported MKFD version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let k = read_u32(&mut r)? as usize;
    let t = read_f64(&mut r)?;
    let grid = GridSpec::new(d, n)?;
    let tgrid = TimeGrid::new(t, k)?;

    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 {
        return Err(Error::Domain("MKFD payload is not a whole number of f64s".into()));
    }
    let values: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let per_node = grid.node_count();
    let snaps = tgrid.num_samples();
    let scalar_len = snaps * per_node;
    let vector_len = snaps * d * per_node;
    if values.len() == scalar_len {
        let fields = values
            .chunks_exact(per_node)
            .map(|c| ScalarField::from_values(grid, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeriesPayload::Scalar(TimeField::from_snapshots(tgrid, fields)?))
    } else if values.len() == vector_len {
        let fields = values
            .chunks_exact(d * per_node)
            .map(|c| {
                let comps = c
                    .chunks_exact(per_node)
                    .map(|cc| ScalarField::from_values(grid, cc.to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(VectorField::new(comps))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SeriesPayload::Vector(TimeField::from_snapshots(tgrid, fields)?))
    } else {
        Err(Error::Domain(format!(
            "MKFD payload has {} values; expected {scalar_len} (scalar) or {vector_len} (vector)",
            values.len()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_grid::sample;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn scalar_series_round_trips() {
        let g = GridSpec::new(2, 8).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let tf = TimeField::from_eval(
            tg,
            Arc::new(move |t: f64| {
                sample(g, move |x| t + (2.0 * PI * x[0]).cos()).unwrap()
            }),
            None,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.mkfd");
        write_scalar_series(&path, &tf).unwrap();
        match read_series(&path).unwrap() {
            SeriesPayload::Scalar(back) => {
                assert_eq!(back.tgrid().intervals(), 8);
                for (a, b) in back.snapshots().iter().zip(tf.snapshots()) {
                    assert_eq!(a.values(), b.values(), "bit-exact round trip");
                }
            }
            SeriesPayload::Vector(_) => panic!("scalar dump read back as vector"),
        }
    }

    #[test]
    fn vector_series_round_trips() {
        let g = GridSpec::new(2, 8).unwrap();
        let tg = TimeGrid::new(0.5, 8).unwrap();
        let tf = TimeField::from_eval(
            tg,
            Arc::new(move |t: f64| {
                VectorField::new(vec![
                    sample(g, move |x| (2.0 * PI * x[1]).sin() * (1.0 + t)).unwrap(),
                    sample(g, move |x| (2.0 * PI * x[0]).cos()).unwrap(),
                ])
            }),
            None,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.mkfd");
        write_vector_series(&path, &tf).unwrap();
        match read_series(&path).unwrap() {
            SeriesPayload::Vector(back) => {
                assert_eq!(back.grid(), g);
                for (a, b) in back.snapshots().iter().zip(tf.snapshots()) {
                    for (ca, cb) in a.comps().iter().zip(b.comps()) {
                        assert_eq!(ca.values(), cb.values());
                    }
                }
            }
            SeriesPayload::Scalar(_) => panic!("vector dump read back as scalar"),
        }
    }

    #[test]
    fn reader_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.mkfd");
        std::fs::write(&path, b"NOPE____________").unwrap();
        let err = read_series(&path).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "got {err:?}");
    }
}
