//! On-disk format for orthonormal bases.

use crate::basis::OrthonormalBasis;
use crate::error::Result;
use crate::io::{self, RunMeta};
use crate::quadrature::{LegendreBasis, QuadratureGrid};
use nalgebra::DMatrix;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const BASIS_MAGIC: &[u8; 8] = b"FORGEBAS";
const BASIS_VERSION: u32 = 1;

fn write_matrix(w: &mut impl Write, m: &DMatrix<f64>) -> Result<()> {
    io::write_u64(w, m.nrows() as u64)?;
    io::write_u64(w, m.ncols() as u64)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            io::write_f64(w, m[(i, j)])?;
        }
    }
    Ok(())
}

fn read_matrix(r: &mut impl Read, path: &Path) -> Result<DMatrix<f64>> {
    let rows = io::read_count(r, path, 1 << 24, "matrix row")?;
    let cols = io::read_count(r, path, 1 << 24, "matrix column")?;
    let flat = io::read_f64_vec(r, rows * cols, path)?;
    Ok(DMatrix::from_row_slice(rows, cols, &flat))
}

/// Write the basis: grid spec, spectrum, retained node values, Legendre
/// expansion, and provenance (source model id, freeze times).
pub fn save_basis(basis: &OrthonormalBasis, meta: &RunMeta, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    io::write_magic(&mut w, BASIS_MAGIC, BASIS_VERSION)?;
    meta.write(&mut w)?;
    let (a, b) = basis.grid().domain();
    io::write_f64(&mut w, a)?;
    io::write_f64(&mut w, b)?;
    io::write_u64(&mut w, basis.grid().len() as u64)?;
    io::write_f64(&mut w, basis.threshold())?;
    io::write_u64(&mut w, basis.singular_values().len() as u64)?;
    io::write_f64_slice(&mut w, basis.singular_values())?;
    io::write_u64(&mut w, basis.rank() as u64)?;
    write_matrix(&mut w, basis.node_values())?;
    match (basis.legendre_coeffs(), basis.legendre_degree()) {
        (Some(coeffs), Some(l)) => {
            w.write_all(&[1])?;
            io::write_u64(&mut w, l as u64)?;
            write_matrix(&mut w, coeffs)?;
        }
        _ => w.write_all(&[0])?,
    }
    io::write_u64(&mut w, basis.freeze_times().len() as u64)?;
    io::write_f64_slice(&mut w, basis.freeze_times())?;
    io::write_string(&mut w, basis.source())?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<(OrthonormalBasis, RunMeta)> {
    let f = std::fs::File::open(path)?;
    let mut r = BufReader::new(f);
    io::check_magic(&mut r, BASIS_MAGIC, BASIS_VERSION, path)?;
    let meta = RunMeta::read(&mut r, path)?;
    let a = io::read_f64(&mut r, path)?;
    let b = io::read_f64(&mut r, path)?;
    let m = io::read_count(&mut r, path, 1 << 24, "grid node")?;
    let threshold = io::read_f64(&mut r, path)?;
    let n_sigma = io::read_count(&mut r, path, 1 << 24, "singular value")?;
    let singular_values = io::read_f64_vec(&mut r, n_sigma, path)?;
    let rank = io::read_count(&mut r, path, 1 << 24, "rank")?;
    let node_values = read_matrix(&mut r, path)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)
        .map_err(|_| io::malformed(path, "truncated Legendre flag"))?;
    let (legendre, legendre_coeffs) = match flag[0] {
        0 => (None, None),
        1 => {
            let l = io::read_count(&mut r, path, 1 << 20, "Legendre degree")?;
            let coeffs = read_matrix(&mut r, path)?;
            if coeffs.nrows() != l + 1 {
                return Err(io::malformed(path, "Legendre coefficient shape mismatch"));
            }
            (
                Some(LegendreBasis::new((a, b), l)
                    .map_err(|e| io::malformed(path, e.to_string()))?),
                Some(coeffs),
            )
        }
        other => return Err(io::malformed(path, format!("bad Legendre flag {other}"))),
    };
    let n_times = io::read_count(&mut r, path, 1 << 20, "freeze time")?;
    let freeze_times = io::read_f64_vec(&mut r, n_times, path)?;
    let source = io::read_string(&mut r, path)?;
    io::expect_eof(&mut r, path)?;

    let grid = QuadratureGrid::gauss_legendre(m, (a, b))
        .map_err(|e| io::malformed(path, e.to_string()))?;
    if node_values.nrows() != m || node_values.ncols() != rank {
        return Err(io::malformed(path, "node value shape mismatch"));
    }
    if let Some(c) = &legendre_coeffs {
        if c.ncols() != rank {
            return Err(io::malformed(path, "coefficient column mismatch"));
        }
    }
    Ok((
        OrthonormalBasis {
            singular_values,
            node_values,
            legendre_coeffs,
            legendre,
            rank,
            threshold,
            grid,
            freeze_times,
            source,
        },
        meta,
    ))
}
