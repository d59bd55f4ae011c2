//! Little-endian binary primitives and CSV helpers shared by the artifact
//! file formats (models, bases, trajectories, datasets).
//!
//! Every binary artifact starts with an 8-byte magic string and a u32 format
//! version; readers reject anything else up front. All floats are 64-bit
//! little-endian, all counts u64, matrices row-major.

use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

/// Provenance carried by every artifact this crate writes: the hash of the
/// config that produced it and the seed that was in force.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
        }
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        write_string(w, &self.config_hash)?;
        write_u64(w, self.seed)?;
        Ok(())
    }

    pub fn read(r: &mut impl Read, path: &Path) -> Result<Self> {
        let config_hash = read_string(r, path)?;
        let seed = read_u64(r, path)?;
        Ok(Self { config_hash, seed })
    }

    /// CSV comment header, so text artifacts carry provenance too.
    pub fn csv_header(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }
}

pub fn write_magic(w: &mut impl Write, magic: &[u8; 8], version: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&version.to_le_bytes())?;
    Ok(())
}

pub fn check_magic(r: &mut impl Read, magic: &[u8; 8], version: u32, path: &Path) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| malformed(path, "file too short for magic header"))?;
    if &buf != magic {
        return Err(malformed(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&buf),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let got = read_u32(r, path)?;
    if got != version {
        return Err(malformed(
            path,
            format!("unsupported format version {got}, expected {version}"),
        ));
    }
    Ok(())
}

pub fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64_slice(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    for &v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_string(w: &mut impl Write, s: &str) -> Result<()> {
    write_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| malformed(path, "truncated u32"))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| malformed(path, "truncated u64"))?;
    Ok(u64::from_le_bytes(buf))
}

/// Read a u64 count and sanity-check it against an upper bound so corrupt
/// files fail cleanly instead of exhausting memory.
pub fn read_count(r: &mut impl Read, path: &Path, max: u64, what: &str) -> Result<usize> {
    let v = read_u64(r, path)?;
    if v > max {
        return Err(malformed(path, format!("implausible {what} count {v}")));
    }
    Ok(v as usize)
}

pub fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| malformed(path, "truncated f64"))?;
    Ok(f64::from_le_bytes(buf))
}

pub fn read_f64_vec(r: &mut impl Read, n: usize, path: &Path) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    let mut buf = [0u8; 8];
    for v in out.iter_mut() {
        r.read_exact(&mut buf)
            .map_err(|_| malformed(path, "truncated float block"))?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(out)
}

pub fn read_string(r: &mut impl Read, path: &Path) -> Result<String> {
    let len = read_count(r, path, 1 << 20, "string byte")?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| malformed(path, "truncated string"))?;
    String::from_utf8(buf).map_err(|_| malformed(path, "string is not UTF-8"))
}

/// Expect end-of-file; trailing bytes mean the file was not written by us.
pub fn expect_eof(r: &mut impl Read, path: &Path) -> Result<()> {
    let mut buf = [0u8; 1];
    match r.read(&mut buf)? {
        0 => Ok(()),
        _ => Err(malformed(path, "trailing bytes after payload")),
    }
}

/// Format a float with 17 significant digits, enough to round-trip any f64
/// through decimal text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}
