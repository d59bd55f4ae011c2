//! Saved solution trajectories and their on-disk formats.

use crate::error::{Error, Result};
use crate::io::{self, RunMeta};
use crate::reference::fourier::FourierState;
use crate::reference::muscl::FiniteVolumeState;
use crate::reference::PdeKind;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

const TRAJECTORY_MAGIC: &[u8; 8] = b"FORGETRJ";
const TRAJECTORY_VERSION: u32 = 1;

/// What one stored row means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateRepr {
    /// Interleaved (re, im) Fourier coefficients of `modes` modes.
    SpectralModes { modes: usize },
    /// Cell averages on a uniform periodic mesh.
    CellAverages { cells: usize },
}

impl StateRepr {
    pub fn row_len(&self) -> usize {
        match *self {
            StateRepr::SpectralModes { modes } => 2 * modes,
            StateRepr::CellAverages { cells } => cells,
        }
    }
}

/// A time-ordered sequence of solver states for one initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub pde: PdeKind,
    pub nu: f64,
    pub repr: StateRepr,
    pub meta: RunMeta,
    times: Vec<f64>,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(pde: PdeKind, nu: f64, repr: StateRepr, meta: RunMeta) -> Self {
        Self {
            pde,
            nu,
            repr,
            meta,
            times: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn push_frame(&mut self, t: f64, state: &[f64]) -> Result<()> {
        if state.len() != self.repr.row_len() {
            return Err(Error::dims(format!(
                "frame length {} does not match representation ({})",
                state.len(),
                self.repr.row_len()
            )));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::invalid(format!(
                    "frame times must increase: {t} after {last}"
                )));
            }
        }
        self.times.push(t);
        self.data.extend_from_slice(state);
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let len = self.repr.row_len();
        &self.data[i * len..(i + 1) * len]
    }

    /// Index of the saved frame closest in time to `t`.
    pub fn nearest_frame(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (t - self.times[i - 1]).abs() <= (self.times[i] - t).abs() {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Evaluate frame `i` at arbitrary spatial points: spectral synthesis for
    /// mode rows, periodic piecewise-linear interpolation for cell rows.
    pub fn values_at(&self, i: usize, points: &[f64]) -> Result<Vec<f64>> {
        match self.repr {
            StateRepr::SpectralModes { .. } => {
                Ok(FourierState::from_flat(self.frame(i))?.eval_at(points))
            }
            StateRepr::CellAverages { .. } => {
                Ok(FiniteVolumeState::new(self.frame(i).to_vec())?.eval_at(points))
            }
        }
    }

    /// Real-space values of frame `i` on the representation's own grid.
    pub fn grid_values(&self, i: usize) -> Result<Vec<f64>> {
        match self.repr {
            StateRepr::SpectralModes { modes } => {
                let spec = crate::reference::fourier::Spectral::new(modes)?;
                spec.synthesize(&FourierState::from_flat(self.frame(i))?)
            }
            StateRepr::CellAverages { .. } => Ok(self.frame(i).to_vec()),
        }
    }

    /// CSV export: provenance comments, a `t,x_0,...` header, then one row of
    /// real-space values per frame.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.meta.csv_header())?;
        writeln!(w, "# pde={} nu={}", self.pde.name(), self.nu)?;
        let ncols = match self.repr {
            StateRepr::SpectralModes { modes } => modes,
            StateRepr::CellAverages { cells } => cells,
        };
        let header: Vec<String> = (0..ncols).map(|i| format!("x_{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..self.n_frames() {
            let values = self.grid_values(i)?;
            let mut line = io::fmt_f64(self.times[i]);
            for v in values {
                line.push(',');
                line.push_str(&io::fmt_f64(v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(BufWriter::new(f))
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        io::write_magic(&mut w, TRAJECTORY_MAGIC, TRAJECTORY_VERSION)?;
        self.meta.write(&mut w)?;
        io::write_u32(&mut w, self.pde as u32)?;
        io::write_f64(&mut w, self.nu)?;
        let (tag, size) = match self.repr {
            StateRepr::SpectralModes { modes } => (0u32, modes),
            StateRepr::CellAverages { cells } => (1u32, cells),
        };
        io::write_u32(&mut w, tag)?;
        io::write_u64(&mut w, size as u64)?;
        io::write_u64(&mut w, self.n_frames() as u64)?;
        io::write_f64_slice(&mut w, &self.times)?;
        io::write_f64_slice(&mut w, &self.data)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut r = BufReader::new(f);
        io::check_magic(&mut r, TRAJECTORY_MAGIC, TRAJECTORY_VERSION, path)?;
        let meta = RunMeta::read(&mut r, path)?;
        let pde = PdeKind::from_tag(io::read_u32(&mut r, path)?)
            .ok_or_else(|| io::malformed(path, "unknown pde tag"))?;
        let nu = io::read_f64(&mut r, path)?;
        let tag = io::read_u32(&mut r, path)?;
        let size = io::read_count(&mut r, path, 1 << 24, "state size")?;
        let repr = match tag {
            0 => StateRepr::SpectralModes { modes: size },
            1 => StateRepr::CellAverages { cells: size },
            other => return Err(io::malformed(path, format!("unknown state tag {other}"))),
        };
        let n_frames = io::read_count(&mut r, path, 1 << 32, "frame")?;
        let times = io::read_f64_vec(&mut r, n_frames, path)?;
        let data = io::read_f64_vec(&mut r, n_frames * repr.row_len(), path)?;
        io::expect_eof(&mut r, path)?;
        Ok(Self {
            pde,
            nu,
            repr,
            meta,
            times,
            data,
        })
    }
}
