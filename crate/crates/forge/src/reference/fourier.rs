//! Fourier–Galerkin machinery for the periodic PDEs with smooth solutions.
//!
//! Solutions are expanded as u(t, x) = Σ_k û_k(t) e^{ikx} with modes
//! k = −M/2 … M/2−1 and the most negative mode pinned to zero so positive
//! and negative frequencies stay symmetric for real fields. Quadratic
//! nonlinearities use the 3/2-rule: pad to ⌈3M/2⌉ modes, multiply in real
//! space, transform back, truncate.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Fourier coefficients in FFT index order: entry i holds û_k with k = i for
/// i < M/2 and k = i − M for i ≥ M/2.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierState {
    modes: Vec<Complex64>,
}

impl FourierState {
    pub fn new(modes: Vec<Complex64>) -> Result<Self> {
        if modes.len() < 2 || modes.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "mode count must be even and ≥ 2, got {}",
                modes.len()
            )));
        }
        let mut state = Self { modes };
        let half = state.modes.len() / 2;
        state.modes[half] = Complex64::ZERO;
        Ok(state)
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(vec![Complex64::ZERO; m])
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    /// Wavenumber of FFT slot `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let m = self.len() as i64;
        let i = i as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// û_k by wavenumber; zero outside the resolved band.
    pub fn mode(&self, k: i64) -> Complex64 {
        let m = self.len() as i64;
        if k >= -m / 2 && k < m / 2 {
            self.modes[k.rem_euclid(m) as usize]
        } else {
            Complex64::ZERO
        }
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut Complex64 {
        let m = self.len() as i64;
        assert!(k >= -m / 2 && k < m / 2, "wavenumber {k} out of band");
        &mut self.modes[k.rem_euclid(m) as usize]
    }

    /// Largest deviation from the reality constraint û_{−k} = conj(û_k).
    pub fn reality_defect(&self) -> f64 {
        let m = self.len();
        let mut worst = self.modes[m / 2].norm();
        for k in 1..m / 2 {
            let d = (self.modes[m - k] - self.modes[k].conj()).norm();
            worst = worst.max(d);
        }
        worst = worst.max(self.modes[0].im.abs());
        worst
    }

    /// Evaluate Σ û_k e^{ikx} at arbitrary points (returns the real part;
    /// states built from real fields have negligible imaginary content).
    pub fn eval_at(&self, points: &[f64]) -> Vec<f64> {
        points
            .iter()
            .map(|&x| {
                let mut acc = Complex64::ZERO;
                for (i, &c) in self.modes.iter().enumerate() {
                    let k = self.wavenumber(i) as f64;
                    acc += c * Complex64::new(0.0, k * x).exp();
                }
                acc.re
            })
            .collect()
    }

    /// Flatten to interleaved (re, im) pairs for the real-vector integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        for c in &self.modes {
            out.push(c.re);
            out.push(c.im);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 4 != 0 {
            return Err(Error::dims(format!(
                "flattened spectral state must hold an even number of complex modes, got {} floats",
                flat.len()
            )));
        }
        let modes = flat
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Self::new(modes)
    }
}

/// FFT plans for one mode count and its 3/2-padded companion.
pub struct Spectral {
    m: usize,
    /// Padded size: the next even integer ≥ 3M/2.
    mp: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::invalid(format!(
                "spectral size must be even and ≥ 2, got {m}"
            )));
        }
        let mp = (3 * m).div_ceil(2);
        let mp = if mp % 2 == 0 { mp } else { mp + 1 };
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            mp,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            fwd_pad: planner.plan_fft_forward(mp),
            inv_pad: planner.plan_fft_inverse(mp),
        })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Uniform collocation grid x_j = 2πj/M.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| std::f64::consts::TAU * j as f64 / self.m as f64)
            .collect()
    }

    /// Forward transform of real grid values into mode coefficients.
    pub fn analyze(&self, values: &[f64]) -> Result<FourierState> {
        if values.len() != self.m {
            return Err(Error::dims(format!(
                "expected {} grid values, got {}",
                self.m,
                values.len()
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let scale = 1.0 / self.m as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
        FourierState::new(buf)
    }

    /// Inverse transform to the uniform grid (real parts).
    pub fn synthesize(&self, state: &FourierState) -> Result<Vec<f64>> {
        if state.len() != self.m {
            return Err(Error::dims("state size does not match plan".to_string()));
        }
        let mut buf = state.modes.clone();
        self.inv.process(&mut buf);
        Ok(buf.into_iter().map(|c| c.re).collect())
    }

    /// Coefficients of the pointwise product a·b by the 3/2-rule: zero-pad
    /// both factors, multiply on the fine grid, transform back, truncate.
    /// Exact (to roundoff) for band-limited factors.
    pub fn dealias_product(&self, a: &FourierState, b: &FourierState) -> Result<FourierState> {
        if a.len() != self.m || b.len() != self.m {
            return Err(Error::dims(
                "dealiased product needs both states on the plan size".to_string(),
            ));
        }
        let mut pa = self.pad(a);
        let mut pb = self.pad(b);
        self.inv_pad.process(&mut pa);
        self.inv_pad.process(&mut pb);
        for (x, y) in pa.iter_mut().zip(&pb) {
            *x *= y;
        }
        self.fwd_pad.process(&mut pa);
        let scale = 1.0 / self.mp as f64;
        let half = self.m / 2;
        let mut modes = vec![Complex64::ZERO; self.m];
        for k in 0..half {
            modes[k] = pa[k] * scale;
        }
        for k in 1..half {
            modes[self.m - k] = pa[self.mp - k] * scale;
        }
        FourierState::new(modes)
    }

    fn pad(&self, state: &FourierState) -> Vec<Complex64> {
        let half = self.m / 2;
        let mut out = vec![Complex64::ZERO; self.mp];
        for k in 0..half {
            out[k] = state.modes[k];
        }
        for k in 1..=half {
            out[self.mp - k] = state.modes[self.m - k];
        }
        out
    }
}
