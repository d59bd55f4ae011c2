//! Ground-truth solvers: Fourier–Galerkin spectral integration for the
//! smooth periodic PDEs and a MUSCL finite-volume scheme for inviscid
//! Burgers, plus trajectory storage and query sampling for training data.

pub mod fourier;
pub mod muscl;
pub mod ode;
pub mod trajectory;

pub use fourier::{FourierState, Spectral};
pub use muscl::{muscl_rhs, FiniteVolumeState};
pub use ode::{integrate, RkMethod};
pub use trajectory::{StateRepr, Trajectory};

use crate::error::{Error, Result};
use crate::io::RunMeta;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// The four periodic model problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PdeKind {
    Advection = 0,
    AdvectionDiffusion = 1,
    ViscousBurgers = 2,
    InviscidBurgers = 3,
}

impl PdeKind {
    pub fn name(&self) -> &'static str {
        match self {
            PdeKind::Advection => "advection",
            PdeKind::AdvectionDiffusion => "advection_diffusion",
            PdeKind::ViscousBurgers => "viscous_burgers",
            PdeKind::InviscidBurgers => "inviscid_burgers",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "advection" => Ok(PdeKind::Advection),
            "advection_diffusion" | "advection-diffusion" => Ok(PdeKind::AdvectionDiffusion),
            "viscous_burgers" | "viscous-burgers" => Ok(PdeKind::ViscousBurgers),
            "inviscid_burgers" | "inviscid-burgers" => Ok(PdeKind::InviscidBurgers),
            other => Err(Error::invalid(format!("unknown pde '{other}'"))),
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(PdeKind::Advection),
            1 => Some(PdeKind::AdvectionDiffusion),
            2 => Some(PdeKind::ViscousBurgers),
            3 => Some(PdeKind::InviscidBurgers),
            _ => None,
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, PdeKind::ViscousBurgers | PdeKind::InviscidBurgers)
    }

    pub fn has_diffusion(&self) -> bool {
        matches!(self, PdeKind::AdvectionDiffusion | PdeKind::ViscousBurgers)
    }

    /// The inviscid problem develops shocks; its ground truth comes from the
    /// finite-volume scheme rather than a Fourier expansion.
    pub fn uses_finite_volume(&self) -> bool {
        matches!(self, PdeKind::InviscidBurgers)
    }

    /// Number of boundary constraints the Galerkin evolution enforces,
    /// matching the spatial order of the equation.
    pub fn boundary_constraints(&self) -> usize {
        if self.has_diffusion() {
            2
        } else {
            1
        }
    }

    /// Reference save cadence: 1e-3 for the linear problems, 1e-4 for the
    /// nonlinear ones.
    pub fn default_save_every(&self) -> f64 {
        if self.is_nonlinear() {
            1e-4
        } else {
            1e-3
        }
    }

    pub fn all() -> [PdeKind; 4] {
        [
            PdeKind::Advection,
            PdeKind::AdvectionDiffusion,
            PdeKind::ViscousBurgers,
            PdeKind::InviscidBurgers,
        ]
    }
}

/// Semi-discrete Fourier system for one of the smooth PDEs.
pub struct FourierPde {
    pde: PdeKind,
    nu: f64,
    spectral: Spectral,
}

impl FourierPde {
    pub fn new(pde: PdeKind, nu: f64, m: usize) -> Result<Self> {
        if pde.uses_finite_volume() {
            return Err(Error::invalid(
                "inviscid Burgers is integrated by the finite-volume scheme",
            ));
        }
        if nu < 0.0 || !nu.is_finite() {
            return Err(Error::invalid(format!("viscosity must be ≥ 0, got {nu}")));
        }
        Ok(Self {
            pde,
            nu,
            spectral: Spectral::new(m)?,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// dû/dt for the current state.
    ///
    /// advection:           dû_k = −ik û_k
    /// advection-diffusion: dû_k = (−ik − νk²) û_k
    /// viscous Burgers:     dû_k = −(ik/2)(û²)_k − νk² û_k
    pub fn rhs(&self, state: &FourierState) -> Result<FourierState> {
        let m = state.len();
        if m != self.spectral.size() {
            return Err(Error::dims("state does not match spectral plan"));
        }
        let mut out = vec![Complex64::ZERO; m];
        match self.pde {
            PdeKind::Advection | PdeKind::AdvectionDiffusion => {
                for (i, c) in state.modes().iter().enumerate() {
                    let k = state.wavenumber(i) as f64;
                    out[i] = Complex64::new(-self.nu * k * k, -k) * c;
                }
            }
            PdeKind::ViscousBurgers => {
                let squared = self.spectral.dealias_product(state, state)?;
                for (i, (&c, &sq)) in state.modes().iter().zip(squared.modes()).enumerate() {
                    let k = state.wavenumber(i) as f64;
                    out[i] = Complex64::new(0.0, -0.5 * k) * sq
                        + Complex64::new(-self.nu * k * k, 0.0) * c;
                }
            }
            PdeKind::InviscidBurgers => unreachable!("rejected in constructor"),
        }
        FourierState::new(out)
    }

    /// Integrator adapter over interleaved (re, im) vectors.
    fn rhs_flat(&self, y: &[f64], dy: &mut [f64]) {
        let state = FourierState::from_flat(y).expect("flat state shape");
        let d = self.rhs(&state).expect("rhs on validated state");
        dy.copy_from_slice(&d.to_flat());
    }
}

/// Cadence and provenance for a reference solve.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Frame spacing; per-PDE default when `None`.
    pub save_every: Option<f64>,
    pub meta: RunMeta,
}

/// Integrate a reference solution and save frames at a fixed cadence.
///
/// `u0` holds values on the solver's own uniform grid: M (even) collocation
/// values for the spectral problems, cell averages for inviscid Burgers.
/// Spectral problems use Dormand–Prince 5(4) at (rtol, atol) = (1e−10,
/// 1e−14); the finite-volume problem uses Bogacki–Shampine 3(2) at (1e−6,
/// 1e−8).
pub fn solve_reference(
    pde: PdeKind,
    nu: f64,
    u0: &[f64],
    tspan: (f64, f64),
    opts: SolveOptions,
) -> Result<Trajectory> {
    let save_every = opts.save_every.unwrap_or_else(|| pde.default_save_every());
    if pde.uses_finite_volume() {
        let state = FiniteVolumeState::new(u0.to_vec())?;
        let repr = StateRepr::CellAverages { cells: state.len() };
        let mut traj = Trajectory::new(pde, nu, repr, opts.meta);
        let mut push_err = None;
        integrate(
            |_t, y, dy| muscl_rhs(y, dy),
            state.cells(),
            tspan,
            1e-6,
            1e-8,
            RkMethod::BogackiShampine32,
            save_every,
            |t, y| {
                if push_err.is_none() {
                    push_err = traj.push_frame(t, y).err();
                }
            },
        )?;
        if let Some(e) = push_err {
            return Err(e);
        }
        Ok(traj)
    } else {
        let system = FourierPde::new(pde, nu, u0.len())?;
        let state = system.spectral.analyze(u0)?;
        let repr = StateRepr::SpectralModes { modes: u0.len() };
        let mut traj = Trajectory::new(pde, nu, repr, opts.meta);
        let mut push_err = None;
        integrate(
            |_t, y, dy| system.rhs_flat(y, dy),
            &state.to_flat(),
            tspan,
            1e-10,
            1e-14,
            RkMethod::DormandPrince45,
            save_every,
            |t, y| {
                if push_err.is_none() {
                    push_err = traj.push_frame(t, y).err();
                }
            },
        )?;
        if let Some(e) = push_err {
            return Err(e);
        }
        Ok(traj)
    }
}

/// Integrate once and return the solution at scattered (t, x) queries,
/// matching each query to the nearest saved frame — without materializing
/// the full trajectory. This is how training targets are produced.
pub fn sample_reference(
    pde: PdeKind,
    nu: f64,
    u0: &[f64],
    t_end: f64,
    queries: &[(f64, f64)],
    save_every: Option<f64>,
) -> Result<Vec<f64>> {
    let dt = save_every.unwrap_or_else(|| pde.default_save_every());
    for &(t, _) in queries {
        if !(0.0..=t_end + 1e-12).contains(&t) {
            return Err(Error::invalid(format!(
                "query time {t} outside [0, {t_end}]"
            )));
        }
    }
    // Bucket query indices by nearest frame number.
    let mut buckets: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &(t, _)) in queries.iter().enumerate() {
        let key = (t / dt).round().max(0.0) as u64;
        buckets.entry(key).or_default().push(i);
    }
    let mut targets = vec![0.0; queries.len()];

    let eval_bucket = |indices: &[usize], y: &[f64], targets: &mut [f64]| -> Result<()> {
        let xs: Vec<f64> = indices.iter().map(|&i| queries[i].1).collect();
        let values = if pde.uses_finite_volume() {
            FiniteVolumeState::new(y.to_vec())?.eval_at(&xs)
        } else {
            FourierState::from_flat(y)?.eval_at(&xs)
        };
        for (&i, v) in indices.iter().zip(values) {
            targets[i] = v;
        }
        Ok(())
    };

    let mut last_frame: Vec<f64> = Vec::new();
    let mut sample_err = None;
    let mut observe = |t: f64, y: &[f64]| {
        let key = (t / dt).round().max(0.0) as u64;
        if let Some(indices) = buckets.remove(&key) {
            if sample_err.is_none() {
                sample_err = eval_bucket(&indices, y, &mut targets).err();
            }
        }
        last_frame.clear();
        last_frame.extend_from_slice(y);
    };

    if pde.uses_finite_volume() {
        let state = FiniteVolumeState::new(u0.to_vec())?;
        integrate(
            |_t, y, dy| muscl_rhs(y, dy),
            state.cells(),
            (0.0, t_end),
            1e-6,
            1e-8,
            RkMethod::BogackiShampine32,
            dt,
            &mut observe,
        )?;
    } else {
        let system = FourierPde::new(pde, nu, u0.len())?;
        let state = system.spectral.analyze(u0)?;
        integrate(
            |_t, y, dy| system.rhs_flat(y, dy),
            &state.to_flat(),
            (0.0, t_end),
            1e-10,
            1e-14,
            RkMethod::DormandPrince45,
            dt,
            &mut observe,
        )?;
    }
    drop(observe);
    if let Some(e) = sample_err {
        return Err(e);
    }
    // Queries whose rounded frame lies past the final save land on the last
    // frame (possible when the span is not a multiple of the cadence).
    for (_, indices) in buckets {
        eval_bucket(&indices, &last_frame, &mut targets)?;
    }
    Ok(targets)
}
