//! MUSCL finite-volume scheme for the inviscid Burgers equation on the
//! periodic domain: minmod-limited linear reconstruction with a Roe flux for
//! f(u) = u²/2 and a sonic-point fix on transonic expansions.

use crate::error::{Error, Result};
use std::f64::consts::TAU;

/// Cell averages on a uniform periodic mesh of [0, 2π].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteVolumeState {
    cells: Vec<f64>,
}

impl FiniteVolumeState {
    pub fn new(cells: Vec<f64>) -> Result<Self> {
        if cells.len() < 8 {
            return Err(Error::invalid(format!(
                "finite-volume mesh needs at least 8 cells, got {}",
                cells.len()
            )));
        }
        Ok(Self { cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn dx(&self) -> f64 {
        TAU / self.cells.len() as f64
    }

    /// Cell-center coordinates x_i = (i + 1/2)Δx.
    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.cells.len())
            .map(|i| (i as f64 + 0.5) * dx)
            .collect()
    }

    /// Σ uᵢ Δx, conserved by the scheme up to roundoff.
    pub fn mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.dx()
    }

    /// Total variation Σ |u_{i+1} − u_i| with periodic wrap.
    pub fn total_variation(&self) -> f64 {
        let n = self.cells.len();
        (0..n)
            .map(|i| (self.cells[(i + 1) % n] - self.cells[i]).abs())
            .sum()
    }

    /// Periodic piecewise-linear interpolation of cell-center values.
    pub fn eval_at(&self, points: &[f64]) -> Vec<f64> {
        let n = self.cells.len();
        let dx = self.dx();
        points
            .iter()
            .map(|&x| {
                // Offset so cell centers land on integers.
                let s = (x.rem_euclid(TAU)) / dx - 0.5;
                let i0 = s.floor();
                let frac = s - i0;
                let left = (i0.rem_euclid(n as f64)) as usize % n;
                let right = (left + 1) % n;
                self.cells[left] * (1.0 - frac) + self.cells[right] * frac
            })
            .collect()
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

fn burgers_flux(u: f64) -> f64 {
    0.5 * u * u
}

/// Roe interface flux with the transonic-expansion fix: when the interface
/// straddles the sonic state (u_L < 0 < u_R) the correct flux is the sonic
/// one, f(0) = 0; otherwise upwind by the Roe speed (u_L + u_R)/2, with the
/// exact tie f(u_L) = f(u_R) at speed zero.
fn roe_flux(u_l: f64, u_r: f64) -> f64 {
    if u_l < 0.0 && u_r > 0.0 {
        return 0.0;
    }
    let speed = 0.5 * (u_l + u_r);
    if speed >= 0.0 {
        burgers_flux(u_l)
    } else {
        burgers_flux(u_r)
    }
}

/// Semi-discrete MUSCL right-hand side: du_i/dt = −(F_{i+1/2} − F_{i−1/2})/Δx.
pub fn muscl_rhs(cells: &[f64], dudt: &mut [f64]) {
    let n = cells.len();
    debug_assert!(n >= 8);
    debug_assert_eq!(dudt.len(), n);
    let dx = TAU / n as f64;

    // Limited (undivided) slopes.
    let mut slope = vec![0.0; n];
    for i in 0..n {
        let prev = cells[(i + n - 1) % n];
        let next = cells[(i + 1) % n];
        slope[i] = minmod(next - cells[i], cells[i] - prev);
    }

    // flux[i] = F_{i+1/2}, between cells i and i+1.
    let mut flux = vec![0.0; n];
    for i in 0..n {
        let j = (i + 1) % n;
        let u_l = cells[i] + 0.5 * slope[i];
        let u_r = cells[j] - 0.5 * slope[j];
        flux[i] = roe_flux(u_l, u_r);
    }

    for i in 0..n {
        let left = flux[(i + n - 1) % n];
        dudt[i] = -(flux[i] - left) / dx;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ode::{integrate, RkMethod};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn integrate_muscl(u0: Vec<f64>, t_end: f64, save_every: f64) -> Vec<(f64, Vec<f64>)> {
        let mut frames = Vec::new();
        integrate(
            |_t, y, dy| muscl_rhs(y, dy),
            &u0,
            (0.0, t_end),
            1e-6,
            1e-8,
            RkMethod::BogackiShampine32,
            save_every,
            |t, y| frames.push((t, y.to_vec())),
        )
        .unwrap();
        frames
    }

    #[test]
    fn constant_state_has_zero_derivative() {
        let u = vec![0.7; 64];
        let mut dudt = vec![1.0; 64];
        muscl_rhs(&u, &mut dudt);
        assert!(dudt.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn minmod_picks_smallest_consistent_slope() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-3.0, -2.0), -2.0);
        assert_eq!(minmod(1.0, -1.0), 0.0);
        assert_eq!(minmod(0.0, 5.0), 0.0);
    }

    #[test]
    fn shock_speed_matches_rankine_hugoniot() {
        // Box of height 1 on [π/2, π]; the right edge is a shock moving at
        // (1+0)/2 = 1/2.
        let n = 512;
        let state = FiniteVolumeState::new(vec![0.0; n]).unwrap();
        let centers = state.centers();
        let u0: Vec<f64> = centers
            .iter()
            .map(|&x| if (PI / 2.0..PI).contains(&x) { 1.0 } else { 0.0 })
            .collect();
        let frames = integrate_muscl(u0, 1.0, 0.5);
        let last = &frames.last().unwrap().1;
        // Locate the 0.5-crossing of the downward front near π + 0.5.
        let mut front = None;
        for i in 0..n - 1 {
            if centers[i] > 2.0 && last[i] >= 0.5 && last[i + 1] < 0.5 {
                let frac = (last[i] - 0.5) / (last[i] - last[i + 1]);
                front = Some(centers[i] + frac * (centers[i + 1] - centers[i]));
                break;
            }
        }
        let front = front.expect("shock front not found");
        let expected = PI + 0.5;
        assert!(
            (front - expected).abs() / expected < 0.02,
            "front at {front}, expected {expected}"
        );
    }

    #[test]
    fn total_variation_never_increases() {
        let n = 256;
        let state = FiniteVolumeState::new(vec![0.0; n]).unwrap();
        let u0: Vec<f64> = state.centers().iter().map(|&x| x.sin()).collect();
        let tv0 = FiniteVolumeState::new(u0.clone()).unwrap().total_variation();
        let frames = integrate_muscl(u0, 1.5, 0.05);
        let mut prev_tv = tv0;
        for (_, u) in &frames {
            let tv = FiniteVolumeState::new(u.clone()).unwrap().total_variation();
            assert!(tv <= prev_tv * (1.0 + 1e-10), "TV grew: {prev_tv} -> {tv}");
            prev_tv = tv;
        }
    }

    #[test]
    fn mass_is_conserved() {
        let n = 128;
        let state = FiniteVolumeState::new(vec![0.0; n]).unwrap();
        let u0: Vec<f64> = state.centers().iter().map(|&x| x.sin() + 0.3).collect();
        let mass0 = FiniteVolumeState::new(u0.clone()).unwrap().mass();
        let frames = integrate_muscl(u0, 2.0, 0.5);
        for (t, u) in &frames {
            let mass = FiniteVolumeState::new(u.clone()).unwrap().mass();
            assert!(
                (mass - mass0).abs() <= 1e-12 * (1.0 + t),
                "mass drifted to {mass} at t = {t}"
            );
        }
    }

    #[test]
    fn transonic_expansion_resolves() {
        // u_L = -1, u_R = 1: an entropy-violating scheme keeps the jump as a
        // standing expansion shock; the sonic fix lets it spread.
        let n = 256;
        let state = FiniteVolumeState::new(vec![0.0; n]).unwrap();
        let centers = state.centers();
        let u0: Vec<f64> = centers
            .iter()
            .map(|&x| if (PI / 2.0..3.0 * PI / 2.0).contains(&x) { 1.0 } else { -1.0 })
            .collect();
        let frames = integrate_muscl(u0.clone(), 0.5, 0.5);
        let last = &frames.last().unwrap().1;
        // Inside the rarefaction fan centred at π/2, u ≈ (x - π/2)/t.
        let x_probe = PI / 2.0 + 0.2;
        let idx = centers.iter().position(|&x| x >= x_probe).unwrap();
        assert_relative_eq!(last[idx], 0.4, max_relative = 0.15);
    }

    #[test]
    fn interpolation_is_periodic_and_linear() {
        let cells: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let state = FiniteVolumeState::new(cells.clone()).unwrap();
        let centers = state.centers();
        let at_centers = state.eval_at(&centers);
        for (a, b) in at_centers.iter().zip(&cells) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        // Wrap-around consistency.
        let v = state.eval_at(&[0.0, TAU]);
        assert_abs_diff_eq!(v[0], v[1], epsilon = 1e-12);
    }

    #[test]
    fn small_mesh_rejected() {
        assert!(FiniteVolumeState::new(vec![0.0; 4]).is_err());
    }
}
