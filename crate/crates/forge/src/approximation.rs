//! Approximation capability of a basis: projections, expansion-coefficient
//! decay, per-degree Legendre approximation errors, and an a priori error
//! bound splitting into a Legendre tail and a damped sum.
//!
//! For a function f and basis projection P, the bound reads
//!
//!   ‖f − Pf‖ ≤ (Σ_{j>r} |⟨q_j, f⟩|²)^{1/2} + Σ_{j≤r} |⟨q_j, f⟩| ‖q_j − Pq_j‖
//!
//! with {q_j} the orthonormal Legendre family: smooth functions have rapidly
//! decaying ⟨q_j, f⟩, which damps the growth of the per-degree errors
//! ‖q_j − Pq_j‖.

use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::quadrature::{LegendreBasis, QuadratureGrid};

/// The three stock targets of increasing frequency.
pub const NAMED_TARGETS: [&str; 3] = ["exp_cos_half", "exp_sin", "exp_sin2"];

/// Look up one of the stock targets: e^{cos(x/2)}, e^{sin x}, e^{sin 2x}.
pub fn named_target(name: &str) -> Result<fn(f64) -> f64> {
    match name {
        "exp_cos_half" => Ok(|x| (x / 2.0).cos().exp()),
        "exp_sin" => Ok(|x| x.sin().exp()),
        "exp_sin2" => Ok(|x| (2.0 * x).sin().exp()),
        other => Err(Error::invalid(format!("unknown target '{other}'"))),
    }
}

/// Result of projecting node values onto a basis.
#[derive(Debug, Clone)]
pub struct Projection {
    /// a_k = ⟨φ_k, f⟩ for each retained basis function.
    pub coefficients: Vec<f64>,
    /// ‖f − Σ a_k φ_k‖ under the grid inner product.
    pub residual_norm: f64,
    /// f − Σ a_k φ_k at the grid nodes.
    pub residual: Vec<f64>,
}

/// Orthogonal projection of `f_nodes` (values on the basis grid) onto the
/// retained basis functions.
pub fn project(f_nodes: &[f64], basis: &OrthonormalBasis) -> Result<Projection> {
    let grid = basis.grid();
    if f_nodes.len() != grid.len() {
        return Err(Error::dims(format!(
            "function values ({}) must live on the basis grid ({})",
            f_nodes.len(),
            grid.len()
        )));
    }
    let phi = basis.node_values();
    let r = basis.rank();
    let mut coefficients = Vec::with_capacity(r);
    let mut residual = f_nodes.to_vec();
    for k in 0..r {
        let col: Vec<f64> = phi.column(k).iter().copied().collect();
        let a = grid.inner_product_real(&col, f_nodes)?;
        coefficients.push(a);
        for (res, &p) in residual.iter_mut().zip(&col) {
            *res -= a * p;
        }
    }
    let residual_norm = grid.norm(&residual)?;
    Ok(Projection {
        coefficients,
        residual_norm,
        residual,
    })
}

/// Per-degree projection errors ‖q_j − Pq_j‖ for j = 0..=j_max, computed as
/// √(1 − Σ_k ⟨φ_k, q_j⟩²) clipped at zero to dodge cancellation when the
/// basis nearly contains q_j.
pub fn legendre_error_profile(basis: &OrthonormalBasis, j_max: usize) -> Result<Vec<f64>> {
    let l = basis
        .legendre_degree()
        .ok_or_else(|| Error::invalid("basis has no Legendre expansion yet"))?;
    if j_max > l {
        return Err(Error::invalid(format!(
            "profile degree {j_max} exceeds the basis frame degree {l}"
        )));
    }
    let grid = basis.grid();
    let legendre = LegendreBasis::new(grid.domain(), j_max)?;
    let q = legendre.eval_matrix(grid.nodes())?;
    let phi = basis.node_values();
    let mut profile = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let qj: Vec<f64> = q.column(j).iter().copied().collect();
        let mut captured = 0.0;
        for k in 0..basis.rank() {
            let col: Vec<f64> = phi.column(k).iter().copied().collect();
            let ip = grid.inner_product_real(&col, &qj)?;
            captured += ip * ip;
        }
        profile.push((1.0 - captured).max(0.0).sqrt());
    }
    Ok(profile)
}

/// The two-term upper bound on ‖f − Pf‖ with its per-degree pieces.
#[derive(Debug, Clone)]
pub struct ApproxReport {
    /// Split degree r in the bound.
    pub r_leg: usize,
    /// ⟨q_j, f⟩ for j = 0..=r_leg, from a fine quadrature.
    pub legendre_coeffs: Vec<f64>,
    /// ‖q_j − Pq_j‖ for j = 0..=r_leg.
    pub q_errors: Vec<f64>,
    /// |⟨q_j, f⟩|·‖q_j − Pq_j‖ per degree.
    pub damped_terms: Vec<f64>,
    /// Tail norm after each degree: tails[j] = (Σ_{l>j} |⟨q_l, f⟩|²)^{1/2}.
    pub tails: Vec<f64>,
    /// (Σ_{j>r} |⟨q_j, f⟩|²)^{1/2}, by Parseval against ‖f‖².
    pub tail: f64,
    pub damped_sum: f64,
    /// tail + damped_sum.
    pub bound: f64,
    /// ‖f − Pf‖ measured on the basis grid.
    pub projection_error: f64,
}

impl ApproxReport {
    /// The bound must dominate the measured error (1e−9 slack for quadrature
    /// and round-off differences between the two sides).
    pub fn validate(&self) -> Result<()> {
        if self.projection_error <= self.bound + 1e-9 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "projection error {:.6e} exceeds its upper bound {:.6e}",
                self.projection_error, self.bound
            )))
        }
    }
}

/// Evaluate the error bound for `f` against `basis`, splitting at Legendre
/// degree `r_leg`. The Legendre coefficients of f are taken on a quadrature
/// fine enough that the neglected tail is far below the 1e−9 slack.
pub fn ac3_bound(
    f: impl Fn(f64) -> f64,
    basis: &OrthonormalBasis,
    r_leg: usize,
) -> Result<ApproxReport> {
    let l = basis
        .legendre_degree()
        .ok_or_else(|| Error::invalid("basis has no Legendre expansion yet"))?;
    if r_leg > l {
        return Err(Error::invalid(format!(
            "split degree {r_leg} exceeds the basis frame degree {l}"
        )));
    }
    let grid = basis.grid();

    // Fine rule for the non-polynomial integrands ⟨q_j, f⟩ and ‖f‖.
    let m_fine = (2 * grid.len()).max(2048);
    let fine = QuadratureGrid::gauss_legendre(m_fine, grid.domain())?;
    let f_fine: Vec<f64> = fine.nodes().iter().map(|&x| f(x)).collect();
    let legendre = LegendreBasis::new(grid.domain(), r_leg)?;
    let q_fine = legendre.eval_matrix(fine.nodes())?;
    let mut legendre_coeffs = Vec::with_capacity(r_leg + 1);
    for j in 0..=r_leg {
        let col: Vec<f64> = q_fine.column(j).iter().copied().collect();
        legendre_coeffs.push(fine.inner_product_real(&col, &f_fine)?);
    }
    let f_norm_sq = fine.inner_product_real(&f_fine, &f_fine)?;
    let mut running = f_norm_sq;
    let tails: Vec<f64> = legendre_coeffs
        .iter()
        .map(|c| {
            running -= c * c;
            running.max(0.0).sqrt()
        })
        .collect();
    let tail = tails[r_leg];

    let q_errors = legendre_error_profile(basis, r_leg)?;
    let damped_terms: Vec<f64> = legendre_coeffs
        .iter()
        .zip(&q_errors)
        .map(|(c, e)| c.abs() * e)
        .collect();
    let damped_sum: f64 = damped_terms.iter().sum();
    let bound = tail + damped_sum;

    let f_nodes: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
    let projection_error = project(&f_nodes, basis)?.residual_norm;

    let report = ApproxReport {
        r_leg,
        legendre_coeffs,
        q_errors,
        damped_terms,
        tails,
        tail,
        damped_sum,
        bound,
        projection_error,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::OrthonormalBasis;
    use crate::quadrature::{LegendreBasis, QuadratureGrid, DEFAULT_DOMAIN};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    fn grid(m: usize) -> QuadratureGrid {
        QuadratureGrid::gauss_legendre(m, DEFAULT_DOMAIN).unwrap()
    }

    /// Basis spanning exactly {q_0..q_d}.
    fn legendre_span_basis(m: usize, d: usize, l: usize) -> OrthonormalBasis {
        let g = grid(m);
        let legendre = LegendreBasis::new(DEFAULT_DOMAIN, d).unwrap();
        let q = legendre.eval_matrix(g.nodes()).unwrap();
        OrthonormalBasis::from_node_functions(g, q, l, "legendre-span").unwrap()
    }

    #[test]
    fn projecting_basis_element_gives_unit_vector() {
        let basis = legendre_span_basis(64, 5, 40);
        let phi1: Vec<f64> = basis.node_values().column(1).iter().copied().collect();
        let p = project(&phi1, &basis).unwrap();
        for (k, &a) in p.coefficients.iter().enumerate() {
            let expected = if k == 1 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(a, expected, epsilon = 1e-12);
        }
        assert!(p.residual_norm < 1e-10);
    }

    #[test]
    fn residual_is_orthogonal_to_basis_and_parseval_holds() {
        let basis = legendre_span_basis(128, 7, 60);
        let g = basis.grid().clone();
        let f: Vec<f64> = g.nodes().iter().map(|&x| (0.3 * x).cos() + x.sin()).collect();
        let p = project(&f, &basis).unwrap();
        for k in 0..basis.rank() {
            let col: Vec<f64> = basis.node_values().column(k).iter().copied().collect();
            let ip = g.inner_product_real(&col, &p.residual).unwrap();
            assert_abs_diff_eq!(ip, 0.0, epsilon = 1e-10);
        }
        // Parseval: ‖Pf‖² = Σ a_k².
        let pf: Vec<f64> = f.iter().zip(&p.residual).map(|(a, r)| a - r).collect();
        let pf_norm_sq = g.inner_product_real(&pf, &pf).unwrap();
        let coeff_sq: f64 = p.coefficients.iter().map(|a| a * a).sum();
        assert_relative_eq!(pf_norm_sq, coeff_sq, max_relative = 1e-10);
    }

    #[test]
    fn projection_is_idempotent() {
        let basis = legendre_span_basis(96, 6, 50);
        let g = basis.grid().clone();
        let f: Vec<f64> = g.nodes().iter().map(|&x| x.sin().exp()).collect();
        let p1 = project(&f, &basis).unwrap();
        let pf: Vec<f64> = f.iter().zip(&p1.residual).map(|(a, r)| a - r).collect();
        let p2 = project(&pf, &basis).unwrap();
        for (a, b) in p1.coefficients.iter().zip(&p2.coefficients) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(p2.residual_norm < 1e-12);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let basis = legendre_span_basis(64, 3, 30);
        assert!(project(&[0.0; 32], &basis).is_err());
    }

    #[test]
    fn error_profile_of_legendre_span() {
        // Exactly {q_0..q_5}: degrees ≤ 5 are captured perfectly, everything
        // beyond is fully missed.
        let basis = legendre_span_basis(128, 5, 80);
        let profile = legendre_error_profile(&basis, 12).unwrap();
        for (j, &e) in profile.iter().enumerate() {
            if j <= 5 {
                // The sqrt(1 − captured) form floors out near √ε.
                assert!(e < 1e-6, "degree {j}: error {e}");
            } else {
                assert_abs_diff_eq!(e, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn error_profile_is_bounded_by_one() {
        let g = grid(256);
        let basis = OrthonormalBasis::trigonometric(&g, 8, 100).unwrap();
        let profile = legendre_error_profile(&basis, 100).unwrap();
        assert_eq!(profile.len(), 101);
        for &e in &profile {
            assert!((0.0..=1.0 + 1e-12).contains(&e));
        }
    }

    #[test]
    fn bound_vanishes_for_contained_target() {
        // f = q_2 with a basis containing q_2 and r_leg ≥ 2.
        let basis = legendre_span_basis(128, 5, 60);
        let legendre = LegendreBasis::new(DEFAULT_DOMAIN, 2).unwrap();
        let report = ac3_bound(
            move |x| legendre.eval(2, &[x]).unwrap()[0],
            &basis,
            4,
        )
        .unwrap();
        assert!(report.bound < 1e-12, "bound {:.1e}", report.bound);
        assert!(report.projection_error < 1e-12);
    }

    #[test]
    fn bound_dominates_error_for_stock_targets() {
        // A basis spanning {q_0..q_9} plus orthonormalized noise columns.
        let g = grid(512);
        let legendre = LegendreBasis::new(DEFAULT_DOMAIN, 24).unwrap();
        let q = legendre.eval_matrix(g.nodes()).unwrap();
        let mut columns = DMatrix::zeros(g.len(), 13);
        columns.view_mut((0, 0), (g.len(), 10)).copy_from(&q.columns(0, 10));
        // "Noise": higher Legendre degrees standing in for unstructured
        // directions, so orthonormality is exact.
        columns.view_mut((0, 10), (g.len(), 1)).copy_from(&q.column(17));
        columns.view_mut((0, 11), (g.len(), 1)).copy_from(&q.column(21));
        columns.view_mut((0, 12), (g.len(), 1)).copy_from(&q.column(24));
        let basis =
            OrthonormalBasis::from_node_functions(g, columns, 127, "span-plus-noise").unwrap();

        for name in NAMED_TARGETS {
            let f = named_target(name).unwrap();
            let report = ac3_bound(f, &basis, 60).unwrap();
            // validate() already ran inside; check the split is meaningful.
            assert!(report.tail >= 0.0);
            assert!(report.damped_sum >= 0.0);
            assert!(report.projection_error <= report.bound + 1e-9);
        }
    }

    #[test]
    fn bound_rejects_out_of_range_split() {
        let basis = legendre_span_basis(64, 3, 30);
        assert!(ac3_bound(|x| x.sin(), &basis, 31).is_err());
    }

    #[test]
    fn coefficient_decay_is_geometric_for_analytic_target() {
        // e^{sin x} against the trigonometric oracle basis: |a_k| should be
        // dominated by C·ρ^{−k}; check the log-linear fit quality.
        let g = grid(512);
        let basis = OrthonormalBasis::trigonometric(&g, 16, 127).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|&x| x.sin().exp()).collect();
        let p = project(&f, &basis).unwrap();
        // Group by frequency: take the max magnitude at each k to avoid the
        // zero cos-coefficients of an odd-symmetric target.
        let mut by_freq = vec![0.0f64; 17];
        by_freq[0] = p.coefficients[0].abs();
        for k in 1..=16 {
            by_freq[k] = p.coefficients[2 * k - 1]
                .abs()
                .max(p.coefficients[2 * k].abs());
        }
        let points: Vec<(f64, f64)> = by_freq
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 1e-14)
            .map(|(k, &a)| (k as f64, a.ln()))
            .collect();
        assert!(points.len() >= 8);
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let mean_y = sy / n;
        let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        let ss_res: f64 = points
            .iter()
            .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
            .sum();
        let r2 = 1.0 - ss_res / ss_tot;
        assert!(slope < 0.0, "decay slope {slope} must be negative");
        assert!(r2 > 0.9, "log-linear fit R² = {r2}");
    }
}
