//! Gauss–Legendre quadrature, the discrete L² inner product, and orthonormal
//! Legendre polynomials on an interval.
//!
//! Everything else in the crate sits on top of this module: candidate
//! functions are sampled at the quadrature nodes, inner products are the
//! weighted sums below, and basis functions are stored as coefficient vectors
//! against the orthonormal Legendre family returned by [`LegendreBasis`].

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Our PDEs live on [0, 2π].
pub const DEFAULT_DOMAIN: (f64, f64) = (0.0, std::f64::consts::TAU);

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Legendre nodes and weights on an interval `(a, b)`.
///
/// The rule integrates polynomials of degree ≤ 2M−1 exactly and defines the
/// discrete inner product ⟨h₁, h₂⟩ = Σᵢ conj(h₁(xᵢ)) ωᵢ h₂(xᵢ).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    domain: (f64, f64),
}

/// Legendre polynomial value and derivative at `x` on [−1, 1], by the
/// three-term recurrence.
fn legendre_p_dp(degree: usize, x: f64) -> (f64, f64) {
    if degree == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..degree {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    // dP_n/dx = n (x P_n - P_{n-1}) / (x^2 - 1)
    let n = degree as f64;
    let dp = n * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

impl QuadratureGrid {
    /// Build the M-point Gauss–Legendre rule on `domain`.
    ///
    /// Nodes are found by Newton iteration on the roots of P_M starting from
    /// the Chebyshev-like asymptotic guesses, then affinely mapped onto the
    /// domain.
    pub fn gauss_legendre(m: usize, domain: (f64, f64)) -> Result<Self> {
        let (a, b) = domain;
        if m < 1 {
            return Err(Error::invalid("quadrature rule needs at least one node"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "degenerate quadrature domain ({a}, {b})"
            )));
        }

        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        // Roots come out in descending order from this guess; only the lower
        // half needs solving, the rest follows by symmetry.
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for iter in 0..=NEWTON_MAX_ITER {
                let (p, dp) = legendre_p_dp(m, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    break;
                }
                if iter == NEWTON_MAX_ITER {
                    return Err(Error::LinearAlgebra(format!(
                        "Legendre root {i} of {m} did not converge"
                    )));
                }
            }
            let (_, dp) = legendre_p_dp(m, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Node i from the cosine guess is the (m-1-i)-th in ascending order.
            nodes[m - 1 - i] = x;
            weights[m - 1 - i] = w;
            nodes[i] = -x;
            weights[i] = w;
        }
        if m % 2 == 1 {
            // Force the middle node to be exactly zero on the reference interval.
            nodes[m / 2] = 0.0;
            let (_, dp) = legendre_p_dp(m, 0.0);
            weights[m / 2] = 2.0 / (dp * dp);
        }

        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            *x = center + half * *x;
            *w *= half;
        }
        Ok(Self {
            nodes,
            weights,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// ∫ f dx by the rule.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Discrete inner product Σᵢ conj(h₁ᵢ) ωᵢ h₂ᵢ of two node-value vectors.
    pub fn inner_product(&self, h1: &[Complex64], h2: &[Complex64]) -> Result<Complex64> {
        if h1.len() != self.len() || h2.len() != self.len() {
            return Err(Error::dims(format!(
                "inner product needs two length-{} vectors, got {} and {}",
                self.len(),
                h1.len(),
                h2.len()
            )));
        }
        Ok(h1
            .iter()
            .zip(h2)
            .zip(&self.weights)
            .map(|((&a, &b), &w)| a.conj() * w * b)
            .sum())
    }

    /// Real-valued specialization of [`Self::inner_product`].
    pub fn inner_product_real(&self, h1: &[f64], h2: &[f64]) -> Result<f64> {
        if h1.len() != self.len() || h2.len() != self.len() {
            return Err(Error::dims(format!(
                "inner product needs two length-{} vectors, got {} and {}",
                self.len(),
                h1.len(),
                h2.len()
            )));
        }
        Ok(h1
            .iter()
            .zip(h2)
            .zip(&self.weights)
            .map(|((&a, &b), &w)| a * w * b)
            .sum())
    }

    /// Discrete L² norm of a node-value vector.
    pub fn norm(&self, h: &[f64]) -> Result<f64> {
        Ok(self.inner_product_real(h, h)?.max(0.0).sqrt())
    }
}

/// The orthonormal Legendre family {q₀, …, q_L} on an interval.
///
/// q_j is the degree-j Legendre polynomial shifted to the domain and scaled by
/// √((2j+1)/(b−a)) so that ⟨q_i, q_j⟩ = δ_ij under the exact L² inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreBasis {
    domain: (f64, f64),
    max_degree: usize,
}

impl LegendreBasis {
    pub fn new(domain: (f64, f64), max_degree: usize) -> Result<Self> {
        let (a, b) = domain;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "degenerate Legendre domain ({a}, {b})"
            )));
        }
        Ok(Self { domain, max_degree })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn check_point(&self, x: f64) -> Result<()> {
        let (a, b) = self.domain;
        // Closure of the domain, with a roundoff allowance at the endpoints.
        let slack = 1e-12 * (b - a);
        if !(a - slack..=b + slack).contains(&x) {
            return Err(Error::invalid(format!(
                "point {x} outside domain [{a}, {b}]"
            )));
        }
        Ok(())
    }

    fn to_reference(&self, x: f64) -> f64 {
        let (a, b) = self.domain;
        (2.0 * x - a - b) / (b - a)
    }

    /// Orthonormal scale factor √((2j+1)/(b−a)).
    fn scale(&self, j: usize) -> f64 {
        let (a, b) = self.domain;
        ((2.0 * j as f64 + 1.0) / (b - a)).sqrt()
    }

    /// Values of q_j at `points`.
    pub fn eval(&self, j: usize, points: &[f64]) -> Result<Vec<f64>> {
        if j > self.max_degree {
            return Err(Error::invalid(format!(
                "degree {j} exceeds basis maximum {}",
                self.max_degree
            )));
        }
        let s = self.scale(j);
        points
            .iter()
            .map(|&x| {
                self.check_point(x)?;
                let xi = self.to_reference(x).clamp(-1.0, 1.0);
                Ok(s * legendre_p_dp(j, xi).0)
            })
            .collect()
    }

    /// Matrix of all q_j values: entry (i, j) = q_j(points[i]), j = 0..=L.
    ///
    /// The forward three-term recurrence fills a whole row at a time; this is
    /// the workhorse for projections and Gram matrices.
    pub fn eval_matrix(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let l = self.max_degree;
        let mut out = DMatrix::zeros(points.len(), l + 1);
        for (i, &x) in points.iter().enumerate() {
            self.check_point(x)?;
            let xi = self.to_reference(x).clamp(-1.0, 1.0);
            let mut p_prev = 1.0;
            let mut p = xi;
            out[(i, 0)] = self.scale(0);
            if l >= 1 {
                out[(i, 1)] = self.scale(1) * p;
            }
            for j in 1..l {
                let jf = j as f64;
                let p_next = ((2.0 * jf + 1.0) * xi * p - jf * p_prev) / (jf + 1.0);
                p_prev = p;
                p = p_next;
                out[(i, j + 1)] = self.scale(j + 1) * p;
            }
        }
        Ok(out)
    }

    /// Coefficients (in this basis) of the derivative of the expansion
    /// Σ c_j q_j, via the downward Legendre recurrence and the affine chain
    /// factor 2/(b−a). Applying twice yields second-derivative coefficients.
    pub fn differentiate(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = coeffs.len();
        if n == 0 {
            return Vec::new();
        }
        let (a, b) = self.domain;
        // Work in the unnormalized P_j basis on the reference interval.
        let std_coeffs: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c * self.scale(j))
            .collect();
        // d_j = (2j+1) (s_{j+1} + d_{j+2} / (2j+5))
        let mut deriv = vec![0.0; n];
        for j in (0..n.saturating_sub(1)).rev() {
            let jf = j as f64;
            let tail = if j + 2 < n {
                deriv[j + 2] / (2.0 * jf + 5.0)
            } else {
                0.0
            };
            deriv[j] = (2.0 * jf + 1.0) * (std_coeffs[j + 1] + tail);
        }
        let chain = 2.0 / (b - a);
        for (j, d) in deriv.iter_mut().enumerate() {
            *d = *d * chain / self.scale(j);
        }
        deriv
    }

    /// Evaluate the expansion Σ c_j q_j at a point by Clenshaw's algorithm.
    pub fn clenshaw(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        self.check_point(x)?;
        let xi = self.to_reference(x).clamp(-1.0, 1.0);
        let n = coeffs.len();
        if n == 0 {
            return Ok(0.0);
        }
        // P_{k+1} = alpha_k P_k + beta_k P_{k-1},
        // alpha_k = (2k+1)/(k+1) xi, beta_k = -k/(k+1).
        let std_c: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c * self.scale(j))
            .collect();
        let mut y1 = 0.0;
        let mut y2 = 0.0;
        for k in (1..n).rev() {
            let kf = k as f64;
            let alpha = (2.0 * kf + 1.0) / (kf + 1.0) * xi;
            let beta_next = -(kf + 1.0) / (kf + 2.0);
            let y = std_c[k] + alpha * y1 + beta_next * y2;
            y2 = y1;
            y1 = y;
        }
        // f = c_0 P_0 + y1 P_1 + beta(1) y2 P_0
        Ok(std_c[0] + xi * y1 - 0.5 * y2)
    }

    /// Evaluate the expansion at many points.
    pub fn eval_expansion(&self, coeffs: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        points.iter().map(|&x| self.clenshaw(coeffs, x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn one_point_rule_is_midpoint() {
        let grid = QuadratureGrid::gauss_legendre(1, DEFAULT_DOMAIN).unwrap();
        assert_abs_diff_eq!(grid.nodes()[0], PI, epsilon = 1e-14);
        assert_abs_diff_eq!(grid.weights()[0], TAU, epsilon = 1e-13);
    }

    #[test]
    fn two_point_rule_on_reference() {
        let grid = QuadratureGrid::gauss_legendre(2, (-1.0, 1.0)).unwrap();
        let expected = 1.0 / 3.0_f64.sqrt();
        assert_abs_diff_eq!(grid.nodes()[0], -expected, epsilon = 1e-15);
        assert_abs_diff_eq!(grid.nodes()[1], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(grid.weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(grid.weights()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sixteen_point_rule_integrates_sin_squared() {
        let grid = QuadratureGrid::gauss_legendre(16, DEFAULT_DOMAIN).unwrap();
        // Analytic antiderivative of sin^2 is x/2 - sin(2x)/4, so the
        // integral over a full period is pi.
        let integral = grid.integrate(|x| x.sin().powi(2));
        assert_abs_diff_eq!(integral, PI, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(QuadratureGrid::gauss_legendre(4, (1.0, 1.0)).is_err());
        assert!(QuadratureGrid::gauss_legendre(4, (2.0, 1.0)).is_err());
        assert!(QuadratureGrid::gauss_legendre(0, DEFAULT_DOMAIN).is_err());
    }

    #[test]
    fn nodes_interior_increasing_weights_positive() {
        for m in [1, 2, 3, 7, 64, 129, 1024] {
            let grid = QuadratureGrid::gauss_legendre(m, DEFAULT_DOMAIN).unwrap();
            let (a, b) = grid.domain();
            for pair in grid.nodes().windows(2) {
                assert!(pair[0] < pair[1]);
            }
            assert!(grid.nodes().iter().all(|&x| a < x && x < b));
            assert!(grid.weights().iter().all(|&w| w > 0.0));
            let total: f64 = grid.weights().iter().sum();
            assert_relative_eq!(total, b - a, max_relative = 1e-12);
        }
    }

    #[test]
    fn exactness_on_monomials() {
        for m in [2usize, 8, 64] {
            let grid = QuadratureGrid::gauss_legendre(m, DEFAULT_DOMAIN).unwrap();
            let (a, b) = grid.domain();
            for k in 0..2 * m {
                let computed = grid.integrate(|x| x.powi(k as i32));
                let exact =
                    (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0);
                assert_relative_eq!(computed, exact, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn inner_product_basics() {
        let grid = QuadratureGrid::gauss_legendre(64, DEFAULT_DOMAIN).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); grid.len()];
        let ip = grid.inner_product(&ones, &ones).unwrap();
        assert_abs_diff_eq!(ip.re, TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-14);

        let sin: Vec<f64> = grid.nodes().iter().map(|&x| x.sin()).collect();
        let cos: Vec<f64> = grid.nodes().iter().map(|&x| x.cos()).collect();
        // Odd integrand over the full period.
        assert_abs_diff_eq!(grid.inner_product_real(&sin, &cos).unwrap(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(grid.inner_product_real(&sin, &sin).unwrap(), PI, epsilon = 1e-12);
    }

    #[test]
    fn inner_product_conjugate_symmetry_and_length_check() {
        let grid = QuadratureGrid::gauss_legendre(8, DEFAULT_DOMAIN).unwrap();
        let h1: Vec<Complex64> = grid
            .nodes()
            .iter()
            .map(|&x| Complex64::new(x.sin(), x.cos()))
            .collect();
        let h2: Vec<Complex64> = grid
            .nodes()
            .iter()
            .map(|&x| Complex64::new(x.cos(), 0.5 * x))
            .collect();
        let ab = grid.inner_product(&h1, &h2).unwrap();
        let ba = grid.inner_product(&h2, &h1).unwrap();
        assert_abs_diff_eq!(ab.re, ba.conj().re, epsilon = 1e-13);
        assert_abs_diff_eq!(ab.im, ba.conj().im, epsilon = 1e-13);
        assert!(grid.inner_product(&h1[..4], &h2).is_err());
    }

    #[test]
    fn legendre_constant_and_linear_values() {
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 8).unwrap();
        let v0 = basis.eval(0, &[0.3, PI, 5.0]).unwrap();
        for v in v0 {
            assert_abs_diff_eq!(v, 1.0 / TAU.sqrt(), epsilon = 1e-15);
        }
        // q_1 is odd about the interval midpoint.
        let v1 = basis.eval(1, &[PI]).unwrap();
        assert_abs_diff_eq!(v1[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn legendre_eval_rejects_bad_inputs() {
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 4).unwrap();
        assert!(basis.eval(5, &[1.0]).is_err());
        assert!(basis.eval(2, &[-0.5]).is_err());
        assert!(basis.eval(2, &[TAU + 0.1]).is_err());
    }

    #[test]
    fn q3_unit_norm_under_eight_point_rule() {
        // Gauss with M=8 is exact for the degree-6 integrand q_3^2.
        let grid = QuadratureGrid::gauss_legendre(8, DEFAULT_DOMAIN).unwrap();
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 3).unwrap();
        let q3 = basis.eval(3, grid.nodes()).unwrap();
        assert_abs_diff_eq!(grid.inner_product_real(&q3, &q3).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let l = 32;
        let grid = QuadratureGrid::gauss_legendre(64, DEFAULT_DOMAIN).unwrap();
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, l).unwrap();
        let q = basis.eval_matrix(grid.nodes()).unwrap();
        for i in 0..=l {
            for j in 0..=l {
                let ip = grid
                    .inner_product_real(q.column(i).as_slice(), q.column(j).as_slice())
                    .unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn differentiate_constant_is_zero() {
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 5).unwrap();
        let coeffs = vec![2.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        let d = basis.differentiate(&coeffs);
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn differentiate_matches_finite_differences() {
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 10).unwrap();

        // Degree-1 expansion first, then a fixed "random" degree-10 vector.
        let cases: Vec<Vec<f64>> = vec![
            vec![0.0, 1.0],
            vec![0.31, -1.2, 0.77, 0.05, -0.6, 1.4, -0.33, 0.21, 0.9, -0.47, 0.12],
        ];
        for coeffs in cases {
            let d = basis.differentiate(&coeffs);
            let h = 1e-5;
            for &x in &[0.5, 1.4, PI, 4.0, 5.8] {
                let fd = (basis.clenshaw(&coeffs, x + h).unwrap()
                    - basis.clenshaw(&coeffs, x - h).unwrap())
                    / (2.0 * h);
                let analytic = basis.clenshaw(&d, x).unwrap();
                assert_relative_eq!(analytic, fd, max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn second_derivative_by_double_application() {
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 6).unwrap();
        // f(x) = q_2 expansion; check f'' against central differences.
        let coeffs = vec![0.0, 0.0, 1.0, 0.0, 0.5, -0.25, 0.1];
        let d2 = basis.differentiate(&basis.differentiate(&coeffs));
        let h = 1e-4;
        for &x in &[1.0, PI, 5.0] {
            let f = |x: f64| basis.clenshaw(&coeffs, x).unwrap();
            let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            assert_relative_eq!(basis.clenshaw(&d2, x).unwrap(), fd, max_relative = 1e-5, epsilon = 1e-6);
        }
    }

    #[test]
    fn clenshaw_matches_direct_evaluation() {
        let basis = LegendreBasis::new(DEFAULT_DOMAIN, 12).unwrap();
        let coeffs: Vec<f64> = (0..=12).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let points = [0.1, 2.2, PI, 6.0];
        let q = basis.eval_matrix(&points).unwrap();
        for (i, &x) in points.iter().enumerate() {
            let direct: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| c * q[(i, j)])
                .sum();
            assert_relative_eq!(basis.clenshaw(&coeffs, x).unwrap(), direct, max_relative = 1e-13);
        }
    }
}
