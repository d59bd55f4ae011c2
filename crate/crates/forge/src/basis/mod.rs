//! Distillation of orthonormal, hierarchical, differentiable spatial basis
//! functions from frozen trunk-net candidates.
//!
//! The route: sample the w trunk outputs at chosen freeze times on a Gauss
//! grid and normalize the columns (the candidate set A); form the weighted
//! matrix B = W^{1/2}A and take its thin SVD B = QSVᵀ; the basis node values
//! are W^{−1/2}Q, ordered by the singular values; truncate to the σ_k above a
//! threshold; finally re-express each retained column in orthonormal Legendre
//! polynomials so the basis can be evaluated and differentiated anywhere.
//!
//! The classical alternative — eigendecomposing the Gram matrix D = AᵀWA and
//! recovering functions by dividing by σ_k — squares the singular values and
//! amplifies roundoff by 1/σ_k. It survives here only as a comparison oracle
//! ([`eigen_recovery_route`]); the main path never divides by a singular
//! value.

pub mod serialize;

use crate::error::{Error, Result};
use crate::network::DeepOnet;
use crate::quadrature::{LegendreBasis, QuadratureGrid};
use nalgebra::DMatrix;

/// Columns of normalized frozen trunk functions sampled on a quadrature grid.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    values: DMatrix<f64>,
    grid: QuadratureGrid,
    freeze_times: Vec<f64>,
    source: String,
    /// Non-fatal notes produced during construction (extrapolated freeze
    /// times, dropped dead columns).
    pub warnings: Vec<String>,
}

impl CandidateSet {
    /// Wrap raw columns: each column is normalized to unit discrete L² norm;
    /// columns with norm below 1e−14 are dropped with a warning.
    pub fn new(
        raw: DMatrix<f64>,
        grid: QuadratureGrid,
        freeze_times: Vec<f64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if raw.nrows() != grid.len() {
            return Err(Error::dims(format!(
                "candidate rows {} must match grid size {}",
                raw.nrows(),
                grid.len()
            )));
        }
        if raw.ncols() == 0 {
            return Err(Error::invalid("candidate set has no columns"));
        }
        let mut warnings = Vec::new();
        let mut kept = Vec::new();
        for k in 0..raw.ncols() {
            let col: Vec<f64> = raw.column(k).iter().copied().collect();
            let norm = grid.norm(&col)?;
            if norm < 1e-14 {
                warnings.push(format!("dropped zero-norm candidate column {k}"));
                continue;
            }
            kept.push((k, norm));
        }
        if kept.is_empty() {
            return Err(Error::DegenerateBasis(
                "all candidate columns have zero norm".into(),
            ));
        }
        let mut values = DMatrix::zeros(raw.nrows(), kept.len());
        for (out_k, &(k, norm)) in kept.iter().enumerate() {
            for i in 0..raw.nrows() {
                values[(i, out_k)] = raw[(i, k)] / norm;
            }
        }
        Ok(Self {
            values,
            grid,
            freeze_times,
            source: source.into(),
            warnings,
        })
    }

    /// Number of candidate functions p.
    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// The M×p matrix A with A_ik = τ_k(x_i).
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn freeze_times(&self) -> &[f64] {
        &self.freeze_times
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Evaluate all trunk outputs of `model` at each freeze time over the grid
/// nodes and stack them into a candidate set (p = |times|·w before dead
/// columns are dropped). Times outside `trained_span` are allowed but
/// flagged: the trunk extrapolates there.
pub fn freeze_trunk(
    model: &DeepOnet,
    times: &[f64],
    grid: &QuadratureGrid,
    trained_span: (f64, f64),
    source: impl Into<String>,
) -> Result<CandidateSet> {
    if times.is_empty() {
        return Err(Error::invalid("at least one freeze time is required"));
    }
    let m = grid.len();
    let w = model.width();
    let mut raw = DMatrix::zeros(m, times.len() * w);
    let mut warnings = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        if t < trained_span.0 - 1e-12 || t > trained_span.1 + 1e-12 {
            warnings.push(format!(
                "freeze time {t} lies outside the trained interval [{}, {}]; trunk values are extrapolated",
                trained_span.0, trained_span.1
            ));
        }
        let queries: Vec<(f64, f64)> = grid.nodes().iter().map(|&x| (t, x)).collect();
        let gamma = model.trunk_outputs(&queries)?;
        raw.view_mut((0, j * w), (m, w)).copy_from(&gamma);
    }
    let mut set = CandidateSet::new(raw, grid.clone(), times.to_vec(), source)?;
    set.warnings.splice(0..0, warnings);
    Ok(set)
}

/// How many leading singular directions to retain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    /// Keep every σ_k strictly above the threshold.
    Threshold(f64),
    /// Keep a fixed count (clamped to the number available).
    Count(usize),
}

/// Largest r with σ_r > threshold, for non-increasing σ.
pub fn select_rank(singular_values: &[f64], threshold: f64) -> usize {
    singular_values
        .iter()
        .take_while(|&&s| s > threshold)
        .count()
}

/// An orthonormal hierarchical basis: singular values, node values on the
/// construction grid, and (once projected) Legendre coefficients that make
/// the functions evaluable and differentiable anywhere on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    /// Full singular spectrum of the candidate set, non-increasing.
    singular_values: Vec<f64>,
    /// M×r node values of the retained functions (Eq. of W^{−1/2}Q).
    node_values: DMatrix<f64>,
    /// (L+1)×r Legendre coefficients; empty until projection.
    legendre_coeffs: Option<DMatrix<f64>>,
    legendre: Option<LegendreBasis>,
    rank: usize,
    threshold: f64,
    grid: QuadratureGrid,
    freeze_times: Vec<f64>,
    source: String,
}

impl OrthonormalBasis {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn node_values(&self) -> &DMatrix<f64> {
        &self.node_values
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn freeze_times(&self) -> &[f64] {
        &self.freeze_times
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn legendre_coeffs(&self) -> Option<&DMatrix<f64>> {
        self.legendre_coeffs.as_ref()
    }

    pub fn legendre_degree(&self) -> Option<usize> {
        self.legendre.as_ref().map(|l| l.max_degree())
    }

    /// σ₁/σ_r over the retained block, a conditioning indicator.
    pub fn condition_indicator(&self) -> f64 {
        if self.rank == 0 {
            f64::INFINITY
        } else {
            self.singular_values[0] / self.singular_values[self.rank - 1]
        }
    }

    fn coeffs(&self) -> Result<(&LegendreBasis, &DMatrix<f64>)> {
        match (&self.legendre, &self.legendre_coeffs) {
            (Some(l), Some(c)) => Ok((l, c)),
            _ => Err(Error::invalid(
                "basis has no Legendre expansion yet; run legendre_project first",
            )),
        }
    }

    /// Values of every retained basis function at `points` (rows: points).
    pub fn eval(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let (legendre, coeffs) = self.coeffs()?;
        Ok(legendre.eval_matrix(points)? * coeffs)
    }

    /// Derivatives of order 1 or 2, by exact differentiation of the Legendre
    /// expansion.
    pub fn deriv(&self, points: &[f64], order: usize) -> Result<DMatrix<f64>> {
        if !(1..=2).contains(&order) {
            return Err(Error::invalid(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        let (legendre, coeffs) = self.coeffs()?;
        let mut dcoeffs = DMatrix::zeros(coeffs.nrows(), coeffs.ncols());
        for k in 0..coeffs.ncols() {
            let col: Vec<f64> = coeffs.column(k).iter().copied().collect();
            let mut d = legendre.differentiate(&col);
            if order == 2 {
                d = legendre.differentiate(&d);
            }
            for (j, &v) in d.iter().enumerate() {
                dcoeffs[(j, k)] = v;
            }
        }
        Ok(legendre.eval_matrix(points)? * dcoeffs)
    }

    /// Largest entrywise deviation of the retained Gram matrix from the
    /// identity, under the exact Legendre inner product when an expansion is
    /// present, otherwise under the grid inner product.
    pub fn gram_deviation(&self) -> f64 {
        let gram = match &self.legendre_coeffs {
            Some(c) => c.transpose() * c,
            None => {
                let mut b = self.node_values.clone();
                for (i, &w) in self.grid.weights().iter().enumerate() {
                    let ws = w.sqrt();
                    for k in 0..b.ncols() {
                        b[(i, k)] *= ws;
                    }
                }
                b.transpose() * &b
            }
        };
        let mut worst: f64 = 0.0;
        for j in 0..gram.nrows() {
            for k in 0..gram.ncols() {
                let expected = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((gram[(j, k)] - expected).abs());
            }
        }
        worst
    }

    /// Build a basis directly from already-orthonormal node functions,
    /// bypassing the SVD: used for synthetic/oracle bases whose functional
    /// form is known exactly. Columns must be orthonormal under the grid
    /// inner product.
    pub fn from_node_functions(
        grid: QuadratureGrid,
        node_values: DMatrix<f64>,
        l: usize,
        source: impl Into<String>,
    ) -> Result<Self> {
        if node_values.nrows() != grid.len() {
            return Err(Error::dims("node rows must match grid size"));
        }
        let r = node_values.ncols();
        let mut basis = Self {
            singular_values: vec![1.0; r],
            node_values,
            legendre_coeffs: None,
            legendre: None,
            rank: r,
            threshold: 0.0,
            grid,
            freeze_times: Vec::new(),
            source: source.into(),
        };
        if basis.gram_deviation() > 1e-8 {
            return Err(Error::invalid(
                "node functions are not orthonormal under the grid inner product",
            ));
        }
        legendre_project(&mut basis, l)?;
        Ok(basis)
    }

    /// The exact trigonometric family {1, cos kx, sin kx}/norms up to
    /// `k_max`, projected onto Legendre polynomials of degree ≤ `l`. This is
    /// the closed-form oracle basis used to validate the Galerkin machinery
    /// (r = 2·k_max + 1 functions).
    pub fn trigonometric(grid: &QuadratureGrid, k_max: usize, l: usize) -> Result<Self> {
        let (a, b) = grid.domain();
        let span = b - a;
        let m = grid.len();
        let mut values = DMatrix::zeros(m, 2 * k_max + 1);
        let c0 = 1.0 / span.sqrt();
        let ck = (2.0 / span).sqrt();
        for (i, &x) in grid.nodes().iter().enumerate() {
            values[(i, 0)] = c0;
            for k in 1..=k_max {
                let kf = k as f64;
                values[(i, 2 * k - 1)] = ck * (kf * x).cos();
                values[(i, 2 * k)] = ck * (kf * x).sin();
            }
        }
        Self::from_node_functions(grid.clone(), values, l, "trigonometric-oracle")
    }
}

/// Square-root orthonormalization: thin SVD of B = W^{1/2}A, node values
/// W^{−1/2}Q, truncation by `rule`. The Legendre stage is left pending.
pub fn orthonormalize(candidates: &CandidateSet, rule: RankRule) -> Result<OrthonormalBasis> {
    let a = candidates.values();
    let grid = candidates.grid();
    let m = a.nrows();
    let mut b = a.clone();
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|&w| w.sqrt()).collect();
    for i in 0..m {
        for k in 0..b.ncols() {
            b[(i, k)] *= sqrt_w[i];
        }
    }
    let svd = b.svd(true, false);
    let q = svd
        .u
        .ok_or_else(|| Error::LinearAlgebra("SVD did not produce singular vectors".into()))?;

    // Defensive descending sort; the factorization contract alone is not
    // trusted to order the spectrum.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("finite singular values")
    });
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let rank = match rule {
        RankRule::Threshold(t) => {
            if t < 0.0 {
                return Err(Error::invalid("threshold must be nonnegative"));
            }
            select_rank(&sigmas, t)
        }
        RankRule::Count(n) => n.min(sigmas.len()),
    };
    let threshold = match rule {
        RankRule::Threshold(t) => t,
        RankRule::Count(_) => 0.0,
    };

    let mut node_values = DMatrix::zeros(m, rank);
    for (out_k, &src_k) in order.iter().take(rank).enumerate() {
        for i in 0..m {
            node_values[(i, out_k)] = q[(i, src_k)] / sqrt_w[i];
        }
    }
    Ok(OrthonormalBasis {
        singular_values: sigmas,
        node_values,
        legendre_coeffs: None,
        legendre: None,
        rank,
        threshold,
        grid: grid.clone(),
        freeze_times: candidates.freeze_times().to_vec(),
        source: candidates.source().to_string(),
    })
}

/// Populate the Legendre expansion: c_jk = Σ_i q_j(x_i) φ_k(x_i) ω_i.
///
/// If truncation at degree L costs more orthonormality than 1e−8, a thin QR
/// under the exact Legendre inner product restores it and the node values
/// are refreshed from the re-orthonormalized expansion.
pub fn legendre_project(basis: &mut OrthonormalBasis, l: usize) -> Result<()> {
    let m = basis.grid.len();
    if l >= m {
        return Err(Error::invalid(format!(
            "Legendre degree {l} must be below the grid size {m}"
        )));
    }
    let legendre = LegendreBasis::new(basis.grid.domain(), l)?;
    let q = legendre.eval_matrix(basis.grid.nodes())?; // M×(L+1)
    let mut weighted = basis.node_values.clone();
    for (i, &w) in basis.grid.weights().iter().enumerate() {
        for k in 0..weighted.ncols() {
            weighted[(i, k)] *= w;
        }
    }
    let mut coeffs = q.transpose() * weighted; // (L+1)×r

    // Orthonormality check under the exact inner product: ⟨φ̃_j, φ̃_k⟩ = (CᵀC)_jk.
    let gram = coeffs.transpose() * &coeffs;
    let mut deviation: f64 = 0.0;
    for j in 0..gram.nrows() {
        for k in 0..gram.ncols() {
            let expected = if j == k { 1.0 } else { 0.0 };
            deviation = deviation.max((gram[(j, k)] - expected).abs());
        }
    }
    if deviation > 1e-8 && coeffs.ncols() > 0 {
        let qr = coeffs.clone().qr();
        let mut qf = qr.q();
        let r_mat = qr.r();
        // Keep each function pointing the way the projection produced it.
        for k in 0..qf.ncols() {
            if r_mat[(k, k)] < 0.0 {
                for j in 0..qf.nrows() {
                    qf[(j, k)] = -qf[(j, k)];
                }
            }
        }
        coeffs = qf;
        basis.node_values = legendre.eval_matrix(basis.grid.nodes())? * &coeffs;
    }
    basis.legendre_coeffs = Some(coeffs);
    basis.legendre = Some(legendre);
    Ok(())
}

/// Synthetic candidate set with an exactly prescribed singular spectrum.
///
/// The k-th singular function is exactly the orthonormal Legendre polynomial
/// q_k and the spectrum decays geometrically over `decades` orders of
/// magnitude. Candidates come out with unit norm by construction (Givens
/// rotations on the right factor in the style of Davies & Higham's
/// correlation-matrix generator), so normalization does not disturb the
/// spectrum. Used to exercise the orthonormalization routes on matrices of
/// known conditioning.
pub fn synthetic_graded_candidates(
    grid: &QuadratureGrid,
    p: usize,
    decades: f64,
    seed: u64,
) -> Result<CandidateSet> {
    use rand::{Rng, SeedableRng};
    if p < 2 || p > grid.len() {
        return Err(Error::invalid(format!(
            "candidate count {p} must be in [2, {}]",
            grid.len()
        )));
    }
    let mut sigmas: Vec<f64> = (0..p)
        .map(|k| 10f64.powf(-decades * k as f64 / (p as f64 - 1.0)))
        .collect();
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    let rescale = (p as f64 / total).sqrt();
    for s in sigmas.iter_mut() {
        *s *= rescale;
    }

    // Right factor C = diag(σ)Vᵀ with V random orthogonal; columns of C are
    // the candidates' Legendre coefficients.
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let gauss = DMatrix::from_fn(p, p, |_, _| {
        let r: f64 = rng.random_range(-1.0..1.0);
        r
    });
    let v = gauss.qr().q();
    let mut c = v.transpose();
    for k in 0..p {
        for j in 0..p {
            c[(k, j)] *= sigmas[k];
        }
    }

    // Rotate column pairs until every column norm is 1 (Σσ² = p makes that
    // reachable). Each rotation fixes one column exactly.
    for _ in 0..4 * p {
        let norms: Vec<f64> = (0..p).map(|j| c.column(j).norm_squared()).collect();
        let lo = norms
            .iter()
            .enumerate()
            .filter(|(_, &n)| n < 1.0 - 1e-12)
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite norm"));
        let hi = norms
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 1.0 + 1e-12)
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite norm"));
        let (Some((i, &a)), Some((j, &b))) = (lo, hi) else {
            break;
        };
        let cross: f64 = c.column(i).dot(&c.column(j));
        let disc = (cross * cross - (a - 1.0) * (b - 1.0)).max(0.0).sqrt();
        // Either root works; pick the better-conditioned one.
        let t = if cross >= 0.0 {
            (-cross - disc) / (b - 1.0)
        } else {
            (-cross + disc) / (b - 1.0)
        };
        let cos = 1.0 / (1.0 + t * t).sqrt();
        let sin = t * cos;
        for row in 0..p {
            let ci = c[(row, i)];
            let cj = c[(row, j)];
            c[(row, i)] = cos * ci + sin * cj;
            c[(row, j)] = -sin * ci + cos * cj;
        }
    }

    let legendre = LegendreBasis::new(grid.domain(), p - 1)?;
    let q = legendre.eval_matrix(grid.nodes())?;
    CandidateSet::new(q * c, grid.clone(), vec![0.0], "synthetic-graded")
}

/// The ill-conditioned recovery route, kept as a diagnostic oracle: form
/// D = AᵀWA, eigendecompose, and rebuild each function by dividing by its
/// singular value. Returns (σ, node values), both full-spectrum.
///
/// Do not use this in any production path — roundoff in φ_k grows like
/// ε/σ_k, which is exactly the failure the square-root SVD route avoids.
pub fn eigen_recovery_route(candidates: &CandidateSet) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let a = candidates.values();
    let grid = candidates.grid();
    let p = a.ncols();
    let mut wa = a.clone();
    for (i, &w) in grid.weights().iter().enumerate() {
        for k in 0..p {
            wa[(i, k)] *= w;
        }
    }
    let d = a.transpose() * wa; // p×p Gram
    let eig = nalgebra::SymmetricEigen::new(d);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let sigmas: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    let mut phis = DMatrix::zeros(a.nrows(), p);
    for (out_k, &src_k) in order.iter().enumerate() {
        let sigma = sigmas[out_k];
        if sigma == 0.0 {
            continue;
        }
        // φ_k = σ_k^{-1} Σ_l (v_k)_l τ_l
        let v = eig.eigenvectors.column(src_k);
        for i in 0..a.nrows() {
            let mut acc = 0.0;
            for lcol in 0..p {
                acc += v[lcol] * a[(i, lcol)];
            }
            phis[(i, out_k)] = acc / sigma;
        }
    }
    Ok((sigmas, phis))
}
