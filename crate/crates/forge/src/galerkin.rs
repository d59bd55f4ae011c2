//! Spectral Galerkin evolution of the periodic PDEs in a custom basis:
//! operator-matrix assembly, tau-style boundary enforcement, fixed-step RK4
//! with an energy guard, and error metrics against reference trajectories.

use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::reference::{PdeKind, Trajectory};
use nalgebra::DMatrix;

/// Boundary rows whose largest entry is below this are identically satisfied
/// by the basis (an intrinsically periodic family) and are not enforced.
const INACTIVE_CONSTRAINT_TOL: f64 = 1e-8;
/// Condition-number ceiling on the tau sub-block.
const TAU_CONDITION_LIMIT: f64 = 1e12;

/// Precomputed Galerkin operators for one PDE in one basis.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub pde: PdeKind,
    pub nu: f64,
    rank: usize,
    /// ⟨φ_m, φ'_k⟩.
    d1: DMatrix<f64>,
    /// ⟨φ_m, φ''_k⟩, for the diffusive problems.
    d2: Option<DMatrix<f64>>,
    /// Dense ⟨φ_m, φ_k φ'_l⟩ at index (m·r + k)·r + l, for the nonlinear
    /// problems.
    triple: Option<Vec<f64>>,
    /// All boundary-constraint rows (b×r), active or not.
    boundary_rows: DMatrix<f64>,
    /// Indices of the rows that actually need enforcement.
    active_rows: Vec<usize>,
    /// Coefficients determined by the constraints (one per active row).
    tau_columns: Vec<usize>,
    /// Coefficients advanced by the ODEs (the complement of `tau_columns`).
    evolved_columns: Vec<usize>,
}

/// Evolution record: coefficients over time, the energy series Σ a_k², and
/// the blowup flag when the energy guard halts the run.
#[derive(Debug, Clone)]
pub struct CoefficientTrajectory {
    pub times: Vec<f64>,
    /// One row per recorded time, r columns.
    pub coefficients: DMatrix<f64>,
    pub energy: Vec<f64>,
    /// Time at which the guard (or a non-finite state) stopped the run.
    pub blowup_time: Option<f64>,
}

impl CoefficientTrajectory {
    pub fn rank(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    pub fn coefficients_at(&self, i: usize) -> Vec<f64> {
        self.coefficients.row(i).iter().copied().collect()
    }
}

/// 2×2 (or 1×1) condition number via singular values.
fn small_block_condition(block: &DMatrix<f64>) -> f64 {
    let svd = block.clone().svd(false, false);
    let max = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// All size-k index subsets of `pool`, in lexicographic order.
fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in pool.iter().enumerate() {
        for mut rest in subsets(&pool[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Assemble the Galerkin operators for `pde` in `basis` by quadrature on the
/// basis grid. Boundary rows encode periodicity: φ_k(0) − φ_k(2π), and for
/// second-order problems also φ'_k(0) − φ'_k(2π).
pub fn assemble(basis: &OrthonormalBasis, pde: PdeKind, nu: f64) -> Result<GalerkinSystem> {
    if nu < 0.0 || !nu.is_finite() {
        return Err(Error::invalid(format!("viscosity must be ≥ 0, got {nu}")));
    }
    let r = basis.rank();
    let b = pde.boundary_constraints();
    if r <= b {
        return Err(Error::invalid(format!(
            "rank {r} must exceed the {b} boundary constraints"
        )));
    }
    let grid = basis.grid();
    let nodes = grid.nodes().to_vec();
    let phi = basis.eval(&nodes)?; // M×r
    let dphi = basis.deriv(&nodes, 1)?;

    // Ψᵀ W Χ for the operator matrices.
    let mut weighted_phi = phi.clone();
    for (i, &w) in grid.weights().iter().enumerate() {
        for k in 0..r {
            weighted_phi[(i, k)] *= w;
        }
    }
    let d1 = weighted_phi.transpose() * &dphi;
    let d2 = if pde.has_diffusion() {
        let ddphi = basis.deriv(&nodes, 2)?;
        Some(weighted_phi.transpose() * &ddphi)
    } else {
        None
    };

    let triple = if pde.is_nonlinear() {
        // T_{mkl} = Σ_i ω_i φ_m(x_i) φ_k(x_i) φ'_l(x_i): for each l, the
        // matrix Φᵀ diag(ω ⊙ φ'_l) Φ.
        let m_nodes = grid.len();
        let mut t = vec![0.0; r * r * r];
        let mut scaled = DMatrix::zeros(m_nodes, r);
        for l in 0..r {
            for i in 0..m_nodes {
                let factor = grid.weights()[i] * dphi[(i, l)];
                for k in 0..r {
                    scaled[(i, k)] = factor * phi[(i, k)];
                }
            }
            let slice = phi.transpose() * &scaled; // r×r: (m, k)
            for m in 0..r {
                for k in 0..r {
                    t[(m * r + k) * r + l] = slice[(m, k)];
                }
            }
        }
        Some(t)
    } else {
        None
    };

    // Periodicity constraint rows.
    let (dom_a, dom_b) = grid.domain();
    let ends = [dom_a, dom_b];
    let vals = basis.eval(&ends)?;
    let derivs = basis.deriv(&ends, 1)?;
    let mut boundary_rows = DMatrix::zeros(b, r);
    for k in 0..r {
        boundary_rows[(0, k)] = vals[(0, k)] - vals[(1, k)];
        if b > 1 {
            boundary_rows[(1, k)] = derivs[(0, k)] - derivs[(1, k)];
        }
    }

    let active_rows: Vec<usize> = (0..b)
        .filter(|&row| {
            boundary_rows
                .row(row)
                .iter()
                .any(|v| v.abs() > INACTIVE_CONSTRAINT_TOL)
        })
        .collect();

    // Choose the tau columns: trailing by default, pivoting to the best-
    // conditioned subset of the trailing min(2b, r) columns if needed.
    let n_active = active_rows.len();
    let mut tau_columns: Vec<usize> = (r - n_active..r).collect();
    if n_active > 0 {
        let cond_of = |cols: &[usize]| -> f64 {
            let block = DMatrix::from_fn(n_active, cols.len(), |i, j| {
                boundary_rows[(active_rows[i], cols[j])]
            });
            small_block_condition(&block)
        };
        if cond_of(&tau_columns) >= TAU_CONDITION_LIMIT {
            let pool_start = r.saturating_sub((2 * b).min(r));
            let pool: Vec<usize> = (pool_start..r).collect();
            let best = subsets(&pool, n_active)
                .into_iter()
                .map(|s| (cond_of(&s), s))
                .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite condition"));
            match best {
                Some((cond, cols)) if cond < TAU_CONDITION_LIMIT => tau_columns = cols,
                _ => {
                    return Err(Error::LinearAlgebra(
                        "no well-conditioned tau sub-block among the trailing columns".into(),
                    ))
                }
            }
        }
    }
    let evolved_columns: Vec<usize> = (0..r).filter(|c| !tau_columns.contains(c)).collect();

    Ok(GalerkinSystem {
        pde,
        nu,
        rank: r,
        d1,
        d2,
        triple,
        boundary_rows,
        active_rows,
        tau_columns,
        evolved_columns,
    })
}

impl GalerkinSystem {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of declared boundary constraints b.
    pub fn n_constraints(&self) -> usize {
        self.boundary_rows.nrows()
    }

    /// Constraints that actually need enforcement (rows the basis does not
    /// satisfy identically).
    pub fn n_active_constraints(&self) -> usize {
        self.active_rows.len()
    }

    /// Which coefficients the tau step determines.
    pub fn tau_columns(&self) -> &[usize] {
        &self.tau_columns
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> Option<&DMatrix<f64>> {
        self.d2.as_ref()
    }

    pub fn triple(&self, m: usize, k: usize, l: usize) -> f64 {
        let t = self.triple.as_ref().expect("nonlinear system");
        t[(m * self.rank + k) * self.rank + l]
    }

    /// Full-length derivative vector before restriction to evolved entries.
    fn full_rhs(&self, a: &[f64], out: &mut [f64]) {
        let r = self.rank;
        if self.pde.is_nonlinear() {
            // Quadratic contraction −Σ_{k,l} T_{mkl} a_k a_l.
            let t = self.triple.as_ref().expect("nonlinear system");
            for m in 0..r {
                let mut acc = 0.0;
                for k in 0..r {
                    let ak = a[k];
                    if ak == 0.0 {
                        continue;
                    }
                    let base = (m * r + k) * r;
                    let mut inner = 0.0;
                    for l in 0..r {
                        inner += t[base + l] * a[l];
                    }
                    acc -= ak * inner;
                }
                out[m] = acc;
            }
        } else {
            // Linear advective part −D1·a.
            for m in 0..r {
                let mut acc = 0.0;
                for k in 0..r {
                    acc -= self.d1[(m, k)] * a[k];
                }
                out[m] = acc;
            }
        }
        if let Some(d2) = &self.d2 {
            for m in 0..r {
                let mut acc = 0.0;
                for k in 0..r {
                    acc += d2[(m, k)] * a[k];
                }
                out[m] += self.nu * acc;
            }
        }
    }

    /// da/dt for the evolved coefficients (length r − b_active).
    pub fn rhs(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.rank {
            return Err(Error::dims(format!(
                "state length {} does not match rank {}",
                a.len(),
                self.rank
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coefficient state"));
        }
        let mut full = vec![0.0; self.rank];
        self.full_rhs(a, &mut full);
        Ok(self.evolved_columns.iter().map(|&c| full[c]).collect())
    }

    /// Overwrite the tau-determined coefficients so every active boundary
    /// row annihilates `a`. Leaves the evolved coefficients untouched.
    pub fn tau_enforce(&self, a: &mut [f64]) -> Result<()> {
        let n = self.active_rows.len();
        if n == 0 {
            return Ok(());
        }
        // Solve G_tau · a_tau = −G_free · a_free.
        let mut rhs = nalgebra::DVector::zeros(n);
        for (i, &row) in self.active_rows.iter().enumerate() {
            let mut acc = 0.0;
            for &c in &self.evolved_columns {
                acc += self.boundary_rows[(row, c)] * a[c];
            }
            rhs[i] = -acc;
        }
        let block = DMatrix::from_fn(n, n, |i, j| {
            self.boundary_rows[(self.active_rows[i], self.tau_columns[j])]
        });
        let solution = block
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearAlgebra("singular tau sub-block".into()))?;
        for (j, &c) in self.tau_columns.iter().enumerate() {
            a[c] = solution[j];
        }
        Ok(())
    }

    /// Residual of the boundary rows at `a` (sup over active rows).
    pub fn constraint_residual(&self, a: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &row in &self.active_rows {
            let mut acc = 0.0;
            for c in 0..self.rank {
                acc += self.boundary_rows[(row, c)] * a[c];
            }
            worst = worst.max(acc.abs());
        }
        worst
    }
}

/// Projection of an initial condition onto the basis, with the tau
/// constraints applied once so a(0) starts on the constraint manifold.
pub fn initial_coefficients(
    u0_nodes: &[f64],
    basis: &OrthonormalBasis,
    system: &GalerkinSystem,
) -> Result<Vec<f64>> {
    let projection = crate::approximation::project(u0_nodes, basis)?;
    let mut a = projection.coefficients;
    system.tau_enforce(&mut a)?;
    Ok(a)
}

/// Fixed-step RK4 options for [`evolve`].
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Energy-guard ratio; the run halts once Σ a² exceeds this multiple of
    /// the initial energy.
    pub guard_ratio: f64,
    /// Re-enforce the tau constraints inside every RK stage instead of once
    /// per completed step.
    pub tau_every_stage: bool,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            guard_ratio: 1.025,
            tau_every_stage: false,
        }
    }
}

/// Advance the evolved coefficients by classical RK4, enforcing the tau
/// constraints after each completed step and recording the energy series.
/// The run halts early (with `blowup_time` set) when the energy exceeds
/// `guard_ratio` × its initial value or the state stops being finite.
pub fn evolve(
    system: &GalerkinSystem,
    a0: &[f64],
    opts: &EvolveOptions,
) -> Result<CoefficientTrajectory> {
    if !(opts.dt > 0.0) || !(opts.t_final > 0.0) {
        return Err(Error::invalid("dt and t_final must be positive"));
    }
    let r = system.rank();
    if a0.len() != r {
        return Err(Error::dims("initial coefficients do not match rank"));
    }
    let n_steps = (opts.t_final / opts.dt).round() as usize;
    let mut a = a0.to_vec();
    let energy_of = |a: &[f64]| -> f64 { a.iter().map(|v| v * v).sum() };
    let e0 = energy_of(&a);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut rows: Vec<f64> = Vec::with_capacity((n_steps + 1) * r);
    let mut energy = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    rows.extend_from_slice(&a);
    energy.push(e0);
    let mut blowup_time = None;

    let n_evolved = system.evolved_columns.len();
    let mut stage_state = vec![0.0; r];
    let mut k_stages = vec![vec![0.0; n_evolved]; 4];

    'outer: for step in 0..n_steps {
        let t = step as f64 * opts.dt;
        // Classical RK4 on the evolved entries; tau entries ride along
        // frozen within the step unless per-stage enforcement is on.
        let stage_offsets = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            stage_state.copy_from_slice(&a);
            if s > 0 {
                let h = stage_offsets[s] * opts.dt;
                for (e, &c) in system.evolved_columns.iter().enumerate() {
                    stage_state[c] = a[c] + h * k_stages[s - 1][e];
                }
            }
            if opts.tau_every_stage {
                system.tau_enforce(&mut stage_state)?;
            }
            match system.rhs(&stage_state) {
                Ok(k) => k_stages[s] = k,
                Err(_) => {
                    blowup_time = Some(t);
                    break 'outer;
                }
            }
        }
        for (e, &c) in system.evolved_columns.iter().enumerate() {
            a[c] += opts.dt / 6.0
                * (k_stages[0][e]
                    + 2.0 * k_stages[1][e]
                    + 2.0 * k_stages[2][e]
                    + k_stages[3][e]);
        }
        system.tau_enforce(&mut a)?;

        let t_next = (step + 1) as f64 * opts.dt;
        let e = energy_of(&a);
        times.push(t_next);
        rows.extend_from_slice(&a);
        energy.push(e);
        if !e.is_finite() || e > opts.guard_ratio * e0 {
            blowup_time = Some(t_next);
            break;
        }
    }

    let n_rows = times.len();
    Ok(CoefficientTrajectory {
        times,
        coefficients: DMatrix::from_row_slice(n_rows, r, &rows),
        energy,
        blowup_time,
    })
}

/// Relative Euclidean two-norm error at one time: ‖u − u_ref‖₂/‖u_ref‖₂ over
/// matched node values.
pub fn relative_error(u_custom: &[f64], u_reference: &[f64]) -> Result<f64> {
    if u_custom.len() != u_reference.len() {
        return Err(Error::dims("error comparison needs matched grids"));
    }
    let ref_norm: f64 = u_reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        return Err(Error::invalid("reference field has zero norm"));
    }
    let diff: f64 = u_custom
        .iter()
        .zip(u_reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / ref_norm)
}

/// Time-averaged error by the trapezoidal rule: (1/T)∫ E₂ dt.
pub fn averaged_error(errors: &[f64], times: &[f64]) -> Result<f64> {
    if errors.len() != times.len() || errors.len() < 2 {
        return Err(Error::dims("need at least two matched (t, E2) samples"));
    }
    let mut integral = 0.0;
    for i in 1..errors.len() {
        let dt = times[i] - times[i - 1];
        integral += 0.5 * dt * (errors[i] + errors[i - 1]);
    }
    let span = times[times.len() - 1] - times[0];
    Ok(integral / span)
}

/// E₂(t) of a coefficient trajectory against a reference trajectory,
/// evaluated at the basis grid nodes at each recorded coefficient time
/// (nearest reference frame).
pub fn error_series(
    trajectory: &CoefficientTrajectory,
    basis: &OrthonormalBasis,
    reference: &Trajectory,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nodes = basis.grid().nodes().to_vec();
    let phi = basis.eval(&nodes)?;
    let mut times = Vec::with_capacity(trajectory.n_steps());
    let mut errors = Vec::with_capacity(trajectory.n_steps());
    for i in 0..trajectory.n_steps() {
        let t = trajectory.times[i];
        let frame = reference.nearest_frame(t);
        let u_ref = reference.values_at(frame, &nodes)?;
        let a = trajectory.coefficients.row(i);
        let u: Vec<f64> = (0..nodes.len())
            .map(|node| {
                let mut acc = 0.0;
                for k in 0..basis.rank() {
                    acc += phi[(node, k)] * a[k];
                }
                acc
            })
            .collect();
        times.push(t);
        errors.push(relative_error(&u, &u_ref)?);
    }
    Ok((times, errors))
}
