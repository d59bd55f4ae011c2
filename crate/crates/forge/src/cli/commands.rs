//! The five pipeline stages behind the `forge` binary: generate, train,
//! extract, solve, analyze. Each stage reads and writes artifacts in one
//! output directory; every artifact carries the resolved config hash and
//! seed.

use crate::approximation::{self, NAMED_TARGETS};
use crate::basis::{self, serialize as basis_io, OrthonormalBasis, RankRule};
use crate::cli::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::galerkin::{self, EvolveOptions};
use crate::io::{self, RunMeta};
use crate::network::{self, serialize as model_io, DeepOnet, QueryPair, TrainConfig, TrainingSet};
use crate::quadrature::{QuadratureGrid, DEFAULT_DOMAIN};
use crate::random_fields::GrfSampler;
use crate::reference::{sample_reference, solve_reference, SolveOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const DATASET_TRAIN: &str = "dataset_train.bin";
pub const DATASET_TEST: &str = "dataset_test.bin";
pub const MODEL_FILE: &str = "model.bin";
pub const BASIS_FILE: &str = "basis.bin";

fn ensure_outdir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite(format!(
            "{what} not found at {}; run the earlier pipeline stage first",
            path.display()
        )))
    }
}

fn meta_of(cfg: &ExperimentConfig) -> RunMeta {
    RunMeta::new(cfg.hash(), cfg.seed)
}

/// The uniform grid the reference solver discretizes on: collocation points
/// for the spectral problems, cell centers for the finite-volume one.
fn reference_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.pde.uses_finite_volume() {
        let dx = TAU / cfg.cells as f64;
        (0..cfg.cells).map(|i| (i as f64 + 0.5) * dx).collect()
    } else {
        GrfSampler::uniform_sensors(cfg.sensors)
    }
}

/// Draw `count` initial conditions jointly at the sensors and the reference
/// grid so both views describe the same random function.
fn draw_initial_conditions(
    cfg: &ExperimentConfig,
    stream: u64,
    count: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sensors = GrfSampler::uniform_sensors(cfg.sensors);
    let ref_grid = reference_grid(cfg);
    let mut joint = sensors.clone();
    joint.extend_from_slice(&ref_grid);
    let sampler = GrfSampler::new(cfg.length_scale, joint, cfg.seed)?.stream(stream);
    let draws = sampler.sample(count)?;
    let at_sensors = draws.columns(0, sensors.len()).into_owned();
    let at_ref = draws.columns(sensors.len(), ref_grid.len()).into_owned();
    Ok((at_sensors, at_ref))
}

/// Uniform random (t, x) solution locations for one initial condition.
fn draw_queries(rng: &mut ChaCha12Rng, count: usize, t_train: f64) -> Vec<(f64, f64)> {
    (0..count)
        .map(|_| (rng.random_range(0.0..=t_train), rng.random_range(0.0..TAU)))
        .collect()
}

fn build_dataset(
    cfg: &ExperimentConfig,
    at_sensors: &DMatrix<f64>,
    at_ref: &DMatrix<f64>,
    query_seed: u64,
) -> Result<TrainingSet> {
    let mut rng = ChaCha12Rng::seed_from_u64(query_seed);
    let mut pairs = Vec::with_capacity(at_sensors.nrows() * cfg.solution_locations);
    for ic in 0..at_sensors.nrows() {
        let queries = draw_queries(&mut rng, cfg.solution_locations, cfg.t_train);
        let u0: Vec<f64> = at_ref.row(ic).iter().copied().collect();
        let targets = sample_reference(
            cfg.pde,
            cfg.nu,
            &u0,
            cfg.t_train,
            &queries,
            cfg.save_every,
        )?;
        for (&(t, x), target) in queries.iter().zip(targets) {
            pairs.push(QueryPair { ic, t, x, target });
        }
    }
    Ok(TrainingSet {
        sensors: GrfSampler::uniform_sensors(cfg.sensors),
        branch_inputs: at_sensors.clone(),
        pairs,
    })
}

fn write_ic_csv(path: &Path, meta: &RunMeta, draws: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", meta.csv_header())?;
    for row in 0..draws.nrows() {
        let line: Vec<String> = (0..draws.ncols())
            .map(|c| io::fmt_f64(draws[(row, c)]))
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Sample initial conditions, integrate the reference solver through each,
/// and persist the training and test datasets.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_outdir(out)?;
    let meta = meta_of(cfg);

    let (train_sensors, train_ref) = draw_initial_conditions(cfg, 0, cfg.train_ics)?;
    let (test_sensors, test_ref) = draw_initial_conditions(cfg, 1, cfg.test_ics)?;
    write_ic_csv(&out.join("train_ics.csv"), &meta, &train_sensors)?;
    write_ic_csv(&out.join("test_ics.csv"), &meta, &test_sensors)?;

    let train = build_dataset(cfg, &train_sensors, &train_ref, cfg.seed.wrapping_add(2))?;
    model_io::save_dataset(&train, &meta, &out.join(DATASET_TRAIN))?;
    let test = build_dataset(cfg, &test_sensors, &test_ref, cfg.seed.wrapping_add(3))?;
    model_io::save_dataset(&test, &meta, &out.join(DATASET_TEST))?;

    println!(
        "generate: {} training and {} test initial conditions for {} ({} pairs each)",
        cfg.train_ics,
        cfg.test_ics,
        cfg.pde.name(),
        cfg.solution_locations
    );
    Ok(())
}

/// Train the DeepONet on the generated dataset; writes the model file and a
/// per-epoch loss CSV, and reports the held-out mean squared error.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_outdir(out)?;
    let meta = meta_of(cfg);
    let train_path = out.join(DATASET_TRAIN);
    require(&train_path, "training dataset")?;
    let (data, _) = model_io::load_dataset(&train_path)?;

    let mut model = DeepOnet::new(
        data.sensors.len(),
        cfg.width,
        cfg.branch_depth,
        cfg.trunk_depth,
        cfg.seed,
    )?;
    let train_cfg = TrainConfig::new(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.seed);
    let history = network::train(&mut model, &data, &train_cfg)?;

    let mut w = BufWriter::new(File::create(out.join("loss.csv"))?);
    writeln!(w, "epoch,loss")?;
    for (epoch, loss) in history.iter().enumerate() {
        writeln!(w, "{},{}", epoch, io::fmt_f64(*loss))?;
    }
    drop(w);

    model_io::save_model(&model, &meta, &out.join(MODEL_FILE))?;

    let test_path = out.join(DATASET_TEST);
    if test_path.exists() {
        let (test, _) = model_io::load_dataset(&test_path)?;
        let mse = network::evaluate_mse(&model, &test)?;
        println!(
            "train: final training loss {:.6e}, test MSE {:.6e}",
            history.last().copied().unwrap_or(f64::NAN),
            mse
        );
    } else {
        println!(
            "train: final training loss {:.6e} (no test dataset found)",
            history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

/// Freeze the trunk, orthonormalize, project onto Legendre polynomials, and
/// persist the basis plus its singular-value spectrum.
pub fn cmd_extract(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_outdir(out)?;
    let meta = meta_of(cfg);
    let model_path = out.join(MODEL_FILE);
    require(&model_path, "trained model")?;
    let (model, _) = model_io::load_model(&model_path)?;

    let grid = QuadratureGrid::gauss_legendre(cfg.m_solve, DEFAULT_DOMAIN)?;
    let candidates = basis::freeze_trunk(
        &model,
        &cfg.freeze_times,
        &grid,
        (0.0, cfg.t_train),
        format!("model:{}", meta.config_hash),
    )?;
    for warning in &candidates.warnings {
        eprintln!("extract: {warning}");
    }
    println!(
        "extract: {} candidate functions from {} freeze time(s)",
        candidates.p(),
        cfg.freeze_times.len()
    );

    let rule = if cfg.retained > 0 {
        RankRule::Count(cfg.retained)
    } else {
        RankRule::Threshold(cfg.threshold)
    };
    let mut basis = basis::orthonormalize(&candidates, rule)?;
    if basis.rank() == 0 {
        return Err(Error::DegenerateBasis(format!(
            "no singular value above threshold {:e}",
            cfg.threshold
        )));
    }
    let degree = cfg.legendre_degree.min(grid.len() - 1);
    basis::legendre_project(&mut basis, degree)?;

    let mut w = BufWriter::new(File::create(out.join("singular_values.csv"))?);
    writeln!(w, "{}", meta.csv_header())?;
    writeln!(w, "index,singular_value")?;
    for (i, s) in basis.singular_values().iter().enumerate() {
        writeln!(w, "{},{}", i, io::fmt_f64(*s))?;
    }
    drop(w);

    basis_io::save_basis(&basis, &meta, &out.join(BASIS_FILE))?;
    println!(
        "extract: retained r = {} of {} (σ1/σr = {:.3e}), Gram deviation {:.3e}",
        basis.rank(),
        basis.singular_values().len(),
        basis.condition_indicator(),
        basis.gram_deviation()
    );
    Ok(())
}

/// One evolved test case of `cmd_solve`.
struct SolveCase {
    label: String,
    ebar: f64,
    blowup_time: Option<f64>,
}

fn solve_one(
    cfg: &ExperimentConfig,
    out: &Path,
    basis: &OrthonormalBasis,
    system: &galerkin::GalerkinSystem,
    label: &str,
    u0_nodes: &[f64],
    u0_ref: &[f64],
    meta: &RunMeta,
) -> Result<SolveCase> {
    let reference = solve_reference(
        cfg.pde,
        cfg.nu,
        u0_ref,
        (0.0, cfg.t_final),
        SolveOptions {
            save_every: Some(cfg.reference_save_every()),
            meta: meta.clone(),
        },
    )?;
    let a0 = galerkin::initial_coefficients(u0_nodes, basis, system)?;
    let mut opts = EvolveOptions::new(cfg.dt, cfg.t_final);
    opts.guard_ratio = cfg.guard_ratio;
    let trajectory = galerkin::evolve(system, &a0, &opts)?;
    let (times, errors) = galerkin::error_series(&trajectory, basis, &reference)?;

    let mut w = BufWriter::new(File::create(out.join(format!("error_{label}.csv")))?);
    writeln!(w, "{}", meta.csv_header())?;
    writeln!(w, "t,e2")?;
    for (t, e) in times.iter().zip(&errors) {
        writeln!(w, "{},{}", io::fmt_f64(*t), io::fmt_f64(*e))?;
    }
    drop(w);

    let ebar = galerkin::averaged_error(&errors, &times)?;
    Ok(SolveCase {
        label: label.to_string(),
        ebar,
        blowup_time: trajectory.blowup_time,
    })
}

/// Evolve the PDE in the extracted (or cross-loaded) basis for the two test
/// initial conditions and compare against the reference solver.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_outdir(out)?;
    let meta = meta_of(cfg);
    let basis_path: PathBuf = match &cfg.cross_basis {
        Some(p) => p.clone(),
        None => out.join(BASIS_FILE),
    };
    require(&basis_path, "orthonormal basis")?;
    let (basis, basis_meta) = basis_io::load_basis(&basis_path)?;
    if cfg.cross_basis.is_some() {
        println!(
            "solve: cross-basis run, consuming basis from {} (source {})",
            basis_path.display(),
            basis.source()
        );
    }
    let system = galerkin::assemble(&basis, cfg.pde, cfg.nu)?;

    // In-distribution draw at the basis nodes and the reference grid jointly.
    let ref_grid = reference_grid(cfg);
    let mut joint = basis.grid().nodes().to_vec();
    joint.extend_from_slice(&ref_grid);
    let sampler = GrfSampler::new(cfg.length_scale, joint, cfg.seed)?.stream(10);
    let draw = sampler.sample(1)?;
    let m = basis.grid().len();
    let grf_nodes: Vec<f64> = (0..m).map(|i| draw[(0, i)]).collect();
    let grf_ref: Vec<f64> = (m..m + ref_grid.len()).map(|i| draw[(0, i)]).collect();

    let sin_nodes: Vec<f64> = basis.grid().nodes().iter().map(|&x| x.sin()).collect();
    let sin_ref: Vec<f64> = ref_grid.iter().map(|&x| x.sin()).collect();

    let cases = [
        solve_one(cfg, out, &basis, &system, "grf", &grf_nodes, &grf_ref, &meta)?,
        solve_one(cfg, out, &basis, &system, "sin", &sin_nodes, &sin_ref, &meta)?,
    ];

    let mut w = BufWriter::new(File::create(out.join("summary.txt"))?);
    writeln!(w, "{}", meta.csv_header())?;
    for case in &cases {
        let line = format!(
            "pde={} r={} b={} threshold={:e} ic={} ebar={:.6e} blowup={} basis={}",
            cfg.pde.name(),
            basis.rank(),
            system.n_constraints(),
            cfg.threshold,
            case.label,
            case.ebar,
            case.blowup_time
                .map(|t| format!("{t:.4}"))
                .unwrap_or_else(|| "none".into()),
            basis_meta.config_hash,
        );
        writeln!(w, "{line}")?;
        println!("solve: {line}");
    }
    Ok(())
}

/// Approximation study: coefficient decay, per-degree Legendre errors, and
/// the two-term bound decomposition for the three stock targets.
pub fn cmd_analyze(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_outdir(out)?;
    let meta = meta_of(cfg);
    let basis_path = out.join(BASIS_FILE);
    require(&basis_path, "orthonormal basis")?;
    let (basis, _) = basis_io::load_basis(&basis_path)?;
    let degree = basis
        .legendre_degree()
        .ok_or_else(|| Error::invalid("basis file has no Legendre expansion"))?;

    let profile = approximation::legendre_error_profile(&basis, degree)?;
    let mut w = BufWriter::new(File::create(out.join("profile.csv"))?);
    writeln!(w, "{}", meta.csv_header())?;
    writeln!(w, "degree,error")?;
    for (j, e) in profile.iter().enumerate() {
        writeln!(w, "{},{}", j, io::fmt_f64(*e))?;
    }
    drop(w);

    let r_leg = degree.min(60);
    for name in NAMED_TARGETS {
        let f = approximation::named_target(name)?;
        let f_nodes: Vec<f64> = basis.grid().nodes().iter().map(|&x| f(x)).collect();
        let projection = approximation::project(&f_nodes, &basis)?;
        let mut w = BufWriter::new(File::create(out.join(format!("coeff_decay_{name}.csv")))?);
        writeln!(w, "{}", meta.csv_header())?;
        writeln!(w, "index,coefficient_magnitude")?;
        for (k, a) in projection.coefficients.iter().enumerate() {
            writeln!(w, "{},{}", k, io::fmt_f64(a.abs()))?;
        }
        drop(w);

        let report = approximation::ac3_bound(f, &basis, r_leg)?;
        let mut w = BufWriter::new(File::create(out.join(format!("bound_{name}.csv")))?);
        writeln!(w, "{}", meta.csv_header())?;
        writeln!(w, "j,tail,term,cumulative_bound")?;
        let mut damped_running = 0.0;
        for j in 0..=report.r_leg {
            damped_running += report.damped_terms[j];
            writeln!(
                w,
                "{},{},{},{}",
                j,
                io::fmt_f64(report.tails[j]),
                io::fmt_f64(report.damped_terms[j]),
                io::fmt_f64(report.tails[j] + damped_running)
            )?;
        }
        drop(w);
        println!(
            "analyze: {name}: ‖f−Pf‖ = {:.6e} ≤ bound {:.6e} (tail {:.3e} + damped {:.3e})",
            report.projection_error, report.bound, report.tail, report.damped_sum
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Preset;
    use crate::reference::PdeKind;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset_defaults(PdeKind::Advection, Preset::Desk);
        cfg.train_ics = 3;
        cfg.test_ics = 2;
        cfg.solution_locations = 5;
        cfg.sensors = 16;
        cfg.width = 4;
        cfg.epochs = 2;
        cfg.batch_size = 5;
        cfg.m_solve = 32;
        cfg.legendre_degree = 31;
        cfg.threshold = 1e-10;
        cfg.dt = 1e-2;
        cfg.t_final = 0.2;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn pipeline_stages_chain_and_rerun_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let cfg = tiny_config();

        cmd_generate(&cfg, out).unwrap();
        let first = std::fs::read(out.join(DATASET_TRAIN)).unwrap();
        cmd_generate(&cfg, out).unwrap();
        let second = std::fs::read(out.join(DATASET_TRAIN)).unwrap();
        assert_eq!(first, second, "regenerated dataset must be bitwise equal");

        cmd_train(&cfg, out).unwrap();
        let loss = std::fs::read_to_string(out.join("loss.csv")).unwrap();
        assert_eq!(loss.lines().count(), cfg.epochs + 1);

        cmd_extract(&cfg, out).unwrap();
        let b1 = std::fs::read(out.join(BASIS_FILE)).unwrap();
        cmd_extract(&cfg, out).unwrap();
        let b2 = std::fs::read(out.join(BASIS_FILE)).unwrap();
        assert_eq!(b1, b2, "re-extracted basis must be bitwise equal");

        cmd_solve(&cfg, out).unwrap();
        let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
        assert!(summary.contains("ic=grf"));
        assert!(summary.contains("ic=sin"));
        assert!(out.join("error_grf.csv").exists());
        assert!(out.join("error_sin.csv").exists());

        cmd_analyze(&cfg, out).unwrap();
        for name in NAMED_TARGETS {
            assert!(out.join(format!("coeff_decay_{name}.csv")).exists());
            let bound = std::fs::read_to_string(out.join(format!("bound_{name}.csv"))).unwrap();
            let mut lines = bound.lines();
            assert!(lines.next().unwrap().starts_with("# config_hash="));
            assert_eq!(lines.next().unwrap(), "j,tail,term,cumulative_bound");
        }
        let profile = std::fs::read_to_string(out.join("profile.csv")).unwrap();
        // header + comment + (L+1) rows
        assert_eq!(profile.lines().count(), 2 + cfg.legendre_degree + 1);
    }

    #[test]
    fn missing_prerequisites_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        assert!(matches!(
            cmd_train(&cfg, dir.path()),
            Err(Error::MissingPrerequisite(_))
        ));
        assert!(matches!(
            cmd_extract(&cfg, dir.path()),
            Err(Error::MissingPrerequisite(_))
        ));
        assert!(matches!(
            cmd_solve(&cfg, dir.path()),
            Err(Error::MissingPrerequisite(_))
        ));
        assert!(matches!(
            cmd_analyze(&cfg, dir.path()),
            Err(Error::MissingPrerequisite(_))
        ));
    }
}
