//! Experiment configuration: a flat, typed key-value text file plus a small
//! set of command-line overrides. The resolved configuration is hashed and
//! the hash is embedded in every output artifact, so identical hashes mean
//! bitwise-identical numerics.

use crate::error::{Error, Result};
use crate::reference::PdeKind;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Training scale: the full settings are the expensive reference
/// configuration; the desk preset is sized for laptop runs and CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Full,
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::invalid(format!("unknown preset '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Full => "full",
            Preset::Desk => "desk",
        }
    }
}

/// Everything a pipeline run needs, resolved from preset defaults, the
/// config file, and command-line overrides (in that order).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pde: PdeKind,
    pub nu: f64,
    pub preset: Preset,
    /// GRF kernel length scale.
    pub length_scale: f64,
    pub seed: u64,

    // Data generation.
    pub sensors: usize,
    pub train_ics: usize,
    pub test_ics: usize,
    pub solution_locations: usize,
    /// Temporal training interval [0, t_train].
    pub t_train: f64,
    /// MUSCL mesh resolution for the inviscid problem.
    pub cells: usize,
    /// Reference save cadence override (per-PDE default when absent).
    pub save_every: Option<f64>,

    // Network and training.
    pub width: usize,
    pub branch_depth: usize,
    pub trunk_depth: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,

    // Basis extraction.
    pub freeze_times: Vec<f64>,
    pub threshold: f64,
    /// Hard retained-count override; 0 keeps the threshold rule.
    pub retained: usize,
    pub m_analysis: usize,
    pub m_solve: usize,
    pub legendre_degree: usize,

    // Galerkin evolution.
    pub dt: f64,
    pub t_final: f64,
    pub guard_ratio: f64,
    /// Basis trained on a different PDE, consumed as-is by `solve`.
    pub cross_basis: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Preset defaults for one PDE; file keys override these.
    pub fn preset_defaults(pde: PdeKind, preset: Preset) -> Self {
        let full = matches!(preset, Preset::Full);
        let nonlinear_dt = 1e-4;
        let linear_dt = 1e-3;
        ExperimentConfig {
            pde,
            nu: if pde.has_diffusion() { 0.1 } else { 0.0 },
            preset,
            length_scale: 0.5,
            seed: 0,
            sensors: 128,
            train_ics: if full { 500 } else { 200 },
            test_ics: if full { 1000 } else { 50 },
            solution_locations: 100,
            t_train: if pde.uses_finite_volume() { 3.5 } else { 1.0 },
            cells: if full { 4096 } else { 1024 },
            save_every: None,
            width: if full { 128 } else { 32 },
            branch_depth: 2,
            trunk_depth: 3,
            epochs: if full { 50_000 } else { 2000 },
            learning_rate: if full { 1e-5 } else { 1e-3 },
            batch_size: 100,
            freeze_times: vec![0.0],
            threshold: match pde {
                PdeKind::Advection => 1e-9,
                PdeKind::AdvectionDiffusion | PdeKind::ViscousBurgers => 1e-7,
                PdeKind::InviscidBurgers => 1e-12,
            },
            retained: 0,
            m_analysis: 1024,
            m_solve: 128,
            legendre_degree: 127,
            dt: if pde.is_nonlinear() { nonlinear_dt } else { linear_dt },
            t_final: if pde.uses_finite_volume() { 3.5 } else { 10.0 },
            guard_ratio: 1.025,
            cross_basis: None,
        }
    }

    /// Parse the flat `key = value` format ('#' comments, blank lines ok).
    pub fn from_str(text: &str, path_hint: &str) -> Result<Self> {
        Self::resolve(text, path_hint, None, None)
    }

    /// Parse with command-line overrides: the preset override replaces the
    /// file's preset before defaults are applied; the seed override wins
    /// last.
    pub fn resolve(
        text: &str,
        path_hint: &str,
        preset_override: Option<Preset>,
        seed_override: Option<u64>,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::invalid(format!(
                    "{path_hint}:{}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let pde = PdeKind::parse(
            entries
                .get("pde")
                .ok_or_else(|| Error::invalid(format!("{path_hint}: missing required key 'pde'")))?,
        )?;
        let preset = match (preset_override, entries.get("preset")) {
            (Some(p), _) => p,
            (None, Some(p)) => Preset::parse(p)?,
            (None, None) => Preset::Desk,
        };
        let mut cfg = Self::preset_defaults(pde, preset);

        let parse_f64 = |key: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("{path_hint}: key '{key}': bad float '{v}'")))
        };
        let parse_usize = |key: &str, v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::invalid(format!("{path_hint}: key '{key}': bad integer '{v}'")))
        };

        for (key, value) in &entries {
            match key.as_str() {
                "pde" | "preset" => {}
                "nu" => cfg.nu = parse_f64(key, value)?,
                "length_scale" => cfg.length_scale = parse_f64(key, value)?,
                "seed" => {
                    cfg.seed = value.parse::<u64>().map_err(|_| {
                        Error::invalid(format!("{path_hint}: key 'seed': bad u64 '{value}'"))
                    })?
                }
                "sensors" => cfg.sensors = parse_usize(key, value)?,
                "train_ics" => cfg.train_ics = parse_usize(key, value)?,
                "test_ics" => cfg.test_ics = parse_usize(key, value)?,
                "solution_locations" => cfg.solution_locations = parse_usize(key, value)?,
                "t_train" => cfg.t_train = parse_f64(key, value)?,
                "cells" => cfg.cells = parse_usize(key, value)?,
                "save_every" => cfg.save_every = Some(parse_f64(key, value)?),
                "width" => cfg.width = parse_usize(key, value)?,
                "branch_depth" => cfg.branch_depth = parse_usize(key, value)?,
                "trunk_depth" => cfg.trunk_depth = parse_usize(key, value)?,
                "epochs" => cfg.epochs = parse_usize(key, value)?,
                "learning_rate" => cfg.learning_rate = parse_f64(key, value)?,
                "batch_size" => cfg.batch_size = parse_usize(key, value)?,
                "freeze_times" => {
                    cfg.freeze_times = value
                        .split(',')
                        .map(|v| parse_f64(key, v.trim()))
                        .collect::<Result<Vec<f64>>>()?;
                }
                "threshold" => cfg.threshold = parse_f64(key, value)?,
                "retained" => cfg.retained = parse_usize(key, value)?,
                "m_analysis" => cfg.m_analysis = parse_usize(key, value)?,
                "m_solve" => cfg.m_solve = parse_usize(key, value)?,
                "legendre_degree" => cfg.legendre_degree = parse_usize(key, value)?,
                "dt" => cfg.dt = parse_f64(key, value)?,
                "t_final" => cfg.t_final = parse_f64(key, value)?,
                "guard_ratio" => cfg.guard_ratio = parse_f64(key, value)?,
                "cross_basis" => {
                    if !value.is_empty() {
                        cfg.cross_basis = Some(PathBuf::from(value));
                    }
                }
                other => {
                    return Err(Error::invalid(format!(
                        "{path_hint}: unknown config key '{other}'"
                    )))
                }
            }
        }
        if let Some(seed) = seed_override {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text, &path.display().to_string())
    }

    pub fn from_file_with_overrides(
        path: &Path,
        preset_override: Option<Preset>,
        seed_override: Option<u64>,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::resolve(
            &text,
            &path.display().to_string(),
            preset_override,
            seed_override,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors < 2 || self.sensors % 2 != 0 {
            return Err(Error::invalid("sensors must be even and ≥ 2"));
        }
        if self.m_solve % 2 != 0 {
            return Err(Error::invalid("m_solve must be even"));
        }
        if self.legendre_degree >= self.m_solve && self.legendre_degree >= self.m_analysis {
            return Err(Error::invalid(
                "legendre_degree must be below at least one quadrature size",
            ));
        }
        if self.freeze_times.is_empty() {
            return Err(Error::invalid("freeze_times must not be empty"));
        }
        if !(self.guard_ratio > 1.0) {
            return Err(Error::invalid("guard_ratio must exceed 1"));
        }
        if self.nu < 0.0 {
            return Err(Error::invalid("nu must be nonnegative"));
        }
        Ok(())
    }

    /// Canonical text form: every field, sorted, one per line. This is what
    /// gets hashed.
    pub fn canonical(&self) -> String {
        let mut lines = vec![
            format!("batch_size={}", self.batch_size),
            format!("branch_depth={}", self.branch_depth),
            format!("cells={}", self.cells),
            format!(
                "cross_basis={}",
                self.cross_basis
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            ),
            format!("dt={:e}", self.dt),
            format!(
                "freeze_times={}",
                self.freeze_times
                    .iter()
                    .map(|t| format!("{t:e}"))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            format!("guard_ratio={:e}", self.guard_ratio),
            format!("learning_rate={:e}", self.learning_rate),
            format!("legendre_degree={}", self.legendre_degree),
            format!("length_scale={:e}", self.length_scale),
            format!("m_analysis={}", self.m_analysis),
            format!("m_solve={}", self.m_solve),
            format!("nu={:e}", self.nu),
            format!("pde={}", self.pde.name()),
            format!("preset={}", self.preset.name()),
            format!("retained={}", self.retained),
            format!(
                "save_every={}",
                self.save_every.map(|v| format!("{v:e}")).unwrap_or_default()
            ),
            format!("seed={}", self.seed),
            format!("sensors={}", self.sensors),
            format!("solution_locations={}", self.solution_locations),
            format!("t_final={:e}", self.t_final),
            format!("t_train={:e}", self.t_train),
            format!("test_ics={}", self.test_ics),
            format!("threshold={:e}", self.threshold),
            format!("train_ics={}", self.train_ics),
            format!("trunk_depth={}", self.trunk_depth),
            format!("width={}", self.width),
            format!("epochs={}", self.epochs),
        ];
        lines.sort();
        lines.join("\n")
    }

    /// Short hex hash of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Save cadence for reference solves.
    pub fn reference_save_every(&self) -> f64 {
        self.save_every
            .unwrap_or_else(|| self.pde.default_save_every())
    }
}
