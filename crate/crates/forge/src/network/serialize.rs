//! On-disk formats for models and training datasets.

use crate::error::Result;
use crate::io::{self, RunMeta};
use crate::network::mlp::{Activation, Layer, Mlp};
use crate::network::{DeepOnet, QueryPair, TrainingSet};
use nalgebra::{DMatrix, RowDVector};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MODEL_MAGIC: &[u8; 8] = b"FORGEDON";
const MODEL_VERSION: u32 = 1;
const DATASET_MAGIC: &[u8; 8] = b"FORGEDAT";
const DATASET_VERSION: u32 = 1;

fn write_mlp(w: &mut impl Write, mlp: &Mlp) -> Result<()> {
    io::write_u32(w, mlp.layers.len() as u32)?;
    for layer in &mlp.layers {
        io::write_u64(w, layer.weights.nrows() as u64)?;
        io::write_u64(w, layer.weights.ncols() as u64)?;
        w.write_all(&[layer.activation.tag()])?;
        // Row-major weight block, then the bias.
        for i in 0..layer.weights.nrows() {
            for j in 0..layer.weights.ncols() {
                io::write_f64(w, layer.weights[(i, j)])?;
            }
        }
        for &b in layer.bias.iter() {
            io::write_f64(w, b)?;
        }
    }
    Ok(())
}

fn read_mlp(r: &mut impl Read, path: &Path) -> Result<Mlp> {
    let n_layers = io::read_u32(r, path)? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(io::malformed(path, format!("bad layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut prev_out: Option<usize> = None;
    for _ in 0..n_layers {
        let rows = io::read_count(r, path, 1 << 20, "weight row")?;
        let cols = io::read_count(r, path, 1 << 20, "weight column")?;
        if rows == 0 || cols == 0 {
            return Err(io::malformed(path, "zero-sized layer"));
        }
        if let Some(prev) = prev_out {
            if prev != rows {
                return Err(io::malformed(
                    path,
                    format!("layer input {rows} does not chain from previous output {prev}"),
                ));
            }
        }
        prev_out = Some(cols);
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)
            .map_err(|_| io::malformed(path, "truncated activation tag"))?;
        let activation = Activation::from_tag(tag[0])
            .ok_or_else(|| io::malformed(path, format!("unknown activation tag {}", tag[0])))?;
        let flat = io::read_f64_vec(r, rows * cols, path)?;
        let weights = DMatrix::from_row_slice(rows, cols, &flat);
        let bias_flat = io::read_f64_vec(r, cols, path)?;
        let bias = RowDVector::from_row_slice(&bias_flat);
        layers.push(Layer {
            weights,
            bias,
            activation,
        });
    }
    Ok(Mlp { layers })
}

/// Write a model: magic, version, provenance, width, branch, trunk.
pub fn save_model(model: &DeepOnet, meta: &RunMeta, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    io::write_magic(&mut w, MODEL_MAGIC, MODEL_VERSION)?;
    meta.write(&mut w)?;
    io::write_u32(&mut w, model.width() as u32)?;
    write_mlp(&mut w, &model.branch)?;
    write_mlp(&mut w, &model.trunk)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(DeepOnet, RunMeta)> {
    let f = std::fs::File::open(path)?;
    let mut r = BufReader::new(f);
    io::check_magic(&mut r, MODEL_MAGIC, MODEL_VERSION, path)?;
    let meta = RunMeta::read(&mut r, path)?;
    let width = io::read_u32(&mut r, path)? as usize;
    let branch = read_mlp(&mut r, path)?;
    let trunk = read_mlp(&mut r, path)?;
    io::expect_eof(&mut r, path)?;
    let model = DeepOnet::from_parts(branch, trunk)
        .map_err(|e| io::malformed(path, format!("inconsistent model: {e}")))?;
    if model.width() != width {
        return Err(io::malformed(path, "stored width disagrees with layers"));
    }
    Ok((model, meta))
}

/// Write a training set: sensors, branch inputs, pairs.
pub fn save_dataset(data: &TrainingSet, meta: &RunMeta, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    io::write_magic(&mut w, DATASET_MAGIC, DATASET_VERSION)?;
    meta.write(&mut w)?;
    io::write_u64(&mut w, data.sensors.len() as u64)?;
    io::write_f64_slice(&mut w, &data.sensors)?;
    io::write_u64(&mut w, data.branch_inputs.nrows() as u64)?;
    for i in 0..data.branch_inputs.nrows() {
        for j in 0..data.branch_inputs.ncols() {
            io::write_f64(&mut w, data.branch_inputs[(i, j)])?;
        }
    }
    io::write_u64(&mut w, data.pairs.len() as u64)?;
    for p in &data.pairs {
        io::write_u64(&mut w, p.ic as u64)?;
        io::write_f64(&mut w, p.t)?;
        io::write_f64(&mut w, p.x)?;
        io::write_f64(&mut w, p.target)?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<(TrainingSet, RunMeta)> {
    let f = std::fs::File::open(path)?;
    let mut r = BufReader::new(f);
    io::check_magic(&mut r, DATASET_MAGIC, DATASET_VERSION, path)?;
    let meta = RunMeta::read(&mut r, path)?;
    let n_sensors = io::read_count(&mut r, path, 1 << 20, "sensor")?;
    let sensors = io::read_f64_vec(&mut r, n_sensors, path)?;
    let n_ics = io::read_count(&mut r, path, 1 << 24, "initial condition")?;
    let flat = io::read_f64_vec(&mut r, n_ics * n_sensors, path)?;
    let branch_inputs = DMatrix::from_row_slice(n_ics, n_sensors, &flat);
    let n_pairs = io::read_count(&mut r, path, 1 << 32, "pair")?;
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let ic = io::read_u64(&mut r, path)? as usize;
        let t = io::read_f64(&mut r, path)?;
        let x = io::read_f64(&mut r, path)?;
        let target = io::read_f64(&mut r, path)?;
        pairs.push(QueryPair { ic, t, x, target });
    }
    io::expect_eof(&mut r, path)?;
    let data = TrainingSet {
        sensors,
        branch_inputs,
        pairs,
    };
    data.validate()
        .map_err(|e| io::malformed(path, format!("inconsistent dataset: {e}")))?;
    Ok((data, meta))
}
