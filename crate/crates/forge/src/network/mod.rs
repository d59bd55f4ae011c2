//! A minimal fully-connected network engine — forward, backprop, Adam —
//! sufficient to define, train, serialize, and evaluate DeepONets.
//!
//! A DeepONet pairs a branch net (acting on an initial condition sampled at
//! fixed sensors) with a trunk net (acting on a query point (t, x)); the
//! prediction is the inner product of their width-w outputs. Branch layers
//! end in an identity output layer; trunk layers are all tanh.

pub mod mlp;
pub mod serialize;

pub use mlp::{glorot_uniform, Activation, Mlp, MlpGradients};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Branch + trunk pair combined by an inner product of width `width`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnet {
    pub branch: Mlp,
    pub trunk: Mlp,
}

impl DeepOnet {
    /// Standard architecture: `branch_depth` weight layers ending in an
    /// identity output, `trunk_depth` tanh layers, constant width.
    pub fn new(
        n_sensors: usize,
        width: usize,
        branch_depth: usize,
        trunk_depth: usize,
        seed: u64,
    ) -> Result<Self> {
        if branch_depth < 1 || trunk_depth < 1 {
            return Err(Error::invalid("branch and trunk need at least one layer"));
        }
        let mut branch_dims = vec![n_sensors];
        branch_dims.extend(std::iter::repeat(width).take(branch_depth));
        let mut branch_acts = vec![Activation::Tanh; branch_depth - 1];
        branch_acts.push(Activation::Identity);

        let mut trunk_dims = vec![2];
        trunk_dims.extend(std::iter::repeat(width).take(trunk_depth));
        let trunk_acts = vec![Activation::Tanh; trunk_depth];

        Ok(Self {
            branch: Mlp::new(&branch_dims, &branch_acts, seed)?,
            trunk: Mlp::new(&trunk_dims, &trunk_acts, seed.wrapping_add(0x7261_6e6b))?,
        })
    }

    pub fn from_parts(branch: Mlp, trunk: Mlp) -> Result<Self> {
        if branch.out_dim() != trunk.out_dim() {
            return Err(Error::dims(format!(
                "branch width {} must equal trunk width {}",
                branch.out_dim(),
                trunk.out_dim()
            )));
        }
        if trunk.in_dim() != 2 {
            return Err(Error::dims("trunk input must be (t, x)"));
        }
        Ok(Self { branch, trunk })
    }

    pub fn width(&self) -> usize {
        self.branch.out_dim()
    }

    pub fn n_sensors(&self) -> usize {
        self.branch.in_dim()
    }

    /// Trunk outputs γ_k at each query, one row per query, one column per k.
    pub fn trunk_outputs(&self, queries: &[(f64, f64)]) -> Result<DMatrix<f64>> {
        let input = DMatrix::from_fn(queries.len(), 2, |i, j| {
            if j == 0 {
                queries[i].0
            } else {
                queries[i].1
            }
        });
        self.trunk.forward(&input)
    }

    /// Σ_k b_k[u₀] γ_k(t, x) for each query.
    pub fn forward(&self, u0_sensors: &[f64], queries: &[(f64, f64)]) -> Result<Vec<f64>> {
        if u0_sensors.len() != self.n_sensors() {
            return Err(Error::dims(format!(
                "expected {} sensor values, got {}",
                self.n_sensors(),
                u0_sensors.len()
            )));
        }
        let b = self
            .branch
            .forward(&DMatrix::from_row_slice(1, u0_sensors.len(), u0_sensors))?;
        let gamma = self.trunk_outputs(queries)?;
        Ok((0..queries.len())
            .map(|i| gamma.row(i).iter().zip(b.row(0).iter()).map(|(g, bk)| g * bk).sum())
            .collect())
    }
}

/// One training pair: an initial-condition index and a target value at a
/// space-time query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPair {
    pub ic: usize,
    pub t: f64,
    pub x: f64,
    pub target: f64,
}

/// Sensor layout, per-IC branch inputs, and (IC, query, target) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub sensors: Vec<f64>,
    /// One row per initial condition: its values at the sensors.
    pub branch_inputs: DMatrix<f64>,
    pub pairs: Vec<QueryPair>,
}

impl TrainingSet {
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("training set has no pairs"));
        }
        if self.branch_inputs.ncols() != self.sensors.len() {
            return Err(Error::dims("branch inputs do not match sensor count"));
        }
        let n_ics = self.branch_inputs.nrows();
        if self.pairs.iter().any(|p| p.ic >= n_ics) {
            return Err(Error::dims("pair references a missing initial condition"));
        }
        Ok(())
    }

    pub fn n_ics(&self) -> usize {
        self.branch_inputs.nrows()
    }
}

/// Optimizer and loop settings. Defaults follow the standard Adam moments.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam state for one MLP.
struct Adam {
    m: MlpGradients,
    v: MlpGradients,
}

impl Adam {
    fn new(mlp: &Mlp) -> Self {
        Self {
            m: MlpGradients::zeros_like(mlp),
            v: MlpGradients::zeros_like(mlp),
        }
    }

    fn step(&mut self, mlp: &mut Mlp, grads: &MlpGradients, cfg: &TrainConfig, t: usize) {
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            };
            for ((p, &g), (m, v)) in layer
                .weights
                .iter_mut()
                .zip(grads.weights[i].iter())
                .zip(self.m.weights[i].iter_mut().zip(self.v.weights[i].iter_mut()))
            {
                update(p, g, m, v);
            }
            for ((p, &g), (m, v)) in layer
                .bias
                .iter_mut()
                .zip(grads.bias[i].iter())
                .zip(self.m.bias[i].iter_mut().zip(self.v.bias[i].iter_mut()))
            {
                update(p, g, m, v);
            }
        }
    }
}

/// Mean-squared-error loss and parameter gradients over one batch.
///
/// Row i of `branch_in` is the sensor vector for pair i; `queries` and
/// `targets` align with it. The loss is the plain mean over pairs.
pub fn loss_and_grads(
    model: &DeepOnet,
    branch_in: &DMatrix<f64>,
    queries: &DMatrix<f64>,
    targets: &[f64],
) -> Result<(f64, MlpGradients, MlpGradients)> {
    let batch = targets.len();
    if branch_in.nrows() != batch || queries.nrows() != batch {
        return Err(Error::dims("batch sizes disagree"));
    }
    let branch_cache = model.branch.forward_cached(branch_in)?;
    let trunk_cache = model.trunk.forward_cached(queries)?;
    let b = branch_cache.output();
    let g = trunk_cache.output();

    let mut loss = 0.0;
    // dL/dpred, one per pair.
    let mut dpred = vec![0.0; batch];
    for i in 0..batch {
        let pred: f64 = b.row(i).iter().zip(g.row(i).iter()).map(|(x, y)| x * y).sum();
        let diff = pred - targets[i];
        loss += diff * diff;
        dpred[i] = 2.0 * diff / batch as f64;
    }
    loss /= batch as f64;

    // The prediction is bilinear: ∂pred/∂b_row = γ_row and vice versa.
    let mut grad_b = g.clone();
    let mut grad_g = b.clone();
    for i in 0..batch {
        for k in 0..model.width() {
            grad_b[(i, k)] *= dpred[i];
            grad_g[(i, k)] *= dpred[i];
        }
    }
    let (branch_grads, _) = model.branch.backward(&branch_cache, &grad_b);
    let (trunk_grads, _) = model.trunk.backward(&trunk_cache, &grad_g);
    Ok((loss, branch_grads, trunk_grads))
}

/// The evaluation metric: mean squared error of the model over a pair set.
pub fn evaluate_mse(model: &DeepOnet, data: &TrainingSet) -> Result<f64> {
    data.validate()?;
    let mut sum = 0.0;
    // Batch by initial condition so the branch runs once per IC.
    let mut by_ic: std::collections::BTreeMap<usize, Vec<&QueryPair>> = Default::default();
    for p in &data.pairs {
        by_ic.entry(p.ic).or_default().push(p);
    }
    for (ic, pairs) in by_ic {
        let sensors: Vec<f64> = data.branch_inputs.row(ic).iter().copied().collect();
        let queries: Vec<(f64, f64)> = pairs.iter().map(|p| (p.t, p.x)).collect();
        let preds = model.forward(&sensors, &queries)?;
        for (p, pred) in pairs.iter().zip(preds) {
            let d = pred - p.target;
            sum += d * d;
        }
    }
    Ok(sum / data.pairs.len() as f64)
}

/// Adam training with seeded minibatch shuffling; returns the per-epoch mean
/// training loss. Deterministic for a fixed seed and config.
pub fn train(model: &mut DeepOnet, data: &TrainingSet, cfg: &TrainConfig) -> Result<Vec<f64>> {
    data.validate()?;
    if cfg.learning_rate < 0.0 || !cfg.learning_rate.is_finite() {
        return Err(Error::invalid("learning rate must be nonnegative"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let n_sensors = data.sensors.len();
    let n_pairs = data.pairs.len();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n_pairs).collect();
    let mut adam_branch = Adam::new(&model.branch);
    let mut adam_trunk = Adam::new(&model.trunk);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            let mut branch_in = DMatrix::zeros(b, n_sensors);
            let mut queries = DMatrix::zeros(b, 2);
            let mut targets = vec![0.0; b];
            for (row, &idx) in chunk.iter().enumerate() {
                let pair = data.pairs[idx];
                branch_in.row_mut(row).copy_from(&data.branch_inputs.row(pair.ic));
                queries[(row, 0)] = pair.t;
                queries[(row, 1)] = pair.x;
                targets[row] = pair.target;
            }
            let (loss, gb, gt) = loss_and_grads(model, &branch_in, &queries, &targets)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            step += 1;
            adam_branch.step(&mut model.branch, &gb, cfg, step);
            adam_trunk.step(&mut model.trunk, &gt, cfg, step);
            epoch_loss += loss * b as f64;
        }
        history.push(epoch_loss / n_pairs as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn toy_data(n_ics: usize, q_per: usize, n_sensors: usize, seed: u64) -> TrainingSet {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let sensors: Vec<f64> = (0..n_sensors)
            .map(|i| std::f64::consts::TAU * i as f64 / n_sensors as f64)
            .collect();
        let mut branch_inputs = DMatrix::zeros(n_ics, n_sensors);
        for i in 0..n_ics {
            let a: f64 = rng.random_range(-1.0..1.0);
            let p: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            for (j, &x) in sensors.iter().enumerate() {
                branch_inputs[(i, j)] = a * (x + p).sin();
            }
        }
        let mut pairs = Vec::new();
        for ic in 0..n_ics {
            for _ in 0..q_per {
                let t: f64 = rng.random_range(0.0..1.0);
                let x: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                // A smooth functional of the inputs keeps the problem
                // learnable at toy scale.
                let target = branch_inputs[(ic, 0)] * (x - t).sin();
                pairs.push(QueryPair { ic, t, x, target });
            }
        }
        TrainingSet {
            sensors,
            branch_inputs,
            pairs,
        }
    }

    #[test]
    fn zero_branch_gives_zero_prediction() {
        let mut model = DeepOnet::new(8, 4, 2, 3, 1).unwrap();
        for layer in &mut model.branch.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let preds = model
            .forward(&[1.0; 8], &[(0.0, 1.0), (0.5, 2.0)])
            .unwrap();
        assert!(preds.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn width_one_model_is_scaled_trunk() {
        let model = DeepOnet::new(4, 1, 2, 2, 3).unwrap();
        let queries = [(0.1, 0.7), (0.9, 4.0)];
        let u0 = [0.5, -0.2, 0.8, 0.1];
        let b = model
            .branch
            .forward(&DMatrix::from_row_slice(1, 4, &u0))
            .unwrap()[(0, 0)];
        let gamma = model.trunk_outputs(&queries).unwrap();
        let preds = model.forward(&u0, &queries).unwrap();
        for (i, &p) in preds.iter().enumerate() {
            assert_abs_diff_eq!(p, b * gamma[(i, 0)], epsilon = 1e-14);
        }
    }

    #[test]
    fn forward_is_linear_in_branch_outputs() {
        let model = DeepOnet::new(6, 5, 2, 3, 7).unwrap();
        let u0 = [0.3, -0.1, 0.8, 0.2, -0.5, 0.9];
        let queries = [(0.2, 1.0), (0.8, 3.0)];
        let base = model.forward(&u0, &queries).unwrap();

        // Scale the final branch layer by α: predictions scale by α.
        let mut scaled = model.clone();
        let alpha = 3.5;
        let last = scaled.branch.layers.len() - 1;
        scaled.branch.layers[last].weights *= alpha;
        scaled.branch.layers[last].bias *= alpha;
        let scaled_preds = scaled.forward(&u0, &queries).unwrap();
        for (b, s) in base.iter().zip(&scaled_preds) {
            assert_relative_eq!(s, &(alpha * b), max_relative = 1e-12);
        }
    }

    #[test]
    fn deeponet_gradients_match_finite_differences() {
        let mut model = DeepOnet::new(5, 4, 2, 3, 11).unwrap();
        let data = toy_data(3, 4, 5, 21);
        let b = data.pairs.len();
        let mut branch_in = DMatrix::zeros(b, 5);
        let mut queries = DMatrix::zeros(b, 2);
        let mut targets = vec![0.0; b];
        for (row, p) in data.pairs.iter().enumerate() {
            branch_in.row_mut(row).copy_from(&data.branch_inputs.row(p.ic));
            queries[(row, 0)] = p.t;
            queries[(row, 1)] = p.x;
            targets[row] = p.target;
        }
        let (_, gb, gt) = loss_and_grads(&model, &branch_in, &queries, &targets).unwrap();

        let flat_of = |g: &MlpGradients| -> Vec<f64> {
            let mut out = Vec::new();
            for (w, bias) in g.weights.iter().zip(&g.bias) {
                for i in 0..w.nrows() {
                    for j in 0..w.ncols() {
                        out.push(w[(i, j)]);
                    }
                }
                out.extend(bias.iter());
            }
            out
        };
        let h = 1e-6;
        // Check every branch parameter, then every trunk parameter.
        for net in 0..2 {
            let grads_flat = if net == 0 { flat_of(&gb) } else { flat_of(&gt) };
            let params = if net == 0 {
                model.branch.params_flat()
            } else {
                model.trunk.params_flat()
            };
            for idx in 0..params.len() {
                let mut plus = params.clone();
                plus[idx] += h;
                let mut minus = params.clone();
                minus[idx] -= h;
                let eval = |model: &mut DeepOnet, p: &[f64]| -> f64 {
                    if net == 0 {
                        model.branch.set_params_flat(p).unwrap();
                    } else {
                        model.trunk.set_params_flat(p).unwrap();
                    }
                    let (l, _, _) =
                        loss_and_grads(model, &branch_in, &queries, &targets).unwrap();
                    l
                };
                let lp = eval(&mut model, &plus);
                let lm = eval(&mut model, &minus);
                let _ = eval(&mut model, &params);
                let fd = (lp - lm) / (2.0 * h);
                assert_relative_eq!(grads_flat[idx], fd, max_relative = 1e-5, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn single_sample_overfits_to_tiny_loss() {
        let mut model = DeepOnet::new(4, 16, 2, 3, 5).unwrap();
        let data = TrainingSet {
            sensors: vec![0.0, 1.0, 2.0, 3.0],
            branch_inputs: DMatrix::from_row_slice(1, 4, &[0.4, -0.3, 0.9, 0.1]),
            pairs: vec![QueryPair {
                ic: 0,
                t: 0.3,
                x: 1.2,
                target: 0.75,
            }],
        };
        let cfg = TrainConfig::new(1e-3, 5000, 1, 77);
        let history = train(&mut model, &data, &cfg).unwrap();
        assert!(
            history.last().unwrap() < &1e-6,
            "final loss {} too large",
            history.last().unwrap()
        );
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_bitwise_unchanged() {
        let mut model = DeepOnet::new(4, 3, 2, 2, 5).unwrap();
        let before_b = model.branch.params_flat();
        let before_t = model.trunk.params_flat();
        let data = toy_data(2, 3, 4, 9);
        let cfg = TrainConfig::new(0.0, 3, 2, 1);
        train(&mut model, &data, &cfg).unwrap();
        assert_eq!(model.branch.params_flat(), before_b);
        assert_eq!(model.trunk.params_flat(), before_t);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = toy_data(4, 5, 6, 13);
        let cfg = TrainConfig::new(1e-3, 20, 4, 99);
        let mut m1 = DeepOnet::new(6, 4, 2, 3, 17).unwrap();
        let h1 = train(&mut m1, &data, &cfg).unwrap();
        let mut m2 = DeepOnet::new(6, 4, 2, 3, 17).unwrap();
        let h2 = train(&mut m2, &data, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn loss_decreases_on_trainable_problem() {
        let data = toy_data(6, 10, 6, 3);
        let mut model = DeepOnet::new(6, 8, 2, 3, 23).unwrap();
        let cfg = TrainConfig::new(3e-3, 200, 10, 7);
        let history = train(&mut model, &data, &cfg).unwrap();
        assert!(history.last().unwrap() < &(0.5 * history[0]));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = DeepOnet::new(4, 3, 2, 2, 5).unwrap();
        assert!(model.forward(&[1.0; 3], &[(0.0, 0.0)]).is_err());
        assert!(DeepOnet::new(4, 0, 2, 2, 5).is_err());
    }
}
