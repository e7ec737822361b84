//! Central-difference check of [`loss_and_gradients`].
//!
//! The numerical side evaluates the loss through the forward pass only
//! (`encode`, then the surrogate and decoupling terms), so it shares no code
//! with the reverse pass.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decoupling::RelationEmbeddingMatrix;
use crate::encoder::{
    encode, init_params, loss_and_gradients, surrogate_loss, EncoderConfig, EncoderParameters,
    RelationEmbeddingTables,
};
use crate::error::Result;
use crate::graph::InteractionGraph;
use crate::synth::random_graph;

/// Denominator floor of [`relative_error`]; below it the error is absolute.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub model_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub num_nodes: usize,
    pub ffn_dim: usize,
    pub lambda_dc: f64,
    pub coords_per_tensor: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            model_dim: 16,
            num_heads: 2,
            num_layers: 2,
            num_nodes: 12,
            ffn_dim: 32,
            lambda_dc: 0.01,
            coords_per_tensor: 20,
            step: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coords: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensors: Vec<TensorCheck>,
}

/// A random point for the check: graph, input embeddings, and parameters
/// with layer-norm gains and all biases moved off their initial values so no
/// gradient vanishes by symmetry.
pub struct CheckPoint {
    pub config: EncoderConfig,
    pub graph: InteractionGraph,
    pub x: Array2<f64>,
    pub params: EncoderParameters,
    pub tables: RelationEmbeddingTables,
}

pub fn random_check_point(cfg: &GradCheckConfig) -> Result<CheckPoint> {
    let config = EncoderConfig {
        num_layers: cfg.num_layers,
        num_heads: cfg.num_heads,
        model_dim: cfg.model_dim,
        ffn_dim: cfg.ffn_dim,
        dropout_rate: 0.0,
        seed: cfg.seed,
    };
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let graph = random_graph(cfg.num_nodes.max(1), &mut rng);
    let x = Array2::from_shape_simple_fn((graph.num_nodes(), cfg.model_dim), || {
        rng.random_range(-1.0..=1.0)
    });
    let (mut params, tables) = init_params(&config);
    let mut jitter = |v: &mut Array1<f64>, centre: f64, width: f64| {
        v.mapv_inplace(|_| centre + rng.random_range(-width..=width));
    };
    for l in &mut params.layers {
        jitter(&mut l.ln1_gain, 1.0, 0.5);
        jitter(&mut l.ln2_gain, 1.0, 0.5);
        jitter(&mut l.ln1_bias, 0.0, 0.5);
        jitter(&mut l.ln2_bias, 0.0, 0.5);
        jitter(&mut l.ffn_b1, 0.0, 0.1);
        jitter(&mut l.ffn_b2, 0.0, 0.1);
    }
    Ok(CheckPoint {
        config,
        graph,
        x,
        params,
        tables,
    })
}

fn forward_loss(
    p: &CheckPoint,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    x: &Array2<f64>,
    lambda_dc: f64,
) -> Result<f64> {
    let z = encode(&p.graph, x, params, tables, &p.config)?;
    let dc = RelationEmbeddingMatrix::from_tables(tables)?.dc_loss()?;
    Ok(surrogate_loss(&z) + lambda_dc * dc)
}

/// Compares analytic and central-difference gradients on up to
/// `coords_per_tensor` random coordinates of every parameter tensor, both
/// relation tables and the input embeddings. `corrupt` scales the analytic
/// gradient by 1.01 as a negative control.
pub fn run_grad_check(cfg: &GradCheckConfig, corrupt: bool) -> Result<GradCheckReport> {
    let point = random_check_point(cfg)?;
    let (_, grads) = loss_and_gradients(
        &point.graph,
        &point.x,
        &point.params,
        &point.tables,
        &point.config,
        cfg.lambda_dc,
    )?;
    let scale = if corrupt { 1.01 } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let h = cfg.step;

    let mut names: Vec<(String, Vec<f64>)> = grads
        .params
        .tensors()
        .into_iter()
        .chain(grads.tables.tensors())
        .map(|(n, v)| (n, v.iter().copied().collect()))
        .collect();
    names.push(("input".into(), grads.input.iter().copied().collect()));

    let mut tensors = Vec::with_capacity(names.len());
    for (t_idx, (name, analytic)) in names.iter().enumerate() {
        let len = analytic.len();
        let picks = sample(&mut rng, len, cfg.coords_per_tensor.min(len));
        let mut worst: f64 = 0.0;
        for c in picks.iter() {
            let eval = |delta: f64| -> Result<f64> {
                let mut params = point.params.clone();
                let mut tables = point.tables.clone();
                let mut x = point.x.clone();
                let n_params = params.tensors().len();
                if t_idx < n_params {
                    let mut views = params.tensors_mut();
                    *views[t_idx].1.iter_mut().nth(c).unwrap() += delta;
                } else if t_idx < n_params + 2 {
                    let mut views = tables.tensors_mut();
                    *views[t_idx - n_params].1.iter_mut().nth(c).unwrap() += delta;
                } else {
                    *x.iter_mut().nth(c).unwrap() += delta;
                }
                forward_loss(&point, &params, &tables, &x, cfg.lambda_dc)
            };
            let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
            worst = worst.max(relative_error(scale * analytic[c], numeric));
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            coords: picks.len(),
            max_rel_error: worst,
        });
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        tensors,
    })
}
