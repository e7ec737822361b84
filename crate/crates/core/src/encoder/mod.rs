//! Relation-aware multi-head self-attention over the interaction graph, with
//! exact reverse-mode gradients of a surrogate loss.
//!
//! Every node attends to every other node. The key and value of the pair
//! (i, j) are shifted by the embedding of the pair's relation label; those
//! embeddings are shared by all heads and layers.

mod checkpoint;
mod config;
mod embed;
mod layer;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::EncoderConfig;
pub use embed::{embed_nodes, item_vector};
pub use layer::LAYER_NORM_EPS;
pub use params::{
    init_params, EncoderParameters, HeadParams, LayerParams, RelationEmbeddingTables,
    RELATION_INIT_RANGE,
};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decoupling::RelationEmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{RelationMatrix, NUM_RELATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout off; the forward pass is a pure function of its inputs.
    Eval,
    /// Dropout on, masks drawn from a generator seeded with `seed`.
    Train { seed: u64 },
}

/// Gradients for every trainable tensor, plus the input embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: EncoderParameters,
    pub tables: RelationEmbeddingTables,
    pub input: Array2<f64>,
}

fn check_shapes(
    x: &Array2<f64>,
    relations: &RelationMatrix,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
) -> Result<()> {
    if x.nrows() != relations.size() {
        return Err(Error::Shape(format!(
            "{} embedding rows for a {}-node graph",
            x.nrows(),
            relations.size()
        )));
    }
    if tables.num_relations() != NUM_RELATIONS || tables.values.dim() != tables.keys.dim() {
        return Err(Error::Shape(format!(
            "relation tables are {:?}/{:?}, expected {NUM_RELATIONS} rows each",
            tables.keys.dim(),
            tables.values.dim()
        )));
    }
    let d = x.ncols();
    let dh = tables.head_dim();
    for (li, layer) in params.layers.iter().enumerate() {
        if layer.heads.is_empty() || layer.heads.len() * dh != d {
            return Err(Error::Shape(format!(
                "layer {li}: {} heads of width {dh} do not tile model width {d}",
                layer.heads.len()
            )));
        }
        for (h, head) in layer.heads.iter().enumerate() {
            for w in [&head.w_q, &head.w_k, &head.w_v] {
                if w.dim() != (d, dh) {
                    return Err(Error::Shape(format!(
                        "layer {li} head {h}: projection is {:?}, expected ({d}, {dh})",
                        w.dim()
                    )));
                }
            }
        }
        let f = layer.ffn_w1.ncols();
        let ok = layer.w_o.dim() == (d, d)
            && layer.ffn_w1.nrows() == d
            && layer.ffn_b1.len() == f
            && layer.ffn_w2.dim() == (f, d)
            && layer.ffn_b2.len() == d
            && [&layer.ln1_gain, &layer.ln1_bias, &layer.ln2_gain, &layer.ln2_bias]
                .iter()
                .all(|v| v.len() == d);
        if !ok {
            return Err(Error::Shape(format!(
                "layer {li}: output, feed-forward or norm parameters inconsistent with width {d}"
            )));
        }
    }
    Ok(())
}

fn check_config(config: &EncoderConfig, params: &EncoderParameters) -> Result<()> {
    config.validate()?;
    if params.num_layers() != config.num_layers {
        return Err(Error::Shape(format!(
            "config has {} layers, parameters have {}",
            config.num_layers,
            params.num_layers()
        )));
    }
    Ok(())
}

fn ensure_finite(m: &Array2<f64>, what: impl FnOnce() -> String) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what()))
    }
}

/// Score matrix of one head of one layer, before the softmax.
pub fn attention_scores(
    x: &Array2<f64>,
    relations: impl AsRef<RelationMatrix>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    layer: usize,
    head: usize,
) -> Result<Array2<f64>> {
    let relations = relations.as_ref();
    check_shapes(x, relations, params, tables)?;
    let lp = params.layers.get(layer).ok_or(Error::IndexOutOfRange {
        index: layer,
        len: params.num_layers(),
    })?;
    let hp = lp.heads.get(head).ok_or(Error::IndexOutOfRange {
        index: head,
        len: lp.heads.len(),
    })?;
    Ok(layer::attention_scores(x, relations, hp, tables))
}

/// One full layer in eval mode.
pub fn rgat_layer(
    x: &Array2<f64>,
    relations: impl AsRef<RelationMatrix>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    layer: usize,
) -> Result<Array2<f64>> {
    let relations = relations.as_ref();
    check_shapes(x, relations, params, tables)?;
    let lp = params.layers.get(layer).ok_or(Error::IndexOutOfRange {
        index: layer,
        len: params.num_layers(),
    })?;
    let (out, _) = layer::layer_forward(x, relations, lp, tables, None);
    ensure_finite(&out, || format!("layer {layer} output"))?;
    Ok(out)
}

/// The full stack in eval mode.
pub fn encode(
    relations: impl AsRef<RelationMatrix>,
    x: &Array2<f64>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    config: &EncoderConfig,
) -> Result<Array2<f64>> {
    encode_with_mode(relations, x, params, tables, config, Mode::Eval)
}

pub fn encode_with_mode(
    relations: impl AsRef<RelationMatrix>,
    x: &Array2<f64>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    config: &EncoderConfig,
    mode: Mode,
) -> Result<Array2<f64>> {
    forward(relations.as_ref(), x, params, tables, config, mode).map(|(z, _)| z)
}

fn forward(
    relations: &RelationMatrix,
    x: &Array2<f64>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    config: &EncoderConfig,
    mode: Mode,
) -> Result<(Array2<f64>, Vec<layer::LayerCache>)> {
    check_config(config, params)?;
    check_shapes(x, relations, params, tables)?;
    ensure_finite(x, || "input embeddings".into())?;
    let mut rng = match mode {
        Mode::Eval => None,
        Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut h = x.clone();
    let mut caches = Vec::with_capacity(params.num_layers());
    for (li, lp) in params.layers.iter().enumerate() {
        let dropout = rng.as_mut().map(|r| (r, config.dropout_rate));
        let (out, cache) = layer::layer_forward(&h, relations, lp, tables, dropout);
        ensure_finite(&out, || format!("layer {li} output"))?;
        caches.push(cache);
        h = out;
    }
    Ok((h, caches))
}

/// Mean over nodes of the squared norm of each output row.
pub fn surrogate_loss(z: &Array2<f64>) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>() / z.nrows().max(1) as f64
}

/// `surrogate_loss(encode(..)) + lambda_dc * dc_loss(r)` where `r` stacks the
/// key and value embedding of each label into one column. Eval mode.
pub fn loss_and_gradients(
    relations: impl AsRef<RelationMatrix>,
    x: &Array2<f64>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    config: &EncoderConfig,
    lambda_dc: f64,
) -> Result<(f64, Gradients)> {
    loss_and_gradients_with_mode(relations, x, params, tables, config, lambda_dc, Mode::Eval)
}

pub fn loss_and_gradients_with_mode(
    relations: impl AsRef<RelationMatrix>,
    x: &Array2<f64>,
    params: &EncoderParameters,
    tables: &RelationEmbeddingTables,
    config: &EncoderConfig,
    lambda_dc: f64,
    mode: Mode,
) -> Result<(f64, Gradients)> {
    if !(lambda_dc >= 0.0 && lambda_dc.is_finite()) {
        return Err(Error::Validation(format!("lambda_dc must be >= 0, got {lambda_dc}")));
    }
    let relations = relations.as_ref();
    let (z, caches) = forward(relations, x, params, tables, config, mode)?;

    let r = RelationEmbeddingMatrix::from_tables(tables)?;
    let dc = r.dc_loss()?;
    let loss = surrogate_loss(&z) + lambda_dc * dc;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }

    let mut grads = params.zeros_like();
    let mut table_grads = RelationEmbeddingTables::zeros(tables.num_relations(), tables.head_dim());
    let mut d_h = z.mapv(|v| 2.0 * v / z.nrows().max(1) as f64);
    for (li, cache) in caches.iter().enumerate().rev() {
        d_h = layer::layer_backward(
            &d_h,
            cache,
            relations,
            &params.layers[li],
            tables,
            &mut grads.layers[li],
            &mut table_grads,
        );
    }

    if lambda_dc != 0.0 {
        let (dk, dv) = r.split_gradient(&r.dc_grad()?);
        table_grads.keys.scaled_add(lambda_dc, &dk);
        table_grads.values.scaled_add(lambda_dc, &dv);
    }

    Ok((
        loss,
        Gradients {
            params: grads,
            tables: table_grads,
            input: d_h,
        },
    ))
}
