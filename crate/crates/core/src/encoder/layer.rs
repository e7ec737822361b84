//! Forward and reverse passes of one relation-aware attention layer.
//!
//! Layer layout (post-norm):
//! `h1 = LN1(x + drop(concat_h(attn_h(x)) W_o))`,
//! `out = LN2(h1 + drop(relu(h1 W1 + b1) W2 + b2))`.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{HeadParams, LayerParams, RelationEmbeddingTables};
use crate::graph::RelationMatrix;

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub(crate) fn layer_norm(
    x: &Array2<f64>,
    gain: &Array1<f64>,
    bias: &Array1<f64>,
) -> (Array2<f64>, NormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        let inv = *s;
        row.mapv_inplace(|v| v * inv);
    }
    let y = &xhat * gain + bias;
    (y, NormCache { xhat, inv_std })
}

/// Returns (dx, dgain, dbias).
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    gain: &Array1<f64>,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let dgain = (dy * &cache.xhat).sum_axis(Axis(0));
    let dbias = dy.sum_axis(Axis(0));
    let dxhat = dy * gain;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let g = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        let s = cache.inv_std[i];
        Zip::from(dx.row_mut(i))
            .and(&g)
            .and(&xh)
            .for_each(|o, &gv, &xv| *o = s * (gv - mean_g - xv * mean_gx));
    }
    (dx, dgain, dbias)
}

fn softmax_rows(e: &Array2<f64>) -> Array2<f64> {
    let mut a = e.clone();
    for mut row in a.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    a
}

pub(crate) struct HeadCache {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    alpha: Array2<f64>,
    /// (n x k): attention mass each node puts on each relation label.
    label_mass: Array2<f64>,
}

/// Raw scores `e_ij = q_i . (k_j + r^K[l_ij]) / sqrt(d_h)`.
fn head_scores(
    q: &Array2<f64>,
    k: &Array2<f64>,
    relations: &RelationMatrix,
    tables: &RelationEmbeddingTables,
) -> Array2<f64> {
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let qk = q.dot(&k.t());
    let qr = q.dot(&tables.keys.t());
    let n = q.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        scale * (qk[[i, j]] + qr[[i, relations.get(i, j).ordinal()]])
    })
}

pub(crate) fn attention_scores(
    x: &Array2<f64>,
    relations: &RelationMatrix,
    head: &HeadParams,
    tables: &RelationEmbeddingTables,
) -> Array2<f64> {
    head_scores(&x.dot(&head.w_q), &x.dot(&head.w_k), relations, tables)
}

fn head_forward(
    x: &Array2<f64>,
    relations: &RelationMatrix,
    head: &HeadParams,
    tables: &RelationEmbeddingTables,
) -> (Array2<f64>, HeadCache) {
    let q = x.dot(&head.w_q);
    let k = x.dot(&head.w_k);
    let v = x.dot(&head.w_v);
    let alpha = softmax_rows(&head_scores(&q, &k, relations, tables));
    let n = x.nrows();
    let mut label_mass = Array2::zeros((n, tables.num_relations()));
    for (i, j, l) in relations.iter() {
        label_mass[[i, l.ordinal()]] += alpha[[i, j]];
    }
    let z = alpha.dot(&v) + label_mass.dot(&tables.values);
    (
        z,
        HeadCache {
            q,
            k,
            v,
            alpha,
            label_mass,
        },
    )
}

pub(crate) struct LayerCache {
    x: Array2<f64>,
    heads: Vec<HeadCache>,
    concat: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    norm1: NormCache,
    h1: Array2<f64>,
    pre_relu: Array2<f64>,
    ffn_mask: Option<Array2<f64>>,
    norm2: NormCache,
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), rate: f64) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

/// One layer forward. `dropout` carries the RNG and rate in training mode.
pub(crate) fn layer_forward(
    x: &Array2<f64>,
    relations: &RelationMatrix,
    params: &LayerParams,
    tables: &RelationEmbeddingTables,
    dropout: Option<(&mut ChaCha8Rng, f64)>,
) -> (Array2<f64>, LayerCache) {
    let n = x.nrows();
    let d = x.ncols();
    let dh = tables.head_dim();
    let mut concat = Array2::zeros((n, d));
    let mut heads = Vec::with_capacity(params.heads.len());
    for (h, head) in params.heads.iter().enumerate() {
        let (z, cache) = head_forward(x, relations, head, tables);
        concat.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&z);
        heads.push(cache);
    }

    let (attn_mask, ffn_mask) = match dropout {
        Some((rng, rate)) if rate > 0.0 => (
            Some(dropout_mask(rng, (n, d), rate)),
            Some(dropout_mask(rng, (n, d), rate)),
        ),
        _ => (None, None),
    };

    let mut attn = concat.dot(&params.w_o);
    if let Some(m) = &attn_mask {
        attn *= m;
    }
    let (h1, norm1) = layer_norm(&(x + &attn), &params.ln1_gain, &params.ln1_bias);
    let pre_relu = h1.dot(&params.ffn_w1) + &params.ffn_b1;
    let mut ffn = pre_relu.mapv(|v| v.max(0.0)).dot(&params.ffn_w2) + &params.ffn_b2;
    if let Some(m) = &ffn_mask {
        ffn *= m;
    }
    let (out, norm2) = layer_norm(&(&h1 + &ffn), &params.ln2_gain, &params.ln2_bias);
    (
        out,
        LayerCache {
            x: x.clone(),
            heads,
            concat,
            attn_mask,
            norm1,
            h1,
            pre_relu,
            ffn_mask,
            norm2,
        },
    )
}

/// Reverse pass of one layer. Accumulates parameter gradients into `grads`
/// and relation-table gradients into `table_grads`; returns d(loss)/d(x).
pub(crate) fn layer_backward(
    d_out: &Array2<f64>,
    cache: &LayerCache,
    relations: &RelationMatrix,
    params: &LayerParams,
    tables: &RelationEmbeddingTables,
    grads: &mut LayerParams,
    table_grads: &mut RelationEmbeddingTables,
) -> Array2<f64> {
    let (d_s2, dg2, db2) = layer_norm_backward(d_out, &cache.norm2, &params.ln2_gain);
    grads.ln2_gain += &dg2;
    grads.ln2_bias += &db2;

    let mut d_h1 = d_s2.clone();
    let mut d_ffn = d_s2;
    if let Some(m) = &cache.ffn_mask {
        d_ffn *= m;
    }
    let relu = cache.pre_relu.mapv(|v| v.max(0.0));
    grads.ffn_w2 += &relu.t().dot(&d_ffn);
    grads.ffn_b2 += &d_ffn.sum_axis(Axis(0));
    let mut d_pre = d_ffn.dot(&params.ffn_w2.t());
    Zip::from(&mut d_pre)
        .and(&cache.pre_relu)
        .for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
    grads.ffn_w1 += &cache.h1.t().dot(&d_pre);
    grads.ffn_b1 += &d_pre.sum_axis(Axis(0));
    d_h1 += &d_pre.dot(&params.ffn_w1.t());

    let (d_s1, dg1, db1) = layer_norm_backward(&d_h1, &cache.norm1, &params.ln1_gain);
    grads.ln1_gain += &dg1;
    grads.ln1_bias += &db1;

    let mut d_x = d_s1.clone();
    let mut d_attn = d_s1;
    if let Some(m) = &cache.attn_mask {
        d_attn *= m;
    }
    grads.w_o += &cache.concat.t().dot(&d_attn);
    let d_concat = d_attn.dot(&params.w_o.t());

    let dh = tables.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let n = d_out.nrows();
    let k = tables.num_relations();
    for (h, (hc, hp)) in cache.heads.iter().zip(&params.heads).enumerate() {
        let d_z = d_concat.slice(s![.., h * dh..(h + 1) * dh]).to_owned();

        // z = alpha v + label_mass r^V
        let dz_rv = d_z.dot(&tables.values.t());
        let mut d_alpha = d_z.dot(&hc.v.t());
        for (i, j, l) in relations.iter() {
            d_alpha[[i, j]] += dz_rv[[i, l.ordinal()]];
        }
        let d_v = hc.alpha.t().dot(&d_z);
        table_grads.values += &hc.label_mass.t().dot(&d_z);

        // softmax
        let mut d_e = Array2::zeros((n, n));
        for i in 0..n {
            let a = hc.alpha.row(i);
            let g = d_alpha.row(i);
            let dot = a.dot(&g);
            Zip::from(d_e.row_mut(i))
                .and(&a)
                .and(&g)
                .for_each(|o, &av, &gv| *o = av * (gv - dot));
        }

        // e = scale * q (k + r^K)^T
        let mut d_label = Array2::zeros((n, k));
        for (i, j, l) in relations.iter() {
            d_label[[i, l.ordinal()]] += d_e[[i, j]];
        }
        let d_q = (d_e.dot(&hc.k) + d_label.dot(&tables.keys)) * scale;
        let d_k = d_e.t().dot(&hc.q) * scale;
        table_grads.keys += &(d_label.t().dot(&hc.q) * scale);

        let gh = &mut grads.heads[h];
        gh.w_q += &cache.x.t().dot(&d_q);
        gh.w_k += &cache.x.t().dot(&d_k);
        gh.w_v += &cache.x.t().dot(&d_v);
        d_x += &d_q.dot(&hp.w_q.t());
        d_x += &d_k.dot(&hp.w_k.t());
        d_x += &d_v.dot(&hp.w_v.t());
    }
    d_x
}
