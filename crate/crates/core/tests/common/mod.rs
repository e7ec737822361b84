//! Independent reference implementations used by the integration tests.
//! Everything here is written with plain scalar loops and shares no code with
//! the library beyond its data types.

#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syntagraph::encoder::{EncoderConfig, LayerParams, RelationEmbeddingTables};
use syntagraph::graph::{LinkKind, RelationMatrix};
use syntagraph::question::{DependencyParse, QuestionToken};
use syntagraph::schema::Schema;

pub const EPS: f64 = 1e-5;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..=scale))
}

pub fn small_config(num_layers: usize, model_dim: usize, num_heads: usize, seed: u64) -> EncoderConfig {
    EncoderConfig {
        num_layers,
        num_heads,
        model_dim,
        ffn_dim: 2 * model_dim,
        dropout_rate: 0.0,
        seed,
    }
}

/// Counts head -> dependent pairs by scanning every ordered pair against the
/// raw edge list.
pub fn count_edges(parse: &DependencyParse) -> (usize, usize) {
    let n = parse.token_count();
    let mut forward = 0;
    let mut backward = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if parse.edges().iter().any(|e| e.head == i && e.dependent == j) {
                forward += 1;
            }
            if parse.edges().iter().any(|e| e.head == j && e.dependent == i) {
                backward += 1;
            }
        }
    }
    (forward, backward)
}

/// True when half-open ranges share at least one index, by brute force.
pub fn spans_overlap(a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> bool {
    a.clone().any(|x| b.contains(&x))
}

fn brute_link(tokens: &[QuestionToken], i: usize, lemmas: &[String], cells: &[String]) -> LinkKind {
    let n = tokens.len();
    for start in 0..n {
        for end in start + 1..=n {
            if !(start <= i && i < end) {
                continue;
            }
            let gram: Vec<&str> = tokens[start..end].iter().map(|t| t.lemma.as_str()).collect();
            if gram.len() == lemmas.len() && gram.iter().zip(lemmas).all(|(a, b)| *a == b) {
                return LinkKind::Exact;
            }
        }
    }
    if lemmas.iter().any(|l| *l == tokens[i].lemma) {
        return LinkKind::Partial;
    }
    for cell in cells {
        let c = cell.to_lowercase();
        if c == tokens[i].lemma.to_lowercase() || c == tokens[i].surface.to_lowercase() {
            return LinkKind::Value;
        }
    }
    LinkKind::None
}

/// Link kind of every (token, table) pair.
pub fn brute_table_links(tokens: &[QuestionToken], schema: &Schema) -> Vec<Vec<LinkKind>> {
    (0..tokens.len())
        .map(|i| {
            schema
                .tables
                .iter()
                .map(|t| brute_link(tokens, i, &t.lemmas, &[]))
                .collect()
        })
        .collect()
}

/// Link kind of every (token, column) pair.
pub fn brute_column_links(tokens: &[QuestionToken], schema: &Schema) -> Vec<Vec<LinkKind>> {
    (0..tokens.len())
        .map(|i| {
            schema
                .columns
                .iter()
                .map(|c| {
                    let cells = c.cell_values.clone().unwrap_or_default();
                    brute_link(tokens, i, &c.lemmas, &cells)
                })
                .collect()
        })
        .collect()
}

fn matvec_row(x: &Array2<f64>, i: usize, w: &Array2<f64>) -> Vec<f64> {
    let mut out = vec![0.0; w.ncols()];
    for c in 0..w.ncols() {
        let mut s = 0.0;
        for k in 0..w.nrows() {
            s += x[[i, k]] * w[[k, c]];
        }
        out[c] = s;
    }
    out
}

fn norm_rows(x: &[Vec<f64>], gain: &[f64], bias: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let d = row.len() as f64;
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let sd = (var + EPS).sqrt();
            row.iter()
                .enumerate()
                .map(|(k, v)| gain[k] * (v - mean) / sd + bias[k])
                .collect()
        })
        .collect()
}

/// Scores of one head: `q_i . (k_j + rK[label]) / sqrt(d_h)`, with the
/// relation terms dropped when `relations` is `None`.
pub fn naive_scores(
    x: &Array2<f64>,
    relations: Option<&RelationMatrix>,
    layer: &LayerParams,
    tables: &RelationEmbeddingTables,
    head: usize,
) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let hp = &layer.heads[head];
    let dh = hp.w_q.ncols();
    let mut e = vec![vec![0.0; n]; n];
    for i in 0..n {
        let q = matvec_row(x, i, &hp.w_q);
        for j in 0..n {
            let k = matvec_row(x, j, &hp.w_k);
            let mut s = 0.0;
            for c in 0..dh {
                let rk = match relations {
                    Some(r) => tables.keys[[r.get(i, j).ordinal(), c]],
                    None => 0.0,
                };
                s += q[c] * (k[c] + rk);
            }
            e[i][j] = s / (dh as f64).sqrt();
        }
    }
    e
}

pub fn naive_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|v| v / total).collect()
}

/// One post-norm layer. With `relations = None` this is a plain transformer
/// layer with no relation terms at all.
pub fn naive_layer(
    x: &Array2<f64>,
    relations: Option<&RelationMatrix>,
    layer: &LayerParams,
    tables: &RelationEmbeddingTables,
) -> Array2<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let heads = layer.heads.len();
    let dh = d / heads;
    let mut concat = vec![vec![0.0; d]; n];
    for h in 0..heads {
        let e = naive_scores(x, relations, layer, tables, h);
        let values: Vec<Vec<f64>> = (0..n).map(|j| matvec_row(x, j, &layer.heads[h].w_v)).collect();
        for i in 0..n {
            let a = naive_softmax(&e[i]);
            for c in 0..dh {
                let mut z = 0.0;
                for j in 0..n {
                    let rv = match relations {
                        Some(r) => tables.values[[r.get(i, j).ordinal(), c]],
                        None => 0.0,
                    };
                    z += a[j] * (values[j][c] + rv);
                }
                concat[i][h * dh + c] = z;
            }
        }
    }
    let mut pre1 = vec![vec![0.0; d]; n];
    for i in 0..n {
        for c in 0..d {
            let mut s = x[[i, c]];
            for k in 0..d {
                s += concat[i][k] * layer.w_o[[k, c]];
            }
            pre1[i][c] = s;
        }
    }
    let h1 = norm_rows(
        &pre1,
        layer.ln1_gain.as_slice().unwrap(),
        layer.ln1_bias.as_slice().unwrap(),
    );
    let f = layer.ffn_w1.ncols();
    let mut pre2 = vec![vec![0.0; d]; n];
    for i in 0..n {
        let mut hidden = vec![0.0; f];
        for u in 0..f {
            let mut s = layer.ffn_b1[u];
            for k in 0..d {
                s += h1[i][k] * layer.ffn_w1[[k, u]];
            }
            hidden[u] = s.max(0.0);
        }
        for c in 0..d {
            let mut s = h1[i][c] + layer.ffn_b2[c];
            for u in 0..f {
                s += hidden[u] * layer.ffn_w2[[u, c]];
            }
            pre2[i][c] = s;
        }
    }
    let out = norm_rows(
        &pre2,
        layer.ln2_gain.as_slice().unwrap(),
        layer.ln2_bias.as_slice().unwrap(),
    );
    Array2::from_shape_fn((n, d), |(i, c)| out[i][c])
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Initial parameters with every layer-norm gain and bias and every FFN bias
/// moved to a random value, plus relation tables scaled up so relation terms
/// are not negligible.
pub fn random_params(
    config: &EncoderConfig,
    rng: &mut impl Rng,
) -> (syntagraph::encoder::EncoderParameters, RelationEmbeddingTables) {
    let (mut params, mut tables) = syntagraph::encoder::init_params(config);
    for (name, mut t) in params.tensors_mut() {
        if name.ends_with("gain") {
            t.mapv_inplace(|_| 1.0 + rng.random_range(-0.5..=0.5));
        } else if name.ends_with("bias") || name.ends_with("b1") || name.ends_with("b2") {
            t.mapv_inplace(|_| rng.random_range(-0.5..=0.5));
        }
    }
    tables.keys.mapv_inplace(|v| 5.0 * v);
    tables.values.mapv_inplace(|v| 5.0 * v);
    (params, tables)
}
