use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EncoderConfig;
use crate::graph::NUM_RELATIONS;

/// Half-width of the uniform range for relation embedding initialization.
pub const RELATION_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// d_z x d_h
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    /// d_z x d_z output projection over the concatenated heads.
    pub w_o: Array2<f64>,
    pub ffn_w1: Array2<f64>,
    pub ffn_b1: Array1<f64>,
    pub ffn_w2: Array2<f64>,
    pub ffn_b2: Array1<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParameters {
    pub layers: Vec<LayerParams>,
}

/// Key and value relation embeddings, one row per relation label, shared by
/// every head and layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationEmbeddingTables {
    /// k x d_h
    pub keys: Array2<f64>,
    /// k x d_h
    pub values: Array2<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-a..=a))
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, a: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..=a))
}

/// Deterministic initialization from `config.seed`: Glorot-uniform weights,
/// zero biases, unit layer-norm gains, relation embeddings uniform in
/// [-0.1, 0.1].
pub fn init_params(config: &EncoderConfig) -> (EncoderParameters, RelationEmbeddingTables) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.model_dim;
    let dh = config.head_dim();
    let f = config.ffn_dim;
    let layers = (0..config.num_layers)
        .map(|_| {
            let heads = (0..config.num_heads)
                .map(|_| HeadParams {
                    w_q: glorot(&mut rng, d, dh),
                    w_k: glorot(&mut rng, d, dh),
                    w_v: glorot(&mut rng, d, dh),
                })
                .collect();
            LayerParams {
                heads,
                w_o: glorot(&mut rng, d, d),
                ffn_w1: glorot(&mut rng, d, f),
                ffn_b1: Array1::zeros(f),
                ffn_w2: glorot(&mut rng, f, d),
                ffn_b2: Array1::zeros(d),
                ln1_gain: Array1::ones(d),
                ln1_bias: Array1::zeros(d),
                ln2_gain: Array1::ones(d),
                ln2_bias: Array1::zeros(d),
            }
        })
        .collect();
    let tables = RelationEmbeddingTables {
        keys: uniform(&mut rng, NUM_RELATIONS, dh, RELATION_INIT_RANGE),
        values: uniform(&mut rng, NUM_RELATIONS, dh, RELATION_INIT_RANGE),
    };
    (EncoderParameters { layers }, tables)
}

impl LayerParams {
    pub fn zeros_like(&self) -> Self {
        let z2 = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let z1 = |a: &Array1<f64>| Array1::zeros(a.raw_dim());
        LayerParams {
            heads: self
                .heads
                .iter()
                .map(|h| HeadParams {
                    w_q: z2(&h.w_q),
                    w_k: z2(&h.w_k),
                    w_v: z2(&h.w_v),
                })
                .collect(),
            w_o: z2(&self.w_o),
            ffn_w1: z2(&self.ffn_w1),
            ffn_b1: z1(&self.ffn_b1),
            ffn_w2: z2(&self.ffn_w2),
            ffn_b2: z1(&self.ffn_b2),
            ln1_gain: z1(&self.ln1_gain),
            ln1_bias: z1(&self.ln1_bias),
            ln2_gain: z1(&self.ln2_gain),
            ln2_bias: z1(&self.ln2_bias),
        }
    }
}

macro_rules! layer_tensors {
    ($layer:expr, $prefix:expr, $iter:ident, $view:ident, $out:expr) => {{
        let l = $layer;
        for (h, head) in l.heads.$iter().enumerate() {
            $out.push((format!("{}.head{h}.w_q", $prefix), head.w_q.$view().into_dyn()));
            $out.push((format!("{}.head{h}.w_k", $prefix), head.w_k.$view().into_dyn()));
            $out.push((format!("{}.head{h}.w_v", $prefix), head.w_v.$view().into_dyn()));
        }
        $out.push((format!("{}.w_o", $prefix), l.w_o.$view().into_dyn()));
        $out.push((format!("{}.ffn_w1", $prefix), l.ffn_w1.$view().into_dyn()));
        $out.push((format!("{}.ffn_b1", $prefix), l.ffn_b1.$view().into_dyn()));
        $out.push((format!("{}.ffn_w2", $prefix), l.ffn_w2.$view().into_dyn()));
        $out.push((format!("{}.ffn_b2", $prefix), l.ffn_b2.$view().into_dyn()));
        $out.push((format!("{}.ln1_gain", $prefix), l.ln1_gain.$view().into_dyn()));
        $out.push((format!("{}.ln1_bias", $prefix), l.ln1_bias.$view().into_dyn()));
        $out.push((format!("{}.ln2_gain", $prefix), l.ln2_gain.$view().into_dyn()));
        $out.push((format!("{}.ln2_bias", $prefix), l.ln2_bias.$view().into_dyn()));
    }};
}

impl EncoderParameters {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParameters {
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    /// Every trainable tensor with a stable dotted name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer_tensors!(layer, format!("layer{i}"), iter, view, out);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer_tensors!(layer, format!("layer{i}"), iter_mut, view_mut, out);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

impl RelationEmbeddingTables {
    pub fn zeros(num_relations: usize, head_dim: usize) -> Self {
        RelationEmbeddingTables {
            keys: Array2::zeros((num_relations, head_dim)),
            values: Array2::zeros((num_relations, head_dim)),
        }
    }

    pub fn num_relations(&self) -> usize {
        self.keys.nrows()
    }

    pub fn head_dim(&self) -> usize {
        self.keys.ncols()
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            ("relations.keys".into(), self.keys.view().into_dyn()),
            ("relations.values".into(), self.values.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            ("relations.keys".into(), self.keys.view_mut().into_dyn()),
            ("relations.values".into(), self.values.view_mut().into_dyn()),
        ]
    }
}
