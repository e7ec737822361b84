//! Orthogonality penalty on relation embeddings, its gradient, cosine
//! similarity diagnostics, and a gradient-descent experiment contrasting
//! penalized and untouched embeddings.
//!
//! With the embeddings as the columns of `r` (d_r x k), the penalty is the
//! squared Frobenius norm of the off-diagonal part of the Gram matrix:
//! `L(r) = || r^T r (1 - I) ||_F^2`, and `dL/dr = 4 r G` with
//! `G = (r^T r)(1 - I)` (elementwise mask).

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::{RelationEmbeddingTables, RELATION_INIT_RANGE};
use crate::error::{Error, Result};

/// Relation embeddings as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationEmbeddingMatrix {
    r: Array2<f64>,
}

impl RelationEmbeddingMatrix {
    /// `r` is d_r x k; column j is the embedding of relation j.
    pub fn new(r: Array2<f64>) -> Result<Self> {
        if r.ncols() == 0 {
            return Err(Error::Validation("relation embedding matrix has no columns".into()));
        }
        if let Some(pos) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "relation embedding entry ({}, {})",
                pos / r.ncols(),
                pos % r.ncols()
            )));
        }
        Ok(RelationEmbeddingMatrix { r })
    }

    /// Column j is the key embedding of label j stacked on its value
    /// embedding, so d_r = 2 * d_h.
    pub fn from_tables(tables: &RelationEmbeddingTables) -> Result<Self> {
        let dh = tables.head_dim();
        let k = tables.num_relations();
        let mut r = Array2::zeros((2 * dh, k));
        r.slice_mut(s![..dh, ..]).assign(&tables.keys.t());
        r.slice_mut(s![dh.., ..]).assign(&tables.values.t());
        Self::new(r)
    }

    /// Inverse of [`from_tables`](Self::from_tables) for a d_r x k gradient.
    pub fn split_gradient(&self, grad: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let dh = grad.nrows() / 2;
        (
            grad.slice(s![..dh, ..]).t().to_owned(),
            grad.slice(s![dh.., ..]).t().to_owned(),
        )
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.r
    }

    pub fn num_relations(&self) -> usize {
        self.r.ncols()
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    fn masked_gram(&self) -> Array2<f64> {
        let mut g = self.r.t().dot(&self.r);
        g.diag_mut().fill(0.0);
        g
    }

    pub fn dc_loss(&self) -> Result<f64> {
        let loss = self.masked_gram().iter().map(|v| v * v).sum::<f64>();
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::NonFinite("decoupling loss".into()))
        }
    }

    pub fn dc_grad(&self) -> Result<Array2<f64>> {
        let g = self.r.dot(&self.masked_gram()) * 4.0;
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite("decoupling gradient".into()))
        }
    }

    pub fn similarity_matrix(&self) -> Result<SimilarityReport> {
        let k = self.num_relations();
        let norms: Vec<f64> = self
            .r
            .columns()
            .into_iter()
            .map(|c| c.dot(&c).sqrt())
            .collect();
        if let Some(j) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroColumn(j));
        }
        let gram = self.r.t().dot(&self.r);
        let mut matrix = Array2::zeros((k, k));
        for i in 0..k {
            matrix[[i, i]] = 1.0;
            for j in i + 1..k {
                let c = gram[[i, j]] / (norms[i] * norms[j]);
                matrix[[i, j]] = c;
                matrix[[j, i]] = c;
            }
        }
        Ok(SimilarityReport::from_matrix(matrix))
    }
}

pub fn dc_loss(r: &RelationEmbeddingMatrix) -> Result<f64> {
    r.dc_loss()
}

pub fn dc_grad(r: &RelationEmbeddingMatrix) -> Result<Array2<f64>> {
    r.dc_grad()
}

pub fn similarity_matrix(r: &RelationEmbeddingMatrix) -> Result<SimilarityReport> {
    r.similarity_matrix()
}

/// Pairwise cosine similarities of relation embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub matrix: Array2<f64>,
    pub max_offdiag_abs: f64,
    pub mean_offdiag_abs: f64,
}

impl SimilarityReport {
    fn from_matrix(matrix: Array2<f64>) -> Self {
        let k = matrix.nrows();
        let off: Vec<f64> = matrix
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, v)| v.abs())
            .collect();
        let max = off.iter().copied().fold(0.0, f64::max);
        let mean = if off.is_empty() {
            0.0
        } else {
            off.iter().sum::<f64>() / (k * (k - 1)) as f64
        };
        SimilarityReport {
            matrix,
            max_offdiag_abs: max,
            mean_offdiag_abs: mean,
        }
    }
}

/// Result of [`decoupling_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingOutcome {
    pub initial: SimilarityReport,
    pub with_dc: SimilarityReport,
    pub without_dc: SimilarityReport,
    /// Penalty before the first step and after each step of the penalized arm.
    pub trajectory: Vec<f64>,
    pub final_embeddings: RelationEmbeddingMatrix,
}

/// Draws `r` (d_r x k) uniform in [-0.1, 0.1] and runs plain gradient
/// descent on `lambda_dc * L(r)`. The unpenalized arm has zero loss and so
/// keeps the initial embeddings.
pub fn decoupling_experiment(
    k: usize,
    d_r: usize,
    steps: usize,
    learning_rate: f64,
    lambda_dc: f64,
    seed: u64,
) -> Result<DecouplingOutcome> {
    if k == 0 || d_r == 0 {
        return Err(Error::Validation(format!("k={k} and d_r={d_r} must be positive")));
    }
    if k > d_r {
        return Err(Error::Validation(format!(
            "k={k} relations cannot be mutually orthogonal in d_r={d_r} dimensions"
        )));
    }
    if steps == 0 {
        return Err(Error::Validation("steps must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = RELATION_INIT_RANGE;
    let init = RelationEmbeddingMatrix::new(Array2::from_shape_simple_fn((d_r, k), || {
        rng.random_range(-a..=a)
    }))?;
    let initial = init.similarity_matrix()?;

    let mut r = init.clone();
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(r.dc_loss()?);
    for step in 0..steps {
        let g = r.dc_grad()?;
        let next = &r.r - &(g * (learning_rate * lambda_dc));
        r = RelationEmbeddingMatrix::new(next).map_err(|_| {
            Error::NonFinite(format!("embeddings after step {}", step + 1))
        })?;
        trajectory.push(r.dc_loss()?);
    }
    log::debug!(
        "decoupling: penalty {:.3e} -> {:.3e} over {steps} steps",
        trajectory[0],
        trajectory[steps]
    );

    Ok(DecouplingOutcome {
        with_dc: r.similarity_matrix()?,
        without_dc: init.similarity_matrix()?,
        initial,
        trajectory,
        final_embeddings: r,
    })
}
