use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::EncoderConfig;
use crate::graph::{FlattenedSequence, SeqItem};

/// Vector for one sequence item, a pure function of (seed, item key).
/// Entries are uniform in [-1, 1].
pub fn item_vector(item: &SeqItem, dim: usize, seed: u64) -> Array1<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(item.key().as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(bytes);
    Array1::from_shape_simple_fn(dim, || rng.random_range(-1.0..=1.0))
}

/// Initial node embeddings: one row per graph node, the mean of the item
/// vectors over the node's span.
pub fn embed_nodes(flattened: &FlattenedSequence, config: &EncoderConfig) -> Array2<f64> {
    let d = config.model_dim;
    let mut cache: HashMap<&SeqItem, Array1<f64>> = HashMap::new();
    let mut x = Array2::zeros((flattened.num_nodes(), d));
    for (row, span) in flattened.node_spans.iter().enumerate() {
        let mut acc = Array1::<f64>::zeros(d);
        for item in &flattened.items[span.range()] {
            let v = cache
                .entry(item)
                .or_insert_with(|| item_vector(item, d, config.seed));
            acc += &*v;
        }
        acc /= span.range().len() as f64;
        x.row_mut(row).assign(&acc);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_token_same_vector() {
        let a = item_vector(&SeqItem::Token("name".into()), 8, 3);
        let b = item_vector(&SeqItem::Token("name".into()), 8, 3);
        let c = item_vector(&SeqItem::Token("names".into()), 8, 3);
        let d = item_vector(&SeqItem::Token("name".into()), 8, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
    }
}
