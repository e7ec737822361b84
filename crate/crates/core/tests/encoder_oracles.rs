mod common;

use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use syntagraph::encoder::{
    attention_scores, embed_nodes, encode, encode_with_mode, init_params, item_vector, rgat_layer,
    EncoderConfig, Mode, RelationEmbeddingTables,
};
use syntagraph::graph::{flatten_input, RelationLabel, RelationMatrix, NUM_RELATIONS};
use syntagraph::synth::{random_graph, random_instance};

use common::{
    max_abs_diff, naive_layer, naive_scores, naive_softmax, random_matrix, random_params, rng,
    small_config,
};

fn softmax_rows(e: &Array2<f64>) -> Array2<f64> {
    let mut a = e.clone();
    for mut row in a.rows_mut() {
        let p = naive_softmax(row.as_slice().unwrap());
        row.assign(&Array1::from(p));
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_match_scalar_loops(n in 1usize..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let config = small_config(1, 16, 2, seed);
        let (params, tables) = random_params(&config, &mut r);
        let g = random_graph(n, &mut r);
        let x = random_matrix(n, 16, 1.0, &mut r);
        for head in 0..2 {
            let e = attention_scores(&x, &g, &params, &tables, 0, head).unwrap();
            let want = naive_scores(&x, Some(g.relations()), &params.layers[0], &tables, head);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((e[[i, j]] - want[i][j]).abs() < 1e-12);
                }
            }
            let a = softmax_rows(&e);
            for row in a.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn layer_matches_scalar_loops(n in 1usize..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let config = small_config(1, 16, 2, seed);
        let (params, tables) = random_params(&config, &mut r);
        let g = random_graph(n, &mut r);
        let x = random_matrix(n, 16, 1.0, &mut r);
        let out = rgat_layer(&x, &g, &params, &tables, 0).unwrap();
        let want = naive_layer(&x, Some(g.relations()), &params.layers[0], &tables);
        prop_assert!(max_abs_diff(&out, &want) < 1e-12);
    }

    #[test]
    fn zero_relation_tables_give_a_plain_transformer(n in 1usize..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let config = small_config(1, 16, 4, seed);
        let (params, _) = random_params(&config, &mut r);
        let zero = RelationEmbeddingTables::zeros(NUM_RELATIONS, 4);
        let g = random_graph(n, &mut r);
        let x = random_matrix(n, 16, 1.0, &mut r);
        let out = rgat_layer(&x, &g, &params, &zero, 0).unwrap();
        let plain = naive_layer(&x, None, &params.layers[0], &zero);
        prop_assert!(max_abs_diff(&out, &plain) < 1e-12);
    }

    #[test]
    fn permutation_equivariance(n in 1usize..=6, seed in any::<u64>(), uniform in any::<bool>()) {
        let mut r = rng(seed);
        let config = small_config(2, 8, 2, seed);
        let (params, tables) = random_params(&config, &mut r);
        let relations = if uniform {
            RelationMatrix::filled(n, RelationLabel::NoneSyntax)
        } else {
            random_graph(n, &mut r).relations().clone()
        };
        let x = random_matrix(n, 8, 1.0, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let px = x.select(Axis(0), &perm);
        let z = encode(&relations, &x, &params, &tables, &config).unwrap();
        let pz = encode(relations.permuted(&perm), &px, &params, &tables, &config).unwrap();
        prop_assert!(max_abs_diff(&pz, &z.select(Axis(0), &perm)) < 1e-10);
    }

    #[test]
    fn changing_one_label_only_touches_its_row(n in 2usize..=10, seed in any::<u64>()) {
        let mut r = rng(seed);
        let config = small_config(1, 8, 2, seed);
        let (params, tables) = random_params(&config, &mut r);
        let before = random_graph(n, &mut r).relations().clone();
        let i = r.random_range(0..n);
        let j = r.random_range(0..n);
        let mut after = before.clone();
        let old = before.get(i, j).ordinal();
        after.set(i, j, RelationLabel::from_ordinal((old + 1) % NUM_RELATIONS).unwrap());
        let x = random_matrix(n, 8, 1.0, &mut r);
        for head in 0..2 {
            let e0 = attention_scores(&x, &before, &params, &tables, 0, head).unwrap();
            let e1 = attention_scores(&x, &after, &params, &tables, 0, head).unwrap();
            for a in (0..n).filter(|&a| a != i) {
                prop_assert_eq!(e0.row(a), e1.row(a));
            }
        }
        let z0 = encode(&before, &x, &params, &tables, &config).unwrap();
        let z1 = encode(&after, &x, &params, &tables, &config).unwrap();
        for a in (0..n).filter(|&a| a != i) {
            prop_assert_eq!(z0.row(a), z1.row(a));
        }
    }
}

#[test]
fn zero_input_gives_zero_scores() {
    let config = small_config(1, 16, 2, 3);
    let (params, tables) = random_params(&config, &mut rng(3));
    let g = random_graph(7, &mut rng(4));
    let x = Array2::zeros((7, 16));
    for head in 0..2 {
        let e = attention_scores(&x, &g, &params, &tables, 0, head).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn single_node_attends_to_itself() {
    let config = small_config(1, 16, 2, 3);
    let (params, tables) = random_params(&config, &mut rng(5));
    let g = random_graph(1, &mut rng(6));
    let x = random_matrix(1, 16, 1.0, &mut rng(7));
    let e = attention_scores(&x, &g, &params, &tables, 0, 1).unwrap();
    assert_eq!(e.dim(), (1, 1));
    assert_eq!(softmax_rows(&e)[[0, 0]], 1.0);
    assert!(rgat_layer(&x, &g, &params, &tables, 0).is_ok());
}

#[test]
fn empty_stack_is_identity() {
    let config = small_config(0, 16, 2, 1);
    let (params, tables) = init_params(&config);
    let g = random_graph(5, &mut rng(1));
    let x = random_matrix(5, 16, 1.0, &mut rng(2));
    assert_eq!(encode(&g, &x, &params, &tables, &config).unwrap(), x);
}

#[test]
fn two_layers_compose() {
    let config = small_config(2, 16, 2, 9);
    let (params, tables) = random_params(&config, &mut rng(9));
    let g = random_graph(8, &mut rng(10));
    let x = random_matrix(8, 16, 1.0, &mut rng(11));
    let first = rgat_layer(&x, &g, &params, &tables, 0).unwrap();
    let second = rgat_layer(&first, &g, &params, &tables, 1).unwrap();
    assert_eq!(encode(&g, &x, &params, &tables, &config).unwrap(), second);
    let naive = naive_layer(
        &naive_layer(&x, Some(g.relations()), &params.layers[0], &tables),
        Some(g.relations()),
        &params.layers[1],
        &tables,
    );
    assert!(max_abs_diff(&second, &naive) < 1e-12);
}

#[test]
fn eval_is_deterministic_and_train_depends_on_seed() {
    let config = EncoderConfig {
        dropout_rate: 0.3,
        ..small_config(2, 16, 2, 4)
    };
    let (params, tables) = init_params(&config);
    let g = random_graph(9, &mut rng(12));
    let x = random_matrix(9, 16, 1.0, &mut rng(13));
    let a = encode(&g, &x, &params, &tables, &config).unwrap();
    let b = encode(&g, &x, &params, &tables, &config).unwrap();
    assert_eq!(a, b);
    let t1 = encode_with_mode(&g, &x, &params, &tables, &config, Mode::Train { seed: 1 }).unwrap();
    let t1b = encode_with_mode(&g, &x, &params, &tables, &config, Mode::Train { seed: 1 }).unwrap();
    let t2 = encode_with_mode(&g, &x, &params, &tables, &config, Mode::Train { seed: 2 }).unwrap();
    assert_eq!(t1, t1b);
    assert_ne!(t1, t2);
    assert_ne!(t1, a);
}

#[test]
fn shape_mismatch_is_an_error() {
    let config = small_config(1, 16, 2, 0);
    let (params, tables) = init_params(&config);
    let g = random_graph(4, &mut rng(0));
    let x = random_matrix(5, 16, 1.0, &mut rng(0));
    assert!(encode(&g, &x, &params, &tables, &config).is_err());
    let x = random_matrix(4, 8, 1.0, &mut rng(0));
    assert!(rgat_layer(&x, &g, &params, &tables, 0).is_err());
}

#[test]
fn init_is_deterministic_with_declared_shapes() {
    let config = EncoderConfig::default();
    let (p1, t1) = init_params(&config);
    let (p2, t2) = init_params(&config);
    assert_eq!(p1, p2);
    assert_eq!(t1, t2);
    let d = config.model_dim;
    let dh = config.head_dim();
    assert_eq!(p1.layers.len(), config.num_layers);
    for l in &p1.layers {
        assert_eq!(l.heads.len(), config.num_heads);
        for h in &l.heads {
            assert_eq!(h.w_q.dim(), (d, dh));
            assert_eq!(h.w_k.dim(), (d, dh));
            assert_eq!(h.w_v.dim(), (d, dh));
        }
        assert_eq!(l.w_o.dim(), (d, d));
        assert_eq!(l.ffn_w1.dim(), (d, config.ffn_dim));
        assert_eq!(l.ffn_w2.dim(), (config.ffn_dim, d));
    }
    assert_eq!(t1.keys.dim(), (NUM_RELATIONS, dh));
    assert!(t1.keys.iter().chain(t1.values.iter()).all(|v| v.abs() <= 0.1));

    // uniform on [-a, a] has variance a^2 / 3
    let w = &p1.layers[0].heads[0].w_q;
    let a = (6.0 / (d + dh) as f64).sqrt();
    let sigma = (a * a / 3.0 / w.len() as f64).sqrt();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    assert!(mean.abs() < 3.0 * sigma, "mean {mean}, sigma {sigma}");
    assert!(w.iter().all(|v| v.abs() <= a));
}

#[test]
fn node_embeddings_are_span_means() {
    let inst = random_instance(30, &mut rng(21));
    let seq = flatten_input(&inst.tokens, &inst.schema).unwrap();
    let config = small_config(1, 16, 2, 77);
    let x = embed_nodes(&seq, &config);
    assert_eq!(x.nrows(), inst.num_nodes());
    for (row, span) in seq.node_spans.iter().enumerate() {
        let items: Vec<Array1<f64>> = seq.items[span.range()]
            .iter()
            .map(|it| item_vector(it, 16, 77))
            .collect();
        for c in 0..16 {
            let mut s = 0.0;
            for v in &items {
                s += v[c];
            }
            let want = s / items.len() as f64;
            assert!((x[[row, c]] - want).abs() < 1e-15);
        }
        if items.len() == 1 {
            assert_eq!(x.row(row), items[0].view());
        }
    }
    assert_eq!(embed_nodes(&seq, &config), x);
}
