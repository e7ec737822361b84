//! Seeded random (question, parse, schema) instances for property tests,
//! gradient checks and benchmarks.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::json;

use crate::graph::{build_graph, question_graph, InteractionGraph};
use crate::question::{DepEdge, DependencyParse, QuestionToken};
use crate::schema::{load_schema, Schema};

const WORDS: &[&str] = &[
    "name", "id", "date", "city", "country", "population", "area", "student", "course",
    "title", "year", "age", "code", "total", "north", "america", "show", "list", "ship",
    "transcript", "result", "order",
];
const VALUES: &[&str] = &["3000", "paris", "asia", "north america", "1999", "blue"];
const DEP_LABELS: &[&str] = &[
    "nsubj", "obj", "dobj", "det", "amod", "prep", "pobj", "nmod", "conj", "cc", "dep",
    "punct", "advmod", "compound", "relcl",
];

#[derive(Debug, Clone)]
pub struct Instance {
    pub tokens: Vec<QuestionToken>,
    pub parse: DependencyParse,
    pub schema: Schema,
}

impl Instance {
    pub fn num_nodes(&self) -> usize {
        self.tokens.len() + self.schema.num_tables() + self.schema.num_columns()
    }

    pub fn graph(&self) -> InteractionGraph {
        build_graph(&self.tokens, &self.parse, &self.schema).expect("generated instance is valid")
    }
}

/// Uniformly shuffled attachment tree over `n` tokens with random labels.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> DependencyParse {
    assert!(n > 0);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let edges = (1..n)
        .map(|k| DepEdge {
            head: order[rng.random_range(0..k)],
            dependent: order[k],
            label: DEP_LABELS.choose(rng).unwrap().to_string(),
        })
        .collect();
    DependencyParse::new(n, edges).expect("attachment tree is valid")
}

fn random_name(rng: &mut impl Rng) -> String {
    let words = rng.random_range(1..=2);
    (0..words)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_tokens(n: usize, rng: &mut impl Rng) -> Vec<QuestionToken> {
    (0..n)
        .map(|i| {
            let roll = rng.random_range(0..10);
            if roll == 0 {
                let v = VALUES.choose(rng).unwrap();
                let single = v.split(' ').next().unwrap();
                QuestionToken::new(i, single.to_uppercase(), single)
            } else if roll == 1 {
                let w = WORDS.choose(rng).unwrap();
                QuestionToken::new(i, format!("{w}s"), *w)
            } else {
                let w = WORDS.choose(rng).unwrap();
                QuestionToken::new(i, *w, *w)
            }
        })
        .collect()
}

/// A valid schema with `tables` tables and `columns >= tables` columns.
pub fn random_schema(tables: usize, columns: usize, rng: &mut impl Rng) -> Schema {
    assert!(tables >= 1 && columns >= tables);
    let mut owner: Vec<usize> = (0..tables).collect();
    owner.extend((tables..columns).map(|_| rng.random_range(0..tables)));
    for i in (1..columns).rev() {
        owner.swap(i, rng.random_range(0..=i));
    }
    let column_names: Vec<_> = owner.iter().map(|&t| json!([t, random_name(rng)])).collect();
    let types = ["text", "number", "time", "boolean", "others"];
    let column_types: Vec<_> = (0..columns).map(|_| *types.choose(rng).unwrap()).collect();
    let primary_keys: Vec<usize> = (0..columns).filter(|_| rng.random_bool(0.3)).collect();
    let mut foreign_keys = Vec::new();
    if columns >= 2 {
        for _ in 0..rng.random_range(0..=columns) {
            let a = rng.random_range(0..columns);
            let b = rng.random_range(0..columns);
            if a != b {
                foreign_keys.push([a, b]);
            }
        }
    }
    let cell_values: Vec<_> = (0..columns)
        .map(|_| {
            if rng.random_bool(0.4) {
                let k = rng.random_range(1..=3);
                json!((0..k).map(|_| *VALUES.choose(rng).unwrap()).collect::<Vec<_>>())
            } else {
                serde_json::Value::Null
            }
        })
        .collect();
    let table_names: Vec<_> = (0..tables).map(|_| random_name(rng)).collect();
    let doc = json!({
        "db_id": "synthetic",
        "table_names": table_names,
        "column_names": column_names,
        "column_types": column_types,
        "primary_keys": primary_keys,
        "foreign_keys": foreign_keys,
        "cell_values": cell_values,
    });
    load_schema(doc.to_string().as_bytes()).expect("generated schema is valid")
}

/// Instance with exactly `n >= 3` graph nodes.
pub fn random_instance_with_nodes(n: usize, rng: &mut impl Rng) -> Instance {
    assert!(n >= 3, "a full instance needs a token, a table and a column");
    let nq = rng.random_range(1..=n - 2);
    let rest = n - nq;
    let nt = rng.random_range(1..=rest / 2);
    let nc = rest - nt;
    Instance {
        tokens: random_tokens(nq, rng),
        parse: random_tree(nq, rng),
        schema: random_schema(nt, nc, rng),
    }
}

/// Instance with between 3 and `max_nodes` graph nodes.
pub fn random_instance(max_nodes: usize, rng: &mut impl Rng) -> Instance {
    let n = rng.random_range(3..=max_nodes.max(3));
    random_instance_with_nodes(n, rng)
}

/// Graph with exactly `n >= 1` nodes. Below three nodes no schema fits, so
/// the graph is question-only.
pub fn random_graph(n: usize, rng: &mut impl Rng) -> InteractionGraph {
    if n < 3 {
        question_graph(&random_tree(n, rng))
    } else {
        random_instance_with_nodes(n, rng).graph()
    }
}
