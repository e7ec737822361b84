use serde::{Deserialize, Serialize};

use super::{FlattenedSequence, InteractionGraph, NodeRef, RelationLabel, RelationMatrix};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Wire {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<RunManifest>,
    num_nodes: usize,
    nodes: Vec<NodeRef>,
    relations: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sequence: Option<FlattenedSequence>,
}

/// Serialized graph: node list, dense label-name matrix, and optionally the
/// flattened input sequence the node embeddings are derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDocument {
    pub manifest: Option<RunManifest>,
    pub graph: InteractionGraph,
    pub sequence: Option<FlattenedSequence>,
}

impl GraphDocument {
    pub fn new(graph: InteractionGraph) -> Self {
        GraphDocument {
            manifest: None,
            graph,
            sequence: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.graph;
        let n = g.num_nodes();
        let relations = (0..n)
            .map(|i| (0..n).map(|j| g.label(i, j).name().to_string()).collect())
            .collect();
        let wire = Wire {
            format_version: GRAPH_FORMAT_VERSION,
            manifest: self.manifest.clone(),
            num_nodes: n,
            nodes: g.nodes().to_vec(),
            relations,
            sequence: self.sequence.clone(),
        };
        let mut out = serde_json::to_vec_pretty(&wire).expect("graph document serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let wire: Wire = serde_json::from_slice(bytes)
            .map_err(|e| Error::Parse(format!("graph document: {e}")))?;
        if wire.format_version != GRAPH_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported graph format_version {}",
                wire.format_version
            )));
        }
        let n = wire.num_nodes;
        if wire.nodes.len() != n || wire.relations.len() != n {
            return Err(Error::Validation(format!(
                "num_nodes is {n} but the document lists {} nodes and {} matrix rows",
                wire.nodes.len(),
                wire.relations.len()
            )));
        }
        let mut matrix = RelationMatrix::filled(n, RelationLabel::SelfLoop);
        for (i, row) in wire.relations.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "matrix row {i} has {} cells, expected {n}",
                    row.len()
                )));
            }
            for (j, name) in row.iter().enumerate() {
                let label = RelationLabel::from_name(name).ok_or_else(|| {
                    Error::Parse(format!("unknown relation label '{name}' at ({i}, {j})"))
                })?;
                matrix.set(i, j, label);
            }
        }
        let graph = InteractionGraph::from_parts(wire.nodes, matrix)?;
        if let Some(seq) = &wire.sequence {
            seq.validate()?;
            if seq.node_spans.iter().map(|s| s.node).ne(graph.nodes().iter().copied()) {
                return Err(Error::Validation(
                    "sequence spans do not match the graph's node list".into(),
                ));
            }
        }
        Ok(GraphDocument {
            manifest: wire.manifest,
            graph,
            sequence: wire.sequence,
        })
    }
}

/// Deterministic serialization of a bare graph.
pub fn export_graph(graph: &InteractionGraph) -> Vec<u8> {
    GraphDocument::new(graph.clone()).to_bytes()
}

pub fn import_graph(bytes: &[u8]) -> Result<InteractionGraph> {
    GraphDocument::from_bytes(bytes).map(|d| d.graph)
}
