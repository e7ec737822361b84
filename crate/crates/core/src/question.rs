//! Question tokens, dependency parses read from CoNLL-U, and the collapse of
//! typed dependency edges into three direction-only syntax relations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionToken {
    pub index: usize,
    pub surface: String,
    pub lemma: String,
}

impl QuestionToken {
    pub fn new(index: usize, surface: impl Into<String>, lemma: impl Into<String>) -> Self {
        QuestionToken {
            index,
            surface: surface.into(),
            lemma: lemma.into().to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepEdge {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

/// A validated dependency tree over `token_count` tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyParse {
    token_count: usize,
    edges: Vec<DepEdge>,
    heads: Vec<Option<usize>>,
    root: usize,
}

impl DependencyParse {
    /// Builds a parse from head->dependent edges, rejecting anything that is
    /// not a single rooted tree.
    pub fn new(token_count: usize, edges: Vec<DepEdge>) -> Result<Self> {
        if token_count == 0 {
            return Err(Error::TreeViolation("parse has no tokens".into()));
        }
        let mut heads = vec![None; token_count];
        for e in &edges {
            for idx in [e.head, e.dependent] {
                if idx >= token_count {
                    return Err(Error::TreeViolation(format!(
                        "edge {}->{} references token {idx}, parse has {token_count} tokens",
                        e.head, e.dependent
                    )));
                }
            }
            if e.head == e.dependent {
                return Err(Error::TreeViolation(format!(
                    "token {} is its own head",
                    e.head
                )));
            }
            if heads[e.dependent].replace(e.head).is_some() {
                return Err(Error::TreeViolation(format!(
                    "token {} has more than one head",
                    e.dependent
                )));
            }
        }
        let roots: Vec<usize> = (0..token_count).filter(|&i| heads[i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::TreeViolation("parse has no root (cycle)".into())),
            many => {
                return Err(Error::TreeViolation(format!(
                    "parse has {} roots: {:?}",
                    many.len(),
                    many
                )))
            }
        };
        // With one root and one head per other token, every token reaching
        // the root is equivalent to acyclicity.
        let mut reaches_root = vec![false; token_count];
        reaches_root[root] = true;
        for start in 0..token_count {
            let mut path = Vec::new();
            let mut cur = start;
            while !reaches_root[cur] {
                if path.len() > token_count {
                    return Err(Error::TreeViolation(format!(
                        "cycle through token {start}"
                    )));
                }
                path.push(cur);
                cur = heads[cur].expect("only the root lacks a head");
            }
            for p in path {
                reaches_root[p] = true;
            }
        }
        Ok(DependencyParse {
            token_count,
            edges,
            heads,
            root,
        })
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn head_of(&self, token: usize) -> Option<usize> {
        self.heads.get(token).copied().flatten()
    }

    /// Same topology with each edge label replaced by `relabel(edge)`.
    pub fn relabeled(&self, mut relabel: impl FnMut(&DepEdge) -> String) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.label = relabel(e);
        }
        out
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.token_count {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.token_count,
            })
        } else {
            Ok(())
        }
    }

    /// 1 iff there is a direct edge head=`i` -> dependent=`j`.
    pub fn first_order_distance(&self, i: usize, j: usize) -> Result<u8> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(u8::from(self.heads[j] == Some(i)))
    }

    pub fn syntax_relation(&self, i: usize, j: usize) -> Result<SyntaxRelation> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::DiagonalQuery(i));
        }
        Ok(if self.first_order_distance(i, j)? == 1 {
            SyntaxRelation::Forward
        } else if self.first_order_distance(j, i)? == 1 {
            SyntaxRelation::Backward
        } else {
            SyntaxRelation::NoneSyntax
        })
    }
}

/// Free-function form of [`DependencyParse::first_order_distance`].
pub fn first_order_distance(parse: &DependencyParse, i: usize, j: usize) -> Result<u8> {
    parse.first_order_distance(i, j)
}

/// Free-function form of [`DependencyParse::syntax_relation`].
pub fn syntax_relation(parse: &DependencyParse, i: usize, j: usize) -> Result<SyntaxRelation> {
    parse.syntax_relation(i, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntaxRelation {
    Forward,
    Backward,
    NoneSyntax,
}

/// Cell of the question-question matrix. The diagonal is a placeholder that
/// graph assembly replaces with its self label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntaxCell {
    SelfSyntax,
    Relation(SyntaxRelation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxMatrix {
    n: usize,
    cells: Vec<SyntaxCell>,
}

impl SyntaxMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> SyntaxCell {
        self.cells[i * self.n + j]
    }

    pub fn count(&self, rel: SyntaxRelation) -> usize {
        self.cells
            .iter()
            .filter(|&&c| c == SyntaxCell::Relation(rel))
            .count()
    }
}

/// Question-question syntax relations for every ordered token pair.
pub fn question_relation_matrix(parse: &DependencyParse) -> SyntaxMatrix {
    let n = parse.token_count();
    let mut cells = vec![SyntaxCell::Relation(SyntaxRelation::NoneSyntax); n * n];
    for i in 0..n {
        cells[i * n + i] = SyntaxCell::SelfSyntax;
    }
    for e in parse.edges() {
        cells[e.head * n + e.dependent] = SyntaxCell::Relation(SyntaxRelation::Forward);
        cells[e.dependent * n + e.head] = SyntaxCell::Relation(SyntaxRelation::Backward);
    }
    SyntaxMatrix { n, cells }
}

/// Reads a single-sentence CoNLL-U document.
///
/// Comment lines, multiword-token ranges (`1-2`) and empty nodes (`1.1`) are
/// skipped. HEAD and DEPREL must be populated; `HEAD = 0` marks the root.
/// A missing LEMMA (`_`) falls back to the lowercased form.
pub fn load_conllu(document: &str) -> Result<(Vec<QuestionToken>, DependencyParse)> {
    let mut tokens = Vec::new();
    let mut raw_heads = Vec::new();
    let mut labels = Vec::new();
    let mut ended = false;

    for (lineno, line) in document.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                ended = true;
            }
            continue;
        }
        if ended {
            return Err(Error::Parse(format!(
                "line {lineno}: document contains more than one sentence"
            )));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected 10 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let id = fields[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| Error::Parse(format!("line {lineno}: bad token id '{id}'")))?;
        if id != tokens.len() + 1 {
            return Err(Error::Parse(format!(
                "line {lineno}: token id {id} out of sequence, expected {}",
                tokens.len() + 1
            )));
        }
        let form = fields[1];
        if form.is_empty() {
            return Err(Error::Parse(format!("line {lineno}: empty FORM")));
        }
        let lemma = match fields[2] {
            "_" | "" => form.to_lowercase(),
            l => l.to_lowercase(),
        };
        let head: usize = fields[6].parse().map_err(|_| {
            Error::Parse(format!("line {lineno}: HEAD '{}' is not an integer", fields[6]))
        })?;
        let deprel = fields[7];
        if deprel.is_empty() || deprel == "_" {
            return Err(Error::Parse(format!("line {lineno}: DEPREL is not populated")));
        }
        tokens.push(QuestionToken::new(id - 1, form, lemma));
        raw_heads.push(head);
        labels.push(deprel.to_string());
    }

    if tokens.is_empty() {
        return Err(Error::Parse("document contains no tokens".into()));
    }
    let n = tokens.len();
    let mut edges = Vec::new();
    for (dep, (&head, label)) in raw_heads.iter().zip(labels).enumerate() {
        if head == 0 {
            continue;
        }
        if head > n {
            return Err(Error::TreeViolation(format!(
                "token {} has head {head}, sentence has {n} tokens",
                dep + 1
            )));
        }
        edges.push(DepEdge {
            head: head - 1,
            dependent: dep,
            label,
        });
    }
    let parse = DependencyParse::new(n, edges)?;
    Ok((tokens, parse))
}
