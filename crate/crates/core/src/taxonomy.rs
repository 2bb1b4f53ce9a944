//! Hypernym graph and path similarity.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("taxonomy line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// Undirected graph over lowercase terms, built from `child<TAB>parent` links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Taxonomy {
    index: HashMap<String, usize>,
    terms: Vec<String>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl Taxonomy {
    /// The hypernym links shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../resources/taxonomy.tsv")).expect("bundled taxonomy parses")
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let src = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&src)
    }

    pub fn parse(src: &str) -> Result<Self, TaxonomyError> {
        let mut tax = Taxonomy::default();
        for (i, line) in src.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(TaxonomyError::Malformed {
                    line: i + 1,
                    msg: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
            }
            let child = fields[0].trim().to_lowercase();
            let parent = fields[1].trim().to_lowercase();
            if child.is_empty() || parent.is_empty() {
                return Err(TaxonomyError::Malformed {
                    line: i + 1,
                    msg: "empty term".into(),
                });
            }
            if child == parent {
                return Err(TaxonomyError::Malformed {
                    line: i + 1,
                    msg: format!("self-loop on {child:?}"),
                });
            }
            tax.add_edge(&child, &parent);
        }
        Ok(tax)
    }

    fn node(&mut self, term: &str) -> usize {
        if let Some(&id) = self.index.get(term) {
            return id;
        }
        let id = self.terms.len();
        self.terms.push(term.to_string());
        self.adjacency.push(BTreeSet::new());
        self.index.insert(term.to_string(), id);
        id
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        let (a, b) = (self.node(a), self.node(b));
        if a != b {
            self.adjacency[a].insert(b);
            self.adjacency[b].insert(a);
        }
    }

    pub fn node_count(&self) -> usize {
        self.terms.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    /// Unweighted shortest-path length, `None` when either term is absent or disconnected.
    pub fn distance(&self, a: &str, b: &str) -> Option<usize> {
        let src = *self.index.get(a)?;
        let dst = *self.index.get(b)?;
        if src == dst {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.terms.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    if v == dst {
                        return Some(dist[v]);
                    }
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// `1 / (1 + d)`; identical strings score 1 even when absent from the graph.
    pub fn path_similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        match self.distance(a, b) {
            Some(d) => 1.0 / (1.0 + d as f64),
            None => 0.0,
        }
    }
}
