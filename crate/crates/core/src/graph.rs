//! Finite graphs with at most one loop-edge per vertex.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("vertex index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertex(String),
    #[error("invalid graph: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    DuplicateEdge {
        a: String,
        b: String,
    },
    SelfPair {
        vertex: String,
    },
    DuplicateLoop {
        vertex: String,
    },
    /// Points of such a vertex are isolated at every level and inflate the
    /// kernel of the level operator beyond `b0`.
    IsolatedLoopless {
        vertex: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateEdge { a, b } => write!(f, "duplicate edge {a}-{b}"),
            Violation::SelfPair { vertex } => {
                write!(f, "simple edge ({vertex},{vertex}) has equal endpoints")
            }
            Violation::DuplicateLoop { vertex } => write!(f, "more than one loop at {vertex}"),
            Violation::IsolatedLoopless { vertex } => {
                write!(
                    f,
                    "kernel inflation: vertex {vertex} is isolated and has no loop"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), GraphError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(GraphError::Invalid(self.violations))
        }
    }
}

/// Graph with positively oriented simple edges `(o(e), t(e))` and a set of
/// loop vertices. Orientation is the input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertices: Vec<String>,
    edges: Vec<(usize, usize)>,
    loops: Vec<usize>,
}

impl Graph {
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<(usize, usize)>,
        loops: Vec<usize>,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.as_str()) {
                return Err(GraphError::DuplicateVertex(v.clone()));
            }
        }
        let n = vertices.len();
        for &i in edges.iter().flat_map(|(a, b)| [a, b]).chain(&loops) {
            if i >= n {
                return Err(GraphError::IndexOutOfRange(i));
            }
        }
        Ok(Self {
            vertices,
            edges,
            loops,
        })
    }

    /// Builds a graph from vertex names.
    pub fn from_names(
        vertices: &[&str],
        edges: &[(&str, &str)],
        loops: &[&str],
    ) -> Result<Self, GraphError> {
        let vertices: Vec<String> = vertices.iter().map(|s| s.to_string()).collect();
        let index: HashMap<&str, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let look = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(s.to_string()))
        };
        let edges = edges
            .iter()
            .map(|(a, b)| Ok((look(a)?, look(b)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        let loops = loops
            .iter()
            .map(|s| look(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(vertices, edges, loops)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    /// Positively oriented simple edges `E+`.
    pub fn simple_edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_simple_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn loop_vertices(&self) -> &[usize] {
        &self.loops
    }

    pub fn has_loop(&self, v: usize) -> bool {
        self.loops.contains(&v)
    }

    pub fn loops_everywhere(&self) -> bool {
        (0..self.num_vertices()).all(|v| self.has_loop(v))
    }

    /// Vertex adjacency used for operator support: `v ~ w` via a simple edge
    /// in either orientation, or `v == w` with a loop.
    pub fn relation_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.num_vertices();
        let mut rel = vec![vec![false; n]; n];
        for &(a, b) in &self.edges {
            rel[a][b] = true;
            rel[b][a] = true;
        }
        for &v in &self.loops {
            rel[v][v] = true;
        }
        rel
    }

    /// Simple neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    /// `G'`: the same graph with every loop removed.
    pub fn without_loops(&self) -> Graph {
        Graph {
            loops: Vec::new(),
            ..self.clone()
        }
    }

    pub fn with_loops_everywhere(&self) -> Graph {
        Graph {
            loops: (0..self.num_vertices()).collect(),
            ..self.clone()
        }
    }

    /// Reverses the orientation of simple edge `e`.
    pub fn flip_edge(&self, e: usize) -> Graph {
        let mut g = self.clone();
        let (a, b) = g.edges[e];
        g.edges[e] = (b, a);
        g
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let name = |v: usize| self.vertices[v].clone();
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                violations.push(Violation::SelfPair { vertex: name(a) });
                continue;
            }
            if !seen.insert((a.min(b), a.max(b))) {
                violations.push(Violation::DuplicateEdge {
                    a: name(a),
                    b: name(b),
                });
            }
        }
        let mut looped = BTreeSet::new();
        for &v in &self.loops {
            if !looped.insert(v) {
                violations.push(Violation::DuplicateLoop { vertex: name(v) });
            }
        }
        for v in 0..self.num_vertices() {
            let touched = self
                .edges
                .iter()
                .any(|&(a, b)| a != b && (a == v || b == v));
            if !touched && !looped.contains(&v) {
                violations.push(Violation::IsolatedLoopless { vertex: name(v) });
            }
        }
        ValidationReport { violations }
    }

    /// `(b0, b1)` of `G'`, by union-find.
    pub fn betti_numbers(&self) -> (usize, usize) {
        let n = self.num_vertices();
        let mut uf = UnionFind::<usize>::new(n);
        let mut merges = 0;
        for &(a, b) in &self.edges {
            if uf.union(a, b) {
                merges += 1;
            }
        }
        let b0 = n - merges;
        // |E+| - |V| + b0; never negative on a simple graph.
        let b1 = self.edges.len() + b0 - n;
        (b0, b1)
    }

    /// `chi(G') = |V| - |E+|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.edges.len() as i64
    }

    /// Path `v0 - v1 - ... - v(n-1)`.
    pub fn path(n: usize) -> Graph {
        Self::numbered(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "a cycle needs at least 3 vertices");
        Self::numbered(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Self::numbered(n, edges)
    }

    /// Star with centre `v0` and `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        Self::numbered(leaves + 1, (1..=leaves).map(|i| (0, i)).collect())
    }

    /// Disjoint union; vertices of `other` are renamed with a suffix.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let shift = self.num_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend(other.vertices.iter().map(|v| format!("{v}'")));
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|&(a, b)| (a + shift, b + shift)));
        let mut loops = self.loops.clone();
        loops.extend(other.loops.iter().map(|&v| v + shift));
        Graph::new(vertices, edges, loops).expect("suffixed names are unique")
    }

    fn numbered(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        let vertices = (0..n).map(|i| format!("v{i}")).collect();
        Graph::new(vertices, edges, Vec::new()).expect("indices are in range")
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<String>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    loops: Vec<String>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphFile {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (self.vertices[a].clone(), self.vertices[b].clone()))
                .collect(),
            loops: self
                .loops
                .iter()
                .map(|&v| self.vertices[v].clone())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let f = GraphFile::deserialize(deserializer)?;
        let vertices: Vec<&str> = f.vertices.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = f
            .edges
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let loops: Vec<&str> = f.loops.iter().map(String::as_str).collect();
        Graph::from_names(&vertices, &edges, &loops).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn betti_examples() {
        assert_eq!(Graph::path(3).betti_numbers(), (1, 0));
        assert_eq!(Graph::cycle(4).betti_numbers(), (1, 1));
        let two = Graph::complete(3).disjoint_union(&Graph::complete(3));
        assert_eq!(two.betti_numbers(), (2, 2));
    }

    #[test]
    fn euler_examples() {
        assert_eq!(Graph::cycle(4).euler_characteristic(), 0);
        assert_eq!(
            Graph::complete(3)
                .with_loops_everywhere()
                .euler_characteristic(),
            0
        );
        assert_eq!(Graph::complete(5).euler_characteristic(), -5);
    }

    #[test]
    fn validation() {
        assert!(Graph::path(3).validate().is_ok());

        let g = Graph::from_names(&["a", "b"], &[("a", "a"), ("a", "b")], &[]).unwrap();
        assert_eq!(
            g.validate().violations,
            vec![Violation::SelfPair { vertex: "a".into() }]
        );

        let g = Graph::from_names(&["a", "b", "c"], &[("a", "b")], &[]).unwrap();
        let report = g.validate();
        assert_eq!(
            report.violations,
            vec![Violation::IsolatedLoopless { vertex: "c".into() }]
        );
        assert!(report.violations[0]
            .to_string()
            .contains("kernel inflation"));

        let g = Graph::from_names(&["a", "b"], &[("a", "b"), ("b", "a")], &["a", "a"]).unwrap();
        let v = g.validate().violations;
        assert!(v.contains(&Violation::DuplicateEdge {
            a: "b".into(),
            b: "a".into()
        }));
        assert!(v.contains(&Violation::DuplicateLoop { vertex: "a".into() }));

        // A looped isolated vertex is fine.
        let g = Graph::from_names(&["a"], &[], &["a"]).unwrap();
        assert!(g.validate().is_ok());
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Graph::from_names(&["a"], &[("a", "z")], &[]),
            Err(GraphError::UnknownVertex("z".into()))
        );
        assert_eq!(
            Graph::from_names(&["a", "a"], &[], &[]),
            Err(GraphError::DuplicateVertex("a".into()))
        );
        assert_eq!(
            Graph::new(vec!["a".into()], vec![(0, 3)], vec![]),
            Err(GraphError::IndexOutOfRange(3))
        );
    }

    #[test]
    fn file_format() {
        let json = r#"{"vertices":["a","b","c"],"edges":[["a","b"],["b","c"]],"loops":["a"]}"#;
        let g: Graph = serde_json::from_str(json).unwrap();
        assert_eq!(g.simple_edges(), &[(0, 1), (1, 2)]);
        assert!(g.has_loop(0) && !g.has_loop(1));
        assert_eq!(serde_json::to_string(&g).unwrap(), json);
    }

    #[test]
    fn loops_do_not_change_betti() {
        let g = Graph::cycle(5);
        assert_eq!(g.with_loops_everywhere().betti_numbers(), g.betti_numbers());
        assert_eq!(g.with_loops_everywhere().without_loops(), g);
    }
}
