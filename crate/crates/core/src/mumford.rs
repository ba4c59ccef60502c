//! Graph families attached to a Mumford curve and the comparison of their
//! index estimates with closed-form Euler characteristics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{auto_embed, EmbeddingError};
use crate::graph::Graph;
use crate::heat::{index_estimate, Certificate, HeatError, IndexConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MumfordError {
    #[error("genus must be at least 1, got {0}")]
    GenusTooSmall(u32),
    #[error("tree vertex count must be at least 1, got {0}")]
    TooFewVertices(usize),
    #[error("tree-complete family needs a vertex count")]
    MissingVertexCount,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Heat(#[from] HeatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Genus-many independent cycles, loops everywhere.
    ReductionGraph,
    /// Complete graph on the `2g - 1` inner holes, loops everywhere.
    HolesComplete,
    /// Complete graph on the vertices of the hole dendrogram, loops everywhere.
    TreeComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MumfordSpec {
    pub family: Family,
    pub genus: u32,
    pub tree_vertex_count: Option<usize>,
}

impl MumfordSpec {
    pub fn new(family: Family, genus: u32) -> Self {
        Self {
            family,
            genus,
            tree_vertex_count: None,
        }
    }

    pub fn tree(genus: u32, vertices: usize) -> Self {
        Self {
            family: Family::TreeComplete,
            genus,
            tree_vertex_count: Some(vertices),
        }
    }

    /// Vertex count of the family graph (`N` for holes, `|V(T)|` for trees).
    pub fn size(&self) -> Result<usize, MumfordError> {
        if self.genus < 1 {
            return Err(MumfordError::GenusTooSmall(self.genus));
        }
        match self.family {
            Family::ReductionGraph => Ok(1 + 2 * self.genus as usize),
            Family::HolesComplete => Ok(2 * self.genus as usize - 1),
            Family::TreeComplete => match self.tree_vertex_count {
                None => Err(MumfordError::MissingVertexCount),
                Some(0) => Err(MumfordError::TooFewVertices(0)),
                Some(n) => Ok(n),
            },
        }
    }

    pub fn graph(&self) -> Result<Graph, MumfordError> {
        match self.family {
            Family::ReductionGraph => reduction_graph(self.genus),
            Family::HolesComplete => holes_complete_graph(self.genus),
            Family::TreeComplete => tree_complete_graph(self.size()?),
        }
    }

    pub fn closed_form(&self) -> Result<i64, MumfordError> {
        let n = self.size()? as i64;
        Ok(match self.family {
            Family::ReductionGraph => 1 - self.genus as i64,
            Family::HolesComplete | Family::TreeComplete => complete_chi(n),
        })
    }
}

/// `-n^2/2 + 3n/2`, the Euler characteristic of a complete graph on `n`
/// vertices.
pub fn complete_chi(n: i64) -> i64 {
    (3 * n - n * n) / 2
}

/// Garland of `g` triangles sharing vertex 0, with a loop on every vertex:
/// `2g + 1` vertices, `3g` simple edges, first Betti number `g`.
pub fn reduction_graph(g: u32) -> Result<Graph, MumfordError> {
    if g < 1 {
        return Err(MumfordError::GenusTooSmall(g));
    }
    let n = 1 + 2 * g as usize;
    let edges = (0..g as usize)
        .flat_map(|i| {
            let (a, b) = (2 * i + 1, 2 * i + 2);
            [(0, a), (a, b), (b, 0)]
        })
        .collect::<Vec<_>>();
    Ok(numbered(n, edges))
}

pub fn holes_complete_graph(g: u32) -> Result<Graph, MumfordError> {
    if g < 1 {
        return Err(MumfordError::GenusTooSmall(g));
    }
    Ok(Graph::complete(2 * g as usize - 1).with_loops_everywhere())
}

pub fn tree_complete_graph(vertices: usize) -> Result<Graph, MumfordError> {
    if vertices < 1 {
        return Err(MumfordError::TooFewVertices(vertices));
    }
    Ok(Graph::complete(vertices).with_loops_everywhere())
}

fn numbered(n: usize, edges: Vec<(usize, usize)>) -> Graph {
    let names = (0..n).map(|i| format!("v{i}")).collect();
    Graph::new(names, edges, (0..n).collect()).expect("builder produces a valid graph")
}

/// Inverts the closed form for the family. Reduction graphs give `g = 1 - chi`;
/// the complete families give the vertex count `n` with `chi = (3n - n^2)/2`
/// (for `chi = 1` both `n = 1` and `n = 2` fit; the larger is reported).
/// Holes additionally give `g = (n + 1)/2`.
pub fn invert(family: Family, chi: i64) -> (Option<usize>, Option<u32>) {
    match family {
        Family::ReductionGraph => {
            let g = 1 - chi;
            (None, (g >= 1).then_some(g as u32))
        }
        Family::HolesComplete => {
            // n^2 - 3n + 2 chi = 0 with n odd
            let n = complete_root(chi, |n| n % 2 == 1);
            (n, n.map(|n| n.div_ceil(2) as u32))
        }
        Family::TreeComplete => (complete_root(chi, |_| true), None),
    }
}

fn complete_root(chi: i64, accept: impl Fn(usize) -> bool) -> Option<usize> {
    // complete_chi is 1, 1 at n = 1, 2 and strictly decreasing afterwards
    (1usize..)
        .take_while(|&n| complete_chi(n as i64) >= chi)
        .filter(|&n| complete_chi(n as i64) == chi && accept(n))
        .max()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MumfordReport {
    pub family: Family,
    pub g: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub chi_estimate: i64,
    pub chi_closed_form: i64,
    pub matches_closed_form: bool,
    /// Vertex count recovered from the estimate (complete families only).
    #[serde(rename = "recoveredN")]
    pub recovered_n: Option<usize>,
    /// `None` where the family does not determine the genus.
    pub recovered_genus: Option<u32>,
    pub certificate: Certificate,
}

/// Builds the family graph, embeds it with the auto embedding, estimates
/// the index and compares it with the closed form.
pub fn mumford_index_report(
    spec: &MumfordSpec,
    p: u32,
    cfg: &IndexConfig,
) -> Result<MumfordReport, MumfordError> {
    let graph = spec.graph()?;
    let emb = auto_embed(&graph, p, None)?;
    let est = index_estimate(&emb, cfg)?;
    let closed = spec.closed_form()?;
    let (recovered_n, recovered_genus) = invert(spec.family, est.chi);
    Ok(MumfordReport {
        family: spec.family,
        g: spec.genus,
        n: spec.size()?,
        chi_estimate: est.chi,
        chi_closed_form: closed,
        matches_closed_form: est.chi == closed,
        recovered_n,
        recovered_genus,
        certificate: est.certificate,
    })
}
