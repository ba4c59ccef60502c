//! Vertex sets in `Q_p` and their level-`l` discretization.
//!
//! Every vertex `v` is assigned a compact open `U_v`. The sets must be
//! pairwise disjoint; an embedding is *well separated* when every point pair
//! across two vertex sets realizes the set distance, which is what makes the
//! closed-form (vertex-level) operators exact.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::padic::{self, Ball, BallRelation, CompactOpen, PadicError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("expected {expected} vertex sets, got {got}")]
    SetCount { expected: usize, got: usize },
    #[error("vertex set of {0:?} is empty")]
    EmptySet(String),
    #[error("vertex sets of {0:?} and {1:?} overlap")]
    Overlap(String, String),
    #[error("{vertices} vertices do not fit into {p}^{radius_exp} balls")]
    TooManyVertices {
        vertices: usize,
        p: u32,
        radius_exp: i32,
    },
    #[error("vertex {0:?} has no set in the embedding file")]
    MissingSet(String),
    #[error("embedding file names unknown vertex {0:?}")]
    UnknownVertex(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MeasureMode {
    /// Cells weighted by their Haar mass `p^{-l}`.
    #[default]
    Haar,
    /// Unit weight per cell.
    Counting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairDistance {
    pub v: usize,
    pub w: usize,
    pub exponent: i32,
    pub well_separated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmbeddingReport {
    pub disjoint: bool,
    pub well_separated: bool,
    pub pairs: Vec<PairDistance>,
    pub warnings: Vec<String>,
}

/// Checks disjointness and computes the per-pair distance exponents.
pub fn validate_embedding(
    graph: &Graph,
    p: u32,
    sets: &[CompactOpen],
) -> Result<EmbeddingReport, EmbeddingError> {
    padic::check_prime(p)?;
    if sets.len() != graph.num_vertices() {
        return Err(EmbeddingError::SetCount {
            expected: graph.num_vertices(),
            got: sets.len(),
        });
    }
    for (v, s) in sets.iter().enumerate() {
        if s.is_empty() {
            return Err(EmbeddingError::EmptySet(graph.vertex_name(v).to_string()));
        }
        if s.prime() != p {
            return Err(PadicError::PrimeMismatch(p, s.prime()).into());
        }
    }
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for v in 0..sets.len() {
        for w in v + 1..sets.len() {
            let d = padic::set_distance(&sets[v], &sets[w]).map_err(|e| match e {
                PadicError::Overlap => EmbeddingError::Overlap(
                    graph.vertex_name(v).to_string(),
                    graph.vertex_name(w).to_string(),
                ),
                other => other.into(),
            })?;
            if !d.well_separated {
                warnings.push(format!(
                    "vertex sets of {} and {} are not well separated",
                    graph.vertex_name(v),
                    graph.vertex_name(w)
                ));
            }
            pairs.push(PairDistance {
                v,
                w,
                exponent: d.exponent,
                well_separated: d.well_separated,
            });
        }
    }
    Ok(EmbeddingReport {
        disjoint: true,
        well_separated: pairs.iter().all(|d| d.well_separated),
        pairs,
        warnings,
    })
}

/// A validated graph together with its vertex sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedGraph {
    graph: Graph,
    p: u32,
    sets: Vec<CompactOpen>,
    report: EmbeddingReport,
    // exponent[v][w] for v != w
    exponents: Vec<Vec<i32>>,
}

impl EmbeddedGraph {
    pub fn new(graph: Graph, p: u32, sets: Vec<CompactOpen>) -> Result<Self, EmbeddingError> {
        graph.validate().into_result()?;
        let report = validate_embedding(&graph, p, &sets)?;
        let n = graph.num_vertices();
        let mut exponents = vec![vec![0; n]; n];
        for d in &report.pairs {
            exponents[d.v][d.w] = d.exponent;
            exponents[d.w][d.v] = d.exponent;
        }
        Ok(Self {
            graph,
            p,
            sets,
            report,
            exponents,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn sets(&self) -> &[CompactOpen] {
        &self.sets
    }

    pub fn set(&self, v: usize) -> &CompactOpen {
        &self.sets[v]
    }

    pub fn report(&self) -> &EmbeddingReport {
        &self.report
    }

    pub fn well_separated(&self) -> bool {
        self.report.well_separated
    }

    /// `dist(U_v, U_w) = p^{-exponent}` for `v != w`.
    pub fn distance_exponent(&self, v: usize, w: usize) -> i32 {
        self.exponents[v][w]
    }

    pub fn measure(&self, v: usize) -> f64 {
        self.sets[v].measure_f64()
    }

    /// Largest radius exponent over all vertex sets: the coarsest usable level.
    pub fn min_level(&self) -> i32 {
        self.sets
            .iter()
            .filter_map(CompactOpen::max_radius_exp)
            .max()
            .unwrap_or(0)
    }

    /// Same vertex sets on a different graph over the same vertices.
    pub fn with_graph(&self, graph: Graph) -> Result<Self, EmbeddingError> {
        Self::new(graph, self.p, self.sets.clone())
    }
}

/// Smallest `r` with `p^r >= n`.
pub fn auto_radius_exp(p: u32, n: usize) -> i32 {
    let mut r = 0;
    let mut cap = 1usize;
    while cap < n {
        cap = cap.saturating_mul(p as usize);
        r += 1;
    }
    r
}

/// Vertex `i` (input order) goes to the ball of radius `p^{-r}` around `i`.
/// `None` picks `r = ceil(log_p |V|)`.
pub fn auto_embed(
    graph: &Graph,
    p: u32,
    radius_exp: Option<i32>,
) -> Result<EmbeddedGraph, EmbeddingError> {
    padic::check_prime(p)?;
    let n = graph.num_vertices();
    let r = radius_exp.unwrap_or_else(|| auto_radius_exp(p, n));
    if r < 0 || auto_radius_exp(p, n) > r {
        return Err(EmbeddingError::TooManyVertices {
            vertices: n,
            p,
            radius_exp: r,
        });
    }
    let sets = (0..n)
        .map(|i| Ball::from_integer(p, i as i64, r).map(CompactOpen::from_ball))
        .collect::<Result<Vec<_>, _>>()?;
    EmbeddedGraph::new(graph.clone(), p, sets)
}

/// The auto embedding rescaled by a power of `p` so that every vertex ball
/// has radius exponent `radius_exp`: vertex `i` goes to the ball around
/// `i * p^(radius_exp - r)` with `r = ceil(log_p |V|)`. With `radius_exp = 0`
/// every level `l >= 0` is available regardless of the vertex count.
pub fn scaled_embed(
    graph: &Graph,
    p: u32,
    radius_exp: i32,
) -> Result<EmbeddedGraph, EmbeddingError> {
    padic::check_prime(p)?;
    let n = graph.num_vertices();
    let shift = radius_exp - auto_radius_exp(p, n);
    let scale = padic::pow_rational(&BigRational::from_integer(BigInt::from(p)), shift);
    let sets = (0..n)
        .map(|i| {
            let c = BigRational::from_integer(BigInt::from(i)) * &scale;
            Ball::new(p, &c, radius_exp).map(CompactOpen::from_ball)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EmbeddedGraph::new(graph.clone(), p, sets)
}

/// Embedding file: `{"p": 3, "sets": {"v": [balls...]}}`; without `sets`
/// the auto embedding is used, with optional `radiusExp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmbeddingFile {
    pub p: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_exp: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<BTreeMap<String, Vec<Ball>>>,
}

impl EmbeddingFile {
    pub fn embed(&self, graph: &Graph) -> Result<EmbeddedGraph, EmbeddingError> {
        let Some(sets) = &self.sets else {
            return auto_embed(graph, self.p, self.radius_exp);
        };
        if let Some(name) = sets.keys().find(|k| graph.vertex_index(k).is_none()) {
            return Err(EmbeddingError::UnknownVertex(name.clone()));
        }
        let compact = graph
            .vertices()
            .iter()
            .map(|v| {
                let balls = sets
                    .get(v)
                    .ok_or_else(|| EmbeddingError::MissingSet(v.clone()))?;
                Ok(CompactOpen::new(self.p, balls.clone())?)
            })
            .collect::<Result<Vec<_>, EmbeddingError>>()?;
        EmbeddedGraph::new(graph.clone(), self.p, compact)
    }

    pub fn from_embedding(emb: &EmbeddedGraph) -> Self {
        let sets = emb
            .graph()
            .vertices()
            .iter()
            .zip(emb.sets())
            .map(|(v, s)| (v.clone(), s.balls().to_vec()))
            .collect();
        Self {
            p: emb.prime(),
            radius_exp: None,
            sets: Some(sets),
        }
    }
}

/// One level-`l` cell and the vertex owning it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Point {
    pub ball: Ball,
    pub vertex: usize,
}

/// Partition of `Omega_V` into balls of radius `p^{-level}`, vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiscretization {
    pub level: i32,
    pub p: u32,
    pub mode: MeasureMode,
    pub cell_mass: f64,
    pub points: Vec<Point>,
}

impl LevelDiscretization {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance exponent between two distinct points.
    pub fn exponent(&self, i: usize, j: usize) -> i32 {
        match self.points[i].ball.relation(&self.points[j].ball) {
            Ok(BallRelation::Disjoint(e)) => e,
            _ => unreachable!("level cells are pairwise disjoint"),
        }
    }

    pub fn labels(&self, graph: &Graph) -> Vec<String> {
        self.points
            .iter()
            .map(|pt| {
                let c = pt
                    .ball
                    .center_string()
                    .unwrap_or_else(|_| pt.ball.center().to_string());
                format!("{}:{}", graph.vertex_name(pt.vertex), c)
            })
            .collect()
    }

    /// Indices of the points owned by each vertex.
    pub fn points_by_vertex(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (i, pt) in self.points.iter().enumerate() {
            out[pt.vertex].push(i);
        }
        out
    }
}

pub fn discretize(
    emb: &EmbeddedGraph,
    level: i32,
    mode: MeasureMode,
) -> Result<LevelDiscretization, EmbeddingError> {
    let mut points = Vec::new();
    for (v, set) in emb.sets().iter().enumerate() {
        for ball in set.partition_level(level)? {
            points.push(Point { ball, vertex: v });
        }
        if points.len() > padic::MAX_CELLS {
            return Err(PadicError::TooManyCells.into());
        }
    }
    let cell_mass = match mode {
        MeasureMode::Haar => (emb.prime() as f64).powi(-level),
        MeasureMode::Counting => 1.0,
    };
    Ok(LevelDiscretization {
        level,
        p: emb.prime(),
        mode,
        cell_mass,
        points,
    })
}
