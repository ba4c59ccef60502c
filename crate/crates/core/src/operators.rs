//! Matrix assembly for the level-`l` vertex Laplacian, the gradient and
//! divergence pair, the weighted coboundary and its two Gram matrices, and
//! the advection operator.
//!
//! Point functions live on the cells of a [`LevelDiscretization`] with inner
//! product `<f, g>_V = m * sum f g`, where `m` is the cell mass. Antisymmetric
//! edge functions are stored once per unordered point pair (see
//! [`EdgePairSpace`]); the stored weight accounts for the implied reversed
//! value.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddedGraph, EmbeddingError, LevelDiscretization, MeasureMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("alpha must be positive, got {0}")]
    AlphaNotPositive(f64),
    #[error("discretization does not belong to this embedding")]
    DiscretizationMismatch,
    #[error("embedding is not well separated; use the level compression")]
    NotWellSeparated,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// How the simple-edge part of the vertex Laplacian is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Convention {
    /// `D f(x) = int (f(x) - f(y)) |x - y|^{-2 alpha} dy` over the edge support.
    #[default]
    Integral,
    /// `D = delta d` with the halved simple-edge gradient; the simple-edge
    /// part is half of the integral form, the loop part is identical.
    Compositional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssemblyParams {
    pub alpha: f64,
    pub measure: MeasureMode,
    pub convention: Convention,
}

impl AssemblyParams {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            measure: MeasureMode::Haar,
            convention: Convention::Integral,
        }
    }

    pub fn with_measure(self, measure: MeasureMode) -> Self {
        Self { measure, ..self }
    }

    pub fn with_convention(self, convention: Convention) -> Self {
        Self { convention, ..self }
    }

    fn check(&self) -> Result<(), OperatorError> {
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<(), OperatorError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(OperatorError::AlphaNotPositive(alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum OperatorKind {
    VertexLaplacian,
    Gradient,
    Divergence,
    Coboundary,
    EdgeLaplacian,
    VertexGraphPart,
    Advection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub entries: DMatrix<f64>,
    pub row_basis: Vec<String>,
    pub col_basis: Vec<String>,
    pub measure: MeasureMode,
    pub convention: Convention,
    pub alpha: f64,
    pub symmetric: bool,
    /// Built by level compression on an embedding that is not well separated.
    pub fallback: bool,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Symmetric to within `1e-12` of the largest entry.
    pub fn is_symmetric(&self) -> bool {
        let m = &self.entries;
        if m.nrows() != m.ncols() {
            return false;
        }
        let tol = 1e-12 * self.max_abs();
        (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
    }
}

/// Which block of `Omega_E` a stored point pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeBlock {
    /// `(x, y)` in `U_o(e) x U_t(e)`; the reversed value lives on `E-`.
    Forward(usize),
    /// Unordered pair `x < y` inside `U_v x U_v` for a loop at `v`.
    Loop(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgePair {
    pub x: usize,
    pub y: usize,
    pub block: EdgeBlock,
}

/// Basis of the level-`l` antisymmetric edge functions with the weights of
/// `<., .>_E`: `2 m^2` for a forward pair (both orientations), `m^2` for a
/// loop pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePairSpace {
    pub pairs: Vec<EdgePair>,
    pub weights: Vec<f64>,
}

impl EdgePairSpace {
    pub fn new(emb: &EmbeddedGraph, disc: &LevelDiscretization) -> Self {
        let g = emb.graph();
        let by_vertex = disc.points_by_vertex(g.num_vertices());
        let m2 = disc.cell_mass * disc.cell_mass;
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        for (e, &(o, t)) in g.simple_edges().iter().enumerate() {
            for &x in &by_vertex[o] {
                for &y in &by_vertex[t] {
                    pairs.push(EdgePair {
                        x,
                        y,
                        block: EdgeBlock::Forward(e),
                    });
                    weights.push(2.0 * m2);
                }
            }
        }
        for &v in g.loop_vertices() {
            let pts = &by_vertex[v];
            for (i, &x) in pts.iter().enumerate() {
                for &y in &pts[i + 1..] {
                    pairs.push(EdgePair {
                        x,
                        y,
                        block: EdgeBlock::Loop(v),
                    });
                    weights.push(m2);
                }
            }
        }
        Self { pairs, weights }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self, point_labels: &[String]) -> Vec<String> {
        self.pairs
            .iter()
            .map(|pr| format!("({},{})", point_labels[pr.x], point_labels[pr.y]))
            .collect()
    }

    pub fn inner(&self, h: &[f64], k: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(h.iter().zip(k))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }
}

/// `<f, g>_V` on a discretization.
pub fn vertex_inner(disc: &LevelDiscretization, f: &[f64], g: &[f64]) -> f64 {
    disc.cell_mass * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
}

fn check_disc(emb: &EmbeddedGraph, disc: &LevelDiscretization) -> Result<(), OperatorError> {
    let consistent = disc.p == emb.prime()
        && disc.points.iter().all(|pt| {
            pt.vertex < emb.graph().num_vertices() && emb.set(pt.vertex).contains_ball(&pt.ball)
        })
        && emb
            .sets()
            .iter()
            .map(|s| s.measure_f64() * (disc.p as f64).powi(disc.level))
            .sum::<f64>()
            .round() as usize
            == disc.len();
    if consistent {
        Ok(())
    } else {
        Err(OperatorError::DiscretizationMismatch)
    }
}

fn weight(p: u32, alpha: f64, exponent: i32) -> f64 {
    (p as f64).powf(alpha * exponent as f64)
}

/// Level-`l` vertex Laplacian `D_l`.
///
/// Integral convention: for related points `x != y` the entry is
/// `-m p^{2 alpha e(x,y)}`, the diagonal makes every row sum vanish. The
/// compositional convention is assembled as the product `delta d`.
pub fn assemble_vertex_operator(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    params: &AssemblyParams,
) -> Result<OperatorMatrix, OperatorError> {
    params.check()?;
    check_disc(emb, disc)?;
    let entries = match params.convention {
        Convention::Integral => integral_vertex_matrix(emb, disc, params.alpha),
        Convention::Compositional => {
            let d = gradient_entries(emb, disc, params.alpha);
            let delta = divergence_entries(disc, &d.0, &d.1);
            symmetrize(&delta * &d.0)
        }
    };
    let labels = disc.labels(emb.graph());
    Ok(OperatorMatrix {
        kind: OperatorKind::VertexLaplacian,
        entries,
        row_basis: labels.clone(),
        col_basis: labels,
        measure: disc.mode,
        convention: params.convention,
        alpha: params.alpha,
        symmetric: true,
        fallback: false,
    })
}

fn integral_vertex_matrix(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    alpha: f64,
) -> DMatrix<f64> {
    let rel = emb.graph().relation_matrix();
    let n = disc.len();
    let m = disc.cell_mass;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let vi = disc.points[i].vertex;
            let mut row = vec![0.0; n];
            let mut diag = 0.0;
            for j in 0..n {
                if j != i && rel[vi][disc.points[j].vertex] {
                    let a = -m * weight(disc.p, 2.0 * alpha, disc.exponent(i, j));
                    row[j] = a;
                    diag -= a;
                }
            }
            row[i] = diag;
            row
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn gradient_entries(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    alpha: f64,
) -> (DMatrix<f64>, EdgePairSpace) {
    let space = EdgePairSpace::new(emb, disc);
    let mut d = DMatrix::zeros(space.len(), disc.len());
    for (k, pr) in space.pairs.iter().enumerate() {
        let s = weight(disc.p, alpha, disc.exponent(pr.x, pr.y));
        let s = match pr.block {
            EdgeBlock::Forward(_) => 0.5 * s,
            EdgeBlock::Loop(_) => s,
        };
        d[(k, pr.x)] = s;
        d[(k, pr.y)] = -s;
    }
    (d, space)
}

// Adjoint of d: W_V^{-1} d^T W_E.
fn divergence_entries(
    disc: &LevelDiscretization,
    d: &DMatrix<f64>,
    space: &EdgePairSpace,
) -> DMatrix<f64> {
    let mut delta = d.transpose();
    for (k, w) in space.weights.iter().enumerate() {
        delta.column_mut(k).scale_mut(w / disc.cell_mass);
    }
    delta
}

/// Gradient `d` at level `l`: point functions to stored edge pairs. Forward
/// pairs carry `(f(x) - f(y)) p^{alpha e} / 2`, loop pairs
/// `(f(x) - f(y)) p^{alpha e}`.
pub fn assemble_gradient_matrix(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    alpha: f64,
) -> Result<(OperatorMatrix, EdgePairSpace), OperatorError> {
    check_alpha(alpha)?;
    check_disc(emb, disc)?;
    let (entries, space) = gradient_entries(emb, disc, alpha);
    let labels = disc.labels(emb.graph());
    Ok((
        OperatorMatrix {
            kind: OperatorKind::Gradient,
            entries,
            row_basis: space.labels(&labels),
            col_basis: labels,
            measure: disc.mode,
            convention: Convention::Compositional,
            alpha,
            symmetric: false,
            fallback: false,
        },
        space,
    ))
}

/// Divergence `delta`, the adjoint of [`assemble_gradient_matrix`] for
/// `<., .>_V` and `<., .>_E`.
pub fn assemble_divergence_matrix(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    alpha: f64,
) -> Result<(OperatorMatrix, EdgePairSpace), OperatorError> {
    let (d, space) = assemble_gradient_matrix(emb, disc, alpha)?;
    let entries = divergence_entries(disc, &d.entries, &space);
    Ok((
        OperatorMatrix {
            kind: OperatorKind::Divergence,
            entries,
            row_basis: d.col_basis,
            col_basis: d.row_basis,
            measure: disc.mode,
            convention: Convention::Compositional,
            alpha,
            symmetric: false,
            fallback: false,
        },
        space,
    ))
}

fn edge_labels(emb: &EmbeddedGraph) -> Vec<String> {
    let g = emb.graph();
    g.simple_edges()
        .iter()
        .map(|&(o, t)| format!("{}->{}", g.vertex_name(o), g.vertex_name(t)))
        .collect()
}

/// Weighted coboundary `A` (`|E+| x |V|`) in the orthonormal bases
/// `phi_v = mu_v^{-1/2} 1_{U_v}`, normalized to Haar measure and the
/// integral convention: `A[e, o] = sqrt(mu_t) p^{alpha d_e}`,
/// `A[e, t] = -sqrt(mu_o) p^{alpha d_e}`.
pub fn assemble_coboundary(
    emb: &EmbeddedGraph,
    alpha: f64,
) -> Result<OperatorMatrix, OperatorError> {
    check_alpha(alpha)?;
    if !emb.well_separated() {
        return Err(OperatorError::NotWellSeparated);
    }
    let g = emb.graph();
    let mut a = DMatrix::zeros(g.num_simple_edges(), g.num_vertices());
    for (e, &(o, t)) in g.simple_edges().iter().enumerate() {
        let s = weight(emb.prime(), alpha, emb.distance_exponent(o, t));
        a[(e, o)] = emb.measure(t).sqrt() * s;
        a[(e, t)] = -emb.measure(o).sqrt() * s;
    }
    Ok(coboundary_matrix(
        emb,
        a,
        alpha,
        MeasureMode::Haar,
        Convention::Integral,
        false,
    ))
}

fn coboundary_matrix(
    emb: &EmbeddedGraph,
    entries: DMatrix<f64>,
    alpha: f64,
    measure: MeasureMode,
    convention: Convention,
    fallback: bool,
) -> OperatorMatrix {
    OperatorMatrix {
        kind: OperatorKind::Coboundary,
        entries,
        row_basis: edge_labels(emb),
        col_basis: emb.graph().vertices().to_vec(),
        measure,
        convention,
        alpha,
        symmetric: false,
        fallback,
    }
}

/// Coboundary matching `D_l` in the discretization's measure mode and the
/// requested convention, so that `A^T A` is the compression of `D_l` to
/// vertex-constant functions. Well-separated embeddings use the closed form;
/// otherwise the edge masses `int int_{U_o x U_t} |x - y|^{-2 alpha}` are
/// summed over level cells and the result is flagged as a fallback.
pub fn assemble_coboundary_for_level(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    params: &AssemblyParams,
) -> Result<OperatorMatrix, OperatorError> {
    params.check()?;
    check_disc(emb, disc)?;
    let mut scale = match disc.mode {
        MeasureMode::Haar => 1.0,
        MeasureMode::Counting => (disc.p as f64).powi(disc.level),
    };
    if params.convention == Convention::Compositional {
        scale *= 0.5;
    }
    let (mut entries, fallback) = if emb.well_separated() {
        (assemble_coboundary(emb, params.alpha)?.entries, false)
    } else {
        (compressed_coboundary(emb, disc, params.alpha), true)
    };
    entries *= scale.sqrt();
    Ok(coboundary_matrix(
        emb,
        entries,
        params.alpha,
        disc.mode,
        params.convention,
        fallback,
    ))
}

fn compressed_coboundary(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    alpha: f64,
) -> DMatrix<f64> {
    let g = emb.graph();
    let by_vertex = disc.points_by_vertex(g.num_vertices());
    let haar = (disc.p as f64).powi(-disc.level);
    let mut a = DMatrix::zeros(g.num_simple_edges(), g.num_vertices());
    for (e, &(o, t)) in g.simple_edges().iter().enumerate() {
        let mass: f64 = by_vertex[o]
            .iter()
            .flat_map(|&x| by_vertex[t].iter().map(move |&y| (x, y)))
            .map(|(x, y)| haar * haar * weight(disc.p, 2.0 * alpha, disc.exponent(x, y)))
            .sum();
        a[(e, o)] = (mass / emb.measure(o)).sqrt();
        a[(e, t)] = -(mass / emb.measure(t)).sqrt();
    }
    a
}

fn gram(
    a: &OperatorMatrix,
    kind: OperatorKind,
    m: DMatrix<f64>,
    basis: Vec<String>,
) -> OperatorMatrix {
    OperatorMatrix {
        kind,
        entries: symmetrize(m),
        row_basis: basis.clone(),
        col_basis: basis,
        measure: a.measure,
        convention: a.convention,
        alpha: a.alpha,
        symmetric: true,
        fallback: a.fallback,
    }
}

/// Edge Laplacian `Delta_rho = A A^T` on edge-constant functions.
pub fn edge_laplacian(a: &OperatorMatrix) -> OperatorMatrix {
    let m = &a.entries * a.entries.transpose();
    gram(a, OperatorKind::EdgeLaplacian, m, a.row_basis.clone())
}

/// Graph part `A^T A` of the vertex Laplacian.
pub fn vertex_graph_part(a: &OperatorMatrix) -> OperatorMatrix {
    let m = a.entries.transpose() * &a.entries;
    gram(a, OperatorKind::VertexGraphPart, m, a.col_basis.clone())
}

/// Advection operator `D+ = delta+ d+`, with `delta+` the adjoint of the
/// forward gradient on `L^2(Omega_E+)`. Symmetric PSD with quadratic form
/// `m^2 / 4 * sum_{(x,y) in E+} (f(x) - f(y))^2 p^{2 alpha e}`.
pub fn advection_operator(
    emb: &EmbeddedGraph,
    disc: &LevelDiscretization,
    alpha: f64,
) -> Result<OperatorMatrix, OperatorError> {
    check_alpha(alpha)?;
    check_disc(emb, disc)?;
    let g = emb.graph();
    let by_vertex = disc.points_by_vertex(g.num_vertices());
    let n = disc.len();
    let mut entries = DMatrix::zeros(n, n);
    for &(o, t) in g.simple_edges() {
        for &x in &by_vertex[o] {
            for &y in &by_vertex[t] {
                let c = 0.25 * disc.cell_mass * weight(disc.p, 2.0 * alpha, disc.exponent(x, y));
                entries[(x, x)] += c;
                entries[(y, y)] += c;
                entries[(x, y)] -= c;
                entries[(y, x)] -= c;
            }
        }
    }
    let labels = disc.labels(g);
    Ok(OperatorMatrix {
        kind: OperatorKind::Advection,
        entries,
        row_basis: labels.clone(),
        col_basis: labels,
        measure: disc.mode,
        convention: Convention::Compositional,
        alpha,
        symmetric: true,
        fallback: false,
    })
}
