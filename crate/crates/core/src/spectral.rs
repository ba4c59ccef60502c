//! Symmetric eigendecomposition, kernel counting, closed-form wavelet
//! eigenvalues, and the split of `Spec(D_l)` into graph and residual parts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddedGraph;
use crate::operators::OperatorMatrix;

/// Relative tolerance for multiset comparisons of eigenvalues.
pub const MATCH_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("vertex set of {0:?} is not a single ball")]
    NotSingleBall(String),
    #[error("embedding is not well separated")]
    NotWellSeparated,
    #[error("support exponent {d} is coarser than the vertex ball exponent {r}")]
    SupportTooLarge { d: i32, r: i32 },
    #[error("alpha must be positive, got {0}")]
    AlphaNotPositive(f64),
    #[error("vertex index {0} out of range")]
    UnknownVertex(usize),
    #[error("eigenvalue {0} of the graph part has no partner in the vertex spectrum")]
    NotSubMultiset(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum KernelTol {
    /// `1e-8 * max(1, lambda_max)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending, with multiplicity.
    pub eigenvalues: Vec<f64>,
    pub kernel_tol: f64,
    pub source: String,
    /// `true` marks eigenvalues outside the graph part.
    pub residual_mask: Vec<bool>,
}

impl Spectrum {
    pub fn from_values(
        mut eigenvalues: Vec<f64>,
        kernel_tol: KernelTol,
        source: impl Into<String>,
    ) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let lmax = eigenvalues.last().copied().unwrap_or(0.0);
        let kernel_tol = match kernel_tol {
            KernelTol::Auto => 1e-8 * lmax.max(1.0),
            KernelTol::Fixed(t) => t,
        };
        let n = eigenvalues.len();
        Self {
            eigenvalues,
            kernel_tol,
            source: source.into(),
            residual_mask: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn is_kernel(&self, lambda: f64) -> bool {
        lambda.abs() < self.kernel_tol
    }

    pub fn kernel_dim(&self) -> usize {
        self.eigenvalues
            .iter()
            .filter(|&&l| self.is_kernel(l))
            .count()
    }

    pub fn nonzero(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .copied()
            .filter(|&l| !self.is_kernel(l))
            .collect()
    }

    pub fn residual(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.residual_mask)
            .filter_map(|(&l, &r)| r.then_some(l))
            .collect()
    }

    /// Distinct eigenvalues (clusters within [`MATCH_RTOL`], kernel values
    /// reported as exact zeros) with their multiplicities.
    pub fn multiplicities(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &l in &self.eigenvalues {
            let l = if self.is_kernel(l) { 0.0 } else { l };
            match out.last_mut() {
                Some((rep, count)) if close(*rep, l, 0.0) => *count += 1,
                _ => out.push((l, 1)),
            }
        }
        out
    }

    /// Number of eigenvalues within [`MATCH_RTOL`] of `lambda`.
    pub fn multiplicity_of(&self, lambda: f64) -> usize {
        self.eigenvalues
            .iter()
            .filter(|&&l| close(l, lambda, self.kernel_tol))
            .count()
    }
}

fn close(a: f64, b: f64, abs_tol: f64) -> bool {
    (a - b).abs() <= MATCH_RTOL * a.abs().max(b.abs()) || (a.abs() <= abs_tol && b.abs() <= abs_tol)
}

/// Full decomposition; `vectors` holds unit eigenvectors as columns in the
/// order of `spectrum.eigenvalues`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub spectrum: Spectrum,
    pub vectors: DMatrix<f64>,
}

pub fn eigendecompose(m: &OperatorMatrix, tol: KernelTol) -> Result<Decomposition, SpectralError> {
    if !m.is_symmetric() {
        return Err(SpectralError::NotSymmetric);
    }
    let n = m.dim();
    if n == 0 {
        return Ok(Decomposition {
            spectrum: Spectrum::from_values(Vec::new(), tol, format!("{:?}", m.kind)),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = m.entries.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        // Fix the sign so the output is reproducible.
        if let Some(&lead) = col.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(k, &col);
    }
    Ok(Decomposition {
        spectrum: Spectrum::from_values(values, tol, format!("{:?}", m.kind)),
        vectors,
    })
}

pub fn spectrum(m: &OperatorMatrix, tol: KernelTol) -> Result<Spectrum, SpectralError> {
    if !m.is_symmetric() {
        return Err(SpectralError::NotSymmetric);
    }
    let values = if m.dim() == 0 {
        Vec::new()
    } else {
        m.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    };
    Ok(Spectrum::from_values(values, tol, format!("{:?}", m.kind)))
}

/// Eigenvalue of `D^alpha` (Haar, integral convention) on a wavelet supported
/// on a ball `B` of radius `p^{-d}` inside the single-ball vertex set
/// `U_v = B(c, p^{-r})`, `d >= r`.
///
/// Without a loop at `v` this is `sum_{w ~ v} p^{2 alpha d_vw} mu(U_w)`,
/// independent of `d`. A loop adds the self-term `p^{d(2 alpha - 1)}` and the
/// shells of `U_v \ B`: `(1 - 1/p) sum_{j=r}^{d-1} p^{j(2 alpha - 1)}`.
pub fn kozyrev_eigenvalue(
    emb: &EmbeddedGraph,
    v: usize,
    d: i32,
    alpha: f64,
) -> Result<f64, SpectralError> {
    if !(alpha > 0.0) {
        return Err(SpectralError::AlphaNotPositive(alpha));
    }
    let g = emb.graph();
    if v >= g.num_vertices() {
        return Err(SpectralError::UnknownVertex(v));
    }
    if !emb.well_separated() {
        return Err(SpectralError::NotWellSeparated);
    }
    let set = emb.set(v);
    if set.balls().len() != 1 {
        return Err(SpectralError::NotSingleBall(g.vertex_name(v).to_string()));
    }
    let r = set.balls()[0].radius_exp();
    if d < r {
        return Err(SpectralError::SupportTooLarge { d, r });
    }
    let p = emb.prime() as f64;
    let sigma: f64 = g
        .neighbors(v)
        .map(|w| p.powf(2.0 * alpha * emb.distance_exponent(v, w) as f64) * emb.measure(w))
        .sum();
    if !g.has_loop(v) {
        return Ok(sigma);
    }
    let beta = 2.0 * alpha - 1.0;
    let shells: f64 = (r..d).map(|j| p.powf(j as f64 * beta)).sum::<f64>() * (1.0 - 1.0 / p);
    Ok(sigma + p.powf(d as f64 * beta) + shells)
}

/// Marks in `spec_d` the eigenvalues not matched by `graph_part`.
///
/// Matching is greedy: each graph eigenvalue, in ascending order, takes the
/// nearest unmatched eigenvalue of `spec_d` within [`MATCH_RTOL`] (kernel
/// values match kernel values).
pub fn residual_spectrum(
    spec_d: &Spectrum,
    graph_part: &Spectrum,
) -> Result<Spectrum, SpectralError> {
    let mut used = vec![false; spec_d.len()];
    for &g in &graph_part.eigenvalues {
        let g_kernel = graph_part.is_kernel(g);
        let best = spec_d
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, &l)| {
                !used[i]
                    && if g_kernel {
                        spec_d.is_kernel(l)
                    } else {
                        close(l, g, 0.0)
                    }
            })
            .min_by(|a, b| {
                (a.1 - g)
                    .abs()
                    .total_cmp(&(b.1 - g).abs())
                    .then(a.0.cmp(&b.0))
            })
            .map(|(i, _)| i);
        match best {
            Some(i) => used[i] = true,
            None => return Err(SpectralError::NotSubMultiset(g)),
        }
    }
    let mut out = spec_d.clone();
    out.residual_mask = used.iter().map(|u| !u).collect();
    Ok(out)
}

/// `true` when every value of `small` has a distinct partner in `large`.
pub fn is_sub_multiset(small: &Spectrum, large: &Spectrum) -> bool {
    residual_spectrum(large, small).is_ok()
}

/// Nonzero parts agree as multisets within [`MATCH_RTOL`].
pub fn nonzero_spectra_agree(a: &Spectrum, b: &Spectrum) -> bool {
    let x = a.nonzero();
    let y = b.nonzero();
    x.len() == y.len() && x.iter().zip(&y).all(|(&u, &v)| close(u, v, 0.0))
}

/// Spectrum JSON: `{"eigenvalues", "multiplicities", "kernelDim", "residual"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectrumJson {
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub kernel_dim: usize,
    pub residual: Vec<f64>,
}

impl From<&Spectrum> for SpectrumJson {
    fn from(s: &Spectrum) -> Self {
        let (eigenvalues, multiplicities) = s.multiplicities().into_iter().unzip();
        Self {
            eigenvalues,
            multiplicities,
            kernel_dim: s.kernel_dim(),
            residual: s.residual(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{auto_embed, discretize, MeasureMode};
    use crate::graph::Graph;
    use crate::operators::{
        assemble_coboundary, assemble_vertex_operator, edge_laplacian, vertex_graph_part,
        AssemblyParams, Convention, OperatorKind,
    };
    use crate::padic::{Ball, CompactOpen};
    use approx::assert_relative_eq;

    fn op(entries: DMatrix<f64>) -> OperatorMatrix {
        let n = entries.nrows();
        OperatorMatrix {
            kind: OperatorKind::VertexLaplacian,
            entries,
            row_basis: vec![String::new(); n],
            col_basis: vec![String::new(); n],
            measure: MeasureMode::Haar,
            convention: Convention::Integral,
            alpha: 1.0,
            symmetric: true,
            fallback: false,
        }
    }

    #[test]
    fn zero_matrix() {
        let s = spectrum(&op(DMatrix::zeros(4, 4)), KernelTol::Auto).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0; 4]);
        assert_eq!(s.kernel_dim(), 4);
        assert_eq!(s.multiplicities(), vec![(0.0, 4)]);
    }

    #[test]
    fn empty_matrix() {
        assert!(spectrum(&op(DMatrix::zeros(0, 0)), KernelTol::Auto)
            .unwrap()
            .is_empty());
        assert_eq!(
            eigendecompose(&op(DMatrix::zeros(0, 0)), KernelTol::Auto)
                .unwrap()
                .vectors
                .len(),
            0
        );
    }

    #[test]
    fn rejects_nonsymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(
            eigendecompose(&op(m), KernelTol::Auto),
            Err(SpectralError::NotSymmetric)
        );
    }

    #[test]
    fn decomposition_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let dec = eigendecompose(&op(m.clone()), KernelTol::Auto).unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            dec.spectrum.eigenvalues.clone(),
        ));
        let back = &dec.vectors * lam * dec.vectors.transpose();
        assert!((back - m).abs().max() < 1e-13);
        assert!(dec.spectrum.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cycle_edge_laplacian_kernel() {
        let emb = auto_embed(&Graph::cycle(4), 3, None).unwrap();
        let a = assemble_coboundary(&emb, 1.0).unwrap();
        let s = spectrum(&edge_laplacian(&a), KernelTol::Auto).unwrap();
        assert_eq!(s.kernel_dim(), 1);
    }

    #[test]
    fn k2_vertex_kernel() {
        let emb = auto_embed(&Graph::path(2), 3, None).unwrap();
        let disc = discretize(&emb, 2, MeasureMode::Haar).unwrap();
        let d = assemble_vertex_operator(&emb, &disc, &AssemblyParams::new(1.0)).unwrap();
        assert_eq!(spectrum(&d, KernelTol::Auto).unwrap().kernel_dim(), 1);
    }

    #[test]
    fn kozyrev_no_loop() {
        let emb = auto_embed(&Graph::path(2), 3, None).unwrap();
        for d in 1..4 {
            assert_relative_eq!(
                kozyrev_eigenvalue(&emb, 0, d, 1.0).unwrap(),
                1.0 / 3.0,
                epsilon = 1e-15
            );
        }
        assert!(matches!(
            kozyrev_eigenvalue(&emb, 0, 0, 1.0),
            Err(SpectralError::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn kozyrev_loop() {
        let g = Graph::from_names(&["a"], &[], &["a"]).unwrap();
        let emb =
            EmbeddedGraph::new(g, 3, vec![CompactOpen::from_ball(Ball::unit(3).unwrap())]).unwrap();
        // d = r: empty shell sum, self term p^0
        assert_relative_eq!(
            kozyrev_eigenvalue(&emb, 0, 0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            kozyrev_eigenvalue(&emb, 0, 1, 1.0).unwrap(),
            3.0 + 2.0 / 3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            kozyrev_eigenvalue(&emb, 0, 2, 1.0).unwrap(),
            9.0 + 2.0 / 3.0 * (1.0 + 3.0),
            epsilon = 1e-13
        );
    }

    #[test]
    fn residual_split() {
        let emb = auto_embed(&Graph::path(2), 3, None).unwrap();
        let a = assemble_coboundary(&emb, 1.0).unwrap();
        let graph = spectrum(&vertex_graph_part(&a), KernelTol::Auto).unwrap();

        let disc = discretize(&emb, 2, MeasureMode::Haar).unwrap();
        let d = spectrum(
            &assemble_vertex_operator(&emb, &disc, &AssemblyParams::new(1.0)).unwrap(),
            KernelTol::Auto,
        )
        .unwrap();
        let split = residual_spectrum(&d, &graph).unwrap();
        let res = split.residual();
        assert_eq!(res.len(), 4);
        assert!(res.iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-12));

        let disc = discretize(&emb, 1, MeasureMode::Haar).unwrap();
        let d = spectrum(
            &assemble_vertex_operator(&emb, &disc, &AssemblyParams::new(1.0)).unwrap(),
            KernelTol::Auto,
        )
        .unwrap();
        assert!(residual_spectrum(&d, &graph).unwrap().residual().is_empty());

        let wrong = Spectrum::from_values(vec![0.0, 5.0], KernelTol::Auto, "x");
        assert!(matches!(
            residual_spectrum(&d, &wrong),
            Err(SpectralError::NotSubMultiset(_))
        ));
    }

    #[test]
    fn spectrum_json() {
        let s = Spectrum::from_values(vec![1.0, 0.0, 1.0 + 1e-12, 1e-12], KernelTol::Auto, "x");
        let j = SpectrumJson::from(&s);
        assert_eq!(j.eigenvalues, vec![0.0, 1.0]);
        assert_eq!(j.multiplicities, vec![2, 2]);
        assert_eq!(j.kernel_dim, 2);
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(serde_json::from_str::<SpectrumJson>(&text).unwrap(), j);
    }
}
