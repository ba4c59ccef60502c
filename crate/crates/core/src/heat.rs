//! Heat traces, heat kernels, the Cauchy problem, and the trace-difference
//! index estimator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{discretize, EmbeddedGraph, EmbeddingError, MeasureMode};
use crate::operators::{
    assemble_coboundary_for_level, assemble_vertex_operator, edge_laplacian, vertex_graph_part,
    AssemblyParams, Convention, OperatorError, OperatorMatrix,
};
use crate::spectral::{self, Decomposition, KernelTol, SpectralError, Spectrum};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatError {
    #[error("time must be positive, got {0}")]
    TimeNotPositive(f64),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("dimension mismatch: operator has {expected} rows, function has {got} values")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tolerance must lie in (0, 0.5), got {0}")]
    BadTolerance(f64),
    #[error("level {level} is below the coarsest usable level {min}")]
    LevelTooSmall { level: i32, min: i32 },
    #[error("residual floor {0} is not positive (degenerate embedding)")]
    DegenerateResidual(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// `sum_lambda exp(-lambda t)` with multiplicity.
pub fn heat_trace(spec: &Spectrum, t: f64) -> Result<f64, HeatError> {
    if !(t > 0.0) {
        return Err(HeatError::TimeNotPositive(t));
    }
    Ok(trace_at(&spec.eigenvalues, t))
}

fn trace_at(values: &[f64], t: f64) -> f64 {
    values.iter().map(|&l| (-l * t).exp()).sum()
}

/// `p_t(x, y) = sum_lambda exp(-lambda t) f(x) f(y)` with eigenfunctions
/// orthonormal for the cell-mass weighted inner product, i.e.
/// `U exp(-t Lambda) U^T / cell_mass`.
pub fn heat_kernel_matrix(
    dec: &Decomposition,
    cell_mass: f64,
    t: f64,
) -> Result<DMatrix<f64>, HeatError> {
    if !(t > 0.0) {
        return Err(HeatError::TimeNotPositive(t));
    }
    let mut k = semigroup(dec, t) / cell_mass;
    let kt = k.transpose();
    k = (k + kt) * 0.5;
    Ok(k)
}

fn semigroup(dec: &Decomposition, t: f64) -> DMatrix<f64> {
    let decay = DVector::from_iterator(
        dec.spectrum.len(),
        dec.spectrum.eigenvalues.iter().map(|&l| (-l * t).exp()),
    );
    let mut scaled = dec.vectors.clone();
    for (mut col, &d) in scaled.column_iter_mut().zip(decay.iter()) {
        col *= d;
    }
    scaled * dec.vectors.transpose()
}

/// `exp(-t M) f0` through the spectral decomposition of `M`.
pub fn solve_cauchy(m: &OperatorMatrix, f0: &[f64], t: f64) -> Result<Vec<f64>, HeatError> {
    let dec = spectral::eigendecompose(m, KernelTol::Auto)?;
    solve_cauchy_with(&dec, f0, t)
}

/// As [`solve_cauchy`], reusing a decomposition.
pub fn solve_cauchy_with(dec: &Decomposition, f0: &[f64], t: f64) -> Result<Vec<f64>, HeatError> {
    let n = dec.vectors.nrows();
    if f0.len() != n {
        return Err(HeatError::DimensionMismatch {
            expected: n,
            got: f0.len(),
        });
    }
    if t < 0.0 || t.is_nan() {
        return Err(HeatError::NegativeTime(t));
    }
    let f = DVector::from_column_slice(f0);
    let mut coeffs = dec.vectors.tr_mul(&f);
    for (c, &l) in coeffs.iter_mut().zip(&dec.spectrum.eigenvalues) {
        *c *= (-l * t).exp();
    }
    Ok((&dec.vectors * coeffs).iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeatTraceSeries {
    pub times: Vec<f64>,
    pub trace_d: Vec<f64>,
    pub trace_edge: Vec<f64>,
    pub difference: Vec<f64>,
    /// Smallest positive residual eigenvalue; `None` for an empty residual.
    pub residual_floor: Option<f64>,
}

/// Evaluates both traces on a time grid; times must be positive.
pub fn trace_series(
    spec_d: &Spectrum,
    spec_edge: &Spectrum,
    times: &[f64],
    residual_floor: Option<f64>,
) -> Result<HeatTraceSeries, HeatError> {
    if let Some(&t) = times.iter().find(|&&t| !(t > 0.0)) {
        return Err(HeatError::TimeNotPositive(t));
    }
    let pairs: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            (
                trace_at(&spec_d.eigenvalues, t),
                trace_at(&spec_edge.eigenvalues, t),
            )
        })
        .collect();
    let (trace_d, trace_edge): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let difference = trace_d
        .iter()
        .zip(&trace_edge)
        .map(|(a, b)| a - b)
        .collect();
    Ok(HeatTraceSeries {
        times: times.to_vec(),
        trace_d,
        trace_edge,
        difference,
        residual_floor,
    })
}

/// `n` geometrically spaced times ending at `t_end`, spanning two decades.
pub fn geometric_grid(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..n)
            .map(|i| t_end * 10f64.powf(-2.0 * (n - 1 - i) as f64 / (n - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    pub alpha: f64,
    pub level: i32,
    pub measure: MeasureMode,
    pub convention: Convention,
    pub tol: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            level: 2,
            measure: MeasureMode::Haar,
            convention: Convention::Integral,
            tol: 1e-6,
        }
    }
}

impl IndexConfig {
    fn params(&self) -> AssemblyParams {
        AssemblyParams::new(self.alpha)
            .with_measure(self.measure)
            .with_convention(self.convention)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub level: i32,
    pub t_star: f64,
    pub difference: f64,
    pub chi_estimate: i64,
    /// `|difference(t*) - chi_estimate|`.
    pub gap: f64,
    pub tol: f64,
    pub passed: bool,
    /// `|V| - |E+|`, computed combinatorially.
    pub chi_ground_truth: i64,
    pub matches_ground_truth: bool,
    pub residual_floor: Option<f64>,
    pub residual_count: usize,
    pub kernel_dim_vertex: usize,
    pub kernel_dim_edge: usize,
    pub betti0: usize,
    pub betti1: usize,
    pub dim_vertex: usize,
    pub dim_edge: usize,
    /// Set when the embedding is not well separated: the coboundary is a
    /// compression and the floor is the smallest nonzero eigenvalue overall.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub chi: i64,
    pub series: HeatTraceSeries,
    pub certificate: Certificate,
    pub spec_vertex: Spectrum,
    pub spec_edge: Spectrum,
}

/// Number of points in the trace series attached to an estimate.
pub const SERIES_POINTS: usize = 20;

/// Trace-difference estimate of `chi(G') = |V| - |E+|` at one level.
pub fn index_estimate(emb: &EmbeddedGraph, cfg: &IndexConfig) -> Result<IndexEstimate, HeatError> {
    if !(cfg.tol > 0.0 && cfg.tol < 0.5) {
        return Err(HeatError::BadTolerance(cfg.tol));
    }
    let min = emb.min_level();
    if cfg.level < min {
        return Err(HeatError::LevelTooSmall {
            level: cfg.level,
            min,
        });
    }
    let params = cfg.params();
    let disc = discretize(emb, cfg.level, cfg.measure)?;
    let d = assemble_vertex_operator(emb, &disc, &params)?;
    let a = assemble_coboundary_for_level(emb, &disc, &params)?;
    let edge = edge_laplacian(&a);
    let graph_part = vertex_graph_part(&a);

    let (spec_d, (spec_edge, spec_graph)) = rayon::join(
        || spectral::spectrum(&d, KernelTol::Auto),
        || {
            (
                spectral::spectrum(&edge, KernelTol::Auto),
                spectral::spectrum(&graph_part, KernelTol::Auto),
            )
        },
    );
    let (mut spec_d, spec_edge, spec_graph) = (spec_d?, spec_edge?, spec_graph?);

    let fallback = a.fallback;
    let (residual_floor, residual_count) = if fallback {
        let floor = spec_d
            .nonzero()
            .into_iter()
            .chain(spec_edge.nonzero())
            .fold(f64::INFINITY, f64::min);
        let count = spec_d.len() - spec_d.kernel_dim();
        (floor.is_finite().then_some(floor), count)
    } else {
        spec_d = spectral::residual_spectrum(&spec_d, &spec_graph)?;
        let res = spec_d.residual();
        let floor = res.iter().copied().fold(f64::INFINITY, f64::min);
        (floor.is_finite().then_some(floor), res.len())
    };
    if let Some(f) = residual_floor {
        if !(f > 0.0) {
            return Err(HeatError::DegenerateResidual(f));
        }
    }

    let dim = (spec_d.len() + spec_edge.len()) as f64;
    let t_star = match residual_floor {
        Some(f) => ((dim / cfg.tol).ln() / f).max(1.0),
        None => 1.0,
    };
    let series = trace_series(
        &spec_d,
        &spec_edge,
        &geometric_grid(t_star, SERIES_POINTS),
        residual_floor,
    )?;
    let difference = *series.difference.last().expect("nonempty grid");
    let chi = difference.round() as i64;
    let gap = (difference - chi as f64).abs();
    let g = emb.graph();
    let (betti0, betti1) = g.betti_numbers();
    let truth = g.euler_characteristic();
    let certificate = Certificate {
        level: cfg.level,
        t_star,
        difference,
        chi_estimate: chi,
        gap,
        tol: cfg.tol,
        passed: gap < cfg.tol,
        chi_ground_truth: truth,
        matches_ground_truth: chi == truth,
        residual_floor,
        residual_count,
        kernel_dim_vertex: spec_d.kernel_dim(),
        kernel_dim_edge: spec_edge.kernel_dim(),
        betti0,
        betti1,
        dim_vertex: spec_d.len(),
        dim_edge: spec_edge.len(),
        fallback,
    };
    Ok(IndexEstimate {
        chi,
        series,
        certificate,
        spec_vertex: spec_d,
        spec_edge,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelLadder {
    pub estimates: Vec<IndexEstimate>,
}

impl LevelLadder {
    /// All levels agree on the estimate and every certificate passed.
    pub fn consistent(&self) -> bool {
        let first = self.estimates.first().map(|e| e.chi);
        self.estimates
            .iter()
            .all(|e| Some(e.chi) == first && e.certificate.passed)
    }

    pub fn chi(&self) -> Option<i64> {
        self.consistent().then(|| self.estimates[0].chi)
    }
}

/// Runs [`index_estimate`] at each level of `levels`.
pub fn index_ladder(
    emb: &EmbeddedGraph,
    cfg: &IndexConfig,
    levels: &[i32],
) -> Result<LevelLadder, HeatError> {
    let estimates = levels
        .iter()
        .map(|&level| index_estimate(emb, &IndexConfig { level, ..*cfg }))
        .collect::<Result<_, _>>()?;
    Ok(LevelLadder { estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{auto_embed, scaled_embed};
    use crate::graph::Graph;
    use crate::operators::AssemblyParams;
    use approx::assert_relative_eq;

    fn k2_d(level: i32) -> (OperatorMatrix, f64) {
        let emb = auto_embed(&Graph::path(2), 3, None).unwrap();
        let disc = discretize(&emb, level, MeasureMode::Haar).unwrap();
        (
            assemble_vertex_operator(&emb, &disc, &AssemblyParams::new(1.0)).unwrap(),
            disc.cell_mass,
        )
    }

    #[test]
    fn trace_examples() {
        let s = Spectrum::from_values(vec![0.0], KernelTol::Auto, "x");
        assert_eq!(heat_trace(&s, 7.0).unwrap(), 1.0);
        let s = Spectrum::from_values(vec![0.0, 2f64.ln()], KernelTol::Auto, "x");
        assert_relative_eq!(heat_trace(&s, 1.0).unwrap(), 1.5, epsilon = 1e-15);
        assert_eq!(heat_trace(&s, 0.0), Err(HeatError::TimeNotPositive(0.0)));
    }

    #[test]
    fn cauchy_eigenvector_and_constants() {
        let (d, _) = k2_d(1);
        let dec = spectral::eigendecompose(&d, KernelTol::Auto).unwrap();
        let top = dec.vectors.column(1).iter().copied().collect::<Vec<_>>();
        let lambda = dec.spectrum.eigenvalues[1];
        assert_relative_eq!(lambda, 2.0 / 3.0, epsilon = 1e-14);
        let out = solve_cauchy(&d, &top, 1.5).unwrap();
        for (o, f) in out.iter().zip(&top) {
            assert_relative_eq!(*o, f * (-lambda * 1.5).exp(), epsilon = 1e-14);
        }
        let ones = vec![1.0; 2];
        for t in [0.0, 0.3, 10.0] {
            for v in solve_cauchy(&d, &ones, t).unwrap() {
                assert_relative_eq!(v, 1.0, epsilon = 1e-13);
            }
        }
        assert!(matches!(
            solve_cauchy(&d, &[1.0], 1.0),
            Err(HeatError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            solve_cauchy(&d, &ones, -1.0),
            Err(HeatError::NegativeTime(_))
        ));
    }

    #[test]
    fn kernel_row_sums() {
        let (d, m) = k2_d(2);
        let dec = spectral::eigendecompose(&d, KernelTol::Auto).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let k = heat_kernel_matrix(&dec, m, t).unwrap();
            for row in k.row_iter() {
                assert_relative_eq!(row.sum() * m, 1.0, epsilon = 1e-12);
            }
        }
        let k = heat_kernel_matrix(&dec, m, 1e-9).unwrap();
        assert!((k * m - DMatrix::identity(6, 6)).abs().max() < 1e-8);
    }

    #[test]
    fn grid_shape() {
        let g = geometric_grid(50.0, 20);
        assert_eq!(g.len(), 20);
        assert_relative_eq!(g[0], 0.5, epsilon = 1e-12);
        assert_eq!(*g.last().unwrap(), 50.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cycle_with_loops() {
        let emb = auto_embed(&Graph::cycle(4).with_loops_everywhere(), 3, None).unwrap();
        let est = index_estimate(&emb, &IndexConfig::default()).unwrap();
        assert_eq!(est.chi, 0);
        assert!(est.certificate.passed && est.certificate.matches_ground_truth);
    }

    #[test]
    fn nonempty_residual() {
        let g = Graph::cycle(4).with_loops_everywhere();
        let emb = scaled_embed(&g, 3, 0).unwrap();
        let est = index_estimate(&emb, &IndexConfig::default()).unwrap();
        assert_eq!(est.chi, 0);
        assert_eq!(est.certificate.residual_count, 4 * 9 - 4);
        assert!(est.certificate.t_star > 1.0);
        assert!(est.certificate.gap < 1e-6);
    }

    #[test]
    fn two_components() {
        let g = Graph::disjoint_union(&Graph::path(2), &Graph::path(2)).with_loops_everywhere();
        let emb = auto_embed(&g, 3, None).unwrap();
        assert_eq!(
            index_estimate(&emb, &IndexConfig::default()).unwrap().chi,
            2
        );
    }

    #[test]
    fn ladder_and_modes() {
        let emb = scaled_embed(&Graph::cycle(4), 3, 0).unwrap();
        for measure in [MeasureMode::Haar, MeasureMode::Counting] {
            for convention in [Convention::Integral, Convention::Compositional] {
                let cfg = IndexConfig {
                    measure,
                    convention,
                    ..IndexConfig::default()
                };
                let ladder = index_ladder(&emb, &cfg, &[1, 2, 3]).unwrap();
                assert!(ladder.consistent());
                assert_eq!(ladder.chi(), Some(0));
            }
        }
    }

    #[test]
    fn annulus_falls_back() {
        use crate::padic::{Ball, CompactOpen};
        let hole = Ball::from_integer(3, 0, 2).unwrap();
        let annulus =
            CompactOpen::ball_minus(&Ball::unit(3).unwrap(), std::slice::from_ref(&hole)).unwrap();
        let emb = EmbeddedGraph::new(
            Graph::path(2),
            3,
            vec![annulus, CompactOpen::from_ball(hole)],
        )
        .unwrap();
        let cfg = IndexConfig {
            level: 3,
            ..IndexConfig::default()
        };
        let est = index_estimate(&emb, &cfg).unwrap();
        assert!(est.certificate.fallback);
        assert_eq!(est.chi, 1);
        assert!(est.certificate.passed);
    }

    #[test]
    fn rejects_bad_config() {
        let emb = auto_embed(&Graph::cycle(4), 3, None).unwrap();
        let cfg = IndexConfig {
            tol: 0.5,
            ..IndexConfig::default()
        };
        assert_eq!(
            index_estimate(&emb, &cfg).unwrap_err(),
            HeatError::BadTolerance(0.5)
        );
        let cfg = IndexConfig {
            level: 1,
            ..IndexConfig::default()
        };
        assert!(matches!(
            index_estimate(&emb, &cfg),
            Err(HeatError::LevelTooSmall { .. })
        ));
    }
}
