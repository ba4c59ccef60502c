mod common;

use num_bigint::BigInt;
use num_rational::BigRational;
use padic_index::embedding::{auto_embed, discretize, scaled_embed, EmbeddedGraph, MeasureMode};
use padic_index::graph::Graph;
use padic_index::heat::{index_estimate, solve_cauchy_with, IndexConfig};
use padic_index::operators::{
    assemble_coboundary, assemble_vertex_operator, edge_laplacian, vertex_graph_part, vertex_inner,
    AssemblyParams, Convention,
};
use padic_index::padic::{padic_abs, Ball, BallRelation, CompactOpen};
use padic_index::spectral::{
    eigendecompose, is_sub_multiset, nonzero_spectra_agree, spectrum, KernelTol,
};
use proptest::prelude::*;

fn rational(n: i64, shift: u32, p: u32) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(p).pow(shift))
}

fn prime() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![2u32, 3, 5, 7])
}

/// Graphs on 2..=6 vertices; vertices left untouched by edges get a loop.
fn graph() -> impl Strategy<Value = Graph> {
    (2usize..=6).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let m = pairs.len();
        (
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), m),
        )
            .prop_map(move |(keep, loops, flip)| {
                let edges: Vec<(usize, usize)> = pairs
                    .iter()
                    .zip(&keep)
                    .zip(&flip)
                    .filter(|((_, &k), _)| k)
                    .map(|((&(a, b), _), &f)| if f { (b, a) } else { (a, b) })
                    .collect();
                let loops: Vec<usize> = (0..n)
                    .filter(|&v| loops[v] || !edges.iter().any(|&(a, b)| a == v || b == v))
                    .collect();
                Graph::new((0..n).map(|i| format!("v{i}")).collect(), edges, loops).unwrap()
            })
    })
}

fn d_matrix(
    emb: &EmbeddedGraph,
    level: i32,
    params: &AssemblyParams,
) -> (padic_index::operators::OperatorMatrix, f64) {
    let disc = discretize(emb, level, params.measure).unwrap();
    (
        assemble_vertex_operator(emb, &disc, params).unwrap(),
        disc.cell_mass,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn strong_triangle_inequality(p in prime(), a in -500i64..500, b in -500i64..500, c in -500i64..500, s in 0u32..3) {
        let (x, y, z) = (rational(a, s, p), rational(b, 0, p), rational(c, 1, p));
        let abs = |u: &BigRational, v: &BigRational| {
            let d = u - v;
            if d == BigRational::from_integer(0.into()) { 0.0 } else { padic_abs(&d, p).unwrap().value }
        };
        prop_assert!(abs(&x, &z) <= abs(&x, &y).max(abs(&y, &z)));
        // isosceles: the two largest sides agree
        let mut sides = [abs(&x, &y), abs(&y, &z), abs(&x, &z)];
        sides.sort_by(f64::total_cmp);
        prop_assert_eq!(sides[1], sides[2]);
    }

    #[test]
    fn balls_nest_or_are_disjoint(p in prime(), a in -200i64..200, b in -200i64..200, k1 in -1i32..4, k2 in -1i32..4) {
        let x = Ball::new(p, &rational(a, 1, p), k1).unwrap();
        let y = Ball::new(p, &rational(b, 1, p), k2).unwrap();
        match x.relation(&y).unwrap() {
            BallRelation::Overlap => prop_assert!(x.contains(&y) || y.contains(&x)),
            BallRelation::Disjoint(e) => {
                prop_assert!(!x.contains(&y) && !y.contains(&x));
                // every pair of points realizes the same distance
                let d = padic_abs(&(x.center() - y.center()), p).unwrap();
                prop_assert_eq!(-d.exponent, e);
                prop_assert!(e < k1.min(k2));
            }
        }
    }

    #[test]
    fn partitions_preserve_measure(p in prime(), a in -100i64..100, k in -1i32..2, extra in 0i32..3) {
        let ball = Ball::new(p, &rational(a, 0, p), k).unwrap();
        let cells = ball.partition(k + extra).unwrap();
        prop_assert_eq!(cells.len(), (p as usize).pow(extra as u32));
        let total: BigRational = cells.iter().map(Ball::measure).sum();
        prop_assert_eq!(total, ball.measure());
        prop_assert!(cells.iter().all(|c| ball.contains(c)));
        let set = CompactOpen::new(p, cells).unwrap();
        prop_assert_eq!(set.balls(), &[ball][..]);
    }

    #[test]
    fn holed_disc_measure(p in prime(), hole in 0i64..50, depth in 1i32..4) {
        let outer = Ball::unit(p).unwrap();
        let h = Ball::from_integer(p, hole, depth).unwrap();
        let set = CompactOpen::ball_minus(&outer, std::slice::from_ref(&h)).unwrap();
        prop_assert_eq!(set.measure() + h.measure(), outer.measure());
        prop_assert!(!set.contains_ball(&h));
    }

    #[test]
    fn center_strings_round_trip(p in prime(), a in -1000i64..1000, s in 0u32..3, k in -2i32..5) {
        let ball = Ball::new(p, &rational(a, s, p), k).unwrap();
        let text = ball.center_string().unwrap();
        prop_assert_eq!(Ball::from_center_string(p, &text, k).unwrap(), ball);
    }

    #[test]
    fn graph_json_round_trips(g in graph()) {
        let text = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<Graph>(&text).unwrap(), g);
    }

    #[test]
    fn vertex_operator_is_a_symmetric_generator(
        g in graph(),
        p in prime(),
        alpha in 0.3f64..2.0,
        extra in 0i32..2,
        counting in any::<bool>(),
        compositional in any::<bool>(),
    ) {
        let emb = auto_embed(&g, p, None).unwrap();
        let params = AssemblyParams::new(alpha)
            .with_measure(if counting { MeasureMode::Counting } else { MeasureMode::Haar })
            .with_convention(if compositional { Convention::Compositional } else { Convention::Integral });
        let (d, _) = d_matrix(&emb, emb.min_level().max(1) + extra, &params);
        prop_assume!(d.dim() <= 200);
        prop_assert!(d.is_symmetric());
        let scale = d.max_abs().max(1.0);
        for row in d.entries.row_iter() {
            prop_assert!(row.sum().abs() <= 1e-12 * scale);
        }
        let s = spectrum(&d, KernelTol::Auto).unwrap();
        prop_assert!(s.eigenvalues[0] >= -s.kernel_tol);
        prop_assert_eq!(s.kernel_dim(), g.betti_numbers().0);
    }

    #[test]
    fn betti_kernels_and_singular_values(g in graph(), p in prime(), alpha in 0.3f64..2.0) {
        let emb = auto_embed(&g, p, None).unwrap();
        let a = assemble_coboundary(&emb, alpha).unwrap();
        let v = spectrum(&vertex_graph_part(&a), KernelTol::Auto).unwrap();
        let e = spectrum(&edge_laplacian(&a), KernelTol::Auto).unwrap();
        let (b0, b1) = g.betti_numbers();
        prop_assert_eq!(v.kernel_dim(), b0);
        prop_assert_eq!(e.kernel_dim(), b1);
        prop_assert!(nonzero_spectra_agree(&v, &e));
    }

    #[test]
    fn orientation_does_not_matter(g in graph(), which in any::<prop::sample::Index>()) {
        prop_assume!(g.num_simple_edges() > 0);
        let e = which.index(g.num_simple_edges());
        let emb = auto_embed(&g, 3, None).unwrap();
        let flipped = emb.with_graph(g.flip_edge(e)).unwrap();
        let a = assemble_coboundary(&emb, 1.0).unwrap();
        let b = assemble_coboundary(&flipped, 1.0).unwrap();
        let sa = spectrum(&edge_laplacian(&a), KernelTol::Auto).unwrap();
        let sb = spectrum(&edge_laplacian(&b), KernelTol::Auto).unwrap();
        prop_assert!(is_sub_multiset(&sa, &sb) && is_sub_multiset(&sb, &sa));
        let va = vertex_graph_part(&a).entries;
        let vb = vertex_graph_part(&b).entries;
        prop_assert!((va - vb).abs().max() < 1e-14);
        let level = emb.min_level() + 1;
        let (da, _) = d_matrix(&emb, level, &AssemblyParams::new(1.0));
        let (db, _) = d_matrix(&flipped, level, &AssemblyParams::new(1.0));
        prop_assert!((da.entries - db.entries).abs().max() < 1e-14);
    }

    #[test]
    fn residual_is_the_rest_of_the_vertex_spectrum(g in graph(), alpha in 0.3f64..2.0) {
        let emb = scaled_embed(&g, 3, 0).unwrap();
        let cfg = IndexConfig { alpha, level: 1, ..IndexConfig::default() };
        let est = index_estimate(&emb, &cfg).unwrap();
        let residual = est.spec_vertex.residual();
        prop_assert_eq!(residual.len(), est.spec_vertex.len() - g.num_vertices());
        prop_assert!(residual.iter().all(|&l| l > 0.0));
        prop_assert_eq!(est.chi, g.euler_characteristic());
        let chi = g.euler_characteristic() as f64;
        let diff = &est.series.difference;
        prop_assert!(diff.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(diff.iter().all(|&x| x >= chi - 1e-9));
    }

    #[test]
    fn levels_nest(g in graph(), alpha in 0.3f64..2.0) {
        let emb = scaled_embed(&g, 3, 0).unwrap();
        let params = AssemblyParams::new(alpha);
        let s1 = spectrum(&d_matrix(&emb, 1, &params).0, KernelTol::Auto).unwrap();
        let s2 = spectrum(&d_matrix(&emb, 2, &params).0, KernelTol::Auto).unwrap();
        prop_assert!(is_sub_multiset(&s1, &s2));
    }

    #[test]
    fn heat_semigroup(g in graph(), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0, seed in any::<u64>()) {
        let emb = auto_embed(&g, 3, None).unwrap();
        let disc = discretize(&emb, emb.min_level() + 1, MeasureMode::Haar).unwrap();
        let d = assemble_vertex_operator(&emb, &disc, &AssemblyParams::new(1.0)).unwrap();
        let dec = eigendecompose(&d, KernelTol::Auto).unwrap();
        let n = d.dim();
        let f0: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32 * 7) % 1000) as f64 / 500.0) - 1.0).collect();
        let same = solve_cauchy_with(&dec, &f0, 0.0).unwrap();
        prop_assert!(same.iter().zip(&f0).all(|(a, b)| (a - b).abs() < 1e-12));
        let two_steps = solve_cauchy_with(&dec, &solve_cauchy_with(&dec, &f0, t1).unwrap(), t2).unwrap();
        let one_step = solve_cauchy_with(&dec, &f0, t1 + t2).unwrap();
        prop_assert!(two_steps.iter().zip(&one_step).all(|(a, b)| (a - b).abs() < 1e-9));
        let ones = vec![1.0; n];
        let mass0 = vertex_inner(&disc, &ones, &f0);
        let mass1 = vertex_inner(&disc, &ones, &one_step);
        prop_assert!((mass0 - mass1).abs() < 1e-12);
        // contraction in the weighted norm
        let norm = |f: &[f64]| vertex_inner(&disc, f, f).sqrt();
        prop_assert!(norm(&one_step) <= norm(&f0) + 1e-12);
    }
}

#[test]
fn library_graphs_pass_validation() {
    for (name, g) in common::library() {
        assert!(g.validate().is_ok(), "{name}");
    }
}
