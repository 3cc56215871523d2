//! Every algorithm and metric against the exact active-set enumeration on
//! small random graphs, through the public solve API only.

use graphtv::graph::generate_random_graph;
use graphtv::testkit::exact_box_qp;
use graphtv::*;
use nalgebra::DMatrix;

fn dense_k(g: &WeightedGraph) -> DMatrix<f64> {
    DMatrix::from_fn(g.edge_count(), g.vertex_count(), |e, i| {
        let (a, b) = g.edge(e);
        g.weight(e) * if i == a { 1.0 } else if i == b { -1.0 } else { 0.0 }
    })
}

fn strategies() -> Vec<(PrecondStrategy, Option<usize>)> {
    vec![
        (PrecondStrategy::Identity, None),
        (PrecondStrategy::Diagonal(DiagonalKind::KKt), None),
        (PrecondStrategy::Diagonal(DiagonalKind::RowSum), None),
        (PrecondStrategy::NestedForest, None),
        (PrecondStrategy::InactivelyNested, Some(1)),
        (PrecondStrategy::InactivelyNested, Some(5)),
    ]
}

#[test]
fn all_solvers_reach_the_enumerated_solution() {
    for seed in 0..6u64 {
        let nv = 5 + seed as usize % 3;
        let g = generate_random_graph(nv, nv + 3, (0.1, 0.6), seed).unwrap();
        let f = graphtv::experiments::uniform_data(nv, seed + 100);
        let exact = exact_box_qp(&dense_k(&g), &f).unwrap();
        let term = RofDataTerm::new(f).unwrap();
        for algorithm in [Algorithm::Pg, Algorithm::Fista, Algorithm::Pdhg] {
            for (strategy, period) in strategies() {
                let config = SolveConfig {
                    algorithm,
                    strategy,
                    recondition_every: period,
                    tol: 1e-12,
                    max_iter: 100_000,
                    ..SolveConfig::default()
                };
                let r = solve(&g, &term, &config).unwrap();
                assert!(r.converged, "seed {seed} {algorithm:?} {strategy:?}");
                let err = r.u.iter().zip(&exact.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-6, "seed {seed} {algorithm:?} {strategy:?}: {err:e}");
                assert!(r.p.iter().all(|x| x.abs() <= 1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn traces_are_monotone_in_iteration_and_time() {
    let g = graphtv::graph::generate_grid(6, 5, 0.2).unwrap();
    let term = RofDataTerm::new(graphtv::experiments::uniform_data(30, 1)).unwrap();
    let r = solve(&g, &term, &SolveConfig::default()).unwrap();
    let rows: Vec<_> = r.trace.records.iter().collect();
    assert!(rows.len() > 1);
    for w in rows.windows(2) {
        assert!(w[1].iter > w[0].iter);
        assert!(w[1].time_s >= w[0].time_s);
    }
    assert_eq!(r.trace.to_csv(false).lines().count(), rows.len() + 1);
}
