#![allow(dead_code)]

use padic_index::graph::Graph;
use padic_index::mumford::reduction_graph;

/// Trees, cycles, complete graphs and disconnected unions.
pub fn library() -> Vec<(&'static str, Graph)> {
    vec![
        ("path4", Graph::path(4)),
        ("star3", Graph::star(3)),
        ("cycle3", Graph::cycle(3)),
        ("cycle5", Graph::cycle(5)),
        ("complete4", Graph::complete(4)),
        ("complete5", Graph::complete(5)),
        ("cycle4+loops", Graph::cycle(4).with_loops_everywhere()),
        ("garland2", reduction_graph(2).unwrap()),
        (
            "path2+path2",
            Graph::path(2).disjoint_union(&Graph::path(2)),
        ),
        (
            "cycle3+path2",
            Graph::cycle(3).disjoint_union(&Graph::path(2)),
        ),
    ]
}

/// The three graphs used for index checks, with loops on every vertex.
pub fn index_graphs() -> Vec<(&'static str, Graph, i64)> {
    vec![
        ("cycle4", Graph::cycle(4).with_loops_everywhere(), 0),
        ("garland2", reduction_graph(2).unwrap(), -1),
        (
            "two looped edges",
            Graph::path(2)
                .disjoint_union(&Graph::path(2))
                .with_loops_everywhere(),
            2,
        ),
    ]
}

pub fn single_looped_vertex() -> Graph {
    Graph::from_names(&["v"], &[], &["v"]).unwrap()
}
