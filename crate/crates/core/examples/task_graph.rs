//! Builds a small task graph and shows its incidence matrix and Laplacian.
//!
//! cargo run --example task_graph

use rlgr::TaskGraph;

fn main() -> rlgr::Result<()> {
    // Visits 1..4 of a study: consecutive visits are related, and the first
    // visit is also tied to the last.
    let graph = TaskGraph::from_edges(4, &[(1, 2), (2, 3), (3, 4), (1, 4)])?;
    let r = graph.incidence();
    println!("{} tasks, {} edges, max degree {}", r.task_count(), r.edge_count(), graph.max_degree());
    println!("incidence R (one column per edge):{}", r.to_f64());
    println!("Laplacian R R^T:{}", graph.laplacian());

    let chain = TaskGraph::chain(5)?;
    println!("chain over 5 tasks: edges {:?}", chain.edges_one_based());

    // Invalid graphs are rejected up front.
    for bad in [vec![(1, 1)], vec![(1, 2), (2, 1)], vec![(1, 9)]] {
        if let Err(e) = TaskGraph::from_edges(4, &bad) {
            println!("{bad:?}: {e}");
        }
    }
    Ok(())
}
