//! Task-relatedness graph and its signed incidence encoding.
//!
//! Tasks are numbered `1..=K` at the API boundary (edge lists in config files,
//! [`TaskGraph::from_edges`]) and `0..K` internally. Edge order is insertion
//! order, so the incidence matrix columns are reproducible.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected graph over `task_count` tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskGraph {
    task_count: usize,
    /// 0-based, smaller index first.
    edges: Vec<(usize, usize)>,
}

impl TaskGraph {
    /// Builds a graph from 1-based edge pairs. Pairs may be given in either
    /// order; they are stored smaller index first.
    pub fn from_edges(task_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if task_count == 0 {
            return Err(Error::invalid("task_count must be at least 1"));
        }
        let mut stored = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == 0 || b == 0 || a > task_count || b > task_count {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) references a task outside 1..={task_count}"
                )));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on task {a}")));
            }
            let e = (a.min(b) - 1, a.max(b) - 1);
            if stored.contains(&e) {
                return Err(Error::invalid(format!(
                    "duplicate edge ({}, {})",
                    e.0 + 1,
                    e.1 + 1
                )));
            }
            stored.push(e);
        }
        Ok(Self {
            task_count,
            edges: stored,
        })
    }

    /// Chain `1-2-...-K`: each task is linked to its predecessor and successor.
    pub fn chain(task_count: usize) -> Result<Self> {
        if task_count == 0 {
            return Err(Error::invalid("task_count must be at least 1"));
        }
        let edges = (0..task_count.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Ok(Self { task_count, edges })
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    /// Edges as 0-based pairs `(i, k)` with `i < k`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edges as 1-based pairs, the external numbering.
    pub fn edges_one_based(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(i, k)| (i + 1, k + 1)).collect()
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.task_count];
        for &(i, k) in &self.edges {
            deg[i] += 1;
            deg[k] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        build_incidence(self)
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian(self)
    }
}

/// `K x |E|` signed incidence matrix: column `j` has `+1` at the smaller
/// endpoint of edge `j` and `-1` at the larger one.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    entries: DMatrix<i8>,
}

impl IncidenceMatrix {
    pub fn task_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<i8> {
        &self.entries
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(f64::from)
    }

    /// `R R^T` in exact integer arithmetic.
    pub fn gram(&self) -> DMatrix<i64> {
        let r = self.entries.map(i64::from);
        &r * r.transpose()
    }

    /// Endpoints `(plus, minus)` of each column, 0-based.
    pub fn edge_endpoints(&self) -> Vec<(usize, usize)> {
        self.entries
            .column_iter()
            .map(|col| {
                let plus = col.iter().position(|&v| v == 1).expect("column has +1");
                let minus = col.iter().position(|&v| v == -1).expect("column has -1");
                (plus, minus)
            })
            .collect()
    }
}

pub fn build_incidence(graph: &TaskGraph) -> IncidenceMatrix {
    let mut entries = DMatrix::<i8>::zeros(graph.task_count, graph.edges.len());
    for (j, &(i, k)) in graph.edges.iter().enumerate() {
        entries[(i, j)] = 1;
        entries[(k, j)] = -1;
    }
    IncidenceMatrix { entries }
}

/// Graph Laplacian `R R^T` (degree matrix minus adjacency).
pub fn laplacian(graph: &TaskGraph) -> DMatrix<f64> {
    build_incidence(graph).gram().map(|v| v as f64)
}
