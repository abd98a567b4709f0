use std::collections::VecDeque;

use super::SparseMatrix;
use crate::error::{Error, Result};

/// Component labelling of an undirected graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    /// Component id per node; ids are assigned in order of first appearance.
    pub labels: Vec<usize>,
    pub count: usize,
}

impl Components {
    /// Node lists, one per component, in id order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.count];
        for (node, &c) in self.labels.iter().enumerate() {
            groups[c].push(node);
        }
        groups
    }

    pub fn same(&self, u: usize, v: usize) -> bool {
        self.labels[u] == self.labels[v]
    }
}

/// Breadth-first labelling. Diagonal entries are ignored, so this works on
/// normalized matrices as well as raw adjacency.
pub fn connected_components(a: &SparseMatrix) -> Result<Components> {
    if !a.is_square() {
        return Err(Error::dim(
            "connected_components",
            "square matrix",
            format!("{}x{}", a.n_rows(), a.n_cols()),
        ));
    }
    let n = a.n_rows();
    let mut labels = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for (v, _) in a.row(u) {
                if labels[v] == usize::MAX {
                    labels[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    Ok(Components { labels, count })
}
