//! Sparse graph storage, the adjacency normalizations, connectivity, and the
//! on-disk dataset format.

mod components;
pub mod generate;
mod io;
mod normalize;
mod sparse;

use serde::{Deserialize, Serialize};

pub use components::{connected_components, Components};
pub use io::{load_graph, read_edge_list, save_graph, DatasetFiles, LoadedGraph};
pub use normalize::{degrees, normalize, NormalizationScheme};
pub use sparse::SparseMatrix;

use crate::dense::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// An undirected, unweighted attributed graph with a node-classification
/// split.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: SparseMatrix,
    features: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
    splits: Splits,
}

impl Graph {
    pub fn new(
        adjacency: SparseMatrix,
        features: Matrix,
        labels: Vec<usize>,
        splits: Splits,
    ) -> Result<Self> {
        let n = adjacency.n_rows();
        if !adjacency.is_square() {
            return Err(Error::dim(
                "Graph::new",
                "square adjacency",
                format!("{}x{}", n, adjacency.n_cols()),
            ));
        }
        if !adjacency.has_zero_diagonal() {
            return Err(Error::Domain("adjacency stores a self-loop".into()));
        }
        if !adjacency.is_symmetric(0.0) {
            return Err(Error::Domain("adjacency is not symmetric".into()));
        }
        if features.rows() != n {
            return Err(Error::dim("Graph::new features", n, features.rows()));
        }
        if labels.len() != n {
            return Err(Error::dim("Graph::new labels", n, labels.len()));
        }
        let mut seen = vec![false; n];
        for (name, part) in [
            ("train", &splits.train),
            ("val", &splits.val),
            ("test", &splits.test),
        ] {
            for &i in part {
                if i >= n {
                    return Err(Error::Domain(format!(
                        "{name} split index {i} out of range for {n} nodes"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Domain(format!(
                        "node {i} appears twice across splits"
                    )));
                }
            }
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            adjacency,
            features,
            labels,
            n_classes,
            splits,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.n_rows()
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n_nodes();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if perm.len() != n || check.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::Domain("not a permutation of the node set".into()));
        }
        let adjacency = SparseMatrix::from_triplets(
            n,
            n,
            self.adjacency
                .triplets()
                .map(|(i, j, v)| (perm[i], perm[j], v)),
        )?;
        let mut features = Matrix::zeros(n, self.n_features());
        let mut labels = vec![0; n];
        for i in 0..n {
            features.row_mut(perm[i]).copy_from_slice(self.features.row(i));
            labels[perm[i]] = self.labels[i];
        }
        let map = |v: &[usize]| v.iter().map(|&i| perm[i]).collect();
        let splits = Splits {
            train: map(&self.splits.train),
            val: map(&self.splits.val),
            test: map(&self.splits.test),
        };
        Graph::new(adjacency, features, labels, splits)
    }
}
