use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Graph, SparseMatrix, Splits};
use crate::dense::Matrix;
use crate::error::{Error, Result};

/// Paths of the four files that make up a dataset.
#[derive(Clone, Debug)]
pub struct DatasetFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

impl DatasetFiles {
    /// `graph.edges`, `features.csv`, `labels.csv` and `splits.json` under `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            edges: dir.join("graph.edges"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.csv"),
            splits: dir.join("splits.json"),
        }
    }
}

#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_features(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            return Err(load_err(path, lineno, "empty feature row"));
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| load_err(path, lineno, format!("bad real `{tok}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(load_err(
                    path,
                    lineno,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .map(|(idx, line)| {
            let tok = line.trim();
            tok.parse::<usize>()
                .map_err(|e| load_err(path, idx + 1, format!("bad label `{tok}`: {e}")))
        })
        .collect()
}

/// Parses an edge list. Ids must be below `n` when given. Self-loops are
/// skipped and reported as warnings.
pub fn read_edge_list(
    path: &Path,
    n: Option<usize>,
) -> Result<(Vec<(usize, usize)>, Vec<String>)> {
    let text = read(path)?;
    let mut edges = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|e| load_err(path, lineno, format!("bad node id `{tok}`: {e}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let [u, v] = ids[..] else {
            return Err(load_err(
                path,
                lineno,
                format!("expected 2 node ids, found {}", ids.len()),
            ));
        };
        if let Some(n) = n {
            if u >= n || v >= n {
                return Err(load_err(
                    path,
                    lineno,
                    format!("node id {} out of range for {n} nodes", u.max(v)),
                ));
            }
        }
        if u == v {
            let msg = format!("{}:{lineno}: self-loop on node {u} dropped", path.display());
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        edges.push((u, v));
    }
    Ok((edges, warnings))
}

/// Loads and cross-validates a dataset. Edges are symmetrized and
/// deduplicated; the node count comes from the feature file.
pub fn load_graph(files: &DatasetFiles) -> Result<LoadedGraph> {
    let features = read_features(&files.features)?;
    let n = features.rows();
    let labels = read_labels(&files.labels)?;
    if labels.len() != n {
        return Err(load_err(
            &files.labels,
            labels.len().min(n) + 1,
            format!("{} labels for {n} nodes in {}", labels.len(), files.features.display()),
        ));
    }
    let (edges, warnings) = read_edge_list(&files.edges, Some(n))?;
    let splits: Splits = serde_json::from_str(&read(&files.splits)?).map_err(|e| {
        load_err(&files.splits, e.line(), format!("invalid splits object: {e}"))
    })?;
    let adjacency = SparseMatrix::from_undirected_edges(n, &edges)?;
    let graph = Graph::new(adjacency, features, labels, splits).map_err(|e| match e {
        Error::Domain(msg) => load_err(&files.splits, 0, msg),
        other => other,
    })?;
    Ok(LoadedGraph { graph, warnings })
}

/// Writes `graph` in the format read by [`load_graph`]. Reals are written in
/// shortest round-trip form, so a reload is bit-identical.
pub fn save_graph(graph: &Graph, dir: impl AsRef<Path>) -> Result<DatasetFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = DatasetFiles::in_dir(dir);

    let mut edges = String::new();
    for (u, v) in graph.adjacency().upper_edges() {
        writeln!(edges, "{u} {v}").unwrap();
    }
    let mut features = String::new();
    for i in 0..graph.n_nodes() {
        let row = graph.features().row(i);
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                features.push(',');
            }
            write!(features, "{x}").unwrap();
        }
        features.push('\n');
    }
    let mut labels = String::new();
    for l in graph.labels() {
        writeln!(labels, "{l}").unwrap();
    }
    let splits = serde_json::to_string(graph.splits())?;

    for (path, body) in [
        (&files.edges, edges),
        (&files.features, features),
        (&files.labels, labels),
        (&files.splits, splits),
    ] {
        fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}
