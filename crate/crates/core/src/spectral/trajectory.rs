use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eigen::{analyze, DEFAULT_CLUSTER_TOL};
use super::resistance::resistance_matrix;
use super::smoothing::{relaxed_smoothing_layer, LayerBound, DEFAULT_EPSILON};
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{normalize, NormalizationScheme, SparseMatrix};

/// Distance of the input features to the top eigenspace, held fixed along a
/// trajectory so that `l̂` depends on `λ` alone.
const TRAJECTORY_D0: f64 = 1.0;

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryStep {
    /// The edge removed to reach this state; `None` for the starting graph.
    pub removed: Option<(usize, usize)>,
    pub edges_left: usize,
    pub lambda: Option<f64>,
    pub top_multiplicity: usize,
    pub component_count: usize,
    pub l_hat: LayerBound,
    pub disconnection: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryReport {
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
    /// `dim(M)` rose by exactly one at every disconnection.
    pub multiplicity_jumps_ok: bool,
    /// `dim(M)` matched the component count at every step.
    pub multiplicity_matches_components: bool,
    /// `l̂` is at least its initial value or `dim(M)` grew, checked at every
    /// disconnection and at the end.
    pub disjunction_ok: bool,
    /// No effective resistance decreased along the trajectory.
    pub resistance_monotone: bool,
    /// Steps where `λ` went down; reported, not a failure.
    pub lambda_decreases: usize,
    pub violations: Vec<String>,
}

impl TrajectoryReport {
    pub fn passed(&self) -> bool {
        self.multiplicity_jumps_ok
            && self.multiplicity_matches_components
            && self.disjunction_ok
            && self.resistance_monotone
    }
}

fn measure(
    n: usize,
    edges: &[(usize, usize)],
) -> Result<(SparseMatrix, Option<f64>, usize, usize, LayerBound)> {
    let a = SparseMatrix::from_undirected_edges(n, edges)?;
    let report = analyze(&normalize(&a, NormalizationScheme::AugNormAdj)?, DEFAULT_CLUSTER_TOL)?;
    let l_hat = relaxed_smoothing_layer(DEFAULT_EPSILON, TRAJECTORY_D0, 1.0, report.lambda())?;
    Ok((
        a,
        report.second_largest,
        report.top_multiplicity,
        report.component_count,
        l_hat,
    ))
}

fn resistance_decreased(before: &Matrix, after: &Matrix) -> Option<(usize, usize)> {
    let n = before.rows();
    for i in 0..n {
        for j in i + 1..n {
            let (b, a) = (before.get(i, j), after.get(i, j));
            if b.is_finite() && a < b - 1e-9 * b.max(1.0) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Removes the edges of a connected graph one at a time in a random order
/// and tracks the spectral quantities after every removal.
pub fn theorem1_trajectory(a: &SparseMatrix, seed: u64) -> Result<TrajectoryReport> {
    let n = a.n_rows();
    let mut edges = a.upper_edges();
    let (_, lambda, m0, c0, l0) = measure(n, &edges)?;
    if c0 != 1 {
        return Err(Error::Domain(format!(
            "trajectory needs a connected graph, found {c0} components"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);

    let mut report = TrajectoryReport {
        seed,
        steps: vec![TrajectoryStep {
            removed: None,
            edges_left: edges.len(),
            lambda,
            top_multiplicity: m0,
            component_count: c0,
            l_hat: l0,
            disconnection: false,
        }],
        multiplicity_jumps_ok: true,
        multiplicity_matches_components: m0 == c0,
        disjunction_ok: true,
        resistance_monotone: true,
        lambda_decreases: 0,
        violations: Vec::new(),
    };
    let mut resistance = resistance_matrix(a)?;
    let disjunction = |step: &TrajectoryStep| step.l_hat >= l0 || step.top_multiplicity > m0;

    while let Some(edge) = edges.pop() {
        let (adj, lambda, m, c, l_hat) = measure(n, &edges)?;
        let prev = report.steps.last().expect("trajectory starts non-empty");
        let disconnection = c > prev.component_count;
        let step = TrajectoryStep {
            removed: Some(edge),
            edges_left: edges.len(),
            lambda,
            top_multiplicity: m,
            component_count: c,
            l_hat,
            disconnection,
        };
        let k = report.steps.len();
        if m != c {
            report.multiplicity_matches_components = false;
            report
                .violations
                .push(format!("step {k}: dim(M) = {m} but {c} components"));
        }
        if disconnection && m != prev.top_multiplicity + 1 {
            report.multiplicity_jumps_ok = false;
            report.violations.push(format!(
                "step {k}: dim(M) went from {} to {m} on disconnection",
                prev.top_multiplicity
            ));
        }
        if (disconnection || edges.is_empty()) && !disjunction(&step) {
            report.disjunction_ok = false;
            report.violations.push(format!(
                "step {k}: l_hat {l_hat} below initial {l0} with dim(M) unchanged"
            ));
        }
        if lambda.unwrap_or(0.0) < prev.lambda.unwrap_or(0.0) - 1e-12 {
            report.lambda_decreases += 1;
        }
        let next = resistance_matrix(&adj)?;
        if let Some((i, j)) = resistance_decreased(&resistance, &next) {
            report.resistance_monotone = false;
            report.violations.push(format!(
                "step {k}: resistance between {i} and {j} fell from {} to {}",
                resistance.get(i, j),
                next.get(i, j)
            ));
        }
        resistance = next;
        report.steps.push(step);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_disconnects_on_first_removal() {
        let star = SparseMatrix::from_undirected_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let r = theorem1_trajectory(&star, 3).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.steps[1].top_multiplicity, 2);
        assert!(r.steps[1].disconnection);
        let last = r.steps.last().unwrap();
        assert_eq!((last.top_multiplicity, last.component_count), (4, 4));
        assert_eq!(last.lambda, None);
    }

    #[test]
    fn triangle_trajectory() {
        let tri = SparseMatrix::from_undirected_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let r = theorem1_trajectory(&tri, 0).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.steps.len(), 4);
        assert!(!r.steps[1].disconnection);
        assert!(r.steps[2].disconnection);
        assert_eq!(r.steps[2].top_multiplicity, 2);
    }

    #[test]
    fn disconnected_input_rejected() {
        let a = SparseMatrix::from_undirected_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(theorem1_trajectory(&a, 0).is_err());
    }
}
