//! Multi-instance optimization: labeling energy, alpha-expansion with label
//! costs, and the PEARL alternation of labeling and re-estimation.
//!
//! Label `0` is always the outlier class; label `k + 1` refers to the `k`-th
//! model instance.

mod expansion;
mod maxflow;
mod pearl;

use serde::{Deserialize, Serialize};

pub use expansion::{alpha_expansion, binary_segmentation, expansion_cycle};
pub use maxflow::{maxflow_mincut, FlowNetwork, MinCut};
pub use pearl::{build_problem as pearl_problem, pearl, PearlParams};

pub const OUTLIER: usize = 0;

/// Data, Potts smoothness and label costs over a fixed point set.
#[derive(Clone, Debug)]
pub struct LabelingProblem {
    n_points: usize,
    n_labels: usize,
    // row-major [point][label]
    data_cost: Vec<f64>,
    edges: Vec<(usize, usize)>,
    degrees: Vec<u32>,
    smoothness: f64,
    label_cost: Vec<f64>,
}

impl LabelingProblem {
    /// `data_cost` is row-major over points with `n_labels` columns; column 0
    /// is the outlier label. `label_cost` applies to every non-outlier label.
    pub fn new(
        n_labels: usize,
        data_cost: Vec<f64>,
        edges: Vec<(usize, usize)>,
        smoothness: f64,
        label_cost: f64,
    ) -> Self {
        assert!(n_labels >= 1, "the outlier label is always present");
        assert_eq!(data_cost.len() % n_labels, 0);
        assert!(data_cost.iter().all(|c| c.is_finite() && *c >= 0.0), "data costs must be finite and nonnegative");
        assert!(smoothness >= 0.0 && label_cost >= 0.0);
        let n_points = data_cost.len() / n_labels;
        let mut costs = vec![label_cost; n_labels];
        costs[OUTLIER] = 0.0;
        let mut degrees = vec![0u32; n_points];
        for &(p, q) in &edges {
            assert!(p < n_points && q < n_points, "edge ({p}, {q}) out of range");
            degrees[p] += 1;
            degrees[q] += 1;
        }
        LabelingProblem { n_points, n_labels, data_cost, edges, degrees, smoothness, label_cost: costs }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    #[inline]
    pub fn data_cost(&self, point: usize, label: usize) -> f64 {
        self.data_cost[point * self.n_labels + label]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of edges incident to each point.
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn label_cost(&self, label: usize) -> f64 {
        self.label_cost[label]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub data: f64,
    pub smooth: f64,
    pub label: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    pub assignment: Vec<usize>,
    pub energy: EnergyBreakdown,
}

impl Labeling {
    pub fn new(problem: &LabelingProblem, assignment: Vec<usize>) -> Self {
        let energy = energy(problem, &assignment);
        Labeling { assignment, energy }
    }

    /// Number of points carrying `label`.
    pub fn support(&self, label: usize) -> usize {
        self.assignment.iter().filter(|&&l| l == label).count()
    }
}

pub fn energy(problem: &LabelingProblem, assignment: &[usize]) -> EnergyBreakdown {
    assert_eq!(assignment.len(), problem.n_points);
    let data: f64 = assignment.iter().enumerate().map(|(p, &l)| problem.data_cost(p, l)).sum();
    let cuts = problem.edges.iter().filter(|&&(p, q)| assignment[p] != assignment[q]).count();
    let smooth = problem.smoothness * cuts as f64;
    let mut used = vec![false; problem.n_labels];
    for &l in assignment {
        used[l] = true;
    }
    let label: f64 = used.iter().enumerate().filter(|(_, &u)| u).map(|(l, _)| problem.label_cost[l]).sum();
    EnergyBreakdown { data, smooth, label, total: data + smooth + label }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_outlier_energy() {
        let n = 6;
        let c = 4.0;
        let mut costs = Vec::new();
        for _ in 0..n {
            costs.extend([c, 0.5]);
        }
        let p = LabelingProblem::new(2, costs, vec![(0, 1)], 0.15, 43.0);
        let e = energy(&p, &vec![OUTLIER; n]);
        assert_eq!(e, EnergyBreakdown { data: n as f64 * c, smooth: 0.0, label: 0.0, total: n as f64 * c });
    }

    #[test]
    fn smoothness_counts_cut_edges() {
        let p = LabelingProblem::new(3, vec![0.0; 6], vec![(0, 1)], 0.15, 0.0);
        let e = energy(&p, &[1, 2]);
        assert!((e.smooth - 0.15).abs() < 1e-15);
    }

    #[test]
    fn label_cost_charged_once_per_used_label() {
        let p = LabelingProblem::new(2, [1.0, 0.0].repeat(4), vec![], 0.15, 43.0);
        let e = energy(&p, &[1, 1, 1, 1]);
        assert_eq!(e.data, 0.0);
        assert_eq!(e.label, 43.0);
        assert_eq!(e.total, 43.0);
    }
}
