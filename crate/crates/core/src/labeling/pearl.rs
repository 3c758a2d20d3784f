use crate::geometry::{refit, residual, Datum, Instance, InstanceState, ModelClass};
use crate::neighborhood::NeighborhoodGraph;
use crate::scoring::msac_gamma;

use super::expansion::{alpha_expansion, expansion_cycle};
use super::{energy, Labeling, LabelingProblem, OUTLIER};

#[derive(Clone, Debug, PartialEq)]
pub struct PearlParams {
    /// Inlier-outlier threshold; the outlier label costs `threshold^2` per point.
    pub threshold: f64,
    /// Per-class thresholds overriding `threshold` for instances of that class.
    pub class_thresholds: Vec<(ModelClass, f64)>,
    /// Potts weight per neighborhood edge.
    pub smoothness: f64,
    /// Cost per instance label in use.
    pub label_cost: f64,
    /// Minimum support of a surviving instance; `None` means `m + 1` for its class.
    pub min_support: Option<usize>,
    pub max_rounds: usize,
    /// Relative energy change below which the alternation stops.
    pub tolerance: f64,
}

impl PearlParams {
    pub fn new(threshold: f64, smoothness: f64, label_cost: f64) -> Self {
        PearlParams {
            threshold,
            class_thresholds: Vec::new(),
            smoothness,
            label_cost,
            min_support: None,
            max_rounds: 20,
            tolerance: 1e-6,
        }
    }

    pub fn threshold_for(&self, class: ModelClass) -> f64 {
        self.class_thresholds.iter().find(|(c, _)| *c == class).map_or(self.threshold, |&(_, t)| t)
    }

    pub fn min_support_for(&self, class: ModelClass) -> usize {
        self.min_support.unwrap_or(class.minimal_sample_size() + 1)
    }

    /// Squared residual truncated at `γ(ε)^2`, expressed on the outlier's
    /// scale. Truncating above the outlier cost `ε^2` makes every point
    /// beyond ε strictly prefer the outlier label instead of tying with it.
    fn point_cost(&self, instance: &Instance, datum: &Datum) -> f64 {
        let t = self.threshold_for(instance.class());
        let r = residual(instance, datum);
        let c = (r * r).min(msac_gamma(t).powi(2));
        if t == self.threshold {
            c
        } else {
            c * (self.threshold * self.threshold) / (t * t)
        }
    }
}

/// Labeling problem over `instances` with PEARL's truncated data costs.
pub fn build_problem(
    instances: &[Instance],
    data: &[Datum],
    graph: &NeighborhoodGraph,
    params: &PearlParams,
) -> LabelingProblem {
    let n_labels = instances.len() + 1;
    let outlier_cost = params.threshold * params.threshold;
    let mut costs = Vec::with_capacity(data.len() * n_labels);
    for d in data {
        costs.push(outlier_cost);
        costs.extend(instances.iter().map(|h| params.point_cost(h, d)));
    }
    LabelingProblem::new(n_labels, costs, graph.edges().to_vec(), params.smoothness, params.label_cost)
}

fn drop_label(labels: &mut [usize], label: usize) {
    for l in labels.iter_mut() {
        if *l == label {
            *l = OUTLIER;
        } else if *l > label {
            *l -= 1;
        }
    }
}

/// Lower bound on the energy change of deleting `label`: every freed point
/// pays at least its cheapest alternative, saves at most the smoothness on its
/// currently cut edges, and only `label`'s own cost is refunded.
fn removal_cannot_help(problem: &LabelingProblem, labels: &[usize], label: usize) -> bool {
    let w = problem.smoothness();
    let mut cut = vec![0u32; labels.len()];
    for &(p, q) in problem.edges() {
        if labels[p] != labels[q] && (labels[p] == label || labels[q] == label) {
            cut[p] += 1;
            cut[q] += 1;
        }
    }
    let mut bound = -problem.label_cost(label);
    for (p, _) in labels.iter().enumerate().filter(|(_, &l)| l == label) {
        let own = problem.data_cost(p, label);
        let alternative =
            (0..problem.n_labels()).filter(|&l| l != label).map(|l| problem.data_cost(p, l)).fold(f64::INFINITY, f64::min);
        bound += alternative - own - w * cut[p] as f64;
    }
    bound > 1e-9 * problem.label_cost(label).max(1.0)
}

fn relative_change(prev: f64, next: f64) -> f64 {
    (prev - next).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

/// PEARL: alternate alpha-expansion labeling, per-instance refitting and
/// pruning of unsupported or redundant instances until the energy settles.
///
/// `init` assigns every point a label (`0` = outlier, `k + 1` = `active[k]`);
/// out-of-range labels are treated as outliers.
pub fn pearl(
    active: &[Instance],
    data: &[Datum],
    graph: &NeighborhoodGraph,
    params: &PearlParams,
    init: &[usize],
) -> (Vec<Instance>, Labeling) {
    assert_eq!(init.len(), data.len());
    let mut instances: Vec<Instance> = active.iter().cloned().map(|h| h.with_state(InstanceState::Active)).collect();
    let mut labels: Vec<usize> = init.iter().map(|&l| if l <= instances.len() { l } else { OUTLIER }).collect();
    let mut previous = f64::INFINITY;

    for _round in 0..params.max_rounds.max(1) {
        // labeling
        let problem = build_problem(&instances, data, graph, params);
        labels = alpha_expansion(&problem, &labels).assignment;

        // re-estimation: keep a refit only if it does not raise its own data cost
        for (k, h) in instances.iter_mut().enumerate() {
            let members: Vec<usize> = (0..data.len()).filter(|&p| labels[p] == k + 1).collect();
            if members.len() < h.class().minimal_sample_size() {
                continue;
            }
            let support: Vec<Datum> = members.iter().map(|&p| data[p]).collect();
            if let Ok(candidate) = refit(h.class(), &support) {
                let old: f64 = support.iter().map(|d| params.point_cost(h, d)).sum();
                let new: f64 = support.iter().map(|d| params.point_cost(&candidate, d)).sum();
                if new <= old {
                    *h = candidate.with_state(InstanceState::Active);
                }
            }
        }

        // instances below the support floor are deactivated outright
        let mut k = instances.len();
        while k > 0 {
            k -= 1;
            let support = labels.iter().filter(|&&l| l == k + 1).count();
            if support < params.min_support_for(instances[k].class()) {
                instances.remove(k);
                drop_label(&mut labels, k + 1);
            }
        }

        // removal trials, weakest instances first
        let mut problem = build_problem(&instances, data, graph, params);
        let mut current = energy(&problem, &labels).total;
        let mut order: Vec<usize> = (0..instances.len()).collect();
        let support_of = |labels: &[usize], k: usize| labels.iter().filter(|&&l| l == k + 1).count();
        order.sort_by_key(|&k| (support_of(&labels, k), k));
        let mut removed: Vec<usize> = Vec::new();
        for k in order {
            // index of instance k after the removals committed so far
            let idx = k - removed.iter().filter(|&&r| r < k).count();
            if removal_cannot_help(&problem, &labels, idx + 1) {
                continue;
            }
            let mut trial_labels = labels.clone();
            let freed: Vec<bool> = trial_labels.iter().map(|&l| l == idx + 1).collect();
            drop_label(&mut trial_labels, idx + 1);
            let mut trial_instances = instances.clone();
            trial_instances.remove(idx);
            let trial_problem = build_problem(&trial_instances, data, graph, params);
            let reassigned = expansion_cycle(&trial_problem, &trial_labels, Some(&freed));
            if reassigned.energy.total < current - 1e-12 * current.abs().max(1.0) {
                instances = trial_instances;
                labels = reassigned.assignment;
                current = reassigned.energy.total;
                problem = trial_problem;
                removed.push(k);
            }
        }

        let e = energy(&problem, &labels).total;
        let settled = relative_change(previous, e) < params.tolerance;
        previous = e;
        if settled {
            break;
        }
    }

    let problem = build_problem(&instances, data, graph, params);
    let labeling = Labeling::new(&problem, labels);
    (instances, labeling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::neighborhood::{build_graph, NeighborhoodMode};
    use std::f64::consts::PI;

    fn line_scene() -> (Vec<Datum>, Instance) {
        let mut data: Vec<Datum> = (0..30).map(|i| Point::new2(i as f64, 0.0).into()).collect();
        data.push(Point::new2(15.0, 40.0).into());
        (data, Instance::new(ModelClass::Line2D, vec![PI / 2.0, 0.0]).unwrap())
    }

    #[test]
    fn noise_point_becomes_outlier_and_line_is_kept() {
        let (data, line) = line_scene();
        let graph = build_graph(&data, NeighborhoodMode::Grid { cell_size: 2.0 }).unwrap();
        let params = PearlParams::new(1.0, 0.15, 5.0);
        let init = vec![OUTLIER; data.len()];
        let (instances, labeling) = pearl(std::slice::from_ref(&line), &data, &graph, &params, &init);
        assert_eq!(instances.len(), 1);
        assert_eq!(labeling.assignment[30], OUTLIER);
        assert!(labeling.assignment[..30].iter().all(|&l| l == 1));
        for d in &data[..30] {
            assert!(residual(&instances[0], d) < 1e-9);
        }
        assert_eq!(instances[0].state(), InstanceState::Active);
    }

    #[test]
    fn duplicate_instance_is_pruned() {
        let (data, line) = line_scene();
        let graph = build_graph(&data, NeighborhoodMode::Grid { cell_size: 2.0 }).unwrap();
        let params = PearlParams::new(1.0, 0.15, 5.0);
        // split the line's points between two identical labels
        let init: Vec<usize> = (0..data.len()).map(|p| if p < 15 { 1 } else { 2 }).collect();
        let duplicate = [line.clone(), line.clone()];
        let before = energy(&build_problem(&duplicate, &data, &graph, &params), &init).total;
        let (instances, labeling) = pearl(&duplicate, &data, &graph, &params, &init);
        assert_eq!(instances.len(), 1);
        assert!(labeling.energy.total < before);
        // the single-instance interpretation is cheaper by at least one label cost
        let single = build_problem(&instances, &data, &graph, &params);
        assert!(labeling.energy.total <= energy(&single, &labeling.assignment).total + 1e-9);
        assert!(before - labeling.energy.total >= params.label_cost - 1e-9);
    }

    #[test]
    fn under_supported_instance_is_deactivated() {
        let data: Vec<Datum> = vec![
            Point::new2(0.0, 0.0).into(),
            Point::new2(50.0, 0.0).into(),
            Point::new2(20.0, 30.0).into(),
            Point::new2(-40.0, 10.0).into(),
        ];
        let graph = build_graph(&data, NeighborhoodMode::Knn { k: 1 }).unwrap();
        let line = Instance::new(ModelClass::Line2D, vec![PI / 2.0, 0.0]).unwrap();
        let mut params = PearlParams::new(1.0, 0.0, 0.0);
        params.min_support = Some(3);
        let (instances, labeling) = pearl(&[line], &data, &graph, &params, &[1, 1, 0, 0]);
        assert!(instances.is_empty());
        assert!(labeling.assignment.iter().all(|&l| l == OUTLIER));
    }

    #[test]
    fn empty_instance_list_gives_all_outliers() {
        let (data, _) = line_scene();
        let graph = build_graph(&data, NeighborhoodMode::Knn { k: 2 }).unwrap();
        let params = PearlParams::new(1.0, 0.15, 5.0);
        let (instances, labeling) = pearl(&[], &data, &graph, &params, &vec![0; data.len()]);
        assert!(instances.is_empty());
        assert_eq!(labeling.energy.total, data.len() as f64);
    }
}
