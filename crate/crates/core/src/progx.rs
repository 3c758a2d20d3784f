//! The Progressive-X loop: propose one instance at a time, reject it if it is
//! redundant, otherwise re-optimize all instances jointly, and stop once no
//! unseen instance can have enough inliers.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Datum, Instance, InstanceState, ModelClass};
use crate::labeling::{energy, pearl, EnergyBreakdown, Labeling, PearlParams, OUTLIER};
use crate::neighborhood::{build_graph, default_cell_size, NeighborhoodGraph, NeighborhoodMode};
use crate::proposal::{propose, LocalOptimization, ProposalConfig, Sampler};
use crate::scoring::CompoundModel;
use crate::validation::{MinHasher, PreferenceSet, SimilarityMode, Validator, Verdict, DEFAULT_HASH_SEED, DEFAULT_NUM_HASHES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgXConfig {
    /// Global confidence µ of the termination bound.
    pub confidence: f64,
    /// Inlier-outlier threshold ε used by classes without an override.
    pub threshold: f64,
    pub class_thresholds: Vec<(ModelClass, f64)>,
    /// Minimal Jaccard distance ε_S for a proposal to pass validation.
    pub jaccard_epsilon: f64,
    /// Potts weight w_s per neighborhood edge.
    pub spatial_weight: f64,
    /// Cost w_l per instance in the labeling energy.
    pub label_cost: f64,
    /// Minimum instance support; `None` means `m + 1` per class.
    pub min_support: Option<usize>,
    /// Classes proposed in round-robin order.
    pub classes: Vec<ModelClass>,
    pub max_proposals: usize,
    pub seed: u64,
    /// `None` selects a grid with cell size one twentieth of the bounding-box diagonal.
    pub neighborhood: Option<NeighborhoodMode>,
    pub inner_confidence: f64,
    pub max_inner_iterations: usize,
    pub lo_refit_rounds: usize,
    pub sampler: Sampler,
    pub local_optimization: LocalOptimization,
    pub similarity: SimilarityMode,
    pub num_hashes: usize,
    pub pearl_max_rounds: usize,
}

impl Default for ProgXConfig {
    fn default() -> Self {
        ProgXConfig {
            confidence: 0.95,
            threshold: 2.0,
            class_thresholds: Vec::new(),
            jaccard_epsilon: 0.1,
            spatial_weight: 0.15,
            label_cost: 10.0,
            min_support: None,
            classes: vec![ModelClass::Line2D],
            max_proposals: 1000,
            seed: 0,
            neighborhood: None,
            inner_confidence: 0.95,
            max_inner_iterations: 5000,
            lo_refit_rounds: 10,
            sampler: Sampler::Napsac,
            local_optimization: LocalOptimization::IteratedRefit,
            similarity: SimilarityMode::MinHash,
            num_hashes: DEFAULT_NUM_HASHES,
            pearl_max_rounds: 20,
        }
    }
}

impl ProgXConfig {
    pub fn threshold_for(&self, class: ModelClass) -> f64 {
        self.class_thresholds.iter().find(|(c, _)| *c == class).map_or(self.threshold, |&(_, t)| t)
    }

    pub fn min_support_for(&self, class: ModelClass) -> usize {
        self.min_support.unwrap_or(class.minimal_sample_size() + 1)
    }

    /// The inlier count below which an undiscovered instance of `class` is ignored.
    pub fn termination_floor(&self, class: ModelClass) -> usize {
        (class.minimal_sample_size() + 1).max(self.min_support_for(class))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.into()));
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.jaccard_epsilon) {
            return bad("Jaccard epsilon must lie in [0, 1]");
        }
        if !(self.spatial_weight >= 0.0 && self.spatial_weight.is_finite()) {
            return bad("spatial weight must be nonnegative");
        }
        if !(self.label_cost >= 0.0 && self.label_cost.is_finite()) {
            return bad("label cost must be nonnegative");
        }
        if self.classes.is_empty() {
            return bad("at least one model class is required");
        }
        if self.classes.contains(&ModelClass::Outlier) {
            return bad("the outlier class is implicit");
        }
        let thresholds = std::iter::once(self.threshold).chain(self.class_thresholds.iter().map(|c| c.1));
        if thresholds.into_iter().any(|t| !(t > 0.0 && t.is_finite())) {
            return bad("thresholds must be positive");
        }
        if self.max_proposals == 0 {
            return bad("max proposals must be positive");
        }
        if self.num_hashes == 0 {
            return bad("at least one hash function is required");
        }
        self.proposal_config(self.classes[0]).validate()
    }

    fn proposal_config(&self, class: ModelClass) -> ProposalConfig {
        ProposalConfig {
            threshold: self.threshold_for(class),
            inner_confidence: self.inner_confidence,
            max_inner_iterations: self.max_inner_iterations,
            lo_refit_rounds: self.lo_refit_rounds,
            sampler: self.sampler,
            local_optimization: self.local_optimization,
            min_support: self.min_support,
        }
    }

    fn pearl_params(&self) -> PearlParams {
        PearlParams {
            threshold: self.threshold,
            class_thresholds: self.class_thresholds.clone(),
            smoothness: self.spatial_weight,
            label_cost: self.label_cost,
            min_support: self.min_support,
            max_rounds: self.pearl_max_rounds,
            tolerance: 1e-6,
        }
    }
}

/// Upper bound, at confidence `µ`, on the inlier count of an instance not yet
/// found after `k` minimal samples: `(total - covered) (1 - (1 - µ)^(1/k))^(1/m)`.
pub fn max_remaining_inliers(total: usize, compound_inliers: usize, m: usize, k: u64, confidence: f64) -> f64 {
    assert!(k >= 1 && compound_inliers <= total && m >= 1);
    let open = (total - compound_inliers) as f64;
    // 1 - (1 - µ)^(1/k) without cancellation for large k
    let per_sample = -((-confidence).ln_1p() / k as f64).exp_m1();
    open * per_sample.powf(1.0 / m as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationEvent {
    Accepted,
    Rejected,
    NoModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ConfidenceReached,
    ProposalCap,
    Interrupted,
}

/// State after one outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// 1-based outer iteration.
    pub iteration: usize,
    pub class: ModelClass,
    pub event: IterationEvent,
    pub instances: Vec<Instance>,
    pub labeling: Labeling,
    /// Largest Ī over the class rotation.
    pub max_remaining_inliers: f64,
    pub samples: u64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittingResult {
    pub instances: Vec<Instance>,
    pub labeling: Labeling,
    pub snapshots: Vec<Snapshot>,
    pub termination: TerminationReason,
    pub samples: u64,
    pub elapsed_ms: f64,
}

impl FittingResult {
    pub fn energy(&self) -> EnergyBreakdown {
        self.labeling.energy
    }
}

/// Optional hooks for a run: a cooperative interrupt flag, checked between
/// stages, and a callback receiving every snapshot as soon as it is complete.
#[derive(Default)]
pub struct RunControl<'a> {
    pub interrupt: Option<&'a AtomicBool>,
    pub progress: Option<&'a mut dyn FnMut(&Snapshot)>,
}

impl RunControl<'_> {
    fn interrupted(&self) -> bool {
        self.interrupt.is_some_and(|f| f.load(Ordering::Relaxed))
    }
}

fn check_data(data: &[Datum], classes: &[ModelClass]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = data.iter().position(|d| !d.is_finite()) {
        return Err(Error::ConfigInvalid(format!("datum {bad} is not finite")));
    }
    for &c in classes {
        let kind = c.data_kind();
        if data.iter().any(|d| d.kind() != kind) {
            return Err(Error::DatumMismatch(c.name()));
        }
        if c.needs_normals() && data.iter().any(|d| d.as_point().and_then(|p| p.normal()).is_none()) {
            return Err(Error::ConfigInvalid(format!("class {c} needs point normals")));
        }
    }
    Ok(())
}

/// Neighborhood graph used for sampling and smoothness under `cfg`.
pub fn neighborhood_for(data: &[Datum], cfg: &ProgXConfig) -> Result<NeighborhoodGraph> {
    let mode = cfg.neighborhood.unwrap_or(NeighborhoodMode::Grid { cell_size: default_cell_size(data) });
    build_graph(data, mode)
}

pub fn run(data: &[Datum], cfg: &ProgXConfig) -> Result<FittingResult> {
    run_with(data, cfg, RunControl::default())
}

pub fn run_with(data: &[Datum], cfg: &ProgXConfig, mut control: RunControl<'_>) -> Result<FittingResult> {
    cfg.validate()?;
    check_data(data, &cfg.classes)?;
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1e3;

    let graph = neighborhood_for(data, cfg)?;
    let params = cfg.pearl_params();
    let validator =
        Validator::new(cfg.jaccard_epsilon, cfg.similarity, MinHasher::new(cfg.num_hashes, DEFAULT_HASH_SEED ^ cfg.seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut instances: Vec<Instance> = Vec::new();
    let mut cm = CompoundModel::new(data.len(), cfg.threshold);
    let empty_problem = crate::labeling::pearl_problem(&instances, data, &graph, &params);
    let mut labeling = Labeling::new(&empty_problem, vec![OUTLIER; data.len()]);
    let mut snapshots = Vec::new();
    let mut samples: u64 = 0;

    let remaining = |cm: &CompoundModel, samples: u64| -> Vec<f64> {
        cfg.classes
            .iter()
            .map(|c| {
                if samples == 0 {
                    f64::INFINITY
                } else {
                    max_remaining_inliers(data.len(), cm.inlier_count(), c.minimal_sample_size(), samples, cfg.confidence)
                }
            })
            .collect()
    };

    let mut iteration = 0;
    let termination = loop {
        iteration += 1;
        {
            if control.interrupted() {
                break TerminationReason::Interrupted;
            }
            let bounds = remaining(&cm, samples);
            if cfg.classes.iter().zip(&bounds).all(|(&c, &b)| b < cfg.termination_floor(c) as f64) {
                break TerminationReason::ConfidenceReached;
            }
            if iteration > cfg.max_proposals {
                break TerminationReason::ProposalCap;
            }

            let class = cfg.classes[(iteration - 1) % cfg.classes.len()];
            let eps = cfg.threshold_for(class);
            let event = match propose(data, &graph, &cm, class, &cfg.proposal_config(class), &mut rng) {
                Err(Error::NoModelFound { samples_drawn }) => {
                    samples += samples_drawn;
                    IterationEvent::NoModel
                }
                Err(e) => return Err(e),
                Ok(p) => {
                    samples += p.samples_drawn;
                    let own = PreferenceSet::of_instance(&p.instance, data, eps);
                    let compound = PreferenceSet::of_compound(&cm);
                    match validator.validate(&own, &compound) {
                        Verdict::Reject => IterationEvent::Rejected,
                        Verdict::Accept if control.interrupted() => break TerminationReason::Interrupted,
                        Verdict::Accept => {
                            let mut candidates = instances.clone();
                            candidates.push(p.instance.clone());
                            let mut init = labeling.assignment.clone();
                            for &i in &p.support {
                                init[i] = candidates.len();
                            }
                            let (next, next_labeling) = pearl(&candidates, data, &graph, &params, &init);
                            instances = next;
                            labeling = next_labeling;
                            cm = compound_of(data, cfg, &instances);
                            IterationEvent::Accepted
                        }
                    }
                }
            };

            let snapshot = Snapshot {
                iteration,
                class,
                event,
                instances: instances.clone(),
                labeling: labeling.clone(),
                max_remaining_inliers: remaining(&cm, samples).into_iter().fold(0.0, f64::max),
                samples,
                elapsed_ms: elapsed(),
            };
            if let Some(cb) = control.progress.as_mut() {
                cb(&snapshot);
            }
            snapshots.push(snapshot);
        }
    };

    Ok(FittingResult { instances, labeling, snapshots, termination, samples, elapsed_ms: elapsed() })
}

fn compound_of(data: &[Datum], cfg: &ProgXConfig, instances: &[Instance]) -> CompoundModel {
    let mut cm = CompoundModel::new(data.len(), cfg.threshold);
    for h in instances {
        cm.add_with_threshold(h.clone().with_state(InstanceState::Active), cfg.threshold_for(h.class()), data);
    }
    cm
}

/// Energy of `labels` under the labeling problem a run with `cfg` would build.
pub fn labeling_energy(data: &[Datum], cfg: &ProgXConfig, instances: &[Instance], labels: &[usize]) -> Result<EnergyBreakdown> {
    let graph = neighborhood_for(data, cfg)?;
    let problem = crate::labeling::pearl_problem(instances, data, &graph, &cfg.pearl_params());
    Ok(energy(&problem, labels))
}

/// Matching of predicted instances to ground-truth clusters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Audit {
    /// `matches[k]` is the ground-truth cluster consumed by instance `k`.
    pub matches: Vec<Option<usize>>,
    pub matched: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Matches instance labels `1..=n_instances` in `labels` to ground-truth
/// clusters `1..` in `gt` (`0` marks outliers). An instance matches the
/// cluster holding at least half of its support; each cluster is consumed
/// once, larger overlaps first.
pub fn audit(labels: &[usize], n_instances: usize, gt: &[usize]) -> Audit {
    assert_eq!(labels.len(), gt.len());
    let n_gt = gt.iter().copied().max().unwrap_or(0);
    let mut overlap = vec![vec![0usize; n_gt + 1]; n_instances + 1];
    for (&l, &g) in labels.iter().zip(gt) {
        if l >= 1 && l <= n_instances {
            overlap[l][g] += 1;
        }
    }
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for k in 1..=n_instances {
        let support: usize = overlap[k].iter().sum();
        if support == 0 {
            continue;
        }
        let (g, &count) = overlap[k].iter().enumerate().skip(1).max_by_key(|&(g, &c)| (c, std::cmp::Reverse(g))).unwrap_or((0, &0));
        if g >= 1 && 2 * count >= support {
            candidates.push((count, k, g));
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut consumed = vec![false; n_gt + 1];
    let mut matches = vec![None; n_instances];
    for (_, k, g) in candidates {
        if !consumed[g] && matches[k - 1].is_none() {
            consumed[g] = true;
            matches[k - 1] = Some(g);
        }
    }
    let matched = matches.iter().flatten().count();
    let present = (1..=n_gt).filter(|&g| gt.contains(&g)).count();
    Audit { matches, matched, false_positives: n_instances - matched, false_negatives: present - matched }
}

/// Fraction of a snapshot's instances that cover distinct ground-truth
/// clusters; `1.0` for an empty snapshot.
pub fn audit_snapshot(snapshot: &Snapshot, gt: &[usize]) -> f64 {
    let n = snapshot.instances.len();
    if n == 0 {
        return 1.0;
    }
    audit(&snapshot.labeling.assignment, n, gt).matched as f64 / n as f64
}
