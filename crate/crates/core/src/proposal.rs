//! The proposal engine: a locally optimized RANSAC that searches for the
//! instance with the best compound-conditioned MSAC quality.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_minimal, refit, residual, Datum, Instance, ModelClass};
use crate::labeling::binary_segmentation;
use crate::neighborhood::{napsac_sample_from, uniform_sample, NeighborhoodGraph};
use crate::scoring::{
    conditioned_support, msac_gamma, quality_msac_conditioned_above, quality_msac_conditioned_line, CompoundModel, PointGrid,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Napsac,
    Uniform,
}

/// Local optimization applied whenever the best-so-far hypothesis improves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocalOptimization {
    /// Least-squares refits on the conditioned support, threshold shrinking from 2ε to ε.
    #[default]
    IteratedRefit,
    /// A binary graph-cut inlier segmentation followed by the iterated refit.
    GraphCut { smoothness: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub threshold: f64,
    pub inner_confidence: f64,
    pub max_inner_iterations: usize,
    pub lo_refit_rounds: usize,
    pub sampler: Sampler,
    pub local_optimization: LocalOptimization,
    /// Smallest uncovered support worth proposing; never below `m + 1`.
    pub min_support: Option<usize>,
}

impl ProposalConfig {
    pub fn new(threshold: f64) -> Self {
        ProposalConfig {
            threshold,
            inner_confidence: 0.95,
            max_inner_iterations: 5000,
            lo_refit_rounds: 10,
            sampler: Sampler::Napsac,
            local_optimization: LocalOptimization::IteratedRefit,
            min_support: None,
        }
    }

    pub fn support_floor(&self, class: ModelClass) -> usize {
        let m = class.minimal_sample_size();
        self.min_support.map_or(m + 1, |s| s.max(m + 1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::ConfigInvalid("threshold must be positive".into()));
        }
        if !(self.inner_confidence > 0.0 && self.inner_confidence < 1.0) {
            return Err(Error::ConfigInvalid("inner confidence must lie in (0, 1)".into()));
        }
        if self.max_inner_iterations == 0 || self.lo_refit_rounds == 0 {
            return Err(Error::ConfigInvalid("iteration limits must be positive".into()));
        }
        if let LocalOptimization::GraphCut { smoothness } = self.local_optimization {
            if !(smoothness >= 0.0 && smoothness.is_finite()) {
                return Err(Error::ConfigInvalid("graph-cut smoothness must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub instance: Instance,
    pub score: f64,
    /// Points within ε of the instance that the compound model does not cover.
    pub support: Vec<usize>,
    pub samples_drawn: u64,
}

/// Number of RANSAC iterations needed to draw one all-inlier minimal sample
/// with probability `confidence`, clamped to `[1, max_iterations]`.
pub fn inner_iteration_bound(inliers: usize, total: usize, m: usize, confidence: f64, max_iterations: usize) -> usize {
    assert!(inliers <= total);
    let max_iterations = max_iterations.max(1);
    if total == 0 || inliers == 0 {
        return max_iterations;
    }
    let p_good = (inliers as f64 / total as f64).powi(m as i32);
    if p_good >= 1.0 {
        return 1;
    }
    let k = ((1.0 - confidence).ln() / (1.0 - p_good).ln()).ceil();
    if !k.is_finite() || k >= max_iterations as f64 {
        max_iterations
    } else {
        (k as usize).max(1)
    }
}

struct Search<'a> {
    data: &'a [Datum],
    graph: &'a NeighborhoodGraph,
    cm: &'a CompoundModel,
    class: ModelClass,
    cfg: &'a ProposalConfig,
    grid: Option<PointGrid>,
}

impl Search<'_> {
    fn eps(&self) -> f64 {
        self.cfg.threshold
    }

    fn score(&self, h: &Instance, floor: f64) -> Option<f64> {
        match &self.grid {
            Some(grid) => Some(quality_msac_conditioned_line(h, self.cm, self.data, grid, self.eps())).filter(|&s| s > floor),
            None => quality_msac_conditioned_above(h, self.cm, self.data, self.eps(), floor),
        }
    }

    fn gather(&self, idx: &[usize]) -> Vec<Datum> {
        idx.iter().map(|&i| self.data[i]).collect()
    }

    fn draw<R: Rng + ?Sized>(&self, open: &[usize], rng: &mut R) -> Result<Vec<usize>> {
        let m = self.class.minimal_sample_size();
        match self.cfg.sampler {
            Sampler::Uniform => uniform_sample(self.data.len(), m, rng),
            Sampler::Napsac => {
                // seeds come from the points the compound model leaves uncovered
                let seed = if open.is_empty() { rng.gen_range(0..self.data.len()) } else { open[rng.gen_range(0..open.len())] };
                napsac_sample_from(self.graph, seed, m, rng)
            }
        }
    }

    /// Improves `h` (with score `score`); returns the best instance seen.
    fn local_optimization(&self, mut best: Instance, mut best_score: f64) -> (Instance, f64) {
        let eps = self.eps();
        let m = self.class.minimal_sample_size();
        if let LocalOptimization::GraphCut { smoothness } = self.cfg.local_optimization {
            let g2 = msac_gamma(eps).powi(2);
            let n = self.data.len();
            let mut cost_in = vec![0.0; n];
            let cost_out = vec![1.0; n];
            let mut fixed = vec![false; n];
            for (p, d) in self.data.iter().enumerate() {
                fixed[p] = self.cm.distance_in(p, eps) < eps;
                cost_in[p] = (residual(&best, d).powi(2) / g2).min(1.0) * 2.0;
            }
            let x = binary_segmentation(&cost_out, &cost_in, &fixed, self.graph.edges(), smoothness);
            let members: Vec<usize> = (0..n).filter(|&p| x[p]).collect();
            if members.len() >= m {
                if let Ok(cand) = refit(self.class, &self.gather(&members)) {
                    if let Some(s) = self.score(&cand, best_score) {
                        best = cand;
                        best_score = s;
                    }
                }
            }
        }

        let rounds = self.cfg.lo_refit_rounds;
        let mut current = best.clone();
        for r in 0..rounds {
            let t = if rounds == 1 { eps } else { 2.0 * eps - eps * r as f64 / (rounds - 1) as f64 };
            let support = conditioned_support(&current, self.cm, self.data, t, eps);
            if support.len() < m {
                break;
            }
            let Ok(cand) = refit(self.class, &self.gather(&support)) else { break };
            if let Some(s) = self.score(&cand, best_score) {
                best = cand.clone();
                best_score = s;
            }
            current = cand;
        }
        (best, best_score)
    }
}

/// Searches for one new instance of `class` given the current compound model.
///
/// Fails with [`Error::NoModelFound`] when no hypothesis gathers at least
/// [`ProposalConfig::support_floor`] uncovered inliers; the error still
/// reports the samples consumed.
pub fn propose<R: Rng + ?Sized>(
    data: &[Datum],
    graph: &NeighborhoodGraph,
    cm: &CompoundModel,
    class: ModelClass,
    cfg: &ProposalConfig,
    rng: &mut R,
) -> Result<Proposal> {
    cfg.validate()?;
    let m = class.minimal_sample_size();
    if m == 0 {
        return Err(Error::ConfigInvalid("the outlier class cannot be proposed".into()));
    }
    if data.len() < m {
        return Err(Error::SampleLargerThanPopulation { m, n: data.len() });
    }
    if graph.len() != data.len() || cm.n_points() != data.len() {
        return Err(Error::ConfigInvalid("graph, compound model and data disagree in size".into()));
    }
    let eps = cfg.threshold;
    let open: Vec<usize> = (0..data.len()).filter(|&i| cm.distance_in(i, eps) >= eps).collect();
    let grid = if class == ModelClass::Line2D { PointGrid::build(data, 2.0 * msac_gamma(eps)) } else { None };
    let search = Search { data, graph, cm, class, cfg, grid };

    let mut best: Option<(Instance, f64)> = None;
    let mut samples: u64 = 0;
    let mut bound = cfg.max_inner_iterations;
    while (samples as usize) < bound {
        samples += 1;
        let Ok(idx) = search.draw(&open, rng) else { continue };
        let Ok(h) = fit_minimal(class, &search.gather(&idx)) else { continue };
        let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
        let Some(score) = search.score(&h, floor) else { continue };
        if score <= floor {
            continue;
        }
        let (h, score) = search.local_optimization(h, score);
        let support = conditioned_support(&h, cm, data, eps, eps).len();
        bound = inner_iteration_bound(support, open.len(), m, cfg.inner_confidence, cfg.max_inner_iterations);
        best = Some((h, score));
    }

    let samples_drawn = samples;
    match best {
        Some((instance, score)) => {
            let support = conditioned_support(&instance, cm, data, eps, eps);
            if support.len() < cfg.support_floor(class) {
                return Err(Error::NoModelFound { samples_drawn });
            }
            Ok(Proposal { instance, score, support, samples_drawn })
        }
        None => Err(Error::NoModelFound { samples_drawn }),
    }
}
