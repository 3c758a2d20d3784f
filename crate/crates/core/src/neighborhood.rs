//! Spatial adjacency over the input data.
//!
//! The same graph drives NAPSAC sampling (minimal samples are drawn from the
//! neighborhood of a random seed point) and the Potts smoothness term of the
//! labeling energy.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Datum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodMode {
    /// Points sharing a cell or lying in adjacent cells are connected.
    Grid { cell_size: f64 },
    /// Each point is connected to its `k` nearest neighbors; edges are symmetrized.
    Knn { k: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    mode: NeighborhoodMode,
}

impl NeighborhoodGraph {
    /// Builds a graph from an explicit edge list. Self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, mode: NeighborhoodMode) -> Self {
        let mut e: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|&(i, j)| i != j && i < n && j < n)
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        e.sort_unstable();
        e.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &e {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        NeighborhoodGraph { n, edges: e, adjacency, mode }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn mode(&self) -> NeighborhoodMode {
        self.mode
    }

    /// Sorted points within two hops of `seed`, excluding `seed`.
    pub fn two_hop(&self, seed: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.adjacency[seed]
            .iter()
            .flat_map(|&j| std::iter::once(j).chain(self.adjacency[j].iter().copied()))
            .filter(|&j| j != seed)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Bounding-box diagonal over all coordinates of the data.
pub fn bounding_diagonal(data: &[Datum]) -> f64 {
    let dim = data.first().map_or(0, |d| d.position().len());
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for d in data {
        for (k, &c) in d.position().iter().enumerate().take(dim) {
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
}

/// Default grid cell: one twentieth of the bounding-box diagonal.
pub fn default_cell_size(data: &[Datum]) -> f64 {
    let d = bounding_diagonal(data) / 20.0;
    if d > 0.0 && d.is_finite() {
        d
    } else {
        1.0
    }
}

pub fn build_graph(data: &[Datum], mode: NeighborhoodMode) -> Result<NeighborhoodGraph> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    match mode {
        NeighborhoodMode::Grid { cell_size } => {
            if !(cell_size > 0.0) || !cell_size.is_finite() {
                return Err(Error::ConfigInvalid("grid cell size must be positive".into()));
            }
            Ok(grid_graph(data, cell_size, mode))
        }
        NeighborhoodMode::Knn { k } => {
            if k == 0 {
                return Err(Error::ConfigInvalid("k must be at least 1".into()));
            }
            Ok(knn_graph(data, k, mode))
        }
    }
}

type Cell = [i64; 4];

fn cell_of(pos: &[f64], cell_size: f64) -> Cell {
    let mut c = [0i64; 4];
    for (k, &x) in pos.iter().enumerate().take(4) {
        c[k] = (x / cell_size).floor() as i64;
    }
    c
}

fn grid_graph(data: &[Datum], cell_size: f64, mode: NeighborhoodMode) -> NeighborhoodGraph {
    let dim = data[0].position().len().min(4);
    let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    let keys: Vec<Cell> = data.iter().map(|d| cell_of(d.position(), cell_size)).collect();
    for (i, key) in keys.iter().enumerate() {
        cells.entry(*key).or_default().push(i);
    }

    // all offsets in {-1, 0, 1}^dim
    let offsets: Vec<Cell> = (0..3usize.pow(dim as u32))
        .map(|mut code| {
            let mut off = [0i64; 4];
            for o in off.iter_mut().take(dim) {
                *o = (code % 3) as i64 - 1;
                code /= 3;
            }
            off
        })
        .collect();

    let mut edges = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        for off in &offsets {
            let mut nb = *key;
            for k in 0..4 {
                nb[k] += off[k];
            }
            if let Some(members) = cells.get(&nb) {
                edges.extend(members.iter().filter(|&&j| j > i).map(|&j| (i, j)));
            }
        }
    }
    NeighborhoodGraph::from_edges(data.len(), edges, mode)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn knn_graph(data: &[Datum], k: usize, mode: NeighborhoodMode) -> NeighborhoodGraph {
    let n = data.len();
    let mut edges = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        let pi = data[i].position();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (sq_dist(pi, data[j].position()), j)));
        let kk = k.min(cand.len());
        if kk == 0 {
            continue;
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if kk < cand.len() {
            cand.select_nth_unstable_by(kk - 1, cmp);
        }
        edges.extend(cand[..kk].iter().map(|&(_, j)| (i, j)));
    }
    NeighborhoodGraph::from_edges(n, edges, mode)
}

/// Draws `m` distinct indices uniformly from `0..n`.
pub fn uniform_sample<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::SampleLargerThanPopulation { m, n });
    }
    Ok(index::sample(rng, n, m).into_vec())
}

/// NAPSAC: a uniformly drawn seed plus `m - 1` of its neighbors.
pub fn napsac_sample<R: Rng + ?Sized>(graph: &NeighborhoodGraph, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if graph.is_empty() {
        return Err(Error::EmptyInput);
    }
    let seed = rng.gen_range(0..graph.len());
    napsac_sample_from(graph, seed, m, rng)
}

/// NAPSAC draw around a fixed seed. The remaining `m - 1` indices come from the
/// seed's direct neighbors, or from its two-hop neighborhood when there are
/// too few of them.
pub fn napsac_sample_from<R: Rng + ?Sized>(
    graph: &NeighborhoodGraph,
    seed: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::ConfigInvalid("sample size must be at least 1".into()));
    }
    let need = m - 1;
    let mut out = Vec::with_capacity(m);
    out.push(seed);
    if need == 0 {
        return Ok(out);
    }
    let direct = graph.neighbors(seed);
    if direct.len() >= need {
        out.extend(index::sample(rng, direct.len(), need).into_iter().map(|i| direct[i]));
        return Ok(out);
    }
    let pool = graph.two_hop(seed);
    if pool.len() < need {
        return Err(Error::InsufficientNeighborhood { seed, needed: need });
    }
    out.extend(index::sample(rng, pool.len(), need).into_iter().map(|i| pool[i]));
    Ok(out)
}
