use super::maxflow::{maxflow_mincut, FlowNetwork};
use super::{energy, Labeling, LabelingProblem, OUTLIER};

/// Submodular pseudo-boolean energy over binary variables, minimized by one
/// s-t cut. Variables on the sink side take value 1.
#[derive(Default)]
struct BinaryEnergy {
    constant: f64,
    u0: Vec<f64>,
    u1: Vec<f64>,
    // weight paid when x_i = 0 and x_j = 1
    pairs: Vec<(usize, usize, f64)>,
}

impl BinaryEnergy {
    fn add_var(&mut self) -> usize {
        self.u0.push(0.0);
        self.u1.push(0.0);
        self.u0.len() - 1
    }

    fn add_unary(&mut self, i: usize, e0: f64, e1: f64) {
        self.u0[i] += e0;
        self.u1[i] += e1;
    }

    /// Adds E(x_i, x_j) with E(0,0)=a, E(0,1)=b, E(1,0)=c, E(1,1)=d.
    fn add_pairwise(&mut self, i: usize, j: usize, a: f64, b: f64, c: f64, d: f64) {
        let w = b + c - a - d;
        debug_assert!(w >= -1e-9, "non-submodular term");
        self.constant += a;
        self.add_unary(i, 0.0, c - a);
        self.add_unary(j, 0.0, d - c);
        if w > 0.0 {
            self.pairs.push((i, j, w));
        }
    }

    fn minimize(&self) -> Vec<bool> {
        let n = self.u0.len();
        let (s, t) = (n, n + 1);
        let mut net = FlowNetwork::new(n + 2, s, t);
        for i in 0..n {
            let m = self.u0[i].min(self.u1[i]);
            let (a0, a1) = (self.u0[i] - m, self.u1[i] - m);
            if a1 > 0.0 {
                net.add_arc(s, i, a1).expect("valid terminal arc");
            }
            if a0 > 0.0 {
                net.add_arc(i, t, a0).expect("valid terminal arc");
            }
        }
        for &(i, j, w) in &self.pairs {
            net.add_arc(i, j, w).expect("valid pairwise arc");
        }
        let cut = maxflow_mincut(&net);
        // ties keep the current label (value 0)
        cut.sink_side[..n].to_vec()
    }
}

/// Minimizes `sum_p cost_p(x_p) + smoothness * #{(p, q) in edges : x_p != x_q}`
/// over binary `x` with one cut. `fixed[p] = true` pins `x_p` to `false`.
pub fn binary_segmentation(
    cost_false: &[f64],
    cost_true: &[f64],
    fixed: &[bool],
    edges: &[(usize, usize)],
    smoothness: f64,
) -> Vec<bool> {
    let n = cost_false.len();
    assert!(cost_true.len() == n && fixed.len() == n);
    let mut var = vec![usize::MAX; n];
    let mut be = BinaryEnergy::default();
    for p in (0..n).filter(|&p| !fixed[p]) {
        var[p] = be.add_var();
        be.add_unary(var[p], cost_false[p], cost_true[p]);
    }
    if be.u0.is_empty() {
        return vec![false; n];
    }
    if smoothness > 0.0 {
        for &(p, q) in edges {
            match (var[p] != usize::MAX, var[q] != usize::MAX) {
                (true, true) => be.add_pairwise(var[p], var[q], 0.0, smoothness, smoothness, 0.0),
                (true, false) => be.add_unary(var[p], 0.0, smoothness),
                (false, true) => be.add_unary(var[q], 0.0, smoothness),
                (false, false) => {}
            }
        }
    }
    let x = be.minimize();
    (0..n).map(|p| var[p] != usize::MAX && x[var[p]]).collect()
}

/// Best labeling reachable from `labels` by letting any free point switch to `alpha`.
fn expansion_move(problem: &LabelingProblem, labels: &[usize], alpha: usize, free: Option<&[bool]>) -> Vec<usize> {
    let n = problem.n_points();
    let w = problem.smoothness();
    let degree = problem.degrees();
    // extra data cost of switching p to alpha
    let penalty = |p: usize| problem.data_cost(p, alpha) - problem.data_cost(p, labels[p]);
    // a label stays in use when moving all of its members to alpha costs
    // more data than the smoothness and label-cost savings could ever repay
    let mut excess = vec![0.0; problem.n_labels()];
    for p in 0..n {
        let l = labels[p];
        if l != alpha {
            excess[l] += penalty(p) - w * degree[p] as f64;
        }
    }
    let kept: Vec<bool> = excess.iter().enumerate().map(|(l, &x)| x > problem.label_cost(l)).collect();
    // points that stay put in every optimal move are left out of the cut
    let is_free = |p: usize| {
        let l = labels[p];
        free.is_none_or(|f| f[p])
            && !((l == OUTLIER || kept[l]) && penalty(p) > w * degree[p] as f64)
    };
    let mut var = vec![usize::MAX; n];
    let mut be = BinaryEnergy::default();
    for p in 0..n {
        if labels[p] != alpha && is_free(p) {
            var[p] = be.add_var();
            be.add_unary(var[p], problem.data_cost(p, labels[p]), problem.data_cost(p, alpha));
        }
    }
    if be.u0.is_empty() {
        return labels.to_vec();
    }

    if w > 0.0 {
        let pott = |a: usize, b: usize| if a != b { w } else { 0.0 };
        for &(p, q) in problem.edges() {
            let (lp, lq) = (labels[p], labels[q]);
            match (var[p] != usize::MAX, var[q] != usize::MAX) {
                (true, true) => be.add_pairwise(var[p], var[q], pott(lp, lq), pott(lp, alpha), pott(alpha, lq), 0.0),
                (true, false) => be.add_unary(var[p], pott(lp, lq), pott(alpha, lq)),
                (false, true) => be.add_unary(var[q], pott(lp, lq), pott(lp, alpha)),
                (false, false) => {}
            }
        }
    }

    // label costs: a label other than alpha disappears only if all of its points switch
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); problem.n_labels()];
    let mut pinned = vec![false; problem.n_labels()];
    for p in 0..n {
        members[labels[p]].push(p);
        if var[p] == usize::MAX {
            pinned[labels[p]] = true;
        }
    }
    for l in 0..problem.n_labels() {
        let h = problem.label_cost(l);
        if l == alpha || l == OUTLIER || h <= 0.0 || members[l].is_empty() || pinned[l] {
            continue;
        }
        let y = be.add_var();
        be.add_unary(y, h, 0.0);
        for &p in &members[l] {
            be.add_pairwise(y, var[p], 0.0, 0.0, h, 0.0);
        }
    }
    let h_alpha = problem.label_cost(alpha);
    if alpha != OUTLIER && h_alpha > 0.0 && members[alpha].is_empty() {
        let z = be.add_var();
        be.add_unary(z, 0.0, h_alpha);
        for p in 0..n {
            if var[p] != usize::MAX {
                be.add_pairwise(z, var[p], 0.0, h_alpha, 0.0, 0.0);
            }
        }
    }

    let x = be.minimize();
    let mut out = labels.to_vec();
    for p in 0..n {
        if var[p] != usize::MAX && x[var[p]] {
            out[p] = alpha;
        }
    }
    out
}

fn strictly_better(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-12 * incumbent.abs().max(1.0)
}

/// One pass of expansion moves over every label. Only points flagged in
/// `free` may change label. Moves that do not strictly lower the energy are
/// discarded.
pub fn expansion_cycle(problem: &LabelingProblem, labels: &[usize], free: Option<&[bool]>) -> Labeling {
    let mut current = labels.to_vec();
    let mut e = energy(problem, &current);
    for alpha in 0..problem.n_labels() {
        let cand = expansion_move(problem, &current, alpha, free);
        if cand == current {
            continue;
        }
        let ce = energy(problem, &cand);
        // the incumbent is feasible for the move, so the cut optimum cannot be worse
        assert!(
            ce.total <= e.total + 1e-9 * e.total.abs().max(1.0),
            "expansion on label {alpha} raised the energy from {} to {}",
            e.total,
            ce.total
        );
        if strictly_better(ce.total, e.total) {
            current = cand;
            e = ce;
        }
    }
    Labeling { assignment: current, energy: e }
}

/// Cycles expansion moves over all labels until no move lowers the energy.
pub fn alpha_expansion(problem: &LabelingProblem, initial: &[usize]) -> Labeling {
    let mut best = Labeling::new(problem, initial.to_vec());
    loop {
        let next = expansion_cycle(problem, &best.assignment, None);
        if !strictly_better(next.energy.total, best.energy.total) {
            return best;
        }
        best = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exhaustive_min(problem: &LabelingProblem) -> f64 {
        let (n, l) = (problem.n_points(), problem.n_labels());
        let mut labels = vec![0usize; n];
        let mut best = f64::INFINITY;
        loop {
            best = best.min(energy(problem, &labels).total);
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                labels[k] += 1;
                if labels[k] < l {
                    break;
                }
                labels[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn favored_label_takes_every_point() {
        let n = 10;
        let costs: Vec<f64> = (0..n).flat_map(|_| [4.0, 0.5]).collect();
        let p = LabelingProblem::new(2, costs, vec![], 0.15, 10.0);
        let out = alpha_expansion(&p, &vec![OUTLIER; n]);
        assert!(out.assignment.iter().all(|&l| l == 1));
        assert_eq!(out.energy.total, 0.5 * n as f64 + 10.0);
    }

    #[test]
    fn label_cost_blocks_small_gains() {
        let costs: Vec<f64> = (0..3).flat_map(|_| [4.0, 0.5]).collect();
        let p = LabelingProblem::new(2, costs, vec![], 0.0, 20.0);
        let out = alpha_expansion(&p, &[OUTLIER; 3]);
        assert_eq!(out.assignment, vec![OUTLIER; 3]);
    }

    #[test]
    fn four_points_two_labels_match_exhaustive_search() {
        let costs = vec![
            1.0, 0.2, 3.0, //
            1.0, 0.1, 2.0, //
            1.0, 2.5, 0.3, //
            1.0, 3.0, 0.0,
        ];
        let p = LabelingProblem::new(3, costs, vec![(0, 1), (1, 2), (2, 3)], 0.4, 0.5);
        let out = alpha_expansion(&p, &[OUTLIER; 4]);
        assert!((out.energy.total - exhaustive_min(&p)).abs() < 1e-9);
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let costs = vec![1.0, 0.2, 3.0, 1.0, 0.1, 2.0, 1.0, 2.5, 0.3, 1.0, 3.0, 0.0];
        let p = LabelingProblem::new(3, costs, vec![(0, 1), (1, 2), (2, 3)], 0.4, 0.5);
        let first = alpha_expansion(&p, &[OUTLIER; 4]);
        let again = alpha_expansion(&p, &first.assignment);
        assert_eq!(again, first);
    }

    #[test]
    fn restricted_cycle_only_moves_free_points() {
        let costs: Vec<f64> = (0..4).flat_map(|_| [4.0, 0.5]).collect();
        let p = LabelingProblem::new(2, costs, vec![], 0.0, 0.0);
        let free = [true, false, true, false];
        let out = expansion_cycle(&p, &[OUTLIER; 4], Some(&free));
        assert_eq!(out.assignment, vec![1, OUTLIER, 1, OUTLIER]);
    }

    #[test]
    fn segmentation_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let c0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let c1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let fixed: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
            let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
            let w = rng.gen_range(0.0..1.0);
            let eval = |x: &[bool]| {
                let unary: f64 = (0..n).map(|p| if x[p] { c1[p] } else { c0[p] }).sum();
                unary + w * edges.iter().filter(|&&(p, q)| x[p] != x[q]).count() as f64
            };
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                let x: Vec<bool> = (0..n).map(|p| mask & (1 << p) != 0).collect();
                if (0..n).all(|p| !(fixed[p] && x[p])) {
                    best = best.min(eval(&x));
                }
            }
            let x = binary_segmentation(&c0, &c1, &fixed, &edges, w);
            assert!((0..n).all(|p| !(fixed[p] && x[p])));
            assert!((eval(&x) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn random_small_problems_never_increase_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.gen_range(1..=8);
            let l = rng.gen_range(1..=3);
            let costs: Vec<f64> = (0..n * l).map(|_| rng.gen_range(0.0..2.0)).collect();
            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(0.3)).collect();
            let p = LabelingProblem::new(l, costs, edges, rng.gen_range(0.0..0.5), rng.gen_range(0.0..1.0));
            let init: Vec<usize> = (0..n).map(|_| rng.gen_range(0..l)).collect();
            let e0 = energy(&p, &init).total;
            let out = alpha_expansion(&p, &init);
            assert!(out.energy.total <= e0);
            assert!(out.energy.total >= exhaustive_min(&p) - 1e-9);
        }
    }

    #[test]
    fn pruned_moves_reach_the_move_optimum() {
        // costs span several scales so that both pruning rules fire
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..500 {
            let n = rng.gen_range(1..=10);
            let l = rng.gen_range(2..=4);
            let scale = [0.5, 5.0, 50.0][rng.gen_range(0..3)];
            let costs: Vec<f64> = (0..n * l).map(|_| rng.gen_range(0.0..scale)).collect();
            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(0.3)).collect();
            let p = LabelingProblem::new(l, costs, edges, rng.gen_range(0.0..2.0), rng.gen_range(0.0..40.0));
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..l)).collect();
            for alpha in 0..l {
                let moved = expansion_move(&p, &labels, alpha, None);
                let mut best = f64::INFINITY;
                for mask in 0u32..(1 << n) {
                    let cand: Vec<usize> =
                        (0..n).map(|i| if mask & (1 << i) != 0 { alpha } else { labels[i] }).collect();
                    best = best.min(energy(&p, &cand).total);
                }
                assert!((energy(&p, &moved).total - best).abs() < 1e-9, "alpha {alpha}");
            }
        }
    }
}
