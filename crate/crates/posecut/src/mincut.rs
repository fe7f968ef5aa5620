//! Exact minimization of decomposed binary labeling energies by s-t min-cut.
//!
//! Node costs may have either sign; they are reparametrized so both terminal
//! capacities are non-negative and one of them is zero. Pairwise costs must
//! be non-negative (the energy is submodular), otherwise graph construction
//! fails. After max-flow, a node is labeled foreground iff it is reachable
//! from the source in the residual graph, so under exact ties nodes fall to
//! background.

use thiserror::Error;

use crate::energy::{CutProblem, Segmentation};

#[derive(Debug, Error)]
pub enum MinCutError {
    #[error("pairwise cost between nodes {i} and {j} is negative ({cost})")]
    NegativePairwise { i: usize, j: usize, cost: f64 },
    #[error("edge references node {0} but the problem has {1} nodes")]
    BadNode(usize, usize),
}

const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
}

#[derive(Debug, Clone)]
pub struct CutGraph {
    n: usize,
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    offset: f64,
}

pub fn build_cut_graph(prob: &CutProblem) -> Result<CutGraph, MinCutError> {
    let n = prob.unary.len();
    let mut g = CutGraph {
        n,
        arcs: Vec::new(),
        adj: vec![Vec::new(); n + 2],
        offset: 0.0,
    };
    let (s, t) = (n, n + 1);
    for &(i, j, c) in &prob.edges {
        if c < 0.0 {
            return Err(MinCutError::NegativePairwise { i, j, cost: c });
        }
        if i >= n || j >= n {
            return Err(MinCutError::BadNode(i.max(j), n));
        }
        if c > 0.0 {
            g.add_arc(i, j, c, c);
        }
    }
    for (i, &(bg, fg)) in prob.unary.iter().enumerate() {
        let m = bg.min(fg);
        g.offset += m;
        // cutting s->i puts i on the sink side (background) and pays bg
        if bg - m > 0.0 {
            g.add_arc(s, i, bg - m, 0.0);
        }
        if fg - m > 0.0 {
            g.add_arc(i, t, fg - m, 0.0);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct CutResult {
    pub labels: Segmentation,
    /// Minimum energy, recomputed from the labels for exact agreement with
    /// the energy evaluation path.
    pub energy: f64,
    /// Max-flow value plus the reparametrization offset.
    pub flow_energy: f64,
}

pub fn min_cut(prob: &CutProblem) -> Result<CutResult, MinCutError> {
    let mut g = build_cut_graph(prob)?;
    let flow = g.max_flow();
    let labels = g.source_side();
    Ok(CutResult {
        energy: prob.energy_of(&labels),
        labels,
        flow_energy: flow + g.offset,
    })
}

impl CutGraph {
    fn add_arc(&mut self, u: usize, v: usize, cap: f64, rcap: f64) {
        self.adj[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap });
        self.adj[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: rcap });
    }

    /// Dinic's algorithm.
    fn max_flow(&mut self) -> f64 {
        let (s, t) = (self.n, self.n + 1);
        let mut total = 0.0;
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                return total;
            }
            let mut iter = vec![0usize; self.n + 2];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut iter);
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn levels(&self, s: usize) -> Vec<Option<u32>> {
        let mut level = vec![None; self.n + 2];
        level[s] = Some(0);
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if a.cap > RESIDUAL_EPS && level[a.to].is_none() {
                    level[a.to] = Some(level[u].unwrap() + 1);
                    queue.push_back(a.to);
                }
            }
        }
        level
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        limit: f64,
        level: &[Option<u32>],
        iter: &mut [usize],
    ) -> f64 {
        if u == t {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let (to, cap) = (self.arcs[e].to, self.arcs[e].cap);
            if cap > RESIDUAL_EPS && level[to] == level[u].map(|l| l + 1) {
                let pushed = self.augment(to, t, limit.min(cap), level, iter);
                if pushed > 0.0 {
                    self.arcs[e].cap -= pushed;
                    self.arcs[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    /// Residual reachability from the source; reachable nodes are foreground.
    fn source_side(&self) -> Segmentation {
        let mut seen = vec![false; self.n + 2];
        seen[self.n] = true;
        let mut stack = vec![self.n];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if a.cap > RESIDUAL_EPS && !seen[a.to] {
                    seen[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        seen[..self.n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(prob: &CutProblem) -> (f64, Vec<Vec<bool>>) {
        let n = prob.unary.len();
        assert!(n <= 20);
        let mut best = f64::INFINITY;
        let mut argmins = Vec::new();
        for bits in 0..(1u32 << n) {
            let x: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            let e = prob.energy_of(&x);
            if e < best - 1e-12 {
                best = e;
                argmins = vec![x];
            } else if e < best + 1e-12 {
                argmins.push(x);
            }
        }
        (best, argmins)
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> CutProblem {
        let unary = (0..n)
            .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.3) {
                    edges.push((i, j, rng.gen_range(0.0..3.0)));
                }
            }
        }
        CutProblem { unary, edges }
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let n = rng.gen_range(1..=16);
            let prob = random_problem(&mut rng, n);
            let res = min_cut(&prob).unwrap();
            let (best, argmins) = brute_force(&prob);
            assert!(
                (res.energy - best).abs() <= 1e-9 * (1.0 + best.abs()),
                "case {case}: cut {} vs brute {best}",
                res.energy
            );
            assert!(
                (res.flow_energy - best).abs() <= 1e-9 * (1.0 + best.abs()),
                "case {case}: flow {} vs brute {best}",
                res.flow_energy
            );
            assert!(
                argmins
                    .iter()
                    .any(|x| (prob.energy_of(x) - prob.energy_of(&res.labels)).abs() <= 1e-9),
                "case {case}: labels not among minimizers"
            );
        }
    }

    #[test]
    fn ties_fall_to_background() {
        // every labeling of this problem costs the same
        let prob = CutProblem {
            unary: vec![(2.0, 2.0); 4],
            edges: vec![(0, 1, 0.0), (2, 3, 0.0)],
        };
        let res = min_cut(&prob).unwrap();
        assert!(res.labels.iter().all(|&l| !l));
        assert_eq!(res.energy, 8.0);
    }

    #[test]
    fn negative_pairwise_is_rejected() {
        let prob = CutProblem {
            unary: vec![(0.0, 1.0), (1.0, 0.0)],
            edges: vec![(0, 1, -0.5)],
        };
        match build_cut_graph(&prob) {
            Err(MinCutError::NegativePairwise { i: 0, j: 1, cost }) => {
                assert_eq!(cost, -0.5);
            }
            other => panic!("expected negative pairwise error, got {other:?}"),
        }
    }

    #[test]
    fn strong_unaries_decide_labels() {
        let prob = CutProblem {
            unary: vec![(10.0, 0.0), (0.0, 10.0), (10.0, 0.0)],
            edges: vec![(0, 1, 0.5), (1, 2, 0.5)],
        };
        let res = min_cut(&prob).unwrap();
        assert_eq!(res.labels, vec![true, false, true]);
        assert_eq!(res.energy, 1.0);
    }

    #[test]
    fn strong_pairwise_smooths_over_weak_unary() {
        // middle node weakly prefers bg but both neighbors are strongly fg
        let prob = CutProblem {
            unary: vec![(10.0, 0.0), (0.0, 0.1), (10.0, 0.0)],
            edges: vec![(0, 1, 5.0), (1, 2, 5.0)],
        };
        let res = min_cut(&prob).unwrap();
        assert_eq!(res.labels, vec![true, true, true]);
    }
}
