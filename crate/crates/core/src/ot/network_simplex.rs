//! Primal network simplex for the balanced transportation problem.
//!
//! Sources `0..n` carry supply `p`, sinks `n..n+m` carry demand `q`, and an
//! artificial root is joined to every node. The spanning tree is kept strongly
//! feasible (leaving arc = last blocking arc of the cycle), which rules out
//! cycling on degenerate pivots. Entering arcs are priced by block search.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::TransportSolution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, PartialEq, Eq)]
enum ArcState {
    Tree,
    Lower,
}

struct Network<T> {
    n: usize,
    m: usize,
    root: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<T>,
    flow: Vec<T>,
    state: Vec<ArcState>,
    // spanning tree, indexed by node
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<T>,
    // scratch for the tree walk
    children: Vec<Vec<usize>>,
    stack: Vec<usize>,
}

pub(super) fn solve<T: Scalar>(
    cost: ArrayView2<'_, T>,
    p: ArrayView1<'_, T>,
    q: ArrayView1<'_, T>,
) -> Result<TransportSolution<T>> {
    let (n, m) = cost.dim();
    if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::InvalidCost { row: i, col: j });
    }
    let mut net = Network::new(cost, p, q);
    net.run()?;

    let coupling = Array2::from_shape_fn((n, m), |(i, j)| net.flow[i * m + j]);
    let value = coupling
        .iter()
        .zip(cost.iter())
        .fold(T::zero(), |acc, (&f, &c)| acc + f * c);
    let dual_source = Array1::from_shape_fn(n, |i| -net.pi[i]);
    let dual_target = Array1::from_shape_fn(m, |j| net.pi[n + j]);
    Ok(TransportSolution {
        value,
        coupling,
        dual_source,
        dual_target,
    })
}

impl<T: Scalar> Network<T> {
    fn new(cost: ArrayView2<'_, T>, p: ArrayView1<'_, T>, q: ArrayView1<'_, T>) -> Self {
        let (n, m) = cost.dim();
        let nodes = n + m;
        let root = nodes;
        let real = n * m;
        let arcs = real + nodes;

        // rebalance demand so both sides carry the same mass
        let sum_p: T = p.sum();
        let sum_q: T = q.sum();
        let scale = sum_p / sum_q;
        let mut supply: Vec<T> = p.iter().copied().collect();
        supply.extend(q.iter().map(|&v| -(v * scale)));

        let mut source = Vec::with_capacity(arcs);
        let mut target = Vec::with_capacity(arcs);
        let mut arc_cost = Vec::with_capacity(arcs);
        let mut max_cost = T::zero();
        for i in 0..n {
            for j in 0..m {
                source.push(i);
                target.push(n + j);
                let c = cost[[i, j]];
                max_cost = max_cost.max(c.abs());
                arc_cost.push(c);
            }
        }
        let art_cost = (max_cost + T::one()) * T::from_usize_lossy(nodes + 1);

        let mut flow = vec![T::zero(); arcs];
        let mut state = vec![ArcState::Lower; arcs];
        let mut parent = vec![root; nodes + 1];
        let mut pred = vec![usize::MAX; nodes + 1];
        let mut pred_up = vec![false; nodes + 1];
        let mut pi = vec![T::zero(); nodes + 1];
        for u in 0..nodes {
            let e = real + u;
            state[e] = ArcState::Tree;
            pred[u] = e;
            if supply[u] >= T::zero() {
                source.push(u);
                target.push(root);
                arc_cost.push(T::zero());
                flow[e] = supply[u];
                pred_up[u] = true;
                pi[u] = T::zero();
            } else {
                source.push(root);
                target.push(u);
                arc_cost.push(art_cost);
                flow[e] = -supply[u];
                pred_up[u] = false;
                pi[u] = art_cost;
            }
        }
        parent[root] = usize::MAX;
        let mut depth = vec![1; nodes + 1];
        depth[root] = 0;

        Self {
            n,
            m,
            root,
            source,
            target,
            cost: arc_cost,
            flow,
            state,
            parent,
            pred,
            pred_up,
            depth,
            pi,
            children: vec![Vec::new(); nodes + 1],
            stack: Vec::new(),
        }
    }

    fn reduced_cost(&self, e: usize) -> T {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    fn run(&mut self) -> Result<()> {
        let real = self.n * self.m;
        let nodes = self.n + self.m;
        let max_abs_cost = self.cost[..real].iter().fold(T::zero(), |a, &c| a.max(c.abs()));
        let eps = T::epsilon() * T::of(8.0) * (max_abs_cost + T::one()) * T::from_usize_lossy(nodes + 1);
        let block = ((real as f64).sqrt().ceil() as usize).max(10).min(real.max(1));
        let max_pivots = 1_000_000usize.max(50 * real);

        let mut next_arc = 0usize;
        let mut pivots = 0usize;
        loop {
            let Some(entering) = self.find_entering(&mut next_arc, block, eps) else {
                break;
            };
            self.pivot(entering);
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::NumericalFailure(format!(
                    "network simplex exceeded {max_pivots} pivots"
                )));
            }
        }

        // leftover mass on artificial arcs means the marginals could not be matched
        let total: T = self.flow[..real].iter().copied().sum();
        let residual: T = self.flow[real..].iter().zip(&self.source[real..]).zip(&self.target[real..])
            .filter(|((_, &s), &t)| s == self.root || t == self.root)
            .map(|((&f, _), _)| f)
            .fold(T::zero(), T::max);
        if residual > T::of(1e-9).max(T::epsilon() * T::of(1e3)) * (total + T::one()) {
            return Err(Error::NumericalFailure(format!(
                "artificial arcs still carry {residual} after optimization"
            )));
        }
        Ok(())
    }

    /// Block-search pricing over real arcs; returns the most negative reduced
    /// cost within the first block that has one.
    fn find_entering(&self, next_arc: &mut usize, block: usize, eps: T) -> Option<usize> {
        let real = self.n * self.m;
        if real == 0 {
            return None;
        }
        let mut best = None;
        let mut best_rc = -eps;
        let mut scanned_in_block = 0;
        let start = *next_arc;
        for k in 0..real {
            let e = (start + k) % real;
            if self.state[e] == ArcState::Lower {
                let rc = self.reduced_cost(e);
                if rc < best_rc {
                    best_rc = rc;
                    best = Some(e);
                }
            }
            scanned_in_block += 1;
            if scanned_in_block == block {
                if best.is_some() {
                    *next_arc = (e + 1) % real;
                    return best;
                }
                scanned_in_block = 0;
            }
        }
        if best.is_some() {
            *next_arc = (start + real - 1) % real;
        }
        best
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    fn pivot(&mut self, entering: usize) {
        let first = self.source[entering];
        let second = self.target[entering];
        let join = self.find_join(first, second);

        // leaving arc: last blocking arc in cycle orientation
        let mut delta = T::infinity();
        let mut u_out = usize::MAX;
        let mut on_first_side = true;
        let mut u = first;
        while u != join {
            if self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    on_first_side = true;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    on_first_side = false;
                }
            }
            u = self.parent[u];
        }
        debug_assert!(u_out != usize::MAX, "transport cycle always has a decreasing arc");

        if delta > T::zero() {
            self.flow[entering] = self.flow[entering] + delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] = if self.pred_up[u] { self.flow[e] - delta } else { self.flow[e] + delta };
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] = if self.pred_up[u] { self.flow[e] + delta } else { self.flow[e] - delta };
                u = self.parent[u];
            }
        }
        let leaving = self.pred[u_out];
        // the blocking arc carries exactly zero now
        self.flow[leaving] = T::zero();
        self.state[leaving] = ArcState::Lower;
        self.state[entering] = ArcState::Tree;

        let (u_in, v_in) = if on_first_side { (first, second) } else { (second, first) };
        // reverse the tree path u_in -> u_out and hang it below v_in
        let mut path = vec![u_in];
        let mut w = u_in;
        while w != u_out {
            w = self.parent[w];
            path.push(w);
        }
        for k in (1..path.len()).rev() {
            let child = path[k - 1];
            let node = path[k];
            self.parent[node] = child;
            self.pred[node] = self.pred[child];
            self.pred_up[node] = !self.pred_up[child];
        }
        self.parent[u_in] = v_in;
        self.pred[u_in] = entering;
        self.pred_up[u_in] = self.source[entering] == u_in;

        self.refresh_tree();
    }

    /// Recomputes depths and node potentials from the parent pointers.
    fn refresh_tree(&mut self) {
        for c in &mut self.children {
            c.clear();
        }
        for u in 0..self.root {
            self.children[self.parent[u]].push(u);
        }
        self.stack.clear();
        self.stack.push(self.root);
        self.depth[self.root] = 0;
        self.pi[self.root] = T::zero();
        while let Some(u) = self.stack.pop() {
            for k in 0..self.children[u].len() {
                let v = self.children[u][k];
                let c = self.cost[self.pred[v]];
                self.depth[v] = self.depth[u] + 1;
                self.pi[v] = if self.pred_up[v] { self.pi[u] - c } else { self.pi[u] + c };
                self.stack.push(v);
            }
        }
    }
}
