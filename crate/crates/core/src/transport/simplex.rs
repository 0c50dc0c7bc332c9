//! Transportation simplex on the complete bipartite network.
//!
//! Nodes `0..d` are the source bins, nodes `d..2d` the sink bins. A basis is
//! a spanning tree with `2d - 1` arcs; its flows are fixed by the marginals,
//! and the node potentials by `u_i + v_j = C_ij` on tree arcs. Entering arcs
//! are priced with Dantzig's rule. After a degenerate pivot the solver
//! switches to Bland's rule (lowest cell index for both the entering and
//! the leaving arc) until the next pivot that moves flow, which rules out
//! cycling.

use crate::error::{Error, Result};

/// Spanning-tree basis of a transportation problem.
///
/// A basis belongs to one pair of marginals; the same tree may be reused
/// with any cost matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    dim: usize,
    arcs: Vec<(usize, usize)>,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Basic cells `(row, col)`, `2d - 1` of them.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }
}

pub(crate) struct Outcome {
    pub basis: Basis,
    pub flows: Vec<f64>,
    pub pivots: usize,
}

// Below this, a pivot is considered degenerate.
const DEGENERATE_STEP: f64 = 1e-15;
// Negative tree flows above this are rounding noise and are clamped to zero.
const FLOW_SLACK: f64 = 1e-10;

struct Network<'a> {
    d: usize,
    cost: &'a [f64],
    arcs: Vec<(usize, usize)>,
    flows: Vec<f64>,
    in_basis: Vec<bool>,
    adj: Vec<Vec<(usize, usize)>>,
    pot: Vec<f64>,
    parent: Vec<Option<(usize, usize)>>,
    stack: Vec<usize>,
}

impl<'a> Network<'a> {
    fn new(d: usize, cost: &'a [f64], arcs: Vec<(usize, usize)>, flows: Vec<f64>) -> Self {
        let mut in_basis = vec![false; d * d];
        for &(i, j) in &arcs {
            in_basis[i * d + j] = true;
        }
        Network {
            d,
            cost,
            arcs,
            flows,
            in_basis,
            adj: vec![Vec::with_capacity(4); 2 * d],
            pot: vec![0.0; 2 * d],
            parent: vec![None; 2 * d],
            stack: Vec::with_capacity(2 * d),
        }
    }

    fn rebuild_adjacency(&mut self) {
        for list in &mut self.adj {
            list.clear();
        }
        let d = self.d;
        for (slot, &(i, j)) in self.arcs.iter().enumerate() {
            self.adj[i].push((d + j, slot));
            self.adj[d + j].push((i, slot));
        }
    }

    /// Potentials with `u_0 = 0`, stored as `pot[i] = u_i`, `pot[d + j] = v_j`.
    fn update_potentials(&mut self) {
        let d = self.d;
        self.parent.iter_mut().for_each(|p| *p = None);
        self.stack.clear();
        self.stack.push(0);
        self.pot[0] = 0.0;
        let mut seen = vec![false; 2 * d];
        seen[0] = true;
        while let Some(node) = self.stack.pop() {
            for k in 0..self.adj[node].len() {
                let (next, slot) = self.adj[node][k];
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = self.arcs[slot];
                let c = self.cost[i * d + j];
                self.pot[next] = c - self.pot[node];
                self.stack.push(next);
            }
        }
    }

    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.d + j] - self.pot[i] - self.pot[self.d + j]
    }

    fn entering(&self, bland: bool, tol: f64) -> Option<(usize, usize)> {
        let d = self.d;
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..d {
            for j in 0..d {
                if self.in_basis[i * d + j] {
                    continue;
                }
                let rc = self.reduced_cost(i, j);
                if rc >= -tol {
                    continue;
                }
                if bland {
                    return Some((i, j));
                }
                if best.is_none_or(|(_, b)| rc < b) {
                    best = Some(((i, j), rc));
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    /// Tree arcs on the path from row node `i` to column node `d + j`, listed
    /// from the row end.
    fn tree_path(&mut self, i: usize, j: usize) -> Vec<usize> {
        let d = self.d;
        self.parent.iter_mut().for_each(|p| *p = None);
        self.stack.clear();
        self.stack.push(i);
        let target = d + j;
        let mut seen = vec![false; 2 * d];
        seen[i] = true;
        'search: while let Some(node) = self.stack.pop() {
            for &(next, slot) in &self.adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                self.parent[next] = Some((node, slot));
                if next == target {
                    break 'search;
                }
                self.stack.push(next);
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let (prev, slot) = self.parent[node].expect("basis is a spanning tree");
            path.push(slot);
            node = prev;
        }
        path.reverse();
        path
    }

    /// Pivots `(i, j)` into the basis. Returns the flow moved around the cycle.
    fn pivot(&mut self, i: usize, j: usize) -> f64 {
        let d = self.d;
        let path = self.tree_path(i, j);
        // Arcs at even positions lose flow, odd positions gain it.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for &slot in path.iter().step_by(2) {
            let (a, b) = self.arcs[slot];
            let x = self.flows[slot];
            let better = x < theta
                || (x == theta && a * d + b < self.arcs[leave].0 * d + self.arcs[leave].1);
            if better {
                theta = x;
                leave = slot;
            }
        }
        for (k, &slot) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.flows[slot] -= theta;
            } else {
                self.flows[slot] += theta;
            }
        }
        let (a, b) = self.arcs[leave];
        self.in_basis[a * d + b] = false;
        self.in_basis[i * d + j] = true;
        self.arcs[leave] = (i, j);
        self.flows[leave] = theta;
        theta
    }
}

/// Northwest-corner rule; always yields a spanning staircase of `2d - 1` cells.
fn northwest_corner(r: &[f64], c: &[f64]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let d = r.len();
    let mut supply = r.to_vec();
    let mut demand = c.to_vec();
    let mut arcs = Vec::with_capacity(2 * d - 1);
    let mut flows = Vec::with_capacity(2 * d - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = supply[i].min(demand[j]);
        arcs.push((i, j));
        flows.push(x);
        supply[i] -= x;
        demand[j] -= x;
        if i == d - 1 && j == d - 1 {
            break;
        }
        if i == d - 1 {
            j += 1;
        } else if j == d - 1 || supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    (arcs, flows)
}

/// Flows carried by a spanning tree for the given marginals, or `None` when
/// the arcs do not form a spanning tree or the flows are infeasible.
fn tree_flows(d: usize, arcs: &[(usize, usize)], r: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    if arcs.len() != 2 * d - 1 || arcs.iter().any(|&(i, j)| i >= d || j >= d) {
        return None;
    }
    let mut residual: Vec<f64> = r.iter().chain(c.iter()).copied().collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); 2 * d];
    for (slot, &(i, j)) in arcs.iter().enumerate() {
        incident[i].push(slot);
        incident[d + j].push(slot);
    }
    let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
    let mut done = vec![false; arcs.len()];
    let mut flows = vec![0.0; arcs.len()];
    let mut leaves: Vec<usize> = (0..2 * d).filter(|&n| degree[n] == 1).collect();
    let mut processed = 0;
    while let Some(node) = leaves.pop() {
        if degree[node] != 1 {
            continue;
        }
        let slot = *incident[node].iter().find(|&&s| !done[s])?;
        let (i, j) = arcs[slot];
        let other = if node == i { d + j } else { i };
        let x = residual[node];
        flows[slot] = x;
        residual[other] -= x;
        residual[node] = 0.0;
        done[slot] = true;
        processed += 1;
        degree[node] = 0;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    if processed != arcs.len() || flows.iter().any(|&x| x < -FLOW_SLACK) {
        return None;
    }
    flows.iter_mut().for_each(|x| *x = x.max(0.0));
    Some(flows)
}

pub(crate) fn solve(cost: &[f64], r: &[f64], c: &[f64], warm: Option<&Basis>) -> Result<Outcome> {
    let d = r.len();
    let start = warm
        .filter(|b| b.dim == d)
        .and_then(|b| tree_flows(d, &b.arcs, r, c).map(|f| (b.arcs.clone(), f)));
    let (arcs, flows) = start.unwrap_or_else(|| northwest_corner(r, c));

    let scale = cost.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    let max_pivots = 50 * d * d + 100;

    let mut net = Network::new(d, cost, arcs, flows);
    let mut pivots = 0;
    let mut bland = false;
    loop {
        net.rebuild_adjacency();
        net.update_potentials();
        let Some((i, j)) = net.entering(bland, tol) else {
            break;
        };
        if pivots == max_pivots {
            return Err(Error::PivotLimit(max_pivots));
        }
        let theta = net.pivot(i, j);
        bland = theta <= DEGENERATE_STEP;
        pivots += 1;
    }
    Ok(Outcome { basis: Basis { dim: d, arcs: net.arcs }, flows: net.flows, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn northwest_corner_is_spanning_and_feasible() {
        let r = [0.5, 0.0, 0.5];
        let c = [0.5, 0.5, 0.0];
        let (arcs, flows) = northwest_corner(&r, &c);
        assert_eq!(arcs.len(), 5);
        let f = tree_flows(3, &arcs, &r, &c).unwrap();
        for (a, b) in f.iter().zip(&flows) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn tree_flows_rejects_cycles() {
        // (0,0),(0,1),(1,0),(1,1) contains a cycle.
        let arcs = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)];
        assert!(tree_flows(3, &arcs, &[0.3, 0.3, 0.4], &[0.3, 0.3, 0.4]).is_none());
    }

    #[test]
    fn degenerate_zero_mass_problem_terminates() {
        let d = 6;
        let mut r = vec![0.0; d];
        let mut c = vec![0.0; d];
        r[0] = 0.5;
        r[3] = 0.5;
        c[1] = 0.5;
        c[3] = 0.5;
        let cost: Vec<f64> = (0..d * d).map(|k| ((k * 7) % 5) as f64).collect();
        let out = solve(&cost, &r, &c, None).unwrap();
        assert_eq!(out.basis.arcs.len(), 2 * d - 1);
    }
}
