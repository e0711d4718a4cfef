//! Grid fields, brute-force minimizers and the critical elevation `c(U)`.
//!
//! The elevation of a path `φ` from `θ` to `y` is
//! `e(φ) = max_t U(φ(t)) - U(θ) - U(y) + min U`, and
//! `c(U) = 2 max_{θ,y} min_φ e(φ)`. On a grid the inner `min_φ max U` is a
//! bottleneck (minimax) path value, which Kruskal's algorithm delivers for
//! all pairs at once: when two components merge at edge weight `w`, every
//! cross pair has bottleneck `w`, and the worst cross pair is the pair of
//! component minima.

pub mod grid;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::Point;

pub use grid::Grid;

/// Values of a function on the nodes of a [`Grid`].
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Evaluate `f` at every node, in parallel.
    pub fn evaluate<F>(grid: Arc<Grid>, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Sync,
    {
        let values: Vec<f64> = grid.nodes().par_iter().map(&f).collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("field has non-finite values".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn argmin(&self) -> usize {
        (0..self.values.len())
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .expect("nonempty field")
    }

    pub fn min(&self) -> f64 {
        self.values[self.argmin()]
    }

    /// Rows `coord_1,…,coord_k,value`.
    pub fn to_csv(&self) -> String {
        let k = self.grid.manifold().coord_len();
        let mut out: String =
            (1..=k).map(|i| format!("x{i},")).collect::<String>() + "value\n";
        for (p, v) in self.grid.nodes().iter().zip(&self.values) {
            out.push_str(&p.to_csv());
            out.push_str(&format!(",{v}\n"));
        }
        out
    }
}

/// A local-minimum basin: the plateau of locally minimal nodes it is named by.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Basin {
    pub node: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Minimizers {
    /// Nodes within `gap_tol` of the global minimum.
    pub q: Vec<usize>,
    /// `q` split into adjacency-connected clusters.
    pub clusters: Vec<Vec<usize>>,
    /// Local-minimum basins sorted by value.
    pub basins: Vec<Basin>,
    /// Second-best basin value minus the best; `+∞` with a single basin.
    pub uniqueness_gap: f64,
}

/// Brute-force minimizer set of a field.
pub fn minimizers(field: &ScalarField, gap_tol: f64) -> Minimizers {
    let g = &field.grid;
    let v = &field.values;
    let n = v.len();
    let is_local_min: Vec<bool> =
        (0..n).map(|i| g.neighbors(i).iter().all(|&j| v[i] <= v[j])).collect();
    // merge adjacent equal-valued local minima into plateaus
    let mut seen = vec![false; n];
    let mut basins = Vec::new();
    for i in 0..n {
        if !is_local_min[i] || seen[i] {
            continue;
        }
        seen[i] = true;
        let mut stack = vec![i];
        let mut rep = i;
        while let Some(u) = stack.pop() {
            rep = rep.min(u);
            for &w in g.neighbors(u) {
                if !seen[w] && is_local_min[w] && v[w] == v[u] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        basins.push(Basin { node: rep, value: v[rep] });
    }
    basins.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.node.cmp(&b.node)));
    let uniqueness_gap = if basins.len() > 1 { basins[1].value - basins[0].value } else { f64::INFINITY };

    let best = basins[0].value;
    let in_q: Vec<bool> = v.iter().map(|&x| x <= best + gap_tol).collect();
    let q: Vec<usize> = (0..n).filter(|&i| in_q[i]).collect();
    let mut clusters = Vec::new();
    let mut seen = vec![false; n];
    for &i in &q {
        if seen[i] {
            continue;
        }
        seen[i] = true;
        let mut cluster = vec![i];
        let mut stack = vec![i];
        while let Some(u) = stack.pop() {
            for &w in g.neighbors(u) {
                if in_q[w] && !seen[w] {
                    seen[w] = true;
                    cluster.push(w);
                    stack.push(w);
                }
            }
        }
        cluster.sort_unstable();
        clusters.push(cluster);
    }
    Minimizers { q, clusters, basins, uniqueness_gap }
}

#[derive(Clone, Debug, Serialize)]
pub struct ElevationReport {
    /// `c(U)` on the grid.
    pub c_u: f64,
    /// Pair of nodes realizing the maximum.
    pub argpair: (usize, usize),
    /// Minimax path between the pair (along the minimum spanning tree).
    pub barrier_path: Vec<usize>,
    /// Highest value along `barrier_path`.
    pub barrier_value: f64,
    pub global_min: f64,
}

struct DisjointSets {
    parent: Vec<usize>,
    min_value: Vec<f64>,
    min_node: Vec<usize>,
}

impl DisjointSets {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Exact grid value of `c(U)` via Kruskal merges.
pub fn elevation_constant(field: &ScalarField) -> ElevationReport {
    let g = &field.grid;
    let v = &field.values;
    let n = v.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * 3);
    for i in 0..n {
        for &j in g.neighbors(i) {
            if i < j {
                edges.push((v[i].max(v[j]), i, j));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let global_arg = field.argmin();
    let global_min = v[global_arg];
    let mut sets = DisjointSets { parent: (0..n).collect(), min_value: v.clone(), min_node: (0..n).collect() };
    let mut tree: Vec<Vec<usize>> = vec![Vec::new(); n];
    // θ = y = argmin gives elevation zero
    let mut best = (0.0, global_arg, global_arg, global_min);
    for (w, i, j) in edges {
        let (ri, rj) = (sets.find(i), sets.find(j));
        if ri == rj {
            continue;
        }
        let (a, b) = (sets.min_value[ri], sets.min_value[rj]);
        let cand = (w - a.max(b)) - (a.min(b) - global_min);
        if cand > best.0 {
            best = (cand, sets.min_node[ri], sets.min_node[rj], w);
        }
        tree[i].push(j);
        tree[j].push(i);
        let (keep, drop) = if ri < rj { (ri, rj) } else { (rj, ri) };
        sets.parent[drop] = keep;
        if sets.min_value[drop] < sets.min_value[keep] {
            sets.min_value[keep] = sets.min_value[drop];
            sets.min_node[keep] = sets.min_node[drop];
        }
    }
    let (c_half, a, b, barrier_value) = best;
    let barrier_path = tree_path(&tree, a, b);
    ElevationReport { c_u: 2.0 * c_half, argpair: (a, b), barrier_path, barrier_value, global_min }
}

fn tree_path(tree: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; tree.len()];
    prev[from] = from;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &w in &tree[u] {
            if prev[w] == usize::MAX {
                prev[w] = u;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut u = to;
    while u != from {
        u = prev[u];
        path.push(u);
    }
    path.reverse();
    path
}

/// Safety-inflated exploration constant: `1.1·c(U) + 0.1`.
pub fn recommended_k(c_u: f64) -> f64 {
    1.1 * c_u + 0.1
}

/// `μ_β(N) = Σ_N w e^{-2βU} / Σ w e^{-2βU}`.
pub fn gibbs_mass(field: &ScalarField, beta: f64, neighborhood: &[usize]) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Argument(format!("β must be ≥ 0, got {beta}")));
    }
    let min = field.min();
    let w = field.grid.weights();
    let density: Vec<f64> =
        field.values.iter().zip(w).map(|(u, w)| w * (-2.0 * beta * (u - min)).exp()).collect();
    let total: f64 = density.iter().sum();
    let mut mask = vec![false; density.len()];
    for &i in neighborhood {
        if i >= mask.len() {
            return Err(Error::Argument(format!("node {i} is outside the grid")));
        }
        mask[i] = true;
    }
    let inside: f64 = density.iter().zip(&mask).filter(|(_, m)| **m).map(|(d, _)| d).sum();
    Ok(inside / total)
}
