//! Discretization lattices with adjacency: periodic grids on circle/torus and
//! a subdivided icosahedron on the sphere.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, SPHERE_RADIUS};

/// Deepest icosphere subdivision (655 362 nodes).
pub const MAX_SPHERE_LEVEL: usize = 8;

#[derive(Clone, Debug)]
pub struct Grid {
    manifold: Manifold,
    resolution: usize,
    nodes: Vec<Point>,
    neighbors: Vec<Vec<usize>>,
    /// Cell volumes; equal on every grid built here and summing to one.
    weights: Vec<f64>,
}

impl Grid {
    /// `resolution` is nodes per axis on circle/torus; on the sphere it is the
    /// number of nodes wanted along a great circle, which selects the
    /// subdivision level `L` with `5·2^L ≥ resolution`.
    pub fn new(m: Manifold, resolution: usize) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::Argument(format!("grid resolution must be ≥ 3, got {resolution}")));
        }
        let (nodes, neighbors) = match m {
            Manifold::Circle | Manifold::Torus(_) => periodic(m, resolution)?,
            Manifold::Sphere => {
                let mut level = 0;
                while 5 << level < resolution && level < MAX_SPHERE_LEVEL {
                    level += 1;
                }
                icosphere(level)
            }
        };
        let w = 1.0 / nodes.len() as f64;
        let weights = vec![w; nodes.len()];
        Ok(Grid { manifold: m, resolution, nodes, neighbors, weights })
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest distance between adjacent nodes.
    pub fn spacing(&self) -> f64 {
        let m = self.manifold;
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().map(move |&j| (i, j)))
            .map(|(i, j)| m.distance(&self.nodes[i], &self.nodes[j]))
            .fold(0.0, f64::max)
    }

    /// Nodes within `radius` of `center`.
    pub fn ball(&self, center: &Point, radius: f64) -> Vec<usize> {
        let m = self.manifold;
        (0..self.len()).filter(|&i| m.distance(&self.nodes[i], center) <= radius).collect()
    }

    /// Node closest to `x`.
    pub fn nearest(&self, x: &Point) -> usize {
        let m = self.manifold;
        (0..self.len())
            .min_by(|&a, &b| m.distance(&self.nodes[a], x).total_cmp(&m.distance(&self.nodes[b], x)))
            .expect("grid is nonempty")
    }
}

fn periodic(m: Manifold, n: usize) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    let d = m.coord_len();
    let total = n
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| Error::Argument(format!("grid {n}^{d} is too large")))?;
    let mut nodes = Vec::with_capacity(total);
    let mut neighbors = Vec::with_capacity(total);
    let stride = |axis: usize| n.pow((d - 1 - axis) as u32);
    for flat in 0..total {
        let mut coords = [0.0; 3];
        let mut rest = flat;
        for axis in (0..d).rev() {
            coords[axis] = (rest % n) as f64 / n as f64;
            rest /= n;
        }
        nodes.push(m.point(&coords[..d])?);
        let mut ns = Vec::with_capacity(2 * d);
        for axis in 0..d {
            let st = stride(axis);
            let idx = (flat / st) % n;
            let up = if idx + 1 == n { flat + st - n * st } else { flat + st };
            let down = if idx == 0 { flat + (n - 1) * st } else { flat - st };
            ns.push(down);
            ns.push(up);
        }
        neighbors.push(ns);
    }
    Ok((nodes, neighbors))
}

fn icosphere(level: usize) -> (Vec<Point>, Vec<Vec<usize>>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let normalize = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    for v in &mut verts {
        *v = normalize(*v);
    }
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (va, vb) = (verts[a], verts[b]);
                verts.push(normalize([va[0] + vb[0], va[1] + vb[1], va[2] + vb[2]]));
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for [a, b, c] in &faces {
        for (u, v) in [(*a, *b), (*b, *c), (*c, *a)] {
            if !neighbors[u].contains(&v) {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
    }
    for ns in &mut neighbors {
        ns.sort_unstable();
    }
    let nodes = verts
        .iter()
        .map(|v| {
            Manifold::Sphere
                .point(&[v[0] * SPHERE_RADIUS, v[1] * SPHERE_RADIUS, v[2] * SPHERE_RADIUS])
                .expect("unit vector")
        })
        .collect();
    (nodes, neighbors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_wraps() {
        let g = Grid::new(Manifold::Circle, 8).unwrap();
        assert_eq!(g.neighbors(0), &[7, 1]);
        assert_eq!(g.neighbors(7), &[6, 0]);
        assert!((g.spacing() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn torus_adjacency_is_symmetric() {
        let g = Grid::new(Manifold::Torus(2), 5).unwrap();
        assert_eq!(g.len(), 25);
        for i in 0..g.len() {
            assert_eq!(g.neighbors(i).len(), 4);
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
                assert!((g.manifold().distance(g.node(i), g.node(j)) - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn icosphere_counts() {
        let g = Grid::new(Manifold::Sphere, 20).unwrap();
        // level 2: 10·4² + 2 nodes, five or six neighbours each
        assert_eq!(g.len(), 162);
        assert!((0..g.len()).all(|i| matches!(g.neighbors(i).len(), 5 | 6)));
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_grids_rejected() {
        assert!(Grid::new(Manifold::Circle, 2).is_err());
        assert!(Grid::new(Manifold::Torus(3), 1 << 10).is_err());
    }
}
