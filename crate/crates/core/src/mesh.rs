//! Structured quadrilateral meshes and degree-of-freedom bookkeeping.
//!
//! Nodes are numbered row-major along x and each node carries two
//! interleaved dofs `(u_x, u_y)`.

use std::collections::BTreeSet;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    X,
    Y,
}

impl Direction {
    pub fn offset(self) -> usize {
        match self {
            Direction::X => 0,
            Direction::Y => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    thickness: f64,
    node_coords: Vec<[f64; 2]>,
    element_connectivity: Vec<[usize; 4]>,
    fixed_dofs: BTreeSet<usize>,
    element_volumes: Vec<f64>,
}

impl Mesh {
    pub fn structured(nx: usize, ny: usize, lx: f64, ly: f64, thickness: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("element counts must be at least 1"));
        }
        if !(lx > 0.0 && ly > 0.0 && thickness > 0.0) {
            return Err(invalid("mesh dimensions and thickness must be positive"));
        }
        let (dx, dy) = (lx / nx as f64, ly / ny as f64);
        let mut node_coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                node_coords.push([i as f64 * dx, j as f64 * dy]);
            }
        }
        let mut element_connectivity = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n0 = j * (nx + 1) + i;
                element_connectivity.push([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1]);
            }
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            thickness,
            node_coords,
            element_connectivity,
            fixed_dofs: BTreeSet::new(),
            element_volumes: vec![dx * dy * thickness; nx * ny],
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn element_size(&self) -> (f64, f64) {
        (self.lx / self.nx as f64, self.ly / self.ny as f64)
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.element_connectivity.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    pub fn connectivity(&self) -> &[[usize; 4]] {
        &self.element_connectivity
    }

    pub fn element_volumes(&self) -> &[f64] {
        &self.element_volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.element_volumes.iter().sum()
    }

    pub fn fixed_dofs(&self) -> &BTreeSet<usize> {
        &self.fixed_dofs
    }

    pub fn node_id(&self, ix: usize, iy: usize) -> usize {
        iy * (self.nx + 1) + ix
    }

    pub fn element_id(&self, ex: usize, ey: usize) -> usize {
        ey * self.nx + ex
    }

    pub fn dof(node: usize, dir: Direction) -> usize {
        2 * node + dir.offset()
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let c = self.element_connectivity[e];
        [
            2 * c[0],
            2 * c[0] + 1,
            2 * c[1],
            2 * c[1] + 1,
            2 * c[2],
            2 * c[2] + 1,
            2 * c[3],
            2 * c[3] + 1,
        ]
    }

    pub fn element_center(&self, e: usize) -> [f64; 2] {
        let c = self.element_connectivity[e];
        let mut out = [0.0; 2];
        for n in c {
            out[0] += 0.25 * self.node_coords[n][0];
            out[1] += 0.25 * self.node_coords[n][1];
        }
        out
    }

    /// Node closest to `(x, y)`; ties resolve to the lowest id.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.node_coords.iter().enumerate() {
            let d = (p[0] - x).powi(2) + (p[1] - y).powi(2);
            if d < best.0 - 1e-12 * (self.lx * self.lx + self.ly * self.ly) {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn fix_dof(&mut self, dof: usize) -> Result<()> {
        if dof >= self.n_dofs() {
            return Err(invalid(format!("dof {dof} out of range")));
        }
        self.fixed_dofs.insert(dof);
        Ok(())
    }

    /// Clamps both dofs of every node for which `pred(x, y)` holds.
    pub fn fix_nodes_where(&mut self, pred: impl Fn(f64, f64) -> bool) {
        for (i, p) in self.node_coords.iter().enumerate() {
            if pred(p[0], p[1]) {
                self.fixed_dofs.insert(2 * i);
                self.fixed_dofs.insert(2 * i + 1);
            }
        }
    }

    pub fn fix_left_edge(&mut self) {
        let tol = 1e-9 * self.lx;
        self.fix_nodes_where(|x, _| x.abs() <= tol);
    }

    pub fn fix_bottom_edge(&mut self) {
        let tol = 1e-9 * self.ly;
        self.fix_nodes_where(|_, y| y.abs() <= tol);
    }

    pub fn dof_map(&self) -> DofMap {
        DofMap::new(self.n_dofs(), &self.fixed_dofs)
    }
}

/// Mapping between global dofs and the reduced set of free (unconstrained) dofs.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    free_of_global: Vec<Option<usize>>,
    global_of_free: Vec<usize>,
}

impl DofMap {
    pub fn new(n_dofs: usize, fixed: &BTreeSet<usize>) -> Self {
        let mut free_of_global = vec![None; n_dofs];
        let mut global_of_free = Vec::with_capacity(n_dofs - fixed.len().min(n_dofs));
        for (g, slot) in free_of_global.iter_mut().enumerate() {
            if !fixed.contains(&g) {
                *slot = Some(global_of_free.len());
                global_of_free.push(g);
            }
        }
        Self {
            free_of_global,
            global_of_free,
        }
    }

    pub fn n_free(&self) -> usize {
        self.global_of_free.len()
    }

    pub fn n_global(&self) -> usize {
        self.free_of_global.len()
    }

    pub fn free(&self, global: usize) -> Option<usize> {
        self.free_of_global[global]
    }

    pub fn global(&self, free: usize) -> usize {
        self.global_of_free[free]
    }

    /// Expands a free-dof vector to all dofs, zero on constrained ones.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.free_of_global
            .iter()
            .map(|f| f.map_or(0.0, |i| free[i]))
            .collect()
    }
}
