//! Uniform right-triangle meshes of the unit square.
//!
//! Nodes are numbered lexicographically by (row, column), every square is cut
//! along its bottom-left to top-right diagonal, and nodes on the boundary of
//! the square carry homogeneous Dirichlet conditions.

use std::io::Write;

use crate::error::{Error, Result};

/// Largest supported level exponent; `2^12` intervals per side is already far
/// beyond desk scale.
pub const MAX_LEVEL_EXPONENT: u32 = 12;

pub type Point = [f64; 2];

#[derive(Debug, Clone)]
pub struct TriMesh {
    level: u32,
    n: usize,
    h: f64,
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    /// Interior DOF index of every node, `None` on the boundary.
    interior_index: Vec<Option<usize>>,
    /// Node index of every interior DOF.
    interior_nodes: Vec<usize>,
}

/// Builds the mesh with `2^m` intervals per side.
pub fn build_uniform_mesh(level_exponent: i64) -> Result<TriMesh> {
    if level_exponent < 1 || level_exponent > MAX_LEVEL_EXPONENT as i64 {
        return Err(Error::InvalidMeshLevel(level_exponent));
    }
    let level = level_exponent as u32;
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let side = n + 1;

    let mut nodes = Vec::with_capacity(side * side);
    let mut boundary = Vec::with_capacity(side * side);
    let mut interior_index = Vec::with_capacity(side * side);
    let mut interior_nodes = Vec::with_capacity((n - 1) * (n - 1));
    for row in 0..side {
        for col in 0..side {
            nodes.push([col as f64 * h, row as f64 * h]);
            let on_boundary = row == 0 || col == 0 || row == n || col == n;
            boundary.push(on_boundary);
            if on_boundary {
                interior_index.push(None);
            } else {
                interior_index.push(Some(interior_nodes.len()));
                interior_nodes.push(row * side + col);
            }
        }
    }

    let mut elements = Vec::with_capacity(2 * n * n);
    for row in 0..n {
        for col in 0..n {
            let v00 = row * side + col;
            let v10 = v00 + 1;
            let v01 = v00 + side;
            let v11 = v01 + 1;
            elements.push([v00, v10, v11]);
            elements.push([v00, v11, v01]);
        }
    }

    Ok(TriMesh {
        level,
        n,
        h,
        nodes,
        elements,
        boundary,
        interior_index,
        interior_nodes,
    })
}

impl TriMesh {
    pub fn level_exponent(&self) -> u32 {
        self.level
    }

    /// Number of intervals per side.
    pub fn n_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn signed_area(&self, element: usize) -> f64 {
        let [a, b, c] = self.elements[element];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Extends an interior vector by zeros on the boundary.
    pub fn expand_interior(&self, interior: &[f64]) -> Result<Vec<f64>> {
        check_len(self.num_interior(), interior.len())?;
        let mut full = vec![0.0; self.num_nodes()];
        for (&node, &v) in self.interior_nodes.iter().zip(interior) {
            full[node] = v;
        }
        Ok(full)
    }

    pub fn restrict_to_interior(&self, full: &[f64]) -> Result<Vec<f64>> {
        check_len(self.num_nodes(), full.len())?;
        Ok(self.interior_nodes.iter().map(|&node| full[node]).collect())
    }

    /// Writes one `x y` line per node followed by one `i j k` line per element.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.nodes {
            writeln!(out, "{} {}", p[0], p[1])?;
        }
        for e in &self.elements {
            writeln!(out, "{} {} {}", e[0], e[1], e[2])?;
        }
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Interpolates a nodal vector from `coarse` onto the nodes of `fine`.
///
/// Accepts either full nodal vectors or interior-only vectors; the output has
/// the same kind as the input. Both meshes must come from
/// [`build_uniform_mesh`], so every fine node lies in a known coarse triangle.
pub fn prolongate(u_coarse: &[f64], coarse: &TriMesh, fine: &TriMesh) -> Result<Vec<f64>> {
    if coarse.n > fine.n || !fine.n.is_multiple_of(coarse.n) {
        return Err(Error::MeshMismatch {
            coarse: coarse.n,
            fine: fine.n,
        });
    }
    let interior_input = u_coarse.len() == coarse.num_interior();
    let full_coarse;
    let uc: &[f64] = if interior_input {
        full_coarse = coarse.expand_interior(u_coarse)?;
        &full_coarse
    } else {
        check_len(coarse.num_nodes(), u_coarse.len())?;
        u_coarse
    };
    if coarse.n == fine.n {
        return Ok(u_coarse.to_vec());
    }

    let ratio = fine.n / coarse.n;
    let cside = coarse.n + 1;
    let fside = fine.n + 1;
    let mut out = vec![0.0; fine.num_nodes()];
    for row in 0..fside {
        let (crow, ry) = split(row, ratio, coarse.n);
        for col in 0..fside {
            let (ccol, rx) = split(col, ratio, coarse.n);
            let v00 = uc[crow * cside + ccol];
            let value = if rx == 0 && ry == 0 {
                v00
            } else {
                let v10 = uc[crow * cside + ccol + 1];
                let v01 = uc[(crow + 1) * cside + ccol];
                let v11 = uc[(crow + 1) * cside + ccol + 1];
                let x = rx as f64 / ratio as f64;
                let y = ry as f64 / ratio as f64;
                if rx >= ry {
                    v00 + (v10 - v00) * x + (v11 - v10) * y
                } else {
                    v00 + (v11 - v01) * x + (v01 - v00) * y
                }
            };
            out[row * fside + col] = value;
        }
    }
    if interior_input {
        fine.restrict_to_interior(&out)
    } else {
        Ok(out)
    }
}

/// Coarse cell index and local offset of a fine grid line; the last line is
/// attributed to the last cell so the stencil never reads past the edge.
fn split(index: usize, ratio: usize, coarse_n: usize) -> (usize, usize) {
    let cell = (index / ratio).min(coarse_n - 1);
    (cell, index - cell * ratio)
}
