//! P1 finite-element assembly of the parametric stiffness and the mass matrix.
//!
//! Every triangle uses the interior three-point rule with barycentric nodes
//! `(2/3, 1/6, 1/6)` and permutations, which integrates quadratics exactly.
//! The diffusion term is integrated as `mean_q a(x_q) * |T| * G G^T`, the
//! reaction and mass terms as `|T|/3 * sum_q w(x_q) phi_i(x_q) phi_j(x_q)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::problems::{CoefficientSeries, ParamVector};
use crate::sparse::SparseSymMatrix;

/// Table entries (quadrature nodes times terms) above which the coefficient
/// terms are evaluated on the fly instead of cached.
pub const TERM_TABLE_BUDGET: usize = 1 << 23;

const BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Sparsity pattern shared by all matrices on one mesh, with the position of
/// every local element entry in it.
#[derive(Debug, Clone)]
struct Pattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `scatter[9 * e + 3 * a + b]`: position of local entry `(a, b)` of
    /// element `e`, or `usize::MAX` if it is dropped.
    scatter: Vec<usize>,
}

impl Pattern {
    /// `dof[node]` gives the matrix row of a node, `None` to drop it.
    fn build(mesh: &TriMesh, dof: impl Fn(usize) -> Option<usize>, n: usize) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in mesh.elements() {
            for &p in e {
                if let Some(i) = dof(p) {
                    for &q in e {
                        if let Some(j) = dof(q) {
                            rows[i].push(j);
                        }
                    }
                }
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let mut scatter = Vec::with_capacity(9 * mesh.elements().len());
        for e in mesh.elements() {
            for &p in e {
                for &q in e {
                    let pos = match (dof(p), dof(q)) {
                        (Some(i), Some(j)) => {
                            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                            row_ptr[i] + row.binary_search(&j).expect("pattern entry")
                        }
                        _ => usize::MAX,
                    };
                    scatter.push(pos);
                }
            }
        }
        Self {
            row_ptr,
            col_idx,
            scatter,
        }
    }

    fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn matrix(&self, values: Vec<f64>) -> SparseSymMatrix {
        SparseSymMatrix::from_csr_unchecked(
            self.dim(),
            self.row_ptr.clone(),
            self.col_idx.clone(),
            values,
        )
        .expect("assembled pattern is valid")
    }
}

/// Which rows and columns an assembled matrix keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dofs {
    AllNodes,
    Interior,
}

/// Precomputed geometry and coefficient tables for one mesh, one problem and
/// one truncation dimension.
#[derive(Debug)]
pub struct Assembler {
    mesh: Arc<TriMesh>,
    problem: CoefficientSeries,
    s: usize,
    full: Pattern,
    interior: Pattern,
    /// `|T| G G^T` per element, row major.
    local_stiffness: Vec<[f64; 9]>,
    areas: Vec<f64>,
    quad_points: Vec<Point>,
    a0: Vec<f64>,
    b0: Vec<f64>,
    c: Vec<f64>,
    /// `a_j` (and `b_j`) at every quadrature node, `s` values per node.
    a_table: Option<Vec<f64>>,
    b_table: Option<Vec<f64>>,
}

impl Assembler {
    pub fn new(mesh: Arc<TriMesh>, problem: &CoefficientSeries, s: usize) -> Self {
        let full = Pattern::build(&mesh, Some, mesh.num_nodes());
        let interior = Pattern::build(&mesh, |p| mesh.interior_index(p), mesh.num_interior());

        let ne = mesh.elements().len();
        let mut local_stiffness = Vec::with_capacity(ne);
        let mut areas = Vec::with_capacity(ne);
        let mut quad_points = Vec::with_capacity(3 * ne);
        let nodes = mesh.nodes();
        for (e, tri) in mesh.elements().iter().enumerate() {
            let [p0, p1, p2] = tri.map(|v| nodes[v]);
            let area = mesh.signed_area(e);
            // gradients of the barycentric coordinates
            let inv = 1.0 / (2.0 * area);
            let g = [
                [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
                [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
                [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
            ];
            let mut k = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    k[3 * a + b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
            local_stiffness.push(k);
            areas.push(area);
            for l in &BARY {
                quad_points.push([
                    l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                    l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
                ]);
            }
        }
        let a0 = quad_points.iter().map(|&x| problem.a0(x)).collect();
        let b0 = quad_points.iter().map(|&x| problem.b0(x)).collect();
        let c = quad_points.iter().map(|&x| problem.c(x)).collect();

        let nq = quad_points.len();
        let tabulate = s > 0 && nq.saturating_mul(s) <= TERM_TABLE_BUDGET;
        let (a_table, b_table) = if tabulate && problem.has_parametric_diffusion() {
            let with_b = problem.has_parametric_absorption();
            let mut at = vec![0.0; nq * s];
            let mut bt = if with_b {
                vec![0.0; nq * s]
            } else {
                Vec::new()
            };
            for (q, &x) in quad_points.iter().enumerate() {
                let b_row: &mut [f64] = if with_b {
                    &mut bt[q * s..(q + 1) * s]
                } else {
                    &mut []
                };
                problem.fill_terms(x, &mut at[q * s..(q + 1) * s], b_row);
            }
            (Some(at), with_b.then_some(bt))
        } else {
            (None, None)
        };

        Self {
            mesh,
            problem: problem.clone(),
            s,
            full,
            interior,
            local_stiffness,
            areas,
            quad_points,
            a0,
            b0,
            c,
            a_table,
            b_table,
        }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn truncation(&self) -> usize {
        self.s
    }

    pub fn problem(&self) -> &CoefficientSeries {
        &self.problem
    }

    /// Abstract work of one stiffness assembly: coefficient evaluation at
    /// every quadrature node plus the element scatter.
    pub fn assembly_work(&self) -> f64 {
        let terms = if self.problem.has_parametric_absorption() {
            2 * self.s
        } else {
            self.s
        };
        (self.quad_points.len() * (terms + 1) + 18 * self.areas.len()) as f64
    }

    fn pattern(&self, dofs: Dofs) -> &Pattern {
        match dofs {
            Dofs::AllNodes => &self.full,
            Dofs::Interior => &self.interior,
        }
    }

    /// Diffusion and reaction coefficients at all quadrature nodes.
    fn coefficients(&self, y: &ParamVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.s;
        if y.dim() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                found: y.dim(),
            });
        }
        let ys = y.as_slice();
        let nq = self.quad_points.len();
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        if s > 0 && self.problem.has_parametric_diffusion() {
            let with_b = self.problem.has_parametric_absorption();
            match &self.a_table {
                Some(at) => {
                    for q in 0..nq {
                        a[q] += dot(ys, &at[q * s..(q + 1) * s]);
                    }
                    if let Some(bt) = &self.b_table {
                        for q in 0..nq {
                            b[q] += dot(ys, &bt[q * s..(q + 1) * s]);
                        }
                    }
                }
                None => {
                    let mut at = vec![0.0; s];
                    let mut bt = if with_b { vec![0.0; s] } else { Vec::new() };
                    for q in 0..nq {
                        self.problem
                            .fill_terms(self.quad_points[q], &mut at, &mut bt);
                        a[q] += dot(ys, &at);
                        if with_b {
                            b[q] += dot(ys, &bt);
                        }
                    }
                }
            }
        }
        if let Some(q) = a.iter().position(|&v| !(v > 0.0)) {
            let x = self.quad_points[q];
            return Err(Error::NonPositiveCoefficient {
                name: "a",
                value: a[q],
                x: x[0],
                y: x[1],
            });
        }
        Ok((a, b))
    }

    /// Stiffness matrix `A_s(y)` including the reaction term.
    pub fn stiffness(&self, y: &ParamVector, dofs: Dofs) -> Result<SparseSymMatrix> {
        let (a, b) = self.coefficients(y)?;
        let pattern = self.pattern(dofs);
        let mut values = vec![0.0; pattern.col_idx.len()];
        let has_reaction = b.iter().any(|&v| v != 0.0);
        for (e, k) in self.local_stiffness.iter().enumerate() {
            let aq = &a[3 * e..3 * e + 3];
            let a_mean = (aq[0] + aq[1] + aq[2]) / 3.0;
            let mut local = k.map(|v| a_mean * v);
            if has_reaction {
                add_weighted_mass(&mut local, self.areas[e], &b[3 * e..3 * e + 3]);
            }
            scatter(&mut values, &pattern.scatter[9 * e..9 * e + 9], &local);
        }
        Ok(pattern.matrix(values))
    }

    /// Mass matrix weighted by `c`.
    pub fn mass(&self, dofs: Dofs) -> Result<SparseSymMatrix> {
        if let Some(q) = self.c.iter().position(|&v| !(v > 0.0)) {
            let x = self.quad_points[q];
            return Err(Error::NonPositiveCoefficient {
                name: "c",
                value: self.c[q],
                x: x[0],
                y: x[1],
            });
        }
        let pattern = self.pattern(dofs);
        let mut values = vec![0.0; pattern.col_idx.len()];
        for e in 0..self.areas.len() {
            let mut local = [0.0; 9];
            add_weighted_mass(&mut local, self.areas[e], &self.c[3 * e..3 * e + 3]);
            scatter(&mut values, &pattern.scatter[9 * e..9 * e + 9], &local);
        }
        Ok(pattern.matrix(values))
    }

    /// `int phi_i dx` for every interior basis function.
    pub fn basis_integrals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.num_interior()];
        for (e, tri) in self.mesh.elements().iter().enumerate() {
            for &p in tri {
                if let Some(i) = self.mesh.interior_index(p) {
                    out[i] += self.areas[e] / 3.0;
                }
            }
        }
        out
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `local[a][b] += |T|/3 * sum_q w_q phi_a(x_q) phi_b(x_q)`.
fn add_weighted_mass(local: &mut [f64; 9], area: f64, w: &[f64]) {
    for (q, l) in BARY.iter().enumerate() {
        let f = area / 3.0 * w[q];
        for a in 0..3 {
            for b in 0..3 {
                local[3 * a + b] += f * l[a] * l[b];
            }
        }
    }
}

fn scatter(values: &mut [f64], positions: &[usize], local: &[f64; 9]) {
    for (&pos, &v) in positions.iter().zip(local) {
        if pos != usize::MAX {
            values[pos] += v;
        }
    }
}

/// Full stiffness matrix over all nodes for `s = y.dim()` terms.
pub fn assemble_stiffness(
    mesh: &TriMesh,
    problem: &CoefficientSeries,
    y: &ParamVector,
) -> Result<SparseSymMatrix> {
    Assembler::new(Arc::new(mesh.clone()), problem, y.dim()).stiffness(y, Dofs::AllNodes)
}

/// Full mass matrix over all nodes.
pub fn assemble_mass(mesh: &TriMesh, problem: &CoefficientSeries) -> Result<SparseSymMatrix> {
    Assembler::new(Arc::new(mesh.clone()), problem, 0).mass(Dofs::AllNodes)
}

/// Restriction of a full matrix to the interior degrees of freedom.
pub fn restrict_to_interior(mesh: &TriMesh, full: &SparseSymMatrix) -> Result<SparseSymMatrix> {
    let keep: Vec<bool> = (0..mesh.num_nodes())
        .map(|p| !mesh.is_boundary(p))
        .collect();
    full.restrict(&keep)
}
