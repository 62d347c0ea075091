//! Everything that is fixed for one mesh and truncation dimension: the mesh,
//! the assembler tables, the interior mass matrix and the symbolic
//! factorization of the stiffness/mass pattern.

use std::sync::Arc;

use crate::error::Result;
use crate::fem::{Assembler, Dofs};
use crate::mesh::{build_uniform_mesh, TriMesh};
use crate::problems::{CoefficientSeries, ParamVector};
use crate::sparse::{SparseSymMatrix, SymbolicLdl};

#[derive(Debug)]
pub struct Discretization {
    assembler: Assembler,
    mass: SparseSymMatrix,
    symbolic: Arc<SymbolicLdl>,
    basis_integrals: Vec<f64>,
}

impl Discretization {
    /// Mesh with `2^level_exponent` intervals per side and `s` retained terms.
    pub fn new(level_exponent: u32, problem: &CoefficientSeries, s: usize) -> Result<Self> {
        let mesh = Arc::new(build_uniform_mesh(level_exponent as i64)?);
        Self::on_mesh(mesh, problem, s)
    }

    pub fn on_mesh(mesh: Arc<TriMesh>, problem: &CoefficientSeries, s: usize) -> Result<Self> {
        let assembler = Assembler::new(mesh, problem, s);
        let mass = assembler.mass(Dofs::Interior)?;
        let a0 = assembler.stiffness(&ParamVector::zeros(s), Dofs::Interior)?;
        let symbolic = Arc::new(SymbolicLdl::analyze(&a0, &mass)?);
        let basis_integrals = assembler.basis_integrals();
        Ok(Self {
            assembler,
            mass,
            symbolic,
            basis_integrals,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        self.assembler.mesh()
    }

    pub fn truncation(&self) -> usize {
        self.assembler.truncation()
    }

    pub fn num_dofs(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        &self.mass
    }

    pub fn symbolic(&self) -> &Arc<SymbolicLdl> {
        &self.symbolic
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    /// `int phi_i dx` for the interior basis functions.
    pub fn basis_integrals(&self) -> &[f64] {
        &self.basis_integrals
    }

    /// Interior stiffness matrix for the first `s` entries of `y`; `y` must
    /// have at least `s` entries.
    pub fn stiffness(&self, y: &ParamVector) -> Result<SparseSymMatrix> {
        let s = self.truncation();
        if y.dim() == s {
            self.assembler.stiffness(y, Dofs::Interior)
        } else {
            if y.dim() < s {
                return Err(crate::error::Error::DimensionMismatch {
                    expected: s,
                    found: y.dim(),
                });
            }
            self.assembler.stiffness(&y.truncate(s), Dofs::Interior)
        }
    }

    pub fn assembly_work(&self) -> f64 {
        self.assembler.assembly_work()
    }
}
