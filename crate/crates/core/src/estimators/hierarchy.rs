//! Level parameters and the discretizations they need.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::mesh::MAX_LEVEL_EXPONENT;
use crate::problems::CoefficientSeries;

/// How the truncation dimension grows with the level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// `s_l = s` on every level.
    Fixed(usize),
    /// `s_l = s_0 2^l`.
    Geometric(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyConfig {
    /// Level 0 uses `h_0 = 2^-base_exponent`.
    pub base_exponent: u32,
    pub truncation: TruncationPolicy,
    /// Overrides the coarse truncation rule when set.
    pub coarse_truncation: Option<usize>,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            base_exponent: 3,
            truncation: TruncationPolicy::Fixed(64),
            coarse_truncation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub level: usize,
    /// `h = 2^-mesh_exponent`.
    pub mesh_exponent: u32,
    pub s: usize,
    pub coarse_exponent: u32,
    pub coarse_s: usize,
}

impl LevelParams {
    pub fn h(&self) -> f64 {
        (-(self.mesh_exponent as f64)).exp2()
    }

    pub fn coarse_h(&self) -> f64 {
        (-(self.coarse_exponent as f64)).exp2()
    }
}

impl HierarchyConfig {
    pub fn truncation_at(&self, level: usize) -> usize {
        match self.truncation {
            TruncationPolicy::Fixed(s) => s,
            TruncationPolicy::Geometric(s0) => s0 << level,
        }
    }

    /// Parameters of `level`: `h_l = 2^-(l + m_0)`, `H_l = min(h_l^{1/4}, h_0)`
    /// rounded to a mesh exponent, and the coarse truncation `ceil(sqrt(s_l))`
    /// (bounded below by `s_0` when the truncation grows geometrically).
    pub fn level(&self, level: usize) -> Result<LevelParams> {
        let mesh_exponent = self.base_exponent + level as u32;
        if self.base_exponent == 0 || mesh_exponent > MAX_LEVEL_EXPONENT {
            return Err(Error::InvalidMeshLevel(mesh_exponent as i64));
        }
        let s = self.truncation_at(level);
        let coarse_exponent = mesh_exponent
            .div_ceil(4)
            .max(self.base_exponent)
            .min(mesh_exponent);
        let root = (s as f64).sqrt().ceil() as usize;
        let coarse_s = match (self.coarse_truncation, self.truncation) {
            (Some(c), _) => c.min(s),
            (None, TruncationPolicy::Fixed(_)) => root,
            (None, TruncationPolicy::Geometric(s0)) => root.max(s0).min(s),
        };
        Ok(LevelParams {
            level,
            mesh_exponent,
            s,
            coarse_exponent,
            coarse_s,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s0 = self.truncation_at(0);
        if s0 == 0 {
            return Err(Error::InvalidParameter(
                "truncation dimension must be positive".into(),
            ));
        }
        self.level(0).map(|_| ())
    }
}

/// Lazily built discretizations keyed by `(mesh exponent, truncation)`.
#[derive(Debug)]
pub struct Hierarchy {
    pub config: HierarchyConfig,
    pub problem: CoefficientSeries,
    discs: HashMap<(u32, usize), Arc<Discretization>>,
}

impl Hierarchy {
    pub fn new(problem: CoefficientSeries, config: HierarchyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            problem,
            discs: HashMap::new(),
        })
    }

    pub fn level(&self, level: usize) -> Result<LevelParams> {
        self.config.level(level)
    }

    fn build(&mut self, m: u32, s: usize) -> Result<Arc<Discretization>> {
        if let Some(d) = self.discs.get(&(m, s)) {
            return Ok(d.clone());
        }
        let d = Arc::new(Discretization::new(m, &self.problem, s)?);
        self.discs.insert((m, s), d.clone());
        Ok(d)
    }

    /// Builds every discretization that level `level` touches.
    pub fn prepare(&mut self, level: usize, two_grid: bool) -> Result<LevelDiscs> {
        let p = self.level(level)?;
        let fine = self.build(p.mesh_exponent, p.s)?;
        if level == 0 {
            return Ok(LevelDiscs {
                params: p,
                fine,
                previous: None,
                coarse: None,
            });
        }
        let q = self.level(level - 1)?;
        let previous = Some(self.build(q.mesh_exponent, q.s)?);
        let coarse = if two_grid {
            Some(self.build(p.coarse_exponent, p.coarse_s)?)
        } else {
            None
        };
        Ok(LevelDiscs {
            params: p,
            fine,
            previous,
            coarse,
        })
    }
}

/// The discretizations used by one level of the telescoping sum.
#[derive(Debug, Clone)]
pub struct LevelDiscs {
    pub params: LevelParams,
    pub fine: Arc<Discretization>,
    /// Level `l - 1` fine discretization, absent on level 0.
    pub previous: Option<Arc<Discretization>>,
    /// Coarse `(H, S)` discretization of the two-grid method.
    pub coarse: Option<Arc<Discretization>>,
}
