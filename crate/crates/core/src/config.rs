//! Mesh configuration: dimension, degrees, admissibility class and the
//! extents of the initial unit-cell grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating a [`MeshConfig`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("expected {expected} entries for `{field}`, got {got}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("degree must be at least 1 in every direction")]
    ZeroDegree,
    #[error("extent must be at least 1 in every direction")]
    ZeroExtent,
    #[error("admissibility class must be at least 2, got {0}")]
    ClassTooSmall(u32),
}

/// Static description of the refinement setting: the spatial dimension `d`,
/// the per-direction spline degrees, the admissibility class `m`, and the
/// side lengths of the initial domain `D = [0, M_1] x ... x [0, M_d]` in
/// unit cells. Level-0 cells have side length 1; level-`l` cells 2^-l.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshConfig {
    dim: usize,
    degrees: Vec<u32>,
    class_m: u32,
    extents: Vec<u64>,
}

impl MeshConfig {
    /// Validates and builds a configuration.
    pub fn new(
        dim: usize,
        degrees: Vec<u32>,
        class_m: u32,
        extents: Vec<u64>,
    ) -> Result<Self, ConfigError> {
        if dim == 0 {
            return Err(ConfigError::ZeroDimension);
        }
        if degrees.len() != dim {
            return Err(ConfigError::LengthMismatch {
                field: "degrees",
                expected: dim,
                got: degrees.len(),
            });
        }
        if extents.len() != dim {
            return Err(ConfigError::LengthMismatch {
                field: "extents",
                expected: dim,
                got: extents.len(),
            });
        }
        if degrees.contains(&0) {
            return Err(ConfigError::ZeroDegree);
        }
        if extents.contains(&0) {
            return Err(ConfigError::ZeroExtent);
        }
        if class_m < 2 {
            return Err(ConfigError::ClassTooSmall(class_m));
        }
        Ok(Self {
            dim,
            degrees,
            class_m,
            extents,
        })
    }

    /// Convenience constructor with the same degree and extent in every direction.
    pub fn isotropic(dim: usize, degree: u32, class_m: u32, extent: u64) -> Self {
        Self::new(dim, vec![degree; dim], class_m, vec![extent; dim])
            .expect("isotropic parameters validated by caller")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Largest degree over all directions; the complexity constants use it.
    pub fn max_degree(&self) -> u32 {
        *self.degrees.iter().max().expect("dim >= 1")
    }

    pub fn class_m(&self) -> u32 {
        self.class_m
    }

    pub fn extents(&self) -> &[u64] {
        &self.extents
    }

    /// Number of cells per direction in the level-`level` tensor grid.
    pub fn grid_size(&self, level: u32) -> Vec<u64> {
        self.extents.iter().map(|&m| m << level).collect()
    }

    /// Total number of level-0 cells.
    pub fn initial_cell_count(&self) -> u64 {
        self.extents.iter().product()
    }
}
