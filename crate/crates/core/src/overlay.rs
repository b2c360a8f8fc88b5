//! Coarsest common refinement of two hierarchical meshes.
//!
//! The overlay unions the domain hierarchies level by level; its active
//! sets are re-derived from scratch. Strict admissibility, interior-region
//! containment and the cardinality bound are verified by
//! [`check_overlay_properties`].

use crate::admissibility::{is_strictly_admissible, omega_region};
use crate::mesh::{CellSet, DomainHierarchy, HierarchicalMesh, MeshError};

/// The coarsest common refinement of two meshes over the same
/// configuration: domain hierarchies are unioned level-wise.
pub fn overlay(a: &HierarchicalMesh, b: &HierarchicalMesh) -> Result<HierarchicalMesh, MeshError> {
    if a.cfg() != b.cfg() {
        return Err(MeshError::ConfigMismatch);
    }
    let n = a.num_levels().max(b.num_levels());
    let mut levels: Vec<CellSet> = Vec::with_capacity(n as usize);
    for l in 0..n {
        let mut set = CellSet::default();
        if let Some(cells) = a.hierarchy().level_cells(l) {
            set.extend(cells.iter().cloned());
        }
        if let Some(cells) = b.hierarchy().level_cells(l) {
            set.extend(cells.iter().cloned());
        }
        levels.push(set);
    }
    let hierarchy = DomainHierarchy::from_levels(a.cfg().clone(), levels)?;
    Ok(HierarchicalMesh::from_hierarchy(hierarchy))
}

/// Verdicts of the overlay property check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayReport {
    /// The overlay is strictly admissible of class `m`.
    pub strictly_admissible: bool,
    /// The interior region of the overlay contains the union of the
    /// inputs' interior regions at every level.
    pub omega_containment: bool,
    /// The overlay refines both inputs.
    pub refines_both: bool,
    /// `#overlay <= #a + #b - #initial`.
    pub cardinality_bound: bool,
}

impl OverlayReport {
    pub fn all_hold(&self) -> bool {
        self.strictly_admissible
            && self.omega_containment
            && self.refines_both
            && self.cardinality_bound
    }
}

/// Checks the overlay of two strictly admissible meshes: strict
/// admissibility, level-wise interior-region containment, refinement of
/// both inputs, and the cardinality bound.
pub fn check_overlay_properties(
    a: &HierarchicalMesh,
    b: &HierarchicalMesh,
    m: u32,
) -> Result<(HierarchicalMesh, OverlayReport), MeshError> {
    let merged = overlay(a, b)?;

    let strictly_admissible = is_strictly_admissible(&merged, m).strictly_admissible;

    let mut omega_containment = true;
    for l in 0..merged.num_levels() {
        let merged_omega = omega_region(&merged, l);
        for side in [a, b] {
            if l < side.num_levels() && !omega_region(side, l).is_subset(&merged_omega) {
                omega_containment = false;
            }
        }
    }

    let refines_both = merged.refinement_of(a)? && merged.refinement_of(b)?;

    let initial = a.cfg().initial_cell_count() as usize;
    let cardinality_bound =
        merged.element_count() <= a.element_count() + b.element_count() - initial;

    Ok((
        merged,
        OverlayReport {
            strictly_admissible,
            omega_containment,
            refines_both,
            cardinality_bound,
        },
    ))
}
