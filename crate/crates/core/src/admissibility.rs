//! Checkers for admissible and strictly admissible meshes of class `m`.
//!
//! The two checkers are deliberately independent routes: the class check
//! inspects truncated basis function supports element by element, while the
//! strict check is pure cell-set algebra on the domain hierarchy. Neither
//! consults the refinement algorithm, so both serve as oracles for its
//! postconditions.

use crate::basis::thb_functions_per_element;
use crate::grid::{support_window, visit_window, Element, ElementSet};
use crate::mesh::HierarchicalMesh;

/// Witness for a class-check failure: an element together with the level
/// range of truncated basis functions taking nonzero values on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSpreadWitness {
    pub element: Element,
    pub min_level: u32,
    pub max_level: u32,
}

/// Witness for a strict-check failure: a domain cell whose coarse
/// support extension is not covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaWitness {
    /// Hierarchy level of the offending domain cell.
    pub level: u32,
    /// The offending cell of `Omega^level`, at level-`level` granularity.
    pub cell: Element,
}

/// Result of the function-support admissibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCheck {
    pub admissible: bool,
    pub witness: Option<LevelSpreadWitness>,
}

/// Result of the strict (set-inclusion) admissibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrictCheck {
    pub strictly_admissible: bool,
    pub witness: Option<OmegaWitness>,
}

/// Combined verdict of both checkers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub strictly_admissible: bool,
    pub witness: Option<AdmissibilityWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdmissibilityWitness {
    LevelSpread(LevelSpreadWitness),
    Omega(OmegaWitness),
}

/// Is the mesh admissible of class `m`: do the truncated basis functions
/// that are nonzero on any single active element span at most `m`
/// successive levels? `m = 1` is accepted and amounts to the uniform-mesh
/// check.
pub fn is_admissible(mesh: &HierarchicalMesh, m: u32) -> ClassCheck {
    assert!(m >= 1, "admissibility class must be at least 1");
    for (e, origins) in thb_functions_per_element(mesh) {
        let Some(min_level) = origins.iter().map(|b| b.level()).min() else {
            continue;
        };
        let max_level = origins.iter().map(|b| b.level()).max().unwrap();
        if max_level - min_level > m - 1 {
            return ClassCheck {
                admissible: false,
                witness: Some(LevelSpreadWitness {
                    element: e,
                    min_level,
                    max_level,
                }),
            };
        }
    }
    ClassCheck {
        admissible: true,
        witness: None,
    }
}

/// Is the level-`level` cell `idx` in the interior region `omega^level`,
/// i.e. is its full level-`level` support extension inside `Omega^level`?
pub(crate) fn omega_contains(mesh: &HierarchicalMesh, level: u32, idx: &[u64]) -> bool {
    let Some(cells) = mesh.hierarchy().level_cells(level) else {
        return false;
    };
    if !cells.contains(idx) {
        return false;
    }
    let e = Element::new(level, idx.to_vec());
    let window = support_window(mesh.cfg(), &e, level).expect("cell valid at own level");
    visit_window(&window, |cell| cells.contains(cell))
}

/// The interior region `omega^level` as a set of level-`level` cells: all
/// grid cells whose full support extension at that level lies inside
/// `Omega^level`. Candidates are restricted to `Omega^level` itself, since
/// a cell always belongs to its own extension.
pub fn omega_region(mesh: &HierarchicalMesh, level: u32) -> ElementSet {
    let mut out = ElementSet::new();
    let Some(cells) = mesh.hierarchy().level_cells(level) else {
        return out;
    };
    for idx in cells {
        if omega_contains(mesh, level, idx) {
            out.insert(Element::new(level, idx.clone()));
        }
    }
    out
}

/// Is the mesh strictly admissible of class `m`: is every `Omega^l` for
/// `l = m, ..., N-1` contained in the interior region of level `l-m+1`?
/// Levels below `m` impose no condition. `m = 1` amounts to the
/// uniform-mesh check.
pub fn is_strictly_admissible(mesh: &HierarchicalMesh, m: u32) -> StrictCheck {
    assert!(m >= 1, "admissibility class must be at least 1");
    for level in m..mesh.num_levels() {
        let coarse = level - m + 1;
        let cells = mesh
            .hierarchy()
            .level_cells(level)
            .expect("level below num_levels");
        // many cells share a coarse ancestor; memoize the verdicts and keep
        // the first offending cell in canonical order for the witness
        let mut sorted: Vec<&Vec<u64>> = cells.iter().collect();
        sorted.sort();
        let mut verdicts: std::collections::HashMap<Vec<u64>, bool> =
            std::collections::HashMap::new();
        for idx in sorted {
            let shift = level - coarse;
            let anc: Vec<u64> = idx.iter().map(|&j| j >> shift).collect();
            let ok = *verdicts
                .entry(anc.clone())
                .or_insert_with(|| omega_contains(mesh, coarse, &anc));
            if !ok {
                return StrictCheck {
                    strictly_admissible: false,
                    witness: Some(OmegaWitness {
                        level,
                        cell: Element::new(level, idx.clone()),
                    }),
                };
            }
        }
    }
    StrictCheck {
        strictly_admissible: true,
        witness: None,
    }
}

/// Runs both checkers; the witness reports the class-check failure if any,
/// otherwise the strict failure.
pub fn check_admissibility(mesh: &HierarchicalMesh, m: u32) -> AdmissibilityReport {
    let class = is_admissible(mesh, m);
    let strict = is_strictly_admissible(mesh, m);
    let witness = match (&class.witness, &strict.witness) {
        (Some(w), _) => Some(AdmissibilityWitness::LevelSpread(w.clone())),
        (None, Some(w)) => Some(AdmissibilityWitness::Omega(w.clone())),
        (None, None) => None,
    };
    AdmissibilityReport {
        admissible: class.admissible,
        strictly_admissible: strict.strictly_admissible,
        witness,
    }
}
