//! The hierarchical mesh: a nested domain hierarchy and the active-element
//! sets it induces.
//!
//! Each domain `Omega^l` is stored as the set of level-`l` cells it covers,
//! which makes nesting, sibling closure and the active-set rule exact
//! integer set algebra. Active sets are maintained incrementally on
//! subdivision; [`HierarchicalMesh::recompute_active`] recomputes them from
//! the hierarchy alone and serves as the independent oracle.

use std::collections::HashSet;

use thiserror::Error;

use crate::config::MeshConfig;
use crate::grid::{children, Element, ElementSet, GridError};

/// Cells of a single level, keyed by their index coordinates.
pub type CellSet = HashSet<Vec<u64>>;

/// Errors from mesh mutation and validation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeshError {
    #[error("element {0} is not active in the mesh")]
    NotActive(Element),
    #[error("meshes have different configurations")]
    ConfigMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("domain level {level} cell {cell:?} is not nested in the previous level")]
    BrokenNesting { level: u32, cell: Vec<u64> },
    #[error("domain level {level} cell {cell:?} breaks sibling closure")]
    BrokenSiblingClosure { level: u32, cell: Vec<u64> },
    #[error("domain level {level} cell {cell:?} is out of grid bounds")]
    CellOutOfBounds { level: u32, cell: Vec<u64> },
    #[error("domain level 0 must cover the whole initial grid")]
    IncompleteBase,
    #[error("domain level {level} is empty")]
    EmptyLevel { level: u32 },
    #[error("maintained active set differs from recomputation at level {level}")]
    ActiveMismatch { level: u32 },
}

/// Nested sequence of closed subdomains `Omega^0 >= Omega^1 >= ...`,
/// each stored as the set of level-`l` cells whose closure union is
/// `Omega^l`. Entry 0 always covers the full initial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainHierarchy {
    cfg: MeshConfig,
    levels: Vec<CellSet>,
}

impl DomainHierarchy {
    /// Single-level hierarchy covering the whole domain.
    pub fn initial(cfg: MeshConfig) -> Self {
        let mut base = CellSet::default();
        let sizes = cfg.grid_size(0);
        let mut cursor = vec![0u64; cfg.dim()];
        loop {
            base.insert(cursor.clone());
            let mut i = 0;
            loop {
                if i == cursor.len() {
                    return Self {
                        cfg,
                        levels: vec![base],
                    };
                }
                if cursor[i] + 1 < sizes[i] {
                    cursor[i] += 1;
                    break;
                }
                cursor[i] = 0;
                i += 1;
            }
        }
    }

    /// Builds a hierarchy from raw per-level cell sets, validating every
    /// structural invariant.
    pub fn from_levels(cfg: MeshConfig, levels: Vec<CellSet>) -> Result<Self, MeshError> {
        let h = Self { cfg, levels };
        h.validate()?;
        Ok(h)
    }

    pub fn cfg(&self) -> &MeshConfig {
        &self.cfg
    }

    /// Number of hierarchy levels `N` (all levels are nonempty).
    pub fn num_levels(&self) -> u32 {
        self.levels.len() as u32
    }

    /// Cells of `Omega^level`, or `None` beyond the deepest level.
    pub fn level_cells(&self, level: u32) -> Option<&CellSet> {
        self.levels.get(level as usize)
    }

    /// Region containment of a level-`cell_level` cell in `Omega^level`.
    ///
    /// Supports `cell_level >= level - 1`: cells at the storage level or
    /// finer reduce to an ancestor lookup; a cell one level coarser is
    /// contained iff its children are (sibling closure makes one child
    /// test sufficient).
    pub fn region_contains(&self, level: u32, cell_level: u32, idx: &[u64]) -> bool {
        let Some(set) = self.levels.get(level as usize) else {
            return false;
        };
        if cell_level + 1 == level {
            let child: Vec<u64> = idx.iter().map(|&j| 2 * j).collect();
            set.contains(&child)
        } else {
            debug_assert!(cell_level >= level);
            let shift = cell_level - level;
            let anc: Vec<u64> = idx.iter().map(|&j| j >> shift).collect();
            set.contains(&anc)
        }
    }

    fn validate(&self) -> Result<(), MeshError> {
        if self.levels.is_empty() {
            return Err(MeshError::EmptyLevel { level: 0 });
        }
        // level 0 covers the initial grid exactly
        let expected: u64 = self.cfg.initial_cell_count();
        if self.levels[0].len() as u64 != expected {
            return Err(MeshError::IncompleteBase);
        }
        for (l, set) in self.levels.iter().enumerate() {
            let level = l as u32;
            if set.is_empty() {
                return Err(MeshError::EmptyLevel { level });
            }
            let sizes = self.cfg.grid_size(level);
            for cell in set {
                if cell.len() != self.cfg.dim() || cell.iter().zip(&sizes).any(|(&j, &s)| j >= s) {
                    return Err(MeshError::CellOutOfBounds {
                        level,
                        cell: cell.clone(),
                    });
                }
                if level > 0 {
                    // nesting inside the previous level
                    let parent: Vec<u64> = cell.iter().map(|&j| j >> 1).collect();
                    if !self.levels[l - 1].contains(&parent) {
                        return Err(MeshError::BrokenNesting {
                            level,
                            cell: cell.clone(),
                        });
                    }
                    // full sibling group of the parent must be present
                    let d = cell.len();
                    for bits in 0..(1u64 << d) {
                        let sib: Vec<u64> = parent
                            .iter()
                            .enumerate()
                            .map(|(i, &j)| 2 * j + ((bits >> i) & 1))
                            .collect();
                        if !set.contains(&sib) {
                            return Err(MeshError::BrokenSiblingClosure {
                                level,
                                cell: cell.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A hierarchical mesh: domain hierarchy plus the derived per-level active
/// sets. The active elements tile the domain at all times.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalMesh {
    hierarchy: DomainHierarchy,
    active: Vec<CellSet>,
}

impl HierarchicalMesh {
    /// The uniform initial mesh: one level, every level-0 cell active.
    pub fn initial(cfg: MeshConfig) -> Self {
        let hierarchy = DomainHierarchy::initial(cfg);
        let active = vec![hierarchy.levels[0].clone()];
        Self { hierarchy, active }
    }

    /// Rebuilds a mesh from a validated hierarchy, deriving active sets
    /// from scratch.
    pub fn from_hierarchy(hierarchy: DomainHierarchy) -> Self {
        let active = Self::derive_active(&hierarchy);
        Self { hierarchy, active }
    }

    pub fn cfg(&self) -> &MeshConfig {
        self.hierarchy.cfg()
    }

    pub fn hierarchy(&self) -> &DomainHierarchy {
        &self.hierarchy
    }

    pub fn num_levels(&self) -> u32 {
        self.hierarchy.num_levels()
    }

    /// Total number of active elements over all levels.
    pub fn element_count(&self) -> usize {
        self.active.iter().map(|s| s.len()).sum()
    }

    pub fn is_active(&self, e: &Element) -> bool {
        self.active
            .get(e.level() as usize)
            .is_some_and(|s| s.contains(e.index()))
    }

    /// Active cells of one level.
    pub fn active_at(&self, level: u32) -> Option<&CellSet> {
        self.active.get(level as usize)
    }

    /// All active elements in canonical order (level-major, lexicographic).
    pub fn active_elements(&self) -> ElementSet {
        let mut out = ElementSet::new();
        for (l, set) in self.active.iter().enumerate() {
            for cell in set {
                out.insert(Element::new(l as u32, cell.clone()));
            }
        }
        out
    }

    /// Replaces the active element `e` by its `2^d` children, growing the
    /// domain hierarchy by the closure of `e`.
    pub fn subdivide(&mut self, e: &Element) -> Result<(), MeshError> {
        if !self.is_active(e) {
            return Err(MeshError::NotActive(e.clone()));
        }
        let l = e.level() as usize;
        self.active[l].remove(e.index());
        if self.hierarchy.levels.len() == l + 1 {
            self.hierarchy.levels.push(CellSet::default());
            self.active.push(CellSet::default());
        }
        for child in children(e) {
            let (_, idx) = (child.level(), child.index().to_vec());
            self.hierarchy.levels[l + 1].insert(idx.clone());
            self.active[l + 1].insert(idx);
        }
        Ok(())
    }

    /// True iff `self` refines `coarser`: every domain of `coarser` is
    /// contained in the corresponding domain of `self`.
    pub fn refinement_of(&self, coarser: &Self) -> Result<bool, MeshError> {
        if self.cfg() != coarser.cfg() {
            return Err(MeshError::ConfigMismatch);
        }
        for (l, set) in coarser.hierarchy.levels.iter().enumerate() {
            match self.hierarchy.levels.get(l) {
                None => return Ok(false),
                Some(own) => {
                    if !set.is_subset(own) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Recomputes the active sets from the domain hierarchy alone: a cell
    /// of `Omega^l` is active iff no part of it lies in `Omega^{l+1}`.
    /// This is the independent oracle for the incremental maintenance.
    pub fn derive_active(hierarchy: &DomainHierarchy) -> Vec<CellSet> {
        let n = hierarchy.levels.len();
        let mut active = Vec::with_capacity(n);
        for l in 0..n {
            let mut set = CellSet::default();
            for cell in &hierarchy.levels[l] {
                let covered = l + 1 < n && {
                    let child: Vec<u64> = cell.iter().map(|&j| 2 * j).collect();
                    hierarchy.levels[l + 1].contains(&child)
                };
                if !covered {
                    set.insert(cell.clone());
                }
            }
            active.push(set);
        }
        active
    }

    /// Full consistency check: hierarchy invariants plus agreement of the
    /// maintained active sets with [`Self::derive_active`].
    pub fn validate(&self) -> Result<(), MeshError> {
        self.hierarchy.validate()?;
        let derived = Self::derive_active(&self.hierarchy);
        if derived.len() != self.active.len() {
            return Err(MeshError::ActiveMismatch {
                level: derived.len().min(self.active.len()) as u32,
            });
        }
        for (l, (a, b)) in self.active.iter().zip(&derived).enumerate() {
            if a != b {
                return Err(MeshError::ActiveMismatch { level: l as u32 });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn elem(level: u32, index: &[u64]) -> Element {
        Element::new(level, index.to_vec())
    }

    #[test]
    fn initial_mesh_counts() {
        let m = HierarchicalMesh::initial(MeshConfig::isotropic(2, 1, 2, 8));
        assert_eq!(m.element_count(), 64);
        assert_eq!(m.num_levels(), 1);

        let m = HierarchicalMesh::initial(MeshConfig::isotropic(1, 1, 2, 4));
        assert_eq!(m.element_count(), 4);

        let m = HierarchicalMesh::initial(MeshConfig::isotropic(3, 1, 2, 2));
        assert_eq!(m.element_count(), 8);
    }

    #[test]
    fn subdivide_replaces_element_with_children() {
        let mut m = HierarchicalMesh::initial(MeshConfig::isotropic(2, 1, 2, 8));
        let e = elem(0, &[3, 4]);
        m.subdivide(&e).unwrap();
        assert_eq!(m.element_count(), 67);
        assert_eq!(m.num_levels(), 2);
        assert!(!m.is_active(&e));
        for child in children(&e) {
            assert!(m.is_active(&child));
        }
        m.validate().unwrap();

        // subdividing again is rejected
        assert_eq!(m.subdivide(&e), Err(MeshError::NotActive(e)));
        // never-created element is not active
        assert!(!m.is_active(&elem(5, &[0, 0])));
    }

    #[test]
    fn subdivide_one_dimensional_example() {
        let mut m = HierarchicalMesh::initial(MeshConfig::isotropic(1, 1, 2, 4));
        m.subdivide(&elem(0, &[2])).unwrap();
        let want: ElementSet = [
            elem(0, &[0]),
            elem(0, &[1]),
            elem(0, &[3]),
            elem(1, &[4]),
            elem(1, &[5]),
        ]
        .into_iter()
        .collect();
        assert_eq!(m.active_elements(), want);
    }

    #[test]
    fn refinement_partial_order() {
        let m = HierarchicalMesh::initial(MeshConfig::isotropic(2, 1, 2, 4));
        let mut finer = m.clone();
        finer.subdivide(&elem(0, &[1, 1])).unwrap();
        assert!(m.refinement_of(&m).unwrap());
        assert!(finer.refinement_of(&m).unwrap());
        assert!(!m.refinement_of(&finer).unwrap());

        let other = HierarchicalMesh::initial(MeshConfig::isotropic(2, 2, 2, 4));
        assert_eq!(m.refinement_of(&other), Err(MeshError::ConfigMismatch));
    }

    #[test]
    fn tiling_is_preserved_under_random_subdivision() {
        let cfg = MeshConfig::isotropic(2, 1, 2, 4);
        let mut m = HierarchicalMesh::initial(cfg.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let elems: Vec<Element> = m.active_elements().into_iter().collect();
            let e = elems.choose(&mut rng).unwrap().clone();
            m.subdivide(&e).unwrap();
            // exact tiling: sum of volumes at finest-level granularity
            let finest = m.num_levels() - 1;
            let total: u128 = m
                .active_elements()
                .iter()
                .map(|e| 1u128 << (2 * (finest - e.level())))
                .sum();
            assert_eq!(total, 16u128 << (2 * finest));
            m.validate().unwrap();
        }
    }

    #[test]
    fn hierarchy_validation_rejects_malformed_input() {
        let cfg = MeshConfig::isotropic(1, 1, 2, 4);
        let full: CellSet = (0..4u64).map(|j| vec![j]).collect();

        // partial sibling group at level 1
        let mut broken = CellSet::default();
        broken.insert(vec![2]);
        let err =
            DomainHierarchy::from_levels(cfg.clone(), vec![full.clone(), broken]).unwrap_err();
        assert_eq!(
            err,
            MeshError::BrokenSiblingClosure {
                level: 1,
                cell: vec![2]
            }
        );

        // missing base cell
        let mut partial = full.clone();
        partial.remove(&vec![3]);
        let err = DomainHierarchy::from_levels(cfg.clone(), vec![partial]).unwrap_err();
        assert_eq!(err, MeshError::IncompleteBase);

        // nesting violation: level-2 cells outside level 1
        let omega1: CellSet = [vec![0u64], vec![1]].into_iter().collect();
        let omega2: CellSet = [vec![6u64], vec![7]].into_iter().collect();
        let err = DomainHierarchy::from_levels(cfg, vec![full, omega1, omega2]).unwrap_err();
        assert!(matches!(err, MeshError::BrokenNesting { level: 2, .. }));
    }
}
