//! Shared helpers for the integration test suites.

#![allow(dead_code)]

use thb_refine::grid::{ancestor, Element, ElementSet};
use thb_refine::mesh::HierarchicalMesh;
use thb_refine::refine::{run_policy_history, MarkPolicy, RefinementHistory};
use thb_refine::MeshConfig;

/// A small strictly admissible mesh produced by a seeded policy history.
pub fn refined_mesh(cfg: MeshConfig, m: u32, steps: usize, seed: u64) -> HierarchicalMesh {
    refined_history(cfg, m, steps, seed).final_mesh
}

pub fn refined_history(cfg: MeshConfig, m: u32, steps: usize, seed: u64) -> RefinementHistory {
    let policy = match seed % 3 {
        0 => MarkPolicy::RandomFraction { theta: 0.15 },
        1 => MarkPolicy::CornerChase,
        _ => MarkPolicy::SingleRandom,
    };
    run_policy_history(cfg, m, policy, steps, seed, Some(4000))
        .expect("policy history on valid configuration")
}

/// The active element of `mesh` whose cell contains the given finest-level
/// cell. Exactly one exists because the active elements tile the domain.
pub fn covering_active(mesh: &HierarchicalMesh, finest: &Element) -> Element {
    for level in (0..=finest.level()).rev() {
        let anc = ancestor(finest, level).expect("level at most element level");
        if mesh.is_active(&anc) {
            return anc;
        }
    }
    panic!("no active element covers {finest}");
}

/// Brute-force lattice join of two meshes on their active sets: for every
/// cell of the finest common grid, the finer of the two covering active
/// elements. Independent of the domain-hierarchy union that `overlay`
/// computes.
pub fn overlay_active_oracle(a: &HierarchicalMesh, b: &HierarchicalMesh) -> ElementSet {
    assert_eq!(a.cfg(), b.cfg());
    let finest = a.num_levels().max(b.num_levels()) - 1;
    let sizes = a.cfg().grid_size(finest);
    let mut out = ElementSet::new();
    let mut cursor = vec![0u64; a.cfg().dim()];
    loop {
        let cell = Element::new(finest, cursor.clone());
        let in_a = covering_active(a, &cell);
        let in_b = covering_active(b, &cell);
        let level = in_a.level().max(in_b.level());
        out.insert(ancestor(&cell, level).expect("level at most finest"));
        let mut i = 0;
        loop {
            if i == cursor.len() {
                return out;
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
