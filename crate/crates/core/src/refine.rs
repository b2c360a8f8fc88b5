//! Neighborhood computation and the admissibility-preserving refinement
//! algorithms, instrumented with provenance for the complexity harness.
//!
//! Refining a marked element first recursively refines its neighborhood:
//! the coarse active elements whose cells meet the support extension of the
//! marked element at level `l - m + 2`. On a strictly admissible input this
//! keeps the mesh strictly admissible of class `m` after every call.
//!
//! Every subdivision is logged. A created element records the chain of
//! recursive calls that led to it, from the originally marked element down
//! to its parent; chain levels drop by exactly `m - 1` per link, which the
//! complexity checks replay from the log.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::config::MeshConfig;
use crate::grid::{children, support_window, visit_window, Element, ElementSet};
use crate::mesh::{HierarchicalMesh, MeshError};

/// Elements marked for refinement; must be active in the mesh the set is
/// applied to.
pub type MarkSet = ElementSet;

/// Errors from the refinement algorithms.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum RefineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("refinement requires class m >= 2, got {0}")]
    ClassTooSmall(u32),
    #[error("marked element {0} is not active at call time")]
    InactiveMark(Element),
}

/// One entry of the provenance log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum ProvenanceEvent {
    /// An element was marked at refinement step `step` (recorded even if a
    /// neighborhood cascade subdivides it before its own turn).
    Marked { element: Element, step: usize },
    /// A recursive call from `caller` onto a neighborhood member.
    RecursiveCall { caller: Element, callee: Element },
    /// A new element appeared as a child of `parent`, triggered by
    /// `marked` (at step `marked_step`) through `chain`: the stack of
    /// recursive-call targets from the marked element down to the parent.
    Created {
        element: Element,
        parent: Element,
        marked: Element,
        marked_step: usize,
        chain: Vec<Element>,
    },
}

/// Ordered record of marks, recursive calls and creations across a
/// sequence of refinement steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceLog {
    events: Vec<ProvenanceEvent>,
    steps_completed: usize,
}

impl ProvenanceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[ProvenanceEvent] {
        &self.events
    }

    pub fn steps_completed(&self) -> usize {
        self.steps_completed
    }

    /// All `Created` events in creation order.
    pub fn created(&self) -> impl Iterator<Item = &ProvenanceEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e, ProvenanceEvent::Created { .. }))
    }

    /// All marked elements with their step indices, in marking order; the
    /// same cell marked at two steps appears twice.
    pub fn marks(&self) -> impl Iterator<Item = (&Element, usize)> {
        self.events.iter().filter_map(|e| match e {
            ProvenanceEvent::Marked { element, step } => Some((element, *step)),
            _ => None,
        })
    }

    pub fn total_marked(&self) -> usize {
        self.marks().count()
    }
}

/// The neighborhood of an active element `e` with respect to class `m`:
/// the active elements of level `level(e) - m + 1` containing a cell of
/// the support extension `S(e, level(e) - m + 2)`. Empty when
/// `level(e) - m + 1 < 0`.
pub fn neighborhood(
    mesh: &HierarchicalMesh,
    e: &Element,
    m: u32,
) -> Result<ElementSet, RefineError> {
    if m < 2 {
        return Err(RefineError::ClassTooSmall(m));
    }
    if !mesh.is_active(e) {
        return Err(RefineError::InactiveMark(e.clone()));
    }
    let mut out = ElementSet::new();
    if e.level() + 1 < m {
        return Ok(out);
    }
    let coarse = e.level() + 1 - m;
    let window = support_window(mesh.cfg(), e, coarse + 1).map_err(MeshError::Grid)?;
    let Some(active) = mesh.active_at(coarse) else {
        return Ok(out);
    };
    visit_window(&window, |cell| {
        let parent: Vec<u64> = cell.iter().map(|&j| j >> 1).collect();
        if active.contains(&parent) {
            out.insert(Element::new(coarse, parent));
        }
        true
    });
    Ok(out)
}

fn refine_element(
    mesh: &mut HierarchicalMesh,
    e: &Element,
    m: u32,
    log: &mut ProvenanceLog,
    marked_step: usize,
    chain: &mut Vec<Element>,
) -> Result<(), RefineError> {
    for neighbor in neighborhood(mesh, e, m)? {
        debug_assert!(mesh.is_active(&neighbor));
        log.events.push(ProvenanceEvent::RecursiveCall {
            caller: e.clone(),
            callee: neighbor.clone(),
        });
        chain.push(neighbor.clone());
        refine_element(mesh, &neighbor, m, log, marked_step, chain)?;
        chain.pop();
    }
    mesh.subdivide(e)?;
    let marked = chain[0].clone();
    for child in children(e) {
        log.events.push(ProvenanceEvent::Created {
            element: child,
            parent: e.clone(),
            marked: marked.clone(),
            marked_step,
            chain: chain.clone(),
        });
    }
    Ok(())
}

/// Recursively refines the neighborhood of `e`, then subdivides `e`.
/// On a strictly admissible mesh of class `m` the result is again strictly
/// admissible, and every created element has level at most `level(e) + 1`.
pub fn refine_recursive(
    mesh: &mut HierarchicalMesh,
    e: &Element,
    m: u32,
    log: &mut ProvenanceLog,
) -> Result<(), RefineError> {
    if m < 2 {
        return Err(RefineError::ClassTooSmall(m));
    }
    if !mesh.is_active(e) {
        return Err(RefineError::InactiveMark(e.clone()));
    }
    let mut chain = vec![e.clone()];
    refine_element(mesh, e, m, log, log.steps_completed, &mut chain)
}

/// One refinement step: refines every marked element in the given order,
/// skipping marks that an earlier cascade already subdivided. Skipped
/// marks still produce `Marked` events; the complexity estimate counts
/// them. All marks must be active at call time.
pub fn refine_with_order(
    mesh: &mut HierarchicalMesh,
    marks: &[Element],
    m: u32,
    log: &mut ProvenanceLog,
) -> Result<(), RefineError> {
    if m < 2 {
        return Err(RefineError::ClassTooSmall(m));
    }
    for e in marks {
        if !mesh.is_active(e) {
            return Err(RefineError::InactiveMark(e.clone()));
        }
    }
    let step = log.steps_completed;
    for e in marks {
        log.events.push(ProvenanceEvent::Marked {
            element: e.clone(),
            step,
        });
    }
    for e in marks {
        if mesh.is_active(e) {
            let mut chain = vec![e.clone()];
            refine_element(mesh, e, m, log, step, &mut chain)?;
        }
    }
    log.steps_completed += 1;
    Ok(())
}

/// One refinement step over a mark set, in canonical traversal order.
pub fn refine(
    mesh: &mut HierarchicalMesh,
    marks: &MarkSet,
    m: u32,
    log: &mut ProvenanceLog,
) -> Result<(), RefineError> {
    let ordered: Vec<Element> = marks.iter().cloned().collect();
    refine_with_order(mesh, &ordered, m, log)
}

/// Like [`refine`], but checks strict admissibility of the input and the
/// output with the independent checker and fails loudly on a violation.
pub fn refine_validated(
    mesh: &mut HierarchicalMesh,
    marks: &MarkSet,
    m: u32,
    log: &mut ProvenanceLog,
) -> Result<(), RefineError> {
    let pre = crate::admissibility::is_strictly_admissible(mesh, m);
    assert!(
        pre.strictly_admissible,
        "refine precondition violated: input mesh not strictly admissible of class {m} ({:?})",
        pre.witness
    );
    refine(mesh, marks, m, log)?;
    let post = crate::admissibility::is_strictly_admissible(mesh, m);
    assert!(
        post.strictly_admissible,
        "refine postcondition violated: output mesh not strictly admissible of class {m} ({:?})",
        post.witness
    );
    mesh.validate()?;
    Ok(())
}

/// Marking policies for generated refinement histories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkPolicy {
    /// Marks a uniformly random fraction `theta` of the active elements
    /// (at least one).
    RandomFraction { theta: f64 },
    /// Marks the deepest active element containing the origin corner;
    /// drives the level up by one per step and exercises long
    /// neighborhood cascades.
    CornerChase,
    /// Marks one uniformly random active element.
    SingleRandom,
    /// Marks the canonically first active element of the deepest level.
    SingleDeepest,
}

impl MarkPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            MarkPolicy::RandomFraction { .. } => "random-fraction",
            MarkPolicy::CornerChase => "corner-chase",
            MarkPolicy::SingleRandom => "single-random",
            MarkPolicy::SingleDeepest => "single-deepest",
        }
    }

    /// The marks this policy selects on the given mesh.
    pub fn select(&self, mesh: &HierarchicalMesh, rng: &mut ChaCha8Rng) -> MarkSet {
        match *self {
            MarkPolicy::RandomFraction { theta } => {
                let actives: Vec<Element> = mesh.active_elements().into_iter().collect();
                let count =
                    ((actives.len() as f64 * theta).ceil() as usize).clamp(1, actives.len());
                rand::seq::index::sample(rng, actives.len(), count)
                    .into_iter()
                    .map(|i| actives[i].clone())
                    .collect()
            }
            MarkPolicy::CornerChase => {
                let corner = (0..mesh.num_levels())
                    .rev()
                    .map(|l| Element::new(l, vec![0; mesh.cfg().dim()]))
                    .find(|e| mesh.is_active(e))
                    .expect("the origin corner is tiled by some active element");
                [corner].into_iter().collect()
            }
            MarkPolicy::SingleRandom => {
                let actives: Vec<Element> = mesh.active_elements().into_iter().collect();
                let pick = actives[rng.gen_range(0..actives.len())].clone();
                [pick].into_iter().collect()
            }
            MarkPolicy::SingleDeepest => {
                let deepest = mesh.num_levels() - 1;
                let pick = mesh
                    .active_elements()
                    .into_iter()
                    .find(|e| e.level() == deepest)
                    .expect("deepest level has active elements");
                [pick].into_iter().collect()
            }
        }
    }
}

/// Per-step bookkeeping of a recorded history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub marked: usize,
    pub elements_after: usize,
}

/// A full refinement history: configuration, class, the mark set of every
/// step, initial and final meshes, per-step counts and the provenance log.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementHistory {
    pub cfg: MeshConfig,
    pub m: u32,
    pub marks_per_step: Vec<MarkSet>,
    pub initial: HierarchicalMesh,
    pub final_mesh: HierarchicalMesh,
    pub step_counts: Vec<StepCounts>,
    pub log: ProvenanceLog,
    /// True iff the history started from the uniform initial grid, the
    /// setting of the complexity estimate. Histories from a pre-refined
    /// mesh are recorded but flagged as outside those hypotheses.
    pub from_initial_grid: bool,
}

impl RefinementHistory {
    /// Total number of marks over all steps (multiset count).
    pub fn total_marked(&self) -> usize {
        self.marks_per_step.iter().map(|s| s.len()).sum()
    }

    /// Number of final active elements that were not active initially.
    pub fn new_elements(&self) -> usize {
        self.final_new_elements().len()
    }

    /// The final active elements that are not active in the initial mesh.
    pub fn final_new_elements(&self) -> Vec<Element> {
        self.final_mesh
            .active_elements()
            .into_iter()
            .filter(|e| !self.initial.is_active(e))
            .collect()
    }
}

/// Runs a history from an explicit mark sequence, starting at the uniform
/// initial mesh.
pub fn run_marked_history(
    cfg: MeshConfig,
    m: u32,
    mark_sets: &[MarkSet],
) -> Result<RefinementHistory, RefineError> {
    let initial = HierarchicalMesh::initial(cfg.clone());
    run_history_from(
        initial,
        cfg,
        m,
        |_, step| mark_sets.get(step).cloned(),
        None,
    )
}

/// Runs a policy-driven history for `steps` steps with a seeded generator.
/// An optional element budget stops marking early once the mesh outgrows
/// it; the recorded steps still form a valid history.
pub fn run_policy_history(
    cfg: MeshConfig,
    m: u32,
    policy: MarkPolicy,
    steps: usize,
    seed: u64,
    max_elements: Option<usize>,
) -> Result<RefinementHistory, RefineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = HierarchicalMesh::initial(cfg.clone());
    run_history_from(
        initial,
        cfg,
        m,
        |mesh, step| {
            if step >= steps {
                return None;
            }
            if let Some(cap) = max_elements {
                if mesh.element_count() > cap {
                    return None;
                }
            }
            Some(policy.select(mesh, &mut rng))
        },
        None,
    )
}

/// Runs a history from an arbitrary starting mesh (flagged as outside the
/// initial-grid hypotheses unless the start is the uniform mesh).
pub fn run_history_from(
    start: HierarchicalMesh,
    cfg: MeshConfig,
    m: u32,
    mut next_marks: impl FnMut(&HierarchicalMesh, usize) -> Option<MarkSet>,
    max_steps: Option<usize>,
) -> Result<RefinementHistory, RefineError> {
    let from_initial_grid = start == HierarchicalMesh::initial(cfg.clone());
    let initial = start.clone();
    let mut mesh = start;
    let mut log = ProvenanceLog::new();
    let mut marks_per_step = Vec::new();
    let mut step_counts = Vec::new();
    let mut step = 0;
    while max_steps.is_none_or(|cap| step < cap) {
        let Some(marks) = next_marks(&mesh, step) else {
            break;
        };
        refine(&mut mesh, &marks, m, &mut log)?;
        step_counts.push(StepCounts {
            marked: marks.len(),
            elements_after: mesh.element_count(),
        });
        marks_per_step.push(marks);
        step += 1;
    }
    Ok(RefinementHistory {
        cfg,
        m,
        marks_per_step,
        initial,
        final_mesh: mesh,
        step_counts,
        log,
        from_initial_grid,
    })
}
