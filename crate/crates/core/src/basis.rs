//! Tensor-product B-spline index sets, hierarchical basis selection,
//! two-scale refinement, truncation and point evaluation.
//!
//! The per-level basis is the translation-invariant uniform one: knots are
//! extended beyond the domain, and the level-`l` index set consists of all
//! B-splines whose support meets the domain interior. All two-scale
//! coefficients are strictly positive, so the index support of an expansion
//! equals its analytic support; support queries are exact integer tests.
//!
//! Truncated functions exist in two forms. [`ThbFunction`] carries the full
//! finest-level coefficient expansion; it is the canonical representation
//! but its term count grows geometrically with the depth of the mesh below
//! the mother function. The `thb_*` free functions answer point values,
//! support queries and per-element counts against the mesh directly,
//! tracking only the terms that can influence the query; they return
//! exactly the values the materialized expansion would and stay cheap on
//! deeply graded meshes. The two routes cross-check each other in tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MeshConfig;
use crate::grid::{visit_window, Element};
use crate::mesh::HierarchicalMesh;
use crate::scalar::Real;

/// Errors from basis queries.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BasisError {
    #[error("point has {got} coordinates, configuration dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point lies outside the domain")]
    PointOutsideDomain,
}

/// Identifier of one uniform tensor-product B-spline: its level and the
/// per-direction knot index `k`, for the spline supported on
/// `prod_i (k_i 2^-l, (k_i + p_i + 1) 2^-l)`. Knot indices may be negative
/// near the lower domain boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsplineId {
    level: u32,
    knot: Vec<i64>,
}

impl BsplineId {
    pub fn new(level: u32, knot: Vec<i64>) -> Self {
        Self { level, knot }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn knot(&self) -> &[i64] {
        &self.knot
    }

    /// Member of the level's index set iff the support meets the domain
    /// interior in every direction.
    pub fn in_index_set(&self, cfg: &MeshConfig) -> bool {
        self.knot
            .iter()
            .zip(cfg.degrees())
            .zip(cfg.extents())
            .all(|((&k, &p), &m)| k >= -(p as i64) && k < (m << self.level) as i64)
    }

    /// Per-direction inclusive window of in-domain support cells at the
    /// spline's own level, clamped to the grid.
    pub(crate) fn clipped_support(&self, cfg: &MeshConfig) -> Vec<(u64, u64)> {
        debug_assert!(self.in_index_set(cfg));
        self.knot
            .iter()
            .zip(cfg.degrees())
            .zip(cfg.extents())
            .map(|((&k, &p), &m)| {
                let size = (m << self.level) as i64;
                let lo = k.max(0) as u64;
                let hi = (k + p as i64).min(size - 1) as u64;
                (lo, hi)
            })
            .collect()
    }

    /// Does the (unclipped) open support intersect the open cell of `e`?
    fn support_meets(&self, cfg: &MeshConfig, e: &Element) -> bool {
        let d = cfg.dim();
        debug_assert_eq!(e.dim(), d);
        for i in 0..d {
            let p = cfg.degrees()[i] as i64;
            // compare open intervals scaled to the common finer level
            let (lo_s, hi_s, lo_e, hi_e);
            if self.level >= e.level() {
                let shift = self.level - e.level();
                lo_s = self.knot[i] as i128;
                hi_s = (self.knot[i] + p + 1) as i128;
                lo_e = (e.index()[i] as i128) << shift;
                hi_e = ((e.index()[i] + 1) as i128) << shift;
            } else {
                let shift = e.level() - self.level;
                lo_s = (self.knot[i] as i128) << shift;
                hi_s = ((self.knot[i] + p + 1) as i128) << shift;
                lo_e = e.index()[i] as i128;
                hi_e = (e.index()[i] + 1) as i128;
            }
            if lo_s >= hi_e || lo_e >= hi_s {
                return false;
            }
        }
        true
    }

    /// Is the clipped support contained in `Omega^{level}` of the mesh?
    fn support_inside_own_omega(&self, mesh: &HierarchicalMesh) -> bool {
        if self.level == 0 {
            // Omega^0 always covers the whole grid
            return true;
        }
        let window = self.clipped_support(mesh.cfg());
        let Some(cells) = mesh.hierarchy().level_cells(self.level) else {
            return false;
        };
        visit_window(&window, |cell| cells.contains(cell))
    }

    /// Is the clipped support contained in `Omega^{level+1}`?
    fn support_inside_next_omega(&self, mesh: &HierarchicalMesh) -> bool {
        if mesh.num_levels() <= self.level + 1 {
            return false;
        }
        let window = self.clipped_support(mesh.cfg());
        visit_window(&window, |cell| {
            mesh.hierarchy()
                .region_contains(self.level + 1, self.level, cell)
        })
    }

    /// Does the clipped support intersect the interior of `Omega^{level+1}`?
    fn support_meets_next_omega(&self, mesh: &HierarchicalMesh) -> bool {
        if mesh.num_levels() <= self.level + 1 {
            return false;
        }
        let window = self.clipped_support(mesh.cfg());
        // Omega^{l+1} is a union of level-l cell closures, so interior
        // overlap with a level-l cell means full containment of that cell.
        !visit_window(&window, |cell| {
            !mesh
                .hierarchy()
                .region_contains(self.level + 1, self.level, cell)
        })
    }
}

impl fmt::Display for BsplineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B(level {}, knot {:?})", self.level, self.knot)
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    let mut acc = 1u64;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Univariate two-scale mask for the uniform B-spline of degree `p`:
/// the child `2k + t` receives `2^-p binomial(p+1, t)` for `t = 0..=p+1`.
/// All entries are strictly positive.
pub fn univariate_mask<R: Real>(p: u32) -> Vec<R> {
    let scale = R::exp2i(-(p as i32));
    (0..=p + 1)
        .map(|t| R::from_count(binomial(p + 1, t)) * scale)
        .collect()
}

/// Two-scale relation: the representation of the spline `id` in the basis
/// one level finer, as tensor products of the univariate masks. Children
/// whose support misses the domain interior carry no mass on the domain
/// and are omitted.
pub fn two_scale<R: Real>(cfg: &MeshConfig, id: &BsplineId) -> Vec<(BsplineId, R)> {
    let masks: Vec<Vec<R>> = cfg.degrees().iter().map(|&p| univariate_mask(p)).collect();
    let window: Vec<(i64, i64)> = cfg
        .degrees()
        .iter()
        .map(|&p| (0i64, p as i64 + 1))
        .collect();
    let mut out = Vec::new();
    visit_window(&window, |offsets| {
        let knot: Vec<i64> = id
            .knot
            .iter()
            .zip(offsets)
            .map(|(&k, &t)| 2 * k + t)
            .collect();
        let child = BsplineId::new(id.level + 1, knot);
        if child.in_index_set(cfg) {
            let coeff = offsets
                .iter()
                .enumerate()
                .map(|(i, &t)| masks[i][t as usize])
                .fold(R::one(), |acc, c| acc * c);
            out.push((child, coeff));
        }
        true
    });
    out
}

/// All B-splines of level `level` whose support meets the domain interior;
/// the index set of the level's spline space. Cardinality is
/// `prod_i (M_i 2^level + p_i)`.
pub fn level_basis(cfg: &MeshConfig, level: u32) -> Vec<BsplineId> {
    let window: Vec<(i64, i64)> = cfg
        .degrees()
        .iter()
        .zip(cfg.extents())
        .map(|(&p, &m)| (-(p as i64), (m << level) as i64 - 1))
        .collect();
    let mut out = Vec::new();
    visit_window(&window, |knot| {
        out.push(BsplineId::new(level, knot.to_vec()));
        true
    });
    out
}

/// Is `id` selected into the hierarchical basis of the mesh? Requires its
/// clipped support inside `Omega^{level}` but not inside `Omega^{level+1}`.
pub fn hb_member(mesh: &HierarchicalMesh, id: &BsplineId) -> bool {
    id.in_index_set(mesh.cfg())
        && id.level() < mesh.num_levels()
        && id.support_inside_own_omega(mesh)
        && !id.support_inside_next_omega(mesh)
}

/// The hierarchical B-spline basis of the mesh, in canonical order.
///
/// Candidates at each level are generated from the cells of `Omega^l`
/// rather than the full index set, so the cost scales with the refined
/// region instead of the grid.
pub fn hb_basis(mesh: &HierarchicalMesh) -> Vec<BsplineId> {
    let cfg = mesh.cfg();
    let mut out = Vec::new();
    for level in 0..mesh.num_levels() {
        let cells = mesh
            .hierarchy()
            .level_cells(level)
            .expect("level below num_levels");
        let mut candidates = BTreeSet::new();
        for cell in cells {
            let window: Vec<(i64, i64)> = cell
                .iter()
                .zip(cfg.degrees())
                .map(|(&c, &p)| (c as i64 - p as i64, c as i64))
                .collect();
            visit_window(&window, |knot| {
                candidates.insert(knot.to_vec());
                true
            });
        }
        for knot in candidates {
            let id = BsplineId::new(level, knot);
            if hb_member(mesh, &id) {
                out.push(id);
            }
        }
    }
    out
}

/// One truncated hierarchical basis function, represented by its mother
/// spline and a sparse strictly-positive coefficient expansion at
/// `expansion_level`. Constructed by [`thb_basis`], the expansion sits at
/// the finest mesh level.
#[derive(Debug, Clone, PartialEq)]
pub struct ThbFunction<R: Real> {
    origin: BsplineId,
    expansion_level: u32,
    coeffs: BTreeMap<Vec<i64>, R>,
}

impl<R: Real> ThbFunction<R> {
    /// The untruncated mother spline as a single-term expansion.
    pub fn mother(origin: BsplineId) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(origin.knot().to_vec(), R::one());
        Self {
            expansion_level: origin.level(),
            origin,
            coeffs,
        }
    }

    pub fn origin(&self) -> &BsplineId {
        &self.origin
    }

    pub fn expansion_level(&self) -> u32 {
        self.expansion_level
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Surviving terms as `(id, coefficient)` pairs in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (BsplineId, R)> + '_ {
        let level = self.expansion_level;
        self.coeffs
            .iter()
            .map(move |(knot, &c)| (BsplineId::new(level, knot.clone()), c))
    }

    /// Pure two-scale re-expression one level finer; the function is
    /// unchanged as a function.
    pub fn refined_once(&self, cfg: &MeshConfig) -> Self {
        let mut coeffs: BTreeMap<Vec<i64>, R> = BTreeMap::new();
        for (knot, &c) in &self.coeffs {
            let id = BsplineId::new(self.expansion_level, knot.clone());
            for (child, w) in two_scale::<R>(cfg, &id) {
                *coeffs.entry(child.knot().to_vec()).or_insert_with(R::zero) += c * w;
            }
        }
        Self {
            origin: self.origin.clone(),
            expansion_level: self.expansion_level + 1,
            coeffs,
        }
    }

    /// One truncation step: re-express one level finer, then drop every
    /// term whose clipped support lies inside the next domain.
    pub fn truncated_once(&self, mesh: &HierarchicalMesh) -> Self {
        let mut refined = self.refined_once(mesh.cfg());
        let level = refined.expansion_level;
        refined.coeffs.retain(|knot, _| {
            let id = BsplineId::new(level, knot.clone());
            !id.support_inside_own_omega(mesh)
        });
        refined
    }

    /// Value at `x`; rejects points outside the closed domain.
    pub fn evaluate(&self, cfg: &MeshConfig, x: &[R]) -> Result<R, BasisError> {
        check_point(cfg, x)?;
        let level = self.expansion_level;
        let mut sum = R::zero();
        // only splines whose knot window covers x can contribute
        let window: Vec<(i64, i64)> = x
            .iter()
            .zip(cfg.degrees())
            .map(|(&xi, &p)| {
                let t = (xi * R::exp2i(level as i32)).floor();
                let cell = t.to_i64().unwrap_or(0);
                (cell - p as i64 - 1, cell)
            })
            .collect();
        visit_window(&window, |knot| {
            if let Some(&c) = self.coeffs.get(knot) {
                let id = BsplineId::new(level, knot.to_vec());
                sum += c * spline_value(cfg, &id, x);
            }
            true
        });
        Ok(sum)
    }

    /// Exact support query: does the function take nonzero values on the
    /// open cell of `e`? True iff some surviving term's support meets the
    /// cell, valid because every stored coefficient is strictly positive.
    pub fn nonzero_on(&self, cfg: &MeshConfig, e: &Element) -> bool {
        let level = self.expansion_level;
        self.coeffs
            .keys()
            .any(|knot| BsplineId::new(level, knot.clone()).support_meets(cfg, e))
    }
}

/// The truncated hierarchical basis of the mesh: every hierarchical basis
/// function truncated successively against all finer domains, expanded at
/// the finest level.
///
/// Term counts grow geometrically with the refinement depth below each
/// mother; prefer the `thb_*` query functions on deep meshes.
pub fn thb_basis<R: Real>(mesh: &HierarchicalMesh) -> Vec<ThbFunction<R>> {
    hb_basis(mesh)
        .into_iter()
        .map(|origin| truncate_to_finest(mesh, ThbFunction::mother(origin)))
        .collect()
}

fn truncate_to_finest<R: Real>(mesh: &HierarchicalMesh, mut f: ThbFunction<R>) -> ThbFunction<R> {
    while f.expansion_level + 1 < mesh.num_levels() {
        f = f.truncated_once(mesh);
    }
    f
}

fn check_point<R: Real>(cfg: &MeshConfig, x: &[R]) -> Result<(), BasisError> {
    if x.len() != cfg.dim() {
        return Err(BasisError::DimensionMismatch {
            expected: cfg.dim(),
            got: x.len(),
        });
    }
    for (&xi, &m) in x.iter().zip(cfg.extents()) {
        if xi < R::zero() || xi > R::from_count(m) {
            return Err(BasisError::PointOutsideDomain);
        }
    }
    Ok(())
}

/// Cardinal B-spline of degree `p` on `(0, p+1)`, by the Cox-de Boor
/// recurrence. Strictly positive exactly on the open support.
fn cardinal_bspline<R: Real>(p: u32, t: R) -> R {
    if p == 0 {
        return if t >= R::zero() && t < R::one() {
            R::one()
        } else {
            R::zero()
        };
    }
    if t <= R::zero() || t >= R::from_count(p as u64 + 1) {
        return R::zero();
    }
    let left = t * cardinal_bspline(p - 1, t);
    let right = (R::from_count(p as u64 + 1) - t) * cardinal_bspline(p - 1, t - R::one());
    (left + right) / R::from_count(p as u64)
}

/// Value of the normalized tensor-product B-spline `id` at `x`.
pub fn spline_value<R: Real>(cfg: &MeshConfig, id: &BsplineId, x: &[R]) -> R {
    let scale = R::exp2i(id.level() as i32);
    x.iter()
        .zip(id.knot())
        .zip(cfg.degrees())
        .map(|((&xi, &k), &p)| cardinal_bspline(p, xi * scale - R::from_int(k)))
        .fold(R::one(), |acc, v| acc * v)
}

/// Value of the truncated function with mother `origin` at `x`, computed
/// against the mesh without materializing the finest-level expansion.
/// Tracks only terms whose open support contains `x`; terms dropped that
/// way are zero at `x` at every stage, so the result equals the
/// materialized evaluation exactly.
pub fn thb_evaluate_at<R: Real>(
    mesh: &HierarchicalMesh,
    origin: &BsplineId,
    x: &[R],
) -> Result<R, BasisError> {
    let cfg = mesh.cfg();
    check_point(cfg, x)?;
    let supports_x = |id: &BsplineId| -> bool {
        let scale = R::exp2i(id.level() as i32);
        id.knot()
            .iter()
            .zip(cfg.degrees())
            .zip(x)
            .all(|((&k, &p), &xi)| {
                let t = xi * scale - R::from_int(k);
                t > R::zero() && t < R::from_count(p as u64 + 1)
            })
    };

    let mut level = origin.level();
    let mut coeffs: BTreeMap<Vec<i64>, R> = BTreeMap::new();
    if supports_x(origin) {
        coeffs.insert(origin.knot().to_vec(), R::one());
    }
    while level + 1 < mesh.num_levels() && !coeffs.is_empty() {
        let mut next: BTreeMap<Vec<i64>, R> = BTreeMap::new();
        for (knot, &c) in &coeffs {
            let id = BsplineId::new(level, knot.clone());
            for (child, w) in two_scale::<R>(cfg, &id) {
                if supports_x(&child) && !child.support_inside_own_omega(mesh) {
                    *next.entry(child.knot().to_vec()).or_insert_with(R::zero) += c * w;
                }
            }
        }
        coeffs = next;
        level += 1;
    }
    let mut sum = R::zero();
    for (knot, &c) in &coeffs {
        sum += c * spline_value(cfg, &BsplineId::new(level, knot.clone()), x);
    }
    Ok(sum)
}

/// Exact support query for the truncated function with mother `origin`:
/// does it take nonzero values on the open cell of `e`? Computed by a
/// windowed expansion that tracks only term ids meeting `e`, with an early
/// exit once a surviving term clears every finer domain.
pub fn thb_nonzero_on(mesh: &HierarchicalMesh, origin: &BsplineId, e: &Element) -> bool {
    let cfg = mesh.cfg();
    let n = mesh.num_levels();
    let mut level = origin.level();
    let mut ids: BTreeSet<Vec<i64>> = BTreeSet::new();
    if origin.support_meets(cfg, e) {
        ids.insert(origin.knot().to_vec());
    }
    loop {
        if ids.is_empty() {
            return false;
        }
        if level + 1 >= n {
            return true;
        }
        // a tracked term whose support misses the next domain survives all
        // further truncation and already meets e
        for knot in &ids {
            let id = BsplineId::new(level, knot.clone());
            if !id.support_meets_next_omega(mesh) {
                return true;
            }
        }
        let mut next: BTreeSet<Vec<i64>> = BTreeSet::new();
        for knot in &ids {
            let id = BsplineId::new(level, knot.clone());
            for (child, _) in two_scale::<f64>(cfg, &id) {
                if child.support_meets(cfg, e) && !child.support_inside_own_omega(mesh) {
                    next.insert(child.knot().to_vec());
                }
            }
        }
        ids = next;
        level += 1;
    }
}

/// Mothers of all truncated basis functions that are nonzero on the open
/// cell of the active element `e`, in canonical order.
///
/// Only levels up to `level(e)` are scanned: a deeper function's support
/// lies inside its level's domain, and no domain deeper than `level(e)`
/// meets the interior of an active element.
pub fn thb_functions_on_element(mesh: &HierarchicalMesh, e: &Element) -> Vec<BsplineId> {
    debug_assert!(mesh.is_active(e));
    let cfg = mesh.cfg();
    let d = cfg.dim();
    let mut out = Vec::new();
    for level in 0..mesh.num_levels().min(e.level() + 1) {
        // cell range of e at this level (inclusive), in level-`level` units
        let (range_lo, range_hi): (Vec<i64>, Vec<i64>) = if level <= e.level() {
            let shift = e.level() - level;
            let lo: Vec<i64> = e.index().iter().map(|&j| (j >> shift) as i64).collect();
            (lo.clone(), lo)
        } else {
            let shift = level - e.level();
            (
                e.index().iter().map(|&j| (j << shift) as i64).collect(),
                e.index()
                    .iter()
                    .map(|&j| (((j + 1) << shift) - 1) as i64)
                    .collect(),
            )
        };

        let mut candidates: Vec<Vec<i64>> = Vec::new();
        let knot_window: Vec<(i64, i64)> = (0..d)
            .map(|i| (range_lo[i] - cfg.degrees()[i] as i64, range_hi[i]))
            .collect();
        let window_cells: u128 = knot_window
            .iter()
            .map(|&(lo, hi)| (hi - lo + 1) as u128)
            .product();
        let omega = mesh
            .hierarchy()
            .level_cells(level)
            .expect("level below num_levels");
        if window_cells <= omega.len() as u128 {
            visit_window(&knot_window, |knot| {
                candidates.push(knot.to_vec());
                true
            });
        } else {
            // generate candidates from the domain cells near e instead of
            // sweeping a huge window
            for cell in omega {
                let near = (0..d).all(|i| {
                    let c = cell[i] as i64;
                    c >= range_lo[i] - cfg.degrees()[i] as i64
                        && c <= range_hi[i] + cfg.degrees()[i] as i64
                });
                if !near {
                    continue;
                }
                let w: Vec<(i64, i64)> = (0..d)
                    .map(|i| {
                        let c = cell[i] as i64;
                        let p = cfg.degrees()[i] as i64;
                        ((c - p).max(range_lo[i] - p), c.min(range_hi[i]))
                    })
                    .collect();
                visit_window(&w, |knot| {
                    candidates.push(knot.to_vec());
                    true
                });
            }
        }
        candidates.sort_unstable();
        candidates.dedup();

        for knot in candidates {
            let id = BsplineId::new(level, knot);
            if id.support_meets(cfg, e) && hb_member(mesh, &id) && thb_nonzero_on(mesh, &id, e) {
                out.push(id);
            }
        }
    }
    out
}

/// For every active element, the mothers of the truncated basis functions
/// that are nonzero on it, computed in one sweep per basis function.
///
/// Each function's truncated support is expanded level by level; once a
/// surviving term clears every finer domain (or the finest level is
/// reached), the active elements tiling its support are collected by
/// walking the hierarchy. Per-element lists come out in canonical order
/// and agree with [`thb_functions_on_element`].
pub fn thb_functions_per_element(mesh: &HierarchicalMesh) -> BTreeMap<Element, Vec<BsplineId>> {
    let cfg = mesh.cfg();
    let n = mesh.num_levels();
    let mut out: BTreeMap<Element, Vec<BsplineId>> = mesh
        .active_elements()
        .into_iter()
        .map(|e| (e, Vec::new()))
        .collect();
    for origin in hb_basis(mesh) {
        let mut covered: BTreeSet<Element> = BTreeSet::new();
        let mut seen_cells: BTreeSet<(u32, Vec<u64>)> = BTreeSet::new();
        let mut ids: BTreeSet<Vec<i64>> = [origin.knot().to_vec()].into_iter().collect();
        let mut level = origin.level();
        while !ids.is_empty() {
            let mut next: BTreeSet<Vec<i64>> = BTreeSet::new();
            for knot in &ids {
                let id = BsplineId::new(level, knot.clone());
                if level + 1 >= n || !id.support_meets_next_omega(mesh) {
                    // survives all further truncation: positive on its
                    // whole support
                    let window = id.clipped_support(cfg);
                    visit_window(&window, |cell| {
                        if seen_cells.insert((level, cell.to_vec())) {
                            collect_active_under_cell(mesh, level, cell, &mut covered);
                        }
                        true
                    });
                } else {
                    for (child, _) in two_scale::<f64>(cfg, &id) {
                        if !child.support_inside_own_omega(mesh) {
                            next.insert(child.knot().to_vec());
                        }
                    }
                }
            }
            ids = next;
            level += 1;
        }
        for e in covered {
            out.get_mut(&e)
                .expect("covered elements are active")
                .push(origin.clone());
        }
    }
    out
}

/// Collects the active elements whose cells meet the interior of the
/// level-`level` cell `idx`: either the unique active ancestor, or all
/// active descendants when the cell is subdivided.
fn collect_active_under_cell(
    mesh: &HierarchicalMesh,
    level: u32,
    idx: &[u64],
    covered: &mut BTreeSet<Element>,
) {
    for l in (0..=level).rev() {
        let shift = level - l;
        let anc: Vec<u64> = idx.iter().map(|&j| j >> shift).collect();
        if mesh
            .active_at(l)
            .is_some_and(|active| active.contains(&anc))
        {
            covered.insert(Element::new(l, anc));
            return;
        }
    }
    // no active ancestor: the cell is covered by finer elements
    assert!(
        level + 1 < mesh.num_levels(),
        "active elements do not tile the domain"
    );
    let d = idx.len();
    for bits in 0..(1u64 << d) {
        let child: Vec<u64> = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| 2 * j + ((bits >> i) & 1))
            .collect();
        if mesh
            .active_at(level + 1)
            .is_some_and(|active| active.contains(&child))
        {
            covered.insert(Element::new(level + 1, child));
        } else {
            collect_active_under_cell(mesh, level + 1, &child, covered);
        }
    }
}

/// Sum of every truncated basis function at `x`; equals one on the open
/// domain for any valid mesh.
pub fn thb_partition_sum<R: Real>(mesh: &HierarchicalMesh, x: &[R]) -> Result<R, BasisError> {
    let cfg = mesh.cfg();
    check_point(cfg, x)?;
    let mut sum = R::zero();
    for level in 0..mesh.num_levels() {
        let window: Vec<(i64, i64)> = x
            .iter()
            .zip(cfg.degrees())
            .map(|(&xi, &p)| {
                let cell = (xi * R::exp2i(level as i32)).floor().to_i64().unwrap_or(0);
                (cell - p as i64 - 1, cell)
            })
            .collect();
        let mut contributions = Vec::new();
        visit_window(&window, |knot| {
            contributions.push(knot.to_vec());
            true
        });
        for knot in contributions {
            let id = BsplineId::new(level, knot);
            if hb_member(mesh, &id) {
                sum += thb_evaluate_at(mesh, &id, x)?;
            }
        }
    }
    Ok(sum)
}
