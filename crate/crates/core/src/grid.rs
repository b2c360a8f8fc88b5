//! Index arithmetic on the infinite family of dyadic tensor grids.
//!
//! A level-`l` grid cell is the open box `prod_i (j_i 2^-l, (j_i+1) 2^-l)`.
//! Grids are never materialized: every operation here is integer arithmetic
//! against a [`MeshConfig`], so queries cost O(1) memory.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MeshConfig;
use crate::scalar::Real;

/// Errors from grid-level index arithmetic.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("ancestor level {requested} exceeds element level {actual}")]
    LevelAboveElement { requested: u32, actual: u32 },
    #[error("element has {got} index entries, configuration dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for level {level} (grid size {size})")]
    IndexOutOfRange { index: u64, level: u32, size: u64 },
}

/// A level-tagged open hypercube cell, identified by integer index
/// coordinates. Side length is `2^-level`.
///
/// Ordering is level-major, then lexicographic in the index: the canonical
/// traversal order used everywhere determinism matters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element {
    level: u32,
    index: Vec<u64>,
}

impl Element {
    pub fn new(level: u32, index: Vec<u64>) -> Self {
        Self { level, index }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[u64] {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Side length `2^-level` of the cell.
    pub fn side_length<R: Real>(&self) -> R {
        R::exp2i(-(self.level as i32))
    }

    /// Cell midpoint, coordinate-wise `(j_i + 1/2) 2^-level`.
    pub fn midpoint<R: Real>(&self) -> Vec<R> {
        let scale = R::exp2i(-(self.level as i32 + 1));
        self.index
            .iter()
            .map(|&j| R::from_count(2 * j + 1) * scale)
            .collect()
    }

    /// Checks index bounds against the configuration.
    pub fn validate(&self, cfg: &MeshConfig) -> Result<(), GridError> {
        if self.index.len() != cfg.dim() {
            return Err(GridError::DimensionMismatch {
                expected: cfg.dim(),
                got: self.index.len(),
            });
        }
        for (&j, &m) in self.index.iter().zip(cfg.extents()) {
            let size = m << self.level;
            if j >= size {
                return Err(GridError::IndexOutOfRange {
                    index: j,
                    level: self.level,
                    size,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(level {}, index {:?})", self.level, self.index)
    }
}

/// Unordered collection of elements with canonical (level-major,
/// lexicographic) iteration order.
pub type ElementSet = BTreeSet<Element>;

/// The `2^d` level-`(l+1)` children whose closures tile the closure of `e`.
pub fn children(e: &Element) -> ElementSet {
    let mut out = ElementSet::new();
    let d = e.dim();
    for bits in 0..(1u64 << d) {
        let index = e
            .index
            .iter()
            .enumerate()
            .map(|(i, &j)| 2 * j + ((bits >> i) & 1))
            .collect();
        out.insert(Element::new(e.level + 1, index));
    }
    out
}

/// The unique level-`k` element containing `e`; requires `k <= level(e)`.
pub fn ancestor(e: &Element, k: u32) -> Result<Element, GridError> {
    if k > e.level {
        return Err(GridError::LevelAboveElement {
            requested: k,
            actual: e.level,
        });
    }
    let shift = e.level - k;
    Ok(Element::new(
        k,
        e.index.iter().map(|&j| j >> shift).collect(),
    ))
}

/// Per-direction index window `[lo_i, hi_i]` (inclusive) of the level-`k`
/// cells in the support extension of `e`, clamped to the grid bounds.
///
/// With the translation-invariant uniform basis, the level-`k` B-splines
/// meeting `e` are exactly those whose support window of `p_i + 1` cells
/// contains the ancestor cell, so the extension is the ancestor index
/// `a_i` widened by `p_i` on both sides.
pub(crate) fn support_window(
    cfg: &MeshConfig,
    e: &Element,
    k: u32,
) -> Result<Vec<(u64, u64)>, GridError> {
    let a = ancestor(e, k)?;
    a.validate(cfg)?;
    Ok(a.index
        .iter()
        .zip(cfg.degrees())
        .zip(cfg.extents())
        .map(|((&ai, &p), &m)| {
            let lo = ai.saturating_sub(p as u64);
            let hi = (ai + p as u64).min((m << k) - 1);
            (lo, hi)
        })
        .collect())
}

/// Support extension `S(e, k)`: all level-`k` cells touched by level-`k`
/// B-splines whose support meets `e`. Requires `k <= level(e)`.
pub fn support_extension(cfg: &MeshConfig, e: &Element, k: u32) -> Result<ElementSet, GridError> {
    let window = support_window(cfg, e, k)?;
    let mut out = ElementSet::new();
    visit_window(&window, |cell| {
        out.insert(Element::new(k, cell.to_vec()));
        true
    });
    Ok(out)
}

/// Visits every lattice point of the inclusive box `window`, in
/// lexicographic order with the first coordinate fastest. The callback
/// returns `false` to abort; the function returns `false` iff aborted.
pub(crate) fn visit_window<T>(window: &[(T, T)], mut f: impl FnMut(&[T]) -> bool) -> bool
where
    T: num_traits::PrimInt,
{
    if window.iter().any(|&(lo, hi)| lo > hi) {
        return true;
    }
    let mut cursor: Vec<T> = window.iter().map(|&(lo, _)| lo).collect();
    loop {
        if !f(&cursor) {
            return false;
        }
        let mut i = 0;
        loop {
            if i == cursor.len() {
                return true;
            }
            if cursor[i] < window[i].1 {
                cursor[i] = cursor[i] + T::one();
                break;
            }
            cursor[i] = window[i].0;
            i += 1;
        }
    }
}

/// Euclidean distance between cell midpoints.
pub fn midpoint_distance<R: Real>(a: &Element, b: &Element) -> R {
    let ma = a.midpoint::<R>();
    let mb = b.midpoint::<R>();
    ma.iter()
        .zip(&mb)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(R::zero(), |acc, t| acc + t)
        .sqrt()
}
