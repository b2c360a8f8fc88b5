//! Refinement-complexity constants, the lambda weighting function, and
//! instance verification of the counting inequalities on recorded
//! histories.
//!
//! The headline estimate bounds the number of elements created across a
//! whole refinement history by `lambda_cap` times the number of marks.
//! Its proof weights each (created element, mark) pair by a function
//! `lambda` that is positive only inside a level window and a level-scaled
//! distance ball; recorded histories let every inequality of that proof be
//! replayed and checked on concrete data.

use std::time::Instant;

use thiserror::Error;

use crate::config::MeshConfig;
use crate::grid::{midpoint_distance, Element};
pub use crate::refine::RefinementHistory;
use crate::refine::{run_policy_history, MarkPolicy, ProvenanceEvent, RefineError};
use crate::scalar::Real;

/// Errors from the complexity harness.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComplexityError {
    #[error("complexity constants require class m >= 2, got {0}")]
    ClassTooSmall(u32),
    #[error("history has no marked elements")]
    EmptyMarks,
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// The constants of the complexity estimate, derived from the dimension,
/// the largest degree `p` and the class `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityConstants<R: Real> {
    /// `c_s = 2^(m-2) (2p+1)`: support-extension diameter in units of the
    /// element side length.
    pub c_s: R,
    /// `c_d = sqrt(d) c_s`: Euclidean version of `c_s`.
    pub c_d: R,
    /// `c_tilde = 1/2 + 2 c_s / (1 - 2^(1-m))`: geometric sum of the
    /// support-extension diameters along a refinement cascade.
    pub c_tilde: R,
    /// `c = sqrt(d) c_tilde`: distance bound factor between a created
    /// element and its triggering mark.
    pub c: R,
    /// `lambda_cap = 4 (4 c_tilde + 1)^d`: the cap on the ratio of created
    /// to marked elements.
    pub lambda_cap: R,
}

impl<R: Real> ComplexityConstants<R> {
    /// `(4 c_tilde + 1)^d`, the stated per-level cap on the number of
    /// same-level cells within the lambda distance ball.
    pub fn ball_cap(&self) -> R {
        self.lambda_cap / R::from_count(4)
    }
}

/// Evaluates the closed-form constants; requires `m >= 2`.
pub fn constants<R: Real>(
    cfg: &MeshConfig,
    m: u32,
) -> Result<ComplexityConstants<R>, ComplexityError> {
    if m < 2 {
        return Err(ComplexityError::ClassTooSmall(m));
    }
    let p = cfg.max_degree() as u64;
    let sqrt_d = R::from_count(cfg.dim() as u64).sqrt();
    let c_s = R::exp2i(m as i32 - 2) * R::from_count(2 * p + 1);
    let c_d = sqrt_d * c_s;
    let half = R::one() / R::from_count(2);
    let c_tilde = half + R::from_count(2) * c_s / (R::one() - R::exp2i(1 - m as i32));
    let c = sqrt_d * c_tilde;
    let lambda_cap =
        R::from_count(4) * (R::from_count(4) * c_tilde + R::one()).powi(cfg.dim() as i32);
    Ok(ComplexityConstants {
        c_s,
        c_d,
        c_tilde,
        c,
        lambda_cap,
    })
}

/// Largest possible midpoint distance between a level-`level` element and
/// a member of its class-`m` neighborhood: `2^(-level-1) sqrt(d) w` with
/// `w = 2^(m-1)(p+1) - 1`. For `m = 2` this is exactly `2^(-level-1) c_d`;
/// for `m >= 3` it is slightly larger than `c_d` allows, because a
/// neighborhood member is the parent of a support-extension cell and its
/// midpoint can overhang the extension region by half a cell.
pub fn neighbor_distance_bound<R: Real>(cfg: &MeshConfig, m: u32, level: u32) -> R {
    let p = cfg.max_degree() as u64;
    let w = R::exp2i(m as i32 - 1) * R::from_count(p + 1) - R::one();
    let sqrt_d = R::from_count(cfg.dim() as u64).sqrt();
    R::exp2i(-(level as i32) - 1) * sqrt_d * w
}

/// The proof's weighting function between an element `q` and a marked
/// element: `2^(level(q) - level(mark))` when `level(q) <= level(mark) + 1`
/// and the midpoint distance is below `2^(1 - level(q)) c`, else zero.
pub fn lambda<R: Real>(q: &Element, marked: &Element, consts: &ComplexityConstants<R>) -> R {
    if q.level() > marked.level() + 1 {
        return R::zero();
    }
    let dist = midpoint_distance::<R>(q, marked);
    let bound = R::exp2i(1 - q.level() as i32) * consts.c;
    if dist < bound {
        R::exp2i(q.level() as i32 - marked.level() as i32)
    } else {
        R::zero()
    }
}

/// Number of level-`level` grid cells whose midpoint lies strictly within
/// distance `2^(1-level) c` of the mark's midpoint. Counted exactly by a
/// dimension-recursive sweep with per-axis pruning.
pub fn ball_count<R: Real>(
    cfg: &MeshConfig,
    marked: &Element,
    level: u32,
    consts: &ComplexityConstants<R>,
) -> u64 {
    let mu: Vec<R> = marked.midpoint();
    let r = R::exp2i(1 - level as i32) * consts.c;
    let r2 = r * r;
    let sizes = cfg.grid_size(level);
    count_rec(&mu, &sizes, level, r2, 0, R::zero())
}

fn count_rec<R: Real>(mu: &[R], sizes: &[u64], level: u32, r2: R, dim: usize, partial: R) -> u64 {
    let rem = r2 - partial;
    if rem <= R::zero() {
        return 0;
    }
    let w = rem.sqrt();
    let scale = R::exp2i(level as i32 + 1);
    let two = R::from_count(2);
    // candidate range widened by one cell on each side; the exact strict
    // test below settles the boundary
    let lo = (((mu[dim] - w) * scale - R::one()) / two)
        .floor()
        .to_i64()
        .unwrap_or(0)
        - 1;
    let hi = (((mu[dim] + w) * scale - R::one()) / two)
        .ceil()
        .to_i64()
        .unwrap_or(0)
        + 1;
    let lo = lo.max(0);
    let hi = hi.min(sizes[dim] as i64 - 1);
    if hi < lo {
        return 0;
    }
    let mut total = 0;
    for n in lo..=hi {
        let x = R::from_count(2 * n as u64 + 1) / scale;
        let d = x - mu[dim];
        let partial_next = partial + d * d;
        if dim + 1 == mu.len() {
            if partial_next < r2 {
                total += 1;
            }
        } else {
            total += count_rec(mu, sizes, level, r2, dim + 1, partial_next);
        }
    }
    total
}

/// Result of checking the lower counting inequality: for every final
/// element not present initially, the lambda sum over all marks is at
/// least one.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport<R: Real> {
    pub elements_checked: usize,
    pub min_sum: Option<R>,
    /// Elements whose lambda sum fell below one.
    pub violations: Vec<(Element, R)>,
}

impl<R: Real> LowerBoundReport<R> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the lower counting inequality on a completed history.
pub fn verify_lower_bound<R: Real>(
    history: &RefinementHistory,
    consts: &ComplexityConstants<R>,
) -> LowerBoundReport<R> {
    let marks = flattened_marks(history);
    let mut report = LowerBoundReport {
        elements_checked: 0,
        min_sum: None,
        violations: Vec::new(),
    };
    for q in history.final_new_elements() {
        let sum: R = marks
            .iter()
            .map(|(marked, _)| lambda(&q, marked, consts))
            .fold(R::zero(), |acc, v| acc + v);
        report.elements_checked += 1;
        if report.min_sum.is_none_or(|m| sum < m) {
            report.min_sum = Some(sum);
        }
        if sum < R::one() {
            report.violations.push((q, sum));
        }
    }
    report
}

/// One failure of the stated per-level ball-count cap.
#[derive(Debug, Clone, PartialEq)]
pub struct BallCountViolation {
    pub marked: Element,
    pub step: usize,
    pub level: u32,
    pub count: u64,
}

/// Result of checking the upper counting inequality: for every mark, the
/// lambda sum over the final new elements is at most `lambda_cap`, and the
/// per-level ball counts stay within `(4 c_tilde + 1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBoundReport<R: Real> {
    pub marks_checked: usize,
    pub max_sum: Option<R>,
    pub sum_violations: Vec<(Element, usize, R)>,
    pub ball_cap: R,
    pub max_ball_count: u64,
    pub ball_violations: Vec<BallCountViolation>,
}

impl<R: Real> UpperBoundReport<R> {
    pub fn sums_hold(&self) -> bool {
        self.sum_violations.is_empty()
    }

    pub fn ball_counts_hold(&self) -> bool {
        self.ball_violations.is_empty()
    }
}

/// Checks the upper counting inequality and the ball-count cap on a
/// completed history.
pub fn verify_upper_bound<R: Real>(
    history: &RefinementHistory,
    consts: &ComplexityConstants<R>,
) -> UpperBoundReport<R> {
    let new_elements = history.final_new_elements();
    let ball_cap = consts.ball_cap();
    let mut report = UpperBoundReport {
        marks_checked: 0,
        max_sum: None,
        sum_violations: Vec::new(),
        ball_cap,
        max_ball_count: 0,
        ball_violations: Vec::new(),
    };
    for (marked, step) in flattened_marks(history) {
        let sum: R = new_elements
            .iter()
            .map(|q| lambda(q, &marked, consts))
            .fold(R::zero(), |acc, v| acc + v);
        report.marks_checked += 1;
        if report.max_sum.is_none_or(|m| sum > m) {
            report.max_sum = Some(sum);
        }
        if sum > consts.lambda_cap {
            report.sum_violations.push((marked.clone(), step, sum));
        }
        for level in 1..=marked.level() + 1 {
            let count = ball_count(&history.cfg, &marked, level, consts);
            report.max_ball_count = report.max_ball_count.max(count);
            if R::from_count(count) > ball_cap {
                report.ball_violations.push(BallCountViolation {
                    marked: marked.clone(),
                    step,
                    level,
                    count,
                });
            }
        }
    }
    report
}

/// Replay of the per-creation invariants recorded in the provenance log:
/// chain level arithmetic, the created-level bound, the creation distance
/// bound and both consecutive distance bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCheck {
    pub created_checked: usize,
    pub recursive_calls_checked: usize,
    pub violations: Vec<String>,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies every chain-level and distance invariant of a history's log.
/// Distance comparisons use a relative tolerance of 1e-9.
pub fn verify_chain_invariants<R: Real>(
    history: &RefinementHistory,
    consts: &ComplexityConstants<R>,
) -> ChainCheck {
    let tol = R::one() + R::from_f64(1e-9).unwrap();
    let m = history.m;
    let mut check = ChainCheck {
        created_checked: 0,
        recursive_calls_checked: 0,
        violations: Vec::new(),
    };
    for ev in history.log.events() {
        match ev {
            ProvenanceEvent::Created {
                element,
                parent,
                marked,
                chain,
                ..
            } => {
                check.created_checked += 1;
                if chain.first() != Some(marked) || chain.last() != Some(parent) {
                    check
                        .violations
                        .push(format!("chain endpoints wrong for {element}"));
                    continue;
                }
                // chain levels drop by m-1 per link
                let base = parent.level();
                for (i, q) in chain.iter().enumerate() {
                    let links = (chain.len() - 1 - i) as u32;
                    if q.level() != base + links * (m - 1) {
                        check.violations.push(format!(
                            "chain level arithmetic broken at {q} for {element}"
                        ));
                    }
                    // created level bound relative to every call target
                    if element.level() > q.level() + 1 {
                        check.violations.push(format!(
                            "created level {} exceeds caller level {} + 1",
                            element.level(),
                            q.level()
                        ));
                    }
                }
                // creation distance bound
                let dist = midpoint_distance::<R>(element, marked);
                let bound = R::exp2i(-(element.level() as i32)) * consts.c;
                if dist > bound * tol {
                    check.violations.push(format!(
                        "creation distance {dist} exceeds {bound} for {element} from {marked}"
                    ));
                }
                // consecutive chain distances
                for pair in chain.windows(2) {
                    let d = midpoint_distance::<R>(&pair[0], &pair[1]);
                    let b = R::exp2i(-(pair[0].level() as i32)) * consts.c;
                    if d > b * tol {
                        check.violations.push(format!(
                            "chain distance {d} exceeds {b} between {} and {}",
                            pair[0], pair[1]
                        ));
                    }
                }
            }
            ProvenanceEvent::RecursiveCall { caller, callee } => {
                check.recursive_calls_checked += 1;
                let d = midpoint_distance::<R>(caller, callee);
                let b = neighbor_distance_bound::<R>(&history.cfg, m, caller.level());
                if d > b * tol {
                    check.violations.push(format!(
                        "neighbor distance {d} exceeds {b} between {caller} and {callee}"
                    ));
                }
            }
            ProvenanceEvent::Marked { .. } => {}
        }
    }
    check
}

/// `(#final - #initial) / total marks` for a completed history.
pub fn complexity_ratio<R: Real>(history: &RefinementHistory) -> Result<R, ComplexityError> {
    let marked = history.total_marked();
    if marked == 0 {
        return Err(ComplexityError::EmptyMarks);
    }
    let created =
        history.final_mesh.element_count() as i64 - history.initial.element_count() as i64;
    Ok(R::from_int(created) / R::from_count(marked as u64))
}

fn flattened_marks(history: &RefinementHistory) -> Vec<(Element, usize)> {
    let mut out = Vec::with_capacity(history.total_marked());
    for (step, marks) in history.marks_per_step.iter().enumerate() {
        for e in marks {
            out.push((e.clone(), step));
        }
    }
    out
}

/// Summary of a single experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub policy: String,
    pub steps: usize,
    pub total_marked: usize,
    pub new_elements: usize,
    pub ratio: f64,
    pub lambda_cap: f64,
    pub max_lb_deficit: f64,
    pub max_ub_sum: f64,
    pub wall_time_ms: u64,
}

/// Runs every (policy, seed) combination for `steps` steps and verifies
/// the counting inequalities on each history. Records are ordered by
/// policy, then seed.
pub fn run_experiment(
    cfg: &MeshConfig,
    m: u32,
    policies: &[MarkPolicy],
    steps: usize,
    seeds: &[u64],
) -> Result<Vec<RunRecord>, ComplexityError> {
    let consts = constants::<f64>(cfg, m)?;
    let mut records = Vec::new();
    for policy in policies {
        for &seed in seeds {
            let start = Instant::now();
            let history = run_policy_history(cfg.clone(), m, *policy, steps, seed, None)?;
            let ratio = complexity_ratio::<f64>(&history).unwrap_or(0.0);
            let lb = verify_lower_bound(&history, &consts);
            let ub = verify_upper_bound(&history, &consts);
            let max_lb_deficit = lb.min_sum.map(|s| (1.0 - s).max(0.0)).unwrap_or(0.0);
            records.push(RunRecord {
                seed,
                policy: policy.name().to_string(),
                steps: history.marks_per_step.len(),
                total_marked: history.total_marked(),
                new_elements: history.new_elements(),
                ratio,
                lambda_cap: consts.lambda_cap,
                max_lb_deficit,
                max_ub_sum: ub.max_sum.unwrap_or(0.0),
                wall_time_ms: start.elapsed().as_millis() as u64,
            });
        }
    }
    Ok(records)
}
