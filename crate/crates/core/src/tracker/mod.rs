//! Joint registration of closed splines to per-frame boundary candidates.
//!
//! One spline per frame, identical control-point count, optimized over
//! all frames simultaneously by Levenberg-Marquardt on the stacked
//! residual system
//!
//! * closest-feature rows: curve samples minus their nearest boundary
//!   candidate (correspondences frozen during each inner solve),
//! * acceleration rows: cyclic second differences of each control point
//!   across frames,
//! * curvature rows: second derivative of each Bezier segment, which
//!   under midpoint extraction is the second difference of the control
//!   polygon.
//!
//! Every residual touches at most three control points, so the normal
//! equations stay sparse; an ICP-style outer loop refreshes nearest
//! neighbors between inner solves, and finished passes are Chaikin
//! subdivided to seed the next resolution level.

mod sparse;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCandidateSet;
use crate::curve_model::{fit_circle_template, BezierSegment, ClosedQuadSpline};
use crate::error::{Error, Result};
use crate::geom::Point2;

pub use sparse::{LdlFactor, SparseSym};

/// Tunables for the multipass optimization.
#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub rho_cf: f64,
    pub rho_ac: f64,
    pub rho_cv: f64,
    pub samples_per_segment: usize,
    pub passes: usize,
    pub initial_control_points: usize,
    pub outer_iterations_per_pass: usize,
    pub outer_tolerance_px: f64,
    pub lm_max_iterations: usize,
    pub lm_lambda_init: f64,
    pub lm_lambda_up: f64,
    pub lm_lambda_down: f64,
    pub lm_relative_cost_tol: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            rho_cf: 10.0,
            rho_ac: 1.0,
            rho_cv: 0.1,
            samples_per_segment: 8,
            passes: 3,
            initial_control_points: 8,
            outer_iterations_per_pass: 10,
            outer_tolerance_px: 0.05,
            lm_max_iterations: 50,
            lm_lambda_init: 1e-3,
            lm_lambda_up: 10.0,
            lm_lambda_down: 0.1,
            lm_relative_cost_tol: 1e-6,
        }
    }
}

impl TrackerConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_cf", self.rho_cf),
            ("rho_ac", self.rho_ac),
            ("rho_cv", self.rho_cv),
            ("outer_tolerance_px", self.outer_tolerance_px),
            ("lm_lambda_init", self.lm_lambda_init),
            ("lm_lambda_up", self.lm_lambda_up),
            ("lm_lambda_down", self.lm_lambda_down),
            ("lm_relative_cost_tol", self.lm_relative_cost_tol),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples_per_segment == 0
            || self.passes == 0
            || self.initial_control_points < 3
            || self.outer_iterations_per_pass == 0
            || self.lm_max_iterations == 0
        {
            return Err(Error::domain(
                "iteration counts must be positive (and at least 3 initial control points)"
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// One spline per frame with a shared control-point count; control point
/// `j` refers to the same material point in every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSequence {
    frames: Vec<ClosedQuadSpline>,
}

impl SplineSequence {
    pub fn new(frames: Vec<ClosedQuadSpline>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::domain(
                "spline sequence needs at least 1 frame".to_string(),
            ));
        }
        let n = frames[0].n_control_points();
        if frames.iter().any(|f| f.n_control_points() != n) {
            return Err(Error::domain(
                "all frames must share the control-point count".to_string(),
            ));
        }
        Ok(SplineSequence { frames })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_control_points(&self) -> usize {
        self.frames[0].n_control_points()
    }

    pub fn frame(&self, t: usize) -> &ClosedQuadSpline {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[ClosedQuadSpline] {
        &self.frames
    }

    /// Number of scalar parameters, 2 N F.
    pub fn n_params(&self) -> usize {
        2 * self.n_frames() * self.n_control_points()
    }

    /// Flattened state: parameter `2 (t N + j) + c` is coordinate `c`
    /// (0 = x, 1 = y) of control point `j` in frame `t`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for frame in &self.frames {
            for p in frame.control_points() {
                out.push(p.x);
                out.push(p.y);
            }
        }
        out
    }

    pub fn from_flat(n_frames: usize, n_control_points: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != 2 * n_frames * n_control_points {
            return Err(Error::domain(format!(
                "flat state has {} values, expected {}",
                flat.len(),
                2 * n_frames * n_control_points
            )));
        }
        let frames = (0..n_frames)
            .map(|t| {
                let pts = (0..n_control_points)
                    .map(|j| {
                        let base = 2 * (t * n_control_points + j);
                        Point2::new(flat[base], flat[base + 1])
                    })
                    .collect();
                ClosedQuadSpline::new(pts)
            })
            .collect::<Result<_>>()?;
        SplineSequence::new(frames)
    }

    /// Returns the state displaced by `delta` (same layout as `to_flat`).
    pub fn displaced(&self, delta: &[f64]) -> Result<Self> {
        let mut flat = self.to_flat();
        if delta.len() != flat.len() {
            return Err(Error::domain(format!(
                "displacement has {} values, expected {}",
                delta.len(),
                flat.len()
            )));
        }
        for (x, d) in flat.iter_mut().zip(delta) {
            *x += d;
        }
        SplineSequence::from_flat(self.n_frames(), self.n_control_points(), &flat)
    }

    fn map_points(&self, f: impl Fn(Point2) -> Point2) -> SplineSequence {
        let frames = self
            .frames
            .iter()
            .map(|s| {
                ClosedQuadSpline::new(s.control_points().iter().map(|&p| f(p)).collect())
                    .expect("mapped spline keeps its control-point count")
            })
            .collect();
        SplineSequence { frames }
    }

    fn subdivide_all(&self) -> SplineSequence {
        SplineSequence {
            frames: self.frames.iter().map(|s| s.subdivide()).collect(),
        }
    }

    fn sample_positions(&self, samples_per_segment: usize) -> Vec<Point2> {
        self.frames
            .iter()
            .flat_map(|s| {
                s.sample(samples_per_segment)
                    .into_iter()
                    .map(|c| c.position)
            })
            .collect()
    }
}

/// One Jacobian entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Unweighted per-family costs (each family's sum of squares divided by
/// its scaling factor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermCosts {
    pub e_cf: f64,
    pub e_ac: f64,
    pub e_cv: f64,
}

impl TermCosts {
    pub fn weighted_total(&self, cfg: &TrackerConfig) -> f64 {
        cfg.rho_cf * self.e_cf + cfg.rho_ac * self.e_ac + cfg.rho_cv * self.e_cv
    }
}

/// Stacked residual vector and sparse Jacobian for one state.
///
/// Row layout: all closest-feature rows (frame-major, then patch, then
/// sample, then x/y), followed by acceleration rows (frame, control
/// point, x/y), followed by curvature rows (frame, patch, x/y). Rows are
/// scaled by the square roots of the corresponding scaling factors, so
/// the squared norm of `residuals` is the weighted total cost.
#[derive(Debug, Clone)]
pub struct ResidualSystem {
    pub residuals: Vec<f64>,
    pub jacobian: Vec<Triplet>,
    pub n_params: usize,
    pub term_costs: TermCosts,
}

impl ResidualSystem {
    pub fn n_residuals(&self) -> usize {
        self.residuals.len()
    }

    pub fn weighted_cost(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Frozen nearest-candidate targets: `phis[t][s]` is the match for the
/// `s`-th sample of frame `t` in the order produced by
/// `ClosedQuadSpline::sample`.
pub type Correspondences = Vec<Vec<Point2>>;

/// Looks up the nearest boundary candidate for every curve sample.
pub fn correspondences(
    state: &SplineSequence,
    candidates: &[BoundaryCandidateSet],
    samples_per_segment: usize,
) -> Result<Correspondences> {
    check_candidates(state.n_frames(), candidates)?;
    Ok(state
        .frames
        .iter()
        .zip(candidates)
        .map(|(spline, set)| {
            spline
                .sample(samples_per_segment)
                .into_iter()
                .map(|s| set.nearest(s.position))
                .collect()
        })
        .collect())
}

fn check_candidates(n_frames: usize, candidates: &[BoundaryCandidateSet]) -> Result<()> {
    if candidates.len() != n_frames {
        return Err(Error::domain(format!(
            "{} candidate sets for {} frames",
            candidates.len(),
            n_frames
        )));
    }
    for (t, set) in candidates.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::domain(format!("empty candidate set for frame {t}")));
        }
    }
    Ok(())
}

/// Assembles the residual system with freshly computed correspondences.
pub fn assemble(
    state: &SplineSequence,
    candidates: &[BoundaryCandidateSet],
    cfg: &TrackerConfig,
) -> Result<ResidualSystem> {
    let phis = correspondences(state, candidates, cfg.samples_per_segment)?;
    Ok(assemble_with_correspondences(state, &phis, cfg))
}

/// Assembles the residual system against frozen correspondences. With
/// `phis` fixed, every residual is linear in the control points and the
/// Jacobian is exact.
pub fn assemble_with_correspondences(
    state: &SplineSequence,
    phis: &Correspondences,
    cfg: &TrackerConfig,
) -> ResidualSystem {
    let f = state.n_frames();
    let n = state.n_control_points();
    let s = cfg.samples_per_segment;
    let n_params = 2 * f * n;
    let m = 2 * f * n * s + 2 * f * n + 2 * f * n;

    let mut residuals = Vec::with_capacity(m);
    let mut jacobian = Vec::with_capacity(m * 3);
    let mut costs = TermCosts {
        e_cf: 0.0,
        e_ac: 0.0,
        e_cv: 0.0,
    };

    let col = |t: usize, j: usize, c: usize| 2 * (t * n + j) + c;
    let sqrt_cf = cfg.rho_cf.sqrt();
    let sqrt_ac = cfg.rho_ac.sqrt();
    let sqrt_cv = cfg.rho_cv.sqrt();

    // Closest-feature rows. The sample position is a fixed convex
    // combination of three control points, so each row has three entries.
    for (t, spline) in state.frames.iter().enumerate() {
        let samples = spline.sample(s);
        debug_assert_eq!(samples.len(), phis[t].len());
        for (sample, &phi) in samples.iter().zip(&phis[t]) {
            let p = sample.patch;
            let w = BezierSegment::control_weights(sample.param);
            let cols = [(p + n - 1) % n, p, (p + 1) % n];
            let diff = sample.position - phi;
            costs.e_cf += diff.norm_squared();
            for c in 0..2 {
                let row = residuals.len();
                residuals.push(sqrt_cf * pick(diff, c));
                for (weight, &cp) in w.iter().zip(&cols) {
                    jacobian.push(Triplet {
                        row,
                        col: col(t, cp, c),
                        value: sqrt_cf * weight,
                    });
                }
            }
        }
    }

    // Acceleration rows: cyclic second difference over frames. For F = 2
    // the stencil wraps onto itself, so coefficients are merged by column.
    for t in 0..f {
        for j in 0..n {
            let a = state.frames[(t + 2) % f].control_points()[j];
            let b = state.frames[(t + 1) % f].control_points()[j];
            let c0 = state.frames[t].control_points()[j];
            let diff = a - b * 2.0 + c0;
            costs.e_ac += diff.norm_squared();
            for c in 0..2 {
                let row = residuals.len();
                residuals.push(sqrt_ac * pick(diff, c));
                let merged = merge_stencil(&[
                    (col((t + 2) % f, j, c), 1.0),
                    (col((t + 1) % f, j, c), -2.0),
                    (col(t, j, c), 1.0),
                ]);
                for (column, value) in merged {
                    jacobian.push(Triplet {
                        row,
                        col: column,
                        value: sqrt_ac * value,
                    });
                }
            }
        }
    }

    // Curvature rows: the segment's second derivative, which equals the
    // second difference of the control polygon under midpoint extraction.
    for (t, spline) in state.frames.iter().enumerate() {
        let pts = spline.control_points();
        for p in 0..n {
            let diff = pts[(p + n - 1) % n] - pts[p] * 2.0 + pts[(p + 1) % n];
            costs.e_cv += diff.norm_squared();
            for c in 0..2 {
                let row = residuals.len();
                residuals.push(sqrt_cv * pick(diff, c));
                for (cp, value) in [((p + n - 1) % n, 1.0), (p, -2.0), ((p + 1) % n, 1.0)] {
                    jacobian.push(Triplet {
                        row,
                        col: col(t, cp, c),
                        value: sqrt_cv * value,
                    });
                }
            }
        }
    }

    debug_assert_eq!(residuals.len(), m);
    ResidualSystem {
        residuals,
        jacobian,
        n_params,
        term_costs: costs,
    }
}

#[inline]
fn pick(p: Point2, c: usize) -> f64 {
    if c == 0 {
        p.x
    } else {
        p.y
    }
}

fn merge_stencil(entries: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for &(col, v) in entries {
        if let Some(existing) = out.iter_mut().find(|(c, _)| *c == col) {
            existing.1 += v;
        } else {
            out.push((col, v));
        }
    }
    out
}

/// Damped normal equations for a fixed Jacobian.
pub struct NormalEquations {
    jtj: SparseSym,
    damping: Vec<f64>,
    jacobian: Vec<Triplet>,
    n_params: usize,
}

impl NormalEquations {
    pub fn new(jacobian: Vec<Triplet>, n_params: usize) -> NormalEquations {
        // Group entries by row, then accumulate the upper triangle of
        // J^T J from per-row outer products.
        let mut by_row = jacobian.clone();
        by_row.sort_unstable_by_key(|t| (t.row, t.col));
        let mut upper: Vec<(usize, usize, f64)> = Vec::new();
        let mut start = 0;
        while start < by_row.len() {
            let mut end = start + 1;
            while end < by_row.len() && by_row[end].row == by_row[start].row {
                end += 1;
            }
            let row = &by_row[start..end];
            for a in row {
                for b in row {
                    if a.col <= b.col {
                        upper.push((a.col, b.col, a.value * b.value));
                    }
                }
            }
            start = end;
        }
        let jtj = SparseSym::from_upper_triplets(n_params, &upper);
        // Zero diagonal entries are clamped before damping so untouched
        // parameters still receive a positive pivot.
        let damping = jtj
            .diagonal()
            .into_iter()
            .map(|d| if d == 0.0 { 1e-12 } else { d })
            .collect();
        NormalEquations {
            jtj,
            damping,
            jacobian,
            n_params,
        }
    }

    /// -J^T r for the current residual vector.
    pub fn neg_gradient(&self, residuals: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params];
        for t in &self.jacobian {
            g[t.col] -= t.value * residuals[t.row];
        }
        g
    }

    /// Solves `(J^T J + lambda diag(J^T J)) delta = -J^T r`. `None` means
    /// the damped matrix was not positive definite; callers respond by
    /// increasing lambda.
    pub fn solve_damped(&self, lambda: f64, residuals: &[f64]) -> Option<Vec<f64>> {
        let shift: Vec<f64> = self.damping.iter().map(|d| lambda * d).collect();
        let factor = self.jtj.with_shifted_diagonal(&shift).ldl()?;
        let delta = factor.solve(&self.neg_gradient(residuals));
        if delta.iter().all(|v| v.is_finite()) {
            Some(delta)
        } else {
            None
        }
    }
}

/// Signals that the damped solve failed and the step should be retried
/// with a larger lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveFailure;

/// One Levenberg-Marquardt displacement proposal for an assembled system.
pub fn lm_step(
    system: &ResidualSystem,
    lambda: f64,
) -> std::result::Result<Vec<f64>, SolveFailure> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(SolveFailure);
    }
    NormalEquations::new(system.jacobian.clone(), system.n_params)
        .solve_damped(lambda, &system.residuals)
        .ok_or(SolveFailure)
}

/// Outcome of one optimization pass at a fixed resolution.
#[derive(Debug, Clone)]
pub struct PassReport {
    pub n_control_points: usize,
    pub outer_iters: usize,
    pub outer_converged: bool,
    /// Weighted total cost after every accepted inner step, in order.
    pub accepted_costs: Vec<f64>,
    /// Final unweighted term costs with refreshed correspondences.
    pub term_costs: TermCosts,
}

/// Outcome of a full multipass run.
#[derive(Debug, Clone)]
pub struct TrackReport {
    pub passes: Vec<PassReport>,
    pub converged: bool,
}

/// Runs the ICP outer loop at one resolution: refresh correspondences,
/// then a damped least-squares descent against the frozen targets;
/// repeat until mean sample movement falls below the tolerance.
pub fn solve_pass(
    state: SplineSequence,
    candidates: &[BoundaryCandidateSet],
    cfg: &TrackerConfig,
) -> Result<(SplineSequence, PassReport)> {
    cfg.validate()?;
    check_candidates(state.n_frames(), candidates)?;
    let mut state = state;
    let mut accepted_costs = Vec::new();
    let mut outer_iters = 0;
    let mut outer_converged = false;

    for _ in 0..cfg.outer_iterations_per_pass {
        outer_iters += 1;
        let before = state.sample_positions(cfg.samples_per_segment);
        let phis = correspondences(&state, candidates, cfg.samples_per_segment)?;
        state = inner_lm(state, &phis, cfg, &mut accepted_costs);
        let after = state.sample_positions(cfg.samples_per_segment);
        let mean_move = before
            .iter()
            .zip(&after)
            .map(|(a, b)| a.distance(*b))
            .sum::<f64>()
            / before.len() as f64;
        if mean_move < cfg.outer_tolerance_px {
            outer_converged = true;
            break;
        }
    }

    let term_costs = assemble(&state, candidates, cfg)?.term_costs;
    let report = PassReport {
        n_control_points: state.n_control_points(),
        outer_iters,
        outer_converged,
        accepted_costs,
        term_costs,
    };
    Ok((state, report))
}

/// Levenberg-Marquardt descent with frozen correspondences. Residuals are
/// linear here, so the Jacobian (and J^T J) is constant; only the damping
/// and the gradient change between iterations.
fn inner_lm(
    state: SplineSequence,
    phis: &Correspondences,
    cfg: &TrackerConfig,
    accepted_costs: &mut Vec<f64>,
) -> SplineSequence {
    let mut state = state;
    let system = assemble_with_correspondences(&state, phis, cfg);
    let normal = NormalEquations::new(system.jacobian.clone(), system.n_params);
    let mut residuals = system.residuals;
    let mut cost: f64 = residuals.iter().map(|r| r * r).sum();
    let mut lambda = cfg.lm_lambda_init;

    for _ in 0..cfg.lm_max_iterations {
        if lambda > 1e15 || cost == 0.0 {
            break;
        }
        let Some(delta) = normal.solve_damped(lambda, &residuals) else {
            lambda *= cfg.lm_lambda_up;
            continue;
        };
        let Ok(proposal) = state.displaced(&delta) else {
            lambda *= cfg.lm_lambda_up;
            continue;
        };
        let next = assemble_with_correspondences(&proposal, phis, cfg);
        let next_cost = next.weighted_cost();
        if next_cost < cost {
            let rel_drop = (cost - next_cost) / cost;
            state = proposal;
            residuals = next.residuals;
            cost = next_cost;
            accepted_costs.push(cost);
            lambda *= cfg.lm_lambda_down;
            if rel_drop < cfg.lm_relative_cost_tol {
                break;
            }
        } else {
            lambda *= cfg.lm_lambda_up;
        }
    }
    state
}

/// Full pipeline for one structure: circle-template initialization, then
/// `cfg.passes` optimization passes with Chaikin subdivision in between.
///
/// Internally the frames are rotated into a content-defined canonical
/// order and all coordinates are shifted by an integer anchor near the
/// candidate centroid. Both transforms are undone on output; they make
/// tracking exactly equivariant under cyclic frame relabeling and under
/// integer translations of the input.
pub fn track_sequence(
    candidates: &[BoundaryCandidateSet],
    cfg: &TrackerConfig,
) -> Result<(SplineSequence, TrackReport)> {
    cfg.validate()?;
    if candidates.len() < 2 {
        return Err(Error::domain(format!(
            "tracking needs at least 2 frames, got {}",
            candidates.len()
        )));
    }
    check_candidates(candidates.len(), candidates)?;
    let f = candidates.len();

    let rotation = canonical_rotation(candidates);
    let anchor = integer_anchor(candidates[rotation].points());
    let local: Vec<BoundaryCandidateSet> = (0..f)
        .map(|i| {
            let src = &candidates[(i + rotation) % f];
            let points = src.points().iter().map(|&p| p - anchor).collect();
            crate::boundary::build_candidate_set(points, i)
                .expect("nonempty candidate set stays nonempty")
        })
        .collect();

    let template = fit_circle_template(local[0].points(), cfg.initial_control_points)?;
    let mut state = SplineSequence {
        frames: vec![template; f],
    };

    let mut passes = Vec::with_capacity(cfg.passes);
    for pass in 0..cfg.passes {
        let (next, report) = solve_pass(state, &local, cfg)?;
        state = next;
        passes.push(report);
        if pass + 1 < cfg.passes {
            state = state.subdivide_all();
        }
    }

    // Undo the canonical transforms.
    let state = state.map_points(|p| p + anchor);
    let frames = (0..f)
        .map(|t| state.frames[(t + f - rotation) % f].clone())
        .collect();
    let state = SplineSequence { frames };

    let converged = passes.iter().all(|p| p.outer_converged);
    Ok((state, TrackReport { passes, converged }))
}

/// Rotation that makes the frame tuple lexicographically minimal, so the
/// result depends on content, not on which frame the acquisition starts
/// at. Ties resolve to the smallest rotation.
fn canonical_rotation(candidates: &[BoundaryCandidateSet]) -> usize {
    let f = candidates.len();
    let mut best = 0;
    for k in 1..f {
        if rotation_less(candidates, k, best) {
            best = k;
        }
    }
    best
}

fn rotation_less(candidates: &[BoundaryCandidateSet], a: usize, b: usize) -> bool {
    use std::cmp::Ordering;
    let f = candidates.len();
    for i in 0..f {
        let pa = candidates[(i + a) % f].points();
        let pb = candidates[(i + b) % f].points();
        for (qa, qb) in pa.iter().zip(pb) {
            match (qa.y, qa.x).partial_cmp(&(qb.y, qb.x)).unwrap() {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
        match pa.len().cmp(&pb.len()) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

/// Integer offset near the centroid. Subtracting it keeps half-integer
/// pixel centers exactly representable, so integer translations of the
/// input leave the local computation bit-identical.
fn integer_anchor(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let mut c = Point2::ZERO;
    for p in points {
        c += *p;
    }
    Point2::new((c.x / n).round(), (c.y / n).round())
}

/// Compares the analytic Jacobian against central finite differences
/// (h = 1e-6 px) at a seeded random perturbation of the state, holding
/// correspondences fixed. Returns the maximum relative error with
/// denominator `max(1, |analytic|)`.
pub fn jacobian_check(
    state: &SplineSequence,
    candidates: &[BoundaryCandidateSet],
    cfg: &TrackerConfig,
    seed: u64,
) -> Result<f64> {
    jacobian_check_impl(state, candidates, cfg, seed, false)
}

/// Negative control for `check`: corrupts one analytic entry before the
/// comparison, so a healthy finite-difference harness must report a
/// large error.
#[doc(hidden)]
pub fn jacobian_check_with_fault(
    state: &SplineSequence,
    candidates: &[BoundaryCandidateSet],
    cfg: &TrackerConfig,
    seed: u64,
) -> Result<f64> {
    jacobian_check_impl(state, candidates, cfg, seed, true)
}

fn jacobian_check_impl(
    state: &SplineSequence,
    candidates: &[BoundaryCandidateSet],
    cfg: &TrackerConfig,
    seed: u64,
    inject_fault: bool,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut flat = state.to_flat();
    for v in flat.iter_mut() {
        *v += rng.gen_range(-0.5..0.5);
    }
    let perturbed = SplineSequence::from_flat(state.n_frames(), state.n_control_points(), &flat)?;
    let phis = correspondences(&perturbed, candidates, cfg.samples_per_segment)?;
    let system = assemble_with_correspondences(&perturbed, &phis, cfg);

    let n = system.n_params;
    let m = system.n_residuals();
    let mut analytic = vec![0.0; m * n];
    for t in &system.jacobian {
        analytic[t.row * n + t.col] += t.value;
    }
    if inject_fault {
        analytic[0] += 1e-3;
    }

    let h = 1e-6;
    let mut max_err = 0.0f64;
    for k in 0..n {
        let mut plus = flat.clone();
        plus[k] += h;
        let mut minus = flat.clone();
        minus[k] -= h;
        let rp = assemble_with_correspondences(
            &SplineSequence::from_flat(state.n_frames(), state.n_control_points(), &plus)?,
            &phis,
            cfg,
        )
        .residuals;
        let rm = assemble_with_correspondences(
            &SplineSequence::from_flat(state.n_frames(), state.n_control_points(), &minus)?,
            &phis,
            cfg,
        )
        .residuals;
        for row in 0..m {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            let an = analytic[row * n + k];
            let err = (fd - an).abs() / an.abs().max(1.0);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

// --- curves.json -----------------------------------------------------

/// Serialized tracking output; see the `track` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvesFile {
    pub structure: String,
    pub n_frames: usize,
    pub n_control_points: usize,
    pub pixel_spacing_mm: [f64; 2],
    /// Control points per frame, `[x, y]` in pixel units,
    /// counterclockwise, frame 0 first.
    pub frames: Vec<Vec<[f64; 2]>>,
    pub convergence: ConvergenceSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub passes: Vec<PassSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassSummary {
    pub outer_iters: usize,
    #[serde(rename = "E_cf")]
    pub e_cf: f64,
    #[serde(rename = "E_ac")]
    pub e_ac: f64,
    #[serde(rename = "E_cv")]
    pub e_cv: f64,
}

impl CurvesFile {
    pub fn from_tracking(
        structure: crate::boundary::Structure,
        pixel_spacing_mm: (f64, f64),
        state: &SplineSequence,
        report: &TrackReport,
    ) -> CurvesFile {
        CurvesFile {
            structure: structure.to_string(),
            n_frames: state.n_frames(),
            n_control_points: state.n_control_points(),
            pixel_spacing_mm: [pixel_spacing_mm.0, pixel_spacing_mm.1],
            frames: state
                .frames
                .iter()
                .map(|s| s.control_points().iter().map(|p| [p.x, p.y]).collect())
                .collect(),
            convergence: ConvergenceSummary {
                passes: report
                    .passes
                    .iter()
                    .map(|p| PassSummary {
                        outer_iters: p.outer_iters,
                        e_cf: p.term_costs.e_cf,
                        e_ac: p.term_costs.e_ac,
                        e_cv: p.term_costs.e_cv,
                    })
                    .collect(),
            },
        }
    }

    /// Rebuilds the spline sequence, enforcing counterclockwise winding.
    pub fn to_spline_sequence(&self) -> Result<SplineSequence> {
        if self.frames.len() != self.n_frames {
            return Err(Error::format(format!(
                "curves file declares {} frames but contains {}",
                self.n_frames,
                self.frames.len()
            )));
        }
        let frames = self
            .frames
            .iter()
            .map(|pts| {
                if pts.len() != self.n_control_points {
                    return Err(Error::format(format!(
                        "curves file declares {} control points but a frame has {}",
                        self.n_control_points,
                        pts.len()
                    )));
                }
                let mut spline =
                    ClosedQuadSpline::new(pts.iter().map(|&[x, y]| Point2::new(x, y)).collect())?;
                spline.normalize_winding();
                Ok(spline)
            })
            .collect::<Result<_>>()?;
        SplineSequence::new(frames)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("curves serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<CurvesFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }
}
