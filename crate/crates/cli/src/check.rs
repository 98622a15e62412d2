//! The `check` subcommand: numerical self-tests on seeded random
//! instances.
//!
//! Verifies (a) analytic Jacobians against central finite differences
//! on a well-scaled spline/candidate instance, and (b) Kd-tree nearest
//! neighbors against a linear scan with the exact tie-break. Exit 0 only
//! if the Jacobian error stays below 1e-6 and the oracle matches exactly.

use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cinetrack_core::boundary::{build_candidate_set, nearest_linear, BoundaryCandidateSet, KdTree};
use cinetrack_core::tracker::{jacobian_check, jacobian_check_with_fault, TrackerConfig};
use cinetrack_core::{ClosedQuadSpline, Point2, Result, SplineSequence};

const JACOBIAN_THRESHOLD: f64 = 1e-6;
const JACOBIAN_SEEDS: u64 = 5;
const KD_INSTANCES: u64 = 10;
const KD_POINTS: usize = 1000;
const KD_QUERIES: usize = 1000;

pub fn run(seed: u64, corrupt_jacobian: bool) -> Result<ExitCode> {
    let mut worst = 0.0f64;
    for s in seed..seed + JACOBIAN_SEEDS {
        let (state, candidates, cfg) = jacobian_instance(s);
        let err = if corrupt_jacobian {
            jacobian_check_with_fault(&state, &candidates, &cfg, s)?
        } else {
            jacobian_check(&state, &candidates, &cfg, s)?
        };
        println!("jacobian seed {s}: max relative error {err:.3e}");
        worst = worst.max(err);
    }
    println!("jacobian worst: {worst:.3e} (threshold {JACOBIAN_THRESHOLD:.0e})");

    let mut mismatches = 0usize;
    for i in 0..KD_INSTANCES {
        mismatches += kd_oracle_mismatches(seed.wrapping_mul(1000).wrapping_add(i));
    }
    println!(
        "kd-tree vs linear scan: {mismatches} mismatches over {} instances of {KD_POINTS} points x {KD_QUERIES} queries",
        KD_INSTANCES
    );

    let pass = worst < JACOBIAN_THRESHOLD && mismatches == 0;
    println!("check: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Unit-scale spline/candidate instance. Small coordinates keep the
/// finite-difference noise floor (which grows with coordinate magnitude
/// over the step size) well below the threshold.
fn jacobian_instance(seed: u64) -> (SplineSequence, Vec<BoundaryCandidateSet>, TrackerConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let n_frames = 4;
    let n_cp = 6;
    let radius = 1.5;
    let candidates = (0..n_frames)
        .map(|t| {
            let points = (0..60)
                .map(|k| {
                    let theta =
                        2.0 * std::f64::consts::PI * (k as f64 + 0.13) / 60.0 + 0.01 * t as f64;
                    let r: f64 = radius + rng.gen_range(-0.1..0.1);
                    Point2::new(r * theta.cos(), r * theta.sin())
                })
                .collect();
            build_candidate_set(points, t).unwrap()
        })
        .collect();
    let spline = ClosedQuadSpline::new(
        (0..n_cp)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n_cp as f64;
                Point2::new(radius * theta.cos(), radius * theta.sin())
            })
            .collect(),
    )
    .unwrap();
    let state = SplineSequence::new(vec![spline; n_frames]).unwrap();
    let cfg = TrackerConfig {
        samples_per_segment: 4,
        ..TrackerConfig::default()
    };
    (state, candidates, cfg)
}

fn kd_oracle_mismatches(seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Half-integer grid points force plenty of exact distance ties, which
    // exercises the deterministic (row, col) tie-break.
    let points: Vec<Point2> = (0..KD_POINTS)
        .map(|_| {
            Point2::new(
                rng.gen_range(0..256) as f64 + 0.5,
                rng.gen_range(0..256) as f64 + 0.5,
            )
        })
        .collect();
    let tree = KdTree::build(&points);
    let mut mismatches = 0;
    for _ in 0..KD_QUERIES {
        let q = if rng.gen::<bool>() {
            Point2::new(
                rng.gen_range(0..256) as f64 + 0.5,
                rng.gen_range(0..256) as f64 + 0.5,
            )
        } else {
            Point2::new(rng.gen_range(-8.0..264.0), rng.gen_range(-8.0..264.0))
        };
        if tree.nearest(q) != nearest_linear(&points, q) {
            mismatches += 1;
        }
    }
    mismatches
}
