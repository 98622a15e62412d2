//! Contour tracking and strain estimation for cyclic label-mask
//! sequences.
//!
//! The pipeline: label masks are reduced to per-frame boundary-candidate
//! point sets ([`boundary`]); one closed quadratic spline per frame is
//! registered to those candidates by a joint all-frames sparse
//! Levenberg-Marquardt optimization with multiresolution subdivision
//! passes ([`tracker`]); circumferential strain comes from the arc
//! lengths of the registered splines ([`strain`]). Synthetic annulus
//! phantoms with analytically known deformation ([`synth`]) provide
//! ground truth for verification.

pub mod boundary;
pub mod curve_model;
pub mod error;
pub mod geom;
pub mod pgm;
pub mod strain;
pub mod synth;
pub mod tracker;

pub use boundary::{
    build_candidate_set, candidate_sets_for_structure, extract_boundary_candidates,
    load_mask_sequence, BoundaryCandidateSet, LabelMask, LabelMaskSequence, Structure,
};
pub use curve_model::{
    bernstein, binomial, fit_circle_template, BezierSegment, ClosedQuadSpline, CurveSample,
};
pub use error::{Error, Result};
pub use geom::Point2;
pub use strain::{circumferential_strain, strain_to_csv, StrainCurve};
pub use synth::{generate_annulus_phantom, write_phantom, PhantomConfig, PhantomTruth};
pub use tracker::{
    assemble, jacobian_check, lm_step, solve_pass, track_sequence, CurvesFile, ResidualSystem,
    SplineSequence, TrackReport, TrackerConfig,
};
