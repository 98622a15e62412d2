//! Circumferential strain from a registered spline sequence.
//!
//! Lagrangian global strain from total contour arc length:
//! `values[t] = 100 (L(t) - L(ref)) / L(ref)`, negative during
//! contraction. Peak is the most negative value (peak systolic
//! shortening), with the lowest frame index on ties.

use crate::boundary::Structure;
use crate::error::{Error, Result};
use crate::tracker::SplineSequence;

/// Samples per segment used for the arc-length polylines.
pub const ARC_LENGTH_POINTS_PER_SEGMENT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct StrainCurve {
    pub structure: Structure,
    pub reference_frame: usize,
    /// Percent strain per frame; `values[reference_frame]` is exactly 0.
    pub values: Vec<f64>,
    /// Most negative value.
    pub peak: f64,
    pub peak_frame: usize,
}

pub fn circumferential_strain(
    seq: &SplineSequence,
    reference_frame: usize,
    structure: Structure,
) -> Result<StrainCurve> {
    let f = seq.n_frames();
    if reference_frame >= f {
        return Err(Error::domain(format!(
            "reference frame {reference_frame} out of range for {f} frames"
        )));
    }
    let lengths: Vec<f64> = (0..f)
        .map(|t| seq.frame(t).arc_length(ARC_LENGTH_POINTS_PER_SEGMENT))
        .collect();
    let reference = lengths[reference_frame];
    if reference <= 0.0 {
        return Err(Error::domain(format!(
            "reference frame {reference_frame} has zero arc length"
        )));
    }
    let values: Vec<f64> = lengths
        .iter()
        .map(|l| 100.0 * (l - reference) / reference)
        .collect();
    let (peak_frame, &peak) = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .expect("at least one frame");
    Ok(StrainCurve {
        structure,
        reference_frame,
        values,
        peak,
        peak_frame,
    })
}

/// CSV rendering: header, one row per frame at 6 decimals, and a peak
/// footer comment.
pub fn strain_to_csv(curve: &StrainCurve) -> String {
    let mut out = String::from("frame,strain_percent\n");
    for (t, v) in curve.values.iter().enumerate() {
        out.push_str(&format!("{t},{v:.6}\n"));
    }
    out.push_str(&format!(
        "# peak,{:.6},frame,{}\n",
        curve.peak, curve.peak_frame
    ));
    out
}
