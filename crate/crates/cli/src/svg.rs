//! Minimal SVG output: boundary candidates as dots and tracked splines
//! as closed polyline paths sampled at 16 points per segment.

use cinetrack_core::{ClosedQuadSpline, Point2};

pub const CURVE_SAMPLES_PER_SEGMENT: usize = 16;

const PALETTE: [&str; 6] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628",
];

pub fn color(index: usize) -> &'static str {
    PALETTE[index % PALETTE.len()]
}

pub struct Layer {
    pub color: &'static str,
    pub candidates: Vec<Point2>,
    pub spline: ClosedQuadSpline,
}

pub fn render_frame(width: usize, height: usize, layers: &[Layer]) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {vw} {vh}\">\n",
        w = 4 * width,
        h = 4 * height,
        vw = width,
        vh = height
    ));
    out.push_str(&format!(
        "  <rect width=\"{width}\" height=\"{height}\" fill=\"#111111\"/>\n"
    ));
    for layer in layers {
        out.push_str(&format!(
            "  <g fill=\"{}\" fill-opacity=\"0.45\">\n",
            layer.color
        ));
        for p in &layer.candidates {
            out.push_str(&format!(
                "    <circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"0.35\"/>\n",
                p.x, p.y
            ));
        }
        out.push_str("  </g>\n");
        out.push_str(&format!(
            "  <path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"0.5\"/>\n",
            path_data(&layer.spline),
            layer.color
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Closed path through the spline samples; always `Z`-terminated.
fn path_data(spline: &ClosedQuadSpline) -> String {
    let mut d = String::new();
    for (i, sample) in spline.sample(CURVE_SAMPLES_PER_SEGMENT).iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        d.push_str(&format!(
            "{cmd} {:.3} {:.3} ",
            sample.position.x, sample.position.y
        ));
    }
    d.push('Z');
    d
}
