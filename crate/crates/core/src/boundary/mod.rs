//! Label-mask ingestion and boundary-candidate extraction.
//!
//! Masks are 2D integer label images (0 background, 1 LV myocardium,
//! 2 LV blood-pool, 3 RV blood-pool). For a given structure the mask is
//! binarized by the structure's region predicate, reduced to its largest
//! 4-connected component, and the component's 4-neighborhood boundary
//! pixels become the "boundary candidates" that curves are fitted to.
//! Candidates are pixel centers: x = column + 0.5, y = row + 0.5.

mod kdtree;

pub use kdtree::{nearest_linear, KdTree};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::pgm::{self, GrayImage};

pub const MAX_LABEL: u8 = 3;

/// One frame of integer labels.
pub type LabelMask = GrayImage;

/// Cyclic sequence of label masks plus acquisition metadata.
#[derive(Debug, Clone)]
pub struct LabelMaskSequence {
    pub frames: Vec<LabelMask>,
    pub width: usize,
    pub height: usize,
    /// (sx, sy) in mm per pixel; defaults to (1.0, 1.0).
    pub pixel_spacing_mm: (f64, f64),
    /// Time between frames in ms; 0.0 when unknown.
    pub frame_interval_ms: f64,
}

impl LabelMaskSequence {
    pub fn new(frames: Vec<LabelMask>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::format(format!(
                "a mask sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let width = frames[0].width;
        let height = frames[0].height;
        for (t, frame) in frames.iter().enumerate() {
            if frame.width != width || frame.height != height {
                return Err(Error::format(format!(
                    "frame {t} is {}x{}, expected {width}x{height}",
                    frame.width, frame.height
                )));
            }
            for (i, &v) in frame.data.iter().enumerate() {
                if v > MAX_LABEL {
                    return Err(Error::format(format!(
                        "frame {t}: label value {v} at row {}, col {} (valid labels are 0..=3)",
                        i / width,
                        i % width
                    )));
                }
            }
        }
        Ok(LabelMaskSequence {
            frames,
            width,
            height,
            pixel_spacing_mm: (1.0, 1.0),
            frame_interval_ms: 0.0,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Anatomical structure selecting a region predicate on labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    LvEndo,
    LvEpi,
    RvEndo,
}

impl Structure {
    /// Whether a label belongs to the structure's region.
    #[inline]
    pub fn includes(self, label: u8) -> bool {
        match self {
            Structure::LvEndo => label == 2,
            Structure::LvEpi => label == 1 || label == 2,
            Structure::RvEndo => label == 3,
        }
    }

    pub const ALL: [Structure; 3] = [Structure::LvEndo, Structure::LvEpi, Structure::RvEndo];
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Structure::LvEndo => "lv-endo",
            Structure::LvEpi => "lv-epi",
            Structure::RvEndo => "rv-endo",
        };
        f.write_str(name)
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lv-endo" => Ok(Structure::LvEndo),
            "lv-epi" => Ok(Structure::LvEpi),
            "rv-endo" => Ok(Structure::RvEndo),
            other => Err(Error::domain(format!(
                "unknown structure `{other}` (expected lv-endo, lv-epi, or rv-endo)"
            ))),
        }
    }
}

/// Boundary-candidate point set for one frame, with a spatial index.
#[derive(Debug, Clone)]
pub struct BoundaryCandidateSet {
    frame: usize,
    points: Vec<Point2>,
    tree: KdTree,
}

impl BoundaryCandidateSet {
    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest candidate to `q`; ties broken by smallest (row, column).
    pub fn nearest(&self, q: Point2) -> Point2 {
        self.tree.nearest(q).expect("candidate set is nonempty")
    }
}

/// Builds the Kd-tree index over a nonempty candidate point list.
pub fn build_candidate_set(points: Vec<Point2>, frame: usize) -> Result<BoundaryCandidateSet> {
    if points.is_empty() {
        return Err(Error::domain(format!(
            "cannot build candidate set for frame {frame}: no points"
        )));
    }
    let tree = KdTree::build(&points);
    Ok(BoundaryCandidateSet {
        frame,
        points,
        tree,
    })
}

/// Extracts boundary-candidate pixel centers for a structure.
///
/// Keeps only the largest 4-connected component of the binarized region
/// (suppressing speckle), then marks pixels with at least one 4-neighbor
/// outside the component (or on the image border). Points come back in
/// row-major order; an empty region yields an empty list.
pub fn extract_boundary_candidates(mask: &LabelMask, structure: Structure) -> Vec<Point2> {
    let (w, h) = (mask.width, mask.height);
    let inside = |r: usize, c: usize| structure.includes(mask.data[r * w + c]);

    // Largest 4-connected component by BFS in scan order; size ties keep
    // the earliest component.
    let mut component = vec![false; w * h];
    let mut visited = vec![false; w * h];
    let mut best_size = 0usize;
    let mut best_seed = None;
    let mut queue = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            if visited[idx] || !inside(r, c) {
                continue;
            }
            let mut size = 0usize;
            queue.clear();
            queue.push(idx);
            visited[idx] = true;
            while let Some(cur) = queue.pop() {
                size += 1;
                let (cr, cc) = (cur / w, cur % w);
                for (nr, nc) in neighbors4(cr, cc, w, h) {
                    let nidx = nr * w + nc;
                    if !visited[nidx] && inside(nr, nc) {
                        visited[nidx] = true;
                        queue.push(nidx);
                    }
                }
            }
            if size > best_size {
                best_size = size;
                best_seed = Some(idx);
            }
        }
    }
    let Some(seed) = best_seed else {
        return Vec::new();
    };
    queue.clear();
    queue.push(seed);
    component[seed] = true;
    while let Some(cur) = queue.pop() {
        let (cr, cc) = (cur / w, cur % w);
        for (nr, nc) in neighbors4(cr, cc, w, h) {
            let nidx = nr * w + nc;
            if !component[nidx] && inside(nr, nc) {
                component[nidx] = true;
                queue.push(nidx);
            }
        }
    }

    let mut points = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !component[r * w + c] {
                continue;
            }
            let on_border = r == 0 || c == 0 || r == h - 1 || c == w - 1;
            let exposed = on_border
                || neighbors4(r, c, w, h)
                    .into_iter()
                    .any(|(nr, nc)| !component[nr * w + nc]);
            if exposed {
                points.push(Point2::new(c as f64 + 0.5, r as f64 + 0.5));
            }
        }
    }
    points
}

fn neighbors4(r: usize, c: usize, w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(4);
    if r > 0 {
        out.push((r - 1, c));
    }
    if c > 0 {
        out.push((r, c - 1));
    }
    if c + 1 < w {
        out.push((r, c + 1));
    }
    if r + 1 < h {
        out.push((r + 1, c));
    }
    out
}

#[derive(Debug, Deserialize, Default)]
struct MetaFile {
    pixel_spacing_mm: Option<[f64; 2]>,
    frame_interval_ms: Option<f64>,
}

/// Loads `frame_0000.pgm .. frame_{F-1:04}.pgm` plus optional `meta.json`
/// from a directory.
pub fn load_mask_sequence(dir: &Path) -> Result<LabelMaskSequence> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::io(format!("{}: {e}", dir.display())))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(idx) = parse_frame_name(name) {
            indices.push(idx);
        }
    }
    if indices.is_empty() {
        return Err(Error::io(format!(
            "{}: no frame_NNNN.pgm files found",
            dir.display()
        )));
    }
    indices.sort_unstable();
    let max = *indices.last().unwrap();
    for expect in 0..=max {
        if indices.binary_search(&expect).is_err() {
            return Err(Error::io(format!(
                "{}: missing frame_{expect:04}.pgm (frames must be contiguous from 0)",
                dir.display()
            )));
        }
    }

    let mut frames = Vec::with_capacity(max + 1);
    for t in 0..=max {
        frames.push(pgm::read_pgm(&dir.join(format!("frame_{t:04}.pgm")))?);
    }
    let mut seq = LabelMaskSequence::new(frames)?;

    let meta_path = dir.join("meta.json");
    if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path)
            .map_err(|e| Error::io(format!("{}: {e}", meta_path.display())))?;
        let meta: MetaFile = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", meta_path.display())))?;
        if let Some([sx, sy]) = meta.pixel_spacing_mm {
            seq.pixel_spacing_mm = (sx, sy);
        }
        if let Some(dt) = meta.frame_interval_ms {
            seq.frame_interval_ms = dt;
        }
    }
    Ok(seq)
}

fn parse_frame_name(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("frame_")?;
    let digits = rest.strip_suffix(".pgm")?;
    if digits.len() != 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Extracts and indexes candidates for every frame of a sequence,
/// failing with the first frame whose region is empty.
pub fn candidate_sets_for_structure(
    seq: &LabelMaskSequence,
    structure: Structure,
) -> Result<Vec<BoundaryCandidateSet>> {
    seq.frames
        .iter()
        .enumerate()
        .map(|(t, mask)| {
            let points = extract_boundary_candidates(mask, structure);
            if points.is_empty() {
                return Err(Error::EmptyRegion {
                    structure,
                    frame: t,
                });
            }
            build_candidate_set(points, t)
        })
        .collect()
}
