//! Synthetic annulus phantoms with analytically known boundaries and
//! strain, used as ground truth for the tracking pipeline.
//!
//! The LV blood pool is a disk of radius `r(t) = R_e (1 - a sin^2(pi t / F))`
//! around a fixed center; the myocardial wall thickens as the cavity
//! contracts (`w(t) = W r(0) / r(t)`), so epicardial strain magnitude stays
//! below endocardial strain magnitude. An optional RV blood pool is a disk
//! overlapping the epicardium on the -x side, rasterized only where no LV
//! label is present, which leaves a crescent.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{LabelMask, LabelMaskSequence};
use crate::error::{Error, Result};
use crate::pgm::{self, GrayImage};

#[derive(Debug, Clone)]
pub struct PhantomConfig {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub center: (f64, f64),
    /// LV endocardial radius at end diastole (frame 0), pixels.
    pub lv_endo_radius_ed: f64,
    /// Myocardial wall thickness at end diastole, pixels.
    pub lv_wall_thickness_ed: f64,
    /// Fractional radius reduction at peak contraction, in [0, 1).
    pub contraction_amplitude: f64,
    pub rv_enabled: bool,
    pub seed: u64,
    /// Boundary jitter scale in pixels; 0 = crisp boundaries.
    pub jitter_px: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            width: 128,
            height: 128,
            n_frames: 25,
            center: (64.0, 64.0),
            lv_endo_radius_ed: 30.0,
            lv_wall_thickness_ed: 10.0,
            contraction_amplitude: 0.25,
            rv_enabled: false,
            seed: 1,
            jitter_px: 0.0,
        }
    }
}

impl PhantomConfig {
    /// Default geometry scaled to a square image of the given size.
    pub fn for_size(size: usize) -> Self {
        let s = size as f64;
        PhantomConfig {
            width: size,
            height: size,
            center: (s / 2.0, s / 2.0),
            lv_endo_radius_ed: s * 30.0 / 128.0,
            lv_wall_thickness_ed: s * 10.0 / 128.0,
            ..PhantomConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::domain(format!(
                "phantom needs at least 2 frames, got {}",
                self.n_frames
            )));
        }
        if !(0.0..1.0).contains(&self.contraction_amplitude) {
            return Err(Error::domain(format!(
                "contraction amplitude {} outside [0, 1)",
                self.contraction_amplitude
            )));
        }
        if self.lv_endo_radius_ed <= 0.0 || self.lv_wall_thickness_ed < 0.0 {
            return Err(Error::domain("non-positive phantom radii".to_string()));
        }
        if self.jitter_px < 0.0 {
            return Err(Error::domain("negative jitter".to_string()));
        }
        let bound = self.width.min(self.height) as f64 / 2.0 - 2.0;
        if self.lv_endo_radius_ed + self.lv_wall_thickness_ed >= bound {
            return Err(Error::domain(format!(
                "phantom ring (radius {} + wall {}) does not fit a {}x{} image",
                self.lv_endo_radius_ed, self.lv_wall_thickness_ed, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Analytic ground truth for a generated phantom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomTruth {
    pub n_frames: usize,
    pub center: (f64, f64),
    pub contraction_amplitude: f64,
    /// LV endocardial radius per frame, pixels.
    pub endo_radius_px: Vec<f64>,
    /// LV epicardial (outer wall) radius per frame, pixels.
    pub epi_outer_radius_px: Vec<f64>,
    /// Analytic endocardial strain per frame: 100 (r(t)/r(0) - 1).
    pub strain_percent: Vec<f64>,
    /// Continuous-time peak strain, -100 a. The discrete per-frame minimum
    /// only reaches this exactly when some frame hits sin^2 = 1.
    pub peak_strain_percent: f64,
    /// Frame of the discrete strain minimum (lowest index on ties).
    pub peak_frame: usize,
}

/// Rasterizes the phantom sequence and its analytic truth.
pub fn generate_annulus_phantom(cfg: &PhantomConfig) -> Result<(LabelMaskSequence, PhantomTruth)> {
    cfg.validate()?;
    let f = cfg.n_frames;
    let bound = cfg.width.min(cfg.height) as f64 / 2.0 - 2.0;

    let mut endo_radius = Vec::with_capacity(f);
    let mut epi_radius = Vec::with_capacity(f);
    for t in 0..f {
        let phase = (std::f64::consts::PI * t as f64 / f as f64).sin();
        let r = cfg.lv_endo_radius_ed * (1.0 - cfg.contraction_amplitude * phase * phase);
        // Wall thickens roughly area-preservingly, clamped to the image.
        let w = (cfg.lv_wall_thickness_ed * cfg.lv_endo_radius_ed / r).min(bound - r);
        endo_radius.push(r);
        epi_radius.push(r + w);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut frames = Vec::with_capacity(f);
    for t in 0..f {
        let mut mask = rasterize_frame(cfg, endo_radius[t], epi_radius[t]);
        if cfg.jitter_px > 0.0 {
            jitter_boundaries(&mut mask, cfg.jitter_px, &mut rng);
        }
        frames.push(mask);
    }

    let strain: Vec<f64> = endo_radius
        .iter()
        .map(|r| 100.0 * (r / endo_radius[0] - 1.0))
        .collect();
    let peak_frame = strain
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();

    let truth = PhantomTruth {
        n_frames: f,
        center: cfg.center,
        contraction_amplitude: cfg.contraction_amplitude,
        endo_radius_px: endo_radius,
        epi_outer_radius_px: epi_radius,
        strain_percent: strain,
        peak_strain_percent: -100.0 * cfg.contraction_amplitude,
        peak_frame,
    };
    let seq = LabelMaskSequence::new(frames)?;
    Ok((seq, truth))
}

fn rasterize_frame(cfg: &PhantomConfig, endo_r: f64, epi_r: f64) -> LabelMask {
    let (w, h) = (cfg.width, cfg.height);
    let (cx, cy) = cfg.center;
    let mut data = vec![0u8; w * h];
    for row in 0..h {
        for col in 0..w {
            let d = ((col as f64 + 0.5 - cx).powi(2) + (row as f64 + 0.5 - cy).powi(2)).sqrt();
            if d < endo_r {
                data[row * w + col] = 2;
            } else if d < epi_r {
                data[row * w + col] = 1;
            }
        }
    }
    if cfg.rv_enabled {
        // Disk centered on the epicardial circle's -x side; only pixels
        // that are still background get the RV label, so the visible
        // region is the crescent hugging the epicardium.
        let rv_center_x = cx - epi_r;
        let rv_r = (0.75 * endo_r).min(rv_center_x - 2.0).max(0.0);
        for row in 0..h {
            for col in 0..w {
                let idx = row * w + col;
                if data[idx] != 0 {
                    continue;
                }
                let d = ((col as f64 + 0.5 - rv_center_x).powi(2)
                    + (row as f64 + 0.5 - cy).powi(2))
                .sqrt();
                if d < rv_r {
                    data[idx] = 3;
                }
            }
        }
    }
    GrayImage {
        width: w,
        height: h,
        data,
    }
}

/// Flips boundary-adjacent pixels to a neighboring label with probability
/// proportional to the jitter scale.
fn jitter_boundaries(mask: &mut LabelMask, jitter_px: f64, rng: &mut ChaCha8Rng) {
    let (w, h) = (mask.width, mask.height);
    let original = mask.data.clone();
    let p_flip = (0.5 * jitter_px).min(1.0);
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            let here = original[idx];
            let mut other = None;
            if r > 0 && original[idx - w] != here {
                other = Some(original[idx - w]);
            } else if c > 0 && original[idx - 1] != here {
                other = Some(original[idx - 1]);
            } else if c + 1 < w && original[idx + 1] != here {
                other = Some(original[idx + 1]);
            } else if r + 1 < h && original[idx + w] != here {
                other = Some(original[idx + w]);
            }
            if let Some(label) = other {
                if rng.gen::<f64>() < p_flip {
                    mask.data[idx] = label;
                }
            }
        }
    }
}

/// Writes the phantom as the PGM + meta.json layout that
/// `boundary::load_mask_sequence` reads, plus `truth.json`.
pub fn write_phantom(cfg: &PhantomConfig, dir: &Path) -> Result<PhantomTruth> {
    let (seq, truth) = generate_annulus_phantom(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("{}: {e}", dir.display())))?;
    for (t, frame) in seq.frames.iter().enumerate() {
        pgm::write_pgm(&dir.join(format!("frame_{t:04}.pgm")), frame)?;
    }
    let meta = serde_json::json!({
        "pixel_spacing_mm": [1.0, 1.0],
        "frame_interval_ms": 0.0,
    });
    write_json(&dir.join("meta.json"), &meta)?;
    let truth_value = serde_json::to_value(&truth)
        .map_err(|e| Error::format(format!("truth serialization: {e}")))?;
    write_json(&dir.join("truth.json"), &truth_value)?;
    Ok(truth)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(format!("{}: {e}", path.display())))
}

pub fn read_truth(path: &Path) -> Result<PhantomTruth> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}
