//! Implementations of the `synth`, `track`, `strain`, and `render`
//! subcommands.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use cinetrack_core::boundary::{
    candidate_sets_for_structure, extract_boundary_candidates, load_mask_sequence, Structure,
};
use cinetrack_core::strain::{circumferential_strain, strain_to_csv};
use cinetrack_core::synth::{write_phantom, PhantomConfig};
use cinetrack_core::tracker::{track_sequence, CurvesFile, TrackerConfig};
use cinetrack_core::{Error, Result};

pub fn synth(
    out: &Path,
    frames: usize,
    size: usize,
    amplitude: f64,
    rv: bool,
    jitter: f64,
    seed: u64,
) -> Result<ExitCode> {
    let cfg = PhantomConfig {
        n_frames: frames,
        contraction_amplitude: amplitude,
        rv_enabled: rv,
        jitter_px: jitter,
        seed,
        ..PhantomConfig::for_size(size)
    };
    let truth = write_phantom(&cfg, out)?;
    println!(
        "wrote {} frames ({}x{}) to {} (analytic peak strain {:.6}%)",
        frames,
        size,
        size,
        out.display(),
        truth.peak_strain_percent
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
pub fn track(
    masks: &Path,
    structure: &str,
    out: &Path,
    passes: usize,
    cp0: usize,
    samples: usize,
    rho_cf: f64,
    rho_ac: f64,
    rho_cv: f64,
) -> Result<ExitCode> {
    let structure = Structure::from_str(structure)?;
    let cfg = TrackerConfig {
        passes,
        initial_control_points: cp0,
        samples_per_segment: samples,
        rho_cf,
        rho_ac,
        rho_cv,
        ..TrackerConfig::default()
    };
    let seq = load_mask_sequence(masks)?;
    let candidates = candidate_sets_for_structure(&seq, structure)?;
    let (state, report) = track_sequence(&candidates, &cfg)?;

    println!("pass  n_cp  outer  E_cf           E_ac           E_cv           weighted_total");
    for (i, pass) in report.passes.iter().enumerate() {
        println!(
            "{:>4}  {:>4}  {:>5}  {:<13.6e}  {:<13.6e}  {:<13.6e}  {:<13.6e}",
            i + 1,
            pass.n_control_points,
            pass.outer_iters,
            pass.term_costs.e_cf,
            pass.term_costs.e_ac,
            pass.term_costs.e_cv,
            pass.term_costs.weighted_total(&cfg)
        );
    }
    if !report.converged {
        eprintln!("WARN: convergence flag");
    }

    let file = CurvesFile::from_tracking(structure, seq.pixel_spacing_mm, &state, &report);
    file.write(out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn strain(curves: &Path, out: &Path, reference: usize) -> Result<ExitCode> {
    let file = CurvesFile::read(curves)?;
    let structure = Structure::from_str(&file.structure)?;
    let seq = file.to_spline_sequence()?;
    let curve = circumferential_strain(&seq, reference, structure)?;
    let text = strain_to_csv(&curve);
    std::fs::write(out, &text).map_err(|e| Error::io(format!("{}: {e}", out.display())))?;
    println!("peak {:.6}% @ frame {}", curve.peak, curve.peak_frame);
    Ok(ExitCode::SUCCESS)
}

pub fn render(masks: &Path, curves: &[PathBuf], out: &Path) -> Result<ExitCode> {
    let seq = load_mask_sequence(masks)?;
    let mut overlays = Vec::with_capacity(curves.len());
    for path in curves {
        let file = CurvesFile::read(path)?;
        if file.n_frames != seq.n_frames() {
            return Err(Error::domain(format!(
                "{}: {} frames but mask sequence has {}",
                path.display(),
                file.n_frames,
                seq.n_frames()
            )));
        }
        let structure = Structure::from_str(&file.structure)?;
        let splines = file.to_spline_sequence()?;
        overlays.push((structure, splines));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("{}: {e}", out.display())))?;

    for t in 0..seq.n_frames() {
        let mut layers = Vec::with_capacity(overlays.len());
        for (i, (structure, splines)) in overlays.iter().enumerate() {
            layers.push(crate::svg::Layer {
                color: crate::svg::color(i),
                candidates: extract_boundary_candidates(&seq.frames[t], *structure),
                spline: splines.frame(t).clone(),
            });
        }
        let svg = crate::svg::render_frame(seq.width, seq.height, &layers);
        let path = out.join(format!("frame_{t:04}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(format!("{}: {e}", path.display())))?;
    }
    println!("wrote {} SVG frames to {}", seq.n_frames(), out.display());
    Ok(ExitCode::SUCCESS)
}
