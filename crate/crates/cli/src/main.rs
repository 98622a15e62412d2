//! `cinetrack` — batch pipeline for contour tracking and strain
//! estimation on label-mask cine sequences.
//!
//! Subcommands: `synth` (phantom generation), `track` (joint spline
//! registration), `strain` (circumferential strain), `render` (SVG
//! overlays), `check` (numerical self-tests).
//!
//! Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O or
//! format error, 4 empty structure region.

mod check;
mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use cinetrack_core::Error;

#[derive(Parser)]
#[command(
    name = "cinetrack",
    version,
    about = "Contour tracking and strain for cine label masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annulus phantom with known strain.
    Synth {
        /// Output directory for frame_NNNN.pgm, meta.json, truth.json.
        #[arg(long)]
        out: PathBuf,
        /// Number of frames (at least 2).
        #[arg(long, default_value_t = 25)]
        frames: usize,
        /// Image width and height in pixels.
        #[arg(long, default_value_t = 128)]
        size: usize,
        /// Peak fractional contraction of the endocardial radius, in [0, 1).
        #[arg(long, default_value_t = 0.25)]
        amplitude: f64,
        /// Also rasterize an RV blood-pool crescent.
        #[arg(long)]
        rv: bool,
        /// Boundary jitter scale in pixels (0 = crisp).
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Seed for the jitter noise.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Track one structure across a mask sequence and write curves.json.
    Track {
        /// Directory with frame_NNNN.pgm (and optional meta.json).
        #[arg(long)]
        masks: PathBuf,
        /// Structure to track: lv-endo, lv-epi, or rv-endo.
        #[arg(long)]
        structure: String,
        /// Output curves.json path.
        #[arg(long)]
        out: PathBuf,
        /// Number of subdivision passes.
        #[arg(long, default_value_t = 3)]
        passes: usize,
        /// Control points of the coarsest pass.
        #[arg(long, default_value_t = 8)]
        cp0: usize,
        /// Curve samples per spline segment.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Closest-feature term weight.
        #[arg(long, default_value_t = 10.0)]
        rho_cf: f64,
        /// Acceleration regularizer weight.
        #[arg(long, default_value_t = 1.0)]
        rho_ac: f64,
        /// Curvature regularizer weight.
        #[arg(long, default_value_t = 0.1)]
        rho_cv: f64,
    },
    /// Compute circumferential strain from curves.json.
    Strain {
        /// Input curves.json from `track`.
        #[arg(long)]
        curves: PathBuf,
        /// Output strain.csv path.
        #[arg(long)]
        out: PathBuf,
        /// Reference frame (default 0 = end diastole).
        #[arg(long, default_value_t = 0)]
        reference: usize,
    },
    /// Render per-frame SVG overlays of candidates and tracked curves.
    Render {
        /// Directory with frame_NNNN.pgm.
        #[arg(long)]
        masks: PathBuf,
        /// One or more curves.json files (repeat the flag).
        #[arg(long = "curves", required = true)]
        curves: Vec<PathBuf>,
        /// Output directory for frame_NNNN.svg.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run numerical self-tests (Jacobians, Kd-tree oracle).
    Check {
        /// Base seed for the random instances.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Corrupt one analytic Jacobian entry (negative control).
        #[arg(long, hide = true)]
        corrupt_jacobian: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = subcommand_name(&cli.command);
    let result = match cli.command {
        Command::Synth {
            out,
            frames,
            size,
            amplitude,
            rv,
            jitter,
            seed,
        } => commands::synth(&out, frames, size, amplitude, rv, jitter, seed),
        Command::Track {
            masks,
            structure,
            out,
            passes,
            cp0,
            samples,
            rho_cf,
            rho_ac,
            rho_cv,
        } => commands::track(
            &masks, &structure, &out, passes, cp0, samples, rho_cf, rho_ac, rho_cv,
        ),
        Command::Strain {
            curves,
            out,
            reference,
        } => commands::strain(&curves, &out, reference),
        Command::Render { masks, curves, out } => commands::render(&masks, &curves, &out),
        Command::Check {
            seed,
            corrupt_jacobian,
        } => check::run(seed, corrupt_jacobian),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = exit_code(&err);
            if code == 2 {
                print_usage(name);
            }
            ExitCode::from(code)
        }
    }
}

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Synth { .. } => "synth",
        Command::Track { .. } => "track",
        Command::Strain { .. } => "strain",
        Command::Render { .. } => "render",
        Command::Check { .. } => "check",
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        Error::EmptyRegion { .. } => 4,
    }
}

fn print_usage(name: &'static str) {
    let mut root = Cli::command();
    if let Some(sub) = root.find_subcommand_mut(name) {
        eprintln!("{}", sub.render_usage());
    }
}
