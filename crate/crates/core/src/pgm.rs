//! Minimal binary PGM (P5, 8-bit) reader/writer.
//!
//! Label masks are stored with the label value written directly into the
//! pixel byte, maxval 255. The writer emits a fixed header layout so
//! repeated runs are byte-identical.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Raw 8-bit image: `data[row * width + col]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("{}: {e}", path.display())))?;
    parse_pgm(&bytes).map_err(|msg| Error::format(format!("{}: {msg}", path.display())))
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    if image.data.len() != image.width * image.height {
        return Err(Error::domain(format!(
            "pgm write: buffer length {} does not match {}x{}",
            image.data.len(),
            image.width,
            image.height
        )));
    }
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(format!("{}: {e}", path.display()));
    write!(w, "P5\n{} {}\n255\n", image.width, image.height).map_err(io_err)?;
    w.write_all(&image.data).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if !bytes.starts_with(b"P5") {
        return Err("missing P5 magic number".to_string());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        pos = skip_whitespace_and_comments(bytes, pos)?;
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err("truncated header".to_string());
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse::<usize>()
            .map_err(|_| format!("bad header field `{text}`"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    if width == 0 || height == 0 {
        return Err(format!("degenerate dimensions {width}x{height}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing raster separator".to_string());
    }
    pos += 1;
    let expected = width * height;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(format!(
            "raster has {} bytes, expected {expected}",
            raster.len()
        ));
    }
    Ok(GrayImage {
        width,
        height,
        data: raster[..expected].to_vec(),
    })
}

fn skip_whitespace_and_comments(
    bytes: &[u8],
    mut pos: usize,
) -> std::result::Result<usize, String> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else if pos >= bytes.len() {
            return Err("truncated header".to_string());
        } else {
            return Ok(pos);
        }
    }
}
