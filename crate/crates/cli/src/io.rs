//! Image and CSV I/O.
//!
//! Grayscale images are read and written as binary PGM (P5, maxval 255) or
//! 8-bit grayscale PNG, chosen by file extension. Grids are clamped to
//! `[0, 255]` and rounded only at write time; the solver pipeline stays in
//! floats. Integer-valued grids round-trip bit-exactly through both formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{GrayImage, ImageReader};
use ndarray::Array2;

use satv2_core::admm::TraceRecord;
use satv2_core::analysis::SweepRow;
use satv2_core::grid::ImageGrid;

use crate::commands::CliError;
use crate::manifest::{RunManifest, MANIFEST_PREFIX};

fn extension_of(path: &Path) -> Result<String, CliError> {
    path.extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .ok_or_else(|| CliError::Config(format!("{} has no file extension", path.display())))
}

/// Reads a grayscale image into a grid with the given mesh size.
pub fn read_image(path: &Path, mesh: f64) -> Result<ImageGrid, CliError> {
    let bytes = read_gray_bytes(path)?;
    let data = Array2::from_shape_fn((bytes.rows, bytes.cols), |(i, j)| {
        bytes.data[i * bytes.cols + j] as f64
    });
    ImageGrid::new(data, mesh).map_err(CliError::from)
}

/// Reads a mask image: pixel value >= 128 marks the pixel as missing.
pub fn read_mask(path: &Path) -> Result<Array2<bool>, CliError> {
    let bytes = read_gray_bytes(path)?;
    Ok(Array2::from_shape_fn((bytes.rows, bytes.cols), |(i, j)| {
        bytes.data[i * bytes.cols + j] >= 128
    }))
}

struct GrayBytes {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

fn read_gray_bytes(path: &Path) -> Result<GrayBytes, CliError> {
    match extension_of(path)?.as_str() {
        "pgm" => read_pgm(path),
        "png" => {
            let img = ImageReader::open(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
                .decode()
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
                .to_luma8();
            Ok(GrayBytes {
                rows: img.height() as usize,
                cols: img.width() as usize,
                data: img.into_raw(),
            })
        }
        other => Err(CliError::Config(format!(
            "unsupported image format `.{other}` (use .pgm or .png)"
        ))),
    }
}

/// Clamps to `[0, 255]`, rounds, and writes by extension.
pub fn write_image(path: &Path, grid: &ImageGrid) -> Result<(), CliError> {
    let (rows, cols) = grid.shape();
    let data: Vec<u8> = grid
        .values()
        .iter()
        .map(|&v| v.clamp(0.0, 255.0).round() as u8)
        .collect();
    match extension_of(path)?.as_str() {
        "pgm" => {
            let mut out = Vec::with_capacity(data.len() + 32);
            write!(out, "P5\n{cols} {rows}\n255\n")
                .map_err(|e| CliError::Io(e.to_string()))?;
            out.extend_from_slice(&data);
            fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        "png" => {
            let img = GrayImage::from_raw(cols as u32, rows as u32, data)
                .expect("buffer sized from the grid");
            img.save(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        other => Err(CliError::Config(format!(
            "unsupported image format `.{other}` (use .pgm or .png)"
        ))),
    }
}

fn read_pgm(path: &Path) -> Result<GrayBytes, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let bad = |msg: &str| CliError::Io(format!("{}: {msg}", path.display()));
    if !bytes.starts_with(b"P5") {
        return Err(bad("not a binary PGM (missing P5 magic)"));
    }
    // Tokenize the header: three integers after the magic, skipping
    // whitespace and `#` comments.
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("malformed PGM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| bad("malformed PGM header"))?
            .parse()
            .map_err(|_| bad("malformed PGM header"))?;
    }
    let [cols, rows, maxval] = fields;
    if maxval != 255 {
        return Err(bad("only 8-bit PGM (maxval 255) is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("malformed PGM header"));
    }
    pos += 1;
    let need = rows * cols;
    if bytes.len() < pos + need {
        return Err(bad("PGM raster truncated"));
    }
    Ok(GrayBytes {
        rows,
        cols,
        data: bytes[pos..pos + need].to_vec(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Writes the trace CSV with the embedded manifest header. The wall-clock
/// column is populated only when `timing` is requested, keeping default
/// traces byte-reproducible.
pub fn write_trace(
    path: &Path,
    manifest: &RunManifest,
    trace: &[TraceRecord],
    timing: bool,
) -> Result<(), CliError> {
    let mut s = String::new();
    s.push_str(MANIFEST_PREFIX);
    s.push_str(&manifest.to_json());
    s.push('\n');
    s.push_str("k,R1,R2,L1,L2,Ru,E,delta1,delta2,psnr,ssim,wall_ms\n");
    for r in trace {
        let wall = if timing { format!("{}", r.wall_ms) } else { String::new() };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.k,
            r.r1_res,
            r.r2_res,
            fmt_opt(r.l1),
            fmt_opt(r.l2),
            fmt_opt(r.ru),
            r.energy,
            fmt_opt(r.delta1),
            fmt_opt(r.delta2),
            fmt_opt(r.psnr),
            fmt_opt(r.ssim),
            wall,
        ));
    }
    fs::write(path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes the steepness-sweep CSV (or prints it when no path is given).
pub fn write_sweep(
    path: Option<&Path>,
    manifest: &RunManifest,
    rows: &[SweepRow],
) -> Result<(), CliError> {
    let mut s = String::new();
    s.push_str(MANIFEST_PREFIX);
    s.push_str(&manifest.to_json());
    s.push('\n');
    s.push_str("steepness,integral,lower,upper,fidelity_lhs,fidelity_rhs,tv_integral\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.steepness, r.integral, r.lower, r.upper, r.fidelity_lhs, r.fidelity_rhs, r.tv_integral
        ));
    }
    match path {
        Some(p) => fs::write(p, s).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}
