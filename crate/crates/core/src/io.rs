//! Artifact writers: CSV tables, JSON documents, and 16-bit PGM heat maps.
//!
//! Every writer is deterministic — grids are emitted in row-major index
//! order, floats use Rust's shortest round-trip formatting, and JSON fields
//! keep their struct order — so identical inputs always produce identical
//! bytes.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldGrid, ScalarGrid};
use crate::spectrum::AngularSpectrum;
use crate::stats::EmpiricalPdf;

/// Complex field grid as `x_m,y_m,re,im,masked` rows in index order.
pub fn write_field_csv(path: &Path, grid: &FieldGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x_m,y_m,re,im,masked")?;
    for idx in 0..grid.spec.len() {
        let p = grid.spec.point_at(idx);
        let v = grid.values[idx];
        writeln!(w, "{},{},{},{},{}", p.x, p.y, v.re, v.im, grid.masked[idx] as u8)?;
    }
    w.flush()?;
    Ok(())
}

/// Scalar grid as `x_m,y_m,<value_header>,masked` rows in index order.
pub fn write_scalar_csv(path: &Path, grid: &ScalarGrid, value_header: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x_m,y_m,{value_header},masked")?;
    for idx in 0..grid.spec.len() {
        let p = grid.spec.point_at(idx);
        writeln!(w, "{},{},{},{}", p.x, p.y, grid.values[idx], grid.masked[idx] as u8)?;
    }
    w.flush()?;
    Ok(())
}

/// Histogram density as `bin_left,bin_right,density` rows.
pub fn write_histogram_csv(path: &Path, pdf: &EmpiricalPdf) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_left,bin_right,density")?;
    for (j, d) in pdf.densities.iter().enumerate() {
        writeln!(w, "{},{},{}", pdf.bin_edges[j], pdf.bin_edges[j + 1], d)?;
    }
    w.flush()?;
    Ok(())
}

/// Angular spectrum as `sin_theta,magnitude` rows, ascending in sinθ.
pub fn write_spectrum_csv(path: &Path, spec: &AngularSpectrum) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "sin_theta,magnitude")?;
    for (st, m) in spec.sin_theta.iter().zip(&spec.magnitude) {
        writeln!(w, "{st},{m}")?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("could not serialize {}: {e}", path.display())))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Rendering metadata for a PGM heat map, written alongside the image so the
/// gray levels can be mapped back to physical values.
#[derive(Clone, Debug, Serialize)]
pub struct PgmSidecar {
    pub nx: usize,
    pub ny: usize,
    pub x0_m: f64,
    pub y0_m: f64,
    pub dx_m: f64,
    pub dy_m: f64,
    /// Value mapped to gray level 1 (gray 0 is reserved for masked cells).
    pub value_min: f64,
    /// Value mapped to gray level 65535.
    pub value_max: f64,
    /// Raster order: first pixel row is the largest y (top of the room).
    pub row_order: String,
}

/// Scalar grid as a binary 16-bit PGM (P5, big-endian sample bytes). Unmasked
/// values map linearly onto gray levels 1..=65535; level 0 marks masked
/// cells. Returns the sidecar metadata for the caller to record.
pub fn write_scalar_pgm(path: &Path, grid: &ScalarGrid) -> Result<PgmSidecar> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    if nx == 0 || ny == 0 {
        return Err(Error::Validation("cannot render an empty grid".into()));
    }
    let unmasked: Vec<f64> = grid
        .values
        .iter()
        .zip(&grid.masked)
        .filter(|(_, &m)| !m)
        .map(|(&v, _)| v)
        .collect();
    if unmasked.is_empty() {
        return Err(Error::Validation("grid is fully masked; nothing to render".into()));
    }
    let lo = unmasked.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = unmasked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{nx} {ny}\n65535\n")?;
    // Image rows run top-to-bottom, i.e. from the largest grid y downward.
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let idx = grid.spec.index(ix, iy);
            let level: u16 = if grid.masked[idx] {
                0
            } else if span > 0.0 {
                1 + ((grid.values[idx] - lo) / span * 65534.0).round() as u16
            } else {
                65535
            };
            w.write_all(&level.to_be_bytes())?;
        }
    }
    w.flush()?;
    Ok(PgmSidecar {
        nx,
        ny,
        x0_m: grid.spec.x0,
        y0_m: grid.spec.y0,
        dx_m: grid.spec.dx,
        dy_m: grid.spec.dy,
        value_min: lo,
        value_max: hi,
        row_order: "top_to_bottom_y_descending".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use num_complex::Complex64;
    use std::fs;

    fn spec_2x2() -> GridSpec {
        GridSpec { nx: 2, ny: 2, x0: 0.5, y0: 0.25, dx: 1.0, dy: 0.5 }
    }

    #[test]
    fn field_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = FieldGrid {
            spec: spec_2x2(),
            values: vec![
                Complex64::new(1.0, -2.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-3.25, 4.0),
            ],
            masked: vec![false, false, true, false],
        };
        write_field_csv(&path, &grid).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "x_m,y_m,re,im,masked");
        assert_eq!(lines[1], "0.5,0.25,1,-2,0");
        assert_eq!(lines[3], "0.5,0.75,0,0,1");
        assert_eq!(lines[4], "1.5,0.75,-3.25,4,0");
    }

    #[test]
    fn scalar_csv_custom_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let grid = ScalarGrid {
            spec: spec_2x2(),
            values: vec![4.0, 3.5, 0.0, 1.25],
            masked: vec![false, false, true, false],
        };
        write_scalar_csv(&path, &grid, "capacity_bps_hz").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_m,y_m,capacity_bps_hz,masked");
        assert_eq!(lines[1], "0.5,0.25,4,0");
        assert_eq!(lines[3], "0.5,0.75,0,1");
    }

    #[test]
    fn histogram_and_spectrum_csv() {
        let dir = tempfile::tempdir().unwrap();
        let hist = EmpiricalPdf {
            bin_edges: vec![0.0, 0.5, 1.0],
            densities: vec![0.8, 1.2],
            n_samples: 10,
            bin_count: 2,
        };
        let hp = dir.path().join("h.csv");
        write_histogram_csv(&hp, &hist).unwrap();
        let text = fs::read_to_string(&hp).unwrap();
        assert_eq!(text, "bin_left,bin_right,density\n0,0.5,0.8\n0.5,1,1.2\n");

        let spec = AngularSpectrum {
            sin_theta: vec![-0.5, 0.0, 0.5],
            magnitude: vec![0.25, 1.0, 0.25],
        };
        let sp = dir.path().join("s.csv");
        write_spectrum_csv(&sp, &spec).unwrap();
        let text = fs::read_to_string(&sp).unwrap();
        assert_eq!(text, "sin_theta,magnitude\n-0.5,0.25\n0,1\n0.5,0.25\n");
    }

    #[test]
    fn json_writer_is_pretty_and_newline_terminated() {
        #[derive(Serialize)]
        struct Doc {
            name: &'static str,
            value: f64,
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        write_json(&path, &Doc { name: "anchor", value: 4.07 }).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\n"));
        assert!(text.ends_with("}\n"));
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["name"], "anchor");
    }

    #[test]
    fn pgm_encoding_and_masking() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        // index order: (0,0)=10, (1,0)=20, (0,1)=masked, (1,1)=30
        let grid = ScalarGrid {
            spec: spec_2x2(),
            values: vec![10.0, 20.0, 0.0, 30.0],
            masked: vec![false, false, true, false],
        };
        let meta = write_scalar_pgm(&path, &grid).unwrap();
        assert_eq!(meta.value_min, 10.0);
        assert_eq!(meta.value_max, 30.0);

        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let pixels: Vec<u16> = bytes[header.len()..]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        // Top row first (iy=1): masked → 0, 30 → 65535; bottom row: 10 → 1,
        // 20 → midpoint of 1..=65535.
        assert_eq!(pixels.len(), 4);
        assert_eq!(pixels[0], 0);
        assert_eq!(pixels[1], 65535);
        assert_eq!(pixels[2], 1);
        assert_eq!(pixels[3], 1 + 32767);

        // Constant unmasked grid maps to full brightness, not a 0/0 artifact.
        let flat = ScalarGrid { spec: spec_2x2(), values: vec![7.0; 4], masked: vec![false; 4] };
        let path2 = dir.path().join("flat.pgm");
        let meta = write_scalar_pgm(&path2, &flat).unwrap();
        assert_eq!(meta.value_min, meta.value_max);
        let bytes = fs::read(&path2).unwrap();
        assert!(bytes[header.len()..].chunks_exact(2).all(|c| u16::from_be_bytes([c[0], c[1]]) == 65535));

        // Fully masked grids are an error rather than an all-zero image.
        let dead = ScalarGrid { spec: spec_2x2(), values: vec![0.0; 4], masked: vec![true; 4] };
        assert!(write_scalar_pgm(&dir.path().join("dead.pgm"), &dead).is_err());
    }

    #[test]
    fn writers_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let grid = ScalarGrid {
            spec: spec_2x2(),
            values: vec![1.0, 2.0, 3.0, 4.0],
            masked: vec![false; 4],
        };
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        write_scalar_pgm(&a, &grid).unwrap();
        write_scalar_pgm(&b, &grid).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }
}
