//! Report files: JSON, CSV and PGM heatmaps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::solver::GridField;

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Binary 8-bit graymap of the inside values, linearly scaled from black
/// (minimum) to white (maximum); other nodes are black. Row 0 of the image
/// is the top of the domain.
pub fn write_pgm<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    let grid = field.grid();
    let (nx, ny) = grid.shape();
    let inside = grid.inside_nodes();
    let lo = inside.iter().map(|&k| field.get(k)).fold(f64::INFINITY, f64::min);
    let hi = inside.iter().map(|&k| field.get(k)).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut pixels = vec![0u8; nx * ny];
    for &k in inside {
        let (i, j) = grid.coords(k);
        let level = ((field.get(k) - lo) / span).clamp(0.0, 1.0);
        pixels[(ny - 1 - j) * nx + i] = (level * 255.0).round() as u8;
    }
    write!(out, "P5\n{nx} {ny}\n255\n")?;
    out.write_all(&pixels)?;
    Ok(())
}

pub fn save_pgm(field: &GridField, path: &Path) -> Result<()> {
    write_with(path, |out| write_pgm(field, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ConvexDomain, Grid};
    use std::sync::Arc;

    #[test]
    fn pgm_layout() {
        let grid = Arc::new(Grid::new(&ConvexDomain::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(), 0.1).unwrap());
        let u = GridField::from_fn(&grid, |x| x[1]);
        let mut buf = Vec::new();
        write_pgm(&u, &mut buf).unwrap();
        let (nx, ny) = grid.shape();
        let header = format!("P5\n{nx} {ny}\n255\n");
        assert!(buf.starts_with(header.as_bytes()));
        let pixels = &buf[header.len()..];
        assert_eq!(pixels.len(), nx * ny);
        // Top inside row is brightest, bottom inside row darkest, corners black.
        assert_eq!(pixels[nx + 1], 255);
        assert_eq!(pixels[(ny - 2) * nx + 1], 0);
        assert_eq!(pixels[0], 0);
    }

    #[test]
    fn json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_json(&path, &serde_json::json!({"a": 1})).unwrap();
        let back: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back["a"], 1);
    }
}
