//! Raw grid dumps, CSV export, and resumable evolution checkpoints.
//!
//! Dump format: a 32-byte header — magic "NSGF", u32 spatial dimension n,
//! u32 points per axis N, f64 box half-width L, u32 component count,
//! 8 reserved bytes — followed by `components` row-major arrays of
//! little-endian 64-bit floats, N^n values each.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fields::{FieldsHistory, SymFields};
use crate::grid::{GridSpec, ScalarGridField, TimeGrid};
use crate::Result;

const MAGIC: &[u8; 4] = b"NSGF";

fn io_err<T>(path: &Path, e: std::io::Error) -> Result<T> {
    Err(Error::io(path.display().to_string(), e))
}

/// Writes scalar fields sharing one grid as a single dump file.
pub fn write_dump(path: &Path, grid: &GridSpec, fields: &[&ScalarGridField]) -> Result<()> {
    let file = match File::create(path) {
        Ok(f) => f,
        Err(e) => return io_err(path, e),
    };
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&(grid.n as u32).to_le_bytes());
    header.extend_from_slice(&(grid.points as u32).to_le_bytes());
    header.extend_from_slice(&grid.half_width.to_le_bytes());
    header.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    header.extend_from_slice(&[0u8; 8]);
    debug_assert_eq!(header.len(), 32);
    if let Err(e) = w.write_all(&header) {
        return io_err(path, e);
    }
    for f in fields {
        if f.grid.n != grid.n || f.grid.points != grid.points {
            return Err(Error::ShapeMismatch(
                "all dumped fields must share the grid".to_string(),
            ));
        }
        for v in f.as_slice() {
            if let Err(e) = w.write_all(&v.to_le_bytes()) {
                return io_err(path, e);
            }
        }
    }
    if let Err(e) = w.flush() {
        return io_err(path, e);
    }
    Ok(())
}

/// Reads a dump written by [`write_dump`]. The origin-offset flag is not part
/// of the format; the caller supplies it.
pub fn read_dump(path: &Path, offset_origin: bool) -> Result<(GridSpec, Vec<ScalarGridField>)> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) => return io_err(path, e),
    };
    let mut r = BufReader::new(file);
    let mut header = [0u8; 32];
    if let Err(e) = r.read_exact(&mut header) {
        return io_err(path, e);
    }
    if &header[0..4] != MAGIC {
        return Err(Error::Config(format!(
            "{} is not a grid dump (bad magic)",
            path.display()
        )));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let points = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let half_width = f64::from_le_bytes(header[12..20].try_into().unwrap());
    let components = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
    let grid = crate::grid::make_grid(n, points, half_width, offset_origin)?;
    let mut fields = Vec::with_capacity(components);
    let mut buf = vec![0u8; grid.len() * 8];
    for _ in 0..components {
        if let Err(e) = r.read_exact(&mut buf) {
            return io_err(path, e);
        }
        let mut f = ScalarGridField::zeros(grid);
        for (chunk, v) in buf.chunks_exact(8).zip(f.as_slice_mut()) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        fields.push(f);
    }
    Ok((grid, fields))
}

/// CSV export with one row per grid point (n <= 2 only): coordinates first,
/// then one column per field.
pub fn write_csv_fields(
    path: &Path,
    grid: &GridSpec,
    names: &[&str],
    fields: &[&ScalarGridField],
) -> Result<()> {
    if grid.n > 2 {
        return Err(Error::Config(
            "per-point CSV export is limited to n <= 2".to_string(),
        ));
    }
    assert_eq!(names.len(), fields.len());
    let file = match File::create(path) {
        Ok(f) => f,
        Err(e) => return io_err(path, e),
    };
    let mut w = BufWriter::new(file);
    let mut header: Vec<String> = (1..=grid.n).map(|a| format!("x{a}")).collect();
    header.extend(names.iter().map(|s| s.to_string()));
    if let Err(e) = writeln!(w, "{}", header.join(",")) {
        return io_err(path, e);
    }
    for linear in 0..grid.len() {
        let idx = crate::fields::unravel(grid, linear);
        let mut row: Vec<String> = grid.position(&idx).iter().map(|x| format!("{x}")).collect();
        for f in fields {
            row.push(format!("{}", f.as_slice()[linear]));
        }
        if let Err(e) = writeln!(w, "{}", row.join(",")) {
            return io_err(path, e);
        }
    }
    if let Err(e) = w.flush() {
        return io_err(path, e);
    }
    Ok(())
}

/// Writes a generic CSV table (header row plus rows of numbers).
pub fn write_csv_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = match File::create(path) {
        Ok(f) => f,
        Err(e) => return io_err(path, e),
    };
    let mut w = BufWriter::new(file);
    if let Err(e) = writeln!(w, "{}", header.join(",")) {
        return io_err(path, e);
    }
    for row in rows {
        let line = row
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        if let Err(e) = writeln!(w, "{line}") {
            return io_err(path, e);
        }
    }
    if let Err(e) = w.flush() {
        return io_err(path, e);
    }
    Ok(())
}

/// Checkpoint manifest: where each family dump lives plus the run metadata
/// needed to resume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub iteration: usize,
    pub nu0: f64,
    pub horizon: f64,
    pub steps: usize,
    pub offset_origin: bool,
    pub config_hash: String,
    pub combined_norm: Option<f64>,
    /// Relative file names: g, h, then one per spatial axis of dg.
    pub files: Vec<String>,
}

fn family_fields(fields: &[SymFields]) -> Vec<&ScalarGridField> {
    fields.iter().flat_map(|s| s.components().iter()).collect()
}

/// Saves one iterate's full history (g, h, dg) plus a JSON manifest.
pub fn save_checkpoint(
    dir: &Path,
    hist: &FieldsHistory,
    iteration: usize,
    nu0: f64,
    config_hash: &str,
    combined_norm: Option<f64>,
) -> Result<PathBuf> {
    if let Err(e) = std::fs::create_dir_all(dir) {
        return io_err(dir, e);
    }
    let tag = format!("iter{iteration:04}");
    let mut files = Vec::new();
    let g_name = format!("{tag}_g.nsgf");
    write_dump(&dir.join(&g_name), &hist.grid, &family_fields(&hist.g))?;
    files.push(g_name);
    let h_name = format!("{tag}_h.nsgf");
    write_dump(&dir.join(&h_name), &hist.grid, &family_fields(&hist.h))?;
    files.push(h_name);
    for k in 0..hist.grid.n {
        let name = format!("{tag}_dg{k}.nsgf");
        let per_axis: Vec<&ScalarGridField> = hist
            .dg
            .iter()
            .flat_map(|s| s[k].components().iter())
            .collect();
        write_dump(&dir.join(&name), &hist.grid, &per_axis)?;
        files.push(name);
    }
    let manifest = CheckpointManifest {
        iteration,
        nu0,
        horizon: hist.time.horizon,
        steps: hist.time.steps,
        offset_origin: hist.grid.offset_origin,
        config_hash: config_hash.to_string(),
        combined_norm,
        files,
    };
    let manifest_path = dir.join(format!("{tag}.json"));
    let json = serde_json::to_string_pretty(&manifest)?;
    if let Err(e) = std::fs::write(&manifest_path, json) {
        return io_err(&manifest_path, e);
    }
    Ok(manifest_path)
}

/// Restores a history from a checkpoint manifest.
pub fn load_checkpoint(manifest_path: &Path) -> Result<(CheckpointManifest, FieldsHistory)> {
    let text = match std::fs::read_to_string(manifest_path) {
        Ok(t) => t,
        Err(e) => return io_err(manifest_path, e),
    };
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let time = TimeGrid::new(manifest.horizon, manifest.steps)?;
    let slices = time.slices();

    let (grid, g_all) = read_dump(&dir.join(&manifest.files[0]), manifest.offset_origin)?;
    let dim = grid.n + 1;
    let per_slice = dim * (dim + 1) / 2;
    if g_all.len() != per_slice * slices {
        return Err(Error::History(format!(
            "checkpoint component count {} does not match {} slices",
            g_all.len(),
            slices
        )));
    }
    let mut hist = FieldsHistory::zeros(grid, time);
    let unpack = |all: Vec<ScalarGridField>, target: &mut Vec<SymFields>| {
        for (i, f) in all.into_iter().enumerate() {
            let slice = i / per_slice;
            let comp = i % per_slice;
            target[slice].components_mut()[comp] = f;
        }
    };
    unpack(g_all, &mut hist.g);
    let (_, h_all) = read_dump(&dir.join(&manifest.files[1]), manifest.offset_origin)?;
    unpack(h_all, &mut hist.h);
    for k in 0..grid.n {
        let (_, dg_all) = read_dump(&dir.join(&manifest.files[2 + k]), manifest.offset_origin)?;
        for (i, f) in dg_all.into_iter().enumerate() {
            let slice = i / per_slice;
            let comp = i % per_slice;
            hist.dg[slice][k].components_mut()[comp] = f;
        }
    }
    Ok((manifest, hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(2, 16, 1.5, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f1 = ScalarGridField::zeros(grid);
        for v in f1.as_slice_mut() {
            *v = rng.gen_range(-5.0..5.0);
        }
        let f2 = ScalarGridField::constant(grid, -0.25);
        let path = dir.path().join("fields.nsgf");
        write_dump(&path, &grid, &[&f1, &f2]).unwrap();
        // 32-byte header + 2 components
        let bytes = std::fs::metadata(&path).unwrap().len();
        assert_eq!(bytes, 32 + 2 * (grid.len() as u64) * 8);
        let (grid2, fields) = read_dump(&path, true).unwrap();
        assert_eq!(grid2, grid);
        assert_eq!(fields.len(), 2);
        assert_eq!(fields[0].sup_distance(&f1), 0.0);
        assert_eq!(fields[1].sup_distance(&f2), 0.0);
    }

    #[test]
    fn csv_has_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(2, 16, 1.0, false).unwrap();
        let f = ScalarGridField::constant(grid, 1.0);
        let path = dir.path().join("f.csv");
        write_csv_fields(&path, &grid, &["value"], &[&f]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + grid.len());
        assert_eq!(lines[0], "x1,x2,value");
    }

    #[test]
    fn csv_rejects_3d() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(3, 16, 1.0, false).unwrap();
        let f = ScalarGridField::zeros(grid);
        assert!(write_csv_fields(&dir.path().join("f.csv"), &grid, &["v"], &[&f]).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(2, 16, 1.0, true).unwrap();
        let time = TimeGrid::new(0.1, 4).unwrap();
        let mut hist = FieldsHistory::zeros(grid, time);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 0..hist.slices() {
            for c in hist.g[m].components_mut() {
                for v in c.as_slice_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            for c in hist.h[m].components_mut() {
                for v in c.as_slice_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let manifest_path =
            save_checkpoint(dir.path(), &hist, 7, 0.02, "deadbeef", Some(1e-3)).unwrap();
        let (manifest, restored) = load_checkpoint(&manifest_path).unwrap();
        assert_eq!(manifest.iteration, 7);
        assert_eq!(manifest.config_hash, "deadbeef");
        assert_eq!(restored.sup_distance(&hist), 0.0);
    }
}
