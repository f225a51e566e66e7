//! Wavefront OBJ output, one file per cell plus a JSON manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softcell::tiling::{CellId, NodeId};

use crate::mesh::{BendSummary, CellMesh};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum ObjError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ObjError {
    pub fn name(&self) -> &'static str {
        "IoError"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub cell: CellId,
    pub file: String,
    pub nodes: Vec<NodeId>,
    pub vertices: usize,
    pub triangles: usize,
    pub polylines: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub cells: Vec<ManifestCell>,
    /// Each softened node once, in id order.
    pub bends: Vec<BendSummary>,
}

/// `x` with 9 significant digits, like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            "0".into()
        } else {
            x.to_string()
        };
    }
    // the exponent after rounding to 9 digits
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp).max(0) as usize, x);
        let fixed = if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        };
        if fixed == "-0" {
            "0".into()
        } else {
            fixed
        }
    } else {
        let (mantissa, _) = sci.split_at(sci.find('e').unwrap());
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn obj_text(mesh: &CellMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cell {} softened nodes {:?}", mesh.cell, mesh.nodes);
    for v in &mesh.vertices {
        let _ = writeln!(
            s,
            "v {} {} {}",
            format_sig9(v[0]),
            format_sig9(v[1]),
            format_sig9(v[2])
        );
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    for l in &mesh.polylines {
        s.push('l');
        for i in l {
            let _ = write!(s, " {}", i + 1);
        }
        s.push('\n');
    }
    s
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, ObjError> {
    fs::write(&path, text).map_err(|source| ObjError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `cell_<id>.obj` for every mesh and `manifest.json`; returns the paths
/// written, manifest last.
pub fn export_obj(meshes: &[CellMesh], directory: &Path) -> Result<Vec<PathBuf>, ObjError> {
    fs::create_dir_all(directory).map_err(|source| ObjError::Io {
        path: directory.to_path_buf(),
        source,
    })?;
    let mut sorted: Vec<&CellMesh> = meshes.iter().collect();
    sorted.sort_by_key(|m| m.cell);
    let mut paths = Vec::with_capacity(sorted.len() + 1);
    let mut cells = Vec::with_capacity(sorted.len());
    let mut bends: Vec<BendSummary> = Vec::new();
    for m in sorted {
        let file = format!("cell_{}.obj", m.cell);
        paths.push(write(directory.join(&file), &obj_text(m))?);
        cells.push(ManifestCell {
            cell: m.cell,
            file,
            nodes: m.nodes.clone(),
            vertices: m.vertices.len(),
            triangles: m.triangles.len(),
            polylines: m.polylines.len(),
        });
        for b in &m.bends {
            if !bends.iter().any(|x| x.node == b.node) {
                bends.push(b.clone());
            }
        }
    }
    bends.sort_by_key(|b| b.node);
    let manifest = Manifest {
        format_version: softcell::FORMAT_VERSION,
        cells,
        bends,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    paths.push(write(directory.join(MANIFEST), &text)?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(std::f64::consts::PI / 24.0), "0.130899694");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(9.9999999996), "10");
        assert_eq!(format_sig9(1.0e-7), "1e-07");
        assert_eq!(format_sig9(-353912.123456), "-353912.123");
        assert_eq!(format_sig9(1.5e12), "1.5e+12");
    }

    #[test]
    fn empty_mesh_list_writes_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let paths = export_obj(&[], dir.path()).unwrap();
        assert_eq!(paths, vec![dir.path().join(MANIFEST)]);
        let m: Manifest = serde_json::from_str(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
        assert!(m.cells.is_empty() && m.bends.is_empty());
    }
}
