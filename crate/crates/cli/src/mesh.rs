//! Triangle meshes of softened cells.
//!
//! Every patch face is sampled once on a bilinear parameter grid and pushed through
//! the composite softening map; both incident cells then reuse the same samples, so
//! neighbouring cell meshes agree bit for bit along their common face. Edge images
//! are added as polylines, clustered geometrically toward softened nodes so the
//! cusp-free join at the node is visible.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softcell::tiling::{CellId, EdgeId, FaceId, NodeId};
use softcell::SoftenedPatch;

type Vec3 = Vector3<f64>;

pub const MIN_RESOLUTION: usize = 8;

/// Triangles below this area are dropped.
const MIN_AREA: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("resolution {0} is below the minimum of {MIN_RESOLUTION}")]
    Resolution(usize),
}

/// The bend parameters a viewer needs to make sense of one softened node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendSummary {
    pub node: NodeId,
    pub origin: [f64; 3],
    pub axis: [f64; 3],
    pub kappa: f64,
    pub amplitude: f64,
    pub r_ball: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMesh {
    pub cell: CellId,
    /// Softened nodes on the boundary of this cell.
    pub nodes: Vec<NodeId>,
    pub bends: Vec<BendSummary>,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    /// Edge images; each starts at a softened node when the edge has one.
    pub polylines: Vec<Vec<u32>>,
}

impl CellMesh {
    pub fn vertex(&self, i: u32) -> Vec3 {
        Vec3::from(self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: &[u32; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertex(i));
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

struct FaceSamples {
    points: Vec<Vec3>,
    /// Local triangles, oriented by the face's corner order.
    triangles: Vec<[usize; 3]>,
    /// Corner-order normal of the unmapped face.
    normal: Vec3,
    centroid: Vec3,
}

fn sample_face(soft: &SoftenedPatch, face: FaceId, res: usize) -> FaceSamples {
    let corners: Vec<Vec3> = soft
        .patch
        .face_nodes(face)
        .into_iter()
        .map(|n| soft.patch.position(n))
        .collect();
    let [c0, c1, c2, c3] = [corners[0], corners[1], corners[2], corners[3]];
    let step = 1.0 / (res - 1) as f64;
    let mut points = Vec::with_capacity(res * res);
    for j in 0..res {
        let v = j as f64 * step;
        for i in 0..res {
            let u = i as f64 * step;
            let p = c0 * ((1.0 - u) * (1.0 - v))
                + c1 * (u * (1.0 - v))
                + c2 * (u * v)
                + c3 * ((1.0 - u) * v);
            points.push(soft.map(&p));
        }
    }
    let idx = |i: usize, j: usize| i + res * j;
    let mut triangles = Vec::with_capacity(2 * (res - 1) * (res - 1));
    for j in 0..res - 1 {
        for i in 0..res - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    FaceSamples {
        points,
        triangles,
        normal: (c1 - c0).cross(&(c3 - c0)),
        centroid: (c0 + c1 + c2 + c3) / 4.0,
    }
}

/// Arclength parameters along an edge of length `len`: a uniform grid plus
/// `κ·2^(−j)` clusters at each softened end.
fn edge_params(len: f64, start_kappa: Option<f64>, end_kappa: Option<f64>, res: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..res)
        .map(|i| len * i as f64 / (res - 1) as f64)
        .collect();
    let levels = res / 2;
    if let Some(k) = start_kappa {
        s.extend((0..levels).map(|j| k * 0.5f64.powi(j as i32)));
    }
    if let Some(k) = end_kappa {
        s.extend((0..levels).map(|j| len - k * 0.5f64.powi(j as i32)));
    }
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn edge_polyline(soft: &SoftenedPatch, edge: EdgeId, res: usize) -> Vec<Vec3> {
    let [a, b] = soft.patch.edges[&edge].ends;
    // run from a softened end when there is one
    let (start, end) = if !soft.bends.contains_key(&a) && soft.bends.contains_key(&b) {
        (b, a)
    } else {
        (a, b)
    };
    let (p, q) = (soft.patch.position(start), soft.patch.position(end));
    let len = (q - p).norm();
    let dir = (q - p) / len;
    let kappa = |n: NodeId| soft.bends.get(&n).map(|bend| bend.kappa);
    edge_params(len, kappa(start), kappa(end), res)
        .into_iter()
        .map(|s| {
            // nodes are fixed points of every bend; keep them exact
            if s == 0.0 {
                p
            } else if s == len {
                q
            } else {
                soft.map(&(p + dir * s))
            }
        })
        .collect()
}

fn summary(soft: &SoftenedPatch, node: NodeId) -> BendSummary {
    let b = &soft.bends[&node];
    BendSummary {
        node,
        origin: b.frame.o().into(),
        axis: b.frame.k().into(),
        kappa: b.kappa,
        amplitude: b.amplitude,
        r_ball: b.r_ball,
    }
}

/// One mesh per cell of the softened patch, in cell-id order.
pub fn sample_meshes(soft: &SoftenedPatch, resolution: usize) -> Result<Vec<CellMesh>, MeshError> {
    if resolution < MIN_RESOLUTION {
        return Err(MeshError::Resolution(resolution));
    }
    let faces: Vec<FaceId> = soft.patch.faces.keys().copied().collect();
    let samples: BTreeMap<FaceId, FaceSamples> = faces
        .par_iter()
        .map(|&f| (f, sample_face(soft, f, resolution)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let mut meshes = Vec::with_capacity(soft.patch.cells.len());
    for (&cell, pc) in &soft.patch.cells {
        let centre = soft.patch.cell_centroid(cell);
        let mut vertices: Vec<[f64; 3]> = Vec::new();
        let mut triangles = Vec::new();
        for f in &pc.faces {
            let fs = &samples[f];
            let offset = vertices.len();
            vertices.extend(fs.points.iter().map(|p| [p.x, p.y, p.z]));
            let outward = fs.normal.dot(&(fs.centroid - centre)) > 0.0;
            for t in &fs.triangles {
                let [a, b, c] = t.map(|i| (i + offset) as u32);
                let tri = if outward { [a, b, c] } else { [a, c, b] };
                let [p, q, r] = tri.map(|i| Vec3::from(vertices[i as usize]));
                if 0.5 * (q - p).cross(&(r - p)).norm() >= MIN_AREA {
                    triangles.push(tri);
                }
            }
        }
        let mut polylines = Vec::new();
        for e in soft.patch.cell_edges(cell) {
            let start = vertices.len() as u32;
            let line = edge_polyline(soft, e, resolution);
            vertices.extend(line.iter().map(|p| [p.x, p.y, p.z]));
            polylines.push((start..vertices.len() as u32).collect());
        }
        let nodes: Vec<NodeId> = soft
            .patch
            .cell_nodes(cell)
            .into_iter()
            .filter(|n| soft.bends.contains_key(n))
            .collect();
        meshes.push(CellMesh {
            cell,
            bends: nodes.iter().map(|&n| summary(soft, n)).collect(),
            nodes,
            vertices,
            triangles,
            polylines,
        });
    }
    Ok(meshes)
}
