//! Finite patches of polyhedral tilings and vertex figures.
//!
//! Incidence is stored explicitly: edges know their end nodes and cells, faces
//! their edge cycle and cells, cells their faces. Geometry is only used to build
//! and validate patches.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{arr, box_distance, newell_normal, perpendicular, v3, Vec3};
use crate::graphcolor::{GraphError, PolyhedralGraph};

pub type NodeId = u32;
pub type EdgeId = u32;
pub type FaceId = u32;
pub type CellId = u32;

/// Default number of samples used for curved edges.
pub const CURVED_EDGE_SAMPLES: usize = 64;
/// Default bound on the turning angle between consecutive samples of a curved edge.
pub const MAX_TURNING_ANGLE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TilingError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("node {0} is on the patch boundary; its vertex figure would be incomplete")]
    BoundaryNode(NodeId),
    #[error("epsilon {eps} too large: sphere leaves the vertex star (limit {limit})")]
    EpsilonTooLarge { eps: f64, limit: f64 },
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid patch: {0}")]
    InvalidPatch(String),
    #[error("inconsistent vertex figure: {0}")]
    InconsistentFigure(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl TilingError {
    pub fn name(&self) -> &'static str {
        match self {
            TilingError::UnknownNode(_) => "UnknownNode",
            TilingError::BoundaryNode(_) => "BoundaryNode",
            TilingError::EpsilonTooLarge { .. } => "EpsilonTooLarge",
            TilingError::InvalidEpsilon(_) => "InvalidEpsilon",
            TilingError::InvalidPatch(_) => "InvalidPatch",
            TilingError::InconsistentFigure(_) => "InconsistentFigure",
            TilingError::Graph(g) => g.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchEdge {
    pub ends: [NodeId; 2],
    pub cells: Vec<CellId>,
    /// Dense samples from `ends[0]` to `ends[1]` for curved edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 3]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchFace {
    pub edge_cycle: Vec<EdgeId>,
    /// One or two cells; a single cell marks a face on the patch boundary.
    pub cells: Vec<CellId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchCell {
    pub faces: Vec<FaceId>,
}

/// Radii certifying normality: every cell contains a ball of radius `r_in` and
/// fits in a ball of radius `r_out`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityBounds {
    pub r_in: f64,
    #[serde(rename = "R_out")]
    pub r_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingPatch {
    #[serde(default = "crate::format_version")]
    pub format_version: u32,
    pub nodes: BTreeMap<NodeId, [f64; 3]>,
    pub edges: BTreeMap<EdgeId, PatchEdge>,
    pub faces: BTreeMap<FaceId, PatchFace>,
    pub cells: BTreeMap<CellId, PatchCell>,
    pub bounds: NormalityBounds,
}

impl TilingPatch {
    pub fn position(&self, node: NodeId) -> Vec3 {
        v3(&self.nodes[&node])
    }

    /// Node at `p` within `tol`, if any.
    pub fn node_at(&self, p: [f64; 3], tol: f64) -> Option<NodeId> {
        let p = v3(&p);
        self.nodes
            .iter()
            .find(|(_, q)| (v3(q) - p).norm() <= tol)
            .map(|(id, _)| *id)
    }

    /// Nodes of a face in cyclic order.
    pub fn face_nodes(&self, face: FaceId) -> Vec<NodeId> {
        let cycle = &self.faces[&face].edge_cycle;
        let mut out = Vec::with_capacity(cycle.len());
        for (i, e) in cycle.iter().enumerate() {
            let [a, b] = self.edges[e].ends;
            let next = self.edges[&cycle[(i + 1) % cycle.len()]].ends;
            // the node shared with the next edge closes this step
            let shared = if next.contains(&b) { b } else { a };
            let start = if shared == a { b } else { a };
            out.push(start);
        }
        out
    }

    pub fn cell_nodes(&self, cell: CellId) -> BTreeSet<NodeId> {
        self.cells[&cell]
            .faces
            .iter()
            .flat_map(|f| self.face_nodes(*f))
            .collect()
    }

    pub fn cell_edges(&self, cell: CellId) -> BTreeSet<EdgeId> {
        self.cells[&cell]
            .faces
            .iter()
            .flat_map(|f| self.faces[f].edge_cycle.iter().copied())
            .collect()
    }

    fn node_faces(&self) -> HashMap<NodeId, Vec<FaceId>> {
        let mut map: HashMap<NodeId, Vec<FaceId>> = HashMap::new();
        for (&f, face) in &self.faces {
            let mut nodes: Vec<NodeId> = face
                .edge_cycle
                .iter()
                .flat_map(|e| self.edges[e].ends)
                .collect();
            nodes.sort_unstable();
            nodes.dedup();
            for n in nodes {
                map.entry(n).or_default().push(f);
            }
        }
        map
    }

    /// A node is interior when every face containing it has two cells.
    pub fn is_interior_node(&self, node: NodeId) -> bool {
        let nf = self.node_faces();
        nf.get(&node)
            .map(|fs| fs.iter().all(|f| self.faces[f].cells.len() == 2))
            .unwrap_or(false)
    }

    pub fn interior_nodes(&self) -> Vec<NodeId> {
        let nf = self.node_faces();
        self.nodes
            .keys()
            .copied()
            .filter(|n| {
                nf.get(n)
                    .map(|fs| fs.iter().all(|f| self.faces[f].cells.len() == 2))
                    .unwrap_or(false)
            })
            .collect()
    }

    /// Checks referential integrity, the incidence invariants and per-cell Euler counts.
    pub fn validate(&self) -> Result<(), TilingError> {
        let bad = |m: String| Err(TilingError::InvalidPatch(m));
        if self.cells.is_empty() {
            return bad("patch has no cells".into());
        }
        for (id, e) in &self.edges {
            if e.ends[0] == e.ends[1] || !e.ends.iter().all(|n| self.nodes.contains_key(n)) {
                return bad(format!("edge {id} has invalid ends"));
            }
            if let Some(s) = &e.samples {
                if s.len() < 2 {
                    return bad(format!("edge {id} has fewer than 2 samples"));
                }
            }
        }
        for (id, f) in &self.faces {
            if f.cells.is_empty() || f.cells.len() > 2 {
                return bad(format!("face {id} has {} cells", f.cells.len()));
            }
            if f.edge_cycle.len() < 2 || !f.edge_cycle.iter().all(|e| self.edges.contains_key(e)) {
                return bad(format!("face {id} has an invalid edge cycle"));
            }
            let n = f.edge_cycle.len();
            for i in 0..n {
                let a = self.edges[&f.edge_cycle[i]].ends;
                let b = self.edges[&f.edge_cycle[(i + 1) % n]].ends;
                if !a.iter().any(|x| b.contains(x)) {
                    return bad(format!("face {id} edge cycle is not closed"));
                }
            }
            for c in &f.cells {
                match self.cells.get(c) {
                    Some(cell) if cell.faces.contains(id) => {}
                    _ => return bad(format!("face {id} lists cell {c} which does not list it")),
                }
            }
        }
        for (id, c) in &self.cells {
            for f in &c.faces {
                match self.faces.get(f) {
                    Some(face) if face.cells.contains(id) => {}
                    _ => return bad(format!("cell {id} lists face {f} which does not list it")),
                }
            }
            let v = self.cell_nodes(*id).len() as i64;
            let e = self.cell_edges(*id).len() as i64;
            let f = c.faces.len() as i64;
            if v - e + f != 2 {
                return bad(format!("cell {id} boundary has V - E + F = {}", v - e + f));
            }
        }
        // edge cells must be the cells of the faces around it
        let mut edge_faces: HashMap<EdgeId, Vec<FaceId>> = HashMap::new();
        for (&f, face) in &self.faces {
            for e in &face.edge_cycle {
                edge_faces.entry(*e).or_default().push(f);
            }
        }
        for (id, e) in &self.edges {
            let from_faces: BTreeSet<CellId> = edge_faces
                .get(id)
                .into_iter()
                .flatten()
                .flat_map(|f| self.faces[f].cells.iter().copied())
                .collect();
            let listed: BTreeSet<CellId> = e.cells.iter().copied().collect();
            if from_faces != listed {
                return bad(format!("edge {id} cell list disagrees with its faces"));
            }
            let interior = edge_faces
                .get(id)
                .map(|fs| fs.iter().all(|f| self.faces[f].cells.len() == 2))
                .unwrap_or(false);
            if interior && listed.len() < 3 {
                return bad(format!("interior edge {id} has {} cells", listed.len()));
            }
        }
        for n in self.interior_nodes() {
            let cells: BTreeSet<CellId> = self
                .node_faces()
                .get(&n)
                .into_iter()
                .flatten()
                .flat_map(|f| self.faces[f].cells.iter().copied())
                .collect();
            if cells.len() < 4 {
                return bad(format!("interior node {n} has {} cells", cells.len()));
            }
        }
        Ok(())
    }

    /// Outward face planes `(unit normal, offset)` of a convex cell.
    fn cell_planes(&self, cell: CellId) -> Vec<(Vec3, f64)> {
        let centroid = self.cell_centroid(cell);
        self.cells[&cell]
            .faces
            .iter()
            .map(|f| {
                let pts: Vec<Vec3> = self
                    .face_nodes(*f)
                    .iter()
                    .map(|n| self.position(*n))
                    .collect();
                let mut n = newell_normal(&pts).normalize();
                let c: Vec3 = pts.iter().sum::<Vec3>() / pts.len() as f64;
                if n.dot(&(c - centroid)) < 0.0 {
                    n = -n;
                }
                (n, n.dot(&c))
            })
            .collect()
    }

    pub fn cell_centroid(&self, cell: CellId) -> Vec3 {
        let nodes = self.cell_nodes(cell);
        nodes.iter().map(|n| self.position(*n)).sum::<Vec3>() / nodes.len() as f64
    }

    /// Checks pairwise disjointness of (convex) cell interiors on sampled interior points.
    pub fn check_disjoint_interiors(&self) -> Result<(), TilingError> {
        let planes: BTreeMap<CellId, Vec<(Vec3, f64)>> = self
            .cells
            .keys()
            .map(|c| (*c, self.cell_planes(*c)))
            .collect();
        let samples: BTreeMap<CellId, Vec<Vec3>> = self
            .cells
            .keys()
            .map(|&c| {
                let ctr = self.cell_centroid(c);
                let mut pts = vec![ctr];
                pts.extend(
                    self.cell_nodes(c)
                        .iter()
                        .map(|n| ctr + 0.9 * (self.position(*n) - ctr)),
                );
                (c, pts)
            })
            .collect();
        for (&a, pts) in &samples {
            for (&b, pl) in &planes {
                if a == b {
                    continue;
                }
                for p in pts {
                    if pl.iter().all(|(n, d)| n.dot(p) - d < -1e-9) {
                        return Err(TilingError::InvalidPatch(format!(
                            "interiors of cells {a} and {b} overlap"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Generates the unit-cube tiling of `[0, extent]^3`.
///
/// Node `(i, j, k)` has id `i + (m+1)(j + (m+1)k)` with `m = extent`.
pub fn generate_cube_patch(extent: u32) -> TilingPatch {
    assert!(extent >= 1, "extent must be at least 1");
    let m = extent as i64;
    let nid = |i: i64, j: i64, k: i64| (i + (m + 1) * (j + (m + 1) * k)) as NodeId;
    let cid = |i: i64, j: i64, k: i64| -> Option<CellId> {
        if (0..m).contains(&i) && (0..m).contains(&j) && (0..m).contains(&k) {
            Some((i + m * (j + m * k)) as CellId)
        } else {
            None
        }
    };
    let mut nodes = BTreeMap::new();
    for k in 0..=m {
        for j in 0..=m {
            for i in 0..=m {
                nodes.insert(nid(i, j, k), [i as f64, j as f64, k as f64]);
            }
        }
    }
    let unit = |axis: usize| -> [i64; 3] {
        let mut u = [0; 3];
        u[axis] = 1;
        u
    };
    // edges keyed by (axis, base corner)
    let mut edge_ids: HashMap<(usize, [i64; 3]), EdgeId> = HashMap::new();
    let mut edges = BTreeMap::new();
    for axis in 0..3 {
        let u = unit(axis);
        for k in 0..=m - u[2] {
            for j in 0..=m - u[1] {
                for i in 0..=m - u[0] {
                    let id = edges.len() as EdgeId;
                    // cells around the edge: offsets -1/0 in the two other axes
                    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                    let mut cells = Vec::new();
                    for d1 in [-1, 0] {
                        for d2 in [-1, 0] {
                            let mut c = [i, j, k];
                            c[a1] += d1;
                            c[a2] += d2;
                            if let Some(c) = cid(c[0], c[1], c[2]) {
                                cells.push(c);
                            }
                        }
                    }
                    cells.sort_unstable();
                    edges.insert(
                        id,
                        PatchEdge {
                            ends: [nid(i, j, k), nid(i + u[0], j + u[1], k + u[2])],
                            cells,
                            samples: None,
                        },
                    );
                    edge_ids.insert((axis, [i, j, k]), id);
                }
            }
        }
    }
    let mut faces = BTreeMap::new();
    let mut cell_faces: BTreeMap<CellId, Vec<FaceId>> = BTreeMap::new();
    for axis in 0..3 {
        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
        let (u1, u2) = (unit(a1), unit(a2));
        let n = unit(axis);
        for k in 0..=m - u1[2] - u2[2] {
            for j in 0..=m - u1[1] - u2[1] {
                for i in 0..=m - u1[0] - u2[0] {
                    let base = [i, j, k];
                    let add = |p: [i64; 3], q: [i64; 3]| [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
                    let cycle = vec![
                        edge_ids[&(a1, base)],
                        edge_ids[&(a2, add(base, u1))],
                        edge_ids[&(a1, add(base, u2))],
                        edge_ids[&(a2, base)],
                    ];
                    let mut cells = Vec::new();
                    for d in [-1, 0] {
                        let c = [i + d * n[0], j + d * n[1], k + d * n[2]];
                        if let Some(c) = cid(c[0], c[1], c[2]) {
                            cells.push(c);
                        }
                    }
                    let id = faces.len() as FaceId;
                    for c in &cells {
                        cell_faces.entry(*c).or_default().push(id);
                    }
                    faces.insert(
                        id,
                        PatchFace {
                            edge_cycle: cycle,
                            cells,
                        },
                    );
                }
            }
        }
    }
    let cells = cell_faces
        .into_iter()
        .map(|(c, faces)| (c, PatchCell { faces }))
        .collect();
    TilingPatch {
        format_version: crate::FORMAT_VERSION,
        nodes,
        edges,
        faces,
        cells,
        bounds: NormalityBounds {
            r_in: 0.5,
            r_out: 3f64.sqrt() / 2.0,
        },
    }
}

/// Inradius lower bound and circumradius upper bound over all (convex) cells.
///
/// Per cell the ball is centred at the vertex centroid: the circumradius bound is
/// the largest vertex distance, the inradius bound the smallest face-plane distance.
pub fn check_normality(patch: &TilingPatch) -> NormalityBounds {
    let mut r_in = f64::INFINITY;
    let mut r_out: f64 = 0.0;
    for &c in patch.cells.keys() {
        let ctr = patch.cell_centroid(c);
        let big = patch
            .cell_nodes(c)
            .iter()
            .map(|n| (patch.position(*n) - ctr).norm())
            .fold(0.0, f64::max);
        let small = patch
            .cell_planes(c)
            .iter()
            .map(|(n, d)| d - n.dot(&ctr))
            .fold(f64::INFINITY, f64::min);
        r_in = r_in.min(small);
        r_out = r_out.max(big);
    }
    NormalityBounds { r_in, r_out }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Straight,
    Curved,
}

/// An edge of a vertex figure, oriented away from the node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurve {
    pub id: EdgeId,
    pub kind: EdgeKind,
    /// Unit half-tangent at the node.
    pub direction: [f64; 3],
    /// Points from the node outward; `[node, far end]` for straight edges.
    pub samples: Vec<[f64; 3]>,
    pub length: f64,
}

impl EdgeCurve {
    pub fn straight(id: EdgeId, from: Vec3, to: Vec3) -> Self {
        let d = to - from;
        EdgeCurve {
            id,
            kind: EdgeKind::Straight,
            direction: arr(&d.normalize()),
            samples: vec![arr(&from), arr(&to)],
            length: d.norm(),
        }
    }

    /// A curved edge from dense samples; `direction` is the half-tangent at `samples[0]`.
    pub fn curved(id: EdgeId, samples: Vec<Vec3>, direction: Vec3) -> Self {
        let length = samples.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        EdgeCurve {
            id,
            kind: EdgeKind::Curved,
            direction: arr(&direction.normalize()),
            samples: samples.iter().map(arr).collect(),
            length,
        }
    }

    pub fn origin(&self) -> Vec3 {
        v3(&self.samples[0])
    }

    pub fn dir(&self) -> Vec3 {
        v3(&self.direction)
    }

    /// Point at arclength `s`, clamped to `[0, length]`.
    ///
    /// Curved edges use cubic Hermite interpolation over the samples with the
    /// stored half-tangent at the node.
    pub fn point(&self, s: f64) -> Vec3 {
        let s = s.clamp(0.0, self.length);
        match self.kind {
            EdgeKind::Straight => self.origin() + self.dir() * s,
            EdgeKind::Curved => {
                let pts: Vec<Vec3> = self.samples.iter().map(v3).collect();
                let mut t = Vec::with_capacity(pts.len());
                t.push(0.0);
                for w in pts.windows(2) {
                    t.push(t.last().unwrap() + (w[1] - w[0]).norm());
                }
                let n = pts.len();
                let i = t.partition_point(|&x| x <= s).clamp(1, n - 1) - 1;
                let tangent = |k: usize| -> Vec3 {
                    if k == 0 {
                        self.dir()
                    } else if k == n - 1 {
                        (pts[k] - pts[k - 1]) / (t[k] - t[k - 1])
                    } else {
                        (pts[k + 1] - pts[k - 1]) / (t[k + 1] - t[k - 1])
                    }
                };
                let h = t[i + 1] - t[i];
                let u = (s - t[i]) / h;
                let (u2, u3) = (u * u, u * u * u);
                pts[i] * (2.0 * u3 - 3.0 * u2 + 1.0)
                    + tangent(i) * (h * (u3 - 2.0 * u2 + u))
                    + pts[i + 1] * (-2.0 * u3 + 3.0 * u2)
                    + tangent(i + 1) * (h * (u3 - u2))
            }
        }
    }

    /// Largest turning angle between consecutive sample segments.
    pub fn max_turning_angle(&self) -> f64 {
        let pts: Vec<Vec3> = self.samples.iter().map(v3).collect();
        pts.windows(3)
            .map(|w| crate::geom::angle_between(&(w[1] - w[0]), &(w[2] - w[1])))
            .fold(0.0, f64::max)
    }

    /// Arclength of the first point at distance `radius` from the node.
    pub fn arclength_at_distance(&self, radius: f64) -> Option<f64> {
        let o = self.origin();
        let steps = 256;
        let mut prev = 0.0;
        for k in 1..=steps {
            let s = self.length * k as f64 / steps as f64;
            if (self.point(s) - o).norm() >= radius {
                let (mut lo, mut hi) = (prev, s);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if (self.point(mid) - o).norm() >= radius {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = s;
        }
        None
    }
}

/// An inflated (non-planar) face: offset `amount * sin(πλ) * 4s(1-s)` along `dir`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bulge {
    pub dir: [f64; 3],
    pub amount: f64,
}

/// A face of a vertex figure: the surface between two of the figure's edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacePatch {
    pub id: FaceId,
    /// Indices into [`VertexFigure::edges`] of the two bounding edges.
    pub edges: [usize; 2],
    /// Supporting-plane normal for planar sectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulge: Option<Bulge>,
    pub cells: Vec<CellId>,
}

impl FacePatch {
    /// Point of the face for `s ∈ [0, 1]` (fraction of edge length) and `λ ∈ [0, 1]`
    /// (from the first bounding edge to the second).
    pub fn point(&self, figure: &VertexFigure, s: f64, lambda: f64) -> Vec3 {
        let a = &figure.edges[self.edges[0]];
        let b = &figure.edges[self.edges[1]];
        let mut p = a.point(s * a.length) * (1.0 - lambda) + b.point(s * b.length) * lambda;
        if let Some(bulge) = &self.bulge {
            p += v3(&bulge.dir) * (bulge.amount * (PI * lambda).sin() * 4.0 * s * (1.0 - s));
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexFigure {
    #[serde(default = "crate::format_version")]
    pub format_version: u32,
    pub node: NodeId,
    pub position: [f64; 3],
    pub edges: Vec<EdgeCurve>,
    pub faces: Vec<FacePatch>,
    pub cells: Vec<CellId>,
    /// Distance from the node to the nearest other node.
    pub node_spacing: f64,
    /// Lower bound on the distance from the node to any cell not containing it.
    pub clearance: f64,
}

impl VertexFigure {
    pub fn origin(&self) -> Vec3 {
        v3(&self.position)
    }

    pub fn edge_index(&self, id: EdgeId) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Edge indices of the figure belonging to `cell`.
    pub fn cell_edges(&self, cell: CellId) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .faces
            .iter()
            .filter(|f| f.cells.contains(&cell))
            .flat_map(|f| f.edges)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn has_curved_edges(&self) -> bool {
        self.edges.iter().any(|e| e.kind == EdgeKind::Curved)
    }

    /// Checks the figure invariants.
    pub fn validate(&self) -> Result<(), TilingError> {
        let o = self.origin();
        let bad = |m: String| Err(TilingError::InconsistentFigure(m));
        for e in &self.edges {
            if (e.origin() - o).norm() > 1e-9 {
                return bad(format!("edge {} does not start at the node", e.id));
            }
            if (e.dir().norm() - 1.0).abs() > 1e-9 {
                return bad(format!("edge {} direction is not a unit vector", e.id));
            }
            if e.kind == EdgeKind::Curved && e.max_turning_angle() > MAX_TURNING_ANGLE {
                return bad(format!("edge {} turns too sharply between samples", e.id));
            }
        }
        for f in &self.faces {
            if f.edges.iter().any(|&i| i >= self.edges.len()) || f.edges[0] == f.edges[1] {
                return bad(format!("face {} has invalid bounding edges", f.id));
            }
            if f.cells.iter().any(|c| !self.cells.contains(c)) {
                return bad(format!("face {} lists a cell outside the figure", f.id));
            }
        }
        Ok(())
    }
}

/// Extracts the vertex figure of an interior node.
pub fn vertex_figure(patch: &TilingPatch, node: NodeId) -> Result<VertexFigure, TilingError> {
    let pos = *patch
        .nodes
        .get(&node)
        .ok_or(TilingError::UnknownNode(node))?;
    let v = v3(&pos);
    let mut edges = Vec::new();
    for (&id, e) in &patch.edges {
        let Some(k) = e.ends.iter().position(|n| *n == node) else {
            continue;
        };
        let other = patch.position(e.ends[1 - k]);
        let curve = match &e.samples {
            None => EdgeCurve::straight(id, v, other),
            Some(s) => {
                let mut pts: Vec<Vec3> = s.iter().map(v3).collect();
                if k == 1 {
                    pts.reverse();
                }
                let dir = (pts[1] - pts[0]).normalize();
                EdgeCurve::curved(id, pts, dir)
            }
        };
        edges.push(curve);
    }
    let index: HashMap<EdgeId, usize> = edges.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
    let mut faces = Vec::new();
    let mut cells = BTreeSet::new();
    for (&fid, f) in &patch.faces {
        let at: Vec<usize> = f
            .edge_cycle
            .iter()
            .filter_map(|e| index.get(e).copied())
            .collect();
        if at.is_empty() {
            continue;
        }
        if f.cells.len() != 2 {
            return Err(TilingError::BoundaryNode(node));
        }
        if at.len() != 2 {
            return Err(TilingError::InvalidPatch(format!(
                "face {fid} meets node {node} in {} edges",
                at.len()
            )));
        }
        let curved = at.iter().any(|&i| edges[i].kind == EdgeKind::Curved);
        let normal = (!curved).then(|| {
            let pts: Vec<Vec3> = patch
                .face_nodes(fid)
                .iter()
                .map(|n| patch.position(*n))
                .collect();
            arr(&newell_normal(&pts).normalize())
        });
        cells.extend(f.cells.iter().copied());
        faces.push(FacePatch {
            id: fid,
            edges: [at[0], at[1]],
            normal,
            bulge: None,
            cells: f.cells.clone(),
        });
    }
    if faces.is_empty() {
        return Err(TilingError::BoundaryNode(node));
    }
    let node_spacing = patch
        .nodes
        .iter()
        .filter(|(id, _)| **id != node)
        .map(|(_, p)| (v3(p) - v).norm())
        .fold(f64::INFINITY, f64::min);
    let clearance = patch
        .cells
        .keys()
        .filter(|c| !cells.contains(c))
        .map(|&c| {
            let pts: Vec<Vec3> = patch
                .cell_nodes(c)
                .iter()
                .map(|n| patch.position(*n))
                .collect();
            let lo = pts
                .iter()
                .fold(Vec3::repeat(f64::INFINITY), |a, p| a.inf(p));
            let hi = pts
                .iter()
                .fold(Vec3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
            box_distance(&v, &lo, &hi)
        })
        .fold(f64::MAX, f64::min);
    Ok(VertexFigure {
        format_version: crate::FORMAT_VERSION,
        node,
        position: pos,
        edges,
        faces,
        cells: cells.into_iter().collect(),
        node_spacing,
        clearance,
    })
}

/// Vertex figures of all interior nodes, in node order.
pub fn interior_figures(patch: &TilingPatch) -> Result<Vec<(NodeId, VertexFigure)>, TilingError> {
    patch
        .interior_nodes()
        .into_iter()
        .map(|n| vertex_figure(patch, n).map(|f| (n, f)))
        .collect()
}

/// The subdivision cut by the vertex figure on the sphere of radius `epsilon`.
///
/// Graph vertices are the figure's edge ids, graph edges its faces (in figure order)
/// and graph faces its cells; the rotation at each vertex is the counter-clockwise
/// order (seen from outside) in which the faces leave the edge.
pub fn spherical_subdivision(
    figure: &VertexFigure,
    epsilon: f64,
) -> Result<PolyhedralGraph, TilingError> {
    if !(epsilon > 0.0) {
        return Err(TilingError::InvalidEpsilon(epsilon));
    }
    let shortest = figure
        .edges
        .iter()
        .map(|e| (e.point(e.length) - e.origin()).norm())
        .fold(f64::INFINITY, f64::min);
    let limit = shortest.min(figure.clearance);
    if epsilon >= limit {
        return Err(TilingError::EpsilonTooLarge {
            eps: epsilon,
            limit,
        });
    }
    let o = figure.origin();
    let mut sphere_dirs = Vec::with_capacity(figure.edges.len());
    let mut sphere_s = Vec::with_capacity(figure.edges.len());
    for e in &figure.edges {
        let s = e
            .arclength_at_distance(epsilon)
            .ok_or(TilingError::EpsilonTooLarge {
                eps: epsilon,
                limit,
            })?;
        sphere_dirs.push((e.point(s) - o).normalize());
        sphere_s.push(s / e.length);
    }
    // (vertex index, angle, face index)
    let mut around: Vec<Vec<(f64, usize)>> = vec![Vec::new(); figure.edges.len()];
    let delta = 1e-4;
    for (fi, f) in figure.faces.iter().enumerate() {
        for (side, &ei) in f.edges.iter().enumerate() {
            let lambda = if side == 0 { delta } else { 1.0 - delta };
            let q = (f.point(figure, sphere_s[ei], lambda) - o).normalize();
            let d = sphere_dirs[ei];
            let t = q - d * q.dot(&d);
            let e1 = perpendicular(&d);
            let e2 = d.cross(&e1);
            around[ei].push((t.dot(&e2).atan2(t.dot(&e1)), fi));
        }
    }
    let vertices: Vec<u32> = figure.edges.iter().map(|e| e.id).collect();
    let edges: Vec<[u32; 2]> = figure
        .faces
        .iter()
        .map(|f| [figure.edges[f.edges[0]].id, figure.edges[f.edges[1]].id])
        .collect();
    let mut rotation = BTreeMap::new();
    for (ei, list) in around.iter_mut().enumerate() {
        list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        rotation.insert(figure.edges[ei].id, list.iter().map(|x| x.1).collect());
    }
    let graph = PolyhedralGraph::from_rotation(vertices, edges, rotation)?;
    // every graph face must be the trace of exactly one cell
    let mut cell_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    for c in &figure.cells {
        let mut fs: Vec<usize> = (0..figure.faces.len())
            .filter(|&i| figure.faces[i].cells.contains(c))
            .collect();
        fs.sort_unstable();
        cell_sets.insert(fs);
    }
    let faces = graph.faces();
    if faces.len() != figure.cells.len() {
        return Err(TilingError::InconsistentFigure(format!(
            "{} spherical regions for {} cells",
            faces.len(),
            figure.cells.len()
        )));
    }
    for f in &faces {
        let mut fs: Vec<usize> = f.iter().map(|d| d.1).collect();
        fs.sort_unstable();
        if !cell_sets.contains(&fs) {
            return Err(TilingError::InconsistentFigure(
                "a spherical region is bounded by faces of different cells".into(),
            ));
        }
    }
    Ok(graph)
}

fn octant_cell(sx: bool, sy: bool, sz: bool) -> CellId {
    1 + sx as u32 + 2 * sy as u32 + 4 * sz as u32
}

/// Axis directions of a cube node; edge id `i + 1` has direction `AXES[i]`.
const AXES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
];

/// Faces of the cube-node figure: one per pair of perpendicular edges, cells are
/// octants `1 + [x>0] + 2[y>0] + 4[z>0]`.
#[allow(clippy::needless_range_loop)] // the indices are stored in the faces
fn cube_node_faces() -> Vec<FacePatch> {
    let mut faces = Vec::new();
    for a in 0..6 {
        for b in a + 1..6 {
            if b == a + 3 {
                continue;
            }
            let da = v3(&AXES[a]);
            let db = v3(&AXES[b]);
            let n = da.cross(&db);
            let axis = (0..3).find(|&i| n[i] != 0.0).unwrap();
            let s = da + db;
            let mut cells = Vec::new();
            for t in [false, true] {
                let mut sign = [s.x > 0.0, s.y > 0.0, s.z > 0.0];
                sign[axis] = t;
                cells.push(octant_cell(sign[0], sign[1], sign[2]));
            }
            cells.sort_unstable();
            faces.push(FacePatch {
                id: faces.len() as FaceId + 1,
                edges: [a, b],
                normal: Some(arr(&n)),
                bulge: None,
                cells,
            });
        }
    }
    faces
}

/// Cube node at the origin with unit edges; edge ids 1..6 are +x, +y, +z, -x, -y, -z.
pub fn cube_node_figure() -> VertexFigure {
    let o = Vec3::zeros();
    VertexFigure {
        format_version: crate::FORMAT_VERSION,
        node: 0,
        position: [0.0; 3],
        edges: (0..6)
            .map(|i| EdgeCurve::straight(i as EdgeId + 1, o, v3(&AXES[i])))
            .collect(),
        faces: cube_node_faces(),
        cells: (1..=8).collect(),
        node_spacing: 1.0,
        clearance: 1.0,
    }
}

/// Radius of the circular arcs of [`bent_cube_node`].
pub const BENT_ARC_RADIUS: f64 = 3.0;

/// Bend direction of arc `i` of [`bent_cube_node`]: the next axis with the same sign.
pub fn bent_arc_normal(i: usize) -> Vec3 {
    let u = v3(&AXES[i]);
    Vec3::new(u.z, u.x, u.y)
}

/// Exact point at arclength `s` on arc `i` of [`bent_cube_node`].
pub fn bent_arc_point(i: usize, s: f64) -> Vec3 {
    let u = v3(&AXES[i]);
    let w = bent_arc_normal(i);
    let r = BENT_ARC_RADIUS;
    u * (r * (s / r).sin()) + w * (r * (1.0 - (s / r).cos()))
}

/// The cube node with each edge replaced by a circular arc of radius
/// [`BENT_ARC_RADIUS`] and unit length, keeping the original half-tangents.
pub fn bent_cube_node() -> VertexFigure {
    let edges = (0..6)
        .map(|i| {
            let pts: Vec<Vec3> = (0..CURVED_EDGE_SAMPLES)
                .map(|k| bent_arc_point(i, k as f64 / (CURVED_EDGE_SAMPLES - 1) as f64))
                .collect();
            EdgeCurve::curved(i as EdgeId + 1, pts, v3(&AXES[i]))
        })
        .collect();
    let mut faces = cube_node_faces();
    for f in &mut faces {
        f.normal = None;
    }
    VertexFigure {
        format_version: crate::FORMAT_VERSION,
        node: 0,
        position: [0.0; 3],
        edges,
        faces,
        cells: (1..=8).collect(),
        node_spacing: 1.0,
        clearance: 1.0,
    }
}

/// Cube node whose (+x, +y) face is inflated into two blankets enclosing a new cell 9.
pub fn blanket_figure() -> VertexFigure {
    let mut fig = cube_node_figure();
    let idx = fig
        .faces
        .iter()
        .position(|f| f.edges == [0, 1])
        .expect("cube node has a +x/+y face");
    let base = fig.faces.remove(idx);
    let upper = octant_cell(true, true, true);
    let lower = octant_cell(true, true, false);
    let next_id = fig.faces.iter().map(|f| f.id).max().unwrap() + 1;
    for (k, (sign, cell)) in [(1.0, upper), (-1.0, lower)].into_iter().enumerate() {
        fig.faces.push(FacePatch {
            id: next_id + k as FaceId,
            edges: base.edges,
            normal: None,
            bulge: Some(Bulge {
                dir: [0.0, 0.0, sign],
                amount: 0.3,
            }),
            cells: vec![cell, 9],
        });
    }
    fig.cells.push(9);
    fig
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_counts(m: u32) -> (usize, usize, usize, usize) {
        let p = generate_cube_patch(m);
        (p.cells.len(), p.nodes.len(), p.edges.len(), p.faces.len())
    }

    #[test]
    fn cube_patch_counts_match_lattice_formulas() {
        for m in 1..=4u32 {
            let mu = m as usize;
            assert_eq!(
                cube_counts(m),
                (
                    mu.pow(3),
                    (mu + 1).pow(3),
                    3 * mu * (mu + 1).pow(2),
                    3 * mu * mu * (mu + 1)
                )
            );
            generate_cube_patch(m).validate().unwrap();
        }
    }

    #[test]
    fn extent_one_has_no_interior_node() {
        assert!(generate_cube_patch(1).interior_nodes().is_empty());
    }

    #[test]
    fn extent_two_interior_node() {
        let p = generate_cube_patch(2);
        let inner = p.interior_nodes();
        assert_eq!(inner.len(), 1);
        assert_eq!(p.nodes[&inner[0]], [1.0, 1.0, 1.0]);
        let fig = vertex_figure(&p, inner[0]).unwrap();
        assert_eq!(
            (fig.edges.len(), fig.faces.len(), fig.cells.len()),
            (6, 12, 8)
        );
    }

    #[test]
    fn corner_node_is_boundary() {
        let p = generate_cube_patch(2);
        let corner = p.node_at([0.0; 3], 1e-12).unwrap();
        assert_eq!(
            vertex_figure(&p, corner),
            Err(TilingError::BoundaryNode(corner))
        );
        assert_eq!(vertex_figure(&p, 9999), Err(TilingError::UnknownNode(9999)));
    }

    #[test]
    fn extent_four_has_inner_lattice() {
        let p = generate_cube_patch(4);
        let inner = p.interior_nodes();
        assert_eq!(inner.len(), 27);
        for n in inner {
            let q = p.nodes[&n];
            assert!(q.iter().all(|c| (1.0..=3.0).contains(c)));
        }
    }

    #[test]
    fn normality_of_unit_cubes() {
        for m in [1, 4] {
            let b = check_normality(&generate_cube_patch(m));
            assert!((b.r_in - 0.5).abs() < 1e-12);
            assert!((b.r_out - 3f64.sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn octahedral_vertex_polyhedron() {
        let p = generate_cube_patch(2);
        let fig = vertex_figure(&p, p.interior_nodes()[0]).unwrap();
        let g = spherical_subdivision(&fig, 0.25).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (6, 12, 8));
        assert!(g.is_simple() && g.is_three_connected());
        assert_eq!(
            spherical_subdivision(&fig, 1.5),
            Err(TilingError::EpsilonTooLarge {
                eps: 1.5,
                limit: 1.0
            })
        );
    }

    #[test]
    fn blanket_is_not_locally_polyhedral() {
        let g = spherical_subdivision(&blanket_figure(), 0.2).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (6, 13, 9));
        assert!(!g.is_simple());
        assert!(g.face_vertices().iter().any(|f| f.len() == 2));
    }

    #[test]
    fn bent_cube_node_is_locally_polyhedral() {
        let fig = bent_cube_node();
        fig.validate().unwrap();
        let g = spherical_subdivision(&fig, 0.25).unwrap();
        assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (6, 12, 8));
        assert!(g.is_polyhedral());
    }

    #[test]
    fn curved_edge_interpolation_tracks_the_arc() {
        let fig = bent_cube_node();
        for (i, e) in fig.edges.iter().enumerate() {
            for k in 0..=50 {
                let s = e.length * k as f64 / 50.0;
                // chord-length parametrisation is within 1e-5 of arclength here
                let exact = bent_arc_point(i, s);
                assert!((e.point(s) - exact).norm() < 1e-5, "edge {i} at {s}");
            }
        }
    }

    #[test]
    fn cube_cells_have_disjoint_interiors() {
        generate_cube_patch(3).check_disjoint_interiors().unwrap();
    }

    #[test]
    fn patch_json_field_names() {
        let p = generate_cube_patch(1);
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        for key in ["nodes", "edges", "faces", "cells", "bounds"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["bounds"].get("R_out").is_some());
        assert!(v["faces"]["0"].get("edge_cycle").is_some());
        let back: TilingPatch = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
