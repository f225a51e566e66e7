//! Combinatorial maps on the sphere and their two-colorings.
//!
//! A [`PolyhedralGraph`] is stored as a rotation system: every vertex carries the
//! cyclic order of its incident edges (counter-clockwise seen from outside the
//! sphere). Parallel edges are allowed so that non-polyhedral vertex figures can be
//! represented; loops are not. Faces are traced from the rotation system.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = u32;

/// Budget for the exhaustive Hamiltonian cycle search.
pub const HAMILTONIAN_MAX_VERTICES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid rotation system: {0}")]
    InvalidRotation(String),
    #[error("face {0:?} repeats a vertex or is a 2-gon and cannot be triangulated")]
    NotTriangulable(Vec<VertexId>),
    #[error("no two-coloring without monochromatic faces exists")]
    Infeasible,
    #[error("coloring does not assign vertex {0}")]
    MissingVertex(VertexId),
    #[error("invalid sign {1} for vertex {0}, expected +1 or -1")]
    InvalidSign(VertexId, i64),
    #[error("graph has {0} vertices, above the exhaustive search budget of {1}")]
    TooLarge(usize, usize),
    #[error("graph has parallel edges")]
    NotSimple,
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

impl GraphError {
    pub fn name(&self) -> &'static str {
        match self {
            GraphError::InvalidRotation(_) => "InvalidRotation",
            GraphError::NotTriangulable(_) => "NotTriangulable",
            GraphError::Infeasible => "Infeasible",
            GraphError::MissingVertex(_) => "MissingVertex",
            GraphError::InvalidSign(..) => "InvalidSign",
            GraphError::TooLarge(..) => "TooLarge",
            GraphError::NotSimple => "NotSimple",
            GraphError::UnknownFixture(_) => "UnknownFixture",
        }
    }
}

/// A dart: an edge leaving a vertex.
pub type Dart = (VertexId, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct PolyhedralGraph {
    vertices: Vec<VertexId>,
    edges: Vec<[VertexId; 2]>,
    rotation: BTreeMap<VertexId, Vec<usize>>,
    simple: bool,
    three_connected: bool,
}

impl PolyhedralGraph {
    /// Builds a map from an explicit rotation system given as edge indices.
    pub fn from_rotation(
        vertices: Vec<VertexId>,
        edges: Vec<[VertexId; 2]>,
        rotation: BTreeMap<VertexId, Vec<usize>>,
    ) -> Result<Self, GraphError> {
        let mut vertices = vertices;
        vertices.sort_unstable();
        vertices.dedup();
        if vertices.is_empty() {
            return Err(GraphError::InvalidRotation("no vertices".into()));
        }
        let vset: BTreeSet<VertexId> = vertices.iter().copied().collect();
        let mut seen = vec![0u8; edges.len()];
        for (e, [a, b]) in edges.iter().enumerate() {
            if a == b {
                return Err(GraphError::InvalidRotation(format!("edge {e} is a loop")));
            }
            if !vset.contains(a) || !vset.contains(b) {
                return Err(GraphError::InvalidRotation(format!(
                    "edge {e} has an unknown endpoint"
                )));
            }
        }
        for v in &vertices {
            let rot = rotation.get(v).ok_or_else(|| {
                GraphError::InvalidRotation(format!("vertex {v} has no rotation"))
            })?;
            for &e in rot {
                let ends = edges.get(e).ok_or_else(|| {
                    GraphError::InvalidRotation(format!("edge index {e} out of range"))
                })?;
                if !ends.contains(v) {
                    return Err(GraphError::InvalidRotation(format!(
                        "edge {e} listed at vertex {v} but not incident"
                    )));
                }
                seen[e] += 1;
            }
        }
        if rotation.keys().any(|v| !vset.contains(v)) {
            return Err(GraphError::InvalidRotation(
                "rotation for unknown vertex".into(),
            ));
        }
        if let Some(e) = seen.iter().position(|&c| c != 2) {
            return Err(GraphError::InvalidRotation(format!(
                "edge {e} appears {} times in the rotation system",
                seen[e]
            )));
        }
        let mut g = PolyhedralGraph {
            vertices,
            edges,
            rotation,
            simple: false,
            three_connected: false,
        };
        if !g.is_connected_without(&[]) {
            return Err(GraphError::InvalidRotation("graph is disconnected".into()));
        }
        let euler = g.num_vertices() as i64 - g.num_edges() as i64 + g.num_faces() as i64;
        if euler != 2 {
            return Err(GraphError::InvalidRotation(format!(
                "not a spherical map: V - E + F = {euler}"
            )));
        }
        g.simple = g.compute_simple();
        g.three_connected = g.simple && g.compute_three_connected();
        Ok(g)
    }

    /// Builds a map from oriented face walks; each walk is a cyclic list of darts.
    ///
    /// Consecutive darts `(u, e)`, `(v, e')` in a walk define `e'` as the successor
    /// of `e` in the rotation at `v`.
    pub fn from_face_walks(
        vertices: Vec<VertexId>,
        edges: Vec<[VertexId; 2]>,
        walks: &[Vec<Dart>],
    ) -> Result<Self, GraphError> {
        let mut succ: BTreeMap<VertexId, BTreeMap<usize, usize>> = BTreeMap::new();
        for walk in walks {
            for i in 0..walk.len() {
                let (u, e) = walk[i];
                let (v, e_next) = walk[(i + 1) % walk.len()];
                let [a, b] = *edges.get(e).ok_or_else(|| {
                    GraphError::InvalidRotation(format!("edge index {e} out of range"))
                })?;
                let head = if a == u { b } else { a };
                if head != v || !(a == u || b == u) {
                    return Err(GraphError::InvalidRotation(format!(
                        "walk step {u} -[{e}]-> {v} is not an edge"
                    )));
                }
                if succ.entry(v).or_default().insert(e, e_next).is_some() {
                    return Err(GraphError::InvalidRotation(format!(
                        "edge {e} traversed twice into vertex {v}"
                    )));
                }
            }
        }
        let mut rotation = BTreeMap::new();
        for v in &vertices {
            let s = succ
                .get(v)
                .ok_or_else(|| GraphError::InvalidRotation(format!("vertex {v} is on no face")))?;
            let start = *s.keys().next().unwrap();
            let mut cyc = vec![start];
            let mut cur = s[&start];
            while cur != start {
                if cyc.len() > s.len() {
                    return Err(GraphError::InvalidRotation(format!(
                        "rotation at {v} is not a cycle"
                    )));
                }
                cyc.push(cur);
                cur = *s.get(&cur).ok_or_else(|| {
                    GraphError::InvalidRotation(format!("rotation at {v} is not a cycle"))
                })?;
            }
            if cyc.len() != s.len() {
                return Err(GraphError::InvalidRotation(format!(
                    "vertex {v} is not a disc neighbourhood"
                )));
            }
            rotation.insert(*v, cyc);
        }
        Self::from_rotation(vertices, edges, rotation)
    }

    /// Builds a simple map from oriented vertex cycles (faces counter-clockwise from outside).
    pub fn from_faces(faces: &[Vec<VertexId>]) -> Result<Self, GraphError> {
        let mut vertices: Vec<VertexId> = faces.iter().flatten().copied().collect();
        vertices.sort_unstable();
        vertices.dedup();
        let mut index: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut walks = Vec::with_capacity(faces.len());
        for f in faces {
            let mut walk = Vec::with_capacity(f.len());
            for i in 0..f.len() {
                let (a, b) = (f[i], f[(i + 1) % f.len()]);
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                walk.push((a, e));
            }
            walks.push(walk);
        }
        Self::from_face_walks(vertices, edges, &walks)
    }

    /// Builds a map from per-vertex cyclic neighbour lists.
    ///
    /// Parallel edges are matched by reversing the cyclic run of repeated neighbours,
    /// which is exact whenever parallel edges are consecutive around both endpoints.
    pub fn from_neighbor_rotation(
        rotation: &BTreeMap<VertexId, Vec<VertexId>>,
    ) -> Result<Self, GraphError> {
        let vertices: Vec<VertexId> = rotation.keys().copied().collect();
        // positions of each neighbour in canonical cyclic order
        let occurrences = |u: VertexId, v: VertexId| -> Vec<usize> {
            let list = &rotation[&u];
            let n = list.len();
            let start = (0..n)
                .find(|&i| list[i] != v && list[(i + 1) % n] == v)
                .map(|i| (i + 1) % n)
                .unwrap_or(0);
            (0..n)
                .map(|k| (start + k) % n)
                .filter(|&i| list[i] == v)
                .collect()
        };
        let mut slot: BTreeMap<(VertexId, usize), usize> = BTreeMap::new();
        let mut edges = Vec::new();
        for (&u, list) in rotation {
            let mut nbrs: Vec<VertexId> = list.clone();
            nbrs.sort_unstable();
            nbrs.dedup();
            for v in nbrs {
                if v <= u {
                    continue;
                }
                if !rotation.contains_key(&v) {
                    return Err(GraphError::InvalidRotation(format!(
                        "unknown neighbour {v}"
                    )));
                }
                let pu = occurrences(u, v);
                let pv = occurrences(v, u);
                if pu.len() != pv.len() {
                    return Err(GraphError::InvalidRotation(format!(
                        "asymmetric adjacency between {u} and {v}"
                    )));
                }
                let m = pu.len();
                for j in 0..m {
                    edges.push([u, v]);
                    let e = edges.len() - 1;
                    slot.insert((u, pu[j]), e);
                    slot.insert((v, pv[m - 1 - j]), e);
                }
            }
        }
        let mut rot = BTreeMap::new();
        for (&u, list) in rotation {
            let mut r = Vec::with_capacity(list.len());
            for i in 0..list.len() {
                let e = slot.get(&(u, i)).ok_or_else(|| {
                    GraphError::InvalidRotation(format!("neighbour list of {u} is inconsistent"))
                })?;
                r.push(*e);
            }
            rot.insert(u, r);
        }
        Self::from_rotation(vertices, edges, rot)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[VertexId; 2]] {
        &self.edges
    }

    pub fn rotation(&self, v: VertexId) -> &[usize] {
        &self.rotation[&v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces().len()
    }

    pub fn is_simple(&self) -> bool {
        self.simple
    }

    pub fn is_three_connected(&self) -> bool {
        self.three_connected
    }

    /// Simple and 3-connected: the edge graph of a convex polyhedron.
    pub fn is_polyhedral(&self) -> bool {
        self.simple && self.three_connected
    }

    fn other(&self, e: usize, v: VertexId) -> VertexId {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Neighbours of `v` in rotation order, with multiplicity.
    pub fn neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.rotation[&v]
            .iter()
            .map(|&e| self.other(e, v))
            .collect()
    }

    /// Faces as cyclic dart sequences, in a deterministic order.
    pub fn faces(&self) -> Vec<Vec<Dart>> {
        let mut pos: HashMap<Dart, usize> = HashMap::new();
        for (&v, rot) in &self.rotation {
            for (i, &e) in rot.iter().enumerate() {
                pos.insert((v, e), i);
            }
        }
        let mut visited: BTreeSet<Dart> = BTreeSet::new();
        let mut faces = Vec::new();
        for (&v, rot) in &self.rotation {
            for &e in rot {
                if visited.contains(&(v, e)) {
                    continue;
                }
                let mut face = Vec::new();
                let mut d = (v, e);
                while visited.insert(d) {
                    face.push(d);
                    let head = self.other(d.1, d.0);
                    let r = &self.rotation[&head];
                    let i = pos[&(head, d.1)];
                    d = (head, r[(i + 1) % r.len()]);
                }
                faces.push(face);
            }
        }
        faces
    }

    /// Faces as cyclic vertex lists.
    pub fn face_vertices(&self) -> Vec<Vec<VertexId>> {
        self.faces()
            .into_iter()
            .map(|f| f.into_iter().map(|(v, _)| v).collect())
            .collect()
    }

    fn compute_simple(&self) -> bool {
        let mut pairs = BTreeSet::new();
        self.edges
            .iter()
            .all(|&[a, b]| pairs.insert((a.min(b), a.max(b))))
    }

    fn is_connected_without(&self, removed: &[VertexId]) -> bool {
        let alive: Vec<VertexId> = self
            .vertices
            .iter()
            .copied()
            .filter(|v| !removed.contains(v))
            .collect();
        let Some(&start) = alive.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !removed.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == alive.len()
    }

    fn compute_three_connected(&self) -> bool {
        let n = self.vertices.len();
        if n < 4 {
            return false;
        }
        for i in 0..n {
            if !self.is_connected_without(&[self.vertices[i]]) {
                return false;
            }
            for j in i + 1..n {
                if !self.is_connected_without(&[self.vertices[i], self.vertices[j]]) {
                    return false;
                }
            }
        }
        true
    }

    /// The planar dual. Dual vertex `i + 1` is face `i` of [`PolyhedralGraph::faces`].
    pub fn dual(&self) -> Result<PolyhedralGraph, GraphError> {
        let faces = self.faces();
        let mut face_of: HashMap<Dart, VertexId> = HashMap::new();
        for (i, f) in faces.iter().enumerate() {
            for &d in f {
                face_of.insert(d, i as VertexId + 1);
            }
        }
        let edges: Vec<[VertexId; 2]> = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| [face_of[&(a, e)], face_of[&(b, e)]])
            .collect();
        let mut rotation = BTreeMap::new();
        for (i, f) in faces.iter().enumerate() {
            rotation.insert(i as VertexId + 1, f.iter().map(|&(_, e)| e).collect());
        }
        let vertices = (1..=faces.len() as VertexId).collect();
        PolyhedralGraph::from_rotation(vertices, edges, rotation)
    }

    /// Builds the edge graph of a convex polyhedron from vertex positions and
    /// unoriented face cycles; faces are oriented outward using the centroid.
    pub fn from_convex_faces(
        positions: &BTreeMap<VertexId, [f64; 3]>,
        faces: &[Vec<VertexId>],
    ) -> Result<Self, GraphError> {
        let p = |v: &VertexId| {
            let a = positions[v];
            Vector3::new(a[0], a[1], a[2])
        };
        let centroid: Vector3<f64> =
            positions.keys().map(p).sum::<Vector3<f64>>() / positions.len() as f64;
        let oriented: Vec<Vec<VertexId>> = faces
            .iter()
            .map(|f| {
                let pts: Vec<Vector3<f64>> = f.iter().map(p).collect();
                let n = crate::geom::newell_normal(&pts);
                let c: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
                if n.dot(&(c - centroid)) < 0.0 {
                    f.iter().rev().copied().collect()
                } else {
                    f.clone()
                }
            })
            .collect();
        Self::from_faces(&oriented)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFlags {
    simple: bool,
    three_connected: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    #[serde(default = "crate::format_version")]
    format_version: u32,
    vertices: Vec<VertexId>,
    rotation: BTreeMap<VertexId, Vec<VertexId>>,
    flags: GraphFlags,
}

impl From<PolyhedralGraph> for GraphJson {
    fn from(g: PolyhedralGraph) -> Self {
        let rotation = g.vertices.iter().map(|&v| (v, g.neighbors(v))).collect();
        GraphJson {
            format_version: crate::FORMAT_VERSION,
            vertices: g.vertices.clone(),
            rotation,
            flags: GraphFlags {
                simple: g.simple,
                three_connected: g.three_connected,
            },
        }
    }
}

impl TryFrom<GraphJson> for PolyhedralGraph {
    type Error = GraphError;

    fn try_from(j: GraphJson) -> Result<Self, GraphError> {
        let listed: BTreeSet<VertexId> = j.vertices.iter().copied().collect();
        let rotated: BTreeSet<VertexId> = j.rotation.keys().copied().collect();
        if listed != rotated {
            return Err(GraphError::InvalidRotation(
                "vertex list and rotation keys differ".into(),
            ));
        }
        // flags are derived data; recomputed rather than trusted
        PolyhedralGraph::from_neighbor_rotation(&j.rotation)
    }
}

/// A ±1 sign per graph vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ColoringJson", into = "ColoringJson")]
pub struct TwoColoring {
    signs: BTreeMap<VertexId, i8>,
}

#[derive(Serialize, Deserialize)]
struct ColoringJson {
    #[serde(default = "crate::format_version")]
    format_version: u32,
    signs: BTreeMap<VertexId, i64>,
}

impl From<TwoColoring> for ColoringJson {
    fn from(c: TwoColoring) -> Self {
        ColoringJson {
            format_version: crate::FORMAT_VERSION,
            signs: c.signs.into_iter().map(|(k, v)| (k, v as i64)).collect(),
        }
    }
}

impl TryFrom<ColoringJson> for TwoColoring {
    type Error = GraphError;

    fn try_from(j: ColoringJson) -> Result<Self, GraphError> {
        TwoColoring::new(j.signs)
    }
}

impl TwoColoring {
    pub fn new<I, S>(signs: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (VertexId, S)>,
        S: Into<i64>,
    {
        let mut out = BTreeMap::new();
        for (v, s) in signs {
            let s = s.into();
            if s != 1 && s != -1 {
                return Err(GraphError::InvalidSign(v, s));
            }
            out.insert(v, s as i8);
        }
        Ok(TwoColoring { signs: out })
    }

    /// Every vertex of `graph` gets `sign`.
    pub fn constant(graph: &PolyhedralGraph, sign: i8) -> Self {
        TwoColoring {
            signs: graph.vertices().iter().map(|&v| (v, sign)).collect(),
        }
    }

    pub fn sign(&self, v: VertexId) -> Option<i8> {
        self.signs.get(&v).copied()
    }

    pub fn signs(&self) -> &BTreeMap<VertexId, i8> {
        &self.signs
    }

    pub fn negated(&self) -> Self {
        TwoColoring {
            signs: self.signs.iter().map(|(&v, &s)| (v, -s)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColoringReport {
    /// No face of the graph is monochromatic.
    pub valid: bool,
    /// Edge-connectivity of the subgraphs induced by the `+1` and `-1` classes.
    pub class_connected: (bool, bool),
    /// Sizes of the `+1` and `-1` classes.
    pub class_sizes: (usize, usize),
    /// Indices (into [`PolyhedralGraph::faces`]) of monochromatic faces.
    pub monochromatic_faces: Vec<usize>,
}

/// Triangulates every face by a fan of diagonals from its smallest vertex id.
///
/// Original edges keep their indices; diagonals are appended.
pub fn triangulate(graph: &PolyhedralGraph) -> Result<PolyhedralGraph, GraphError> {
    let mut edges = graph.edges.clone();
    let mut walks: Vec<Vec<Dart>> = Vec::new();
    for face in graph.faces() {
        let verts: Vec<VertexId> = face.iter().map(|d| d.0).collect();
        let distinct: BTreeSet<VertexId> = verts.iter().copied().collect();
        if verts.len() < 3 || distinct.len() != verts.len() {
            return Err(GraphError::NotTriangulable(verts));
        }
        if face.len() == 3 {
            walks.push(face);
            continue;
        }
        let k = face.len();
        let start = (0..k).min_by_key(|&i| verts[i]).unwrap();
        let f: Vec<Dart> = (0..k).map(|i| face[(start + i) % k]).collect();
        let w0 = f[0].0;
        // diagonal j joins w0 to f[j].0, j = 2..k-2
        let mut diag = vec![usize::MAX; k];
        for j in 2..=k - 2 {
            edges.push([w0, f[j].0]);
            diag[j] = edges.len() - 1;
        }
        for j in 1..=k - 2 {
            let into = if j == 1 { f[0].1 } else { diag[j] };
            let out = if j + 1 == k - 1 {
                f[k - 1].1
            } else {
                diag[j + 1]
            };
            walks.push(vec![(w0, into), (f[j].0, f[j].1), (f[j + 1].0, out)]);
        }
    }
    PolyhedralGraph::from_face_walks(graph.vertices.clone(), edges, &walks)
}

fn monochromatic(face: &[VertexId], sign: &BTreeMap<VertexId, i8>) -> bool {
    let s0 = sign[&face[0]];
    face.iter().all(|v| sign[v] == s0)
}

/// Finds a two-coloring with no monochromatic face.
///
/// The search runs over the triangulation when one exists (a coloring without
/// monochromatic triangles has no monochromatic original face), otherwise over the
/// original faces. Vertices are assigned in ascending id order, `+1` before `-1`.
pub fn two_color(graph: &PolyhedralGraph) -> Result<TwoColoring, GraphError> {
    let constraints: Vec<Vec<VertexId>> = match triangulate(graph) {
        Ok(t) => t.face_vertices(),
        Err(GraphError::NotTriangulable(_)) => graph.face_vertices(),
        Err(e) => return Err(e),
    };
    let order = graph.vertices().to_vec();
    let rank: HashMap<VertexId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // constraints checked once their last-assigned vertex is set
    let mut due: Vec<Vec<Vec<usize>>> = vec![Vec::new(); order.len()];
    for c in &constraints {
        let idx: Vec<usize> = c.iter().map(|v| rank[v]).collect();
        let last = *idx.iter().max().unwrap();
        due[last].push(idx);
    }
    let mut assign: Vec<i8> = vec![0; order.len()];

    fn search(i: usize, assign: &mut Vec<i8>, due: &[Vec<Vec<usize>>]) -> bool {
        if i == assign.len() {
            return true;
        }
        for s in [1i8, -1] {
            assign[i] = s;
            let ok = due[i].iter().all(|c| c.iter().any(|&j| assign[j] != s));
            if ok && search(i + 1, assign, due) {
                return true;
            }
        }
        assign[i] = 0;
        false
    }

    if !search(0, &mut assign, &due) {
        return Err(GraphError::Infeasible);
    }
    let coloring = TwoColoring {
        signs: order.iter().copied().zip(assign).collect(),
    };
    debug_assert!(validate_coloring(graph, &coloring)
        .map(|r| r.valid)
        .unwrap_or(false));
    Ok(coloring)
}

pub fn validate_coloring(
    graph: &PolyhedralGraph,
    coloring: &TwoColoring,
) -> Result<ColoringReport, GraphError> {
    for &v in graph.vertices() {
        if coloring.sign(v).is_none() {
            return Err(GraphError::MissingVertex(v));
        }
    }
    let monochromatic_faces: Vec<usize> = graph
        .face_vertices()
        .iter()
        .enumerate()
        .filter(|(_, f)| monochromatic(f, &coloring.signs))
        .map(|(i, _)| i)
        .collect();
    let class = |s: i8| -> Vec<VertexId> {
        graph
            .vertices()
            .iter()
            .copied()
            .filter(|v| coloring.signs[v] == s)
            .collect()
    };
    let connected = |members: &[VertexId], s: i8| -> bool {
        let Some(&start) = members.first() else {
            return false;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in graph.neighbors(v) {
                if coloring.signs[&w] == s && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == members.len()
    };
    let plus = class(1);
    let minus = class(-1);
    Ok(ColoringReport {
        valid: monochromatic_faces.is_empty(),
        class_connected: (connected(&plus, 1), connected(&minus, -1)),
        class_sizes: (plus.len(), minus.len()),
        monochromatic_faces,
    })
}

/// Finds a Hamiltonian cycle by exhaustive depth-first search.
pub fn find_hamiltonian_cycle(
    graph: &PolyhedralGraph,
) -> Result<Option<Vec<VertexId>>, GraphError> {
    let n = graph.num_vertices();
    if n > HAMILTONIAN_MAX_VERTICES {
        return Err(GraphError::TooLarge(n, HAMILTONIAN_MAX_VERTICES));
    }
    if !graph.is_simple() {
        return Err(GraphError::NotSimple);
    }
    let ids = graph.vertices();
    let rank: HashMap<VertexId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let adj: Vec<u32> = ids
        .iter()
        .map(|&v| {
            graph
                .neighbors(v)
                .iter()
                .fold(0u32, |m, w| m | (1 << rank[w]))
        })
        .collect();
    if n < 3 {
        return Ok(None);
    }

    fn dfs(v: usize, visited: u32, path: &mut Vec<usize>, adj: &[u32], n: usize) -> bool {
        if path.len() == n {
            return adj[v] & 1 != 0;
        }
        let mut cand = adj[v] & !visited;
        while cand != 0 {
            let w = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            // an unvisited vertex with no unvisited or start neighbour left is a dead end
            let next_visited = visited | (1 << w);
            let stranded = (0..n).any(|u| {
                next_visited & (1 << u) == 0 && (adj[u] & (!next_visited | 1 | (1 << w))) == 0
            });
            if stranded {
                continue;
            }
            path.push(w);
            if dfs(w, next_visited, path, adj, n) {
                return true;
            }
            path.pop();
        }
        false
    }

    let mut path = vec![0usize];
    if dfs(0, 1, &mut path, &adj, n) {
        Ok(Some(path.into_iter().map(|i| ids[i]).collect()))
    } else {
        Ok(None)
    }
}

pub fn hamiltonian_cycle_exists(graph: &PolyhedralGraph) -> Result<bool, GraphError> {
    Ok(find_hamiltonian_cycle(graph)?.is_some())
}

/// Names accepted by [`fixture_graph`].
pub const FIXTURE_NAMES: [&str; 6] = [
    "octahedron",
    "cube",
    "herschel",
    "herschel_dual",
    "doubled_triangle",
    "blanket_node",
];

const HERSCHEL_DUAL_JSON: &str = include_str!("../fixtures/herschel_dual.json");

/// Named example graphs.
///
/// Vertex numbering:
/// - `octahedron`: 1 = +x, 2 = +y, 3 = +z, 4 = -x, 5 = -y, 6 = -z (antipodal classes {1,4}, {2,5}, {3,6}).
/// - `cube`: vertex `1 + [x>0] + 2[y>0] + 4[z>0]` for corners of `[-1,1]^3`.
/// - `herschel_dual`: vertex `i + 1` is the midpoint of edge `i` of a triangular prism
///   (see `fixtures/herschel_dual.json`).
/// - `herschel`: the planar dual of `herschel_dual`; vertex `i + 1` is its face `i`.
/// - `doubled_triangle`: A = 1, B = 2, C = 3, each pair joined by two parallel edges.
/// - `blanket_node`: spherical subdivision of the inflated-face cube node; vertex ids are
///   the figure's edge ids.
pub fn fixture_graph(name: &str) -> Result<PolyhedralGraph, GraphError> {
    match name {
        "octahedron" => {
            let positions: BTreeMap<VertexId, [f64; 3]> = [
                (1, [1.0, 0.0, 0.0]),
                (2, [0.0, 1.0, 0.0]),
                (3, [0.0, 0.0, 1.0]),
                (4, [-1.0, 0.0, 0.0]),
                (5, [0.0, -1.0, 0.0]),
                (6, [0.0, 0.0, -1.0]),
            ]
            .into_iter()
            .collect();
            let mut faces = Vec::new();
            for x in [1, 4] {
                for y in [2, 5] {
                    for z in [3, 6] {
                        faces.push(vec![x, y, z]);
                    }
                }
            }
            PolyhedralGraph::from_convex_faces(&positions, &faces)
        }
        "cube" => {
            let id = |x: u32, y: u32, z: u32| 1 + x + 2 * y + 4 * z;
            let positions: BTreeMap<VertexId, [f64; 3]> = (0..8u32)
                .map(|b| {
                    let (x, y, z) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
                    let c = |t: u32| if t == 1 { 1.0 } else { -1.0 };
                    (id(x, y, z), [c(x), c(y), c(z)])
                })
                .collect();
            let faces = vec![
                vec![id(0, 0, 0), id(0, 1, 0), id(0, 1, 1), id(0, 0, 1)],
                vec![id(1, 0, 0), id(1, 1, 0), id(1, 1, 1), id(1, 0, 1)],
                vec![id(0, 0, 0), id(1, 0, 0), id(1, 0, 1), id(0, 0, 1)],
                vec![id(0, 1, 0), id(1, 1, 0), id(1, 1, 1), id(0, 1, 1)],
                vec![id(0, 0, 0), id(1, 0, 0), id(1, 1, 0), id(0, 1, 0)],
                vec![id(0, 0, 1), id(1, 0, 1), id(1, 1, 1), id(0, 1, 1)],
            ];
            PolyhedralGraph::from_convex_faces(&positions, &faces)
        }
        "herschel_dual" => serde_json::from_str(HERSCHEL_DUAL_JSON)
            .map_err(|e| GraphError::InvalidRotation(format!("herschel_dual golden file: {e}"))),
        "herschel" => fixture_graph("herschel_dual")?.dual(),
        "doubled_triangle" => {
            // edges: AB north/south, BC north/south, CA north/south
            let edges = vec![[1, 2], [1, 2], [2, 3], [2, 3], [3, 1], [3, 1]];
            let (abn, abs, bcn, bcs, can, cas) = (0, 1, 2, 3, 4, 5);
            let walks = vec![
                vec![(1, abn), (2, bcn), (3, can)],
                vec![(1, cas), (3, bcs), (2, abs)],
                vec![(1, abs), (2, abn)],
                vec![(2, bcs), (3, bcn)],
                vec![(3, cas), (1, can)],
            ];
            PolyhedralGraph::from_face_walks(vec![1, 2, 3], edges, &walks)
        }
        "blanket_node" => {
            let fig = crate::tiling::blanket_figure();
            crate::tiling::spherical_subdivision(&fig, 0.2)
                .map_err(|e| GraphError::InvalidRotation(e.to_string()))
        }
        other => Err(GraphError::UnknownFixture(other.to_string())),
    }
}

/// Coloring of the `cube` fixture with both color classes disconnected: the two
/// inscribed tetrahedra, `+1` on corners with an even number of positive coordinates.
pub fn cube_disconnected_coloring() -> TwoColoring {
    let signs = (0..8u32).map(|b| {
        let ones = b.count_ones();
        let s: i64 = if ones % 2 == 0 { 1 } else { -1 };
        (1 + b, s)
    });
    TwoColoring::new(signs).expect("signs are ±1")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(g: &PolyhedralGraph) -> (usize, usize, usize) {
        (g.num_vertices(), g.num_edges(), g.num_faces())
    }

    #[test]
    fn octahedron_counts_and_flags() {
        let g = fixture_graph("octahedron").unwrap();
        assert_eq!(counts(&g), (6, 12, 8));
        assert!(g.is_simple() && g.is_three_connected());
    }

    #[test]
    fn cube_triangulates_to_eighteen_edges() {
        let g = fixture_graph("cube").unwrap();
        assert_eq!(counts(&g), (8, 12, 6));
        let t = triangulate(&g).unwrap();
        assert_eq!(counts(&t), (8, 18, 12));
        assert!(t.face_vertices().iter().all(|f| f.len() == 3));
        assert_eq!(&t.edges()[..12], g.edges());
    }

    #[test]
    fn fan_starts_at_smallest_id() {
        let g = fixture_graph("cube").unwrap();
        let t = triangulate(&g).unwrap();
        for face in g.face_vertices() {
            let min = *face.iter().min().unwrap();
            let diagonals: Vec<_> = t.edges()[12..]
                .iter()
                .filter(|[a, b]| face.contains(a) && face.contains(b))
                .collect();
            assert_eq!(diagonals.len(), 1);
            assert!(diagonals[0].contains(&min));
        }
    }

    #[test]
    fn octahedron_unchanged_by_triangulation() {
        let g = fixture_graph("octahedron").unwrap();
        let t = triangulate(&g).unwrap();
        assert_eq!(counts(&t), (6, 12, 8));
    }

    #[test]
    fn doubled_triangle_is_infeasible() {
        let g = fixture_graph("doubled_triangle").unwrap();
        assert!(!g.is_simple());
        assert_eq!(counts(&g), (3, 6, 5));
        assert!(matches!(
            triangulate(&g),
            Err(GraphError::NotTriangulable(_))
        ));
        assert_eq!(two_color(&g), Err(GraphError::Infeasible));
    }

    #[test]
    fn constant_coloring_is_invalid() {
        let g = fixture_graph("octahedron").unwrap();
        let r = validate_coloring(&g, &TwoColoring::constant(&g, 1)).unwrap();
        assert!(!r.valid);
        assert_eq!(r.monochromatic_faces.len(), 8);
    }

    #[test]
    fn antipodal_class_coloring_on_octahedron() {
        let g = fixture_graph("octahedron").unwrap();
        let c = TwoColoring::new((1..=6u32).map(|v| (v, if v == 3 || v == 6 { -1i64 } else { 1 })))
            .unwrap();
        let r = validate_coloring(&g, &c).unwrap();
        assert!(r.valid);
        assert_eq!(r.class_sizes, (4, 2));
        // every face has exactly one vertex of {3, 6}
        for f in g.face_vertices() {
            assert_eq!(f.iter().filter(|v| **v == 3 || **v == 6).count(), 1);
        }
    }

    #[test]
    fn missing_vertex_is_reported() {
        let g = fixture_graph("octahedron").unwrap();
        let c = TwoColoring::new([(1u32, 1i64)]).unwrap();
        assert_eq!(validate_coloring(&g, &c), Err(GraphError::MissingVertex(2)));
    }

    #[test]
    fn invalid_sign_rejected() {
        assert_eq!(
            TwoColoring::new([(1u32, 0i64)]),
            Err(GraphError::InvalidSign(1, 0))
        );
    }

    #[test]
    fn cube_tetrahedral_coloring_has_disconnected_classes() {
        let g = fixture_graph("cube").unwrap();
        let r = validate_coloring(&g, &cube_disconnected_coloring()).unwrap();
        assert!(r.valid);
        assert_eq!(r.class_connected, (false, false));
        assert_eq!(r.class_sizes, (4, 4));
    }

    #[test]
    fn hamiltonian_small_cases() {
        let tri = PolyhedralGraph::from_faces(&[vec![1, 2, 3], vec![1, 3, 2]]).unwrap();
        assert!(hamiltonian_cycle_exists(&tri).unwrap());
        let oct = fixture_graph("octahedron").unwrap();
        let cyc = find_hamiltonian_cycle(&oct).unwrap().unwrap();
        assert_eq!(cyc.len(), 6);
        for i in 0..6 {
            let (a, b) = (cyc[i], cyc[(i + 1) % 6]);
            assert!(oct.neighbors(a).contains(&b));
        }
    }

    #[test]
    fn unknown_fixture() {
        assert!(matches!(
            fixture_graph("dodecahedron"),
            Err(GraphError::UnknownFixture(_))
        ));
    }

    #[test]
    fn json_roundtrip_preserves_parallel_edges() {
        for name in ["doubled_triangle", "octahedron", "cube"] {
            let g = fixture_graph(name).unwrap();
            let s = serde_json::to_string(&g).unwrap();
            let back: PolyhedralGraph = serde_json::from_str(&s).unwrap();
            assert_eq!(counts(&back), counts(&g));
            let mut fa: Vec<usize> = g.face_vertices().iter().map(Vec::len).collect();
            let mut fb: Vec<usize> = back.face_vertices().iter().map(Vec::len).collect();
            fa.sort_unstable();
            fb.sort_unstable();
            assert_eq!(fa, fb);
        }
    }
}
