//! Spike accounting on finite patches of planar tilings.
//!
//! A patch is a set of polygonal cells plus the unbounded face `C₀`. Every
//! (cell, boundary node) pair carries a mark: a *spike*, or *smooth* when a smooth
//! boundary curve of the cell passes through the node. Counting marks with Euler's
//! formula gives, for `k` bounded cells,
//!
//! ```text
//! average spikes per cell  ≥  2 − (s₀ + 2) / k
//! ```
//!
//! where `s₀` counts the spikes of the outer face. Marks are combinatorial input;
//! they are validated, never inferred from angles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PlanarId = u32;

/// Cell id reserved for the unbounded face.
pub const OUTER: PlanarId = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanarError {
    #[error("invalid patch ({invariant}): {detail}")]
    InvalidPatch {
        invariant: &'static str,
        detail: String,
    },
    #[error("growth study needs at least 3 increasing radii")]
    BadRadii,
}

impl PlanarError {
    pub fn name(&self) -> &'static str {
        match self {
            PlanarError::InvalidPatch { .. } => "InvalidPatch",
            PlanarError::BadRadii => "BadRadii",
        }
    }
}

fn invalid(invariant: &'static str, detail: String) -> PlanarError {
    PlanarError::InvalidPatch { invariant, detail }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkKind {
    Spike,
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mark {
    pub cell: PlanarId,
    pub node: PlanarId,
    pub kind: MarkKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarEdge {
    pub ends: [PlanarId; 2],
    /// The two faces on either side; [`OUTER`] for the unbounded face.
    pub cells: [PlanarId; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarCell {
    /// Boundary nodes in cyclic order.
    pub vertices: Vec<PlanarId>,
}

/// The unbounded face: its boundary nodes in cyclic order. Every one of them is a
/// spike of `C₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterFace {
    pub vertices: Vec<PlanarId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarPatch {
    #[serde(default = "crate::format_version")]
    pub format_version: u32,
    pub nodes: BTreeMap<PlanarId, [f64; 2]>,
    pub edges: BTreeMap<PlanarId, PlanarEdge>,
    pub cells: BTreeMap<PlanarId, PlanarCell>,
    pub marks: Vec<Mark>,
    pub outer: OuterFace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountingReport {
    pub n: usize,
    pub e: usize,
    pub k: usize,
    pub s_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub s0: usize,
    pub m0: usize,
    pub euler_check: bool,
    pub identity_check: bool,
    pub ineq_2n: bool,
    pub eq_2e: bool,
    pub avg: f64,
    pub bound: f64,
    pub bound_holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Square,
    SmoothedSquare,
    Brick,
}

impl GridKind {
    /// Circumradius of one cell of the pattern.
    pub fn cell_circumradius(self) -> f64 {
        match self {
            GridKind::Square | GridKind::SmoothedSquare => 0.5f64.sqrt(),
            GridKind::Brick => 1.25f64.sqrt(),
        }
    }
}

impl std::str::FromStr for GridKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "square" => Ok(GridKind::Square),
            "smoothed_square" => Ok(GridKind::SmoothedSquare),
            "brick" => Ok(GridKind::Brick),
            other => Err(format!("unknown grid kind `{other}`")),
        }
    }
}

type Rect = [i64; 4]; // x0, y0, x1, y1

impl PlanarPatch {
    /// Builds a patch from axis-aligned integer rectangles.
    ///
    /// Nodes are the rectangle corners; a node lying inside a side of a rectangle is
    /// a vertex of that cell and marked smooth there (a T-junction), corners are
    /// spikes. Node ids follow `(y, x)` order, cell ids the input order from 1.
    fn from_rectangles(rects: &[Rect]) -> Self {
        let corners: BTreeSet<(i64, i64)> = rects
            .iter()
            .flat_map(|&[x0, y0, x1, y1]| [(y0, x0), (y0, x1), (y1, x1), (y1, x0)])
            .collect();
        let id: BTreeMap<(i64, i64), PlanarId> = corners
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as PlanarId))
            .collect();
        let nodes = id
            .iter()
            .map(|(&(y, x), &i)| (i, [x as f64, y as f64]))
            .collect();

        let mut cells = BTreeMap::new();
        let mut marks = Vec::new();
        let mut sides: BTreeMap<(PlanarId, PlanarId), Vec<PlanarId>> = BTreeMap::new();
        for (c, &[x0, y0, x1, y1]) in rects.iter().enumerate() {
            let cid = c as PlanarId + 1;
            let on = |y: i64, xa: i64, xb: i64| -> Vec<(i64, i64)> {
                corners
                    .range((y, xa.min(xb))..=(y, xa.max(xb)))
                    .copied()
                    .collect()
            };
            let col = |x: i64, ya: i64, yb: i64| -> Vec<(i64, i64)> {
                corners
                    .iter()
                    .filter(|&&(y, xx)| xx == x && y >= ya.min(yb) && y <= ya.max(yb))
                    .copied()
                    .collect()
            };
            // counter-clockwise: bottom left→right, right bottom→top, top right→left, left top→bottom
            let mut ring: Vec<(i64, i64)> = Vec::new();
            ring.extend(on(y0, x0, x1).into_iter().filter(|p| p.1 < x1));
            ring.extend(col(x1, y0, y1).into_iter().filter(|p| p.0 < y1));
            ring.extend(on(y1, x0, x1).into_iter().rev().filter(|p| p.1 > x0));
            ring.extend(col(x0, y0, y1).into_iter().rev().filter(|p| p.0 > y0));
            let verts: Vec<PlanarId> = ring.iter().map(|p| id[p]).collect();
            for (i, p) in ring.iter().enumerate() {
                let corner = (p.1 == x0 || p.1 == x1) && (p.0 == y0 || p.0 == y1);
                marks.push(Mark {
                    cell: cid,
                    node: verts[i],
                    kind: if corner {
                        MarkKind::Spike
                    } else {
                        MarkKind::Smooth
                    },
                });
                let (a, b) = (verts[i], verts[(i + 1) % verts.len()]);
                sides.entry((a.min(b), a.max(b))).or_default().push(cid);
            }
            cells.insert(cid, PlanarCell { vertices: verts });
        }
        let mut edges = BTreeMap::new();
        let mut outer_adj: BTreeMap<PlanarId, Vec<PlanarId>> = BTreeMap::new();
        for (i, ((a, b), cs)) in sides.into_iter().enumerate() {
            let pair = if cs.len() == 1 {
                [cs[0], OUTER]
            } else {
                [cs[0], cs[1]]
            };
            if cs.len() == 1 {
                outer_adj.entry(a).or_default().push(b);
                outer_adj.entry(b).or_default().push(a);
            }
            edges.insert(
                i as PlanarId,
                PlanarEdge {
                    ends: [a, b],
                    cells: pair,
                },
            );
        }
        // walk the outer boundary (a simple cycle for the patches built here)
        let mut outer = Vec::new();
        if let Some((&start, _)) = outer_adj.iter().next() {
            let (mut prev, mut cur) = (PlanarId::MAX, start);
            loop {
                outer.push(cur);
                let next = outer_adj[&cur]
                    .iter()
                    .copied()
                    .find(|&v| v != prev)
                    .unwrap();
                prev = cur;
                cur = next;
                if cur == start || outer.len() > outer_adj.len() {
                    break;
                }
            }
        }
        PlanarPatch {
            format_version: crate::FORMAT_VERSION,
            nodes,
            edges,
            cells,
            marks,
            outer: OuterFace { vertices: outer },
        }
    }

    fn set_mark(&mut self, cell: PlanarId, node: PlanarId, kind: MarkKind) {
        if let Some(m) = self
            .marks
            .iter_mut()
            .find(|m| m.cell == cell && m.node == node)
        {
            m.kind = kind;
        }
    }

    /// Cells (bounded) incident to each node.
    fn node_cells(&self) -> BTreeMap<PlanarId, BTreeSet<PlanarId>> {
        let mut out: BTreeMap<PlanarId, BTreeSet<PlanarId>> = BTreeMap::new();
        for (&c, cell) in &self.cells {
            for &v in &cell.vertices {
                out.entry(v).or_default().insert(c);
            }
        }
        out
    }

    /// Marks every interior node smooth in its two upper cells (the cells above
    /// its horizontal through-line).
    fn smooth_upper_cells(&mut self) {
        let boundary: BTreeSet<PlanarId> = self.outer.vertices.iter().copied().collect();
        let upper: Vec<(PlanarId, PlanarId)> = self
            .node_cells()
            .into_iter()
            .filter(|(v, _)| !boundary.contains(v))
            .flat_map(|(v, cs)| {
                let y = self.nodes[&v][1];
                let above: Vec<PlanarId> = cs
                    .into_iter()
                    .filter(|c| self.cells[c].vertices.iter().any(|w| self.nodes[w][1] > y))
                    .collect();
                above.into_iter().map(move |c| (c, v))
            })
            .collect();
        for (c, v) in upper {
            self.set_mark(c, v, MarkKind::Smooth);
        }
    }

    /// Moves every node by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut p = self.clone();
        for q in p.nodes.values_mut() {
            q[0] += dx;
            q[1] += dy;
        }
        p
    }

    /// Checks the patch invariants, naming the first one violated.
    pub fn validate(&self) -> Result<(), PlanarError> {
        if self.cells.is_empty() {
            return Err(invalid("nonempty", "patch has no cells".into()));
        }
        if self.cells.contains_key(&OUTER) {
            return Err(invalid(
                "outer_face",
                "cell id 0 is reserved for the outer face".into(),
            ));
        }
        for (id, e) in &self.edges {
            if !e.ends.iter().all(|n| self.nodes.contains_key(n)) || e.ends[0] == e.ends[1] {
                return Err(invalid("edges", format!("edge {id} has invalid ends")));
            }
            if e.cells
                .iter()
                .any(|c| *c != OUTER && !self.cells.contains_key(c))
            {
                return Err(invalid("edges", format!("edge {id} names an unknown cell")));
            }
        }
        // marks: exactly one per (cell, boundary node)
        let mut seen = BTreeSet::new();
        for m in &self.marks {
            let Some(cell) = self.cells.get(&m.cell) else {
                return Err(invalid("marks", format!("mark on unknown cell {}", m.cell)));
            };
            if !cell.vertices.contains(&m.node) {
                return Err(invalid(
                    "marks",
                    format!("node {} is not on cell {}", m.node, m.cell),
                ));
            }
            if !seen.insert((m.cell, m.node)) {
                return Err(invalid(
                    "marks",
                    format!("duplicate mark ({}, {})", m.cell, m.node),
                ));
            }
        }
        for (&c, cell) in &self.cells {
            for v in &cell.vertices {
                if !seen.contains(&(c, *v)) {
                    return Err(invalid(
                        "marks",
                        format!("node {v} of cell {c} has no mark"),
                    ));
                }
            }
        }
        // at most two smooth marks per node
        let mut smooth: BTreeMap<PlanarId, usize> = BTreeMap::new();
        for m in self.marks.iter().filter(|m| m.kind == MarkKind::Smooth) {
            *smooth.entry(m.node).or_default() += 1;
        }
        if let Some((v, c)) = smooth.iter().find(|(_, c)| **c > 2) {
            return Err(invalid(
                "smooth_at_most_two",
                format!("node {v} is smooth in {c} cells"),
            ));
        }
        // interior nodes meet at least three cells
        let boundary: BTreeSet<PlanarId> = self.outer.vertices.iter().copied().collect();
        for (v, cs) in self.node_cells() {
            if !boundary.contains(&v) && cs.len() < 3 {
                return Err(invalid(
                    "node_degree",
                    format!("interior node {v} meets {} cells", cs.len()),
                ));
            }
        }
        // boundary edges = boundary vertices, per face
        let mut edge_count: BTreeMap<PlanarId, usize> = BTreeMap::new();
        for e in self.edges.values() {
            for c in e.cells {
                *edge_count.entry(c).or_default() += 1;
            }
        }
        for (&c, cell) in &self.cells {
            let ne = edge_count.get(&c).copied().unwrap_or(0);
            if ne != cell.vertices.len() {
                return Err(invalid(
                    "boundary_count",
                    format!(
                        "cell {c} has {ne} edges but {} vertices",
                        cell.vertices.len()
                    ),
                ));
            }
        }
        let outer_edges = edge_count.get(&OUTER).copied().unwrap_or(0);
        if outer_edges != self.outer.vertices.len() {
            return Err(invalid(
                "boundary_count",
                format!(
                    "outer face has {outer_edges} edges but {} vertices",
                    self.outer.vertices.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Square, smoothed-square or running-bond brick patch with `a` columns and `b` rows.
///
/// Bricks are 2×1; odd rows are shifted by one and closed with half bricks.
pub fn build_grid_patch(kind: GridKind, a: u32, b: u32) -> PlanarPatch {
    assert!(a >= 1 && b >= 1, "grid dimensions must be positive");
    let (a, b) = (a as i64, b as i64);
    let mut rects = Vec::new();
    for y in 0..b {
        match kind {
            GridKind::Square | GridKind::SmoothedSquare => {
                rects.extend((0..a).map(|x| [x, y, x + 1, y + 1]));
            }
            GridKind::Brick => {
                let mut x = 0;
                let width = 2 * a;
                if y % 2 == 1 {
                    rects.push([0, y, 1, y + 1]);
                    x = 1;
                }
                while x + 2 <= width {
                    rects.push([x, y, x + 2, y + 1]);
                    x += 2;
                }
                if x < width {
                    rects.push([x, y, width, y + 1]);
                }
            }
        }
    }
    let mut patch = PlanarPatch::from_rectangles(&rects);
    if kind == GridKind::SmoothedSquare {
        patch.smooth_upper_cells();
    }
    patch
}

/// Cells of the infinite pattern lying inside the disk of radius `rho` about the origin.
pub fn disk_patch(kind: GridKind, rho: f64) -> PlanarPatch {
    let reach = rho.ceil() as i64 + 2;
    let inside = |x: i64, y: i64| ((x * x + y * y) as f64).sqrt() <= rho;
    let mut rects = Vec::new();
    for y in -reach..reach {
        let shift = match kind {
            GridKind::Brick => y.rem_euclid(2),
            _ => 0,
        };
        let width = if kind == GridKind::Brick { 2 } else { 1 };
        let mut x = -reach - shift;
        while x < reach {
            let r = [x, y, x + width, y + 1];
            if inside(r[0], r[1]) && inside(r[2], r[1]) && inside(r[2], r[3]) && inside(r[0], r[3])
            {
                rects.push(r);
            }
            x += width;
        }
    }
    let mut patch = PlanarPatch::from_rectangles(&rects);
    if kind == GridKind::SmoothedSquare {
        patch.smooth_upper_cells();
    }
    patch
}

/// The Euler and mark accounting of a valid patch.
pub fn spike_accounting(patch: &PlanarPatch) -> Result<AccountingReport, PlanarError> {
    patch.validate()?;
    let n = patch.nodes.len();
    let e = patch.edges.len();
    let k = patch.cells.len();
    let mut s_list = Vec::with_capacity(k);
    let mut m_list = Vec::with_capacity(k);
    for &c in patch.cells.keys() {
        let smooth = patch
            .marks
            .iter()
            .filter(|m| m.cell == c && m.kind == MarkKind::Smooth)
            .count();
        m_list.push(smooth);
        s_list.push(patch.cells[&c].vertices.len() - smooth);
    }
    let s0 = patch.outer.vertices.len();
    let m0 = 0;
    let (ni, ei, ki) = (n as i64, e as i64, k as i64);
    let total_s: usize = s_list.iter().sum();
    let total_m: usize = m_list.iter().sum();
    let avg = total_s as f64 / k as f64;
    let bound = 2.0 - (s0 as f64 + 2.0) / k as f64;
    Ok(AccountingReport {
        n,
        e,
        k,
        euler_check: ni - ei + (ki + 1) == 2,
        identity_check: 2 == 2 * ni - 2 * ei + 2 * ki,
        ineq_2n: total_m + m0 <= 2 * n,
        eq_2e: total_s + total_m + s0 + m0 == 2 * e,
        avg,
        bound,
        bound_holds: avg >= bound,
        s_list,
        m_list,
        s0,
        m0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub rho: f64,
    pub k: usize,
    pub s0: usize,
    pub s0_over_k: f64,
    pub avg: f64,
    pub bound: f64,
    pub bound_holds: bool,
    /// `(ρ − 2R)² / R²` when `ρ > 4R`.
    pub k_lower: Option<f64>,
    pub euler_check: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    #[serde(default = "crate::format_version")]
    pub format_version: u32,
    pub kind: GridKind,
    pub rows: Vec<GrowthRow>,
    pub s0_over_k_decreasing: bool,
    pub k_bound_holds: bool,
    pub bound_holds: bool,
}

/// Accounting of disk-clipped patches for growing radii.
pub fn growth_study(kind: GridKind, rho_list: &[f64]) -> Result<GrowthReport, PlanarError> {
    if rho_list.len() < 3 || rho_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PlanarError::BadRadii);
    }
    let big_r = kind.cell_circumradius();
    let mut rows = Vec::new();
    for &rho in rho_list {
        let rep = spike_accounting(&disk_patch(kind, rho))?;
        let k_lower = (rho > 4.0 * big_r).then(|| (rho - 2.0 * big_r).powi(2) / (big_r * big_r));
        rows.push(GrowthRow {
            rho,
            k: rep.k,
            s0: rep.s0,
            s0_over_k: rep.s0 as f64 / rep.k as f64,
            avg: rep.avg,
            bound: rep.bound,
            bound_holds: rep.bound_holds,
            k_lower,
            euler_check: rep.euler_check,
        });
    }
    Ok(GrowthReport {
        format_version: crate::FORMAT_VERSION,
        kind,
        s0_over_k_decreasing: rows.windows(2).all(|w| w[1].s0_over_k < w[0].s0_over_k),
        k_bound_holds: rows
            .iter()
            .all(|r| r.k_lower.is_none_or(|lo| r.k as f64 >= lo)),
        bound_holds: rows.iter().all(|r| r.bound_holds),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_two_by_two() {
        let r = spike_accounting(&build_grid_patch(GridKind::Square, 2, 2)).unwrap();
        assert_eq!((r.n, r.e, r.k, r.s0), (9, 12, 4, 8));
        assert_eq!(r.s_list, vec![4; 4]);
        assert!(r.euler_check && r.identity_check && r.ineq_2n && r.eq_2e && r.bound_holds);
        assert_eq!(r.avg, 4.0);
        assert_eq!(r.bound, -0.5);
    }

    #[test]
    fn smoothed_center_node() {
        let p = build_grid_patch(GridKind::SmoothedSquare, 2, 2);
        let center = p
            .nodes
            .iter()
            .find(|(_, q)| **q == [1.0, 1.0])
            .map(|(i, _)| *i)
            .unwrap();
        let smooth: Vec<&Mark> = p
            .marks
            .iter()
            .filter(|m| m.kind == MarkKind::Smooth)
            .collect();
        assert_eq!(smooth.len(), 2);
        assert!(smooth.iter().all(|m| m.node == center));
        let r = spike_accounting(&p).unwrap();
        assert_eq!(r.m_list.iter().sum::<usize>(), 2);
    }

    #[test]
    fn brick_marks() {
        let r = spike_accounting(&build_grid_patch(GridKind::Brick, 2, 3)).unwrap();
        // every cell has four corner spikes
        assert!(r.s_list.iter().all(|&s| s == 4));
        // full bricks of the middle row have a T-junction on both long sides
        let p = build_grid_patch(GridKind::Brick, 2, 3);
        let middle: Vec<usize> = p
            .cells
            .iter()
            .filter(|(_, c)| {
                let ys: Vec<f64> = c.vertices.iter().map(|v| p.nodes[v][1]).collect();
                let xs: Vec<f64> = c.vertices.iter().map(|v| p.nodes[v][0]).collect();
                ys.iter().cloned().fold(f64::INFINITY, f64::min) == 1.0
                    && xs.iter().cloned().fold(0.0, f64::max)
                        - xs.iter().cloned().fold(f64::INFINITY, f64::min)
                        == 2.0
            })
            .map(|(c, _)| *c as usize)
            .collect();
        assert!(!middle.is_empty());
        for c in middle {
            assert_eq!(r.m_list[c - 1], 2);
        }
        assert!(r.euler_check && r.eq_2e && r.bound_holds);
    }

    #[test]
    fn three_smooth_marks_rejected() {
        let mut p = build_grid_patch(GridKind::SmoothedSquare, 2, 2);
        for m in p.marks.iter_mut() {
            if p.nodes[&m.node] == [1.0, 1.0] {
                m.kind = MarkKind::Smooth;
            }
        }
        match spike_accounting(&p) {
            Err(PlanarError::InvalidPatch { invariant, .. }) => {
                assert_eq!(invariant, "smooth_at_most_two")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn smoothed_average_closed_form() {
        let mut prev = f64::INFINITY;
        for m in [2u32, 4, 8] {
            let r = spike_accounting(&build_grid_patch(GridKind::SmoothedSquare, m, m)).unwrap();
            let mf = m as f64;
            let want = 4.0 - 2.0 * (mf - 1.0).powi(2) / (mf * mf);
            assert!((r.avg - want).abs() < 1e-12);
            assert!(r.avg < prev && r.avg > 2.0);
            prev = r.avg;
        }
    }

    #[test]
    fn bad_radii() {
        assert_eq!(
            growth_study(GridKind::Square, &[10.0, 5.0, 20.0]),
            Err(PlanarError::BadRadii)
        );
        assert_eq!(
            growth_study(GridKind::Square, &[10.0, 20.0]),
            Err(PlanarError::BadRadii)
        );
    }

    #[test]
    fn patch_json_roundtrip() {
        let p = build_grid_patch(GridKind::Brick, 2, 2);
        let back: PlanarPatch = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
