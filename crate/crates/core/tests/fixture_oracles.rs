//! Independent oracles for the graph fixtures.
//!
//! The Herschel-dual fixture is stored as a golden JSON file. Here it is rebuilt
//! from scratch as the convex hull of the edge midpoints of a triangular prism,
//! using a brute-force hull (every point triple spanning a supporting plane). Run
//! with `SOFTCELL_BLESS=1` to rewrite the golden file.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use softcell::graphcolor::{
    cube_disconnected_coloring, find_hamiltonian_cycle, fixture_graph, PolyhedralGraph,
};
use softcell::{hamiltonian_cycle_exists, two_color, validate_coloring, GraphError};

type V = Vector3<f64>;

/// Edge midpoints of a triangular prism; edge order: bottom, top, vertical.
fn prism_midpoints() -> Vec<V> {
    let corner = |i: usize, z: f64| {
        let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
        V::new(a.cos(), a.sin(), z)
    };
    let mut mids = Vec::new();
    for z in [-0.6, 0.6] {
        for i in 0..3 {
            mids.push((corner(i, z) + corner((i + 1) % 3, z)) / 2.0);
        }
    }
    for i in 0..3 {
        mids.push((corner(i, -0.6) + corner(i, 0.6)) / 2.0);
    }
    mids
}

/// Faces of the convex hull as vertex-index cycles (unoriented).
fn brute_force_hull(pts: &[V]) -> Vec<Vec<usize>> {
    let n = pts.len();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut faces = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let normal = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                if normal.norm() < 1e-9 {
                    continue;
                }
                let side: Vec<f64> = pts.iter().map(|p| normal.dot(&(p - pts[i]))).collect();
                let pos = side.iter().any(|s| *s > 1e-9);
                let neg = side.iter().any(|s| *s < -1e-9);
                if pos && neg {
                    continue;
                }
                let on: Vec<usize> = (0..n).filter(|&m| side[m].abs() <= 1e-9).collect();
                if !seen.insert(on.clone()) {
                    continue;
                }
                // order around the face centroid
                let c: V = on.iter().map(|&m| pts[m]).sum::<V>() / on.len() as f64;
                let u = (pts[on[0]] - c).normalize();
                let w = normal.normalize().cross(&u);
                let mut ring = on.clone();
                ring.sort_by(|&a, &b| {
                    let ang = |m: usize| (pts[m] - c).dot(&w).atan2((pts[m] - c).dot(&u));
                    ang(a).partial_cmp(&ang(b)).unwrap()
                });
                faces.push(ring);
            }
        }
    }
    faces
}

fn oracle_herschel_dual() -> PolyhedralGraph {
    let pts = prism_midpoints();
    let positions: BTreeMap<u32, [f64; 3]> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (i as u32 + 1, [p.x, p.y, p.z]))
        .collect();
    let faces: Vec<Vec<u32>> = brute_force_hull(&pts)
        .into_iter()
        .map(|f| f.into_iter().map(|m| m as u32 + 1).collect())
        .collect();
    PolyhedralGraph::from_convex_faces(&positions, &faces).unwrap()
}

#[test]
fn herschel_dual_matches_hull_oracle() {
    let oracle = oracle_herschel_dual();
    let text = serde_json::to_string_pretty(&oracle).unwrap() + "\n";
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/herschel_dual.json");
    if std::env::var_os("SOFTCELL_BLESS").is_some() {
        std::fs::write(path, &text).unwrap();
    }
    // edge numbering is constructor-dependent; the neighbour rotation is canonical
    let golden = fixture_graph("herschel_dual").unwrap();
    assert_eq!(serde_json::to_string_pretty(&golden).unwrap() + "\n", text);
    assert_eq!(std::fs::read_to_string(path).unwrap(), text);
}

#[test]
fn herschel_dual_face_census() {
    let g = oracle_herschel_dual();
    assert_eq!(
        (g.num_vertices(), g.num_edges(), g.num_faces()),
        (9, 18, 11)
    );
    let mut sizes: Vec<usize> = g.face_vertices().iter().map(|f| f.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [vec![3; 8], vec![4; 3]].concat());
    assert!(g.is_polyhedral());
}

#[test]
fn herschel_graph_census_and_no_hamiltonian_cycle() {
    let h = fixture_graph("herschel").unwrap();
    assert_eq!(
        (h.num_vertices(), h.num_edges(), h.num_faces()),
        (11, 18, 9)
    );
    assert!(h.face_vertices().iter().all(|f| f.len() == 4));
    // bipartite with classes 5 and 6: an odd cycle is impossible, a Hamiltonian one
    // would need equal classes
    let mut color: BTreeMap<u32, i8> = BTreeMap::new();
    let mut stack = vec![(h.vertices()[0], 1i8)];
    while let Some((v, c)) = stack.pop() {
        if let Some(&old) = color.get(&v) {
            assert_eq!(old, c, "not bipartite");
            continue;
        }
        color.insert(v, c);
        for w in h.neighbors(v) {
            stack.push((w, -c));
        }
    }
    let plus = color.values().filter(|c| **c == 1).count();
    assert_eq!(plus.min(11 - plus), 5);
    assert!(!hamiltonian_cycle_exists(&h).unwrap());
}

#[test]
fn hamiltonian_search_finds_cycles_where_they_exist() {
    for name in ["octahedron", "cube", "herschel_dual"] {
        let g = fixture_graph(name).unwrap();
        let cycle = find_hamiltonian_cycle(&g).unwrap().expect(name);
        assert_eq!(cycle.len(), g.num_vertices());
        let set: BTreeSet<u32> = cycle.iter().copied().collect();
        assert_eq!(set.len(), g.num_vertices());
        for i in 0..cycle.len() {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            assert!(g.neighbors(a).contains(&b), "{name}: {a}-{b} not an edge");
        }
    }
}

#[test]
fn herschel_dual_two_colors() {
    let g = fixture_graph("herschel_dual").unwrap();
    let c = two_color(&g).unwrap();
    assert!(validate_coloring(&g, &c).unwrap().valid);
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
fn doubled_triangle_is_infeasible() {
    let g = fixture_graph("doubled_triangle").unwrap();
    assert_eq!((g.num_vertices(), g.num_edges(), g.num_faces()), (3, 6, 5));
    assert_eq!(two_color(&g), Err(GraphError::Infeasible));
}

#[test]
fn blanket_node_is_not_polyhedral() {
    let g = fixture_graph("blanket_node").unwrap();
    assert!(!g.is_simple());
    assert!(!g.is_polyhedral());
}
