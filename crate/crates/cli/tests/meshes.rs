//! Geometry of the sampled cell meshes.

use std::collections::HashSet;

use softcell::{generate_cube_patch, soften_patch, BendParams, SoftenedPatch};
use softcell_cli::{sample_meshes, CellMesh};

fn soft(extent: u32) -> SoftenedPatch {
    soften_patch(&generate_cube_patch(extent), &BendParams::default()).unwrap()
}

fn bits(v: &[f64; 3]) -> [u64; 3] {
    v.map(f64::to_bits)
}

#[test]
fn neighbouring_cells_share_face_samples_bit_for_bit() {
    let soft = soft(2);
    let res = 32;
    let meshes = sample_meshes(&soft, res).unwrap();
    assert_eq!(meshes.len(), 8);
    for face in soft.patch.faces.values().filter(|f| f.cells.len() == 2) {
        let [a, b] =
            [face.cells[0], face.cells[1]].map(|c| meshes.iter().find(|m| m.cell == c).unwrap());
        let set_a: HashSet<[u64; 3]> = a.vertices.iter().map(bits).collect();
        let common = b
            .vertices
            .iter()
            .map(bits)
            .filter(|v| set_a.contains(v))
            .count();
        // the whole face grid, plus edge polylines shared by both cells
        assert!(
            common >= res * res,
            "cells {} and {}: {common}",
            a.cell,
            b.cell
        );
    }
}

#[test]
fn no_interior_nodes_gives_the_cube() {
    let soft = soft(1);
    assert!(soft.bends.is_empty());
    let m = &sample_meshes(&soft, 8).unwrap()[0];
    for v in &m.vertices {
        // bilinear interpolation is exact up to a few ulps
        assert!(v.iter().all(|x| (-1e-14..=1.0 + 1e-14).contains(x)));
        assert!(
            v.iter().any(|x| x.abs() < 1e-14 || (x - 1.0).abs() < 1e-14),
            "{v:?} not on the cube boundary"
        );
    }
    let area: f64 = m.triangles.iter().map(|t| m.triangle_area(t)).sum();
    assert!((area - 6.0).abs() < 1e-12);
}

#[test]
fn meshes_are_closed_and_outward() {
    let meshes = sample_meshes(&soft(2), 16).unwrap();
    for m in &meshes {
        // divergence theorem: the signed volume of a closed outward soup is positive
        let vol: f64 = m
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| m.vertex(i));
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        assert!((vol - 1.0).abs() < 0.05, "cell {} volume {vol}", m.cell);
    }
}

fn hausdorff(a: &CellMesh, b: &CellMesh) -> f64 {
    let one = |x: &CellMesh, y: &CellMesh| {
        x.vertices
            .iter()
            .map(|p| {
                let p = nalgebra::Vector3::from(*p);
                y.vertices
                    .iter()
                    .map(|q| (p - nalgebra::Vector3::from(*q)).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[test]
fn refinement_reduces_hausdorff_distance() {
    let soft = soft(2);
    let cell0 = |res| sample_meshes(&soft, res).unwrap().swap_remove(0);
    let (m8, m16, m32) = (cell0(8), cell0(16), cell0(32));
    let (h1, h2) = (hausdorff(&m8, &m16), hausdorff(&m16, &m32));
    assert!(h2 < h1, "{h1} -> {h2}");
}
