//! Property tests for the bend, coloring and planar invariants, plus analytic
//! oracles for κ and for the smoothness of the azimuthal profile.

use approx::assert_relative_eq;
use nalgebra::Vector3;
use proptest::prelude::*;
use softcell::bend::{choose_axis, kappa_star, phi_max, smoothstep, AxisFrame};
use softcell::planar::{build_grid_patch, spike_accounting, GridKind};
use softcell::tiling::cube_node_figure;
use softcell::{
    phi_eval, soften_node, spherical_subdivision, two_color, validate_coloring, BendParams, Interp,
    NodeBend, TwoColoring, VertexFigure,
};

type V = Vector3<f64>;

fn octa() -> (VertexFigure, TwoColoring) {
    let fig = cube_node_figure();
    let graph = spherical_subdivision(&fig, 0.25).unwrap();
    let coloring = two_color(&graph).unwrap();
    (fig, coloring)
}

fn bend_with(seed: u64, amp_fraction: f64) -> Option<(VertexFigure, NodeBend)> {
    let (fig, coloring) = octa();
    let params = BendParams {
        seed,
        amp_fraction,
        ..BendParams::default()
    };
    soften_node(&fig, &coloring, &params).ok().map(|b| (fig, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_stays_in_range(x in 0.0f64..=1.0) {
        let v = phi_eval(x, 0).unwrap();
        prop_assert!(v >= 0.0 && v <= phi_max() + 1e-15);
    }

    #[test]
    fn tau_bounded_by_amplitude(
        seed in 0u64..20,
        amp in 0.05f64..0.5,
        e in 0.0f64..1.0,
        alpha in 0.0f64..std::f64::consts::TAU,
    ) {
        if let Some((_, b)) = bend_with(seed, amp) {
            let t = b.tau(e * b.kappa, alpha);
            prop_assert!(t.abs() <= b.amplitude * phi_max() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn compact_map_roundtrips(
        seed in 0u64..20,
        amp in 0.05f64..0.5,
        d in prop::array::uniform3(-1.0f64..1.0),
    ) {
        if let Some((_, b)) = bend_with(seed, amp) {
            let p = b.frame.o() + V::from(d) * (0.8 * b.r_ball);
            let q = b.map(&p);
            prop_assert!((b.inverse(&q) - p).norm() <= 1e-10);
            if (p - b.frame.o()).norm() < b.r_ball {
                prop_assert!((q - b.frame.o()).norm() < b.r_ball);
            }
        }
    }

    #[test]
    fn map_is_identity_off_the_cylinder(
        seed in 0u64..20,
        d in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let (_, b) = bend_with(seed, 0.25).unwrap();
        let p = b.frame.o() + V::from(d) * b.r_ball;
        if !b.in_support(&p) {
            prop_assert_eq!(b.map(&p), p);
        }
    }

    #[test]
    fn planar_accounting_translation_invariant(
        a in 1u32..5,
        b in 1u32..5,
        dx in -50.0f64..50.0,
        dy in -50.0f64..50.0,
        kind in prop_oneof![
            Just(GridKind::Square),
            Just(GridKind::SmoothedSquare),
            Just(GridKind::Brick),
        ],
    ) {
        let p = build_grid_patch(kind, a, b);
        let r0 = spike_accounting(&p).unwrap();
        let r1 = spike_accounting(&p.translated(dx, dy)).unwrap();
        prop_assert!(r0.euler_check && r0.identity_check && r0.eq_2e && r0.ineq_2n);
        prop_assert_eq!(r0, r1);
    }
}

#[test]
fn negated_coloring_stays_valid() {
    let (fig, coloring) = octa();
    let graph = spherical_subdivision(&fig, 0.25).unwrap();
    assert!(
        validate_coloring(&graph, &coloring.negated())
            .unwrap()
            .valid
    );
}

/// For straight-edge figures the sampled κ* must match (r/2) · sin θ_min, where θ_min
/// is the smallest angle between the axis line and any direction of the figure —
/// an edge or a direction inside a planar face sector.
#[test]
fn kappa_star_matches_analytic_bound() {
    let fig = cube_node_figure();
    let r = 0.45;
    for seed in [1u64, 7, 19, 42] {
        let frame: AxisFrame = choose_axis(&fig, seed, 0.05, 0.05).unwrap();
        let k = frame.k();
        let line_angle = |d: &V| d.normalize().dot(&k).abs().min(1.0).acos();
        let mut theta: f64 = f64::INFINITY;
        for face in &fig.faces {
            let a = fig.edges[face.edges[0]].dir();
            let b = fig.edges[face.edges[1]].dir();
            // the cube faces are quarter sectors between orthogonal unit directions
            for m in 0..=20_000 {
                let t = std::f64::consts::FRAC_PI_2 * m as f64 / 20_000.0;
                theta = theta.min(line_angle(&(a * t.cos() + b * t.sin())));
            }
        }
        let analytic = 0.5 * r * theta.sin();
        assert_relative_eq!(kappa_star(&fig, &frame, r), analytic, max_relative = 0.02);
    }
}

/// The smooth profile is C² across each edge azimuth: the centred second difference
/// there shrinks linearly with the step (L'' = 0 at both ends of every segment),
/// while the linear profile's grows like 1/δ.
#[test]
fn smooth_profile_second_difference_vanishes_at_knots() {
    let (fig, coloring) = octa();
    let smooth = soften_node(&fig, &coloring, &BendParams::default()).unwrap();
    let linear = soften_node(
        &fig,
        &coloring,
        &BendParams::default().with_interp(Interp::Linear),
    )
    .unwrap();
    let second = |b: &NodeBend, a: f64, d: f64| {
        (b.profile(0.0, a + d) - 2.0 * b.profile(0.0, a) + b.profile(0.0, a - d)) / (d * d)
    };
    for (i, &alpha) in smooth.azimuths.iter().enumerate() {
        let next = (i + 1) % smooth.signs.len();
        let prev = (i + smooth.signs.len() - 1) % smooth.signs.len();
        let mut last = f64::INFINITY;
        for d in [1e-2, 1e-3, 1e-4] {
            let s = second(&smooth, alpha, d).abs();
            assert!(s < last, "knot {i}: second difference not shrinking");
            last = s;
        }
        assert!(last < 1e-1, "knot {i}: {last}");
        let changes =
            smooth.signs[next] != smooth.signs[i] || smooth.signs[prev] != smooth.signs[i];
        if changes {
            assert!(second(&linear, alpha, 1e-4).abs() > 1.0);
        }
    }
}

#[test]
fn smoothstep_second_derivative_converges() {
    let exact = |u: f64| 120.0 * u.powi(3) - 180.0 * u * u + 60.0 * u;
    for u in [0.1, 0.3, 0.5, 0.9] {
        let mut prev = f64::INFINITY;
        for d in [1e-2, 1e-3] {
            let fd = (smoothstep(u + d) - 2.0 * smoothstep(u) + smoothstep(u - d)) / (d * d);
            let err = (fd - exact(u)).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-3);
    }
}
