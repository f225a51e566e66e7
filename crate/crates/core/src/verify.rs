//! Numerical certificates for a constructed bend.
//!
//! Every smoothness statement is checked by finite differences at fixed steps, so
//! the checks do not depend on how the bend is implemented. Failures are report
//! entries, never errors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::bend::{
    edge_point_at_axis_distance, phi_eval, soften_node, BendError, BendParams, Interp, NodeBend,
};
use crate::geom::{angle_between, angle_to_line, v3, wrap_angle, Vec3};
use crate::graphcolor::TwoColoring;
use crate::tiling::{FacePatch, VertexFigure};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random points used by the support and roundtrip checks.
    pub support_samples: usize,
    /// Face points used by the Jacobian check.
    pub jacobian_samples: usize,
    pub jacobian_floor: f64,
    /// Largest angle between image normals at adjacent grid samples.
    pub normal_tol: f64,
    /// Grid resolution in the face parameter `λ`.
    pub normal_res: usize,
    /// Bound on the final secant angle to the axis.
    pub angle_tol: f64,
    /// Bound on the symmetric first difference of `ε(h)` at the node.
    pub join_tol: f64,
    /// Relative tolerance on the second differences of `ε(h)`.
    pub curvature_tol: f64,
    pub roundtrip_tol: f64,
    pub fixed_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 11,
            support_samples: 10_000,
            jacobian_samples: 1_000,
            jacobian_floor: 0.1,
            normal_tol: 1.0,
            normal_res: 256,
            angle_tol: 0.01,
            join_tol: 1e-3,
            curvature_tol: 0.05,
            roundtrip_tol: 1e-10,
            fixed_tol: 1e-14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    #[serde(default = "crate::format_version")]
    pub format_version: u32,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
}

impl Default for VerificationReport {
    fn default() -> Self {
        VerificationReport {
            format_version: crate::FORMAT_VERSION,
            pass: true,
            checks: Vec::new(),
        }
    }
}

fn finite(x: f64) -> f64 {
    if x.is_nan() {
        f64::MAX
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    }
}

impl VerificationReport {
    pub fn push(&mut self, name: impl Into<String>, pass: bool, value: f64, tolerance: f64) {
        self.pass &= pass;
        self.checks.push(CheckRecord {
            name: name.into(),
            pass,
            value: finite(value),
            tolerance: finite(tolerance),
        });
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Appends `other`'s checks with their names prefixed.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for c in other.checks {
            self.push(format!("{prefix}{}", c.name), c.pass, c.value, c.tolerance);
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Witnesses for the properties of `φ`: zeros at both ends, derivative formulas,
/// divergence of `φ''` at 0 and its decay at 1.
pub fn verify_phi_lemma() -> VerificationReport {
    let phi = |x: f64, k: u8| phi_eval(x, k).expect("argument inside [0, 1]");
    let mut r = VerificationReport::default();
    let ends = phi(0.0, 0).abs().max(phi(1.0, 0).abs());
    r.push("phi_zero_at_ends", ends <= 1e-15, ends, 1e-15);
    let d1 = phi(1.0, 1).abs();
    r.push("phi_prime_zero_at_one", d1 <= 1e-12, d1, 1e-12);

    // central differences, step 1e-5, on 1000 points of [0.05, 0.95]
    let h = 1e-5;
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for m in 0..1000 {
        let x = 0.05 + 0.9 * m as f64 / 999.0;
        let fd1 = (phi(x + h, 0) - phi(x - h, 0)) / (2.0 * h);
        let fd2 = (phi(x + h, 1) - phi(x - h, 1)) / (2.0 * h);
        // relative to max(1, |exact|): φ' and φ'' have interior zeros
        e1 = e1.max((fd1 - phi(x, 1)).abs() / phi(x, 1).abs().max(1.0));
        e2 = e2.max((fd2 - phi(x, 2)).abs() / phi(x, 2).abs().max(1.0));
    }
    r.push("phi_prime_finite_difference", e1 <= 1e-5, e1, 1e-5);
    r.push("phi_second_finite_difference", e2 <= 1e-5, e2, 1e-5);

    let near0: Vec<f64> = (2..=6).map(|k| phi(10f64.powi(-k), 2)).collect();
    let decreasing = near0.windows(2).all(|w| w[1] < w[0]);
    r.push(
        "phi_second_decreasing_near_zero",
        decreasing,
        near0[4],
        near0[0],
    );
    let at = phi(1e-4, 2);
    r.push("phi_second_diverges", at < -1e5, at, -1e5);

    let decay = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&u| phi(1.0 - u, 2).abs() / (10.0 * u))
        .fold(0.0, f64::max);
    r.push("phi_second_decays_at_one", decay <= 1.0, decay, 1.0);
    r
}

fn random_in_ball(rng: &mut ChaCha8Rng, center: &Vec3, radius: f64) -> Vec3 {
    let d: [f64; 3] = UnitSphere.sample(rng);
    center + v3(&d) * (radius * rng.random::<f64>().cbrt())
}

/// Largest `s` (fraction of edge length) keeping the face inside the ball.
fn face_extent(figure: &VertexFigure, face: &FacePatch, radius: f64) -> f64 {
    let longest = face
        .edges
        .iter()
        .map(|&i| figure.edges[i].length)
        .fold(0.0, f64::max);
    (radius / longest).min(1.0)
}

/// Normal of the image surface of `face` at `(s, λ)`, from central differences.
fn image_normal(bend: &NodeBend, figure: &VertexFigure, face: &FacePatch, s: f64, l: f64) -> Vec3 {
    let img = |s: f64, l: f64| bend.map(&face.point(figure, s, l));
    let hs = 1e-6 * s;
    let hl = 1e-6 * l.min(1.0 - l).min(1.0);
    let ds = (img(s + hs, l) - img(s - hs, l)) / (2.0 * hs);
    let dl = (img(s, l + hl) - img(s, l - hl)) / (2.0 * hl);
    ds.cross(&dl).normalize()
}

fn jacobian_det(bend: &NodeBend, p: &Vec3, step: f64) -> f64 {
    let mut cols = [Vec3::zeros(); 3];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut e = Vec3::zeros();
        e[k] = step;
        *col = (bend.map(&(p + e)) - bend.map(&(p - e))) / (2.0 * step);
    }
    cols[0].dot(&cols[1].cross(&cols[2]))
}

/// Axis distance at which the image of `edge_idx` reaches height `target` above the
/// node (signed along the axis), by bisection on `log ε`.
fn radius_at_height(
    bend: &NodeBend,
    figure: &VertexFigure,
    edge_idx: usize,
    target: f64,
) -> Option<f64> {
    let edge = &figure.edges[edge_idx];
    let o = bend.frame.o();
    let k = bend.frame.k();
    let height = |eps: f64| -> Option<f64> {
        let p = edge_point_at_axis_distance(edge, &bend.frame, eps)?;
        Some((bend.map(&p) - o).dot(&k))
    };
    let sign = target.signum();
    let mut hi = 0.5 * bend.kappa;
    let mut tries = 0;
    while sign * height(hi)? <= target.abs() {
        hi *= 0.5;
        tries += 1;
        if tries > 200 {
            return None;
        }
    }
    let (mut lo, mut up) = ((hi * 1e-30).ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if sign * height(mid.exp())? < target.abs() {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Some((0.5 * (lo + up)).exp())
}

/// Runs the support, regularity, half-tangent, join and roundtrip checks for one node.
pub fn verify_node(
    bend: &NodeBend,
    figure: &VertexFigure,
    opts: &VerifyOptions,
) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let o = bend.frame.o();
    let r = bend.r_ball;
    let k = bend.frame.k();

    // (a) support ------------------------------------------------------------
    let mut moved: f64 = 0.0;
    let mut drawn = 0;
    while drawn < opts.support_samples {
        // half of the points hug the cylinder wall, half fill a box around the ball
        let p = if drawn % 2 == 0 {
            let (i, j) = (bend.frame.i(), bend.frame.j());
            let a = rng.random::<f64>() * 2.0 * PI;
            let eps = bend.kappa * (1.0 + rng.random::<f64>());
            let h = (2.0 * rng.random::<f64>() - 1.0) * 1.2 * r;
            o + (i * a.cos() + j * a.sin()) * eps + k * h
        } else {
            o + Vec3::new(
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
            ) * r
        };
        let (eps, _, h) = bend.frame.local(&p);
        if eps < bend.kappa && (p - o).norm() < r && h.abs() < r {
            continue;
        }
        drawn += 1;
        moved = moved.max((bend.map(&p) - p).norm());
    }
    rep.push(
        "support_fixed",
        moved <= opts.fixed_tol,
        moved,
        opts.fixed_tol,
    );
    let mut reach: f64 = 0.0;
    let mut roundtrip: f64 = 0.0;
    for _ in 0..opts.support_samples {
        let p = random_in_ball(&mut rng, &o, r);
        let q = bend.map(&p);
        reach = reach.max((q - o).norm() / r);
        roundtrip = roundtrip.max((bend.inverse(&q) - p).norm());
    }
    rep.push("support_ball", reach <= 1.0 + 1e-12, reach, 1.0);

    // (b) Jacobian and normal field on the faces -------------------------------
    let nf = figure.faces.len();
    let mut min_det = f64::INFINITY;
    for m in 0..opts.jacobian_samples {
        let face = &figure.faces[m % nf];
        let s_max = face_extent(figure, face, r);
        let s = s_max * (0.01 + 0.99 * rng.random::<f64>());
        let l = rng.random::<f64>();
        let p = face.point(figure, s, l);
        min_det = min_det.min(jacobian_det(bend, &p, 1e-7 * r));
    }
    rep.push(
        "jacobian",
        min_det >= opts.jacobian_floor,
        min_det,
        opts.jacobian_floor,
    );

    let nl = opts.normal_res.max(4);
    let ns = (nl / 4).max(4);
    let mut deviation: f64 = 0.0;
    for face in &figure.faces {
        let s_max = face_extent(figure, face, r);
        let grid: Vec<Vec<Vec3>> = (0..ns)
            .map(|a| {
                let s = s_max * 0.01f64.powf(1.0 - a as f64 / (ns - 1) as f64);
                (0..nl)
                    .map(|b| image_normal(bend, figure, face, s, (b as f64 + 0.5) / nl as f64))
                    .collect()
            })
            .collect();
        for a in 0..ns {
            for b in 0..nl {
                if b + 1 < nl {
                    deviation = deviation.max(angle_between(&grid[a][b], &grid[a][b + 1]));
                }
                if a + 1 < ns {
                    deviation = deviation.max(angle_between(&grid[a][b], &grid[a + 1][b]));
                }
            }
        }
    }
    rep.push(
        "normal_field",
        deviation <= opts.normal_tol,
        deviation,
        opts.normal_tol,
    );

    // (c) half-tangents ------------------------------------------------------
    let mut final_angle: f64 = 0.0;
    let mut monotone = true;
    let mut model_factor: f64 = 1.0;
    for edge in &figure.edges {
        let mut prev = f64::INFINITY;
        for j in 1..=6 {
            let eps = bend.kappa * 10f64.powi(-j);
            let angle = match edge_point_at_axis_distance(edge, &bend.frame, eps) {
                Some(p) => angle_to_line(&(bend.map(&p) - o).normalize(), &k),
                None => f64::INFINITY,
            };
            monotone &= angle < prev;
            prev = angle;
            if j == 6 {
                final_angle = final_angle.max(angle);
                let model = (eps * bend.kappa / 2.0).sqrt() / bend.amplitude;
                model_factor = model_factor.max(angle / model).max(model / angle);
            }
        }
    }
    rep.push(
        "half_tangent_monotone",
        monotone,
        if monotone { 0.0 } else { 1.0 },
        0.0,
    );
    rep.push(
        "half_tangent_angle",
        final_angle < opts.angle_tol,
        final_angle,
        opts.angle_tol,
    );
    rep.push("half_tangent_model", model_factor <= 3.0, model_factor, 3.0);

    // sign audit and (d) joins -----------------------------------------------
    let sign_of = |i: usize| -> Option<i8> {
        bend.edge_ids
            .iter()
            .position(|id| *id == figure.edges[i].id)
            .map(|p| bend.signs[p])
    };
    let mut unbalanced = 0;
    let mut first_diff: f64 = 0.0;
    let mut curvature_err: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    let delta = 1e-4 * bend.amplitude;
    let limit = bend.kappa / (bend.amplitude * bend.amplitude);
    let mut cache: Vec<Option<[Option<f64>; 2]>> = vec![None; figure.edges.len()];
    let mut radii = |i: usize, sign: f64| -> [Option<f64>; 2] {
        *cache[i].get_or_insert_with(|| {
            [1.0, 2.0].map(|m| radius_at_height(bend, figure, i, sign * m * delta))
        })
    };
    for &c in &figure.cells {
        let edges = figure.cell_edges(c);
        let plus = edges.iter().copied().find(|&i| sign_of(i) == Some(1));
        let minus = edges.iter().copied().find(|&i| sign_of(i) == Some(-1));
        let (Some(p), Some(m)) = (plus, minus) else {
            unbalanced += 1;
            continue;
        };
        let up = radii(p, 1.0);
        let down = radii(m, -1.0);
        match (up, down, bend.amplitude > 0.0) {
            ([Some(u1), Some(u2)], [Some(d1), Some(d2)], true) => {
                first_diff = first_diff.max(((u1 - d1) / (2.0 * delta)).abs());
                for (a, b) in [(u1, u2), (d1, d2)] {
                    let second = (b - 2.0 * a) / (delta * delta);
                    curvature_err = curvature_err.max((second - limit).abs() / limit);
                }
            }
            _ => {
                first_diff = f64::INFINITY;
                curvature_err = f64::INFINITY;
            }
        }
        let azimuth = |i: usize| {
            let eps = bend.kappa * 1e-6;
            edge_point_at_axis_distance(&figure.edges[i], &bend.frame, eps)
                .map(|q| bend.frame.local(&q).1)
                .unwrap_or(0.0)
        };
        let gap = wrap_angle(azimuth(p) - azimuth(m));
        mismatch = mismatch.max(gap.min(2.0 * PI - gap));
    }
    rep.push("sign_audit", unbalanced == 0, unbalanced as f64, 0.0);
    rep.push(
        "join_first_difference",
        first_diff <= opts.join_tol,
        first_diff,
        opts.join_tol,
    );
    rep.push(
        "join_curvature",
        curvature_err <= opts.curvature_tol,
        curvature_err,
        opts.curvature_tol,
    );
    // recorded only: the one-sided curvature vectors live in different azimuthal planes
    rep.push("join_curvature_mismatch", true, mismatch, PI);

    rep.push(
        "inverse_roundtrip",
        roundtrip <= opts.roundtrip_tol,
        roundtrip,
        opts.roundtrip_tol,
    );
    rep
}

/// Azimuth range `(start, span)` swept by a face sector about the bend axis.
fn face_arc(bend: &NodeBend, figure: &VertexFigure, face: &FacePatch) -> (f64, f64) {
    let a = figure.edges[face.edges[0]].dir();
    let b = figure.edges[face.edges[1]].dir();
    let (aa, ab) = (bend.frame.azimuth(&a), bend.frame.azimuth(&b));
    let mid = bend
        .frame
        .azimuth(&(face.point(figure, 1e-3, 0.5) - figure.origin()));
    if wrap_angle(mid - aa) < wrap_angle(ab - aa) {
        (aa, wrap_angle(ab - aa))
    } else {
        (ab, wrap_angle(aa - ab))
    }
}

/// `λ` at which the face point at fraction `s` has azimuth offset `target` from `start`.
fn lambda_at_azimuth(
    bend: &NodeBend,
    figure: &VertexFigure,
    face: &FacePatch,
    s: f64,
    (start, span): (f64, f64),
    target: f64,
) -> f64 {
    let offset = |l: f64| {
        let (_, a, _) = bend.frame.local(&face.point(figure, s, l));
        // offsets just below the arc start wrap to ~2π; fold them back
        let w = wrap_angle(a - start);
        if w > 0.5 * (span + 2.0 * PI) {
            w - 2.0 * PI
        } else {
            w
        }
    };
    // the first edge may be either end of the arc
    let increasing = offset(0.75) > offset(0.25);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (offset(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest angle between image normals on the two sides of the azimuth planes that
/// cross the faces, sampled at `α_i ± span / resolution`.
pub fn crease_jump(bend: &NodeBend, figure: &VertexFigure, resolution: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for face in &figure.faces {
        let (start, span) = face_arc(bend, figure, face);
        let step = span / resolution as f64;
        let s_max = face_extent(figure, face, bend.r_ball);
        for &alpha in &bend.azimuths {
            let off = wrap_angle(alpha - start);
            if !(off > 2.0 * step && off < span - 2.0 * step) {
                continue;
            }
            for m in 0..12 {
                let s = s_max * 10f64.powf(-3.0 + 3.0 * m as f64 / 11.0);
                let l0 = lambda_at_azimuth(bend, figure, face, s, (start, span), off);
                let (eps, _, _) = bend.frame.local(&face.point(figure, s, l0));
                if eps >= bend.kappa {
                    continue;
                }
                let lm = lambda_at_azimuth(bend, figure, face, s, (start, span), off - step);
                let lp = lambda_at_azimuth(bend, figure, face, s, (start, span), off + step);
                let nm = image_normal(bend, figure, face, s, lm);
                let np = image_normal(bend, figure, face, s, lp);
                worst = worst.max(angle_between(&nm, &np));
            }
        }
    }
    worst
}

/// Ratio of the crease jumps of the smooth and the linear azimuthal profile.
///
/// Returns 1 when the linear bend has no jump at all (zero amplitude).
pub fn crease_ratio(
    figure: &VertexFigure,
    coloring: &TwoColoring,
    params: &BendParams,
    resolution: usize,
) -> Result<f64, BendError> {
    let linear = soften_node(figure, coloring, &params.with_interp(Interp::Linear))?;
    let smooth = soften_node(figure, coloring, &params.with_interp(Interp::Smooth))?;
    let jl = crease_jump(&linear, figure, resolution);
    let js = crease_jump(&smooth, figure, resolution);
    Ok(if jl == 0.0 { 1.0 } else { js / jl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::cube_node_figure;

    fn coloring() -> TwoColoring {
        TwoColoring::new((1..=6u32).map(|v| (v, if v % 3 == 0 { -1i64 } else { 1 }))).unwrap()
    }

    fn quick() -> VerifyOptions {
        VerifyOptions {
            support_samples: 2000,
            jacobian_samples: 300,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn phi_lemma_passes() {
        let r = verify_phi_lemma();
        assert!(r.pass, "{:?}", r.failures());
    }

    #[test]
    fn default_cube_bend_passes() {
        let fig = cube_node_figure();
        let b = soften_node(&fig, &coloring(), &BendParams::default()).unwrap();
        let r = verify_node(&b, &fig, &quick());
        assert!(r.pass, "{:#?}", r.checks);
    }

    #[test]
    fn linear_profile_fails_only_the_normal_field() {
        let fig = cube_node_figure();
        let params = BendParams::default().with_interp(Interp::Linear);
        let b = soften_node(&fig, &coloring(), &params).unwrap();
        let r = verify_node(&b, &fig, &quick());
        assert_eq!(r.failures(), vec!["normal_field"], "{:#?}", r.checks);
    }

    #[test]
    fn identity_bend_fails_half_tangents() {
        let fig = cube_node_figure();
        let params = BendParams {
            amp_fraction: 0.0,
            ..BendParams::default()
        };
        let b = soften_node(&fig, &coloring(), &params).unwrap();
        let r = verify_node(&b, &fig, &quick());
        for name in ["support_fixed", "support_ball", "jacobian", "normal_field"] {
            assert!(r.check(name).unwrap().pass, "{name}");
        }
        assert!(!r.check("half_tangent_angle").unwrap().pass);
        assert!(!r.check("half_tangent_monotone").unwrap().pass);
    }

    #[test]
    fn zero_amplitude_crease_ratio_is_one() {
        let params = BendParams {
            amp_fraction: 0.0,
            ..BendParams::default()
        };
        assert_eq!(
            crease_ratio(&cube_node_figure(), &coloring(), &params, 64).unwrap(),
            1.0
        );
    }

    #[test]
    fn report_json_shape() {
        let r = verify_phi_lemma();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["pass"], true);
        let first = &v["checks"][0];
        for key in ["name", "pass", "value", "tolerance"] {
            assert!(first.get(key).is_some());
        }
    }
}
