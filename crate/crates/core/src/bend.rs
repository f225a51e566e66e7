//! The softening transform.
//!
//! Around a node `V` we pick an axis line `t` and cylindrical coordinates
//! `(ε, α, h)` about it. Inside the cylinder `ε < κ` every point is pushed along
//! the axis by
//!
//! ```text
//! τ(ε, α) = A · φ(ε/κ) · L(α),      φ(x) = (1 - x)³ · arccos(1 - x)
//! ```
//!
//! where `L` interpolates the edge signs `σ_i` between the edge azimuths `α_i`.
//! Because `φ(x) ~ √(2x)` near 0, every edge image leaves `V` tangent to the
//! axis, upward for `σ = +1` and downward for `σ = -1`.
//!
//! Two evaluation modes exist. `Figure` applies `h ↦ h + τ` literally (it is not
//! compactly supported). `Compact` multiplies `τ` by an even cutoff `χ(h)` so that
//! the map is the identity outside `{ε < κ, |h| < 0.9 r}`, which sits inside the
//! ball `B(V, r)`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    angle_between, angle_to_line, arr, perpendicular, v3, wrap_angle, MonotoneCubic, Vec3,
};
use crate::graphcolor::{two_color, validate_coloring, GraphError, TwoColoring};
use crate::tiling::{
    interior_figures, spherical_subdivision, EdgeCurve, EdgeId, EdgeKind, NodeId, TilingError,
    TilingPatch, VertexFigure,
};

/// Samples tried by [`choose_axis`] before giving up.
pub const AXIS_SEARCH_LIMIT: usize = 100_000;
/// Refinement steps of the κ search.
pub const KAPPA_SEARCH_STEPS: usize = 20;
/// Number of halvings in the azimuth-track grid `κ·2^-j`.
pub const TRACK_LEVELS: usize = 20;
/// Edges closer than this angle (radians) to the axis make κ meaningless.
pub const DEGENERATE_ANGLE: f64 = 1e-3;
/// Inner radius of the compact cutoff as a fraction of `r_ball`.
pub const CUTOFF_INNER: f64 = 0.5;
/// Outer radius of the compact cutoff as a fraction of `r_ball`.
pub const CUTOFF_OUTER: f64 = 0.9;
/// Upper clamp on κ as a fraction of `r_ball`.
pub const KAPPA_CLAMP: f64 = 0.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BendError {
    #[error("argument {0} outside [0, 1]")]
    DomainError(f64),
    #[error("derivatives of phi are unbounded at 0")]
    DerivativeAtZero,
    #[error("no admissible axis found in {0} samples")]
    AxisSearchExhausted(usize),
    #[error("degenerate vertex figure: {0}")]
    DegenerateFigure(String),
    #[error("bend is not invertible: monotonicity product {0} >= 1")]
    NotInvertible(f64),
    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Tiling(#[from] TilingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {node}: {source}")]
    Node {
        node: NodeId,
        #[source]
        source: Box<BendError>,
    },
}

impl BendError {
    pub fn name(&self) -> &'static str {
        match self {
            BendError::DomainError(_) => "DomainError",
            BendError::DerivativeAtZero => "DerivativeAtZero",
            BendError::AxisSearchExhausted(_) => "AxisSearchExhausted",
            BendError::DegenerateFigure(_) => "DegenerateFigure",
            BendError::NotInvertible(_) => "NotInvertible",
            BendError::InvalidColoring(_) => "InvalidColoring",
            BendError::InvalidParams(_) => "InvalidParams",
            BendError::Tiling(t) => t.name(),
            BendError::Graph(g) => g.name(),
            BendError::Node { source, .. } => source.name(),
        }
    }
}

// ---------------------------------------------------------------------------
// the profile φ

fn phi0(x: f64) -> f64 {
    let y = 1.0 - x;
    y * y * y * y.acos()
}

fn phi1(x: f64) -> f64 {
    if x < 1e-9 {
        return 1.0 / (2.0 * x).sqrt();
    }
    let y = 1.0 - x;
    let root = (x * (2.0 - x)).sqrt();
    y * y * y / root - 3.0 * y * y * y.acos()
}

fn phi2(x: f64) -> f64 {
    if x < 1e-9 {
        return -(2.0 * x).powf(-1.5);
    }
    let y = 1.0 - x;
    if y < 1e-9 {
        return 3.0 * PI * y;
    }
    let q = x * (2.0 - x);
    let root = q.sqrt();
    y * y * (2.0 * x * x - 4.0 * x - 1.0) / (q * root) - 3.0 * y * y / root + 6.0 * y * y.acos()
}

/// `φ`, `φ'` or `φ''` at `x ∈ [0, 1]`.
pub fn phi_eval(x: f64, order: u8) -> Result<f64, BendError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(BendError::DomainError(x));
    }
    match order {
        0 => Ok(phi0(x)),
        _ if x == 0.0 => Err(BendError::DerivativeAtZero),
        1 => Ok(phi1(x)),
        2 => Ok(phi2(x)),
        _ => Err(BendError::InvalidParams(format!(
            "derivative order {order} not supported"
        ))),
    }
}

/// Maximum of `φ` on `[0, 1]` (attained near `x ≈ 0.14`).
pub fn phi_max() -> f64 {
    static MAX: OnceLock<f64> = OnceLock::new();
    *MAX.get_or_init(|| {
        // φ is unimodal: golden-section search
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, 0.6);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if phi0(c) < phi0(d) {
                a = c;
            } else {
                b = d;
            }
        }
        phi0(0.5 * (a + b))
    })
}

/// Quintic smoothstep `6u⁵ − 15u⁴ + 10u³`.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

// ---------------------------------------------------------------------------
// parameters and frames

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BendMode {
    Compact,
    Figure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BendParams {
    pub seed: u64,
    pub r_fraction: f64,
    pub amp_fraction: f64,
    pub theta_gap: f64,
    pub theta_pole: f64,
    pub kappa_shrink: f64,
    pub interp: Interp,
    pub mode: BendMode,
}

impl Default for BendParams {
    fn default() -> Self {
        BendParams {
            seed: 7,
            r_fraction: 0.45,
            amp_fraction: 0.25,
            theta_gap: 0.05,
            theta_pole: 0.05,
            kappa_shrink: 0.9,
            interp: Interp::Smooth,
            mode: BendMode::Compact,
        }
    }
}

impl BendParams {
    /// The literal cylindrical map with amplitude `r/2`.
    pub fn figure_mode(mut self) -> Self {
        self.mode = BendMode::Figure;
        self.amp_fraction = 0.5;
        self
    }

    pub fn with_interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn validate(&self) -> Result<(), BendError> {
        let bad = |m: &str| Err(BendError::InvalidParams(m.into()));
        if !(self.r_fraction > 0.0 && self.r_fraction <= 0.5) {
            return bad("r_fraction must lie in (0, 0.5]");
        }
        if !(0.0..=0.5).contains(&self.amp_fraction) {
            return bad("amp_fraction must lie in [0, 0.5]");
        }
        if !(self.kappa_shrink > 0.0 && self.kappa_shrink < 1.0) {
            return bad("kappa_shrink must lie in (0, 1)");
        }
        if !(self.theta_gap > 0.0 && self.theta_pole > 0.0) {
            return bad("theta_gap and theta_pole must be positive");
        }
        Ok(())
    }
}

/// Right-handed orthonormal frame `(i, j, k)` at the node; `k` spans the axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisFrame {
    pub origin: [f64; 3],
    pub k_dir: [f64; 3],
    pub i_dir: [f64; 3],
    pub j_dir: [f64; 3],
}

impl AxisFrame {
    /// Frame with axis `k` and an arbitrary completion.
    pub fn from_axis(origin: Vec3, k: Vec3) -> Self {
        let k = k.normalize();
        let i = perpendicular(&k);
        let j = k.cross(&i);
        AxisFrame {
            origin: arr(&origin),
            k_dir: arr(&k),
            i_dir: arr(&i),
            j_dir: arr(&j),
        }
    }

    pub fn o(&self) -> Vec3 {
        v3(&self.origin)
    }
    pub fn i(&self) -> Vec3 {
        v3(&self.i_dir)
    }
    pub fn j(&self) -> Vec3 {
        v3(&self.j_dir)
    }
    pub fn k(&self) -> Vec3 {
        v3(&self.k_dir)
    }

    /// Same axis, azimuths shifted by `-angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let i = self.i() * c + self.j() * s;
        let j = self.k().cross(&i);
        AxisFrame {
            i_dir: arr(&i),
            j_dir: arr(&j),
            ..*self
        }
    }

    /// Cylindrical coordinates `(ε, α, h)` of `p`, with `α ∈ [0, 2π)`.
    pub fn local(&self, p: &Vec3) -> (f64, f64, f64) {
        let d = p - self.o();
        let (x, y, h) = (d.dot(&self.i()), d.dot(&self.j()), d.dot(&self.k()));
        (x.hypot(y), wrap_angle(y.atan2(x)), h)
    }

    /// Azimuth of a direction.
    pub fn azimuth(&self, d: &Vec3) -> f64 {
        wrap_angle(d.dot(&self.j()).atan2(d.dot(&self.i())))
    }

    /// Distance of `p` from the axis line.
    pub fn axis_distance(&self, p: &Vec3) -> f64 {
        let d = p - self.o();
        let k = self.k();
        (d - k * d.dot(&k)).norm()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let (i, j, k) = (self.i(), self.j(), self.k());
        let mut err: f64 = 0.0;
        for (a, b, want) in [
            (i, i, 1.0),
            (j, j, 1.0),
            (k, k, 1.0),
            (i, j, 0.0),
            (j, k, 0.0),
            (i, k, 0.0),
        ] {
            err = err.max((a.dot(&b) - want).abs());
        }
        err.max((i.cross(&j) - k).norm())
    }
}

/// Smallest angle between the line spanned by `k` and the planar sector spanned by
/// the unit directions `a` and `b`.
pub fn sector_angle_to_line(a: &Vec3, b: &Vec3, k: &Vec3) -> f64 {
    let n = a.cross(b);
    let ends = angle_to_line(a, k).min(angle_to_line(b, k));
    if n.norm() < 1e-15 {
        return ends;
    }
    let n = n.normalize();
    let mut best = ends;
    for kk in [*k, -*k] {
        let p = kk - n * kk.dot(&n);
        if p.norm() < 1e-15 {
            // k is normal to the sector plane: every direction is at a right angle
            continue;
        }
        if a.cross(&p).dot(&n) >= 0.0 && p.cross(b).dot(&n) >= 0.0 {
            best = best.min(kk.dot(&n).abs().min(1.0).asin());
        }
    }
    best
}

fn cyclic_min_gap(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    (0..n)
        .map(|i| {
            if i + 1 < n {
                sorted[i + 1] - sorted[i]
            } else {
                sorted[0] + TAU - sorted[n - 1]
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn axis_admissible(
    figure: &VertexFigure,
    k: &Vec3,
    frame: &AxisFrame,
    gap: f64,
    pole: f64,
) -> bool {
    let dirs: Vec<Vec3> = figure.edges.iter().map(|e| e.dir()).collect();
    if dirs.iter().any(|d| angle_to_line(d, k) < pole) {
        return false;
    }
    for f in &figure.faces {
        if f.normal.is_none() {
            continue;
        }
        if sector_angle_to_line(&dirs[f.edges[0]], &dirs[f.edges[1]], k) < pole {
            return false;
        }
    }
    let mut az: Vec<f64> = dirs.iter().map(|d| frame.azimuth(d)).collect();
    az.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cyclic_min_gap(&az) >= gap
}

/// Picks the first seeded direction whose azimuths are `theta_gap`-separated and
/// which stays `theta_pole` away from every edge and planar face sector; the frame is
/// then rotated so the smallest edge azimuth is 0.
pub fn choose_axis(
    figure: &VertexFigure,
    seed: u64,
    theta_gap: f64,
    theta_pole: f64,
) -> Result<AxisFrame, BendError> {
    if figure.edges.len() < 2 {
        return Err(BendError::DegenerateFigure("fewer than two edges".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..AXIS_SEARCH_LIMIT {
        let k: [f64; 3] = UnitSphere.sample(&mut rng);
        let k = v3(&k);
        let frame = AxisFrame::from_axis(figure.origin(), k);
        if axis_admissible(figure, &k, &frame, theta_gap, theta_pole) {
            let min = figure
                .edges
                .iter()
                .map(|e| frame.azimuth(&e.dir()))
                .fold(f64::INFINITY, f64::min);
            return Ok(frame.rotated(min));
        }
    }
    Err(BendError::AxisSearchExhausted(AXIS_SEARCH_LIMIT))
}

// ---------------------------------------------------------------------------
// κ

/// First point of `edge` at distance `eps` from the axis, if it reaches that far.
pub fn edge_point_at_axis_distance(edge: &EdgeCurve, frame: &AxisFrame, eps: f64) -> Option<Vec3> {
    if eps <= 0.0 {
        return Some(edge.origin());
    }
    match edge.kind {
        EdgeKind::Straight => {
            let s = eps / edge.dir().cross(&frame.k()).norm();
            (s <= edge.length).then(|| edge.point(s))
        }
        EdgeKind::Curved => {
            let dist = |s: f64| frame.axis_distance(&edge.point(s));
            // start from the tangent guess and expand
            let sin = edge.dir().cross(&frame.k()).norm();
            let mut hi = (2.0 * eps / sin).min(edge.length);
            while dist(hi) < eps {
                if hi >= edge.length {
                    return None;
                }
                hi = (2.0 * hi).min(edge.length);
            }
            let mut lo = 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if dist(mid) < eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-16 * hi {
                    break;
                }
            }
            Some(edge.point(0.5 * (lo + hi)))
        }
    }
}

const FIBERS_PER_FACE: usize = 64;
const SAMPLES_PER_FIBER: usize = 64;

/// Point sets ("fibers") sweeping the figure outward from the node.
fn figure_fibers(figure: &VertexFigure) -> Vec<Box<dyn Fn(f64) -> Vec3 + '_>> {
    let mut out: Vec<Box<dyn Fn(f64) -> Vec3 + '_>> = Vec::new();
    for e in &figure.edges {
        out.push(Box::new(move |s: f64| e.point(s * e.length)));
    }
    for f in &figure.faces {
        for l in 1..FIBERS_PER_FACE {
            let lambda = l as f64 / FIBERS_PER_FACE as f64;
            out.push(Box::new(move |s: f64| f.point(figure, s, lambda)));
        }
    }
    out
}

/// `κ = kappa_shrink · κ*`, clamped to `0.4 r_ball`, where `κ*` is the largest value
/// found by a dyadic search such that every sampled point of the figure within
/// axis distance `κ*` lies in the ball of radius `r_ball / 2`.
pub fn compute_kappa(
    figure: &VertexFigure,
    frame: &AxisFrame,
    r_ball: f64,
    kappa_shrink: f64,
) -> Result<f64, BendError> {
    let k = frame.k();
    let worst = figure
        .edges
        .iter()
        .map(|e| angle_to_line(&e.dir(), &k))
        .fold(f64::INFINITY, f64::min);
    if worst < DEGENERATE_ANGLE {
        return Err(BendError::DegenerateFigure(format!(
            "an edge leaves the node at angle {worst:.3e} to the axis"
        )));
    }
    let star = kappa_star(figure, frame, r_ball);
    if !(star > 0.0) {
        return Err(BendError::DegenerateFigure(
            "figure meets the axis inside the ball".into(),
        ));
    }
    Ok((kappa_shrink * star).min(KAPPA_CLAMP * r_ball))
}

/// The unshrunk, unclamped sampled `κ*`.
pub fn kappa_star(figure: &VertexFigure, frame: &AxisFrame, r_ball: f64) -> f64 {
    let half = 0.5 * r_ball;
    let o = figure.origin();
    // axis distances of sampled points at distance ≥ r/2 from the node
    let mut blocking = f64::INFINITY;
    for fiber in figure_fibers(figure) {
        let dist = |s: f64| (fiber(s) - o).norm();
        let mut prev = 0.0;
        let mut crossed = false;
        for m in 1..=SAMPLES_PER_FIBER {
            let s = m as f64 / SAMPLES_PER_FIBER as f64;
            let p = fiber(s);
            if (p - o).norm() >= half {
                if !crossed {
                    // exact crossing of the sphere of radius r/2 on this fiber
                    let (mut lo, mut hi) = (prev, s);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if dist(mid) >= half {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    blocking = blocking.min(frame.axis_distance(&fiber(hi)));
                    crossed = true;
                }
                blocking = blocking.min(frame.axis_distance(&p));
            }
            prev = s;
        }
    }
    let ok = |kappa: f64| kappa < blocking;
    let (mut lo, mut hi) = (0.0, half);
    if ok(hi) {
        return hi;
    }
    for _ in 0..KAPPA_SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

// ---------------------------------------------------------------------------
// azimuth tracks

#[derive(Serialize, Deserialize)]
struct TrackKnots {
    eps: Vec<f64>,
    alpha: Vec<f64>,
}

/// Azimuth `α_i(ε)` of a curved edge where it crosses the cylinder of radius `ε`.
///
/// Values are unwrapped around the half-tangent azimuth, which is the knot at `ε = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrackKnots", into = "TrackKnots")]
pub struct AzimuthTrack {
    cubic: MonotoneCubic,
}

impl TryFrom<TrackKnots> for AzimuthTrack {
    type Error = String;
    fn try_from(k: TrackKnots) -> Result<Self, String> {
        if k.eps.len() != k.alpha.len() || k.eps.len() < 2 {
            return Err("azimuth track needs matching eps/alpha lists of length >= 2".into());
        }
        if k.eps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("azimuth track eps knots must increase".into());
        }
        Ok(AzimuthTrack {
            cubic: MonotoneCubic::new(k.eps, k.alpha),
        })
    }
}

impl From<AzimuthTrack> for TrackKnots {
    fn from(t: AzimuthTrack) -> Self {
        let (eps, alpha) = t.cubic.knots();
        TrackKnots {
            eps: eps.to_vec(),
            alpha: alpha.to_vec(),
        }
    }
}

impl AzimuthTrack {
    pub fn eval(&self, eps: f64) -> f64 {
        self.cubic.eval(eps)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        self.cubic.knots()
    }

    /// Largest deviation of the knot values from the `ε → 0` limit.
    pub fn spread(&self) -> f64 {
        let (_, a) = self.knots();
        a.iter().map(|x| (x - a[0]).abs()).fold(0.0, f64::max)
    }
}

fn unwrap_near(raw: f64, center: f64) -> f64 {
    let d = (raw - center + PI).rem_euclid(TAU) - PI;
    center + d
}

fn build_track(
    edge: &EdgeCurve,
    frame: &AxisFrame,
    kappa: f64,
    limit: f64,
) -> Result<AzimuthTrack, BendError> {
    let mut eps = vec![0.0];
    let mut alpha = vec![limit];
    for j in (0..=TRACK_LEVELS).rev() {
        let e = kappa * 0.5f64.powi(j as i32);
        let p = edge_point_at_axis_distance(edge, frame, e).ok_or_else(|| {
            BendError::DegenerateFigure(format!(
                "edge {} does not reach axis distance {e}",
                edge.id
            ))
        })?;
        let (_, a, _) = frame.local(&p);
        eps.push(e);
        alpha.push(unwrap_near(a, limit));
    }
    Ok(AzimuthTrack {
        cubic: MonotoneCubic::new(eps, alpha),
    })
}

// ---------------------------------------------------------------------------
// the bend of one node

/// The bending data of one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeBend {
    pub frame: AxisFrame,
    pub kappa: f64,
    pub amplitude: f64,
    pub r_ball: f64,
    /// `0 = α_1 < … < α_n < 2π`, half-tangent azimuths of the figure's edges.
    pub azimuths: Vec<f64>,
    pub signs: Vec<i8>,
    /// Figure edge id carrying each azimuth.
    pub edge_ids: Vec<EdgeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracks: Option<Vec<AzimuthTrack>>,
    pub mode: BendMode,
    pub interp: Interp,
    /// `|h|` below which the compact cutoff is 1 and above which it is 0.
    pub cutoff: [f64; 2],
}

impl NodeBend {
    /// Assembles a bend and checks the invariants that make it a homeomorphism.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        frame: AxisFrame,
        kappa: f64,
        amplitude: f64,
        r_ball: f64,
        azimuths: Vec<f64>,
        signs: Vec<i8>,
        edge_ids: Vec<EdgeId>,
        tracks: Option<Vec<AzimuthTrack>>,
        mode: BendMode,
        interp: Interp,
    ) -> Result<Self, BendError> {
        let bend = NodeBend {
            frame,
            kappa,
            amplitude,
            r_ball,
            azimuths,
            signs,
            edge_ids,
            tracks,
            mode,
            interp,
            cutoff: [CUTOFF_INNER * r_ball, CUTOFF_OUTER * r_ball],
        };
        bend.validate()?;
        Ok(bend)
    }

    /// Checks the stored invariants (used after deserialization as well).
    pub fn validate(&self) -> Result<(), BendError> {
        let n = self.azimuths.len();
        let bad = |m: String| Err(BendError::InvalidParams(m));
        if n < 2 || self.signs.len() != n || self.edge_ids.len() != n {
            return bad("azimuths, signs and edge ids must have equal length >= 2".into());
        }
        if self.azimuths[0] != 0.0
            || self.azimuths.windows(2).any(|w| !(w[0] < w[1]))
            || !(self.azimuths[n - 1] < TAU)
        {
            return bad("azimuths must satisfy 0 = a_1 < ... < a_n < 2pi".into());
        }
        if self.signs.iter().any(|s| *s != 1 && *s != -1) {
            return bad("signs must be +1 or -1".into());
        }
        if !(self.kappa > 0.0 && self.kappa <= KAPPA_CLAMP * self.r_ball * (1.0 + 1e-12)) {
            return bad(format!("kappa {} outside (0, 0.4 r]", self.kappa));
        }
        if !(self.amplitude >= 0.0 && self.amplitude <= 0.5 * self.r_ball * (1.0 + 1e-12)) {
            return bad(format!("amplitude {} outside [0, r/2]", self.amplitude));
        }
        if let Some(t) = &self.tracks {
            if t.len() != n {
                return bad("one azimuth track per edge required".into());
            }
        }
        if self.frame.orthonormality_error() > 1e-12 {
            return bad("axis frame is not orthonormal".into());
        }
        if self.mode == BendMode::Compact {
            let product = self.monotonicity_product();
            if product >= 1.0 {
                return Err(BendError::NotInvertible(product));
            }
        }
        Ok(())
    }

    /// `A · max φ · max |χ'|`; the compact map is monotone in `h` when this is below 1.
    pub fn monotonicity_product(&self) -> f64 {
        let width = self.cutoff[1] - self.cutoff[0];
        self.amplitude * phi_max() * 15.0 / (8.0 * width)
    }

    /// Edge azimuths at axis distance `eps` (the tracks, or the constant azimuths).
    pub fn azimuths_at(&self, eps: f64) -> Vec<f64> {
        match &self.tracks {
            None => self.azimuths.clone(),
            Some(tracks) => tracks.iter().map(|t| t.eval(eps)).collect(),
        }
    }

    /// The azimuthal sign profile `L(α)` at axis distance `eps`.
    pub fn profile(&self, eps: f64, alpha: f64) -> f64 {
        let az = self.azimuths_at(eps);
        let n = az.len();
        for i in 0..n {
            let next = (i + 1) % n;
            let width = wrap_angle(az[next] - az[i]);
            let width = if width == 0.0 { TAU } else { width };
            let off = wrap_angle(alpha - az[i]);
            if off < width {
                let u = off / width;
                let (a, b) = (self.signs[i] as f64, self.signs[next] as f64);
                return match self.interp {
                    Interp::Linear => a + (b - a) * u,
                    Interp::Smooth => a + (b - a) * smoothstep(u),
                };
            }
        }
        // only reachable through rounding at a knot
        self.signs[0] as f64
    }

    pub fn tau(&self, eps: f64, alpha: f64) -> f64 {
        if eps >= self.kappa {
            return 0.0;
        }
        self.amplitude * phi0(eps / self.kappa) * self.profile(eps, alpha)
    }

    /// The even cutoff in `h` (identically 1 in figure mode).
    pub fn cutoff_value(&self, h: f64) -> f64 {
        if self.mode == BendMode::Figure {
            return 1.0;
        }
        let a = h.abs();
        let [c0, c1] = self.cutoff;
        if a <= c0 {
            1.0
        } else if a >= c1 {
            0.0
        } else {
            1.0 - smoothstep((a - c0) / (c1 - c0))
        }
    }

    fn cutoff_slope(&self, h: f64) -> f64 {
        let a = h.abs();
        let [c0, c1] = self.cutoff;
        if self.mode == BendMode::Figure || a <= c0 || a >= c1 {
            return 0.0;
        }
        let u = (a - c0) / (c1 - c0);
        -30.0 * u * u * (u - 1.0) * (u - 1.0) / (c1 - c0) * h.signum()
    }

    /// Whether `p` lies in the region the map can move.
    pub fn in_support(&self, p: &Vec3) -> bool {
        let (eps, _, h) = self.frame.local(p);
        eps < self.kappa && (self.mode == BendMode::Figure || h.abs() < self.cutoff[1])
    }

    pub fn map(&self, p: &Vec3) -> Vec3 {
        let (eps, alpha, h) = self.frame.local(p);
        if eps >= self.kappa {
            return *p;
        }
        let shift = self.tau(eps, alpha) * self.cutoff_value(h);
        if shift == 0.0 {
            return *p;
        }
        p + self.frame.k() * shift
    }

    pub fn inverse(&self, q: &Vec3) -> Vec3 {
        let (eps, alpha, hq) = self.frame.local(q);
        if eps >= self.kappa {
            return *q;
        }
        let c = self.tau(eps, alpha);
        if c == 0.0 {
            return *q;
        }
        let h = match self.mode {
            BendMode::Figure => hq - c,
            BendMode::Compact => self.solve_height(c, hq),
        };
        let shift = c * self.cutoff_value(h);
        q - self.frame.k() * shift
    }

    /// Solves `h + c·χ(h) = target` (monotone in `h`) by safeguarded Newton.
    fn solve_height(&self, c: f64, target: f64) -> f64 {
        let g = |h: f64| h + c * self.cutoff_value(h) - target;
        let (mut lo, mut hi) = (target - c.abs(), target + c.abs());
        if g(lo) == 0.0 {
            return lo;
        }
        if g(hi) == 0.0 {
            return hi;
        }
        let mut h = target - c;
        for _ in 0..200 {
            let v = g(h);
            if v == 0.0 {
                return h;
            }
            if v < 0.0 {
                lo = h;
            } else {
                hi = h;
            }
            let slope = 1.0 + c * self.cutoff_slope(h);
            let mut next = h - v / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - h).abs() <= 4e-16 * (1.0 + h.abs()) || hi - lo <= 1e-15 {
                return next;
            }
            h = next;
        }
        h
    }
}

/// `τ(ε, α)` of a bend.
pub fn tau(bend: &NodeBend, eps: f64, alpha: f64) -> f64 {
    bend.tau(eps, alpha)
}

pub fn bend_map(bend: &NodeBend, p: &Vec3) -> Vec3 {
    bend.map(p)
}

pub fn bend_map_inverse(bend: &NodeBend, q: &Vec3) -> Vec3 {
    bend.inverse(q)
}

/// Epsilon used to read the spherical subdivision off a figure.
pub fn subdivision_epsilon(figure: &VertexFigure) -> f64 {
    let o = figure.origin();
    let shortest = figure
        .edges
        .iter()
        .map(|e| (e.point(e.length) - o).norm())
        .fold(f64::INFINITY, f64::min);
    0.5 * shortest.min(figure.clearance)
}

/// Checks that every cell at the node sees both signs among its edges.
pub fn sign_audit(figure: &VertexFigure, coloring: &TwoColoring) -> Result<(), BendError> {
    for &c in &figure.cells {
        let signs: Vec<i8> = figure
            .cell_edges(c)
            .iter()
            .filter_map(|&i| coloring.sign(figure.edges[i].id))
            .collect();
        if !(signs.contains(&1) && signs.contains(&-1)) {
            return Err(BendError::InvalidColoring(format!(
                "cell {c} sees a single sign"
            )));
        }
    }
    Ok(())
}

/// Builds the bend of one node from its figure and a coloring of its vertex polyhedron.
pub fn soften_node(
    figure: &VertexFigure,
    coloring: &TwoColoring,
    params: &BendParams,
) -> Result<NodeBend, BendError> {
    params.validate()?;
    figure.validate()?;
    let graph = spherical_subdivision(figure, subdivision_epsilon(figure))?;
    let report = validate_coloring(&graph, coloring)?;
    if !report.valid {
        return Err(BendError::InvalidColoring(format!(
            "{} monochromatic face(s)",
            report.monochromatic_faces.len()
        )));
    }
    sign_audit(figure, coloring)?;

    let frame = choose_axis(figure, params.seed, params.theta_gap, params.theta_pole)?;
    let r_ball = params.r_fraction * figure.node_spacing;
    let kappa = compute_kappa(figure, &frame, r_ball, params.kappa_shrink)?;

    let mut order: Vec<(f64, usize)> = figure
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (frame.azimuth(&e.dir()), i))
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // the frame was rotated so that the first azimuth is zero up to rounding
    order[0].0 = 0.0;
    let azimuths: Vec<f64> = order.iter().map(|x| x.0).collect();
    let edge_ids: Vec<EdgeId> = order.iter().map(|x| figure.edges[x.1].id).collect();
    let signs: Vec<i8> = edge_ids
        .iter()
        .map(|id| {
            coloring
                .sign(*id)
                .ok_or(BendError::Graph(GraphError::MissingVertex(*id)))
        })
        .collect::<Result<_, _>>()?;

    let tracks = if figure.has_curved_edges() {
        let tracks: Vec<AzimuthTrack> = order
            .iter()
            .map(|&(a, i)| build_track(&figure.edges[i], &frame, kappa, a))
            .collect::<Result<_, _>>()?;
        check_track_order(&tracks, kappa)?;
        Some(tracks)
    } else {
        None
    };

    NodeBend::new(
        frame,
        kappa,
        params.amp_fraction * r_ball,
        r_ball,
        azimuths,
        signs,
        edge_ids,
        tracks,
        params.mode,
        params.interp,
    )
}

fn check_track_order(tracks: &[AzimuthTrack], kappa: f64) -> Result<(), BendError> {
    for j in 0..=TRACK_LEVELS {
        let e = kappa * 0.5f64.powi(j as i32);
        let a: Vec<f64> = tracks.iter().map(|t| t.eval(e)).collect();
        let rel: Vec<f64> = a.iter().map(|x| wrap_angle(x - a[0])).collect();
        if rel.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(BendError::DegenerateFigure(format!(
                "azimuth tracks change cyclic order at eps = {e:.3e}"
            )));
        }
    }
    Ok(())
}

/// All interior nodes of a patch, softened independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftenedPatch {
    #[serde(default = "crate::format_version")]
    pub format_version: u32,
    pub params: BendParams,
    pub patch: TilingPatch,
    pub bends: BTreeMap<NodeId, NodeBend>,
}

impl SoftenedPatch {
    /// The bend whose ball contains `p`, if any.
    pub fn bend_at(&self, p: &Vec3) -> Option<&NodeBend> {
        self.bends
            .values()
            .find(|b| (p - b.frame.o()).norm() < b.r_ball)
    }

    pub fn map(&self, p: &Vec3) -> Vec3 {
        self.bend_at(p).map_or(*p, |b| b.map(p))
    }

    pub fn inverse(&self, q: &Vec3) -> Vec3 {
        self.bend_at(q).map_or(*q, |b| b.inverse(q))
    }

    /// Smallest gap `|V - W| - r_V - r_W` over pairs of bends (∞ for fewer than two).
    pub fn min_ball_gap(&self) -> f64 {
        let b: Vec<&NodeBend> = self.bends.values().collect();
        let mut gap = f64::INFINITY;
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                let d = (b[i].frame.o() - b[j].frame.o()).norm();
                gap = gap.min(d - b[i].r_ball - b[j].r_ball);
            }
        }
        gap
    }
}

/// Softens every interior node of `patch`, each with its own first-found coloring.
pub fn soften_patch(patch: &TilingPatch, params: &BendParams) -> Result<SoftenedPatch, BendError> {
    params.validate()?;
    patch.validate()?;
    let mut bends = BTreeMap::new();
    for (node, figure) in interior_figures(patch)? {
        let wrap = |e: BendError| BendError::Node {
            node,
            source: Box::new(e),
        };
        let graph = spherical_subdivision(&figure, subdivision_epsilon(&figure))
            .map_err(|e| wrap(e.into()))?;
        let coloring = two_color(&graph).map_err(|e| wrap(e.into()))?;
        bends.insert(node, soften_node(&figure, &coloring, params).map_err(wrap)?);
    }
    let soft = SoftenedPatch {
        format_version: crate::FORMAT_VERSION,
        params: *params,
        patch: patch.clone(),
        bends,
    };
    if soft.min_ball_gap() < 0.0 {
        return Err(BendError::InvalidParams("bending balls overlap".into()));
    }
    Ok(soft)
}

/// The angle between a direction and the axis, exposed for reports.
pub fn angle_to_axis(frame: &AxisFrame, d: &Vec3) -> f64 {
    angle_to_line(d, &frame.k())
}

/// Angle between two vectors, exposed for reports.
pub fn vector_angle(a: &Vec3, b: &Vec3) -> f64 {
    angle_between(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcolor::fixture_graph;
    use crate::tiling::{bent_cube_node, cube_node_figure};
    use rand::Rng;

    fn octahedron_coloring() -> TwoColoring {
        // -1 on the antipodal pair ±z (ids 3 and 6)
        TwoColoring::new((1..=6u32).map(|v| (v, if v % 3 == 0 { -1i64 } else { 1 }))).unwrap()
    }

    fn cube_bend(params: &BendParams) -> NodeBend {
        soften_node(&cube_node_figure(), &octahedron_coloring(), params).unwrap()
    }

    #[test]
    fn phi_reference_values() {
        assert_eq!(phi_eval(0.0, 0).unwrap(), 0.0);
        assert_eq!(phi_eval(1.0, 0).unwrap(), 0.0);
        assert!((phi_eval(0.5, 0).unwrap() - 0.1308996939).abs() < 1e-10);
        assert!((phi_eval(0.5, 2).unwrap() - 1.3133169).abs() < 1e-6);
        assert!(phi_eval(1.0, 1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn phi_domain_errors() {
        assert_eq!(phi_eval(-0.1, 0), Err(BendError::DomainError(-0.1)));
        assert_eq!(phi_eval(1.5, 1), Err(BendError::DomainError(1.5)));
        assert_eq!(phi_eval(0.0, 1), Err(BendError::DerivativeAtZero));
        assert_eq!(phi_eval(0.0, 2), Err(BendError::DerivativeAtZero));
    }

    #[test]
    fn phi_expansions_join_closed_forms() {
        // at the switch point the expansion and closed form agree to leading order
        let x: f64 = 1e-9;
        let closed = {
            let y = 1.0 - x;
            y * y * y / (x * (2.0 - x)).sqrt() - 3.0 * y * y * y.acos()
        };
        assert!((phi1(x) - closed).abs() / closed < 1e-3);
    }

    #[test]
    fn phi_max_location() {
        let m = phi_max();
        assert!(m > 0.34 && m < 0.345, "{m}");
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
    }

    #[test]
    fn sector_angle_cases() {
        let x = Vec3::x();
        let y = Vec3::y();
        // axis in the sector plane between the edges
        let k = Vec3::new(1.0, 1.0, 0.0).normalize();
        assert!(sector_angle_to_line(&x, &y, &k) < 1e-15);
        // axis straight above the sector
        assert!((sector_angle_to_line(&x, &y, &Vec3::z()) - PI / 2.0).abs() < 1e-12);
        // axis outside the sector: nearest is an endpoint
        let k = Vec3::new(-1.0, 0.2, 0.0).normalize();
        let want = angle_to_line(&y, &k).min(angle_to_line(&x, &k));
        assert!((sector_angle_to_line(&x, &y, &k) - want).abs() < 1e-15);
    }

    #[test]
    fn choose_axis_deterministic_and_admissible() {
        let fig = cube_node_figure();
        let a = choose_axis(&fig, 7, 0.1, 0.1).unwrap();
        let b = choose_axis(&fig, 7, 0.1, 0.1).unwrap();
        assert_eq!(a, b);
        assert!(a.orthonormality_error() < 1e-12);
        let mut az: Vec<f64> = fig.edges.iter().map(|e| a.azimuth(&e.dir())).collect();
        az.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!(az[0] < 1e-12 || az[5] > TAU - 1e-12);
        assert!(cyclic_min_gap(&az) >= 0.1 - 1e-12);
    }

    #[test]
    fn choose_axis_infeasible_gap() {
        assert_eq!(
            choose_axis(&cube_node_figure(), 7, TAU, 0.05),
            Err(BendError::AxisSearchExhausted(AXIS_SEARCH_LIMIT))
        );
    }

    #[test]
    fn kappa_degenerate_on_edge_axis() {
        let fig = cube_node_figure();
        let frame = AxisFrame::from_axis(Vec3::zeros(), Vec3::x());
        assert!(matches!(
            compute_kappa(&fig, &frame, 0.45, 0.9),
            Err(BendError::DegenerateFigure(_))
        ));
    }

    #[test]
    fn kappa_is_clamped() {
        let fig = cube_node_figure();
        let frame = AxisFrame::from_axis(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        let k = compute_kappa(&fig, &frame, 0.45, 0.9).unwrap();
        assert!(k > 0.0 && k <= 0.4 * 0.45);
    }

    #[test]
    fn tau_vanishes_at_kappa_and_matches_node_values() {
        for interp in [Interp::Linear, Interp::Smooth] {
            let b = cube_bend(&BendParams::default().with_interp(interp));
            for (i, &a) in b.azimuths.iter().enumerate() {
                assert_eq!(b.tau(b.kappa, a), 0.0);
                let eps = 0.3 * b.kappa;
                let want = b.amplitude * b.signs[i] as f64 * phi0(0.3);
                assert!((b.tau(eps, a) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn linear_profile_midpoint_between_opposite_signs() {
        let b = cube_bend(&BendParams::default().with_interp(Interp::Linear));
        let n = b.azimuths.len();
        let i = (0..n)
            .find(|&i| b.signs[i] != b.signs[(i + 1) % n])
            .unwrap();
        let next = b.azimuths.get(i + 1).copied().unwrap_or(TAU);
        let mid = 0.5 * (b.azimuths[i] + next);
        assert!(b.tau(0.5 * b.kappa, mid).abs() < 1e-15);
    }

    #[test]
    fn compact_roundtrip_and_fixed_points() {
        let b = cube_bend(&BendParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o = b.frame.o();
        for _ in 0..2000 {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let p = o + v3(&d) * (b.r_ball * rng.random::<f64>().cbrt());
            let q = b.map(&p);
            assert!((b.inverse(&q) - p).norm() <= 1e-12, "{p:?}");
            assert!((q - o).norm() <= b.r_ball);
        }
        assert_eq!(b.map(&o), o);
    }

    #[test]
    fn figure_mode_inverse_is_exact() {
        let b = cube_bend(&BendParams::default().figure_mode());
        assert_eq!(b.amplitude, 0.5 * b.r_ball);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let p = v3(&d) * (b.r_ball * rng.random::<f64>());
            let back = b.inverse(&b.map(&p));
            assert!((back - p).norm() <= 1e-12 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn too_large_amplitude_is_not_invertible() {
        let b = cube_bend(&BendParams::default());
        let err = NodeBend::new(
            b.frame,
            b.kappa,
            b.r_ball * 0.5,
            b.r_ball,
            b.azimuths.clone(),
            b.signs.clone(),
            b.edge_ids.clone(),
            None,
            BendMode::Compact,
            Interp::Smooth,
        );
        // 0.5 r is allowed and still invertible: 0.5·0.341·15/(8·0.4) ≈ 0.80
        assert!(err.is_ok());
        let mut narrow = b.clone();
        narrow.amplitude = 0.5 * b.r_ball;
        narrow.cutoff = [0.5 * b.r_ball, 0.6 * b.r_ball];
        assert!(matches!(
            narrow.validate(),
            Err(BendError::NotInvertible(_))
        ));
    }

    #[test]
    fn constant_coloring_rejected() {
        let g = fixture_graph("octahedron").unwrap();
        let c = TwoColoring::constant(&g, 1);
        let err = soften_node(&cube_node_figure(), &c, &BendParams::default()).unwrap_err();
        assert_eq!(err.name(), "InvalidColoring");
    }

    #[test]
    fn bent_node_tracks_start_at_half_tangents() {
        let fig = bent_cube_node();
        let b = soften_node(&fig, &octahedron_coloring(), &BendParams::default()).unwrap();
        let tracks = b.tracks.as_ref().unwrap();
        for (t, a) in tracks.iter().zip(&b.azimuths) {
            assert_eq!(t.eval(0.0), *a);
            assert!(t.spread() > 0.0);
        }
    }

    #[test]
    fn params_json_defaults() {
        let p: BendParams = serde_json::from_str(r#"{"seed": 3, "interp": "linear"}"#).unwrap();
        assert_eq!(p.seed, 3);
        assert_eq!(p.interp, Interp::Linear);
        assert_eq!(p.r_fraction, 0.45);
        assert_eq!(p.mode, BendMode::Compact);
    }

    #[test]
    fn bend_json_roundtrip() {
        let b = soften_node(
            &bent_cube_node(),
            &octahedron_coloring(),
            &BendParams::default(),
        )
        .unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: NodeBend = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }
}
