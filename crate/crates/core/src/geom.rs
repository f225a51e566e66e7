use nalgebra::Vector3;
use std::f64::consts::TAU;

pub type Vec3 = Vector3<f64>;

#[inline]
pub fn v3(p: &[f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

#[inline]
pub fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Angle between a direction and the line spanned by `axis` (both unit), in `[0, π/2]`.
pub fn angle_to_line(d: &Vec3, axis: &Vec3) -> f64 {
    let c = d.dot(axis).abs().min(1.0);
    let s = d.cross(axis).norm();
    s.atan2(c)
}

/// Angle between two vectors in `[0, π]`.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Any unit vector perpendicular to the unit vector `k`.
pub fn perpendicular(k: &Vec3) -> Vec3 {
    let trial = if k.x.abs() < 0.6 {
        Vec3::x()
    } else if k.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (trial - k * trial.dot(k)).normalize()
}

/// Smallest distance from `p` to the axis-aligned box `[lo, hi]`.
pub fn box_distance(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d2 = 0.0;
    for i in 0..3 {
        let t = if p[i] < lo[i] {
            lo[i] - p[i]
        } else if p[i] > hi[i] {
            p[i] - hi[i]
        } else {
            0.0
        };
        d2 += t * t;
    }
    d2.sqrt()
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant through strictly increasing knots.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2);
        let n = xs.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // weighted harmonic mean keeps each cubic piece monotone
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[i] = (w0 + w1) / (w0 / delta[i - 1] + w1 / delta[i]);
            }
        }
        Self { xs, ys, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }
}

/// Polygon normal by Newell's method (unnormalised).
pub fn newell_normal(pts: &[Vec3]) -> Vec3 {
    let mut n = Vec3::zeros();
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!(wrap_angle(TAU) < 1e-15);
    }

    #[test]
    fn monotone_cubic_reproduces_knots_and_stays_monotone() {
        let xs = vec![0.0, 0.1, 0.5, 1.0, 3.0];
        let ys = vec![0.0, 0.05, 0.2, 1.5, 1.6];
        let m = MonotoneCubic::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.eval(*x) - y).abs() < 1e-14);
        }
        let mut prev = m.eval(0.0);
        for k in 1..=3000 {
            let v = m.eval(k as f64 * 1e-3);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn box_distance_inside_is_zero() {
        let lo = Vec3::zeros();
        let hi = Vec3::new(1.0, 1.0, 1.0);
        assert_eq!(box_distance(&Vec3::new(0.5, 0.5, 0.5), &lo, &hi), 0.0);
        assert!((box_distance(&Vec3::new(2.0, 0.5, 0.5), &lo, &hi) - 1.0).abs() < 1e-15);
    }
}
