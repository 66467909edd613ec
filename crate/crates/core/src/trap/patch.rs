//! Gapless rectangular-patch electrostatics.
//!
//! A conducting plane at z = 0 holds a rectangular patch at 1 V with the rest
//! of the plane grounded. The potential in the upper half space equals the
//! fraction of the 2π solid angle the patch subtends at the field point:
//!
//! ```text
//! φ(r) = (1/2π) Σ_{i,j ∈ {1,2}} (−1)^{i+j} atan2((x_i−x)(y_j−y), z·R_ij),
//! R_ij = sqrt((x_i−x)² + (y_j−y)² + z²)
//! ```
//!
//! Gradients and Hessians are analytic; each term is harmonic, so the Hessian
//! trace vanishes identically.

use nalgebra::{Matrix3, Vector3};

use super::TrapError;

/// Axis-aligned rectangle in the z = 0 electrode plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectPatch {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RectPatch {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, TrapError> {
        let ok = x_min.is_finite()
            && x_max.is_finite()
            && y_min.is_finite()
            && y_max.is_finite()
            && x_min < x_max
            && y_min < y_max;
        if !ok {
            return Err(TrapError::BadPatch {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// Construct from center, width (x) and height (y).
    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, TrapError> {
        Self::new(
            cx - width / 2.0,
            cx + width / 2.0,
            cy - height / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn diagonal(&self) -> f64 {
        let dx = self.x_max - self.x_min;
        let dy = self.y_max - self.y_min;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Area of the overlap with `other` (0 when disjoint or edge-touching).
    pub fn intersection_area(&self, other: &RectPatch) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }

    /// Unit potential (dimensionless, per volt) at a point above the plane.
    pub fn potential(&self, point: &Vector3<f64>) -> Result<f64, TrapError> {
        let z = point.z;
        if z <= 0.0 {
            return Err(TrapError::PointBelowPlane { z });
        }
        let us = [self.x_min - point.x, self.x_max - point.x];
        let vs = [self.y_min - point.y, self.y_max - point.y];
        let mut acc = 0.0;
        for (i, &u) in us.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let r = (u * u + v * v + z * z).sqrt();
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * (u * v).atan2(z * r);
            }
        }
        Ok(acc / (2.0 * std::f64::consts::PI))
    }

    /// Analytic gradient [1/m] of the unit potential (no Hessian; this is the
    /// force-evaluation hot path).
    pub fn gradient(&self, point: &Vector3<f64>) -> Result<Vector3<f64>, TrapError> {
        let z = point.z;
        if z <= 0.0 {
            return Err(TrapError::PointBelowPlane { z });
        }
        let us = [self.x_min - point.x, self.x_max - point.x];
        let vs = [self.y_min - point.y, self.y_max - point.y];
        let mut grad = Vector3::zeros();
        for (i, &u) in us.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let a = u * u + z * z;
                let b = v * v + z * z;
                let r2 = u * u + v * v + z * z;
                let r = r2.sqrt();
                let n = r2 + z * z;
                grad.x += sign * (-z * v / (r * a));
                grad.y += sign * (-z * u / (r * b));
                grad.z += sign * (-u * v * n / (r * a * b));
            }
        }
        Ok(grad / (2.0 * std::f64::consts::PI))
    }

    /// Analytic gradient [1/m] and Hessian [1/m²] of the unit potential.
    pub fn derivatives(
        &self,
        point: &Vector3<f64>,
    ) -> Result<(Vector3<f64>, Matrix3<f64>), TrapError> {
        let z = point.z;
        if z <= 0.0 {
            return Err(TrapError::PointBelowPlane { z });
        }
        let us = [self.x_min - point.x, self.x_max - point.x];
        let vs = [self.y_min - point.y, self.y_max - point.y];
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for (i, &u) in us.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let a = u * u + z * z;
                let b = v * v + z * z;
                let r2 = u * u + v * v + z * z;
                let r = r2.sqrt();
                let r3 = r2 * r;
                let n = r2 + z * z; // = a + b

                grad.x += sign * (-z * v / (r * a));
                grad.y += sign * (-z * u / (r * b));
                grad.z += sign * (-u * v * n / (r * a * b));

                let gxx = -z * u * v * (a + 2.0 * r2) / (r3 * a * a);
                let gyy = -z * u * v * (b + 2.0 * r2) / (r3 * b * b);
                let gxy = z / r3;
                let gxz = v * (n * a - 2.0 * u * u * r2) / (r3 * a * a);
                let gyz = u * (n * b - 2.0 * v * v * r2) / (r3 * b * b);
                let gzz = -u * v * z * (4.0 * r2 * a * b - n * (a * b + 2.0 * r2 * n))
                    / (r3 * a * a * b * b);

                hess[(0, 0)] += sign * gxx;
                hess[(1, 1)] += sign * gyy;
                hess[(2, 2)] += sign * gzz;
                hess[(0, 1)] += sign * gxy;
                hess[(1, 0)] += sign * gxy;
                hess[(0, 2)] += sign * gxz;
                hess[(2, 0)] += sign * gxz;
                hess[(1, 2)] += sign * gyz;
                hess[(2, 1)] += sign * gyz;
            }
        }
        let inv_2pi = 1.0 / (2.0 * std::f64::consts::PI);
        Ok((grad * inv_2pi, hess * inv_2pi))
    }
}
