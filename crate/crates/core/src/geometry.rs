//! Bumper hull geometry and the contact frame attached to a point on the bumper arc.
//!
//! The bumper is a frontal semicircle of radius `o` whose arc center sits `l`
//! ahead of the robot's control center. A contact angle `gamma` is measured at
//! the arc center from the robot's forward axis.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumperGeometry {
    /// Radius `o` of the bumper arc. Also the moment arm of the force/torque sensor.
    #[serde(rename = "bumper_radius_meters")]
    pub bumper_radius: f64,
    /// Distance `l` from the robot control center to the bumper arc center.
    #[serde(rename = "center_offset_meters")]
    pub center_offset: f64,
}

impl BumperGeometry {
    pub fn new(bumper_radius: f64, center_offset: f64) -> Result<Self> {
        let geom = Self {
            bumper_radius,
            center_offset,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.bumper_radius.is_finite() && self.bumper_radius > 0.0,
            "bumper_radius_meters",
            "must be finite and > 0",
        )?;
        ensure(
            self.center_offset.is_finite() && self.center_offset >= 0.0,
            "center_offset_meters",
            "must be finite and >= 0",
        )
    }

    /// Whether `gamma` lies on the sensing arc `[-pi/2, pi/2]`.
    pub fn on_sensing_arc(gamma: f64) -> bool {
        gamma.abs() <= std::f64::consts::FRAC_PI_2
    }

    /// Contact point in the robot frame (origin at the control center, x forward).
    pub fn contact_point(&self, gamma: f64) -> Vec2 {
        Vec2::new(
            self.center_offset + self.bumper_radius * gamma.cos(),
            self.bumper_radius * gamma.sin(),
        )
    }
}

impl Default for BumperGeometry {
    fn default() -> Self {
        Self {
            bumper_radius: 0.3,
            center_offset: 0.0,
        }
    }
}

/// Orthonormal pair at a contact: `n_hat` points out of the bumper toward the obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactFrame {
    pub n_hat: Vec2,
    pub t_hat: Vec2,
}

pub fn contact_frame(gamma: f64) -> ContactFrame {
    let (s, c) = gamma.sin_cos();
    ContactFrame {
        n_hat: Vec2::new(c, s),
        t_hat: Vec2::new(-s, c),
    }
}

/// Distance and bearing of a contact point as seen from the robot control center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullArm {
    pub distance: f64,
    pub beta: f64,
}

pub fn hull_arm(gamma: f64, geom: &BumperGeometry) -> HullArm {
    let o = geom.bumper_radius;
    let l = geom.center_offset;
    let lateral = o * gamma.sin();
    let forward = l + o * gamma.cos();
    let distance = lateral.hypot(forward);
    // Coincident point (only reachable behind the arc when l == o): bearing is undefined.
    let beta = if distance <= f64::EPSILON * (l + o) {
        0.0
    } else {
        lateral.atan2(forward)
    };
    HullArm { distance, beta }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    #[test]
    fn frame_at_reference_angles() {
        let f = contact_frame(0.0);
        assert_eq!(f.n_hat, Vec2::new(1.0, 0.0));
        assert_eq!(f.t_hat, Vec2::new(-0.0, 1.0));

        let f = contact_frame(FRAC_PI_2);
        assert_abs_diff_eq!(f.n_hat.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.n_hat.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.t_hat.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.t_hat.y, 0.0, epsilon = 1e-15);

        let f = contact_frame(FRAC_PI_6);
        let r3 = 3f64.sqrt() / 2.0;
        assert_abs_diff_eq!(f.n_hat.x, r3, epsilon = 1e-15);
        assert_abs_diff_eq!(f.n_hat.y, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.t_hat.x, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.t_hat.y, r3, epsilon = 1e-15);
    }

    #[test]
    fn hull_arm_examples() {
        let g = BumperGeometry::new(0.3, 0.2).unwrap();
        let a = hull_arm(0.0, &g);
        assert_abs_diff_eq!(a.distance, 0.5, epsilon = 1e-15);
        assert_eq!(a.beta, 0.0);

        // sqrt(0.13) and atan2(0.3, 0.2), evaluated independently.
        let a = hull_arm(FRAC_PI_2, &g);
        assert_abs_diff_eq!(a.distance, 0.360_555_127_546_398_9, epsilon = 1e-12);
        assert_abs_diff_eq!(a.beta, 0.982_793_723_247_329, epsilon = 1e-12);

        let g = BumperGeometry::new(0.3, 0.3).unwrap();
        let a = hull_arm(PI, &g);
        assert_abs_diff_eq!(a.distance, 0.0, epsilon = 1e-15);
        assert_eq!(a.beta, 0.0);
    }

    #[test]
    fn rejects_invalid_geometry() {
        assert!(BumperGeometry::new(0.0, 0.1).is_err());
        assert!(BumperGeometry::new(0.3, -0.1).is_err());
        assert!(BumperGeometry::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-0.5 - 2.0 * PI), -0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn frame_is_right_handed_orthonormal(gamma in -10.0f64..10.0) {
            let f = contact_frame(gamma);
            prop_assert!((f.n_hat.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.t_hat.norm() - 1.0).abs() < 1e-12);
            prop_assert!(f.n_hat.dot(&f.t_hat).abs() < 1e-12);
            // n rotated by +pi/2
            let rotated = Vec2::new(-f.n_hat.y, f.n_hat.x);
            prop_assert!((rotated - f.t_hat).norm() < 1e-12);
        }

        #[test]
        fn hull_arm_matches_law_of_cosines(
            gamma in -PI..PI,
            o in 0.05f64..1.0,
            l in 0.0f64..1.0,
        ) {
            let g = BumperGeometry::new(o, l).unwrap();
            let a = hull_arm(gamma, &g);
            let expected = l * l + o * o + 2.0 * l * o * gamma.cos();
            prop_assert!((a.distance * a.distance - expected).abs() < 1e-12);
        }

        #[test]
        fn hull_arm_derivative_matches_finite_difference(
            gamma in -1.5f64..1.5,
            o in 0.05f64..1.0,
            l in 0.0f64..1.0,
        ) {
            let g = BumperGeometry::new(o, l).unwrap();
            // dO/dgamma = -l o sin(gamma) / O
            let a = hull_arm(gamma, &g);
            let analytic = -l * o * gamma.sin() / a.distance;
            let h = 1e-6;
            let fd = (hull_arm(gamma + h, &g).distance - hull_arm(gamma - h, &g).distance) / (2.0 * h);
            let scale = analytic.abs().max(1e-3);
            prop_assert!((fd - analytic).abs() / scale < 1e-6, "fd {fd} analytic {analytic}");
        }

        #[test]
        fn hull_arm_not_shorter_than_offset_on_arc(
            gamma in -FRAC_PI_2..FRAC_PI_2,
            o in 0.05f64..1.0,
            l in 0.0f64..1.0,
        ) {
            let g = BumperGeometry::new(o, l).unwrap();
            prop_assert!(hull_arm(gamma, &g).distance >= l - 1e-12);
        }
    }
}
