//! Nominal motion before contact: a linear attractor field, deflected around
//! circular obstacles the planner can see.
//!
//! Each visible obstacle contributes a modulation `E diag(1 - 1/G, 1 + 1/G) E^T`
//! in its normal/tangent basis, with `G = (|x - c| / R)^2`. Moving obstacles are
//! handled in their own frame. Per-obstacle results are blended with weights
//! proportional to `1 / (G - 1)`, so the nearest boundary dominates and fully
//! removes the inward normal component when reached.

use serde::{Deserialize, Serialize};

use crate::controller::clamp_speed;
use crate::error::{ensure, Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorDS {
    #[serde(rename = "attractor_meters")]
    pub attractor: Vec2,
    #[serde(rename = "gain_per_second", default = "default_gain")]
    pub gain: f64,
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
}

fn default_gain() -> f64 {
    1.0
}

impl AttractorDS {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.attractor.iter().all(|c| c.is_finite()),
            "attractor_meters",
            "must be finite",
        )?;
        ensure(
            self.gain.is_finite() && self.gain > 0.0,
            "gain_per_second",
            "must be > 0",
        )?;
        ensure(
            !self.v_max.is_nan() && self.v_max > 0.0,
            "v_max_mps",
            "must be > 0",
        )
    }
}

/// Snapshot of one circular obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
    pub velocity: Vec2,
    pub planner_visible: bool,
}

pub type ObstacleSet = Vec<Obstacle>;

pub fn linear_ds(x: Vec2, ds: &AttractorDS) -> Vec2 {
    clamp_speed((ds.attractor - x) * ds.gain, ds.v_max)
}

/// Normalized distance to an obstacle inflated by `margin`: `> 1` outside, `1` on the boundary.
pub fn gamma_function(x: Vec2, obstacle: &Obstacle, margin: f64) -> f64 {
    let r = obstacle.radius + margin;
    (x - obstacle.center).norm_squared() / (r * r)
}

fn modulate_single(v: Vec2, x: Vec2, obstacle: &Obstacle, gamma_fn: f64) -> Vec2 {
    let n = (x - obstacle.center).normalize();
    let t = Vec2::new(-n.y, n.x);
    let rel = v - obstacle.velocity;
    let inv = 1.0 / gamma_fn;
    n * ((1.0 - inv) * n.dot(&rel)) + t * ((1.0 + inv) * t.dot(&rel)) + obstacle.velocity
}

/// Deflect `v_nominal` at position `x` around all planner-visible obstacles.
pub fn modulate(v_nominal: Vec2, x: Vec2, obstacles: &[Obstacle], margin: f64) -> Result<Vec2> {
    let mut visible = Vec::new();
    for (index, obs) in obstacles.iter().enumerate() {
        if !obs.planner_visible {
            continue;
        }
        let gamma_fn = gamma_function(x, obs, margin);
        if !(gamma_fn > 1.0) {
            return Err(Error::InsideObstacle { index, gamma_fn });
        }
        visible.push((obs, gamma_fn));
    }
    if visible.is_empty() {
        return Ok(v_nominal);
    }
    if let [(obs, gamma_fn)] = visible.as_slice() {
        return Ok(modulate_single(v_nominal, x, obs, *gamma_fn));
    }

    let total: f64 = visible.iter().map(|(_, g)| 1.0 / (g - 1.0)).sum();
    Ok(visible
        .iter()
        .map(|(obs, g)| modulate_single(v_nominal, x, obs, *g) * ((1.0 / (g - 1.0)) / total))
        .fold(Vec2::zeros(), |acc, v| acc + v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds(attractor: Vec2, v_max: f64) -> AttractorDS {
        AttractorDS {
            attractor,
            gain: 1.0,
            v_max,
        }
    }

    fn static_obstacle(center: Vec2, radius: f64) -> Obstacle {
        Obstacle {
            center,
            radius,
            velocity: Vec2::zeros(),
            planner_visible: true,
        }
    }

    #[test]
    fn linear_ds_examples() {
        let a = Vec2::new(4.5, 0.0);
        assert_eq!(linear_ds(a, &ds(a, 0.65)), Vec2::zeros());
        assert_abs_diff_eq!(
            linear_ds(Vec2::new(2.5, 0.0), &ds(a, f64::INFINITY)),
            Vec2::new(2.0, 0.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            linear_ds(Vec2::new(2.5, 0.0), &ds(a, 0.65)),
            Vec2::new(0.65, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn no_obstacles_is_identity() {
        let v = Vec2::new(0.3, -0.1);
        assert_eq!(modulate(v, Vec2::new(1.0, 2.0), &[], 0.0).unwrap(), v);
    }

    #[test]
    fn boundary_removes_normal_component() {
        let obs = static_obstacle(Vec2::new(1.0, 0.0), 0.5);
        for angle in [0.0f64, 0.7, 2.0, -2.9] {
            let n = Vec2::new(angle.cos(), angle.sin());
            // Just outside the boundary so the Gamma > 1 precondition holds.
            let x = obs.center + n * (0.5 * (1.0 + 1e-12));
            let out = modulate(Vec2::new(-0.4, 0.25), x, &[obs], 0.0).unwrap();
            assert!(out.dot(&n).abs() < 1e-9, "normal {}", out.dot(&n));
        }
    }

    #[test]
    fn far_field_deviation_is_one_over_gamma() {
        let obs = static_obstacle(Vec2::zeros(), 0.1);
        // Gamma = 100
        let x = Vec2::new(1.0, 0.0);
        assert_abs_diff_eq!(gamma_function(x, &obs, 0.0), 100.0, epsilon = 1e-9);
        for v in [
            Vec2::new(-1.0, 0.0),
            Vec2::new(0.0, 0.5),
            Vec2::new(-0.3, 0.4),
        ] {
            let out = modulate(v, x, &[obs], 0.0).unwrap();
            let dev = (out - v).norm();
            // (M - I) = diag(-1/G, +1/G) in an orthonormal basis.
            assert_abs_diff_eq!(dev, 0.01 * v.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn inside_visible_obstacle_is_an_error() {
        let obs = static_obstacle(Vec2::zeros(), 1.0);
        let err = modulate(Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.0), &[obs], 0.0).unwrap_err();
        assert!(matches!(err, Error::InsideObstacle { index: 0, .. }));
        // Margin inflates the obstacle.
        assert!(modulate(Vec2::new(1.0, 0.0), Vec2::new(1.2, 0.0), &[obs], 0.3).is_err());
    }

    #[test]
    fn hidden_obstacles_are_ignored_bitwise() {
        let visible = static_obstacle(Vec2::new(2.0, 0.3), 0.4);
        let hidden = Obstacle {
            planner_visible: false,
            ..static_obstacle(Vec2::new(0.5, 0.0), 0.4)
        };
        let v = Vec2::new(0.6, 0.05);
        // x is inside the hidden one: no error either.
        let x = Vec2::new(0.6, 0.0);
        let a = modulate(v, x, &[visible], 0.1).unwrap();
        let b = modulate(v, x, &[hidden, visible], 0.1).unwrap();
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.y.to_bits(), b.y.to_bits());
    }

    #[test]
    fn moving_obstacle_boundary_has_zero_relative_normal() {
        let obs = Obstacle {
            velocity: Vec2::new(0.2, -0.1),
            ..static_obstacle(Vec2::new(1.0, 1.0), 0.5)
        };
        let n = Vec2::new(0.6, 0.8);
        let x = obs.center + n * (0.5 * (1.0 + 1e-12));
        let out = modulate(Vec2::new(0.5, 0.0), x, &[obs], 0.0).unwrap();
        assert!((out - obs.velocity).dot(&n).abs() < 1e-9);
    }

    #[test]
    fn nearest_boundary_dominates_blend() {
        let a = static_obstacle(Vec2::new(0.0, 1.0), 0.5);
        let b = static_obstacle(Vec2::new(3.0, 0.0), 0.5);
        let n = Vec2::new(0.0, -1.0);
        let x = a.center + n * (0.5 * (1.0 + 1e-12));
        let out = modulate(Vec2::new(0.2, 0.5), x, &[a, b], 0.0).unwrap();
        assert!(out.dot(&n).abs() < 1e-9);
    }

    /// Forward-Euler integration of the modulated field from several starts.
    fn min_gamma_along_path(start: Vec2, obstacles: &[Obstacle], ds: &AttractorDS) -> f64 {
        let dt = 1e-3;
        let mut x = start;
        let mut min_gamma = f64::INFINITY;
        for _ in 0..20_000 {
            let v = modulate(linear_ds(x, ds), x, obstacles, 0.0).unwrap();
            x += v * dt;
            for o in obstacles {
                min_gamma = min_gamma.min(gamma_function(x, o, 0.0));
            }
        }
        min_gamma
    }

    #[test]
    fn integrated_paths_stay_outside() {
        let obstacles = [
            static_obstacle(Vec2::new(2.0, 0.1), 0.5),
            static_obstacle(Vec2::new(3.5, -1.0), 0.4),
        ];
        let field = ds(Vec2::new(5.0, 0.0), 0.65);
        for start in [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 0.4),
            Vec2::new(-1.0, -1.2),
            Vec2::new(0.5, 1.0),
        ] {
            assert!(min_gamma_along_path(start, &obstacles, &field) >= 1.0 - 1e-6);
        }
    }

    proptest! {
        #[test]
        fn deviation_decays_with_gamma(
            angle in -3.1f64..3.1,
            dist in 1.01f64..20.0,
            vx in -1.0f64..1.0,
            vy in -1.0f64..1.0,
        ) {
            let obs = static_obstacle(Vec2::zeros(), 1.0);
            let x = Vec2::new(angle.cos(), angle.sin()) * dist;
            let v = Vec2::new(vx, vy);
            let out = modulate(v, x, &[obs], 0.0).unwrap();
            let g = gamma_function(x, &obs, 0.0);
            prop_assert!((out - v).norm() <= v.norm() / g * (1.0 + 1e-9) + 1e-15);
        }

        #[test]
        fn linear_ds_bounded(x in -10.0f64..10.0, y in -10.0f64..10.0, v_max in 0.1f64..2.0) {
            let field = ds(Vec2::new(1.0, -2.0), v_max);
            prop_assert!(linear_ds(Vec2::new(x, y), &field).norm() <= v_max * (1.0 + 1e-12));
        }
    }
}
