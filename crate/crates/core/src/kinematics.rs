//! Mapping between the differential-drive command `(v, omega)` and the velocity
//! of the contact point on the bumper.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geometry::{contact_frame, wrap_angle, HullArm, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotCommand {
    pub v: f64,
    pub omega: f64,
}

impl RobotCommand {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn as_vector(&self) -> Vec2 {
        Vec2::new(self.v, self.omega)
    }

    pub fn saturate(&self, limits: &KinematicLimits) -> Self {
        Self {
            v: self.v.clamp(-limits.v_max, limits.v_max),
            omega: self.omega.clamp(-limits.omega_max, limits.omega_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicLimits {
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
    #[serde(rename = "omega_max_radps")]
    pub omega_max: f64,
    /// Contacts beyond this angle are not invertible through the bumper Jacobian.
    #[serde(rename = "singular_angle_radians")]
    pub singular_angle: f64,
}

pub const DEFAULT_SINGULAR_ANGLE: f64 = 80.0 * std::f64::consts::PI / 180.0;

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 1.5,
            omega_max: 4.124,
            singular_angle: DEFAULT_SINGULAR_ANGLE,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.v_max.is_finite() && self.v_max > 0.0,
            "v_max_mps",
            "must be > 0",
        )?;
        ensure(
            self.omega_max.is_finite() && self.omega_max > 0.0,
            "omega_max_radps",
            "must be > 0",
        )?;
        ensure(
            self.singular_angle > 0.0 && self.singular_angle < std::f64::consts::FRAC_PI_2,
            "singular_angle_radians",
            "must be in (0, pi/2)",
        )
    }
}

/// `J = [[1, -o sin(gamma)], [0, o cos(gamma)]]`, with `det J = o cos(gamma)`.
pub fn jacobian(gamma: f64, o: f64) -> Matrix2<f64> {
    let (s, c) = gamma.sin_cos();
    Matrix2::new(1.0, -o * s, 0.0, o * c)
}

pub fn to_contact_velocity(cmd: &RobotCommand, gamma: f64, o: f64) -> Vec2 {
    jacobian(gamma, o) * cmd.as_vector()
}

/// Scalar velocity of the contact point along the bumper normal, from the hull arm.
pub fn effective_normal_velocity(cmd: &RobotCommand, gamma: f64, arm: &HullArm) -> f64 {
    cmd.v * gamma.cos() + cmd.omega * arm.distance * (gamma - arm.beta).sin()
}

/// Invert the bumper Jacobian. Fails when `|gamma|` exceeds `singular_angle`.
pub fn to_robot_command(xi: Vec2, gamma: f64, o: f64, singular_angle: f64) -> Result<RobotCommand> {
    if wrap_angle(gamma).abs() > singular_angle {
        return Err(Error::SingularConfiguration { gamma });
    }
    let (s, c) = gamma.sin_cos();
    let omega = xi.y / (o * c);
    Ok(RobotCommand {
        v: xi.x + o * s * omega,
        omega,
    })
}

/// Jacobian inversion that never fails: near-lateral contacts saturate `omega`
/// and the unreachable normal component is dropped. Output respects `limits`.
pub fn to_robot_command_saturated(
    xi: Vec2,
    gamma: f64,
    o: f64,
    limits: &KinematicLimits,
) -> RobotCommand {
    match to_robot_command(xi, gamma, o, limits.singular_angle) {
        Ok(cmd) => cmd.saturate(limits),
        Err(_) => {
            let (s, c) = gamma.sin_cos();
            let lateral = o * c;
            let omega = if lateral.abs() > f64::EPSILON {
                (xi.y / lateral).clamp(-limits.omega_max, limits.omega_max)
            } else if xi.y == 0.0 {
                0.0
            } else {
                limits.omega_max.copysign(xi.y * c.signum())
            };
            RobotCommand {
                v: xi.x + o * s * omega,
                omega,
            }
            .saturate(limits)
        }
    }
}

/// Command that makes a point `offset` ahead of the axle move with world velocity `vel`.
pub fn point_velocity_to_command(vel: Vec2, theta: f64, offset: f64) -> RobotCommand {
    let (s, c) = theta.sin_cos();
    RobotCommand {
        v: c * vel.x + s * vel.y,
        omega: (-s * vel.x + c * vel.y) / offset,
    }
}

/// Normal velocity predicted by the Jacobian path, for comparison with
/// [`effective_normal_velocity`].
pub fn jacobian_normal_velocity(cmd: &RobotCommand, gamma: f64, o: f64) -> f64 {
    contact_frame(gamma)
        .n_hat
        .dot(&to_contact_velocity(cmd, gamma, o))
}
