//! Force-limited sliding controller.
//!
//! While the bumper is in contact, the desired contact-point velocity is
//!
//! ```text
//! xi_d' = (Ts/M) ((F_n + F_c) n - D xi_d) + (t . xi_u) t  [+ (n . xi_u) n when xi_u points away]
//! ```
//!
//! `F_c` is the measured force projected on the outward normal `n`, so it is
//! negative while the obstacle pushes back and the normal term vanishes once the
//! push reaches `F_n`. The tangential part of the nominal motion passes through,
//! which makes the robot slide along the obstacle at bounded force.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::contact_estimation::DEFAULT_CONTACT_THRESHOLD;
use crate::error::{ensure, Result};
use crate::geometry::{ContactFrame, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Contact force to hold while sliding.
    #[serde(rename = "f_n_limit_newtons")]
    pub f_n_limit: f64,
    /// Tangential damping. Zero gives undamped sliding.
    pub lambda_t: f64,
    pub lambda_n: f64,
    #[serde(rename = "virtual_mass_kg")]
    pub virtual_mass: f64,
    /// Discretization constant; normally the control period.
    #[serde(rename = "ts_seconds")]
    pub ts: f64,
    /// Bound on the nominal velocity magnitude while in contact.
    #[serde(rename = "max_slide_speed_mps")]
    pub max_slide_speed: f64,
    /// Release fires when `<n, xi_u> < -release_deadband * |xi_u|`.
    #[serde(default = "defaults::release_deadband")]
    pub release_deadband: f64,
    #[serde(
        rename = "contact_threshold_newtons",
        default = "defaults::contact_threshold"
    )]
    pub contact_threshold: f64,
    /// How long contact must be lost before the controller disengages.
    #[serde(rename = "debounce_seconds", default = "defaults::debounce")]
    pub debounce: f64,
}

mod defaults {
    pub fn release_deadband() -> f64 {
        0.05
    }
    pub fn contact_threshold() -> f64 {
        super::DEFAULT_CONTACT_THRESHOLD
    }
    pub fn debounce() -> f64 {
        0.1
    }
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            f_n_limit: 45.0,
            lambda_t: 0.0,
            lambda_n: 0.5,
            virtual_mass: 2.0,
            ts: 1.0 / 200.0,
            max_slide_speed: 0.5,
            release_deadband: defaults::release_deadband(),
            contact_threshold: defaults::contact_threshold(),
            debounce: defaults::debounce(),
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        ensure(pos(self.f_n_limit), "f_n_limit_newtons", "must be > 0")?;
        ensure(nonneg(self.lambda_t), "lambda_t", "must be >= 0")?;
        ensure(pos(self.lambda_n), "lambda_n", "must be > 0")?;
        ensure(pos(self.virtual_mass), "virtual_mass_kg", "must be > 0")?;
        ensure(pos(self.ts), "ts_seconds", "must be > 0")?;
        ensure(
            pos(self.max_slide_speed),
            "max_slide_speed_mps",
            "must be > 0",
        )?;
        ensure(
            nonneg(self.release_deadband) && self.release_deadband < 1.0,
            "release_deadband",
            "must be in [0, 1)",
        )?;
        ensure(
            nonneg(self.contact_threshold),
            "contact_threshold_newtons",
            "must be >= 0",
        )?;
        ensure(nonneg(self.debounce), "debounce_seconds", "must be >= 0")
    }
}

/// Inputs to one controller update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    pub frame: ContactFrame,
    /// Measured force along the outward normal; `<= 0` while pushed.
    pub f_c: f64,
    pub nominal_velocity: Vec2,
    pub previous_desired: Vec2,
}

/// `Q diag(lambda_t, lambda_n) Q^T` with `Q = [t n]`.
pub fn damping_matrix(frame: &ContactFrame, lambda_t: f64, lambda_n: f64) -> Matrix2<f64> {
    let t = frame.t_hat;
    let n = frame.n_hat;
    t * t.transpose() * lambda_t + n * n.transpose() * lambda_n
}

/// Tangential projection of the nominal momentum rate, `(t . M xi_u / Ts) t`.
pub fn tangential_drive(xi_dot_u: Vec2, frame: &ContactFrame, mass: f64, ts: f64) -> Vec2 {
    frame.t_hat * frame.t_hat.dot(&(xi_dot_u * (mass / ts)))
}

pub fn clamp_speed(v: Vec2, max: f64) -> Vec2 {
    let norm = v.norm();
    if norm <= max {
        v
    } else {
        v * (max / norm)
    }
}

/// The three additive pieces of a controller update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTerms {
    /// Force regulation and damping.
    pub regulation: Vec2,
    /// Nominal motion projected on the tangent.
    pub sliding: Vec2,
    /// Nominal motion along the normal, non-zero only when it separates.
    pub release: Vec2,
}

impl StepTerms {
    pub fn total(&self) -> Vec2 {
        self.regulation + self.sliding + self.release
    }
}

pub fn step_terms(cs: &ContactState, p: &ControllerParams) -> StepTerms {
    let n = cs.frame.n_hat;
    let t = cs.frame.t_hat;
    let xi_u = clamp_speed(cs.nominal_velocity, p.max_slide_speed);
    let d = damping_matrix(&cs.frame, p.lambda_t, p.lambda_n);

    let regulation =
        (n * (p.f_n_limit + cs.f_c) - d * cs.previous_desired) * (p.ts / p.virtual_mass);
    let sliding = t * t.dot(&xi_u);
    let normal_nominal = n.dot(&xi_u);
    let release = if normal_nominal < -p.release_deadband * xi_u.norm() {
        n * normal_nominal
    } else {
        Vec2::zeros()
    };
    StepTerms {
        regulation,
        sliding,
        release,
    }
}

/// Desired contact-point velocity for the next control period.
pub fn step(cs: &ContactState, p: &ControllerParams) -> Vec2 {
    step_terms(cs, p).total()
}

/// Express robot motion relative to a tracked obstacle.
pub fn relative_state(
    robot_pos: Vec2,
    robot_vel: Vec2,
    obstacle_pos: Vec2,
    obstacle_vel: Vec2,
) -> (Vec2, Vec2) {
    (robot_pos - obstacle_pos, robot_vel - obstacle_vel)
}

/// Caller-owned state across control periods: previous output and engagement debounce.
#[derive(Debug, Clone)]
pub struct ControllerContext {
    params: ControllerParams,
    engaged: bool,
    time_without_contact: f64,
    previous_desired: Vec2,
    last_frame: Option<ContactFrame>,
}

impl ControllerContext {
    pub fn new(params: ControllerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            engaged: false,
            time_without_contact: 0.0,
            previous_desired: Vec2::zeros(),
            last_frame: None,
        })
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn is_engaged(&self) -> bool {
        self.engaged
    }

    pub fn last_frame(&self) -> Option<ContactFrame> {
        self.last_frame
    }

    /// Advance the engagement state by `dt` and return whether the controller is active.
    pub fn observe(&mut self, in_contact: bool, frame: Option<ContactFrame>, dt: f64) -> bool {
        if in_contact {
            if !self.engaged {
                self.previous_desired = Vec2::zeros();
            }
            self.engaged = true;
            self.time_without_contact = 0.0;
            if frame.is_some() {
                self.last_frame = frame;
            }
        } else if self.engaged {
            self.time_without_contact += dt;
            // Small slack so a debounce that is a multiple of dt is not off by one step.
            if self.time_without_contact >= self.params.debounce - 1e-9 {
                self.disengage();
            }
        }
        self.engaged
    }

    pub fn disengage(&mut self) {
        self.engaged = false;
        self.time_without_contact = 0.0;
        self.previous_desired = Vec2::zeros();
        self.last_frame = None;
    }

    /// Run one update and remember its output as the next `previous_desired`.
    pub fn command(&mut self, frame: ContactFrame, f_c: f64, nominal_velocity: Vec2) -> Vec2 {
        let cs = ContactState {
            frame,
            f_c,
            nominal_velocity,
            previous_desired: self.previous_desired,
        };
        let out = step(&cs, &self.params);
        self.previous_desired = out;
        out
    }
}
