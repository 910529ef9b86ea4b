//! Fixed-step planar plant: a differential-drive robot with a frontal bumper,
//! penetration-based spring-damper contact against circular obstacles, and the
//! closed loop of planner, contact estimation, sliding controller and Jacobian.

mod metrics;
mod trace;

pub use metrics::{metrics, summarize, Metrics, MetricsConfig, BAND_HIGH, BAND_LOW, STABLE_WINDOW};
pub use trace::{Trace, TraceRecord, TRACE_COLUMNS};

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::avoidance::{gamma_function, linear_ds, modulate, Obstacle};
use crate::contact_estimation::{
    compensate, estimate_contact, forward_wrench, CompensationModel, ContactEstimate,
    IdentityCompensation, Wrench,
};
use crate::controller::ControllerContext;
use crate::error::{ensure, Error, Result};
use crate::geometry::{contact_frame, hull_arm, wrap_angle, BumperGeometry, Vec2};
use crate::kinematics::{point_velocity_to_command, to_robot_command_saturated, RobotCommand};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading, kept in `(-pi, pi]`.
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// World position of a point `offset` ahead of the axle.
    pub fn point_ahead(&self, offset: f64) -> Vec2 {
        self.position() + self.heading() * offset
    }

    fn to_body(self, world: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c * world.x + s * world.y, -s * world.x + c * world.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(rename = "dt_seconds", default = "defaults::dt")]
    pub dt: f64,
    #[serde(rename = "duration_seconds")]
    pub duration: f64,
    #[serde(rename = "contact_stiffness_n_per_m", default = "defaults::stiffness")]
    pub contact_stiffness: f64,
    #[serde(rename = "contact_damping_ns_per_m", default = "defaults::damping")]
    pub contact_damping: f64,
    /// First-order time constant between commanded and executed `(v, omega)`.
    #[serde(rename = "actuator_lag_seconds", default = "defaults::lag")]
    pub actuator_lag: f64,
    #[serde(rename = "sensor_noise_std_newtons", default)]
    pub sensor_noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    /// When false the wheels are unpowered and the robot moves only under contact forces.
    #[serde(default = "defaults::yes")]
    pub actuated: bool,
    #[serde(rename = "robot_mass_kg", default = "defaults::mass")]
    pub robot_mass: f64,
    #[serde(rename = "robot_inertia_kgm2", default = "defaults::inertia")]
    pub robot_inertia: f64,
    /// Run the sliding controller relative to the contacted obstacle's velocity.
    #[serde(default)]
    pub relative_to_obstacle: bool,
}

mod defaults {
    pub fn dt() -> f64 {
        1.0 / 200.0
    }
    pub fn stiffness() -> f64 {
        5000.0
    }
    pub fn damping() -> f64 {
        50.0
    }
    pub fn lag() -> f64 {
        0.2
    }
    pub fn yes() -> bool {
        true
    }
    pub fn mass() -> f64 {
        45.0
    }
    pub fn inertia() -> f64 {
        4.0
    }
}

impl SimConfig {
    pub fn with_duration(duration: f64) -> Self {
        Self {
            dt: defaults::dt(),
            duration,
            contact_stiffness: defaults::stiffness(),
            contact_damping: defaults::damping(),
            actuator_lag: defaults::lag(),
            sensor_noise_std: 0.0,
            seed: 0,
            actuated: true,
            robot_mass: defaults::mass(),
            robot_inertia: defaults::inertia(),
            relative_to_obstacle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        ensure(pos(self.dt), "dt_seconds", "must be > 0")?;
        ensure(nonneg(self.duration), "duration_seconds", "must be >= 0")?;
        ensure(
            pos(self.contact_stiffness),
            "contact_stiffness_n_per_m",
            "must be > 0",
        )?;
        ensure(
            nonneg(self.contact_damping),
            "contact_damping_ns_per_m",
            "must be >= 0",
        )?;
        ensure(
            nonneg(self.actuator_lag),
            "actuator_lag_seconds",
            "must be >= 0",
        )?;
        ensure(
            nonneg(self.sensor_noise_std),
            "sensor_noise_std_newtons",
            "must be >= 0",
        )?;
        ensure(pos(self.robot_mass), "robot_mass_kg", "must be > 0")?;
        ensure(pos(self.robot_inertia), "robot_inertia_kgm2", "must be > 0")
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Ground truth of the bumper contact at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSample {
    /// Reaction on the robot as seen by the bumper sensor (robot frame).
    pub wrench: Wrench,
    /// Contact angle, `None` without a pushing contact.
    pub gamma: Option<f64>,
    pub obstacle: Option<usize>,
    pub penetration: f64,
    /// Reaction force on the robot in the world frame.
    pub force_world: Vec2,
    /// Reaction moment about the axle.
    pub torque: f64,
}

impl ContactSample {
    fn none() -> Self {
        Self {
            wrench: Wrench::ZERO,
            gamma: None,
            obstacle: None,
            penetration: 0.0,
            force_world: Vec2::zeros(),
            torque: 0.0,
        }
    }
}

/// Spring-damper reaction of the deepest frontal penetration.
///
/// Only the bumper arc collides; at most one obstacle contributes. The contact
/// point is the arc point closest to the obstacle center (an arc end when the
/// obstacle lies beside the bumper). Force is `max(0, k delta + c delta_dot)`
/// along the contact normal, and the sensor moment follows the forward wrench
/// model at the contact angle.
pub fn contact_wrench(
    robot: &RobotState,
    geom: &BumperGeometry,
    obstacles: &[Obstacle],
    k: f64,
    c: f64,
) -> ContactSample {
    let o = geom.bumper_radius;
    let center = robot.point_ahead(geom.center_offset);
    let mut deepest: Option<(usize, f64, Vec2, f64)> = None;
    for (i, obs) in obstacles.iter().enumerate() {
        let offset = obs.center - center;
        let bearing = wrap_angle(offset.y.atan2(offset.x) - robot.theta);
        let gamma = bearing.clamp(-FRAC_PI_2, FRAC_PI_2);
        let point =
            center + Vec2::new((robot.theta + gamma).cos(), (robot.theta + gamma).sin()) * o;
        let to_obs = obs.center - point;
        let dist = to_obs.norm();
        // Normal points from the bumper into the obstacle: radial on the arc,
        // along the line to the obstacle center at an arc end.
        let (penetration, normal) = if gamma == bearing {
            let d = offset.norm();
            if d == 0.0 {
                continue;
            }
            (o + obs.radius - d, offset / d)
        } else {
            if dist == 0.0 {
                continue;
            }
            (obs.radius - dist, to_obs / dist)
        };
        if penetration <= 0.0 {
            continue;
        }
        if deepest.is_none_or(|(_, d, _, _)| penetration > d) {
            deepest = Some((i, penetration, normal, gamma));
        }
    }
    let Some((index, penetration, normal_world, gamma)) = deepest else {
        return ContactSample::none();
    };

    let obs = &obstacles[index];
    let heading = robot.heading();
    let contact = center + Vec2::new((robot.theta + gamma).cos(), (robot.theta + gamma).sin()) * o;
    let lever = contact - robot.position();
    let contact_vel = heading * robot.v + Vec2::new(-lever.y, lever.x) * robot.omega;
    let penetration_rate = normal_world.dot(&(contact_vel - obs.velocity));
    let magnitude = (k * penetration + c * penetration_rate).max(0.0);
    if magnitude == 0.0 {
        return ContactSample {
            penetration,
            obstacle: Some(index),
            ..ContactSample::none()
        };
    }

    let force_world = -normal_world * magnitude;
    let force_body = robot.to_body(force_world);
    ContactSample {
        wrench: forward_wrench(gamma, force_body.x, force_body.y, o),
        gamma: Some(gamma),
        obstacle: Some(index),
        penetration,
        force_world,
        torque: lever.x * force_world.y - lever.y * force_world.x,
    }
}

/// Per-step diagnostics not written to the trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub engaged: bool,
    pub true_gamma: Option<f64>,
    pub penetration: f64,
    /// Smallest planner Gamma over visible obstacles at this step.
    pub min_visible_gamma: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub info: Vec<StepInfo>,
}

/// Simulate a scenario with the identity compensation model.
pub fn run(scenario: &Scenario) -> Result<Trace> {
    run_detailed(scenario, &IdentityCompensation).map(|out| out.trace)
}

pub fn run_detailed<M: CompensationModel + ?Sized>(
    scenario: &Scenario,
    compensation: &M,
) -> Result<RunOutput> {
    scenario.validate()?;
    let sim = &scenario.sim;
    let geom = &scenario.geometry;
    let limits = &scenario.kinematics;
    let offset = scenario.planner.offset_meters;
    let margin = scenario.planner_margin();
    let threshold = scenario.controller.contact_threshold;

    let mut robot = RobotState {
        x: scenario.robot.x_meters,
        y: scenario.robot.y_meters,
        theta: wrap_angle(scenario.robot.theta_radians),
        v: 0.0,
        omega: 0.0,
    };

    let initial = scenario.obstacles_at(0.0);
    for (i, obs) in initial.iter().enumerate() {
        let gap = (obs.center - robot.point_ahead(geom.center_offset)).norm();
        if gap < geom.bumper_radius + obs.radius {
            return Err(Error::Scenario(format!(
                "robot starts in contact with obstacle {i}"
            )));
        }
        if obs.planner_visible && gamma_function(robot.point_ahead(offset), obs, margin) <= 1.0 {
            return Err(Error::Scenario(format!(
                "planner reference point starts inside visible obstacle {i}"
            )));
        }
    }

    let mut ctx = ControllerContext::new(scenario.controller)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let noise = if sim.sensor_noise_std > 0.0 {
        Some(Normal::new(0.0, sim.sensor_noise_std).map_err(|e| Error::Scenario(e.to_string()))?)
    } else {
        None
    };

    let steps = sim.steps();
    let mut trace = Trace::with_capacity(scenario.obstacles.len(), steps + 1);
    let mut info = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * sim.dt;
        let obstacles = scenario.obstacles_at(t);

        // Sense.
        let truth = contact_wrench(
            &robot,
            geom,
            &obstacles,
            sim.contact_stiffness,
            sim.contact_damping,
        );
        let mut measured = truth.wrench;
        if let Some(dist) = &noise {
            measured.fx += dist.sample(&mut rng);
            measured.fy += dist.sample(&mut rng);
            measured.mz += dist.sample(&mut rng) * geom.bumper_radius;
        }
        let measured = compensate(measured, compensation);
        let estimate = match estimate_contact(&measured, geom.bumper_radius, threshold) {
            Ok(e) => e,
            // Noise can make a reading inconsistent; treat it as a dropped sample.
            Err(Error::DegenerateWrench { .. }) => ContactEstimate::NONE,
            Err(e) => return Err(e),
        };

        // Nominal motion of the planner reference point.
        let reference = robot.point_ahead(offset);
        let field = linear_ds(reference, &scenario.attractor);
        let visible_min_gamma = obstacles
            .iter()
            .filter(|o| o.planner_visible)
            .map(|o| gamma_function(reference, o, margin))
            .fold(f64::INFINITY, f64::min);
        let planned = match modulate(field, reference, &obstacles, margin) {
            Ok(v) => v,
            Err(Error::InsideObstacle { index, .. }) => {
                let away = (reference - obstacles[index].center).normalize();
                away * scenario.attractor.v_max.min(limits.v_max)
            }
            Err(e) => return Err(e),
        };
        let nominal_cmd = point_velocity_to_command(planned, robot.theta, offset).saturate(limits);

        // Contact handling.
        let frame_now = estimate.in_contact.then(|| contact_frame(estimate.gamma));
        let engaged = ctx.observe(estimate.in_contact, frame_now, sim.dt);
        let (cmd, xi_u, xi_d) = if engaged {
            let (gamma, frame, f_c) = if estimate.in_contact {
                let frame = contact_frame(estimate.gamma);
                (estimate.gamma, frame, measured.force().dot(&frame.n_hat))
            } else {
                let frame = ctx.last_frame().unwrap_or_else(|| contact_frame(0.0));
                (frame.n_hat.y.atan2(frame.n_hat.x), frame, 0.0)
            };
            // The nominal field acts on the contact point directly; routing it through
            // the heading-tracking command lets the planner's turn cancel the slide.
            let mut xi_u = robot.to_body(planned);
            let mut carried = Vec2::zeros();
            if sim.relative_to_obstacle {
                if let Some(obs) = truth.obstacle.map(|i| &obstacles[i]) {
                    carried = robot.to_body(obs.velocity);
                    xi_u -= carried;
                }
            }
            let xi_d = ctx.command(frame, f_c, xi_u) + carried;
            // J maps axle motion to the contact point, located by its arm about the axle.
            let arm = hull_arm(gamma, geom);
            let cmd = to_robot_command_saturated(xi_d, arm.beta, arm.distance, limits);
            (cmd, xi_u + carried, xi_d)
        } else {
            let body = robot.to_body(planned);
            (nominal_cmd, body, body)
        };

        trace.push(TraceRecord {
            t,
            x: robot.x,
            y: robot.y,
            theta: robot.theta,
            v_cmd: cmd.v,
            omega_cmd: cmd.omega,
            wrench: measured,
            estimate,
            xi_u,
            xi_d,
            obstacles: obstacles.iter().map(|o| o.center).collect(),
        });
        info.push(StepInfo {
            engaged,
            true_gamma: truth.gamma,
            penetration: truth.penetration,
            min_visible_gamma: visible_min_gamma,
        });

        if k == steps {
            break;
        }
        integrate(&mut robot, &cmd, &truth, sim);
    }

    Ok(RunOutput { trace, info })
}

/// Semi-implicit Euler: update velocities, then advance the pose with them.
fn integrate(robot: &mut RobotState, cmd: &RobotCommand, contact: &ContactSample, sim: &SimConfig) {
    let dt = sim.dt;
    if sim.actuated {
        if sim.actuator_lag > 0.0 {
            let alpha = (dt / sim.actuator_lag).min(1.0);
            robot.v += alpha * (cmd.v - robot.v);
            robot.omega += alpha * (cmd.omega - robot.omega);
        } else {
            robot.v = cmd.v;
            robot.omega = cmd.omega;
        }
    } else {
        robot.v += dt * contact.force_world.dot(&robot.heading()) / sim.robot_mass;
        robot.omega += dt * contact.torque / sim.robot_inertia;
    }
    let heading = robot.heading();
    robot.x += robot.v * heading.x * dt;
    robot.y += robot.v * heading.y * dt;
    robot.theta = wrap_angle(robot.theta + robot.omega * dt);
}
