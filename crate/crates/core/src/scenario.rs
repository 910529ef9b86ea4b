//! Declarative experiment input. Every key carries its unit.

use serde::{Deserialize, Serialize};

use crate::avoidance::{AttractorDS, Obstacle};
use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::geometry::{BumperGeometry, Vec2};
use crate::kinematics::KinematicLimits;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub x_meters: f64,
    pub y_meters: f64,
    pub theta_radians: f64,
}

/// Where the nominal field is evaluated and how far obstacles are inflated for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Distance of the planner reference point ahead of the axle.
    pub offset_meters: f64,
    /// Obstacle inflation used by the modulation. Defaults to the radius of the
    /// smallest disc about the reference point that covers the bumper.
    pub margin_meters: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            offset_meters: 0.15,
            margin_meters: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_seconds: f64,
    pub position_meters: Vec2,
}

/// An obstacle and its motion: constant velocity, or piecewise-linear through
/// timed waypoints (held at the ends) when any are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrack {
    pub center_meters: Vec2,
    pub radius_meters: f64,
    #[serde(default = "Vec2::zeros")]
    pub velocity_mps: Vec2,
    pub planner_visible: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Waypoint>,
}

impl ObstacleTrack {
    pub fn snapshot(&self, t: f64) -> Obstacle {
        let (center, velocity) = match self.waypoints.as_slice() {
            [] => (
                self.center_meters + self.velocity_mps * t,
                self.velocity_mps,
            ),
            [only] => (only.position_meters, Vec2::zeros()),
            wps => {
                let first = wps[0];
                let last = wps[wps.len() - 1];
                if t <= first.t_seconds {
                    (first.position_meters, Vec2::zeros())
                } else if t >= last.t_seconds {
                    (last.position_meters, Vec2::zeros())
                } else {
                    let i = wps.partition_point(|w| w.t_seconds <= t) - 1;
                    let (a, b) = (wps[i], wps[i + 1]);
                    let span = b.t_seconds - a.t_seconds;
                    let vel = (b.position_meters - a.position_meters) / span;
                    (a.position_meters + vel * (t - a.t_seconds), vel)
                }
            }
        };
        Obstacle {
            center,
            radius: self.radius_meters,
            velocity,
            planner_visible: self.planner_visible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    /// Dotted path into the scenario document, e.g. `attractor.v_max_mps`.
    pub key: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub robot: StartPose,
    pub geometry: BumperGeometry,
    pub controller: ControllerParams,
    #[serde(default)]
    pub kinematics: KinematicLimits,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub sim: SimConfig,
    pub attractor: AttractorDS,
    #[serde(default)]
    pub obstacles: Vec<ObstacleTrack>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    pub fn planner_margin(&self) -> f64 {
        self.planner.margin_meters.unwrap_or_else(|| {
            self.geometry.bumper_radius
                + (self.geometry.center_offset - self.planner.offset_meters).abs()
        })
    }

    pub fn obstacles_at(&self, t: f64) -> Vec<Obstacle> {
        self.obstacles.iter().map(|o| o.snapshot(t)).collect()
    }

    /// Check every parameter against its type invariants. Errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let scoped = |section: &str, e: Error| match e {
            Error::InvalidParameter { name, reason } => {
                Error::Scenario(format!("{section}.{name}: {reason}"))
            }
            other => other,
        };
        let finite = [
            self.robot.x_meters,
            self.robot.y_meters,
            self.robot.theta_radians,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Scenario("robot: pose must be finite".into()));
        }
        self.geometry
            .validate()
            .map_err(|e| scoped("geometry", e))?;
        self.controller
            .validate()
            .map_err(|e| scoped("controller", e))?;
        self.kinematics
            .validate()
            .map_err(|e| scoped("kinematics", e))?;
        self.sim.validate().map_err(|e| scoped("sim", e))?;
        self.attractor
            .validate()
            .map_err(|e| scoped("attractor", e))?;
        if !(self.planner.offset_meters.is_finite() && self.planner.offset_meters > 0.0) {
            return Err(Error::Scenario("planner.offset_meters: must be > 0".into()));
        }
        if let Some(m) = self.planner.margin_meters {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Scenario(
                    "planner.margin_meters: must be >= 0".into(),
                ));
            }
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            if !(obs.radius_meters.is_finite() && obs.radius_meters > 0.0) {
                return Err(Error::Scenario(format!(
                    "obstacles.{i}.radius_meters: must be > 0"
                )));
            }
            if obs
                .waypoints
                .windows(2)
                .any(|w| !(w[1].t_seconds > w[0].t_seconds))
            {
                return Err(Error::Scenario(format!(
                    "obstacles.{i}.waypoints: times must be strictly increasing"
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.axes.is_empty() {
                return Err(Error::Scenario("sweep.axes: must not be empty".into()));
            }
            if let Some(axis) = sweep.axes.iter().find(|a| a.values.is_empty()) {
                return Err(Error::Scenario(format!(
                    "sweep.axes: axis `{}` has no values",
                    axis.key
                )));
            }
            if sweep.repetitions == 0 {
                return Err(Error::Scenario("sweep.repetitions: must be >= 1".into()));
            }
        }
        Ok(())
    }
}
