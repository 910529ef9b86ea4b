//! Contact angle and force recovery from a single planar wrench at the bumper sensor.
//!
//! The sensor model relates the measured moment to the contact angle by
//! `Mz = Fx r cos(gamma) - Fy r sin(gamma)`. Inverting it is a quadratic in
//! `exp(i gamma)` with two roots; both satisfy the moment equation, so the
//! estimator keeps the one whose bumper normal best opposes the measured force
//! (the obstacle can only push on the bumper).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Planar force/torque measured at the bumper sensor, in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub mz: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        fx: 0.0,
        fy: 0.0,
        mz: 0.0,
    };

    pub fn new(fx: f64, fy: f64, mz: f64) -> Self {
        Self { fx, fy, mz }
    }

    pub fn force(&self) -> Vec2 {
        Vec2::new(self.fx, self.fy)
    }

    /// Magnitude of the planar force.
    pub fn force_norm(&self) -> f64 {
        self.fx.hypot(self.fy)
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.mz.is_finite()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.fx * c, self.fy * c, self.mz * c)
    }
}

/// A wrench-to-wrench correction applied to raw sensor readings before estimation.
///
/// A compliant bumper shell distorts what the sensor reads; a learned model can
/// be plugged in here. The shipped model is the identity.
pub trait CompensationModel {
    fn correct(&self, raw: Wrench) -> Wrench;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityCompensation;

impl CompensationModel for IdentityCompensation {
    fn correct(&self, raw: Wrench) -> Wrench {
        raw
    }
}

impl<F> CompensationModel for F
where
    F: Fn(Wrench) -> Wrench,
{
    fn correct(&self, raw: Wrench) -> Wrench {
        self(raw)
    }
}

pub fn compensate<M: CompensationModel + ?Sized>(raw: Wrench, model: &M) -> Wrench {
    model.correct(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactEstimate {
    pub gamma: f64,
    pub f_mag: f64,
    pub in_contact: bool,
}

impl ContactEstimate {
    pub const NONE: ContactEstimate = ContactEstimate {
        gamma: 0.0,
        f_mag: 0.0,
        in_contact: false,
    };
}

pub const DEFAULT_CONTACT_THRESHOLD: f64 = 2.0;

/// Relative slack on the square-root radicand before a wrench is declared inconsistent.
pub const RADICAND_SLACK: f64 = 1e-6;

/// Sensor moment produced by a planar force applied at contact angle `gamma`.
pub fn forward_wrench(gamma: f64, fx: f64, fy: f64, r: f64) -> Wrench {
    let (s, c) = gamma.sin_cos();
    Wrench::new(fx, fy, fx * r * c - fy * r * s)
}

/// Both closed-form solutions `-i log((Mz/r ± i sqrt(F^2 - (Mz/r)^2)) / (Fx + i Fy))`.
///
/// The first entry is the `+` root. For a consistent wrench each value is real
/// up to rounding; the imaginary part is `-ln|z|`.
pub fn angle_candidates(w: &Wrench, r: f64) -> Result<[Complex64; 2]> {
    let planar_sq = w.fx * w.fx + w.fy * w.fy;
    let m = w.mz / r;
    let mut radicand = planar_sq - m * m;
    if radicand < 0.0 {
        if radicand < -RADICAND_SLACK * planar_sq {
            return Err(Error::DegenerateWrench { excess: -radicand });
        }
        radicand = 0.0;
    }
    let root = radicand.sqrt();
    let denom = Complex64::new(w.fx, w.fy);
    let minus_i = -Complex64::i();
    let solve = |imag: f64| minus_i * (Complex64::new(m, imag) / denom).ln();
    Ok([solve(root), solve(-root)])
}

/// Recover the contact angle and force from a wrench.
///
/// Below `contact_threshold` (planar force norm) the estimate reports no contact.
pub fn estimate_contact(w: &Wrench, r: f64, contact_threshold: f64) -> Result<ContactEstimate> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "sensor radius must be > 0".into(),
        });
    }
    let planar = w.force_norm();
    if !(planar >= contact_threshold) {
        return Ok(ContactEstimate::NONE);
    }

    let candidates = angle_candidates(w, r)?;
    let residual = |g: f64| (w.fx * r * g.cos() - w.fy * r * g.sin() - w.mz).abs();
    // Larger is better: component of the obstacle push along the outward normal.
    let compression = |g: f64| -(w.fx * g.cos() + w.fy * g.sin());

    let g0 = candidates[0].re;
    let g1 = candidates[1].re;
    let (r0, r1) = (residual(g0), residual(g1));
    let tie = 1e-12 * (planar * r + w.mz.abs()) + f64::MIN_POSITIVE;
    let gamma = if (r0 - r1).abs() <= tie {
        if compression(g1) > compression(g0) {
            g1
        } else {
            g0
        }
    } else if r1 < r0 {
        g1
    } else {
        g0
    };
    let (s, c) = gamma.sin_cos();
    Ok(ContactEstimate {
        gamma,
        f_mag: w.fx * s + w.fy * c,
        in_contact: true,
    })
}
