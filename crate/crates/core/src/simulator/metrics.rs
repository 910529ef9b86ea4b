use serde::{Deserialize, Serialize};

use super::trace::Trace;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::kinematics::DEFAULT_SINGULAR_ANGLE;

/// Force band, as fractions of the force limit, that ends the transient.
pub const BAND_LOW: f64 = 0.5;
pub const BAND_HIGH: f64 = 1.5;
/// How long the force must stay in the band.
pub const STABLE_WINDOW: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub f_n_limit: f64,
    /// Target of the nominal field, if attractor error should be reported.
    pub attractor: Option<Vec2>,
    /// The attractor is tracked by a point this far ahead of the axle.
    pub planner_offset: f64,
    pub singular_angle: f64,
}

impl MetricsConfig {
    pub fn new(f_n_limit: f64) -> Self {
        Self {
            f_n_limit,
            attractor: None,
            planner_offset: 0.0,
            singular_angle: DEFAULT_SINGULAR_ANGLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub peak_force: f64,
    pub first_contact_time: Option<f64>,
    /// From first contact until the force settles in the band for the stable window.
    pub transient_time: Option<f64>,
    pub mean_slide_force: Option<f64>,
    pub std_slide_force: Option<f64>,
    pub max_slide_force: Option<f64>,
    pub slide_samples: usize,
    /// Smallest `singular_angle - |gamma_est|` over contact samples, radians.
    pub min_gamma_margin: Option<f64>,
    pub attractor_error: Option<f64>,
}

/// Metrics for a trace with at least one contact sample.
pub fn metrics(trace: &Trace, cfg: &MetricsConfig) -> Result<Metrics> {
    let m = summarize(trace, cfg)?;
    if m.first_contact_time.is_none() {
        return Err(Error::NoContact);
    }
    Ok(m)
}

/// Like [`metrics`] but contact-free traces yield `None` contact fields.
pub fn summarize(trace: &Trace, cfg: &MetricsConfig) -> Result<Metrics> {
    let records = trace.records();
    let last = records
        .last()
        .ok_or_else(|| Error::Scenario("trace is empty".into()))?;
    let force: Vec<f64> = records.iter().map(|r| r.force_norm()).collect();
    let peak_force = force.iter().copied().fold(0.0, f64::max);

    let attractor_error = cfg.attractor.map(|a| {
        let heading = Vec2::new(last.theta.cos(), last.theta.sin());
        (last.position() + heading * cfg.planner_offset - a).norm()
    });

    let min_gamma_margin = records
        .iter()
        .filter(|r| r.estimate.in_contact)
        .map(|r| cfg.singular_angle - r.estimate.gamma.abs())
        .reduce(f64::min);

    let Some(first) = records.iter().position(|r| r.estimate.in_contact) else {
        return Ok(Metrics {
            peak_force,
            first_contact_time: None,
            transient_time: None,
            mean_slide_force: None,
            std_slide_force: None,
            max_slide_force: None,
            slide_samples: 0,
            min_gamma_margin,
            attractor_error,
        });
    };
    let t0 = records[first].t;

    let low = BAND_LOW * cfg.f_n_limit;
    let high = BAND_HIGH * cfg.f_n_limit;
    let mut run_start: Option<usize> = None;
    let mut settled: Option<usize> = None;
    for i in first..records.len() {
        if force[i] >= low && force[i] <= high {
            let start = *run_start.get_or_insert(i);
            if records[i].t - records[start].t >= STABLE_WINDOW - 1e-9 {
                settled = Some(start);
                break;
            }
        } else {
            run_start = None;
        }
    }

    let (mut mean, mut std, mut max, mut count) = (None, None, None, 0);
    if let Some(s) = settled {
        let slide: Vec<f64> = (s..records.len())
            .filter(|&i| records[i].estimate.in_contact)
            .map(|i| force[i])
            .collect();
        count = slide.len();
        if count > 0 {
            let n = count as f64;
            let mu = slide.iter().sum::<f64>() / n;
            let var = slide.iter().map(|f| (f - mu) * (f - mu)).sum::<f64>() / n;
            mean = Some(mu);
            std = Some(var.sqrt());
            max = slide.iter().copied().reduce(f64::max);
        }
    }

    Ok(Metrics {
        peak_force,
        first_contact_time: Some(t0),
        transient_time: settled.map(|s| records[s].t - t0),
        mean_slide_force: mean,
        std_slide_force: std,
        max_slide_force: max,
        slide_samples: count,
        min_gamma_margin,
        attractor_error,
    })
}
