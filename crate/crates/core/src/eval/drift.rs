//! Drift: how much a segment metric changes between the opening and closing
//! 15% of a video.
//!
//! The builtin metrics sum sorted values, so a metric over a segment and over
//! the same segment reversed agree to the last bit.

use std::fmt;

use thiserror::Error;

use crate::video::LatentVideo;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DriftError {
    #[error("drift needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

/// A scalar quality score over a run of frames.
pub trait SegmentMetric: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, frames: &LatentVideo) -> f64;
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn sorted_mean(values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    sorted_sum(values) / n
}

/// Mean of channel 0 over every pixel. Unbounded, same units as the latent.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanLuminance;

impl SegmentMetric for MeanLuminance {
    fn name(&self) -> &str {
        "mean-luminance"
    }

    fn evaluate(&self, frames: &LatentVideo) -> f64 {
        sorted_mean(frames.pixels().map(|p| p[0]).collect())
    }
}

/// Variance of the 4-neighbour Laplacian of channel 0, edges clamped.
/// Range `[0, ∞)`; 0 for flat frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sharpness;

impl SegmentMetric for Sharpness {
    fn name(&self) -> &str {
        "sharpness"
    }

    fn evaluate(&self, frames: &LatentVideo) -> f64 {
        let (t, h, w, _) = frames.dims();
        let mut lap = Vec::with_capacity(t * h * w);
        for f in 0..t {
            let at = |y: usize, x: usize| frames.get(f, y, x, 0);
            for y in 0..h {
                for x in 0..w {
                    let up = at(y.saturating_sub(1), x);
                    let down = at((y + 1).min(h - 1), x);
                    let left = at(y, x.saturating_sub(1));
                    let right = at(y, (x + 1).min(w - 1));
                    lap.push(up + down + left + right - 4.0 * at(y, x));
                }
            }
        }
        let mean = sorted_mean(lap.clone());
        sorted_mean(lap.into_iter().map(|v| (v - mean) * (v - mean)).collect())
    }
}

/// Mean absolute difference between consecutive frames over all channels.
/// Range `[0, ∞)`; 0 for a single frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dynamics;

impl SegmentMetric for Dynamics {
    fn name(&self) -> &str {
        "dynamics"
    }

    fn evaluate(&self, frames: &LatentVideo) -> f64 {
        let mut diffs = Vec::new();
        for t in 1..frames.frames() {
            diffs.extend(frames.frame(t).iter().zip(frames.frame(t - 1)).map(|(a, b)| (a - b).abs()));
        }
        sorted_mean(diffs)
    }
}

pub fn builtin_metrics() -> Vec<Box<dyn SegmentMetric>> {
    vec![Box::new(MeanLuminance), Box::new(Sharpness), Box::new(Dynamics)]
}

pub fn metric_by_name(name: &str) -> Result<Box<dyn SegmentMetric>, DriftError> {
    builtin_metrics()
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| DriftError::UnknownMetric(name.to_string()))
}

/// Frames in each of the start and end windows: 15% of `t`, rounded down,
/// at least 1.
pub fn window_len(t: usize) -> usize {
    (t * 15 / 100).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub metric: String,
    pub start: f64,
    pub end: f64,
    pub drift: f64,
}

impl fmt::Display for DriftReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "metric={} start={} end={} drift={}", self.metric, self.start, self.end, self.drift)
    }
}

pub fn drift(video: &LatentVideo, metric: &dyn SegmentMetric) -> Result<DriftReport, DriftError> {
    let t = video.frames();
    if t < 2 {
        return Err(DriftError::TooFewFrames(t));
    }
    let n = window_len(t);
    let start = metric.evaluate(&video.slice_frames(0..n).expect("window in range"));
    let end = metric.evaluate(&video.slice_frames(t - n..t).expect("window in range"));
    Ok(DriftReport {
        metric: metric.name().to_string(),
        start,
        end,
        drift: (start - end).abs(),
    })
}
