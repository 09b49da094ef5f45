//! Frame importance: per-pixel cosine similarity against an estimate of the
//! next section, a Gaussian time proximity term, and their weighted sum.

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::video::LatentVideo;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImportanceError {
    #[error("pixel {pixel} has a zero-norm vector")]
    ZeroVectorPixel { pixel: usize },
    #[error("shape mismatch: {0} values vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("channel count must be positive and divide the frame length")]
    BadChannels,
    #[error("{times} times given for {frames} frames")]
    TimeCount { frames: usize, times: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

/// What to do with a pixel whose frame or target vector has zero norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroPixelPolicy {
    #[default]
    Error,
    /// Count the pixel as contributing 0.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceOptions {
    pub lambda_time: f64,
    /// Seconds per unit of the time term; 1.0 uses times as given.
    pub time_scale: f64,
    pub zero_pixels: ZeroPixelPolicy,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        Self {
            lambda_time: 1.0,
            time_scale: 1.0,
            zero_pixels: ZeroPixelPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceScore {
    pub frame_index: usize,
    pub time: f64,
    pub cos: f64,
    pub time_term: f64,
    /// `cos + lambda_time * time_term`
    pub score: f64,
}

/// Sum over pixels of the cosine between matching pixel vectors. Both slices
/// are `H×W×C` in row-major, channel-last order.
pub fn sim_cos(frame: &[f64], target: &[f64], channels: usize) -> Result<f64, ImportanceError> {
    sim_cos_with(frame, target, channels, ZeroPixelPolicy::Error)
}

pub fn sim_cos_with(frame: &[f64], target: &[f64], channels: usize, policy: ZeroPixelPolicy) -> Result<f64, ImportanceError> {
    if frame.len() != target.len() {
        return Err(ImportanceError::ShapeMismatch(frame.len(), target.len()));
    }
    if channels == 0 || !frame.len().is_multiple_of(channels) {
        return Err(ImportanceError::BadChannels);
    }
    let mut sum = 0.0;
    for (pixel, (a, b)) in frame.chunks_exact(channels).zip(target.chunks_exact(channels)).enumerate() {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            match policy {
                ZeroPixelPolicy::Error => return Err(ImportanceError::ZeroVectorPixel { pixel }),
                ZeroPixelPolicy::Skip => continue,
            }
        }
        sum += dot / (na * nb);
    }
    if !sum.is_finite() {
        return Err(ImportanceError::NonFinite("cosine similarity"));
    }
    Ok(sum)
}

pub fn sim_time(frame_time: f64, target_time: f64) -> f64 {
    let d = frame_time - target_time;
    (-d * d).exp()
}

/// Scores every history frame against `target` (one frame's worth of values).
pub fn score_frames(
    history: &LatentVideo,
    times: &[f64],
    target: &[f64],
    target_time: f64,
    opts: ImportanceOptions,
) -> Result<Vec<ImportanceScore>, ImportanceError> {
    if times.len() != history.frames() {
        return Err(ImportanceError::TimeCount {
            frames: history.frames(),
            times: times.len(),
        });
    }
    if !(times.iter().all(|t| t.is_finite()) && target_time.is_finite()) {
        return Err(ImportanceError::NonFinite("time"));
    }
    if !(opts.lambda_time.is_finite() && opts.time_scale.is_finite() && opts.time_scale > 0.0) {
        return Err(ImportanceError::NonFinite("weighting"));
    }
    if target.len() != history.frame_len() {
        return Err(ImportanceError::ShapeMismatch(history.frame_len(), target.len()));
    }
    (0..history.frames())
        .into_par_iter()
        .map(|i| {
            let cos = sim_cos_with(history.frame(i), target, history.channels(), opts.zero_pixels)?;
            let time_term = sim_time(times[i] / opts.time_scale, target_time / opts.time_scale);
            Ok(ImportanceScore {
                frame_index: i,
                time: times[i],
                cos,
                time_term,
                score: cos + opts.lambda_time * time_term,
            })
        })
        .collect()
}

fn rank_order(a: &ImportanceScore, b: &ImportanceScore) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.time.total_cmp(&a.time))
        .then(a.frame_index.cmp(&b.frame_index))
}

/// Scores sorted from most to least important. Ties go to the more recent
/// frame, then to the lower index.
pub fn rank_frames(
    history: &LatentVideo,
    times: &[f64],
    target: &[f64],
    target_time: f64,
    opts: ImportanceOptions,
) -> Result<Vec<ImportanceScore>, ImportanceError> {
    let mut scores = score_frames(history, times, target, target_time, opts)?;
    scores.sort_by(rank_order);
    Ok(scores)
}

/// Permutation of frame indices, most important first. Position `i` is the
/// compression level the frame gets.
pub fn sort_by_importance(
    history: &LatentVideo,
    times: &[f64],
    target: &[f64],
    target_time: f64,
    opts: ImportanceOptions,
) -> Result<Vec<usize>, ImportanceError> {
    Ok(rank_frames(history, times, target, target_time, opts)?
        .into_iter()
        .map(|s| s.frame_index)
        .collect())
}

/// Number of discordant pairs between two permutations of the same items.
pub fn kendall_tau_distance(a: &[usize], b: &[usize]) -> usize {
    let n = a.len().max(b.len());
    let mut pos = vec![usize::MAX; n.max(a.iter().chain(b).copied().max().map_or(0, |m| m + 1))];
    for (i, &x) in b.iter().enumerate() {
        pos[x] = i;
    }
    let ranks: Vec<usize> = a.iter().map(|&x| pos[x]).collect();
    let mut d = 0;
    for i in 0..ranks.len() {
        for j in i + 1..ranks.len() {
            if ranks[i] > ranks[j] {
                d += 1;
            }
        }
    }
    d
}
