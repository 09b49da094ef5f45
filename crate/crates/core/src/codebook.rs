//! K-means codebook over latent pixels and history discretization.
//!
//! Every pixel vector of every input video is one sample. Fitting seeds with
//! k-means++ from a ChaCha8 stream and runs Lloyd iterations; only the
//! per-point assignment runs in parallel, so results are bit-identical for a
//! given seed whatever the thread count.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::container::{FpltError, FpltFile, FLAG_CODEBOOK};
use crate::video::{LatentVideo, VideoError};

pub const DEFAULT_K: usize = 128;

#[derive(Debug, Error)]
pub enum CodebookError {
    #[error("only {distinct} distinct pixels for K = {k}")]
    InsufficientData { k: usize, distinct: usize },
    #[error("channel mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("index {index} out of range for K = {k}")]
    IndexOutOfRange { index: u32, k: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("codebook centroids must be finite")]
    NonFinite,
    #[error("file is not a codebook: {0}")]
    NotACodebook(&'static str),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Fplt(#[from] FpltError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the relative inertia decrease falls below this.
    pub tol: f64,
}

impl FitConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::new(DEFAULT_K, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitStats {
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Inertia after seeding and after every accepted Lloyd update.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    channels: usize,
    centroids: Vec<f64>,
    stats: Option<FitStats>,
}

/// Nearest-centroid indices for a `T×H×W` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub indices: Vec<u32>,
}

impl IndexMap {
    pub fn get(&self, t: usize, y: usize, x: usize) -> u32 {
        self.indices[(t * self.height + y) * self.width + x]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest row; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[f64], channels: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(channels).enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (i as u32, d);
        }
    }
    best
}

fn assign(points: &[f64], centroids: &[f64], channels: usize) -> Vec<(u32, f64)> {
    points
        .par_chunks_exact(channels)
        .map(|p| nearest(p, centroids, channels))
        .collect()
}

fn inertia_of(assigned: &[(u32, f64)]) -> f64 {
    assigned.iter().map(|a| a.1).sum()
}

fn count_distinct(points: &[f64], channels: usize, stop_at: usize) -> usize {
    let mut seen = HashSet::new();
    for p in points.chunks_exact(channels) {
        // +0.0 and -0.0 are the same pixel.
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        seen.insert(key);
        if seen.len() >= stop_at {
            break;
        }
    }
    seen.len()
}

fn kmeans_pp(points: &[f64], channels: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / channels;
    let point = |i: usize| &points[i * channels..(i + 1) * channels];
    let mut centroids = Vec::with_capacity(k * channels);
    centroids.extend_from_slice(point(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(point(i), &centroids)).collect();
    while centroids.len() < k * channels {
        let total: f64 = d2.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            cum += d;
            if d > 0.0 && cum > u {
                pick = Some(i);
                break;
            }
        }
        let pick = pick.or_else(|| d2.iter().rposition(|&d| d > 0.0)).expect("distinct points remain");
        let start = centroids.len();
        centroids.extend_from_slice(point(pick));
        let new = &centroids[start..];
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(point(i), new));
        }
    }
    centroids
}

fn lloyd_update(points: &[f64], channels: usize, k: usize, assigned: &[(u32, f64)], current: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; k * channels];
    let mut counts = vec![0usize; k];
    for (p, &(a, _)) in points.chunks_exact(channels).zip(assigned) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * channels..(a + 1) * channels].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut next = current.to_vec();
    let mut used = vec![false; assigned.len()];
    for j in 0..k {
        let row = &mut next[j * channels..(j + 1) * channels];
        if counts[j] > 0 {
            for (r, s) in row.iter_mut().zip(&sums[j * channels..(j + 1) * channels]) {
                *r = s / counts[j] as f64;
            }
        } else {
            // Empty cluster: move it onto the worst-served point not already taken.
            let far = (0..assigned.len())
                .filter(|&i| !used[i])
                .max_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(b.cmp(&a)));
            if let Some(i) = far {
                used[i] = true;
                row.copy_from_slice(&points[i * channels..(i + 1) * channels]);
            }
        }
    }
    next
}

fn gather(dataset: &[LatentVideo]) -> Result<(Vec<f64>, usize), CodebookError> {
    let channels = dataset.first().map(LatentVideo::channels).ok_or(CodebookError::InsufficientData { k: 1, distinct: 0 })?;
    let mut points = Vec::new();
    for v in dataset {
        if v.channels() != channels {
            return Err(CodebookError::ChannelMismatch(channels, v.channels()));
        }
        points.extend_from_slice(v.data());
    }
    Ok((points, channels))
}

impl Codebook {
    pub fn from_centroids(k: usize, channels: usize, centroids: Vec<f64>) -> Result<Self, CodebookError> {
        if k == 0 || channels == 0 {
            return Err(CodebookError::InvalidConfig("K and C must be positive"));
        }
        if !centroids.iter().all(|v| v.is_finite()) {
            return Err(CodebookError::NonFinite);
        }
        LatentVideo::new(1, 1, k, channels, centroids.clone())?;
        Ok(Self {
            k,
            channels,
            centroids,
            stats: None,
        })
    }

    pub fn fit(dataset: &[LatentVideo], cfg: FitConfig) -> Result<Self, CodebookError> {
        if cfg.k == 0 {
            return Err(CodebookError::InvalidConfig("K must be positive"));
        }
        if !(cfg.tol.is_finite() && cfg.tol >= 0.0) {
            return Err(CodebookError::InvalidConfig("tol must be finite and non-negative"));
        }
        let (points, channels) = gather(dataset)?;
        let distinct = count_distinct(&points, channels, cfg.k);
        if distinct < cfg.k {
            return Err(CodebookError::InsufficientData { k: cfg.k, distinct });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut centroids = kmeans_pp(&points, channels, cfg.k, &mut rng);
        let mut assigned = assign(&points, &centroids, channels);
        let mut inertia = inertia_of(&assigned);
        let mut history = vec![inertia];
        let mut iterations = 0;
        while iterations < cfg.max_iters {
            iterations += 1;
            let candidate = lloyd_update(&points, channels, cfg.k, &assigned, &centroids);
            let next = assign(&points, &candidate, channels);
            let next_inertia = inertia_of(&next);
            if next_inertia > inertia {
                // Only rounding can do this; keep the better state.
                break;
            }
            let rel = if inertia > 0.0 { (inertia - next_inertia) / inertia } else { 0.0 };
            centroids = candidate;
            assigned = next;
            inertia = next_inertia;
            history.push(inertia);
            if rel < cfg.tol {
                break;
            }
        }
        Ok(Self {
            k: cfg.k,
            channels,
            centroids,
            stats: Some(FitStats {
                inertia,
                iterations,
                seed: cfg.seed,
                inertia_history: history,
            }),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.channels..(i + 1) * self.channels]
    }

    pub fn stats(&self) -> Option<&FitStats> {
        self.stats.as_ref()
    }

    pub fn nearest(&self, pixel: &[f64]) -> u32 {
        nearest(pixel, &self.centroids, self.channels).0
    }

    pub fn quantize(&self, frames: &LatentVideo) -> Result<IndexMap, CodebookError> {
        if frames.channels() != self.channels {
            return Err(CodebookError::ChannelMismatch(self.channels, frames.channels()));
        }
        let indices = frames
            .data()
            .par_chunks_exact(self.channels)
            .map(|p| self.nearest(p))
            .collect();
        Ok(IndexMap {
            frames: frames.frames(),
            height: frames.height(),
            width: frames.width(),
            indices,
        })
    }

    pub fn dequantize(&self, map: &IndexMap) -> Result<LatentVideo, CodebookError> {
        let mut data = Vec::with_capacity(map.indices.len() * self.channels);
        for &index in &map.indices {
            if index as usize >= self.k {
                return Err(CodebookError::IndexOutOfRange { index, k: self.k });
            }
            data.extend_from_slice(self.centroid(index as usize));
        }
        Ok(LatentVideo::new(map.frames, map.height, map.width, self.channels, data)?)
    }

    /// Replaces every pixel by its nearest centroid.
    pub fn discretize(&self, frames: &LatentVideo) -> Result<LatentVideo, CodebookError> {
        self.dequantize(&self.quantize(frames)?)
    }

    /// `1×1×K×C` tensor with the codebook flag set.
    pub fn to_fplt(&self) -> Result<FpltFile, CodebookError> {
        let v = LatentVideo::new(1, 1, self.k, self.channels, self.centroids.clone())?;
        Ok(FpltFile::from_video(&v, FLAG_CODEBOOK)?)
    }

    pub fn from_fplt(file: &FpltFile) -> Result<Self, CodebookError> {
        if !file.is_codebook() {
            return Err(CodebookError::NotACodebook("codebook flag not set"));
        }
        let [t, h, k, c] = file.dims.map(|d| d as usize);
        if t != 1 || h != 1 {
            return Err(CodebookError::NotACodebook("expected a 1×1×K×C tensor"));
        }
        Self::from_centroids(k, c, file.payload.iter().map(|&v| v as f64).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CodebookError> {
        Ok(self.to_fplt()?.save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CodebookError> {
        Self::from_fplt(&FpltFile::load(path)?)
    }
}

pub fn fit_codebook(dataset: &[LatentVideo], cfg: FitConfig) -> Result<Codebook, CodebookError> {
    Codebook::fit(dataset, cfg)
}

pub fn quantize(frames: &LatentVideo, codebook: &Codebook) -> Result<IndexMap, CodebookError> {
    codebook.quantize(frames)
}

pub fn dequantize(map: &IndexMap, codebook: &Codebook) -> Result<LatentVideo, CodebookError> {
    codebook.dequantize(map)
}

pub fn discretize_history(frames: &LatentVideo, codebook: &Codebook) -> Result<LatentVideo, CodebookError> {
    codebook.discretize(frames)
}
