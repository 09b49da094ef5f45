//! FPLT: a flat little-endian `f32` tensor file.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FPLT"
//! 4       4     version (u32 LE) = 1
//! 8       4     flags   (u32 LE), bit 0 = codebook
//! 12      16    T, H, W, C (u32 LE each)
//! 28      4·N   payload, N = T·H·W·C f32 LE, t-major, row-major, channel
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::video::{LatentVideo, VideoError};

pub const MAGIC: [u8; 4] = *b"FPLT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
pub const FLAG_CODEBOOK: u32 = 1;

#[derive(Debug, Error)]
pub enum FpltError {
    #[error("bad magic {0:?}, expected \"FPLT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported FPLT version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),
    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("dimension {0} does not fit in u32")]
    DimOverflow(usize),
    #[error("value {value} at index {index} is not representable as a finite f32")]
    NotRepresentable { index: usize, value: f64 },
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Raw contents of an FPLT file.
#[derive(Debug, Clone, PartialEq)]
pub struct FpltFile {
    pub flags: u32,
    pub dims: [u32; 4],
    pub payload: Vec<f32>,
}

impl FpltFile {
    pub fn from_video(video: &LatentVideo, flags: u32) -> Result<Self, FpltError> {
        let (t, h, w, c) = video.dims();
        let mut dims = [0u32; 4];
        for (d, v) in dims.iter_mut().zip([t, h, w, c]) {
            *d = u32::try_from(v).map_err(|_| FpltError::DimOverflow(v))?;
        }
        let mut payload = Vec::with_capacity(video.data().len());
        for (index, &value) in video.data().iter().enumerate() {
            let f = value as f32;
            if !f.is_finite() {
                return Err(FpltError::NotRepresentable { index, value });
            }
            payload.push(f);
        }
        Ok(Self { flags, dims, payload })
    }

    pub fn to_video(&self) -> Result<LatentVideo, FpltError> {
        let [t, h, w, c] = self.dims.map(|d| d as usize);
        Ok(LatentVideo::new(t, h, w, c, self.payload.iter().map(|&v| v as f64).collect())?)
    }

    pub fn is_codebook(&self) -> bool {
        self.flags & FLAG_CODEBOOK != 0
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FpltError> {
        if bytes.len() < HEADER_LEN {
            return Err(FpltError::TruncatedHeader(bytes.len()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FpltError::BadMagic(magic));
        }
        let version = word(4);
        if version != VERSION {
            return Err(FpltError::UnsupportedVersion(version));
        }
        let flags = word(8);
        let dims = [word(12), word(16), word(20), word(24)];
        let expected = dims
            .iter()
            .try_fold(4usize, |acc, &d| acc.checked_mul(d as usize))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or(FpltError::PayloadLength {
                expected: usize::MAX,
                found: bytes.len(),
            })?;
        if bytes.len() != expected {
            return Err(FpltError::PayloadLength {
                expected,
                found: bytes.len(),
            });
        }
        let payload = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self { flags, dims, payload })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), FpltError> {
        w.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, FpltError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::decode(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FpltError> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FpltError> {
        Self::decode(&fs::read(path)?)
    }
}

pub fn write_video(path: impl AsRef<Path>, video: &LatentVideo) -> Result<(), FpltError> {
    FpltFile::from_video(video, 0)?.save(path)
}

pub fn read_video(path: impl AsRef<Path>) -> Result<LatentVideo, FpltError> {
    FpltFile::load(path)?.to_video()
}
