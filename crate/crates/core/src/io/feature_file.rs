//! `FEAT1` binary image sets.
//!
//! `"FEAT1\n"`, one JSON header line
//! `{"version":1,"n":..,"h":..,"w":..,"channels":..,"dtype":"f32le"}`, then
//! `n * h * w * channels` little-endian f32 values, row-major and
//! channel-interleaved. Values are clamped to [0, 1] on write.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::latent_file::{f32_payload, read_f32s, split_header};
use crate::codec::{FeatureSet, Image, ImageShape};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8] = b"FEAT1\n";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    n: usize,
    h: usize,
    w: usize,
    channels: usize,
    dtype: String,
}

pub fn encode_features(features: &FeatureSet) -> Result<Vec<u8>> {
    let shape = features.shape();
    let header = Header {
        version: 1,
        n: features.len(),
        h: shape.height,
        w: shape.width,
        channels: shape.channels,
        dtype: "f32le".into(),
    };
    let mut out = Vec::with_capacity(64 + features.len() * shape.len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(serde_json::to_string(&header)?.as_bytes());
    out.push(b'\n');
    for image in features.images() {
        let clamped: Vec<f64> = image.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
        f32_payload(&clamped, &mut out)?;
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let (header, rest) = split_header(bytes, FEATURE_MAGIC)?;
    let header: Header = serde_json::from_slice(header)
        .map_err(|e| Error::HeaderMismatch(format!("unreadable header: {e}")))?;
    if header.version != 1 || header.dtype != "f32le" {
        return Err(Error::HeaderMismatch(format!(
            "unsupported version {} / dtype `{}`",
            header.version, header.dtype
        )));
    }
    let shape = ImageShape {
        height: header.h,
        width: header.w,
        channels: header.channels,
    };
    if header.n == 0 || shape.is_empty() {
        return Err(Error::HeaderMismatch(
            "n, h, w and channels must be positive".into(),
        ));
    }
    let expected = header
        .n
        .checked_mul(shape.len())
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::HeaderMismatch("payload size overflows".into()))?;
    if rest.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: rest.len(),
        });
    }
    if rest.len() > expected {
        return Err(Error::HeaderMismatch(format!(
            "{} trailing bytes",
            rest.len() - expected
        )));
    }
    let images = rest
        .chunks_exact(shape.len() * 4)
        .map(|chunk| Image::new(shape, read_f32s(chunk)))
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(images)
}

pub fn write_features(features: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_features(features)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    decode_features(&fs::read(path)?)
}
