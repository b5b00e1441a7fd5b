//! Encoder/decoder contract and the feature-space image types it moves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn gray(height: usize, width: usize) -> Self {
        ImageShape {
            height,
            width,
            channels: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major image, channel-interleaved, values nominally in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    shape: ImageShape,
    data: Vec<f64>,
}

impl Image {
    pub fn new(shape: ImageShape, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidDataset("image with zero pixels".into()));
        }
        if data.len() != shape.len() {
            return Err(Error::InvalidDataset(format!(
                "image {}x{}x{} needs {} values, got {}",
                shape.height,
                shape.width,
                shape.channels,
                shape.len(),
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Image { shape, data })
    }

    pub fn filled(shape: ImageShape, value: f64) -> Result<Self> {
        Self::new(shape, vec![value; shape.len()])
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }

    pub fn mean_squared_error(&self, other: &Image) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::InvalidDataset("image shapes differ".into()));
        }
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.data.len() as f64)
    }
}

/// A collection of same-shaped images.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    shape: ImageShape,
    images: Vec<Image>,
}

impl FeatureSet {
    pub fn new(images: Vec<Image>) -> Result<Self> {
        let shape = images
            .first()
            .map(Image::shape)
            .ok_or_else(|| Error::InvalidDataset("feature set needs at least one image".into()))?;
        if images.iter().any(|im| im.shape() != shape) {
            return Err(Error::InvalidDataset(
                "feature set images differ in shape".into(),
            ));
        }
        Ok(FeatureSet { shape, images })
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Maps between feature space and latent space.
///
/// Implementations serialize their own access; callers may share a codec
/// across threads.
pub trait Codec {
    fn name(&self) -> &str;
    fn latent_dim(&self) -> usize;
    fn image_shape(&self) -> ImageShape;
    fn encode(&self, images: &[Image]) -> Result<Vec<LatentVector>>;
    fn decode(&self, latents: &[LatentVector]) -> Result<Vec<Image>>;
}

/// Returns `(decode(z), encode(decode(z)))`.
pub fn reconstruct(z: &LatentVector, codec: &dyn Codec) -> Result<(Image, LatentVector)> {
    if z.dim() != codec.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: codec.latent_dim(),
            found: z.dim(),
        });
    }
    let image = codec
        .decode(std::slice::from_ref(z))?
        .pop()
        .ok_or_else(|| Error::CodecProtocol("decode returned no image".into()))?;
    let back = codec
        .encode(std::slice::from_ref(&image))?
        .pop()
        .ok_or_else(|| Error::CodecProtocol("encode returned no latent".into()))?;
    Ok((image, back))
}
