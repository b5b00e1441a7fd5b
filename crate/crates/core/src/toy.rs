//! Deterministic linear generative model used to exercise every pipeline
//! end to end without trained networks.
//!
//! The decoder is `x = W z + b` with orthonormal columns in `W`, so the
//! encoder `z = Wᵀ (x − b)` is its exact pseudo-inverse.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attributes::FeatureTransform;
use crate::codec::{Codec, FeatureSet, Image, ImageShape};
use crate::error::{Error, Result};
use crate::latent::{dot, Label, LatentDataset, LatentVector, Prior};

/// Rejections tolerated before a dataset request is declared infeasible.
pub const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyCodec {
    seed: u64,
    dim: usize,
    shape: ImageShape,
    /// Decoder columns, `dim` vectors of length h·w.
    columns: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl ToyCodec {
    pub fn new(seed: u64, dim: usize, height: usize, width: usize) -> Result<Self> {
        let pixels = height * width;
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        if pixels < dim {
            return Err(Error::RankDeficient { pixels, dim });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..pixels).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let columns = orthonormalize(raw)?;
        let bias = (0..pixels).map(|_| rng.random_range(0.25..0.75)).collect();
        Ok(ToyCodec {
            seed,
            dim,
            shape: ImageShape::gray(height, width),
            columns,
            bias,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Decoder matrix W, row-major p × d.
    pub fn decoder_matrix(&self) -> Vec<f64> {
        let p = self.shape.len();
        let mut w = vec![0.0; p * self.dim];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                w[i * self.dim + j] = *v;
            }
        }
        w
    }

    /// Pseudo-inverse of W, row-major d × p. Equals Wᵀ for orthonormal columns.
    pub fn encoder_matrix(&self) -> Vec<f64> {
        self.columns.concat()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn decode_one(&self, z: &LatentVector) -> Result<Image> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.dim(),
            });
        }
        let mut x = self.bias.clone();
        for (col, &zj) in self.columns.iter().zip(z.as_slice()) {
            for (xi, wij) in x.iter_mut().zip(col) {
                *xi += wij * zj;
            }
        }
        Image::new(self.shape, x)
    }

    pub fn encode_one(&self, image: &Image) -> Result<LatentVector> {
        if image.shape() != self.shape {
            return Err(Error::CodecProtocol(format!(
                "image shape {:?} does not match codec shape {:?}",
                image.shape(),
                self.shape
            )));
        }
        let centered: Vec<f64> = image
            .data()
            .iter()
            .zip(&self.bias)
            .map(|(x, b)| x - b)
            .collect();
        LatentVector::new(self.columns.iter().map(|c| dot(c, &centered)).collect())
    }
}

impl Codec for ToyCodec {
    fn name(&self) -> &str {
        "toy-linear"
    }

    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn image_shape(&self) -> ImageShape {
        self.shape
    }

    fn encode(&self, images: &[Image]) -> Result<Vec<LatentVector>> {
        images.iter().map(|im| self.encode_one(im)).collect()
    }

    fn decode(&self, latents: &[LatentVector]) -> Result<Vec<Image>> {
        latents.iter().map(|z| self.decode_one(z)).collect()
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
fn orthonormalize(mut vectors: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    for j in 0..vectors.len() {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = vectors.split_at_mut(j);
                let proj = dot(&done[k], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                    *x -= proj * q;
                }
            }
        }
        let n = dot(&vectors[j], &vectors[j]).sqrt();
        if n < 1e-12 {
            return Err(Error::RankDeficient {
                pixels: vectors[j].len(),
                dim: vectors.len(),
            });
        }
        vectors[j].iter_mut().for_each(|x| *x /= n);
    }
    Ok(vectors)
}

/// Orthonormal random directions in `dim`-space, one per name.
pub fn random_axes(seed: u64, dim: usize, names: &[&str]) -> Result<Vec<(String, LatentVector)>> {
    if names.len() > dim {
        return Err(Error::RankDeficient {
            pixels: dim,
            dim: names.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a7e5);
    let raw: Vec<Vec<f64>> = names
        .iter()
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    orthonormalize(raw)?
        .into_iter()
        .zip(names)
        .map(|(v, name)| Ok((name.to_string(), LatentVector::new(v)?)))
        .collect()
}

/// Joint proportions for the first two attributes, ordered
/// (first+, second+), (first+, second−), (first−, second+), (first−, second−).
pub type CellProportions = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyDatasetSpec {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    /// Samples with |⟨z, u⟩| ≤ margin on any axis are rejected.
    pub margin: f64,
    pub axes: Vec<(String, LatentVector)>,
    pub proportions: Option<CellProportions>,
}

impl ToyDatasetSpec {
    /// Spec with orthonormal random axes derived from `seed`, margin 0.1.
    pub fn new(n: usize, dim: usize, seed: u64, attributes: &[&str]) -> Result<Self> {
        Ok(ToyDatasetSpec {
            n,
            dim,
            seed,
            margin: 0.1,
            axes: random_axes(seed, dim, attributes)?,
            proportions: None,
        })
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_proportions(mut self, proportions: CellProportions) -> Self {
        self.proportions = Some(proportions);
        self
    }

    pub fn axis(&self, name: &str) -> Option<&LatentVector> {
        self.axes.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 {
            return Err(Error::InvalidDataset(
                "toy dataset needs n, dim >= 1".into(),
            ));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::ParameterOutOfRange {
                name: "margin",
                value: self.margin,
            });
        }
        for (name, axis) in &self.axes {
            if axis.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: axis.dim(),
                });
            }
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDataset(format!(
                    "axis `{name}` is not unit norm"
                )));
            }
        }
        if let Some(p) = self.proportions {
            if self.axes.len() < 2 {
                return Err(Error::InfeasibleProportions(
                    "cell proportions need at least two attributes".into(),
                ));
            }
            if p.iter().any(|x| x.is_nan() || *x < 0.0)
                || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::InfeasibleProportions(format!(
                    "proportions {p:?} must be non-negative and sum to 1"
                )));
            }
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` samples over the four cells.
fn cell_quotas(p: &CellProportions, n: usize) -> [usize; 4] {
    let exact: Vec<f64> = p.iter().map(|x| x * n as f64).collect();
    let mut quotas = [0usize; 4];
    for (q, e) in quotas.iter_mut().zip(&exact) {
        *q = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - quotas.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        quotas[k] += 1;
    }
    quotas
}

fn cell_index(first: bool, second: bool) -> usize {
    match (first, second) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

/// Draws a labelled latent dataset and its decoded features.
pub fn toy_dataset(spec: &ToyDatasetSpec, codec: &ToyCodec) -> Result<(LatentDataset, FeatureSet)> {
    let dataset = toy_latents(spec)?;
    if codec.latent_dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: codec.latent_dim(),
            found: spec.dim,
        });
    }
    let images = dataset
        .rows()
        .map(|row| codec.decode_one(&LatentVector::new(row.to_vec())?))
        .collect::<Result<Vec<_>>>()?;
    Ok((dataset, FeatureSet::new(images)?))
}

/// The latent half of [`toy_dataset`], for callers that need no features.
pub fn toy_latents(spec: &ToyDatasetSpec) -> Result<LatentDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let quotas = spec.proportions.map(|p| cell_quotas(&p, spec.n));
    let mut filled = [0usize; 4];
    let mut data = Vec::with_capacity(spec.n * spec.dim);
    let mut labels: Vec<Vec<Label>> = vec![Vec::with_capacity(spec.n); spec.axes.len()];
    let mut rejections = 0usize;
    let mut accepted = 0usize;
    let mut z = vec![0.0; spec.dim];
    let mut dots = vec![0.0; spec.axes.len()];

    while accepted < spec.n {
        z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        for (d, (_, axis)) in dots.iter_mut().zip(&spec.axes) {
            *d = dot(&z, axis.as_slice());
        }
        let mut ok = dots.iter().all(|d| d.abs() > spec.margin);
        if ok {
            if let Some(q) = &quotas {
                let cell = cell_index(dots[0] > 0.0, dots[1] > 0.0);
                if filled[cell] < q[cell] {
                    filled[cell] += 1;
                } else {
                    ok = false;
                }
            }
        }
        if !ok {
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::InfeasibleProportions(format!(
                    "gave up after {MAX_REJECTIONS} rejections with {accepted}/{} samples",
                    spec.n
                )));
            }
            continue;
        }
        data.extend_from_slice(&z);
        for (seq, d) in labels.iter_mut().zip(&dots) {
            seq.push(Label::from_bool(*d > 0.0));
        }
        accepted += 1;
    }

    let width = spec.n.to_string().len().max(5);
    let ids = (0..spec.n).map(|i| format!("toy-{i:0width$}")).collect();
    let labels: BTreeMap<String, Vec<Label>> = spec
        .axes
        .iter()
        .map(|(name, _)| name.clone())
        .zip(labels)
        .collect();
    LatentDataset::from_flat(spec.dim, data, Some(ids), labels, Prior::Gaussian)
}

/// Normalized 1-D Gaussian taps with radius ⌈2σ⌉.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::ParameterOutOfRange {
            name: "sigma",
            value: sigma,
        });
    }
    let radius = (2.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Half-sample symmetric reflection: `d c b a | a b c d | d c b a`.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian blur with reflect padding, applied per channel.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Result<Image> {
    let taps = gaussian_kernel(sigma)?;
    let radius = (taps.len() / 2) as i64;
    let ImageShape {
        height,
        width,
        channels,
    } = image.shape();
    let src = image.data();
    let idx = |y: usize, x: usize, c: usize| (y * width + x) * channels + c;

    let mut horizontal = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                horizontal[idx(y, x, c)] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * src[idx(y, reflect(x as i64 + k as i64 - radius, width), c)])
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                out[idx(y, x, c)] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        t * horizontal[idx(reflect(y as i64 + k as i64 - radius, height), x, c)]
                    })
                    .sum();
            }
        }
    }
    Image::new(image.shape(), out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBlur {
    pub sigma: f64,
}

impl FeatureTransform for GaussianBlur {
    fn id(&self) -> String {
        format!(
            "gaussian_blur(sigma={},radius={})",
            self.sigma,
            (2.0 * self.sigma).ceil()
        )
    }

    fn apply(&self, image: &Image) -> Result<Image> {
        gaussian_blur(image, self.sigma).map_err(|e| Error::TransformFailure(e.to_string()))
    }
}
