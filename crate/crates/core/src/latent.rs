//! Latent vectors, encoded datasets, interpolation and prior statistics.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle (radians) slerp falls back to lerp.
pub const SLERP_LERP_FALLBACK: f64 = 1e-7;

/// Endpoints closer than this to π apart are rejected as antipodal.
pub const SLERP_ANTIPODAL_GUARD: f64 = 1e-5;

/// A point in a model's latent space. Always non-empty and finite.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(LatentVector(values))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &LatentVector) -> Result<f64> {
        check_dims(self, other)?;
        Ok(dot(&self.0, &other.0))
    }

    /// Bitwise comparison, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &LatentVector) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Componentwise map; the result must stay finite.
    pub(crate) fn map_checked(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl fmt::Debug for LatentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("LatentVector").field(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for LatentVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LatentVector> for Vec<f64> {
    fn from(v: LatentVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_dims(a: &LatentVector, b: &LatentVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sampling prior assumed over the latent space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    /// Standard normal, μ = 0, σ = 1.
    Gaussian,
    /// Uniform on [-1, 1] per component.
    Uniform,
}

impl Prior {
    pub fn name(self) -> &'static str {
        match self {
            Prior::Gaussian => "gaussian",
            Prior::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Prior::Gaussian),
            "uniform" => Ok(Prior::Uniform),
            other => Err(Error::HeaderMismatch(format!("unknown prior `{other}`"))),
        }
    }
}

/// Binary attribute label with an explicit missing marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
    Missing,
}

impl Label {
    pub fn to_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => 0,
            Label::Missing => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Label::Positive),
            0 => Some(Label::Negative),
            -1 => Some(Label::Missing),
            _ => None,
        }
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// `Some(true)` for positive, `Some(false)` for negative, `None` if missing.
    pub fn known(self) -> Option<bool> {
        match self {
            Label::Positive => Some(true),
            Label::Negative => Some(false),
            Label::Missing => None,
        }
    }
}

/// An immutable N × d matrix of encodings with ids and optional labels.
///
/// Rows are stored as 64-bit floats regardless of the on-disk precision.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDataset {
    dim: usize,
    data: Vec<f64>,
    ids: Vec<String>,
    /// False when ids were synthesized from row indices.
    explicit_ids: bool,
    labels: BTreeMap<String, Vec<Label>>,
    prior: Prior,
}

impl LatentDataset {
    /// Builds a dataset from rows. When `ids` is `None`, row indices are used.
    pub fn new(
        rows: Vec<LatentVector>,
        ids: Option<Vec<String>>,
        labels: BTreeMap<String, Vec<Label>>,
        prior: Prior,
    ) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidDataset("dataset needs at least one row".into()))?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.dim(),
                });
            }
            data.extend_from_slice(row.as_slice());
        }
        Self::from_flat(dim, data, ids, labels, prior)
    }

    /// Builds a dataset from a row-major flat buffer.
    pub fn from_flat(
        dim: usize,
        data: Vec<f64>,
        ids: Option<Vec<String>>,
        labels: BTreeMap<String, Vec<Label>>,
        prior: Prior,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidDataset(format!(
                "buffer of {} values is not a positive multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let n = data.len() / dim;
        let explicit_ids = ids.is_some();
        let ids = match ids {
            Some(ids) => ids,
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        if ids.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} ids for {n} rows",
                ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate id `{id}`")));
            }
        }
        for (name, seq) in &labels {
            if seq.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "label `{name}` has {} entries for {n} rows",
                    seq.len()
                )));
            }
        }
        Ok(LatentDataset {
            dim,
            data,
            ids,
            explicit_ids,
            labels,
            prior,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prior(&self) -> Prior {
        self.prior
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn has_explicit_ids(&self) -> bool {
        self.explicit_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn vector(&self, i: usize) -> LatentVector {
        LatentVector(self.row(i).to_vec())
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<Label>> {
        &self.labels
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn attribute(&self, name: &str) -> Result<&[Label]> {
        self.labels
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownAttribute(name.to_owned()))
    }

    /// Returns a copy with every label sequence replaced by `labels`.
    pub fn with_labels(&self, labels: BTreeMap<String, Vec<Label>>) -> Result<Self> {
        let mut out = Self::from_flat(
            self.dim,
            self.data.clone(),
            Some(self.ids.clone()),
            labels,
            self.prior,
        )?;
        out.explicit_ids = self.explicit_ids;
        Ok(out)
    }
}

/// Descriptive statistics comparing a dataset's geometry to its prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorStats {
    pub n: usize,
    pub dim: usize,
    pub prior: Prior,
    pub mean_norm: f64,
    /// Sample (n − 1) standard deviation of the row norms.
    pub std_norm: f64,
    /// √d under a Gaussian prior, absent for uniform.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_norm: Option<f64>,
    pub per_dim_mean: Vec<f64>,
    pub per_dim_std: Vec<f64>,
}

pub fn lerp(a: &LatentVector, b: &LatentVector, t: f64) -> Result<LatentVector> {
    check_dims(a, b)?;
    check_t(t)?;
    Ok(lerp_unchecked(a, b, t))
}

fn lerp_unchecked(a: &LatentVector, b: &LatentVector, t: f64) -> LatentVector {
    if t == 0.0 || a == b {
        return a.clone();
    }
    if t == 1.0 {
        return b.clone();
    }
    let s = 1.0 - t;
    LatentVector(a.0.iter().zip(&b.0).map(|(x, y)| s * x + t * y).collect())
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::ParameterOutOfRange {
            name: "t",
            value: t,
        });
    }
    Ok(())
}

/// Angle between two non-zero vectors, with the cosine clamped into [-1, 1].
pub fn angle_between(a: &LatentVector, b: &LatentVector) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cos = (dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// Spherical linear interpolation along the great-circle arc spanned by `a`
/// and `b`. Raw (unnormalized) vectors are used, so the norm also moves
/// along the arc when `‖a‖ != ‖b‖`.
pub fn slerp(a: &LatentVector, b: &LatentVector, t: f64) -> Result<LatentVector> {
    check_t(t)?;
    let theta = angle_between(a, b)?;
    if theta > PI - SLERP_ANTIPODAL_GUARD {
        return Err(Error::AntipodalEndpoints { angle: theta });
    }
    if t == 0.0 || a == b {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    if theta < SLERP_LERP_FALLBACK {
        return Ok(lerp_unchecked(a, b, t));
    }
    let sin_theta = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / sin_theta;
    let wb = (t * theta).sin() / sin_theta;
    Ok(LatentVector(
        a.0.iter().zip(&b.0).map(|(x, y)| wa * x + wb * y).collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationMode {
    Linear,
    Spherical,
}

impl InterpolationMode {
    pub fn interpolate(self, a: &LatentVector, b: &LatentVector, t: f64) -> Result<LatentVector> {
        match self {
            InterpolationMode::Linear => lerp(a, b, t),
            InterpolationMode::Spherical => slerp(a, b, t),
        }
    }
}

/// `steps` evenly spaced points from `a` to `b`, endpoints included verbatim.
pub fn interpolate_path(
    a: &LatentVector,
    b: &LatentVector,
    steps: usize,
    mode: InterpolationMode,
) -> Result<Vec<LatentVector>> {
    if steps < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "steps",
            value: steps as f64,
        });
    }
    let last = (steps - 1) as f64;
    (0..steps)
        .map(|i| mode.interpolate(a, b, i as f64 / last))
        .collect()
}

pub fn prior_stats(ds: &LatentDataset) -> Result<PriorStats> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "prior statistics need at least 2 rows, got {n}"
        )));
    }
    let d = ds.dim();
    let norms: Vec<f64> = ds.rows().map(norm).collect();
    let (mean_norm, std_norm) = mean_std(&norms);

    let mut per_dim_mean = vec![0.0; d];
    for row in ds.rows() {
        for (m, v) in per_dim_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    per_dim_mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut per_dim_std = vec![0.0; d];
    for row in ds.rows() {
        for ((s, v), m) in per_dim_std.iter_mut().zip(row).zip(&per_dim_mean) {
            *s += (v - m) * (v - m);
        }
    }
    per_dim_std
        .iter_mut()
        .for_each(|s| *s = (*s / (n - 1) as f64).sqrt());

    let expected_norm = match ds.prior() {
        Prior::Gaussian => Some((d as f64).sqrt()),
        Prior::Uniform => None,
    };
    Ok(PriorStats {
        n,
        dim: d,
        prior: ds.prior(),
        mean_norm,
        std_norm,
        expected_norm,
        per_dim_mean,
        per_dim_std,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
