//! Attribute vectors: latent directions derived from labelled or
//! synthetically transformed data.
//!
//! `naive` takes the mean of the positives minus the mean of the negatives.
//! `balanced` reweights samples first so a confounding attribute is
//! independent of the target; integer replication gives the same result.
//! `synthetic` compares mean encodings of transformed and original features.
//!
//! Directions are stored unnormalized.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{Codec, FeatureSet, Image};
use crate::error::{Error, Result};
use crate::latent::{check_dims, dot, LatentDataset, LatentVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Balanced,
    Synthetic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Balanced => "balanced",
            Method::Synthetic => "synthetic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMode {
    /// Per-sample weights T / (4 · n_cell).
    #[default]
    Weighted,
    /// Whole-number multiplicities scaling every cell to the LCM of the counts.
    Replicated,
}

/// 2×2 counts of (target, confound), indexed `[target][confound]` with
/// index 0 = positive, 1 = negative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub target: String,
    pub confound: String,
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn count(&self, target: bool, confound: bool) -> u64 {
        self.counts[usize::from(!target)][usize::from(!confound)]
    }

    pub fn proportion(&self, target: bool, confound: bool) -> f64 {
        self.count(target, confound) as f64 / self.total() as f64
    }

    /// Proportions as (t+,c+), (t+,c−), (t−,c+), (t−,c−).
    pub fn proportions(&self) -> [f64; 4] {
        [
            self.proportion(true, true),
            self.proportion(true, false),
            self.proportion(false, true),
            self.proportion(false, false),
        ]
    }

    /// P(target+ | confound = `confound`).
    pub fn target_rate_given(&self, confound: bool) -> f64 {
        let pos = self.count(true, confound) as f64;
        pos / (pos + self.count(false, confound) as f64)
    }

    pub fn cell_name(&self, target: bool, confound: bool) -> String {
        let sign = |b: bool| if b { '+' } else { '-' };
        format!(
            "{}{}/{}{}",
            self.target,
            sign(target),
            self.confound,
            sign(confound)
        )
    }

    fn require_nonempty(&self) -> Result<()> {
        for target in [true, false] {
            for confound in [true, false] {
                if self.count(target, confound) == 0 {
                    return Err(Error::EmptyCell {
                        cell: self.cell_name(target, confound),
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |t, c| 100.0 * self.proportion(t, c);
        let w = self.target.len().max(self.confound.len() + 4).max(5);
        writeln!(
            f,
            "{:w$} | {:>8} | {:>8} | {:>8}",
            "", self.confound, "not", "total"
        )?;
        for (name, t) in [
            (self.target.clone(), true),
            (format!("not {}", self.target), false),
        ] {
            writeln!(
                f,
                "{:w$} | {:>7.1}% | {:>7.1}% | {:>7.1}%",
                name,
                pct(t, true),
                pct(t, false),
                pct(t, true) + pct(t, false)
            )?;
        }
        write!(
            f,
            "{:w$} | {:>7.1}% | {:>7.1}% |",
            "total",
            pct(true, true) + pct(false, true),
            pct(true, false) + pct(false, false)
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeMeta {
    /// Samples contributing to the positive side.
    pub positives: usize,
    pub negatives: usize,
    /// Rows skipped for a missing target or confound label.
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confound: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contingency: Option<ContingencyTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_mode: Option<BalanceMode>,
    /// Per-cell multiplicities of the replication mode, same layout as
    /// [`ContingencyTable::counts`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<[[u64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonalized_against: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AttributeVectorRepr", into = "AttributeVectorRepr")]
pub struct AttributeVector {
    pub name: String,
    pub direction: LatentVector,
    pub method: Method,
    pub meta: AttributeMeta,
}

#[derive(Serialize, Deserialize)]
struct AttributeVectorRepr {
    name: String,
    dim: usize,
    method: Method,
    direction: LatentVector,
    meta: AttributeMeta,
}

impl TryFrom<AttributeVectorRepr> for AttributeVector {
    type Error = Error;

    fn try_from(r: AttributeVectorRepr) -> Result<Self> {
        if r.dim != r.direction.dim() {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                found: r.direction.dim(),
            });
        }
        Ok(AttributeVector {
            name: r.name,
            direction: r.direction,
            method: r.method,
            meta: r.meta,
        })
    }
}

impl From<AttributeVector> for AttributeVectorRepr {
    fn from(v: AttributeVector) -> Self {
        AttributeVectorRepr {
            name: v.name,
            dim: v.direction.dim(),
            method: v.method,
            direction: v.direction,
            meta: v.meta,
        }
    }
}

impl AttributeVector {
    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    /// Same attribute with the direction multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(AttributeVector {
            direction: self.direction.map_checked(|x| x * factor)?,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Cosine of the angle between two vectors; 0 when either is zero.
pub fn cosine(a: &LatentVector, b: &LatentVector) -> Result<f64> {
    check_dims(a, b)?;
    let denom = a.norm() * b.norm();
    Ok(if denom == 0.0 {
        0.0
    } else {
        dot(a.as_slice(), b.as_slice()) / denom
    })
}

fn difference(pos: &[f64], neg: &[f64]) -> Result<LatentVector> {
    LatentVector::new(pos.iter().zip(neg).map(|(p, n)| p - n).collect())
}

/// Mean of the positives minus mean of the negatives; missing labels skipped.
pub fn attribute_vector(ds: &LatentDataset, attr: &str) -> Result<AttributeVector> {
    let labels = ds.attribute(attr)?;
    let d = ds.dim();
    let (mut pos, mut neg) = (vec![0.0; d], vec![0.0; d]);
    let (mut n_pos, mut n_neg, mut excluded) = (0usize, 0usize, 0usize);
    for (row, label) in ds.rows().zip(labels) {
        let (acc, count) = match label.known() {
            Some(true) => (&mut pos, &mut n_pos),
            Some(false) => (&mut neg, &mut n_neg),
            None => {
                excluded += 1;
                continue;
            }
        };
        acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
        *count += 1;
    }
    if n_pos == 0 {
        return Err(Error::EmptyClass {
            attribute: attr.into(),
            class: "positive",
        });
    }
    if n_neg == 0 {
        return Err(Error::EmptyClass {
            attribute: attr.into(),
            class: "negative",
        });
    }
    pos.iter_mut().for_each(|v| *v /= n_pos as f64);
    neg.iter_mut().for_each(|v| *v /= n_neg as f64);
    Ok(AttributeVector {
        name: attr.into(),
        direction: difference(&pos, &neg)?,
        method: Method::Naive,
        meta: AttributeMeta {
            positives: n_pos,
            negatives: n_neg,
            excluded,
            ..Default::default()
        },
    })
}

/// Cell of each row, `None` if either label is missing.
fn cells(ds: &LatentDataset, target: &str, confound: &str) -> Result<Vec<Option<(bool, bool)>>> {
    let t = ds.attribute(target)?;
    let c = ds.attribute(confound)?;
    Ok(t.iter()
        .zip(c)
        .map(|(a, b)| Some((a.known()?, b.known()?)))
        .collect())
}

pub fn contingency(ds: &LatentDataset, target: &str, confound: &str) -> Result<ContingencyTable> {
    let mut counts = [[0u64; 2]; 2];
    for (t, c) in cells(ds, target, confound)?.into_iter().flatten() {
        counts[usize::from(!t)][usize::from(!c)] += 1;
    }
    Ok(ContingencyTable {
        target: target.into(),
        confound: confound.into(),
        counts,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BalanceOptions {
    pub mode: BalanceMode,
}

/// Target direction computed as if the four (target, confound) cells were
/// equally populated, removing the confound's contribution.
pub fn balanced_attribute_vector(
    ds: &LatentDataset,
    target: &str,
    confound: &str,
) -> Result<AttributeVector> {
    balanced_attribute_vector_with(ds, target, confound, BalanceOptions::default())
}

pub fn balanced_attribute_vector_with(
    ds: &LatentDataset,
    target: &str,
    confound: &str,
    options: BalanceOptions,
) -> Result<AttributeVector> {
    let table = contingency(ds, target, confound)?;
    table.require_nonempty()?;
    let row_cells = cells(ds, target, confound)?;
    let excluded = row_cells.iter().filter(|c| c.is_none()).count();

    let (direction, multiplicities) = match options.mode {
        BalanceMode::Weighted => (weighted_direction(ds, &row_cells, &table)?, None),
        BalanceMode::Replicated => {
            let m = replication_multiplicities(&table)?;
            (replicated_direction(ds, &row_cells, &m)?, Some(m))
        }
    };
    let positives = (table.count(true, true) + table.count(true, false)) as usize;
    let negatives = (table.count(false, true) + table.count(false, false)) as usize;
    Ok(AttributeVector {
        name: target.into(),
        direction,
        method: Method::Balanced,
        meta: AttributeMeta {
            positives,
            negatives,
            excluded,
            confound: Some(confound.into()),
            contingency: Some(table),
            balance_mode: Some(options.mode),
            multiplicities,
            ..Default::default()
        },
    })
}

/// Per-row balancing weights T / (4 · n_cell); 0 for rows with missing labels.
pub fn balancing_weights(ds: &LatentDataset, target: &str, confound: &str) -> Result<Vec<f64>> {
    let table = contingency(ds, target, confound)?;
    table.require_nonempty()?;
    let total = table.total() as f64;
    Ok(cells(ds, target, confound)?
        .into_iter()
        .map(|cell| match cell {
            Some((t, c)) => total / (4.0 * table.count(t, c) as f64),
            None => 0.0,
        })
        .collect())
}

fn weighted_direction(
    ds: &LatentDataset,
    row_cells: &[Option<(bool, bool)>],
    table: &ContingencyTable,
) -> Result<LatentVector> {
    let d = ds.dim();
    let total = table.total() as f64;
    let (mut pos, mut neg) = (vec![0.0; d], vec![0.0; d]);
    let (mut w_pos, mut w_neg) = (0.0, 0.0);
    for (row, cell) in ds.rows().zip(row_cells) {
        let Some((t, c)) = *cell else { continue };
        let w = total / (4.0 * table.count(t, c) as f64);
        let (acc, wsum) = if t {
            (&mut pos, &mut w_pos)
        } else {
            (&mut neg, &mut w_neg)
        };
        acc.iter_mut().zip(row).for_each(|(a, x)| *a += w * x);
        *wsum += w;
    }
    pos.iter_mut().for_each(|v| *v /= w_pos);
    neg.iter_mut().for_each(|v| *v /= w_neg);
    difference(&pos, &neg)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Multiplicities that replicate every cell up to the LCM of the cell counts.
pub fn replication_multiplicities(table: &ContingencyTable) -> Result<[[u64; 2]; 2]> {
    table.require_nonempty()?;
    let lcm = table
        .counts
        .iter()
        .flatten()
        .try_fold(1u64, |acc, &n| (acc / gcd(acc, n)).checked_mul(n));
    let lcm =
        lcm.ok_or_else(|| Error::InsufficientData("replication count overflows 64 bits".into()))?;
    let mut m = [[0u64; 2]; 2];
    for (mr, cr) in m.iter_mut().zip(&table.counts) {
        for (mv, cv) in mr.iter_mut().zip(cr) {
            *mv = lcm / cv;
        }
    }
    Ok(m)
}

fn replicated_direction(
    ds: &LatentDataset,
    row_cells: &[Option<(bool, bool)>],
    m: &[[u64; 2]; 2],
) -> Result<LatentVector> {
    let d = ds.dim();
    let (mut pos, mut neg) = (vec![0.0; d], vec![0.0; d]);
    let (mut n_pos, mut n_neg) = (0u128, 0u128);
    for (row, cell) in ds.rows().zip(row_cells) {
        let Some((t, c)) = *cell else { continue };
        let copies = m[usize::from(!t)][usize::from(!c)];
        let (acc, n) = if t {
            (&mut pos, &mut n_pos)
        } else {
            (&mut neg, &mut n_neg)
        };
        acc.iter_mut()
            .zip(row)
            .for_each(|(a, x)| *a += copies as f64 * x);
        *n += u128::from(copies);
    }
    pos.iter_mut().for_each(|v| *v /= n_pos as f64);
    neg.iter_mut().for_each(|v| *v /= n_neg as f64);
    difference(&pos, &neg)
}

/// Materializes the replicated dataset: every row of a cell is repeated
/// `multiplicity` times, ids suffixed with `#k`. Rows with a missing target
/// or confound label are dropped. Intended for small tables; the output has
/// 4 · LCM rows.
pub fn replicate(ds: &LatentDataset, target: &str, confound: &str) -> Result<LatentDataset> {
    let table = contingency(ds, target, confound)?;
    let m = replication_multiplicities(&table)?;
    let total_rows: u64 = m
        .iter()
        .zip(&table.counts)
        .flat_map(|(mr, cr)| mr.iter().zip(cr).map(|(a, b)| a * b))
        .sum();
    if total_rows > 10_000_000 {
        return Err(Error::InsufficientData(format!(
            "replication would produce {total_rows} rows"
        )));
    }
    let row_cells = cells(ds, target, confound)?;
    let mut data = Vec::new();
    let mut ids = Vec::new();
    let mut keep = Vec::new();
    for (i, cell) in row_cells.iter().enumerate() {
        let Some((t, c)) = *cell else { continue };
        for k in 0..m[usize::from(!t)][usize::from(!c)] {
            data.extend_from_slice(ds.row(i));
            ids.push(format!("{}#{k}", ds.ids()[i]));
            keep.push(i);
        }
    }
    let labels = ds
        .labels()
        .iter()
        .map(|(name, seq)| (name.clone(), keep.iter().map(|&i| seq[i]).collect()))
        .collect();
    LatentDataset::from_flat(ds.dim(), data, Some(ids), labels, ds.prior())
}

/// Balanced vectors for two correlated attributes, each using the other as
/// its confound.
pub fn decoupled_pair(
    ds: &LatentDataset,
    attr1: &str,
    attr2: &str,
) -> Result<(AttributeVector, AttributeVector)> {
    decoupled_pair_with(ds, attr1, attr2, false)
}

/// As [`decoupled_pair`]; with `orthogonalize` the second vector additionally
/// has its component along the first removed.
pub fn decoupled_pair_with(
    ds: &LatentDataset,
    attr1: &str,
    attr2: &str,
    orthogonalize: bool,
) -> Result<(AttributeVector, AttributeVector)> {
    let first = balanced_attribute_vector(ds, attr1, attr2)?;
    let mut second = balanced_attribute_vector(ds, attr2, attr1)?;
    if orthogonalize {
        let u = first.direction.as_slice();
        let uu = dot(u, u);
        if uu > 0.0 {
            let k = dot(second.direction.as_slice(), u) / uu;
            second.direction = LatentVector::new(
                second
                    .direction
                    .as_slice()
                    .iter()
                    .zip(u)
                    .map(|(v, u)| v - k * u)
                    .collect(),
            )?;
            second.meta.orthogonalized_against = Some(attr1.into());
        }
    }
    Ok((first, second))
}

/// A deterministic feature-space transform used to synthesize attribute labels.
pub trait FeatureTransform {
    /// Stable identifier recorded in attribute metadata.
    fn id(&self) -> String;
    fn apply(&self, image: &Image) -> Result<Image>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityTransform;

impl FeatureTransform for IdentityTransform {
    fn id(&self) -> String {
        "identity".into()
    }

    fn apply(&self, image: &Image) -> Result<Image> {
        Ok(image.clone())
    }
}

fn mean_of(vectors: &[LatentVector], dim: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::CodecProtocol(format!(
                "codec returned a {}-d latent, expected {dim}",
                v.dim()
            )));
        }
        acc.iter_mut().zip(v.as_slice()).for_each(|(a, x)| *a += x);
    }
    acc.iter_mut().for_each(|a| *a /= vectors.len() as f64);
    Ok(acc)
}

/// Mean encoding of transformed features minus mean encoding of the originals.
pub fn synthetic_attribute_vector(
    features: &FeatureSet,
    transform: &dyn FeatureTransform,
    codec: &dyn Codec,
    name: &str,
) -> Result<AttributeVector> {
    let transformed = features
        .images()
        .iter()
        .map(|im| transform.apply(im))
        .collect::<Result<Vec<_>>>()?;
    let dim = codec.latent_dim();
    let base = mean_of(&codec.encode(features.images())?, dim)?;
    let shifted = mean_of(&codec.encode(&transformed)?, dim)?;
    Ok(AttributeVector {
        name: name.into(),
        direction: difference(&shifted, &base)?,
        method: Method::Synthetic,
        meta: AttributeMeta {
            positives: features.len(),
            negatives: features.len(),
            transform: Some(transform.id()),
            ..Default::default()
        },
    })
}

/// `z + strength · direction`.
pub fn apply_attribute(
    z: &LatentVector,
    v: &AttributeVector,
    strength: f64,
) -> Result<LatentVector> {
    check_dims(z, &v.direction)?;
    if !strength.is_finite() {
        return Err(Error::ParameterOutOfRange {
            name: "strength",
            value: strength,
        });
    }
    if strength == 0.0 {
        return Ok(z.clone());
    }
    LatentVector::new(
        z.as_slice()
            .iter()
            .zip(v.direction.as_slice())
            .map(|(a, b)| a + strength * b)
            .collect(),
    )
}
