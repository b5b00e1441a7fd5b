//! Manifold Interpolated Neighbor Embedding (MINE).
//!
//! A MINE grid takes the nearest encoded samples to a seed point, lays them
//! out on a small 2-D lattice so that similar samples sit next to each
//! other, then spreads the lattice apart with slerp-interpolated cells.
//! Every anchor is a real dataset row; nothing is sampled from the prior.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{CellRole, GridManifest};
use crate::latent::{dot, norm, slerp, LatentDataset, LatentVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// 1 − cos(angle).
    Cosine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidDataset(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Neighbor {
    /// Row index in the dataset.
    pub index: usize,
    pub id: String,
    pub distance: f64,
}

/// Exact (brute-force) nearest-neighbor index over an encoded dataset.
#[derive(Clone, Debug)]
pub struct NeighborIndex<'a> {
    dataset: &'a LatentDataset,
    metric: Metric,
    norms: Vec<f64>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(dataset: &'a LatentDataset, metric: Metric) -> Result<Self> {
        let norms: Vec<f64> = dataset.rows().map(norm).collect();
        if metric == Metric::Cosine && norms.contains(&0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(NeighborIndex {
            dataset,
            metric,
            norms,
        })
    }

    pub fn dataset(&self) -> &'a LatentDataset {
        self.dataset
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    fn distance_to(&self, i: usize, query: &[f64], query_norm: f64) -> f64 {
        let row = self.dataset.row(i);
        match self.metric {
            Metric::Euclidean => row
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => 1.0 - dot(row, query) / (self.norms[i] * query_norm),
        }
    }

    /// Distance between two dataset rows under the index metric.
    pub fn row_distance(&self, i: usize, j: usize) -> f64 {
        self.distance_to(i, self.dataset.row(j), self.norms[j])
    }

    /// The `k` nearest rows, ascending by distance, ties by row index.
    pub fn knn(&self, query: &LatentVector, k: usize) -> Result<Vec<Neighbor>> {
        let n = self.dataset.len();
        if query.dim() != self.dataset.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dataset.dim(),
                found: query.dim(),
            });
        }
        if k == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "k",
                value: 0.0,
            });
        }
        if k > n {
            return Err(Error::KTooLarge { k, n });
        }
        let qn = query.norm();
        if self.metric == Metric::Cosine && qn == 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut scored: Vec<(f64, usize)> = (0..n)
            .map(|i| (self.distance_to(i, query.as_slice(), qn), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(distance, index)| Neighbor {
                index,
                id: self.dataset.ids()[index].clone(),
                distance,
            })
            .collect())
    }
}

/// Dataset rows assigned to a rows × cols lattice, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Embedding {
    pub rows: usize,
    pub cols: usize,
    pub indices: Vec<usize>,
}

impl Embedding {
    pub fn at(&self, row: usize, col: usize) -> usize {
        self.indices[row * self.cols + col]
    }
}

/// Sum of distances between 4-adjacent lattice neighbors.
pub fn adjacency_cost(index: &NeighborIndex<'_>, embedding: &Embedding) -> f64 {
    let mut cost = 0.0;
    for i in 0..embedding.rows {
        for j in 0..embedding.cols {
            let here = embedding.at(i, j);
            if j + 1 < embedding.cols {
                cost += index.row_distance(here, embedding.at(i, j + 1));
            }
            if i + 1 < embedding.rows {
                cost += index.row_distance(here, embedding.at(i + 1, j));
            }
        }
    }
    cost
}

fn neighbors4(
    i: usize,
    j: usize,
    rows: usize,
    cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let up = (i > 0).then(|| (i - 1, j));
    let down = (i + 1 < rows).then(|| (i + 1, j));
    let left = (j > 0).then(|| (i, j - 1));
    let right = (j + 1 < cols).then(|| (i, j + 1));
    [up, down, left, right].into_iter().flatten()
}

/// Coordinate closest to the lattice center, lowest (i, j) on ties.
fn center_cell(rows: usize, cols: usize) -> (usize, usize) {
    let (ci, cj) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let mut best = (0, 0);
    let mut best_d = f64::INFINITY;
    for i in 0..rows {
        for j in 0..cols {
            let d = (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2);
            if d < best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    best
}

/// Places the `rows · cols` nearest neighbors of `seed` on a lattice.
///
/// The nearest goes to the center. Then, repeatedly, the empty cell with
/// the most filled 4-neighbors (lowest coordinate on ties) receives the
/// unplaced neighbor with the smallest summed distance to those filled
/// neighbors (lowest row index on ties).
pub fn embed_neighbors(
    index: &NeighborIndex<'_>,
    seed: &LatentVector,
    rows: usize,
    cols: usize,
) -> Result<Embedding> {
    if rows == 0 || cols == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "anchors",
            value: 0.0,
        });
    }
    let k = rows * cols;
    let nearest = index.knn(seed, k)?;
    let mut slots: Vec<Option<usize>> = vec![None; k];
    let mut unplaced: Vec<usize> = nearest.iter().map(|nb| nb.index).collect();
    unplaced.sort_unstable();

    let (ci, cj) = center_cell(rows, cols);
    slots[ci * cols + cj] = Some(nearest[0].index);
    unplaced.retain(|&x| x != nearest[0].index);

    while !unplaced.is_empty() {
        let mut target = None;
        let mut most = 0usize;
        for i in 0..rows {
            for j in 0..cols {
                if slots[i * cols + j].is_some() {
                    continue;
                }
                let filled = neighbors4(i, j, rows, cols)
                    .filter(|&(a, b)| slots[a * cols + b].is_some())
                    .count();
                if filled > most {
                    most = filled;
                    target = Some((i, j));
                }
            }
        }
        let (ti, tj) = target.expect("lattice is connected");
        let placed: Vec<usize> = neighbors4(ti, tj, rows, cols)
            .filter_map(|(a, b)| slots[a * cols + b])
            .collect();
        let (pos, _) = unplaced
            .iter()
            .enumerate()
            .map(|(p, &cand)| {
                let cost: f64 = placed.iter().map(|&q| index.row_distance(cand, q)).sum();
                (p, cost)
            })
            .fold((usize::MAX, f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            });
        slots[ti * cols + tj] = Some(unplaced.remove(pos));
    }
    Ok(Embedding {
        rows,
        cols,
        indices: slots
            .into_iter()
            .map(|s| s.expect("all slots filled"))
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Anchor {
    pub row: usize,
    pub col: usize,
    pub index: usize,
    pub id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MineGrid {
    pub anchor_rows: usize,
    pub anchor_cols: usize,
    pub spread: usize,
    pub anchors: Vec<Anchor>,
    pub grid: GridManifest,
}

impl MineGrid {
    pub fn to_json(&self) -> Result<String> {
        self.grid.to_json()
    }
}

/// Embeds neighbors as anchors spaced `spread` cells apart, fills each
/// anchor row horizontally by slerp, then fills every column vertically.
pub fn mine_grid(
    index: &NeighborIndex<'_>,
    seed: &LatentVector,
    anchor_rows: usize,
    anchor_cols: usize,
    spread: usize,
) -> Result<MineGrid> {
    if spread == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "spread",
            value: 0.0,
        });
    }
    let embedding = embed_neighbors(index, seed, anchor_rows, anchor_cols)?;
    let ds = index.dataset();
    let rows = (anchor_rows - 1) * spread + 1;
    let cols = (anchor_cols - 1) * spread + 1;
    let mut cells: Vec<Option<LatentVector>> = vec![None; rows * cols];
    let mut anchors = Vec::with_capacity(anchor_rows * anchor_cols);

    for ai in 0..anchor_rows {
        for aj in 0..anchor_cols {
            let idx = embedding.at(ai, aj);
            let (r, c) = (ai * spread, aj * spread);
            cells[r * cols + c] = Some(ds.vector(idx));
            anchors.push(Anchor {
                row: r,
                col: c,
                index: idx,
                id: ds.ids()[idx].clone(),
            });
        }
    }
    let step = |k: usize| k as f64 / spread as f64;
    for ai in 0..anchor_rows {
        let r = ai * spread;
        for aj in 0..anchor_cols.saturating_sub(1) {
            let left = cells[r * cols + aj * spread].clone().expect("anchor");
            let right = cells[r * cols + (aj + 1) * spread].clone().expect("anchor");
            for k in 1..spread {
                cells[r * cols + aj * spread + k] = Some(slerp(&left, &right, step(k))?);
            }
        }
    }
    for c in 0..cols {
        for ai in 0..anchor_rows.saturating_sub(1) {
            let top = cells[ai * spread * cols + c]
                .clone()
                .expect("anchor row filled");
            let bottom = cells[(ai + 1) * spread * cols + c]
                .clone()
                .expect("anchor row filled");
            for k in 1..spread {
                cells[(ai * spread + k) * cols + c] = Some(slerp(&top, &bottom, step(k))?);
            }
        }
    }

    let anchor_at: BTreeMap<(usize, usize), &Anchor> =
        anchors.iter().map(|a| ((a.row, a.col), a)).collect();
    let entries = cells
        .into_iter()
        .enumerate()
        .map(|(k, latent)| {
            let latent = latent.expect("every cell filled");
            match anchor_at.get(&(k / cols, k % cols)) {
                Some(a) => (CellRole::Anchor, Some(a.id.clone()), latent),
                None => (CellRole::Interpolated, None, latent),
            }
        })
        .collect();

    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), Value::from("mine"));
    meta.insert("metric".into(), Value::from(index.metric().name()));
    meta.insert("anchor_rows".into(), Value::from(anchor_rows));
    meta.insert("anchor_cols".into(), Value::from(anchor_cols));
    meta.insert("spread".into(), Value::from(spread));
    meta.insert("embedding".into(), Value::from("greedy-adjacency"));
    meta.insert(
        "fill_order".into(),
        Value::from("anchor-rows-horizontal-then-columns-vertical"),
    );
    meta.insert("interpolation".into(), Value::from("spherical"));
    meta.insert("seed".into(), json!(seed.as_slice()));
    meta.insert("anchors".into(), serde_json::to_value(&anchors)?);
    let grid = GridManifest::from_row_major(rows, cols, entries, meta)?;
    Ok(MineGrid {
        anchor_rows,
        anchor_cols,
        spread,
        anchors,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use super::*;
    use crate::latent::Prior;

    fn dataset(rows: &[&[f64]]) -> LatentDataset {
        LatentDataset::new(
            rows.iter()
                .map(|r| LatentVector::new(r.to_vec()).unwrap())
                .collect(),
            None,
            BTreeMap::new(),
            Prior::Gaussian,
        )
        .unwrap()
    }

    fn v(xs: &[f64]) -> LatentVector {
        LatentVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn knn_small_line() {
        let ds = dataset(&[&[0., 0.], &[1., 0.], &[3., 0.]]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        let got = idx.knn(&v(&[0.9, 0.]), 2).unwrap();
        assert_eq!(got[0].index, 1);
        assert!((got[0].distance - 0.1).abs() < 1e-12);
        assert_eq!(got[1].index, 0);
        assert!((got[1].distance - 0.9).abs() < 1e-12);
    }

    #[test]
    fn knn_self_match_and_ties() {
        let ds = dataset(&[&[1., 0.], &[0., 1.], &[-1., 0.], &[0., -1.]]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        let got = idx.knn(&v(&[0., 1.]), 1).unwrap();
        assert_eq!((got[0].index, got[0].distance), (1, 0.0));
        let tied = idx.knn(&v(&[0., 0.]), 4).unwrap();
        assert_eq!(
            tied.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn knn_errors() {
        let ds = dataset(&[&[1., 0.], &[0., 1.]]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        assert!(matches!(
            idx.knn(&v(&[1., 0.]), 3),
            Err(Error::KTooLarge { k: 3, n: 2 })
        ));
        assert!(matches!(
            idx.knn(&v(&[1.]), 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_metric() {
        let ds = dataset(&[&[1., 0.], &[10., 1.], &[0., 1.]]);
        let idx = NeighborIndex::new(&ds, Metric::Cosine).unwrap();
        let got = idx.knn(&v(&[5., 0.]), 3).unwrap();
        assert_eq!(got[0].index, 0);
        assert!(got[0].distance.abs() < 1e-15);
        assert_eq!(got[2].index, 2);
        assert!(idx.knn(&v(&[0., 0.]), 1).is_err());
        let zero = dataset(&[&[0., 0.]]);
        assert!(NeighborIndex::new(&zero, Metric::Cosine).is_err());
    }

    #[test]
    fn one_by_one_embedding() {
        let ds = dataset(&[&[0., 0.], &[2., 0.], &[5., 5.]]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        let e = embed_neighbors(&idx, &v(&[1.9, 0.]), 1, 1).unwrap();
        assert_eq!(e.indices, vec![1]);
    }

    #[test]
    fn center_cells() {
        assert_eq!(center_cell(3, 3), (1, 1));
        assert_eq!(center_cell(2, 2), (0, 0));
        assert_eq!(center_cell(1, 4), (0, 1));
        assert_eq!(center_cell(5, 5), (2, 2));
    }

    #[test]
    fn embedding_uses_each_neighbor_once() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                vec![
                    (i as f64 * 0.37).sin(),
                    (i as f64 * 0.91).cos(),
                    i as f64 * 0.01,
                ]
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let ds = dataset(&refs);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        let e = embed_neighbors(&idx, &v(&[0.1, 0.2, 0.3]), 3, 4).unwrap();
        let unique: HashSet<_> = e.indices.iter().collect();
        assert_eq!(unique.len(), 12);
        let knn: HashSet<usize> = idx
            .knn(&v(&[0.1, 0.2, 0.3]), 12)
            .unwrap()
            .into_iter()
            .map(|n| n.index)
            .collect();
        assert_eq!(unique, knn.iter().collect());
        let nearest = idx.knn(&v(&[0.1, 0.2, 0.3]), 1).unwrap()[0].index;
        assert_eq!(e.at(1, 1), nearest);
    }

    #[test]
    fn spread_one_is_anchors_only() {
        let ds = dataset(&[
            &[1., 0.1],
            &[0.9, 0.3],
            &[0.2, 1.],
            &[0.5, 0.5],
            &[-1., 0.2],
        ]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        let g = mine_grid(&idx, &v(&[0.6, 0.4]), 2, 2, 1).unwrap();
        assert_eq!((g.grid.rows, g.grid.cols), (2, 2));
        for cell in &g.grid.cells {
            assert_eq!(cell.role, CellRole::Anchor);
            let i = ds.index_of(cell.source_id.as_ref().unwrap()).unwrap();
            assert!(cell.latent.bit_eq(&ds.vector(i)));
        }
    }

    #[test]
    fn two_by_two_spread_two_center() {
        let ds = dataset(&[&[1., 0.1], &[0.9, 0.3], &[0.2, 1.], &[0.5, 0.5]]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        let g = mine_grid(&idx, &v(&[0.6, 0.4]), 2, 2, 2).unwrap();
        assert_eq!((g.grid.rows, g.grid.cols), (3, 3));
        let a = |r, c| g.grid.latent(r, c).clone();
        let top = slerp(&a(0, 0), &a(0, 2), 0.5).unwrap();
        let bottom = slerp(&a(2, 0), &a(2, 2), 0.5).unwrap();
        let center = slerp(&top, &bottom, 0.5).unwrap();
        assert!(g.grid.latent(1, 1).bit_eq(&center));
        assert_eq!(g.grid.cell(1, 1).role, CellRole::Interpolated);
        assert_eq!(g.grid.meta["anchors"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn zero_spread_rejected() {
        let ds = dataset(&[&[1., 0.]]);
        let idx = NeighborIndex::new(&ds, Metric::Euclidean).unwrap();
        assert!(mine_grid(&idx, &v(&[1., 0.]), 1, 1, 0).is_err());
        assert!(matches!(
            mine_grid(&idx, &v(&[1., 0.]), 2, 1, 1),
            Err(Error::KTooLarge { .. })
        ));
    }
}
