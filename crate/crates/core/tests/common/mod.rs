#![allow(dead_code)]

use std::collections::BTreeMap;

use latentkit::{LatentDataset, LatentVector, Prior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> LatentVector {
    LatentVector::new(gaussian(rng, dim)).unwrap()
}

pub fn gaussian_dataset(seed: u64, n: usize, dim: usize) -> LatentDataset {
    let mut r = rng(seed);
    let rows = (0..n).map(|_| gaussian_vec(&mut r, dim)).collect();
    LatentDataset::new(rows, None, BTreeMap::new(), Prior::Gaussian).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Great-circle interpolation written from scratch: the angle comes from
/// atan2 of the orthogonal and parallel parts instead of acos.
pub fn slerp_oracle(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    if t == 0.0 {
        return a.to_vec();
    }
    if t == 1.0 {
        return b.to_vec();
    }
    let na = norm(a);
    let along = dot(a, b) / na;
    let perp: Vec<f64> = b
        .iter()
        .zip(a)
        .map(|(bi, ai)| bi - along * ai / na)
        .collect();
    let theta = norm(&perp).atan2(along);
    if theta < 1e-7 {
        return a
            .iter()
            .zip(b)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect();
    }
    let s = theta.sin();
    let (wa, wb) = (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s);
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by direct O(P·N) comparison.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(s, _)| *s)
        .collect();
    let mut twice: u128 = 0;
    for p in &pos {
        for n in &neg {
            twice += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64
}

#[allow(clippy::needless_range_loop)]
/// Rebuilds a MINE lattice from its anchors: anchor rows first, then columns.
pub fn mine_oracle(
    anchors: &[(usize, usize, Vec<f64>)],
    anchor_rows: usize,
    anchor_cols: usize,
    spread: usize,
) -> Vec<Vec<Vec<f64>>> {
    let rows = (anchor_rows - 1) * spread + 1;
    let cols = (anchor_cols - 1) * spread + 1;
    let mut g: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); cols]; rows];
    for (r, c, z) in anchors {
        g[*r][*c] = z.clone();
    }
    for ai in 0..anchor_rows {
        let r = ai * spread;
        for aj in 0..anchor_cols - 1 {
            let (l, rt) = (g[r][aj * spread].clone(), g[r][(aj + 1) * spread].clone());
            for k in 1..spread {
                g[r][aj * spread + k] = slerp_oracle(&l, &rt, k as f64 / spread as f64);
            }
        }
    }
    for c in 0..cols {
        for ai in 0..anchor_rows - 1 {
            let (t, b) = (g[ai * spread][c].clone(), g[(ai + 1) * spread][c].clone());
            for k in 1..spread {
                g[ai * spread + k][c] = slerp_oracle(&t, &b, k as f64 / spread as f64);
            }
        }
    }
    g
}

/// Nested great-circle lattice: corners a, b, c, d; rows-first.
pub fn jdiagram_oracle(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: &[f64],
    rows: usize,
    cols: usize,
) -> Vec<Vec<Vec<f64>>> {
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let t = j as f64 / (cols - 1) as f64;
                    let s = i as f64 / (rows - 1) as f64;
                    slerp_oracle(&slerp_oracle(a, b, t), &slerp_oracle(c, d, t), s)
                })
                .collect()
        })
        .collect()
}

/// Sum of distances between 4-adjacent lattice cells.
pub fn lattice_cost(rows: usize, cols: usize, at: impl Fn(usize, usize) -> Vec<f64>) -> f64 {
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut cost = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            if j + 1 < cols {
                cost += dist(&at(i, j), &at(i, j + 1));
            }
            if i + 1 < rows {
                cost += dist(&at(i, j), &at(i + 1, j));
            }
        }
    }
    cost
}
