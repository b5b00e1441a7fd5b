//! Vector-arithmetic analogies and J-diagram lattices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use crate::codec::reconstruct;
use crate::codec::Codec;
use crate::error::{Error, Result};
use crate::grid::{CellRole, GridCell, GridManifest};
use crate::latent::{check_dims, slerp, LatentVector};

/// `c + b − a`, the analogy "a is to b as c is to ?".
///
/// Each component adds the smaller of `b_i`, `c_i` (by total order) to `−a_i`
/// first, so swapping `b` and `c` yields a bitwise-identical result.
pub fn apply_analogy(a: &LatentVector, b: &LatentVector, c: &LatentVector) -> Result<LatentVector> {
    check_dims(a, b)?;
    check_dims(a, c)?;
    LatentVector::new(
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .zip(c.as_slice())
            .map(|((&a, &b), &c)| {
                let (lo, hi) = if b.total_cmp(&c).is_le() {
                    (b, c)
                } else {
                    (c, b)
                };
                (lo - a) + hi
            })
            .collect(),
    )
}

/// Which latents sit at the three input corners when a codec is attached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerSource {
    /// The raw encodings as given.
    #[default]
    Raw,
    /// `encode(decode(x))` of each input.
    Reconstructed,
}

#[derive(Default)]
pub struct JDiagramOptions<'a> {
    /// Dataset ids of a, b, c, recorded on the corner cells.
    pub ids: [Option<String>; 3],
    /// When set, reconstructions of the inputs are attached as extra cells.
    pub codec: Option<&'a dyn Codec>,
    pub corners: CornerSource,
}

/// J-diagram with raw corners and no codec.
pub fn jdiagram(
    a: &LatentVector,
    b: &LatentVector,
    c: &LatentVector,
    rows: usize,
    cols: usize,
) -> Result<GridManifest> {
    jdiagram_with(a, b, c, rows, cols, &JDiagramOptions::default())
}

/// Lattice with a, b, c at the top-left, top-right and bottom-left corners
/// and the analogy result at the bottom-right. Interior cell (i, j) is
/// `slerp(slerp(a, b, t_j), slerp(c, d, t_j), s_i)` (rows-first nesting).
pub fn jdiagram_with(
    a: &LatentVector,
    b: &LatentVector,
    c: &LatentVector,
    rows: usize,
    cols: usize,
    options: &JDiagramOptions<'_>,
) -> Result<GridManifest> {
    check_dims(a, b)?;
    check_dims(a, c)?;
    if rows < 2 || cols < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "rows/cols",
            value: rows.min(cols) as f64,
        });
    }

    let mut extras = Vec::new();
    let inputs = [a, b, c];
    let corner_coords = [(0, 0), (0, cols - 1), (rows - 1, 0)];
    let mut corners: Vec<LatentVector> = inputs.iter().map(|v| (*v).clone()).collect();
    if let Some(codec) = options.codec {
        for (k, input) in inputs.iter().enumerate() {
            let (_, back) = reconstruct(input, codec)?;
            extras.push(GridCell {
                row: corner_coords[k].0,
                col: corner_coords[k].1,
                role: CellRole::Reconstruction,
                source_id: options.ids[k].clone(),
                latent: back.clone(),
            });
            if options.corners == CornerSource::Reconstructed {
                corners[k] = back;
            }
        }
    } else if options.corners == CornerSource::Reconstructed {
        return Err(Error::CodecUnavailable(
            "reconstructed corners need a codec".into(),
        ));
    }
    let [a, b, c] = [&corners[0], &corners[1], &corners[2]];
    let d = apply_analogy(a, b, c)?;

    let last_r = (rows - 1) as f64;
    let last_c = (cols - 1) as f64;
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (role, id, latent) = match (i, j) {
                (0, 0) => (CellRole::Input, options.ids[0].clone(), a.clone()),
                (0, j) if j == cols - 1 => (CellRole::Input, options.ids[1].clone(), b.clone()),
                (i, 0) if i == rows - 1 => (CellRole::Input, options.ids[2].clone(), c.clone()),
                (i, j) if i == rows - 1 && j == cols - 1 => (CellRole::Analogy, None, d.clone()),
                (i, j) => {
                    let t = j as f64 / last_c;
                    let s = i as f64 / last_r;
                    let top = slerp(a, b, t)?;
                    let bottom = slerp(c, &d, t)?;
                    (CellRole::Interpolated, None, slerp(&top, &bottom, s)?)
                }
            };
            entries.push((role, id, latent));
        }
    }

    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), Value::from("jdiagram"));
    meta.insert("fill_order".into(), Value::from("rows-first"));
    meta.insert("analogy".into(), Value::from("b + c - a"));
    meta.insert("interpolation".into(), Value::from("spherical"));
    meta.insert(
        "corners".into(),
        serde_json::to_value(options.corners).expect("enum serializes"),
    );
    meta.insert("input_ids".into(), json!(options.ids));
    if let Some(codec) = options.codec {
        meta.insert("codec".into(), Value::from(codec.name()));
    }
    let mut manifest = GridManifest::from_row_major(rows, cols, entries, meta)?;
    manifest.extras = extras;
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{interpolate_path, InterpolationMode};
    use crate::toy::ToyCodec;

    fn v(xs: &[f64]) -> LatentVector {
        LatentVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn analogy_arithmetic() {
        assert_eq!(
            apply_analogy(&v(&[0., 0.]), &v(&[1., 0.]), &v(&[0., 1.])).unwrap(),
            v(&[1., 1.])
        );
        let (a, c) = (v(&[0.3, -7.1, 1e10]), v(&[2.2, 0.1, -3.0]));
        assert!(apply_analogy(&a, &a, &c).unwrap().bit_eq(&c));
        assert!(matches!(
            apply_analogy(&a, &v(&[1.0]), &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn jdiagram_two_by_two_is_corners() {
        let (a, b, c) = (v(&[1., 2.]), v(&[0.5, -1.]), v(&[3., 0.25]));
        let g = jdiagram(&a, &b, &c, 2, 2).unwrap();
        assert!(g.latent(0, 0).bit_eq(&a));
        assert!(g.latent(0, 1).bit_eq(&b));
        assert!(g.latent(1, 0).bit_eq(&c));
        assert!(g.latent(1, 1).bit_eq(&apply_analogy(&a, &b, &c).unwrap()));
        assert_eq!(g.cell(1, 1).role, CellRole::Analogy);
        assert_eq!(g.cell(0, 1).role, CellRole::Input);
    }

    #[test]
    fn jdiagram_orthonormal_edge() {
        let g = jdiagram(
            &v(&[1., 0., 0.]),
            &v(&[0., 1., 0.]),
            &v(&[0., 0., 1.]),
            3,
            3,
        )
        .unwrap();
        let m = g.latent(0, 1).as_slice();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m[0] - h).abs() < 1e-12 && (m[1] - h).abs() < 1e-12 && m[2].abs() < 1e-12);
        assert_eq!(g.cell(1, 1).role, CellRole::Interpolated);
    }

    #[test]
    fn edges_match_paths() {
        let (a, b, c) = (
            v(&[1., 0.2, -0.3]),
            v(&[0.1, 1.1, 0.4]),
            v(&[-0.2, 0.3, 0.9]),
        );
        let g = jdiagram(&a, &b, &c, 4, 5).unwrap();
        let top = interpolate_path(&a, &b, 5, InterpolationMode::Spherical).unwrap();
        let left = interpolate_path(&a, &c, 4, InterpolationMode::Spherical).unwrap();
        for (j, p) in top.iter().enumerate() {
            assert!(g.latent(0, j).bit_eq(p));
        }
        for (i, p) in left.iter().enumerate() {
            assert!(g.latent(i, 0).bit_eq(p));
        }
    }

    #[test]
    fn degenerate_inputs_collapse() {
        let a = v(&[0.7, -1.3, 2.0]);
        let g = jdiagram(&a, &a, &a, 4, 4).unwrap();
        assert!(g.cells.iter().all(|cell| cell.latent.bit_eq(&a)));
    }

    #[test]
    fn rejects_small_grids() {
        let a = v(&[1.0, 0.0]);
        assert!(jdiagram(&a, &a, &a, 1, 3).is_err());
    }

    #[test]
    fn codec_adds_reconstructions() {
        let codec = ToyCodec::new(2, 3, 4, 4).unwrap();
        let (a, b, c) = (
            v(&[1., 0.2, -0.3]),
            v(&[0.1, 1.1, 0.4]),
            v(&[-0.2, 0.3, 0.9]),
        );
        let opts = JDiagramOptions {
            ids: [Some("a".into()), Some("b".into()), Some("c".into())],
            codec: Some(&codec),
            corners: CornerSource::Reconstructed,
        };
        let g = jdiagram_with(&a, &b, &c, 3, 3, &opts).unwrap();
        assert_eq!(g.extras.len(), 3);
        assert!(g.extras.iter().all(|e| e.role == CellRole::Reconstruction));
        assert!(g.latent(0, 0).bit_eq(&g.extras[0].latent));
        for (x, y) in g.latent(0, 0).as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
        assert_eq!(g.cell(0, 2).source_id.as_deref(), Some("b"));
        let no_codec = JDiagramOptions {
            corners: CornerSource::Reconstructed,
            ..Default::default()
        };
        assert!(matches!(
            jdiagram_with(&a, &b, &c, 3, 3, &no_codec),
            Err(Error::CodecUnavailable(_))
        ));
    }
}
