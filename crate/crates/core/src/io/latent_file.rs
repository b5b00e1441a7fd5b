//! `LATD1` binary latent datasets.
//!
//! Layout:
//!
//! ```text
//! "LATD1\n"
//! {"version":1,"n":..,"dim":..,"dtype":"f32le","prior":..,"ids_present":..,"label_names":[..]}\n
//! n * dim little-endian f32, row-major
//! [ids]     n * (u32 LE byte length + UTF-8 bytes)      if ids_present
//! [labels]  n * len(label_names) i8: 1 pos, 0 neg, -1 missing, row-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{Label, LatentDataset, Prior};

pub const LATENT_MAGIC: &[u8] = b"LATD1\n";
const MAX_HEADER: usize = 1 << 20;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    n: usize,
    dim: usize,
    dtype: String,
    prior: Prior,
    ids_present: bool,
    label_names: Vec<String>,
}

/// Splits `bytes` after the magic into (header JSON, rest).
pub(crate) fn split_header<'a>(
    bytes: &'a [u8],
    magic: &'static [u8],
) -> Result<(&'a [u8], &'a [u8])> {
    let expected = std::str::from_utf8(&magic[..magic.len() - 1]).expect("ascii magic");
    let rest = bytes
        .strip_prefix(magic)
        .ok_or(Error::BadMagic { expected })?;
    let end = rest
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::HeaderMismatch("header line is not terminated".into()))?;
    Ok((&rest[..end], &rest[end + 1..]))
}

pub(crate) fn f32_payload(values: &[f64], out: &mut Vec<u8>) -> Result<()> {
    for (index, &v) in values.iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite { index });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(())
}

pub(crate) fn read_f32s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect()
}

fn take<'a>(rest: &mut &'a [u8], len: usize, total_expected: usize) -> Result<&'a [u8]> {
    if rest.len() < len {
        return Err(Error::TruncatedPayload {
            expected: total_expected,
            found: total_expected - (len - rest.len()),
        });
    }
    let (head, tail) = rest.split_at(len);
    *rest = tail;
    Ok(head)
}

/// Serializes a dataset. Values are stored as f32; output is deterministic.
pub fn encode_latents(ds: &LatentDataset) -> Result<Vec<u8>> {
    let label_names: Vec<String> = ds.label_names().map(str::to_owned).collect();
    let header = Header {
        version: 1,
        n: ds.len(),
        dim: ds.dim(),
        dtype: "f32le".into(),
        prior: ds.prior(),
        ids_present: ds.has_explicit_ids(),
        label_names,
    };
    let mut out = Vec::with_capacity(64 + ds.flat().len() * 4);
    out.extend_from_slice(LATENT_MAGIC);
    out.extend_from_slice(serde_json::to_string(&header)?.as_bytes());
    out.push(b'\n');
    f32_payload(ds.flat(), &mut out)?;
    for id in ds.ids().iter().filter(|_| ds.has_explicit_ids()) {
        let len = u32::try_from(id.len())
            .map_err(|_| Error::InvalidDataset(format!("id of {} bytes", id.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    let columns: Vec<&Vec<Label>> = ds.labels().values().collect();
    for i in 0..ds.len() {
        for col in &columns {
            out.push(col[i].to_i8() as u8);
        }
    }
    Ok(out)
}

pub fn decode_latents(bytes: &[u8]) -> Result<LatentDataset> {
    let (header, mut rest) = split_header(bytes, LATENT_MAGIC)?;
    let header: Header = serde_json::from_slice(header)
        .map_err(|e| Error::HeaderMismatch(format!("unreadable header: {e}")))?;
    if header.version != 1 {
        return Err(Error::HeaderMismatch(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.dtype != "f32le" {
        return Err(Error::HeaderMismatch(format!(
            "unsupported dtype `{}`",
            header.dtype
        )));
    }
    if header.n == 0 || header.dim == 0 {
        return Err(Error::HeaderMismatch("n and dim must be positive".into()));
    }
    let payload_len = header
        .n
        .checked_mul(header.dim)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::HeaderMismatch("payload size overflows".into()))?;
    let payload = take(&mut rest, payload_len, payload_len)?;
    let data = read_f32s(payload);

    let ids = if header.ids_present {
        let mut ids = Vec::with_capacity(header.n);
        for _ in 0..header.n {
            let len = take(&mut rest, 4, payload_len)?;
            let len = u32::from_le_bytes([len[0], len[1], len[2], len[3]]) as usize;
            let raw = take(&mut rest, len, payload_len)?;
            let id = std::str::from_utf8(raw)
                .map_err(|_| Error::HeaderMismatch("id is not UTF-8".into()))?;
            ids.push(id.to_owned());
        }
        Some(ids)
    } else {
        None
    };

    let width = header.label_names.len();
    let raw = take(&mut rest, header.n * width, payload_len)?;
    let mut labels: BTreeMap<String, Vec<Label>> = BTreeMap::new();
    for (k, name) in header.label_names.iter().enumerate() {
        let seq = (0..header.n)
            .map(|i| {
                Label::from_i8(raw[i * width + k] as i8).ok_or_else(|| {
                    Error::HeaderMismatch(format!(
                        "bad label byte {} for `{name}`",
                        raw[i * width + k]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if labels.insert(name.clone(), seq).is_some() {
            return Err(Error::HeaderMismatch(format!("duplicate label `{name}`")));
        }
    }
    if !rest.is_empty() {
        return Err(Error::HeaderMismatch(format!(
            "{} trailing bytes",
            rest.len()
        )));
    }
    LatentDataset::from_flat(header.dim, data, ids, labels, header.prior)
}

pub fn write_latents(ds: &LatentDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_latents(ds)?)?;
    Ok(())
}

pub fn read_latents(path: impl AsRef<Path>) -> Result<LatentDataset> {
    decode_latents(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentVector;

    fn sample() -> LatentDataset {
        let rows = vec![
            LatentVector::new(vec![0.5, -1.25, 3.0]).unwrap(),
            LatentVector::new(vec![0.0, 2.0, -0.125]).unwrap(),
        ];
        let labels = BTreeMap::from([
            ("smile".to_string(), vec![Label::Positive, Label::Missing]),
            ("male".to_string(), vec![Label::Negative, Label::Positive]),
        ]);
        LatentDataset::new(
            rows,
            Some(vec!["a.png".into(), "ü".into()]),
            labels,
            Prior::Uniform,
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = sample();
        let bytes = encode_latents(&ds).unwrap();
        assert!(bytes.starts_with(b"LATD1\n{\"version\":1,\"n\":2,\"dim\":3,\"dtype\":\"f32le\""));
        let back = decode_latents(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_latents(&back).unwrap(), bytes);
    }

    #[test]
    fn truncation_and_trailing() {
        let bytes = encode_latents(&sample()).unwrap();
        assert!(matches!(
            decode_latents(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedPayload { .. })
        ));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(
            decode_latents(&longer),
            Err(Error::HeaderMismatch(_))
        ));
    }

    #[test]
    fn bad_magic_and_header() {
        assert!(matches!(
            decode_latents(b"NOPE1\n{}\n"),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            decode_latents(b"LATD1\n{\"version\":2}\n"),
            Err(Error::HeaderMismatch(_))
        ));
        let h = br#"LATD1
{"version":1,"n":1,"dim":1,"dtype":"f64le","prior":"gaussian","ids_present":false,"label_names":[]}
"#;
        assert!(matches!(decode_latents(h), Err(Error::HeaderMismatch(_))));
    }

    #[test]
    fn payload_shorter_than_header_claims() {
        let mut bytes = Vec::from(LATENT_MAGIC);
        bytes.extend_from_slice(
            br#"{"version":1,"n":2,"dim":2,"dtype":"f32le","prior":"gaussian","ids_present":false,"label_names":[]}"#,
        );
        bytes.push(b'\n');
        bytes.extend_from_slice(&[0u8; 12]);
        assert!(matches!(
            decode_latents(&bytes),
            Err(Error::TruncatedPayload {
                expected: 16,
                found: 12
            })
        ));
        bytes.extend_from_slice(&[0u8; 4]);
        let ds = decode_latents(&bytes).unwrap();
        assert_eq!(ds.ids(), &["0".to_string(), "1".to_string()]);
        assert_eq!(encode_latents(&ds).unwrap(), bytes);
    }
}
