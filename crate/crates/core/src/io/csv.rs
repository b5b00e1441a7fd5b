//! CSV import/export of latent datasets.
//!
//! Columns: an optional `id`, latent components `z0, z1, ...` (in index
//! order), and any other column is a label holding `1`, `0`, `-1` or empty
//! (missing).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::latent::{Label, LatentDataset, Prior};

fn latent_index(name: &str) -> Option<usize> {
    name.strip_prefix('z')?.parse().ok()
}

pub fn read_latents_csv(reader: impl Read, prior: Prior) -> Result<LatentDataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut id_col = None;
    let mut latent_cols: Vec<(usize, usize)> = Vec::new();
    let mut label_cols: Vec<(usize, String)> = Vec::new();
    for (k, name) in headers.iter().enumerate() {
        let name = name.trim();
        if name == "id" {
            id_col = Some(k);
        } else if let Some(i) = latent_index(name) {
            latent_cols.push((i, k));
        } else {
            label_cols.push((k, name.to_owned()));
        }
    }
    latent_cols.sort_unstable();
    let dim = latent_cols.len();
    if dim == 0 || latent_cols.iter().enumerate().any(|(j, (i, _))| *i != j) {
        return Err(Error::HeaderMismatch(
            "latent columns must be z0..z{d-1} with no gaps".into(),
        ));
    }

    let mut data = Vec::new();
    let mut ids = Vec::new();
    let mut labels: Vec<Vec<Label>> = vec![Vec::new(); label_cols.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        for &(_, k) in &latent_cols {
            let raw = record.get(k).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                Error::InvalidDataset(format!("row {}: bad latent value `{raw}`", line + 1))
            })?;
            data.push(v);
        }
        if let Some(k) = id_col {
            ids.push(record.get(k).unwrap_or("").to_owned());
        }
        for (seq, (k, name)) in labels.iter_mut().zip(&label_cols) {
            let raw = record.get(*k).unwrap_or("").trim();
            let label = match raw {
                "" => Label::Missing,
                other => other
                    .parse::<i8>()
                    .ok()
                    .and_then(Label::from_i8)
                    .ok_or_else(|| {
                        Error::InvalidDataset(format!(
                            "row {}: bad label `{other}` for `{name}`",
                            line + 1
                        ))
                    })?,
            };
            seq.push(label);
        }
    }
    let labels: BTreeMap<String, Vec<Label>> = label_cols
        .into_iter()
        .map(|(_, name)| name)
        .zip(labels)
        .collect();
    LatentDataset::from_flat(dim, data, id_col.map(|_| ids), labels, prior)
}

pub fn write_latents_csv(ds: &LatentDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..ds.dim()).map(|i| format!("z{i}")));
    header.extend(ds.label_names().map(str::to_owned));
    w.write_record(&header)?;
    for (i, row) in ds.rows().enumerate() {
        let mut rec = vec![ds.ids()[i].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.extend(ds.labels().values().map(|seq| match seq[i] {
            Label::Missing => String::new(),
            l => l.to_i8().to_string(),
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
