//! Per-run replay files: the realised sequence a learner saw, one row per
//! round, so that the comparator can be fitted on exactly that sequence.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use graphtron_core::{Example, RoundRecord};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: u64,
    pub n_actions: usize,
    pub d: usize,
    /// True label as an action index.
    pub label: usize,
    pub prediction: usize,
    pub mistake: u8,
    #[serde(rename = "surrogate_at_W")]
    pub surrogate_at_w: f64,
    /// Non-zero features as space-separated `index:value` pairs.
    pub x: String,
}

pub fn encode_features(x: &Array1<f64>) -> String {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| {
            if (1e-5..1e16).contains(&v.abs()) {
                format!("{i}:{v}")
            } else {
                format!("{i}:{v:e}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn decode_features(text: &str, d: usize) -> Result<Array1<f64>> {
    let mut x = Array1::zeros(d);
    for pair in text.split_whitespace() {
        let (i, v) = pair.split_once(':').with_context(|| format!("bad feature `{pair}`"))?;
        let i: usize = i.parse().with_context(|| format!("bad feature index `{i}`"))?;
        if i >= d {
            bail!("feature index {i} out of range for d = {d}");
        }
        x[i] = v.parse().with_context(|| format!("bad feature value `{v}`"))?;
    }
    Ok(x)
}

pub fn write_records<W: Write>(
    out: W,
    n_actions: usize,
    records: &[RoundRecord],
    examples: &[Example],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (r, e) in records.iter().zip(examples) {
        w.serialize(RecordRow {
            t: r.t,
            n_actions,
            d: e.x.len(),
            label: r.y_true,
            prediction: r.y_prime,
            mistake: u8::from(r.mistake),
            surrogate_at_w: r.surrogate_at_w,
            x: encode_features(&e.x),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// A replayed sequence. Example labels are action indices.
#[derive(Debug, Clone)]
pub struct Replayed {
    pub n_actions: usize,
    pub examples: Vec<Example>,
    pub mistakes: Vec<bool>,
}

pub fn read_records<R: Read>(input: R) -> Result<Replayed> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Replayed {
        n_actions: 0,
        examples: Vec::new(),
        mistakes: Vec::new(),
    };
    let mut dim = None;
    for (i, row) in reader.deserialize::<RecordRow>().enumerate() {
        let row = row.with_context(|| format!("record {}", i + 1))?;
        if row.t != i as u64 + 1 {
            bail!("record {} has t = {}; rounds must be consecutive from 1", i + 1, row.t);
        }
        if *dim.get_or_insert(row.d) != row.d || (i > 0 && row.n_actions != out.n_actions) {
            bail!("record {} changes the dimension or the action count", i + 1);
        }
        if row.label >= row.n_actions {
            bail!("record {} has label {} but only {} actions", i + 1, row.label, row.n_actions);
        }
        out.n_actions = row.n_actions;
        let x = decode_features(&row.x, row.d)?;
        out.examples.push(Example {
            x,
            y: row.label,
            source_class: row.label,
        });
        out.mistakes.push(row.mistake != 0);
    }
    Ok(out)
}
