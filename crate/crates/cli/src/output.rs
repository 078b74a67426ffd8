use std::io::Write;

use anyhow::Result;
use serde::Serialize;

/// Formats a float with 9 significant digits in the style of C's `%.9g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// One checkpoint of one run. Column order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub run_id: u64,
    pub seed: u64,
    pub graph_kind: String,
    pub learner: String,
    pub loss: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub noise: String,
    pub gamma: Option<String>,
    pub tuning: Option<String>,
    pub t: u64,
    pub cum_mistakes: u64,
    pub cum_queries: Option<u64>,
    pub error_rate: String,
    #[serde(rename = "cum_surrogate_at_W")]
    pub cum_surrogate_at_w: String,
    pub cum_explore_gamma: String,
}

pub const HEADER: [&str; 16] = [
    "run_id",
    "seed",
    "graph_kind",
    "learner",
    "loss",
    "K",
    "d",
    "noise",
    "gamma",
    "tuning",
    "t",
    "cum_mistakes",
    "cum_queries",
    "error_rate",
    "cum_surrogate_at_W",
    "cum_explore_gamma",
];

/// Writes the header followed by `rows`. The header is written even when
/// there are no rows.
pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
