//! Sweep files are TOML: an optional `[defaults]` table followed by one
//! `[[run]]` table per configuration. Keys are the `run` flag names with
//! dashes replaced by underscores; entries override the defaults.
//!
//! ```toml
//! [defaults]
//! rounds = 100000
//! reps = 10
//! noise = 0.1
//!
//! [[run]]
//! graph = "bandit"
//! loss = "smooth-hinge"
//!
//! [[run]]
//! graph = "bandit"
//! learner = "banditron"
//! ```

use anyhow::{bail, Context, Result};
use toml::{Table, Value};

use crate::config::RunConfig;

pub fn parse_sweep(text: &str) -> Result<Vec<RunConfig>> {
    let mut doc: Table = text.parse().context("sweep file is not valid TOML")?;
    let defaults = match doc.remove("defaults") {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => bail!("`defaults` must be a table"),
    };
    let runs = match doc.remove("run") {
        Some(Value::Array(runs)) => runs,
        Some(_) => bail!("`run` must be an array of tables ([[run]])"),
        None => bail!("sweep file has no [[run]] entries"),
    };
    if let Some(key) = doc.keys().next() {
        bail!("unexpected top-level key `{key}`; use [defaults] and [[run]]");
    }
    runs.into_iter()
        .enumerate()
        .map(|(i, entry)| {
            let Value::Table(entry) = entry else {
                bail!("run entry {} is not a table", i + 1);
            };
            let mut merged = defaults.clone();
            merged.extend(entry);
            Value::Table(merged)
                .try_into::<RunConfig>()
                .with_context(|| format!("run entry {}", i + 1))
        })
        .collect()
}
