//! Empirical order table over a directory of trace CSVs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use oef_core::rates::{fit_order, median, usable_pairs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub run: String,
    pub pairs: usize,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub median: Option<f64>,
}

/// The `error` column of a trace CSV, or `None` if the file has no such
/// column. Empty cells are skipped.
pub fn read_errors(path: &Path) -> Result<Option<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let Some(col) = r.headers()?.iter().position(|h| h == "error") else {
        return Ok(None);
    };
    let mut errors = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("");
        if !cell.is_empty() {
            errors.push(cell.parse::<f64>().with_context(|| format!("bad error value `{cell}`"))?);
        }
    }
    Ok(Some(errors))
}

/// Fits the local order of every trace in `dir`, in file-name order.
pub fn rates(dir: &Path) -> Result<RateTable> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for p in paths {
        let Some(errors) = read_errors(&p)? else {
            continue;
        };
        rows.push(RateRow {
            run: p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
            pairs: usable_pairs(&errors).len(),
            order: fit_order(&errors),
        });
    }
    if rows.is_empty() {
        bail!("no trace CSVs with an error column in {}", dir.display());
    }
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    Ok(RateTable {
        median: median(&orders),
        rows,
    })
}

pub fn render(t: &RateTable) -> String {
    let fmt = |o: Option<f64>| o.map(|q| format!("{q:.3}")).unwrap_or_else(|| "n/a".into());
    let mut s = String::from("run,pairs,order\n");
    for r in &t.rows {
        s.push_str(&format!("{},{},{}\n", r.run, r.pairs, fmt(r.order)));
    }
    s.push_str(&format!("median,,{}\n", fmt(t.median)));
    s
}
