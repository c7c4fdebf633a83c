//! File formats: two-column CSV tables, coefficient JSON, and the
//! distribution and strategy flag mini-languages.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use kprice_core::sim::TraceRow;
use kprice_core::{BidTable, Coefficients, Distribution, QuantileTable};
use serde::{Deserialize, Serialize};

/// Read a two-column numeric CSV whose header must be exactly `x_name,y_name`.
pub fn read_pairs(path: &Path, x_name: &str, y_name: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != x_name || &headers[1] != y_name {
        bail!(
            "{}: expected header `{x_name},{y_name}`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |j: usize| -> Result<f64> {
            record[j].trim().parse::<f64>().with_context(|| {
                format!(
                    "{}: row {}: bad number `{}`",
                    path.display(),
                    i + 2,
                    &record[j]
                )
            })
        };
        rows.push((parse(0)?, parse(1)?));
    }
    Ok(rows)
}

/// Write a two-column CSV using shortest round-trip decimal formatting.
pub fn write_pairs(
    path: &Path,
    x_name: &str,
    y_name: &str,
    rows: impl IntoIterator<Item = (f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record([x_name, y_name])?;
    for (x, y) in rows {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["round", "winner", "payment", "revenue"])?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.winner.to_string(),
            r.payment.to_string(),
            r.revenue.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", path.display()))
}

/// `uniform`, `poly:<alpha>`, `exp:<rate>` or `table:<path>` (CSV `a,q`).
pub fn parse_distribution(text: &str) -> Result<Distribution> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (text, None),
    };
    let number = |what: &str| -> Result<f64> {
        let a = arg.ok_or_else(|| anyhow!("`{name}` needs a {what}, e.g. `{name}:2`"))?;
        a.parse::<f64>()
            .with_context(|| format!("bad {what} `{a}` in `{text}`"))
    };
    Ok(match name {
        "uniform" if arg.is_none() => Distribution::uniform(),
        "poly" => Distribution::polynomial(number("exponent")?)?,
        "exp" => Distribution::exponential(number("rate")?)?,
        "table" => {
            let path = arg.ok_or_else(|| anyhow!("`table` needs a path, e.g. `table:q.csv`"))?;
            let rows = read_pairs(Path::new(path), "a", "q")?;
            Distribution::tabulated(QuantileTable::new(rows)?)
        }
        _ => bail!("unknown distribution `{text}` (expected uniform, poly:A, exp:R or table:PATH)"),
    })
}

pub fn read_bid_table(path: &Path) -> Result<BidTable<f64>> {
    Ok(BidTable::new(read_pairs(path, "v", "bid")?)?)
}

/// Coefficient vector as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub n: usize,
    pub alphas: Vec<f64>,
}

pub fn read_coefficients(path: &Path) -> Result<(usize, Coefficients)> {
    let file: CoefficientFile = read_json(path)?;
    Ok((file.n, Coefficients::new(file.alphas)?))
}
