//! Case, dynamics, plan and result files.

use std::fs;
use std::io::Write;
use std::path::Path;

use gridstab_core::analysis::{CriticalLambda, HistogramBin, LyapunovDistribution, QuantileCurve};
use gridstab_core::case::{merge_dynamics, DynamicsRow, PowerSystemCase};
use gridstab_core::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matpower::{read_matpower, Warning};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

/// Reads a MATPOWER `.m` file or a canonical JSON case, chosen by extension.
pub fn read_case(path: &Path) -> Result<(PowerSystemCase, Vec<Warning>)> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let case: PowerSystemCase = read_json(path)?;
        case.validate()?;
        Ok((case, Vec::new()))
    } else {
        let parsed = read_matpower(path)?;
        Ok((parsed.case, parsed.warnings))
    }
}

#[derive(Debug, Deserialize)]
struct DynamicsRecord {
    gen_index: usize,
    #[serde(rename = "H")]
    inertia: f64,
    #[serde(rename = "D")]
    damping: f64,
    xd_prime: f64,
}

/// Dynamics sidecar: CSV with header `gen_index,H,D,xd_prime` (lines
/// starting with `#` are ignored) or a JSON array of rows.
pub fn read_dynamics(path: &Path) -> Result<Vec<DynamicsRow>> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        return read_json(path);
    }
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let expected = ["gen_index", "H", "D", "xd_prime"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    reader
        .deserialize::<DynamicsRecord>()
        .map(|r| {
            let r = r.map_err(csv_err)?;
            Ok(DynamicsRow {
                generator: r.gen_index,
                inertia: r.inertia,
                damping: r.damping,
                transient_reactance: r.xd_prime,
            })
        })
        .collect()
}

/// A case with dynamics attached from the sidecar, if one is given.
pub fn load_case(case: &Path, dynamics: Option<&Path>) -> Result<(PowerSystemCase, Vec<Warning>)> {
    let (mut c, warnings) = read_case(case)?;
    if let Some(d) = dynamics {
        let rows = read_dynamics(d)?;
        c = merge_dynamics(&c, &rows)?;
    }
    Ok((c, warnings))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn distribution_csv(dist: &LyapunovDistribution) -> String {
    csv_text(&["lambda_l"], dist.samples.iter().map(|&x| vec![num(x)]))
}

pub fn quantiles_csv(curve: &QuantileCurve) -> String {
    csv_text(
        &["percent", "lambda_l"],
        curve
            .grid
            .iter()
            .zip(&curve.values)
            .map(|(&p, &v)| vec![num(p), num(v)]),
    )
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    csv_text(
        &["center", "count"],
        bins.iter()
            .map(|b| vec![num(b.center), b.count.to_string()]),
    )
}

pub fn spectrum_csv(spectrum: &[Complex64]) -> String {
    csv_text(
        &["re", "im"],
        spectrum.iter().map(|z| vec![num(z.re), num(z.im)]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub requested: usize,
    pub converged: usize,
    pub non_convergent: usize,
    pub critical: Vec<CriticalLambda>,
}

pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> String {
    csv_text(header, rows)
}
