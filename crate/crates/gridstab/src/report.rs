//! Monte Carlo evaluation of one plan and the files it produces.

use std::path::{Path, PathBuf};

use gridstab_core::analysis::{
    critical_lambda, histogram, percent_grid, quantile_curve, quantile_sorted, ComparisonReport,
    CriticalLambda, HistogramBin, LyapunovDistribution, QuantileCurve, ReportEntry, TestChannels,
    CRITICAL_PERCENTS, MIN_CRITICAL_SAMPLES,
};
use gridstab_core::case::PowerSystemCase;
use gridstab_core::exec::DrawMap;
use gridstab_core::optimize::DampingPlan;
use gridstab_core::powerflow::PowerFlowOptions;
use gridstab_core::rng::SeededSampler;
use gridstab_core::uncertainty::UncertaintySpec;

use crate::error::Result;
use crate::formats::{
    distribution_csv, histogram_csv, num, quantiles_csv, table_csv, to_json, write_text,
    CriticalReport,
};

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub distribution: LyapunovDistribution,
    pub curve: QuantileCurve,
    /// Empty when there are fewer converged draws than the statistic needs.
    pub critical: Vec<CriticalLambda>,
    pub histogram: Vec<HistogramBin>,
}

impl Evaluation {
    pub fn median(&self) -> f64 {
        quantile_sorted(&self.distribution.sorted(), 50.0)
    }

    pub fn non_convergent_fraction(&self) -> f64 {
        self.distribution.non_convergent as f64 / self.distribution.requested as f64
    }
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_plan<E: DrawMap>(
    case: &PowerSystemCase,
    plan: &DampingPlan,
    spec: &UncertaintySpec,
    channels: TestChannels,
    draws: usize,
    sampler: &SeededSampler,
    grid: &[f64],
    bin_width: f64,
    exec: &E,
) -> Result<Evaluation> {
    let distribution = gridstab_core::analysis::test_plan(
        case,
        plan,
        spec,
        channels,
        draws,
        sampler,
        &PowerFlowOptions::default(),
        exec,
    )?;
    let curve = quantile_curve(&distribution, grid)?;
    let critical = if distribution.samples.len() >= MIN_CRITICAL_SAMPLES {
        critical_lambda(&distribution, &CRITICAL_PERCENTS)?
    } else {
        Vec::new()
    };
    let histogram = histogram(&distribution, bin_width)?;
    Ok(Evaluation {
        distribution,
        curve,
        critical,
        histogram,
    })
}

/// Writes `distribution.csv`, `quantiles.csv`, `critical.json` and
/// `histogram.csv` into `dir`; returns the written paths.
pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<Vec<PathBuf>> {
    let d = &eval.distribution;
    let files = [
        ("distribution.csv", distribution_csv(d)),
        ("quantiles.csv", quantiles_csv(&eval.curve)),
        (
            "critical.json",
            to_json(&CriticalReport {
                requested: d.requested,
                converged: d.samples.len(),
                non_convergent: d.non_convergent,
                critical: eval.critical.clone(),
            }),
        ),
        ("histogram.csv", histogram_csv(&eval.histogram)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

pub fn default_grid() -> Vec<f64> {
    percent_grid()
}

/// One evaluated cell of an experiment.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method: String,
    /// `None` for plans that do not depend on a noise level.
    pub sigma_opt: Option<f64>,
    pub sigma_test: f64,
    pub channels: TestChannels,
    pub seed: u64,
    pub evaluation: Evaluation,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        let opt = self.sigma_opt.map_or_else(|| "none".to_string(), num);
        format!(
            "{}_opt-{}_test-{}_{}",
            self.method,
            opt,
            num(self.sigma_test),
            self.channels.name()
        )
    }

    pub fn entry(&self) -> ReportEntry {
        let d = &self.evaluation.distribution;
        ReportEntry {
            method: self.method.clone(),
            sigma_opt: self.sigma_opt.unwrap_or(0.0),
            sigma_test: self.sigma_test,
            channels: self.channels,
            seed: self.seed,
            draws: d.requested,
            non_convergent: d.non_convergent,
            curve: self.evaluation.curve.clone(),
            critical: self.evaluation.critical.clone(),
        }
    }
}

/// One row per cell, with the worst-reasonable-case columns.
pub fn summary_csv(cells: &[Cell]) -> String {
    let mut header = vec![
        "method",
        "sigma_opt",
        "sigma_test",
        "channels",
        "draws",
        "converged",
        "non_convergent",
        "median",
    ];
    let names: Vec<String> = CRITICAL_PERCENTS
        .iter()
        .map(|p| format!("lambda_c_{p}"))
        .collect();
    header.extend(names.iter().map(String::as_str));
    let rows = cells
        .iter()
        .map(|c| {
            let d = &c.evaluation.distribution;
            let mut row = vec![
                c.method.clone(),
                c.sigma_opt.map_or_else(String::new, num),
                num(c.sigma_test),
                c.channels.name().to_string(),
                d.requested.to_string(),
                d.samples.len().to_string(),
                d.non_convergent.to_string(),
                num(c.evaluation.median()),
            ];
            for p in CRITICAL_PERCENTS {
                row.push(
                    c.evaluation
                        .critical
                        .iter()
                        .find(|x| x.percent == p)
                        .map_or_else(String::new, |x| num(x.lambda_c)),
                );
            }
            row
        })
        .collect();
    table_csv(&header, rows)
}

/// Long-format quantile table over all cells.
pub fn quantile_matrix_csv(cells: &[Cell]) -> String {
    let mut rows = Vec::new();
    for c in cells {
        for (p, v) in c
            .evaluation
            .curve
            .grid
            .iter()
            .zip(&c.evaluation.curve.values)
        {
            rows.push(vec![
                c.method.clone(),
                c.sigma_opt.map_or_else(String::new, num),
                num(c.sigma_test),
                c.channels.name().to_string(),
                num(*p),
                num(*v),
            ]);
        }
    }
    table_csv(
        &[
            "method",
            "sigma_opt",
            "sigma_test",
            "channels",
            "percent",
            "lambda_l",
        ],
        rows,
    )
}

pub fn comparison(cells: &[Cell]) -> Result<ComparisonReport> {
    Ok(gridstab_core::analysis::compare_report(
        cells.iter().map(Cell::entry).collect(),
    )?)
}

/// Plain-text table of `λ_c` per cell, one line per cell.
pub fn critical_table_text(cells: &[Cell]) -> String {
    let mut out = String::from("method      sigma_opt  sigma_test  channels   ");
    for p in CRITICAL_PERCENTS {
        out.push_str(&format!("{:>9}", format!("{p}%")));
    }
    out.push('\n');
    for c in cells {
        let opt = c.sigma_opt.map_or_else(|| "-".to_string(), num);
        out.push_str(&format!(
            "{:<11} {:<10} {:<11} {:<10} ",
            c.method,
            opt,
            num(c.sigma_test),
            c.channels.name()
        ));
        for p in CRITICAL_PERCENTS {
            match c.evaluation.critical.iter().find(|x| x.percent == p) {
                Some(x) => out.push_str(&format!("{:>9.4}", x.lambda_c)),
                None => out.push_str(&format!("{:>9}", "n/a")),
            }
        }
        out.push('\n');
    }
    out
}
