//! Reader for the `baseMVA` / `bus` / `gen` / `branch` subset of MATPOWER
//! version 2 case files.
//!
//! Numbers keep their printed precision, which later sets the default
//! noise level of each parameter. Other `mpc.*` fields are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use gridstab_core::case::{Branch, Bus, BusKind, Generator, Measured, PowerSystemCase};

use crate::error::{Error, Result};

/// Something the reader dropped or adjusted while building the case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct ParsedCase {
    pub case: PowerSystemCase,
    pub warnings: Vec<Warning>,
}

struct Row<'a> {
    line: usize,
    tokens: Vec<&'a str>,
}

struct Matrix<'a> {
    rows: Vec<Row<'a>>,
}

const BUS_COLUMNS: usize = 10;
const GEN_COLUMNS: usize = 8;
const BRANCH_COLUMNS: usize = 11;

pub fn read_matpower(path: &Path) -> Result<ParsedCase> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matpower(&text, path)
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses case text; `origin` is only used in error messages.
pub fn parse_matpower(text: &str, origin: &Path) -> Result<ParsedCase> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut base_mva = None;
    let mut matrices: BTreeMap<String, Matrix> = BTreeMap::new();
    let mut open: Option<(String, Matrix, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if open.is_none() {
            let Some(rest) = line.strip_prefix("mpc.") else {
                continue;
            };
            let Some((name, value)) = rest.split_once('=') else {
                continue;
            };
            let name = name.trim().to_string();
            let value = value.trim();
            if let Some(body) = value.strip_prefix('[') {
                open = Some((name, Matrix { rows: Vec::new() }, line_no));
                line = body;
            } else {
                if name == "baseMVA" {
                    let v = value.trim_end_matches(';').trim();
                    let mva: f64 = v
                        .parse()
                        .map_err(|_| err(line_no, format!("baseMVA `{v}` is not a number")))?;
                    base_mva = Some(mva);
                }
                continue;
            }
        }
        let (closing, body) = match line.find(']') {
            Some(i) => (true, &line[..i]),
            None => (false, line),
        };
        if let Some((_, m, _)) = open.as_mut() {
            for chunk in body.split(';') {
                let tokens: Vec<&str> = chunk
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .collect();
                if !tokens.is_empty() {
                    m.rows.push(Row {
                        line: line_no,
                        tokens,
                    });
                }
            }
        }
        if closing {
            let (name, m, _) = open.take().expect("matrix is open");
            matrices.insert(name, m);
        }
    }
    if let Some((name, _, start)) = open {
        return Err(err(start, format!("matrix mpc.{name} is never closed")));
    }
    let base_mva = base_mva.ok_or_else(|| err(0, "missing mpc.baseMVA".into()))?;
    let mut warnings = Vec::new();

    let get = |name: &str| {
        matrices
            .get(name)
            .ok_or_else(|| err(0, format!("missing mpc.{name}")))
    };
    let bus_m = get("bus")?;
    let gen_m = get("gen")?;
    let branch_m = get("branch")?;

    let num = |row: &Row, col: usize, what: &str| -> Result<f64> {
        row.tokens[col].parse::<f64>().map_err(|_| {
            err(
                row.line,
                format!(
                    "column {} ({what}) `{}` is not a number",
                    col + 1,
                    row.tokens[col]
                ),
            )
        })
    };
    let measured = |row: &Row, col: usize, what: &str| -> Result<Measured> {
        Measured::parse(row.tokens[col]).ok_or_else(|| {
            err(
                row.line,
                format!(
                    "column {} ({what}) `{}` is not a number",
                    col + 1,
                    row.tokens[col]
                ),
            )
        })
    };
    let width = |row: &Row, need: usize, what: &str| -> Result<()> {
        if row.tokens.len() < need {
            return Err(err(
                row.line,
                format!(
                    "{what} row has {} columns, expected at least {need}",
                    row.tokens.len()
                ),
            ));
        }
        Ok(())
    };
    let id = |row: &Row, col: usize, what: &str| -> Result<u32> {
        let v = num(row, col, what)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(err(
                row.line,
                format!(
                    "column {} ({what}) `{}` is not a bus number",
                    col + 1,
                    row.tokens[col]
                ),
            ));
        }
        Ok(v as u32)
    };

    let mut buses = Vec::with_capacity(bus_m.rows.len());
    for row in &bus_m.rows {
        width(row, BUS_COLUMNS, "bus")?;
        let kind = match num(row, 1, "type")? as i64 {
            1 => BusKind::PQ,
            2 => BusKind::PV,
            3 => BusKind::Slack,
            4 => {
                warnings.push(Warning {
                    line: row.line,
                    message: format!("isolated bus {} dropped", row.tokens[0]),
                });
                continue;
            }
            other => return Err(err(row.line, format!("unknown bus type {other}"))),
        };
        buses.push(Bus {
            id: id(row, 0, "bus_i")?,
            kind,
            active_demand: measured(row, 2, "Pd")?,
            reactive_demand: measured(row, 3, "Qd")?,
            base_voltage: num(row, 9, "baseKV")?,
            voltage_setpoint: None,
            shunt_conductance: num(row, 4, "Gs")? / base_mva,
            shunt_susceptance: num(row, 5, "Bs")? / base_mva,
        });
    }

    let mut generators = Vec::with_capacity(gen_m.rows.len());
    let mut setpoints: BTreeMap<u32, f64> = BTreeMap::new();
    for row in &gen_m.rows {
        width(row, GEN_COLUMNS, "gen")?;
        let bus = id(row, 0, "bus")?;
        if num(row, 7, "status")? <= 0.0 {
            warnings.push(Warning {
                line: row.line,
                message: format!("out-of-service generator at bus {bus} dropped"),
            });
            continue;
        }
        let vg = num(row, 5, "Vg")?;
        if let Some(prev) = setpoints.insert(bus, vg) {
            if prev != vg {
                warnings.push(Warning {
                    line: row.line,
                    message: format!("generators at bus {bus} disagree on Vg; using {prev}"),
                });
                setpoints.insert(bus, prev);
            }
        }
        generators.push(Generator {
            bus,
            active_generation: measured(row, 1, "Pg")?,
            reactive_generation: measured(row, 2, "Qg")?,
            inertia: None,
            damping: None,
            transient_reactance: None,
        });
    }
    for bus in &mut buses {
        if bus.kind != BusKind::PQ {
            bus.voltage_setpoint = setpoints.get(&bus.id).copied();
            if bus.voltage_setpoint.is_none() {
                return Err(err(
                    0,
                    format!("bus {} is PV/slack but has no in-service generator", bus.id),
                ));
            }
        }
    }

    let mut branches = Vec::with_capacity(branch_m.rows.len());
    for row in &branch_m.rows {
        width(row, BRANCH_COLUMNS, "branch")?;
        let from_bus = id(row, 0, "fbus")?;
        let to_bus = id(row, 1, "tbus")?;
        if num(row, 10, "status")? <= 0.0 {
            warnings.push(Warning {
                line: row.line,
                message: format!("out-of-service branch {from_bus}-{to_bus} dropped"),
            });
            continue;
        }
        let ratio = num(row, 8, "ratio")?;
        branches.push(Branch {
            from_bus,
            to_bus,
            resistance: measured(row, 2, "r")?,
            reactance: measured(row, 3, "x")?,
            charging: num(row, 4, "b")?,
            tap_ratio: if ratio == 0.0 { 1.0 } else { ratio },
            phase_shift: num(row, 9, "angle")?.to_radians(),
        });
    }

    let case = PowerSystemCase {
        base_mva,
        nominal_frequency: 60.0,
        buses,
        branches,
        generators,
    };
    case.validate()?;
    Ok(ParsedCase { case, warnings })
}
