//! CSV artifacts: trajectories, envelope comparisons, sweep tables, and
//! grid fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridFunction};
use crate::ode::Verification;
use crate::poincare::QuotientRow;
use crate::solver::{ConcavityPoint, Trajectory};
use crate::{Error, Result};

/// Serde adapter storing non-finite entries of a `Vec<f64>` as `null`, so
/// JSON records round-trip.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    t: f64,
    dt: f64,
    j: f64,
    i: f64,
    grad_modular: f64,
    source_modular: f64,
    delta0: Option<f64>,
    l2sq: f64,
    linf: f64,
    mean: f64,
    residual_cum: f64,
    concavity: Option<f64>,
}

/// One row per snapshot; the concavity column is filled when supplied.
pub fn write_trajectory(path: &Path, traj: &Trajectory, concavity: Option<&[ConcavityPoint]>) -> Result<()> {
    let rows = traj.snapshots.iter().enumerate().map(|(k, s)| TrajectoryRow {
        t: s.t,
        dt: traj.dts[k],
        j: s.j,
        i: s.i,
        grad_modular: s.grad_modular,
        source_modular: s.source_modular,
        delta0: s.delta0,
        l2sq: s.l2sq,
        linf: s.linf,
        mean: s.mean,
        residual_cum: traj.residual_cum[k],
        concavity: concavity.and_then(|c| c.get(k)).map(|c| c.diagnostic),
    });
    write_rows(path, rows)
}

/// Observed quantity against the bounds of one envelope at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub envelope: String,
    pub quantity: String,
    pub t: f64,
    pub observed: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

pub fn write_envelopes(path: &Path, rows: &[EnvelopeRow]) -> Result<()> {
    write_rows(path, rows)
}

#[derive(Debug, Serialize)]
struct OdeRow<'a> {
    c1: f64,
    c2: f64,
    alpha: f64,
    beta: f64,
    h0: f64,
    branch: &'a str,
    threshold: f64,
    max_violation: f64,
    scale: f64,
    rk4_agreement: f64,
    dt: f64,
    pass: bool,
}

pub fn write_ode_sweep(path: &Path, rows: &[Verification]) -> Result<()> {
    write_rows(
        path,
        rows.iter().map(|v| OdeRow {
            c1: v.params.c1,
            c2: v.params.c2,
            alpha: v.params.alpha,
            beta: v.params.beta,
            h0: v.params.h0,
            branch: v.branch.id(),
            threshold: v.threshold,
            max_violation: v.max_violation,
            scale: v.scale,
            rk4_agreement: v.rk4_agreement,
            dt: v.dt,
            pass: v.pass,
        }),
    )
}

pub fn write_quotients(path: &Path, rows: &[QuotientRow]) -> Result<()> {
    write_rows(path, rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldRow {
    i: usize,
    j: usize,
    value: f64,
}

pub fn write_field(path: &Path, f: &GridFunction) -> Result<()> {
    let g = f.grid;
    let rows = (0..g.ny()).flat_map(|j| (0..g.nx()).map(move |i| (i, j))).map(|(i, j)| FieldRow {
        i,
        j,
        value: f.values[g.index(i, j)],
    });
    write_rows(path, rows)
}

/// Reads `i,j,value` rows; every cell must appear exactly once.
pub fn read_field(path: &Path, grid: &Grid) -> Result<GridFunction> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for (line, row) in r.deserialize::<FieldRow>().enumerate() {
        let row = row.map_err(|e| Error::config(path.display().to_string(), line + 2, e.to_string()))?;
        if row.i >= grid.nx() || row.j >= grid.ny() {
            return Err(Error::config(
                path.display().to_string(),
                line + 2,
                format!("cell ({}, {}) outside the grid", row.i, row.j),
            ));
        }
        let k = grid.index(row.i, row.j);
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::config(path.display().to_string(), line + 2, "cell listed twice"));
        }
        values[k] = row.value;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::config(path.display().to_string(), 0, format!("cell {k} missing")));
    }
    GridFunction::new(*grid, values)
}
