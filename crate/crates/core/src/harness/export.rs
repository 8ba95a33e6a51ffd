use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analysis::{RhoField, ScanMatrix};
use crate::error::{Error, Result};
use crate::oracle::DescentCertificate;
use crate::problems::SmoothedState;
use crate::solvers::Trajectory;

/// File format of trajectory exports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// The exported columns of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub iters: Vec<u64>,
    pub states: Vec<SmoothedState>,
    pub residuals: Vec<(f64, f64)>,
}

impl From<&Trajectory> for TrajectoryTable {
    fn from(t: &Trajectory) -> Self {
        Self {
            iters: t.iters.clone(),
            states: t.states.clone(),
            residuals: t.residuals.clone(),
        }
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(s: &SmoothedState) -> Vec<String> {
    let mut h = vec!["iter".to_string()];
    for (name, len) in [
        ("x", s.x.len()),
        ("y", s.y.len()),
        ("z", s.z.len()),
        ("v", s.v.len()),
    ] {
        h.extend((0..len).map(|i| format!("{name}{i}")));
    }
    h.push("gs_x".into());
    h.push("gs_y".into());
    h
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let f = File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufWriter::new(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::File {
            path: path.to_path_buf(),
            source,
        },
        other => Error::config(path.display().to_string(), format!("{other:?}")),
    }
}

fn write_rows<I>(path: &Path, head: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(head).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `traj` as CSV (`iter, x0.., y0.., z0.., v0.., gs_x, gs_y`) or as a
/// JSON array of row objects with the same keys.
pub fn export_trajectory(traj: &Trajectory, path: &Path, format: Format) -> Result<()> {
    let table = TrajectoryTable::from(traj);
    let Some(first) = table.states.first() else {
        return Err(Error::InvalidParam(
            "cannot export an empty trajectory".into(),
        ));
    };
    let head = header(first);
    match format {
        Format::Csv => {
            let head: Vec<&str> = head.iter().map(String::as_str).collect();
            let rows = table
                .iters
                .iter()
                .zip(&table.states)
                .zip(&table.residuals)
                .map(|((t, s), r)| {
                    let mut row = vec![t.to_string()];
                    row.extend(
                        s.x.iter()
                            .chain(&s.y)
                            .chain(&s.z)
                            .chain(&s.v)
                            .map(|&v| fmt_f64(v)),
                    );
                    row.push(fmt_f64(r.0));
                    row.push(fmt_f64(r.1));
                    row
                });
            write_rows(path, &head, rows)
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .iters
                .iter()
                .zip(&table.states)
                .zip(&table.residuals)
                .map(|((t, s), r)| {
                    let mut vals = vec![Value::from(*t)];
                    vals.extend(
                        s.x.iter()
                            .chain(&s.y)
                            .chain(&s.z)
                            .chain(&s.v)
                            .map(|&v| Value::from(v)),
                    );
                    vals.push(Value::from(r.0));
                    vals.push(Value::from(r.1));
                    Value::Object(head.iter().cloned().zip(vals).collect::<Map<_, _>>())
                })
                .collect();
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &rows)
                .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
            w.write_all(b"\n")
                .and_then(|_| w.flush())
                .map_err(|source| Error::File {
                    path: path.to_path_buf(),
                    source,
                })
        }
    }
}

/// Block sizes implied by a header, checking the column layout.
fn layout(head: &[String], path: &Path) -> Result<[usize; 4]> {
    let bad = |msg: String| Error::config(path.display().to_string(), msg);
    if head.first().map(String::as_str) != Some("iter") {
        return Err(bad("first column must be `iter`".into()));
    }
    let n = head.len();
    if n < 3 || head[n - 2] != "gs_x" || head[n - 1] != "gs_y" {
        return Err(bad("last columns must be `gs_x, gs_y`".into()));
    }
    let mut sizes = [0usize; 4];
    let mut k = 1;
    for (b, name) in ["x", "y", "z", "v"].iter().enumerate() {
        while k < n - 2 && head[k] == format!("{name}{}", sizes[b]) {
            sizes[b] += 1;
            k += 1;
        }
    }
    if k != n - 2 {
        return Err(bad(format!("unexpected column `{}`", head[k])));
    }
    Ok(sizes)
}

fn split_row(vals: &[f64], sizes: [usize; 4]) -> (SmoothedState, (f64, f64)) {
    let mut at = 0;
    let mut take = |n: usize| {
        let v = vals[at..at + n].to_vec();
        at += n;
        v
    };
    let (x, y, z, v) = (
        take(sizes[0]),
        take(sizes[1]),
        take(sizes[2]),
        take(sizes[3]),
    );
    (SmoothedState::new(x, y, z, v), (vals[at], vals[at + 1]))
}

/// Read a trajectory CSV written by [`export_trajectory`].
pub fn import_csv(path: &Path) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let head: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let sizes = layout(&head, path)?;
    let mut table = TrajectoryTable {
        iters: Vec::new(),
        states: Vec::new(),
        residuals: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| {
            Error::config(
                path.display().to_string(),
                format!("row {}: bad {what}", line + 1),
            )
        };
        table.iters.push(rec[0].parse().map_err(|_| bad("iter"))?);
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| bad("number")))
            .collect::<Result<_>>()?;
        let (s, res) = split_row(&vals, sizes);
        table.states.push(s);
        table.residuals.push(res);
    }
    Ok(table)
}

/// `t1,t2,feasible` rows, `t1`-major.
pub fn write_feasibility_csv(scan: &ScanMatrix, path: &Path) -> Result<()> {
    let rows = scan.t1.iter().enumerate().flat_map(|(i, &a)| {
        scan.t2
            .iter()
            .enumerate()
            .map(move |(j, &b)| vec![fmt_f64(a), fmt_f64(b), scan.feasible[i][j].to_string()])
    });
    write_rows(path, &["t1", "t2", "feasible"], rows)
}

/// `x,y,rho` rows, `x`-major; `rho` is empty where the field vanishes.
pub fn write_rho_csv(field: &RhoField, path: &Path) -> Result<()> {
    let rows = field.xs.iter().enumerate().flat_map(|(i, &x)| {
        field.ys.iter().enumerate().map(move |(j, &y)| {
            let rho = field.get(i, j).map(fmt_f64).unwrap_or_default();
            vec![fmt_f64(x), fmt_f64(y), rho]
        })
    });
    write_rows(path, &["x", "y", "rho"], rows)
}

/// `iter,lhs,rhs,margin,phi_t,phi_next` rows of a descent audit.
pub fn write_audit_csv(certs: &[DescentCertificate], path: &Path) -> Result<()> {
    let rows = certs.iter().enumerate().map(|(t, c)| {
        vec![
            t.to_string(),
            fmt_f64(c.lhs),
            fmt_f64(c.rhs),
            fmt_f64(c.margin),
            fmt_f64(c.phi_t),
            fmt_f64(c.phi_next),
        ]
    });
    write_rows(
        path,
        &["iter", "lhs", "rhs", "margin", "phi_t", "phi_next"],
        rows,
    )
}
