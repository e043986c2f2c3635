//! Trajectory CSV export and re-import.

use std::path::Path;

use anyhow::{bail, Context, Result};
use saddleflow::flows::StateLayout;
use saddleflow::integrate::{AuxSample, Trajectory};

pub const AUX_COLUMNS: [&str; 4] = ["V", "h1", "h2", "residual"];

/// Header for `traj`: `t`, the state blocks, then `V,h1,h2,residual` when
/// monitor values are attached or a lone `residual` otherwise.
pub fn header(traj: &Trajectory) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(traj.layout.column_names());
    if traj.aux.is_some() {
        cols.extend(AUX_COLUMNS.iter().map(|s| s.to_string()));
    } else {
        cols.push("residual".into());
    }
    cols
}

/// 17 significant digits, enough to reproduce every `f64` exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    if traj.is_empty() {
        bail!("refusing to export an empty trajectory");
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header(traj))?;
    for k in 0..traj.len() {
        let mut row = Vec::with_capacity(traj.layout.dim() + 5);
        row.push(fmt(traj.times[k]));
        row.extend(traj.states[k].iter().map(|&v| fmt(v)));
        match &traj.aux {
            Some(aux) => {
                let a = aux[k];
                row.extend([a.lyapunov, a.h1, a.h2, a.residual].map(fmt));
            }
            None => row.push(fmt(traj.residuals[k])),
        }
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Reads a CSV written by [`write_trajectory`] back into a trajectory with
/// the given layout.
pub fn read_trajectory(path: &Path, layout: StateLayout) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cols: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let dim = layout.dim();
    let with_aux = match cols.len().checked_sub(1 + dim) {
        Some(4) => true,
        Some(1) => false,
        _ => bail!("{} columns do not fit a state of dimension {dim}", cols.len()),
    };
    let mut traj = Trajectory::new(layout);
    let mut aux = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record?;
        let row: Vec<f64> = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("data row {}", k + 1))?;
        if row.len() != cols.len() {
            bail!(
                "data row {} has {} columns, header has {}",
                k + 1,
                row.len(),
                cols.len()
            );
        }
        let tail = &row[1 + dim..];
        let residual = *tail.last().expect("at least one trailing column");
        traj.push(row[0], &row[1..1 + dim], residual);
        if with_aux {
            aux.push(AuxSample {
                lyapunov: tail[0],
                h1: tail[1],
                h2: tail[2],
                residual,
            });
        }
    }
    if with_aux {
        traj.aux = Some(aux);
    }
    Ok(traj)
}
