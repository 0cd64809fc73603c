//! File formats: trajectory CSV, per-state JSON-lines, run metadata,
//! cascade-report JSON-lines, marginal CSV, and check-report JSON, plus
//! re-ingestion of exported trajectories.
//!
//! Floating-point CSV fields are printed with 17 significant digits so a
//! read-back reproduces the exact bits; the JSON writers round-trip by
//! construction.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ensemble::{EmpiricalMarginal, EnsembleResult};
use crate::error::{Error, Result};
use crate::rearrange::{z_of, ColumnState, StepReport};
use crate::saturation::{SaturationModel, SolverConfig, ThetaBounds};
use crate::simulate::Trajectory;
use crate::verify::CheckReport;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub model: SaturationModel,
    pub solver: SolverConfig,
    pub bounds: ThetaBounds,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub theta_m: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateRecord {
    k: usize,
    t: f64,
    theta: Vec<f64>,
    q: Vec<f64>,
    /// label -> position; doubles as the exported flow-map permutation.
    label_to_pos: Vec<usize>,
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,position_index,z,theta,q,label")?;
    let n = traj.n();
    for (k, state) in traj.states.iter().enumerate() {
        if k % stride != 0 && k != traj.states.len() - 1 {
            continue;
        }
        for p in 0..n {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(traj.times[k]),
                p + 1,
                fmt_f64(z_of(p, n)),
                fmt_f64(state.theta()[p]),
                fmt_f64(state.q()[p]),
                state.label_at(p) + 1
            )?;
        }
    }
    Ok(())
}

pub fn write_states_jsonl(path: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let mut out = BufWriter::new(File::create(path)?);
    for (k, state) in traj.states.iter().enumerate() {
        if k % stride != 0 && k != traj.states.len() - 1 {
            continue;
        }
        let record = StateRecord {
            k,
            t: traj.times[k],
            theta: state.theta().to_vec(),
            q: state.q().to_vec(),
            label_to_pos: state.label_to_pos().to_vec(),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_reports_jsonl(path: &Path, reports: &[StepReport]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for report in reports {
        serde_json::to_writer(&mut out, report).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_meta(path: &Path, meta: &RunMeta) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(out, meta).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_checks_json(path: &Path, reports: &[CheckReport]) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(out, reports).map_err(|e| Error::Parse(e.to_string()))
}

/// Export one run into `dir`: meta.json, states.jsonl, reports.jsonl and
/// trajectory.csv (the latter honoring the snapshot stride).
pub fn write_trajectory(dir: &Path, meta: &RunMeta, traj: &Trajectory, stride: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_meta(&dir.join("meta.json"), meta)?;
    write_states_jsonl(&dir.join("states.jsonl"), traj, 1)?;
    write_reports_jsonl(&dir.join("reports.jsonl"), &traj.reports)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), traj, stride)?;
    Ok(())
}

/// Re-ingest a trajectory directory written by `write_trajectory`.
pub fn read_trajectory(dir: &Path) -> Result<(RunMeta, Trajectory)> {
    let meta_path = dir.join("meta.json");
    let meta: RunMeta = serde_json::from_reader(BufReader::new(
        File::open(&meta_path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", meta_path.display())))?,
    ))
    .map_err(|e| Error::Parse(format!("{}: {e}", meta_path.display())))?;
    let theta_m = Arc::new(meta.theta_m.clone());
    let mut states = Vec::new();
    let mut times = Vec::new();
    let mut cumulative = Vec::new();
    let states_path = dir.join("states.jsonl");
    let reader = BufReader::new(
        File::open(&states_path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", states_path.display())))?,
    );
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StateRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse(e.to_string()))?;
        if record.k != states.len() {
            return Err(Error::Parse(format!(
                "states.jsonl is not contiguous: expected k = {}, got {}",
                states.len(),
                record.k
            )));
        }
        cumulative.push(record.label_to_pos.clone());
        times.push(record.t);
        states.push(ColumnState::from_parts(
            record.t,
            record.theta,
            record.q,
            record.label_to_pos,
            Arc::clone(&theta_m),
        )?);
    }
    if states.is_empty() {
        return Err(Error::Parse("states.jsonl holds no snapshots".into()));
    }
    let mut reports = Vec::new();
    let reports_path = dir.join("reports.jsonl");
    if reports_path.exists() {
        let reader = BufReader::new(File::open(&reports_path)?);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            reports.push(
                serde_json::from_str::<StepReport>(&line)
                    .map_err(|e| Error::Parse(e.to_string()))?,
            );
        }
    }
    let traj = Trajectory {
        times,
        states,
        cumulative,
        reports,
        dt: meta.dt,
        t_end: meta.t_end,
        bounds: meta.bounds.clone(),
    };
    Ok((meta, traj))
}

/// One summary line per ensemble member.
pub fn write_member_summaries(path: &Path, res: &EnsembleResult) -> Result<()> {
    #[derive(Serialize)]
    struct MemberSummary<'a> {
        member: usize,
        profile: usize,
        sigma: &'a [usize],
        weight: f64,
        jumps: usize,
        final_theta: &'a [f64],
        conservation_residual: f64,
    }
    let mut out = BufWriter::new(File::create(path)?);
    for (i, run) in res.runs.iter().enumerate() {
        let traj = &run.trajectory;
        let last = traj.states.last().unwrap();
        let resid = (0..traj.n())
            .map(|l| {
                let p = last.pos_of(l);
                (last.theta()[p] + last.q()[p] - last.theta_m()[l]).abs()
            })
            .fold(0.0f64, f64::max);
        let summary = MemberSummary {
            member: i,
            profile: run.profile,
            sigma: &run.sigma,
            weight: run.weight,
            jumps: traj.reports.iter().map(|r| r.jump_count()).sum(),
            final_theta: traj.states.last().unwrap().theta(),
            conservation_residual: resid,
        };
        serde_json::to_writer(&mut out, &summary).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_marginal_csv(path: &Path, marginal: &EmpiricalMarginal) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,member,weight,label,s,z_start,z_now,theta_now")?;
    for (i, sample) in marginal.samples.iter().enumerate() {
        for record in &sample.labels {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(marginal.t),
                i,
                fmt_f64(sample.weight),
                record.label + 1,
                fmt_f64(record.s),
                fmt_f64(record.z_start),
                fmt_f64(record.z_now),
                fmt_f64(record.theta_now)
            )?;
        }
    }
    Ok(())
}

pub fn write_energy_csv(path: &Path, rows: &[(f64, f64, Option<bool>)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,energy,certified_minimal")?;
    for (t, e, cert) in rows {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(*t),
            fmt_f64(*e),
            cert.map_or("monotone".to_string(), |b| b.to_string())
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::Dynamics;
    use crate::saturation::{compute_bounds, DomainBox};
    use crate::simulate::run;

    #[test]
    fn seventeen_digit_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0 / 15.0, 0.502 / 1.5, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let model = SaturationModel::linear(1.0, 0.5, 1.0, 0.2).unwrap();
        let solver = SolverConfig::default();
        let bounds =
            compute_bounds(&model, DomainBox::new(2.0, 1.0).unwrap(), 16, &solver).unwrap();
        let dynamics = Dynamics::new(&model, &bounds, solver);
        let initial =
            ColumnState::new(vec![0.0, 0.05, 0.1], vec![2.0 / 3.0, 0.3583333333333333, 0.0], 0.0)
                .unwrap();
        let traj = run(&dynamics, &initial, 0.03, 0.01, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = RunMeta {
            model,
            solver,
            bounds,
            n: 3,
            t_end: traj.t_end,
            dt: traj.dt,
            seed: 0,
            theta_m: initial.theta_m().to_vec(),
        };
        write_trajectory(dir.path(), &meta, &traj, 1).unwrap();
        let (meta2, back) = read_trajectory(dir.path()).unwrap();
        assert_eq!(meta2.n, 3);
        assert_eq!(back.states.len(), traj.states.len());
        for (a, b) in back.states.iter().zip(&traj.states) {
            assert_eq!(a.theta(), b.theta());
            assert_eq!(a.q(), b.q());
            assert_eq!(a.label_to_pos(), b.label_to_pos());
        }
        assert_eq!(back.reports.len(), traj.reports.len());
    }
}
