//! Batch front-end: config ingestion, run orchestration, data export, and
//! convergence studies. All floats printed through the 17-digit formatter
//! so identical config + seed gives byte-identical outputs.

use std::path::{Path, PathBuf};

use crate::config::{prepare, Prepared, PreparedInitial, RunConfig, RunMode};
use crate::energy::{energy, minimality_certificate};
use crate::ensemble::{
    marginal, marginal_distance, profile_l1_distance, run_ensemble, Atom, EnsembleMode,
    EnsembleProfile, InitialEnsemble, Observable,
};
use crate::error::{Error, Result};
use crate::export::{
    fmt_f64, read_trajectory, write_checks_json, write_energy_csv, write_marginal_csv,
    write_member_summaries, write_trajectory, RunMeta,
};
use crate::rearrange::Dynamics;
use crate::simulate::{run, Trajectory};
use crate::verify::{run_all, CheckReport, VerifyConfig};

/// Exit code for "a verification clause failed" (as opposed to bad config
/// or a runtime error).
pub const EXIT_CHECK_FAILURE: i32 = 2;

fn out_dir(prepared: &Prepared, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| prepared.output.directory.clone())
}

fn deterministic_state(prepared: &Prepared) -> Result<&crate::rearrange::ColumnState> {
    match &prepared.initial {
        PreparedInitial::State(s) => Ok(s),
        PreparedInitial::Ensemble(_) => Err(Error::Config(
            "this command needs a deterministic initial block; use the ensemble command".into(),
        )),
    }
}

fn run_meta(prepared: &Prepared, traj: &Trajectory) -> RunMeta {
    RunMeta {
        model: prepared.model.clone(),
        solver: prepared.solver,
        bounds: prepared.bounds.clone(),
        n: prepared.n,
        t_end: prepared.t_end,
        dt: traj.dt,
        seed: prepared.seed,
        theta_m: traj.states[0].theta_m().to_vec(),
    }
}

pub fn cmd_simulate(
    config: &Path,
    out: Option<&Path>,
    validate: bool,
    seed: Option<u64>,
) -> Result<i32> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.numerics.seed = s;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let prepared = prepare(&cfg, base)?;
    let initial = deterministic_state(&prepared)?;
    let dynamics = prepared.dynamics();
    let traj = run(&dynamics, initial, prepared.t_end, prepared.dt, validate)?;
    let dir = out_dir(&prepared, out);
    write_trajectory(&dir, &run_meta(&prepared, &traj), &traj, prepared.output.snapshot_stride)?;
    let resid = max_conservation_residual(&traj);
    let jumps: usize = traj.reports.iter().map(|r| r.jump_count()).sum();
    println!(
        "simulate: n={} steps={} dt={} jumps={jumps} conservation_residual={} -> {}",
        prepared.n,
        traj.steps(),
        fmt_f64(traj.dt),
        fmt_f64(resid),
        dir.display()
    );
    Ok(0)
}

fn max_conservation_residual(traj: &Trajectory) -> f64 {
    let mut worst = 0.0f64;
    for state in &traj.states {
        for label in 0..traj.n() {
            let p = state.pos_of(label);
            worst = worst.max((state.theta()[p] + state.q()[p] - state.theta_m()[label]).abs());
        }
    }
    worst
}

pub fn cmd_ensemble(
    config: &Path,
    out: Option<&Path>,
    validate: bool,
    seed: Option<u64>,
) -> Result<i32> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.numerics.seed = s;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let prepared = prepare(&cfg, base)?;
    let dynamics = prepared.dynamics();
    // a deterministic initial block runs as its Dirac ensemble
    let ens: InitialEnsemble = match &prepared.initial {
        PreparedInitial::Ensemble(e) => e.clone(),
        PreparedInitial::State(s) => {
            let atoms = (0..s.n())
                .map(|l| vec![Atom { value: s.theta_m()[l], prob: 1.0 }])
                .collect();
            InitialEnsemble::from_atoms(
                s.n(),
                s.theta_m().iter().fold(1.0f64, |m, v| m.max(v.abs())),
                vec![EnsembleProfile {
                    weight: 1.0,
                    theta: s.theta().to_vec(),
                    atoms,
                }],
            )?
        }
    };
    let mode = match prepared.mode {
        RunMode::Exhaustive => EnsembleMode::Exhaustive,
        RunMode::Montecarlo => EnsembleMode::MonteCarlo {
            seed: prepared.seed,
            sample_count: prepared.sample_count,
        },
    };
    let result = run_ensemble(
        &dynamics,
        &ens,
        prepared.t_end,
        prepared.dt,
        mode,
        prepared.enumeration_cap,
        validate,
    )?;
    let dir = out_dir(&prepared, out);
    std::fs::create_dir_all(&dir)?;
    write_member_summaries(&dir.join("members.jsonl"), &result)?;
    let mut marginal_times = prepared.output.marginal_times.clone();
    if marginal_times.is_empty() {
        marginal_times.push(0.0);
    }
    for (i, &t) in marginal_times.iter().enumerate() {
        let m = marginal(&result, t)?;
        write_marginal_csv(&dir.join(format!("marginal_{i}.csv")), &m)?;
    }
    let weight_sum: f64 = result.runs.iter().map(|r| r.weight).sum();
    println!(
        "ensemble: members={} weight_sum={} dt={} -> {}",
        result.runs.len(),
        fmt_f64(weight_sum),
        fmt_f64(result.dt),
        dir.display()
    );
    Ok(0)
}

/// What to verify: a config (simulate in memory) or an exported run.
pub enum VerifySource<'a> {
    Config(&'a Path),
    Trajectory(&'a Path),
}

pub fn cmd_verify(source: VerifySource, out: Option<&Path>, verify_cfg: &VerifyConfig) -> Result<i32> {
    let (model, solver, bounds, traj, default_dir) = match source {
        VerifySource::Config(path) => {
            let cfg = RunConfig::load(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let prepared = prepare(&cfg, base)?;
            let initial = deterministic_state(&prepared)?;
            let dynamics = prepared.dynamics();
            let traj = run(&dynamics, initial, prepared.t_end, prepared.dt, true)?;
            (
                prepared.model.clone(),
                prepared.solver,
                prepared.bounds.clone(),
                traj,
                prepared.output.directory.clone(),
            )
        }
        VerifySource::Trajectory(dir) => {
            let (meta, traj) = read_trajectory(dir)?;
            (meta.model, meta.solver, meta.bounds, traj, dir.to_path_buf())
        }
    };
    let dynamics = Dynamics::new(&model, &bounds, solver);
    let reports = run_all(&dynamics, &traj, verify_cfg)?;
    let dir = out.map(Path::to_path_buf).unwrap_or(default_dir);
    std::fs::create_dir_all(&dir)?;
    write_checks_json(&dir.join("checks.json"), &reports)?;
    print_check_table(&reports);
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        println!("verify: {failed} check(s) FAILED -> {}", dir.display());
        Ok(EXIT_CHECK_FAILURE)
    } else {
        println!("verify: all {} checks passed -> {}", reports.len(), dir.display());
        Ok(0)
    }
}

fn print_check_table(reports: &[CheckReport]) {
    println!("{:<22} {:<6} constants", "check", "status");
    for r in reports {
        let consts: Vec<String> = r
            .constants
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_f64(*v)))
            .collect();
        println!(
            "{:<22} {:<6} {}",
            r.check,
            if r.pass { "PASS" } else { "FAIL" },
            consts.join(" ")
        );
        if !r.pass {
            for note in &r.notes {
                println!("    {note}");
            }
        }
    }
}

/// Re-discretize the same continuum description at each n, run, and report
/// profile L1 distances between consecutive resolutions at sampled times,
/// measured constants per n, and (for ensembles) marginal transport
/// distances between consecutive resolutions.
pub fn cmd_converge(
    config: &Path,
    n_list: &[usize],
    out: Option<&Path>,
    verify_cfg: &VerifyConfig,
) -> Result<i32> {
    if n_list.len() < 2 {
        return Err(Error::Config("converge needs at least two resolutions".into()));
    }
    let cfg = RunConfig::load(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let sample_times: Vec<f64> = (1..=4)
        .map(|i| cfg.numerics.t_end * i as f64 / 5.0)
        .collect();

    struct Level {
        n: usize,
        traj: Option<Trajectory>,
        marginals: Vec<crate::ensemble::EmpiricalMarginal>,
        constants: std::collections::BTreeMap<String, f64>,
    }

    let mut levels: Vec<Level> = Vec::new();
    for &n in n_list {
        let mut level_cfg = cfg.clone();
        level_cfg.numerics.n = n;
        level_cfg.numerics.dt = crate::config::DtSpec::Auto("auto".into());
        let prepared = prepare(&level_cfg, base)?;
        let dynamics = prepared.dynamics();
        let mut level = Level {
            n,
            traj: None,
            marginals: Vec::new(),
            constants: Default::default(),
        };
        match &prepared.initial {
            PreparedInitial::State(s) => {
                let traj = run(&dynamics, s, prepared.t_end, prepared.dt, true)?;
                let reports = run_all(&dynamics, &traj, verify_cfg)?;
                for r in &reports {
                    for key in ["c4_hat", "c5_hat", "c6_hat"] {
                        if let Some(v) = r.constants.get(key) {
                            level.constants.insert(key.to_string(), *v);
                        }
                    }
                    if !r.pass {
                        return Err(Error::Config(format!(
                            "check {} failed at n = {n} during the convergence study",
                            r.check
                        )));
                    }
                }
                level.traj = Some(traj);
            }
            PreparedInitial::Ensemble(e) => {
                let mode = match prepared.mode {
                    RunMode::Exhaustive => EnsembleMode::Exhaustive,
                    RunMode::Montecarlo => EnsembleMode::MonteCarlo {
                        seed: prepared.seed,
                        sample_count: prepared.sample_count,
                    },
                };
                let result = run_ensemble(
                    &dynamics,
                    e,
                    prepared.t_end,
                    prepared.dt,
                    mode,
                    prepared.enumeration_cap,
                    true,
                )?;
                for &t in &sample_times {
                    level.marginals.push(marginal(&result, t)?);
                }
            }
        }
        levels.push(level);
    }

    let mut rows: Vec<String> = Vec::new();
    rows.push("metric,t,n_coarse,n_fine,value".into());
    println!("{:<10} {:<12} {:<8} {:<8} value", "metric", "t", "n", "n_next");
    for w in levels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if let (Some(ta), Some(tb)) = (&a.traj, &b.traj) {
            for &t in &sample_times {
                let d = profile_l1_distance(ta.state_at(t).theta(), tb.state_at(t).theta());
                println!(
                    "{:<10} {:<12} {:<8} {:<8} {}",
                    "l1_theta",
                    fmt_f64(t),
                    a.n,
                    b.n,
                    fmt_f64(d)
                );
                rows.push(format!("l1_theta,{},{},{},{}", fmt_f64(t), a.n, b.n, fmt_f64(d)));
            }
        }
        for (ti, t) in sample_times.iter().enumerate() {
            if a.marginals.len() > ti && b.marginals.len() > ti {
                for z in [0.25, 0.75] {
                    let d = marginal_distance(
                        &a.marginals[ti],
                        &b.marginals[ti],
                        Observable::ThetaAt(z),
                    )?;
                    println!(
                        "{:<10} {:<12} {:<8} {:<8} {} (z={z})",
                        "w1_theta",
                        fmt_f64(*t),
                        a.n,
                        b.n,
                        fmt_f64(d)
                    );
                    rows.push(format!(
                        "w1_theta_z{z},{},{},{},{}",
                        fmt_f64(*t),
                        a.n,
                        b.n,
                        fmt_f64(d)
                    ));
                }
            }
        }
    }
    println!("{:<8} {:<22} {:<22} {:<22}", "n", "c4_hat", "c5_hat", "c6_hat");
    for level in &levels {
        let g = |k: &str| {
            level
                .constants
                .get(k)
                .map(|v| fmt_f64(*v))
                .unwrap_or_else(|| "-".into())
        };
        println!(
            "{:<8} {:<22} {:<22} {:<22}",
            level.n,
            g("c4_hat"),
            g("c5_hat"),
            g("c6_hat")
        );
        rows.push(format!(
            "constants,,{},,c4={} c5={} c6={}",
            level.n,
            g("c4_hat"),
            g("c5_hat"),
            g("c6_hat")
        ));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("converge.csv"), rows.join("\n") + "\n")?;
    }
    Ok(0)
}

pub fn cmd_energy(trajectory: &Path, out: Option<&Path>) -> Result<i32> {
    let (_, traj) = read_trajectory(trajectory)?;
    let mut rows = Vec::new();
    let mut all_minimal = true;
    println!("{:<12} {:<24} certified", "t", "energy");
    for (k, state) in traj.states.iter().enumerate() {
        let e = energy(state.theta());
        let cert = minimality_certificate(state.theta());
        if cert == Some(false) {
            all_minimal = false;
        }
        if cert.is_none() && state.theta().windows(2).any(|w| w[0] > w[1]) {
            all_minimal = false;
        }
        println!(
            "{:<12} {:<24} {}",
            fmt_f64(traj.times[k]),
            fmt_f64(e),
            cert.map_or("monotone".to_string(), |b| b.to_string())
        );
        rows.push((traj.times[k], e, cert));
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| trajectory.to_path_buf());
    std::fs::create_dir_all(&dir)?;
    write_energy_csv(&dir.join("energy.csv"), &rows)?;
    if all_minimal {
        Ok(0)
    } else {
        println!("energy: minimality FAILED");
        Ok(EXIT_CHECK_FAILURE)
    }
}
