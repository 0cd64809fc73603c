//! Run configuration: a single TOML file with model, initial-data,
//! numerics, and output blocks, and the resolution logic that turns it
//! into ready-to-run objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    discretize_conditional, discretize_profile, Atom, ConditionalData, EnsembleProfile,
    InitialEnsemble,
};
use crate::error::{Error, Result};
use crate::rearrange::{z_of, ColumnState, Dynamics};
use crate::saturation::{
    compute_bounds, max_timestep, DomainBox, SaturationModel, SolverConfig, TabulatedSaturation,
    ThetaBounds,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Linear {
        qstar: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    Tabulated {
        /// CSV with columns theta,z,t,q sampling a full regular grid.
        table: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialConfig {
    /// Explicit per-cell arrays at the run resolution.
    Deterministic { theta: Vec<f64>, q: Vec<f64> },
    /// A continuum profile (piecewise-linear control points), with q set
    /// to exact saturation at t = 0. Re-discretizes for any n.
    Saturated { profile: Vec<[f64; 2]> },
    /// A continuum profile with an explicit moisture curve q(z), also
    /// re-discretizable.
    Profile {
        profile: Vec<[f64; 2]>,
        q_profile: Vec<[f64; 2]>,
    },
    /// Probabilistic data: weighted profiles with per-cell atom laws.
    Ensemble {
        k_half: f64,
        profiles: Vec<ProfileConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub weight: f64,
    /// Inline values at the run resolution, or control points below.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub profile: Option<Vec<[f64; 2]>>,
    /// Deterministic moisture: Dirac atoms exactly at theta + q.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    /// Explicit atoms per cell (1-based cell index).
    #[serde(default)]
    pub atoms: Option<Vec<AtomSpec>>,
    /// Per-cell histogram CSV with columns cell,bin,mass (1-based).
    #[serde(default)]
    pub histograms_csv: Option<PathBuf>,
    /// Raw (s, z) sample CSV with columns s,z; binned per run resolution.
    #[serde(default)]
    pub samples_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSpec {
    pub cell: usize,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Auto(String),
    Value(f64),
}

impl Default for DtSpec {
    fn default() -> Self {
        DtSpec::Auto("auto".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Exhaustive,
    Montecarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericsConfig {
    pub n: usize,
    pub t_end: f64,
    #[serde(default)]
    pub dt: DtSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_cap: usize,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Override of the invariant bound M' on |theta^M|; derived from the
    /// data when absent.
    #[serde(default)]
    pub w_max: Option<f64>,
}

fn default_mode() -> RunMode {
    RunMode::Exhaustive
}
fn default_sample_count() -> usize {
    10_000
}
fn default_enumeration_cap() -> usize {
    crate::ensemble::DEFAULT_ENUMERATION_CAP
}
fn default_grid_resolution() -> usize {
    64
}
fn default_tolerance() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub thin_snapshots: bool,
    /// Times at which ensemble marginals are exported.
    #[serde(default)]
    pub marginal_times: Vec<f64>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "jsonl".into()]
}
fn default_stride() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_out_dir(),
            formats: default_formats(),
            snapshot_stride: default_stride(),
            thin_snapshots: false,
            marginal_times: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Everything a command needs, resolved and validated.
pub struct Prepared {
    pub model: SaturationModel,
    pub bounds: ThetaBounds,
    pub solver: SolverConfig,
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub mode: RunMode,
    pub sample_count: usize,
    pub enumeration_cap: usize,
    pub initial: PreparedInitial,
    pub output: OutputConfig,
}

pub enum PreparedInitial {
    State(ColumnState),
    Ensemble(InitialEnsemble),
}

impl Prepared {
    pub fn dynamics(&self) -> Dynamics<'_> {
        Dynamics::new(&self.model, &self.bounds, self.solver)
    }
}

/// Evaluate piecewise-linear control points (z ascending) at z.
fn interp_points(points: &[[f64; 2]], z: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Config("profile needs at least one control point".into()));
    }
    if points.windows(2).any(|w| w[0][0] >= w[1][0]) {
        return Err(Error::Config(
            "profile control points must have strictly increasing z".into(),
        ));
    }
    if z <= points[0][0] {
        return Ok(points[0][1]);
    }
    if z >= points[points.len() - 1][0] {
        return Ok(points[points.len() - 1][1]);
    }
    let i = points.partition_point(|p| p[0] <= z) - 1;
    let (z0, v0) = (points[i][0], points[i][1]);
    let (z1, v1) = (points[i + 1][0], points[i + 1][1]);
    Ok(v0 + (v1 - v0) * (z - z0) / (z1 - z0))
}

fn build_model(cfg: &ModelConfig, base: &Path) -> Result<SaturationModel> {
    match cfg {
        ModelConfig::Linear { qstar, a, b, c } => SaturationModel::linear(*qstar, *a, *b, *c),
        ModelConfig::Tabulated { table } => {
            let path = base.join(table);
            let mut rows = Vec::new();
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            for record in reader.records() {
                let record = record.map_err(|e| Error::Parse(e.to_string()))?;
                if record.len() < 4 {
                    return Err(Error::Parse("table rows need theta,z,t,q".into()));
                }
                let f = |i: usize| -> Result<f64> {
                    record[i]
                        .trim()
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad number in table: {e}")))
                };
                rows.push((f(0)?, f(1)?, f(2)?, f(3)?));
            }
            Ok(SaturationModel::Tabulated(TabulatedSaturation::from_rows(
                &rows,
            )?))
        }
    }
}

fn read_histograms_csv(path: &Path, n: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut hists = vec![Vec::new(); n];
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() < 3 {
            return Err(Error::Parse("histogram rows need cell,bin,mass".into()));
        }
        let cell: usize = record[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad cell index: {e}")))?;
        let bin: usize = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad bin index: {e}")))?;
        let mass: f64 = record[2]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad mass: {e}")))?;
        if cell == 0 || cell > n {
            return Err(Error::Config(format!("cell {cell} outside 1..={n}")));
        }
        hists[cell - 1].push((bin, mass));
    }
    Ok(hists)
}

fn read_samples_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut samples = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() < 2 {
            return Err(Error::Parse("sample rows need s,z".into()));
        }
        let s: f64 = record[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad s: {e}")))?;
        let z: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad z: {e}")))?;
        samples.push((s, z));
    }
    Ok(samples)
}

fn profile_theta(p: &ProfileConfig, n: usize) -> Result<Vec<f64>> {
    match (&p.theta, &p.profile) {
        (Some(values), _) => {
            if values.len() != n {
                return Err(Error::Config(format!(
                    "inline profile has {} values but n = {n}",
                    values.len()
                )));
            }
            if values.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Domain("inline profile is not nondecreasing".into()));
            }
            Ok(values.clone())
        }
        (None, Some(points)) => discretize_profile(|z| interp_points(points, z).unwrap(), n),
        (None, None) => Err(Error::Config(
            "each ensemble profile needs either theta values or control points".into(),
        )),
    }
}

/// Resolve a configuration into runnable objects relative to `base`
/// (the directory CSV paths are taken from).
pub fn prepare(cfg: &RunConfig, base: &Path) -> Result<Prepared> {
    let solver = SolverConfig {
        tolerance: cfg.numerics.tolerance,
        max_iter: cfg.numerics.max_iter,
    };
    solver.validate()?;
    let n = cfg.numerics.n;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let t_end = cfg.numerics.t_end;
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }
    let model = build_model(&cfg.model, base)?;
    model.validate_monotone()?;
    let res = cfg.numerics.grid_resolution;

    // provisional bounds so the ensemble shift constant can be computed;
    // recomputed below once the data fixes the invariant bound
    let w_guess = cfg.numerics.w_max.unwrap_or(4.0).max(1.0);
    let bounds0 = compute_bounds(&model, DomainBox::new(w_guess, t_end)?, res, &solver)?;

    let initial = match &cfg.initial {
        InitialConfig::Deterministic { theta, q } => {
            if theta.len() != n || q.len() != n {
                return Err(Error::Config(format!(
                    "deterministic arrays must have n = {n} entries"
                )));
            }
            PreparedInitial::State(ColumnState::new(theta.clone(), q.clone(), 0.0)?)
        }
        InitialConfig::Saturated { profile } => {
            let theta = discretize_profile(|z| interp_points(profile, z).unwrap(), n)?;
            let q = theta
                .iter()
                .enumerate()
                .map(|(p, &th)| model.eval(th, z_of(p, n), 0.0))
                .collect::<Result<Vec<f64>>>()?;
            PreparedInitial::State(ColumnState::new(theta, q, 0.0)?)
        }
        InitialConfig::Profile { profile, q_profile } => {
            let theta = discretize_profile(|z| interp_points(profile, z).unwrap(), n)?;
            let q = (0..n)
                .map(|p| interp_points(q_profile, z_of(p, n)))
                .collect::<Result<Vec<f64>>>()?;
            PreparedInitial::State(ColumnState::new(theta, q, 0.0)?)
        }
        InitialConfig::Ensemble { k_half, profiles } => {
            let dynamics0 = Dynamics::new(&model, &bounds0, solver);
            let mut built = Vec::with_capacity(profiles.len());
            let mut shift_c = 0.0f64;
            for p in profiles {
                let theta = profile_theta(p, n)?;
                let atoms: Vec<Vec<Atom>> = if let Some(q) = &p.q {
                    if q.len() != n {
                        return Err(Error::Config(format!("q must have n = {n} entries")));
                    }
                    theta
                        .iter()
                        .zip(q)
                        .map(|(&th, &qv)| vec![Atom { value: th + qv, prob: 1.0 }])
                        .collect()
                } else if let Some(specs) = &p.atoms {
                    let mut atoms = vec![Vec::new(); n];
                    for spec in specs {
                        if spec.cell == 0 || spec.cell > n {
                            return Err(Error::Config(format!(
                                "atom cell {} outside 1..={n}",
                                spec.cell
                            )));
                        }
                        if spec.values.len() != spec.probs.len() {
                            return Err(Error::Config(
                                "atom values and probs must pair up".into(),
                            ));
                        }
                        atoms[spec.cell - 1] = spec
                            .values
                            .iter()
                            .zip(&spec.probs)
                            .map(|(&value, &prob)| Atom { value, prob })
                            .collect();
                    }
                    atoms
                } else if let Some(path) = &p.histograms_csv {
                    let hists = read_histograms_csv(&base.join(path), n)?;
                    shift_c = crate::ensemble::shift_constant(*k_half, &bounds0);
                    discretize_conditional(
                        ConditionalData::Histograms(&hists),
                        &theta,
                        n,
                        *k_half,
                        &bounds0,
                        &dynamics0,
                    )?
                } else if let Some(path) = &p.samples_csv {
                    let samples = read_samples_csv(&base.join(path))?;
                    shift_c = crate::ensemble::shift_constant(*k_half, &bounds0);
                    discretize_conditional(
                        ConditionalData::Samples(&samples),
                        &theta,
                        n,
                        *k_half,
                        &bounds0,
                        &dynamics0,
                    )?
                } else {
                    return Err(Error::Config(
                        "each ensemble profile needs q, atoms, histograms_csv, or samples_csv"
                            .into(),
                    ));
                };
                built.push(EnsembleProfile {
                    weight: p.weight,
                    theta,
                    atoms,
                });
            }
            let mut ens = InitialEnsemble::from_atoms(n, *k_half, built)?;
            ens.shift_c = shift_c;
            PreparedInitial::Ensemble(ens)
        }
    };

    // final invariant bound from the data
    let data_w_max = match &initial {
        PreparedInitial::State(s) => s
            .theta_m()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs())),
        PreparedInitial::Ensemble(e) => e.w_max(),
    };
    let w_max = cfg
        .numerics
        .w_max
        .unwrap_or(0.0)
        .max(data_w_max)
        .max(1e-6);
    let bounds = compute_bounds(&model, DomainBox::new(w_max, t_end)?, res, &solver)?;

    let dt_max = max_timestep(&bounds, n);
    let dt = match cfg.numerics.dt {
        DtSpec::Value(v) => {
            if !(v > 0.0) {
                return Err(Error::Config(format!("dt must be positive, got {v}")));
            }
            if v > dt_max * (1.0 + 1e-9) {
                return Err(Error::Config(format!(
                    "dt = {v} exceeds the admissible step {dt_max} for n = {n}"
                )));
            }
            v
        }
        DtSpec::Auto(ref word) => {
            if word != "auto" {
                return Err(Error::Config(format!("dt must be a number or \"auto\", got {word:?}")));
            }
            // resolve to an integer number of steps covering [0, t_end]
            let steps = (t_end / dt_max).ceil().max(1.0);
            t_end / steps
        }
    };

    // the ensemble must be admissible under the final bounds
    if let PreparedInitial::Ensemble(ens) = &initial {
        let dynamics = Dynamics::new(&model, &bounds, solver);
        let report = ens.check_admissibility(&dynamics);
        if !report.all_pass() {
            return Err(Error::Config(format!(
                "ensemble initial data failed admissibility: {report:?}"
            )));
        }
    }

    Ok(Prepared {
        model,
        bounds,
        solver,
        n,
        t_end,
        dt,
        seed: cfg.numerics.seed,
        mode: cfg.numerics.mode.clone(),
        sample_count: cfg.numerics.sample_count,
        enumeration_cap: cfg.numerics.enumeration_cap,
        initial,
        output: cfg.output.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [model]
        kind = "linear"
        qstar = 1.0
        a = 0.5
        b = 1.0
        c = 0.2

        [initial]
        kind = "deterministic"
        theta = [0.0, 0.1]
        q = [0.5, 0.0]

        [numerics]
        n = 2
        t_end = 0.02
        dt = 0.01
    "#;

    #[test]
    fn parse_and_prepare_deterministic() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        let prepared = prepare(&cfg, Path::new(".")).unwrap();
        assert_eq!(prepared.n, 2);
        assert_eq!(prepared.dt, 0.01);
        match &prepared.initial {
            PreparedInitial::State(s) => {
                assert_eq!(s.theta(), &[0.0, 0.1]);
            }
            _ => panic!("expected deterministic initial"),
        }
    }

    #[test]
    fn auto_dt_divides_horizon() {
        let text = BASE.replace("dt = 0.01", "dt = \"auto\"");
        let cfg = RunConfig::from_str(&text).unwrap();
        let prepared = prepare(&cfg, Path::new(".")).unwrap();
        let steps = prepared.t_end / prepared.dt;
        assert!((steps - steps.round()).abs() < 1e-9);
        // never exceeds the admissible step
        assert!(prepared.dt <= max_timestep(&prepared.bounds, prepared.n) * (1.0 + 1e-9));
    }

    #[test]
    fn oversized_dt_rejected() {
        let text = BASE.replace("dt = 0.01", "dt = 100.0");
        let cfg = RunConfig::from_str(&text).unwrap();
        assert!(prepare(&cfg, Path::new(".")).is_err());
    }

    #[test]
    fn saturated_initial_kind() {
        let text = r#"
            [model]
            kind = "linear"
            qstar = 2.0
            a = 0.5
            b = 2.0
            c = 0.2

            [initial]
            kind = "saturated"
            profile = [[0.0, 0.0], [1.0, 1.0]]

            [numerics]
            n = 4
            t_end = 0.5
        "#;
        let cfg = RunConfig::from_str(text).unwrap();
        let prepared = prepare(&cfg, Path::new(".")).unwrap();
        match &prepared.initial {
            PreparedInitial::State(s) => {
                for p in 0..4 {
                    let z = z_of(p, 4);
                    assert!((s.theta()[p] - z).abs() < 1e-12);
                    let qs = prepared.model.eval(s.theta()[p], z, 0.0).unwrap();
                    assert!((s.q()[p] - qs).abs() < 1e-12);
                }
            }
            _ => panic!("expected deterministic initial"),
        }
    }

    #[test]
    fn ensemble_initial_with_inline_atoms() {
        let text = r#"
            [model]
            kind = "linear"
            qstar = 1.0
            a = 0.5
            b = 1.0
            c = 0.2

            [initial]
            kind = "ensemble"
            k_half = 1.0

            [[initial.profiles]]
            weight = 1.0
            theta = [0.0, 0.1]
            atoms = [
                { cell = 1, values = [0.5, 0.0], probs = [0.5, 0.5] },
                { cell = 2, values = [0.1], probs = [1.0] },
            ]

            [numerics]
            n = 2
            t_end = 0.01
        "#;
        let cfg = RunConfig::from_str(text).unwrap();
        let prepared = prepare(&cfg, Path::new(".")).unwrap();
        match &prepared.initial {
            PreparedInitial::Ensemble(e) => {
                assert_eq!(e.profiles[0].atoms[0].len(), 2);
            }
            _ => panic!("expected ensemble initial"),
        }
    }

    #[test]
    fn bad_toml_is_config_error() {
        let err = RunConfig::from_str("not toml at all [").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
