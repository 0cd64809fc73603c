//! Time-march a single deterministic column over `[0, T]`, recording
//! snapshots, cumulative flow maps, per-label Lagrangian paths, and the
//! per-step cascade reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rearrange::{cell_of, z_of, ColumnState, Dynamics, StepReport};
use crate::saturation::{max_timestep, ThetaBounds};

/// A completed run: `K+1` snapshots at times `k*dt`, the cumulative
/// label -> position permutations (alpha_0 = identity), and one report per
/// step. Snapshots are immutable once recorded.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ColumnState>,
    /// alpha at each snapshot; `cumulative[k+1] = beta0(step k+1) o cumulative[k]`.
    pub cumulative: Vec<Vec<usize>>,
    pub reports: Vec<StepReport>,
    pub dt: f64,
    pub t_end: f64,
    pub bounds: ThetaBounds,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.states[0].n()
    }

    /// Number of steps taken (snapshots minus one).
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// Snapshot index governing time `t`: a step boundary belongs to the
    /// new step, and the final partial interval reuses the last snapshot.
    pub fn index_at(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        (((t / self.dt) + 1e-9).floor() as usize).min(self.steps())
    }

    pub fn state_at(&self, t: f64) -> &ColumnState {
        &self.states[self.index_at(t)]
    }

    /// Piecewise-linear-in-time interpolant of theta between snapshots.
    /// All checks run on the piecewise-constant version; this accessor is
    /// the embedding used to view profiles as a continuous evolution.
    pub fn theta_bar(&self, t: f64, z: f64) -> f64 {
        let n = self.n();
        let j = cell_of(z, n);
        let k = ((t / self.dt).floor() as usize).min(self.steps());
        if k >= self.steps() {
            return self.states[self.steps()].theta()[j];
        }
        let frac = (t - self.times[k]) / self.dt;
        (1.0 - frac) * self.states[k].theta()[j] + frac * self.states[k + 1].theta()[j]
    }
}

/// Run a column from `initial` to `t_end` with step `dt`.
///
/// Every intermediate step is validated against the step invariants unless
/// `validate` is off (performance runs); the initial state is always
/// checked for admissibility at its own time.
pub fn run(
    dynamics: &Dynamics,
    initial: &ColumnState,
    t_end: f64,
    dt: f64,
    validate: bool,
) -> Result<Trajectory> {
    let n = initial.n();
    if !(t_end > initial.t()) {
        return Err(Error::Config(format!(
            "t_end = {t_end} must exceed the initial time {}",
            initial.t()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let dt_max = max_timestep(dynamics.bounds, n);
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "dt = {dt} exceeds the admissible step {dt_max} for n = {n}"
        )));
    }
    dynamics.validate_state(initial)?;

    let span = t_end - initial.t();
    let steps = step_count(span, dt);
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut cumulative = Vec::with_capacity(steps + 1);
    let mut reports = Vec::with_capacity(steps);
    states.push(initial.clone());
    times.push(initial.t());
    cumulative.push(initial.label_to_pos().to_vec());
    for k in 0..steps {
        let t_next = initial.t() + (k + 1) as f64 * dt;
        let (next, _beta0, report) = dynamics.step_to(states.last().unwrap(), t_next, validate)?;
        cumulative.push(next.label_to_pos().to_vec());
        times.push(t_next);
        states.push(next);
        reports.push(report);
    }
    Ok(Trajectory {
        times,
        states,
        cumulative,
        reports,
        dt,
        t_end,
        bounds: dynamics.bounds.clone(),
    })
}

fn step_count(span: f64, dt: f64) -> usize {
    let ratio = span / dt;
    let rounded = ratio.round();
    let steps = if (ratio - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        ratio.ceil() as usize
    };
    steps.max(1)
}

/// The measure-preserving grid map at time `t`: cell `J_i` translates to
/// cell `J_{map[i]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowMap {
    pub n: usize,
    /// initial position -> position at time t (labels are initial positions).
    pub map: Vec<usize>,
}

impl FlowMap {
    pub fn eval(&self, z: f64) -> f64 {
        let i = cell_of(z, self.n);
        z + (self.map[i] as f64 - i as f64) / self.n as f64
    }
}

/// The flow map `F_t`, piecewise constant in time.
pub fn flow_map(traj: &Trajectory, t: f64) -> Result<FlowMap> {
    if t < 0.0 || t >= traj.t_end {
        return Err(Error::Domain(format!(
            "flow map requested at t = {t} outside [0, {})",
            traj.t_end
        )));
    }
    Ok(FlowMap {
        n: traj.n(),
        map: traj.cumulative[traj.index_at(t)].clone(),
    })
}

/// One parcel's step-function path: positions and theta-hat at each
/// snapshot time, plus the conserved `s = theta^M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagrangianPath {
    pub label: usize,
    pub s: f64,
    pub times: Vec<f64>,
    /// Height z of the parcel at each snapshot.
    pub positions: Vec<f64>,
    pub theta_hat: Vec<f64>,
}

impl LagrangianPath {
    pub fn positive_variation(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.positions.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

/// One path per label, read along the cumulative permutations.
pub fn lagrangian_paths(traj: &Trajectory) -> Vec<LagrangianPath> {
    let n = traj.n();
    (0..n)
        .map(|label| {
            let positions = traj
                .cumulative
                .iter()
                .map(|alpha| z_of(alpha[label], n))
                .collect();
            let theta_hat = traj
                .states
                .iter()
                .map(|s| s.theta_hat(label))
                .collect();
            LagrangianPath {
                label,
                s: traj.states[0].theta_m()[label],
                times: traj.times.clone(),
                positions,
                theta_hat,
            }
        })
        .collect()
}

/// Memory-economical trajectory: the initial state, per-step permutations,
/// and the per-step lift events (label, new theta-hat). Snapshots are
/// reconstructed on demand; theta and positions are reproduced bit-exactly,
/// q up to one rounding of `theta^M - theta`.
#[derive(Debug, Clone)]
pub struct ThinTrajectory {
    pub initial: ColumnState,
    pub dt: f64,
    pub t_end: f64,
    pub steps: Vec<ThinStep>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThinStep {
    /// start-of-step position -> end-of-step position.
    pub beta: Vec<usize>,
    pub lifts: Vec<(usize, f64)>,
}

pub fn run_thin(
    dynamics: &Dynamics,
    initial: &ColumnState,
    t_end: f64,
    dt: f64,
    validate: bool,
) -> Result<ThinTrajectory> {
    let traj = run(dynamics, initial, t_end, dt, validate)?;
    Ok(thin_of(&traj))
}

pub fn thin_of(traj: &Trajectory) -> ThinTrajectory {
    let steps = (1..traj.states.len())
        .map(|k| {
            let prev = &traj.states[k - 1];
            let cur = &traj.states[k];
            let beta = prev
                .pos_to_label()
                .iter()
                .map(|&l| cur.pos_of(l))
                .collect();
            let lifts = traj.reports[k - 1]
                .labels
                .iter()
                .enumerate()
                .filter(|(_, f)| f.lifted)
                .map(|(label, _)| (label, cur.theta_hat(label)))
                .collect();
            ThinStep { beta, lifts }
        })
        .collect();
    ThinTrajectory {
        initial: traj.states[0].clone(),
        dt: traj.dt,
        t_end: traj.t_end,
        steps,
    }
}

impl ThinTrajectory {
    pub fn n(&self) -> usize {
        self.initial.n()
    }

    /// Reconstruct the snapshot after `k` steps.
    pub fn state_at_index(&self, k: usize) -> Result<ColumnState> {
        let n = self.n();
        let mut label_to_pos: Vec<usize> = self.initial.label_to_pos().to_vec();
        let mut theta_hat: Vec<f64> = (0..n).map(|l| self.initial.theta_hat(l)).collect();
        for step in &self.steps[..k] {
            for l in 0..n {
                label_to_pos[l] = step.beta[label_to_pos[l]];
            }
            for &(label, th) in &step.lifts {
                theta_hat[label] = th;
            }
        }
        let mut theta = vec![0.0; n];
        let mut q = vec![0.0; n];
        let theta_m = self.initial.theta_m();
        for l in 0..n {
            let p = label_to_pos[l];
            theta[p] = theta_hat[l];
            q[p] = theta_m[l] - theta_hat[l];
        }
        if k == 0 {
            return Ok(self.initial.clone());
        }
        ColumnState::from_parts(
            self.initial.t() + k as f64 * self.dt,
            theta,
            q,
            label_to_pos,
            self.initial.theta_m_arc(),
        )
    }

    /// Expand to a full trajectory (with empty step reports).
    pub fn materialize(&self, bounds: &ThetaBounds) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(self.steps.len() + 1);
        let mut cumulative = Vec::with_capacity(self.steps.len() + 1);
        let mut times = Vec::with_capacity(self.steps.len() + 1);
        for k in 0..=self.steps.len() {
            let s = self.state_at_index(k)?;
            times.push(s.t());
            cumulative.push(s.label_to_pos().to_vec());
            states.push(s);
        }
        Ok(Trajectory {
            times,
            states,
            cumulative,
            reports: Vec::new(),
            dt: self.dt,
            t_end: self.t_end,
            bounds: bounds.clone(),
        })
    }
}
