//! One time step of the discrete rearrangement: the cascade over stages
//! `k = n-1 .. 0` of wet-set computation, eligibility, jumper selection,
//! cyclic shift and latent-heating update.
//!
//! Positions are 0-based with cell `J_p = [p/n, (p+1)/n)` and nominal height
//! `z_p = (p+1)/n`. Labels are the parcels' initial positions; the state
//! carries the cumulative label -> position permutation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saturation::{
    max_timestep, theta_inverse, SaturationModel, SolverConfig, ThetaBounds, MEMO_LIMIT,
};

/// Height of the 0-based position `p` on an `n`-parcel grid.
#[inline]
pub fn z_of(p: usize, n: usize) -> f64 {
    (p + 1) as f64 / n as f64
}

/// Cell index containing height `z` (clamped to the grid).
#[inline]
pub fn cell_of(z: f64, n: usize) -> usize {
    ((z * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize
}

/// One discrete column: per-position `theta`, `q` at a given time, the
/// label permutation, and the conserved per-label `theta^M = theta + q`.
#[derive(Debug, Clone)]
pub struct ColumnState {
    t: f64,
    theta: Vec<f64>,
    q: Vec<f64>,
    /// label -> position (the cumulative discrete flow map).
    label_to_pos: Vec<usize>,
    pos_to_label: Vec<usize>,
    /// label-indexed, never mutated after construction.
    theta_m: Arc<Vec<f64>>,
}

impl ColumnState {
    /// Initial state at time `t0`: labels coincide with positions and
    /// `theta^M` is frozen from `theta + q`.
    pub fn new(theta: Vec<f64>, q: Vec<f64>, t0: f64) -> Result<Self> {
        let n = theta.len();
        if n == 0 || q.len() != n {
            return Err(Error::Config(format!(
                "state needs matching non-empty theta ({}) and q ({}) arrays",
                n,
                q.len()
            )));
        }
        if theta.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain(
                "initial theta profile is not nondecreasing".into(),
            ));
        }
        let theta_m: Vec<f64> = theta.iter().zip(&q).map(|(a, b)| a + b).collect();
        Ok(ColumnState {
            t: t0,
            theta,
            q,
            label_to_pos: (0..n).collect(),
            pos_to_label: (0..n).collect(),
            theta_m: Arc::new(theta_m),
        })
    }

    /// Rebuild a mid-run state from its parts (used when re-ingesting
    /// exported trajectories). Validates the permutation and conservation.
    pub fn from_parts(
        t: f64,
        theta: Vec<f64>,
        q: Vec<f64>,
        label_to_pos: Vec<usize>,
        theta_m: Arc<Vec<f64>>,
    ) -> Result<Self> {
        let n = theta.len();
        if q.len() != n || label_to_pos.len() != n || theta_m.len() != n {
            return Err(Error::Parse("state arrays of mismatched length".into()));
        }
        let mut pos_to_label = vec![usize::MAX; n];
        for (label, &p) in label_to_pos.iter().enumerate() {
            if p >= n || pos_to_label[p] != usize::MAX {
                return Err(Error::Parse("label map is not a permutation".into()));
            }
            pos_to_label[p] = label;
        }
        let state = ColumnState {
            t,
            theta,
            q,
            label_to_pos,
            pos_to_label,
            theta_m,
        };
        for label in 0..n {
            let p = state.label_to_pos[label];
            if (state.theta[p] + state.q[p] - state.theta_m[label]).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "conservation broken for label {label} in ingested state"
                )));
            }
        }
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn theta_m(&self) -> &[f64] {
        &self.theta_m
    }
    pub fn theta_m_arc(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.theta_m)
    }
    /// label -> position permutation (the discrete flow map at this time).
    pub fn label_to_pos(&self) -> &[usize] {
        &self.label_to_pos
    }
    pub fn pos_to_label(&self) -> &[usize] {
        &self.pos_to_label
    }
    pub fn label_at(&self, pos: usize) -> usize {
        self.pos_to_label[pos]
    }
    pub fn pos_of(&self, label: usize) -> usize {
        self.label_to_pos[label]
    }
    /// theta read along the parcel: `theta_hat(label)`.
    pub fn theta_hat(&self, label: usize) -> f64 {
        self.theta[self.label_to_pos[label]]
    }
}

/// Per-stage record of one sub-rearrangement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    /// Stage index: the position (0-based) being decided.
    pub k: usize,
    pub wet: Vec<usize>,
    pub eligible: Vec<usize>,
    pub jumper_pos: Option<usize>,
    pub jumper_label: Option<usize>,
}

/// Per-label summary of what happened to a parcel within one step.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LabelFlags {
    pub lifted: bool,
    /// Position the parcel was lifted to, when `lifted`.
    pub lift_target: Option<usize>,
    pub pushed_down: bool,
}

/// Full record of one step's cascade; the primary debugging artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReport {
    pub t_next: f64,
    /// Stages in execution order, `k = n-1` down to `0`.
    pub stages: Vec<StageRecord>,
    pub labels: Vec<LabelFlags>,
}

impl StepReport {
    pub fn jump_count(&self) -> usize {
        self.stages.iter().filter(|s| s.jumper_pos.is_some()).count()
    }
}

/// Lazy per-step memo of `Theta(theta^M[label], z_pos, t_next)` values.
/// Falls back to direct evaluation above `MEMO_LIMIT` parcels.
struct ThetaMemo {
    n: usize,
    vals: Vec<f64>,
}

impl ThetaMemo {
    fn new(n: usize) -> Self {
        let vals = if n <= MEMO_LIMIT {
            vec![f64::NAN; n * n]
        } else {
            Vec::new()
        };
        ThetaMemo { n, vals }
    }

    fn get(
        &mut self,
        model: &SaturationModel,
        cfg: &SolverConfig,
        theta_m: &[f64],
        label: usize,
        pos: usize,
        t_next: f64,
    ) -> Result<f64> {
        if self.vals.is_empty() {
            return theta_inverse(model, theta_m[label], z_of(pos, self.n), t_next, cfg);
        }
        let idx = label * self.n + pos;
        let v = self.vals[idx];
        if v.is_nan() {
            let v = theta_inverse(model, theta_m[label], z_of(pos, self.n), t_next, cfg)?;
            self.vals[idx] = v;
            Ok(v)
        } else {
            Ok(v)
        }
    }
}

/// Mutable working copy of a state while the cascade runs.
struct Working {
    theta: Vec<f64>,
    q: Vec<f64>,
    pos_to_label: Vec<usize>,
    label_to_pos: Vec<usize>,
}

/// The rearrangement dynamics for one saturation model, its derived bounds,
/// and a solver configuration. All methods are pure in the sense that they
/// never mutate shared state; distinct states may be stepped concurrently.
pub struct Dynamics<'a> {
    pub model: &'a SaturationModel,
    pub bounds: &'a ThetaBounds,
    pub solver: SolverConfig,
}

impl<'a> Dynamics<'a> {
    pub fn new(model: &'a SaturationModel, bounds: &'a ThetaBounds, solver: SolverConfig) -> Self {
        Dynamics {
            model,
            bounds,
            solver,
        }
    }

    /// Strictness tolerance for wet membership: solver noise must never
    /// manufacture spurious wetness, so exact saturation counts as dry.
    pub fn tol_wet(&self) -> f64 {
        self.solver.tolerance
    }

    /// Slack on the saturation constraint `q <= Q^sat + tol_sat`, in q
    /// units: the theta-scale solver tolerance times the Lipschitz factor.
    pub fn tol_sat(&self) -> f64 {
        2.0 * self.solver.tolerance * (1.0 + self.bounds.sup_dtheta_qsat)
    }

    pub fn theta_cap(&self, w: f64, z: f64, t: f64) -> Result<f64> {
        theta_inverse(self.model, w, z, t, &self.solver)
    }

    /// Wet positions at the upcoming time level: `theta[p]` strictly below
    /// the saturation target of the parcel currently at `p`.
    pub fn wet_set(&self, state: &ColumnState, t_next: f64) -> Result<Vec<usize>> {
        let mut memo = ThetaMemo::new(state.n());
        let w = Working::from_state(state);
        self.wet_positions(&w, state.theta_m(), t_next, &mut memo)
    }

    fn wet_positions(
        &self,
        w: &Working,
        theta_m: &[f64],
        t_next: f64,
        memo: &mut ThetaMemo,
    ) -> Result<Vec<usize>> {
        let tol = self.tol_wet();
        let mut wet = Vec::new();
        for p in 0..w.theta.len() {
            let cap = memo.get(
                self.model,
                &self.solver,
                theta_m,
                w.pos_to_label[p],
                p,
                t_next,
            )?;
            if w.theta[p] < cap - tol {
                wet.push(p);
            }
        }
        Ok(wet)
    }

    /// Wet positions that can beat every parcel above them up to stage `k`:
    /// a dry occupant is beaten when the candidate's saturation target at
    /// that height exceeds the occupant's theta, a wet occupant when the
    /// candidate's `theta^M` is strictly larger. Positions at or above `k`
    /// are eligible whenever wet.
    pub fn eligible_set(
        &self,
        state: &ColumnState,
        t_next: f64,
        k: usize,
        wet: &[usize],
    ) -> Result<Vec<usize>> {
        let mut memo = ThetaMemo::new(state.n());
        let w = Working::from_state(state);
        self.eligible_positions(&w, state.theta_m(), t_next, k, wet, &mut memo)
    }

    fn eligible_positions(
        &self,
        w: &Working,
        theta_m: &[f64],
        t_next: f64,
        k: usize,
        wet: &[usize],
        memo: &mut ThetaMemo,
    ) -> Result<Vec<usize>> {
        let n = w.theta.len();
        let mut wet_mask = vec![false; n];
        for &p in wet {
            wet_mask[p] = true;
        }
        let mut eligible = Vec::new();
        'cand: for &j0 in wet {
            if j0 >= k {
                eligible.push(j0);
                continue;
            }
            let l0 = w.pos_to_label[j0];
            let s0 = theta_m[l0];
            for j in (j0 + 1)..=k {
                if wet_mask[j] {
                    if s0 <= theta_m[w.pos_to_label[j]] {
                        continue 'cand;
                    }
                } else {
                    let cap = memo.get(self.model, &self.solver, theta_m, l0, j, t_next)?;
                    if w.theta[j] >= cap {
                        continue 'cand;
                    }
                }
            }
            eligible.push(j0);
        }
        Ok(eligible)
    }

    /// The eligible position whose label has maximal `theta^M`; ties go to
    /// the largest position index. `None` when nothing is eligible.
    pub fn select_jumper(&self, state: &ColumnState, eligible: &[usize]) -> Option<usize> {
        select_from(&state.pos_to_label, state.theta_m(), eligible)
    }

    /// Apply one sub-rearrangement: the parcel at `jstar` moves to stage
    /// position `k`, parcels in `(jstar, k]` shift down by one, theta at `k`
    /// is set to the saturation target, and q is recomputed from `theta^M`.
    pub fn apply_jump(
        &self,
        state: &ColumnState,
        k: usize,
        jstar: usize,
        t_next: f64,
    ) -> Result<ColumnState> {
        let mut w = Working::from_state(state);
        let mut memo = ThetaMemo::new(state.n());
        let mut flags = vec![LabelFlags::default(); state.n()];
        self.apply_jump_inner(&mut w, state.theta_m(), k, jstar, t_next, &mut memo, &mut flags)?;
        Ok(ColumnState {
            t: state.t,
            theta: w.theta,
            q: w.q,
            label_to_pos: w.label_to_pos,
            pos_to_label: w.pos_to_label,
            theta_m: state.theta_m_arc(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_jump_inner(
        &self,
        w: &mut Working,
        theta_m: &[f64],
        k: usize,
        jstar: usize,
        t_next: f64,
        memo: &mut ThetaMemo,
        flags: &mut [LabelFlags],
    ) -> Result<()> {
        if jstar > k {
            // A wet parcel above the stage position is eligible by the
            // convention but can never be moved down to it; the monotone
            // hypotheses rule this out for validated models.
            return Err(Error::Internal(format!(
                "jumper position {jstar} above stage position {k}"
            )));
        }
        let l_jump = w.pos_to_label[jstar];
        let target = memo.get(self.model, &self.solver, theta_m, l_jump, k, t_next)?;
        for p in jstar..k {
            let lm = w.pos_to_label[p + 1];
            w.theta[p] = w.theta[p + 1];
            w.q[p] = theta_m[lm] - w.theta[p];
            w.pos_to_label[p] = lm;
            w.label_to_pos[lm] = p;
            flags[lm].pushed_down = true;
        }
        w.theta[k] = target;
        w.q[k] = theta_m[l_jump] - target;
        w.pos_to_label[k] = l_jump;
        w.label_to_pos[l_jump] = k;
        flags[l_jump].lifted = true;
        flags[l_jump].lift_target = Some(k);
        Ok(())
    }

    /// One full step to `state.t + dt`, with invariant validation.
    pub fn step(&self, state: &ColumnState, dt: f64) -> Result<(ColumnState, Vec<usize>, StepReport)> {
        self.step_to(state, state.t + dt, true)
    }

    /// One full step to the exact target time `t_next`: the cascade of all
    /// `n` sub-rearrangements. Returns the new state, the composed
    /// position -> position permutation of the step, and the step report.
    pub fn step_to(
        &self,
        state: &ColumnState,
        t_next: f64,
        validate: bool,
    ) -> Result<(ColumnState, Vec<usize>, StepReport)> {
        let n = state.n();
        let dt = t_next - state.t;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("step needs t_next > t, got dt = {dt}")));
        }
        let dt_max = max_timestep(self.bounds, n);
        if dt > dt_max * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "dt = {dt} exceeds the admissible step {dt_max}"
            )));
        }
        let theta_m = state.theta_m();
        let mut w = Working::from_state(state);
        let mut memo = ThetaMemo::new(n);
        let mut flags = vec![LabelFlags::default(); n];
        let mut stages = Vec::with_capacity(n);
        for k in (0..n).rev() {
            let wet = self.wet_positions(&w, theta_m, t_next, &mut memo)?;
            let (eligible, jumper) = if wet.is_empty() {
                (Vec::new(), None)
            } else {
                let eligible =
                    self.eligible_positions(&w, theta_m, t_next, k, &wet, &mut memo)?;
                let jumper = select_from(&w.pos_to_label, theta_m, &eligible);
                (eligible, jumper)
            };
            let jumper_label = jumper.map(|p| w.pos_to_label[p]);
            if let Some(jstar) = jumper {
                self.apply_jump_inner(&mut w, theta_m, k, jstar, t_next, &mut memo, &mut flags)?;
            }
            stages.push(StageRecord {
                k,
                wet,
                eligible,
                jumper_pos: jumper,
                jumper_label,
            });
        }
        let report = StepReport {
            t_next,
            stages,
            labels: flags,
        };
        // beta0: start-of-step position -> end-of-step position
        let beta0: Vec<usize> = state
            .pos_to_label
            .iter()
            .map(|&l| w.label_to_pos[l])
            .collect();
        let new_state = ColumnState {
            t: t_next,
            theta: w.theta,
            q: w.q,
            label_to_pos: w.label_to_pos,
            pos_to_label: w.pos_to_label,
            theta_m: state.theta_m_arc(),
        };
        if validate {
            if let Err(message) = self.check_step_pair(state, &new_state) {
                return Err(Error::Invariant {
                    message,
                    report: Box::new(report),
                });
            }
        }
        Ok((new_state, beta0, report))
    }

    /// Validate a single state: position-monotone theta, per-label
    /// conservation, and the saturation constraint at the state's time.
    pub fn validate_state(&self, state: &ColumnState) -> Result<()> {
        self.state_violation(state)
            .map_or(Ok(()), |m| Err(Error::Domain(m)))
    }

    fn state_violation(&self, state: &ColumnState) -> Option<String> {
        let n = state.n();
        let tol_mono = 8.0 * self.solver.tolerance;
        for p in 1..n {
            if state.theta[p] < state.theta[p - 1] - tol_mono {
                return Some(format!(
                    "theta not monotone at position {p}: {} < {}",
                    state.theta[p],
                    state.theta[p - 1]
                ));
            }
        }
        for label in 0..n {
            let p = state.label_to_pos[label];
            let resid = (state.theta[p] + state.q[p] - state.theta_m[label]).abs();
            if resid > 1e-12 {
                return Some(format!(
                    "conservation residual {resid:.3e} for label {label}"
                ));
            }
        }
        let tol_sat = self.tol_sat();
        for p in 0..n {
            let qs = self
                .model
                .eval_unchecked(state.theta[p], z_of(p, n), state.t);
            if state.q[p] > qs + tol_sat {
                return Some(format!(
                    "saturation violated at position {p}: q = {} > Qsat = {qs}",
                    state.q[p]
                ));
            }
        }
        None
    }

    /// The four-point step invariant for a (before, after) pair.
    fn check_step_pair(&self, before: &ColumnState, after: &ColumnState) -> std::result::Result<(), String> {
        if let Some(m) = self.state_violation(after) {
            return Err(m);
        }
        for label in 0..before.n() {
            let old = before.theta_hat(label);
            let new = after.theta_hat(label);
            if new < old - 1e-12 {
                return Err(format!(
                    "theta_hat decreased for label {label}: {old} -> {new}"
                ));
            }
        }
        Ok(())
    }
}

fn select_from(pos_to_label: &[usize], theta_m: &[f64], eligible: &[usize]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &p in eligible {
        let s = theta_m[pos_to_label[p]];
        // eligible is ascending in position, so >= implements the
        // largest-position tie rule
        if best.map_or(true, |(bs, _)| s >= bs) {
            best = Some((s, p));
        }
    }
    best.map(|(_, p)| p)
}

impl Working {
    fn from_state(state: &ColumnState) -> Self {
        Working {
            theta: state.theta.clone(),
            q: state.q.clone(),
            pos_to_label: state.pos_to_label.clone(),
            label_to_pos: state.label_to_pos.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saturation::{compute_bounds, DomainBox};

    fn setup() -> (SaturationModel, ThetaBounds) {
        let model = SaturationModel::linear(1.0, 0.5, 1.0, 0.2).unwrap();
        let bounds = compute_bounds(
            &model,
            DomainBox::new(2.0, 1.0).unwrap(),
            16,
            &SolverConfig::default(),
        )
        .unwrap();
        (model, bounds)
    }

    fn two_parcel_state() -> ColumnState {
        ColumnState::new(vec![0.0, 0.1], vec![0.5, 0.0], 0.0).unwrap()
    }

    fn three_parcel_state() -> ColumnState {
        ColumnState::new(
            vec![0.0, 0.05, 0.1],
            vec![2.0 / 3.0, 0.358333333333333333, 0.0],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn wet_set_examples() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());

        let dry = ColumnState::new(vec![0.0, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        assert!(dynamics.wet_set(&dry, 0.01).unwrap().is_empty());

        let wet = dynamics.wet_set(&two_parcel_state(), 0.01).unwrap();
        assert_eq!(wet, vec![0]);

        let wet = dynamics.wet_set(&three_parcel_state(), 0.01).unwrap();
        assert_eq!(wet, vec![0, 1]);
    }

    #[test]
    fn eligible_set_examples() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());

        let s2 = two_parcel_state();
        assert!(dynamics.eligible_set(&s2, 0.01, 1, &[]).unwrap().is_empty());
        let wet = dynamics.wet_set(&s2, 0.01).unwrap();
        assert_eq!(dynamics.eligible_set(&s2, 0.01, 1, &wet).unwrap(), vec![0]);

        let s3 = three_parcel_state();
        let wet = dynamics.wet_set(&s3, 0.01).unwrap();
        assert_eq!(
            dynamics.eligible_set(&s3, 0.01, 2, &wet).unwrap(),
            vec![0, 1]
        );
    }

    #[test]
    fn select_jumper_rules() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let s3 = three_parcel_state();
        assert_eq!(dynamics.select_jumper(&s3, &[]), None);
        // theta^M = (0.6667, 0.4083, 0.1): position 0 wins
        assert_eq!(dynamics.select_jumper(&s3, &[0, 1]), Some(0));
        // exact theta^M tie: largest position wins
        let tied = ColumnState::new(vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0], 0.0).unwrap();
        assert_eq!(dynamics.select_jumper(&tied, &[0, 1]), Some(1));
    }

    #[test]
    fn apply_jump_two_parcels() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let s2 = two_parcel_state();
        let out = dynamics.apply_jump(&s2, 1, 0, 0.01).unwrap();
        assert!((out.theta()[0] - 0.1).abs() < 1e-12);
        assert!((out.theta()[1] - 0.502 / 1.5).abs() < 1e-9);
        assert!((out.q()[1] - (0.5 - 0.502 / 1.5)).abs() < 1e-9);
        assert_eq!(out.pos_of(0), 1);
        assert_eq!(out.pos_of(1), 0);
    }

    #[test]
    fn apply_jump_in_place_is_pure_update() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        // saturated top parcel jumps onto its own position
        let s = ColumnState::new(vec![0.0, 0.334666666666667], vec![0.0, 0.165333333333333], 0.01)
            .unwrap();
        let out = dynamics.apply_jump(&s, 1, 1, 0.02).unwrap();
        assert_eq!(out.pos_of(1), 1);
        assert!((out.theta()[1] - 0.504 / 1.5).abs() < 1e-9);
        assert_eq!(out.theta()[0], 0.0);
    }

    #[test]
    fn step_all_dry_is_identity() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let dry = ColumnState::new(vec![0.5, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        let (out, beta, report) = dynamics.step(&dry, 0.01).unwrap();
        assert_eq!(out.theta(), dry.theta());
        assert_eq!(beta, vec![0, 1]);
        assert_eq!(report.jump_count(), 0);
        assert!(report.stages.iter().all(|s| s.wet.is_empty()));
    }

    #[test]
    fn step_two_parcel_case() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let (out, beta, report) = dynamics.step(&two_parcel_state(), 0.01).unwrap();
        assert!((out.theta()[0] - 0.1).abs() < 1e-9);
        assert!((out.theta()[1] - 0.334666666666667).abs() < 1e-9);
        assert_eq!(beta, vec![1, 0]);
        assert_eq!(report.jump_count(), 1);
        assert_eq!(report.stages[0].k, 1);
        assert_eq!(report.stages[0].jumper_pos, Some(0));
    }

    #[test]
    fn step_three_parcel_case() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let (out, beta, report) = dynamics.step(&three_parcel_state(), 0.01).unwrap();
        assert!((out.theta()[0] - 0.05).abs() < 1e-9);
        assert!((out.theta()[1] - 0.1).abs() < 1e-9);
        assert!((out.theta()[2] - 0.668666666666667 / 1.5).abs() < 1e-9);
        assert!((out.q()[2] - (2.0 / 3.0 - 0.668666666666667 / 1.5)).abs() < 1e-9);
        // order after the step: labels (1, 2, 0) bottom to top
        assert_eq!(out.pos_to_label(), &[1, 2, 0]);
        assert_eq!(beta, vec![2, 0, 1]);
        // one jump at the top stage; parcel 1 wet beforehand, pushed down
        assert_eq!(report.jump_count(), 1);
        assert_eq!(report.stages[0].jumper_label, Some(0));
        assert!(report.labels[1].pushed_down);
        assert!(!report.labels[1].lifted);
        assert!(report.labels[0].lifted);
        assert_eq!(report.labels[0].lift_target, Some(2));
    }

    #[test]
    fn step_rejects_oversized_dt() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        // cfl = 0.2, n = 2 -> dt_max = 1.25
        let err = dynamics.step(&two_parcel_state(), 1.3);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn state_rejects_non_monotone_theta() {
        assert!(ColumnState::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.0).is_err());
    }
}
