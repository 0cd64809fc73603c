//! Executable checks of the scheme's structural properties: the step
//! invariants, jump-structure and overtaking lemmas, variation and
//! persistence bounds, increment and continuity estimates, and the
//! concentration of the Lagrangian increment measure on the wet set.
//!
//! Constants the theory only asserts to exist are measured and reported;
//! constants the proofs supply explicitly (the per-jump inequality, the
//! variation bound, the persistence window) are tested as hard bounds.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, minimality_certificate};
use crate::error::{Error, Result};
use crate::rearrange::{z_of, Dynamics};
use crate::simulate::{lagrangian_paths, LagrangianPath, Trajectory};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstCase {
    pub label: Option<usize>,
    pub time: Option<f64>,
    pub stage: Option<usize>,
    pub measure: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub worst: Option<WorstCase>,
    pub constants: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(check: &str) -> Self {
        CheckReport {
            check: check.to_string(),
            pass: true,
            worst: None,
            constants: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, label: Option<usize>, time: Option<f64>, stage: Option<usize>, measure: f64, note: String) {
        self.pass = false;
        let record = self
            .worst
            .as_ref()
            .map_or(true, |w| measure.abs() > w.measure.abs());
        if record {
            self.worst = Some(WorstCase {
                label,
                time,
                stage,
                measure,
            });
        }
        if self.notes.len() < 16 {
            self.notes.push(note);
        }
    }

    fn constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    fn tolerance(&mut self, key: &str, value: f64) {
        self.tolerances.insert(key.to_string(), value);
    }
}

/// Sampling parameters and optional hard caps on the measured constants.
/// Reports are deterministic given (trajectory, config).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub base_times_per_label: usize,
    pub continuity_pairs: usize,
    pub c4_cap: Option<f64>,
    pub c5_cap: Option<f64>,
    pub c6_cap: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0x5eed,
            base_times_per_label: 32,
            continuity_pairs: 64,
            c4_cap: None,
            c5_cap: None,
            c6_cap: None,
        }
    }
}

/// Step invariants over the full run: position-monotone theta, per-label
/// conservation, per-label theta-hat monotone in time, the saturation
/// constraint at every snapshot's own time, and the sup bound on theta, q.
pub fn check_step_invariants(dynamics: &Dynamics, traj: &Trajectory) -> CheckReport {
    let mut report = CheckReport::new("step_invariants");
    let n = traj.n();
    let tol_mono = 8.0 * dynamics.solver.tolerance;
    let tol_sat = dynamics.tol_sat();
    report.tolerance("monotone", tol_mono);
    report.tolerance("conservation", 1e-12);
    report.tolerance("saturation", tol_sat);
    let mut max_resid: f64 = 0.0;
    let mut max_sat_slack = f64::NEG_INFINITY;
    let mut min_hat_incr = f64::INFINITY;
    let theta_m = traj.states[0].theta_m();
    let theta0_sup = traj.states[0]
        .theta()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let sup_theta_bound = theta0_sup.max(traj.bounds.sup_abs_theta) + tol_mono;
    let w_max = traj.bounds.domain.w_max;
    for (k, state) in traj.states.iter().enumerate() {
        let t = traj.times[k];
        for p in 0..n {
            if p > 0 && state.theta()[p] < state.theta()[p - 1] - tol_mono {
                report.fail(
                    Some(state.label_at(p)),
                    Some(t),
                    Some(p),
                    state.theta()[p - 1] - state.theta()[p],
                    format!("theta inversion at position {p}, t = {t}"),
                );
            }
            let qs = dynamics
                .model
                .eval_unchecked(state.theta()[p], z_of(p, n), t);
            let slack = state.q()[p] - qs;
            max_sat_slack = max_sat_slack.max(slack);
            if slack > tol_sat {
                report.fail(
                    Some(state.label_at(p)),
                    Some(t),
                    Some(p),
                    slack,
                    format!("saturation exceeded by {slack:.3e} at position {p}, t = {t}"),
                );
            }
            if state.theta()[p].abs() > sup_theta_bound {
                report.fail(
                    Some(state.label_at(p)),
                    Some(t),
                    Some(p),
                    state.theta()[p].abs() - sup_theta_bound,
                    format!("theta sup bound exceeded at position {p}, t = {t}"),
                );
            }
            if state.q()[p].abs() > w_max + sup_theta_bound {
                report.fail(
                    Some(state.label_at(p)),
                    Some(t),
                    Some(p),
                    state.q()[p].abs() - (w_max + sup_theta_bound),
                    format!("q sup bound exceeded at position {p}, t = {t}"),
                );
            }
        }
        for label in 0..n {
            let p = state.pos_of(label);
            let resid = (state.theta()[p] + state.q()[p] - theta_m[label]).abs();
            max_resid = max_resid.max(resid);
            if resid > 1e-12 {
                report.fail(
                    Some(label),
                    Some(t),
                    None,
                    resid,
                    format!("conservation residual {resid:.3e} for label {label}, t = {t}"),
                );
            }
            if k > 0 {
                let incr = state.theta_hat(label) - traj.states[k - 1].theta_hat(label);
                min_hat_incr = min_hat_incr.min(incr);
                if incr < -1e-12 {
                    report.fail(
                        Some(label),
                        Some(t),
                        None,
                        incr,
                        format!("theta_hat decreased by {incr:.3e} for label {label}, t = {t}"),
                    );
                }
            }
        }
    }
    report.constant("max_conservation_residual", max_resid);
    report.constant("max_saturation_slack", max_sat_slack);
    report.constant(
        "min_theta_hat_increment",
        if min_hat_incr.is_finite() { min_hat_incr } else { 0.0 },
    );
    report
}

/// Within-step lift structure: per (step, label) at most one lift, the
/// parcel is fixed at its lift target for the rest of the step, a pushed
/// parcel is never lifted later in the step, and a parcel that is dry at or
/// below the stage position descends monotonically for the rest of the step.
///
/// Requires the per-step cascade records; errors when the trajectory was
/// recorded without them.
pub fn check_jump_structure(traj: &Trajectory) -> Result<CheckReport> {
    let mut report = CheckReport::new("jump_structure");
    if traj.reports.len() != traj.steps() {
        return Err(Error::Config(
            "jump-structure check needs the per-step cascade records".into(),
        ));
    }
    let n = traj.n();
    let mut total_lifts = 0usize;
    for (step_idx, step_report) in traj.reports.iter().enumerate() {
        let t = traj.times[step_idx + 1];
        // positions of each label before every stage, reconstructed by
        // replaying the recorded sub-rearrangements
        let mut pos: Vec<usize> = traj.states[step_idx].label_to_pos().to_vec();
        let mut lift_count = vec![0usize; n];
        let mut lift_pos = vec![None::<usize>; n];
        let mut pushed_at = vec![None::<usize>; n]; // stage index of first push-down
        let mut dry_since = vec![None::<usize>; n]; // stage index from which descent is forced
        let mut prev_pos_of = vec![usize::MAX; n];
        for (stage_idx, stage) in step_report.stages.iter().enumerate() {
            let mut wet_mask = vec![false; n];
            for &p in &stage.wet {
                wet_mask[p] = true;
            }
            // dry at or below the stage position: descent from here on
            for label in 0..n {
                if pos[label] <= stage.k && !wet_mask[pos[label]] && dry_since[label].is_none() {
                    dry_since[label] = Some(stage_idx);
                    prev_pos_of[label] = pos[label];
                }
            }
            if let (Some(jp), Some(jl)) = (stage.jumper_pos, stage.jumper_label) {
                if pos[jl] != jp {
                    report.fail(
                        Some(jl),
                        Some(t),
                        Some(stage.k),
                        (pos[jl] as f64) - (jp as f64),
                        format!("recorded jumper position inconsistent at step {step_idx}"),
                    );
                }
                lift_count[jl] += 1;
                total_lifts += 1;
                if lift_count[jl] > 1 {
                    report.fail(
                        Some(jl),
                        Some(t),
                        Some(stage.k),
                        lift_count[jl] as f64,
                        format!("label {jl} lifted twice within step {step_idx}"),
                    );
                }
                if pushed_at[jl].is_some() {
                    report.fail(
                        Some(jl),
                        Some(t),
                        Some(stage.k),
                        1.0,
                        format!("label {jl} lifted after being pushed down in step {step_idx}"),
                    );
                }
                if dry_since[jl].is_some() {
                    report.fail(
                        Some(jl),
                        Some(t),
                        Some(stage.k),
                        1.0,
                        format!("dry label {jl} lifted in step {step_idx}"),
                    );
                }
                // apply the sub-rearrangement to the tracked positions
                for label in 0..n {
                    if label != jl && pos[label] > jp && pos[label] <= stage.k {
                        pos[label] -= 1;
                        if pushed_at[label].is_none() {
                            pushed_at[label] = Some(stage_idx);
                        }
                    }
                }
                pos[jl] = stage.k;
                lift_pos[jl] = Some(stage.k);
            }
            // post-lift fixity and forced descent
            for label in 0..n {
                if let Some(kp) = lift_pos[label] {
                    if pos[label] != kp {
                        report.fail(
                            Some(label),
                            Some(t),
                            Some(stage.k),
                            (pos[label] as f64) - (kp as f64),
                            format!("label {label} moved off its lift target in step {step_idx}"),
                        );
                    }
                }
                if dry_since[label].is_some() && lift_pos[label].is_none() {
                    if pos[label] > prev_pos_of[label] {
                        report.fail(
                            Some(label),
                            Some(t),
                            Some(stage.k),
                            (pos[label] - prev_pos_of[label]) as f64,
                            format!("dry label {label} rose within step {step_idx}"),
                        );
                    }
                    prev_pos_of[label] = pos[label];
                }
            }
        }
        // reconstructed final positions must match the next snapshot
        for label in 0..n {
            if pos[label] != traj.states[step_idx + 1].pos_of(label) {
                report.fail(
                    Some(label),
                    Some(t),
                    None,
                    0.0,
                    format!("replayed cascade diverges from snapshot after step {step_idx}"),
                );
            }
        }
    }
    report.constant("total_lifts", total_lifts as f64);
    Ok(report)
}

/// Overtaking structure across steps: a crossing needs strictly larger
/// `theta^M`, no pair crosses twice, and for every label the number of
/// parcels overtaking it between steps k < l is at most `2 (l - k)`.
pub fn check_overtake(traj: &Trajectory) -> CheckReport {
    let mut report = CheckReport::new("overtake");
    let n = traj.n();
    let boundaries = traj.steps();
    let theta_m = traj.states[0].theta_m();
    // crossing_times[j0] = sorted boundary indices at which some parcel
    // overtakes j0
    let mut crossing_times: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut crossed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut total_crossings = 0usize;
    for m in 1..=boundaries {
        let before = &traj.cumulative[m - 1];
        let after = &traj.cumulative[m];
        for a in 0..n {
            for b in (a + 1)..n {
                let was_below = before[a] < before[b];
                let is_below = after[a] < after[b];
                if was_below == is_below {
                    continue;
                }
                let (riser, sunk) = if was_below { (a, b) } else { (b, a) };
                total_crossings += 1;
                if theta_m[riser] <= theta_m[sunk] {
                    report.fail(
                        Some(riser),
                        Some(traj.times[m]),
                        None,
                        theta_m[riser] - theta_m[sunk],
                        format!(
                            "label {riser} overtook {sunk} without larger theta^M at t = {}",
                            traj.times[m]
                        ),
                    );
                }
                let count = crossed.entry((a.min(b), a.max(b))).or_insert(0);
                *count += 1;
                if *count > 1 {
                    report.fail(
                        Some(riser),
                        Some(traj.times[m]),
                        None,
                        *count as f64,
                        format!("pair ({a}, {b}) crossed more than once"),
                    );
                }
                crossing_times[sunk].push(m);
            }
        }
    }
    // rate bound: within any window of steps (k, l], at most 2 (l - k)
    // parcels overtake a given label
    let mut worst_ratio: f64 = 0.0;
    for (j0, times) in crossing_times.iter().enumerate() {
        for u in 0..times.len() {
            for v in u..times.len() {
                let count = (v - u + 1) as f64;
                let window = (times[v] - times[u] + 1) as f64;
                worst_ratio = worst_ratio.max(count / (2.0 * window));
                if count > 2.0 * window {
                    report.fail(
                        Some(j0),
                        Some(traj.times[times[v]]),
                        None,
                        count - 2.0 * window,
                        format!(
                            "{count} parcels overtook label {j0} within {window} steps"
                        ),
                    );
                }
            }
        }
    }
    report.constant("total_crossings", total_crossings as f64);
    report.constant("worst_overtake_rate", worst_ratio);
    report
}

/// Variation bounds along each parcel path: the per-jump inequality
/// `d(theta_hat) >= inf dz Theta * (d position)^+` event by event, the
/// positive-variation bound, and the total-variation bound.
pub fn check_tv(traj: &Trajectory) -> CheckReport {
    let mut report = CheckReport::new("tv");
    let inf_dz = traj.bounds.inf_dz_theta;
    let paths = lagrangian_paths(traj);
    let sup_hat = paths
        .iter()
        .flat_map(|p| p.theta_hat.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let pv_bound = 2.0 * sup_hat / inf_dz;
    let tv_bound = 2.0 * pv_bound + 2.0;
    report.tolerance("per_jump", 1e-9);
    report.tolerance("pv_slack", 1e-9);
    report.constant("sup_theta_hat", sup_hat);
    report.constant("pv_bound", pv_bound);
    let mut max_pv: f64 = 0.0;
    let mut max_tv: f64 = 0.0;
    for path in &paths {
        for m in 1..path.times.len() {
            let dpos = (path.positions[m] - path.positions[m - 1]).max(0.0);
            let dhat = path.theta_hat[m] - path.theta_hat[m - 1];
            if dhat < inf_dz * dpos - 1e-9 {
                report.fail(
                    Some(path.label),
                    Some(path.times[m]),
                    None,
                    inf_dz * dpos - dhat,
                    format!(
                        "per-jump inequality failed for label {} at t = {}",
                        path.label, path.times[m]
                    ),
                );
            }
        }
        let pv = path.positive_variation();
        let tv = path.total_variation();
        max_pv = max_pv.max(pv);
        max_tv = max_tv.max(tv);
        if pv > pv_bound + 1e-9 {
            report.fail(
                Some(path.label),
                None,
                None,
                pv - pv_bound,
                format!("positive variation {pv} exceeds bound {pv_bound}"),
            );
        }
        if tv > tv_bound + 1e-9 {
            report.fail(
                Some(path.label),
                None,
                None,
                tv - tv_bound,
                format!("total variation {tv} exceeds bound {tv_bound}"),
            );
        }
    }
    report.constant("max_pv", max_pv);
    report.constant("max_tv", max_tv);
    report
}

/// Log-spaced epsilon grid `{dt, 2dt, 4dt, ...}` capped at `T/4`, keeping
/// only values for which the persistence window argument applies.
fn epsilon_grid(traj: &Trajectory, floor: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut eps = traj.dt;
    while eps <= traj.t_end / 4.0 {
        if eps >= floor {
            grid.push(eps);
        }
        eps *= 2.0;
    }
    grid
}

fn sample_indices(rng: &mut ChaCha8Rng, count: usize, steps: usize) -> Vec<usize> {
    (0..count).map(|_| rng.gen_range(0..=steps)).collect()
}

/// Dry persistence: a parcel strictly dry by margin eps keeps its
/// theta-hat and never rises for a time window `eps / (2 sup |dt Theta|)`.
pub fn check_dry_persistence(
    dynamics: &Dynamics,
    traj: &Trajectory,
    cfg: &VerifyConfig,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("dry_persistence");
    let sup_dt = traj.bounds.sup_dt_theta;
    // the window argument needs eps >= 2 sup|dt Theta| dt to absorb the
    // one-step lookahead in the wet test
    let eps_grid = epsilon_grid(traj, 2.0 * sup_dt * traj.dt);
    report.constant("epsilon_count", eps_grid.len() as f64);
    if eps_grid.is_empty() {
        report.notes.push("no admissible epsilon at this resolution".into());
        return Ok(report);
    }
    let paths = lagrangian_paths(traj);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0d5e);
    let mut windows_checked = 0usize;
    for path in &paths {
        let bases = sample_indices(&mut rng, cfg.base_times_per_label, traj.steps());
        for &k in &bases {
            let t_k = traj.times[k];
            let cap = dynamics.theta_cap(path.s, path.positions[k], t_k)?;
            let margin = path.theta_hat[k] - cap;
            for &eps in &eps_grid {
                if margin <= eps {
                    continue;
                }
                let window = if sup_dt > 0.0 {
                    eps / (2.0 * sup_dt)
                } else {
                    traj.t_end
                };
                windows_checked += 1;
                let mut l = k + 1;
                while l <= traj.steps() && traj.times[l] - t_k <= window * (1.0 + 1e-12) {
                    if (path.theta_hat[l] - path.theta_hat[k]).abs() > 1e-12 {
                        report.fail(
                            Some(path.label),
                            Some(t_k),
                            Some(l),
                            path.theta_hat[l] - path.theta_hat[k],
                            format!(
                                "theta_hat changed inside the dry window of label {} (t = {t_k}, eps = {eps})",
                                path.label
                            ),
                        );
                    }
                    if path.positions[l] > path.positions[k] + 1e-15 {
                        report.fail(
                            Some(path.label),
                            Some(t_k),
                            Some(l),
                            path.positions[l] - path.positions[k],
                            format!(
                                "parcel {} rose inside the dry window (t = {t_k}, eps = {eps})",
                                path.label
                            ),
                        );
                    }
                    l += 1;
                }
            }
        }
    }
    report.constant("windows_checked", windows_checked as f64);
    Ok(report)
}

/// Increment formula: over sampled (label, t, eps), the defect
/// `|theta_hat(t+eps) - theta_hat(t-eps) - (Theta at t+eps - Theta at t-eps)^+|`
/// normalized by `(eps + dt)`. The max ratio is the measured constant; an
/// optional cap turns it into a hard bound.
pub fn check_increment_formula(
    dynamics: &Dynamics,
    traj: &Trajectory,
    cfg: &VerifyConfig,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("increment_formula");
    let eps_grid = epsilon_grid(traj, 0.0);
    let paths = lagrangian_paths(traj);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x14c4);
    let mut max_ratio: f64 = 0.0;
    let mut samples = 0usize;
    for path in &paths {
        for _ in 0..cfg.base_times_per_label {
            let t = rng.gen_range(0.0..traj.t_end);
            for &eps in &eps_grid {
                if t - eps < 0.0 || t + eps >= traj.t_end {
                    continue;
                }
                let ka = traj.index_at(t - eps);
                let kb = traj.index_at(t + eps);
                let cap_a = dynamics.theta_cap(path.s, path.positions[ka], t - eps)?;
                let cap_b = dynamics.theta_cap(path.s, path.positions[kb], t + eps)?;
                let defect = (path.theta_hat[kb] - path.theta_hat[ka]
                    - (cap_b - cap_a).max(0.0))
                .abs();
                let ratio = defect / (eps + traj.dt);
                samples += 1;
                if ratio > max_ratio {
                    max_ratio = ratio;
                    report.worst = Some(WorstCase {
                        label: Some(path.label),
                        time: Some(t),
                        stage: None,
                        measure: ratio,
                    });
                }
            }
        }
    }
    report.constant("c4_hat", max_ratio);
    report.constant("samples", samples as f64);
    if let Some(cap) = cfg.c4_cap {
        report.tolerance("c4_cap", cap);
        if max_ratio > cap {
            report.pass = false;
            report
                .notes
                .push(format!("measured c4 {max_ratio} exceeds the configured cap {cap}"));
        }
    }
    Ok(report)
}

/// Square-root continuity: `||theta(t) - theta(s)||_L1 / sqrt(t - s + dt)`
/// and the flow-map analogue over sampled pairs; maxima are the measured
/// constants `c5_hat`, `c6_hat`.
pub fn check_continuity(traj: &Trajectory, cfg: &VerifyConfig) -> CheckReport {
    let mut report = CheckReport::new("continuity");
    let n = traj.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc025);
    let mut c5: f64 = 0.0;
    let mut c6: f64 = 0.0;
    for _ in 0..cfg.continuity_pairs {
        let a = rng.gen_range(0.0..traj.t_end);
        let b = rng.gen_range(0.0..traj.t_end);
        let (s, t) = if a <= b { (a, b) } else { (b, a) };
        let ks = traj.index_at(s);
        let kt = traj.index_at(t);
        let norm = ((t - s) + traj.dt).sqrt();
        let l1_theta: f64 = (0..n)
            .map(|p| (traj.states[kt].theta()[p] - traj.states[ks].theta()[p]).abs())
            .sum::<f64>()
            / n as f64;
        let l1_flow: f64 = (0..n)
            .map(|l| {
                (z_of(traj.cumulative[kt][l], n) - z_of(traj.cumulative[ks][l], n)).abs()
            })
            .sum::<f64>()
            / n as f64;
        c5 = c5.max(l1_theta / norm);
        c6 = c6.max(l1_flow / norm);
    }
    report.constant("c5_hat", c5);
    report.constant("c6_hat", c6);
    if let Some(cap) = cfg.c5_cap {
        report.tolerance("c5_cap", cap);
        if c5 > cap {
            report.pass = false;
            report.notes.push(format!("measured c5 {c5} exceeds cap {cap}"));
        }
    }
    if let Some(cap) = cfg.c6_cap {
        report.tolerance("c6_cap", cap);
        if c6 > cap {
            report.pass = false;
            report.notes.push(format!("measured c6 {c6} exceeds cap {cap}"));
        }
    }
    report
}

/// One parcel's saturation history: the monotone Lagrangian temperature
/// `f`, the saturation deficit function `g(t) = s - Q^sat(f, gamma, t)`,
/// and the wet set of step boundaries where `f` and `g` meet.
///
/// Boundary values are taken one-sidedly: the left values at boundary `m`
/// read snapshot `m-1` at time `tau_m`, the right values snapshot `m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WetnessPath {
    pub label: usize,
    pub s: f64,
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub gamma: Vec<f64>,
    pub g_left: Vec<f64>,
    pub g_right: Vec<f64>,
    /// Membership of each boundary `m = 1..K` in the wet set E.
    pub wet: Vec<bool>,
    pub tol: f64,
}

/// Wet-set membership tolerance in q units: the solver tolerance plus the
/// one-step time decay, both scaled by the theta-to-q Lipschitz factor.
pub fn wet_measure_tolerance(dynamics: &Dynamics, dt: f64) -> f64 {
    (dynamics.solver.tolerance + dynamics.bounds.sup_dt_theta * dt)
        * (1.0 + dynamics.bounds.sup_dtheta_qsat)
}

pub fn wetness_path(
    dynamics: &Dynamics,
    traj: &Trajectory,
    path: &LagrangianPath,
    tol: f64,
) -> WetnessPath {
    let boundaries = traj.steps();
    let mut g_left = Vec::with_capacity(boundaries);
    let mut g_right = Vec::with_capacity(boundaries);
    let mut wet = Vec::with_capacity(boundaries);
    for m in 1..=boundaries {
        let tau = traj.times[m];
        let gl = path.s
            - dynamics
                .model
                .eval_unchecked(path.theta_hat[m - 1], path.positions[m - 1], tau);
        let gr = path.s
            - dynamics
                .model
                .eval_unchecked(path.theta_hat[m], path.positions[m], tau);
        wet.push((path.theta_hat[m - 1] - gl).abs() <= tol);
        g_left.push(gl);
        g_right.push(gr);
    }
    WetnessPath {
        label: path.label,
        s: path.s,
        times: traj.times.clone(),
        f: path.theta_hat.clone(),
        gamma: path.positions.clone(),
        g_left,
        g_right,
        wet,
        tol,
    }
}

/// Concentration of the increment measure of `f` on the wet set:
/// (a) every increment of `f` happens at a wet boundary; (b) at each jump,
/// `df = (dg)^+` within tol; (c) away from the wet set `f` is constant and
/// `g` can only rise at the time-decay rate; (d) the total rise of `f` over
/// the wet set matches the positive boundary variation of `g` there, with a
/// per-event tolerance.
pub fn check_wet_measure(
    dynamics: &Dynamics,
    traj: &Trajectory,
    path: &WetnessPath,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("wet_measure");
    let tol = path.tol;
    report.tolerance("wet_membership", tol);
    let sup_dt_q = dynamics.bounds.sup_dt_qsat;
    if path.f.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::Domain(format!(
            "wet-measure check needs a monotone f (label {})",
            path.label
        )));
    }
    let mut sum_df_wet = 0.0;
    let mut sum_dg_plus_wet = 0.0;
    let mut wet_boundaries = 0usize;
    let mut jumps = 0usize;
    for m in 1..path.f.len() {
        let b = m - 1; // boundary record index
        let df = path.f[m] - path.f[m - 1];
        let dg = path.g_right[b] - path.g_left[b];
        let in_wet = path.wet[b];
        // the constraint f >= g holds with the saturation slack
        if path.f[m] < path.g_right[b] - dynamics.tol_sat() {
            report.fail(
                Some(path.label),
                Some(path.times[m]),
                None,
                path.g_right[b] - path.f[m],
                format!("f fell below g at t = {}", path.times[m]),
            );
        }
        if df > 0.0 {
            jumps += 1;
            if !in_wet {
                report.fail(
                    Some(path.label),
                    Some(path.times[m]),
                    None,
                    (path.f[m - 1] - path.g_left[b]).abs(),
                    format!(
                        "f increased by {df:.3e} outside the wet set at t = {}",
                        path.times[m]
                    ),
                );
            }
            let defect = (df - dg.max(0.0)).abs();
            if defect > tol {
                report.fail(
                    Some(path.label),
                    Some(path.times[m]),
                    None,
                    defect,
                    format!(
                        "jump increment defect {defect:.3e} exceeds tol at t = {}",
                        path.times[m]
                    ),
                );
            }
        } else if dg > 1e-10 {
            // with f flat the boundary jump of g comes from a position
            // move, which can only lower g
            report.fail(
                Some(path.label),
                Some(path.times[m]),
                None,
                dg,
                format!("g rose by {dg:.3e} across a liftless boundary at t = {}", path.times[m]),
            );
        }
        // within the interval nothing moves, so g rises at most at the
        // time-decay rate (the dry-interval hypothesis surrogate)
        if m >= 2 {
            let rise = path.g_left[b] - path.g_right[b - 1];
            if rise > sup_dt_q * traj.dt + 1e-10 {
                report.fail(
                    Some(path.label),
                    Some(path.times[m]),
                    None,
                    rise,
                    format!("g rose faster than time decay before t = {}", path.times[m]),
                );
            }
        }
        if in_wet {
            wet_boundaries += 1;
            sum_df_wet += df;
            sum_dg_plus_wet += dg.max(0.0);
        }
    }
    // aggregate balance over the wet set, one tolerance per wet event
    let budget = wet_boundaries.max(jumps) as f64 * tol;
    let defect = (sum_df_wet - sum_dg_plus_wet).abs();
    report.constant("wet_boundaries", wet_boundaries as f64);
    report.constant("jumps", jumps as f64);
    report.constant("aggregate_defect", defect);
    report.tolerance("aggregate", budget);
    if defect > budget {
        report.fail(
            Some(path.label),
            None,
            None,
            defect,
            format!("aggregate wet-set balance off by {defect:.3e} (budget {budget:.3e})"),
        );
    }
    Ok(report)
}

/// Wet-measure check over every label path; the report aggregates the
/// worst case.
pub fn check_wet_measure_all(dynamics: &Dynamics, traj: &Trajectory) -> Result<CheckReport> {
    let tol = wet_measure_tolerance(dynamics, traj.dt);
    let mut merged = CheckReport::new("wet_measure");
    merged.tolerance("wet_membership", tol);
    let mut max_defect: f64 = 0.0;
    for path in lagrangian_paths(traj) {
        let wpath = wetness_path(dynamics, traj, &path, tol);
        let sub = check_wet_measure(dynamics, traj, &wpath)?;
        if let Some(d) = sub.constants.get("aggregate_defect") {
            max_defect = max_defect.max(*d);
        }
        if !sub.pass {
            merged.pass = false;
            if merged.worst.is_none()
                || sub.worst.as_ref().map_or(0.0, |w| w.measure.abs())
                    > merged.worst.as_ref().map_or(0.0, |w| w.measure.abs())
            {
                merged.worst = sub.worst.clone();
            }
            for note in sub.notes {
                if merged.notes.len() < 16 {
                    merged.notes.push(note);
                }
            }
        }
    }
    merged.constant("max_aggregate_defect", max_defect);
    Ok(merged)
}

/// Certified energy minimality of every snapshot (exhaustive for n <= 8,
/// monotonicity otherwise, which is equivalent for sorted profiles).
pub fn check_energy(traj: &Trajectory) -> CheckReport {
    let mut report = CheckReport::new("energy_minimality");
    let mut max_energy = f64::NEG_INFINITY;
    for (k, state) in traj.states.iter().enumerate() {
        max_energy = max_energy.max(energy(state.theta()));
        match minimality_certificate(state.theta()) {
            Some(true) => {}
            Some(false) => {
                report.fail(
                    None,
                    Some(traj.times[k]),
                    None,
                    energy(state.theta()),
                    format!("snapshot at t = {} is not energy minimal", traj.times[k]),
                );
            }
            None => {
                if state.theta().windows(2).any(|w| w[0] > w[1]) {
                    report.fail(
                        None,
                        Some(traj.times[k]),
                        None,
                        0.0,
                        format!("snapshot at t = {} is not sorted", traj.times[k]),
                    );
                } else if report.notes.is_empty() {
                    report
                        .notes
                        .push("n > 8: certified via monotonicity, not enumeration".into());
                }
            }
        }
    }
    report.constant("max_energy", max_energy);
    report
}

/// The full battery in a fixed order. The jump-structure check is skipped
/// (with a note) when the trajectory carries no cascade records.
pub fn run_all(
    dynamics: &Dynamics,
    traj: &Trajectory,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckReport>> {
    let mut reports = vec![check_step_invariants(dynamics, traj)];
    if traj.reports.len() == traj.steps() {
        reports.push(check_jump_structure(traj)?);
    } else {
        let mut skipped = CheckReport::new("jump_structure");
        skipped
            .notes
            .push("skipped: trajectory has no cascade records".into());
        reports.push(skipped);
    }
    reports.push(check_overtake(traj));
    reports.push(check_tv(traj));
    reports.push(check_dry_persistence(dynamics, traj, cfg)?);
    reports.push(check_increment_formula(dynamics, traj, cfg)?);
    reports.push(check_continuity(traj, cfg));
    reports.push(check_wet_measure_all(dynamics, traj)?);
    reports.push(check_energy(traj));
    Ok(reports)
}
