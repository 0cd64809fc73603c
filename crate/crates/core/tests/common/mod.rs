//! Shared test support: a deliberately slow, index-literal reference
//! implementation of the rearrangement cascade (the independent oracle the
//! production path is compared against), plus random admissible data
//! generators for the property sweeps.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moist_column::rearrange::{z_of, ColumnState};
use moist_column::saturation::{
    compute_bounds, max_timestep, theta_inverse, DomainBox, SaturationModel, SolverConfig,
    ThetaBounds,
};

/// Literal transcription of one time step of the cascade, carrying the
/// within-step index maps exactly as the construction states them:
/// position-indexed theta, the inverse map from positions to start-of-step
/// indices, fresh inverse solves everywhere, no shortcuts.
///
/// Returns (new theta, new q, beta0) with beta0 mapping start-of-step
/// positions to end-of-step positions.
pub fn reference_step(
    model: &SaturationModel,
    solver: &SolverConfig,
    theta: &[f64],
    theta_m_by_start: &[f64],
    t_next: f64,
) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = theta.len();
    let cap = |w: f64, pos: usize| theta_inverse(model, w, z_of(pos, n), t_next, solver).unwrap();
    let tol = solver.tolerance;
    let mut theta_cur = theta.to_vec();
    let mut beta_inv: Vec<usize> = (0..n).collect(); // position -> start index

    for k in (0..n).rev() {
        // wet set
        let mut wet = vec![false; n];
        for j in 0..n {
            wet[j] = theta_cur[j] < cap(theta_m_by_start[beta_inv[j]], j) - tol;
        }
        // eligible set
        let mut eligible: Vec<usize> = Vec::new();
        for j0 in 0..n {
            if !wet[j0] {
                continue;
            }
            if j0 >= k {
                eligible.push(j0);
                continue;
            }
            let s0 = theta_m_by_start[beta_inv[j0]];
            let mut beats_all = true;
            for j in (j0 + 1)..=k {
                let ok = if wet[j] {
                    s0 > theta_m_by_start[beta_inv[j]]
                } else {
                    theta_cur[j] < cap(s0, j)
                };
                if !ok {
                    beats_all = false;
                    break;
                }
            }
            if beats_all {
                eligible.push(j0);
            }
        }
        if eligible.is_empty() {
            continue;
        }
        // the jumper: largest theta^M, ties to the largest position
        let mut jstar = eligible[0];
        for &j in &eligible[1..] {
            if theta_m_by_start[beta_inv[j]] >= theta_m_by_start[beta_inv[jstar]] {
                jstar = j;
            }
        }
        assert!(jstar <= k, "reference: eligible jumper above the stage");
        // sigma_k: jstar -> k, (jstar, k] down by one, else identity
        let mut new_theta = theta_cur.clone();
        let mut new_beta_inv = beta_inv.clone();
        for j in jstar..k {
            new_theta[j] = theta_cur[j + 1];
            new_beta_inv[j] = beta_inv[j + 1];
        }
        new_theta[k] = cap(theta_m_by_start[beta_inv[jstar]], k);
        new_beta_inv[k] = beta_inv[jstar];
        theta_cur = new_theta;
        beta_inv = new_beta_inv;
    }

    let q: Vec<f64> = (0..n)
        .map(|j| theta_m_by_start[beta_inv[j]] - theta_cur[j])
        .collect();
    let mut beta0 = vec![0usize; n];
    for (pos, &start) in beta_inv.iter().enumerate() {
        beta0[start] = pos;
    }
    (theta_cur, q, beta0)
}

/// Multi-step reference run; returns per-snapshot theta arrays and the
/// cumulative label -> position maps.
pub fn reference_run(
    model: &SaturationModel,
    solver: &SolverConfig,
    theta0: &[f64],
    q0: &[f64],
    t_end: f64,
    dt: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let n = theta0.len();
    let theta_m_by_label: Vec<f64> = theta0.iter().zip(q0).map(|(a, b)| a + b).collect();
    let mut alphas: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut thetas = vec![theta0.to_vec()];
    let mut qs = vec![q0.to_vec()];
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    for k in 0..steps {
        let t_next = (k + 1) as f64 * dt;
        let alpha = alphas.last().unwrap();
        // theta^M indexed by start-of-step position = label at that position
        let mut theta_m_by_start = vec![0.0; n];
        for label in 0..n {
            theta_m_by_start[alpha[label]] = theta_m_by_label[label];
        }
        let (theta, q, beta0) =
            reference_step(model, solver, thetas.last().unwrap(), &theta_m_by_start, t_next);
        let new_alpha: Vec<usize> = alpha.iter().map(|&p| beta0[p]).collect();
        thetas.push(theta);
        qs.push(q);
        alphas.push(new_alpha);
    }
    (thetas, qs, alphas)
}

pub struct RandomCase {
    pub model: SaturationModel,
    pub bounds: ThetaBounds,
    pub solver: SolverConfig,
    pub state: ColumnState,
    pub t_end: f64,
    pub dt: f64,
}

/// Random linear model and admissible initial data. A fraction of parcels
/// start exactly saturated so that time decay produces real dynamics.
pub fn random_case(seed: u64, n_range: std::ops::RangeInclusive<usize>, t_end: f64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(n_range);
    let a = rng.gen_range(0.1..=2.0);
    let b = rng.gen_range(0.5..=2.0);
    let c = rng.gen_range(0.0..=0.5);
    let qstar = rng.gen_range(0.5..=1.5);
    let model = SaturationModel::linear(qstar, a, b, c).unwrap();
    let solver = SolverConfig::default();

    let mut theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..=1.0)).collect();
    theta.sort_by(|x, y| x.total_cmp(y));
    let q: Vec<f64> = theta
        .iter()
        .enumerate()
        .map(|(p, &th)| {
            let qs = model.eval(th, z_of(p, n), 0.0).unwrap();
            if rng.gen_bool(0.4) {
                qs // exactly saturated
            } else {
                qs - rng.gen_range(0.0..=1.0)
            }
        })
        .collect();
    let state = ColumnState::new(theta, q, 0.0).unwrap();
    let w_max = state
        .theta_m()
        .iter()
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let bounds = compute_bounds(&model, DomainBox::new(w_max, t_end).unwrap(), 16, &solver).unwrap();
    let dt_max = max_timestep(&bounds, n);
    let steps = (t_end / dt_max).ceil().max(1.0);
    let dt = t_end / steps;
    RandomCase {
        model,
        bounds,
        solver,
        state,
        t_end,
        dt,
    }
}

pub fn worked_two_parcel() -> (SaturationModel, ColumnState) {
    let model = SaturationModel::linear(1.0, 0.5, 1.0, 0.2).unwrap();
    let state = ColumnState::new(vec![0.0, 0.1], vec![0.5, 0.0], 0.0).unwrap();
    (model, state)
}

pub fn worked_three_parcel() -> (SaturationModel, ColumnState) {
    let model = SaturationModel::linear(1.0, 0.5, 1.0, 0.2).unwrap();
    let state = ColumnState::new(
        vec![0.0, 0.05, 0.1],
        vec![2.0 / 3.0, 0.358333333333333333, 0.0],
        0.0,
    )
    .unwrap();
    (model, state)
}

pub fn bounds_for(
    model: &SaturationModel,
    state: &ColumnState,
    t_end: f64,
    solver: &SolverConfig,
) -> ThetaBounds {
    let w_max = state
        .theta_m()
        .iter()
        .fold(1.0f64, |m, v| m.max(v.abs()));
    compute_bounds(model, DomainBox::new(w_max, t_end).unwrap(), 16, solver).unwrap()
}
