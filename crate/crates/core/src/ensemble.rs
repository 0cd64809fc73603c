//! Probabilistic initial data at finite resolution: weighted temperature
//! profiles with per-cell atom distributions of the conserved invariant,
//! exhaustive or sampled enumeration of the random moisture assignments,
//! one deterministic run per assignment, and empirical time marginals with
//! exact 1-D transport distances between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rearrange::{cell_of, z_of, ColumnState, Dynamics};
use crate::simulate::{run, Trajectory};
use crate::saturation::ThetaBounds;

/// One atom of the per-cell conditional law of `theta^M`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// One weighted temperature profile with its per-cell atom lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleProfile {
    pub weight: f64,
    /// n nondecreasing values, theta at `z_i`.
    pub theta: Vec<f64>,
    /// atoms[cell] for each of the n cells; probabilities sum to 1 per cell.
    pub atoms: Vec<Vec<Atom>>,
}

/// Discretized admissible initial data: a finite mixture of profiles, each
/// carrying per-cell atom distributions of `theta^M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialEnsemble {
    pub n: usize,
    /// Half-width K of the invariant's support before shifting.
    pub k_half: f64,
    /// The shift constant C in `alpha_ij = w_j - C/n`; zero for data built
    /// from exact atoms (deterministic conditionals).
    pub shift_c: f64,
    pub profiles: Vec<EnsembleProfile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EnsembleMode {
    Exhaustive,
    MonteCarlo { seed: u64, sample_count: usize },
}

/// One member run: its mixture weight, the atom assignment that produced
/// it, and the trajectory.
#[derive(Debug)]
pub struct MemberRun {
    pub weight: f64,
    pub profile: usize,
    pub sigma: Vec<usize>,
    pub trajectory: Trajectory,
}

#[derive(Debug)]
pub struct EnsembleResult {
    pub runs: Vec<MemberRun>,
    pub mode: EnsembleMode,
    pub t_end: f64,
    pub dt: f64,
}

pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// Sample a nondecreasing profile at the cell heights `z_i = (i+1)/n`.
pub fn discretize_profile(theta: impl Fn(f64) -> f64, n: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = (0..n).map(|p| theta(z_of(p, n))).collect();
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain(
            "profile to discretize is not nondecreasing".into(),
        ));
    }
    Ok(values)
}

/// The shift constant: strictly above `2K + sup dz Theta / inf dw Theta`.
pub fn shift_constant(k_half: f64, bounds: &ThetaBounds) -> f64 {
    2.0 * k_half + bounds.sup_dz_theta / bounds.inf_dw_theta + 1.0
}

/// Conditional data for one profile, prior to gridding.
pub enum ConditionalData<'a> {
    /// Raw (s, z) samples; binned on the K-grid per cell.
    Samples(&'a [(f64, f64)]),
    /// Per-cell histograms: `hist[cell]` lists (bin index 1..=n, mass).
    Histograms(&'a [Vec<(usize, f64)>]),
}

/// Grid the conditional law of `theta^M`: mass in the j-th value bin of
/// cell i becomes an atom at `w_j - C/n` with probability proportional to
/// the mass. The shift keeps the discretized data admissible whenever the
/// source data was; admissibility against `theta` is verified atom-wise.
pub fn discretize_conditional(
    data: ConditionalData,
    theta: &[f64],
    n: usize,
    k_half: f64,
    bounds: &ThetaBounds,
    dynamics: &Dynamics,
) -> Result<Vec<Vec<Atom>>> {
    if !(k_half > 0.0) {
        return Err(Error::Config("support half-width K must be positive".into()));
    }
    let shift_c = shift_constant(k_half, bounds);
    let mut mass = vec![vec![0.0f64; n]; n]; // [cell][bin]
    match data {
        ConditionalData::Samples(samples) => {
            for &(s, z) in samples {
                if s.abs() > k_half {
                    return Err(Error::Domain(format!(
                        "sample s = {s} outside the support [-{k_half}, {k_half}]"
                    )));
                }
                if !(0.0..=1.0).contains(&z) {
                    return Err(Error::Domain(format!("sample z = {z} outside [0, 1]")));
                }
                let cell = cell_of(z, n);
                // K_j = [-K + (j-1) 2K/n, -K + j 2K/n], 1-based j
                let rel = (s + k_half) / (2.0 * k_half) * n as f64;
                let bin = (rel.ceil() as usize).clamp(1, n) - 1;
                mass[cell][bin] += 1.0;
            }
        }
        ConditionalData::Histograms(hists) => {
            if hists.len() != n {
                return Err(Error::Config(format!(
                    "need one histogram per cell: got {} for n = {n}",
                    hists.len()
                )));
            }
            for (cell, hist) in hists.iter().enumerate() {
                for &(bin, m) in hist {
                    if bin == 0 || bin > n {
                        return Err(Error::Config(format!(
                            "bin index {bin} outside 1..={n} in cell {}",
                            cell + 1
                        )));
                    }
                    if !(m >= 0.0) {
                        return Err(Error::Config(format!("negative mass in cell {}", cell + 1)));
                    }
                    mass[cell][bin - 1] += m;
                }
            }
        }
    }
    let mut atoms = Vec::with_capacity(n);
    for (cell, bins) in mass.iter().enumerate() {
        let total: f64 = bins.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain(format!(
                "cell {} carries no mass; every cell needs a conditional law",
                cell + 1
            )));
        }
        let mut cell_atoms = Vec::new();
        for (bin0, &m) in bins.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            let w_j = -k_half + (bin0 + 1) as f64 * 2.0 * k_half / n as f64;
            let value = w_j - shift_c / n as f64;
            let cap = dynamics.theta_cap(value, z_of(cell, n), 0.0)?;
            if theta[cell] < cap - dynamics.solver.tolerance {
                return Err(Error::Domain(format!(
                    "shifted atom {value} at cell {} violates admissibility: theta = {} < Theta = {cap}",
                    cell + 1,
                    theta[cell]
                )));
            }
            cell_atoms.push(Atom {
                value,
                prob: m / total,
            });
        }
        atoms.push(cell_atoms);
    }
    Ok(atoms)
}

impl InitialEnsemble {
    /// Build from exact per-cell atoms (no binning, no shift); the Dirac
    /// route that reduces bit-for-bit to a deterministic run.
    pub fn from_atoms(
        n: usize,
        k_half: f64,
        profiles: Vec<EnsembleProfile>,
    ) -> Result<Self> {
        let ens = InitialEnsemble {
            n,
            k_half,
            shift_c: 0.0,
            profiles,
        };
        ens.validate_structure()?;
        Ok(ens)
    }

    fn validate_structure(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::Config("ensemble needs at least one profile".into()));
        }
        let wsum: f64 = self.profiles.iter().map(|p| p.weight).sum();
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "profile weights must sum to 1, got {wsum}"
            )));
        }
        for (m, p) in self.profiles.iter().enumerate() {
            if !(p.weight > 0.0) {
                return Err(Error::Config(format!("profile {m} has weight {}", p.weight)));
            }
            if p.theta.len() != self.n || p.atoms.len() != self.n {
                return Err(Error::Config(format!(
                    "profile {m} arrays do not match n = {}",
                    self.n
                )));
            }
            if p.theta.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Domain(format!("profile {m} is not nondecreasing")));
            }
            for (cell, atoms) in p.atoms.iter().enumerate() {
                if atoms.is_empty() {
                    return Err(Error::Config(format!(
                        "profile {m}, cell {} has no atoms",
                        cell + 1
                    )));
                }
                let psum: f64 = atoms.iter().map(|a| a.prob).sum();
                if (psum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "profile {m}, cell {} probabilities sum to {psum}",
                        cell + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest |theta^M| over all atoms; the ensemble's invariant bound.
    pub fn w_max(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.atoms.iter())
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, a| m.max(a.value.abs()))
    }

    /// Report-style admissibility verdict, clause by clause.
    pub fn check_admissibility(&self, dynamics: &Dynamics) -> AdmissibilityReport {
        let mut report = AdmissibilityReport::default();
        report.weights_sum_to_one = (self.profiles.iter().map(|p| p.weight).sum::<f64>() - 1.0)
            .abs()
            <= 1e-9;
        report.profiles_monotone = self
            .profiles
            .iter()
            .all(|p| p.theta.windows(2).all(|w| w[0] <= w[1]));
        let support = self.k_half + 1.0;
        report.support_compact = true;
        report.constraint_atomwise = true;
        report.cell_probabilities_normalized = true;
        for p in &self.profiles {
            for (cell, atoms) in p.atoms.iter().enumerate() {
                let psum: f64 = atoms.iter().map(|a| a.prob).sum();
                if (psum - 1.0).abs() > 1e-9 {
                    report.cell_probabilities_normalized = false;
                }
                for a in atoms {
                    if a.prob <= 0.0 {
                        continue;
                    }
                    if a.value.abs() > support + 1e-12 {
                        report.support_compact = false;
                    }
                    match dynamics.theta_cap(a.value, z_of(cell, self.n), 0.0) {
                        Ok(cap) => {
                            if p.theta[cell] < cap - dynamics.solver.tolerance {
                                report.constraint_atomwise = false;
                            }
                        }
                        Err(_) => report.constraint_atomwise = false,
                    }
                }
            }
        }
        report.shift_constant_valid = self.shift_c == 0.0
            || self.shift_c
                > 2.0 * self.k_half
                    + dynamics.bounds.sup_dz_theta / dynamics.bounds.inf_dw_theta;
        report
    }

    /// Initial column for one (profile, assignment) pair.
    pub fn member_state(&self, profile: usize, sigma: &[usize]) -> Result<ColumnState> {
        let p = &self.profiles[profile];
        let mut q = Vec::with_capacity(self.n);
        for (cell, &choice) in sigma.iter().enumerate() {
            let atom = p.atoms[cell]
                .get(choice)
                .ok_or_else(|| Error::Internal(format!("atom index {choice} out of range")))?;
            q.push(atom.value - p.theta[cell]);
        }
        ColumnState::new(p.theta.clone(), q, 0.0)
    }
}

/// Per-clause admissibility verdict (report-only).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub weights_sum_to_one: bool,
    pub profiles_monotone: bool,
    pub support_compact: bool,
    pub constraint_atomwise: bool,
    pub cell_probabilities_normalized: bool,
    pub shift_constant_valid: bool,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.weights_sum_to_one
            && self.profiles_monotone
            && self.support_compact
            && self.constraint_atomwise
            && self.cell_probabilities_normalized
            && self.shift_constant_valid
    }
}

/// All atom assignments for one profile with their product probabilities,
/// in lexicographic order. Errors when the product count exceeds the cap.
pub fn enumerate_sigmas(
    ens: &InitialEnsemble,
    profile: usize,
    cap: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let p = &ens.profiles[profile];
    let mut count: usize = 1;
    for atoms in &p.atoms {
        count = count.saturating_mul(atoms.len());
        if count > cap {
            return Err(Error::Config(format!(
                "assignment count exceeds the enumeration cap {cap}; use Monte Carlo sampling"
            )));
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut sigma = vec![0usize; ens.n];
    loop {
        let prob: f64 = sigma
            .iter()
            .enumerate()
            .map(|(cell, &j)| p.atoms[cell][j].prob)
            .product();
        out.push((sigma.clone(), prob));
        // lexicographic increment with the last cell fastest
        let mut cell = ens.n;
        loop {
            if cell == 0 {
                return Ok(out);
            }
            cell -= 1;
            sigma[cell] += 1;
            if sigma[cell] < p.atoms[cell].len() {
                break;
            }
            sigma[cell] = 0;
        }
    }
}

/// Independent per-cell draws, reproducible from the seed.
pub fn sample_sigmas(
    ens: &InitialEnsemble,
    profile: usize,
    count: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let p = &ens.profiles[profile];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(profile as u64 + 1);
    (0..count)
        .map(|_| {
            p.atoms
                .iter()
                .map(|atoms| {
                    if atoms.len() == 1 {
                        return 0;
                    }
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    for (j, a) in atoms.iter().enumerate() {
                        acc += a.prob;
                        if u < acc {
                            return j;
                        }
                    }
                    atoms.len() - 1
                })
                .collect()
        })
        .collect()
}

/// Run every member of the ensemble. Members execute on the rayon pool and
/// are merged in (profile, assignment) order, so the output is independent
/// of scheduling. Monte-Carlo draws are stratified by profile weight.
pub fn run_ensemble(
    dynamics: &Dynamics,
    ens: &InitialEnsemble,
    t_end: f64,
    dt: f64,
    mode: EnsembleMode,
    enumeration_cap: usize,
    validate: bool,
) -> Result<EnsembleResult> {
    let mut jobs: Vec<(usize, Vec<usize>, f64)> = Vec::new();
    match &mode {
        EnsembleMode::Exhaustive => {
            for m in 0..ens.profiles.len() {
                for (sigma, prob) in enumerate_sigmas(ens, m, enumeration_cap)? {
                    jobs.push((m, sigma, ens.profiles[m].weight * prob));
                }
            }
        }
        EnsembleMode::MonteCarlo { seed, sample_count } => {
            for (m, p) in ens.profiles.iter().enumerate() {
                let count = ((*sample_count as f64) * p.weight).round().max(1.0) as usize;
                let weight = p.weight / count as f64;
                for sigma in sample_sigmas(ens, m, count, *seed) {
                    jobs.push((m, sigma, weight));
                }
            }
        }
    }
    let runs: Result<Vec<MemberRun>> = jobs
        .into_par_iter()
        .map(|(profile, sigma, weight)| {
            let initial = ens.member_state(profile, &sigma)?;
            let trajectory =
                run(dynamics, &initial, t_end, dt, validate).map_err(|e| Error::Member {
                    profile,
                    sigma: sigma.clone(),
                    source: Box::new(e),
                })?;
            Ok(MemberRun {
                weight,
                profile,
                sigma,
                trajectory,
            })
        })
        .collect();
    Ok(EnsembleResult {
        runs: runs?,
        mode,
        t_end,
        dt,
    })
}

/// Per-label record inside one marginal sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LabelRecord {
    pub label: usize,
    /// conserved theta^M
    pub s: f64,
    /// start height of the parcel
    pub z_start: f64,
    /// current height F_t(z_start)
    pub z_now: f64,
    /// theta at the parcel's current position
    pub theta_now: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalSample {
    pub weight: f64,
    pub theta: Vec<f64>,
    pub labels: Vec<LabelRecord>,
}

/// The empirical time-t marginal of the ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    pub t: f64,
    pub samples: Vec<MarginalSample>,
}

pub fn marginal(res: &EnsembleResult, t: f64) -> Result<EmpiricalMarginal> {
    if t < 0.0 || t >= res.t_end {
        return Err(Error::Domain(format!(
            "marginal requested at t = {t} outside [0, {})",
            res.t_end
        )));
    }
    let samples = res
        .runs
        .iter()
        .map(|r| {
            let traj = &r.trajectory;
            let state = traj.state_at(t);
            let n = traj.n();
            let labels = (0..n)
                .map(|label| {
                    let p = state.pos_of(label);
                    LabelRecord {
                        label,
                        s: state.theta_m()[label],
                        z_start: z_of(label, n),
                        z_now: z_of(p, n),
                        theta_now: state.theta()[p],
                    }
                })
                .collect();
            MarginalSample {
                weight: r.weight,
                theta: state.theta().to_vec(),
                labels,
            }
        })
        .collect();
    Ok(EmpiricalMarginal { t, samples })
}

/// Scalar observables whose pushforward laws are compared.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Observable {
    /// theta at the cell containing z.
    ThetaAt(f64),
    /// theta^M of the parcel currently at the cell containing z.
    ThetaMAt(f64),
    /// current position of the parcel that started at the cell containing z.
    FlowAt(f64),
}

fn push_forward(marg: &EmpiricalMarginal, obs: Observable) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(marg.samples.len());
    for s in &marg.samples {
        let n = s.theta.len();
        let v = match obs {
            Observable::ThetaAt(z) => s.theta[cell_of(z, n)],
            Observable::ThetaMAt(z) => {
                let cell = cell_of(z, n);
                let z_cell = z_of(cell, n);
                s.labels
                    .iter()
                    .find(|r| (r.z_now - z_cell).abs() < 0.5 / n as f64)
                    .map(|r| r.s)
                    .ok_or_else(|| Error::Internal("no parcel at the requested cell".into()))?
            }
            Observable::FlowAt(z) => {
                let cell = cell_of(z, n);
                s.labels[cell].z_now
            }
        };
        out.push((v, s.weight));
    }
    Ok(out)
}

/// Exact 1-D Wasserstein-1 distance between two weighted atom lists, via
/// the integral of the CDF difference.
pub fn wasserstein1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let norm_a: f64 = a.iter().map(|&(_, w)| w).sum();
    let norm_b: f64 = b.iter().map(|&(_, w)| w).sum();
    let mut events: Vec<(f64, f64, f64)> = a
        .iter()
        .map(|&(v, w)| (v, w / norm_a, 0.0))
        .chain(b.iter().map(|&(v, w)| (v, 0.0, w / norm_b)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut dist = 0.0f64;
    let mut cdf_a = 0.0f64;
    let mut cdf_b = 0.0f64;
    for i in 0..events.len() {
        if i > 0 {
            dist += (cdf_a - cdf_b).abs() * (events[i].0 - events[i - 1].0);
        }
        cdf_a += events[i].1;
        cdf_b += events[i].2;
    }
    dist
}

/// W1 distance between the pushforwards of two marginals under a scalar
/// observable.
pub fn marginal_distance(
    a: &EmpiricalMarginal,
    b: &EmpiricalMarginal,
    obs: Observable,
) -> Result<f64> {
    Ok(wasserstein1(
        &push_forward(a, obs)?,
        &push_forward(b, obs)?,
    ))
}

/// Pairwise L2 distances between the theta profiles of two marginals
/// (profiles compared as piecewise-constant functions on [0,1]).
pub fn profile_l2_matrix(a: &EmpiricalMarginal, b: &EmpiricalMarginal) -> Vec<Vec<f64>> {
    a.samples
        .iter()
        .map(|sa| {
            b.samples
                .iter()
                .map(|sb| {
                    let n = sa.theta.len().max(sb.theta.len());
                    let mut acc = 0.0;
                    for p in 0..n {
                        let va = profile_value(&sa.theta, p, n);
                        let vb = profile_value(&sb.theta, p, n);
                        acc += (va - vb) * (va - vb) / n as f64;
                    }
                    acc.sqrt()
                })
                .collect()
        })
        .collect()
}

fn profile_value(theta: &[f64], p: usize, n: usize) -> f64 {
    // evaluate a coarser piecewise-constant profile on the finer grid
    let z = z_of(p, n) - 0.5 / n as f64;
    theta[cell_of(z, theta.len())]
}

/// Exact L1 distance between two monotone piecewise-constant profiles on
/// [0,1], via the merged breakpoint grid.
pub fn profile_l1_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let mut dist = 0.0;
    let mut z = 0.0;
    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < na && ib < nb {
        let za = (ia + 1) as f64 / na as f64;
        let zb = (ib + 1) as f64 / nb as f64;
        let z_next = za.min(zb);
        dist += (a[ia] - b[ib]).abs() * (z_next - z);
        z = z_next;
        if za <= z_next + 1e-15 {
            ia += 1;
        }
        if zb <= z_next + 1e-15 {
            ib += 1;
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saturation::{compute_bounds, DomainBox, SaturationModel, SolverConfig};

    fn setup() -> (SaturationModel, ThetaBounds) {
        let model = SaturationModel::linear(1.0, 0.5, 1.0, 0.2).unwrap();
        let bounds = compute_bounds(
            &model,
            DomainBox::new(4.0, 1.0).unwrap(),
            16,
            &SolverConfig::default(),
        )
        .unwrap();
        (model, bounds)
    }

    fn dirac_profile(theta: Vec<f64>, q: Vec<f64>) -> EnsembleProfile {
        let atoms = theta
            .iter()
            .zip(&q)
            .map(|(&th, &qv)| {
                vec![Atom {
                    value: th + qv,
                    prob: 1.0,
                }]
            })
            .collect();
        EnsembleProfile {
            weight: 1.0,
            theta,
            atoms,
        }
    }

    #[test]
    fn discretize_profile_examples() {
        assert_eq!(discretize_profile(|_| 0.0, 4).unwrap(), vec![0.0; 4]);
        let vals = discretize_profile(|z| z, 4).unwrap();
        assert_eq!(vals, vec![0.25, 0.5, 0.75, 1.0]);
        // an already-discrete profile evaluated at the same nodes is itself
        let again = discretize_profile(|z| vals[cell_of(z - 1e-12, 4)], 4).unwrap();
        assert_eq!(again, vals);
        assert!(discretize_profile(|z| -z, 4).is_err());
    }

    #[test]
    fn discretize_conditional_bin_arithmetic() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        // K = 1, n = 2: bins (-1, 0] and (0, 1], right endpoints 0 and 1.
        // shift C = 2K + b/(1) ... for this model sup_dz/inf_dw = b = 1,
        // so C = 2 + 1 + 1 = 4 and C/n = 2.
        assert_eq!(shift_constant(1.0, &bounds), 4.0);
        let theta = vec![1.0, 1.2];
        let hists = vec![vec![(1, 0.5), (2, 0.5)], vec![(2, 1.0)]];
        let atoms = discretize_conditional(
            ConditionalData::Histograms(&hists),
            &theta,
            2,
            1.0,
            &bounds,
            &dynamics,
        )
        .unwrap();
        assert_eq!(atoms[0].len(), 2);
        assert!((atoms[0][0].value - -2.0).abs() < 1e-15);
        assert!((atoms[0][1].value - -1.0).abs() < 1e-15);
        assert!((atoms[0][0].prob - 0.5).abs() < 1e-15);
        assert_eq!(atoms[1].len(), 1);
        assert!((atoms[1][0].value - -1.0).abs() < 1e-15);
    }

    #[test]
    fn discretize_conditional_rejects_empty_cell() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let hists = vec![vec![(1, 1.0)], vec![]];
        let err = discretize_conditional(
            ConditionalData::Histograms(&hists),
            &[0.0, 0.1],
            2,
            1.0,
            &bounds,
            &dynamics,
        );
        assert!(err.is_err());
    }

    #[test]
    fn enumerate_sigma_products() {
        let (_, _) = setup();
        let mk = |probs: Vec<Vec<f64>>| -> InitialEnsemble {
            let atoms = probs
                .iter()
                .map(|cell| {
                    cell.iter()
                        .enumerate()
                        .map(|(i, &p)| Atom {
                            value: i as f64 * 0.01,
                            prob: p,
                        })
                        .collect()
                })
                .collect();
            InitialEnsemble {
                n: probs.len(),
                k_half: 1.0,
                shift_c: 0.0,
                profiles: vec![EnsembleProfile {
                    weight: 1.0,
                    theta: vec![0.0; probs.len()],
                    atoms,
                }],
            }
        };
        // all Dirac: a single assignment of probability 1
        let ens = mk(vec![vec![1.0], vec![1.0]]);
        let sigmas = enumerate_sigmas(&ens, 0, 100).unwrap();
        assert_eq!(sigmas.len(), 1);
        assert_eq!(sigmas[0].1, 1.0);
        // 2 x 2 uniform
        let ens = mk(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let sigmas = enumerate_sigmas(&ens, 0, 100).unwrap();
        assert_eq!(sigmas.len(), 4);
        assert!(sigmas.iter().all(|(_, p)| (p - 0.25).abs() < 1e-15));
        // weighted products in lexicographic order
        let ens = mk(vec![vec![0.3, 0.7], vec![0.4, 0.6]]);
        let got: Vec<f64> = enumerate_sigmas(&ens, 0, 100)
            .unwrap()
            .iter()
            .map(|(_, p)| *p)
            .collect();
        let want = [0.12, 0.18, 0.28, 0.42];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let total: f64 = got.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // cap
        assert!(enumerate_sigmas(&ens, 0, 3).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_calibrated() {
        let atoms = vec![
            vec![
                Atom { value: 0.0, prob: 0.5 },
                Atom { value: 0.1, prob: 0.5 },
            ],
            vec![Atom { value: 0.2, prob: 1.0 }],
        ];
        let ens = InitialEnsemble {
            n: 2,
            k_half: 1.0,
            shift_c: 0.0,
            profiles: vec![EnsembleProfile {
                weight: 1.0,
                theta: vec![0.0, 0.0],
                atoms,
            }],
        };
        let a = sample_sigmas(&ens, 0, 10000, 7);
        let b = sample_sigmas(&ens, 0, 10000, 7);
        assert_eq!(a, b);
        // Dirac cells are always the same
        assert!(a.iter().all(|s| s[1] == 0));
        // empirical frequency within the 3-sigma binomial band
        let freq = a.iter().filter(|s| s[0] == 0).count() as f64 / 10000.0;
        assert!((freq - 0.5).abs() < 0.015, "freq = {freq}");
    }

    #[test]
    fn dirac_reduction_is_bit_exact() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let theta = vec![0.0, 0.1];
        let q = vec![0.5, 0.0];
        let ens =
            InitialEnsemble::from_atoms(2, 1.0, vec![dirac_profile(theta.clone(), q.clone())])
                .unwrap();
        let res = run_ensemble(
            &dynamics,
            &ens,
            0.02,
            0.01,
            EnsembleMode::Exhaustive,
            DEFAULT_ENUMERATION_CAP,
            true,
        )
        .unwrap();
        assert_eq!(res.runs.len(), 1);
        assert_eq!(res.runs[0].weight, 1.0);
        let direct = run(
            &dynamics,
            &ColumnState::new(theta, q, 0.0).unwrap(),
            0.02,
            0.01,
            true,
        )
        .unwrap();
        for (a, b) in res.runs[0].trajectory.states.iter().zip(&direct.states) {
            assert_eq!(a.theta(), b.theta());
            assert_eq!(a.q(), b.q());
            assert_eq!(a.label_to_pos(), b.label_to_pos());
        }
    }

    #[test]
    fn two_branch_ensemble() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        // cell 0 makes parcel 0 either exactly saturated (wet next step)
        // or bone dry
        let theta = vec![0.0, 0.1];
        let atoms = vec![
            vec![
                Atom { value: 0.5, prob: 0.5 },  // q = 0.5 = Qsat(0, 0.5, 0)
                Atom { value: 0.0, prob: 0.5 },  // q = 0
            ],
            vec![Atom { value: 0.1, prob: 1.0 }], // q = 0
        ];
        let ens = InitialEnsemble::from_atoms(
            2,
            1.0,
            vec![EnsembleProfile {
                weight: 1.0,
                theta,
                atoms,
            }],
        )
        .unwrap();
        let res = run_ensemble(
            &dynamics,
            &ens,
            0.01,
            0.01,
            EnsembleMode::Exhaustive,
            DEFAULT_ENUMERATION_CAP,
            true,
        )
        .unwrap();
        assert_eq!(res.runs.len(), 2);
        assert!((res.runs[0].weight - 0.5).abs() < 1e-15);
        // branch 0: saturated parcel rises; branch 1: identity
        let t0 = &res.runs[0].trajectory;
        let t1 = &res.runs[1].trajectory;
        assert_eq!(t0.states[1].pos_of(0), 1);
        assert_eq!(t1.states[1].pos_of(0), 0);
        // marginal at t = 0.005 (after the first step boundary is at 0.01,
        // so this is still the initial data)
        let m0 = marginal(&res, 0.0).unwrap();
        assert_eq!(m0.samples.len(), 2);
        let d = marginal_distance(&m0, &m0, Observable::ThetaAt(0.4)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn uniform_position_marginal() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let theta = vec![0.0, 0.05, 0.1];
        let atoms = vec![
            vec![
                Atom { value: 2.0 / 3.0, prob: 0.5 },
                Atom { value: 0.0, prob: 0.5 },
            ],
            vec![
                Atom { value: 0.408333333333333, prob: 0.25 },
                Atom { value: 0.05, prob: 0.75 },
            ],
            vec![Atom { value: 0.1, prob: 1.0 }],
        ];
        let ens = InitialEnsemble::from_atoms(
            3,
            1.0,
            vec![EnsembleProfile {
                weight: 1.0,
                theta,
                atoms,
            }],
        )
        .unwrap();
        let res = run_ensemble(
            &dynamics,
            &ens,
            0.02,
            0.01,
            EnsembleMode::Exhaustive,
            DEFAULT_ENUMERATION_CAP,
            true,
        )
        .unwrap();
        assert_eq!(res.runs.len(), 4);
        let wsum: f64 = res.runs.iter().map(|r| r.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        // each grid position carries total weight 1 at every time
        for t in [0.0, 0.01] {
            let m = marginal(&res, t).unwrap();
            for cell in 0..3 {
                let z_cell = z_of(cell, 3);
                let mass: f64 = m
                    .samples
                    .iter()
                    .map(|s| {
                        s.labels
                            .iter()
                            .filter(|r| (r.z_now - z_cell).abs() < 1e-12)
                            .count() as f64
                            * s.weight
                    })
                    .sum();
                assert!((mass - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wasserstein_examples() {
        let a = vec![(0.0, 1.0)];
        assert_eq!(wasserstein1(&a, &a), 0.0);
        let b = vec![(1.0, 1.0)];
        assert!((wasserstein1(&a, &b) - 1.0).abs() < 1e-15);
        // two half-weights at {0, 1} against a Dirac at 1/2: each half
        // moves distance 1/2, so W1 = 0.5
        let two = vec![(0.0, 0.5), (1.0, 0.5)];
        let mid = vec![(0.5, 1.0)];
        assert!((wasserstein1(&two, &mid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn admissibility_report_clauses() {
        let (model, bounds) = setup();
        let dynamics = Dynamics::new(&model, &bounds, SolverConfig::default());
        let good = InitialEnsemble::from_atoms(
            2,
            1.0,
            vec![dirac_profile(vec![0.0, 0.1], vec![0.5, 0.0])],
        )
        .unwrap();
        assert!(good.check_admissibility(&dynamics).all_pass());

        // an atom that violates the constraint at t = 0
        let bad = InitialEnsemble {
            n: 2,
            k_half: 1.0,
            shift_c: 0.0,
            profiles: vec![EnsembleProfile {
                weight: 1.0,
                theta: vec![0.0, 0.1],
                atoms: vec![
                    vec![Atom { value: 1.0, prob: 1.0 }], // q = 1 > Qsat(0, .5, 0) = 0.5
                    vec![Atom { value: 0.1, prob: 1.0 }],
                ],
            }],
        };
        let report = bad.check_admissibility(&dynamics);
        assert!(!report.constraint_atomwise);
        assert!(report.profiles_monotone);

        // decreasing profile: structural validation refuses it
        assert!(InitialEnsemble::from_atoms(
            2,
            1.0,
            vec![dirac_profile(vec![0.2, 0.1], vec![0.0, 0.0])]
        )
        .is_err());
    }

    #[test]
    fn profile_l1_on_refined_grids() {
        let coarse = vec![0.0, 1.0];
        let fine = vec![0.0, 0.0, 1.0, 1.0];
        assert!(profile_l1_distance(&coarse, &fine).abs() < 1e-15);
        let shifted = vec![0.5, 1.5];
        assert!((profile_l1_distance(&coarse, &shifted) - 0.5).abs() < 1e-15);
    }
}
