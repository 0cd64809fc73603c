//! Saturation function `Q^sat(theta, z, t)`, its implicit inverse, and the
//! derived bounds every other module relies on.
//!
//! The built-in linear family `qstar + a*theta - b*z - c*t` satisfies the
//! required monotonicity (increasing in theta, decreasing in height, and
//! optionally decreasing in time, which is what drives the dynamics) and has
//! a closed-form inverse that the tests use as an oracle. Tabulated models
//! are validated numerically on their own grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack accepted on the height coordinate before an input is rejected.
const Z_SLACK: f64 = 1e-9;

/// Above this parcel count the per-step inverse memo falls back to direct
/// evaluation (see `rearrange`): the table would cost n^2 floats.
pub const MEMO_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSaturation {
    pub qstar: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Regular-grid samples of `Q^sat` with trilinear interpolation and linear
/// extrapolation beyond the grid edges (which preserves the validated edge
/// slopes, so monotonicity extends off-grid).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabulatedSaturation {
    thetas: Vec<f64>,
    zs: Vec<f64>,
    ts: Vec<f64>,
    /// Flat array indexed `[i_theta + n_theta * (i_z + n_z * i_t)]`.
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SaturationModel {
    Linear(LinearSaturation),
    Tabulated(TabulatedSaturation),
}

impl SaturationModel {
    pub fn linear(qstar: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Config(format!("linear model needs a > 0, got {a}")));
        }
        if !(b > 0.0) {
            return Err(Error::Config(format!("linear model needs b > 0, got {b}")));
        }
        if !(c >= 0.0) {
            return Err(Error::Config(format!("linear model needs c >= 0, got {c}")));
        }
        Ok(SaturationModel::Linear(LinearSaturation { qstar, a, b, c }))
    }

    /// Evaluate `Q^sat(theta, z, t)`. Heights slightly outside `[0,1]` are
    /// clamped; beyond the slack the input is rejected.
    pub fn eval(&self, theta: f64, z: f64, t: f64) -> Result<f64> {
        if !(-Z_SLACK..=1.0 + Z_SLACK).contains(&z) {
            return Err(Error::Domain(format!("height z = {z} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(theta, z.clamp(0.0, 1.0), t))
    }

    pub(crate) fn eval_unchecked(&self, theta: f64, z: f64, t: f64) -> f64 {
        match self {
            SaturationModel::Linear(m) => m.qstar + m.a * theta - m.b * z - m.c * t,
            SaturationModel::Tabulated(m) => m.interpolate(theta, z, t),
        }
    }

    /// Sampled check of the strict monotonicity hypotheses. Exact for the
    /// linear family; adjacent-difference check on the grid for tables.
    pub fn validate_monotone(&self) -> Result<()> {
        match self {
            SaturationModel::Linear(m) => {
                if m.a > 0.0 && m.b > 0.0 && m.c >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(
                        "linear model violates a > 0, b > 0, c >= 0".into(),
                    ))
                }
            }
            SaturationModel::Tabulated(m) => m.validate_monotone(),
        }
    }
}

impl TabulatedSaturation {
    /// Build from `(theta, z, t, q)` rows that must fill a full regular grid.
    pub fn from_rows(rows: &[(f64, f64, f64, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("empty saturation table".into()));
        }
        let mut thetas: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut zs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut ts: Vec<f64> = rows.iter().map(|r| r.2).collect();
        for axis in [&mut thetas, &mut zs, &mut ts] {
            axis.sort_by(|a, b| a.total_cmp(b));
            axis.dedup();
        }
        let (nth, nz, nt) = (thetas.len(), zs.len(), ts.len());
        if nth < 2 || nz < 2 {
            return Err(Error::Config(
                "saturation table needs at least 2 theta and 2 z samples".into(),
            ));
        }
        if nth * nz * nt != rows.len() {
            return Err(Error::Config(format!(
                "saturation table is not a full {nth}x{nz}x{nt} grid ({} rows)",
                rows.len()
            )));
        }
        let find = |axis: &[f64], v: f64| -> Result<usize> {
            axis.binary_search_by(|x| x.total_cmp(&v))
                .map_err(|_| Error::Config(format!("irregular table coordinate {v}")))
        };
        let mut values = vec![f64::NAN; rows.len()];
        for &(th, z, t, q) in rows {
            let idx = find(&thetas, th)? + nth * (find(&zs, z)? + nz * find(&ts, t)?);
            values[idx] = q;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("saturation table has duplicate rows".into()));
        }
        let table = TabulatedSaturation {
            thetas,
            zs,
            ts,
            values,
        };
        table.validate_monotone()?;
        Ok(table)
    }

    fn at(&self, it: usize, iz: usize, itt: usize) -> f64 {
        self.values[it + self.thetas.len() * (iz + self.zs.len() * itt)]
    }

    fn validate_monotone(&self) -> Result<()> {
        for itt in 0..self.ts.len() {
            for iz in 0..self.zs.len() {
                for it in 1..self.thetas.len() {
                    if self.at(it, iz, itt) <= self.at(it - 1, iz, itt) {
                        return Err(Error::Config(format!(
                            "table not strictly increasing in theta near theta={}",
                            self.thetas[it]
                        )));
                    }
                }
            }
            for it in 0..self.thetas.len() {
                for iz in 1..self.zs.len() {
                    if self.at(it, iz, itt) >= self.at(it, iz - 1, itt) {
                        return Err(Error::Config(format!(
                            "table not strictly decreasing in z near z={}",
                            self.zs[iz]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn interpolate(&self, theta: f64, z: f64, t: f64) -> f64 {
        let (i0, wt) = segment(&self.thetas, theta);
        let (j0, wz) = segment(&self.zs, z);
        let (k0, wtt) = segment(&self.ts, t);
        let mut acc = 0.0;
        for (dk, fk) in [(0, 1.0 - wtt), (1, wtt)] {
            if fk == 0.0 && self.ts.len() == 1 && dk == 1 {
                continue;
            }
            let kk = (k0 + dk).min(self.ts.len() - 1);
            for (dj, fj) in [(0, 1.0 - wz), (1, wz)] {
                let jj = (j0 + dj).min(self.zs.len() - 1);
                for (di, fi) in [(0, 1.0 - wt), (1, wt)] {
                    let ii = (i0 + di).min(self.thetas.len() - 1);
                    acc += fk * fj * fi * self.at(ii, jj, kk);
                }
            }
        }
        acc
    }
}

/// Locate the interpolation segment for `v`, clamping to the edge cells.
/// The returned weight may fall outside `[0,1]`, which yields linear
/// extrapolation from the edge slope.
fn segment(axis: &[f64], v: f64) -> (usize, f64) {
    if axis.len() == 1 {
        return (0, 0.0);
    }
    let mut i = match axis.binary_search_by(|x| x.total_cmp(&v)) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    i = i.min(axis.len() - 2);
    let w = (v - axis[i]) / (axis[i + 1] - axis[i]);
    (i, w)
}

/// The box `{(w, z, t) : |w| <= w_max, z in [0,1], t in [0, t_max]}` over
/// which all suprema and infima are taken.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainBox {
    pub w_max: f64,
    pub t_max: f64,
}

impl DomainBox {
    pub fn new(w_max: f64, t_max: f64) -> Result<Self> {
        if !(w_max > 0.0) || !(t_max > 0.0) {
            return Err(Error::Config(format!(
                "domain box needs w_max > 0 and t_max > 0, got ({w_max}, {t_max})"
            )));
        }
        Ok(DomainBox { w_max, t_max })
    }
}

/// Tolerance and iteration cap for the implicit inverse.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-12,
            max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iter < 1 {
            return Err(Error::Config(
                "solver needs tolerance > 0 and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Derived bounds of the inverse `Theta` (and of `Q^sat` itself) over a
/// domain box, plus the step-size constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaBounds {
    pub inf_dz_theta: f64,
    pub sup_dz_theta: f64,
    pub sup_dt_theta: f64,
    pub inf_dw_theta: f64,
    pub sup_abs_theta: f64,
    /// sup of d(Q^sat)/d(theta); converts theta-scale slacks to q-scale.
    pub sup_dtheta_qsat: f64,
    /// sup of |d(Q^sat)/dt|.
    pub sup_dt_qsat: f64,
    /// The constant `C4' = sup|dt Theta| / inf dz Theta`.
    pub cfl: f64,
    pub domain: DomainBox,
}

/// Solve `theta + Q^sat(theta, z, t) = w` for theta by bisection.
///
/// The map `theta -> theta + Q^sat` is strictly increasing with slope
/// greater than one, so the root lies within `|g(theta0)|` of the starting
/// guess `theta0 = w - Q^sat(0, z, t)` and bisection always terminates.
pub fn theta_inverse(
    model: &SaturationModel,
    w: f64,
    z: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if !(-Z_SLACK..=1.0 + Z_SLACK).contains(&z) {
        return Err(Error::Domain(format!("height z = {z} outside [0, 1]")));
    }
    let z = z.clamp(0.0, 1.0);
    let g = |theta: f64| theta + model.eval_unchecked(theta, z, t) - w;
    let theta0 = w - model.eval_unchecked(0.0, z, t);
    let g0 = g(theta0);
    if !g0.is_finite() {
        return Err(Error::Solver(format!(
            "non-finite saturation value at (w={w}, z={z}, t={t})"
        )));
    }
    let mut lo = theta0 - g0.abs() - 1e-9;
    let mut hi = theta0 + g0.abs() + 1e-9;
    let mut iter = 0usize;
    while g(lo) > 0.0 {
        lo -= hi - lo;
        iter += 1;
        if iter > cfg.max_iter {
            return Err(Error::Solver(format!(
                "cannot bracket the inverse at (w={w}, z={z}, t={t}); model not monotone?"
            )));
        }
    }
    while g(hi) < 0.0 {
        hi += hi - lo;
        iter += 1;
        if iter > cfg.max_iter {
            return Err(Error::Solver(format!(
                "cannot bracket the inverse at (w={w}, z={z}, t={t}); model not monotone?"
            )));
        }
    }
    // slope > 1 means |theta - Theta| <= |g(theta)|, so interval width
    // tolerance/4 guarantees the contract |theta - Theta| <= tolerance.
    while hi - lo > cfg.tolerance * 0.25 {
        iter += 1;
        if iter > cfg.max_iter {
            return Err(Error::Solver(format!(
                "bisection did not converge within {} iterations at (w={w}, z={z}, t={t})",
                cfg.max_iter
            )));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval narrowed to adjacent floats
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bounds of the implicit inverse over the box. Closed forms for the linear
/// family; centered finite differences of `Theta` on a sampling grid for
/// tabulated models (`grid_resolution` points per axis).
pub fn compute_bounds(
    model: &SaturationModel,
    domain: DomainBox,
    grid_resolution: usize,
    cfg: &SolverConfig,
) -> Result<ThetaBounds> {
    model.validate_monotone()?;
    match model {
        SaturationModel::Linear(m) => {
            let denom = 1.0 + m.a;
            // Theta = (w - qstar + b z + c t) / (1 + a); extremes at corners.
            let mut sup_abs: f64 = 0.0;
            for w in [-domain.w_max, domain.w_max] {
                for z in [0.0, 1.0] {
                    for t in [0.0, domain.t_max] {
                        sup_abs = sup_abs.max(((w - m.qstar + m.b * z + m.c * t) / denom).abs());
                    }
                }
            }
            Ok(ThetaBounds {
                inf_dz_theta: m.b / denom,
                sup_dz_theta: m.b / denom,
                sup_dt_theta: m.c / denom,
                inf_dw_theta: 1.0 / denom,
                sup_abs_theta: sup_abs,
                sup_dtheta_qsat: m.a,
                sup_dt_qsat: m.c,
                cfl: m.c / m.b,
                domain,
            })
        }
        SaturationModel::Tabulated(tab) => {
            let res = grid_resolution.max(2);
            let hw = 2.0 * domain.w_max / (res as f64) * 0.5;
            let hz = 1.0 / (res as f64) * 0.5;
            let ht = domain.t_max / (res as f64) * 0.5;
            let mut inf_dz = f64::INFINITY;
            let mut sup_dz: f64 = 0.0;
            let mut sup_dt: f64 = 0.0;
            let mut inf_dw = f64::INFINITY;
            let mut sup_abs: f64 = 0.0;
            for iw in 0..=res {
                let w = -domain.w_max + 2.0 * domain.w_max * (iw as f64) / (res as f64);
                for iz in 0..=res {
                    let z = (iz as f64) / (res as f64);
                    for it in 0..=res {
                        let t = domain.t_max * (it as f64) / (res as f64);
                        let th = theta_inverse(model, w, z, t, cfg)?;
                        sup_abs = sup_abs.max(th.abs());
                        let zp = (z + hz).min(1.0);
                        let zm = (z - hz).max(0.0);
                        let dz = (theta_inverse(model, w, zp, t, cfg)?
                            - theta_inverse(model, w, zm, t, cfg)?)
                            / (zp - zm);
                        inf_dz = inf_dz.min(dz);
                        sup_dz = sup_dz.max(dz);
                        let dt = (theta_inverse(model, w, z, t + ht, cfg)?
                            - theta_inverse(model, w, z, t - ht, cfg)?)
                            / (2.0 * ht);
                        sup_dt = sup_dt.max(dt.abs());
                        let dw = (theta_inverse(model, w + hw, z, t, cfg)?
                            - theta_inverse(model, w - hw, z, t, cfg)?)
                            / (2.0 * hw);
                        inf_dw = inf_dw.min(dw);
                    }
                }
            }
            if !(inf_dz > 0.0) || !(inf_dw > 0.0) {
                return Err(Error::Solver(
                    "tabulated model fails the strict monotonicity of the inverse".into(),
                ));
            }
            // Q^sat slopes from the table's own grid differences.
            let mut sup_dth_q: f64 = 0.0;
            let mut sup_dt_q: f64 = 0.0;
            for itt in 0..tab.ts.len() {
                for iz in 0..tab.zs.len() {
                    for it in 1..tab.thetas.len() {
                        let s = (tab.at(it, iz, itt) - tab.at(it - 1, iz, itt))
                            / (tab.thetas[it] - tab.thetas[it - 1]);
                        sup_dth_q = sup_dth_q.max(s);
                    }
                }
            }
            for itt in 1..tab.ts.len() {
                for iz in 0..tab.zs.len() {
                    for it in 0..tab.thetas.len() {
                        let s = (tab.at(it, iz, itt) - tab.at(it, iz, itt - 1))
                            / (tab.ts[itt] - tab.ts[itt - 1]);
                        sup_dt_q = sup_dt_q.max(s.abs());
                    }
                }
            }
            let cfl = sup_dt / inf_dz;
            Ok(ThetaBounds {
                inf_dz_theta: inf_dz,
                sup_dz_theta: sup_dz,
                sup_dt_theta: sup_dt,
                inf_dw_theta: inf_dw,
                sup_abs_theta: sup_abs,
                sup_dtheta_qsat: sup_dth_q,
                sup_dt_qsat: sup_dt_q,
                cfl,
                domain,
            })
        }
    }
}

/// Largest admissible step: `1/(2 C4' n)`, falling back to `T/n` when the
/// model has no time decay. Callers may use any smaller step.
pub fn max_timestep(bounds: &ThetaBounds, n: usize) -> f64 {
    assert!(n >= 1, "need at least one parcel");
    if bounds.cfl > 0.0 {
        1.0 / (2.0 * bounds.cfl * n as f64)
    } else {
        bounds.domain.t_max / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_model() -> SaturationModel {
        SaturationModel::linear(1.0, 0.5, 1.0, 0.2).unwrap()
    }

    /// Closed-form inverse of the linear family; the oracle for bisection.
    fn linear_theta(m: &LinearSaturation, w: f64, z: f64, t: f64) -> f64 {
        (w - m.qstar + m.b * z + m.c * t) / (1.0 + m.a)
    }

    #[test]
    fn eval_linear_examples() {
        let m = linear_model();
        assert!((m.eval(0.0, 0.5, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.eval(0.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.eval(1.0, 1.0, 0.01).unwrap() - 0.498).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_bad_height() {
        let m = linear_model();
        assert!(m.eval(0.0, -0.5, 0.0).is_err());
        assert!(m.eval(0.0, 1.5, 0.0).is_err());
        // within slack: clamped, not rejected
        assert!(m.eval(0.0, 1.0 + 1e-12, 0.0).is_ok());
    }

    #[test]
    fn inverse_examples() {
        let m = linear_model();
        let cfg = SolverConfig::default();
        let th = theta_inverse(&m, 2.5, 0.0, 0.0, &cfg).unwrap();
        assert!((th - 1.0).abs() < 1e-12);
        let th = theta_inverse(&m, 0.5, 1.0, 0.01, &cfg).unwrap();
        assert!((th - 0.502 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let m = linear_model();
        let cfg = SolverConfig::default();
        let (theta0, z, t) = (0.3, 0.7, 0.05);
        let w = theta0 + m.eval(theta0, z, t).unwrap();
        let th = theta_inverse(&m, w, z, t, &cfg).unwrap();
        assert!((th - 0.3).abs() < 1e-12);
    }

    #[test]
    fn inverse_matches_closed_form_on_grid() {
        let m = linear_model();
        let lin = match &m {
            SaturationModel::Linear(l) => *l,
            _ => unreachable!(),
        };
        let cfg = SolverConfig::default();
        for iw in 0..=8 {
            let w = -2.0 + 4.0 * iw as f64 / 8.0;
            for iz in 0..=4 {
                let z = iz as f64 / 4.0;
                for it in 0..=4 {
                    let t = it as f64 / 4.0;
                    let th = theta_inverse(&m, w, z, t, &cfg).unwrap();
                    assert!((th - linear_theta(&lin, w, z, t)).abs() <= cfg.tolerance);
                    // strict inverse property
                    let resid = th + m.eval(th, z, t).unwrap() - w;
                    assert!(resid.abs() <= 2.0 * cfg.tolerance);
                }
            }
        }
    }

    #[test]
    fn inverse_monotone_in_w_and_z() {
        let m = linear_model();
        let cfg = SolverConfig::default();
        let tol = cfg.tolerance;
        for i in 0..8 {
            let w = -1.0 + i as f64 * 0.25;
            let a = theta_inverse(&m, w, 0.3, 0.1, &cfg).unwrap();
            let b = theta_inverse(&m, w + 0.25, 0.3, 0.1, &cfg).unwrap();
            assert!(b > a - tol);
            let c = theta_inverse(&m, w, 0.6, 0.1, &cfg).unwrap();
            assert!(c > a - tol);
        }
    }

    #[test]
    fn bounds_linear_examples() {
        let cfg = SolverConfig::default();
        let boxx = DomainBox::new(2.0, 1.0).unwrap();
        let b = compute_bounds(&linear_model(), boxx, 64, &cfg).unwrap();
        assert!((b.inf_dz_theta - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.sup_dt_theta - 2.0 / 15.0).abs() < 1e-15);
        assert!((b.cfl - 0.2).abs() < 1e-15);

        let m = SaturationModel::linear(1.0, 1.0, 1.0, 0.0).unwrap();
        let b = compute_bounds(&m, boxx, 64, &cfg).unwrap();
        assert_eq!(b.sup_dt_theta, 0.0);
        assert_eq!(b.cfl, 0.0);

        let m = SaturationModel::linear(1.0, 0.5, 2.0, 0.2).unwrap();
        let b = compute_bounds(&m, boxx, 64, &cfg).unwrap();
        assert!((b.inf_dz_theta - 4.0 / 3.0).abs() < 1e-15);
        assert!((b.cfl - 0.1).abs() < 1e-15);
    }

    #[test]
    fn max_timestep_examples() {
        let cfg = SolverConfig::default();
        let boxx = DomainBox::new(2.0, 1.0).unwrap();
        let mut b = compute_bounds(&linear_model(), boxx, 8, &cfg).unwrap();
        assert!((max_timestep(&b, 2) - 1.25).abs() < 1e-15);
        assert!((max_timestep(&b, 1000) - 0.0025).abs() < 1e-15);
        b.cfl = 0.0;
        assert!((max_timestep(&b, 10) - 0.1).abs() < 1e-15);
    }

    /// Tabulated model sampled from the linear family should reproduce its
    /// evaluations exactly (trilinear on a linear function) and its bounds
    /// approximately.
    #[test]
    fn tabulated_tracks_linear() {
        let lin = LinearSaturation {
            qstar: 1.0,
            a: 0.5,
            b: 1.0,
            c: 0.2,
        };
        let mut rows = Vec::new();
        for it in 0..=6 {
            let th = -3.0 + it as f64;
            for iz in 0..=4 {
                let z = iz as f64 / 4.0;
                for itt in 0..=2 {
                    let t = itt as f64 / 2.0;
                    rows.push((th, z, t, lin.qstar + lin.a * th - lin.b * z - lin.c * t));
                }
            }
        }
        let tab = SaturationModel::Tabulated(TabulatedSaturation::from_rows(&rows).unwrap());
        let cfg = SolverConfig::default();
        for (th, z, t) in [(0.3, 0.25, 0.5), (-1.7, 0.9, 0.1), (2.4, 0.0, 0.99)] {
            let want = lin.qstar + lin.a * th - lin.b * z - lin.c * t;
            assert!((tab.eval(th, z, t).unwrap() - want).abs() < 1e-12);
        }
        // extrapolation stays linear
        assert!((tab.eval(5.0, 0.5, 0.25).unwrap() - (1.0 + 2.5 - 0.5 - 0.05)).abs() < 1e-12);
        let boxx = DomainBox::new(2.0, 1.0).unwrap();
        let b = compute_bounds(&tab, boxx, 16, &cfg).unwrap();
        assert!((b.inf_dz_theta - 2.0 / 3.0).abs() < 1e-6);
        assert!((b.sup_dt_theta - 2.0 / 15.0).abs() < 1e-6);
        assert!((b.cfl - 0.2).abs() < 1e-5);
    }

    #[test]
    fn tabulated_rejects_non_monotone() {
        let rows = vec![
            (0.0, 0.0, 0.0, 1.0),
            (1.0, 0.0, 0.0, 0.5), // decreasing in theta
            (0.0, 1.0, 0.0, 0.5),
            (1.0, 1.0, 0.0, 0.2),
        ];
        assert!(TabulatedSaturation::from_rows(&rows).is_err());
    }
}
