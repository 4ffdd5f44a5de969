//! Multiplier bootstrap for the local estimator and the inference built on
//! it: bootstrap covariance, Wald tests, the two-point equivalence test,
//! elliptical confidence regions and Bonferroni-adjusted critical values.
//!
//! Each replicate re-solves the weighted objective with i.i.d. unit-mean,
//! unit-variance multipliers `z_t`. For paired evaluation points one
//! z-vector per replicate is shared across both local fits; the
//! cross-covariance term of the equivalence statistic needs that coupling.

use crate::error::{Error, Result};
use crate::estimator::{
    build_window, fit_with_weight, matrix_to_nested, nested_to_matrix, EstimationConfig,
    LocalFitResult,
};
use crate::numerics::{chi_square_quantile_upper, chi_square_survival};
use crate::rng::stream_rng;
use crate::solver::solve_wlad;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Multiplier law; every variant has mean 1, and the stock variants have
/// variance 1.
///
/// `Exponential1` (the default) keeps all replicate weights nonnegative.
/// `Gaussian11` can draw negative multipliers; those weights are clamped
/// at zero and the replicate is flagged. `TwoPoint` puts mass 1/2 on each
/// atom; `{0, 2}` is the standard choice, and degenerate atoms such as
/// `{1, 1}` are accepted as a test hook (downstream variance floors reject
/// them where they would divide by zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum MultiplierSpec {
    Exponential1,
    Gaussian11,
    TwoPoint { low: f64, high: f64 },
}

impl Default for MultiplierSpec {
    fn default() -> Self {
        MultiplierSpec::Exponential1
    }
}

impl MultiplierSpec {
    pub fn two_point() -> Self {
        MultiplierSpec::TwoPoint {
            low: 0.0,
            high: 2.0,
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            MultiplierSpec::Exponential1 => rand_distr::Exp::new(1.0).unwrap().sample(rng),
            MultiplierSpec::Gaussian11 => rand_distr::Normal::new(1.0, 1.0).unwrap().sample(rng),
            MultiplierSpec::TwoPoint { low, high } => {
                if rng.random::<bool>() {
                    high
                } else {
                    low
                }
            }
        }
    }
}

/// All replicates of one bootstrap run, at one or two evaluation points.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    pub points: Vec<f64>,
    pub base_fits: Vec<LocalFitResult>,
    /// Usable replicate rows, each the concatenated coefficient vectors of
    /// all points (length p * points.len()).
    pub replicates: Vec<Vec<f64>>,
    pub multiplier: MultiplierSpec,
    pub m_requested: usize,
    pub seed: u64,
    /// Replicates with clamped negative weights (kept, flagged).
    pub flagged: usize,
    /// Replicates dropped because a solve failed.
    pub excluded: usize,
    /// T * h of the underlying fits.
    pub th: f64,
}

impl BootstrapEnsemble {
    pub fn order(&self) -> usize {
        self.base_fits[0].order()
    }

    pub fn dim(&self) -> usize {
        self.order() * self.points.len()
    }

    /// One replicate per row, points concatenated; for export.
    pub fn to_csv(&self) -> String {
        let p = self.order();
        let mut header: Vec<String> = Vec::new();
        for i in 0..self.points.len() {
            for j in 1..=p {
                if self.points.len() > 1 {
                    header.push(format!("beta{j}_u{}", i + 1));
                } else {
                    header.push(format!("beta{j}"));
                }
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.replicates {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs `m` multiplier-bootstrap replicates at one or two points.
/// Replicate k draws its multipliers from stream k+1 of `seed`, so the
/// ensemble is deterministic in any execution order; for two points the
/// same z-vector weights both fits of a replicate.
pub fn bootstrap_replicates(
    series: &[f64],
    points: &[f64],
    config: &EstimationConfig,
    m: usize,
    multiplier: MultiplierSpec,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    if points.is_empty() || points.len() > 2 {
        return Err(Error::Config(
            "bootstrap needs one or two evaluation points".into(),
        ));
    }
    if m < 2 {
        return Err(Error::Config(format!(
            "bootstrap needs M >= 2 replicates, got {m}"
        )));
    }
    let weight = config.weight.resolve(series)?;
    let t_len = series.len();
    let p = config.order;

    let mut base_fits = Vec::with_capacity(points.len());
    let mut windows = Vec::with_capacity(points.len());
    for &u0 in points {
        base_fits.push(fit_with_weight(series, u0, config, &weight)?);
        windows.push(build_window(series, u0, config, &weight)?);
    }
    let th = t_len as f64 * windows[0].bandwidth;
    let composites: Vec<Vec<f64>> = windows.iter().map(|w| w.composite_weights()).collect();

    let results: Vec<(Option<Vec<f64>>, bool)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64 + 1);
            // z_t for t = p+1..=T; windows index into it by absolute time
            let z: Vec<f64> = (p + 1..=t_len).map(|_| multiplier.draw(&mut rng)).collect();
            let mut clamped = false;
            let mut row = Vec::with_capacity(p * windows.len());
            for (w, comp) in windows.iter().zip(&composites) {
                let c: Vec<f64> = w
                    .t_indices
                    .iter()
                    .zip(comp)
                    .map(|(&t, &cw)| {
                        let zt = z[t - p - 1];
                        if zt < 0.0 {
                            clamped = true;
                            0.0
                        } else {
                            zt * cw
                        }
                    })
                    .collect();
                let problem = match w.problem_with_weights(c) {
                    Ok(pr) => pr,
                    Err(_) => return (None, clamped),
                };
                match solve_wlad(&problem) {
                    Ok(sol) => row.extend(sol.beta),
                    Err(_) => return (None, clamped),
                }
            }
            (Some(row), clamped)
        })
        .collect();

    let mut replicates = Vec::with_capacity(m);
    let mut flagged = 0usize;
    let mut excluded = 0usize;
    for (row, clamped) in results {
        if clamped {
            flagged += 1;
        }
        match row {
            Some(r) => replicates.push(r),
            None => excluded += 1,
        }
    }
    if (excluded as f64) > 0.05 * m as f64 {
        return Err(Error::Numeric(format!(
            "bootstrap failure rate {excluded}/{m} exceeds 5%"
        )));
    }
    Ok(BootstrapEnsemble {
        points: points.to_vec(),
        base_fits,
        replicates,
        multiplier,
        m_requested: m,
        seed,
        flagged,
        excluded,
        th,
    })
}

/// Unbiased sample covariance (denominator M-1) of the replicate vectors.
pub fn bootstrap_covariance(ensemble: &BootstrapEnsemble) -> Result<Vec<Vec<f64>>> {
    let m = ensemble.replicates.len();
    if m < 2 {
        return Err(Error::Numeric(
            "covariance needs at least 2 usable replicates".into(),
        ));
    }
    let d = ensemble.dim();
    let mut mean = vec![0.0f64; d];
    for row in &ensemble.replicates {
        for (mi, v) in mean.iter_mut().zip(row) {
            *mi += v;
        }
    }
    for mi in &mut mean {
        *mi /= m as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for row in &ensemble.replicates {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov /= (m - 1) as f64;
    Ok(matrix_to_nested(&cov))
}

/// A serializable test report. `level`, `critical_value` and `reject` are
/// filled when the caller fixes a significance level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
    /// Set when a singular covariance forced a pseudo-inverse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_inverse: Option<bool>,
}

impl TestReport {
    pub fn at_level(mut self, level: f64) -> Result<Self> {
        let crit = chi_square_quantile_upper(self.df, level)?;
        self.level = Some(level);
        self.critical_value = Some(crit);
        self.reject = Some(self.statistic > crit);
        Ok(self)
    }
}

/// Wald statistic `W = (R b - c)' (R V R')^{-1} (R b - c)` with a
/// chi-square(q) upper-tail p-value. Falls back to a pseudo-inverse (and
/// flags it) when `R V R'` is singular.
pub fn wald_test(
    fit: &LocalFitResult,
    cov: &[Vec<f64>],
    r_mat: &[Vec<f64>],
    c_vec: &[f64],
) -> Result<TestReport> {
    let p = fit.order();
    let q = r_mat.len();
    if q == 0 || q > p || r_mat.iter().any(|row| row.len() != p) || c_vec.len() != q {
        return Err(Error::Config("restriction matrix shape mismatch".into()));
    }
    let r = DMatrix::from_fn(q, p, |i, j| r_mat[i][j]);
    let rank = r.clone().svd(false, false).rank(1e-12 * q.max(p) as f64);
    if rank < q {
        return Err(Error::Config(
            "restriction matrix is not full row rank".into(),
        ));
    }
    let v = nested_to_matrix(cov);
    let beta = DVector::from_column_slice(&fit.beta_hat);
    let c = DVector::from_column_slice(c_vec);
    let diff = &r * beta - c;
    let rvr = &r * v * r.transpose();
    let (inv, pseudo) = invert_or_pseudo(&rvr)?;
    let stat = (diff.transpose() * inv * diff)[(0, 0)];
    Ok(TestReport {
        statistic: stat,
        df: q,
        p_value: chi_square_survival(q, stat)?,
        level: None,
        critical_value: None,
        reject: None,
        pseudo_inverse: if pseudo { Some(true) } else { None },
    })
}

fn invert_or_pseudo(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if let Some(inv) = m.clone().try_inverse() {
        if inv.iter().all(|v| v.is_finite()) {
            return Ok((inv, false));
        }
    }
    let pinv = m
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Numeric(format!("pseudo-inverse failed: {e}")))?;
    Ok((pinv, true))
}

/// Equivalence-test report: the quadratic-form statistic, chi-square(p)
/// p-value and per-level decisions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub reject_at: BTreeMap<String, bool>,
    pub flagged_replicates: usize,
    pub excluded_replicates: usize,
}

pub const EQUIVALENCE_LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

/// Tests `beta(u1) = beta(u2)` with the paired multiplier bootstrap.
///
/// With `e_k = (b*_k(u1) - b(u1)) - (b*_k(u2) - b(u2))` and
/// `Xi = (1/M) sum_k e_k e_k'` (the Th factors cancel), the statistic is
/// `(b(u1) - b(u2))' Xi^{-1} (b(u1) - b(u2))`, asymptotically
/// chi-square(p) under the null. The paired z-streams supply the
/// cross-covariance term; a variance floor of 1e-12 rejects degenerate
/// multipliers.
pub fn equivalence_test(
    series: &[f64],
    u1: f64,
    u2: f64,
    config: &EstimationConfig,
    m: usize,
    multiplier: MultiplierSpec,
    seed: u64,
) -> Result<EquivalenceReport> {
    if u1 == u2 {
        return Err(Error::Config(
            "equivalence test needs two distinct points".into(),
        ));
    }
    let ensemble = bootstrap_replicates(series, &[u1, u2], config, m, multiplier, seed)?;
    equivalence_from_ensemble(&ensemble)
}

/// The statistic computed from an existing paired ensemble.
pub fn equivalence_from_ensemble(ensemble: &BootstrapEnsemble) -> Result<EquivalenceReport> {
    if ensemble.points.len() != 2 {
        return Err(Error::Config(
            "equivalence statistic needs a paired two-point ensemble (shared z-streams)".into(),
        ));
    }
    let p = ensemble.order();
    let m = ensemble.replicates.len();
    if m < 2 {
        return Err(Error::Numeric("too few usable replicates".into()));
    }
    let b1 = &ensemble.base_fits[0].beta_hat;
    let b2 = &ensemble.base_fits[1].beta_hat;
    let mut xi = DMatrix::zeros(p, p);
    for row in &ensemble.replicates {
        let e: Vec<f64> = (0..p)
            .map(|j| (row[j] - b1[j]) - (row[p + j] - b2[j]))
            .collect();
        for i in 0..p {
            for j in 0..p {
                xi[(i, j)] += e[i] * e[j];
            }
        }
    }
    xi /= m as f64;

    let min_eig = xi.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < 1e-12 {
        return Err(Error::Numeric(format!(
            "bootstrap variance {min_eig:.3e} below the 1e-12 floor; multiplier degenerate?"
        )));
    }
    let delta = DVector::from_fn(p, |j, _| b1[j] - b2[j]);
    let inv = xi
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular Xi".into()))?;
    let stat = (delta.transpose() * inv * delta)[(0, 0)];
    let p_value = chi_square_survival(p, stat)?;
    let mut reject_at = BTreeMap::new();
    for level in EQUIVALENCE_LEVELS {
        let crit = chi_square_quantile_upper(p, level)?;
        reject_at.insert(format!("{level:.2}"), stat > crit);
    }
    Ok(EquivalenceReport {
        statistic: stat,
        df: p,
        p_value,
        reject_at,
        flagged_replicates: ensemble.flagged,
        excluded_replicates: ensemble.excluded,
    })
}

/// The elliptical confidence region `{ b : (b - beta)' V^{-1} (b - beta)
/// <= q_{p, delta} }` where `q` is the upper-delta chi-square(p) quantile
/// and V the bootstrap covariance.
#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceRegion {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    pub radius_sq: f64,
    pub delta: f64,
    #[serde(skip)]
    inv: DMatrix<f64>,
}

impl ConfidenceRegion {
    pub fn contains(&self, b: &[f64]) -> bool {
        self.quadratic_form(b) <= self.radius_sq
    }

    pub fn quadratic_form(&self, b: &[f64]) -> f64 {
        let d = DVector::from_fn(self.center.len(), |j, _| b[j] - self.center[j]);
        (d.transpose() * &self.inv * &d)[(0, 0)]
    }
}

pub fn confidence_region(
    fit: &LocalFitResult,
    cov: &[Vec<f64>],
    delta: f64,
) -> Result<ConfidenceRegion> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Config(format!(
            "level delta = {delta} outside (0, 1)"
        )));
    }
    let p = fit.order();
    let v = nested_to_matrix(cov);
    let chol = v
        .cholesky()
        .ok_or_else(|| Error::Numeric("bootstrap covariance not positive definite".into()))?;
    let inv = chol.inverse();
    Ok(ConfidenceRegion {
        center: fit.beta_hat.clone(),
        shape: cov.to_vec(),
        radius_sq: chi_square_quantile_upper(p, delta)?,
        delta,
        inv,
    })
}

/// The bootstrap's bandwidth side condition, `h * a_{floor(Th)}` with
/// `a_n` the upper 1/n tail quantile of |e|. The asymptotics want this
/// small; values above 1 at the working (T, h) are a warning sign for
/// bootstrap variance quality, though no finite-sample rule exists.
pub fn bootstrap_side_condition(
    innovation: &crate::innovations::InnovationSpec,
    t_len: usize,
    h: f64,
) -> Result<f64> {
    let n = ((t_len as f64) * h).floor() as usize;
    if n < 2 {
        return Err(Error::Config(format!(
            "window T*h = {n} too small for the side condition"
        )));
    }
    Ok(h * crate::innovations::tail_quantile_a(innovation, n)?)
}

/// Bonferroni-corrected critical value for `k` simultaneous chi-square(df)
/// tests at family level `delta`: the upper delta/k quantile.
pub fn bonferroni_schedule(delta: f64, k: usize, df: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config(
            "bonferroni schedule needs k >= 1 tests".into(),
        ));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Config(format!("level {delta} outside (0, 1)")));
    }
    chi_square_quantile_upper(df, delta / k as f64)
}
