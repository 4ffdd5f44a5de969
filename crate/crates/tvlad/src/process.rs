//! Time-varying AR(p) processes: path simulation, frozen-coefficient
//! stationary approximations, derivative processes, the tvAR(1) moving
//! average coefficients and a numeric check of the local-approximation
//! bound.
//!
//! Coefficient functions come from a small parametric family with analytic
//! first and second derivatives, so models serialize cleanly into configs
//! and CSV headers and the derivative processes never need numerical
//! differentiation.

use crate::error::{Error, Result};
use crate::innovations::InnovationSpec;
use crate::rng::{stream_rng, PATH_STREAM};
use serde::{Deserialize, Serialize};

/// Default number of pre-sample steps run at frozen u = 0 coefficients.
pub const DEFAULT_BURN_IN: usize = 500;

/// A coefficient curve u in [0,1] -> R with analytic derivatives.
///
/// `Sine { amp, freq, phase }` is `amp * sin(2 pi (freq u + phase))`;
/// `Poly` holds ascending powers of u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefFn {
    Const { value: f64 },
    Linear { slope: f64, intercept: f64 },
    Sine { amp: f64, freq: f64, phase: f64 },
    Poly { coeffs: Vec<f64> },
}

impl CoefFn {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            CoefFn::Const { value } => *value,
            CoefFn::Linear { slope, intercept } => slope * u + intercept,
            CoefFn::Sine { amp, freq, phase } => {
                amp * (2.0 * std::f64::consts::PI * (freq * u + phase)).sin()
            }
            CoefFn::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
        }
    }

    pub fn d1(&self, u: f64) -> f64 {
        match self {
            CoefFn::Const { .. } => 0.0,
            CoefFn::Linear { slope, .. } => *slope,
            CoefFn::Sine { amp, freq, phase } => {
                let w = 2.0 * std::f64::consts::PI * freq;
                amp * w * (2.0 * std::f64::consts::PI * (freq * u + phase)).cos()
            }
            CoefFn::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c),
        }
    }

    pub fn d2(&self, u: f64) -> f64 {
        match self {
            CoefFn::Const { .. } | CoefFn::Linear { .. } => 0.0,
            CoefFn::Sine { amp, freq, phase } => {
                let w = 2.0 * std::f64::consts::PI * freq;
                -amp * w * w * (2.0 * std::f64::consts::PI * (freq * u + phase)).sin()
            }
            CoefFn::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + (k * (k - 1)) as f64 * c),
        }
    }
}

/// A tvAR(p) model: p coefficient curves plus an innovation law.
///
/// Construction validates stability on a 1001-point grid of [0, 1] (all
/// roots of `1 - sum_j beta_j(u) z^j` strictly outside the closed unit
/// disk, margin 1e-6) and cross-checks the analytic derivatives against
/// central finite differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TvModelRepr", into = "TvModelRepr")]
pub struct TvModel {
    coeffs: Vec<CoefFn>,
    innovation: InnovationSpec,
}

#[derive(Serialize, Deserialize)]
struct TvModelRepr {
    p: usize,
    coeffs: Vec<CoefFn>,
    innovation: InnovationSpec,
}

impl TryFrom<TvModelRepr> for TvModel {
    type Error = Error;
    fn try_from(r: TvModelRepr) -> Result<Self> {
        if r.p != r.coeffs.len() {
            return Err(Error::Config(format!(
                "declared order {} does not match {} coefficient functions",
                r.p,
                r.coeffs.len()
            )));
        }
        TvModel::new(r.coeffs, r.innovation)
    }
}

impl From<TvModel> for TvModelRepr {
    fn from(m: TvModel) -> Self {
        TvModelRepr {
            p: m.coeffs.len(),
            coeffs: m.coeffs,
            innovation: m.innovation,
        }
    }
}

const STABILITY_GRID: usize = 1001;
const STABILITY_MARGIN: f64 = 1e-6;

impl TvModel {
    pub fn new(coeffs: Vec<CoefFn>, innovation: InnovationSpec) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("a tvAR model needs order p >= 1".into()));
        }
        innovation.validate()?;
        let model = TvModel { coeffs, innovation };
        model.check_stability()?;
        model.check_derivatives()?;
        Ok(model)
    }

    /// The tvAR(1) model with coefficient `amp * sin(2 pi u)`.
    pub fn sine_ar1(amp: f64, innovation: InnovationSpec) -> Result<Self> {
        Self::new(
            vec![CoefFn::Sine {
                amp,
                freq: 1.0,
                phase: 0.0,
            }],
            innovation,
        )
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[CoefFn] {
        &self.coeffs
    }

    pub fn innovation(&self) -> &InnovationSpec {
        &self.innovation
    }

    /// beta(u) as a vector.
    pub fn beta(&self, u: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval(u)).collect()
    }

    /// beta(u) with the pre-sample convention beta(u) = beta(0) for u < 0.
    pub fn beta_frozen(&self, u: f64) -> Vec<f64> {
        self.beta(u.max(0.0))
    }

    pub fn beta_d1(&self, u: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.d1(u)).collect()
    }

    pub fn beta_d2(&self, u: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.d2(u)).collect()
    }

    /// sup over the grid of |beta_1(u)| (only meaningful for p = 1).
    pub fn sup_abs_beta1(&self) -> f64 {
        (0..STABILITY_GRID)
            .map(|i| {
                self.coeffs[0]
                    .eval(i as f64 / (STABILITY_GRID - 1) as f64)
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest grid-estimated Lipschitz constant of beta_1 (p = 1 helper).
    pub fn lipschitz_beta1(&self) -> f64 {
        let n = 10_000;
        let mut lip = 0.0f64;
        let mut prev = self.coeffs[0].eval(0.0);
        for i in 1..=n {
            let u = i as f64 / n as f64;
            let v = self.coeffs[0].eval(u);
            lip = lip.max((v - prev).abs() * n as f64);
            prev = v;
        }
        lip
    }

    fn check_stability(&self) -> Result<()> {
        let p = self.order();
        for i in 0..STABILITY_GRID {
            let u = i as f64 / (STABILITY_GRID - 1) as f64;
            let beta = self.beta(u);
            // characteristic roots lambda of lambda^p - b1 lambda^{p-1} - ... - bp;
            // stability needs |lambda| < 1/(1 + margin)
            let max_mod = if p == 1 {
                beta[0].abs()
            } else {
                let mut companion = nalgebra::DMatrix::<f64>::zeros(p, p);
                for (j, b) in beta.iter().enumerate() {
                    companion[(0, j)] = *b;
                }
                for j in 1..p {
                    companion[(j, j - 1)] = 1.0;
                }
                companion
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            };
            if max_mod >= 1.0 / (1.0 + STABILITY_MARGIN) {
                return Err(Error::Config(format!(
                    "model unstable at u = {u:.4}: characteristic root modulus {max_mod:.6}"
                )));
            }
        }
        Ok(())
    }

    fn check_derivatives(&self) -> Result<()> {
        let h = 1e-5;
        for (j, c) in self.coeffs.iter().enumerate() {
            for i in 0..STABILITY_GRID {
                let u = i as f64 / (STABILITY_GRID - 1) as f64;
                let fd1 = (c.eval(u + h) - c.eval(u - h)) / (2.0 * h);
                let fd2 = (c.eval(u + h) - 2.0 * c.eval(u) + c.eval(u - h)) / (h * h);
                if (c.d1(u) - fd1).abs() > 1e-4 || (c.d2(u) - fd2).abs() > 1e-3 {
                    return Err(Error::Config(format!(
                        "coefficient {j} derivative mismatch at u = {u:.4}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A simulated tvAR path with its innovation stream.
#[derive(Debug, Clone)]
pub struct TvSeries {
    pub values: Vec<f64>,
    /// In-sample innovations e_1..e_T, stored as the residuals the
    /// recursion reproduces: Y_t - beta(t/T)' X_{t-1} equals these bitwise
    /// (at most one ulp from the drawn values).
    pub innovations: Vec<f64>,
    pub model: TvModel,
    pub seed: u64,
}

impl TvSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Simulates Y_{1..T}: `burn_in` steps at frozen u = 0 coefficients from a
/// zero pre-sample state, then the time-varying recursion with u = t/T.
pub fn simulate_tvar(model: &TvModel, t_len: usize, burn_in: usize, seed: u64) -> Result<TvSeries> {
    let p = model.order();
    if t_len <= p {
        return Err(Error::Config(format!(
            "series length {t_len} must exceed the order {p}"
        )));
    }
    let draws = draw_stream(model, burn_in + t_len, seed);
    let mut state = vec![0.0f64; p]; // state[0] = most recent
    let mut values = Vec::with_capacity(t_len);
    let mut innovations = Vec::with_capacity(t_len);
    let beta0 = model.beta(0.0);
    for eps in draws.iter().take(burn_in) {
        let y = recurse(&beta0, &state, *eps);
        shift_in(&mut state, y);
    }
    for t in 1..=t_len {
        let beta = model.beta(t as f64 / t_len as f64);
        let lag = dot(&beta, &state);
        let y = lag + draws[burn_in + t - 1];
        shift_in(&mut state, y);
        values.push(y);
        // store the residual the recursion reproduces, so the identity
        // Y_t - beta(t/T)' X_{t-1} = eps_t holds bitwise (one ulp off the
        // drawn value at most)
        innovations.push(y - lag);
    }
    Ok(TvSeries {
        values,
        innovations,
        model: model.clone(),
        seed,
    })
}

/// The stationary approximation at u0: the same recursion and innovation
/// stream as [`simulate_tvar`] with coefficients frozen at beta(u0).
pub fn simulate_stationary(
    model: &TvModel,
    u0: f64,
    t_len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let p = model.order();
    if t_len <= p {
        return Err(Error::Config(format!(
            "series length {t_len} must exceed the order {p}"
        )));
    }
    if !(0.0..=1.0).contains(&u0) {
        return Err(Error::Config(format!("u0 = {u0} outside [0, 1]")));
    }
    let draws = draw_stream(model, burn_in + t_len, seed);
    let beta = model.beta(u0);
    let mut state = vec![0.0f64; p];
    let mut values = Vec::with_capacity(t_len);
    for (k, eps) in draws.iter().enumerate() {
        let y = recurse(&beta, &state, *eps);
        shift_in(&mut state, y);
        if k >= burn_in {
            values.push(y);
        }
    }
    Ok(values)
}

/// Joint simulation of the stationary process at u0 together with its
/// first (and optionally second) derivative process, sharing one
/// innovation stream. The derivative recursions are
///
/// ```text
///   dY_t  = beta'(u0)' X_{t-1}  + beta(u0)' dX_{t-1}
///   d2Y_t = beta''(u0)' X_{t-1} + 2 beta'(u0)' dX_{t-1} + beta(u0)' d2X_{t-1}
/// ```
#[derive(Debug, Clone)]
pub struct StationaryWithDerivatives {
    pub y: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Option<Vec<f64>>,
}

pub fn simulate_stationary_derivatives(
    model: &TvModel,
    u0: f64,
    t_len: usize,
    burn_in: usize,
    order: u8,
    seed: u64,
) -> Result<StationaryWithDerivatives> {
    if !(order == 1 || order == 2) {
        return Err(Error::Config(format!(
            "derivative order {order} must be 1 or 2"
        )));
    }
    if !(0.0..=1.0).contains(&u0) {
        return Err(Error::Config(format!("u0 = {u0} outside [0, 1]")));
    }
    let p = model.order();
    let draws = draw_stream(model, burn_in + t_len, seed);
    let beta = model.beta(u0);
    let betad1 = model.beta_d1(u0);
    let betad2 = model.beta_d2(u0);
    let mut sy = vec![0.0f64; p];
    let mut s1 = vec![0.0f64; p];
    let mut s2 = vec![0.0f64; p];
    let mut y_out = Vec::with_capacity(t_len);
    let mut d1_out = Vec::with_capacity(t_len);
    let mut d2_out = Vec::with_capacity(t_len);
    for (k, eps) in draws.iter().enumerate() {
        let y = recurse(&beta, &sy, *eps);
        let d1 = dot(&betad1, &sy) + dot(&beta, &s1);
        let d2 = dot(&betad2, &sy) + 2.0 * dot(&betad1, &s1) + dot(&beta, &s2);
        shift_in(&mut sy, y);
        shift_in(&mut s1, d1);
        shift_in(&mut s2, d2);
        if k >= burn_in {
            y_out.push(y);
            d1_out.push(d1);
            d2_out.push(d2);
        }
    }
    Ok(StationaryWithDerivatives {
        y: y_out,
        d1: d1_out,
        d2: if order == 2 { Some(d2_out) } else { None },
    })
}

/// The derivative process of the requested order at u0 (burn-in
/// [`DEFAULT_BURN_IN`]).
pub fn derivative_process(
    model: &TvModel,
    u0: f64,
    order: u8,
    t_len: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sim = simulate_stationary_derivatives(model, u0, t_len, DEFAULT_BURN_IN, order, seed)?;
    Ok(match order {
        1 => sim.d1,
        _ => sim.d2.expect("order 2 requested"),
    })
}

/// Moving-average coefficients of a tvAR(1) path:
/// `psi_{l,t,T} = prod_{k=0}^{l-1} beta_1((t-k)/T)` with the frozen
/// pre-sample convention, `psi_0 = 1`.
pub fn tvma_coefficients(
    model: &TvModel,
    t: usize,
    t_len: usize,
    l_max: usize,
) -> Result<Vec<f64>> {
    if model.order() != 1 {
        return Err(Error::Config(format!(
            "MA coefficients implemented for p = 1 only, model has p = {}",
            model.order()
        )));
    }
    if t == 0 || t > t_len {
        return Err(Error::Config(format!("time index {t} outside 1..={t_len}")));
    }
    let mut psi = Vec::with_capacity(l_max + 1);
    let mut acc = 1.0;
    psi.push(acc);
    for l in 1..=l_max {
        let k = l - 1;
        let u = (t as f64 - k as f64) / t_len as f64;
        acc *= model.beta_frozen(u)[0];
        psi.push(acc);
    }
    Ok(psi)
}

/// Smallest truncation length with rho^L below 1e-12.
pub fn default_ma_truncation(rho: f64) -> usize {
    if !(0.0..1.0).contains(&rho) || rho == 0.0 {
        return 1;
    }
    ((-12.0 * std::f64::consts::LN_10) / rho.ln()).ceil() as usize
}

/// One time point of the approximation-bound check.
#[derive(Debug, Clone, Serialize)]
pub struct GapCheck {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Verifies the local-approximation bound numerically for a tvAR(1) model:
/// for each t with |t/T - u0| < 1/T,
///
/// ```text
///     |Y_{t,T} - Y_t(u0)|  <=  C0 (|t/T - u0| + 1/T) sum_j inv_l_j |eps_{t-j}|
/// ```
///
/// with both sides evaluated from truncated MA expansions on one shared
/// innovation stream. The envelope `inv_l_j = (1 + j(j+1)/2) rho^{j-1}`
/// (rho = sup |beta_1|) dominates the telescoped product difference, and
/// `C0` is the grid-estimated Lipschitz constant of beta_1 times
/// `(1 - rho)^{-2}`.
pub fn approximation_gap_check(
    model: &TvModel,
    u0: f64,
    t_len: usize,
    l_trunc: usize,
    seed: u64,
) -> Result<Vec<GapCheck>> {
    if model.order() != 1 {
        return Err(Error::Config("gap check implemented for p = 1 only".into()));
    }
    if !(0.0 < u0 && u0 < 1.0) {
        return Err(Error::Config(format!("u0 = {u0} outside (0, 1)")));
    }
    let rho = model.sup_abs_beta1();
    if rho.powi(l_trunc as i32) > 1e-8 {
        return Err(Error::Config(format!(
            "truncation L = {l_trunc} leaves error above 1e-8 for sup|beta_1| = {rho:.3}"
        )));
    }
    let c0 = model.lipschitz_beta1() / ((1.0 - rho) * (1.0 - rho));
    let beta_u0 = model.beta(u0)[0];

    // stream covers times -L+1 .. T; eps at time tau sits at index tau + L - 1
    let draws = draw_stream(model, l_trunc + t_len, seed);
    let eps = |tau: i64| draws[(tau + l_trunc as i64 - 1) as usize];

    let mut out = Vec::new();
    for t in 1..=t_len {
        let delta = (t as f64 / t_len as f64 - u0).abs();
        if delta >= 1.0 / t_len as f64 {
            continue;
        }
        let psi = tvma_coefficients(model, t, t_len, l_trunc)?;
        let mut y_tv = 0.0;
        let mut y_st = 0.0;
        let mut envelope = 0.0;
        let mut frozen_pow = 1.0;
        for (l, psi_l) in psi.iter().enumerate() {
            let e = eps(t as i64 - l as i64);
            y_tv += psi_l * e;
            y_st += frozen_pow * e;
            let inv_l = if l == 0 {
                1.0
            } else {
                (1.0 + 0.5 * (l as f64) * (l as f64 + 1.0)) * rho.powi(l as i32 - 1)
            };
            envelope += inv_l * e.abs();
            frozen_pow *= beta_u0;
        }
        let lhs = (y_tv - y_st).abs();
        let bound_delta = delta + 1.0 / t_len as f64;
        let rhs = c0 * bound_delta * envelope;
        out.push(GapCheck {
            t,
            lhs,
            rhs,
            ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
            holds: lhs <= rhs,
        });
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no time index satisfies |t/T - u0| < 1/T for T = {t_len}, u0 = {u0}"
        )));
    }
    Ok(out)
}

fn draw_stream(model: &TvModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, PATH_STREAM);
    (0..n).map(|_| model.innovation().draw(&mut rng)).collect()
}

#[inline]
fn recurse(beta: &[f64], state: &[f64], eps: f64) -> f64 {
    dot(beta, state) + eps
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[inline]
fn shift_in(state: &mut [f64], y: f64) {
    state.rotate_right(1);
    state[0] = y;
}
