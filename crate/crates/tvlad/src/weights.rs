//! Self-weight families g(.) that damp extreme lag vectors, plus the
//! empirical quantile cutoff and a numeric probe of the boundedness
//! condition the asymptotics require of g.
//!
//! Variants:
//! - `LingPower(c)`: g(x) = (1 + c ||x||^2)^{-3/2};
//! - `SmoothIndicator(c or quantile q)`: g(x) = J(c - ||x||) with the C^1
//!   cubic ramp J (zero below -1, one above 1);
//! - `PanDecay`: g of the full past, (1 + sum_k k^{-3} |Y_{t-k}|)^{-2};
//! - `Unit`: constant 1 (unweighted LAD).

use crate::error::{Error, Result};
use crate::numerics::quantile_type7_sorted;
use crate::rng::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Cutoff for the smooth indicator: either a fixed radius or an empirical
/// quantile level of `|Y|` resolved once per dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutoffSpec {
    Fixed { c: f64 },
    Quantile { q: f64 },
}

/// Weight family configuration.
///
/// Serialized as `{"variant":"ling","c":0.5}`,
/// `{"variant":"smooth_indicator","q":0.9}` (or `"c"`),
/// `{"variant":"pan"}` or `{"variant":"unit"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum WeightSpec {
    #[serde(rename = "ling")]
    LingPower {
        c: f64,
    },
    SmoothIndicator {
        #[serde(flatten)]
        cutoff: CutoffSpec,
    },
    #[serde(rename = "pan")]
    PanDecay,
    Unit,
}

impl WeightSpec {
    pub fn ling(c: f64) -> Self {
        WeightSpec::LingPower { c }
    }

    pub fn smooth_indicator_cutoff(c: f64) -> Self {
        WeightSpec::SmoothIndicator {
            cutoff: CutoffSpec::Fixed { c },
        }
    }

    pub fn smooth_indicator_quantile(q: f64) -> Self {
        WeightSpec::SmoothIndicator {
            cutoff: CutoffSpec::Quantile { q },
        }
    }

    /// Resolve any data-dependent parameter (the quantile cutoff) against a
    /// dataset. Resolution happens once per series, not per window.
    pub fn resolve(&self, series: &[f64]) -> Result<ResolvedWeight> {
        match *self {
            WeightSpec::LingPower { c } => {
                if !(c > 0.0) {
                    return Err(Error::Config(format!(
                        "ling weight constant {c} must be > 0"
                    )));
                }
                Ok(ResolvedWeight::LingPower { c })
            }
            WeightSpec::SmoothIndicator { cutoff } => {
                let c = match cutoff {
                    CutoffSpec::Fixed { c } => {
                        if !(c > 0.0) {
                            return Err(Error::Config(format!(
                                "smooth indicator cutoff {c} must be > 0"
                            )));
                        }
                        c
                    }
                    CutoffSpec::Quantile { q } => {
                        if !(0.0 < q && q < 1.0) {
                            return Err(Error::Config(format!(
                                "quantile level {q} outside (0, 1)"
                            )));
                        }
                        resolve_quantile_cutoff(series, q)?
                    }
                };
                Ok(ResolvedWeight::SmoothIndicator {
                    c,
                    degenerate: c == 0.0,
                })
            }
            WeightSpec::PanDecay => Ok(ResolvedWeight::PanDecay),
            WeightSpec::Unit => Ok(ResolvedWeight::Unit),
        }
    }
}

/// Empirical q-quantile (type-7 interpolation) of `{|Y_1|, ..., |Y_T|}`,
/// used to instantiate the smooth-indicator cutoff. An all-zero series
/// yields 0, which callers treat as degenerate.
pub fn resolve_quantile_cutoff(series: &[f64], q: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Data("quantile cutoff of empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "quantile cutoff of a series with non-finite values".into(),
        ));
    }
    let mut abs: Vec<f64> = series.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_type7_sorted(&abs, q)
}

/// A weight with all parameters concrete, ready to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedWeight {
    LingPower { c: f64 },
    SmoothIndicator { c: f64, degenerate: bool },
    PanDecay,
    Unit,
}

/// The C^1 cubic ramp of the smooth indicator.
fn ramp(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u <= 1.0 {
        -0.25 * u * u * u + 0.75 * u + 0.5
    } else {
        1.0
    }
}

fn ramp_d1(u: f64) -> f64 {
    if (-1.0..=1.0).contains(&u) {
        -0.75 * u * u + 0.75
    } else {
        0.0
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl ResolvedWeight {
    /// w_{t-1}: the weight of one observation. `lag_vector` is
    /// `(Y_{t-1}, ..., Y_{t-p})`; `full_past` is `Y_1..Y_{t-1}` in time
    /// order and is consumed only by `PanDecay`.
    pub fn value(&self, lag_vector: &[f64], full_past: Option<&[f64]>) -> Result<f64> {
        match *self {
            ResolvedWeight::LingPower { c } => {
                let n2: f64 = lag_vector.iter().map(|v| v * v).sum();
                Ok((1.0 + c * n2).powf(-1.5))
            }
            ResolvedWeight::SmoothIndicator { c, .. } => Ok(ramp(c - norm2(lag_vector))),
            ResolvedWeight::PanDecay => {
                let past = full_past.ok_or_else(|| {
                    Error::Config("pan weight needs the full past of the series".into())
                })?;
                let t = past.len(); // past = Y_1..Y_{t-1}
                let mut sum = 0.0;
                for k in 1..=t {
                    sum += (k as f64).powi(-3) * past[t - k].abs();
                }
                Ok((1.0 + sum).powi(-2))
            }
            ResolvedWeight::Unit => Ok(1.0),
        }
    }

    /// Analytic gradient of g at a lag vector; needed by the bias term.
    /// `PanDecay` is not a function of the p-lag vector alone and is
    /// rejected.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            ResolvedWeight::LingPower { c } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                let factor = -3.0 * c * (1.0 + c * n2).powf(-2.5);
                Ok(x.iter().map(|v| factor * v).collect())
            }
            ResolvedWeight::SmoothIndicator { c, .. } => {
                let r = norm2(x);
                if r == 0.0 {
                    return Ok(vec![0.0; x.len()]);
                }
                let d = ramp_d1(c - r);
                Ok(x.iter().map(|v| -d * v / r).collect())
            }
            ResolvedWeight::Unit => Ok(vec![0.0; x.len()]),
            ResolvedWeight::PanDecay => Err(Error::Config(
                "pan weight has no p-vector gradient; use a ling or smooth-indicator weight".into(),
            )),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            ResolvedWeight::SmoothIndicator {
                degenerate: true,
                ..
            }
        )
    }
}

/// Shell-by-shell probe of `sup_x g(x)(1 + ||x||^3) + ||g'(x)||(||x|| + ||x||^2)`.
#[derive(Debug, Clone)]
pub struct BoundednessReport {
    pub sup_estimate: f64,
    pub finite: bool,
    /// (shell outer radius, shell max) pairs, innermost first.
    pub shell_maxima: Vec<(f64, f64)>,
}

/// Numerically probes the boundedness condition on g over `||x|| <= radius`,
/// with the gradient taken by central differences (step 1e-6). `finite`
/// reports whether the shell maxima stop growing between `radius/2` and
/// `radius`. Advisory only: an analytic supremum can only be probed.
pub fn assumption_boundedness_probe(
    weight: &ResolvedWeight,
    p: usize,
    radius: f64,
    grid_points: usize,
) -> Result<BoundednessReport> {
    if matches!(weight, ResolvedWeight::PanDecay) {
        return Err(Error::Config(
            "pan weight is not a p-vector function; boundedness probe unsupported".into(),
        ));
    }
    if !(radius > 0.0) || p == 0 {
        return Err(Error::Config("probe needs radius > 0 and p >= 1".into()));
    }
    let n_dirs = (grid_points.max(8)).min(4096);
    let n_radii = (grid_points.max(16)).min(4096);

    // unit directions: axes plus seeded random ones
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        dirs.push(e.clone());
        e[j] = -1.0;
        dirs.push(e);
    }
    let mut rng = stream_rng(0, 17);
    while dirs.len() < n_dirs {
        let mut d: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = norm2(&d);
        if n > 1e-6 {
            d.iter_mut().for_each(|v| *v /= n);
            dirs.push(d);
        }
    }

    let step = 1e-6;
    let criterion = |x: &[f64]| -> f64 {
        let r = norm2(x);
        let g = weight.value(x, None).unwrap_or(0.0);
        let mut grad_sq = 0.0;
        for j in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += step;
            xm[j] -= step;
            let d = (weight.value(&xp, None).unwrap_or(0.0)
                - weight.value(&xm, None).unwrap_or(0.0))
                / (2.0 * step);
            grad_sq += d * d;
        }
        g * (1.0 + r * r * r) + grad_sq.sqrt() * (r + r * r)
    };

    // log-spaced radii from radius/1e4 up to radius
    let mut shell_maxima: Vec<(f64, f64)> = Vec::new();
    let r_min = radius * 1e-4;
    let mut sup = criterion(&vec![0.0; p]);
    for i in 0..n_radii {
        let frac = (i + 1) as f64 / n_radii as f64;
        let r = r_min * (radius / r_min).powf(frac);
        let mut shell_max = 0.0f64;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|v| v * r).collect();
            shell_max = shell_max.max(criterion(&x));
        }
        sup = sup.max(shell_max);
        shell_maxima.push((r, shell_max));
    }

    let max_in = |lo: f64, hi: f64| {
        shell_maxima
            .iter()
            .filter(|(r, _)| *r > lo && *r <= hi)
            .map(|(_, m)| *m)
            .fold(0.0f64, f64::max)
    };
    let inner = max_in(radius / 4.0, radius / 2.0);
    let outer = max_in(radius / 2.0, radius);
    let finite = outer <= inner * (1.0 + 1e-6) + 1e-12;

    Ok(BoundednessReport {
        sup_estimate: sup,
        finite,
        shell_maxima,
    })
}
