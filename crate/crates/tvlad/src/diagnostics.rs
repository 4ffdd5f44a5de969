//! Hill-plot tail-index estimation for the left and right tails of a
//! series, used to justify heavy-tail modeling on real data.
//!
//! Both sides are defined on positive exceedances after reflection: the
//! right tail keeps `y > 0`, the left tail keeps `-y` for `y < 0`. With
//! descending order statistics `x_(1) >= ... >= x_(m)` of the retained
//! values, the estimate at `k` is
//!
//! ```text
//!     H(k) = [ (1/k) sum_{i=1}^{k} ln( x_(i) / x_(k+1) ) ]^{-1} .
//! ```

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    Left,
    Right,
}

/// Hill estimates over a range of k values, sharing one sort.
#[derive(Debug, Clone, Serialize)]
pub struct HillCurve {
    pub k_values: Vec<usize>,
    pub estimates: Vec<f64>,
    pub side: TailSide,
    pub n_used: usize,
}

impl HillCurve {
    /// Median estimate over the curve.
    pub fn plateau_median(&self) -> f64 {
        crate::numerics::median(&self.estimates)
    }

    /// Ratio of the median over the last quarter of the k range to the
    /// median over the first quarter; far from 1 means no stable plateau.
    pub fn drift_ratio(&self) -> f64 {
        let n = self.estimates.len();
        if n < 4 {
            return 1.0;
        }
        let head = crate::numerics::median(&self.estimates[..n / 4]);
        let tail = crate::numerics::median(&self.estimates[n - n / 4..]);
        tail / head
    }

    /// Interquartile band of the estimates.
    pub fn quartiles(&self) -> (f64, f64) {
        let mut v = self.estimates.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| crate::numerics::quantile_type7_sorted(&v, p).unwrap();
        (q(0.25), q(0.75))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,estimate\n");
        for (k, e) in self.k_values.iter().zip(&self.estimates) {
            out.push_str(&format!("{k},{e}\n"));
        }
        out
    }
}

fn retained(series: &[f64], side: TailSide) -> Vec<f64> {
    match side {
        TailSide::Right => series.iter().copied().filter(|y| *y > 0.0).collect(),
        TailSide::Left => series.iter().filter(|y| **y < 0.0).map(|y| -y).collect(),
    }
}

fn sort_descending(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    xs
}

fn hill_from_sorted(sorted_desc: &[f64], k: usize) -> Result<f64> {
    let m = sorted_desc.len();
    if k == 0 {
        return Err(Error::Config("hill estimate needs k >= 1".into()));
    }
    if k + 1 > m {
        return Err(Error::Data(format!(
            "insufficient exceedances: k + 1 = {} exceeds retained sample {m}",
            k + 1
        )));
    }
    let x_ref = sorted_desc[k];
    let mean_log: f64 = sorted_desc[..k]
        .iter()
        .map(|x| (x / x_ref).ln())
        .sum::<f64>()
        / k as f64;
    if !(mean_log > 0.0) {
        return Err(Error::Numeric(
            "hill estimate degenerate: all top order statistics tied".into(),
        ));
    }
    Ok(1.0 / mean_log)
}

/// Tail-index estimate from the top k exceedances on the chosen side.
pub fn hill_estimate(series: &[f64], k: usize, side: TailSide) -> Result<f64> {
    let sorted = sort_descending(retained(series, side));
    hill_from_sorted(&sorted, k)
}

/// Hill estimates for k in `k_min..=k_max` with the given step, sharing a
/// single sort. Each point reproduces `hill_estimate` bitwise.
pub fn hill_curve(
    series: &[f64],
    k_min: usize,
    k_max: usize,
    step: usize,
    side: TailSide,
) -> Result<HillCurve> {
    if step == 0 || k_min == 0 || k_max < k_min {
        return Err(Error::Config(format!(
            "bad k range {k_min}..={k_max} step {step}"
        )));
    }
    let sorted = sort_descending(retained(series, side));
    let m = sorted.len();
    let k_hi = k_max.min(m.saturating_sub(1));
    if k_hi < k_min {
        return Err(Error::Data(format!(
            "k range empty after clipping to retained sample of {m}"
        )));
    }
    let mut k_values = Vec::new();
    let mut estimates = Vec::new();
    let mut k = k_min;
    while k <= k_hi {
        k_values.push(k);
        estimates.push(hill_from_sorted(&sorted, k)?);
        k += step;
    }
    Ok(HillCurve {
        k_values,
        estimates,
        side,
        n_used: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn pareto_sample(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|_| rng.random::<f64>().powf(-1.0 / alpha))
            .collect()
    }

    fn abs_sample(spec: &crate::innovations::InnovationSpec, n: usize, seed: u64) -> Vec<f64> {
        crate::innovations::sample_innovations(spec, n, seed)
            .unwrap()
            .into_iter()
            .map(f64::abs)
            .collect()
    }

    #[test]
    fn two_point_closed_form() {
        let v = hill_estimate(&[std::f64::consts::E, 1.0], 1, TailSide::Right).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pareto_consistency() {
        let xs = pareto_sample(1.0, 100_000, 3);
        let v = hill_estimate(&xs, 2000, TailSide::Right).unwrap();
        assert!((v - 1.0).abs() < 0.07, "hill {v}");
    }

    #[test]
    fn pareto_curve_plateau() {
        let xs = pareto_sample(2.0, 100_000, 5);
        let m = xs.len();
        let curve = hill_curve(&xs, m / 100, m / 10, 50, TailSide::Right).unwrap();
        assert!(
            (curve.plateau_median() - 2.0).abs() < 0.15,
            "median {}",
            curve.plateau_median()
        );
    }

    #[test]
    fn curve_single_point_matches_estimate() {
        let xs = pareto_sample(1.5, 5000, 7);
        let curve = hill_curve(&xs, 200, 200, 1, TailSide::Right).unwrap();
        let point = hill_estimate(&xs, 200, TailSide::Right).unwrap();
        assert_eq!(curve.estimates, vec![point]);
    }

    #[test]
    fn student_t2_and_cauchy_plateaus_separate() {
        let t2 = abs_sample(
            &crate::innovations::InnovationSpec::student_t(2.0).unwrap(),
            100_000,
            11,
        );
        let cauchy = abs_sample(&crate::innovations::InnovationSpec::cauchy(), 100_000, 11);
        let m = 100_000;
        let ct2 = hill_curve(&t2, m / 100, m / 10, 100, TailSide::Right).unwrap();
        let cc = hill_curve(&cauchy, m / 100, m / 10, 100, TailSide::Right).unwrap();
        assert!(
            (ct2.plateau_median() - 2.0).abs() < 0.3,
            "t2 median {}",
            ct2.plateau_median()
        );
        assert!(
            (cc.plateau_median() - 1.0).abs() < 0.15,
            "cauchy median {}",
            cc.plateau_median()
        );
        // interquartile bands do not overlap
        let (t2_lo, _) = ct2.quartiles();
        let (_, c_hi) = cc.quartiles();
        assert!(
            t2_lo > c_hi,
            "bands overlap: t2 q25 {t2_lo} vs cauchy q75 {c_hi}"
        );
    }

    #[test]
    fn gaussian_sample_drifts_without_plateau() {
        let xs = abs_sample(&crate::innovations::InnovationSpec::gaussian(), 50_000, 13);
        let m = xs.len();
        let curve = hill_curve(&xs, m / 100, m / 10, 50, TailSide::Right).unwrap();
        // light tails give no stable plateau: the estimate keeps drifting
        // across the k range and sits far above any heavy-tail index
        assert!(
            (curve.drift_ratio() - 1.0).abs() > 0.2,
            "drift ratio {}",
            curve.drift_ratio()
        );
        assert!(curve.estimates.iter().all(|v| *v > 3.0));
    }

    #[test]
    fn scale_invariance_bitwise_for_power_of_two() {
        let xs = pareto_sample(1.2, 4000, 17);
        let scaled: Vec<f64> = xs.iter().map(|x| 4.0 * x).collect();
        for k in [10usize, 100, 500] {
            let a = hill_estimate(&xs, k, TailSide::Right).unwrap();
            let b = hill_estimate(&scaled, k, TailSide::Right).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "k = {k}");
        }
        // arbitrary positive scale: equal to floating tolerance
        let scaled: Vec<f64> = xs.iter().map(|x| 0.37 * x).collect();
        let a = hill_estimate(&xs, 300, TailSide::Right).unwrap();
        let b = hill_estimate(&scaled, 300, TailSide::Right).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn power_transform_divides_index() {
        let xs = pareto_sample(2.0, 4000, 19);
        let squared: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let a = hill_estimate(&xs, 250, TailSide::Right).unwrap();
        let b = hill_estimate(&squared, 250, TailSide::Right).unwrap();
        assert!((b - a / 2.0).abs() < 1e-12 * a.abs(), "{b} vs {}", a / 2.0);
    }

    #[test]
    fn left_right_reflection_exact() {
        let mut rng = stream_rng(21, 0);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 8.0 - 4.0).collect();
        let negated: Vec<f64> = xs.iter().map(|x| -x).collect();
        for k in [5usize, 50, 200] {
            let l = hill_estimate(&negated, k, TailSide::Left).unwrap();
            let r = hill_estimate(&xs, k, TailSide::Right).unwrap();
            assert_eq!(l.to_bits(), r.to_bits());
        }
    }

    #[test]
    fn zeros_excluded_and_k_bounds_enforced() {
        let xs = [0.0, 0.0, 1.0, 2.0, 3.0, -5.0];
        // right side retains (1, 2, 3): k = 2 works, k = 3 does not
        assert!(hill_estimate(&xs, 2, TailSide::Right).is_ok());
        assert!(hill_estimate(&xs, 3, TailSide::Right).is_err());
        assert!(hill_estimate(&xs, 0, TailSide::Right).is_err());
        // left side retains only (5): no admissible k
        assert!(hill_estimate(&xs, 1, TailSide::Left).is_err());
        // empty k range after clipping
        assert!(hill_curve(&xs, 3, 10, 1, TailSide::Right).is_err());
    }
}
