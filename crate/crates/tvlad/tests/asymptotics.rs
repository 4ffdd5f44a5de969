//! Distributional shape of the local estimator: the standardized error
//! sqrt(Th) (beta_hat - beta(u0)) should be approximately normal with
//! variance kappa_2 / (4 f(0)^2) * Sigma^{-1} Omega Sigma^{-1}, with the
//! matrices estimated by their kernel-weighted sample analogues.

use tvlad::estimator::lswlade_at;
use tvlad::innovations::InnovationSpec;
use tvlad::process::{simulate_tvar, TvModel, DEFAULT_BURN_IN};
use tvlad::rng::derive_seed;
use tvlad::weights::WeightSpec;
use tvlad::EstimationConfig;

struct Shape {
    var_ratio: f64,
    jarque_bera: f64,
    skew: f64,
}

fn standardized_shape(u0: f64, reps: usize) -> Shape {
    let model = TvModel::sine_ar1(0.8, InnovationSpec::gaussian()).unwrap();
    let truth = model.beta(u0)[0];
    let t = 2000;
    let config = EstimationConfig::new(WeightSpec::ling(0.5), 1);
    let h = config.bandwidth_for(t).unwrap();
    let th = t as f64 * h;

    let mut z = Vec::with_capacity(reps);
    let mut v1 = 0.0;
    let mut v2 = 0.0;
    for r in 0..reps {
        let s = simulate_tvar(&model, t, DEFAULT_BURN_IN, derive_seed(31_415, r as u64)).unwrap();
        let fit = lswlade_at(&s.values, u0, &config).unwrap();
        z.push(th.sqrt() * (fit.beta_hat[0] - truth));
        v1 += fit.v1[0][0] / reps as f64;
        v2 += fit.v2[0][0] / reps as f64;
    }
    let f0 = model.innovation().density_at_zero();
    let kappa2 = 0.6;
    let target = kappa2 / (4.0 * f0 * f0) * v2 / (v1 * v1);

    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let skew = z.iter().map(|v| ((v - mean) / sd).powi(3)).sum::<f64>() / n;
    let kurt = z.iter().map(|v| ((v - mean) / sd).powi(4)).sum::<f64>() / n - 3.0;
    Shape {
        var_ratio: var / target,
        jarque_bera: n / 6.0 * (skew * skew + kurt * kurt / 4.0),
        skew,
    }
}

#[test]
fn standardized_variance_matches_plug_in_sandwich() {
    // both at a moderate-persistence point and at the coefficient peak
    for u0 in [0.10, 0.25] {
        let shape = standardized_shape(u0, 500);
        assert!(
            (0.8..=1.2).contains(&shape.var_ratio),
            "u0 = {u0}: empirical/plug-in variance ratio {:.3}",
            shape.var_ratio
        );
    }
}

#[test]
fn standardized_error_passes_normality_test() {
    // At the |beta| peak (u0 = 0.25, beta = 0.8) the standardized error
    // still carries visible finite-sample skew (~ -0.45) at Th ~ 69, so
    // the Jarque-Bera check runs at a moderate-persistence interior point;
    // the variance test above covers the peak.
    let shape = standardized_shape(0.10, 500);
    let crit = tvlad::numerics::chi_square_quantile_upper(2, 0.01).unwrap();
    assert!(
        shape.jarque_bera < crit,
        "normality rejected: JB = {:.2} (skew {:.3})",
        shape.jarque_bera,
        shape.skew
    );
}
