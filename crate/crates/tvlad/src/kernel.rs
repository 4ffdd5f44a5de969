//! Kernel functions for the local fits. The menu is fixed to the
//! Epanechnikov kernel `K(x) = 0.75 (1 - x^2)` on `[-1, 1]`.

use crate::error::{Error, Result};
use crate::numerics::adaptive_quadrature;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub kind: KernelKind,
}

impl KernelSpec {
    pub fn epanechnikov() -> Self {
        Self::default()
    }

    /// Support half-width C_K.
    pub fn support(&self) -> f64 {
        1.0
    }

    /// K(x); zero outside the support.
    pub fn value(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            0.0
        } else {
            0.75 * (1.0 - x * x)
        }
    }

    /// `int K(v)^m v^j dv` over the support by adaptive quadrature to 1e-12.
    /// `m` in {1, 2}, `j` in {0, 1, 2}; `(2, 0)` is kappa_2 = 0.6 and
    /// `(1, 2)` is the second moment 0.2 used by the bias correction.
    pub fn moment(&self, m: u32, j: u32) -> Result<f64> {
        if !(1..=2).contains(&m) || j > 2 {
            return Err(Error::Config(format!(
                "kernel moment (m = {m}, j = {j}) outside m in {{1,2}}, j in {{0,1,2}}"
            )));
        }
        let c = self.support();
        let f = |v: f64| self.value(v).powi(m as i32) * v.powi(j as i32);
        Ok(adaptive_quadrature(&f, -c, c, 1e-12))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn density_normalization() {
        let k = KernelSpec::epanechnikov();
        assert_abs_diff_eq!(k.moment(1, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa2_and_second_moment() {
        let k = KernelSpec::epanechnikov();
        assert_abs_diff_eq!(k.moment(2, 0).unwrap(), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(k.moment(1, 2).unwrap(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn odd_moment_vanishes() {
        let k = KernelSpec::epanechnikov();
        assert_abs_diff_eq!(k.moment(1, 1).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_and_compact() {
        let k = KernelSpec::epanechnikov();
        for x in [0.0, 0.3, 0.77, 0.999] {
            assert_eq!(k.value(x), k.value(-x));
        }
        assert_eq!(k.value(1.0000001), 0.0);
        assert_eq!(k.value(-3.0), 0.0);
        assert!(k.value(0.5) > 0.0);
    }

    #[test]
    fn invalid_moment_orders_rejected() {
        let k = KernelSpec::epanechnikov();
        assert!(k.moment(3, 0).is_err());
        assert!(k.moment(1, 3).is_err());
    }
}
