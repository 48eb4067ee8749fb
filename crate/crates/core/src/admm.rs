//! Shared ADMM machinery: stopping thresholds on primal/dual residuals and
//! residual balancing of the penalty parameter.

use nalgebra::DMatrix;

use crate::scalar::{from_f64, Scalar};

/// Boyd-style stopping rule for a matrix-valued equality constraint with
/// `side * side` scalar equations.
pub(crate) struct StoppingRule<T> {
    pub eps_abs: T,
    pub eps_rel: T,
    sqrt_count: T,
}

impl<T: Scalar> StoppingRule<T> {
    pub fn new(eps_abs: T, eps_rel: T, side: usize) -> Self {
        Self {
            eps_abs,
            eps_rel,
            // sqrt of the number of scalar equations side^2
            sqrt_count: from_f64(side as f64),
        }
    }

    pub fn primal_threshold(&self, norm_a: T, norm_b: T) -> T {
        self.sqrt_count * self.eps_abs + self.eps_rel * norm_a.max(norm_b)
    }

    pub fn dual_threshold(&self, dual_norm: T) -> T {
        self.sqrt_count * self.eps_abs + self.eps_rel * dual_norm
    }
}

/// Keeps primal and dual residual norms within a factor `mu` of each other
/// by rescaling `rho` by `tau` and the scaled dual variable by `1/tau`,
/// which leaves the underlying multiplier `rho * u` unchanged.
pub(crate) fn balance_rho<T: Scalar>(
    primal: T,
    dual: T,
    mu: T,
    tau: T,
    rho: &mut T,
    dual_var: &mut DMatrix<T>,
) {
    if primal > mu * dual {
        *rho *= tau;
        *dual_var /= tau;
    } else if dual > mu * primal {
        *rho /= tau;
        *dual_var *= tau;
    }
}
