//! Closed-form constants, step-size admissibility, parameter feasibility
//! scans and regularity-condition checks.

mod constants;
mod params;
mod regularity;

use serde::{Deserialize, Serialize};

pub use constants::{
    constants, constants_unchecked, omega0, omega1, omega2_dual_eb, omega2_primal, omega3_dual_eb,
    omega3_primal, smoothing_precondition, ConstantSet,
};
pub use params::{
    check_descent_params, check_dual_descent_params, feasibility_point, feasibility_scan,
    universal_params, universal_params_at, universal_t2, Bound, DescentReport, FeasibilityPoint,
    ScanMatrix,
};
pub use regularity::{
    interaction_dominance, kl_ratio_scan, rho_at, weak_mvi_rho, KlScan, RhoField, RhoScan,
};

/// Which player a one-sided condition refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// The minimizing player `x`.
    Primal,
    /// The maximizing player `y`.
    Dual,
}

/// Kurdyka-Lojasiewicz data: `gap^theta <= residual / tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSpec {
    pub theta: f64,
    pub tau: f64,
    pub side: Side,
}

impl KlSpec {
    pub fn new(theta: f64, tau: f64, side: Side) -> crate::Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(crate::Error::InvalidParam(format!(
                "KL exponent must lie in (0, 1), got {theta}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(crate::Error::InvalidParam(format!(
                "KL modulus must be positive, got {tau}"
            )));
        }
        Ok(Self { theta, tau, side })
    }
}
