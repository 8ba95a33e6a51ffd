use serde::{Deserialize, Serialize};

use super::KlSpec;
use crate::error::{Error, Result};

/// Error-bound and smoothness constants of the DS-GDA analysis.
///
/// The primal-side set (`sigma1`..`sigma8`, `l_d`) controls the solution
/// maps `x(y, z, v)`, `y(x, z, v)` and the dual function `d`; `sigma_prime`
/// and `l_h` are their mirrors for the dual-side Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma4: f64,
    pub sigma5: f64,
    pub sigma6: f64,
    pub sigma7: f64,
    pub sigma8: f64,
    /// Smoothness modulus of `d(., z, v)`: `L_y sigma1 + L_y + r2`.
    pub l_d: f64,
    pub sigma_prime: f64,
    /// Smoothness modulus of `h(., z, v)`.
    pub l_h: f64,
}

/// `r2 > (L_y / (r1 - L_x) + 2) L_y` together with `r1 > L_x`.
pub fn smoothing_precondition(lx: f64, ly: f64, r1: f64, r2: f64) -> Result<()> {
    if !(r1 > lx) {
        return Err(Error::Precondition(format!(
            "r1 > L_x fails: r1 = {r1}, L_x = {lx}"
        )));
    }
    let need = (ly / (r1 - lx) + 2.0) * ly;
    if !(r2 > need) {
        return Err(Error::Precondition(format!(
            "r2 > (L_y/(r1-L_x) + 2) L_y fails: r2 = {r2}, bound = {need}"
        )));
    }
    Ok(())
}

/// Evaluate every constant after checking the smoothing preconditions and
/// positive step sizes.
pub fn constants(lx: f64, ly: f64, r1: f64, r2: f64, c: f64, alpha: f64) -> Result<ConstantSet> {
    if !(lx >= 0.0 && ly >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "Lipschitz moduli must be nonnegative: L_x = {lx}, L_y = {ly}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("c > 0 fails: c = {c}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "alpha > 0 fails: alpha = {alpha}"
        )));
    }
    smoothing_precondition(lx, ly, r1, r2)?;
    Ok(constants_unchecked(lx, ly, r1, r2, c, alpha))
}

/// The formulas without any validation; used by scans that test the
/// preconditions separately.
pub fn constants_unchecked(lx: f64, ly: f64, r1: f64, r2: f64, c: f64, alpha: f64) -> ConstantSet {
    let sigma1 = (ly + r1 - lx) / (r1 - lx);
    let sigma2 = r1 / (r1 - lx);
    let sigma3 = r1 * sigma1 / (r2 - ly) + sigma2 / sigma1;
    let sigma4 = (lx + r2 - ly) / (r2 - ly);
    let sigma5 = r2 / (r2 - ly);
    let sigma6 = (2.0 * c * r1 + 1.0) / (c * r1 - c * lx);
    let sigma7 = (2.0 * alpha * r2 + 1.0) / (alpha * r2 - alpha * ly);
    let l_d = ly * sigma1 + ly + r2;
    let sigma8 = (1.0 + alpha * l_d) / (alpha * (r2 - ly));
    let sigma_prime = (2.0 * alpha * r2 + 1.0) / (alpha * (r2 - ly));
    let l_h = (lx / (r2 - ly) + 2.0) * lx + r1;
    ConstantSet {
        sigma1,
        sigma2,
        sigma3,
        sigma4,
        sigma5,
        sigma6,
        sigma7,
        sigma8,
        l_d,
        sigma_prime,
        l_h,
    }
}

fn need_gap(r: f64, l: f64, which: &str) -> Result<f64> {
    if r > l {
        Ok(r - l)
    } else {
        Err(Error::Precondition(format!("{which} fails: {r} <= {l}")))
    }
}

fn need_weight(w: f64, name: &str) -> Result<()> {
    if w > 0.0 && w <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "{name} must lie in (0, 1], got {w}"
        )))
    }
}

/// Coefficient of the KL case of the proximal error bound:
/// `2/((r1 - L_x) tau) (r2 (1 - mu)/mu + r2^2/(r2 - L_y))^(1/theta)`.
pub fn omega0(lx: f64, ly: f64, r1: f64, r2: f64, mu: f64, kl: &KlSpec) -> Result<f64> {
    let gx = need_gap(r1, lx, "r1 > L_x")?;
    let gy = need_gap(r2, ly, "r2 > L_y")?;
    need_weight(mu, "mu")?;
    let inner = r2 * (1.0 - mu) / mu + r2 * r2 / gy;
    Ok(2.0 / (gx * kl.tau) * inner.powf(1.0 / kl.theta))
}

/// Coefficient of the concave case of the proximal error bound:
/// `4 r2 diam(Y)/(r1 - L_x) ((1 - mu)/mu + r2/(r2 - L_y))`.
pub fn omega1(lx: f64, ly: f64, r1: f64, r2: f64, mu: f64, diam_y: f64) -> Result<f64> {
    let gx = need_gap(r1, lx, "r1 > L_x")?;
    let gy = need_gap(r2, ly, "r2 > L_y")?;
    need_weight(mu, "mu")?;
    Ok(4.0 * r2 * diam_y / gx * ((1.0 - mu) / mu + r2 / gy))
}

/// Primal-side mirror of [`omega0`] under a primal KL condition `kl1`.
pub fn omega2_primal(lx: f64, ly: f64, r1: f64, r2: f64, beta: f64, kl1: &KlSpec) -> Result<f64> {
    let gx = need_gap(r1, lx, "r1 > L_x")?;
    let gy = need_gap(r2, ly, "r2 > L_y")?;
    need_weight(beta, "beta")?;
    let inner = r1 * (1.0 - beta) / beta + r1 * r1 / gx;
    Ok(2.0 / (gy * kl1.tau) * inner.powf(1.0 / kl1.theta))
}

/// Primal-side mirror of [`omega1`] for a convex primal function.
pub fn omega3_primal(lx: f64, ly: f64, r1: f64, r2: f64, beta: f64, diam_x: f64) -> Result<f64> {
    let gx = need_gap(r1, lx, "r1 > L_x")?;
    let gy = need_gap(r2, ly, "r2 > L_y")?;
    need_weight(beta, "beta")?;
    let sigma2 = r1 / gx;
    Ok(4.0 * r1 * diam_x / gy * ((1.0 - beta) / beta + sigma2))
}

/// Coefficient of the dual error bound
/// `|x*(z) - x(z, v)|^2 <= omega |v - y(z, v)|^(1/theta)`:
/// `2 r2^(1/theta) / (tau (r1 - L_x))`.
pub fn omega2_dual_eb(lx: f64, r1: f64, r2: f64, kl: &KlSpec) -> Result<f64> {
    let gx = need_gap(r1, lx, "r1 > L_x")?;
    Ok(2.0 * r2.powf(1.0 / kl.theta) / (kl.tau * gx))
}

/// Concave counterpart of [`omega2_dual_eb`]: `4 r1 diam(Y) / (r1 - L_x)`.
pub fn omega3_dual_eb(lx: f64, r1: f64, diam_y: f64) -> Result<f64> {
    let gx = need_gap(r1, lx, "r1 > L_x")?;
    Ok(4.0 * r1 * diam_y / gx)
}
