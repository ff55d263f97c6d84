//! The Gauss hypergeometric function `g(a, z) = 2F1(1, a; a + 1; z)`.
//!
//! On `|z| <= 1/2` the power series `a * sum_m z^m / (a + m)` converges
//! quickly. Elsewhere on `z < 1` the integral
//! `g(a, z) = ∫_0^1 ds / (1 - z s^{1/a})` (the Euler integral after
//! `t = s^{1/a}`) is evaluated by quadrature, with its logarithmic part
//! near `z = 1` split off in closed form. For `z < -1` the reflection
//! `z -> 1/z` maps the argument back into the unit disc; for `z > 1` the
//! same reflection gives the real part of the principal branch.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with, QuadOptions};

const SERIES_RADIUS: f64 = 0.5;

fn check_parameter(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("hypergeometric parameter must lie in (0, 1]"))
    }
}

/// `g(a, z)` on the principal branch, `z < 1`.
pub fn gauss_g(a: f64, z: f64) -> Result<f64> {
    check_parameter(a)?;
    if !z.is_finite() || z >= 1.0 {
        return Err(Error::BranchPoint { z });
    }
    if z.abs() <= SERIES_RADIUS {
        gauss_g_series(a, z)
    } else if z < -1.0 {
        gauss_g_reflected(a, z)
    } else {
        gauss_g_integral(a, z)
    }
}

/// `z < -1`: with `w = -z`, splitting `a ∫_0^∞ t^{a-1} / (1 + w t) dt =
/// a w^{-a} pi / sin(pi a)` at `t = 1` gives
/// `g(a, z) = a w^{-a} [pi / sin(pi a) - w^{a-1} g(1 - a, 1/z) / (1 - a)]`.
fn gauss_g_reflected(a: f64, z: f64) -> Result<f64> {
    if a == 1.0 {
        return Ok(-(-z).ln_1p() / z);
    }
    let pi = core::f64::consts::PI;
    let w = -z;
    let reflected = gauss_g(1.0 - a, 1.0 / z)?;
    Ok(a * w.powf(-a) * (pi / (pi * a).sin() - w.powf(a - 1.0) * reflected / (1.0 - a)))
}

/// Power series, valid for `|z| < 1`.
pub fn gauss_g_series(a: f64, z: f64) -> Result<f64> {
    check_parameter(a)?;
    if !(z.abs() < 1.0) {
        return Err(Error::BranchPoint { z });
    }
    let mut sum = 0.0;
    let mut zm = 1.0;
    for m in 0..100_000u32 {
        let term = zm / (a + f64::from(m));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        zm *= z;
    }
    Ok(a * sum)
}

/// Quadrature of the Euler integral, valid for `z < 1`.
///
/// Uses `g(a, z) = -a ln(1 - z) / z + ∫_0^1 (1 - s^{1/a - 1}) / (1 - z s^{1/a}) ds`;
/// the numerator vanishes at `s = 1`, so the remaining integrand stays
/// bounded as `z -> 1`.
pub fn gauss_g_integral(a: f64, z: f64) -> Result<f64> {
    check_parameter(a)?;
    if !z.is_finite() || z >= 1.0 {
        return Err(Error::BranchPoint { z });
    }
    let p = 1.0 / a;
    let log_part = if z == 0.0 { a } else { -a * (-z).ln_1p() / z };
    if a == 1.0 {
        return Ok(log_part);
    }
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        ..QuadOptions::default()
    };
    let rest = integrate_with(
        |s: f64| (1.0 - s.powf(p - 1.0)) / (1.0 - z * s.powf(p)),
        0.0,
        1.0,
        &opts,
    )?;
    Ok(log_part + rest.value)
}

/// Real part of the principal branch on the whole real line except `z = 1`.
///
/// For `z > 1` the imaginary part is `-pi a z^{-a}` (sign depending on the
/// side of the cut), which cancels in differences taken along a path that
/// stays on one side.
pub fn gauss_g_principal(a: f64, z: f64) -> Result<f64> {
    check_parameter(a)?;
    if z < 1.0 {
        return gauss_g(a, z);
    }
    if z == 1.0 || !z.is_finite() {
        return Err(Error::BranchPoint { z });
    }
    if a == 1.0 {
        return Ok(-(z - 1.0).ln() / z);
    }
    let pi = core::f64::consts::PI;
    let reflected = gauss_g(1.0 - a, 1.0 / z)?;
    Ok(a * z.powf(-a) * (pi / (pi * a).tan() + z.powf(a - 1.0) * reflected / (1.0 - a)))
}
