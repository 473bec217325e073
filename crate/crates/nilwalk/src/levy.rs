//! The time-one law of the normalized centered Heisenberg diffusion.
//!
//! With identity covariance on `span(e1, e2)` and `[e1, e2] = e3`, the density
//! in exponential coordinates is
//!
//! `u(x, y, z) = (1/2π²) ∫_ℝ cos(2ξz) (ξ / sinh ξ) exp(−(x² + y²) ξ / (2 tanh ξ)) dξ`.
//!
//! All integrals are even in `ξ` and are evaluated on `[0, 40]` with composite
//! Gauss–Legendre panels, doubling the panel count until two successive
//! estimates agree.

use std::io::Write;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

pub const CUTOFF: f64 = 40.0;
const ORDER: usize = 16;
const MIN_PANELS: usize = 8;
const MAX_PANELS: usize = 8192;
const TOL: f64 = 1e-12;

fn rule() -> &'static [(f64, f64)] {
    static R: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    R.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(ORDER).unwrap()).as_node_weight_pairs().to_vec()
    })
}

fn composite(f: &impl Fn(f64) -> f64, panels: usize) -> f64 {
    let h = CUTOFF / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in rule() {
            s += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

/// `∫_0^40 f`, refined until successive estimates differ by at most
/// `1e-12 · max(1, |I|)`.
pub fn integrate_half_line(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut panels = MIN_PANELS;
    let mut prev = composite(&f, panels);
    while panels < MAX_PANELS {
        panels *= 2;
        let next = composite(&f, panels);
        if (next - prev).abs() <= TOL * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("no convergence with {MAX_PANELS} panels")))
}

fn xi_over_sinh(xi: f64) -> f64 {
    if xi.abs() < 1e-8 {
        1.0
    } else {
        xi / xi.sinh()
    }
}

fn xi_over_tanh(xi: f64) -> f64 {
    if xi.abs() < 1e-8 {
        1.0
    } else {
        xi / xi.tanh()
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("non-finite argument".into()))
    }
}

/// `u(x, y, z)`; `u(0, 0, 0) = 1/4`.
pub fn levy_density(x: f64, y: f64, z: f64) -> Result<f64> {
    check_finite(&[x, y, z])?;
    let r2 = x * x + y * y;
    let i = integrate_half_line(|xi| (2.0 * xi * z).cos() * xi_over_sinh(xi) * (-0.5 * r2 * xi_over_tanh(xi)).exp())?;
    Ok((i / std::f64::consts::PI.powi(2)).max(0.0))
}

/// Density at time `t`: `t^{-2} u(x/√t, y/√t, z/t)`.
pub fn levy_density_at(t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    let s = t.sqrt();
    Ok(levy_density(x / s, y / s, z / t)? / (t * t))
}

/// Density of the `(x, z)` marginal:
/// `(1/π²) ∫_0^∞ cos(2ξz) (ξ/sinh ξ) √(2π tanh ξ / ξ) exp(−x² ξ / (2 tanh ξ)) dξ`.
pub fn levy_xz_density(x: f64, z: f64) -> Result<f64> {
    check_finite(&[x, z])?;
    let tau = std::f64::consts::TAU;
    let i = integrate_half_line(|xi| {
        (2.0 * xi * z).cos() * xi_over_sinh(xi) * (tau / xi_over_tanh(xi)).sqrt() * (-0.5 * x * x * xi_over_tanh(xi)).exp()
    })?;
    Ok((i / std::f64::consts::PI.powi(2)).max(0.0))
}

/// Density of the `z` marginal by quadrature, `(2/π) ∫_0^∞ cos(2ξz) / cosh ξ dξ`.
pub fn levy_area_pdf(z: f64) -> Result<f64> {
    check_finite(&[z])?;
    let i = integrate_half_line(|xi| (2.0 * xi * z).cos() / xi.cosh())?;
    Ok(2.0 * i / std::f64::consts::PI)
}

/// CDF of the `z` marginal by quadrature,
/// `1/2 + (1/π) ∫_0^∞ sin(2ξz) / (ξ cosh ξ) dξ`.
pub fn levy_area_cdf(z: f64) -> Result<f64> {
    check_finite(&[z])?;
    let i = integrate_half_line(|xi| if xi == 0.0 { 2.0 * z } else { (2.0 * xi * z).sin() / (xi * xi.cosh()) })?;
    Ok((0.5 + i / std::f64::consts::PI).clamp(0.0, 1.0))
}

/// `sech(πz)`.
pub fn levy_area_pdf_closed(z: f64) -> f64 {
    1.0 / (std::f64::consts::PI * z).cosh()
}

/// `(2/π) arctan(e^{πz})`.
pub fn levy_area_cdf_closed(z: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * (std::f64::consts::PI * z).exp().atan()
}

/// Density on the tensor grid `xs × ys × zs`, one `(x, y, z, u)` row per point.
pub fn density_grid(xs: &[f64], ys: &[f64], zs: &[f64]) -> Result<Vec<[f64; 4]>> {
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in xs {
        for &y in ys {
            for &z in zs {
                out.push([x, y, z, levy_density(x, y, z)?]);
            }
        }
    }
    Ok(out)
}

pub fn write_density_grid<W: Write>(rows: &[[f64; 4]], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(["x", "y", "z", "density"])?;
    for r in rows {
        wr.write_record(r.iter().map(|v| format!("{v:?}")))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_origin() {
        assert!((levy_density(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_z() {
        for (x, y, z) in [(0.3, -0.2, 0.7), (1.5, 0.0, 2.0)] {
            let a = levy_density(x, y, z).unwrap();
            let b = levy_density(x, y, -z).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn area_marginal_matches_closed_form() {
        for z in [-3.0, -1.0, -0.2, 0.0, 0.4, 1.7, 5.0] {
            assert!((levy_area_cdf(z).unwrap() - levy_area_cdf_closed(z)).abs() < 1e-10, "{z}");
            assert!((levy_area_pdf(z).unwrap() - levy_area_pdf_closed(z)).abs() < 1e-10, "{z}");
        }
    }

    #[test]
    fn xz_marginal_at_origin() {
        // ∫ u(0, y, 0) dy by a crude rule against the marginal formula
        let h = 0.01;
        let s: f64 = (-1200..=1200).map(|k| levy_density(0.0, k as f64 * h, 0.0).unwrap() * h).sum();
        assert!((s - levy_xz_density(0.0, 0.0).unwrap()).abs() < 1e-6);
    }
}
