//! Random valid points near the Maxwellian family, for property tests and audits.

use rand::Rng;

use super::{hermite_values, shifted_to_monomial, AnsatzPoint, Manifold};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Sampling range of the density.
pub const SAMPLE_RHO: (f64, f64) = (0.5, 2.0);
/// Sampling range of the velocity.
pub const SAMPLE_U: (f64, f64) = (-1.0, 1.0);
/// Sampling range of the temperature.
pub const SAMPLE_THETA: (f64, f64) = (0.5, 2.0);

const MAX_SHRINK: usize = 200;

/// Draws a point whose ansatz is nonnegative on `grid`.
///
/// Gaussian parameters are uniform in [`SAMPLE_RHO`], [`SAMPLE_U`] and
/// [`SAMPLE_THETA`]. Perturbation coefficients are drawn in the normalized
/// variable `(xi - u) / sqrt(theta)` and shrunk geometrically until the
/// profile is nonnegative at every node. For even polynomial orders the
/// leading coefficient is kept positive and is never shrunk, so the
/// conservative moment chart stays nondegenerate.
pub fn random_point<R: Rng + ?Sized>(manifold: Manifold, grid: &QuadratureRule, rng: &mut R) -> Result<AnsatzPoint> {
    manifold.validate()?;
    let rho = rng.gen_range(SAMPLE_RHO.0..=SAMPLE_RHO.1);
    let u = rng.gen_range(SAMPLE_U.0..=SAMPLE_U.1);
    let theta = rng.gen_range(SAMPLE_THETA.0..=SAMPLE_THETA.1);
    let sq = theta.sqrt();
    let zs: Vec<f64> = grid.nodes().iter().map(|x| (x - u) / sq).collect();

    match manifold {
        Manifold::ConservativeMoment { order } => {
            let mut beta: Vec<f64> = (0..=order).map(|j| rng.gen_range(-1.0..=1.0) * 0.5 / factorial(j)).collect();
            beta[0] = 1.0;
            let keep_top = order > 0 && order % 2 == 0;
            if keep_top {
                beta[order] = rng.gen_range(0.05..=0.5) / factorial(order);
            }
            shrink_until(&mut beta, keep_top, |b| zs.iter().all(|&z| super::horner(b, z) >= 0.0))?;
            let amp = rho / (2.0 * std::f64::consts::PI * theta).sqrt();
            let mut omega: Vec<f64> = shifted_to_monomial(&beta, u, sq).iter().map(|a| a * amp).collect();
            omega.push(u);
            omega.push(theta);
            AnsatzPoint::new(manifold, omega)
        }
        Manifold::HermitePerturbation { order } => {
            let mut alpha: Vec<f64> = (0..=order)
                .map(|k| if k >= 3 { rng.gen_range(-1.0..=1.0) * 0.3 / factorial(k).sqrt() } else { 0.0 })
                .collect();
            let positive = |a: &[f64]| {
                let mut he = vec![0.0; a.len()];
                zs.iter().all(|&z| {
                    hermite_values(z, &mut he);
                    1.0 + (3..a.len()).map(|k| a[k] * he[k]).sum::<f64>() >= 0.0
                })
            };
            alpha[0] = 1.0;
            shrink_until(&mut alpha, false, positive)?;
            let mut omega = vec![rho, u, theta];
            omega.extend_from_slice(&alpha[3..]);
            AnsatzPoint::new(manifold, omega)
        }
        Manifold::EntropyClosure { order } => {
            if order >= 3 {
                let base = AnsatzPoint::maxwellian(manifold, rho, u, theta)?;
                let mut omega = base.into_omega();
                // Perturb in the normalized variable, bounded by the tail decay.
                let zmax = zs.iter().fold(0.0f64, |m, z| m.max(z.abs())).max(1.0);
                let mut beta = vec![0.0; order];
                for (j, b) in beta.iter_mut().enumerate().skip(1) {
                    *b = rng.gen_range(-1.0..=1.0) * 0.1 / zmax.powi(j as i32 - 2).max(1.0);
                }
                for (o, d) in omega.iter_mut().zip(shifted_to_monomial(&beta, u, sq)) {
                    *o += d;
                }
                AnsatzPoint::new(manifold, omega)
            } else {
                let half = grid.nodes().last().copied().unwrap_or(1.0).abs().max(1.0);
                let mut omega = vec![(rho / (2.0 * half)).ln()];
                if order == 2 {
                    omega.push(rng.gen_range(-1.0..=1.0) / half);
                }
                AnsatzPoint::new(manifold, omega)
            }
        }
    }
}

/// Halves `coeffs[1..]` (all but the top one when `keep_top`) until `ok` holds.
fn shrink_until(coeffs: &mut [f64], keep_top: bool, ok: impl Fn(&[f64]) -> bool) -> Result<()> {
    let last = coeffs.len() - 1;
    for _ in 0..MAX_SHRINK {
        if ok(coeffs) {
            return Ok(());
        }
        for (j, c) in coeffs.iter_mut().enumerate().skip(1) {
            if !(keep_top && j == last) {
                *c *= 0.5;
            }
        }
    }
    Err(Error::Realizability("could not sample a nonnegative ansatz".into()))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
