//! Amplitude-only weighted least-squares baseline.
//!
//! Ranges come from the free-space magnitude law `|s_n| = gamma |a_n| / d_n`,
//! so the phase of every sample is ignored. Squared ranges are linear in
//! `(u_y, rho)` with `rho = u_x^2 + u_y^2`:
//!
//! ```text
//! d_n^2 - d^2 - v_n^2 = rho - 2 v_n u_y
//! ```
//!
//! which is solved by weighted least squares with weights `|r_n|^2`.

use nalgebra::{Matrix2, Vector2};

use super::{EstimateFlags, EstimationResult};
use crate::channel::{check_len, residual_unchecked, SignalVector, SystemConfig, UserPosition};
use crate::error::{Error, Result};

// rho - u_y^2 values within this relative distance of zero are round-off.
const CLIP_REL_TOL: f64 = 1e-12;

pub fn wls_amplitude_baseline(cfg: &SystemConfig, r: &SignalVector) -> Result<EstimationResult> {
    check_len(cfg, r)?;
    if cfg.num_antennas() < 3 {
        return Err(Error::TooFewAntennas(cfg.num_antennas()));
    }
    let h = cfg.waveguide_height_m();
    let mut normal = Matrix2::<f64>::zeros();
    let mut rhs = Vector2::<f64>::zeros();
    for (n, (rn, v)) in r
        .samples()
        .iter()
        .zip(cfg.antenna_positions_m())
        .enumerate()
    {
        let weight = rn.norm_sqr();
        if !(weight > 0.0 && weight.is_finite()) {
            continue;
        }
        let amplitude = cfg.channel_gain() * cfg.amplitudes()[n].norm();
        let range = (amplitude / rn.norm()).max(h);
        let b = range * range - h * h - v * v;
        let row = Vector2::new(-2.0 * v, 1.0);
        normal += weight * row * row.transpose();
        rhs += weight * b * row;
    }
    let det = normal[(0, 0)] * normal[(1, 1)] - normal[(0, 1)] * normal[(1, 0)];
    let scale = normal[(0, 0)].max(normal[(1, 1)]);
    if !(det.is_finite() && det > 1e-14 * scale * scale) {
        return Err(Error::SingularSystem);
    }
    let u_y = (normal[(1, 1)] * rhs[0] - normal[(0, 1)] * rhs[1]) / det;
    let rho = (normal[(0, 0)] * rhs[1] - normal[(1, 0)] * rhs[0]) / det;

    let x_sq = rho - u_y * u_y;
    let clipped = x_sq < 0.0;
    // The area lies at x >= 0, which selects the non-negative mirror image.
    let u_x = if x_sq <= CLIP_REL_TOL * rho.abs() {
        0.0
    } else {
        x_sq.sqrt()
    };
    let position = UserPosition::new(u_x, u_y);
    Ok(EstimationResult {
        position,
        residual: residual_unchecked(cfg, r.samples(), &position),
        candidates_evaluated: 0,
        lm_iterations_total: 0,
        converged: true,
        flags: EstimateFlags {
            grid_truncated: false,
            out_of_bounds: !cfg.area().contains(&position),
            clipped,
        },
    })
}
