//! Jacobian of the signal model, Fisher information, CRLB and PEB.
//!
//! The Jacobian factors as `-M G`: `M = diag(m_n)` holds the complex
//! amplitude-and-phase sensitivity of each sample to its own distance and
//! `G` (rows `[u_x, u_y - v_n]`) the geometric sensitivity of that distance
//! to the user position. Because `M^H M` is real and diagonal, the FIM
//! reduces to weighted sums of the geometry rows.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{check_len, distance_unchecked, SignalVector, SystemConfig, UserPosition};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Relative determinant threshold below which the FIM is treated as singular:
/// `det < SINGULAR_REL_DET * max(J11, J22)^2`.
pub const SINGULAR_REL_DET: f64 = 1e-12;

/// Complex sensitivity `m_n` of sample `n` to its distance, so that
/// `ds_n/du = -m_n [u_x, u_y - v_n]`.
pub fn sensitivity_scalar(cfg: &SystemConfig, u: &UserPosition, n: usize) -> Result<Complex64> {
    if n >= cfg.num_antennas() {
        return Err(Error::AntennaIndex {
            index: n,
            count: cfg.num_antennas(),
        });
    }
    Ok(sensitivity_unchecked(cfg, u, n))
}

#[inline]
fn sensitivity_unchecked(cfg: &SystemConfig, u: &UserPosition, n: usize) -> Complex64 {
    let d = distance_unchecked(cfg, u, n);
    let k = cfg.wavenumber();
    let rotation = Complex64::from_polar(1.0, -k * d);
    let radial = Complex64::new(1.0 / (d * d * d), k / (d * d));
    cfg.amplitudes()[n] * cfg.pilot_symbol() * rotation * radial
}

/// `|m_n|^2 = |a_n|^2 (1/d^6 + k^2/d^4)`, evaluated without forming `m_n`.
#[inline]
fn sensitivity_norm_sqr(cfg: &SystemConfig, u: &UserPosition, n: usize) -> f64 {
    let d = distance_unchecked(cfg, u, n);
    let k = cfg.wavenumber();
    let d2 = d * d;
    let d4 = d2 * d2;
    cfg.amplitudes()[n].norm_sqr() * (1.0 / (d4 * d2) + k * k / d4)
}

/// `N x 2` complex Jacobian of the signal vector with respect to `(u_x, u_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub rows: Vec<[Complex64; 2]>,
}

impl Jacobian {
    /// `Re{J^H J}`, accumulated entry by entry from the dense rows.
    pub fn gram(&self) -> Matrix2<f64> {
        let mut out = Matrix2::zeros();
        for row in &self.rows {
            for a in 0..2 {
                for b in 0..2 {
                    out[(a, b)] += (row[a].conj() * row[b]).re;
                }
            }
        }
        out
    }

    /// `Re{J^H e}` for a complex error vector `e`.
    pub fn project(&self, e: &[Complex64]) -> Vector2<f64> {
        let mut out = Vector2::zeros();
        for (row, en) in self.rows.iter().zip(e) {
            out[0] += (row[0].conj() * en).re;
            out[1] += (row[1].conj() * en).re;
        }
        out
    }
}

/// Jacobian rows `(-m_n u_x, -m_n (u_y - v_n))`.
pub fn jacobian(cfg: &SystemConfig, u: &UserPosition) -> Jacobian {
    let rows = cfg
        .antenna_positions_m()
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let m = sensitivity_unchecked(cfg, u, n);
            [-m * u.x, -m * (u.y - v)]
        })
        .collect();
    Jacobian { rows }
}

/// Fisher information `(2 / sigma^2) G^T diag(|m_n|^2) G` in 1/m^2.
pub fn fim(cfg: &SystemConfig, u: &UserPosition) -> Matrix2<f64> {
    let (mut j11, mut j12, mut j22) = (0.0, 0.0, 0.0);
    for (n, v) in cfg.antenna_positions_m().iter().enumerate() {
        let w = sensitivity_norm_sqr(cfg, u, n);
        let gy = u.y - v;
        j11 += w * u.x * u.x;
        j12 += w * u.x * gy;
        j22 += w * gy * gy;
    }
    let scale = 2.0 / cfg.noise_variance_w();
    Matrix2::new(scale * j11, scale * j12, scale * j12, scale * j22)
}

/// FIM together with the derived position bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherSummary {
    pub fim: Matrix2<f64>,
    /// Inverse FIM; `None` when the FIM is flagged singular.
    pub cov_bound: Option<Matrix2<f64>>,
    pub var_x_bound: f64,
    pub var_y_bound: f64,
    /// Position error bound in meters, `+inf` when singular.
    pub peb: f64,
    pub singular: bool,
}

impl FisherSummary {
    /// Applies the closed-form 2x2 inverse to an already computed FIM.
    pub fn from_fim(fim: Matrix2<f64>) -> Self {
        let (j11, j12, j22) = (fim[(0, 0)], fim[(0, 1)], fim[(1, 1)]);
        let det = j11 * j22 - j12 * j12;
        let scale = j11.max(j22);
        if !(det > SINGULAR_REL_DET * scale * scale) || !det.is_finite() {
            return Self {
                fim,
                cov_bound: None,
                var_x_bound: f64::INFINITY,
                var_y_bound: f64::INFINITY,
                peb: f64::INFINITY,
                singular: true,
            };
        }
        let cov = Matrix2::new(j22, -j12, -fim[(1, 0)], j11) / det;
        Self {
            fim,
            cov_bound: Some(cov),
            var_x_bound: j22 / det,
            var_y_bound: j11 / det,
            peb: ((j11 + j22) / det).sqrt(),
            singular: false,
        }
    }
}

/// Cramér-Rao bound on the position covariance and the scalar PEB.
pub fn crlb(cfg: &SystemConfig, u: &UserPosition) -> FisherSummary {
    FisherSummary::from_fim(fim(cfg, u))
}

/// PEB evaluated over every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PebMap {
    pub grid: GridSpec,
    /// Row-major values aligned with `grid.node(k)`.
    pub peb: Vec<f64>,
}

pub fn peb_map(cfg: &SystemConfig, grid: &GridSpec) -> PebMap {
    let peb = (0..grid.len())
        .into_par_iter()
        .map(|k| crlb(cfg, &grid.node(k)).peb)
        .collect();
    PebMap { grid: *grid, peb }
}

/// Right-hand side and normal matrix of one Gauss-Newton step at `u`:
/// `(Re{J^H J}, Re{J^H (r - s(u))})`.
pub fn normal_equations(
    cfg: &SystemConfig,
    r: &SignalVector,
    u: &UserPosition,
) -> Result<(Matrix2<f64>, Vector2<f64>)> {
    check_len(cfg, r)?;
    let jac = jacobian(cfg, u);
    let s = crate::channel::model_signal(cfg, u);
    let e: Vec<Complex64> = r
        .samples()
        .iter()
        .zip(s.samples())
        .map(|(a, b)| a - b)
        .collect();
    Ok((jac.gram(), jac.project(&e)))
}
