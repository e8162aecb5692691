use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::channel::{
    check_len, fill_model_signal, residual_unchecked, SignalVector, SystemConfig, UserPosition,
};
use crate::error::{Error, Result};
use crate::fisher::jacobian;

/// Levenberg-Marquardt settings. Damping follows the classic Marquardt
/// schedule: divide on an accepted step, multiply and retry on a rejected one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    /// Absolute starting damping. `None` uses `1e-3` times the mean diagonal
    /// of the first normal matrix.
    pub initial_damping: Option<f64>,
    pub damping_up: f64,
    pub damping_down: f64,
    pub max_iterations: usize,
    pub step_tolerance_m: f64,
}

/// Relative seed used when `initial_damping` is `None`.
pub const RELATIVE_INITIAL_DAMPING: f64 = 1e-3;

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            initial_damping: None,
            damping_up: 10.0,
            damping_down: 10.0,
            max_iterations: 100,
            step_tolerance_m: 1e-9,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.initial_damping {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("lm_initial_damping", "must be positive"));
            }
        }
        if !(self.damping_up > 1.0 && self.damping_up.is_finite()) {
            return Err(Error::invalid("lm_damping_up", "must exceed 1"));
        }
        if !(self.damping_down > 1.0 && self.damping_down.is_finite()) {
            return Err(Error::invalid("lm_damping_down", "must exceed 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("lm_max_iterations", "must be at least 1"));
        }
        if !(self.step_tolerance_m.is_finite() && self.step_tolerance_m > 0.0) {
            return Err(Error::invalid("lm_step_tolerance_m", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmDiagnostics {
    /// Attempted steps, accepted or not.
    pub iterations: usize,
    pub accepted_steps: usize,
    /// Stopped on the step tolerance rather than the iteration cap.
    pub converged: bool,
    pub residual: f64,
    pub final_damping: f64,
    /// Residual at the start followed by the residual after each accepted step.
    pub residual_trace: Vec<f64>,
}

/// Solves `(A + damping I) x = b` for symmetric PSD `A` by the 2x2 inverse.
fn solve_damped(a: &Matrix2<f64>, b: &Vector2<f64>, damping: f64) -> Result<Vector2<f64>> {
    let (a11, a12, a22) = (a[(0, 0)] + damping, a[(0, 1)], a[(1, 1)] + damping);
    let det = a11 * a22 - a12 * a12;
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::SingularSystem);
    }
    Ok(Vector2::new(a22 * b[0] - a12 * b[1], a11 * b[1] - a12 * b[0]) / det)
}

/// Refines `u0` by damped Gauss-Newton steps solving
/// `(Re{J^H J} + damping I) du = Re{J^H (r - s(u))}`.
///
/// `J^H J = G^T diag(|m_n|^2) G` is real, so taking its real part drops only
/// rounding noise. The returned residual never exceeds the one at `u0`.
pub fn lm_refine(
    cfg: &SystemConfig,
    r: &SignalVector,
    u0: UserPosition,
    lcfg: &LmConfig,
) -> Result<(UserPosition, LmDiagnostics)> {
    check_len(cfg, r)?;
    lcfg.validate()?;
    let r = r.samples();
    let mut current = u0;
    let mut current_res = residual_unchecked(cfg, r, &current);
    if !current_res.is_finite() {
        return Err(Error::NonFiniteResidual { x: u0.x, y: u0.y });
    }

    let mut s = Vec::with_capacity(r.len());
    let mut err = Vec::with_capacity(r.len());
    let linearize = |u: &UserPosition, s: &mut Vec<Complex64>, err: &mut Vec<Complex64>| {
        fill_model_signal(cfg, u, s);
        err.clear();
        err.extend(r.iter().zip(s.iter()).map(|(a, b)| a - b));
        let jac = jacobian(cfg, u);
        (jac.gram(), jac.project(err))
    };
    let (mut normal, mut rhs) = linearize(&current, &mut s, &mut err);
    let mut damping = lcfg
        .initial_damping
        .unwrap_or_else(|| RELATIVE_INITIAL_DAMPING * 0.5 * normal.trace());
    if !(damping > 0.0) {
        damping = f64::MIN_POSITIVE;
    }

    let mut diag = LmDiagnostics {
        iterations: 0,
        accepted_steps: 0,
        converged: false,
        residual: current_res,
        final_damping: damping,
        residual_trace: vec![current_res],
    };

    while diag.iterations < lcfg.max_iterations {
        diag.iterations += 1;
        let step = solve_damped(&normal, &rhs, damping)?;
        let step_norm = step.norm();
        let trial = UserPosition::new(current.x + step[0], current.y + step[1]);
        let trial_res = residual_unchecked(cfg, r, &trial);
        if trial_res < current_res {
            current = trial;
            current_res = trial_res;
            diag.accepted_steps += 1;
            diag.residual_trace.push(current_res);
            damping /= lcfg.damping_down;
            if damping == 0.0 {
                damping = f64::MIN_POSITIVE;
            }
            (normal, rhs) = linearize(&current, &mut s, &mut err);
        } else {
            damping *= lcfg.damping_up;
        }
        if !(step_norm >= lcfg.step_tolerance_m) {
            diag.converged = true;
            break;
        }
    }
    diag.residual = current_res;
    diag.final_damping = damping;
    Ok((current, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{model_signal, residual, synthesize_observation, SystemParams};

    fn cfg() -> SystemConfig {
        SystemConfig::new(&SystemParams::default()).unwrap()
    }

    #[test]
    fn starting_at_truth_stops_immediately() {
        let c = cfg();
        let u = UserPosition::new(2.37, 6.02);
        let r = model_signal(&c, &u);
        let (est, diag) = lm_refine(&c, &r, u, &LmConfig::default()).unwrap();
        assert!(diag.iterations <= 2);
        assert!(diag.converged);
        assert_eq!(diag.residual, 0.0);
        assert_eq!(est, u);
    }

    #[test]
    fn converges_from_nearby_start() {
        let c = cfg();
        let u = UserPosition::new(2.37, 6.02);
        let r = model_signal(&c, &u);
        let start = UserPosition::new(2.37 + 0.01, 6.02 - 0.012);
        let (est, diag) = lm_refine(&c, &r, start, &LmConfig::default()).unwrap();
        assert!(diag.converged);
        assert!(est.distance_to(&u) < 1e-8, "error {}", est.distance_to(&u));
    }

    #[test]
    fn accepted_residuals_never_increase() {
        let c = cfg();
        for seed in 0..100u64 {
            let truth = UserPosition::new(
                0.5 + (seed % 11) as f64 * 0.5,
                0.3 + (seed % 19) as f64 * 0.5,
            );
            let r = synthesize_observation(&c, &truth, seed);
            let start = UserPosition::new(truth.x + 0.02, truth.y - 0.03);
            let (est, diag) = lm_refine(&c, &r, start, &LmConfig::default()).unwrap();
            for w in diag.residual_trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(diag.residual <= residual(&c, &r, &start).unwrap());
            assert_eq!(diag.residual, residual(&c, &r, &est).unwrap());
        }
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let c = cfg();
        let r = model_signal(&c, &UserPosition::new(1.0, 1.0));
        let err = lm_refine(
            &c,
            &r,
            UserPosition::new(f64::NAN, 1.0),
            &LmConfig::default(),
        );
        assert!(matches!(err, Err(Error::NonFiniteResidual { .. })));
    }

    #[test]
    fn damped_solver_rejects_singular_system() {
        let zero = Matrix2::zeros();
        assert!(matches!(
            solve_damped(&zero, &Vector2::new(1.0, 1.0), 0.0),
            Err(Error::SingularSystem)
        ));
        let x = solve_damped(
            &Matrix2::new(2.0, 1.0, 1.0, 3.0),
            &Vector2::new(1.0, 2.0),
            1.0,
        )
        .unwrap();
        let back = (Matrix2::new(3.0, 1.0, 1.0, 4.0)) * x;
        assert!((back - Vector2::new(1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn bad_config_rejected() {
        let c = cfg();
        let r = model_signal(&c, &UserPosition::new(1.0, 1.0));
        let lcfg = LmConfig {
            damping_up: 1.0,
            ..LmConfig::default()
        };
        assert!(lm_refine(&c, &r, UserPosition::new(1.0, 1.0), &lcfg).is_err());
    }
}
