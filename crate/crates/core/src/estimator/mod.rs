//! Position estimators operating on a single observation vector.
//!
//! The phase-aware ML estimator runs in two stages: a residual scan over a
//! fine grid picks spatially separated starting points, then each one is
//! polished by Levenberg-Marquardt and the lowest final residual wins. The
//! amplitude-only WLS baseline lives in [`wls`].

mod grid_search;
mod lm;
mod wls;

use std::fmt;
use std::str::FromStr;

pub use grid_search::{
    coarse_grid_search, Candidate, CoarseGrid, GridSearchConfig, GridSearchOutcome,
};
pub use lm::{lm_refine, LmConfig, LmDiagnostics, RELATIVE_INITIAL_DAMPING};
pub use wls::wls_amplitude_baseline;

use crate::channel::{check_len, SignalVector, SystemConfig, UserPosition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimateFlags {
    /// The grid held fewer than the requested number of candidates.
    pub grid_truncated: bool,
    /// The estimate lies outside the deployment area.
    pub out_of_bounds: bool,
    /// WLS only: `rho - u_y^2` came out negative and was clipped to zero.
    pub clipped: bool,
}

impl EstimateFlags {
    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.grid_truncated {
            out.push("grid_truncated");
        }
        if self.out_of_bounds {
            out.push("out_of_bounds");
        }
        if self.clipped {
            out.push("clipped");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub position: UserPosition,
    /// `||r - s(position)||^2`.
    pub residual: f64,
    pub candidates_evaluated: usize,
    pub lm_iterations_total: usize,
    pub converged: bool,
    pub flags: EstimateFlags,
}

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Ml,
    Wls,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Ml, Estimator::Wls];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ml => "ml",
            Estimator::Wls => "wls",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(Estimator::Ml),
            "wls" => Ok(Estimator::Wls),
            other => Err(Error::invalid(
                "estimator",
                format!("unknown estimator `{other}` (expected ml or wls)"),
            )),
        }
    }
}

/// Two-stage ML estimator with the coarse grid precomputed for one system
/// configuration. Reuse it across observations of the same geometry.
#[derive(Debug, Clone)]
pub struct MlEstimator {
    cfg: SystemConfig,
    gcfg: GridSearchConfig,
    lcfg: LmConfig,
    grid: CoarseGrid,
}

impl MlEstimator {
    pub fn new(cfg: &SystemConfig, gcfg: &GridSearchConfig, lcfg: &LmConfig) -> Result<Self> {
        lcfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            gcfg: *gcfg,
            lcfg: *lcfg,
            grid: CoarseGrid::new(cfg, gcfg)?,
        })
    }

    /// The residual is even in `u_x`, so a node on the waveguide axis has a
    /// zero `u_x` gradient and LM could never leave the axis. Such nodes are
    /// refined from half a grid step off the axis instead.
    fn refine_start(&self, node: UserPosition) -> UserPosition {
        if node.x == 0.0 {
            UserPosition::new(0.5 * self.gcfg.spacing_m, node.y)
        } else {
            node
        }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn estimate(&self, r: &SignalVector) -> Result<EstimationResult> {
        check_len(&self.cfg, r)?;
        let coarse = self.grid.search(r.samples(), &self.gcfg);
        let mut best: Option<(UserPosition, LmDiagnostics)> = None;
        let mut iterations = 0;
        for cand in &coarse.candidates {
            let (u, diag) = lm_refine(&self.cfg, r, self.refine_start(cand.position), &self.lcfg)?;
            iterations += diag.iterations;
            // strict comparison keeps the earliest (best-ranked) candidate on ties
            if best
                .as_ref()
                .is_none_or(|(_, b)| diag.residual < b.residual)
            {
                best = Some((u, diag));
            }
        }
        let (position, diag) =
            best.ok_or_else(|| Error::invalid("grid", "search grid is empty"))?;
        Ok(EstimationResult {
            position,
            residual: diag.residual,
            candidates_evaluated: coarse.candidates.len(),
            lm_iterations_total: iterations,
            converged: diag.converged,
            flags: EstimateFlags {
                grid_truncated: coarse.truncated,
                out_of_bounds: !self.cfg.area().contains(&position),
                clipped: false,
            },
        })
    }
}

/// Grid search followed by LM refinement of every candidate; returns the
/// refined position with the smallest residual.
pub fn ml_estimate(
    cfg: &SystemConfig,
    r: &SignalVector,
    gcfg: &GridSearchConfig,
    lcfg: &LmConfig,
) -> Result<EstimationResult> {
    check_len(cfg, r)?;
    MlEstimator::new(cfg, gcfg, lcfg)?.estimate(r)
}
