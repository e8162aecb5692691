use num_complex::Complex64;

use crate::channel::{check_len, fill_model_signal, SignalVector, SystemConfig, UserPosition};
use crate::error::{Error, Result};
use crate::grid::{Bounds, GridSpec};

/// Settings of the coarse grid stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchConfig {
    pub spacing_m: f64,
    pub num_candidates: usize,
    /// Minimum distance between two returned candidates. Zero returns the
    /// plain `num_candidates` lowest-residual nodes.
    pub min_separation_m: f64,
    pub search_bounds: Bounds,
}

impl GridSearchConfig {
    /// Quarter-wavelength grid over the deployment area, 20 candidates kept
    /// at least one wavelength apart.
    pub fn for_system(cfg: &SystemConfig) -> Self {
        Self {
            spacing_m: cfg.wavelength_m() / 4.0,
            num_candidates: 20,
            min_separation_m: cfg.wavelength_m(),
            search_bounds: cfg.area(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return Err(Error::invalid("grid_spacing_m", "must be positive"));
        }
        if self.num_candidates == 0 {
            return Err(Error::invalid("num_candidates", "must be at least 1"));
        }
        if !(self.min_separation_m.is_finite() && self.min_separation_m >= 0.0) {
            return Err(Error::invalid("min_separation_m", "must be non-negative"));
        }
        self.search_bounds.validate()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.validate()?;
        GridSpec::covering(&self.search_bounds, self.spacing_m)
    }
}

/// One grid node kept for refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub position: UserPosition,
    pub residual: f64,
    pub grid_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    /// Ascending by `(residual, grid_index)`.
    pub candidates: Vec<Candidate>,
    pub nodes_evaluated: usize,
    /// Fewer than `num_candidates` could be returned.
    pub truncated: bool,
}

/// Grid nodes with their noiseless signal vectors precomputed, so repeated
/// searches against different observations only pay for the residuals.
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    grid: GridSpec,
    num_antennas: usize,
    // node-major: signals[k * num_antennas + n]
    signals: Vec<Complex64>,
}

impl CoarseGrid {
    pub fn new(cfg: &SystemConfig, gcfg: &GridSearchConfig) -> Result<Self> {
        let grid = gcfg.grid()?;
        let num_antennas = cfg.num_antennas();
        let mut signals = Vec::with_capacity(grid.len() * num_antennas);
        let mut buf = Vec::with_capacity(num_antennas);
        for u in grid.nodes() {
            fill_model_signal(cfg, &u, &mut buf);
            signals.extend_from_slice(&buf);
        }
        Ok(Self {
            grid,
            num_antennas,
            signals,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `||r - s(u_k)||^2` for every node `k`.
    pub fn residuals(&self, r: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.num_antennas);
        self.signals
            .chunks_exact(self.num_antennas)
            .map(|s| r.iter().zip(s).map(|(a, b)| (a - b).norm_sqr()).sum())
            .collect()
    }

    pub fn search(&self, r: &[Complex64], gcfg: &GridSearchConfig) -> GridSearchOutcome {
        let residuals = self.residuals(r);
        let indices = select_candidates(
            &residuals,
            gcfg.num_candidates,
            gcfg.min_separation_m,
            |k| self.grid.node(k),
        );
        let truncated = indices.len() < gcfg.num_candidates;
        GridSearchOutcome {
            candidates: indices
                .into_iter()
                .map(|k| Candidate {
                    position: self.grid.node(k),
                    residual: residuals[k],
                    grid_index: k,
                })
                .collect(),
            nodes_evaluated: residuals.len(),
            truncated,
        }
    }
}

/// Greedy selection over nodes in ascending `(residual, index)` order: a node
/// is accepted when it is farther than `min_sep` from every accepted node.
fn select_candidates(
    residuals: &[f64],
    wanted: usize,
    min_sep: f64,
    position: impl Fn(usize) -> UserPosition,
) -> Vec<usize> {
    let total = residuals.len();
    let order = |a: &usize, b: &usize| residuals[*a].total_cmp(&residuals[*b]).then(a.cmp(b));
    let mut pool = if min_sep > 0.0 {
        wanted.saturating_mul(64)
    } else {
        wanted
    }
    .min(total);

    loop {
        let mut idx: Vec<usize> = (0..total).collect();
        if pool < total {
            idx.select_nth_unstable_by(pool, order);
            idx.truncate(pool);
        }
        idx.sort_unstable_by(order);

        let mut accepted: Vec<usize> = Vec::with_capacity(wanted);
        let mut accepted_pos: Vec<UserPosition> = Vec::with_capacity(wanted);
        for k in idx {
            let p = position(k);
            if accepted_pos.iter().all(|q| q.distance_to(&p) > min_sep) || min_sep == 0.0 {
                accepted.push(k);
                accepted_pos.push(p);
                if accepted.len() == wanted {
                    break;
                }
            }
        }
        if accepted.len() == wanted || pool == total {
            return accepted;
        }
        pool = pool.saturating_mul(4).min(total);
    }
}

/// Evaluates the residual on every node of the search grid and returns the
/// best-ranked, spatially separated candidates.
pub fn coarse_grid_search(
    cfg: &SystemConfig,
    r: &SignalVector,
    gcfg: &GridSearchConfig,
) -> Result<GridSearchOutcome> {
    check_len(cfg, r)?;
    Ok(CoarseGrid::new(cfg, gcfg)?.search(r.samples(), gcfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{model_signal, residual, SystemParams};

    fn cfg() -> SystemConfig {
        SystemConfig::new(&SystemParams::default()).unwrap()
    }

    #[test]
    fn noise_free_node_ranks_first() {
        let c = cfg();
        let gcfg = GridSearchConfig::for_system(&c);
        let grid = gcfg.grid().unwrap();
        let truth = grid.node(40_000);
        let out = coarse_grid_search(&c, &model_signal(&c, &truth), &gcfg).unwrap();
        assert_eq!(out.candidates[0].grid_index, 40_000);
        assert_eq!(out.candidates[0].residual, 0.0);
        assert_eq!(out.candidates.len(), 20);
        assert_eq!(out.nodes_evaluated, grid.len());
        assert!(!out.truncated);
    }

    #[test]
    fn candidates_are_separated_and_sorted() {
        let c = cfg();
        let gcfg = GridSearchConfig::for_system(&c);
        let r = crate::channel::synthesize_observation(&c, &UserPosition::new(2.5, 7.0), 9);
        let out = coarse_grid_search(&c, &r, &gcfg).unwrap();
        for w in out.candidates.windows(2) {
            assert!(w[0].residual <= w[1].residual);
        }
        for (i, a) in out.candidates.iter().enumerate() {
            assert_eq!(a.residual, residual(&c, &r, &a.position).unwrap());
            for b in &out.candidates[i + 1..] {
                assert!(a.position.distance_to(&b.position) > gcfg.min_separation_m);
            }
        }
    }

    #[test]
    fn full_grid_without_separation_is_sorted_grid() {
        let c = cfg();
        let gcfg = GridSearchConfig {
            spacing_m: 0.5,
            num_candidates: 13 * 21,
            min_separation_m: 0.0,
            search_bounds: c.area(),
        };
        let r = crate::channel::synthesize_observation(&c, &UserPosition::new(1.0, 1.0), 2);
        let out = coarse_grid_search(&c, &r, &gcfg).unwrap();
        assert_eq!(out.candidates.len(), 273);
        assert!(!out.truncated);
        let mut expected: Vec<(f64, usize)> = gcfg
            .grid()
            .unwrap()
            .nodes()
            .enumerate()
            .map(|(k, u)| (residual(&c, &r, &u).unwrap(), k))
            .collect();
        expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got: Vec<usize> = out.candidates.iter().map(|c| c.grid_index).collect();
        assert_eq!(got, expected.iter().map(|e| e.1).collect::<Vec<_>>());
    }

    #[test]
    fn small_grid_is_flagged() {
        let c = cfg();
        let gcfg = GridSearchConfig {
            spacing_m: 1.0,
            num_candidates: 20,
            min_separation_m: 0.0,
            search_bounds: Bounds::new(0.0, 1.0, 0.0, 2.0),
        };
        let out = coarse_grid_search(&c, &SignalVector::zeros(8), &gcfg).unwrap();
        assert_eq!(out.candidates.len(), 6);
        assert!(out.truncated);
    }

    #[test]
    fn ties_break_by_lowest_index() {
        let residuals = [1.0, 0.5, 0.5, 0.2, 0.5];
        let picked = select_candidates(&residuals, 3, 0.0, |k| UserPosition::new(k as f64, 0.0));
        assert_eq!(picked, vec![3, 1, 2]);
    }

    #[test]
    fn rejects_bad_config() {
        let c = cfg();
        let mut gcfg = GridSearchConfig::for_system(&c);
        gcfg.num_candidates = 0;
        assert!(coarse_grid_search(&c, &SignalVector::zeros(8), &gcfg).is_err());
        let gcfg = GridSearchConfig::for_system(&c);
        assert!(matches!(
            coarse_grid_search(&c, &SignalVector::zeros(7), &gcfg),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
