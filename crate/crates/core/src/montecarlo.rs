//! Deterministic Monte-Carlo evaluation of the estimators.
//!
//! Trials run in parallel but every trial derives its randomness from
//! [`crate::seed`], and aggregation happens sequentially in trial order, so
//! results are bit-identical for any thread count. All estimators of a trial
//! see the same observation vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    synthesize_observation, AntennaLayout, SignalVector, SystemConfig, UserPosition,
};
use crate::error::{Error, Result};
use crate::estimator::{
    wls_amplitude_baseline, Estimator, GridSearchConfig, LmConfig, MlEstimator,
};
use crate::fisher::crlb;
use crate::grid::GridSpec;
use crate::seed;

/// Where the true user position of each trial comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthSampler {
    Fixed(UserPosition),
    /// Uniform over the deployment area.
    UniformInArea,
}

impl TruthSampler {
    pub fn sample(&self, cfg: &SystemConfig, master_seed: u64, trial: usize) -> UserPosition {
        match self {
            TruthSampler::Fixed(u) => *u,
            TruthSampler::UniformInArea => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::truth_seed(master_seed, trial));
                let x = rng.random::<f64>() * cfg.area_x_m();
                let y = rng.random::<f64>() * cfg.area_y_m();
                UserPosition::new(x, y)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub noise_dbm_list: Vec<f64>,
    pub pa_counts: Vec<usize>,
    pub trials: usize,
    pub truth: TruthSampler,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.noise_dbm_list.is_empty() {
            return Err(Error::invalid("noise_dbm_list", "must not be empty"));
        }
        if self.noise_dbm_list.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("noise_dbm_list", "values must be finite"));
        }
        if self.pa_counts.is_empty() || self.pa_counts.contains(&0) {
            return Err(Error::invalid(
                "pa_counts",
                "must list positive antenna counts",
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if let TruthSampler::Fixed(u) = self.truth {
            if !(u.x.is_finite() && u.y.is_finite()) {
                return Err(Error::invalid("truth", "fixed position must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub grid_spacing_m: f64,
    pub trials_per_point: usize,
    pub noise_dbm: f64,
    pub n_pas: usize,
    pub master_seed: u64,
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_spacing_m.is_finite() && self.grid_spacing_m > 0.0) {
            return Err(Error::invalid("grid_spacing_m", "must be positive"));
        }
        if self.trials_per_point == 0 {
            return Err(Error::invalid("trials_per_point", "must be at least 1"));
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::invalid("noise_dbm", "must be finite"));
        }
        if self.n_pas == 0 {
            return Err(Error::invalid("n_pas", "must be at least 1"));
        }
        Ok(())
    }

    /// Map nodes: centres of the `grid_spacing_m` cells tiling the area.
    pub fn grid(&self, cfg: &SystemConfig) -> Result<GridSpec> {
        GridSpec::cell_centers(&cfg.area(), self.grid_spacing_m)
    }
}

/// Aggregate over the trials of one (noise, antenna count, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise_dbm: f64,
    pub n_pas: usize,
    pub estimator: Estimator,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub mean_err_m: f64,
    pub rmse_m: f64,
    pub median_err_m: f64,
    pub peb_mean_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Ordered by noise level, then antenna count, then estimator, following
    /// the order given in the spec.
    pub cells: Vec<SweepRow>,
}

impl SweepResult {
    pub fn cell(&self, noise_dbm: f64, n_pas: usize, estimator: Estimator) -> Option<&SweepRow> {
        self.cells
            .iter()
            .find(|c| c.noise_dbm == noise_dbm && c.n_pas == n_pas && c.estimator == estimator)
    }
}

/// Flat rows for export, one per cell.
pub fn summarize(result: &SweepResult) -> Vec<SweepRow> {
    result.cells.clone()
}

struct Stats {
    ok: usize,
    failed: usize,
    mean: f64,
    rmse: f64,
    median: f64,
}

fn error_stats(errors: impl Iterator<Item = Option<f64>>) -> Stats {
    let mut failed = 0;
    let mut ok: Vec<f64> = Vec::new();
    for e in errors {
        match e {
            Some(v) => ok.push(v),
            None => failed += 1,
        }
    }
    if ok.is_empty() {
        return Stats {
            ok: 0,
            failed,
            mean: f64::NAN,
            rmse: f64::NAN,
            median: f64::NAN,
        };
    }
    let n = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / n;
    let rmse = (ok.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    ok.sort_by(f64::total_cmp);
    let mid = ok.len() / 2;
    let median = if ok.len() % 2 == 1 {
        ok[mid]
    } else {
        0.5 * (ok[mid - 1] + ok[mid])
    };
    Stats {
        ok: ok.len(),
        failed,
        mean,
        rmse,
        median,
    }
}

/// Estimators instantiated for one antenna layout.
struct EstimatorBank {
    ml: Option<MlEstimator>,
    cfg: SystemConfig,
}

impl EstimatorBank {
    fn new(
        cfg: &SystemConfig,
        gcfg: &GridSearchConfig,
        lcfg: &LmConfig,
        estimators: &[Estimator],
    ) -> Result<Self> {
        let ml = if estimators.contains(&Estimator::Ml) {
            Some(MlEstimator::new(cfg, gcfg, lcfg)?)
        } else {
            None
        };
        Ok(Self {
            ml,
            cfg: cfg.clone(),
        })
    }

    /// Euclidean error, or `None` when the estimator fails.
    fn error(&self, estimator: Estimator, r: &SignalVector, truth: &UserPosition) -> Option<f64> {
        let est = match estimator {
            Estimator::Ml => self.ml.as_ref()?.estimate(r),
            Estimator::Wls => wls_amplitude_baseline(&self.cfg, r),
        };
        est.ok()
            .map(|e| e.position.distance_to(truth))
            .filter(|e| e.is_finite())
    }
}

fn dedup_estimators(estimators: &[Estimator]) -> Result<Vec<Estimator>> {
    let mut out: Vec<Estimator> = Vec::new();
    for e in estimators {
        if !out.contains(e) {
            out.push(*e);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(
            "estimators",
            "at least one estimator is required",
        ));
    }
    Ok(out)
}

struct TrialOutcome {
    errors: Vec<Option<f64>>,
    peb: f64,
}

/// Error-versus-noise sweep over every (noise level, antenna count) pair.
pub fn run_sweep(
    base: &SystemConfig,
    gcfg: &GridSearchConfig,
    lcfg: &LmConfig,
    spec: &SweepSpec,
    estimators: &[Estimator],
) -> Result<SweepResult> {
    spec.validate()?;
    let estimators = dedup_estimators(estimators)?;

    let mut banks = Vec::with_capacity(spec.pa_counts.len());
    for &n in &spec.pa_counts {
        let cfg = base.with_antennas(&AntennaLayout::Uniform(n))?;
        banks.push(EstimatorBank::new(&cfg, gcfg, lcfg, &estimators)?);
    }
    let mut cell_cfgs = Vec::with_capacity(spec.noise_dbm_list.len() * banks.len());
    for &dbm in &spec.noise_dbm_list {
        for bank in &banks {
            cell_cfgs.push(bank.cfg.with_noise_dbm(dbm)?);
        }
    }

    let n_pa = spec.pa_counts.len();
    let trials = spec.trials;
    let outcomes: Vec<TrialOutcome> = (0..cell_cfgs.len() * trials)
        .into_par_iter()
        .map(|task| {
            let (cell, trial) = (task / trials, task % trials);
            let (noise_idx, pa_idx) = (cell / n_pa, cell % n_pa);
            let cfg = &cell_cfgs[cell];
            let truth = spec.truth.sample(cfg, spec.master_seed, trial);
            let r = synthesize_observation(
                cfg,
                &truth,
                seed::noise_seed(spec.master_seed, noise_idx, pa_idx, trial, 0),
            );
            TrialOutcome {
                errors: estimators
                    .iter()
                    .map(|e| banks[pa_idx].error(*e, &r, &truth))
                    .collect(),
                peb: crlb(cfg, &truth).peb,
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(cell_cfgs.len() * estimators.len());
    for (cell, chunk) in outcomes.chunks(trials).enumerate() {
        let (noise_idx, pa_idx) = (cell / n_pa, cell % n_pa);
        let peb_mean = chunk.iter().map(|t| t.peb).sum::<f64>() / trials as f64;
        for (k, estimator) in estimators.iter().enumerate() {
            let s = error_stats(chunk.iter().map(|t| t.errors[k]));
            cells.push(SweepRow {
                noise_dbm: spec.noise_dbm_list[noise_idx],
                n_pas: spec.pa_counts[pa_idx],
                estimator: *estimator,
                trials_ok: s.ok,
                trials_failed: s.failed,
                mean_err_m: s.mean,
                rmse_m: s.rmse,
                median_err_m: s.median,
                peb_mean_m: peb_mean,
            });
        }
    }
    Ok(SweepResult { cells })
}

/// Per-node mean errors of each estimator plus the PEB at the node.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub grid: GridSpec,
    pub estimators: Vec<Estimator>,
    pub peb: Vec<f64>,
    /// `mean_error[k][node]` for `estimators[k]`; NaN when every trial failed.
    pub mean_error: Vec<Vec<f64>>,
    pub trials_failed: Vec<Vec<usize>>,
}

/// One exported line of an error map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapRow {
    pub u_x: f64,
    pub u_y: f64,
    pub estimator: Estimator,
    pub mean_err_m: f64,
    pub peb_m: f64,
}

impl ErrorMap {
    pub fn values(&self, estimator: Estimator) -> Option<&[f64]> {
        let k = self.estimators.iter().position(|e| *e == estimator)?;
        Some(&self.mean_error[k])
    }

    /// Rows in grid order, estimators interleaved per node.
    pub fn rows(&self) -> Vec<MapRow> {
        let mut out = Vec::with_capacity(self.grid.len() * self.estimators.len());
        for node in 0..self.grid.len() {
            let u = self.grid.node(node);
            for (k, e) in self.estimators.iter().enumerate() {
                out.push(MapRow {
                    u_x: u.x,
                    u_y: u.y,
                    estimator: *e,
                    mean_err_m: self.mean_error[k][node],
                    peb_m: self.peb[node],
                });
            }
        }
        out
    }
}

/// Spatial error map: `trials_per_point` trials with the truth fixed at each
/// node of [`MapSpec::grid`].
pub fn run_error_map(
    base: &SystemConfig,
    gcfg: &GridSearchConfig,
    lcfg: &LmConfig,
    spec: &MapSpec,
    estimators: &[Estimator],
) -> Result<ErrorMap> {
    spec.validate()?;
    let estimators = dedup_estimators(estimators)?;
    let cfg = base
        .with_antennas(&AntennaLayout::Uniform(spec.n_pas))?
        .with_noise_dbm(spec.noise_dbm)?;
    let grid = spec.grid(&cfg)?;
    let bank = EstimatorBank::new(&cfg, gcfg, lcfg, &estimators)?;
    let trials = spec.trials_per_point;

    let errors: Vec<Vec<Option<f64>>> = (0..grid.len() * trials)
        .into_par_iter()
        .map(|task| {
            let (node, trial) = (task / trials, task % trials);
            let truth = grid.node(node);
            let r = synthesize_observation(
                &cfg,
                &truth,
                seed::noise_seed(spec.master_seed, 0, 0, trial, node),
            );
            estimators
                .iter()
                .map(|e| bank.error(*e, &r, &truth))
                .collect()
        })
        .collect();

    let mut mean_error = vec![Vec::with_capacity(grid.len()); estimators.len()];
    let mut trials_failed = vec![Vec::with_capacity(grid.len()); estimators.len()];
    for chunk in errors.chunks(trials) {
        for k in 0..estimators.len() {
            let s = error_stats(chunk.iter().map(|t| t[k]));
            mean_error[k].push(s.mean);
            trials_failed[k].push(s.failed);
        }
    }
    let peb = (0..grid.len())
        .map(|k| crlb(&cfg, &grid.node(k)).peb)
        .collect();
    Ok(ErrorMap {
        grid,
        estimators,
        peb,
        mean_error,
        trials_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SystemParams;

    fn cfg() -> SystemConfig {
        SystemConfig::new(&SystemParams::default()).unwrap()
    }

    fn sweep(trials: usize, noise: Vec<f64>, truth: TruthSampler) -> SweepSpec {
        SweepSpec {
            noise_dbm_list: noise,
            pa_counts: vec![8],
            trials,
            truth,
            master_seed: 17,
        }
    }

    #[test]
    fn near_noiseless_single_trial() {
        let c = cfg();
        let spec = sweep(
            1,
            vec![-160.0],
            TruthSampler::Fixed(UserPosition::new(2.0, 4.0)),
        );
        let out = run_sweep(
            &c,
            &GridSearchConfig::for_system(&c),
            &LmConfig::default(),
            &spec,
            &[Estimator::Ml],
        )
        .unwrap();
        assert_eq!(out.cells.len(), 1);
        assert!(out.cells[0].mean_err_m < 1e-4);
        assert_eq!(out.cells[0].trials_ok, 1);
    }

    #[test]
    fn sweep_is_repeatable_and_ordered() {
        let c = cfg();
        let spec = SweepSpec {
            noise_dbm_list: vec![-60.0, -50.0],
            pa_counts: vec![4, 8],
            trials: 6,
            truth: TruthSampler::UniformInArea,
            master_seed: 3,
        };
        let g = GridSearchConfig::for_system(&c);
        let l = LmConfig::default();
        let a = run_sweep(&c, &g, &l, &spec, &Estimator::ALL).unwrap();
        let b = run_sweep(&c, &g, &l, &spec, &Estimator::ALL).unwrap();
        assert_eq!(a, b);
        let keys: Vec<(f64, usize, Estimator)> = a
            .cells
            .iter()
            .map(|r| (r.noise_dbm, r.n_pas, r.estimator))
            .collect();
        assert_eq!(keys[0], (-60.0, 4, Estimator::Ml));
        assert_eq!(keys[1], (-60.0, 4, Estimator::Wls));
        assert_eq!(keys[2], (-60.0, 8, Estimator::Ml));
        assert_eq!(keys[7], (-50.0, 8, Estimator::Wls));
        for r in &a.cells {
            assert!(r.rmse_m >= r.mean_err_m && r.mean_err_m >= 0.0);
            assert_eq!(r.trials_ok + r.trials_failed, 6);
        }
    }

    #[test]
    fn sweep_independent_of_thread_count() {
        let c = cfg();
        let spec = SweepSpec {
            noise_dbm_list: vec![-45.0],
            pa_counts: vec![6],
            trials: 8,
            truth: TruthSampler::UniformInArea,
            master_seed: 99,
        };
        let g = GridSearchConfig::for_system(&c);
        let l = LmConfig::default();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_sweep(&c, &g, &l, &spec, &Estimator::ALL).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn failed_trials_are_counted_not_averaged() {
        // WLS needs three antennas; with two every trial fails.
        let c = cfg();
        let spec = SweepSpec {
            noise_dbm_list: vec![-60.0],
            pa_counts: vec![2],
            trials: 4,
            truth: TruthSampler::Fixed(UserPosition::new(2.0, 4.0)),
            master_seed: 1,
        };
        let out = run_sweep(
            &c,
            &GridSearchConfig::for_system(&c),
            &LmConfig::default(),
            &spec,
            &Estimator::ALL,
        )
        .unwrap();
        let wls = out.cell(-60.0, 2, Estimator::Wls).unwrap();
        assert_eq!((wls.trials_ok, wls.trials_failed), (0, 4));
        assert!(wls.mean_err_m.is_nan());
        let ml = out.cell(-60.0, 2, Estimator::Ml).unwrap();
        assert_eq!(ml.trials_ok, 4);
    }

    #[test]
    fn uniform_truth_stays_in_area() {
        let c = cfg();
        for t in 0..1000 {
            let u = TruthSampler::UniformInArea.sample(&c, 5, t);
            assert!(c.area().contains(&u));
        }
    }

    #[test]
    fn single_node_noiseless_map() {
        let spec = MapSpec {
            grid_spacing_m: 6.0,
            trials_per_point: 1,
            noise_dbm: -170.0,
            n_pas: 8,
            master_seed: 0,
        };
        let base = SystemConfig::new(&SystemParams {
            area_y_m: 6.0,
            ..SystemParams::default()
        })
        .unwrap();
        let map = run_error_map(
            &base,
            &GridSearchConfig::for_system(&base),
            &LmConfig::default(),
            &spec,
            &[Estimator::Ml],
        )
        .unwrap();
        assert_eq!(map.grid.len(), 1);
        assert!(map.values(Estimator::Ml).unwrap()[0] < 1e-6);
        assert!(map.peb[0].is_finite());
    }

    #[test]
    fn spec_validation() {
        let mut s = sweep(1, vec![], TruthSampler::UniformInArea);
        assert!(s.validate().is_err());
        s.noise_dbm_list = vec![-40.0];
        s.trials = 0;
        assert!(s.validate().is_err());
        let m = MapSpec {
            grid_spacing_m: 0.0,
            trials_per_point: 1,
            noise_dbm: -40.0,
            n_pas: 8,
            master_seed: 0,
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn error_stats_median_even_and_odd() {
        let s = error_stats([Some(3.0), Some(1.0), None, Some(2.0)].into_iter());
        assert_eq!((s.ok, s.failed, s.median), (3, 1, 2.0));
        let s = error_stats([Some(4.0), Some(1.0)].into_iter());
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
    }
}
