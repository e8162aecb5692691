use pinloc::seed::mix;
use pinloc::{
    coarse_grid_search, ml_estimate, model_signal, residual, synthesize_observation,
    wls_amplitude_baseline, AntennaLayout, GridSearchConfig, LmConfig, MlEstimator, SystemConfig,
    SystemParams, UserPosition,
};

fn default_config(noise_dbm: f64) -> SystemConfig {
    SystemConfig::new(&SystemParams::default())
        .unwrap()
        .with_noise_dbm(noise_dbm)
        .unwrap()
}

fn first_candidates(
    noise_dbm: f64,
    trials: u64,
) -> (SystemConfig, Vec<(UserPosition, usize, usize)>) {
    let cfg = default_config(noise_dbm);
    let gcfg = GridSearchConfig::for_system(&cfg);
    let grid = gcfg.grid().unwrap();
    let truth = UserPosition::new(2.5, 7.0);
    let out = (0..trials)
        .map(|trial| {
            let r = synthesize_observation(&cfg, &truth, mix(7, [trial, 0, 0, 0]));
            // brute force over the same nodes with the public residual
            let (best_index, _) = grid
                .nodes()
                .enumerate()
                .map(|(k, u)| (k, residual(&cfg, &r, &u).unwrap()))
                .fold((usize::MAX, f64::INFINITY), |acc, (k, f)| {
                    if f < acc.1 {
                        (k, f)
                    } else {
                        acc
                    }
                });
            let first = coarse_grid_search(&cfg, &r, &gcfg).unwrap().candidates[0];
            (first.position, first.grid_index, best_index)
        })
        .collect();
    (cfg, out)
}

#[test]
fn first_candidate_is_the_exhaustive_minimum() {
    let (_, firsts) = first_candidates(-40.0, 30);
    for (_, index, best) in firsts {
        assert_eq!(index, best);
    }
}

#[test]
fn first_candidate_near_truth_in_95_percent_at_minus_40_dbm() {
    let truth = UserPosition::new(2.5, 7.0);
    let (cfg, firsts) = first_candidates(-40.0, 100);
    let near = firsts
        .iter()
        .filter(|(u, _, _)| u.distance_to(&truth) <= 0.5 * cfg.wavelength_m())
        .count();
    assert!(
        near >= 95,
        "first candidate within lambda/2 in {near}/100 trials"
    );
}

#[test]
fn ml_beats_amplitude_baseline_at_default_operating_point() {
    let cfg = default_config(-40.0);
    let truth = UserPosition::new(2.0, 4.0);
    let est = MlEstimator::new(
        &cfg,
        &GridSearchConfig::for_system(&cfg),
        &LmConfig::default(),
    )
    .unwrap();
    let (mut ml, mut wls) = (0.0, 0.0);
    for trial in 0..100 {
        let r = synthesize_observation(&cfg, &truth, mix(8, [trial, 0, 0, 0]));
        ml += est.estimate(&r).unwrap().position.distance_to(&truth);
        wls += wls_amplitude_baseline(&cfg, &r)
            .unwrap()
            .position
            .distance_to(&truth);
    }
    assert!(
        ml < wls,
        "ml mean {} vs wls mean {}",
        ml / 100.0,
        wls / 100.0
    );
}

#[test]
fn estimates_stay_in_area_for_in_area_truth() {
    let cfg = default_config(-40.0);
    let est = MlEstimator::new(
        &cfg,
        &GridSearchConfig::for_system(&cfg),
        &LmConfig::default(),
    )
    .unwrap();
    let area = cfg.area();
    let trials = 300;
    let inside = (0..trials)
        .filter(|&t| {
            let truth = pinloc::TruthSampler::UniformInArea.sample(&cfg, 9, t);
            let r = synthesize_observation(&cfg, &truth, mix(9, [t as u64, 1, 0, 0]));
            let out = est.estimate(&r).unwrap();
            assert_eq!(out.flags.out_of_bounds, !area.contains(&out.position));
            area.contains(&out.position)
        })
        .count();
    assert!(
        inside * 100 >= trials * 99,
        "{inside}/{trials} estimates inside the area"
    );
}

#[test]
fn translation_along_waveguide_translates_estimate() {
    let base = SystemConfig::new(&SystemParams::default()).unwrap();
    let v = [0.6, 1.9, 3.1, 4.4, 5.6, 6.9, 8.1];
    let delta = 1.25;
    let cfg_a = base
        .with_antennas(&AntennaLayout::Explicit(v.to_vec()))
        .unwrap();
    let cfg_b = base
        .with_antennas(&AntennaLayout::Explicit(
            v.iter().map(|x| x + delta).collect(),
        ))
        .unwrap();
    let gcfg_a = GridSearchConfig {
        search_bounds: pinloc::Bounds::new(0.0, 6.0, 0.0, 8.5),
        ..GridSearchConfig::for_system(&cfg_a)
    };
    let gcfg_b = GridSearchConfig {
        search_bounds: gcfg_a.search_bounds.translated(0.0, delta),
        ..gcfg_a
    };
    let lcfg = LmConfig::default();
    for truth in [UserPosition::new(1.37, 2.81), UserPosition::new(4.62, 6.05)] {
        let shifted = UserPosition::new(truth.x, truth.y + delta);
        let a = ml_estimate(&cfg_a, &model_signal(&cfg_a, &truth), &gcfg_a, &lcfg).unwrap();
        let b = ml_estimate(&cfg_b, &model_signal(&cfg_b, &shifted), &gcfg_b, &lcfg).unwrap();
        assert!((b.position.y - a.position.y - delta).abs() < 1e-6);
        assert!((b.position.x - a.position.x).abs() < 1e-6);
    }
}
