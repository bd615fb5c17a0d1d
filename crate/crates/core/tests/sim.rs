use epigame::baselines::BaselineKind;
use epigame::epistemic::{run_epistemic_game, EpistemicPolicy};
use epigame::game::{db_to_linear, meets_threshold, NetworkState, PowerGrid};
use epigame::sim::*;

fn small(n: usize, trials: usize) -> ScenarioSpec {
    ScenarioSpec {
        n_nodes: n,
        trials,
        seed: 3,
        grid: PowerGrid::linear(101, 1.0).unwrap(),
        workers: 1,
        ..ScenarioSpec::reference()
    }
}

#[test]
fn single_node_is_deterministic() {
    let spec = ScenarioSpec {
        noise_power: 1.0,
        thresholds: Thresholds::Uniform(1.0),
        desired_gain: Some(1.0),
        grid: PowerGrid::linear(2001, 2.0).unwrap(),
        ..small(1, 25)
    };
    let m = run_scenario(&spec).unwrap();
    assert_eq!(m.avg_power, 0.5);
    assert_eq!(m.coverage, 1.0);
    assert_eq!(m.power_ci_halfwidth, 0.0);
    assert_eq!(m.nonconverged, 0);
    assert!(m.warning.is_none());
}

#[test]
fn vanishing_threshold_covers_everyone() {
    let spec = ScenarioSpec {
        thresholds: Thresholds::Uniform(1e-12),
        ..small(8, 30)
    };
    let m = run_scenario(&spec).unwrap();
    assert_eq!(m.coverage, 1.0);
    assert_eq!(m.outage, 0.0);
}

#[test]
fn gains_follow_the_rayleigh_prior() {
    // E[g^2] = 2 sigma^2 and E[g] = sigma sqrt(pi / 2) for sigma = 1
    let spec = small(200, 1);
    let draws: Vec<f64> = (0..1000).flat_map(|t| draw_gains(&spec, t)).collect();
    let n = draws.len() as f64;
    let m2 = draws.iter().map(|g| g * g).sum::<f64>() / n;
    let m1 = draws.iter().sum::<f64>() / n;
    assert!((m2 - 2.0).abs() < 0.02, "{m2}");
    assert!((m1 - (std::f64::consts::PI / 2.0).sqrt()).abs() < 0.01, "{m1}");
    assert_ne!(draw_gains(&spec, 0), draw_gains(&spec, 1));
    let other = ScenarioSpec {
        seed: 4,
        ..spec.clone()
    };
    assert_ne!(draw_gains(&spec, 0), draw_gains(&other, 0));
}

#[test]
fn metrics_replay_from_the_trial_streams() {
    let spec = ScenarioSpec {
        thresholds: Thresholds::Uniform(db_to_linear(-10.0)),
        noise_power: 1e-3,
        grid: PowerGrid::linear(11, 1.0).unwrap(),
        ..small(2, 60)
    };
    let policy = EpistemicPolicy::new(1).unwrap();
    let t = db_to_linear(-10.0);
    let (mut cov, mut pow) = (0.0, 0.0);
    for trial in 0..spec.trials {
        let g = draw_gains(&spec, trial);
        let net = NetworkState::from_gains(&g, &[t, t], 1e-3).unwrap();
        let trace = run_epistemic_game(&net, &spec.grid, &policy, spec.max_stages).unwrap();
        let p = trace.final_profile.ordered(&net).unwrap();
        let s0 = g[0] * g[0] * p[0] / (g[1] * g[1] * p[1] + 1e-3);
        let s1 = g[1] * g[1] * p[1] / (g[0] * g[0] * p[0] + 1e-3);
        cov += (meets_threshold(s0, t) as u8 + meets_threshold(s1, t) as u8) as f64 / 2.0;
        pow += (p[0] + p[1]) / 2.0;
    }
    let m = run_scenario(&spec).unwrap();
    let n = spec.trials as f64;
    assert!((m.coverage - cov / n).abs() < 1e-12);
    assert!((m.avg_power - pow / n).abs() < 1e-12);
}

#[test]
fn confidence_interval_shrinks_with_trials() {
    let base = ScenarioSpec {
        thresholds: Thresholds::Uniform(db_to_linear(-5.0)),
        noise_power: 1e-2,
        ..small(4, 400)
    };
    let a = run_scenario(&base).unwrap();
    let b = run_scenario(&ScenarioSpec { trials: 1600, ..base }).unwrap();
    assert!(a.ci_halfwidth > 0.0);
    let ratio = b.ci_halfwidth / a.ci_halfwidth;
    assert!((ratio - 0.5).abs() <= 0.1, "{ratio}");
}

#[test]
fn coverage_falls_as_threshold_rises() {
    // EPA transmits the same profile whatever the threshold, so coverage is
    // monotone trial by trial.
    let mut last = f64::INFINITY;
    for db in [-30.0, -20.0, -10.0, 0.0, 10.0] {
        let spec = ScenarioSpec {
            thresholds: Thresholds::Uniform(db_to_linear(db)),
            solver: SolverKind::Baseline(BaselineKind::Epa { level: 1.0 }),
            noise_power: 1e-2,
            ..small(5, 300)
        };
        let c = run_scenario(&spec).unwrap().coverage;
        assert!(c <= last, "{db} dB: {c} > {last}");
        last = c;
    }
    // M1 over the same thresholds, within sampling error
    let mut prev: Option<(f64, f64)> = None;
    for db in [-30.0, -15.0, 0.0] {
        let spec = ScenarioSpec {
            thresholds: Thresholds::Uniform(db_to_linear(db)),
            noise_power: 1e-2,
            ..small(5, 300)
        };
        let m = run_scenario(&spec).unwrap();
        if let Some((c, ci)) = prev {
            assert!(m.coverage <= c + ci + m.ci_halfwidth, "{db} dB");
        }
        prev = Some((m.coverage, m.ci_halfwidth));
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let base = ScenarioSpec {
        thresholds: Thresholds::Uniform(db_to_linear(-15.0)),
        interference_fraction: 0.5,
        ..small(12, 64)
    };
    let one = run_scenario(&base).unwrap();
    let four = run_scenario(&ScenarioSpec {
        workers: 4,
        ..base.clone()
    })
    .unwrap();
    assert_eq!(one, four);
    assert_eq!(one.outage, 1.0 - one.coverage);
    assert_eq!(one.trials_run, 64);
}

#[test]
fn equal_power_allocation_is_constant() {
    let base = small(10, 20);
    let rows = sweep_fig6(&base, &[10.0, 50.0, 100.0], &[PolicyLabel::Epa]).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.metrics.avg_power, 1.0);
        assert_eq!(r.metrics.power_ci_halfwidth, 0.0);
    }
}

#[test]
fn conditioned_sweeps_cover_the_grid() {
    let base = small(6, 10);
    let rows = sweep_fig3(&base, &[0.1, 1.0], &[-20.0, -30.0]).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0].gain, rows[0].threshold_db), (0.1, -20.0));
    assert_eq!((rows[3].gain, rows[3].threshold_db), (1.0, -30.0));
    assert!(sweep_fig4(&base, &[], &[-20.0]).is_err());
}

#[test]
fn nash_and_sncpc_run_in_the_harness() {
    for solver in [
        SolverKind::Nash,
        SolverKind::Baseline(BaselineKind::Sncpc { max_iter: 500 }),
    ] {
        let spec = ScenarioSpec {
            solver,
            thresholds: Thresholds::Uniform(db_to_linear(-20.0)),
            noise_power: 1e-3,
            ..small(4, 30)
        };
        let m = run_scenario(&spec).unwrap();
        assert_eq!(m.trials_run, 30);
        assert!((0.0..=1.0).contains(&m.coverage));
    }
}

#[test]
fn stage_budget_exhaustion_raises_the_warning() {
    let spec = ScenarioSpec {
        max_stages: 1,
        thresholds: Thresholds::Uniform(db_to_linear(-10.0)),
        noise_power: 1e-3,
        ..small(6, 50)
    };
    let m = run_scenario(&spec).unwrap();
    assert!(m.nonconverged > 0);
    assert!(m.warning.as_deref().unwrap().contains("did not converge"));
}

#[test]
fn outcome_reports_the_active_set() {
    let spec = ScenarioSpec {
        interference_fraction: 0.3,
        desired_gain: Some(0.5),
        ..small(10, 1)
    };
    let o = run_trial(&spec, 0).unwrap();
    assert_eq!(o.active, vec![0, 1, 2, 3]);
    assert_eq!(o.gains.len(), 10);
    assert_eq!(o.gains[0], 0.5);
    assert_eq!(o.powers.len(), 4);
    assert_eq!(o.power, o.powers[0]);
    assert_eq!(o.coverage, o.covered[0] as u8 as f64);
}
