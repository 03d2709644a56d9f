use reachcert_core::bounds::{BoundConfig, Gains, PhysicalParams};
use reachcert_core::tuner::{objective, reflect, tune, Schedule, TuneSpec, GAMMA_MAX, GAMMA_MIN};

#[test]
fn tuned_objective_is_competitive_with_reference_gains() {
    let (p, cfg) = (PhysicalParams::reference(), BoundConfig::reference());
    let spec = TuneSpec::reference();
    let reference_objective = objective(&Gains::reference(), spec.weights, &p, &cfg).unwrap();
    let r = tune(&spec, &p, &cfg).unwrap();
    assert!(r.objective <= 1.05 * reference_objective, "{} vs {reference_objective}", r.objective);
    assert!(r.objective <= r.initial_objective);
    assert_eq!(objective(&r.gains, spec.weights, &p, &cfg).unwrap(), r.objective);
    let g = r.gains.to_array();
    assert!(g[..4].iter().all(|k| (0.1..=30.0).contains(k)));
    assert!(g[4..].iter().all(|y| (GAMMA_MIN..=GAMMA_MAX).contains(y)));
}

#[test]
fn tuning_is_deterministic() {
    let (p, cfg) = (PhysicalParams::reference(), BoundConfig::reference());
    let spec = TuneSpec { schedule: Schedule { epochs: 5, ..Schedule::default() }, seed: 11, ..TuneSpec::reference() };
    assert_eq!(tune(&spec, &p, &cfg).unwrap(), tune(&spec, &p, &cfg).unwrap());
    let other = TuneSpec { seed: 12, ..spec };
    assert_ne!(tune(&spec, &p, &cfg).unwrap().gains, tune(&other, &p, &cfg).unwrap().gains);
}

#[test]
fn reflection_examples() {
    assert_eq!(reflect(30.5, 0.1, 30.0), 29.5);
    assert!((reflect(-0.3, 0.1, 30.0) - 0.5).abs() < 1e-12);
    assert_eq!(reflect(5.0, 0.1, 30.0), 5.0);
    for x in [-1e3, -61.0, -0.5, 0.0, 17.0, 59.9, 1e4] {
        assert!((0.1..=30.0).contains(&reflect(x, 0.1, 30.0)));
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let (p, cfg) = (PhysicalParams::reference(), BoundConfig::reference());
    let base = TuneSpec::reference();
    for spec in [
        TuneSpec { k_lo: 0.0, ..base },
        TuneSpec { k_lo: 40.0, ..base },
        TuneSpec { weights: [1.0, -1.0, 1.0], ..base },
        TuneSpec { schedule: Schedule { cooling: 1.0, ..base.schedule }, ..base },
        TuneSpec { initial: Gains::from_array([50.0, 10.0, 10.0, 10.0, 0.5, 0.5]), ..base },
    ] {
        assert!(tune(&spec, &p, &cfg).is_err());
    }
}
