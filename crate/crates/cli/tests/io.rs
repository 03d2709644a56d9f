use std::path::PathBuf;

use reachcert::config::{PipelineConfig, SimSettings};
use reachcert::io::{self, BoundsArtifact, GainsArtifact};
use reachcert::pipeline::{self, StateRecord};
use reachcert_core::bounds::{BoundConfig, Gains, PhysicalParams};
use reachcert_core::controller::DesiredState;
use reachcert_core::geometry::{InflatedScenario, Scenario};
use reachcert_core::initial_set::{sample_initial_set, Recipe};
use reachcert_core::synth::SynthParams;
use reachcert_core::tube::{plan_tube, RrtParams, SafeTube};
use reachcert_core::Vec3;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

#[test]
fn shipped_scenarios_load() {
    let s = io::load_scenario(&scenario("reference.json")).unwrap();
    assert_eq!(s.obstacles.len(), 10);
    assert_eq!(s.p0, Vec3::new(0.5, 0.5, 1.0));
    assert_eq!(s.f_max, 85.1508);
    let h = io::load_scenario(&scenario("hover.json")).unwrap();
    assert!(h.obstacles.is_empty() && h.target.contains(h.p0));
}

#[test]
fn invalid_scenario_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Scenario = io::read_json(&scenario("reference.json")).unwrap();
    s.p0 = Vec3::new(1.75, 1.0, 1.0);
    let path = dir.path().join("bad.json");
    io::write_json(&path, &s).unwrap();
    let e = format!("{:#}", io::load_scenario(&path).unwrap_err());
    assert!(e.contains("obstacle"), "{e}");
}

#[test]
fn artifacts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = io::load_scenario(&scenario("reference.json")).unwrap();
    let p = PhysicalParams::reference();
    let cfg = BoundConfig::reference();

    let spec = reachcert_core::tuner::TuneSpec { schedule: reachcert_core::tuner::Schedule { epochs: 2, ..Default::default() }, ..reachcert_core::tuner::TuneSpec::reference() };
    let gains = pipeline::tune_gains(&spec, &p, &cfg, 2).unwrap();
    let path = dir.path().join("gains.json");
    io::write_json(&path, &gains).unwrap();
    assert_eq!(io::read_json::<GainsArtifact>(&path).unwrap(), gains);

    let (b, art) = pipeline::compute_bounds(&Gains::reference(), &p, &cfg, s.f_max).unwrap();
    let path = dir.path().join("bounds.json");
    io::write_json(&path, &art).unwrap();
    let back: BoundsArtifact = io::read_json(&path).unwrap();
    assert_eq!(back, art);
    assert_eq!(back.rebuild().unwrap().summary(), b.summary());

    let inf = InflatedScenario::new(&s, b.lp).unwrap();
    let tube = plan_tube(&inf, &RrtParams::default()).unwrap().unwrap();
    let path = dir.path().join("tube.json");
    io::write_json(&path, &tube).unwrap();
    assert_eq!(io::read_json::<SafeTube>(&path).unwrap(), tube);

    let (curve, synth) = pipeline::synth(&tube, &b.summary(), &s, &cfg, &p, &SynthParams::default()).unwrap();
    let curve = curve.unwrap();
    let path = dir.path().join("trajectory.json");
    io::write_json(&path, &curve).unwrap();
    assert_eq!(io::read_json::<reachcert_core::bezier::PiecewiseBezier>(&path).unwrap(), curve);
    let path = dir.path().join("synthesis.json");
    io::write_json(&path, &synth).unwrap();
    assert_eq!(io::read_json::<pipeline::SynthArtifact>(&path).unwrap(), synth);

    let sim = SimSettings { count: 2, ..SimSettings::default() };
    let starts = pipeline::sample_starts(&curve, &b, &Gains::reference(), &cfg, &p, &sim).unwrap();
    let records: Vec<StateRecord> = starts.iter().map(StateRecord::from).collect();
    let path = dir.path().join("states.json");
    io::write_json(&path, &records).unwrap();
    let back: Vec<StateRecord> = io::read_json(&path).unwrap();
    assert_eq!(back, records);
    for (r, s0) in back.iter().zip(&starts) {
        assert_eq!(r.state().unwrap(), *s0);
    }

    let traces = pipeline::simulate_batch(&starts[..1], &curve, &Gains::reference(), &p, &b, &cfg, &sim.options(false)).unwrap();
    let path = dir.path().join("trace.csv");
    io::write_trace_csv(&path, &traces[0]).unwrap();
    let back = io::read_trace_csv(&path).unwrap();
    assert_eq!(back.samples, traces[0].samples);

    let c = pipeline::certify_batch(&[("trace.csv".into(), back)], &b.summary(), &s);
    assert!(c.passed, "{c:?}");
    let path = dir.path().join("certification.json");
    io::write_json(&path, &c).unwrap();
    assert_eq!(io::read_json::<pipeline::CertificationArtifact>(&path).unwrap(), c);
}

#[test]
fn config_defaults_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, "{}").unwrap();
    let cfg: PipelineConfig = io::read_json(&path).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
    assert_eq!(cfg.gains, Gains::reference());

    std::fs::write(&path, r#"{"scenario": "s.json", "rrt": {"seed": 3}, "simulation": {"count": 5}}"#).unwrap();
    let mut cfg: PipelineConfig = io::read_json(&path).unwrap();
    assert_eq!((cfg.rrt.seed, cfg.simulation.count, cfg.rrt.n_v), (3, 5, RrtParams::default().n_v));
    cfg.set_seed(11);
    assert_eq!((cfg.rrt.seed, cfg.simulation.seed), (11, 11));

    let written = dir.path().join("full.json");
    io::write_json(&written, &cfg).unwrap();
    assert_eq!(io::read_json::<PipelineConfig>(&written).unwrap(), cfg);
}

#[test]
fn sample_csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p, cfg) = (Gains::reference(), PhysicalParams::reference(), BoundConfig::reference());
    let b = reachcert_core::bounds::BoundSet::compute(&g, &p, &cfg).unwrap();
    let d0 = DesiredState::hover(Vec3::new(0.5, 0.5, 1.0));
    let samples = sample_initial_set(&d0, &b.matrices, &g, &cfg, &p, Recipe::Position, 50, 4);
    let path = dir.path().join("s.csv");
    io::write_samples_csv(&path, &samples).unwrap();
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert!(r.headers().unwrap().iter().eq(io::SAMPLE_HEADER));
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 50);
    for (row, s) in rows.iter().zip(&samples) {
        assert_eq!(row[12].parse::<u8>().unwrap() == 1, s.report.member);
        assert_eq!(row[0].parse::<f64>().unwrap(), s.perturbation.dp.x);
    }
}
