//! End-to-end runs of the four experiments on small configurations.

use std::fs;
use std::path::Path;

use eeqt_core::config::{parse_config, resolve, Experiment, ExperimentConfig, RawConfig};
use eeqt_core::output::read_density_csv;
use eeqt_core::run::{run_and_emit, Results};
use serde_json::Value;

const ARRIVAL: &str = r#"
experiment = "arrival"
boosts = [0.3, -0.6]
[model]
mhat = 50.0
[initial]
kind = "positive-energy"
p0 = 1.0
x0 = -1.0
delta_k = 20.0
[detector]
x_pos = 0.0
width = 0.1
height = 1.0
[grid]
x_min = -6.0
x_max = 4.0
dx = 0.01
dx_a = 0.015
tau_cut = 5.0
"#;

const TRAVERSAL: &str = r#"
experiment = "traversal"
stride = 10
boosts = [0.5]
joint = true
[model]
mhat = 30.0
[initial]
kind = "positive-energy"
p0 = 1.0
x0 = -1.5
delta_k = 20.0
[d1]
x_pos = 0.0
width = 0.5
height = 2e-2
[d2]
x_pos = 1.26
width = 0.1
height = 2e-2
[grid]
x_min = -8.0
x_max = 8.0
dx = 0.01
tau_cut = 14.0
"#;

fn config(text: &str, experiment: Option<Experiment>, out: &Path, edit: impl FnOnce(&mut RawConfig)) -> ExperimentConfig {
    let mut raw = parse_config(text).unwrap();
    if experiment.is_some() {
        raw.experiment = experiment;
    }
    raw.out = Some(out.to_path_buf());
    edit(&mut raw);
    resolve(raw).unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn arrival_writes_densities_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(ARRIVAL, None, dir.path(), |r| r.both_steps = Some(true));
    let report = run_and_emit(&cfg).unwrap();
    let Results::Arrival(r) = &report.summary.results else {
        panic!("wrong result kind")
    };
    assert!(r.error_t_a0.is_some());
    assert!(r.p_inf > 0.0 && r.p_inf < 1.0);
    let rest = read_density_csv(&fs::read_to_string(dir.path().join("density_rest.csv")).unwrap()).unwrap();
    assert!((rest.mean() - r.t_a0).abs() < 1e-12);
    for b in &r.boosts {
        assert!((b.mean_from_density - b.mean_closed_form).abs() < 1e-9);
        let boosted = read_density_csv(&fs::read_to_string(dir.path().join(&b.file)).unwrap()).unwrap();
        assert!((boosted.mean() - b.mean_from_density).abs() < 1e-12);
    }
    let json = summary(dir.path());
    assert_eq!(json["experiment"], "arrival");
    assert_eq!(json["results"]["t_a0"].as_f64().unwrap(), r.t_a0);
    assert_eq!(json["config"]["grid"]["dx"].as_f64().unwrap(), 0.01);
    assert!(report.line.starts_with("arrival:"));
}

fn mc(raw: &mut RawConfig, seed: u64) {
    raw.samples = Some(300);
    raw.seed = Some(seed);
    raw.boosts = None;
}

#[test]
fn mc_arrival_is_seed_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run_and_emit(&config(ARRIVAL, Some(Experiment::McArrival), a.path(), |r| mc(r, 4))).unwrap();
    run_and_emit(&config(ARRIVAL, Some(Experiment::McArrival), b.path(), |r| mc(r, 4))).unwrap();
    run_and_emit(&config(ARRIVAL, Some(Experiment::McArrival), c.path(), |r| mc(r, 5))).unwrap();
    let read = |d: &Path| fs::read_to_string(d.join("events.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
    assert_eq!(read(a.path()).lines().count(), 301);
    let json = summary(a.path());
    assert_eq!(json["results"]["events"], 300);
    assert!(json["results"]["ks_distance"].as_f64().unwrap() < 0.1);
}

#[test]
fn traversal_and_mc_traversal_agree() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_and_emit(&config(TRAVERSAL, None, dir.path(), |_| ())).unwrap();
    let Results::Traversal(t) = &report.summary.results else {
        panic!("wrong result kind")
    };
    assert!(dir.path().join("joint.csv.gz").exists());
    assert!(t.p_inf_12 > 0.0 && t.p_inf_12 < t.p_inf_1);
    assert!((t.boosts[0].mean_from_density - t.boosts[0].mean_closed_form).abs() < 1e-9);

    let mc = tempfile::tempdir().unwrap();
    let report = run_and_emit(&config(TRAVERSAL, Some(Experiment::McTraversal), mc.path(), |r| {
        r.samples = Some(1000);
        r.joint = None;
        r.boosts = None;
    })).unwrap();
    let Results::McTraversal(m) = &report.summary.results else {
        panic!("wrong result kind")
    };
    assert_eq!(m.traversals, 1000);
    assert_eq!(m.t_t0, t.t_t0);
    assert!((m.mean_traversal_time - t.t_t0).abs() < 3.0 * m.standard_error);
    let events = fs::read_to_string(mc.path().join("events.csv")).unwrap();
    assert!(events.starts_with("chain,event,detector,tau,t,x,outcome"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = config(ARRIVAL, None, &blocker.join("sub"), |_| ());
    assert!(matches!(run_and_emit(&cfg), Err(eeqt_core::Error::Io(_))));
}
