//! Builds controls reaching a point target and prints one trajectory as CSV.
use std::collections::BTreeMap;

use stla::engine::{certify_point, ControlSystem, EngineOptions, GroupSpec, Structure, TargetDef};
use stla::lab::{integrate_switched, reach_target, write_trajectory_csv, ReachOptions, SimOptions, SwitchSchedule};

fn main() {
    let system = ControlSystem::parse(
        &["x", "y"],
        &[("f0", &["y^3", "0"]), ("f1", &["0", "1"])],
        &BTreeMap::new(),
        Structure::Affine { drift: "f0".into(), controls: vec!["f1".into()] },
        0.5,
    )
    .unwrap();
    let groups = vec![
        GroupSpec::new(["f0+f1"], 1).unwrap(),
        GroupSpec::new(["f0-f1"], 1).unwrap(),
        GroupSpec::new(["f0+f1", "f0-f1"], 4).unwrap(),
        GroupSpec::new(["f0-f1", "f0+f1"], 4).unwrap(),
    ];
    let cert = certify_point(&system, &[0.0, 0.0], &groups, &EngineOptions::default()).unwrap();
    let opts = ReachOptions::default();
    let mut last = None;
    for start in [[1e-3, 0.0], [-1e-3, 0.0], [0.0, 1e-3], [5e-4, -5e-4]] {
        let est = reach_target(&system, &TargetDef::point(), &start, &cert, &opts).unwrap();
        println!("from {start:?}: reached {}, T <= {:.4}, residual {:.1e}", est.reached, est.t_est, est.residual);
        last = Some(est);
    }
    let est = last.unwrap();
    let sched = SwitchSchedule::from_groups(&cert.group_specs(), &est.tau).unwrap();
    let sim = integrate_switched(&system, &sched, &est.start, &SimOptions { record_every: 250, ..SimOptions::default() })
        .unwrap();
    write_trajectory_csv(std::io::stdout().lock(), &sim).unwrap();
}
