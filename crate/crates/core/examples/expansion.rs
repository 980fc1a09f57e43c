//! Decay rate of the remainder after the truncated ⊞ series along a trajectory.
use std::collections::BTreeMap;

use stla::engine::{ControlSystem, Structure};
use stla::lab::expansion_residual_order;

fn main() {
    let p = BTreeMap::new();
    let system = ControlSystem::parse(
        &["x", "y"],
        &[("f0", &["-y", "x"]), ("f1", &["-2*y", "2*x"])],
        &p,
        Structure::Affine { drift: "f0".into(), controls: vec!["f1".into()] },
        0.5,
    )
    .unwrap();
    let u = system.parse_expr("x - 1", &p).unwrap();
    let fields = vec!["f0+f1".to_string(), "f0-f1".to_string()];
    for k in 1..=3 {
        let fit = expansion_residual_order(&system, &fields, &u, &[1.0, 0.0], k).unwrap();
        println!("truncated at order {k}: residual slope {:.3} over {} times", fit.slope, fit.used);
    }
}
