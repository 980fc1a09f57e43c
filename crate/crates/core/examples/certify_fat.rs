//! Fat-target certificates found by group search around a sphere.
use std::collections::BTreeMap;

use stla::engine::{search_and_certify, ControlSystem, EngineOptions, ManifoldVariant, SearchOptions, Structure, TargetDef};

fn main() {
    let system = ControlSystem::parse(
        &["x", "y", "z"],
        &[("f", &["z/2", "z^2/2", "1/2"]), ("g", &["z/2", "z^2/2", "-1/2"])],
        &BTreeMap::new(),
        Structure::Symmetric,
        0.5,
    )
    .unwrap();
    let u = system.parse_expr("(x^2 + y^2 + z^2 - 1)/2", &BTreeMap::new()).unwrap();
    let target = TargetDef::fat(u);
    let search = SearchOptions { k_max: 3, ..SearchOptions::default() };
    for x_o in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]] {
        match search_and_certify(&system, &target, &x_o, &search, &ManifoldVariant::Auto, &EngineOptions::default()) {
            Ok(c) => println!(
                "{x_o:?}: order {} via {} (coefficient {:.4}), exponent {:.3}",
                c.k_bar,
                c.groups[0].group.label(),
                c.groups[0].column[0],
                c.exponent
            ),
            Err(e) => println!("{x_o:?}: {e}"),
        }
    }
}
