//! Fits the Hölder exponent of the minimum-time estimate near a fat target.
use std::collections::BTreeMap;

use stla::engine::{certify_fat, ControlSystem, EngineOptions, GroupSpec, Structure, TargetDef};
use stla::lab::{default_radii, holder_fit, ReachOptions};

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
    let group = GroupSpec::new(["f0+f1", "f0-f1"], 2).unwrap();
    let cert = certify_fat(&system, &u, &[1.0, 0.0], &[group], &EngineOptions::default()).unwrap();
    let fit = holder_fit(&system, &TargetDef::fat(u), &cert, &default_radii(8), 16, &ReachOptions::default()).unwrap();
    println!("fitted exponent {:.4} (theory {:.4}), constant {:.4}", fit.exponent, fit.theory, fit.constant);
    for (r, t) in &fit.envelope {
        println!("  r = {r:.3e}: T <= {t:.4e}");
    }
}
