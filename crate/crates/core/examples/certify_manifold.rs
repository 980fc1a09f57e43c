//! Manifold-target certificates and the side-condition variants.
use std::collections::BTreeMap;

use stla::engine::{certify_manifold, ControlSystem, EngineOptions, GroupSpec, ManifoldVariant, Structure, TargetDef};

fn main() {
    let p = BTreeMap::new();
    let system = ControlSystem::parse(
        &["x", "y", "z"],
        &[("fo", &["y", "0", "-z"]), ("f1", &["0", "1", "0"])],
        &p,
        Structure::Affine { drift: "fo".into(), controls: vec!["f1".into()] },
        0.5,
    )
    .unwrap();
    let target = TargetDef::manifold(vec![system.parse_expr("x", &p).unwrap(), system.parse_expr("y", &p).unwrap()], None);
    let groups = vec![
        GroupSpec::new(["fo+f1"], 1).unwrap(),
        GroupSpec::new(["fo-f1"], 1).unwrap(),
        GroupSpec::new(["fo+f1", "fo-f1"], 2).unwrap(),
        GroupSpec::new(["fo-f1", "fo+f1"], 2).unwrap(),
    ];
    let opts = EngineOptions::default();
    for z in [0.0, 0.3] {
        for variant in
            [ManifoldVariant::StrictExtra, ManifoldVariant::RestrictedVars(None), ManifoldVariant::BlockStructure, ManifoldVariant::Auto]
        {
            match certify_manifold(&system, &target, &[0.0, 0.0, z], &groups, &variant, &opts) {
                Ok(c) => println!("z = {z}, {variant:?}: {:?}, columns {:?}", c.theorem, c.a_o),
                Err(e) => println!("z = {z}, {variant:?}: {e}"),
            }
        }
    }
}
