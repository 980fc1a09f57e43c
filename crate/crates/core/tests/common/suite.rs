//! Randomized identity battery over polynomial fields.

use std::collections::BTreeMap;

use stla::identities::{
    ad_reduction, bch_third, bracket_quadruple_scalar, bracket_ten, doubling, homogeneity, lift_inputs,
    linear_constraint, methods_agree, second_order_multi, second_order_pair, sign_rule, IdentityCheck,
};
use stla::jet::JetError;

use super::*;

/// Family label → checks, in family order.
pub type Battery = BTreeMap<&'static str, Vec<IdentityCheck>>;

pub const FAMILIES: [&str; 11] = [
    "a. multinomial = recursive",
    "b. pair second order",
    "c. m-field second order",
    "d. homogeneity",
    "e. sign rules",
    "f. 4-tuple bracket",
    "g. 10-tuple bracket",
    "h. balanced ad reduction k<=3",
    "i. F_k recursion k<=4",
    "j. third BCH term",
    "k. repeated field",
];

fn balance(f: &[Expr], g: &[Expr], x0: &[f64]) -> Vec<Expr> {
    f.iter()
        .zip(g)
        .map(|(fi, gi)| {
            let s = fi.eval_point(x0).unwrap() + gi.eval_point(x0).unwrap();
            Expr::sub(gi.clone(), Expr::constant(s))
        })
        .collect()
}

/// One random instance with seed `seed`: dimension `1 + seed % 4`, degree ≤ 3.
pub fn instance(seed: u64, out: &mut Battery) -> Result<(), JetError> {
    let mut r = rng(seed);
    let n = 1 + (seed % 4) as usize;
    let names = ["x", "y", "z", "w"];
    let vs = vars(&names[..n]);
    let fs: Vec<Vec<Expr>> = (0..4).map(|_| random_field(&mut r, &vs, 3)).collect();
    let u = ex(&random_poly(&mut r, &vs, 3), &vs);
    let x0 = random_point(&mut r, n);
    let lambda = r.random_range(0.2..3.0);
    let bal = balance(&fs[0], &fs[1], &x0);

    let mut all = fs.clone();
    all.push(bal);
    let (g, ug) = lift_inputs(&all, &u, &x0)?;
    let (f, gg, h, q, b) = (&g[0], &g[1], &g[2], &g[3], &g[4]);
    let m = 1 + (seed % 4) as usize;

    let mut push = |fam: &'static str, c: IdentityCheck| out.entry(fam).or_default().push(c);
    for k in 1..=5 {
        push(FAMILIES[0], methods_agree(&g[..m], &ug, k)?);
    }
    push(FAMILIES[1], second_order_pair(f, gg, &ug)?);
    push(FAMILIES[2], second_order_multi(&[f.clone(), gg.clone(), h.clone(), q.clone()][..m.max(2)], &ug)?);
    push(FAMILIES[3], homogeneity(f, gg, &ug, lambda, 3)?);
    push(FAMILIES[4], sign_rule(f, gg, &ug, 3)?);
    push(FAMILIES[4], sign_rule(f, gg, &ug, 4)?);
    push(FAMILIES[5], bracket_quadruple_scalar(f, gg, &ug)?);
    push(FAMILIES[6], bracket_ten(f, gg, h)?);
    for k in 1..=3 {
        push(FAMILIES[7], ad_reduction(f, b, &ug, k)?.expect("pair is balanced by construction"));
    }
    for k in 2..=4 {
        push(FAMILIES[8], linear_constraint(f, gg, k)?);
    }
    push(FAMILIES[9], bch_third(f, gg)?);
    push(FAMILIES[10], doubling(f, &ug, 3)?);
    Ok(())
}

pub fn battery(count: u64) -> Battery {
    let mut out = Battery::new();
    for seed in 0..count {
        instance(seed, &mut out).unwrap_or_else(|e| panic!("instance {seed}: {e}"));
    }
    out
}

/// Passing count and worst error per family.
pub fn summary(b: &Battery) -> Vec<(&'static str, usize, usize, f64)> {
    FAMILIES
        .iter()
        .map(|fam| {
            let cs = b.get(fam).map(Vec::as_slice).unwrap_or(&[]);
            let pass = cs.iter().filter(|c| c.passed).count();
            let worst = cs.iter().map(|c| c.error).fold(0.0, f64::max);
            (*fam, pass, cs.len(), worst)
        })
        .collect()
}
