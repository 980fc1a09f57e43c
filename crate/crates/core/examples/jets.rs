//! Truncated Taylor expansions (jets) at a base point.
use stla::expr::parse;
use stla::jet::lift;

fn main() {
    let vars: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let e = parse("exp(x)*cos(y) + x*y^2", &vars).unwrap();
    let g = lift(&e, &[0.0, 0.0], 4).unwrap();
    println!("jet of exp(x)cos(y) + xy^2 at the origin, degree <= 4:");
    let mut terms: Vec<(Vec<u32>, f64)> = g.poly.terms().map(|(m, c)| (m.to_vec(2), *c)).collect();
    terms.sort_by(|a, b| (a.0.iter().sum::<u32>(), &a.0).cmp(&(b.0.iter().sum::<u32>(), &b.0)));
    for (alpha, c) in terms {
        println!("  x^{} y^{}: {c:+.6}", alpha[0], alpha[1]);
    }
    let dx = g.poly.partial(0);
    println!("d/dx at the origin = {}", dx.value().unwrap());
}
