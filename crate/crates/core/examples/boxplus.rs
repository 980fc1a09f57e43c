//! ⊞-powers of Hamiltonians, Lie brackets and trajectory coefficients.
use stla::expr::parse;
use stla::hamiltonian::{boxplus_power, lie_bracket, trajectory_coeffs, BoxplusMethod};
use stla::jet::{lift, lift_vector};

fn main() {
    let vars: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let p = |s: &str| parse(s, &vars).unwrap();
    let x0 = [1.0, 0.0];

    // Rotation drift with a parallel control: f0 ± f1 = (1 ± 2)(−y, x).
    let f = lift_vector(&[p("-3*y"), p("3*x")], &x0, 3).unwrap();
    let g = lift_vector(&[p("y"), p("-x")], &x0, 3).unwrap();
    let u = lift(&p("x"), &x0, 4).unwrap();
    for k in 1..=3 {
        let a = boxplus_power(&[f.clone(), g.clone()], &u, k, BoxplusMethod::Multinomial).unwrap();
        let b = boxplus_power(&[f.clone(), g.clone()], &u, k, BoxplusMethod::Recursive).unwrap();
        println!("(H_f ⊞ H_g)^{k} u(1,0) = {a} (recursive: {b})");
    }
    println!("[f, g](1,0) = {:?}", lie_bracket(&f, &g).unwrap().value().unwrap());

    // Drift y^3 e1 with control e2: fourth-order motion along x.
    let o = [0.0, 0.0];
    let a = lift_vector(&[p("y^3"), p("1")], &o, 4).unwrap();
    let b = lift_vector(&[p("y^3"), p("-1")], &o, 4).unwrap();
    for (i, c) in trajectory_coeffs(&[a, b], 4).unwrap().iter().enumerate() {
        println!("order {} trajectory coefficient at the origin: {c:?}", i + 1);
    }
}
