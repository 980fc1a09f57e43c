//! Nonnegative solution of a perturbed positive-basis system.
use nalgebra::{DMatrix, DVector};
use stla::petrov::{solve, PetrovProblem};

fn main() {
    let a = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
    let target = DVector::from_vec(vec![0.03, -0.02]);
    let gamma = |tau: &[f64]| {
        let t: f64 = tau.iter().sum();
        DMatrix::from_fn(2, 4, |i, j| 0.05 * t * ((i + j) as f64).cos())
    };
    let rho = move |tau: &[f64]| &target + DVector::from_element(2, 0.01 * tau.iter().map(|t| t * t).sum::<f64>());
    let problem = PetrovProblem::new(a, Box::new(gamma), Box::new(rho));
    let sol = solve(&problem).expect("solvable near the origin");
    println!("tau = {:?}", sol.tau);
    println!("residual {:.2e} after {} iterations ({:?})", sol.residual, sol.iterations, sol.branch);
    println!("|tau| = {:.4e} <= K sup|rho| = {:.4e}: {}", sol.tau_norm(), sol.bound_k * sol.rho_sup, sol.bound_ok);
}
