//! Evaluates the operator identity suite on fixed fields.
use stla::expr::{parse, Expr};
use stla::identities::{lift_inputs, run_suite};

fn main() {
    let vars: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let p = |s: &str| parse(s, &vars).unwrap();
    let fields: Vec<Vec<Expr>> =
        vec![vec![p("x*y + 1"), p("y^2 - x")], vec![p("y"), p("x^2 - y")], vec![p("2*x - y"), p("1 + x")]];
    let (fs, u) = lift_inputs(&fields, &p("x^2*y + y^3"), &[0.3, -0.2]).unwrap();
    let checks = run_suite(&fs, &u).unwrap();
    for c in &checks {
        println!("{:<6} {:.1e}  {}", if c.passed { "ok" } else { "FAIL" }, c.error, c.name);
    }
    println!("{} of {} hold", checks.iter().filter(|c| c.passed).count(), checks.len());
}
