//! Parse, evaluate and differentiate an expression.
use stla::expr::parse;

fn main() {
    let vars: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let u = parse("(x^2 + y^2 - 1)/2 + sin(x*y)", &vars).expect("valid expression");
    println!("u = {}", u.display(&vars));
    println!("u(0.5, 0.25) = {}", u.eval_point(&[0.5, 0.25]).unwrap());
    for (i, v) in vars.iter().enumerate() {
        let d = u.symbolic_partial(i);
        println!("du/d{v} = {}", d.display(&vars));
    }
    match parse("x +* y", &vars) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
}
