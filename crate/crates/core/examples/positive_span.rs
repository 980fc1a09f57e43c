//! Positive-basis test with a strictly positive null witness.
use nalgebra::DMatrix;
use stla::span::{check_boundary, is_positive_basis};

fn main() {
    let a = DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 2.0, -2.0, 1.0, -1.0, 0.0, 0.0]);
    let c = is_positive_basis(&a).unwrap();
    println!("columns of {a} positive basis: {} (rank {}, margin {:.3})", c.verdict, c.rank, c.margin);
    println!("null witness lambda = {:?}", c.lambda);

    let half = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
    let c = is_positive_basis(&half).unwrap();
    println!("half-plane generators positive basis: {} (margin {:.3})", c.verdict, c.margin);

    let line = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
    let b = check_boundary(&line, &[1.0, 1.0]).unwrap();
    println!("boundary condition with s = (1, 1): {} (mu = {:?})", b.verdict, b.mu);
}
