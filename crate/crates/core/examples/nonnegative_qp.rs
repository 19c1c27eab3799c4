//! Use the sparse solvers directly on a small hand-built problem.

use wdc::{solve_nnqp, solve_spd, SolverConfig, SparseQuadratic, SparseSymmetric};

fn main() -> wdc::Result<()> {
    // path graph Laplacian on five nodes plus a diagonal
    let mut triplets = Vec::new();
    for i in 0..4 {
        triplets.push((i, i + 1, -1.0));
    }
    let lap = SparseSymmetric::from_upper_triplets(5, &{
        let mut t = triplets.clone();
        for i in 0..5 {
            let deg = if i == 0 || i == 4 { 1.0 } else { 2.0 };
            t.push((i, i, deg));
        }
        t
    })?;
    let q = lap.scaled_plus_diagonal(1.0, &[1.0; 5]);
    let cfg = SolverConfig::default();

    let rhs = [1.0, -2.0, 3.0, -2.0, 1.0];
    let free = solve_spd(&q, &rhs, &cfg)?;
    println!(
        "unconstrained minimizer {:.4?} ({} iterations)",
        free.x, free.iterations
    );

    let c: Vec<f64> = rhs.iter().map(|v| -v).collect();
    let qp = SparseQuadratic::new(q, c)?;
    let sol = solve_nnqp(&qp, &cfg)?;
    println!("non-negative minimizer  {:.4?}", sol.x);
    println!(
        "objective {:.6}, KKT residual {:.1e}",
        sol.objective, sol.kkt_residual
    );
    Ok(())
}
