//! The reference dense simplex: a small production-planning LP, a cut added
//! afterwards with a warm start, and the LP-format export.

use stfe_hull::lp::{to_lp_string, Comparator, DenseSimplex, LinearProgram, LpSolver, Sense};

fn main() -> stfe_hull::Result<()> {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_variable("x", 0.0, f64::INFINITY)?;
    let y = lp.add_variable("y", 0.0, 4.0)?;
    lp.set_objective(&[3.0, 2.0])?;
    lp.add_constraint(&[1.0, 1.0], Comparator::Le, 6.0)?;
    lp.add_constraint(&[1.0, 3.0], Comparator::Le, 12.0)?;
    print!("{}", to_lp_string(&lp));

    let solver = DenseSimplex::default();
    let (first, mut warm) = solver.solve_warm(&lp)?;
    println!("optimum: {first:?}");

    lp.add_sparse_constraint(vec![(x, 1.0), (y, -1.0)], Comparator::Le, 1.0)?;
    let second = solver.reoptimize(&lp, &mut warm)?;
    println!("after x - y <= 1 (warm): {second:?}");
    println!("cold check:               {:?}", solver.solve(&lp)?);
    Ok(())
}
