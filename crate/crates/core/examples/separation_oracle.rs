//! Separates points from the hull of σ(wᵀx + b) on a box, with the exact
//! envelope and with the one-dimensional estimator.

use stfe_hull::activation::{Activation, Interval};
use stfe_hull::envelope::{Hull, Mode, RawInstance, Separation};

fn main() -> stfe_hull::Result<()> {
    let raw = RawInstance::new(
        vec![2.0, -3.0, 1.5],
        0.5,
        Activation::tanh(),
        vec![Interval::new(-1.0, 1.0)?, Interval::new(0.0, 2.0)?, Interval::new(-0.5, 0.5)?],
    )?;
    let hull = Hull::new(raw)?;
    let x = [0.3, 1.1, 0.0];
    let (lo, up, h) = (hull.conv_env(&x)?, hull.conc_env(&x)?, hull.h(&x)?);
    println!("at x = {x:?}: conv {lo:.6}  f {:.6}  conc {up:.6}  h {h:.6}", hull.f(&x));
    for y in [hull.f(&x), up + 0.1, 0.5 * (up + h), lo - 0.05] {
        for mode in [Mode::Env, Mode::Hest] {
            let verdict = match hull.separate(&x, y, mode)? {
                Separation::Inside => "inside".to_string(),
                Separation::Cut(c) => format!(
                    "cut {:?}: y vs {:?}·x + {:.6} (violated by {:.6})",
                    c.sense, c.coeffs, c.constant, c.violation
                ),
                Separation::Unseparated { excess } => format!("unseparated, excess {excess:.3e}"),
            };
            println!("y = {y:.6} [{mode}] {verdict}");
        }
    }
    Ok(())
}
