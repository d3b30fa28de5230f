//! Evaluates the concave envelope, the one-dimensional estimator and the
//! region partition of a two-dimensional sigmoid instance on a coarse grid.

use stfe_hull::activation::Activation;
use stfe_hull::envelope::{Hull, RawInstance, RegionLabel};

fn main() -> stfe_hull::Result<()> {
    let hull = Hull::new(RawInstance::on_unit_box(vec![10.0, 5.0], -10.0, Activation::sigmoid())?)?;
    println!("tie point of the full instance: {:?}", hull.normalized().tie());
    let n = 8;
    println!("\nregions (f = function, l = linear, iK = perspective on face x_K = 1):");
    for j in (0..=n).rev() {
        let row: Vec<String> = (0..=n)
            .map(|i| {
                let x = [i as f64 / n as f64, j as f64 / n as f64];
                match hull.normalized().classify(&x).unwrap() {
                    RegionLabel::Rf => " f".to_string(),
                    RegionLabel::Rl => " l".to_string(),
                    RegionLabel::Ri(k) => format!("i{k}"),
                }
            })
            .collect();
        println!("x2={:.3}  {}", j as f64 / n as f64, row.join(" "));
    }
    println!("\n{:>5} {:>5}  {:>8} {:>8} {:>8}", "x1", "x2", "f", "conc", "h");
    for x in [[0.1, 0.8], [0.5, 0.5], [0.9, 0.2], [1.0, 1.0]] {
        println!(
            "{:>5} {:>5}  {:>8.5} {:>8.5} {:>8.5}",
            x[0],
            x[1],
            hull.f(&x),
            hull.conc_env(&x)?,
            hull.h(&x)?
        );
    }
    let g = hull.conc_env_supergrad(&[0.1, 0.8])?;
    println!("\nsupergradient at (0.1, 0.8): {g:?}");
    Ok(())
}
