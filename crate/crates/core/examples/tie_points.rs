//! Tie points and one-dimensional envelopes of catalogued activations.

use stfe_hull::activation::{tie_point, Activation, ConcaveEnvelope1d, ConvexEnvelope1d, Interval};

fn main() -> stfe_hull::Result<()> {
    let cases = [
        (Activation::selu(), Interval::new(-1.13, 0.5)?),
        (Activation::relu(), Interval::new(-1.0, 1e-6)?),
        (Activation::relu(), Interval::new(-1.0, 0.0)?),
        (Activation::sigmoid(), Interval::new(-10.0, 5.0)?),
        (Activation::tanh(), Interval::new(0.0, 2.0)?),
        (Activation::silu(), Interval::new(-3.0, 1.0)?),
    ];
    for (act, iv) in cases {
        match tie_point(&act, iv) {
            Ok(t) => println!("{act:<40} on {iv}: tie point {t}"),
            Err(e) => println!("{act:<40} on {iv}: {e}"),
        }
    }

    let act = Activation::sigmoid();
    let iv = Interval::new(-4.0, 4.0)?;
    let upper = ConcaveEnvelope1d::new(&act, iv)?;
    let lower = ConvexEnvelope1d::new(&act, iv)?;
    println!("\n{act} on {iv}");
    println!("{:>6}  {:>9}  {:>9}  {:>9}", "z", "conv", "σ", "conc");
    for k in 0..=8 {
        let z = -4.0 + k as f64;
        println!(
            "{z:>6.2}  {:>9.6}  {:>9.6}  {:>9.6}",
            lower.value(z)?,
            act.eval(z),
            upper.value(z)?
        );
    }
    println!("\nimage of {iv} under silu: {}", Activation::silu().range_on(&Interval::new(-3.0, 1.0)?));
    Ok(())
}
