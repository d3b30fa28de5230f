//! Builds a random network, writes it as .nn.json, reads it back and compares
//! a forward pass with the interval bounds.

use stfe_hull::activation::Activation;
use stfe_hull::network::{make_random_net, NetworkModel};

fn main() -> stfe_hull::Result<()> {
    let net = make_random_net(4, &[5, 5], Some(2), Activation::sigmoid(), 42)?;
    let path = std::env::temp_dir().join("example.nn.json");
    net.save_json(&path)?;
    let back = NetworkModel::load_json(&path)?;
    assert_eq!(back, net);
    println!("wrote and re-read {}", path.display());

    let x = vec![0.25, 0.5, 0.75, 1.0];
    let state = back.forward(&x)?;
    let bounds = back.interval_propagate();
    for (i, (pre, iv)) in state.pre.iter().zip(&bounds.pre).enumerate() {
        println!("layer {}:", i + 1);
        for (a, b) in pre.iter().zip(iv) {
            println!("  a = {a:>9.5}  in {b}");
        }
    }
    println!("output: {:?}", state.output());
    Ok(())
}
