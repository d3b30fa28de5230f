//! Tightens every hidden-neuron bound of a random 5×5 network with both
//! separation modes and prints the mean improvement per layer.

use stfe_hull::activation::Activation;
use stfe_hull::envelope::Mode;
use stfe_hull::network::make_random_net;
use stfe_hull::tightener::{tighten_all, TightenOptions};

fn main() -> stfe_hull::Result<()> {
    let act = match std::env::args().nth(1) {
        Some(tag) => Activation::from_tag(&tag, &Default::default())?,
        None => Activation::selu(),
    };
    let seed = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let net = make_random_net(5, &[5; 5], None, act, seed)?;
    let env = tighten_all(&net, &TightenOptions::new(Mode::Env))?.report;
    let hest = tighten_all(&net, &TightenOptions::new(Mode::Hest))?.report;
    println!("activation {act}, seed {seed}");
    println!("layer  env        h-est      env cuts  h-est cuts");
    for layer in 1..=5 {
        let cuts = |r: &stfe_hull::tightener::BoundsReport| {
            r.rows.iter().filter(|x| x.layer == layer).map(|x| x.cuts).sum::<usize>()
        };
        println!(
            "{layer:>5}  {:<9.5}  {:<9.5}  {:>8}  {:>10}",
            env.mean_improvement(layer).unwrap_or(0.0),
            hest.mean_improvement(layer).unwrap_or(0.0),
            cuts(&env),
            cuts(&hest)
        );
    }
    Ok(())
}
