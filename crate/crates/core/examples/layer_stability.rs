//! Optimizes the first layer on f7 from several seeds, prints the spectrum
//! of each result and the principal angles between their leading subspaces.
//!
//!     cargo run --release --example layer_stability

use twolayer::data::{synth_dataset, SynthFunction};
use twolayer::kernels::{KernelFamily, KernelSpec};
use twolayer::layer::{principal_angles, spectral_report};
use twolayer::optim::{optimize_first_layer, OptimConfig};

fn main() -> twolayer::Result<()> {
    let train = synth_dataset(SynthFunction::F7, 2000, 0);
    let kernel = KernelSpec::new(KernelFamily::Matern1, 1.0 / 7f64.sqrt())?;
    let mut layers = Vec::new();
    for seed in 0..3 {
        let cfg = OptimConfig { max_epochs: 10, seed, ..Default::default() };
        let (layer, trace) = optimize_first_layer(&kernel, &train.x, &train.y, &cfg)?;
        let rep = spectral_report(&layer)?;
        println!(
            "seed {seed}: {} epochs, singular values {:.3?}",
            trace.epochs.len(),
            rep.singular_values
        );
        println!("        cumulative power {:.3?}", rep.cumulative_power.values().unwrap_or(&[]));
        layers.push(layer);
    }
    // f7 varies in a two-dimensional subspace; with the top two singular values
    // nearly tied only the n = 2 span is well defined.
    for n in 1..=3 {
        let a01 = principal_angles(&layers[0], &layers[1], n)?;
        let a02 = principal_angles(&layers[0], &layers[2], n)?;
        let deg = |v: &[f64]| v.last().copied().unwrap_or(0.0);
        println!("n = {n}: largest angle 0-1 {:.2} deg, 0-2 {:.2} deg", deg(&a01), deg(&a02));
    }
    Ok(())
}
