//! Learns the first layer on the f5 cube function and compares the resulting
//! f-greedy model against plain Matérn kernels over a log-spaced eps grid.
//!
//!     cargo run --release --example f5_active_subspace -- [n_train] [epochs] [seed] [patience]

use std::time::Instant;

use twolayer::cli::log_grid;
use twolayer::data::{synth_dataset, SynthFunction};
use twolayer::greedy::{decay_slope, fit_greedy, Criterion, GreedyConfig};
use twolayer::kernels::{KernelFamily, KernelSpec};
use twolayer::layer::spectral_report;
use twolayer::optim::{optimize_first_layer, OptimConfig};

fn main() -> twolayer::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_train: usize = args.first().map_or(2000, |s| s.parse().unwrap());
    let epochs: usize = args.get(1).map_or(15, |s| s.parse().unwrap());
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().unwrap());

    let train = synth_dataset(SynthFunction::F5, n_train, seed);
    let test = synth_dataset(SynthFunction::F5, 2000, seed + 1000);
    let d = train.dim();
    let kernel = KernelSpec::new(KernelFamily::Matern0, 1.0 / (d as f64).sqrt())?;

    let t = Instant::now();
    let patience: usize = args.get(3).map_or(epochs, |s| s.parse().unwrap());
    let config = OptimConfig { max_epochs: epochs, seed, patience, ..Default::default() };
    let (layer, trace) = optimize_first_layer(&kernel, &train.x, &train.y, &config)?;
    println!("optimized in {:.2}s, {} epochs ({:?})", t.elapsed().as_secs_f64(), trace.epochs.len(), trace.stop_reason);
    for e in &trace.epochs {
        println!("  epoch {:>2}: loss {:.4e}", e.epoch, e.loss);
    }

    let rep = spectral_report(&layer)?;
    let v = rep.right_vector(0);
    let cos = v.iter().sum::<f64>().abs() / (d as f64).sqrt();
    println!("singular values: {:?}", rep.singular_values);
    println!("cumulative power: {:?}", rep.cumulative_power.values());
    println!("dominant right singular vector: {v:.4?}");
    println!("angle to (1,..,1): {:.2} deg", cos.clamp(-1.0, 1.0).acos().to_degrees());

    let greedy = GreedyConfig { criterion: Criterion::FGreedy, max_centers: 100, ..Default::default() };
    let model = fit_greedy(&kernel, Some(&layer), &train.x, &train.y, &greedy)?;
    let decay = model.error_decay(&test.x, &test.y)?;
    let last = decay.last().unwrap();
    println!(
        "two-layer: {} centers, test MSE {:.3e}, max error {:.3e}, slope(50..100) {:.3}",
        last.n_centers,
        last.test_mse,
        last.test_max_error,
        decay_slope(&decay, 50, 100)?
    );

    for eps in log_grid(0.05, 10.0, 10)? {
        let k = kernel.with_length_scale(kernel.length_scale() * eps)?;
        let m = fit_greedy(&k, None, &train.x, &train.y, &greedy)?;
        let dec = m.error_decay(&test.x, &test.y)?;
        let l = dec.last().unwrap();
        println!(
            "eps {eps:>8.4}: {} centers, test MSE {:.3e}, max error {:.3e}, slope(50..100) {:.3}",
            l.n_centers,
            l.test_mse,
            l.test_max_error,
            decay_slope(&dec, 50, 100)?
        );
    }
    Ok(())
}
