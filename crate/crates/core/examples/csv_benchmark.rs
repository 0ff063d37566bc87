//! Dataset workflow: CSV in, train/test split, standardization, layer
//! optimization with lambda = 1e-4, greedy fit and test metrics.
//!
//!     cargo run --release --example csv_benchmark -- [data.csv]
//!
//! Without an argument a synthetic f6 file is written to the temp directory.

use twolayer::data::{load_csv, metrics, save_csv, standardize, synth_dataset, train_test_split, SynthFunction};
use twolayer::greedy::{fit_greedy, Criterion, GreedyConfig};
use twolayer::kernels::{KernelFamily, KernelSpec};
use twolayer::optim::{optimize_first_layer, OptimConfig};

fn main() -> twolayer::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let p = std::env::temp_dir().join("twolayer_f6.csv");
            save_csv(&synth_dataset(SynthFunction::F6, 2500, 3), &p)?;
            p
        }
    };
    let ds = load_csv(&path)?;
    println!("{}: {} rows, {} features, {} rejected", path.display(), ds.len(), ds.dim(), ds.rejected_rows);
    let ds = standardize(&train_test_split(&ds, 0.8, 0)?)?;
    let (x, y) = ds.train();
    let (tx, ty) = ds.test();
    let kernel = KernelSpec::new(KernelFamily::Matern1, 1.0 / (ds.dim() as f64).sqrt())?;

    let cfg = OptimConfig { lambda: 1e-4, max_epochs: 10, ..Default::default() };
    let (layer, trace) = optimize_first_layer(&kernel, &x, &y, &cfg)?;
    println!("optimized for {} epochs ({:?})", trace.epochs.len(), trace.stop_reason);

    let greedy = GreedyConfig { criterion: Criterion::FGreedy, max_centers: 150, lambda: 1e-4, ..Default::default() };
    for (name, l) in [("plain", None), ("two-layer", Some(&layer))] {
        let model = fit_greedy(&kernel, l, &x, &y, &greedy)?;
        let pred = model.predict(&tx)?;
        let m = metrics(ty.as_slice(), pred.as_slice())?;
        println!("{name:>9}: {} centers, standardized test mse {:.3e}, max error {:.3e}", model.n_centers(), m.mse, m.max_abs_error);
    }
    Ok(())
}
