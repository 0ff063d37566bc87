//! P-, f- and f/P-greedy on f6 with a Matérn kernel: center count against
//! test error, and the power function at the end.
//!
//!     cargo run --release --example greedy_criteria

use twolayer::data::{synth_dataset, SynthFunction};
use twolayer::greedy::{fill_distance, fit_greedy, Criterion, GreedyConfig};
use twolayer::kernels::{KernelFamily, KernelSpec};

fn main() -> twolayer::Result<()> {
    let train = synth_dataset(SynthFunction::F6, 3000, 0);
    let test = synth_dataset(SynthFunction::F6, 1000, 1);
    let kernel = KernelSpec::new(KernelFamily::Matern2, 1.0 / 6f64.sqrt())?;

    for criterion in [Criterion::PGreedy, Criterion::FGreedy, Criterion::FOverPGreedy] {
        let cfg = GreedyConfig { criterion, max_centers: 200, ..Default::default() };
        let model = fit_greedy(&kernel, None, &train.x, &train.y, &cfg)?;
        let decay = model.error_decay(&test.x, &test.y)?;
        print!("{criterion:>16}:");
        for row in decay.iter().filter(|r| [25, 50, 100, 200].contains(&r.n_centers)) {
            print!("  n={:<3} mse {:.2e}", row.n_centers, row.test_mse);
        }
        let power = model.power_values(&test.x)?;
        println!(
            "  | max power {:.2e}, fill distance {:.3}",
            power.amax(),
            fill_distance(&test.x, &model.centers)?
        );
    }
    Ok(())
}
