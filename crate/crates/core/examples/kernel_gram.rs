//! Radial profiles of the four base kernels and the two-layered Gram matrix.
//!
//!     cargo run --example kernel_gram

use nalgebra::DMatrix;
use twolayer::kernels::{gram_symmetric, KernelFamily, KernelSpec};
use twolayer::layer::{two_layer_gram, FirstLayer};

fn main() -> twolayer::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "r", "matern0", "matern1", "matern2", "gaussian");
    for r in [0.0, 0.25, 0.5, 1.0, 2.0] {
        print!("{r:>6.2}");
        for family in KernelFamily::ALL {
            print!(" {:>10.6}", KernelSpec::unit(family).eval_phi(r)?);
        }
        println!();
    }

    let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
    let kernel = KernelSpec::unit(KernelFamily::Matern1);

    // A scaled identity first layer is a plain length scale.
    let layer = FirstLayer::scaled_identity(2, 2, 3.0)?;
    let g_layer = two_layer_gram(&kernel, &layer, &x, &x)?;
    let g_eps = gram_symmetric(&kernel.with_length_scale(3.0)?, &x)?;
    println!("scaled identity vs length scale 3: max diff {:.1e}", (&g_layer - &g_eps).amax());

    // A rank-one layer only sees x1 + x2, so the last three points coincide.
    let ridge = FirstLayer::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), twolayer::layer::Provenance::Loaded)?;
    println!("rank-one layer Gram:{:.4}", two_layer_gram(&kernel, &ridge, &x, &x)?);
    Ok(())
}
