//! k-fold cross-validation residuals of one batch and the gradient of their
//! squared sum with respect to the first layer.
//!
//!     cargo run --example cv_loss

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twolayer::cv::{cv_loss_grad, era_residuals, make_folds};
use twolayer::data::sample_unit_cube;
use twolayer::kernels::{KernelFamily, KernelSpec};
use twolayer::layer::{FirstLayer, Provenance};

fn main() -> twolayer::Result<()> {
    let n = 64;
    let x = sample_unit_cube(3, n, 7);
    // depends on x1 + x2 only
    let f = DVector::from_fn(n, |i, _| (2.0 * (x[(i, 0)] + x[(i, 1)])).sin());
    let kernel = KernelSpec::new(KernelFamily::Matern1, 2.0)?;
    let identity = FirstLayer::identity(3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for k in [2, 8, 64] {
        let plan = make_folds(n, k, &mut rng)?;
        let v = era_residuals(&kernel, &identity, &x, &f, &plan, 1e-8)?;
        println!("k = {k:>2}: loss {:.4e}", v.loss);
    }

    let plan = make_folds(n, 8, &mut rng)?;
    let (value, grad) = cv_loss_grad(&kernel, &identity, &x, &f, &plan, 1e-8)?;
    println!("8-fold loss {:.4e}, gradient:{:.4}", value.loss, grad);

    // one plain gradient step along the descent direction
    let step = identity.matrix() - &grad * (0.05 / grad.amax());
    let moved = FirstLayer::new(step, Provenance::Optimized)?;
    let after = era_residuals(&kernel, &moved, &x, &f, &plan, 1e-8)?;
    println!("after one step: loss {:.4e}", after.loss);
    Ok(())
}
