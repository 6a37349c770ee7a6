//! Compares analytic gradients of both networks with central differences.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bwpred::forecast::gradcheck::{central_difference, max_relative_error};
use bwpred::forecast::{Lstm, Mlp};

fn main() -> bwpred::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mlp = Mlp::init(&[6, 8, 4, 1], 3)?;
    let x = Array2::from_shape_fn((16, 6), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..16).map(|_| rng.random()).collect();
    let (_, g) = mlp.loss_and_grad(x.view(), &y)?;
    let fd = central_difference(
        |p| {
            let mut m = mlp.clone();
            m.params.copy_from_slice(p);
            m.loss_and_grad(x.view(), &y).unwrap().0
        },
        &mlp.params,
        1e-6,
    );
    println!("mlp  {} params, max relative error {:.2e}", g.len(), max_relative_error(&g, &fd, 1e-6));

    let lstm = Lstm::init(4, 5, 6, 3, 3)?;
    let x = Array3::from_shape_fn((8, 3, 4), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..8).map(|_| rng.random()).collect();
    let (_, g) = lstm.loss_and_grad(x.view(), &y)?;
    let fd = central_difference(
        |p| {
            let mut m = lstm.clone();
            m.params.copy_from_slice(p);
            m.loss_and_grad(x.view(), &y).unwrap().0
        },
        &lstm.params,
        1e-6,
    );
    println!("lstm {} params, max relative error {:.2e}", g.len(), max_relative_error(&g, &fd, 1e-6));
    Ok(())
}
