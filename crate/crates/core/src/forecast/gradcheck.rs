//! Central finite-difference checks of analytic gradients.

/// Numerical gradient of `f` at `params` with step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, params: &[f64], h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + h;
            let up = f(&p);
            p[i] = x - h;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a| + |b|, floor)`, maximized over components. The floor
/// keeps components that are zero in both from dividing by zero.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{Lstm, Mlp};
    use ndarray::{Array2, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic() {
        let g = central_difference(|p| p[0] * p[0] + 3.0 * p[1], &[2.0, 1.0], 1e-6);
        assert!(max_relative_error(&[4.0, 3.0], &g, 1e-8) < 1e-8);
    }

    #[test]
    fn mlp_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Mlp::init(&[5, 7, 4, 1], 2).unwrap();
        let x = Array2::from_shape_fn((10, 5), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, g) = m.loss_and_grad(x.view(), &y).unwrap();
        let fd = central_difference(
            |p| {
                let mut c = m.clone();
                c.params.copy_from_slice(p);
                c.loss_and_grad(x.view(), &y).unwrap().0
            },
            &m.params,
            1e-6,
        );
        assert!(max_relative_error(&g, &fd, 1e-6) < 1e-4);
    }

    #[test]
    fn lstm_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Lstm::init(3, 4, 5, 3, 8).unwrap();
        let x = Array3::from_shape_fn((6, 3, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, g) = m.loss_and_grad(x.view(), &y).unwrap();
        let fd = central_difference(
            |p| {
                let mut c = m.clone();
                c.params.copy_from_slice(p);
                c.loss_and_grad(x.view(), &y).unwrap().0
            },
            &m.params,
            1e-6,
        );
        assert!(max_relative_error(&g, &fd, 1e-6) < 1e-4, "{}", max_relative_error(&g, &fd, 1e-6));
    }
}
