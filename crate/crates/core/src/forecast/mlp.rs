//! Fully connected ReLU regressor with an identity output.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::params::{layout, total_len, ParamSpec};
use crate::error::{Error, Result};

pub const DEFAULT_SIZES: [usize; 5] = [116, 256, 128, 64, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layout: Vec<ParamSpec>,
    pub params: Vec<f64>,
}

impl Mlp {
    /// All parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(Error::Shape(format!("mlp sizes {sizes:?}")));
        }
        let mut blocks = Vec::new();
        for l in 0..sizes.len() - 1 {
            blocks.push((format!("w{l}"), vec![sizes[l], sizes[l + 1]]));
            blocks.push((format!("b{l}"), vec![sizes[l + 1]]));
        }
        let named: Vec<(&str, Vec<usize>)> =
            blocks.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
        let layout = layout(&named);
        let params = vec![0.0; total_len(&layout)];
        Ok(Mlp {
            sizes: sizes.to_vec(),
            layout,
            params,
        })
    }

    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Mlp> {
        let mut m = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..m.layers() {
            let bound = (6.0 / sizes[l] as f64).sqrt();
            for w in &mut m.params[m.layout[2 * l].range()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(m)
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let s = &self.layout[2 * l];
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &self.params[s.range()]).unwrap()
    }

    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[self.layout[2 * l + 1].range()])
    }

    fn check(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "mlp expects {} inputs, got {}",
                self.input_width(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer.
    fn pre_activations(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(self.layers());
        for l in 0..self.layers() {
            let mut z = match zs.last() {
                None => x.dot(&self.weight(l)),
                Some(prev) => prev.mapv(relu).dot(&self.weight(l)),
            };
            z += &self.bias(l);
            zs.push(z);
        }
        zs
    }

    /// Unclamped predictions for each row of `x`.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check(&x)?;
        let zs = self.pre_activations(x);
        Ok(zs.last().unwrap().column(0).to_owned())
    }

    /// Mean squared error over the batch and its gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(&x)?;
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::Shape(format!("{} rows, {} targets", x.nrows(), y.len())));
        }
        let b = y.len() as f64;
        let zs = self.pre_activations(x);
        let out = zs.last().unwrap();
        let mut loss = 0.0;
        let mut delta = Array2::zeros((y.len(), 1));
        for i in 0..y.len() {
            let e = out[[i, 0]] - y[i];
            loss += e * e;
            delta[[i, 0]] = 2.0 * e / b;
        }
        loss /= b;

        let mut grad = vec![0.0; self.params.len()];
        for l in (0..self.layers()).rev() {
            let input = if l == 0 { x.to_owned() } else { zs[l - 1].mapv(relu) };
            let ws = &self.layout[2 * l];
            let bs = &self.layout[2 * l + 1];
            {
                let (head, tail) = grad.split_at_mut(bs.offset);
                let mut gw = ArrayViewMut2::from_shape(
                    (ws.shape[0], ws.shape[1]),
                    &mut head[ws.offset..],
                )
                .unwrap();
                general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut gw);
                for (g, d) in tail[..bs.len()].iter_mut().zip(delta.sum_axis(Axis(0))) {
                    *g = d;
                }
            }
            if l > 0 {
                let mut next = delta.dot(&self.weight(l).t());
                next.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = next;
            }
        }
        Ok((loss, grad))
    }
}

pub(crate) fn relu(v: f64) -> f64 {
    v.max(0.0)
}
