//! Single-layer LSTM over a window of rows, then a ReLU dense layer and a
//! scalar identity output. Gate order in the packed matrices is
//! `[input | forget | candidate | output]`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, ArrayViewMut2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::relu;
use super::params::{layout, total_len, ParamSpec};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    pub dense: usize,
    pub window: usize,
    pub layout: Vec<ParamSpec>,
    pub params: Vec<f64>,
}

// indices into `layout`
const WX: usize = 0;
const WH: usize = 1;
const B: usize = 2;
const WD: usize = 3;
const BD: usize = 4;
const WO: usize = 5;
const BO: usize = 6;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Per-step activations kept for the backward pass.
struct Cache {
    /// (batch, steps, 4H) activated gates
    gates: Array3<f64>,
    /// (batch, steps + 1, H); index 0 is the zero initial state
    c: Array3<f64>,
    h: Array3<f64>,
    dense_pre: Array2<f64>,
    out: Array1<f64>,
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize, dense: usize, window: usize) -> Result<Lstm> {
        if input == 0 || hidden == 0 || dense == 0 || window == 0 {
            return Err(Error::Shape(format!(
                "lstm input {input}, hidden {hidden}, dense {dense}, window {window}"
            )));
        }
        let layout = layout(&[
            ("w_x", vec![input, 4 * hidden]),
            ("w_h", vec![hidden, 4 * hidden]),
            ("b", vec![4 * hidden]),
            ("w_d", vec![hidden, dense]),
            ("b_d", vec![dense]),
            ("w_o", vec![dense, 1]),
            ("b_o", vec![1]),
        ]);
        Ok(Lstm {
            input,
            hidden,
            dense,
            window,
            params: vec![0.0; total_len(&layout)],
            layout,
        })
    }

    /// Gate weights uniform in `±1/sqrt(hidden)`, dense layers He-uniform,
    /// biases zero except the forget gate at 1.
    pub fn init(input: usize, hidden: usize, dense: usize, window: usize, seed: u64) -> Result<Lstm> {
        let mut m = Self::zeros(input, hidden, dense, window)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = 1.0 / (hidden as f64).sqrt();
        let bounds = [(WX, g), (WH, g), (WD, (6.0 / hidden as f64).sqrt()), (WO, (6.0 / dense as f64).sqrt())];
        for (k, bound) in bounds {
            for w in &mut m.params[m.layout[k].range()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        let b = m.layout[B].offset;
        m.params[b + hidden..b + 2 * hidden].fill(1.0);
        Ok(m)
    }

    fn mat(&self, k: usize) -> ArrayView2<'_, f64> {
        let s = &self.layout[k];
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &self.params[s.range()]).unwrap()
    }

    fn vec(&self, k: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[self.layout[k].range()])
    }

    fn check(&self, x: &ArrayView3<'_, f64>) -> Result<()> {
        let (_, t, i) = x.dim();
        if i != self.input {
            return Err(Error::Shape(format!("lstm expects {} inputs, got {i}", self.input)));
        }
        if t < self.window {
            return Err(Error::Shape(format!("window of {t} rows, need {}", self.window)));
        }
        Ok(())
    }

    fn run(&self, x: ArrayView3<'_, f64>) -> Cache {
        let (n, t, _) = x.dim();
        let h4 = 4 * self.hidden;
        let hd = self.hidden;
        // input projections for all steps in one product
        let flat = x.as_standard_layout();
        let flat = flat.view().into_shape_with_order((n * t, self.input)).unwrap();
        let mut gates = flat.dot(&self.mat(WX)).into_shape_with_order((n, t, h4)).unwrap();
        let mut c = Array3::zeros((n, t + 1, hd));
        let mut h = Array3::zeros((n, t + 1, hd));
        let wh = self.mat(WH);
        let b = self.vec(B);
        for step in 0..t {
            let mut z = gates.slice_mut(s![.., step, ..]);
            let hp = h.slice(s![.., step, ..]);
            general_mat_mul(1.0, &hp, &wh, 1.0, &mut z);
            z += &b;
            z.slice_mut(s![.., 0..2 * hd]).mapv_inplace(sigmoid);
            z.slice_mut(s![.., 2 * hd..3 * hd]).mapv_inplace(f64::tanh);
            z.slice_mut(s![.., 3 * hd..]).mapv_inplace(sigmoid);
            let z = gates.slice(s![.., step, ..]);
            let (i, f) = (z.slice(s![.., 0..hd]), z.slice(s![.., hd..2 * hd]));
            let (g, o) = (z.slice(s![.., 2 * hd..3 * hd]), z.slice(s![.., 3 * hd..]));
            let cp = c.slice(s![.., step, ..]).to_owned();
            let mut cn = c.slice_mut(s![.., step + 1, ..]);
            Zip::from(&mut cn)
                .and(&cp)
                .and(&i)
                .and(&f)
                .and(&g)
                .for_each(|c: &mut f64, &cp, &i, &f, &g| *c = f * cp + i * g);
            let cn = c.slice(s![.., step + 1, ..]);
            let mut hn = h.slice_mut(s![.., step + 1, ..]);
            Zip::from(&mut hn).and(&cn).and(&o).for_each(|h: &mut f64, &c: &f64, &o: &f64| *h = o * c.tanh());
        }
        let last = h.slice(s![.., t, ..]);
        let mut dense_pre = last.dot(&self.mat(WD));
        dense_pre += &self.vec(BD);
        let mut out = dense_pre.mapv(relu).dot(&self.mat(WO)).column(0).to_owned();
        out += self.params[self.layout[BO].offset];
        Cache {
            gates,
            c,
            h,
            dense_pre,
            out,
        }
    }

    /// Predictions for a batch of windows shaped `(batch, steps, input)`.
    pub fn forward(&self, x: ArrayView3<'_, f64>) -> Result<Array1<f64>> {
        self.check(&x)?;
        Ok(self.run(x).out)
    }

    /// Final hidden and cell state of each window, for inspection.
    pub fn final_state(&self, x: ArrayView3<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check(&x)?;
        let t = x.dim().1;
        let cache = self.run(x);
        Ok((
            cache.h.slice(s![.., t, ..]).to_owned(),
            cache.c.slice(s![.., t, ..]).to_owned(),
        ))
    }

    /// MSE over the batch and its gradient by backpropagation through the
    /// whole window.
    pub fn loss_and_grad(&self, x: ArrayView3<'_, f64>, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(&x)?;
        let (n, t, _) = x.dim();
        if n != y.len() || n == 0 {
            return Err(Error::Shape(format!("{n} windows, {} targets", y.len())));
        }
        let hd = self.hidden;
        let cache = self.run(x);
        let mut loss = 0.0;
        let mut dout = Array2::zeros((n, 1));
        for k in 0..n {
            let e = cache.out[k] - y[k];
            loss += e * e;
            dout[[k, 0]] = 2.0 * e / n as f64;
        }
        loss /= n as f64;

        let mut grad = vec![0.0; self.params.len()];
        let dense_act = cache.dense_pre.mapv(relu);
        self.write_mat(&mut grad, WO, &dense_act.t(), &dout.view());
        grad[self.layout[BO].offset] = dout.sum();
        let mut dd = dout.dot(&self.mat(WO).t());
        dd.zip_mut_with(&cache.dense_pre, |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        let last = cache.h.slice(s![.., t, ..]);
        self.write_mat(&mut grad, WD, &last.t(), &dd.view());
        self.write_vec(&mut grad, BD, &dd.sum_axis(Axis(0)).view());

        let mut dh = dd.dot(&self.mat(WD).t());
        let mut dc = Array2::<f64>::zeros((n, hd));
        let mut dz_all = Array3::<f64>::zeros((n, t, 4 * hd));
        let wh = self.mat(WH);
        for step in (0..t).rev() {
            let z = cache.gates.slice(s![.., step, ..]);
            let c = cache.c.slice(s![.., step + 1, ..]);
            let cp = cache.c.slice(s![.., step, ..]);
            let mut dz = dz_all.slice_mut(s![.., step, ..]);
            for k in 0..n {
                for j in 0..hd {
                    let (i, f, g, o) = (z[[k, j]], z[[k, hd + j]], z[[k, 2 * hd + j]], z[[k, 3 * hd + j]]);
                    let tc = c[[k, j]].tanh();
                    let dhv = dh[[k, j]];
                    let dcv = dc[[k, j]] + dhv * o * (1.0 - tc * tc);
                    dz[[k, j]] = dcv * g * i * (1.0 - i);
                    dz[[k, hd + j]] = dcv * cp[[k, j]] * f * (1.0 - f);
                    dz[[k, 2 * hd + j]] = dcv * i * (1.0 - g * g);
                    dz[[k, 3 * hd + j]] = dhv * tc * o * (1.0 - o);
                    dc[[k, j]] = dcv * f;
                }
            }
            let hp = cache.h.slice(s![.., step, ..]);
            self.add_mat(&mut grad, WH, &hp.t(), &dz.view());
            dh = dz.dot(&wh.t());
        }
        let flat_dz = dz_all.into_shape_with_order((n * t, 4 * hd)).unwrap();
        let xs = x.as_standard_layout();
        let flat_x = xs.view().into_shape_with_order((n * t, self.input)).unwrap();
        self.write_mat(&mut grad, WX, &flat_x.t(), &flat_dz.view());
        self.write_vec(&mut grad, B, &flat_dz.sum_axis(Axis(0)).view());
        Ok((loss, grad))
    }

    fn grad_view<'a>(&self, grad: &'a mut [f64], k: usize) -> ArrayViewMut2<'a, f64> {
        let s = &self.layout[k];
        ArrayViewMut2::from_shape((s.shape[0], s.shape[1]), &mut grad[s.range()]).unwrap()
    }

    fn write_mat(&self, grad: &mut [f64], k: usize, a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) {
        general_mat_mul(1.0, a, b, 0.0, &mut self.grad_view(grad, k));
    }

    fn add_mat(&self, grad: &mut [f64], k: usize, a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) {
        general_mat_mul(1.0, a, b, 1.0, &mut self.grad_view(grad, k));
    }

    fn write_vec(&self, grad: &mut [f64], k: usize, v: &ArrayView1<'_, f64>) {
        for (g, &x) in grad[self.layout[k].range()].iter_mut().zip(v) {
            *g = x;
        }
    }
}
