//! Non-seasonal ARIMA(p, d, q) with intercept, fitted by conditional sum of
//! squares.
//!
//! The differencing order comes from a variance-reduction rule, `(p, q)` from
//! AIC over a grid. Each candidate starts from a Hannan-Rissanen estimate and
//! is refined by Nelder-Mead; non-stationary or non-invertible coefficient
//! vectors cost +inf.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residuals are conditioned on the first `START` differenced values for
/// every candidate, so the AIC of all grid points uses the same sample.
const START: usize = 3;
pub const MIN_SERIES_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaConfig {
    pub max_p: usize,
    pub max_q: usize,
    /// orders of differencing considered, smallest first
    pub d_range: (usize, usize),
    /// minimum relative variance drop for another difference to be taken
    pub variance_drop: f64,
    /// order of the long autoregression in the Hannan-Rissanen step
    pub long_ar: usize,
    pub max_iters: u64,
    pub criterion: Criterion,
}

/// Information criterion used to pick `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        ArimaConfig {
            max_p: 3,
            max_q: 3,
            d_range: (0, 2),
            variance_drop: 0.05,
            long_ar: 10,
            max_iters: 600,
            criterion: Criterion::Bic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// mean of the differenced series
    pub intercept: f64,
    pub sigma2: f64,
    pub aic: f64,
    pub bic: f64,
}

pub fn difference(x: &[f64], d: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..d {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    v
}

fn pooled_variance(segments: &[Vec<f64>]) -> f64 {
    let n: usize = segments.iter().map(|s| s.len()).sum();
    if n < 2 {
        return 0.0;
    }
    let mean = segments.iter().flatten().sum::<f64>() / n as f64;
    segments.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Smallest `d` after which one more difference no longer cuts the sample
/// variance by more than `drop`.
pub fn select_d(segments: &[&[f64]], d_range: (usize, usize), drop: f64) -> usize {
    let mut d = d_range.0;
    let mut cur: Vec<Vec<f64>> = segments.iter().map(|s| difference(s, d)).collect();
    let mut var = pooled_variance(&cur);
    while d < d_range.1 {
        let next: Vec<Vec<f64>> = cur.iter().map(|s| difference(s, 1)).collect();
        let v = pooled_variance(&next);
        if v < (1.0 - drop) * var {
            d += 1;
            cur = next;
            var = v;
        } else {
            break;
        }
    }
    d
}

/// Whether `1 - a_1 z - ... - a_k z^k` has all roots outside the unit
/// circle, by running the Levinson-Durbin recursion backwards and requiring
/// every partial autocorrelation inside (-1, 1).
pub fn is_stationary(a: &[f64]) -> bool {
    let mut cur = a.to_vec();
    while let Some(&k) = cur.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let m = cur.len() - 1;
        let denom = 1.0 - k * k;
        cur = (0..m).map(|j| (cur[j] + k * cur[m - 1 - j]) / denom).collect();
    }
    true
}

/// MA polynomial `1 + t_1 z + ... + t_k z^k` invertible.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// Conditional sum of squares of an ARMA(p, q) with mean `mu` over all
/// segments, and the number of residuals it sums.
fn css(segments: &[Vec<f64>], mu: f64, phi: &[f64], theta: &[f64]) -> (f64, usize) {
    let mut total = 0.0;
    let mut count = 0;
    let mut e = Vec::new();
    for w in segments {
        e.clear();
        e.resize(w.len(), 0.0);
        for t in START..w.len() {
            let mut pred = mu;
            for (i, f) in phi.iter().enumerate() {
                pred += f * (w[t - 1 - i] - mu);
            }
            for (j, th) in theta.iter().enumerate() {
                pred += th * e[t - 1 - j];
            }
            e[t] = w[t] - pred;
            total += e[t] * e[t];
        }
        count += w.len().saturating_sub(START);
    }
    (total, count)
}

/// Least squares `y ~ X` from accumulated normal equations.
fn ols(xtx: DMatrix<f64>, xty: DVector<f64>) -> Option<DVector<f64>> {
    xtx.svd(true, true).solve(&xty, 1e-12).ok()
}

/// Hannan-Rissanen start: long AR residuals, then a regression of the
/// series on its own lags and lagged residuals.
fn hannan_rissanen(segments: &[Vec<f64>], p: usize, q: usize, long_ar: usize) -> Vec<f64> {
    let n: usize = segments.iter().map(|s| s.len()).sum();
    let mean = segments.iter().flatten().sum::<f64>() / n.max(1) as f64;
    let mut start = vec![mean];
    start.extend(std::iter::repeat_n(0.0, p + q));
    if p + q == 0 {
        return start;
    }
    let m = long_ar.max(p + q);
    let mut xtx = DMatrix::zeros(m, m);
    let mut xty = DVector::zeros(m);
    for w in segments {
        for t in m..w.len() {
            let x = DVector::from_iterator(m, (1..=m).map(|i| w[t - i] - mean));
            xtx += &x * x.transpose();
            xty += &x * (w[t] - mean);
        }
    }
    let Some(a) = ols(xtx, xty) else { return start };
    let resid: Vec<Vec<f64>> = segments
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|t| {
                    if t < m {
                        0.0
                    } else {
                        w[t] - mean - (1..=m).map(|i| a[i - 1] * (w[t - i] - mean)).sum::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    let k = 1 + p + q;
    let mut xtx = DMatrix::zeros(k, k);
    let mut xty = DVector::zeros(k);
    for (w, r) in segments.iter().zip(&resid) {
        for t in (m + q.max(p))..w.len() {
            let mut x = DVector::zeros(k);
            x[0] = 1.0;
            for i in 0..p {
                x[1 + i] = w[t - 1 - i];
            }
            for j in 0..q {
                x[1 + p + j] = r[t - 1 - j];
            }
            xtx += &x * x.transpose();
            xty += &x * w[t];
        }
    }
    let Some(b) = ols(xtx, xty) else { return start };
    let phi: Vec<f64> = (0..p).map(|i| b[1 + i]).collect();
    let theta: Vec<f64> = (0..q).map(|j| b[1 + p + j]).collect();
    if !is_stationary(&phi) || !is_invertible(&theta) {
        return start;
    }
    let mu = b[0] / (1.0 - phi.iter().sum::<f64>());
    let mut v = vec![if mu.is_finite() { mu } else { mean }];
    v.extend(phi);
    v.extend(theta);
    v
}

struct CssCost<'a> {
    segments: &'a [Vec<f64>],
    p: usize,
}

impl CostFunction for CssCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (phi, theta) = x[1..].split_at(self.p);
        if !is_stationary(phi) || !is_invertible(theta) {
            return Ok(f64::INFINITY);
        }
        Ok(css(self.segments, x[0], phi, theta).0)
    }
}

/// Fits one fixed order on already differenced segments.
fn fit_arma(segments: &[Vec<f64>], p: usize, d: usize, q: usize, cfg: &ArimaConfig) -> ArimaModel {
    let x0 = hannan_rissanen(segments, p, q, cfg.long_ar);
    let cost = CssCost { segments, p };
    let spread = pooled_variance(segments).sqrt().max(1e-6);
    let mut best = x0.clone();
    let mut best_cost = cost.cost(&x0).unwrap_or(f64::INFINITY);
    let mut simplex = vec![x0.clone()];
    for k in 0..x0.len() {
        let mut v = x0.clone();
        v[k] += if k == 0 { 0.1 * spread } else { 0.1 };
        simplex.push(v);
    }
    if let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-12) {
        if let Ok(res) = Executor::new(CssCost { segments, p }, solver)
            .configure(|s| s.max_iters(cfg.max_iters))
            .run()
        {
            let st = res.state();
            if st.get_best_cost() < best_cost {
                best_cost = st.get_best_cost();
                if let Some(b) = st.get_best_param() {
                    best = b.clone();
                }
            }
        }
    }
    let (_, n) = css(segments, best[0], &best[1..1 + p], &best[1 + p..]);
    let sigma2 = best_cost / n.max(1) as f64;
    let k = (p + q + 1) as f64;
    let fit = n as f64 * sigma2.max(1e-300).ln();
    let (aic, bic) = if best_cost.is_finite() {
        (fit + 2.0 * k, fit + k * (n.max(1) as f64).ln())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    ArimaModel {
        p,
        d,
        q,
        phi: best[1..1 + p].to_vec(),
        theta: best[1 + p..].to_vec(),
        intercept: best[0],
        sigma2,
        aic,
        bic,
    }
}

fn prepare(segments: &[&[f64]], d: usize) -> Result<Vec<Vec<f64>>> {
    let total: usize = segments.iter().map(|s| s.len()).sum();
    if total < MIN_SERIES_LEN {
        return Err(Error::InsufficientData(format!(
            "arima needs at least {MIN_SERIES_LEN} values, got {total}"
        )));
    }
    if let Some(bad) = segments.iter().flat_map(|s| s.iter()).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("arima input value {bad}")));
    }
    Ok(segments
        .iter()
        .map(|s| difference(s, d))
        .filter(|w| w.len() > START)
        .collect())
}

fn constant_model(value: f64) -> ArimaModel {
    ArimaModel {
        p: 0,
        d: 0,
        q: 0,
        phi: vec![],
        theta: vec![],
        intercept: value,
        sigma2: 0.0,
        aic: f64::NEG_INFINITY,
        bic: f64::NEG_INFINITY,
    }
}

impl ArimaModel {
    pub fn score(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
        }
    }
}

/// Selects `d`, then `(p, q)` by the configured criterion, on one or more
/// independent series.
pub fn arima_fit(segments: &[&[f64]], cfg: &ArimaConfig) -> Result<ArimaModel> {
    prepare(segments, 0)?;
    let all: Vec<f64> = segments.iter().flat_map(|s| s.iter().copied()).collect();
    if all.iter().all(|&v| v == all[0]) {
        return Ok(constant_model(all[0]));
    }
    let d = select_d(segments, cfg.d_range, cfg.variance_drop);
    let diffed = prepare(segments, d)?;
    let mut best: Option<ArimaModel> = None;
    for p in 0..=cfg.max_p.min(START) {
        for q in 0..=cfg.max_q.min(START) {
            let m = fit_arma(&diffed, p, d, q, cfg);
            log::debug!("arima({p},{d},{q}) aic {:.3} bic {:.3}", m.aic, m.bic);
            let c = cfg.criterion;
            if best.as_ref().is_none_or(|b| m.score(c) < b.score(c)) {
                best = Some(m);
            }
        }
    }
    let best = best.expect("grid is non-empty");
    if !best.score(cfg.criterion).is_finite() {
        return Err(Error::NonFinite("no admissible arima order".into()));
    }
    Ok(best)
}

/// Fits one given order.
pub fn arima_fit_order(segments: &[&[f64]], p: usize, d: usize, q: usize) -> Result<ArimaModel> {
    if p > START || q > START || d > 2 {
        return Err(Error::invalid("arima order", format!("({p},{d},{q}) outside p,q <= 3, d <= 2")));
    }
    let diffed = prepare(segments, d)?;
    Ok(fit_arma(&diffed, p, d, q, &ArimaConfig::default()))
}

/// Running state over one series: differencing levels, recent differenced
/// values and residuals.
#[derive(Debug, Clone)]
pub struct ArimaFilter<'m> {
    model: &'m ArimaModel,
    levels: Vec<f64>,
    seen: usize,
    w: Vec<f64>,
    e: Vec<f64>,
}

impl<'m> ArimaFilter<'m> {
    pub fn new(model: &'m ArimaModel) -> Self {
        ArimaFilter {
            model,
            levels: Vec::with_capacity(model.d),
            seen: 0,
            w: Vec::new(),
            e: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64) {
        let d = self.model.d;
        self.seen += 1;
        // levels[k] holds the latest k-th difference
        let mut cur = x;
        let mut new_levels = Vec::with_capacity(d);
        for k in 0..d.min(self.levels.len() + 1) {
            new_levels.push(cur);
            if k < self.levels.len() {
                cur -= self.levels[k];
            }
        }
        let ready = self.levels.len() == d;
        self.levels = new_levels;
        if !ready && d > 0 {
            return;
        }
        let w = if d == 0 { x } else { cur };
        let t = self.w.len();
        let e = if t >= START { w - self.predict_next() } else { 0.0 };
        self.w.push(w);
        self.e.push(e);
    }

    fn lag(v: &[f64], i: usize, default: f64) -> f64 {
        v.len().checked_sub(i).map(|k| v[k]).unwrap_or(default)
    }

    fn predict_next(&self) -> f64 {
        let m = self.model;
        let mut pred = m.intercept;
        for (i, f) in m.phi.iter().enumerate() {
            pred += f * (Self::lag(&self.w, i + 1, m.intercept) - m.intercept);
        }
        for (j, th) in m.theta.iter().enumerate() {
            pred += th * Self::lag(&self.e, j + 1, 0.0);
        }
        pred
    }

    /// Whether enough values were pushed to forecast.
    pub fn ready(&self) -> bool {
        self.seen > self.model.d
    }

    /// Iterated forecast `h` steps past the last pushed value.
    pub fn forecast(&self, h: usize) -> Result<f64> {
        if h == 0 {
            return Err(Error::invalid("forecast horizon", "must be at least 1"));
        }
        if !self.ready() {
            return Err(Error::InsufficientData(format!(
                "arima with d = {} needs more than {} values",
                self.model.d, self.model.d
            )));
        }
        let mut sim = self.clone();
        let mut levels = self.levels.clone();
        let mut x = 0.0;
        for _ in 0..h {
            let w = sim.predict_next();
            sim.w.push(w);
            sim.e.push(0.0);
            if self.model.d == 0 {
                x = w;
            } else {
                let mut cur = w;
                for k in (0..self.model.d).rev() {
                    levels[k] += cur;
                    cur = levels[k];
                }
                x = levels[0];
            }
        }
        Ok(x)
    }
}

impl ArimaModel {
    /// `h`-step forecast after observing `history`.
    pub fn forecast(&self, history: &[f64], h: usize) -> Result<f64> {
        let mut f = ArimaFilter::new(self);
        for &x in history {
            f.push(x);
        }
        f.forecast(h)
    }

    /// Walk-forward over a series: entry `t` forecasts `series[t + h]` from
    /// `series[..=t]`, or `None` while warming up.
    pub fn walk_forward(&self, series: &[f64], h: usize) -> Result<Vec<Option<f64>>> {
        let mut f = ArimaFilter::new(self);
        let mut out = Vec::with_capacity(series.len());
        for &x in series {
            f.push(x);
            out.push(if f.ready() { Some(f.forecast(h)?) } else { None });
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.p + self.q + 1
    }
}
