//! ARIMA(p, d, q) with d ∈ {0, 1}.
//!
//! Coefficients come from Hannan–Rissanen regression: a long autoregression
//! supplies innovation estimates, then the series is regressed on its own lags
//! and the lagged innovations, twice. The conditional sum of squares of the
//! resulting one-step residuals gives `residual_std` and the AIC used to pick
//! the order.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::math;

/// One week of hourly samples.
pub const MIN_SAMPLES: usize = 7 * 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q }
    }

    fn complexity(&self) -> usize {
        self.p + self.d + self.q
    }

    /// p, q ∈ {0, 1, 2} and d ∈ {0, 1}.
    pub fn default_grid() -> Vec<ArimaOrder> {
        let mut grid = Vec::new();
        for d in 0..=1 {
            for p in 0..=2 {
                for q in 0..=2 {
                    grid.push(ArimaOrder::new(p, d, q));
                }
            }
        }
        grid
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    /// Mean of the differenced series.
    pub intercept: f64,
    pub residual_std: f64,
    pub aic: f64,
    pub n_obs: usize,
}

/// What the model needs to know about the past to forecast.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ArimaState {
    /// Most recent first, de-meaned differenced values.
    lags: Vec<f64>,
    /// Most recent first.
    innovations: Vec<f64>,
    /// Last observed level (used when d = 1).
    level: f64,
}

impl ArimaModel {
    /// Mean-only model.
    pub fn white_noise(mean: f64, std: f64) -> Self {
        ArimaModel {
            order: ArimaOrder::new(0, 0, 0),
            ar_coeffs: Vec::new(),
            ma_coeffs: Vec::new(),
            intercept: mean,
            residual_std: std,
            aic: 0.0,
            n_obs: 0,
        }
    }

    /// One-step innovations, aligned with the differenced series.
    pub fn innovations(&self, series: &[f64]) -> Vec<f64> {
        let w = difference(series, self.order.d);
        let y: Vec<f64> = w.iter().map(|v| v - self.intercept).collect();
        css_residuals(&y, &self.ar_coeffs, &self.ma_coeffs)
    }

    /// State after observing the first `n` samples of `series`, given the
    /// innovations returned by [`ArimaModel::innovations`] for it.
    pub fn state_at(&self, series: &[f64], innovations: &[f64], n: usize) -> ArimaState {
        let d = self.order.d;
        if n == 0 {
            return ArimaState::default();
        }
        let level = series[n - 1];
        let mut lags = Vec::with_capacity(self.order.p);
        let mut innov = Vec::with_capacity(self.order.q);
        let nw = n.saturating_sub(d);
        for i in 0..self.order.p.min(nw) {
            let t = nw - 1 - i;
            let w = if d == 0 { series[t] } else { series[t + 1] - series[t] };
            lags.push(w - self.intercept);
        }
        for i in 0..self.order.q.min(nw) {
            innov.push(innovations[nw - 1 - i]);
        }
        ArimaState { lags, innovations: innov, level }
    }

    /// Mean forecasts of the original series for steps `1..=h`.
    pub fn forecast_mean(&self, state: &ArimaState, h: usize) -> Vec<f64> {
        let p = self.order.p;
        let q = self.order.q;
        let mut lags = state.lags.clone();
        lags.resize(p, 0.0);
        let mut innov = state.innovations.clone();
        innov.resize(q, 0.0);
        let mut out = Vec::with_capacity(h);
        let mut level = state.level;
        for step in 0..h {
            let mut y = 0.0;
            for i in 0..p {
                y += self.ar_coeffs[i] * lags[i];
            }
            for j in step..q {
                y += self.ma_coeffs[j] * innov[j - step];
            }
            if p > 0 {
                lags.rotate_right(1);
                lags[0] = y;
            }
            let w = y + self.intercept;
            if self.order.d == 0 {
                out.push(w);
            } else {
                level += w;
                out.push(level);
            }
        }
        out
    }

    /// ψ-weights of the (integrated) process: the forecast error at step
    /// `h` is `σ Σ_{i<h} ψ_i ε_{h-i}`.
    pub fn psi(&self, n: usize) -> Vec<f64> {
        let mut psi = vec![0.0; n];
        if n == 0 {
            return psi;
        }
        psi[0] = 1.0;
        for k in 1..n {
            let mut v = if k <= self.order.q { self.ma_coeffs[k - 1] } else { 0.0 };
            for i in 1..=self.order.p.min(k) {
                v += self.ar_coeffs[i - 1] * psi[k - i];
            }
            psi[k] = v;
        }
        if self.order.d == 1 {
            for k in 1..n {
                psi[k] += psi[k - 1];
            }
        }
        psi
    }

    /// Standard deviation of the `h`-step forecast error, `h = 1..=n`.
    pub fn forecast_std(&self, n: usize) -> Vec<f64> {
        let mut acc = 0.0;
        self.psi(n)
            .iter()
            .map(|p| {
                acc += p * p;
                self.residual_std * math::sqrt(acc)
            })
            .collect()
    }
}

fn difference(series: &[f64], d: usize) -> Vec<f64> {
    match d {
        0 => series.to_vec(),
        _ => series.windows(2).map(|w| w[1] - w[0]).collect(),
    }
}

/// Conditional residuals with zero pre-sample values.
fn css_residuals(y: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; y.len()];
    for t in 0..y.len() {
        let mut v = y[t];
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v -= a * y[t - 1 - i];
            }
        }
        for (j, m) in ma.iter().enumerate() {
            if t > j {
                v -= m * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

/// Regresses `y_t` on `y_{t-1..p}` and `e_{t-1..q}` for `t ≥ from`.
fn lag_regression(y: &[f64], e: &[f64], p: usize, q: usize, from: usize) -> (Vec<f64>, Vec<f64>) {
    let k = p + q;
    let rows = y.len().saturating_sub(from);
    let mut x = Vec::with_capacity(rows * k);
    let mut target = Vec::with_capacity(rows);
    for t in from..y.len() {
        for i in 1..=p {
            x.push(y[t - i]);
        }
        for j in 1..=q {
            x.push(e[t - j]);
        }
        target.push(y[t]);
    }
    let beta = math::least_squares(&x, &target, k);
    (beta[..p].to_vec(), beta[p..].to_vec())
}

/// Step-down (reverse Levinson) test that all roots of
/// `1 - c_1 z - … - c_n z^n` lie outside the unit circle.
fn is_stationary(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if !(math::abs(k) < 1.0) {
            return false;
        }
        let m = a.len() - 1;
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m).map(|i| (a[i] + k * a[m - 1 - i]) / denom).collect();
        a = next;
    }
    true
}

fn fit_order(series: &[f64], order: ArimaOrder) -> Option<ArimaModel> {
    let w = difference(series, order.d);
    let (p, q) = (order.p, order.q);
    if w.len() < 4 * (p + q + 1) + 10 {
        return None;
    }
    let mu = math::mean(&w);
    let y: Vec<f64> = w.iter().map(|v| v - mu).collect();

    let (ar, ma) = if q == 0 {
        let (ar, _) = lag_regression(&y, &[], p, 0, p);
        (ar, Vec::new())
    } else {
        let long = (p + q + 8).max(20).min(y.len() / 10).max(p + q + 1);
        let (long_ar, _) = lag_regression(&y, &[], long, 0, long);
        let mut e = css_residuals(&y, &long_ar, &[]);
        e[..long].iter_mut().for_each(|v| *v = 0.0);
        let start = long + q;
        let (mut ar, mut ma) = lag_regression(&y, &e, p, q, start.max(p));
        for _ in 0..2 {
            let neg_ma: Vec<f64> = ma.iter().map(|m| -m).collect();
            if !(is_stationary(&ar) && is_stationary(&neg_ma)) {
                break;
            }
            let e2 = css_residuals(&y, &ar, &ma);
            if !(is_stationary(&ar) && is_stationary(&ma.iter().map(|m| -m).collect::<Vec<_>>())) {
                break;
            }
            let (a2, m2) = lag_regression(&y, &e2, p, q, p.max(q));
            ar = a2;
            ma = m2;
        }
        (ar, ma)
    };

    // Residuals start at the first sample (pre-sample values are zero) and
    // the AIC uses the length of the undifferenced series, so every order in
    // the grid is scored on the same number of observations.
    let e = css_residuals(&y, &ar, &ma);
    let n_eff = e.len();
    let sigma2 = e.iter().map(|v| v * v).sum::<f64>() / n_eff as f64;
    let k = (p + q + 1) as f64;
    let aic = if sigma2 > 0.0 { series.len() as f64 * math::ln(sigma2) + 2.0 * k } else { f64::MIN };
    Some(ArimaModel {
        order,
        ar_coeffs: ar,
        ma_coeffs: ma,
        intercept: mu,
        residual_std: math::sqrt(sigma2),
        aic,
        n_obs: n_eff,
    })
}

fn admissible(m: &ArimaModel) -> bool {
    let neg_ma: Vec<f64> = m.ma_coeffs.iter().map(|v| -v).collect();
    is_stationary(&m.ar_coeffs) && is_stationary(&neg_ma)
}

/// Fits every order in `grid` and keeps the lowest AIC among stationary,
/// invertible fits. Ties go to the simpler order.
pub fn fit_arima(series: &[f64], grid: &[ArimaOrder]) -> Result<ArimaModel, ForecastError> {
    if series.len() < MIN_SAMPLES {
        return Err(ForecastError::InsufficientHistory { needed: MIN_SAMPLES, got: series.len() });
    }
    let mut orders = grid.to_vec();
    orders.sort_by_key(ArimaOrder::complexity);
    let mut best: Option<ArimaModel> = None;
    let mut rejected: Option<ArimaModel> = None;
    for order in orders {
        let Some(model) = fit_order(series, order) else { continue };
        if !admissible(&model) {
            if rejected.as_ref().is_none_or(|r| model.aic < r.aic) {
                rejected = Some(model);
            }
            continue;
        }
        if best.as_ref().is_none_or(|b| model.aic < b.aic) {
            best = Some(model);
        }
    }
    best.ok_or(ForecastError::NonConvergence { best: rejected.map(Box::new) })
}
