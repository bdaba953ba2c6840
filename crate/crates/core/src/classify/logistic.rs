//! L1/L2-regularised logistic regression.
//!
//! Features are z-scored with training statistics. The objective is the
//! summed log-loss plus `penalty(w) / C`, divided by the sample count (the
//! bias is not penalised), where the L2 penalty is `½‖w‖²` and the L1
//! penalty is `‖w‖₁`. L2 is minimised by
//! gradient descent with a backtracking line search, L1 by proximal gradient
//! descent with the same step control. Both start from zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::check_training;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub penalty: Penalty,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl LogisticParams {
    pub fn new(c: f64, penalty: Penalty) -> Self {
        LogisticParams {
            c,
            penalty,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Weights on the standardised features.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub penalty: Penalty,
    #[serde(rename = "C")]
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias
            + row
                .iter()
                .zip(&self.means)
                .zip(&self.scales)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| sigmoid(self.decision(r))).collect()
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<u8> {
        x.iter().map(|r| u8::from(self.decision(r) > 0.0)).collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Column means and population standard deviations (1 for constant
/// columns), and the standardised matrix.
pub fn standardize(x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut means = vec![0.0; d];
    for r in x {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; d];
    for r in x {
        for ((s, v), m) in scales.iter_mut().zip(r).zip(&means) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut scales {
        *s = if s.sqrt() < 1e-12 { 1.0 } else { s.sqrt() };
    }
    let z = x
        .iter()
        .map(|r| r.iter().zip(&means).zip(&scales).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    (z, means, scales)
}

fn mean_log_loss(z: &[Vec<f64>], y: &[u8], w: &[f64], b: f64) -> f64 {
    z.iter()
        .zip(y)
        .map(|(r, &t)| {
            let s = b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            softplus(s) - f64::from(t) * s
        })
        .sum::<f64>()
        / z.len() as f64
}

fn log_loss_gradient(z: &[Vec<f64>], y: &[u8], w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let n = z.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (r, &t) in z.iter().zip(y) {
        let s = b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let e = (sigmoid(s) - f64::from(t)) / n;
        gb += e;
        for (g, a) in gw.iter_mut().zip(r) {
            *g += e * a;
        }
    }
    (gw, gb)
}

/// Regularised objective on standardised features.
pub fn objective(z: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, c: f64, penalty: Penalty) -> f64 {
    let reg = match penalty {
        Penalty::L2 => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
        Penalty::L1 => w.iter().map(|v| v.abs()).sum::<f64>(),
    };
    mean_log_loss(z, y, w, b) + reg / (c * z.len() as f64)
}

/// Gradient of [`objective`] with respect to `(w, b)`; for L1 the penalty
/// contributes `sign(w) / (nC)`, valid wherever no weight is zero.
pub fn gradient(z: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, c: f64, penalty: Penalty) -> (Vec<f64>, f64) {
    let (mut gw, gb) = log_loss_gradient(z, y, w, b);
    let c = c * z.len() as f64;
    for (g, v) in gw.iter_mut().zip(w) {
        *g += match penalty {
            Penalty::L2 => v / c,
            Penalty::L1 => v.signum() * f64::from(u8::from(*v != 0.0)) / c,
        };
    }
    (gw, gb)
}

fn norm(gw: &[f64], gb: f64) -> f64 {
    (gw.iter().map(|v| v * v).sum::<f64>() + gb * gb).sqrt()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

struct Fit {
    w: Vec<f64>,
    b: f64,
    iterations: usize,
    converged: bool,
}

fn fit_l2(z: &[Vec<f64>], y: &[u8], c: f64, max_iter: usize, tol: f64) -> Fit {
    let d = z[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0;
    let mut value = objective(z, y, &w, b, c, Penalty::L2);
    for it in 0..max_iter {
        let (gw, gb) = gradient(z, y, &w, b, c, Penalty::L2);
        let gnorm = norm(&gw, gb);
        if gnorm <= tol {
            return Fit { w, b, iterations: it, converged: true };
        }
        loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
            let nb = b - step * gb;
            let nv = objective(z, y, &nw, nb, c, Penalty::L2);
            if nv <= value - 0.5 * step * gnorm * gnorm || step < 1e-16 {
                w = nw;
                b = nb;
                value = nv;
                break;
            }
            step *= 0.5;
        }
        step = (step * 2.0).min(1e4);
    }
    let (gw, gb) = gradient(z, y, &w, b, c, Penalty::L2);
    let converged = norm(&gw, gb) <= tol;
    Fit { w, b, iterations: max_iter, converged }
}

fn fit_l1(z: &[Vec<f64>], y: &[u8], c: f64, max_iter: usize, tol: f64) -> Fit {
    let d = z[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0;
    for it in 0..max_iter {
        let f = mean_log_loss(z, y, &w, b);
        let (gw, gb) = log_loss_gradient(z, y, &w, b);
        let (nw, nb) = loop {
            let nw: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(v, g)| soft_threshold(v - step * g, step / (c * z.len() as f64)))
                .collect();
            let nb = b - step * gb;
            let dw: Vec<f64> = nw.iter().zip(&w).map(|(a, v)| a - v).collect();
            let db = nb - b;
            let lin = dw.iter().zip(&gw).map(|(a, g)| a * g).sum::<f64>() + db * gb;
            let quad = (dw.iter().map(|v| v * v).sum::<f64>() + db * db) / (2.0 * step);
            if mean_log_loss(z, y, &nw, nb) <= f + lin + quad || step < 1e-16 {
                break (nw, nb);
            }
            step *= 0.5;
        };
        // gradient mapping (θ - θ⁺) / t
        let map_w: Vec<f64> = w.iter().zip(&nw).map(|(a, n)| (a - n) / step).collect();
        let map_norm = norm(&map_w, (b - nb) / step);
        w = nw;
        b = nb;
        if map_norm <= tol {
            return Fit { w, b, iterations: it + 1, converged: true };
        }
        step = (step * 2.0).min(1e4);
    }
    Fit { w, b, iterations: max_iter, converged: false }
}

pub fn train_logistic(x: &[Vec<f64>], y: &[u8], params: &LogisticParams) -> Result<LogisticModel> {
    check_training(x, y).map_err(|e| match e {
        Error::InvalidArgument(m) if m.contains("non-finite") => Error::invalid("non-finite feature values"),
        e => e,
    })?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::invalid(format!("C = {} must be positive", params.c)));
    }
    let (z, means, scales) = standardize(x);
    let fit = match params.penalty {
        Penalty::L2 => fit_l2(&z, y, params.c, params.max_iter, params.tol),
        Penalty::L1 => fit_l1(&z, y, params.c, params.max_iter, params.tol),
    };
    if fit.w.iter().any(|v| !v.is_finite()) || !fit.b.is_finite() {
        return Err(Error::invalid("logistic regression diverged"));
    }
    Ok(LogisticModel {
        weights: fit.w,
        bias: fit.b,
        means,
        scales,
        penalty: params.penalty,
        c: params.c,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::metrics::f1_and_accuracy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central differences of the objective, independent of `gradient`.
    fn finite_difference(z: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, c: f64, p: Penalty) -> Vec<f64> {
        let h = 1e-6;
        let mut out = Vec::new();
        for j in 0..=w.len() {
            let (mut wp, mut wm) = (w.to_vec(), w.to_vec());
            let (mut bp, mut bm) = (b, b);
            if j < w.len() {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            out.push((objective(z, y, &wp, bp, c, p) - objective(z, y, &wm, bm, c, p)) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (n, d) = (rng.random_range(5..30), rng.random_range(1..6));
            let z: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let b = rng.random_range(-1.0..1.0);
            let c = rng.random_range(0.1..2.0);
            for p in [Penalty::L2, Penalty::L1] {
                let (gw, gb) = gradient(&z, &y, &w, b, c, p);
                let fd = finite_difference(&z, &y, &w, b, c, p);
                for (a, e) in gw.iter().chain(std::iter::once(&gb)).zip(&fd) {
                    assert!((a - e).abs() <= 1e-5 * a.abs().max(1e-3), "{a} vs {e}");
                }
            }
        }
    }

    #[test]
    fn separable_data_is_fit() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let s = if i < 10 { -1.0 } else { 1.0 };
                vec![s * (1.0 + (i % 5) as f64 * 0.3), ((i * 7) % 5) as f64 - 2.0]
            })
            .collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        for p in [Penalty::L2, Penalty::L1] {
            let m = train_logistic(&x, &y, &LogisticParams::new(1.0, p)).unwrap();
            assert!(m.converged, "{p:?} did not converge");
            assert_eq!(f1_and_accuracy(&y, &m.predict(&x)).unwrap().f1, 1.0);
        }
    }

    #[test]
    fn strong_regularisation_shrinks_weights() {
        // labels independent of the symmetric feature
        let x: Vec<Vec<f64>> = [-2.0, -1.0, 1.0, 2.0, -2.0, -1.0, 1.0, 2.0].iter().map(|&v| vec![v]).collect();
        let y = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let loose = train_logistic(&x, &y, &LogisticParams::new(1.0, Penalty::L2)).unwrap();
        assert!(loose.weights[0].abs() < 1e-6);
        let xs: Vec<Vec<f64>> = [-2.0, -1.0, 1.0, 2.0, -1.5, -0.5, 1.5, 2.5].iter().map(|&v| vec![v]).collect();
        let w_big = train_logistic(&xs, &y, &LogisticParams::new(10.0, Penalty::L2)).unwrap().weights[0];
        let w_small = train_logistic(&xs, &y, &LogisticParams::new(0.01, Penalty::L2)).unwrap().weights[0];
        assert!(w_small.abs() < w_big.abs());
        assert!(w_small.abs() < 0.01);
        let l1 = train_logistic(&xs, &y, &LogisticParams::new(0.01, Penalty::L1)).unwrap();
        assert_eq!(l1.weights[0], 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        let x = vec![vec![1.0], vec![f64::NAN]];
        let err = train_logistic(&x, &[0, 1], &LogisticParams::new(1.0, Penalty::L2)).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }
}
