//! Two-class Fisher discriminant projection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::check_training;

const RIDGE: f64 = 1e-6;

/// Projects every row onto `w ∝ S_w⁻¹(μ₁ − μ₀)`, where `S_w` is the pooled
/// within-class scatter. A `1e-6·I` ridge is added when `S_w` is singular.
/// `w` has unit norm and class 1 projects to the higher mean.
pub fn fisher_projection(x: &[Vec<f64>], y: &[u8]) -> Result<Vec<f64>> {
    let d = check_training(x, y)?;
    let mut mu = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
    let mut counts = [0usize; 2];
    for (r, &l) in x.iter().zip(y) {
        mu[l as usize] += DVector::from_column_slice(r);
        counts[l as usize] += 1;
    }
    for c in 0..2 {
        mu[c] /= counts[c] as f64;
    }
    let mut sw = DMatrix::<f64>::zeros(d, d);
    for (r, &l) in x.iter().zip(y) {
        let dev = DVector::from_column_slice(r) - &mu[l as usize];
        sw += &dev * dev.transpose();
    }
    let diff = &mu[1] - &mu[0];
    let solve = |m: DMatrix<f64>| m.cholesky().map(|c| c.solve(&diff));
    let w = match solve(sw.clone()) {
        Some(w) if w.iter().all(|v| v.is_finite()) && sw.clone().lu().determinant().abs() > 1e-12 => w,
        _ => {
            let scale = sw.diagonal().iter().cloned().fold(0.0, f64::max).max(1.0);
            solve(sw + DMatrix::identity(d, d) * (RIDGE * scale))
                .ok_or_else(|| Error::invalid("within-class scatter is not invertible"))?
        }
    };
    let norm = w.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Ok(vec![0.0; x.len()]);
    }
    let mut w = w / norm;
    if w.dot(&diff) < 0.0 {
        w = -w;
    }
    Ok(x.iter().map(|r| DVector::from_column_slice(r).dot(&w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn clouds(n: usize, shift: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..2 * n {
            let l = u8::from(i >= n);
            let s = f64::from(l) * shift;
            x.push(vec![s + noise.sample(&mut rng), 0.5 * s + noise.sample(&mut rng), noise.sample(&mut rng)]);
            y.push(l);
        }
        (x, y)
    }

    fn class_stats(p: &[f64], y: &[u8]) -> ([f64; 2], f64) {
        let mut m = [0.0; 2];
        let mut c = [0.0; 2];
        for (&v, &l) in p.iter().zip(y) {
            m[l as usize] += v;
            c[l as usize] += 1.0;
        }
        m[0] /= c[0];
        m[1] /= c[1];
        let var = p.iter().zip(y).map(|(&v, &l)| (v - m[l as usize]).powi(2)).sum::<f64>() / (c[0] + c[1]);
        (m, var.sqrt())
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn separated_clouds() {
        let (x, y) = clouds(100, 8.0, 1);
        let p = fisher_projection(&x, &y).unwrap();
        let (m, sd) = class_stats(&p, &y);
        assert!(m[1] - m[0] >= 4.0 * sd, "{m:?} {sd}");
    }

    #[test]
    fn identical_distributions() {
        let (x, y) = clouds(500, 0.0, 2);
        let p = fisher_projection(&x, &y).unwrap();
        let (m, sd) = class_stats(&p, &y);
        assert!((m[1] - m[0]).abs() < 0.3 * sd);
    }

    #[test]
    fn invariant_to_linear_reparameterisation() {
        let (x, y) = clouds(60, 2.0, 3);
        let a = [[2.0, 1.0, 0.0], [0.0, -1.0, 3.0], [1.0, 0.5, 0.5]];
        let xt: Vec<Vec<f64>> = x
            .iter()
            .map(|r| (0..3).map(|i| (0..3).map(|j| a[i][j] * r[j]).sum()).collect())
            .collect();
        let p = fisher_projection(&x, &y).unwrap();
        let q = fisher_projection(&xt, &y).unwrap();
        assert!(correlation(&p, &q).abs() >= 0.999);
    }

    #[test]
    fn singular_scatter_uses_ridge() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<u8> = (0..8).map(|i| u8::from(i >= 4)).collect();
        let p = fisher_projection(&x, &y).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!(p[7] > p[0]);
    }

    #[test]
    fn single_class_rejected() {
        assert!(fisher_projection(&[vec![1.0], vec![2.0]], &[1, 1]).is_err());
    }
}
