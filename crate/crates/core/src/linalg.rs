//! Largest singular value of a dense complex matrix.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Below this dimension the full SVD is cheaper than iterating.
pub const DIRECT_SVD_DIM: usize = 256;
const MAX_ITER: usize = 400;
const CHECK_EVERY: usize = 4;
const REL_TOL: f64 = 1e-13;

pub fn svd_norm(m: &Mat<Complex64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let sv = m.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

fn apply(m: &Mat<Complex64>, x: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for (j, &xj) in x.iter().enumerate() {
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * xj;
        }
    }
}

fn apply_adjoint(m: &Mat<Complex64>, y: &[Complex64], out: &mut [Complex64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let col = m.col(j);
        let mut s = Complex64::new(0.0, 0.0);
        for (i, &yi) in y.iter().enumerate() {
            s += col[i].conj() * yi;
        }
        *o = s;
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn top_eigenvalue(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let ev = t
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(ev.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// ‖M‖₂. Small matrices go through the SVD; larger ones run Lanczos on MᴴM
/// with full reorthogonalization until the top Ritz value settles.
pub fn largest_singular_value(m: &Mat<Complex64>) -> Result<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 {
        return Ok(0.0);
    }
    if rows.min(cols) <= DIRECT_SVD_DIM {
        return svd_norm(m);
    }
    let dim = cols;
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut v: Vec<Complex64> = (0..dim)
        .map(|i| {
            let t = i as f64;
            Complex64::new(1.0 + 0.5 * (0.7 * t + 0.3).sin(), 0.25 * (1.3 * t).cos())
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut tmp = vec![Complex64::new(0.0, 0.0); rows];
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut last = f64::NAN;
    let limit = MAX_ITER.min(dim);
    for it in 0..limit {
        apply(m, &v, &mut tmp);
        apply_adjoint(m, &tmp, &mut w);
        let a = dot(&v, &w).re;
        alpha.push(a);
        basis.push(v.clone());
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        let done = it + 1 == limit || b <= 1e-300;
        if (it + 1) % CHECK_EVERY == 0 || done {
            let theta = top_eigenvalue(&alpha, &beta)?;
            if done || (theta - last).abs() <= REL_TOL * theta.abs() {
                return Ok(theta.max(0.0).sqrt());
            }
            last = theta;
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
    }
    let theta = top_eigenvalue(&alpha, &beta[..alpha.len() - 1])?;
    Ok(theta.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(rows: usize, cols: usize) -> Mat<Complex64> {
        Mat::from_fn(rows, cols, |i, j| {
            let d = (i as f64 - j as f64).abs();
            Complex64::new((-0.02 * d).exp() * (0.3 * i as f64).cos(), 0.1 * (0.05 * (i + 2 * j) as f64).sin())
                / (1.0 + 0.01 * (i + j) as f64)
        })
    }

    #[test]
    fn lanczos_matches_svd() {
        for &(r, c) in &[(300, 300), (400, 330), (310, 500)] {
            let m = test_matrix(r, c);
            let a = largest_singular_value(&m).unwrap();
            let b = svd_norm(&m).unwrap();
            assert!((a - b).abs() <= 1e-10 * b, "{r}x{c}: {a} vs {b}");
        }
    }

    #[test]
    fn rank_one_exact() {
        let m = Mat::from_fn(320, 300, |i, j| Complex64::new((i + 1) as f64, 0.0) * Complex64::new(0.0, (j % 7) as f64));
        let u: f64 = (1..=320).map(|i| (i * i) as f64).sum::<f64>().sqrt();
        let v: f64 = (0..300).map(|j| ((j % 7) * (j % 7)) as f64).sum::<f64>().sqrt();
        let a = largest_singular_value(&m).unwrap();
        assert!((a - u * v).abs() <= 1e-10 * u * v);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(largest_singular_value(&Mat::<Complex64>::zeros(0, 3)).unwrap(), 0.0);
    }
}
