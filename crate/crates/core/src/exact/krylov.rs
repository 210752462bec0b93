//! Lanczos-based propagation and extremal eigenpairs for real-symmetric
//! operators given as matrix-vector products.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Settings for [`expm_krylov`].
#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Maximal Krylov dimension per substep.
    pub max_dim: usize,
    /// Tolerated a-posteriori error (2-norm) per substep.
    pub tol: f64,
    /// Substeps are halved at most this many times before giving up.
    pub max_halvings: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { max_dim: 40, tol: 1e-10, max_halvings: 40 }
    }
}

/// Work counters of one propagation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KrylovStats {
    pub substeps: usize,
    pub matvecs: usize,
    pub max_error: f64,
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i τ T) e_1` for the tridiagonal `T`.
fn small_expm(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let u = eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)];
                    u * (-I * tau * eig.eigenvalues[k]).exp()
                })
                .sum()
        })
        .collect()
}

/// Overwrites `v` with `exp(-i dt H) v`, splitting `dt` into substeps whose
/// Krylov error estimate stays below `opts.tol`. `apply(x, y)` must set `y = H x`.
pub fn expm_krylov<F>(apply: F, v: &mut [Complex64], dt: f64, opts: &KrylovOptions) -> Result<KrylovStats>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let dim = v.len();
    let mut stats = KrylovStats::default();
    if dt == 0.0 || dim == 0 {
        return Ok(stats);
    }
    if dim == 1 {
        let mut h = [Complex64::default()];
        apply(v, &mut h);
        stats.matvecs = 1;
        stats.substeps = 1;
        let e = h[0].re;
        v[0] *= (-I * dt * e).exp();
        return Ok(stats);
    }
    let sign = dt.signum();
    let mut remaining = dt.abs();
    let mut tau = remaining;
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut w = vec![Complex64::default(); dim];
    while remaining > 0.0 {
        let norm = cnorm(v);
        if !norm.is_finite() {
            return Err(Error::Numerical("non-finite state in Krylov propagation".into()));
        }
        if norm == 0.0 {
            return Ok(stats);
        }
        basis.clear();
        basis.push(v.iter().map(|x| x / norm).collect());
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut breakdown = false;
        let m_max = opts.max_dim.min(dim);
        let mut beta_last = 0.0;
        let mut early: Option<Vec<Complex64>> = None;
        for j in 0..m_max {
            apply(&basis[j], &mut w);
            stats.matvecs += 1;
            let a = cdot(&basis[j], &w).re;
            alpha.push(a);
            w.iter_mut().zip(&basis[j]).for_each(|(wi, q)| *wi -= q * a);
            if j > 0 {
                let b = beta[j - 1];
                w.iter_mut().zip(&basis[j - 1]).for_each(|(wi, p)| *wi -= p * b);
            }
            // Full reorthogonalization keeps the small problem faithful.
            for q in basis.iter() {
                let c = cdot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= qi * c);
            }
            let b = cnorm(&w);
            beta_last = b;
            if b < 1e-12 * (a.abs() + 1.0) {
                breakdown = true;
                break;
            }
            // Stop growing the basis once the current substep already converges.
            if j >= 3 && j + 1 < m_max && j % 2 == 1 {
                let c = small_expm(&alpha, &beta, sign * tau);
                if norm * b * c[j].norm() <= opts.tol {
                    stats.max_error = stats.max_error.max(norm * b * c[j].norm());
                    early = Some(c);
                    break;
                }
            }
            if j + 1 < m_max {
                beta.push(b);
                basis.push(w.iter().map(|x| x / b).collect());
            }
        }
        let m = alpha.len();
        let beta_used = &beta[..m - 1];
        let mut halvings = 0;
        let coeffs = match early {
            Some(c) => c,
            None => loop {
                let c = small_expm(&alpha, beta_used, sign * tau);
                let err = if breakdown { 0.0 } else { norm * beta_last * c[m - 1].norm() };
                if err <= opts.tol || m == dim {
                    stats.max_error = stats.max_error.max(err);
                    break c;
                }
                halvings += 1;
                if halvings > opts.max_halvings {
                    return Err(Error::Numerical(format!(
                        "Krylov substep did not converge (error {err:.3e} at dt {tau:.3e})"
                    )));
                }
                tau *= 0.5;
            },
        };
        v.iter_mut().for_each(|x| *x = Complex64::default());
        for (q, c) in basis.iter().zip(&coeffs) {
            let c = c * norm;
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi += qi * c);
        }
        stats.substeps += 1;
        remaining -= tau;
        if remaining < 1e-14 * dt.abs() {
            remaining = 0.0;
        }
        if halvings == 0 {
            tau *= 1.5;
        }
        tau = tau.min(remaining);
    }
    Ok(stats)
}

/// Lowest eigenpairs of a real-symmetric operator.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// Normalized eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// Residual norms `|H x - λ x|`.
    pub residuals: Vec<f64>,
}

/// The `k` lowest eigenpairs by dense diagonalization.
pub fn lowest_dense(h: &DMatrix<f64>, k: usize) -> Eigenpairs {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let k = k.min(order.len());
    let mut out = Eigenpairs { values: vec![], vectors: vec![], residuals: vec![] };
    for &c in &order[..k] {
        let x: DVector<f64> = eig.eigenvectors.column(c).into_owned();
        let r = (h * &x - &x * eig.eigenvalues[c]).norm();
        out.values.push(eig.eigenvalues[c]);
        out.vectors.push(x.iter().copied().collect());
        out.residuals.push(r);
    }
    out
}

/// The `k` lowest eigenpairs by Lanczos with full reorthogonalization.
/// Iteration stops once every requested Ritz residual is below `tol`.
pub fn lowest_lanczos<F>(apply: F, dim: usize, k: usize, tol: f64, seed: u64) -> Result<Eigenpairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    let k = k.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let n0 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n0);
    let mut basis = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let max_iter = dim.min(600.max(20 * k));
    loop {
        let j = basis.len() - 1;
        apply(&basis[j], &mut w);
        let a: f64 = basis[j].iter().zip(&w).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for qv in basis.iter() {
                let c: f64 = qv.iter().zip(&w).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(qv).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = alpha.len();
        let check = m >= k && (m % 10 == 0 || b < 1e-12 || m == max_iter);
        if check {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let res: Vec<f64> = order[..k].iter().map(|&c| (b * eig.eigenvectors[(m - 1, c)]).abs()).collect();
            let done = res.iter().all(|&r| r < tol) || b < 1e-12 || m == max_iter;
            if done {
                if res.iter().any(|&r| r > tol.max(1e-6)) {
                    return Err(Error::Numerical(format!(
                        "Lanczos did not converge after {m} iterations (residual {:.3e})",
                        res.iter().copied().fold(0.0, f64::max)
                    )));
                }
                let mut out = Eigenpairs { values: vec![], vectors: vec![], residuals: vec![] };
                for (&c, r) in order[..k].iter().zip(res) {
                    let mut x = vec![0.0; dim];
                    for (row, qv) in basis.iter().enumerate() {
                        let y = eig.eigenvectors[(row, c)];
                        x.iter_mut().zip(qv).for_each(|(xi, qi)| *xi += y * qi);
                    }
                    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    x.iter_mut().for_each(|v| *v /= nx);
                    out.values.push(eig.eigenvalues[c]);
                    out.vectors.push(x);
                    out.residuals.push(r);
                }
                return Ok(out);
            }
        }
        if b < 1e-12 {
            // Invariant subspace exhausted before k vectors: restart orthogonally.
            let mut r: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            for qv in basis.iter() {
                let c: f64 = qv.iter().zip(&r).map(|(x, y)| x * y).sum();
                r.iter_mut().zip(qv).for_each(|(ri, qi)| *ri -= c * qi);
            }
            let nr = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter_mut().for_each(|x| *x /= nr);
            beta.push(0.0);
            basis.push(r);
        } else {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    }
}
