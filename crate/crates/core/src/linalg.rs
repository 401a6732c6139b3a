//! Matrix-free iterative solvers.
//!
//! Symmetric positive (semi)definite systems go through Jacobi-preconditioned
//! conjugate gradients; the nonsymmetric but strictly diagonally dominant
//! M-matrices of the transport-diffusion steps use plain Jacobi sweeps,
//! which converge unconditionally for that class.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Relative residual target, `|b - Ax| <= tol * |b|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned CG. With `singular_constant` the operator is assumed to
/// have the constants as its null space: the right-hand side and the iterate
/// are kept mean-free.
pub fn pcg(
    name: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    singular_constant: bool,
    opts: SolveOptions,
) -> Result<SolveStats> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if singular_constant {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    if singular_constant {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = opts.tol * bnorm;
    for it in 0..opts.max_iter {
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= target {
            return Ok(SolveStats {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NoConvergence {
                solver: name,
                iterations: it,
                residual: rnorm / bnorm,
                tolerance: opts.tol,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        if singular_constant {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // recompute the true residual before giving up
    apply(x, &mut ax);
    let res = rhs.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt() / bnorm;
    if res <= opts.tol {
        return Ok(SolveStats {
            iterations: opts.max_iter,
            residual: res,
        });
    }
    Err(Error::NoConvergence {
        solver: name,
        iterations: opts.max_iter,
        residual: res,
        tolerance: opts.tol,
    })
}

/// Jacobi iteration `x <- x + D^{-1} (b - A x)` in the max norm. Once the
/// relative residual is below `opts.tol` the sweeps continue while they
/// still make progress, so conserved sums are not limited by the stopping
/// threshold.
pub fn jacobi(
    name: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    opts: SolveOptions,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut ax = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..opts.max_iter {
        apply(x, &mut ax);
        let mut rmax = 0.0f64;
        for i in 0..n {
            let r = b[i] - ax[i];
            rmax = rmax.max(r.abs());
            x[i] += r / diag[i];
        }
        let rel = rmax / bnorm;
        if rel < best * 0.5 {
            best = rel;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if rel <= opts.tol && (stalled >= 3 || rel <= 1e-3 * opts.tol) {
            return Ok(SolveStats {
                iterations: it + 1,
                residual: rel,
            });
        }
    }
    Err(Error::NoConvergence {
        solver: name,
        iterations: opts.max_iter,
        residual: best,
        tolerance: opts.tol,
    })
}
