//! Preconditioned conjugate gradients for SPD systems.

use super::sparse::{dot, norm2, CsrMatrix, Definiteness, SparseSystem};
use crate::error::{GapError, Result};

/// Something that approximates `A⁻¹` symmetrically and positively.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Diagonal scaling `z = r / diag(A)`.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(GapError::Setup(format!(
                        "Jacobi preconditioner needs a positive diagonal (row {i}: {d})"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Jacobi { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Target relative residual `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        CgOptions {
            tol,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

/// Jacobi-preconditioned CG from a zero initial guess.
pub fn cg_solve(system: &SparseSystem, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    cg_solve_with(system, rhs, None, CgOptions::with_tol(tol)).map(|o| o.x)
}

/// Jacobi-preconditioned CG with an optional starting vector.
pub fn cg_solve_with(
    system: &SparseSystem,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
) -> Result<CgOutcome> {
    if system.definiteness != Definiteness::Spd {
        return Err(GapError::usage("CG requires a system tagged SPD"));
    }
    let pre = Jacobi::new(&system.matrix)?;
    pcg(&system.matrix, rhs, x0, &pre, opts)
}

/// Preconditioned CG on `A x = b`. Reductions run sequentially in index
/// order, so results are reproducible bit for bit.
pub fn pcg<P: Preconditioner + ?Sized>(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    pre: &P,
    opts: CgOptions,
) -> Result<CgOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(GapError::usage(format!(
            "rhs has length {}, system has dimension {n}",
            b.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(GapError::usage("CG tolerance must be positive"));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(GapError::usage("initial guess has wrong length")),
        None => vec![0.0; n],
    };
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm2(&r) / bnorm;
    let mut it = 0;
    while rel > opts.tol {
        if it >= opts.max_iter {
            return Err(GapError::NonConvergence {
                what: "conjugate gradients",
                residual: rel,
                iterations: it,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(GapError::Numerical {
                message: "CG met a non-positive curvature direction".into(),
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        rel = norm2(&r) / bnorm;
        // guard against drift of the recursive residual
        if rel <= opts.tol || it % 500 == 0 {
            a.mul_vec_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            rel = norm2(&r) / bnorm;
            if rel <= opts.tol {
                break;
            }
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sparse::SymmetricBuilder;

    fn poisson_1d(n: usize) -> SparseSystem {
        let h = 1.0 / (n + 1) as f64;
        let mut b = SymmetricBuilder::new(n);
        for i in 0..n {
            b.add_diag(i, 2.0 / (h * h));
            if i + 1 < n {
                b.add_pair(i, i + 1, -1.0 / (h * h));
            }
        }
        SparseSystem::spd(b.build()).unwrap()
    }

    #[test]
    fn identity_returns_rhs() {
        let sys = SparseSystem::spd(CsrMatrix::identity(5)).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        let x = cg_solve(&sys, &b, 1e-14).unwrap();
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn two_by_two_exact() {
        let m = CsrMatrix::from_dense(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let sys = SparseSystem::spd(m).unwrap();
        let x = cg_solve(&sys, &[3.0, 3.0], 1e-14).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn poisson_parabola_midpoint() {
        // x(1-x)/2 is reproduced exactly by the three-point stencil
        let sys = poisson_1d(9);
        let x = cg_solve(&sys, &[1.0; 9], 1e-13).unwrap();
        let h = 0.1;
        for (i, xi) in x.iter().enumerate() {
            let t = (i + 1) as f64 * h;
            assert!((xi - t * (1.0 - t) / 2.0).abs() < 1e-12);
        }
        assert!((x[4] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn stalls_report_residual() {
        let sys = poisson_1d(200);
        let err = cg_solve_with(
            &sys,
            &vec![1.0; 200],
            None,
            CgOptions {
                tol: 1e-14,
                max_iter: 3,
            },
        )
        .unwrap_err();
        match err {
            GapError::NonConvergence { residual, .. } => assert!(residual > 1e-14),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let sys = poisson_1d(4);
        assert!(matches!(
            cg_solve(&sys, &[1.0; 3], 1e-8),
            Err(GapError::Usage(_))
        ));
    }
}
