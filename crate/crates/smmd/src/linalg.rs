//! Small-matrix symmetric eigensolver and the inverse square root used for
//! whitening. Cyclic Jacobi is plenty for latent dimensions (d ≤ 64).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition A = V diag(λ) Vᵀ of a symmetric matrix via cyclic
/// Jacobi rotations. Returns (eigenvalues, eigenvectors-as-columns);
/// eigenvalues ascending.
pub fn sym_eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v: Array2<f64> = Array2::eye(d);

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|p| ((p + 1)..d).map(move |q| (p, q)))
            .map(|(p, q)| m[[p, q]] * m[[p, q]])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[[p, q]];
                if apq.abs() <= tol / (d * d) as f64 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // tan of the rotation angle, smaller root for stability
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..d {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut eigenvectors = Array2::zeros((d, d));
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..d {
            eigenvectors[[k, new_col]] = v[[k, old_col]];
        }
    }
    (eigenvalues, eigenvectors)
}

/// Symmetric inverse square root S^{-1/2} = V diag(λ^{-1/2}) Vᵀ.
///
/// Errors when the smallest eigenvalue falls below 1e-10 times the largest;
/// no silent regularization is applied.
pub fn sym_inv_sqrt(s: &Array2<f64>) -> Result<Array2<f64>> {
    let (eigenvalues, v) = sym_eigh(s);
    let d = s.nrows();
    let max_ev = eigenvalues[d - 1];
    let min_ev = eigenvalues[0];
    if !max_ev.is_finite() || max_ev <= 0.0 || min_ev <= 1e-10 * max_ev {
        let cond = if max_ev > 0.0 { min_ev / max_ev } else { 0.0 };
        return Err(Error::SingularCovariance { cond });
    }
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += v[[i, k]] * v[[j, k]] / eigenvalues[k].sqrt();
            }
            out[[i, j]] = acc;
            out[[j, i]] = acc;
        }
    }
    Ok(out)
}
