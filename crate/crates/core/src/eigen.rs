//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Sweeps allowed before giving up.
pub const MAX_SWEEPS: usize = 100;
/// Convergence when the off-diagonal Frobenius norm drops to this fraction
/// of the input norm.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
/// Largest tolerated `|s_ij - s_ji|` relative to the Frobenius norm.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Leading eigenpairs of a symmetric matrix.
///
/// Eigenvalues are in descending order and `eigenvectors` holds the matching
/// unit eigenvectors as columns. Each eigenvector is signed so that its
/// entry of largest magnitude (lowest index on ties) is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenResult {
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j)
    }
}

/// Returns the `d` largest eigenpairs of the symmetric matrix `s`.
pub fn symmetric_eig(s: &Matrix, d: usize) -> Result<EigenResult> {
    let n = s.rows();
    if !s.is_square() {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    if d == 0 || d > n {
        return Err(Error::OutOfRange {
            what: "d",
            value: d,
            min: 1,
            max: n,
        });
    }
    let fro = s.frobenius_norm();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE * fro {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max |s_ij - s_ji| = {asym:e}, ||S||_F = {fro:e})"
        )));
    }

    // Work on the symmetrized copy; `vt` holds the eigenvectors as rows.
    let mut a: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            0.5 * (s.get(i, j) + s.get(j, i))
        })
        .collect();
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let target = OFF_DIAGONAL_TOLERANCE * fro;
    // Rotations are skipped for entries this small; even all of them
    // together stay far below `target`.
    let negligible = 1e-3 * target / n as f64;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= negligible {
                    continue;
                }
                rotate(&mut a, &mut vt, n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    order.truncate(d);

    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = Matrix::zeros(n, d);
    for (col, &i) in order.iter().enumerate() {
        let v = &vt[i * n..(i + 1) * n];
        let sign = sign_of_dominant(v);
        for (r, x) in v.iter().enumerate() {
            eigenvectors.set(r, col, sign * x);
        }
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation that annihilates `a[p][q]`, and accumulates it into
/// the eigenvector rows `vt[p]`, `vt[q]`.
fn rotate(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        // |theta| overflowed: the rotation angle is ~1/(2 theta).
        0.0
    };
    if t == 0.0 {
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[k * n + p] = new_kp;
        a[k * n + q] = new_kq;
        a[p * n + k] = new_kp;
        a[q * n + k] = new_kq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    let (head, tail) = vt.split_at_mut(q * n);
    let vp = &mut head[p * n..(p + 1) * n];
    let vq = &mut tail[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn sign_of_dominant(v: &[f64]) -> f64 {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}
