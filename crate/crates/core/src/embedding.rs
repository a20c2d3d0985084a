//! Multi-view embeddings into a shared space.
//!
//! [`fit_mbfa`] maximizes the total cross-view covariance of `c ≥ 2` views
//! by taking the top eigenvectors of the zero-diagonal block matrix `M`
//! with `M_ij = X_i X_jᵀ` for `i ≠ j`. The two-view case is inter-battery
//! factor analysis ([`fit_ibfa`]). [`fit_mcca`] is the correlation-based
//! baseline: it whitens every view by its own covariance first.

use serde::{Deserialize, Serialize};

use crate::eigen::symmetric_eig;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Default ridge for MCCA, relative to each view's average variance.
pub const DEFAULT_MCCA_REG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Mbfa,
    Mcca,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MBFA" | "IBFA" => Ok(Method::Mbfa),
            "MCCA" => Ok(Method::Mcca),
            _ => Err(Error::InvalidInput(format!(
                "unknown method {s:?} (expected MBFA or MCCA)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Mbfa => "MBFA",
            Method::Mcca => "MCCA",
        })
    }
}

/// A fitted linear embedding of `c` views into a `d`-dimensional space.
///
/// `projections[i]` is the `p_i × d` block `W_i` of the stacked projection
/// `W`, and `means[i]` the training mean of view `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub method: Method,
    pub d: usize,
    pub view_dims: Vec<usize>,
    pub means: Vec<Vec<f64>>,
    pub projections: Vec<Matrix>,
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub view_names: Vec<String>,
}

impl EmbeddingModel {
    pub fn view_count(&self) -> usize {
        self.view_dims.len()
    }

    /// Checks the structural invariants of a model, e.g. one read from disk.
    pub fn validate(&self) -> Result<()> {
        let c = self.view_dims.len();
        if c < 2 {
            return Err(Error::InvalidInput(format!("model needs at least 2 views, has {c}")));
        }
        if self.means.len() != c || self.projections.len() != c {
            return Err(Error::mismatch(
                "EmbeddingModel",
                format!("{c} means and projections"),
                format!("{} means, {} projections", self.means.len(), self.projections.len()),
            ));
        }
        if self.eigenvalues.len() != self.d {
            return Err(Error::mismatch(
                "EmbeddingModel eigenvalues",
                self.d,
                self.eigenvalues.len(),
            ));
        }
        for (i, ((&p, mean), w)) in self
            .view_dims
            .iter()
            .zip(&self.means)
            .zip(&self.projections)
            .enumerate()
        {
            if mean.len() != p || w.shape() != (p, self.d) {
                return Err(Error::mismatch(
                    "EmbeddingModel view",
                    format!("view {i}: mean of {p}, projection {p}x{}", self.d),
                    format!("mean of {}, projection {}x{}", mean.len(), w.rows(), w.cols()),
                ));
            }
            if mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite mean in view {i}")));
            }
        }
        if !self.view_names.is_empty() && self.view_names.len() != c {
            return Err(Error::mismatch("EmbeddingModel view_names", c, self.view_names.len()));
        }
        if self.eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("eigenvalues are not in descending order".into()));
        }
        Ok(())
    }

    /// The stacked projection `W = [W_1; …; W_c]`.
    pub fn stacked_projection(&self) -> Matrix {
        let total: usize = self.view_dims.iter().sum();
        let mut rows = Vec::with_capacity(total);
        for w in &self.projections {
            rows.extend(w.to_rows());
        }
        Matrix::from_rows(&rows).expect("projection blocks share d")
    }

    /// Max deviation of `WᵀW` from the identity.
    pub fn stacked_orthonormality_defect(&self) -> f64 {
        let w = self.stacked_projection();
        identity_defect(&w.transpose_mul(&w).expect("square"))
    }

    /// Max deviation of each `W_iᵀW_i` from the identity. Only the stacked
    /// constraint is enforced by the fit; this is a diagnostic.
    pub fn block_orthonormality_defects(&self) -> Vec<f64> {
        self.projections
            .iter()
            .map(|w| identity_defect(&w.transpose_mul(w).expect("square")))
            .collect()
    }

    /// Embeds one observation of view `view`: `W_iᵀ (x − mean_i)`.
    pub fn project(&self, view: usize, x: &[f64]) -> Result<Vec<f64>> {
        let c = self.view_count();
        if view >= c {
            return Err(Error::OutOfRange {
                what: "view index",
                value: view,
                min: 0,
                max: c - 1,
            });
        }
        let mean = &self.means[view];
        if x.len() != mean.len() {
            return Err(Error::mismatch("project", mean.len(), x.len()));
        }
        let centered: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
        self.projections[view].transpose_matvec(&centered)
    }

    /// Embeds every column of `x` (a `p_i × n` matrix), giving `d × n`.
    pub fn project_columns(&self, view: usize, x: &Matrix) -> Result<Matrix> {
        let columns = (0..x.cols())
            .map(|j| self.project(view, &x.column(j)))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_columns(&columns)
    }

    /// Total pairwise cross-view covariance in the embedded space,
    /// `Σ_{i≠j} tr(W_iᵀ X_i X_jᵀ W_j)`, with the views centered on their own
    /// means.
    pub fn objective_value(&self, views: &[Matrix]) -> Result<f64> {
        let c = self.view_count();
        if views.len() != c {
            return Err(Error::mismatch("objective_value", format!("{c} views"), views.len()));
        }
        check_aligned(views)?;
        let mut embedded = Vec::with_capacity(c);
        for (i, (x, w)) in views.iter().zip(&self.projections).enumerate() {
            if x.rows() != self.view_dims[i] {
                return Err(Error::mismatch("objective_value", self.view_dims[i], x.rows()));
            }
            // W_iᵀ X_i, d × N
            embedded.push(w.transpose_mul(&x.center().0)?);
        }
        let mut total = 0.0;
        for i in 0..c {
            for j in 0..c {
                if i != j {
                    total += dot(embedded[i].data(), embedded[j].data());
                }
            }
        }
        Ok(total)
    }
}

fn identity_defect(gram: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram.get(i, j) - target).abs());
        }
    }
    worst
}

/// The block cross-covariance matrix `M` of a set of centered views.
#[derive(Debug, Clone)]
pub struct CrossCovariance {
    /// Row offset of each view's block; the last entry is `Σ p_i`.
    pub offsets: Vec<usize>,
    pub m: Matrix,
}

impl CrossCovariance {
    pub fn block(&self, i: usize, j: usize) -> Matrix {
        let (r0, r1) = (self.offsets[i], self.offsets[i + 1]);
        let (c0, c1) = (self.offsets[j], self.offsets[j + 1]);
        Matrix::from_fn(r1 - r0, c1 - c0, |r, c| self.m.get(r0 + r, c0 + c))
    }
}

fn check_aligned(views: &[Matrix]) -> Result<()> {
    if views.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 views, got {}",
            views.len()
        )));
    }
    let n = views[0].cols();
    if let Some((i, v)) = views.iter().enumerate().find(|(_, v)| v.cols() != n) {
        return Err(Error::mismatch(
            "view alignment",
            format!("{n} instances"),
            format!("{} in view {i}", v.cols()),
        ));
    }
    Ok(())
}

/// Assembles `M` from already-centered views. Diagonal blocks are zero.
pub fn build_cross_covariance(views: &[Matrix]) -> Result<CrossCovariance> {
    check_aligned(views)?;
    let mut offsets = vec![0];
    for v in views {
        offsets.push(offsets.last().unwrap() + v.rows());
    }
    let total = *offsets.last().unwrap();
    let mut m = Matrix::zeros(total, total);
    for i in 0..views.len() {
        for j in i + 1..views.len() {
            let block = views[i].mul_transpose(&views[j])?;
            for r in 0..block.rows() {
                for c in 0..block.cols() {
                    let v = block.get(r, c);
                    m.set(offsets[i] + r, offsets[j] + c, v);
                    m.set(offsets[j] + c, offsets[i] + r, v);
                }
            }
        }
    }
    Ok(CrossCovariance { offsets, m })
}

fn center_all(views: &[Matrix]) -> (Vec<Matrix>, Vec<Vec<f64>>) {
    views.iter().map(Matrix::center).unzip()
}

fn check_d(d: usize, total: usize) -> Result<()> {
    if d == 0 || d > total {
        return Err(Error::OutOfRange {
            what: "d",
            value: d,
            min: 1,
            max: total,
        });
    }
    Ok(())
}

fn split_blocks(stacked: &Matrix, offsets: &[usize]) -> Vec<Matrix> {
    offsets
        .windows(2)
        .map(|w| stacked.row_block(w[0], w[1] - w[0]))
        .collect()
}

/// Fits MBFA on `c ≥ 2` instance-aligned views (`p_i × N` each, uncentered).
///
/// Only the stacked constraint `WᵀW = I` is imposed; the individual blocks
/// are generally not orthonormal.
pub fn fit_mbfa(views: &[Matrix], d: usize) -> Result<EmbeddingModel> {
    check_aligned(views)?;
    let (centered, means) = center_all(views);
    let cov = build_cross_covariance(&centered)?;
    check_d(d, cov.m.rows())?;
    let eig = symmetric_eig(&cov.m, d)?;
    Ok(EmbeddingModel {
        method: Method::Mbfa,
        d,
        view_dims: views.iter().map(Matrix::rows).collect(),
        means,
        projections: split_blocks(&eig.eigenvectors, &cov.offsets),
        eigenvalues: eig.eigenvalues,
        view_names: Vec::new(),
    })
}

/// Inter-battery factor analysis: the two-view case of [`fit_mbfa`].
pub fn fit_ibfa(x1: &Matrix, x2: &Matrix, d: usize) -> Result<EmbeddingModel> {
    fit_mbfa(&[x1.clone(), x2.clone()], d)
}

/// The ridge-regularized within-view covariance
/// `X_i X_iᵀ + reg · (tr(X_i X_iᵀ) / p_i) · I` of a centered view.
pub fn regularized_covariance(centered: &Matrix, reg: f64) -> Matrix {
    let mut cov = centered.mul_transpose(centered).expect("same column count");
    let p = cov.rows();
    let ridge = reg * cov.trace() / p as f64;
    for k in 0..p {
        cov.set(k, k, cov.get(k, k) + ridge);
    }
    cov
}

/// Fits multi-view CCA: solves `M w = λ D w` with `D` the block diagonal of
/// regularized within-view covariances, normalized so that `WᵀDW = I`.
pub fn fit_mcca(views: &[Matrix], d: usize, reg: f64) -> Result<EmbeddingModel> {
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "regularization must be finite and >= 0, got {reg}"
        )));
    }
    check_aligned(views)?;
    let (centered, means) = center_all(views);
    let cov = build_cross_covariance(&centered)?;
    check_d(d, cov.m.rows())?;

    let inv_sqrt: Vec<Matrix> = centered
        .iter()
        .enumerate()
        .map(|(i, x)| inverse_sqrt(&regularized_covariance(x, reg), i))
        .collect::<Result<_>>()?;

    // S = D^{-1/2} M D^{-1/2}, block by block.
    let c = views.len();
    let total = cov.m.rows();
    let mut s = Matrix::zeros(total, total);
    for i in 0..c {
        for j in 0..c {
            if i == j {
                continue;
            }
            let block = inv_sqrt[i].matmul(&cov.block(i, j))?.matmul(&inv_sqrt[j])?;
            for r in 0..block.rows() {
                for col in 0..block.cols() {
                    s.set(cov.offsets[i] + r, cov.offsets[j] + col, block.get(r, col));
                }
            }
        }
    }
    // Round-off in the two products leaves S slightly asymmetric.
    let s = Matrix::from_fn(total, total, |r, col| 0.5 * (s.get(r, col) + s.get(col, r)));
    let eig = symmetric_eig(&s, d)?;
    let projections = split_blocks(&eig.eigenvectors, &cov.offsets)
        .iter()
        .zip(&inv_sqrt)
        .map(|(u, h)| h.matmul(u))
        .collect::<Result<_>>()?;
    Ok(EmbeddingModel {
        method: Method::Mcca,
        d,
        view_dims: views.iter().map(Matrix::rows).collect(),
        means,
        projections,
        eigenvalues: eig.eigenvalues,
        view_names: Vec::new(),
    })
}

fn inverse_sqrt(cov: &Matrix, view: usize) -> Result<Matrix> {
    let p = cov.rows();
    let eig = symmetric_eig(cov, p)?;
    let largest = eig.eigenvalues[0];
    let smallest = eig.eigenvalues[p - 1];
    if largest <= 0.0 || smallest <= 1e-13 * largest {
        return Err(Error::Singular {
            view,
            min_eigenvalue: smallest,
        });
    }
    let v = &eig.eigenvectors;
    let scaled = Matrix::from_fn(p, p, |r, c| v.get(r, c) / eig.eigenvalues[c].sqrt());
    scaled.mul_transpose(v)
}

/// `WᵀDW` for a model fitted on `views`, used to check MCCA whitening.
pub fn whitened_gram(model: &EmbeddingModel, views: &[Matrix], reg: f64) -> Result<Matrix> {
    check_aligned(views)?;
    let mut gram = Matrix::zeros(model.d, model.d);
    for (x, w) in views.iter().zip(&model.projections) {
        let cov = regularized_covariance(&x.center().0, reg);
        let part = w.transpose_mul(&cov.matmul(w)?)?;
        gram = Matrix::from_fn(model.d, model.d, |r, c| gram.get(r, c) + part.get(r, c));
    }
    Ok(gram)
}
