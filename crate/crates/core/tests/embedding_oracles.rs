mod common;

use common::{projector, rng, to_na, uniform};
use mbfa::embedding::whitened_gram;
use mbfa::{build_cross_covariance, fit_ibfa, fit_mbfa, fit_mcca, symmetric_eig, Matrix};
use nalgebra::DMatrix;

/// Largest value of `wᵀMw` over a (θ, φ) grid on the unit 2-sphere.
fn sphere_grid_max(m: &DMatrix<f64>, step: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let n_theta = (std::f64::consts::PI / step).ceil() as usize;
    let n_phi = (2.0 * std::f64::consts::PI / step).ceil() as usize;
    for i in 0..=n_theta {
        let theta = (i as f64 * step).min(std::f64::consts::PI);
        let (st, ct) = theta.sin_cos();
        for j in 0..n_phi {
            let (sp, cp) = (j as f64 * step).sin_cos();
            let w = [st * cp, st * sp, ct];
            let mut q = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    q += w[r] * m[(r, c)] * w[c];
                }
            }
            best = best.max(q);
        }
    }
    best
}

#[test]
fn brute_force_sphere_matches_fit() {
    for (seed, dims) in [(1u64, vec![1, 2]), (2, vec![2, 1]), (3, vec![1, 1, 1])] {
        let mut g = rng(seed);
        let views: Vec<Matrix> = dims.iter().map(|&p| uniform(p, 6, &mut g)).collect();
        let model = fit_mbfa(&views, 1).unwrap();
        let centered: Vec<Matrix> = views.iter().map(|v| v.center().0).collect();
        let m = to_na(&build_cross_covariance(&centered).unwrap().m);
        let grid = sphere_grid_max(&m, 1e-3);
        let objective = model.objective_value(&views).unwrap();
        assert!(
            (objective - grid).abs() <= 1e-4,
            "dims {dims:?}: fit {objective}, grid {grid}"
        );
        assert!(objective >= grid - 1e-12);
    }
}

#[test]
fn two_view_fit_matches_svd() {
    for seed in 0..10 {
        let mut g = rng(100 + seed);
        let (p1, p2, d) = (5, 4, 3);
        let x1 = uniform(p1, 25, &mut g);
        let x2 = uniform(p2, 25, &mut g);
        let model = fit_ibfa(&x1, &x2, d).unwrap();

        let c = to_na(&x1.center().0) * to_na(&x2.center().0).transpose();
        let svd = c.svd(true, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let mut oracle = DMatrix::zeros(p1 + p2, d);
        for (k, &i) in order.iter().take(d).enumerate() {
            let sigma = svd.singular_values[i];
            assert!((model.eigenvalues[k] - sigma).abs() <= 1e-8 * sigma);
            for r in 0..p1 {
                oracle[(r, k)] = u[(r, i)] / 2f64.sqrt();
            }
            for r in 0..p2 {
                oracle[(p1 + r, k)] = vt[(i, r)] / 2f64.sqrt();
            }
        }
        let w = to_na(&model.stacked_projection());
        assert!((projector(&w) - projector(&oracle)).norm() <= 1e-6);
    }
}

#[test]
fn identical_views_share_the_gram_spectrum() {
    let mut g = rng(7);
    let x = uniform(4, 30, &mut g);
    let model = fit_ibfa(&x, &x, 4).unwrap();
    let xc = x.center().0;
    let gram = symmetric_eig(&xc.mul_transpose(&xc).unwrap(), 4).unwrap();
    for (a, b) in model.eigenvalues.iter().zip(&gram.eigenvalues) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
    }
}

#[test]
fn objective_equals_eigenvalue_sum() {
    for (seed, dims) in [(11u64, vec![3, 4]), (12, vec![2, 5, 3]), (13, vec![4, 2, 2, 3])] {
        let mut g = rng(seed);
        let views: Vec<Matrix> = dims.iter().map(|&p| uniform(p, 40, &mut g)).collect();
        for d in 1..=4 {
            let model = fit_mbfa(&views, d).unwrap();
            let sum: f64 = model.eigenvalues.iter().sum();
            let objective = model.objective_value(&views).unwrap();
            assert!((objective - sum).abs() <= 1e-8 * sum.abs(), "{objective} vs {sum}");
            assert!(model.stacked_orthonormality_defect() <= 1e-8);
        }
    }
}

#[test]
fn two_view_spectrum_is_symmetric() {
    let mut g = rng(21);
    let views = vec![uniform(3, 20, &mut g), uniform(3, 20, &mut g)];
    let model = fit_mbfa(&views, 6).unwrap();
    let scale = model.eigenvalues[0];
    for k in 0..3 {
        assert!((model.eigenvalues[k] + model.eigenvalues[5 - k]).abs() <= 1e-8 * scale);
    }
}

#[test]
fn objective_grows_with_d_over_positive_eigenvalues() {
    let mut g = rng(31);
    let views = vec![uniform(4, 30, &mut g), uniform(3, 30, &mut g), uniform(2, 30, &mut g)];
    let full = fit_mbfa(&views, 9).unwrap();
    let mut previous = f64::NEG_INFINITY;
    for d in 1..=9 {
        if d > 1 && full.eigenvalues[d - 1] < 0.0 {
            break;
        }
        let objective = fit_mbfa(&views, d).unwrap().objective_value(&views).unwrap();
        assert!(objective >= previous - 1e-10 * objective.abs());
        previous = objective;
    }
}

#[test]
fn view_permutation_permutes_blocks() {
    let mut g = rng(41);
    let views = vec![uniform(3, 25, &mut g), uniform(2, 25, &mut g), uniform(4, 25, &mut g)];
    let perm = [2, 0, 1];
    let permuted: Vec<Matrix> = perm.iter().map(|&i| views[i].clone()).collect();
    let a = fit_mbfa(&views, 3).unwrap();
    let b = fit_mbfa(&permuted, 3).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
    }
    for (slot, &i) in perm.iter().enumerate() {
        let diff = b.projections[slot].sub(&a.projections[i]).unwrap().max_abs();
        assert!(diff <= 1e-8, "block {i} moved to {slot} differs by {diff}");
    }
}

#[test]
fn repeated_eigenvalues_compare_as_subspaces() {
    let mut g = rng(51);
    let n = 7;
    let q = to_na(&uniform(n, n, &mut g)).qr().q();
    let values = [3.0, 3.0, 3.0, 1.0, -2.0, -2.0, 0.5];
    let s = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&values)) * q.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let ours = symmetric_eig(&Matrix::from_fn(n, n, |i, j| s[(i, j)]), n).unwrap();
    let oracle = s.clone().symmetric_eigen();

    let v = to_na(&ours.eigenvectors);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let base = ours.eigenvalues[start];
        while end < n && (ours.eigenvalues[end] - base).abs() <= 1e-8 * base.abs().max(1.0) {
            end += 1;
        }
        let ours_block = v.columns(start, end - start).into_owned();
        let idx: Vec<usize> = (0..n)
            .filter(|&i| (oracle.eigenvalues[i] - base).abs() <= 1e-8 * base.abs().max(1.0))
            .collect();
        assert_eq!(idx.len(), end - start, "cluster at {base}");
        let oracle_block = DMatrix::from_fn(n, idx.len(), |r, c| oracle.eigenvectors[(r, idx[c])]);
        assert!((projector(&ours_block) - projector(&oracle_block)).norm() <= 1e-6);
        start = end;
    }
}

#[test]
fn mcca_is_scale_invariant_and_mbfa_is_not() {
    let mut g = rng(61);
    let views = vec![uniform(3, 40, &mut g), uniform(4, 40, &mut g), uniform(2, 40, &mut g)];
    let mut scaled = views.clone();
    scaled[1] = scaled[1].scaled(1000.0);

    let a = fit_mcca(&views, 3, 1e-6).unwrap();
    let b = fit_mcca(&scaled, 3, 1e-6).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
    for (model, data) in [(&a, &views), (&b, &scaled)] {
        let gram = whitened_gram(model, data, 1e-6).unwrap();
        assert!(gram.sub(&Matrix::identity(3)).unwrap().max_abs() <= 1e-6);
    }

    let ma = fit_mbfa(&views, 3).unwrap();
    let mb = fit_mbfa(&scaled, 3).unwrap();
    assert!(mb.eigenvalues[0] > 10.0 * ma.eigenvalues[0]);
}

#[test]
fn mcca_reaches_full_correlation_on_shared_latents() {
    let mut g = rng(71);
    let latent = uniform(4, 60, &mut g);
    let a = uniform(4, 4, &mut g);
    let b = uniform(4, 4, &mut g);
    let views = vec![a.matmul(&latent).unwrap(), b.matmul(&latent).unwrap()];
    let model = fit_mcca(&views, 1, 1e-6).unwrap();
    assert!((model.eigenvalues[0] - 1.0).abs() <= 1e-3);
}
