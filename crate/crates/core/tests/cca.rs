use gepey::cca::{
    build_gep, canonical_correlations, cca_exact, fast_linear_gradient, interlace_check, metric_pcc, metric_tcc,
    metric_tmcc, projected_spectrum,
};
use gepey::linalg::{empirical_cov, svd, Matrix};
use gepey::synth::{self, Rng};
use gepey::{ey_evaluate, DenseEstimate, MultiviewBatch, Spectrum, WeightSet};

fn views(rng: &mut Rng, n: usize, dims: &[usize], latent: usize) -> MultiviewBatch {
    let z = synth::gaussian_matrix(rng, n, latent);
    MultiviewBatch::new(
        dims.iter()
            .map(|&d| {
                let mut x = z.matmul(&synth::gaussian_matrix(rng, latent, d));
                x += &synth::gaussian_matrix(rng, n, d).scale(1.5);
                x
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn canonical_correlations_survive_invertible_maps() {
    let mut rng = synth::rng(41);
    for _ in 0..10 {
        let b = views(&mut rng, 200, &[4, 3], 2);
        let m1 = synth::random_spd(&mut rng, 4, 0.3, 3.0);
        let m2 = synth::gaussian_matrix(&mut rng, 3, 3);
        let mapped = MultiviewBatch::new(vec![b.view(0).matmul(&m1), b.view(1).matmul(&m2)]).unwrap();
        let (a, _) = cca_exact(&b, 3, &[0.0, 0.0]).unwrap();
        let (c, _) = cca_exact(&mapped, 3, &[0.0, 0.0]).unwrap();
        for (x, y) in a.values().iter().zip(c.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

#[test]
fn cca_agrees_with_whitened_svd() {
    let mut rng = synth::rng(42);
    let b = views(&mut rng, 300, &[5, 4], 3);
    let (spec, w) = cca_exact(&b, 4, &[0.0, 0.0]).unwrap();
    let reference = canonical_correlations(b.view(0), b.view(1)).unwrap();
    for (x, y) in spec.values().iter().zip(&reference) {
        assert!((x - y).abs() < 1e-9);
    }
    let z = b.project(&w).unwrap();
    let c = empirical_cov(&z[0], &z[1]).unwrap();
    let v = empirical_cov(&z[0], &z[0]).unwrap();
    assert!((&c - &Matrix::from_diag(spec.values())).max_abs() < 1e-9);
    assert!((&v - &Matrix::identity(4)).max_abs() < 1e-9);
    assert!((metric_tcc(&z[0], &z[1], 4).unwrap() - spec.sum()).abs() < 1e-9);
}

#[test]
fn pls_values_are_cross_covariance_singular_values() {
    let mut rng = synth::rng(43);
    let b = views(&mut rng, 100, &[4, 6], 2);
    let (spec, _) = cca_exact(&b, 3, &[1.0, 1.0]).unwrap();
    let s = svd(&empirical_cov(b.view(0), b.view(1)).unwrap()).singular_values;
    for (x, y) in spec.values().iter().zip(&s) {
        assert!((x - y).abs() < 1e-9 * y.max(1.0));
    }
}

#[test]
fn fast_gradient_matches_dense_covariance_gradient() {
    let mut rng = synth::rng(44);
    for trial in 0..20 {
        let dims: &[usize] = if trial % 2 == 0 { &[5, 4] } else { &[3, 4, 2] };
        let b1 = views(&mut rng, 40, dims, 2);
        let b2 = views(&mut rng, 40, dims, 2);
        let alpha: Vec<f64> = dims.iter().map(|_| synth::uniform(&mut rng, 0.0, 1.0)).collect();
        let total: usize = dims.iter().sum();
        let u = synth::gaussian_matrix(&mut rng, total, 3);
        let ws = WeightSet::from_stacked(&u, dims).unwrap();
        let fast = fast_linear_gradient(&b1, &b2, &ws, &alpha).unwrap();
        let d1 = DenseEstimate::from_batch(&b1, &alpha).unwrap();
        let d2 = DenseEstimate::from_batch(&b2, &alpha).unwrap();
        let dense = ey_evaluate(&d1, &d2, &u).unwrap().gradient;
        let dense_views = WeightSet::from_stacked(&dense, dims).unwrap();
        for (f, d) in fast.iter().zip(dense_views.views()) {
            assert!((f - d).max_abs() <= 1e-10);
        }
    }
}

#[test]
fn random_projections_interlace() {
    let mut rng = synth::rng(45);
    for _ in 0..5 {
        let b = views(&mut rng, 150, &[5, 4, 3], 2);
        for _ in 0..40 {
            let p: Vec<Matrix> = b.dims().iter().map(|&d| synth::gaussian_matrix(&mut rng, d, 2)).collect();
            let r = interlace_check(&b, &p).unwrap();
            assert!(r.holds, "gaps {:?}", r.gaps);
        }
    }
}

#[test]
fn planted_projection_hits_equality() {
    let mut rng = synth::rng(46);
    let b = views(&mut rng, 150, &[5, 4], 2);
    let (_, w) = cca_exact(&b, 2, &[0.0, 0.0]).unwrap();
    let mix = synth::random_spd(&mut rng, 2, 0.5, 2.0);
    let p: Vec<Matrix> = w.views().iter().map(|v| v.matmul(&mix)).collect();
    assert!(interlace_check(&b, &p).unwrap().equality);
}

#[test]
fn projected_spectrum_of_oracle_weights_is_the_oracle() {
    let mut rng = synth::rng(47);
    let b = views(&mut rng, 200, &[4, 4, 3], 2);
    let alpha = [0.0; 3];
    let (spec, w) = cca_exact(&b, 2, &alpha).unwrap();
    let p = projected_spectrum(&b, &w, &alpha).unwrap().truncate(2);
    assert!((metric_pcc(&p, &spec).unwrap() - 1.0).abs() < 1e-9);
    let z = b.project(&w).unwrap();
    let tmcc = metric_tmcc(&z).unwrap();
    assert!(tmcc > 0.0 && tmcc <= 2.0);
}

#[test]
fn pcc_clamps_negative_values() {
    let learned = Spectrum::new(vec![0.5, -0.2]);
    let oracle = Spectrum::new(vec![0.6, 0.4]);
    assert!((metric_pcc(&learned, &oracle).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn gep_blocks_have_the_expected_structure() {
    let mut rng = synth::rng(48);
    let b = views(&mut rng, 50, &[2, 3], 1);
    let pair = build_gep(&b, &[0.0, 1.0]).unwrap();
    assert_eq!(pair.a().block(0, 0, 2, 2), Matrix::zeros(2, 2));
    assert_eq!(pair.b().block(2, 2, 3, 3), Matrix::identity(3));
    assert_eq!(pair.b().block(0, 2, 2, 3), Matrix::zeros(2, 3));
}
