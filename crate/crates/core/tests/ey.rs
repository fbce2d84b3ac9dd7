use gepey::cca::build_gep_from_covariance;
use gepey::linalg::{principal_angles, Matrix};
use gepey::optim::OptimizerConfig;
use gepey::synth::{self, Rng};
use gepey::train::{train, DataSource, Method, TrainConfig};
use gepey::{ey_evaluate, ey_loss, ey_loss_stochastic, extract_spectrum, gep_solve, GepPair, MultiviewBatch, WeightSet};

fn random_pair(rng: &mut Rng, d: usize) -> GepPair {
    let lambdas: Vec<f64> = (0..d).map(|_| synth::uniform(rng, -1.0, 2.0)).collect();
    synth::gep_with_spectrum(rng, &lambdas, 0.5, 2.0)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = synth::rng(21);
    for _ in 0..50 {
        let d = 2 + (synth::uniform(&mut rng, 0.0, 7.0) as usize);
        let k = 1 + (synth::uniform(&mut rng, 0.0, d.min(4) as f64) as usize);
        let pair = random_pair(&mut rng, d);
        let u = synth::gaussian_matrix(&mut rng, d, k);
        let g = ey_loss(&pair, &u).unwrap().gradient;
        let h = 1e-6;
        let numeric = Matrix::from_fn(d, k, |r, c| {
            let mut up = u.clone();
            up[(r, c)] += h;
            let mut down = u.clone();
            down[(r, c)] -= h;
            (ey_loss(&pair, &up).unwrap().loss - ey_loss(&pair, &down).unwrap().loss) / (2.0 * h)
        });
        let rel = (&g - &numeric).frobenius_norm() / numeric.frobenius_norm();
        assert!(rel <= 1e-4, "relative error {rel}");
    }
}

#[test]
fn loss_terms_add_up() {
    let mut rng = synth::rng(22);
    let pair = random_pair(&mut rng, 6);
    let u = synth::gaussian_matrix(&mut rng, 6, 3);
    let e = ey_loss(&pair, &u).unwrap();
    assert!((e.loss - (-e.reward + e.norm_penalty + e.orth_penalty)).abs() < 1e-10);
}

#[test]
fn loss_is_rotation_invariant() {
    let mut rng = synth::rng(23);
    for _ in 0..20 {
        let pair = random_pair(&mut rng, 7);
        let u = synth::gaussian_matrix(&mut rng, 7, 3);
        let r = synth::random_orthogonal(&mut rng, 3);
        let a = ey_loss(&pair, &u).unwrap().loss;
        let b = ey_loss(&pair, &u.matmul(&r)).unwrap().loss;
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn minimum_value_at_the_oracle() {
    let mut rng = synth::rng(24);
    let lambdas = [2.0, 1.5, 0.7, 0.2, -0.4];
    let pair = synth::gep_with_spectrum(&mut rng, &lambdas, 0.5, 2.0);
    let (spec, q) = gep_solve(&pair, 3).unwrap();
    let roots: Vec<f64> = spec.values().iter().map(|l| l.sqrt()).collect();
    let u = q.matmul(&Matrix::from_diag(&roots));
    let e = ey_loss(&pair, &u).unwrap();
    assert!((e.loss + spec.sum_squares()).abs() < 1e-10);
    assert!(e.gradient.max_abs() < 1e-9);
}

#[test]
fn extracted_values_interlace() {
    let mut rng = synth::rng(25);
    for _ in 0..30 {
        let pair = random_pair(&mut rng, 8);
        let (truth, _) = gep_solve(&pair, 8).unwrap();
        let u_hat = synth::gaussian_matrix(&mut rng, 8, 3);
        let (spec, v) = extract_spectrum(&pair, &u_hat).unwrap();
        for (got, top) in spec.values().iter().zip(truth.values()) {
            assert!(*got <= top + 1e-10);
        }
        let gram = v.t_matmul(&pair.b().matmul(&v));
        assert!((&gram - &Matrix::identity(3)).max_abs() < 1e-10);
    }
}

#[test]
fn full_batch_training_finds_the_same_optimum_from_every_start() {
    let mut rng = synth::rng(26);
    let pair = synth::gep_with_spectrum(&mut rng, &[1.6, 1.2, 0.8, 0.3, 0.1, -0.2], 0.8, 1.5);
    let (spec, u_star) = gep_solve(&pair, 3).unwrap();
    for seed in 0..5 {
        let cfg = TrainConfig {
            k: 3,
            method: Method::Ey,
            optimizer: OptimizerConfig::sgd(0.02),
            seed,
        };
        let (u, _) = train(DataSource::Population(&pair), cfg, 6000).unwrap();
        let loss = ey_loss(&pair, &u).unwrap().loss;
        assert!((loss + spec.sum_squares()).abs() < 1e-6, "seed {seed}: {loss}");
        let angles = principal_angles(&u, &u_star, None).unwrap();
        assert!(angles.iter().all(|a| *a < 1e-3));
    }
}

fn sample_gaussian(rng: &mut Rng, root: &Matrix, m: usize, dims: &[usize]) -> MultiviewBatch {
    let x = synth::gaussian_matrix(rng, m, root.rows()).matmul(root);
    let mut views = Vec::new();
    let mut c0 = 0;
    for &d in dims {
        views.push(x.columns(c0..c0 + d));
        c0 += d;
    }
    MultiviewBatch::new(views).unwrap()
}

#[test]
fn stochastic_loss_and_gradient_are_unbiased() {
    let mut rng = synth::rng(27);
    let dims = [3, 2];
    let root = synth::gaussian_matrix(&mut rng, 5, 5);
    let sigma = root.t_matmul(&root);
    let alpha = [0.2, 0.5];
    let pop = build_gep_from_covariance(&sigma, &dims, &alpha).unwrap();
    let u = synth::gaussian_matrix(&mut rng, 5, 2);
    let weights = WeightSet::from_stacked(&u, &dims).unwrap();
    let target = ey_evaluate(&pop, &pop, &u).unwrap();
    let n = 4000;
    let mut losses = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    for _ in 0..n {
        let b1 = sample_gaussian(&mut rng, &root, 8, &dims);
        let b2 = sample_gaussian(&mut rng, &root, 8, &dims);
        let e = ey_loss_stochastic(&b1, &b2, &weights, &alpha).unwrap();
        losses.push(e.loss);
        grads.push(e.gradient);
    }
    let within = |xs: &[f64], target: f64| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        (m - target).abs() <= 3.0 * (var / xs.len() as f64).sqrt()
    };
    assert!(within(&losses, target.loss));
    for r in 0..5 {
        for c in 0..2 {
            let xs: Vec<f64> = grads.iter().map(|g| g[(r, c)]).collect();
            assert!(within(&xs, target.gradient[(r, c)]), "entry ({r}, {c})");
        }
    }
}
