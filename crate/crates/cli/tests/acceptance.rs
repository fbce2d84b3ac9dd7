//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use gepey::cca::{build_gep_from_covariance, cca_exact, fast_linear_gradient, interlace_check, metric_pcc};
use gepey::deep::{backward_ey, recovery_gap, train_deep, DeepConfig, DeepModel, Mlp, MlpGrad};
use gepey::linalg::{empirical_cov, principal_angles, sym_eig, Matrix};
use gepey::optim::{OptimizerConfig, OptimizerKind};
use gepey::ssl::{
    barlow_twins_loss, bt_collapse_constant, check_cca_equivalence, collapse_scan, fit_vicreg, vicreg_loss,
    vr_collapse_threshold, CollapseMethod, EquivalenceTolerances, FitOptions, ScanBudget, VicregParams, COLLAPSE_TOL,
};
use gepey::synth::{self, Rng};
use gepey::train::Sampling;
use gepey::{
    ey_evaluate, ey_loss, ey_loss_stochastic, extract_spectrum, gep_solve, DenseEstimate, MultiviewBatch, WeightSet,
};
use gepey_cli::gen::{gen_augmented, gen_gaussian};
use gepey_cli::io;
use gepey_cli::run::{run, MethodArg, RunConfig, Task};
use gepey_cli::verify::{fit_population_ey, random_gep};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1 and 2: full-batch EY reaches -Σλ² from every start.

fn instance_shape(rng: &mut Rng) -> (usize, usize) {
    let d = 3 + (synth::uniform(rng, 0.0, 10.0) as usize);
    let k = (1 + (synth::uniform(rng, 0.0, 4.0) as usize)).min(d - 1);
    (d, k)
}

fn ey_optimum() -> Outcome {
    let start = Instant::now();
    let mut rng = synth::rng(101);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let (d, k) = instance_shape(&mut rng);
        let pair = random_gep(&mut rng, d, k);
        let target = -gep_solve(&pair, k).unwrap().0.sum_squares();
        let u = fit_population_ey(&pair, k, 1000 + i, 200_000).unwrap();
        worst = worst.max((ey_loss(&pair, &u).unwrap().loss - target).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-3 && secs < 30.0,
        format!("50 GEPs, max |loss + sum lambda^2| = {worst:.2e}, {secs:.2} s"),
    )
}

fn no_spurious_minima() -> Outcome {
    let mut rng = synth::rng(101);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (d, k) = instance_shape(&mut rng);
        let pair = random_gep(&mut rng, d, k);
        let target = -gep_solve(&pair, k).unwrap().0.sum_squares();
        for restart in 0..20 {
            let u = fit_population_ey(&pair, k, 5000 + restart, 200_000).unwrap();
            worst = worst.max((ey_loss(&pair, &u).unwrap().loss - target).abs());
        }
    }
    outcome(worst <= 1e-3, format!("50 GEPs x 20 restarts, max distance to optimum {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 3: gradients against central differences.

fn central_difference(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = numeric.iter().map(|v| v * v).sum();
    (diff / norm).sqrt()
}

fn latent_views(rng: &mut Rng, n: usize, d1: usize, d2: usize) -> MultiviewBatch {
    let z = synth::gaussian_matrix(rng, n, 2);
    let mut x1 = z.matmul(&synth::gaussian_matrix(rng, 2, d1));
    x1 += &synth::gaussian_matrix(rng, n, d1);
    let mut x2 = z.matmul(&synth::gaussian_matrix(rng, 2, d2));
    x2 += &synth::gaussian_matrix(rng, n, d2);
    MultiviewBatch::new(vec![x1, x2]).unwrap()
}

fn split_views(flat: &[f64], shapes: &[(usize, usize)]) -> WeightSet {
    let mut pos = 0;
    let views = shapes
        .iter()
        .map(|&(r, c)| {
            let m = Matrix::new(r, c, flat[pos..pos + r * c].to_vec()).unwrap();
            pos += r * c;
            m
        })
        .collect();
    WeightSet::new(views).unwrap()
}

fn flat_views(ms: &[Matrix]) -> Vec<f64> {
    ms.iter().flat_map(|m| m.as_slice().to_vec()).collect()
}

fn gradient_checks() -> Outcome {
    let mut rng = synth::rng(103);
    let mut worst = [0.0_f64; 4];
    // EY loss on random GEPs.
    for _ in 0..20 {
        let d = 2 + (synth::uniform(&mut rng, 0.0, 8.0) as usize);
        let k = 1 + (synth::uniform(&mut rng, 0.0, d.min(4) as f64) as usize);
        let lambdas: Vec<f64> = (0..d).map(|_| synth::uniform(&mut rng, -1.0, 2.0)).collect();
        let pair = synth::gep_with_spectrum(&mut rng, &lambdas, 0.5, 2.0);
        let u = synth::gaussian_matrix(&mut rng, d, k);
        let g = ey_loss(&pair, &u).unwrap().gradient;
        let num = central_difference(u.as_slice(), |x| {
            ey_loss(&pair, &Matrix::new(d, k, x.to_vec()).unwrap()).unwrap().loss
        });
        worst[0] = worst[0].max(relative_error(g.as_slice(), &num));
    }
    // VICReg away from the variance hinge.
    let params = VicregParams::new(1.0, 0.7, 1.3).unwrap();
    let mut done = 0;
    while done < 20 {
        let batch = latent_views(&mut rng, 30, 4, 3);
        let s = synth::uniform(&mut rng, 0.1, 0.8);
        let w = WeightSet::new(vec![
            synth::gaussian_matrix(&mut rng, 4, 2).scale(s),
            synth::gaussian_matrix(&mut rng, 3, 2).scale(s),
        ])
        .unwrap();
        let z = batch.project(&w).unwrap();
        if z.iter().any(|zi| {
            empirical_cov(zi, zi)
                .unwrap()
                .diag()
                .iter()
                .any(|v| (v.sqrt() - 1.0).abs() < 1e-3)
        }) {
            continue;
        }
        let shapes = [(4, 2), (3, 2)];
        let g = flat_views(&vicreg_loss(&batch, &w, &params).unwrap().gradients);
        let num = central_difference(&flat_views(w.views()), |x| {
            vicreg_loss(&batch, &split_views(x, &shapes), &params).unwrap().loss
        });
        worst[1] = worst[1].max(relative_error(&g, &num));
        done += 1;
    }
    // Barlow Twins.
    for _ in 0..20 {
        let batch = latent_views(&mut rng, 30, 4, 3);
        let beta = synth::uniform(&mut rng, 0.01, 1.0);
        let w = WeightSet::new(vec![synth::gaussian_matrix(&mut rng, 4, 3), synth::gaussian_matrix(&mut rng, 3, 3)]).unwrap();
        let shapes = [(4, 3), (3, 3)];
        let g = flat_views(&barlow_twins_loss(&batch, &w, beta).unwrap().gradients);
        let num = central_difference(&flat_views(w.views()), |x| {
            barlow_twins_loss(&batch, &split_views(x, &shapes), beta).unwrap().loss
        });
        worst[2] = worst[2].max(relative_error(&g, &num));
    }
    // Deep networks (parameters jittered so no unit sits on the ReLU kink).
    for trial in 0..20 {
        let b1 = latent_views(&mut rng, 16, 3, 3);
        let b2 = latent_views(&mut rng, 16, 3, 3);
        let widths = [3, 6, 4, 2];
        let mut model = if trial % 2 == 0 {
            DeepModel::untied(vec![Mlp::random(&mut rng, &widths).unwrap(), Mlp::random(&mut rng, &widths).unwrap()]).unwrap()
        } else {
            DeepModel::tied(Mlp::random(&mut rng, &widths).unwrap())
        };
        let theta: Vec<f64> = model.to_flat().iter().map(|v| v + 0.3 * synth::normal(&mut rng)).collect();
        model.set_flat(&theta).unwrap();
        let g: Vec<f64> = backward_ey(&model, &b1, &b2).unwrap().1.iter().flat_map(MlpGrad::to_flat).collect();
        let mut probe = model.clone();
        let num = central_difference(&theta, |x| {
            probe.set_flat(x).unwrap();
            backward_ey(&probe, &b1, &b2).unwrap().0
        });
        worst[3] = worst[3].max(relative_error(&g, &num));
    }
    outcome(
        worst.iter().all(|w| *w <= 1e-4),
        format!(
            "max relative error over 20 points each: ey {:.1e}, vicreg {:.1e}, barlow twins {:.1e}, deep {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// ---------------------------------------------------------------------------
// 4: Monte-Carlo unbiasedness.

fn sample_views(rng: &mut Rng, root: &Matrix, m: usize, dims: &[usize]) -> MultiviewBatch {
    let x = synth::gaussian_matrix(rng, m, root.rows()).matmul(root);
    let mut c0 = 0;
    let views = dims
        .iter()
        .map(|&d| {
            let v = x.columns(c0..c0 + d);
            c0 += d;
            v
        })
        .collect();
    MultiviewBatch::new(views).unwrap()
}

fn z_score(xs: &[f64], target: f64) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean - target).abs() / (var / n).sqrt()
}

fn unbiasedness() -> Outcome {
    let mut rng = synth::rng(104);
    let dims = [3, 3];
    let root = synth::gaussian_matrix(&mut rng, 6, 6);
    let sigma = root.t_matmul(&root);
    let alpha = [0.1, 0.3];
    let pop = build_gep_from_covariance(&sigma, &dims, &alpha).unwrap();
    let u = synth::gaussian_matrix(&mut rng, 6, 2).scale(0.5);
    let weights = WeightSet::from_stacked(&u, &dims).unwrap();
    let lr = 0.01;
    let target = ey_evaluate(&pop, &pop, &u).unwrap();
    let mut target_update = u.clone();
    target_update.axpy(-lr, &target.gradient);
    let n = 10_000;
    let mut losses = Vec::with_capacity(n);
    let mut updates = Vec::with_capacity(n);
    for _ in 0..n {
        let b1 = sample_views(&mut rng, &root, 10, &dims);
        let b2 = sample_views(&mut rng, &root, 10, &dims);
        let e = ey_loss_stochastic(&b1, &b2, &weights, &alpha).unwrap();
        losses.push(e.loss);
        let mut next = u.clone();
        next.axpy(-lr, &e.gradient);
        updates.push(next);
    }
    let z_loss = z_score(&losses, target.loss);
    let mut z_update = 0.0_f64;
    for r in 0..6 {
        for c in 0..2 {
            let xs: Vec<f64> = updates.iter().map(|m| m[(r, c)]).collect();
            z_update = z_update.max(z_score(&xs, target_update[(r, c)]));
        }
    }
    outcome(
        z_loss <= 3.0 && z_update <= 3.0,
        format!("10^4 batch pairs: loss off by {z_loss:.2} SE, worst update entry {z_update:.2} SE"),
    )
}

// ---------------------------------------------------------------------------
// 5: fast gradient equals the dense one and scales linearly.

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn min_time(reps: usize, mut f: impl FnMut()) -> f64 {
    f();
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn fast_path() -> Outcome {
    let mut rng = synth::rng(105);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let b1 = latent_views(&mut rng, 40, 6, 5);
        let b2 = latent_views(&mut rng, 40, 6, 5);
        let alpha = [synth::uniform(&mut rng, 0.0, 1.0), synth::uniform(&mut rng, 0.0, 1.0)];
        let u = synth::gaussian_matrix(&mut rng, 11, 3);
        let ws = WeightSet::from_stacked(&u, &[6, 5]).unwrap();
        let fast = fast_linear_gradient(&b1, &b2, &ws, &alpha).unwrap();
        let d1 = DenseEstimate::from_batch(&b1, &alpha).unwrap();
        let d2 = DenseEstimate::from_batch(&b2, &alpha).unwrap();
        let dense = ey_evaluate(&d1, &d2, &u).unwrap().gradient;
        let fast_stacked = Matrix::vstack(&fast.iter().collect::<Vec<_>>());
        worst = worst.max((&fast_stacked - &dense).max_abs());
    }
    let (m, k) = (64, 5);
    let ds = [100.0, 200.0, 400.0, 800.0];
    let mut fast_times = Vec::new();
    let mut dense_times = Vec::new();
    for &d in &ds {
        let half = d as usize / 2;
        let b1 = MultiviewBatch::new(vec![synth::gaussian_matrix(&mut rng, m, half), synth::gaussian_matrix(&mut rng, m, half)]).unwrap();
        let b2 = MultiviewBatch::new(vec![synth::gaussian_matrix(&mut rng, m, half), synth::gaussian_matrix(&mut rng, m, half)]).unwrap();
        let u = synth::gaussian_matrix(&mut rng, 2 * half, k);
        let ws = WeightSet::from_stacked(&u, &[half, half]).unwrap();
        fast_times.push(min_time(30, || {
            std::hint::black_box(fast_linear_gradient(&b1, &b2, &ws, &[0.0, 0.0]).unwrap());
        }));
        dense_times.push(min_time(3, || {
            let d1 = DenseEstimate::from_batch(&b1, &[0.0, 0.0]).unwrap();
            let d2 = DenseEstimate::from_batch(&b2, &[0.0, 0.0]).unwrap();
            std::hint::black_box(ey_evaluate(&d1, &d2, &u).unwrap());
        }));
    }
    let slope = loglog_slope(&ds, &fast_times);
    let dense_slope = loglog_slope(&ds, &dense_times);
    outcome(
        worst <= 1e-10 && slope <= 1.3,
        format!(
            "max |fast - dense| = {worst:.1e}; time-vs-D slope {slope:.2} (dense covariance path {dense_slope:.2})"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6: stochastic CCA quality and ordering against the baselines.

fn best_pcc(views: &[Matrix], method: MethodArg) -> f64 {
    [0.01, 0.02, 0.03, 0.05, 0.1]
        .iter()
        .map(|&lr| {
            let mut c = RunConfig::new(method, Task::Cca, 5);
            c.batch_size = Some(100);
            c.epochs = Some(1);
            c.lr = lr;
            c.eval_every = 1000;
            let out = run(&c, views, None).unwrap();
            let last = out.csv.lines().last().unwrap().to_string();
            last.split(',').nth(5).unwrap().parse::<f64>().unwrap()
        })
        .filter(|p| p.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn stochastic_cca() -> Outcome {
    let g = gen_gaussian(&[50, 50], &[0.9, 0.8, 0.7, 0.6, 0.5], 10_000, 106).unwrap();
    let views = g.batch.views().to_vec();
    let ey = best_pcc(&views, MethodArg::Ey);
    let sgha = best_pcc(&views, MethodArg::Sgha);
    let eg = best_pcc(&views, MethodArg::Geigengame);
    outcome(
        ey >= 0.95 && ey >= sgha - 0.02 && ey >= eg - 0.02,
        format!("one epoch, M = 100, best over lr grid: EY PCC {ey:.4}, SGHA {sgha:.4}, gamma-EigenGame {eg:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 7: interlacing.

fn interlacing() -> Outcome {
    let mut rng = synth::rng(107);
    let mut worst_gap = f64::INFINITY;
    let mut worst_planted = 0.0_f64;
    for inst in 0..20 {
        let g = gen_gaussian(&[5, 4, 4], &[0.8, 0.5, 0.2], 300, 2000 + inst).unwrap();
        for _ in 0..200 {
            let width = 1 + (synth::uniform(&mut rng, 0.0, 3.0) as usize);
            let p: Vec<Matrix> = g.batch.dims().iter().map(|&d| synth::gaussian_matrix(&mut rng, d, width)).collect();
            let r = interlace_check(&g.batch, &p).unwrap();
            worst_gap = r.gaps.iter().fold(worst_gap, |m, v| m.min(*v));
        }
        let (_, w) = cca_exact(&g.batch, 2, &[0.0; 3]).unwrap();
        let r = interlace_check(&g.batch, w.views()).unwrap();
        worst_planted = r.gaps.iter().fold(worst_planted, |m, v| m.max(v.abs()));
    }
    outcome(
        worst_gap >= -1e-8 && worst_planted < 1e-6,
        format!("20 instances x 200 projections: smallest gap {worst_gap:.2e}; planted projectors max |gap| {worst_planted:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 8: VICReg recovers the CCA subspace with tied coordinates.

fn vicreg_equivalence() -> Outcome {
    let g = gen_gaussian(&[3, 3], &[0.45, 0.25, 0.05], 5000, 108).unwrap();
    let params = VicregParams::default();
    let opts = FitOptions {
        steps: 30_000,
        optimizer: OptimizerConfig::sgd(0.05),
        seed: 8,
    };
    let (w, _) = fit_vicreg(&g.batch, 2, &params, &opts).unwrap();
    match check_cca_equivalence(&g.batch, &w, &params, &EquivalenceTolerances::default()) {
        Ok(r) => outcome(
            r.max_angle <= 1e-2 && r.t_row_gap <= 1e-3,
            format!(
                "rank {}, max principal angle {:.2e}, max |T1 - T2| {:.2e}, gradient norm {:.1e}",
                r.rank, r.max_angle, r.t_row_gap, r.gradient_norm
            ),
        ),
        Err(e) => outcome(false, format!("check failed: {e}")),
    }
}

// ---------------------------------------------------------------------------
// 9: collapse thresholds.

fn collapse() -> Outcome {
    let (mu, beta_max) = vr_collapse_threshold(&VicregParams::default(), 0.5, 0.0).unwrap();
    let exact = mu == 0.25 && beta_max == 0.015625;
    let budget = ScanBudget::default();
    let vr = &collapse_scan(CollapseMethod::Vicreg { alpha: 1.0, gamma: 1.0 }, [0.5, 0.0], &[0.01], &budget)[0];
    let vr_ok = vr.runs.len() == 20 && vr.runs.iter().all(|r| r.bottom_row_norm <= COLLAPSE_TOL && r.rank == 1);
    let vr_worst = vr.runs.iter().map(|r| r.bottom_row_norm).fold(0.0, f64::max);
    let c = bt_collapse_constant(0.9, 0.1).unwrap();
    let c_ok = (c - 0.16 / 2.6).abs() <= 1e-9;
    let bt = &collapse_scan(CollapseMethod::BarlowTwins, [0.9, 0.1], &[0.05], &budget)[0];
    let bt_ok = bt.runs.len() == 20 && bt.all_sign_solutions();
    outcome(
        exact && vr_ok && c_ok && bt_ok,
        format!(
            "mu {mu}, beta_max {beta_max}; VICReg beta 0.01: 20 restarts, max bottom row {vr_worst:.1e}; \
             C(0.9, 0.1) = {c:.10}; Barlow Twins beta 0.05: {}/20 sign solutions",
            bt.runs.iter().filter(|r| r.sign_solution).count()
        ),
    )
}

// ---------------------------------------------------------------------------
// 10: linear "deep" nets recover CCA.

fn deep_recovery() -> Outcome {
    let g = gen_gaussian(&[5, 5], &[0.8, 0.5, 0.3], 2000, 110).unwrap();
    let k = 2;
    let cfg = DeepConfig {
        hidden: vec![],
        k,
        tied: false,
        optimizer: OptimizerConfig::sgd(0.05),
        steps: 3000,
        batch_size: 2000,
        sampling: Sampling::Disjoint,
        seed: 10,
    };
    let (model, _) = train_deep(&g.batch, &cfg).unwrap();
    let (oracle, _) = cca_exact(&g.batch, k, &[0.0, 0.0]).unwrap();
    let learned = WeightSet::new(model.nets().iter().map(|n| n.layers()[0].weight.clone()).collect()).unwrap();
    let pair = gepey::cca::build_gep(&g.batch, &[0.0, 0.0]).unwrap();
    let (spec, _) = extract_spectrum(&pair, &learned.stacked()).unwrap();
    let pcc = metric_pcc(&spec, &oracle).unwrap();
    let (loss, mcca) = recovery_gap(&model, &g.batch).unwrap();
    let gap = (-loss - mcca).abs();
    // Report only: a small nonlinear network.
    let nl_cfg = DeepConfig {
        hidden: vec![16],
        optimizer: OptimizerConfig {
            kind: OptimizerKind::adam(),
            lr: 1e-3,
        },
        steps: 2000,
        batch_size: 500,
        ..cfg.clone()
    };
    let (nl, _) = train_deep(&g.batch, &nl_cfg).unwrap();
    let (nl_loss, nl_mcca) = recovery_gap(&nl, &g.batch).unwrap();
    outcome(
        pcc >= 0.98 && gap <= 1e-3,
        format!(
            "linear nets: PCC {pcc:.5}, |-L - |MCCA|^2| = {gap:.1e}; one-hidden-layer net (report only): {:.1e}",
            (-nl_loss - nl_mcca).abs()
        ),
    )
}

// ---------------------------------------------------------------------------
// 11: augmentation data gives tied CCA weights and PSD cross-covariance.

fn augmentation() -> Outcome {
    let g = gen_augmented(4, 100_000, 0.5, 111).unwrap();
    let (_, w) = cca_exact(&g.batch, 2, &[0.0, 0.0]).unwrap();
    let angle = principal_angles(w.view(0), w.view(1), None)
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    let (x1, x2) = (g.batch.view(0), g.batch.view(1));
    let c = empirical_cov(x1, x2).unwrap();
    let sym = (&c + &c.transpose()).scale(0.5);
    let e = sym_eig(&sym).unwrap();
    let last = e.eigenvalues.len() - 1;
    let min_eig = e.eigenvalues[last];
    let v = e.eigenvectors.column(last);
    let p1 = x1.centered().matmul(&Matrix::column_vector(&v));
    let p2 = x2.centered().matmul(&Matrix::column_vector(&v));
    let prods: Vec<f64> = (0..p1.rows()).map(|r| p1[(r, 0)] * p2[(r, 0)]).collect();
    let n = prods.len() as f64;
    let mean = prods.iter().sum::<f64>() / n;
    let se = (prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    outcome(
        angle <= 1e-2 && min_eig >= -3.0 * se,
        format!("N = 10^5: max angle between view weight spans {angle:.2e}; min eigenvalue of Cov(X1, X2) {min_eig:.3e} (SE {se:.1e})"),
    )
}

// ---------------------------------------------------------------------------
// 12: byte-identical reruns.

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gepey-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn dir_bytes(dir: &PathBuf) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Outcome {
    let g = gen_gaussian(&[6, 5], &[0.8, 0.4], 400, 112).unwrap();
    let views = g.batch.views().to_vec();
    let mut configs = Vec::new();
    for (method, task) in [
        (MethodArg::Ey, Task::Cca),
        (MethodArg::Sgha, Task::Pls),
        (MethodArg::Geigengame, Task::Cca),
        (MethodArg::Ey, Task::Vicreg),
        (MethodArg::Ey, Task::Bt),
        (MethodArg::Ey, Task::Deep),
    ] {
        let mut c = RunConfig::new(method, task, 2);
        c.steps = Some(50);
        c.seed = 7;
        if matches!(task, Task::Cca | Task::Pls | Task::Deep) {
            c.batch_size = Some(50);
        }
        if task == Task::Deep {
            c.hidden = vec![8];
        }
        configs.push(c);
    }
    let mut identical = 0;
    for c in &configs {
        let a = run(c, &views, None).unwrap();
        let b = run(c, &views, None).unwrap();
        if a.csv.as_bytes() == b.csv.as_bytes()
            && a.weights.len() == b.weights.len()
            && a.weights.iter().zip(&b.weights).all(|(x, y)| x.0 == y.0 && io::encode(&x.1) == io::encode(&y.1))
        {
            identical += 1;
        }
    }
    // Through the binary, writing files.
    let data = scratch_dir("data");
    for (i, v) in views.iter().enumerate() {
        io::save(&data.join(format!("view{i}.gepm")), v).unwrap();
    }
    let run_cli = |tag: &str| {
        let out = scratch_dir(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_gepey"))
            .args(["run", "--method", "ey", "--task", "cca", "--k", "2", "--batch-size", "40", "--epochs", "2", "--seed", "3"])
            .arg("--in")
            .arg(data.join("view0.gepm"))
            .arg(data.join("view1.gepm"))
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let bytes = dir_bytes(&out);
        let _ = std::fs::remove_dir_all(&out);
        bytes
    };
    let first = run_cli("a");
    let second = run_cli("b");
    let _ = std::fs::remove_dir_all(&data);
    let cli_same = first == second && !first.is_empty();
    outcome(
        identical == configs.len() && cli_same,
        format!(
            "{identical}/{} in-process configurations byte-identical; CLI rerun identical across {} files: {cli_same}",
            configs.len(),
            first.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("EY optimum value", ey_optimum),
        ("no spurious minima", no_spurious_minima),
        ("gradient correctness", gradient_checks),
        ("unbiasedness", unbiasedness),
        ("fast path equivalence", fast_path),
        ("stochastic CCA quality", stochastic_cca),
        ("interlacing", interlacing),
        ("VICReg-CCA equivalence", vicreg_equivalence),
        ("collapse thresholds", collapse),
        ("deep recovery", deep_recovery),
        ("tied weights under augmentation", augmentation),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {tag} [{name}] {} ({:.1} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
