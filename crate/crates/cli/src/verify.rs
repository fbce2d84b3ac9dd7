//! Self-checks behind `gepey verify`: each suite compares library output
//! against an exact oracle and reports one line per check.

use std::fmt;

use clap::ValueEnum;
use gepey::cca::{cca_exact, interlace_check};
use gepey::linalg::{sym_eig, Matrix};
use gepey::optim::OptimizerConfig;
use gepey::ssl::{
    bt_collapse_constant, check_cca_equivalence, collapse_scan, fit_vicreg, vr_collapse_threshold, CollapseMethod,
    EquivalenceTolerances, FitOptions, ScanBudget, VicregParams,
};
use gepey::synth::{self, Rng};
use gepey::train::{DataSource, Method, TrainConfig, Trainer};
use gepey::{ey_loss, gep_solve, GepPair};

use crate::error::Result;
use crate::gen::gen_gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Equivalence,
    Collapse,
    Interlace,
    Oracle,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::Oracle => oracle_suite(seed, 50),
        Suite::Interlace => interlace_suite(seed),
        Suite::Equivalence => equivalence_suite(seed),
        Suite::Collapse => Ok(collapse_suite(seed)),
    }
}

/// A GEP of dimension `d` whose top `k` eigenvalues are positive and whose
/// top `k + 1` eigenvalues are separated by gaps of at least `0.1`.
pub fn random_gep(rng: &mut Rng, d: usize, k: usize) -> GepPair {
    assert!(k < d, "need room for the eigengap");
    let mut lambdas = vec![synth::uniform(rng, 1.8, 3.0)];
    for _ in 0..k {
        let prev = *lambdas.last().expect("non-empty");
        lambdas.push(prev - synth::uniform(rng, 0.1, 0.4));
    }
    let floor = *lambdas.last().expect("non-empty");
    while lambdas.len() < d {
        lambdas.push(synth::uniform(rng, -1.0, floor));
    }
    synth::gep_with_spectrum(rng, &lambdas, 0.5, 2.0)
}

fn spectral_norm(m: &Matrix) -> f64 {
    sym_eig(m)
        .map(|e| e.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        .unwrap_or(f64::INFINITY)
}

/// Full-batch EY gradient descent from a seeded start, stopped when the
/// gradient is below `1e-9` (checked every 50 steps) or after `max_steps`.
pub fn fit_population_ey(pair: &GepPair, k: usize, seed: u64, max_steps: usize) -> Result<Matrix> {
    let a = spectral_norm(pair.a());
    let b = spectral_norm(pair.b());
    let lambda_max = gep_solve(pair, 1)?.0.values()[0].abs();
    let lr = 0.5 / (4.0 * a + 12.0 * lambda_max.max(1.0) * b);
    let cfg = TrainConfig {
        k,
        method: Method::Ey,
        optimizer: OptimizerConfig::sgd(lr),
        seed,
    };
    let mut trainer = Trainer::new(DataSource::Population(pair), cfg)?;
    let mut done = 0;
    while done < max_steps {
        trainer.run(50)?;
        done += 50;
        if ey_loss(pair, trainer.weights())?.gradient.max_abs() < 1e-9 {
            break;
        }
    }
    Ok(trainer.into_weights())
}

fn oracle_suite(seed: u64, instances: usize) -> Result<Vec<Check>> {
    let mut rng = synth::rng(seed);
    let mut checks = Vec::with_capacity(instances);
    for i in 0..instances {
        let d = 3 + (synth::uniform(&mut rng, 0.0, 10.0) as usize);
        let k = (1 + (synth::uniform(&mut rng, 0.0, 4.0) as usize)).min(d - 1);
        let pair = random_gep(&mut rng, d, k);
        let (spec, _) = gep_solve(&pair, k)?;
        let u = fit_population_ey(&pair, k, seed.wrapping_add(i as u64), 200_000)?;
        let loss = ey_loss(&pair, &u)?.loss;
        let gap = (loss + spec.sum_squares()).abs();
        checks.push(Check::new(
            format!("gep {i} (D={d}, K={k})"),
            gap <= 1e-3,
            format!("|loss + sum lambda^2| = {gap:.3e}"),
        ));
    }
    Ok(checks)
}

fn interlace_suite(seed: u64) -> Result<Vec<Check>> {
    let mut rng = synth::rng(seed);
    let mut checks = Vec::new();
    for inst in 0..10 {
        let g = gen_gaussian(&[5, 4, 4], &[0.8, 0.5, 0.2], 300, seed.wrapping_add(inst))?;
        let mut worst = f64::INFINITY;
        for _ in 0..50 {
            let width = 1 + (synth::uniform(&mut rng, 0.0, 3.0) as usize);
            let proj: Vec<Matrix> = g.batch.dims().iter().map(|&d| synth::gaussian_matrix(&mut rng, d, width)).collect();
            let r = interlace_check(&g.batch, &proj)?;
            worst = r.gaps.iter().fold(worst, |m, v| m.min(*v));
        }
        checks.push(Check::new(
            format!("random projections {inst}"),
            worst >= -1e-8,
            format!("smallest gap {worst:.3e}"),
        ));
        let two = gepey::MultiviewBatch::new(g.batch.views()[..2].to_vec())?;
        let (_, w) = cca_exact(&two, 2, &[0.0, 0.0])?;
        let r = interlace_check(&two, w.views())?;
        let worst = r.gaps.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        checks.push(Check::new(
            format!("planted projection {inst}"),
            r.equality,
            format!("largest |gap| {worst:.3e}"),
        ));
    }
    Ok(checks)
}

fn equivalence_suite(seed: u64) -> Result<Vec<Check>> {
    let g = gen_gaussian(&[3, 3], &[0.45, 0.25, 0.05], 5000, seed)?;
    let params = VicregParams::default();
    let opts = FitOptions {
        steps: 30_000,
        optimizer: OptimizerConfig::sgd(0.05),
        seed,
    };
    let (w, _) = fit_vicreg(&g.batch, 2, &params, &opts)?;
    let r = check_cca_equivalence(&g.batch, &w, &params, &EquivalenceTolerances::default())?;
    Ok(vec![
        Check::new(
            "subspace angle",
            r.max_angle <= 1e-2,
            format!("rank {} max principal angle {:.3e}", r.rank, r.max_angle),
        ),
        Check::new(
            "tied coordinates",
            r.t_row_gap <= 1e-3,
            format!("max |T1 - T2| on positive rows {:.3e}", r.t_row_gap),
        ),
    ])
}

fn collapse_suite(seed: u64) -> Vec<Check> {
    let budget = ScanBudget {
        seed,
        ..ScanBudget::default()
    };
    let params = VicregParams::default();
    let mut checks = Vec::new();
    let (_, beta_max) = vr_collapse_threshold(&params, 0.5, 0.0).expect("valid lambdas");
    let rows = collapse_scan(
        CollapseMethod::Vicreg { alpha: 1.0, gamma: 1.0 },
        [0.5, 0.0],
        &[0.01, 0.5],
        &budget,
    );
    let below = &rows[0];
    checks.push(Check::new(
        "vicreg below threshold",
        below.beta < beta_max && below.all_collapsed(),
        format!(
            "beta {} < {beta_max}: {}/{} restarts collapsed",
            below.beta,
            below.runs.iter().filter(|r| r.bottom_row_norm <= gepey::ssl::COLLAPSE_TOL).count(),
            below.runs.len()
        ),
    ));
    let above = &rows[1];
    checks.push(Check::new(
        "vicreg above threshold (report)",
        true,
        format!(
            "beta {}: {}/{} restarts full rank",
            above.beta,
            above.runs.iter().filter(|r| r.rank == 2).count(),
            above.runs.len()
        ),
    ));
    let c = bt_collapse_constant(0.9, 0.1).expect("valid lambdas");
    let rows = collapse_scan(CollapseMethod::BarlowTwins, [0.9, 0.1], &[0.05, 0.5], &budget);
    checks.push(Check::new(
        "barlow twins below threshold",
        rows[0].beta < c && rows[0].all_sign_solutions(),
        format!(
            "beta {} < {c:.6}: {}/{} restarts at a sign solution",
            rows[0].beta,
            rows[0].runs.iter().filter(|r| r.sign_solution).count(),
            rows[0].runs.len()
        ),
    ));
    checks.push(Check::new(
        "barlow twins above threshold (report)",
        true,
        format!(
            "beta {}: {}/{} restarts full rank",
            rows[1].beta,
            rows[1].runs.iter().filter(|r| r.rank == 2).count(),
            rows[1].runs.len()
        ),
    ));
    checks
}
