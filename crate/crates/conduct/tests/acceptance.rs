//! Acceptance suite. One test per criterion; each prints a single
//! PASS/FAIL line (run with `-- --nocapture` to see them as they go).
//!
//! The statistical criteria run at a pinned master seed (3) so the suite
//! is deterministic; the determinism criterion itself uses seed 7 and
//! exercises the installed binary end to end.

use std::process::Command;

use nalgebra::{DMatrix, DVector};

use conduct::datagen::{derive_seed, generate_dataset, DgpConfig, Dataset};
use conduct::diagnostics::{collinearity_sweep, zeta_rank};
use conduct::estimator::{
    estimate_demand, estimate_supply, tsls, Column, ColumnStore, RegressionSpec,
};
use conduct::model::StructuralParams;
use conduct::montecarlo::{cell_seed, run_cell, run_grid, CellMoments, CellStats, Design,
    ExperimentGrid, Parameter};

const MASTER_SEED: u64 = 3;
const REPLICATIONS: usize = 1000;

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance criterion {criterion} [{name}]: {verdict} — {detail}");
    assert!(pass, "criterion {criterion} [{name}] failed: {detail}");
}

fn baseline_dataset(sigma: f64, sample_size: usize, with_shifter: bool, seed: u64) -> Dataset {
    let config = DgpConfig {
        params: StructuralParams::baseline(sigma),
        sample_size,
        replications: 1,
        master_seed: seed,
        include_demand_shifter: with_shifter,
    };
    generate_dataset(&config, 0).unwrap()
}

#[test]
fn criterion_1_noiseless_identification() {
    let truth = StructuralParams::baseline(0.0);
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        for sample_size in [50, 1000] {
            let data = baseline_dataset(0.0, sample_size, true, derive_seed(41, seed));
            let demand = estimate_demand(&data).unwrap();
            let record = estimate_supply(&data, &demand, true).unwrap();
            for parameter in Parameter::ALL {
                let error = (parameter.estimate(&record) - parameter.truth(&truth)).abs();
                worst = worst.max(error);
            }
        }
    }
    report(
        1,
        "noiseless identification, 20 seeds x T in {50, 1000}",
        worst < 1e-8,
        &format!("max |error| = {worst:.2e} (bound 1e-8)"),
    );
}

fn with_shifter_cell(sigma: f64, sample_size: usize, master: u64) -> CellStats {
    run_cell(
        &StructuralParams::baseline(0.0),
        sigma,
        sample_size,
        REPLICATIONS,
        Design::WithShifter,
        cell_seed(master, sigma, sample_size),
    )
    .unwrap()
}

#[test]
fn criterion_2_low_noise_bias_rmse() {
    let bounds = [(50usize, 0.002, 0.006), (1000, 0.0005, 0.002)];
    let mut pass = true;
    let mut detail = String::new();
    for (sample_size, bias_bound, rmse_bound) in bounds {
        let cell = with_shifter_cell(0.001, sample_size, MASTER_SEED);
        let mut worst_bias: f64 = 0.0;
        let mut worst_rmse: f64 = 0.0;
        for parameter in Parameter::ALL {
            let stats = cell.param(parameter);
            worst_bias = worst_bias.max(stats.bias.abs());
            worst_rmse = worst_rmse.max(stats.rmse);
        }
        pass &= worst_bias <= bias_bound && worst_rmse <= rmse_bound;
        detail.push_str(&format!(
            "T={sample_size}: max|bias|={worst_bias:.2e} (<= {bias_bound}), max rmse={worst_rmse:.2e} (<= {rmse_bound}); "
        ));
    }
    report(2, "sigma=0.001 grid reproduction", pass, detail.trim_end());
}

#[test]
fn criterion_3_high_noise_large_t() {
    let cell = with_shifter_cell(2.0, 1000, MASTER_SEED);
    let theta = cell.param(Parameter::Theta);
    let alpha1 = cell.param(Parameter::Alpha1);
    let pass = theta.bias.abs() <= 0.10
        && (0.15..=0.35).contains(&theta.rmse)
        && (1.3..=2.4).contains(&alpha1.rmse);
    report(
        3,
        "sigma=2.0, T=1000 cell",
        pass,
        &format!(
            "bias(theta)={:.4} (|.|<=0.10), rmse(theta)={:.4} (in [0.15,0.35]), rmse(alpha1)={:.4} (in [1.3,2.4])",
            theta.bias, theta.rmse, alpha1.rmse
        ),
    );
}

#[test]
fn criterion_4_consistency_trend() {
    let mut pass = true;
    let mut detail = String::new();
    for master in 1..=5u64 {
        for sigma in [0.5, 2.0] {
            let small = with_shifter_cell(sigma, 50, master);
            let large = with_shifter_cell(sigma, 1000, master);
            let rmse_small = small.param(Parameter::Theta).rmse;
            let rmse_large = large.param(Parameter::Theta).rmse;
            pass &= rmse_large < rmse_small;
            detail.push_str(&format!(
                "seed {master} sigma {sigma}: {rmse_large:.3} < {rmse_small:.3}; "
            ));
        }
    }
    report(4, "rmse(theta) falls from T=50 to T=1000, 5 seeds", pass, detail.trim_end());
}

#[test]
fn criterion_5_shifterless_persistent_bias() {
    let cell = run_cell(
        &StructuralParams::baseline(0.0),
        1.0,
        1000,
        REPLICATIONS,
        Design::WithoutShifter,
        cell_seed(MASTER_SEED, 1.0, 1000),
    )
    .unwrap();
    let theta = cell.param(Parameter::Theta);
    let r2_supply = cell.moments.r2_supply;
    let pass = (theta.mean - 0.5).abs() > 0.3 && r2_supply.mean < 0.0;
    report(
        5,
        "no-shifter design: theta bias persists at T=1000",
        pass,
        &format!(
            "|mean(theta)-0.5| = {:.3} (> 0.3), mean supply R2 = {:.3} (< 0)",
            (theta.mean - 0.5).abs(),
            r2_supply.mean
        ),
    );
}

#[test]
fn criterion_6_rank_dichotomy() {
    let params = StructuralParams::baseline(0.0);
    let full = zeta_rank(&params);
    let reduced = zeta_rank(&params.without_demand_shifter());

    // Dependence coefficients solved by hand from the constraint rows.
    let expected_null = [1.0, 5.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, -6.0];
    let mut null_ok = reduced.null_space_basis.len() == 1;
    if let Some(basis) = reduced.null_space_basis.first() {
        let scale = basis[0] / expected_null[0];
        null_ok &= basis
            .iter()
            .zip(expected_null)
            .all(|(b, e)| (b - scale * e).abs() <= 1e-9 * e.abs().max(1.0));
    }

    let sweep_full = collinearity_sweep(&params, 100, 100, MASTER_SEED).unwrap();
    let sweep_reduced =
        collinearity_sweep(&params.without_demand_shifter(), 100, 100, MASTER_SEED).unwrap();
    let sweeps_ok = sweep_full.full_rank_count == 100
        && sweep_reduced.full_rank_count == 0
        && sweep_reduced.min_rank == 4
        && sweep_reduced.max_rank == 4;

    let pass = full.rank == 5 && reduced.rank == 4 && null_ok && sweeps_ok;
    report(
        6,
        "rank dichotomy with and without the shifter",
        pass,
        &format!(
            "zeta rank {}/{} (want 5/4), null vector ok: {null_ok}, design rank 5 on {}/100 and rank 4 on {}/100 seeds",
            full.rank,
            reduced.rank,
            sweep_full.full_rank_count,
            if sweep_reduced.min_rank == 4 && sweep_reduced.max_rank == 4 { 100 } else { 0 },
        ),
    );
}

/// One-shot projection-formula 2SLS, the independent estimator route:
/// X_hat = Z (Z'Z)^{-1} Z' X assembled explicitly, then a Householder QR
/// solve of y on X_hat (the implementation path runs one SVD-backed
/// regression per endogenous column instead).
fn projection_tsls(store: &ColumnStore, spec: &RegressionSpec) -> Option<DVector<f64>> {
    let n = store.len();
    let x = DMatrix::from_fn(n, spec.included_regressors.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            store.col(spec.included_regressors[j - 1])[i]
        }
    });
    let mut instrument_columns: Vec<Column> = spec
        .included_regressors
        .iter()
        .copied()
        .filter(|c| !spec.endogenous.contains(c))
        .collect();
    instrument_columns.extend(spec.instruments.iter().copied());
    let z = DMatrix::from_fn(n, instrument_columns.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            store.col(instrument_columns[j - 1])[i]
        }
    });
    let ztz_inv = (z.transpose() * &z).try_inverse()?;
    let projected = &z * (ztz_inv * (z.transpose() * &x));
    let y = DVector::from_column_slice(store.col(spec.response));
    let qr = projected.qr();
    let rhs = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&rhs)
}

#[test]
fn criterion_7_projection_oracle_equivalence() {
    let mut worst: f64 = 0.0;
    let mut compared = 0usize;
    for instance in 0..1000u64 {
        let sample_size = 20 + (derive_seed(7001, instance) % 181) as usize;
        let sigma = (derive_seed(7002, instance) % 10_000) as f64 / 10_000.0 * 2.0;
        let data = baseline_dataset(sigma, sample_size, true, derive_seed(7003, instance));
        let store = ColumnStore::from_dataset(&data);
        for spec in [RegressionSpec::demand(), RegressionSpec::supply(true)] {
            let ours = tsls(&store, &spec).unwrap();
            let oracle = projection_tsls(&store, &spec).expect("oracle solve");
            let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let gap = ours
                .coefficients
                .iter()
                .zip(oracle.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(gap / scale);
            compared += 1;
        }
    }
    report(
        7,
        "two-regression path equals one-shot projection formula",
        worst < 1e-9,
        &format!("{compared} fits compared, worst relative gap = {worst:.2e} (bound 1e-9)"),
    );
}

fn check_identity(moments: &CellMoments, detail: &mut String) -> bool {
    let mut ok = true;
    for (parameter, stats) in Parameter::ALL.iter().zip(&moments.params) {
        if stats.used == 0 {
            continue;
        }
        let n = stats.used as f64;
        let gap =
            stats.rmse * stats.rmse - stats.bias * stats.bias - stats.sd * stats.sd * (n - 1.0) / n;
        if gap.abs() >= 1e-9 * (stats.rmse * stats.rmse).max(1.0) {
            ok = false;
            detail.push_str(&format!("{} gap {gap:.2e}; ", parameter.label()));
        }
    }
    ok
}

#[test]
fn criterion_8_bias_variance_identity_over_full_tables() {
    let mut pass = true;
    let mut detail = String::new();
    let mut cells = 0usize;
    for design in [Design::WithShifter, Design::WithoutShifter] {
        let mut grid = ExperimentGrid::with_defaults(design, MASTER_SEED);
        grid.replications = 300;
        let table = run_grid(&grid).unwrap();
        for cell in &table.cells {
            cells += 1;
            pass &= check_identity(&cell.moments, &mut detail);
            if let Some(excl) = &cell.excluding_weak {
                pass &= check_identity(excl, &mut detail);
            }
        }
    }
    report(
        8,
        "rmse^2 = bias^2 + sd^2 (S-1)/S in every cell",
        pass,
        &format!("{cells} cells checked over both designs{}", if pass { "" } else { ": " }),
    );
}

#[test]
fn criterion_9_worker_count_determinism() {
    let binary = env!("CARGO_BIN_EXE_conduct");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let path = dir.path().join(format!("table1_w{workers}.csv"));
        let status = Command::new(binary)
            .args([
                "--preset",
                "table1",
                "--seed",
                "7",
                "--format",
                "csv",
                "--workers",
                workers,
                "--output",
            ])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success(), "binary failed with --workers {workers}");
        outputs.push(std::fs::read(&path).unwrap());
    }
    let pass = outputs[0] == outputs[1];
    report(
        9,
        "table1 CSV is byte-identical across worker counts",
        pass,
        &format!("{} bytes each", outputs[0].len()),
    );
}
