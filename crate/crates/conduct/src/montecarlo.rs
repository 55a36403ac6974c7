//! Replicated generate → estimate experiments aggregated into per-cell
//! bias/RMSE/mean/SD summaries over a (σ, T) grid.
//!
//! Seeding is cell-local and value-keyed: every replication stream is a
//! pure function of (master seed, σ, T, replication index). Cells can be
//! run in any order, in parallel, or in isolation and reproduce bit for
//! bit; removing a cell from a grid cannot disturb any other cell.

use rayon::prelude::*;

use crate::datagen::{derive_seed, generate_dataset, DgpConfig};
use crate::error::{Error, Result};
use crate::estimator::{demand_alphas, estimate_demand, estimate_supply};
use crate::model::StructuralParams;

/// Whether the data-generating process keeps the demand shifter
/// coefficient. Estimation is identical in both designs; without the
/// shifter the instrument Y carries no identifying power for supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    WithShifter,
    WithoutShifter,
}

/// The nine structural parameters tracked by every summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Alpha0,
    Alpha1,
    Alpha2,
    Alpha3,
    Gamma0,
    Gamma1,
    Gamma2,
    Gamma3,
    Theta,
}

impl Parameter {
    pub const ALL: [Parameter; 9] = [
        Parameter::Alpha0,
        Parameter::Alpha1,
        Parameter::Alpha2,
        Parameter::Alpha3,
        Parameter::Gamma0,
        Parameter::Gamma1,
        Parameter::Gamma2,
        Parameter::Gamma3,
        Parameter::Theta,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Parameter::Alpha0 => "alpha0",
            Parameter::Alpha1 => "alpha1",
            Parameter::Alpha2 => "alpha2",
            Parameter::Alpha3 => "alpha3",
            Parameter::Gamma0 => "gamma0",
            Parameter::Gamma1 => "gamma1",
            Parameter::Gamma2 => "gamma2",
            Parameter::Gamma3 => "gamma3",
            Parameter::Theta => "theta",
        }
    }

    pub fn truth(self, params: &StructuralParams) -> f64 {
        match self {
            Parameter::Alpha0 => params.alpha0,
            Parameter::Alpha1 => params.alpha1,
            Parameter::Alpha2 => params.alpha2,
            Parameter::Alpha3 => params.alpha3,
            Parameter::Gamma0 => params.gamma0,
            Parameter::Gamma1 => params.gamma1,
            Parameter::Gamma2 => params.gamma2,
            Parameter::Gamma3 => params.gamma3,
            Parameter::Theta => params.theta,
        }
    }

    pub fn estimate(self, record: &crate::estimator::EstimateRecord) -> f64 {
        match self {
            Parameter::Alpha0 => record.alpha_hat[0],
            Parameter::Alpha1 => record.alpha_hat[1],
            Parameter::Alpha2 => record.alpha_hat[2],
            Parameter::Alpha3 => record.alpha_hat[3],
            Parameter::Gamma0 => record.gamma_hat[0],
            Parameter::Gamma1 => record.gamma_hat[1],
            Parameter::Gamma2 => record.gamma_hat[2],
            Parameter::Gamma3 => record.gamma_hat[3],
            Parameter::Theta => record.theta_hat,
        }
    }

    fn index(self) -> usize {
        Parameter::ALL.iter().position(|p| *p == self).unwrap()
    }
}

/// Full experiment description: every (σ, T) pair is one cell.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub sigmas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub base_params: StructuralParams,
    pub design: Design,
    pub master_seed: u64,
}

impl ExperimentGrid {
    pub const DEFAULT_SIGMAS: [f64; 4] = [0.001, 0.5, 1.0, 2.0];
    pub const DEFAULT_SAMPLE_SIZES: [usize; 4] = [50, 100, 200, 1000];
    pub const DEFAULT_REPLICATIONS: usize = 1000;

    pub fn with_defaults(design: Design, master_seed: u64) -> Self {
        ExperimentGrid {
            sigmas: Self::DEFAULT_SIGMAS.to_vec(),
            sample_sizes: Self::DEFAULT_SAMPLE_SIZES.to_vec(),
            replications: Self::DEFAULT_REPLICATIONS,
            base_params: StructuralParams::baseline(0.0),
            design,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::InvalidConfig("empty sigma or sample-size grid".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidConfig("sigmas must be finite and non-negative".into()));
        }
        self.base_params.with_sigma(0.0).validate()
    }
}

/// Summary of one parameter over the replications that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamStats {
    pub bias: f64,
    pub rmse: f64,
    pub mean: f64,
    /// Sample SD with S−1 denominator; 0 when fewer than two estimates.
    pub sd: f64,
    pub used: usize,
}

/// Mean/SD of a statistic without a true value (the R² rows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    pub mean: f64,
    pub sd: f64,
    pub used: usize,
}

/// Per-replication failure tallies. Rank-deficient replications are
/// excluded from all moments; theta-undefined ones keep their demand
/// side; weak-instrument replications stay in (their extreme estimates
/// are part of the phenomenon) but are counted and reported separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FailureCounts {
    pub rank_deficient: usize,
    pub theta_undefined: usize,
    pub weak_instrument: usize,
    pub degenerate_dgp: usize,
}

/// The moment block of a cell: nine parameters plus the two R² rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub params: [ParamStats; 9],
    pub r2_demand: MomentStats,
    pub r2_supply: MomentStats,
}

/// Everything measured for one (σ, T) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub sigma: f64,
    pub sample_size: usize,
    pub replications: usize,
    pub moments: CellMoments,
    /// Present when any replication carried a weak-instrument flag:
    /// the same moments with the flagged replications left out.
    pub excluding_weak: Option<CellMoments>,
    pub failures: FailureCounts,
}

impl CellStats {
    pub fn param(&self, parameter: Parameter) -> &ParamStats {
        &self.moments.params[parameter.index()]
    }
}

/// Grid results in deterministic (σ-major, then T) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub design: Design,
    pub replications: usize,
    pub sigmas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub cells: Vec<CellStats>,
}

impl SummaryTable {
    pub fn cell(&self, sigma: f64, sample_size: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.sigma == sigma && c.sample_size == sample_size)
    }
}

/// What one replication contributed. Fields are None when that side of
/// the estimation was excluded.
#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    alpha: Option<[f64; 4]>,
    gamma: Option<[f64; 4]>,
    theta: Option<f64>,
    r2_demand: Option<f64>,
    r2_supply: Option<f64>,
    weak: bool,
    rank_deficient: bool,
    theta_undefined: bool,
    degenerate_dgp: bool,
}

impl RepOutcome {
    const EXCLUDED: RepOutcome = RepOutcome {
        alpha: None,
        gamma: None,
        theta: None,
        r2_demand: None,
        r2_supply: None,
        weak: false,
        rank_deficient: false,
        theta_undefined: false,
        degenerate_dgp: false,
    };

    fn parameter(&self, parameter: Parameter) -> Option<f64> {
        match parameter {
            Parameter::Alpha0 => self.alpha.map(|a| a[0]),
            Parameter::Alpha1 => self.alpha.map(|a| a[1]),
            Parameter::Alpha2 => self.alpha.map(|a| a[2]),
            Parameter::Alpha3 => self.alpha.map(|a| a[3]),
            Parameter::Gamma0 => self.gamma.map(|g| g[0]),
            Parameter::Gamma1 => self.gamma.map(|g| g[1]),
            Parameter::Gamma2 => self.gamma.map(|g| g[2]),
            Parameter::Gamma3 => self.gamma.map(|g| g[3]),
            Parameter::Theta => self.theta,
        }
    }
}

fn replicate(config: &DgpConfig, replication_index: usize) -> RepOutcome {
    let data = match generate_dataset(config, replication_index) {
        Ok(data) => data,
        Err(Error::DegenerateDenominator { .. }) => {
            return RepOutcome { degenerate_dgp: true, ..RepOutcome::EXCLUDED }
        }
        Err(err) => panic!("replication {replication_index}: {err}"),
    };
    let demand = match estimate_demand(&data) {
        Ok(fit) => fit,
        Err(Error::RankDeficient { .. }) => {
            return RepOutcome { rank_deficient: true, ..RepOutcome::EXCLUDED }
        }
        Err(err) => panic!("replication {replication_index}: {err}"),
    };
    match estimate_supply(&data, &demand, true) {
        Ok(record) => RepOutcome {
            alpha: Some(record.alpha_hat),
            gamma: Some(record.gamma_hat),
            theta: Some(record.theta_hat),
            r2_demand: Some(record.demand.r_squared),
            r2_supply: Some(record.supply.r_squared),
            weak: record.demand.weak_instrument || record.supply.weak_instrument,
            rank_deficient: false,
            theta_undefined: false,
            degenerate_dgp: false,
        },
        Err(Error::RankDeficient { .. }) => {
            RepOutcome { rank_deficient: true, ..RepOutcome::EXCLUDED }
        }
        Err(Error::ThetaUndefined { .. }) => RepOutcome {
            alpha: Some(demand_alphas(&demand)),
            r2_demand: Some(demand.r_squared),
            weak: demand.weak_instrument,
            theta_undefined: true,
            ..RepOutcome::EXCLUDED
        },
        Err(err) => panic!("replication {replication_index}: {err}"),
    }
}

fn param_stats(values: &[f64], truth: f64) -> ParamStats {
    let used = values.len();
    if used == 0 {
        return ParamStats { bias: f64::NAN, rmse: f64::NAN, mean: f64::NAN, sd: 0.0, used };
    }
    let mean = values.iter().sum::<f64>() / used as f64;
    let rmse = (values.iter().map(|v| (v - truth) * (v - truth)).sum::<f64>() / used as f64).sqrt();
    let sd = if used > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (used - 1) as f64).sqrt()
    } else {
        0.0
    };
    ParamStats { bias: mean - truth, rmse, mean, sd, used }
}

fn moment_stats(values: &[f64]) -> MomentStats {
    let stats = param_stats(values, 0.0);
    MomentStats { mean: stats.mean, sd: stats.sd, used: stats.used }
}

fn collect_moments(outcomes: &[RepOutcome], truth: &StructuralParams) -> CellMoments {
    let params = Parameter::ALL.map(|p| {
        let values: Vec<f64> = outcomes.iter().filter_map(|o| o.parameter(p)).collect();
        param_stats(&values, p.truth(truth))
    });
    let r2_demand: Vec<f64> = outcomes.iter().filter_map(|o| o.r2_demand).collect();
    let r2_supply: Vec<f64> = outcomes.iter().filter_map(|o| o.r2_supply).collect();
    CellMoments { params, r2_demand: moment_stats(&r2_demand), r2_supply: moment_stats(&r2_supply) }
}

/// Run the S replications of one cell. `cell_seed` is the cell's own
/// master seed (see [`cell_seed`] for how grids derive it).
pub fn run_cell(
    base_params: &StructuralParams,
    sigma: f64,
    sample_size: usize,
    replications: usize,
    design: Design,
    cell_seed: u64,
) -> Result<CellStats> {
    let config = DgpConfig {
        params: base_params.with_sigma(sigma),
        sample_size,
        replications,
        master_seed: cell_seed,
        include_demand_shifter: design == Design::WithShifter,
    };
    config.validate()?;
    let truth = config.effective_params();

    let outcomes: Vec<RepOutcome> =
        (0..replications).into_par_iter().map(|i| replicate(&config, i)).collect();

    let failures = FailureCounts {
        rank_deficient: outcomes.iter().filter(|o| o.rank_deficient).count(),
        theta_undefined: outcomes.iter().filter(|o| o.theta_undefined).count(),
        weak_instrument: outcomes.iter().filter(|o| o.weak).count(),
        degenerate_dgp: outcomes.iter().filter(|o| o.degenerate_dgp).count(),
    };
    let moments = collect_moments(&outcomes, &truth);
    let excluding_weak = if failures.weak_instrument > 0 {
        let kept: Vec<RepOutcome> = outcomes.iter().copied().filter(|o| !o.weak).collect();
        Some(collect_moments(&kept, &truth))
    } else {
        None
    };

    Ok(CellStats { sigma, sample_size, replications, moments, excluding_weak, failures })
}

/// Cell-local master seed: a pure function of the grid master seed and
/// the cell's (σ, T) values, so subsetting a grid never moves any cell's
/// random streams.
pub fn cell_seed(master_seed: u64, sigma: f64, sample_size: usize) -> u64 {
    derive_seed(derive_seed(master_seed, sigma.to_bits()), sample_size as u64)
}

/// Run every (σ, T) cell of the grid.
pub fn run_grid(grid: &ExperimentGrid) -> Result<SummaryTable> {
    grid.validate()?;
    let mut cells = Vec::with_capacity(grid.sigmas.len() * grid.sample_sizes.len());
    for &sigma in &grid.sigmas {
        for &sample_size in &grid.sample_sizes {
            cells.push(run_cell(
                &grid.base_params,
                sigma,
                sample_size,
                grid.replications,
                grid.design,
                cell_seed(grid.master_seed, sigma, sample_size),
            )?);
        }
    }
    Ok(SummaryTable {
        design: grid.design,
        replications: grid.replications,
        sigmas: grid.sigmas.clone(),
        sample_sizes: grid.sample_sizes.clone(),
        cells,
    })
}
