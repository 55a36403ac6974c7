//! Desk-scale toolkit for conduct-parameter identification experiments:
//! a linear demand / marginal-cost equilibrium generator, two-stage least
//! squares estimation of both structural equations, replicated Monte
//! Carlo bias/RMSE grids, and rank diagnostics for the supply design.

pub mod cli;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod report;

pub use datagen::{derive_seed, draw_exogenous, generate_dataset, Dataset, DgpConfig};
pub use error::{Error, Result};
pub use estimator::{
    estimate_demand, estimate_supply, ols, tsls, Column, ColumnStore, EstimateRecord,
    FirstStageMode, FitResult, RegressionSpec,
};
pub use model::{
    demand_price, equilibrium_quantity, supply_price, ExogenousDraw, MarketObservation,
    StructuralParams,
};
pub use montecarlo::{run_cell, run_grid, CellStats, Design, ExperimentGrid, Parameter, SummaryTable};
