//! Ordinary and two-stage least squares for the structural equations.
//!
//! Both structural regressions carry two endogenous regressors: the
//! quantity Q and the interaction zr·Q. By default each endogenous column
//! gets its own first-stage regression on the same instrument list; a
//! second mode fits only Q in the first stage and forms the interaction
//! from the fitted quantity, for comparing the two conventions.
//!
//! Reported R² is structural: second-stage coefficients applied to the
//! original (not fitted) regressors, so it can be negative.

use nalgebra::{DMatrix, DVector};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::FactoredDesign;

/// First-stage R² below this flags the fit as weak-instrument degenerate.
pub const WEAK_FIRST_STAGE_R2: f64 = 0.001;

/// Demand rotation coefficient magnitudes at or below this make the
/// conduct parameter unrecoverable.
pub const ALPHA2_RECOVERY_CUTOFF: f64 = 1e-12;

/// Observable columns of a generated dataset, plus the endogenous
/// interaction zr·Q used by both structural equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    P,
    Q,
    ZrQ,
    Y,
    Zr,
    W,
    R,
    H,
    K,
}

/// Column-major view of a dataset for regression work.
#[derive(Debug, Clone)]
pub struct ColumnStore {
    n: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    zrq: Vec<f64>,
    y: Vec<f64>,
    zr: Vec<f64>,
    w: Vec<f64>,
    r: Vec<f64>,
    h: Vec<f64>,
    k: Vec<f64>,
}

impl ColumnStore {
    pub fn from_dataset(data: &Dataset) -> Self {
        let n = data.len();
        let mut store = ColumnStore {
            n,
            p: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            zrq: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            zr: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            r: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
            k: Vec::with_capacity(n),
        };
        for obs in &data.observations {
            store.p.push(obs.p);
            store.q.push(obs.q);
            store.zrq.push(obs.draw.zr * obs.q);
            store.y.push(obs.draw.y);
            store.zr.push(obs.draw.zr);
            store.w.push(obs.draw.w);
            store.r.push(obs.draw.r);
            store.h.push(obs.draw.h);
            store.k.push(obs.draw.k);
        }
        store
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn col(&self, column: Column) -> &[f64] {
        match column {
            Column::P => &self.p,
            Column::Q => &self.q,
            Column::ZrQ => &self.zrq,
            Column::Y => &self.y,
            Column::Zr => &self.zr,
            Column::W => &self.w,
            Column::R => &self.r,
            Column::H => &self.h,
            Column::K => &self.k,
        }
    }
}

/// What to regress on what. The intercept is implicit and always first in
/// the coefficient vector. `instruments` are the excluded instruments;
/// the first-stage design is [intercept, included exogenous, instruments].
///
/// Fewer excluded instruments than endogenous regressors leaves the
/// projected second-stage design short of full column rank, so such specs
/// always come back as `RankDeficient` rather than being rejected up
/// front — the under-instrumented supply design is studied deliberately.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub response: Column,
    pub included_regressors: Vec<Column>,
    pub endogenous: Vec<Column>,
    pub instruments: Vec<Column>,
}

impl RegressionSpec {
    /// Demand equation: P on {Q, zr·Q, Y}, endogenous {Q, zr·Q},
    /// excluded instruments {zr, H, K}.
    pub fn demand() -> Self {
        RegressionSpec {
            response: Column::P,
            included_regressors: vec![Column::Q, Column::ZrQ, Column::Y],
            endogenous: vec![Column::Q, Column::ZrQ],
            instruments: vec![Column::Zr, Column::H, Column::K],
        }
    }

    /// Supply equation: P on {zr·Q, Q, W, R}, endogenous {zr·Q, Q}.
    /// The demand shifter Y joins zr as an excluded instrument unless
    /// `with_shifter_instrument` is false, which leaves the equation
    /// under-instrumented.
    pub fn supply(with_shifter_instrument: bool) -> Self {
        let instruments = if with_shifter_instrument {
            vec![Column::Zr, Column::Y]
        } else {
            vec![Column::Zr]
        };
        RegressionSpec {
            response: Column::P,
            included_regressors: vec![Column::ZrQ, Column::Q, Column::W, Column::R],
            endogenous: vec![Column::ZrQ, Column::Q],
            instruments,
        }
    }

    fn validate(&self) -> Result<()> {
        for endog in &self.endogenous {
            if !self.included_regressors.contains(endog) {
                return Err(Error::InvalidConfig(format!(
                    "endogenous column {endog:?} not among included regressors"
                )));
            }
        }
        if self.included_regressors.contains(&self.response) {
            return Err(Error::InvalidConfig("response listed as regressor".into()));
        }
        Ok(())
    }

    fn included_exogenous(&self) -> Vec<Column> {
        self.included_regressors
            .iter()
            .copied()
            .filter(|c| !self.endogenous.contains(c))
            .collect()
    }
}

/// How the endogenous columns are projected in the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstStageMode {
    /// One first-stage regression per endogenous column, all on the same
    /// instrument list.
    #[default]
    PerEndogenous,
    /// Single first stage for Q; the interaction regressor is formed as
    /// zr times the fitted quantity. Kept for comparison — its estimates
    /// differ from the per-column convention on noisy data.
    QuantityOnly,
}

/// Coefficients and fit statistics for one regression.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Aligned with [intercept, included_regressors...].
    pub coefficients: Vec<f64>,
    /// Structural R², 1 − SSR/SST with centered SST; negative values are
    /// meaningful for 2SLS.
    pub r_squared: f64,
    /// Condition number of the second-stage design.
    pub condition_number: f64,
    /// One entry per endogenous regressor, in spec order. Empty for OLS.
    pub first_stage_r_squared: Vec<f64>,
    /// Set when any first-stage R² falls below [`WEAK_FIRST_STAGE_R2`].
    pub weak_instrument: bool,
}

/// Demand and supply fits for one replication together with the
/// recovered structural parameters.
///
/// `alpha_hat` holds (α̂₀, α̂₁, α̂₂, α̂₃) in the demand sign convention
/// (slopes enter demand negatively, so α̂₁ and α̂₂ are the negated
/// regression coefficients). `gamma_hat` holds (γ̂₀, γ̂₁, γ̂₂, γ̂₃) with
/// γ̂₁ = β̂_Q − θ̂·α̂₁ recovered from the composite quantity coefficient,
/// and `theta_hat` = β̂_ZQ / α̂₂.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub demand: FitResult,
    pub supply: FitResult,
    pub alpha_hat: [f64; 4],
    pub gamma_hat: [f64; 4],
    pub theta_hat: f64,
}

fn centered_sst(values: &DVector<f64>) -> f64 {
    let mean = values.mean();
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

fn r_squared_from(ssr: f64, sst: f64) -> f64 {
    if sst > 0.0 {
        1.0 - ssr / sst
    } else {
        1.0
    }
}

fn design_with_intercept(data: &ColumnStore, columns: &[Column]) -> DMatrix<f64> {
    DMatrix::from_fn(data.len(), columns.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            data.col(columns[j - 1])[i]
        }
    })
}

/// Ordinary least squares through an orthogonal decomposition. The design
/// must already carry its intercept column.
pub fn ols(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<FitResult> {
    let (n, k) = design.shape();
    if n <= k {
        return Err(Error::InvalidConfig(format!(
            "{n} observations cannot support {k} regressors"
        )));
    }
    let factored = FactoredDesign::new(design, "ols")?;
    let beta = factored.solve(response);
    let residuals = response - design * &beta;
    let r_squared = r_squared_from(residuals.norm_squared(), centered_sst(response));
    Ok(FitResult {
        coefficients: beta.iter().copied().collect(),
        r_squared,
        condition_number: factored.condition_number(),
        first_stage_r_squared: Vec::new(),
        weak_instrument: false,
    })
}

/// Two-stage least squares with one first stage per endogenous column.
pub fn tsls(data: &ColumnStore, spec: &RegressionSpec) -> Result<FitResult> {
    tsls_with_mode(data, spec, FirstStageMode::PerEndogenous)
}

pub fn tsls_with_mode(
    data: &ColumnStore,
    spec: &RegressionSpec,
    mode: FirstStageMode,
) -> Result<FitResult> {
    spec.validate()?;
    let n = data.len();
    let k = spec.included_regressors.len() + 1;
    if n <= k {
        return Err(Error::InvalidConfig(format!(
            "{n} observations cannot support {k} regressors"
        )));
    }

    let response = DVector::from_column_slice(data.col(spec.response));
    let original = design_with_intercept(data, &spec.included_regressors);

    // First stage: project the endogenous columns on
    // [intercept, included exogenous, excluded instruments].
    let mut first_stage_columns = spec.included_exogenous();
    first_stage_columns.extend(spec.instruments.iter().copied());
    let first_stage_design = design_with_intercept(data, &first_stage_columns);
    let factored_first = FactoredDesign::new(&first_stage_design, "first stage")?;

    let project = |column: Column| -> (DVector<f64>, f64) {
        let actual = DVector::from_column_slice(data.col(column));
        let fitted = &first_stage_design * factored_first.solve(&actual);
        let ssr = (&actual - &fitted).norm_squared();
        (fitted, r_squared_from(ssr, centered_sst(&actual)))
    };

    let mut fitted_endogenous: Vec<(Column, DVector<f64>)> = Vec::new();
    let mut first_stage_r_squared = Vec::new();
    match mode {
        FirstStageMode::PerEndogenous => {
            for &column in &spec.endogenous {
                let (fitted, r2) = project(column);
                first_stage_r_squared.push(r2);
                fitted_endogenous.push((column, fitted));
            }
        }
        FirstStageMode::QuantityOnly => {
            let expected = [Column::Q, Column::ZrQ];
            if spec.endogenous.len() != 2 || !expected.iter().all(|c| spec.endogenous.contains(c))
            {
                return Err(Error::InvalidConfig(
                    "quantity-only first stage requires endogenous {Q, zr*Q}".into(),
                ));
            }
            let (fitted_q, _) = project(Column::Q);
            let zr = data.col(Column::Zr);
            let fitted_zrq = DVector::from_fn(n, |i, _| zr[i] * fitted_q[i]);
            for &column in &spec.endogenous {
                let actual = DVector::from_column_slice(data.col(column));
                let fitted =
                    if column == Column::Q { fitted_q.clone() } else { fitted_zrq.clone() };
                let ssr = (&actual - &fitted).norm_squared();
                first_stage_r_squared.push(r_squared_from(ssr, centered_sst(&actual)));
                fitted_endogenous.push((column, fitted));
            }
        }
    }
    let weak_instrument = first_stage_r_squared.iter().any(|&r2| r2 < WEAK_FIRST_STAGE_R2);

    // Second stage: swap fitted values in for the endogenous columns.
    let mut projected = original.clone();
    for (column, fitted) in &fitted_endogenous {
        let position = spec
            .included_regressors
            .iter()
            .position(|c| c == column)
            .expect("validated endogenous membership");
        projected.set_column(position + 1, fitted);
    }
    let factored_second = FactoredDesign::new(&projected, "second stage")?;
    let beta = factored_second.solve(&response);

    // Structural residuals: original regressors, second-stage coefficients.
    let residuals = &response - &original * &beta;
    let r_squared = r_squared_from(residuals.norm_squared(), centered_sst(&response));

    Ok(FitResult {
        coefficients: beta.iter().copied().collect(),
        r_squared,
        condition_number: factored_second.condition_number(),
        first_stage_r_squared,
        weak_instrument,
    })
}

/// Structural demand coefficients from a demand fit:
/// (α̂₀, α̂₁, α̂₂, α̂₃) = (intercept, −coef(Q), −coef(zr·Q), coef(Y)).
pub fn demand_alphas(fit: &FitResult) -> [f64; 4] {
    let c = &fit.coefficients;
    [c[0], -c[1], -c[2], c[3]]
}

/// Observations needed before either structural equation is fit.
pub const MIN_OBSERVATIONS: usize = 10;

fn check_size(data: &Dataset) -> Result<()> {
    if data.len() < MIN_OBSERVATIONS {
        return Err(Error::InvalidConfig(format!(
            "estimation needs at least {MIN_OBSERVATIONS} observations, got {}",
            data.len()
        )));
    }
    Ok(())
}

/// Fit the demand equation by 2SLS.
pub fn estimate_demand(data: &Dataset) -> Result<FitResult> {
    estimate_demand_with_mode(data, FirstStageMode::default())
}

pub fn estimate_demand_with_mode(data: &Dataset, mode: FirstStageMode) -> Result<FitResult> {
    check_size(data)?;
    let store = ColumnStore::from_dataset(data);
    tsls_with_mode(&store, &RegressionSpec::demand(), mode)
}

/// Fit the supply equation by 2SLS and recover θ̂ and γ̂₁ from the
/// composite coefficients using the demand fit.
pub fn estimate_supply(
    data: &Dataset,
    demand_fit: &FitResult,
    include_shifter_instrument: bool,
) -> Result<EstimateRecord> {
    estimate_supply_with_mode(
        data,
        demand_fit,
        include_shifter_instrument,
        FirstStageMode::default(),
    )
}

pub fn estimate_supply_with_mode(
    data: &Dataset,
    demand_fit: &FitResult,
    include_shifter_instrument: bool,
    mode: FirstStageMode,
) -> Result<EstimateRecord> {
    check_size(data)?;
    if demand_fit.coefficients.len() != 4 {
        return Err(Error::InvalidConfig(
            "demand fit must carry intercept plus three regressors".into(),
        ));
    }
    let alpha_hat = demand_alphas(demand_fit);
    if !(alpha_hat[1].is_finite() && alpha_hat[2].is_finite()) {
        return Err(Error::InvalidConfig("non-finite demand slope estimates".into()));
    }
    if alpha_hat[2].abs() <= ALPHA2_RECOVERY_CUTOFF {
        return Err(Error::ThetaUndefined { alpha2_magnitude: alpha_hat[2].abs() });
    }

    let store = ColumnStore::from_dataset(data);
    let supply = tsls_with_mode(&store, &RegressionSpec::supply(include_shifter_instrument), mode)?;
    let beta_zq = supply.coefficients[1];
    let beta_q = supply.coefficients[2];
    let theta_hat = beta_zq / alpha_hat[2];
    let gamma1_hat = beta_q - theta_hat * alpha_hat[1];
    let gamma_hat =
        [supply.coefficients[0], gamma1_hat, supply.coefficients[3], supply.coefficients[4]];

    Ok(EstimateRecord { demand: demand_fit.clone(), supply, alpha_hat, gamma_hat, theta_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, DgpConfig};
    use crate::model::StructuralParams;
    use proptest::prelude::*;

    fn dataset(sigma: f64, sample_size: usize, with_shifter: bool, seed: u64) -> Dataset {
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
    fn ols_recovers_exact_line() {
        let design = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 + 1.0 });
        let response = DVector::from_fn(10, |i, _| 2.0 + 3.0 * (i as f64 + 1.0));
        let fit = ols(&design, &response).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_multivariate_weights() {
        let design = DMatrix::from_fn(40, 4, |i, j| match j {
            0 => 1.0,
            1 => (i as f64 * 0.7).sin(),
            2 => (i as f64 * 0.3).cos(),
            _ => i as f64 / 7.0,
        });
        let weights = DVector::from_column_slice(&[1.5, -2.0, 0.25, 4.0]);
        let response = &design * &weights;
        let fit = ols(&design, &response).unwrap();
        for (est, truth) in fit.coefficients.iter().zip(weights.iter()) {
            assert!((est - truth).abs() < 1e-10 * truth.abs().max(1.0));
        }
    }

    #[test]
    fn ols_rejects_duplicate_column() {
        let design = DMatrix::from_fn(12, 3, |i, j| match j {
            0 => 1.0,
            _ => (i as f64).sqrt() + 2.0,
        });
        let response = DVector::from_element(12, 1.0);
        assert!(matches!(ols(&design, &response), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn noiseless_demand_identification() {
        // Exact recovery holds down to the minimum sample size.
        for (seed, sample_size) in [(1, 200), (99, 200), (7, 10)] {
            let data = dataset(0.0, sample_size, true, seed);
            let fit = estimate_demand(&data).unwrap();
            let expected = [10.0, -1.0, -1.0, 1.0];
            for (est, truth) in fit.coefficients.iter().zip(expected) {
                assert!((est - truth).abs() < 1e-8, "coefficients = {:?}", fit.coefficients);
            }
            assert!((fit.r_squared - 1.0).abs() < 1e-10);
            assert!(!fit.weak_instrument);
        }
    }

    #[test]
    fn too_few_observations_rejected() {
        let config = DgpConfig {
            params: StructuralParams::baseline(0.0),
            sample_size: 10,
            replications: 1,
            master_seed: 1,
            include_demand_shifter: true,
        };
        let mut data = generate_dataset(&config, 0).unwrap();
        data.observations.truncate(8);
        assert!(matches!(estimate_demand(&data), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn noiseless_supply_identification() {
        let data = dataset(0.0, 200, true, 7);
        let demand = estimate_demand(&data).unwrap();
        let record = estimate_supply(&data, &demand, true).unwrap();
        let expected = [1.0, 0.5, 1.5, 1.0, 1.0];
        for (est, truth) in record.supply.coefficients.iter().zip(expected) {
            assert!((est - truth).abs() < 1e-8, "supply = {:?}", record.supply.coefficients);
        }
        assert!((record.theta_hat - 0.5).abs() < 1e-8);
        assert!((record.gamma_hat[1] - 1.0).abs() < 1e-8);
        assert!((record.gamma_hat[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn under_instrumented_supply_is_rank_deficient() {
        // With Y dropped from the instrument list both fitted endogenous
        // columns live in the span of [1, W, R, zr]: five second-stage
        // columns in a four-dimensional space, at any error scale.
        for sigma in [0.0, 1.0] {
            let data = dataset(sigma, 120, false, 3);
            let demand = estimate_demand(&data).unwrap();
            match estimate_supply(&data, &demand, false) {
                Err(Error::RankDeficient { stage, .. }) => assert_eq!(stage, "second stage"),
                other => panic!("expected RankDeficient, got {other:?}"),
            }
        }
    }

    #[test]
    fn irrelevant_instruments_set_weak_flag() {
        // Endogenous column unrelated to any instrument: first-stage R²
        // is pure noise, about k/n, below the cutoff for large n.
        let n = 60_000;
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut store = ColumnStore {
            n,
            p: Vec::new(),
            q: Vec::new(),
            zrq: Vec::new(),
            y: Vec::new(),
            zr: Vec::new(),
            w: Vec::new(),
            r: Vec::new(),
            h: Vec::new(),
            k: Vec::new(),
        };
        for _ in 0..n {
            let q = next();
            store.q.push(q);
            store.zrq.push(next());
            store.p.push(q + next());
            store.y.push(next());
            store.zr.push(next());
            store.w.push(next());
            store.r.push(next());
            store.h.push(next());
            store.k.push(next());
        }
        let fit = tsls(&store, &RegressionSpec::demand()).unwrap();
        assert!(fit.weak_instrument, "first stages: {:?}", fit.first_stage_r_squared);
    }

    #[test]
    fn sign_convention_flips_with_negated_quantity() {
        let data = dataset(0.5, 150, true, 11);
        let store = ColumnStore::from_dataset(&data);
        let fit = tsls(&store, &RegressionSpec::demand()).unwrap();

        let mut negated = store.clone();
        for v in &mut negated.q {
            *v = -*v;
        }
        let flipped = tsls(&negated, &RegressionSpec::demand()).unwrap();
        let tol = 1e-12 * fit.coefficients[1].abs().max(1.0);
        // coef(−Q) = −coef(Q), so the structural slope −coef(Q) is what
        // stays invariant under the data-side sign flip.
        assert!((flipped.coefficients[1] + fit.coefficients[1]).abs() < tol);
    }

    #[test]
    fn first_stage_modes_differ_on_noisy_data() {
        let data = dataset(0.5, 200, true, 23);
        let per_column = estimate_demand_with_mode(&data, FirstStageMode::PerEndogenous).unwrap();
        let quantity_only = estimate_demand_with_mode(&data, FirstStageMode::QuantityOnly).unwrap();
        let gap: f64 = per_column
            .coefficients
            .iter()
            .zip(&quantity_only.coefficients)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(gap > 1e-6, "modes unexpectedly coincide, gap = {gap}");
    }

    #[test]
    fn theta_undefined_when_rotation_coefficient_vanishes() {
        let data = dataset(0.5, 100, true, 5);
        let mut demand = estimate_demand(&data).unwrap();
        demand.coefficients[2] = 0.0;
        match estimate_supply(&data, &demand, true) {
            Err(Error::ThetaUndefined { alpha2_magnitude }) => assert_eq!(alpha2_magnitude, 0.0),
            other => panic!("expected ThetaUndefined, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn instrument_order_is_irrelevant(seed in 0u64..500, swap in 0usize..6) {
            let data = dataset(0.5, 80, true, seed);
            let store = ColumnStore::from_dataset(&data);
            let base = tsls(&store, &RegressionSpec::demand()).unwrap();

            let mut permuted = RegressionSpec::demand();
            let orders: [[usize; 3]; 6] =
                [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let instruments = permuted.instruments.clone();
            permuted.instruments = orders[swap].iter().map(|&i| instruments[i]).collect();
            let shuffled = tsls(&store, &permuted).unwrap();

            for (a, b) in base.coefficients.iter().zip(&shuffled.coefficients) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
