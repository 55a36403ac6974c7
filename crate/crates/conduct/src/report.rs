//! Rendering of summary tables: full-precision CSV for downstream
//! analysis, three-decimal Markdown panels for eyeballing against the
//! published layouts.

use std::fmt::Write;

use crate::montecarlo::{CellMoments, CellStats, Design, Parameter, SummaryTable};

/// Which statistic pair the Markdown panels show per sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLayout {
    /// Bias and RMSE columns, nine parameter rows.
    BiasRmse,
    /// Mean and SD columns, nine parameter rows plus the two R² rows.
    MeanSd,
}

impl Design {
    pub fn label(self) -> &'static str {
        match self {
            Design::WithShifter => "with-shifter",
            Design::WithoutShifter => "without-shifter",
        }
    }
}

/// CSV schema: `sigma,sample_size,parameter,statistic,value,failures`.
/// `failures` counts the replications excluded from that row's statistic;
/// the `cell` rows carry the per-cell failure tallies themselves.
pub fn summary_to_csv(table: &SummaryTable) -> String {
    let mut out = String::new();
    out.push_str("sigma,sample_size,parameter,statistic,value,failures\n");
    for cell in &table.cells {
        write_cell_moments(&mut out, cell, &cell.moments, "");
        if let Some(excl) = &cell.excluding_weak {
            write_cell_moments(&mut out, cell, excl, "_excl_weak");
        }
        let f = &cell.failures;
        for (statistic, count) in [
            ("rank_deficient_count", f.rank_deficient),
            ("theta_undefined_count", f.theta_undefined),
            ("weak_instrument_count", f.weak_instrument),
            ("degenerate_dgp_count", f.degenerate_dgp),
        ] {
            writeln!(out, "{},{},cell,{},{},0", cell.sigma, cell.sample_size, statistic, count)
                .unwrap();
        }
    }
    out
}

fn write_cell_moments(out: &mut String, cell: &CellStats, moments: &CellMoments, suffix: &str) {
    for (parameter, stats) in Parameter::ALL.iter().zip(&moments.params) {
        let excluded = cell.replications - stats.used;
        for (statistic, value) in [
            ("bias", stats.bias),
            ("rmse", stats.rmse),
            ("mean", stats.mean),
            ("sd", stats.sd),
        ] {
            writeln!(
                out,
                "{},{},{},{}{},{},{}",
                cell.sigma,
                cell.sample_size,
                parameter.label(),
                statistic,
                suffix,
                value,
                excluded
            )
            .unwrap();
        }
    }
    for (label, stats) in [("r2_demand", &moments.r2_demand), ("r2_supply", &moments.r2_supply)] {
        let excluded = cell.replications - stats.used;
        for (statistic, value) in [("mean", stats.mean), ("sd", stats.sd)] {
            writeln!(
                out,
                "{},{},{},{}{},{},{}",
                cell.sigma, cell.sample_size, label, statistic, suffix, value, excluded
            )
            .unwrap();
        }
    }
}

/// One Markdown panel per σ, column pairs per sample size, a trailing
/// `Sample size (T)` row, and a failure note whenever a cell excluded or
/// flagged replications.
pub fn summary_to_markdown(table: &SummaryTable, layout: TableLayout) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# Summary ({}, {} replications)",
        table.design.label(),
        table.replications
    )
    .unwrap();
    for &sigma in &table.sigmas {
        let cells: Vec<&CellStats> = table
            .sample_sizes
            .iter()
            .filter_map(|&t| table.cell(sigma, t))
            .collect();
        if cells.is_empty() {
            continue;
        }
        writeln!(out, "\n## sigma = {sigma}\n").unwrap();

        let (first, second) = match layout {
            TableLayout::BiasRmse => ("Bias", "RMSE"),
            TableLayout::MeanSd => ("Mean", "SD"),
        };
        let mut header = String::from("| |");
        let mut rule = String::from("| --- |");
        for _ in &cells {
            write!(header, " {first} | {second} |").unwrap();
            rule.push_str(" ---: | ---: |");
        }
        writeln!(out, "{header}").unwrap();
        writeln!(out, "{rule}").unwrap();

        for parameter in Parameter::ALL {
            let mut row = format!("| {} |", parameter.label());
            for cell in &cells {
                let stats = cell.param(parameter);
                let pair = match layout {
                    TableLayout::BiasRmse => (stats.bias, stats.rmse),
                    TableLayout::MeanSd => (stats.mean, stats.sd),
                };
                write!(row, " {:.3} | {:.3} |", pair.0, pair.1).unwrap();
            }
            writeln!(out, "{row}").unwrap();
        }
        if layout == TableLayout::MeanSd {
            for (label, pick) in [
                ("R2 (demand)", 0usize),
                ("R2 (supply)", 1usize),
            ] {
                let mut row = format!("| {label} |");
                for cell in &cells {
                    let stats = if pick == 0 {
                        &cell.moments.r2_demand
                    } else {
                        &cell.moments.r2_supply
                    };
                    write!(row, " {:.3} | {:.3} |", stats.mean, stats.sd).unwrap();
                }
                writeln!(out, "{row}").unwrap();
            }
        }
        let mut size_row = String::from("| Sample size (T) |");
        for cell in &cells {
            write!(size_row, "  | {} |", cell.sample_size).unwrap();
        }
        writeln!(out, "{size_row}").unwrap();

        for cell in &cells {
            let f = &cell.failures;
            if f.rank_deficient + f.theta_undefined + f.weak_instrument + f.degenerate_dgp > 0 {
                writeln!(
                    out,
                    "- T={}: rank_deficient={}, theta_undefined={}, weak_instrument={}, degenerate_dgp={}",
                    cell.sample_size,
                    f.rank_deficient,
                    f.theta_undefined,
                    f.weak_instrument,
                    f.degenerate_dgp
                )
                .unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StructuralParams;
    use crate::montecarlo::{run_grid, ExperimentGrid};

    fn tiny_table() -> SummaryTable {
        let grid = ExperimentGrid {
            sigmas: vec![0.5],
            sample_sizes: vec![50, 100],
            replications: 8,
            base_params: StructuralParams::baseline(0.0),
            design: Design::WithShifter,
            master_seed: 4,
        };
        run_grid(&grid).unwrap()
    }

    #[test]
    fn csv_values_round_trip() {
        let table = tiny_table();
        let csv = summary_to_csv(&table);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "sigma,sample_size,parameter,statistic,value,failures");
        let mut checked = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 6, "line: {line}");
            if fields[2] == "theta" && fields[3] == "bias" {
                let value: f64 = fields[4].parse().unwrap();
                let sample_size: usize = fields[1].parse().unwrap();
                let cell = table.cell(0.5, sample_size).unwrap();
                assert_eq!(value, cell.param(Parameter::Theta).bias);
                checked += 1;
            }
        }
        assert_eq!(checked, 2);
    }

    #[test]
    fn csv_row_count_matches_schema() {
        let table = tiny_table();
        let csv = summary_to_csv(&table);
        // Per cell: 9 params * 4 stats + 2 R² rows * 2 stats + 4 counts,
        // plus 40 more per cell when a weak-excluded block is present.
        let expected: usize = table
            .cells
            .iter()
            .map(|c| 44 + if c.excluding_weak.is_some() { 40 } else { 0 })
            .sum();
        assert_eq!(csv.lines().count(), 1 + expected);
    }

    #[test]
    fn markdown_mirrors_panel_layout() {
        let table = tiny_table();
        let md = summary_to_markdown(&table, TableLayout::BiasRmse);
        assert!(md.contains("## sigma = 0.5"));
        assert!(md.contains("| Sample size (T) |  | 50 |  | 100 |"));
        let header_cols = md
            .lines()
            .find(|l| l.contains("Bias"))
            .unwrap()
            .matches("Bias")
            .count();
        assert_eq!(header_cols, 2);
        // Bias/RMSE layout omits the R² rows.
        assert!(!md.contains("R2 (demand)"));

        let md_meansd = summary_to_markdown(&table, TableLayout::MeanSd);
        assert!(md_meansd.contains("R2 (demand)"));
        assert!(md_meansd.contains("R2 (supply)"));
        assert!(md_meansd.lines().any(|l| l.starts_with("| theta |")));
    }
}
