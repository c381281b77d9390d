use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::grid::{write_atomic, CellKey, CellRecord, ExperimentResult, GridConfig};
use super::{generate_dataset, F0Tag, TrueFunction};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::model::ActivationKind;
use crate::penalty::PenaltySpec;
use crate::trainer::{self, AuditReport, TrainConfig};

/// Number of evaluation points of each plotted curve.
pub const PLOT_POINTS: usize = 1001;

/// `PLOT_POINTS` equally spaced points from `low` to `high`, both included.
pub fn plot_grid(low: f64, high: f64) -> Vec<f64> {
    let step = (high - low) / (PLOT_POINTS - 1) as f64;
    (0..PLOT_POINTS)
        .map(|i| if i == PLOT_POINTS - 1 { high } else { low + step * i as f64 })
        .collect()
}

/// The target and one fitted curve per sample size, evaluated on [`plot_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub f0: F0Tag,
    pub activation: ActivationKind,
    pub hidden_units: usize,
    pub seed: u64,
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub fits: Vec<(usize, Vec<f64>)>,
}

impl PlotData {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,f0");
        for (n, _) in &self.fits {
            let _ = write!(out, ",fhat_n{n}");
        }
        out.push('\n');
        for i in 0..self.x.len() {
            let _ = write!(out, "{:?},{:?}", self.x[i], self.truth[i]);
            for (_, ys) in &self.fits {
                let _ = write!(out, ",{:?}", ys[i]);
            }
            out.push('\n');
        }
        out
    }
}

fn headline_key(grid: &GridConfig, f0: F0Tag, activation: ActivationKind, n: usize) -> CellKey {
    CellKey {
        f0,
        activation,
        n,
        hidden_units: grid.table_width(),
        seed: grid.seeds[0],
    }
}

fn ensure_nonempty(result: &ExperimentResult) -> Result<()> {
    if result.is_empty() {
        Err(Error::EmptyResult)
    } else {
        Ok(())
    }
}

/// Plot data for every (target, activation) pair, using the headline width and the first
/// seed. Every needed cell has to be present and fitted.
pub fn build_plot_data(result: &ExperimentResult) -> Result<Vec<PlotData>> {
    ensure_nonempty(result)?;
    let grid = &result.grid;
    let x = plot_grid(grid.x_low, grid.x_high);
    let xm = Matrix::column(x.clone())?;
    let mut missing = Vec::new();
    let mut plots = Vec::new();
    for &f0 in &grid.f0s {
        for &activation in &grid.activations {
            let truth = f0.instantiate(activation).eval_batch(&xm)?;
            let mut fits = Vec::new();
            for &n in &grid.sample_sizes {
                let key = headline_key(grid, f0, activation, n);
                match result.get(&key).and_then(CellRecord::fit) {
                    Some(fit) => fits.push((n, fit.final_params.forward_batch(&xm)?)),
                    None => missing.push(key.id()),
                }
            }
            plots.push(PlotData {
                f0,
                activation,
                hidden_units: grid.table_width(),
                seed: grid.seeds[0],
                x: x.clone(),
                truth,
                fits,
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    Ok(plots)
}

/// Writes `plots/<f0>_<activation>.csv` (and `.svg` when asked) under `dir`.
pub fn emit_plot_data(result: &ExperimentResult, dir: impl AsRef<Path>, svg: bool) -> Result<Vec<PathBuf>> {
    let plots = build_plot_data(result)?;
    let plot_dir = dir.as_ref().join("plots");
    let mut written = Vec::new();
    for p in &plots {
        let stem = format!("{}_{}", p.f0, p.activation);
        let path = plot_dir.join(format!("{stem}.csv"));
        write_atomic(&path, p.to_csv().as_bytes())?;
        written.push(path);
        if svg {
            let path = plot_dir.join(format!("{stem}.svg"));
            write_atomic(&path, render_svg(p).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const SVG_PAD: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// A small self-contained SVG line chart of the target (black) and the fits.
pub fn render_svg(plot: &PlotData) -> String {
    let ys = plot.truth.iter().chain(plot.fits.iter().flat_map(|(_, v)| v.iter()));
    let (mut lo, mut hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let (x0, x1) = (plot.x[0], plot.x[plot.x.len() - 1]);
    let sx = |x: f64| SVG_PAD + (x - x0) / (x1 - x0) * (SVG_W - 2.0 * SVG_PAD);
    let sy = |y: f64| SVG_H - SVG_PAD - (y - lo) / (hi - lo) * (SVG_H - 2.0 * SVG_PAD);
    let polyline = |values: &[f64], colour: &str, width: f64| {
        let mut pts = String::new();
        for (x, y) in plot.x.iter().zip(values) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            pts.trim_end()
        )
    };
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    );
    if plot.f0 == F0Tag::TwoUnitNet {
        let _ = writeln!(out, "<title>{}</title>", super::two_unit_net_description());
    }
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        out,
        "<text x=\"{SVG_PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{} / {} (r = {}, seed {})</text>",
        plot.f0, plot.activation, plot.hidden_units, plot.seed
    );
    let _ = writeln!(
        out,
        "<rect x=\"{SVG_PAD}\" y=\"{SVG_PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
        SVG_W - 2.0 * SVG_PAD,
        SVG_H - 2.0 * SVG_PAD
    );
    for (i, (n, values)) in plot.fits.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        out.push_str(&polyline(values, colour, 1.2));
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{colour}\">n = {n}</text>",
            SVG_W - SVG_PAD - 70.0,
            SVG_PAD + 14.0 * (i + 1) as f64
        );
    }
    out.push_str(&polyline(&plot.truth, "#000", 2.0));
    out.push_str("</svg>\n");
    out
}

fn sci(v: f64) -> String {
    format!("{v:.2e}")
}

/// Writes `tables/<activation>.csv` (seed means at the headline width, one row per n)
/// and `tables/summary.csv` (means and standard deviations for every grid coordinate).
pub fn emit_tables(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    ensure_nonempty(result)?;
    let grid = &result.grid;
    let summary = result.summary();
    let width = grid.table_width();
    let table_dir = dir.as_ref().join("tables");
    let mut written = Vec::new();
    for &activation in &grid.activations {
        let mut out = String::from("n");
        for f0 in &grid.f0s {
            let _ = write!(out, ",{f0}_est_error,{f0}_lsq_error");
        }
        out.push('\n');
        for &n in &grid.sample_sizes {
            let _ = write!(out, "{n}");
            for &f0 in &grid.f0s {
                let row = summary
                    .iter()
                    .find(|s| s.f0 == f0 && s.activation == activation && s.n == n && s.hidden_units == width);
                match row {
                    Some(s) if s.runs > 0 => {
                        let _ = write!(out, ",{},{}", sci(s.est_error_mean), sci(s.lsq_error_mean));
                    }
                    _ => out.push_str(",NA,NA"),
                }
            }
            out.push('\n');
        }
        let path = table_dir.join(format!("{activation}.csv"));
        write_atomic(&path, out.as_bytes())?;
        written.push(path);
    }

    let mut out = String::from(
        "f0,activation,n,hidden_units,runs,failed,est_error_mean,est_error_sd,lsq_error_mean,lsq_error_sd\n",
    );
    for s in &summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.f0,
            s.activation,
            s.n,
            s.hidden_units,
            s.runs,
            s.failed,
            sci(s.est_error_mean),
            sci(s.est_error_sd),
            sci(s.lsq_error_mean),
            sci(s.lsq_error_sd)
        );
    }
    let path = table_dir.join("summary.csv");
    write_atomic(&path, out.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Basic-inequality audit of a fitted cell. The dataset is regenerated from the cell's
/// configuration. The second value is `true` when `pi_n f0` is exact (the two-unit target
/// padded with zero units); for other targets it is approximated by an unpenalized fit to
/// the noiseless target values.
pub fn audit_cell(record: &CellRecord) -> Result<(AuditReport, bool)> {
    let fit = record
        .fit()
        .ok_or_else(|| Error::InvalidConfig(format!("cell {} has no fit to audit", record.id)))?;
    let sim = &record.sim;
    let data = generate_dataset(sim)?;
    let generation = data.generation.as_ref().expect("generated datasets record their noise");
    let (pi, exact) = projection_of_target(&sim.f0, &sim.train, &data.x, &generation.f0_values)?;
    let report =
        trainer::audit_basic_inequality(fit, &pi, &generation.f0_values, &generation.noise, &data.x)?;
    Ok((report, exact))
}

fn projection_of_target(
    f0: &TrueFunction,
    train: &TrainConfig,
    x: &Matrix,
    f0_values: &[f64],
) -> Result<(crate::model::NetworkParams, bool)> {
    if let Some(pi) = f0.sieve_member(train.sieve.r_n) {
        return Ok((pi?, true));
    }
    let config = TrainConfig {
        penalty: PenaltySpec::new(train.penalty.kind, 0.0)?,
        ..train.clone()
    };
    Ok((trainer::fit(x, f0_values, &config)?.final_params, false))
}

#[cfg(test)]
mod tests {
    use super::super::grid::{run_grid, BaseTrainConfig};
    use super::*;

    fn small() -> GridConfig {
        GridConfig {
            f0s: vec![F0Tag::TwoUnitNet, F0Tag::Complex],
            activations: vec![ActivationKind::Tanh],
            sample_sizes: vec![30, 60],
            hidden_units: vec![4],
            seeds: vec![3],
            train: BaseTrainConfig {
                iterations: 40,
                ..BaseTrainConfig::default()
            },
            ..GridConfig::default()
        }
    }

    #[test]
    fn plot_grid_endpoints() {
        let g = plot_grid(-2.0, 2.0);
        assert_eq!(g.len(), PLOT_POINTS);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[500], 0.0);
        assert_eq!(g[1000], 2.0);
    }

    #[test]
    fn tables_and_plots_are_written_and_deterministic() {
        let result = run_grid(&small(), None).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files = emit_tables(&result, a.path()).unwrap();
        emit_tables(&result, b.path()).unwrap();
        let table = std::fs::read_to_string(a.path().join("tables/tanh.csv")).unwrap();
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,two_unit_net_est_error,two_unit_net_lsq_error,complex_est_error,complex_lsq_error"
        );
        assert!(lines.next().unwrap().starts_with("30,"));
        for f in &files {
            let rel = f.strip_prefix(a.path()).unwrap();
            assert_eq!(std::fs::read(f).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
        }

        emit_plot_data(&result, a.path(), true).unwrap();
        let csv = std::fs::read_to_string(a.path().join("plots/complex_tanh.csv")).unwrap();
        assert_eq!(csv.lines().count(), PLOT_POINTS + 1);
        assert_eq!(csv.lines().next().unwrap(), "x,f0,fhat_n30,fhat_n60");
        assert!(std::fs::read_to_string(a.path().join("plots/complex_tanh.svg"))
            .unwrap()
            .starts_with("<svg"));
    }

    #[test]
    fn empty_and_incomplete_results_are_errors() {
        let grid = small();
        let empty = ExperimentResult { grid: grid.clone(), records: vec![] };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_tables(&empty, dir.path()), Err(Error::EmptyResult)));
        let mut result = run_grid(&grid, None).unwrap();
        result.records.remove(1);
        match emit_plot_data(&result, dir.path(), false) {
            Err(Error::MissingCells(ids)) => assert_eq!(ids, vec!["two_unit_net_tanh_n60_h4_s3".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn audit_of_a_two_unit_cell_is_exact() {
        let result = run_grid(&small(), None).unwrap();
        let (report, exact) = audit_cell(&result.records[0]).unwrap();
        assert!(exact);
        let expected = report.objective_fit - report.objective_projection - report.eta_slack;
        assert!((report.residual - expected).abs() <= 1e-9);
    }
}
