//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Criteria 1-3, 7 and 10 run the full experiment grid twice (about ten minutes each
//! on one core with the test profile).

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nnsieve::penalty::{check_well_defined, gradient_sparsity_penalty, hidden_weight_l1};
use nnsieve::rng;
use nnsieve::sieve::{self, multiplier_process_estimate, project_to_sieve};
use nnsieve::simulate::{
    audit_cell, emit_plot_data, emit_tables, run_grid, ExperimentResult, F0Tag, GridConfig, Manifest,
    SummaryRow, TrueFunction,
};
use nnsieve::{ActivationKind, Matrix, NetworkParams, SieveSpec};
use rand::Rng;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u8, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn progress(msg: &str) {
    eprintln!("  .. {msg}");
}

fn row<'a>(summary: &'a [SummaryRow], f0: F0Tag, act: ActivationKind, n: usize) -> &'a SummaryRow {
    summary
        .iter()
        .find(|s| s.f0 == f0 && s.activation == act && s.n == n && s.hidden_units == 10)
        .expect("grid row present")
}

fn criterion_1(summary: &[SummaryRow]) -> Outcome {
    let a = row(summary, F0Tag::TwoUnitNet, ActivationKind::Tanh, 100);
    let b = row(summary, F0Tag::TwoUnitNet, ActivationKind::Tanh, 2000);
    let drop = a.est_error_mean / b.est_error_mean;
    let complete = a.failed == 0 && b.failed == 0 && a.runs == 5 && b.runs == 5;
    outcome(
        1,
        "consistency trend, tanh two_unit_net",
        complete && drop >= 5.0 && b.est_error_mean <= 5e-3,
        format!(
            "mean est_error {:.3e} (n=100) -> {:.3e} (n=2000), drop {:.1}x (need >= 5x and <= 5e-3)",
            a.est_error_mean, b.est_error_mean, drop
        ),
    )
}

fn criterion_2(summary: &[SummaryRow]) -> Outcome {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut bad = Vec::new();
    for s in summary {
        lo = lo.min(s.lsq_error_mean);
        hi = hi.max(s.lsq_error_mean);
        if !(0.40..=0.60).contains(&s.lsq_error_mean) || s.runs == 0 {
            bad.push(format!("{}_{}_n{}={:.3}", s.f0, s.activation, s.n, s.lsq_error_mean));
        }
    }
    outcome(
        2,
        "noise-floor recovery",
        bad.is_empty(),
        format!(
            "mean lsq_error range [{lo:.3}, {hi:.3}] over {} rows (need within [0.40, 0.60]){}",
            summary.len(),
            if bad.is_empty() { String::new() } else { format!("; outside: {}", bad.join(" ")) }
        ),
    )
}

fn criterion_3(summary: &[SummaryRow]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for f0 in F0Tag::ALL {
        let a = row(summary, f0, ActivationKind::Relu, 100);
        let b = row(summary, f0, ActivationKind::Relu, 2000);
        let ratio = b.est_error_mean / a.est_error_mean;
        pass &= ratio <= 0.5 && a.runs > 0 && b.runs > 0;
        parts.push(format!("{f0} {:.2e}->{:.2e} ({ratio:.3})", a.est_error_mean, b.est_error_mean));
    }
    outcome(3, "relu trend", pass, format!("{} (need ratio <= 0.5)", parts.join(", ")))
}

fn random_design<R: Rng>(rng: &mut R, n: usize, d: usize) -> Matrix {
    let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Matrix::from_row_major(n, d, data).unwrap()
}

fn risk(net: &NetworkParams, x: &Matrix, y: &[f64]) -> f64 {
    net.loss_and_gradient(x, y).unwrap().0
}

fn fd_relative_error(net: &NetworkParams, x: &Matrix, y: &[f64], h: f64) -> f64 {
    let analytic: Vec<f64> = net.loss_and_gradient(x, y).unwrap().1.to_flat();
    let theta = net.to_flat();
    let mut probe = net.clone();
    let mut numeric = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] = theta[k] + h;
        probe.set_flat(&t).unwrap();
        let up = risk(&probe, x, y);
        t[k] = theta[k] - h;
        probe.set_flat(&t).unwrap();
        let down = risk(&probe, x, y);
        numeric.push((up - down) / (2.0 * h));
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12)
}

fn min_abs_pre_activation(net: &NetworkParams, x: &Matrix) -> f64 {
    let mut m = f64::INFINITY;
    for row in x.iter_rows() {
        for j in 0..net.hidden_units() {
            m = m.min(net.pre_activation(j, row).abs());
        }
    }
    m
}

fn criterion_4() -> Outcome {
    const H: f64 = 1e-6;
    let mut rng = rng::stream(4, 0);
    let mut worst = [0.0f64; 2];
    let mut failures = [0usize; 2];
    let mut resampled = 0;
    for (slot, act) in [ActivationKind::Tanh, ActivationKind::Relu].into_iter().enumerate() {
        let mut done = 0;
        while done < 200 {
            let d = rng.gen_range(1..=3);
            let r = rng.gen_range(1..=8);
            let n = rng.gen_range(1..=20);
            let net = NetworkParams::random_uniform(act, d, r, 1.0, &mut rng).unwrap();
            let x = random_design(&mut rng, n, d);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if act == ActivationKind::Relu && min_abs_pre_activation(&net, &x) < 1e-4 {
                resampled += 1;
                continue;
            }
            let err = fd_relative_error(&net, &x, &y, H);
            worst[slot] = worst[slot].max(err);
            failures[slot] += usize::from(!(err <= 1e-5));
            done += 1;
        }
    }
    outcome(
        4,
        "gradient correctness",
        failures == [0, 0],
        format!(
            "200 tanh + 200 off-kink relu configs, h=1e-6: worst relative error {:.2e} / {:.2e}, failures {} / {} (need <= 1e-5; {resampled} relu draws resampled for kinks)",
            worst[0], worst[1], failures[0], failures[1]
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = rng::stream(5, 0);
    let (mut fwd, mut pen) = (0.0f64, 0.0f64);
    for i in 0..1000u64 {
        let d = rng.gen_range(1..=4);
        let r = rng.gen_range(1..=12);
        let net = NetworkParams::random_uniform(ActivationKind::Tanh, d, r, 2.0, &mut rng).unwrap();
        let report = check_well_defined(&net, 50, 1e-12, i).unwrap();
        fwd = fwd.max(report.max_forward_deviation);
        pen = pen.max(report.max_penalty_deviation);
    }
    outcome(
        5,
        "penalty well-definedness",
        fwd <= 1e-12 && pen <= 1e-12,
        format!("1000 tanh nets x 50 signed permutations: max forward deviation {fwd:.2e}, max penalty deviation {pen:.2e} (need <= 1e-12)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = rng::stream(6, 0);
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=4);
        let r = rng.gen_range(1..=12);
        let raw = NetworkParams::random_uniform(ActivationKind::Relu, d, r, 2.0, &mut rng).unwrap();
        let net = raw.canonicalize_relu().unwrap();
        let x = random_design(&mut rng, 64, d);
        let value = gradient_sparsity_penalty(&net, &x).unwrap().value;
        let bound = hidden_weight_l1(&net);
        // one ulp-scale allowance for the different summation orders of the two sides
        if value > bound * (1.0 + 1e-12) {
            violations += 1;
        }
        if bound > 0.0 {
            tightest = tightest.max(value / bound);
        }
    }
    outcome(
        6,
        "domination inequality",
        violations == 0,
        format!("1000 canonical relu nets, n=64: {violations} violations, largest penalty/bound ratio {tightest:.4}"),
    )
}

fn criterion_7(result: &ExperimentResult) -> Outcome {
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for rec in result.records.iter().filter(|r| {
        r.key.f0 == F0Tag::TwoUnitNet && r.key.activation == ActivationKind::Tanh && r.key.hidden_units == 10
    }) {
        let Ok((report, _)) = audit_cell(rec) else {
            failures += 1;
            continue;
        };
        if report.extremum_holds {
            checked += 1;
            worst = worst.max(report.residual);
            failures += usize::from(!(report.residual <= 1e-9));
        } else {
            skipped += 1;
        }
    }
    outcome(
        7,
        "basic-inequality audit",
        failures == 0 && checked > 0,
        format!("{checked} cells with the extremum check holding, {skipped} without; largest residual {worst:.2e} (need <= 1e-9), failures {failures}"),
    )
}

fn sig6(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-7 * b.abs()
}

fn criterion_8() -> Outcome {
    let tanh = SieveSpec::new(1, 2.0, 1.0, 1).unwrap();
    let values = [
        ("entropy integral tanh", sieve::entropy_integral_bound_tanh(&tanh).unwrap(), 42.124_301_563_746_55),
        ("covering tanh eps=1", sieve::covering_bound_tanh(&tanh, 1.0).unwrap(), 17.862_943_611_198_906),
        ("entropy integral relu", sieve::entropy_integral_bound_relu(&tanh).unwrap(), 26.967_172_471_668_77),
    ];
    let values_ok = values.iter().all(|(_, got, want)| sig6(*got, *want));

    let band = |ratios: &[f64]| {
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let mut tanh_ratios = Vec::new();
    let mut relu_ratios = Vec::new();
    for d in 1..=8 {
        for r in 1..=64usize {
            for k in 1..=10 {
                let v = f64::from(1u32 << k);
                let spec = SieveSpec::new(r, v, v, d).unwrap();
                let b = sieve::entropy_integral_bound_tanh(&spec).unwrap();
                tanh_ratios.push(b * b / (r as f64 * v * v * (r as f64 * v).ln()));
                if r >= 2 {
                    let b = sieve::entropy_integral_bound_relu(&spec).unwrap();
                    let rf = r as f64;
                    relu_ratios.push(b * b / (rf * rf * rf * v * v * rf.ln()));
                }
            }
        }
    }
    let (t_lo, t_hi) = band(&tanh_ratios);
    let (r_lo, r_hi) = band(&relu_ratios);
    let bands_ok = t_hi / t_lo <= 64.0 && r_hi / r_lo <= 64.0;
    outcome(
        8,
        "entropy arithmetic",
        values_ok && bands_ok,
        format!(
            "{}; tanh band [{t_lo:.1}, {t_hi:.1}] ratio {:.1}, relu band [{r_lo:.1}, {r_hi:.1}] ratio {:.1} (need values to 6 significant digits, band ratios <= 64)",
            values
                .iter()
                .map(|(name, got, _)| format!("{name} {got:.10}"))
                .collect::<Vec<_>>()
                .join(", "),
            t_hi / t_lo,
            r_hi / r_lo
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut configs = 0;
    let mut violations = 0;
    for act in [ActivationKind::Tanh, ActivationKind::Relu] {
        for r in [1usize, 4, 10] {
            for n in [50usize, 200] {
                let spec = SieveSpec::new(r, 2.0, 1.0, 1).unwrap();
                let mut rng = rng::stream(9, n as u64);
                let x = random_design(&mut rng, n, 1);
                let pi = match TrueFunction::two_unit_net(act).sieve_member(r) {
                    Some(Ok(p)) => project_to_sieve(&p, &spec).unwrap(),
                    _ => NetworkParams::zeros(act, 1, r).unwrap(),
                };
                let estimate = multiplier_process_estimate(&spec, &pi, &x, 500, 200, 9).unwrap();
                let bound = sieve::entropy_integral_bound(&spec, act).unwrap();
                configs += 1;
                violations += usize::from(!(estimate <= bound));
                worst_ratio = worst_ratio.max(estimate / bound);
            }
        }
    }
    outcome(
        9,
        "multiplier-process sanity",
        violations == 0,
        format!("{configs} configurations, net_count=500, mc_rounds=200: {violations} above the bound, largest estimate/bound {worst_ratio:.4}"),
    )
}

fn emit(result: &ExperimentResult, dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = emit_tables(result, dir).expect("tables");
    files.extend(emit_plot_data(result, dir, false).expect("plot data"));
    files
}

fn criterion_10(first_dir: &Path, first_files: &[std::path::PathBuf]) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    let grid = Manifest::read(first_dir).unwrap().grid;
    let started = Instant::now();
    let rerun = run_grid(&grid, Some(second.path())).expect("second run");
    progress(&format!("second grid run took {:.0?}", started.elapsed()));
    emit(&rerun, second.path());
    let mut differing = Vec::new();
    for f in first_files {
        let rel = f.strip_prefix(first_dir).unwrap();
        let a = std::fs::read(f).unwrap();
        let b = std::fs::read(second.path().join(rel)).unwrap_or_default();
        if a != b {
            differing.push(rel.display().to_string());
        }
    }
    outcome(
        10,
        "reproducibility",
        differing.is_empty() && !first_files.is_empty(),
        format!(
            "{} table and plot files compared after a full rerun from the manifest; {} differ{}",
            first_files.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();

    progress("closed-form and randomized checks");
    outcomes.push(criterion_4());
    outcomes.push(criterion_5());
    outcomes.push(criterion_6());
    outcomes.push(criterion_8());
    outcomes.push(criterion_9());

    let grid = GridConfig::default();
    let dir = tempfile::tempdir().unwrap();
    progress(&format!("running the experiment grid ({} cells)", grid.cells().len()));
    let started = Instant::now();
    let result = run_grid(&grid, Some(dir.path())).expect("grid run");
    progress(&format!("grid run took {:.0?}", started.elapsed()));
    let files = emit(&result, dir.path());
    let summary = result.summary();
    for s in &summary {
        progress(&format!(
            "{:>12} {:>4} n={:<5} est {:.3e} (sd {:.1e}) lsq {:.3e} failed {}",
            s.f0, s.activation, s.n, s.est_error_mean, s.est_error_sd, s.lsq_error_mean, s.failed
        ));
    }
    outcomes.push(criterion_1(&summary));
    outcomes.push(criterion_2(&summary));
    outcomes.push(criterion_3(&summary));
    outcomes.push(criterion_7(&result));
    outcomes.push(criterion_10(dir.path(), &files));

    outcomes.sort_by_key(|o| o.id);
    println!();
    for o in &outcomes {
        println!(
            "criterion {:>2} [{}] {}: {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("\n{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
