//! The five subcommands. Each writes its outputs plus the manifest needed to
//! regenerate them, and is deterministic for a fixed config and seed
//! regardless of worker count.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::clusters::{build_clusters, oracle_boolean_clusters};
use crate::concentration;
use crate::error::{Error, Result};
use crate::fitting;
use crate::metric::distance_matrix;
use crate::percolation::{
    self, critical_threshold_with, estimate_bytes, msc_indicator, EpsilonRule, SweepConfig,
};
use crate::states::sample_ensemble;

use super::config::{ConcentrationConfig, FitConfig, PercolateConfig, SweepCmdConfig};
use super::io::{
    self, fmt_float, FitCsvRow, SampleCsvRow, SweepCsvRow,
};

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn epsilon_rule(epsilon: Option<f64>) -> EpsilonRule<f64> {
    match epsilon {
        Some(e) => EpsilonRule::Fixed(e),
        None => EpsilonRule::CoupledToThreshold,
    }
}

// ---------------------------------------------------------------- percolate

/// Single-ensemble experiment: locate dS*, write the partition at dS* and
/// the critical-threshold record, print dS*.
pub fn cmd_percolate(config: &PercolateConfig) -> Result<()> {
    let dim = config.dim()?;
    let required = estimate_bytes::<f64>(dim, config.states);
    if required > config.memory_budget {
        return Err(Error::OverBudget {
            dim,
            n_states: config.states,
            required,
            budget: config.memory_budget,
        });
    }
    ensure_out_dir(&config.out)?;
    let ensemble = sample_ensemble::<f64>(config.states, dim, config.seed, config.sample_index)?;
    let dm = distance_matrix(&ensemble);
    let rule = epsilon_rule(config.epsilon);
    let point = critical_threshold_with(&dm, config.tol, rule)?;
    let partition = build_clusters(&dm, point.critical_delta_s)?;
    let eps_at_star = match rule {
        EpsilonRule::Fixed(e) => e,
        EpsilonRule::CoupledToThreshold => point.critical_delta_s,
    };

    io::write_json(
        &config.out.join("partition.json"),
        &partition.to_json(eps_at_star),
    )?;
    let result = percolation::CriticalThresholdResult {
        dim,
        n_states: config.states,
        seed: config.seed,
        sample_index: config.sample_index,
        critical_delta_s: point.critical_delta_s,
        msc_witness: point.msc_witness,
        bisection_iterations: point.bisection_iterations,
    };
    io::write_json(
        &config.out.join("critical.json"),
        &serde_json::json!({
            "tool": "hperc",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "percolate",
            "config": config,
            "result": result,
        }),
    )?;
    println!("{}", fmt_float(point.critical_delta_s));
    Ok(())
}

// -------------------------------------------------------------------- sweep

/// Grid sweep: aggregate critical thresholds per (N, M), resumable.
pub fn cmd_sweep(config: &SweepCmdConfig, resume: bool) -> Result<()> {
    let dims = config.dims()?;
    ensure_out_dir(&config.out)?;
    let csv_path = config.out.join("sweep.csv");
    let samples_path = config.out.join("sweep_samples.csv");

    // Rows from a previous run are reused only when their replication
    // parameters match the current config.
    let mut cached: HashMap<(usize, usize), SweepCsvRow> = HashMap::new();
    let mut cached_samples: HashMap<(usize, usize), Vec<SampleCsvRow>> = HashMap::new();
    if resume && csv_path.exists() {
        for row in io::read_sweep_csv(&csv_path)? {
            if row.n_samples == config.samples && row.seed == config.seed && row.tol == config.tol
            {
                cached.insert((row.dim, row.n_states), row);
            }
        }
        if config.per_sample && samples_path.exists() {
            for row in io::read_samples_csv(&samples_path)? {
                cached_samples
                    .entry((row.dim, row.n_states))
                    .or_default()
                    .push(row);
            }
        }
    }

    let sweep = SweepConfig {
        dims: dims.clone(),
        state_counts: config.states.clone(),
        n_samples: config.samples,
        seed: config.seed,
        tol: config.tol,
        epsilon_override: config.epsilon,
        memory_budget_bytes: config.memory_budget,
    };
    let records =
        percolation::run_sweep_filtered(&sweep, |d, m| !cached.contains_key(&(d, m)))?;
    let computed: HashMap<(usize, usize), &crate::SweepRecord64> = records
        .iter()
        .map(|r| ((r.dim, r.n_states), r))
        .collect();

    let mut rows = Vec::new();
    let mut sample_rows = Vec::new();
    for &dim in &dims {
        for &m in &config.states {
            if let Some(record) = computed.get(&(dim, m)) {
                rows.push(SweepCsvRow {
                    dim,
                    n_states: m,
                    n_samples: record.n_samples,
                    mean_delta_s: record.mean_critical_delta_s,
                    std_err: record.std_error,
                    seed: config.seed,
                    tol: config.tol,
                });
                for (idx, &delta_s) in record.samples.iter().enumerate() {
                    sample_rows.push(SampleCsvRow {
                        dim,
                        n_states: m,
                        sample_index: idx as u64,
                        delta_s,
                    });
                }
            } else {
                rows.push(cached[&(dim, m)].clone());
                if let Some(old) = cached_samples.get(&(dim, m)) {
                    sample_rows.extend(old.iter().cloned());
                }
            }
        }
    }

    io::write_sweep_csv(&csv_path, &rows)?;
    let mut outputs = vec!["sweep.csv"];
    if config.per_sample {
        io::write_samples_csv(&samples_path, &sample_rows)?;
        outputs.push("sweep_samples.csv");
    }
    outputs.push("sweep_manifest.json");
    io::write_manifest(
        &config.out.join("sweep_manifest.json"),
        "sweep",
        config,
        &outputs,
    )?;
    eprintln!(
        "sweep: {} grid points ({} computed, {} reused) -> {}",
        rows.len(),
        records.len(),
        rows.len() - records.len(),
        csv_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------- fit

/// Per-dimension power-law fits plus the cross-dimension meta-laws.
pub fn cmd_fit(config: &FitConfig) -> Result<()> {
    let rows = io::read_sweep_csv(&config.input)?;
    ensure_out_dir(&config.out)?;

    let (dim_lo, dim_hi) = config.dim_window();
    let mut by_dim: BTreeMap<usize, Vec<&SweepCsvRow>> = BTreeMap::new();
    for row in &rows {
        if row.n_states >= config.m_min
            && row.n_states <= config.m_max
            && row.dim >= dim_lo
            && row.dim <= dim_hi
        {
            by_dim.entry(row.dim).or_default().push(row);
        }
    }
    if by_dim.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no rows of {} fall inside the fit window M in [{}, {}], N in [{}, {}]",
            config.input.display(),
            config.m_min,
            config.m_max,
            config.n_min,
            config.n_max
        )));
    }

    let mut fit_rows = Vec::new();
    let mut points_a = Vec::new();
    let mut points_b = Vec::new();
    for (&dim, dim_rows) in &by_dim {
        let mut dim_rows = dim_rows.clone();
        dim_rows.sort_by_key(|r| r.n_states);
        let points: Vec<(usize, f64)> = dim_rows
            .iter()
            .map(|r| (r.n_states, r.mean_delta_s))
            .collect();
        let sigmas: Vec<f64> = dim_rows.iter().map(|r| r.std_err).collect();
        let fit = fitting::fit_power_law(&points, config.weighted.then_some(sigmas.as_slice()))
            .map_err(|e| Error::InvalidData(format!("dim {dim}: {e}")))?;
        fit_rows.push(FitCsvRow {
            dim,
            a: fit.a,
            se_a: fit.se_a,
            b: fit.b,
            se_b: fit.se_b,
            r2: fit.r_squared,
        });
        points_a.push((dim, fit.a));
        points_b.push((dim, fit.b));
        println!(
            "dim {:>6}: A = {:.6} +- {:.2e}, B = {:.6} +- {:.2e}, r2 = {:.4}",
            dim, fit.a, fit.se_a, fit.b, fit.se_b, fit.r_squared
        );
    }
    io::write_fits_csv(&config.out.join("fits.csv"), &fit_rows)?;

    let mut outputs = vec!["fits.csv"];
    match fitting::fit_meta(&points_a, &points_b) {
        Ok(meta) => {
            println!(
                "meta: A(D) = {:.5} - {:.4}*D^(-{:.4}), B(D) = {:.4}*D^(-{:.4})",
                meta.gamma_a, meta.alpha_a, meta.beta_a, meta.alpha_b, meta.beta_b
            );
            io::write_json(
                &config.out.join("metafit.json"),
                &serde_json::json!({
                    "tool": "hperc",
                    "version": env!("CARGO_PKG_VERSION"),
                    "command": "fit",
                    "config": config,
                    "meta": meta,
                }),
            )?;
            outputs.push("metafit.json");
        }
        Err(
            e @ (Error::InsufficientData(_) | Error::DegenerateFit(_) | Error::InvalidData(_)),
        ) => {
            eprintln!("warning: meta-fit skipped: {e}");
        }
        Err(e) => return Err(e),
    }
    outputs.push("fit_manifest.json");
    io::write_manifest(
        &config.out.join("fit_manifest.json"),
        "fit",
        config,
        &outputs,
    )?;
    Ok(())
}

// ------------------------------------------------------------- concentration

/// Analytic bound vs empirical tail, one CSV row per (D, eps).
pub fn cmd_concentration(config: &ConcentrationConfig) -> Result<()> {
    let grid = config.grid()?;
    ensure_out_dir(&config.out)?;
    let mut reports = Vec::with_capacity(grid.len());
    for &(dim, eps) in &grid {
        let report = concentration::empirical_tail::<f64>(dim, eps, config.pairs, config.seed)?;
        println!(
            "dim {:>6} eps {:.6e}: bound = {:.6e}, empirical = {:.6e} (ci99 {:.2e}), P_L.B. = {:.8}",
            dim,
            eps,
            report.analytic_bound,
            report.empirical_tail,
            report.ci_halfwidth,
            report.lower_bound_plb
        );
        reports.push(report);
    }
    io::write_concentration_csv(&config.out.join("concentration.csv"), &reports, config.seed)?;
    io::write_manifest(
        &config.out.join("concentration_manifest.json"),
        "concentration",
        config,
        &["concentration.csv", "concentration_manifest.json"],
    )?;
    Ok(())
}

// ----------------------------------------------------------------- selftest

type Check = (&'static str, fn() -> std::result::Result<(), String>);

fn check_oracle_equivalence() -> std::result::Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
    for case in 0..50 {
        let m = rng.gen_range(2..=40);
        let dim = [2, 4, 8][rng.gen_range(0..3)];
        let e = sample_ensemble::<f64>(m, dim, rng.gen(), 0).map_err(|e| e.to_string())?;
        let dm = distance_matrix(&e);
        let t = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
        let fast = build_clusters(&dm, t).map_err(|e| e.to_string())?;
        let slow = oracle_boolean_clusters(&dm, t).map_err(|e| e.to_string())?;
        if fast.as_sets() != slow.as_sets() {
            return Err(format!("partition mismatch on case {case} (M={m}, D={dim})"));
        }
    }
    Ok(())
}

fn check_two_state_closed_form() -> std::result::Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
    let tol = 1e-4;
    for _ in 0..30 {
        let dim = [2, 16][rng.gen_range(0..2)];
        let e = sample_ensemble::<f64>(2, dim, rng.gen(), 0).map_err(|e| e.to_string())?;
        let dm = distance_matrix(&e);
        let d = dm.get(0, 1);
        let expect = d.max(std::f64::consts::FRAC_PI_2 - d);
        let got = percolation::critical_threshold(&dm, tol)
            .map_err(|e| e.to_string())?
            .critical_delta_s;
        if (got - expect).abs() > 2.0 * tol {
            return Err(format!("dS* = {got}, closed form {expect}"));
        }
    }
    Ok(())
}

fn check_monotone_indicator() -> std::result::Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
    for _ in 0..10 {
        let e = sample_ensemble::<f64>(rng.gen_range(2..=40), 4, rng.gen(), 0)
            .map_err(|e| e.to_string())?;
        let dm = distance_matrix(&e);
        for _ in 0..10 {
            let a = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
            let b = rng.gen_range(a..std::f64::consts::FRAC_PI_2);
            let at_a = msc_indicator(&dm, a).map_err(|e| e.to_string())?;
            let at_b = msc_indicator(&dm, b).map_err(|e| e.to_string())?;
            if at_a && !at_b {
                return Err(format!("indicator true at {a} but false at {b}"));
            }
        }
    }
    Ok(())
}

fn check_bound_components() -> std::result::Result<(), String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
    for _ in 0..200 {
        let dim = 1usize << rng.gen_range(1..12);
        let eps: f64 = 10f64.powf(rng.gen_range(-6.0..1.0));
        let c = concentration::bound_components(dim, eps).map_err(|e| e.to_string())?;
        let full = concentration::analytic_bound(dim, eps).map_err(|e| e.to_string())?;
        if (c.p_plus_bound + c.p_minus_bound - full).abs() > 1e-12 {
            return Err(format!("branch sum off at D={dim}, eps={eps}"));
        }
        let de = dim as f64 * eps;
        let want = (de * de).min(1.0);
        if c.x_plus_max != want {
            return Err(format!("x_plus_max {} != {want}", c.x_plus_max));
        }
    }
    Ok(())
}

fn check_plb_table() -> std::result::Result<(), String> {
    for (n, expect) in [(6u32, 0.9267f64), (7, 0.99866), (8, 0.99999955)] {
        let got = concentration::lower_bound_plb::<f64>(1usize << n).map_err(|e| e.to_string())?;
        if (got - expect).abs() > 5e-4 {
            return Err(format!("P_L.B.({n} qubits) = {got}, expected ~{expect}"));
        }
    }
    Ok(())
}

fn check_fit_round_trip() -> std::result::Result<(), String> {
    let ms = [2usize, 4, 8, 16, 32, 64, 128, 256];
    let points: Vec<(usize, f64)> = ms
        .iter()
        .map(|&m| (m, std::f64::consts::FRAC_PI_2 * 0.7 * (m as f64).powf(-0.3)))
        .collect();
    let fit = fitting::fit_power_law(&points, None).map_err(|e| e.to_string())?;
    if (fit.a - 0.7).abs() > 1e-10 || (fit.b - 0.3).abs() > 1e-10 {
        return Err(format!("power law round trip: A={}, B={}", fit.a, fit.b));
    }
    let dims: Vec<usize> = (7..=14).map(|n| 1usize << n).collect();
    let pa: Vec<(usize, f64)> = dims
        .iter()
        .map(|&d| (d, 1.0 - 0.33 * (d as f64).powf(-0.47)))
        .collect();
    let pb: Vec<(usize, f64)> = dims
        .iter()
        .map(|&d| (d, 0.182 * (d as f64).powf(-0.522)))
        .collect();
    let meta = fitting::fit_meta(&pa, &pb).map_err(|e| e.to_string())?;
    if (meta.gamma_a - 1.0).abs() > 1e-6
        || (meta.alpha_b - 0.182).abs() > 1e-6
        || (meta.beta_b - 0.522).abs() > 1e-6
    {
        return Err("meta-law round trip drifted".into());
    }
    Ok(())
}

fn check_sampler_contracts() -> std::result::Result<(), String> {
    for dim in [2usize, 64] {
        let a = sample_ensemble::<f64>(4, dim, 99, 0).map_err(|e| e.to_string())?;
        let b = sample_ensemble::<f64>(4, dim, 99, 0).map_err(|e| e.to_string())?;
        if a.states() != b.states() {
            return Err("regeneration is not bit-identical".into());
        }
        for s in a.states() {
            if (s.norm_sqr() - 1.0).abs() > 1e-12 {
                return Err(format!("norm deviation {} at dim {dim}", s.norm_sqr() - 1.0));
            }
        }
    }
    Ok(())
}

/// Run the built-in verification battery, one pass/fail line per check.
pub fn cmd_selftest() -> Result<()> {
    let checks: [Check; 7] = [
        ("oracle-equivalence", check_oracle_equivalence),
        ("two-state-closed-form", check_two_state_closed_form),
        ("monotone-indicator", check_monotone_indicator),
        ("bound-components", check_bound_components),
        ("plb-table", check_plb_table),
        ("fit-round-trip", check_fit_round_trip),
        ("sampler-contracts", check_sampler_contracts),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("selftest {name}: ok"),
            Err(msg) => {
                failed += 1;
                println!("selftest {name}: FAILED ({msg})");
            }
        }
    }
    if failed > 0 {
        Err(Error::SelftestFailed { failed })
    } else {
        Ok(())
    }
}
