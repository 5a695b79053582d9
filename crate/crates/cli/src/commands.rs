use serde::Serialize;
use serde_json::json;
use skewdim::coding::{induced_ifs_maps, TruncatedAlphabet};
use skewdim::dimension::{
    bowen_dimension, global_dimension, summability_scan, variational_sweep, BowenRoot,
    GlobalDimension, SweepReport, Verdict,
};
use skewdim::empirics::{
    box_dimension, dyadic_scales, exactness_report, local_dimension, sample_measure, BoxDimension,
    ExactnessReport, ScaleWindow, Target,
};
use skewdim::smale::{verify_system, VerificationReport};
use skewdim::thermodynamics::{
    gibbs_markov, measure_stats, pressure_cylinder_sum, pressure_derivative_check, DerivativeCheck,
    GibbsSummary, MeasureStats, PressureEstimate,
};

use crate::config::{PotentialConfig, RunConfig};
use crate::export;
use crate::record::{unix_ms, OutputRecord};
use crate::{CliError, Command};

/// What a command hands back before the record is assembled.
struct Outcome {
    results: serde_json::Value,
    warnings: Vec<String>,
    files: Vec<String>,
}

pub fn execute(command: Command, config: &RunConfig) -> Result<OutputRecord, CliError> {
    let started = unix_ms();
    export::ensure_dir(&config.output_dir)?;
    let outcome = match command {
        Command::Pressure => pressure(config)?,
        Command::Dimension => dimension(config)?,
        Command::Sample => sample(config)?,
        Command::Verify => verify(config)?,
    };
    let name = format!("{}.json", command.name());
    let mut files = outcome.files;
    files.push(name.clone());
    let record = OutputRecord {
        command: command.name().to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        results: outcome.results,
        warnings: outcome.warnings,
        files,
    };
    export::write_json(&export::in_dir(&config.output_dir, &name), &record)?;
    Ok(record)
}

#[derive(Serialize)]
struct PressureRow {
    truncation: u64,
    cylinder_sum: PressureEstimate,
    gibbs: GibbsSummary,
    cross_method_difference: f64,
}

fn pressure(config: &RunConfig) -> Result<Outcome, CliError> {
    let system = config.build_system()?;
    let potential = config.potential(&system)?;
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    let mut warnings = Vec::new();
    for alphabet in config.alphabets()? {
        let est = pressure_cylinder_sum(&potential, &alphabet, config.depth, config.memory)?;
        let g = gibbs_markov(&potential, &alphabet, config.memory)?;
        let diff = (g.log_pressure() - est.extrapolated).abs();
        if diff > config.tolerances.cross_method {
            warnings.push(format!(
                "M = {}: transfer-matrix and cylinder-sum pressures differ by {diff:.3e}",
                alphabet.max_digit()
            ));
        }
        estimates.push((alphabet.max_digit(), est.clone()));
        rows.push(PressureRow {
            truncation: alphabet.max_digit(),
            cylinder_sum: est,
            gibbs: g.summary(),
            cross_method_difference: diff,
        });
    }
    export::write_pressure_csv(
        &export::in_dir(&config.output_dir, "pressure.csv"),
        &estimates,
    )?;
    Ok(Outcome {
        results: json!({ "truncations": rows }),
        warnings,
        files: vec!["pressure.csv".into()],
    })
}

/// Root of `sum r_i^s = 1` for finitely many ratios in `(0, 1)`.
pub fn moran_root(ratios: &[f64]) -> f64 {
    let f = |s: f64| ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Serialize)]
struct DimensionRow {
    truncation: u64,
    bowen: BowenRoot,
    moran_root: Option<f64>,
    moran_difference: Option<f64>,
    sweep: Option<SweepReport>,
}

#[derive(Serialize)]
struct GlobalReport {
    truncation: u64,
    stats: MeasureStats,
    dimension: GlobalDimension,
    branch_agreement: f64,
}

fn dimension(config: &RunConfig) -> Result<Outcome, CliError> {
    let system = config.build_system()?;
    let mut warnings = Vec::new();
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for alphabet in config.alphabets()? {
        let m = alphabet.max_digit();
        let bowen = bowen_dimension(&system, &alphabet, config.memory, config.tolerances.bowen)?;
        let moran = system.is_similarity().then(|| {
            let ratios: Vec<f64> = system
                .alphabet(&alphabet)
                .iter()
                .map(|s| system.symbol_derivative_sup(*s))
                .collect();
            moran_root(&ratios)
        });
        let sweep = if config.s_grid.is_empty() {
            None
        } else {
            let sweep = variational_sweep(
                &system,
                &alphabet,
                config.memory,
                &config.s_grid,
                config.tolerances.sweep,
            )?;
            if sweep.gap > config.tolerances.gap {
                warnings.push(format!(
                    "M = {m}: sweep gap {:.3e} exceeds {:.1e}",
                    sweep.gap, config.tolerances.gap
                ));
            }
            let name = format!("curve_M{m}.csv");
            export::write_curve_csv(&export::in_dir(&config.output_dir, &name), &sweep.curve)?;
            files.push(name);
            Some(sweep)
        };
        rows.push(DimensionRow {
            truncation: m,
            moran_difference: moran.map(|r| (r - bowen.root).abs()),
            moran_root: moran,
            bowen,
            sweep,
        });
    }

    let summability = if config.s_grid.is_empty() {
        None
    } else {
        let report = summability_scan(&system, &config.s_grid, &config.truncations)?;
        for (s, v) in config.s_grid.iter().zip(&report.verdicts) {
            if *v == Verdict::Inconclusive {
                warnings.push(format!("summability at s = {s} is inconclusive"));
            }
        }
        Some(report)
    };

    let alphabet = config.largest_alphabet()?;
    let g = gibbs_markov(&config.potential(&system)?, &alphabet, config.memory)?;
    let stats = measure_stats(&g, &system, &config.stats_options())?;
    let dimension = global_dimension(&stats)?;
    let global = GlobalReport {
        truncation: alphabet.max_digit(),
        stats,
        branch_agreement: (dimension.branch_b_value - dimension.branch_c_value).abs(),
        dimension,
    };
    Ok(Outcome {
        results: json!({ "truncations": rows, "summability": summability, "global": global }),
        warnings,
        files,
    })
}

#[derive(Serialize)]
struct LocalSummary {
    mean: f64,
    stddev: f64,
    window: ScaleWindow,
    centers_used: usize,
    dropped_centers: usize,
}

#[derive(Serialize)]
struct SampleReport {
    truncation: u64,
    points: usize,
    dim: usize,
    stats: Option<MeasureStats>,
    predicted: Option<f64>,
    local_dimension: Option<LocalSummary>,
    box_dimension: Option<BoxDimension>,
    exactness: Option<ExactnessReport>,
}

fn sample(config: &RunConfig) -> Result<Outcome, CliError> {
    let system = config.build_system()?;
    let alphabet = config.largest_alphabet()?;
    let g = gibbs_markov(&config.potential(&system)?, &alphabet, config.memory)?;
    let target = config.sample_target();
    let mc = &config.monte_carlo;
    let cloud = sample_measure(
        &g,
        &system,
        &target,
        mc.cloud_size,
        mc.cloud_depth,
        config.seed,
    )?;
    let mut warnings = Vec::new();

    let (stats, predicted) =
        match measure_stats(&g, &system, &config.stats_options()).and_then(|s| {
            let d = global_dimension(&s)?;
            Ok((s, d))
        }) {
            Ok((s, d)) => {
                let p = match target {
                    Target::Global => d.value,
                    Target::ZMarginal => d.z_part,
                    Target::Fiber(_) => d.fiber_part,
                };
                (Some(s), Some(p))
            }
            Err(e) => {
                warnings.push(format!("no predicted dimension: {e}"));
                (None, None)
            }
        };

    let local = match local_dimension(
        &cloud,
        &config.scale_window()?,
        mc.centers,
        config.seed.wrapping_add(1),
    ) {
        Ok(est) => Some(est),
        Err(e @ skewdim::Error::InsufficientScales { .. }) => {
            warnings.push(format!("local dimension skipped: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let scales = dyadic_scales(config.box_scales.first, config.box_scales.count);
    let boxes = box_dimension(&cloud, &scales)?;
    let exactness = match (&local, predicted) {
        (Some(est), Some(p)) => {
            let report = exactness_report(est, p, &config.tolerances.exactness);
            if !report.pass {
                warnings.push(format!(
                    "exactness check failed: bias {:.4}, dispersion {:.4}",
                    report.bias, report.dispersion
                ));
            }
            Some(report)
        }
        _ => None,
    };

    let mut files = vec!["cloud.csv".to_string()];
    export::write_cloud_csv(&export::in_dir(&config.output_dir, "cloud.csv"), &cloud)?;
    if config.binary_dump {
        export::write_cloud_binary(&export::in_dir(&config.output_dir, "cloud.f64"), &cloud)?;
        files.push("cloud.f64".into());
    }
    let report = SampleReport {
        truncation: alphabet.max_digit(),
        points: cloud.len(),
        dim: cloud.dim,
        stats,
        predicted,
        local_dimension: local.map(|est| LocalSummary {
            mean: est.mean,
            stddev: est.stddev,
            window: est.window,
            centers_used: est.per_point_slopes.len(),
            dropped_centers: est.dropped_centers,
        }),
        box_dimension: Some(boxes),
        exactness,
    };
    Ok(Outcome {
        results: serde_json::to_value(report)?,
        warnings,
        files,
    })
}

#[derive(Serialize)]
struct InducedSummary {
    truncation: u64,
    k_max: u32,
    maps: usize,
    max_derivative_sup: f64,
    all_contracting: bool,
}

#[derive(Serialize)]
struct DerivativeSummary {
    check: DerivativeCheck,
    monte_carlo_difference: f64,
    chain_difference: f64,
    allowance: f64,
    pass: bool,
}

fn verify(config: &RunConfig) -> Result<Outcome, CliError> {
    let system = config.build_system()?;
    let mc = &config.monte_carlo;
    let mut warnings = Vec::new();
    let mut reports: Vec<(u64, VerificationReport)> = Vec::new();
    for alphabet in config.alphabets()? {
        let report = verify_system(&system, &alphabet, config.depth, mc.verify_samples)?;
        if !report.osc_ok {
            warnings.push(format!(
                "M = {}: open set condition fails for {} pairs",
                alphabet.max_digit(),
                report.overlapping.len()
            ));
        }
        reports.push((alphabet.max_digit(), report));
    }

    let largest = config.largest_alphabet()?;
    let induced = induced_summary(&largest, mc.induced_k_max)?;
    if !induced.all_contracting {
        warnings.push(format!(
            "induced map sup {} is not below 1",
            induced.max_derivative_sup
        ));
    }

    let s = match config.potential {
        PotentialConfig::Geometric { s } => s,
        PotentialConfig::Constant { .. } => 1.0,
    };
    let check = pressure_derivative_check(
        &system,
        s,
        config.tolerances.finite_difference_step,
        &largest,
        config.memory,
        mc.samples,
        mc.past_depth,
        config.seed,
    )?;
    let allowance = config
        .tolerances
        .cross_method
        .max(2.0 * check.integral_std_error);
    let derivative = DerivativeSummary {
        monte_carlo_difference: (check.fd - check.integral).abs(),
        chain_difference: (check.fd - check.chain_integral).abs(),
        allowance,
        pass: (check.fd - check.integral).abs() <= allowance,
        check,
    };
    if !derivative.pass {
        warnings.push(format!(
            "derivative check: |fd - integral| = {:.3e} exceeds {allowance:.3e}",
            derivative.monte_carlo_difference
        ));
    }
    let systems: Vec<_> = reports
        .into_iter()
        .map(|(m, r)| json!({ "truncation": m, "report": r }))
        .collect();
    Ok(Outcome {
        results: json!({ "system": system.name(), "truncations": systems, "induced": induced, "derivative": derivative }),
        warnings,
        files: Vec::new(),
    })
}

fn induced_summary(alphabet: &TruncatedAlphabet, k_max: u32) -> Result<InducedSummary, CliError> {
    let maps = induced_ifs_maps(alphabet, k_max)?;
    let sup = maps.iter().map(|m| m.derivative_sup).fold(0.0, f64::max);
    Ok(InducedSummary {
        truncation: alphabet.max_digit(),
        k_max,
        maps: maps.len(),
        max_derivative_sup: sup,
        all_contracting: sup < 1.0,
    })
}
