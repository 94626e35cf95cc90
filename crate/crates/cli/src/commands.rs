//! Subcommand implementations.

use std::path::PathBuf;

use phasecorr::activation::witness_report;
use phasecorr::filter::{FilterSettings, FilterTable, PatternTable};
use phasecorr::fock::coherence_measure;
use phasecorr::gaussian::{bin_phases, sample_dataset};
use phasecorr::quasiprob::{
    ensemble_stats, normalization_check, pomega_oracle, significance, width_scan, PhaseSpaceGrid,
};
use phasecorr::tomography::{
    coherence_with_errors, ks_test, monte_carlo_errors, normal_cdf, offdiagonal_histogram,
    offdiagonal_z_scores, reconstruct_dm, MIN_MC_REPS,
};
use phasecorr::{
    Error, PhaseNoiseModel, QuadratureDataset, Result, Source, SqueezingSpec, Subsystem,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    Command, OracleArgs, PomegaArgs, RunConfig, ScanWidthArgs, SimulateArgs, TomoArgs, WitnessArgs,
};
use crate::output::Output;

const DATASET_FILE: &str = "dataset.pqds";
const COHERENCE_RESAMPLES: usize = 200;

pub fn run(config: &RunConfig) -> Result<()> {
    let out = Output::new(config)?;
    match &config.command {
        Command::Simulate(args) => simulate(config, &out, args),
        Command::Tomo(args) => tomo(config, &out, args),
        Command::Pomega(args) => pomega(config, &out, args),
        Command::ScanWidth(args) => scan_width(config, &out, args),
        Command::Witness(args) => witness(&out, args),
        Command::Oracle(args) => oracle(&out, args),
    }
}

fn filter_table() -> Result<FilterTable> {
    FilterTable::build(FilterSettings::default())
}

fn input_path(config: &RunConfig, input: &Option<PathBuf>) -> PathBuf {
    input
        .clone()
        .unwrap_or_else(|| config.out.join(DATASET_FILE))
}

fn load(config: &RunConfig, input: &Option<PathBuf>) -> Result<QuadratureDataset> {
    let path = input_path(config, input);
    QuadratureDataset::read(&path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

/// Squeezing and noise of a simulated TMSV dataset, if the sidecar records them.
fn simulated_state(ds: &QuadratureDataset) -> Option<(SqueezingSpec, PhaseNoiseModel)> {
    match (ds.meta().source, ds.meta().noise) {
        (Some(Source::Tmsv(spec)), Some(noise)) => Some((spec, noise)),
        _ => None,
    }
}

fn second_moment(ds: &QuadratureDataset, mode: Subsystem) -> (f64, f64) {
    let n = ds.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for r in ds.records() {
        let x = match mode {
            Subsystem::A => r.x_a,
            Subsystem::B => r.x_b,
        };
        s += x;
        s2 += x * x;
    }
    let mean = s / n;
    (mean, s2 / n - mean * mean)
}

fn simulate(config: &RunConfig, out: &Output<'_>, args: &SimulateArgs) -> Result<()> {
    let spec = args.state.spec()?;
    let noise = args.noise_model();
    noise.validate()?;
    if args.n.0 == 0 {
        return Err(Error::invalid("record count must be positive"));
    }
    let ds = sample_dataset(&spec, &noise, args.n.0, &args.phase_schedule(), config.seed)?;
    let path = out.path(DATASET_FILE);
    ds.write(&path)?;
    out.stamp_json(&QuadratureDataset::sidecar_path(&path))?;
    let (mean_a, var_a) = second_moment(&ds, Subsystem::A);
    let (mean_b, var_b) = second_moment(&ds, Subsystem::B);
    println!("wrote {} records to {}", ds.len(), path.display());
    println!(
        "squeezing r = {:.6} ({:.3} dB before losses), eta = {}, mixture ratio = {:.6}",
        spec.r,
        spec.initial_db(),
        spec.eta,
        spec.mixture_ratio()
    );
    println!("mode A: mean {mean_a:+.5}, variance {var_a:.5}");
    println!("mode B: mean {mean_b:+.5}, variance {var_b:.5}");
    println!(
        "expected variance per mode: {:.5}",
        spec.marginal_variance()
    );
    Ok(())
}

#[derive(Serialize)]
struct CoherenceSummary {
    value: f64,
    sigma: Option<f64>,
}

#[derive(Serialize)]
struct MonteCarloReport {
    reps: usize,
    records: usize,
    coherence_mean: f64,
    coherence_std: f64,
    offdiagonal_ks_statistic: f64,
    offdiagonal_ks_p_value: f64,
}

fn tomo(config: &RunConfig, out: &Output<'_>, args: &TomoArgs) -> Result<()> {
    if args.mc_reps != 0 && args.mc_reps < MIN_MC_REPS {
        return Err(Error::invalid(format!(
            "--mc-reps must be 0 or at least {MIN_MC_REPS}, got {}",
            args.mc_reps
        )));
    }
    let ds = load(config, &args.input)?;
    let binned = bin_phases(&ds, args.bins)?;
    let mut est = reconstruct_dm(&binned, args.cutoff)?;
    let mut coherence = CoherenceSummary {
        value: coherence_measure(&est.rho),
        sigma: None,
    };
    let mut mc_report = None;
    if args.mc_reps > 0 {
        let (spec, noise) = simulated_state(&ds).ok_or_else(|| {
            Error::invalid(
                "Monte Carlo errors need a dataset simulated from a two-mode squeezed state",
            )
        })?;
        let mc = monte_carlo_errors(
            &spec,
            &noise,
            ds.len(),
            args.mc_reps,
            args.cutoff,
            config.seed,
        )?;
        let (c, sigma_c) =
            coherence_with_errors(&est.rho, &mc.sigma, COHERENCE_RESAMPLES, config.seed)?;
        coherence = CoherenceSummary {
            value: c,
            sigma: Some(sigma_c),
        };
        let z = offdiagonal_z_scores(&est.rho, &mc.sigma)?;
        let ks = ks_test(&z, normal_cdf)?;
        let hist = offdiagonal_histogram(&est, &mc.reference, &mc.sigma)?;
        let rows: Vec<_> = hist
            .edges
            .windows(2)
            .zip(hist.count_exp.iter().zip(&hist.count_mc))
            .map(|(e, (x, m))| json!({ "bin_lo": e[0], "bin_hi": e[1], "count_exp": x, "count_mc": m }))
            .collect();
        let path = out.table("tomo_histogram", &rows, |w| hist.write_csv(w))?;
        println!("wrote {}", path.display());
        mc_report = Some(MonteCarloReport {
            reps: mc.reps,
            records: mc.records,
            coherence_mean: mc.coherence_mean,
            coherence_std: mc.coherence_std,
            offdiagonal_ks_statistic: ks.statistic,
            offdiagonal_ks_p_value: ks.p_value,
        });
        est = est.with_sigma(mc.sigma)?;
    }
    let path = out.json(
        "tomo.json",
        &json!({
            "estimate": est.to_document(),
            "coherence": coherence,
            "monte_carlo": mc_report,
        }),
    )?;
    println!("wrote {}", path.display());
    match coherence.sigma {
        Some(s) => println!("coherence C = {:.5} ± {:.5}", coherence.value, s),
        None => println!("coherence C = {:.5}", coherence.value),
    }
    for warning in &est.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn oracle_grid(
    ds: &QuadratureDataset,
    grid: &phasecorr::quasiprob::GridSpec,
    w: f64,
    filter: &FilterTable,
) -> Result<PhaseSpaceGrid> {
    let (spec, noise) = simulated_state(ds).ok_or_else(|| {
        Error::invalid("--oracle needs a dataset simulated from a two-mode squeezed state")
    })?;
    pomega_oracle(&spec, &noise, grid, w, filter)
}

fn grid_rows(est: &PhaseSpaceGrid, oracle: Option<&PhaseSpaceGrid>) -> Vec<serde_json::Value> {
    let mut rows = Vec::with_capacity(est.a.len() * est.b.len());
    for (i, &a) in est.a.iter().enumerate() {
        for (j, &b) in est.b.iter().enumerate() {
            let sigma = est.sigma.as_ref().map(|s| s[(i, j)]);
            rows.push(json!({
                "a": a,
                "b": b,
                "P": est.p[(i, j)],
                "sigma_N": sigma,
                "z": sigma.map(|s| est.p[(i, j)] / s),
                "oracle": oracle.map(|o| o.p[(i, j)]),
            }));
        }
    }
    rows
}

fn pomega(config: &RunConfig, out: &Output<'_>, args: &PomegaArgs) -> Result<()> {
    let grid = args.grid.spec()?;
    let ds = load(config, &args.input)?;
    let filter = filter_table()?;
    let oracle = if args.oracle {
        Some(oracle_grid(&ds, &grid, args.w, &filter)?)
    } else {
        None
    };
    let table = PatternTable::for_width(args.w, &filter)?;
    let stats = ensemble_stats(&ds, &grid, &table, args.ensembles)?;
    let sig = significance(&stats)?;
    let norm = normalization_check(&stats)?;
    let rows = grid_rows(&stats, oracle.as_ref());
    let grid_path = out.table("pomega_grid", &rows, |w| {
        stats.write_csv(w, oracle.as_ref())
    })?;
    let oracle_excess = match (&oracle, &stats.sigma) {
        (Some(o), Some(s)) => Some(
            stats
                .p
                .iter()
                .zip(o.p.iter())
                .zip(s.iter())
                .map(|((p, o), s)| (p - o).abs() - 3.0 * s)
                .fold(f64::NEG_INFINITY, f64::max),
        ),
        _ => None,
    };
    let path = out.json(
        "pomega.json",
        &json!({
            "w": sig.w,
            "significance": sig.sigma,
            "a_star": sig.a_star,
            "b_star": sig.b_star,
            "p_star": sig.p_star,
            "sigma_n_star": sig.sigma_n_star,
            "min_p": stats.min(),
            "n_total": stats.n_total,
            "n_ensembles": stats.n_ensembles,
            "dropped": stats.dropped,
            "normalization": norm,
            "oracle_max_excess": oracle_excess,
        }),
    )?;
    println!("wrote {} and {}", grid_path.display(), path.display());
    println!(
        "Σ = {:.3} at (|α|, |β|) = ({:.2}, {:.2}): P = {:.4e} ± {:.2e}",
        sig.sigma, sig.a_star, sig.b_star, sig.p_star, sig.sigma_n_star
    );
    if let Some(excess) = oracle_excess {
        println!("max(|P - oracle| - 3σ_N) = {excess:.3e}");
    }
    if let Some(warning) = &norm.warning {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn scan_width(config: &RunConfig, out: &Output<'_>, args: &ScanWidthArgs) -> Result<()> {
    let grid = args.grid.spec()?;
    let ds = load(config, &args.input)?;
    let filter = filter_table()?;
    let scan = width_scan(&ds, &grid, &args.w.0, &filter, args.ensembles);
    let path = out.table("scan_width", &scan, |w| scan.write_csv(w))?;
    println!("wrote {}", path.display());
    for e in &scan.entries {
        match (&e.sigma, &e.error) {
            (Some(s), _) => println!("w = {:.3}: Σ = {s:.3}", e.w),
            (None, Some(err)) => println!("w = {:.3}: failed ({err})", e.w),
            _ => {}
        }
    }
    Ok(())
}

fn witness(out: &Output<'_>, args: &WitnessArgs) -> Result<()> {
    match &args.scan_p {
        None => {
            let report = witness_report(args.p, args.cutoff)?;
            let path = out.json("witness.json", &report)?;
            println!("wrote {}", path.display());
            println!(
                "p = {}: witness {:.6e} (analytic {:.6e}), PT minimum eigenvalue {:.6e}",
                report.p, report.witness_numeric, report.witness_analytic, report.pt_min_eigenvalue
            );
        }
        Some(list) => {
            let reports = list
                .0
                .iter()
                .map(|&p| witness_report(p, args.cutoff))
                .collect::<Result<Vec<_>>>()?;
            let path = out.table("witness_scan", &reports, |w| {
                writeln!(w, "p,witness_numeric,witness_analytic,pt_min_eigenvalue")?;
                for r in &reports {
                    writeln!(
                        w,
                        "{},{:e},{:e},{:e}",
                        r.p, r.witness_numeric, r.witness_analytic, r.pt_min_eigenvalue
                    )?;
                }
                Ok(())
            })?;
            println!("wrote {}", path.display());
            if let Some(best) = reports
                .iter()
                .min_by(|x, y| x.witness_numeric.total_cmp(&y.witness_numeric))
            {
                println!(
                    "most negative witness {:.6e} at p = {}",
                    best.witness_numeric, best.p
                );
            }
        }
    }
    Ok(())
}

fn oracle(out: &Output<'_>, args: &OracleArgs) -> Result<()> {
    let spec = args.state.spec()?;
    let grid = args.grid.spec()?;
    let filter = filter_table()?;
    let o = pomega_oracle(&spec, &PhaseNoiseModel::Uniform, &grid, args.w, &filter)?;
    let rows: Vec<_> =
        o.a.iter()
            .enumerate()
            .flat_map(|(i, &a)| o.b.iter().enumerate().map(move |(j, &b)| (i, j, a, b)))
            .map(|(i, j, a, b)| json!({ "a": a, "b": b, "P": o.p[(i, j)] }))
            .collect();
    let path = out.table("oracle_grid", &rows, |w| {
        writeln!(w, "a,b,P")?;
        for (i, &a) in o.a.iter().enumerate() {
            for (j, &b) in o.b.iter().enumerate() {
                writeln!(w, "{a:.6},{b:.6},{:e}", o.p[(i, j)])?;
            }
        }
        Ok(())
    })?;
    println!("wrote {}", path.display());
    println!("minimum P = {:.4e}", o.min());
    Ok(())
}
