//! Command line front end.
//!
//! Exit codes: 0 on success, 1 when an invariant check fails (a `failure.json` is
//! written), 2 on configuration or usage errors.

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{CharacteristicsConfig, CustomModel, HarnessConfig, ModelChoice, RunConfig, SteadyConfig};
pub use output::OutputDir;

use crate::characteristics::{
    classify_fate, fhat, interior_invariant, steady_profile, trace_exterior, trace_interior, CharPath, CharState,
    Coordinates, Fate, FhatTable, StopReason, TraceLimits,
};
use crate::entropy::{cell_entropy_residuals, convex_decomposition_check};
use crate::error::{Error, Result};
use crate::geometry::{build_uniform_mesh, Background};
use crate::harness::{
    fuzz_invariants, oracle_convergence, self_convergence, steady_drift_study, ConvergenceResult, FuzzOptions,
    SteadySetup, BALANCE_TOLERANCE, RESIDUAL_TOLERANCE,
};
use crate::model::{check_structure, kruzhkov_pair, quadratic_pair, EntropyKind, EntropyPair, StructureReport};
use crate::scheme::{FluxKind, RunOptions, Scheme, SnapshotCadence};
use output::sci;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Samples used by `check-model`.
const STRUCTURE_SAMPLES: usize = 10_001;

#[derive(Debug, Parser)]
#[command(name = "horizon-fv", version, about = "Finite volume experiments for balance laws outside a black hole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the configured problem and write snapshots (and entropy diagnostics).
    Run(Common),
    /// Self-convergence study on a preset.
    Converge(Common),
    /// Scheme against the characteristics oracle on a sequence of meshes.
    Oracle(Common),
    /// Drift of the scheme away from a steady profile under refinement.
    SteadyDrift(Common),
    /// Trace one characteristic curve.
    Characteristics(Common),
    /// Evaluate the steady profile through the configured point on the mesh centers.
    Steady(Common),
    /// Randomized invariant campaign.
    Fuzz(FuzzArgs),
    /// Structure checks on the flux and source.
    CheckModel(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FuzzArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplier on the stable step; values above 1 are rejected.
    #[arg(long)]
    tau_scale: Option<f64>,
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Domain(_)
        | Error::Range { .. }
        | Error::UnsupportedModel { .. }
        | Error::PresetInvalid { .. } => EXIT_CONFIG,
        _ => EXIT_INVARIANT,
    }
}

fn load(common: &Common) -> Result<(RunConfig, String)> {
    let source = std::fs::read_to_string(&common.config).map_err(|e| Error::Config {
        key: "config".into(),
        line: 0,
        message: format!("cannot read {}: {e}", common.config.display()),
    })?;
    let mut cfg = RunConfig::parse(&source)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok((cfg, source))
}

fn prepare(cfg: &RunConfig) -> Result<OutputDir> {
    let out = OutputDir::create(&cfg.output_dir)?;
    out.write_text("resolved_config.toml", &cfg.to_toml())?;
    Ok(out)
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Fuzz(args) => {
            let (mut cfg, source) = load(&args.common)?;
            if let Some(trials) = args.trials {
                cfg.harness.trials = trials;
            }
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(scale) = args.tau_scale {
                cfg.harness.tau_scale = scale;
            }
            cfg.validate(&source)?;
            let out = prepare(&cfg)?;
            fuzz(&cfg, &out)
        }
        Command::Run(c) => with_config(&c, run),
        Command::Converge(c) => with_config(&c, converge),
        Command::Oracle(c) => with_config(&c, oracle),
        Command::SteadyDrift(c) => with_config(&c, steady_drift),
        Command::Characteristics(c) => with_config(&c, characteristics),
        Command::Steady(c) => with_config(&c, steady),
        Command::CheckModel(c) => with_config(&c, check_model),
    }
}

fn with_config(common: &Common, f: fn(&RunConfig, &OutputDir) -> Result<i32>) -> Result<i32> {
    let (cfg, _) = load(common)?;
    let out = prepare(&cfg)?;
    f(&cfg, &out)
}

#[derive(Debug, Serialize)]
struct Failure<'a, T: Serialize> {
    command: &'a str,
    reason: String,
    details: T,
}

fn fail<T: Serialize>(out: &OutputDir, command: &str, reason: String, details: T) -> Result<i32> {
    eprintln!("[{command}] FAILED: {reason}");
    out.write_json("failure.json", &Failure { command, reason, details })?;
    Ok(EXIT_INVARIANT)
}

fn entropy_pairs(cfg: &RunConfig) -> Result<Vec<EntropyPair>> {
    let model = cfg.model()?;
    let mut pairs: Vec<EntropyPair> = cfg
        .kruzhkov_levels
        .iter()
        .map(|&k| kruzhkov_pair(&model, k))
        .collect::<Result<_>>()?;
    pairs.push(quadratic_pair(&model));
    Ok(pairs)
}

#[derive(Debug, Default, Serialize)]
struct EntropySummary {
    pairs: usize,
    worst_residual: f64,
    worst_balance_gap: f64,
    worst_flux_residual: f64,
    worst_flux_balance_gap: f64,
    worst_decomposition: f64,
    /// Steps on which the source-weighted residual exceeded the tolerance (reported, not judged).
    source_weighted_exceedances: u64,
}

#[derive(Debug, Serialize)]
struct StepViolation {
    check: &'static str,
    step: u64,
    value: f64,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    model: String,
    mass: f64,
    cells: usize,
    flux: FluxKind,
    steps: u64,
    final_time: f64,
    tau: f64,
    clamped_cells: usize,
    final_sup_norm: f64,
    snapshots: usize,
    entropy: Option<EntropySummary>,
    violations: usize,
}

fn run(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let mesh = build_uniform_mesh(&cfg.background()?, cfg.r_max, cfg.cells)?;
    let scheme = Scheme::with_boundaries(mesh, cfg.model()?, cfg.flux, cfg.boundaries())?;
    let mut opts = RunOptions::new(cfg.t_end, cfg.cfl_fraction);
    if cfg.snapshot_every > 0 {
        opts.snapshots = SnapshotCadence::EverySteps(cfg.snapshot_every);
    }
    let pairs = if cfg.entropy_diagnostics { entropy_pairs(cfg)? } else { Vec::new() };
    let mut rows = Vec::new();
    let mut summary = EntropySummary {
        pairs: pairs.len(),
        ..Default::default()
    };
    let mut violations = Vec::new();
    let traj = scheme.run_with(
        |r| cfg.initial.eval(r),
        &opts,
        |before, after, report| {
            let step = after.step_index;
            let excess = after.sup_norm() - 1.0;
            if excess > 0.0 {
                violations.push(StepViolation { check: "maximum_principle", step, value: excess });
            }
            if pairs.is_empty() {
                return Ok(());
            }
            let decomposition = convex_decomposition_check(&scheme, before, after, report)?;
            summary.worst_decomposition = summary.worst_decomposition.max(decomposition);
            if decomposition > RESIDUAL_TOLERANCE {
                violations.push(StepViolation { check: "convex_decomposition", step, value: decomposition });
            }
            let mut exceeded = false;
            for pair in &pairs {
                let ledger = cell_entropy_residuals(&scheme, before, after, report, pair)?;
                let label = match pair.kind() {
                    EntropyKind::Kruzhkov { k } => sci(k),
                    EntropyKind::Quadratic => "quadratic".to_string(),
                };
                rows.push(format!(
                    "{step},{label},{},{},{},{},{}",
                    sci(ledger.worst_residual),
                    sci(ledger.global_balance_gap),
                    sci(ledger.dissipation_sum),
                    sci(ledger.worst_flux_residual),
                    sci(ledger.flux_balance_gap),
                ));
                summary.worst_residual = summary.worst_residual.max(ledger.worst_residual);
                summary.worst_flux_residual = summary.worst_flux_residual.max(ledger.worst_flux_residual);
                exceeded |= ledger.worst_residual > RESIDUAL_TOLERANCE;
                if ledger.worst_flux_residual > RESIDUAL_TOLERANCE {
                    violations.push(StepViolation { check: "entropy_residual", step, value: ledger.worst_flux_residual });
                }
                if pair.alpha() > 0.0 {
                    summary.worst_balance_gap = summary.worst_balance_gap.max(ledger.global_balance_gap);
                    summary.worst_flux_balance_gap = summary.worst_flux_balance_gap.max(ledger.flux_balance_gap);
                    if ledger.flux_balance_gap > BALANCE_TOLERANCE {
                        violations.push(StepViolation { check: "entropy_balance", step, value: ledger.flux_balance_gap });
                    }
                }
            }
            summary.source_weighted_exceedances += u64::from(exceeded);
            Ok(())
        },
    )?;

    let centers = scheme.mesh().centers();
    out.write_csv(
        "snapshots.csv",
        "t,r,v",
        traj.snapshots
            .iter()
            .flat_map(|s| centers.iter().zip(&s.values).map(move |(&r, &v)| vec![s.time, r, v])),
    )?;
    if cfg.entropy_diagnostics {
        out.write_lines(
            "entropy.csv",
            "step,k,worst_residual,balance_gap,dissipation_sum,worst_flux_residual,flux_balance_gap",
            rows,
        )?;
    }
    let last = traj.final_state();
    let result = RunSummary {
        model: scheme.model().name().to_string(),
        mass: cfg.mass,
        cells: cfg.cells,
        flux: cfg.flux,
        steps: traj.steps,
        final_time: last.time,
        tau: cfg.cfl_fraction * scheme.max_timestep(),
        clamped_cells: traj.clamped_cells,
        final_sup_norm: last.sup_norm(),
        snapshots: traj.snapshots.len(),
        entropy: cfg.entropy_diagnostics.then_some(summary),
        violations: violations.len(),
    };
    out.write_json("summary.json", &result)?;
    println!("[run] {} steps to t = {} on {} cells", traj.steps, last.time, cfg.cells);
    if violations.is_empty() {
        Ok(EXIT_OK)
    } else {
        fail(out, "run", format!("{} invariant violations", violations.len()), violations)
    }
}

#[derive(Debug, Serialize)]
struct ConvergenceSummary<'a> {
    #[serde(flatten)]
    result: &'a ConvergenceResult,
    pass: ConvergencePass,
}

#[derive(Debug, Serialize)]
struct ConvergencePass {
    differences_decrease: bool,
    order_threshold: f64,
    order_at_least_threshold: bool,
}

fn convergence_pass(result: &ConvergenceResult, threshold: f64) -> ConvergencePass {
    let diffs: Vec<f64> = result.levels.iter().map(|l| l.l1_diff).collect();
    ConvergencePass {
        differences_decrease: diffs.windows(2).all(|w| w[1] <= w[0]),
        order_threshold: threshold,
        order_at_least_threshold: result.observed_order.is_some_and(|p| p >= threshold),
    }
}

fn write_convergence(out: &OutputDir, stem: &str, result: &ConvergenceResult, threshold: f64) -> Result<()> {
    out.write_csv(
        &format!("{stem}.csv"),
        "cells,tau,l1_diff",
        result.levels.iter().map(|l| vec![l.cells as f64, l.tau, l.l1_diff]),
    )?;
    let summary = ConvergenceSummary {
        result,
        pass: convergence_pass(result, threshold),
    };
    out.write_json(&format!("{stem}.json"), &summary)?;
    match result.observed_order {
        Some(p) => println!("[{stem}] {} levels, observed order {p:.3}", result.levels.len()),
        None => println!("[{stem}] {} levels, differences vanish", result.levels.len()),
    }
    Ok(())
}

/// Regression threshold for the self-convergence order of each preset.
fn preset_order_threshold(name: &str) -> f64 {
    match name {
        "riemann" => 0.5,
        _ => 0.8,
    }
}

fn converge(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let preset = cfg.harness_preset()?;
    let result = self_convergence(&preset, cfg.harness.levels)?;
    write_convergence(out, "convergence", &result, preset_order_threshold(&preset.name))?;
    Ok(EXIT_OK)
}

fn oracle(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let preset = cfg.harness_preset()?;
    let result = oracle_convergence(&preset, &cfg.harness.oracle_cells)?;
    write_convergence(out, "oracle", &result, 0.8)?;
    Ok(EXIT_OK)
}

fn steady_drift(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let setup = SteadySetup {
        model: cfg.model()?,
        mass: cfg.mass,
        r0: cfg.steady.r0,
        u0: cfg.steady.u0,
        r_max: cfg.r_max,
        t_end: cfg.t_end,
        flux: cfg.flux,
        cfl_fraction: cfg.cfl_fraction,
        boundaries: cfg.boundaries(),
    };
    let result = steady_drift_study(&setup, &cfg.harness.drift_cells)?;
    write_convergence(out, "steady_drift", &result, 0.8)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CharacteristicsSummary {
    coordinates: Coordinates,
    start: CharState,
    end: CharState,
    stop: StopReason,
    points: usize,
    invariant_start: f64,
    invariant_drift: f64,
    fate: Option<Fate>,
}

type Invariant = Box<dyn Fn(&CharState) -> f64>;

fn characteristics(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let c = &cfg.characteristics;
    let model = cfg.model()?;
    let start = CharState::new(c.r0, c.u0);
    let limits = TraceLimits {
        ds: c.ds,
        s_max: c.s_max,
        r_stop: c.r_stop.unwrap_or(f64::INFINITY),
    };
    let (path, invariant): (CharPath, Invariant) = match c.coordinates {
        Coordinates::Exterior => {
            let table = FhatTable::new(&model)?;
            let bg = Background::new(cfg.mass)?;
            let path = trace_exterior(&model, cfg.mass, start, &limits)?;
            let inv = move |s: &CharState| fhat(&table, s.u).map_or(f64::NAN, |f| f - bg.weight(s.r).ln());
            (path, Box::new(inv))
        }
        Coordinates::Interior => {
            if cfg.custom.is_some() {
                return Err(Error::UnsupportedModel {
                    model: model.name().to_string(),
                    reason: "the interior slicing is implemented for Burgers only".into(),
                });
            }
            let mass = cfg.mass;
            let path = trace_interior(mass, c.r0_shift, start, &limits)?;
            (path, Box::new(move |s: &CharState| interior_invariant(mass, s)))
        }
    };
    let values: Vec<f64> = path.states.iter().map(&invariant).collect();
    out.write_csv(
        "characteristics.csv",
        "s,t,r,u,invariant",
        path.states.iter().zip(&values).map(|(s, &i)| vec![s.s, s.t, s.r, s.u, i]),
    )?;
    let i0 = values[0];
    let drift = values.iter().filter(|v| v.is_finite()).fold(0.0_f64, |acc, v| acc.max((v - i0).abs()));
    let fate = if c.coordinates == Coordinates::Exterior && c.u0.abs() < 1.0 && cfg.mass > 0.0 {
        classify_fate(&FhatTable::new(&model)?, cfg.mass, c.r0, c.u0).ok()
    } else {
        None
    };
    let summary = CharacteristicsSummary {
        coordinates: c.coordinates,
        start: path.states[0],
        end: *path.last(),
        stop: path.stop,
        points: path.states.len(),
        invariant_start: i0,
        invariant_drift: drift,
        fate,
    };
    out.write_json("characteristics.json", &summary)?;
    println!("[characteristics] {} points, stop {:?}, invariant drift {drift:.3e}", summary.points, path.stop);
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SteadySummary {
    r0: f64,
    u0: f64,
    points: usize,
    fate: Option<Fate>,
}

fn steady(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let model = cfg.model()?;
    let table = FhatTable::new(&model)?;
    let mesh = build_uniform_mesh(&cfg.background()?, cfg.r_max, cfg.cells)?;
    let s = &cfg.steady;
    let profile = steady_profile(&table, cfg.mass, s.r0, s.u0, mesh.centers())?;
    out.write_csv(
        "steady.csv",
        "r,u",
        mesh.centers().iter().zip(&profile).map(|(&r, &u)| vec![r, u]),
    )?;
    let fate = if cfg.mass > 0.0 { classify_fate(&table, cfg.mass, s.r0, s.u0).ok() } else { None };
    out.write_json(
        "steady.json",
        &SteadySummary {
            r0: s.r0,
            u0: s.u0,
            points: profile.len(),
            fate,
        },
    )?;
    println!("[steady] profile through ({}, {}) on {} points", s.r0, s.u0, profile.len());
    Ok(EXIT_OK)
}

fn fuzz(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    if cfg.custom.is_some() {
        return Err(Error::UnsupportedModel {
            model: "custom".into(),
            reason: "the fuzz campaign draws Burgers problems".into(),
        });
    }
    let h = &cfg.harness;
    let opts = FuzzOptions {
        trials: h.trials,
        seed: cfg.seed,
        cells: h.fuzz_cells,
        max_steps: h.max_steps,
        max_mass: h.max_mass,
        kruzhkov_levels: cfg.kruzhkov_levels.clone(),
        tau_scale: h.tau_scale,
        entropy: cfg.entropy_diagnostics,
    };
    let report = fuzz_invariants(&opts)?;
    out.write_json("fuzz.json", &report)?;
    println!(
        "[fuzz] {} trials, {} steps, worst sup excess {:.3e}, {} violations",
        report.trials,
        report.steps,
        report.worst_sup_excess,
        report.violations.len()
    );
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        let reason = format!("{} invariant violations", report.violations.len());
        fail(out, "fuzz", reason, &report.violations)
    }
}

#[derive(Debug, Serialize)]
struct ModelCheck {
    model: String,
    structure: StructureReport,
    derivatives_ok: bool,
    derivative_error: Option<String>,
    unimodal_flux: bool,
}

fn check_model(cfg: &RunConfig, out: &OutputDir) -> Result<i32> {
    let model = cfg.model()?;
    let structure = check_structure(&model, STRUCTURE_SAMPLES)?;
    let derivatives = model.validate_derivatives();
    let check = ModelCheck {
        model: model.name().to_string(),
        derivatives_ok: derivatives.is_ok(),
        derivative_error: derivatives.err().map(|e| e.to_string()),
        unimodal_flux: model.has_unimodal_flux(),
        structure,
    };
    out.write_json("model_check.json", &check)?;
    let ok = check.structure.all_ok() && check.derivatives_ok;
    println!("[check-model] {}: {}", check.model, if ok { "ok" } else { "FAILED" });
    if ok {
        Ok(EXIT_OK)
    } else {
        fail(out, "check-model", "structure conditions violated".into(), &check)
    }
}
