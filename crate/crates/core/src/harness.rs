//! Experiments: presets, self-convergence, comparison with exact characteristic
//! solutions, steady-state drift and seeded fuzz campaigns.
//!
//! The thresholds used by the tests on these experiments (observed orders, drift
//! ratios) are regression values measured on this implementation, not external data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::characteristics::{advance_in_time, steady_profile, FhatTable};
use crate::entropy::{cell_entropy_residuals, convex_decomposition_check};
use crate::error::{Error, Result};
use crate::geometry::{build_uniform_mesh, Background, GhostPolicy, RadialMesh};
use crate::model::{burgers_model, kruzhkov_pair, quadratic_pair, EntropyPair, FluxModel};
use crate::scheme::{Boundaries, FluxKind, RunOptions, Scheme, StateVector};

/// Kruzhkov levels used by the entropy diagnostics.
pub const KRUZHKOV_LEVELS: [f64; 5] = [-0.75, -0.25, 0.0, 0.25, 0.75];
/// Round-off tolerance for face entropy residuals and the decomposition identity.
pub const RESIDUAL_TOLERANCE: f64 = 1e-13;
/// Relative tolerance for the global entropy balance.
pub const BALANCE_TOLERANCE: f64 = 1e-12;
/// Fraction of the first crossing time allowed for oracle comparisons.
pub const SHOCK_GUARD_FRACTION: f64 = 0.9;
const ORACLE_TIME_STEPS: usize = 400;
const CROSSING_SAMPLES: usize = 2001;

/// Initial data as a function of radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Constant { value: f64 },
    Gaussian { amplitude: f64, center: f64, width: f64 },
    Riemann { left: f64, right: f64, position: f64 },
    /// Piecewise constant: `values[j]` on `[breaks[j-1], breaks[j])`, one more value than breaks.
    Steps { breaks: Vec<f64>, values: Vec<f64> },
}

impl InitialData {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            InitialData::Constant { value } => *value,
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let z = (r - center) / width;
                amplitude * (-z * z).exp()
            }
            InitialData::Riemann { left, right, position } => {
                if r < *position {
                    *left
                } else {
                    *right
                }
            }
            InitialData::Steps { breaks, values } => values[breaks.partition_point(|&b| b <= r)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (-1.0..=1.0).contains(&v);
        let ok = match self {
            InitialData::Constant { value } => in_range(*value),
            InitialData::Gaussian { amplitude, width, center } => {
                in_range(*amplitude) && *width > 0.0 && center.is_finite()
            }
            InitialData::Riemann { left, right, position } => {
                in_range(*left) && in_range(*right) && position.is_finite()
            }
            InitialData::Steps { breaks, values } => {
                values.len() == breaks.len() + 1
                    && values.iter().all(|&v| in_range(v))
                    && breaks.windows(2).all(|w| w[0] < w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid initial data {self:?}")))
        }
    }
}

/// A complete problem: model, background, mesh, flux, data and end time.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: String,
    pub model: FluxModel,
    pub mass: f64,
    pub r_max: f64,
    pub cells: usize,
    pub t_end: f64,
    pub flux: FluxKind,
    pub cfl_fraction: f64,
    pub boundaries: Boundaries,
    pub initial: InitialData,
}

impl Preset {
    /// Gaussian pulse on `[2, 12]` around a unit-mass hole, stopped before characteristics cross.
    pub fn smooth() -> Self {
        Self {
            name: "smooth".into(),
            model: burgers_model(),
            mass: 1.0,
            r_max: 12.0,
            cells: 100,
            t_end: 1.0,
            flux: FluxKind::Godunov,
            cfl_fraction: 0.9,
            boundaries: Boundaries::default(),
            initial: InitialData::Gaussian {
                amplitude: 0.5,
                center: 6.0,
                width: 1.0,
            },
        }
    }

    /// A single outgoing shock (`0.9 | 0.1` at `r = 5`) on `[2, 12]`.
    pub fn riemann() -> Self {
        Self {
            name: "riemann".into(),
            initial: InitialData::Riemann {
                left: 0.9,
                right: 0.1,
                position: 5.0,
            },
            ..Self::smooth()
        }
    }

    /// Constant data in flat space.
    pub fn flat() -> Self {
        Self {
            name: "flat".into(),
            mass: 0.0,
            r_max: 10.0,
            initial: InitialData::Constant { value: 0.3 },
            ..Self::smooth()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "smooth" => Ok(Self::smooth()),
            "riemann" => Ok(Self::riemann()),
            "flat" => Ok(Self::flat()),
            other => Err(Error::PresetInvalid {
                preset: other.into(),
                reason: "unknown preset (expected smooth, riemann or flat)".into(),
            }),
        }
    }

    pub fn mesh(&self, cells: usize) -> Result<RadialMesh> {
        build_uniform_mesh(&Background::new(self.mass)?, self.r_max, cells)
    }

    pub fn scheme(&self, cells: usize) -> Result<Scheme> {
        Scheme::with_boundaries(self.mesh(cells)?, self.model.clone(), self.flux, self.boundaries)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions::new(self.t_end, self.cfl_fraction)
    }

    /// Final state at `cells` cells, with the step size used.
    pub fn solve(&self, cells: usize) -> Result<(Scheme, StateVector, f64)> {
        let scheme = self.scheme(cells)?;
        let init = &self.initial;
        let traj = scheme.run(|r| init.eval(r), &self.run_options())?;
        let tau = self.cfl_fraction * scheme.max_timestep();
        Ok((scheme, traj.final_state().clone(), tau))
    }
}

/// First time at which characteristics launched from a dense grid of radii cross.
///
/// Returns `None` if none cross before `t_max`.
pub fn crossing_time(preset: &Preset, t_max: f64, time_steps: usize) -> Result<Option<f64>> {
    let bg = Background::new(preset.mass)?;
    let lo = bg.horizon() + 1e-3;
    let hi = preset.r_max + t_max;
    let mut rs: Vec<f64> = (0..CROSSING_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (CROSSING_SAMPLES - 1) as f64)
        .collect();
    let mut us: Vec<f64> = rs.iter().map(|&r| preset.initial.eval(r)).collect();
    let dt = t_max / time_steps as f64;
    for step in 1..=time_steps {
        for (r, u) in rs.iter_mut().zip(us.iter_mut()) {
            let (nr, nu) = advance_in_time(&preset.model, preset.mass, *r, *u, dt, 1)?;
            *r = nr;
            *u = nu;
        }
        if rs.windows(2).any(|w| !(w[1] > w[0])) {
            return Ok(Some(step as f64 * dt));
        }
    }
    Ok(None)
}

/// Latest admissible end time for a pre-shock comparison: 90% of the crossing time.
pub fn shock_guard(preset: &Preset, t_max: f64) -> Result<f64> {
    Ok(crossing_time(preset, t_max, 2000)?.map_or(f64::INFINITY, |t| SHOCK_GUARD_FRACTION * t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub cells: usize,
    pub tau: f64,
    pub l1_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub preset: String,
    pub levels: Vec<LevelRecord>,
    /// Least-squares slope of `log l1_diff` against `log Δr`; `None` when a difference is zero.
    pub observed_order: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Width-weighted average of each pair of fine cells onto the coarse mesh.
///
/// Written as an increment so that equal neighbours restrict to the same value exactly.
pub fn restrict(fine: &[f64], fine_widths: &[f64]) -> Result<Vec<f64>> {
    if !fine.len().is_multiple_of(2) || fine.len() != fine_widths.len() {
        return Err(Error::Contract(format!(
            "restriction needs an even number of fine cells with widths, got {} and {}",
            fine.len(),
            fine_widths.len()
        )));
    }
    Ok(fine
        .chunks(2)
        .zip(fine_widths.chunks(2))
        .map(|(v, w)| v[0] + w[1] * (v[1] - v[0]) / (w[0] + w[1]))
        .collect())
}

/// Runs the preset at `N, 2N, 4N, ...` cells and compares consecutive levels.
pub fn self_convergence(preset: &Preset, levels: usize) -> Result<ConvergenceResult> {
    if levels < 3 {
        return Err(Error::domain(format!("self-convergence needs at least 3 levels, got {levels}")));
    }
    let mut solutions = Vec::with_capacity(levels);
    for l in 0..levels {
        let cells = preset.cells << l;
        solutions.push(preset.solve(cells)?);
    }
    let mut records = Vec::with_capacity(levels - 1);
    let mut widths = Vec::new();
    for pair in solutions.windows(2) {
        let (coarse_scheme, coarse, tau) = &pair[0];
        let (fine_scheme, fine, _) = &pair[1];
        let restricted = restrict(&fine.values, fine_scheme.mesh().widths())?;
        let diff = coarse_scheme.mesh().l1_distance(&coarse.values, &restricted);
        widths.push(coarse_scheme.mesh().widths()[0]);
        records.push(LevelRecord {
            cells: coarse_scheme.mesh().cells(),
            tau: *tau,
            l1_diff: diff,
        });
    }
    let order = fit_order(&widths, &records.iter().map(|r| r.l1_diff).collect::<Vec<_>>());
    Ok(ConvergenceResult {
        preset: preset.name.clone(),
        levels: records,
        observed_order: order,
    })
}

/// Exact pre-shock solution at `t_end` and radius `r`, by shooting characteristics.
pub struct CharacteristicOracle<'a> {
    preset: &'a Preset,
    time_steps: usize,
}

impl<'a> CharacteristicOracle<'a> {
    /// Fails if characteristics from the initial data cross before `t_end`.
    pub fn new(preset: &'a Preset) -> Result<Self> {
        let crossing = crossing_time(preset, preset.t_end, ORACLE_TIME_STEPS)?;
        if let Some(t) = crossing {
            return Err(Error::PresetInvalid {
                preset: preset.name.clone(),
                reason: format!("characteristics cross at t = {t}, before t_end = {}", preset.t_end),
            });
        }
        Ok(Self {
            preset,
            time_steps: ORACLE_TIME_STEPS,
        })
    }

    fn arrival(&self, r_start: f64) -> Result<(f64, f64)> {
        let p = self.preset;
        advance_in_time(&p.model, p.mass, r_start, p.initial.eval(r_start), p.t_end, self.time_steps)
    }

    /// Value at `(t_end, r)`: bisection on the starting radius of the arrival map.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        let p = self.preset;
        let horizon = 2.0 * p.mass;
        // characteristic speeds are bounded by 1
        let margin = 1e-6;
        let mut lo = r - p.t_end - margin;
        if p.mass > 0.0 {
            lo = lo.max(horizon * (1.0 + 1e-14));
        }
        let mut hi = r + p.t_end + margin;
        if self.arrival(lo)?.0 > r || self.arrival(hi)?.0 < r {
            return Err(Error::PresetInvalid {
                preset: p.name.clone(),
                reason: format!("arrival map does not bracket r = {r}"),
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.arrival(mid)?.0 < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(self.arrival(0.5 * (lo + hi))?.1)
    }
}

/// Width-weighted L1 error of the finite volume solution at `cells` cells against the
/// characteristic solution sampled at cell centres.
pub fn oracle_compare(preset: &Preset, cells: usize) -> Result<f64> {
    let oracle = CharacteristicOracle::new(preset)?;
    let (scheme, state, _) = preset.solve(cells)?;
    let exact = scheme
        .mesh()
        .centers()
        .iter()
        .map(|&r| oracle.value_at(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(scheme.mesh().l1_distance(&state.values, &exact))
}

/// Oracle errors at each cell count, with the fitted order.
pub fn oracle_convergence(preset: &Preset, cells: &[usize]) -> Result<ConvergenceResult> {
    let oracle = CharacteristicOracle::new(preset)?;
    let mut records = Vec::with_capacity(cells.len());
    let mut widths = Vec::with_capacity(cells.len());
    for &n in cells {
        let (scheme, state, tau) = preset.solve(n)?;
        let exact = scheme
            .mesh()
            .centers()
            .iter()
            .map(|&r| oracle.value_at(r))
            .collect::<Result<Vec<_>>>()?;
        widths.push(scheme.mesh().widths()[0]);
        records.push(LevelRecord {
            cells: n,
            tau,
            l1_diff: scheme.mesh().l1_distance(&state.values, &exact),
        });
    }
    let order = fit_order(&widths, &records.iter().map(|r| r.l1_diff).collect::<Vec<_>>());
    Ok(ConvergenceResult {
        preset: preset.name.clone(),
        levels: records,
        observed_order: order,
    })
}

/// Setup for a steady-state drift run.
#[derive(Clone, Debug)]
pub struct SteadySetup {
    pub model: FluxModel,
    pub mass: f64,
    pub r0: f64,
    pub u0: f64,
    pub r_max: f64,
    pub t_end: f64,
    pub flux: FluxKind,
    pub cfl_fraction: f64,
    pub boundaries: Boundaries,
}

impl SteadySetup {
    pub fn burgers(mass: f64, r0: f64, u0: f64, r_max: f64, t_end: f64) -> Self {
        Self {
            model: burgers_model(),
            mass,
            r0,
            u0,
            r_max,
            t_end,
            flux: FluxKind::Godunov,
            cfl_fraction: 0.9,
            boundaries: Boundaries::default(),
        }
    }
}

/// L1 distance between the steady profile and the scheme's state at `t_end`.
///
/// With `u0 == 0` the constant zero state is used (the profile relation is singular there).
pub fn steady_drift(setup: &SteadySetup, cells: usize) -> Result<f64> {
    let mesh = build_uniform_mesh(&Background::new(setup.mass)?, setup.r_max, cells)?;
    let initial = if setup.u0 == 0.0 {
        vec![0.0; cells]
    } else {
        let table = FhatTable::new(&setup.model)?;
        steady_profile(&table, setup.mass, setup.r0, setup.u0, mesh.centers())?
    };
    let scheme = Scheme::with_boundaries(mesh, setup.model.clone(), setup.flux, setup.boundaries)?;
    let opts = RunOptions::new(setup.t_end, setup.cfl_fraction);
    let (snaps, _) = scheme.evolve(StateVector::new(initial.clone()), &opts, |_, _, _| Ok(()))?;
    let last = snaps.last().expect("evolve returns the initial state");
    Ok(scheme.mesh().l1_distance(&last.values, &initial))
}

/// Drift at each cell count, with the fitted slope against `Δr`.
pub fn steady_drift_study(setup: &SteadySetup, cells: &[usize]) -> Result<ConvergenceResult> {
    let mut records = Vec::with_capacity(cells.len());
    let mut widths = Vec::with_capacity(cells.len());
    for &n in cells {
        let drift = steady_drift(setup, n)?;
        let mesh = build_uniform_mesh(&Background::new(setup.mass)?, setup.r_max, n)?;
        let scheme = Scheme::new(mesh, setup.model.clone(), setup.flux)?;
        widths.push(scheme.mesh().widths()[0]);
        records.push(LevelRecord {
            cells: n,
            tau: setup.cfl_fraction * scheme.max_timestep(),
            l1_diff: drift,
        });
    }
    let order = fit_order(&widths, &records.iter().map(|r| r.l1_diff).collect::<Vec<_>>());
    Ok(ConvergenceResult {
        preset: "steady".into(),
        levels: records,
        observed_order: order,
    })
}

/// Settings for [`fuzz_invariants`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzOptions {
    pub trials: usize,
    pub seed: u64,
    pub cells: usize,
    pub max_steps: usize,
    pub max_mass: f64,
    pub kruzhkov_levels: Vec<f64>,
    /// Multiplier on the chosen step; values above 1 break the stability bound.
    pub tau_scale: f64,
    /// Evaluate the entropy diagnostics (the maximum principle is always checked).
    pub entropy: bool,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 42,
            cells: 200,
            max_steps: 2000,
            max_mass: 2.0,
            kruzhkov_levels: KRUZHKOV_LEVELS.to_vec(),
            tau_scale: 1.0,
            entropy: true,
        }
    }
}

/// Everything needed to replay one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub trial: usize,
    pub mass: f64,
    pub r_max: f64,
    pub flux: FluxKind,
    pub cfl_fraction: f64,
    pub steps: usize,
    pub initial: InitialData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub step: u64,
    pub value: f64,
    pub config: TrialConfig,
}

/// Worst margins of one campaign. Residuals and gaps are `≤ 0` when the inequality holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub trials: usize,
    pub seed: u64,
    pub steps: u64,
    /// `max |v| - 1` over all states; `≤ 0` means the maximum principle held.
    pub worst_sup_excess: f64,
    pub worst_flux_residual: f64,
    pub worst_decomposition: f64,
    pub worst_flux_balance_gap: f64,
    /// Residuals of the face inequality with the source term on its right-hand side.
    pub worst_source_weighted_residual: f64,
    pub worst_source_weighted_balance_gap: f64,
    /// Steps at which the source-weighted face inequality exceeded the tolerance.
    pub source_weighted_exceedances: u64,
    pub violations: Vec<Violation>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_trial(rng: &mut ChaCha8Rng, trial: usize, opts: &FuzzOptions) -> TrialConfig {
    let mass = rng.gen_range(0.0..=opts.max_mass);
    let r_min = 2.0 * mass;
    let r_max = r_min + 10.0;
    let flux = FluxKind::ALL[rng.gen_range(0..FluxKind::ALL.len())];
    // (0, 1]
    let cfl_fraction = 1.0 - rng.gen::<f64>();
    let steps = rng.gen_range(1..=opts.max_steps);
    let pieces = rng.gen_range(1..=8);
    let mut breaks: Vec<f64> = (1..pieces).map(|_| rng.gen_range(r_min..r_max)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let values = (0..=breaks.len())
        .map(|_| match rng.gen_range(0..10) {
            0 => 1.0,
            1 => -1.0,
            _ => rng.gen_range(-1.0..=1.0),
        })
        .collect();
    TrialConfig {
        trial,
        mass,
        r_max,
        flux,
        cfl_fraction,
        steps,
        initial: InitialData::Steps { breaks, values },
    }
}

/// Seeded campaign checking the maximum principle and the entropy diagnostics at every step.
pub fn fuzz_invariants(opts: &FuzzOptions) -> Result<FuzzReport> {
    if opts.trials == 0 {
        return Err(Error::domain("fuzz campaign needs at least one trial"));
    }
    if !(opts.tau_scale > 0.0) {
        return Err(Error::domain(format!("tau_scale must be positive, got {}", opts.tau_scale)));
    }
    let model = burgers_model();
    let mut pairs: Vec<EntropyPair> = opts
        .kruzhkov_levels
        .iter()
        .map(|&k| kruzhkov_pair(&model, k))
        .collect::<Result<_>>()?;
    pairs.push(quadratic_pair(&model));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = FuzzReport {
        trials: opts.trials,
        seed: opts.seed,
        steps: 0,
        worst_sup_excess: f64::NEG_INFINITY,
        worst_flux_residual: f64::NEG_INFINITY,
        worst_decomposition: 0.0,
        worst_flux_balance_gap: f64::NEG_INFINITY,
        worst_source_weighted_residual: f64::NEG_INFINITY,
        worst_source_weighted_balance_gap: f64::NEG_INFINITY,
        source_weighted_exceedances: 0,
        violations: Vec::new(),
    };
    for trial in 0..opts.trials {
        let cfg = random_trial(&mut rng, trial, opts);
        let mesh = build_uniform_mesh(&Background::new(cfg.mass)?, cfg.r_max, opts.cells)?;
        let boundaries = Boundaries {
            inner: GhostPolicy::Copy,
            outer: GhostPolicy::Copy,
        };
        let scheme = Scheme::with_boundaries(mesh, model.clone(), cfg.flux, boundaries)?;
        let tau = cfg.cfl_fraction * scheme.max_timestep() * opts.tau_scale;
        let mut state = StateVector::new(scheme.mesh().centers().iter().map(|&r| cfg.initial.eval(r)).collect());
        let flag = |report: &mut FuzzReport, check: &str, step: u64, value: f64| {
            report.violations.push(Violation {
                check: check.into(),
                step,
                value,
                config: cfg.clone(),
            });
        };
        for _ in 0..cfg.steps {
            let (next, step_report) = scheme.step(&state, tau)?;
            let excess = next.sup_norm() - 1.0;
            report.worst_sup_excess = report.worst_sup_excess.max(excess);
            if excess > 0.0 {
                flag(&mut report, "maximum_principle", next.step_index, excess);
            }
            if opts.entropy {
                let decomposition = convex_decomposition_check(&scheme, &state, &next, &step_report)?;
                report.worst_decomposition = report.worst_decomposition.max(decomposition);
                if decomposition > RESIDUAL_TOLERANCE {
                    flag(&mut report, "convex_decomposition", next.step_index, decomposition);
                }
                let mut source_exceeded = false;
                for pair in &pairs {
                    let ledger = cell_entropy_residuals(&scheme, &state, &next, &step_report, pair)?;
                    report.worst_flux_residual = report.worst_flux_residual.max(ledger.worst_flux_residual);
                    report.worst_source_weighted_residual =
                        report.worst_source_weighted_residual.max(ledger.worst_residual);
                    if ledger.worst_flux_residual > RESIDUAL_TOLERANCE {
                        flag(&mut report, "entropy_residual", next.step_index, ledger.worst_flux_residual);
                    }
                    if ledger.worst_residual > RESIDUAL_TOLERANCE {
                        source_exceeded = true;
                    }
                    if pair.alpha() > 0.0 {
                        report.worst_flux_balance_gap = report.worst_flux_balance_gap.max(ledger.flux_balance_gap);
                        report.worst_source_weighted_balance_gap =
                            report.worst_source_weighted_balance_gap.max(ledger.global_balance_gap);
                        if ledger.flux_balance_gap > BALANCE_TOLERANCE {
                            flag(&mut report, "entropy_balance", next.step_index, ledger.flux_balance_gap);
                        }
                    }
                }
                if source_exceeded {
                    report.source_weighted_exceedances += 1;
                }
            }
            state = next;
            report.steps += 1;
        }
    }
    Ok(report)
}
