//! Monotone two-point fluxes and the explicit finite volume update.
//!
//! Each face carries one oriented flux value `F = nf(left, right)`. The cell update is
//!
//! ```text
//! v_i' = v_i - (τ/Δr_i) [a_R (F_R - f(v_i)) - a_L (F_L - f(v_i))] + τ θ_i (f + h)(v_i)
//! ```
//!
//! which is the general geometric scheme with two unit faces per cell and outward
//! weights `±a(r_e)`. The inner face of a horizon-touching mesh has `a_L = 0`, so the
//! innermost cell never depends on anything beyond the horizon.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{max_timestep, GhostPolicy, RadialMesh};
use crate::model::FluxModel;
use crate::quadrature::gauss3_average;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    Godunov,
    #[serde(rename = "eo")]
    EngquistOsher,
    Rusanov,
}

impl FluxKind {
    pub const ALL: [FluxKind; 3] = [FluxKind::Godunov, FluxKind::EngquistOsher, FluxKind::Rusanov];
}

impl fmt::Display for FluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FluxKind::Godunov => "godunov",
            FluxKind::EngquistOsher => "eo",
            FluxKind::Rusanov => "rusanov",
        })
    }
}

impl FromStr for FluxKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "godunov" => Ok(FluxKind::Godunov),
            "eo" | "engquist_osher" | "engquist-osher" => Ok(FluxKind::EngquistOsher),
            "rusanov" => Ok(FluxKind::Rusanov),
            other => Err(format!("unknown flux '{other}' (expected godunov, eo or rusanov)")),
        }
    }
}

/// Local Lax–Friedrichs flux with the global speed bound `λ = max |f'|`.
pub fn flux_rusanov(m: &FluxModel, u: f64, v: f64) -> f64 {
    let lambda = m.max_abs_df();
    0.5 * (m.f(u) + m.f(v)) - 0.5 * lambda * (v - u)
}

fn require_unimodal(m: &FluxModel, what: &str) -> Result<()> {
    if m.has_unimodal_flux() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel {
            model: m.name().to_string(),
            reason: format!("{what} needs f' < 0 on (-1, 0) and f' > 0 on (0, 1)"),
        })
    }
}

fn godunov_unchecked(m: &FluxModel, u: f64, v: f64) -> f64 {
    if u == v {
        m.f(u)
    } else if u < v {
        if u >= 0.0 {
            m.f(u)
        } else if v <= 0.0 {
            m.f(v)
        } else {
            m.f(0.0)
        }
    } else {
        m.f(u).max(m.f(v))
    }
}

fn engquist_osher_unchecked(m: &FluxModel, u: f64, v: f64) -> f64 {
    if u == v {
        return m.f(u);
    }
    m.f(u.max(0.0)) + m.f(v.min(0.0)) - m.f(0.0)
}

/// Exact Riemann (Godunov) flux for a flux with a single interior minimum at 0.
pub fn flux_godunov(m: &FluxModel, u: f64, v: f64) -> Result<f64> {
    require_unimodal(m, "the Godunov flux")?;
    Ok(godunov_unchecked(m, u, v))
}

/// Engquist–Osher flux `f(max(u,0)) + f(min(v,0)) - f(0)` for a unimodal flux.
pub fn flux_engquist_osher(m: &FluxModel, u: f64, v: f64) -> Result<f64> {
    require_unimodal(m, "the Engquist-Osher flux")?;
    Ok(engquist_osher_unchecked(m, u, v))
}

/// A monotone two-point flux bound to one model.
///
/// `evaluate(m, left, right)` is the flux through a face with `left` on its inner side;
/// for a cell it equals its outward flux at the right face and, by conservation, the
/// inward flux at the left face of its outer neighbour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericalFlux {
    kind: FluxKind,
    lipschitz_bound: f64,
}

impl NumericalFlux {
    pub fn new(kind: FluxKind, m: &FluxModel) -> Result<Self> {
        match kind {
            FluxKind::Godunov => require_unimodal(m, "the Godunov flux")?,
            FluxKind::EngquistOsher => require_unimodal(m, "the Engquist-Osher flux")?,
            FluxKind::Rusanov => {}
        }
        // each argument moves the flux by at most max|f'| per unit change
        let lipschitz_bound = m.max_abs_df();
        if !(lipschitz_bound > 0.0) {
            return Err(Error::UnsupportedModel {
                model: m.name().to_string(),
                reason: "flux has zero derivative everywhere".into(),
            });
        }
        Ok(Self {
            kind,
            lipschitz_bound,
        })
    }

    pub fn kind(&self) -> FluxKind {
        self.kind
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// `(F - f(u), F - f(v))` for `F = evaluate(m, u, v)`, arranged so that the signs
    /// required by monotonicity survive rounding.
    pub fn increments(&self, m: &FluxModel, u: f64, v: f64) -> (f64, f64) {
        if u == v {
            return (0.0, 0.0);
        }
        let (fu, fv) = (m.f(u), m.f(v));
        match self.kind {
            FluxKind::Godunov => {
                let flux = godunov_unchecked(m, u, v);
                if u > v {
                    ((fv - fu).max(0.0), (fu - fv).max(0.0))
                } else {
                    (flux - fu, flux - fv)
                }
            }
            FluxKind::EngquistOsher => {
                let f0 = m.f(0.0);
                let from_u = if u >= 0.0 { m.f(v.min(0.0)) - f0 } else { m.f(v.min(0.0)) - fu };
                let from_v = if v <= 0.0 { m.f(u.max(0.0)) - f0 } else { m.f(u.max(0.0)) - fv };
                (from_u, from_v)
            }
            FluxKind::Rusanov => {
                let slope = (fv - fu) / (v - u);
                let half = 0.5 * (v - u);
                (half * (slope - self.lipschitz_bound), -half * (slope + self.lipschitz_bound))
            }
        }
    }

    #[inline]
    pub fn evaluate(&self, m: &FluxModel, left: f64, right: f64) -> f64 {
        match self.kind {
            FluxKind::Godunov => godunov_unchecked(m, left, right),
            FluxKind::EngquistOsher => engquist_osher_unchecked(m, left, right),
            FluxKind::Rusanov => flux_rusanov(m, left, right),
        }
    }
}

/// Cell averages at one time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub time: f64,
    pub step_index: u64,
}

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            time: 0.0,
            step_index: 0,
        }
    }

    /// Largest `|v|` over all cells.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Per-step record of the convex-combination form of the update.
///
/// Writing `v_i' = A_i v_i + A_{i,L} v_{i-1} + A_{i,R} v_{i+1} + B_i (f + h)(v_i)`, the
/// report keeps the smallest of all `A` coefficients, the largest `B_i = τ θ_i`, the
/// face fluxes used, and how closely the decomposition reproduces the update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub convex_coeffs_min: f64,
    pub source_coeff: f64,
    /// One flux per face, innermost first (`cells + 1` entries).
    pub fluxes: Vec<f64>,
    pub tau_used: f64,
    /// `max_i |A_i + A_{i,L} + A_{i,R} - 1|`.
    pub coeff_sum_error: f64,
    /// `max_i` of the difference between the decomposition and the computed update.
    pub recombination_error: f64,
    pub inner_ghost: f64,
    pub outer_ghost: f64,
}

/// Boundary handling at the two truncation faces.
///
/// The inner ghost only matters when the mesh does not touch the horizon (flat space);
/// on a horizon-touching mesh its flux is multiplied by an exactly zero weight.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Boundaries {
    pub inner: GhostPolicy,
    pub outer: GhostPolicy,
}

/// Mesh, model and flux bound together with a fixed stability bound.
#[derive(Clone, Debug)]
pub struct Scheme {
    mesh: RadialMesh,
    model: FluxModel,
    flux: NumericalFlux,
    boundaries: Boundaries,
    max_tau: f64,
}

/// Snapshot cadence for [`Scheme::run`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnapshotCadence {
    /// Every k-th step (plus the initial and final states).
    EverySteps(u64),
    /// On a fixed grid of times `j Δt` (plus the initial and final states).
    Interval(f64),
}

impl Default for SnapshotCadence {
    fn default() -> Self {
        SnapshotCadence::EverySteps(u64::MAX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    pub cfl_fraction: f64,
    pub snapshots: SnapshotCadence,
}

impl RunOptions {
    pub fn new(t_end: f64, cfl_fraction: f64) -> Self {
        Self {
            t_end,
            cfl_fraction,
            snapshots: SnapshotCadence::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<StateVector>,
    pub steps: u64,
    /// Number of initial cell averages that had to be clamped into `[-1, 1]`.
    pub clamped_cells: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

impl Scheme {
    pub fn new(mesh: RadialMesh, model: FluxModel, kind: FluxKind) -> Result<Self> {
        Self::with_boundaries(mesh, model, kind, Boundaries::default())
    }

    pub fn with_boundaries(
        mesh: RadialMesh,
        model: FluxModel,
        kind: FluxKind,
        boundaries: Boundaries,
    ) -> Result<Self> {
        let flux = NumericalFlux::new(kind, &model)?;
        let max_tau = max_timestep(&mesh, &model, flux.lipschitz_bound())?;
        Ok(Self {
            mesh,
            model,
            flux,
            boundaries,
            max_tau,
        })
    }

    pub fn mesh(&self) -> &RadialMesh {
        &self.mesh
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn flux(&self) -> &NumericalFlux {
        &self.flux
    }

    pub fn boundaries(&self) -> Boundaries {
        self.boundaries
    }

    /// Largest step admitted by both stability conditions.
    pub fn max_timestep(&self) -> f64 {
        self.max_tau
    }

    /// Ghost values `(inner, outer)` for a state.
    pub fn ghosts(&self, values: &[f64]) -> (f64, f64) {
        let n = values.len();
        (
            self.boundaries.inner.ghost(values[0]),
            self.boundaries.outer.ghost(values[n - 1]),
        )
    }

    /// Face fluxes for `values`, innermost face first.
    pub fn face_fluxes(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let (inner, outer) = self.ghosts(values);
        (0..=n)
            .map(|j| {
                let left = if j == 0 { inner } else { values[j - 1] };
                let right = if j == n { outer } else { values[j] };
                self.flux.evaluate(&self.model, left, right)
            })
            .collect()
    }

    /// New value of cell `i` from its old value and its two face fluxes.
    #[inline]
    pub(crate) fn cell_update(&self, i: usize, v: f64, f_left: f64, f_right: f64, tau: f64) -> f64 {
        let a_left = self.mesh.face_weights()[i];
        let a_right = self.mesh.face_weights()[i + 1];
        let ratio = tau / self.mesh.widths()[i];
        let fv = self.model.f(v);
        v - ratio * (a_right * f_right - a_left * f_left - (a_right - a_left) * fv)
            + tau * self.mesh.cell_thetas()[i] * self.model.total(v)
    }

    /// One explicit step of size `tau`.
    pub fn step(&self, state: &StateVector, tau: f64) -> Result<(StateVector, StepReport)> {
        let n = self.mesh.cells();
        if state.values.len() != n {
            return Err(Error::Contract(format!(
                "state has {} values, mesh has {n} cells",
                state.values.len()
            )));
        }
        if !(tau > 0.0) || tau > self.max_tau {
            return Err(Error::CflViolation {
                tau,
                bound: self.max_tau,
            });
        }
        let values = &state.values;
        let fluxes = self.face_fluxes(values);
        let (inner, outer) = self.ghosts(values);
        let weights = self.mesh.face_weights();
        let widths = self.mesh.widths();
        let thetas = self.mesh.cell_thetas();

        let mut next = Vec::with_capacity(n);
        let mut coeff_min = f64::INFINITY;
        let mut coeff_sum_error: f64 = 0.0;
        let mut recombination_error: f64 = 0.0;
        let mut source_coeff: f64 = 0.0;
        for i in 0..n {
            let v = values[i];
            let (a_left, a_right) = (weights[i], weights[i + 1]);
            let (f_left, f_right) = (fluxes[i], fluxes[i + 1]);
            let total = self.model.total(v);
            let ratio = tau / widths[i];
            let b = tau * thetas[i];
            let updated = self.cell_update(i, v, f_left, f_right, tau);
            if !updated.is_finite() {
                return Err(Error::NumericFault {
                    cell: i,
                    step: state.step_index + 1,
                });
            }

            let v_left = if i == 0 { inner } else { values[i - 1] };
            let v_right = if i + 1 == n { outer } else { values[i + 1] };
            let quotient = |increment: f64, other: f64| {
                if other == v {
                    0.0
                } else {
                    increment / (other - v)
                }
            };
            let inc_right = self.flux.increments(&self.model, v, v_right).0;
            let inc_left = self.flux.increments(&self.model, v_left, v).1;
            // outward weights: +a at the right face, -a at the left face
            let q_right = quotient(inc_right, v_right) * a_right;
            let q_left = quotient(inc_left, v_left) * -a_left;
            let coeff_right = -ratio * q_right;
            let coeff_left = -ratio * q_left;
            let coeff_self = 1.0 + ratio * (q_right + q_left);
            coeff_min = coeff_min.min(coeff_self).min(coeff_right).min(coeff_left);
            coeff_sum_error = coeff_sum_error.max((coeff_self + coeff_left + coeff_right - 1.0).abs());
            let recombined = coeff_self * v + coeff_left * v_left + coeff_right * v_right + b * total;
            recombination_error = recombination_error.max((recombined - updated).abs());
            source_coeff = source_coeff.max(b);
            next.push(updated);
        }
        let report = StepReport {
            convex_coeffs_min: coeff_min,
            source_coeff,
            fluxes,
            tau_used: tau,
            coeff_sum_error,
            recombination_error,
            inner_ghost: inner,
            outer_ghost: outer,
        };
        Ok((
            StateVector {
                values: next,
                time: state.time + tau,
                step_index: state.step_index + 1,
            },
            report,
        ))
    }

    /// Cell averages of `v0` by three-point Gauss quadrature, clamped into `[-1, 1]`.
    ///
    /// Returns the state and the number of clamped cells.
    pub fn project<F: Fn(f64) -> f64>(&self, v0: F) -> Result<(StateVector, usize)> {
        let faces = self.mesh.faces();
        let mut clamped = 0;
        let mut values = Vec::with_capacity(self.mesh.cells());
        for w in faces.windows(2) {
            let avg = gauss3_average(&v0, w[0], w[1]);
            if !avg.is_finite() {
                return Err(Error::domain(format!(
                    "initial data is not finite on [{}, {}]",
                    w[0], w[1]
                )));
            }
            let c = avg.clamp(-1.0, 1.0);
            if c != avg {
                clamped += 1;
            }
            values.push(c);
        }
        Ok((StateVector::new(values), clamped))
    }

    /// Advances from projected initial data to `t_end`.
    pub fn run<F: Fn(f64) -> f64>(&self, v0: F, opts: &RunOptions) -> Result<Trajectory> {
        self.run_with(v0, opts, |_, _, _| Ok(()))
    }

    /// Like [`Scheme::run`], calling `observe(before, after, report)` after every step.
    pub fn run_with<F, O>(&self, v0: F, opts: &RunOptions, observe: O) -> Result<Trajectory>
    where
        F: Fn(f64) -> f64,
        O: FnMut(&StateVector, &StateVector, &StepReport) -> Result<()>,
    {
        let (initial, clamped_cells) = self.project(v0)?;
        self.evolve(initial, opts, observe)
            .map(|(snapshots, steps)| Trajectory {
                snapshots,
                steps,
                clamped_cells,
            })
    }

    /// Time loop from an explicit initial state.
    pub fn evolve<O>(
        &self,
        initial: StateVector,
        opts: &RunOptions,
        mut observe: O,
    ) -> Result<(Vec<StateVector>, u64)>
    where
        O: FnMut(&StateVector, &StateVector, &StepReport) -> Result<()>,
    {
        if !(opts.cfl_fraction > 0.0 && opts.cfl_fraction <= 1.0) {
            return Err(Error::domain(format!(
                "cfl_fraction must lie in (0, 1], got {}",
                opts.cfl_fraction
            )));
        }
        if !(opts.t_end > 0.0) || !opts.t_end.is_finite() {
            return Err(Error::domain(format!("t_end must be positive, got {}", opts.t_end)));
        }
        let tau = opts.cfl_fraction * self.max_tau;
        if !tau.is_finite() {
            return Err(Error::domain("stability bound is unbounded; nothing limits the step"));
        }
        let mut snapshots = vec![initial.clone()];
        let mut state = initial;
        let mut next_snapshot_time = match opts.snapshots {
            SnapshotCadence::Interval(dt) => dt,
            SnapshotCadence::EverySteps(_) => f64::INFINITY,
        };
        while state.time < opts.t_end {
            let remaining = opts.t_end - state.time;
            let last = remaining <= tau * (1.0 + 1e-12);
            let this_tau = if last { remaining } else { tau };
            let (mut next, report) = self.step(&state, this_tau)?;
            if last {
                next.time = opts.t_end;
            }
            observe(&state, &next, &report)?;
            state = next;
            let take = match opts.snapshots {
                SnapshotCadence::EverySteps(k) => k > 0 && state.step_index.is_multiple_of(k),
                SnapshotCadence::Interval(dt) => {
                    if state.time >= next_snapshot_time {
                        while next_snapshot_time <= state.time {
                            next_snapshot_time += dt;
                        }
                        true
                    } else {
                        false
                    }
                }
            };
            if take || last {
                snapshots.push(state.clone());
            }
            if last {
                break;
            }
        }
        let steps = state.step_index;
        Ok((snapshots, steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_uniform_mesh, Background};
    use crate::model::{burgers_model, check_structure, Polynomial};
    use approx::assert_relative_eq;

    fn grid41() -> Vec<f64> {
        (0..41).map(|i| -1.0 + i as f64 * 0.05).collect()
    }

    #[test]
    fn rusanov_examples() {
        let m = burgers_model();
        assert_eq!(flux_rusanov(&m, 0.5, 0.5), -0.375);
        assert_eq!(flux_rusanov(&m, 1.0, -1.0), 1.0);
        assert_eq!(flux_rusanov(&m, -1.0, 1.0), -1.0);
    }

    #[test]
    fn godunov_examples() {
        let m = burgers_model();
        assert_eq!(flux_godunov(&m, -1.0, 1.0).unwrap(), -0.5);
        assert_eq!(flux_godunov(&m, 1.0, -1.0).unwrap(), 0.0);
        assert_relative_eq!(flux_godunov(&m, 0.3, 0.3).unwrap(), -0.455, epsilon = 1e-15);
    }

    #[test]
    fn engquist_osher_examples() {
        let m = burgers_model();
        assert_relative_eq!(flux_engquist_osher(&m, 0.5, -0.5).unwrap(), -0.25, epsilon = 1e-15);
        assert_eq!(flux_engquist_osher(&m, 0.7, 0.7).unwrap(), m.f(0.7));
        assert_eq!(flux_engquist_osher(&m, -0.2, 0.9).unwrap(), -0.5);
    }

    #[test]
    fn non_unimodal_models_are_rejected() {
        let m = FluxModel::from_polynomials(
            "linear",
            Polynomial::new(vec![0.0, 1.0]).unwrap(),
            Polynomial::new(vec![0.0]).unwrap(),
        )
        .unwrap();
        assert!(matches!(flux_godunov(&m, 0.0, 0.1), Err(Error::UnsupportedModel { .. })));
        assert!(flux_engquist_osher(&m, 0.0, 0.1).is_err());
        assert!(NumericalFlux::new(FluxKind::Godunov, &m).is_err());
        assert!(NumericalFlux::new(FluxKind::Rusanov, &m).is_ok());
    }

    #[test]
    fn flux_invariants_on_burgers() {
        let m = burgers_model();
        let grid = grid41();
        for kind in FluxKind::ALL {
            let nf = NumericalFlux::new(kind, &m).unwrap();
            for &v in &grid {
                assert!((nf.evaluate(&m, v, v) - m.f(v)).abs() <= 1e-12, "{kind} consistency");
            }
            for (i, &u) in grid.iter().enumerate() {
                for (j, &w) in grid.iter().enumerate() {
                    let here = nf.evaluate(&m, u, w);
                    if i + 1 < grid.len() {
                        assert!(nf.evaluate(&m, grid[i + 1], w) >= here - 1e-15, "{kind} in first arg");
                    }
                    if j + 1 < grid.len() {
                        assert!(nf.evaluate(&m, u, grid[j + 1]) <= here + 1e-15, "{kind} in second arg");
                    }
                    if u != w {
                        let q = (here - nf.evaluate(&m, w, w)) / (u - w);
                        assert!(q.abs() <= nf.lipschitz_bound() * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn increments_match_flux_and_keep_sign() {
        let m = burgers_model();
        let grid = grid41();
        for kind in FluxKind::ALL {
            let nf = NumericalFlux::new(kind, &m).unwrap();
            for &u in &grid {
                for &w in &grid {
                    let flux = nf.evaluate(&m, u, w);
                    let (du, dw) = nf.increments(&m, u, w);
                    assert!((du - (flux - m.f(u))).abs() <= 1e-15, "{kind} {u} {w}");
                    assert!((dw - (flux - m.f(w))).abs() <= 1e-15, "{kind} {u} {w}");
                    if u != w {
                        assert!(du / (w - u) <= 0.0, "{kind} right quotient at {u} {w}");
                        assert!(dw / (u - w) >= 0.0, "{kind} left quotient at {u} {w}");
                    }
                }
            }
        }
    }

    fn scheme(mass: f64, cells: usize, kind: FluxKind) -> Scheme {
        let mesh = build_uniform_mesh(&Background::new(mass).unwrap(), 2.0 * mass + 10.0, cells).unwrap();
        Scheme::new(mesh, burgers_model(), kind).unwrap()
    }

    #[test]
    fn constants_are_preserved_in_flat_space() {
        for kind in FluxKind::ALL {
            let s = scheme(0.0, 20, kind);
            for c in [-0.7, 0.0, 0.3, 1.0] {
                let st = StateVector::new(vec![c; 20]);
                let (next, report) = s.step(&st, s.max_timestep()).unwrap();
                assert!(next.values.iter().all(|&x| x == c));
                assert_eq!(next.step_index, 1);
                assert_eq!(next.time, s.max_timestep());
                assert!(report.convex_coeffs_min >= 0.0);
            }
        }
    }

    #[test]
    fn plus_minus_one_are_fixed_points() {
        for kind in FluxKind::ALL {
            let s = scheme(1.0, 30, kind);
            for c in [1.0, -1.0] {
                let st = StateVector::new(vec![c; 30]);
                let (next, _) = s.step(&st, s.max_timestep()).unwrap();
                assert!(next.values.iter().all(|&x| x == c), "{kind} {c}");
            }
        }
    }

    #[test]
    fn cfl_and_contract_errors() {
        let s = scheme(1.0, 10, FluxKind::Godunov);
        let st = StateVector::new(vec![0.0; 10]);
        assert!(matches!(
            s.step(&st, 2.0 * s.max_timestep()),
            Err(Error::CflViolation { .. })
        ));
        assert!(matches!(
            s.step(&StateVector::new(vec![0.0; 9]), 0.01),
            Err(Error::Contract(_))
        ));
        let nan = StateVector::new(vec![f64::NAN; 10]);
        assert!(matches!(s.step(&nan, 0.001), Err(Error::NumericFault { .. })));
    }

    #[test]
    fn decomposition_is_convex() {
        let s = scheme(1.0, 50, FluxKind::EngquistOsher);
        let values: Vec<f64> = (0..50).map(|i| ((i as f64) * 0.7).sin()).collect();
        let (_, report) = s.step(&StateVector::new(values), s.max_timestep()).unwrap();
        assert!(report.convex_coeffs_min >= 0.0, "{}", report.convex_coeffs_min);
        assert!(report.coeff_sum_error <= 1e-12);
        assert!(report.recombination_error <= 1e-12);
        assert_eq!(report.fluxes.len(), 51);
    }

    #[test]
    fn run_lands_on_t_end_and_stays_bounded() {
        let s = scheme(1.0, 100, FluxKind::Godunov);
        let mut opts = RunOptions::new(0.5, 0.9);
        opts.snapshots = SnapshotCadence::EverySteps(3);
        let traj = s.run(|_| 0.0, &opts).unwrap();
        assert_eq!(traj.final_state().time, 0.5);
        for snap in &traj.snapshots {
            assert!(snap.sup_norm() <= 1.0);
        }
        let ones = s.run(|_| 1.0, &RunOptions::new(0.5, 0.9)).unwrap();
        assert!(ones.final_state().values.iter().all(|&v| v == 1.0));
        assert!(check_structure(s.model(), 1001).unwrap().all_ok());
    }

    #[test]
    fn projection_clamps_and_counts() {
        let s = scheme(1.0, 10, FluxKind::Rusanov);
        let (st, clamped) = s.project(|r| if r < 6.0 { 1.5 } else { 0.2 }).unwrap();
        assert!(st.sup_norm() <= 1.0);
        assert!(clamped >= 1);
        assert!(s.project(|_| f64::NAN).is_err());
    }

    #[test]
    fn stationary_shock_in_flat_space() {
        let mesh = build_uniform_mesh(&Background::new(0.0).unwrap(), 2.0, 200).unwrap();
        let s = Scheme::new(mesh, burgers_model(), FluxKind::Godunov).unwrap();
        let traj = s.run(|r| if r < 1.0 { 1.0 } else { -1.0 }, &RunOptions::new(0.25, 0.9)).unwrap();
        let v = &traj.final_state().values;
        assert!(v[..100].iter().all(|&x| x == 1.0));
        assert!(v[100..].iter().all(|&x| x == -1.0));
    }

    #[test]
    fn interval_snapshots() {
        let s = scheme(1.0, 40, FluxKind::Godunov);
        let mut opts = RunOptions::new(1.0, 0.9);
        opts.snapshots = SnapshotCadence::Interval(0.25);
        let traj = s.run(|_| 0.2, &opts).unwrap();
        // initial + t >= 0.25, 0.5, 0.75 + final
        assert_eq!(traj.snapshots.len(), 5);
    }
}
