//! Characteristic curves, the implicit relation `F̂(u) - log a(r) = const`, escape
//! velocities, fates and steady profiles.
//!
//! Exterior curves solve
//!
//! ```text
//! dt/ds = a(r)^-2,   dr/ds = f'(u) / a(r),   du/ds = 2M (f + h)(u) / (r - 2M)^2
//! ```
//!
//! and interior curves (Burgers only, shifted radius `R = r + R0`) solve
//!
//! ```text
//! dt̂/ds = 1 + h'(R) û a(R),   dR/ds = a(R) û,   dû/ds = (M / R^2)(û^2 - 1).
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Background;
use crate::model::FluxModel;
use crate::quadrature::adaptive_simpson;

/// Distance kept from `±1`, where `F̂` diverges.
pub const FHAT_EPSILON: f64 = 1e-9;
const FHAT_TOLERANCE: f64 = 1e-11;
const FHAT_NODES: usize = 64;
const INVERSE_TOLERANCE: f64 = 1e-12;
const HORIZON_GUARD: f64 = 1e-6;
const OVERSHOOT_LIMIT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharState {
    pub s: f64,
    pub t: f64,
    pub r: f64,
    pub u: f64,
}

impl CharState {
    pub fn new(r: f64, u: f64) -> Self {
        Self { s: 0.0, t: 0.0, r, u }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Reached `s_max`.
    Completed,
    /// Came within the guard distance of the horizon.
    Horizon,
    /// Passed the configured outer radius.
    OuterRadius,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    Exterior,
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharPath {
    pub coordinates: Coordinates,
    pub states: Vec<CharState>,
    pub stop: StopReason,
}

impl CharPath {
    pub fn last(&self) -> &CharState {
        self.states.last().expect("a path holds its start")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceLimits {
    pub ds: f64,
    pub s_max: f64,
    pub r_stop: f64,
}

impl TraceLimits {
    pub fn new(ds: f64, s_max: f64) -> Self {
        Self {
            ds,
            s_max,
            r_stop: f64::INFINITY,
        }
    }
}

fn check_radius(bg: &Background, r: f64) -> Result<f64> {
    if !(r > bg.horizon()) || !r.is_finite() {
        return Err(Error::domain(format!(
            "radius {r} is not outside the horizon r = {}",
            bg.horizon()
        )));
    }
    Ok(bg.weight(r))
}

/// Right-hand side `(dt/ds, dr/ds, du/ds)` of the exterior system.
pub fn rhs_exterior(m: &FluxModel, mass: f64, state: &CharState) -> Result<(f64, f64, f64)> {
    let bg = Background::new(mass)?;
    let a = check_radius(&bg, state.r)?;
    let u = state.u;
    let du = if mass == 0.0 {
        0.0
    } else {
        let gap = state.r - 2.0 * mass;
        2.0 * mass * m.total(u) / (gap * gap)
    };
    Ok((1.0 / (a * a), m.df(u) / a, du))
}

fn validate_limits(limits: &TraceLimits) -> Result<()> {
    if !(limits.ds > 0.0) || !limits.ds.is_finite() {
        return Err(Error::domain(format!("ds must be positive, got {}", limits.ds)));
    }
    if !(limits.s_max >= 0.0) || !limits.s_max.is_finite() {
        return Err(Error::domain(format!("s_max must be nonnegative, got {}", limits.s_max)));
    }
    Ok(())
}

fn clamp_u(u: f64) -> Result<f64> {
    if u.abs() <= 1.0 {
        Ok(u)
    } else if u.abs() <= 1.0 + OVERSHOOT_LIMIT {
        Ok(u.clamp(-1.0, 1.0))
    } else {
        Err(Error::StepSize { value: u.abs() })
    }
}

// Fixed-step RK4 over (t, r, u). Stages that would reach the horizon end the path.
fn rk4_path<F>(
    coordinates: Coordinates,
    horizon: f64,
    start: CharState,
    limits: &TraceLimits,
    rhs: F,
) -> Result<CharPath>
where
    F: Fn(f64, f64) -> Result<[f64; 3]>,
{
    validate_limits(limits)?;
    if start.u.abs() > 1.0 || !start.u.is_finite() {
        return Err(Error::domain(format!("start value u = {} outside [-1, 1]", start.u)));
    }
    let guard = horizon * (1.0 + HORIZON_GUARD);
    let steps = (limits.s_max / limits.ds - 1e-9).ceil().max(0.0) as u64;
    let mut states = vec![start];
    let mut state = start;
    let mut stop = StopReason::Completed;
    for k in 1..=steps {
        if state.r < guard {
            stop = StopReason::Horizon;
            break;
        }
        if state.r > limits.r_stop {
            stop = StopReason::OuterRadius;
            break;
        }
        let s_next = (start.s + k as f64 * limits.ds).min(start.s + limits.s_max);
        let h = s_next - state.s;
        let stage = |r: f64, u: f64| -> Result<Option<[f64; 3]>> {
            if r <= horizon {
                Ok(None)
            } else {
                rhs(r, u).map(Some)
            }
        };
        let Some(k1) = stage(state.r, state.u)? else {
            stop = StopReason::Horizon;
            break;
        };
        let Some(k2) = stage(state.r + 0.5 * h * k1[1], state.u + 0.5 * h * k1[2])? else {
            stop = StopReason::Horizon;
            break;
        };
        let Some(k3) = stage(state.r + 0.5 * h * k2[1], state.u + 0.5 * h * k2[2])? else {
            stop = StopReason::Horizon;
            break;
        };
        let Some(k4) = stage(state.r + h * k3[1], state.u + h * k3[2])? else {
            stop = StopReason::Horizon;
            break;
        };
        let comb = |i: usize| h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        let r = state.r + comb(1);
        if !(r > horizon) {
            stop = StopReason::Horizon;
            break;
        }
        state = CharState {
            s: s_next,
            t: state.t + comb(0),
            r,
            u: clamp_u(state.u + comb(2))?,
        };
        states.push(state);
    }
    if stop == StopReason::Completed {
        if state.r < guard {
            stop = StopReason::Horizon;
        } else if state.r > limits.r_stop {
            stop = StopReason::OuterRadius;
        }
    }
    Ok(CharPath {
        coordinates,
        states,
        stop,
    })
}

/// Fixed-step RK4 trace of an exterior characteristic.
///
/// The path ends early once `r < 2M(1 + 1e-6)` or `r > r_stop`. Values of `u` that
/// leave `[-1, 1]` by at most `1e-9` are clamped; larger overshoots are a step-size error.
pub fn trace_exterior(m: &FluxModel, mass: f64, start: CharState, limits: &TraceLimits) -> Result<CharPath> {
    let bg = Background::new(mass)?;
    check_radius(&bg, start.r)?;
    rk4_path(Coordinates::Exterior, bg.horizon(), start, limits, |r, u| {
        let (dt, dr, du) = rhs_exterior(m, mass, &CharState { s: 0.0, t: 0.0, r, u })?;
        Ok([dt, dr, du])
    })
}

/// `dh/dR` of the interior time slicing with shift `R0`.
pub fn h_prime_interior(mass: f64, r0_shift: f64, big_r: f64) -> Result<f64> {
    let bg = Background::new(mass)?;
    let a = check_radius(&bg, big_r)?;
    let r = big_r - r0_shift;
    if !(r > 0.0) {
        return Err(Error::domain(format!(
            "R = {big_r} gives r = R - R0 = {r}, which must be positive"
        )));
    }
    let radicand = 1.0 - a * big_r * big_r / (r * r);
    if radicand < 0.0 {
        // radicand >= 0  <=>  R0^2 >= 2 R (R0 - M), an upper bound on R once R0 > M
        let upper = r0_shift * r0_shift / (2.0 * (r0_shift - mass));
        let lower = bg.horizon().max(r0_shift);
        return Err(Error::domain(format!(
            "dh/dR is undefined at R = {big_r}: valid R lie in ({lower}, {upper}]"
        )));
    }
    Ok(radicand.sqrt() / a)
}

/// RK4 trace in the interior slicing; `start.t` is `t̂` and `start.r` is `R`.
pub fn trace_interior(mass: f64, r0_shift: f64, start: CharState, limits: &TraceLimits) -> Result<CharPath> {
    let bg = Background::new(mass)?;
    check_radius(&bg, start.r)?;
    rk4_path(Coordinates::Interior, bg.horizon(), start, limits, |big_r, u| {
        let a = bg.weight(big_r);
        let hp = h_prime_interior(mass, r0_shift, big_r)?;
        Ok([1.0 + hp * u * a, a * u, mass / (big_r * big_r) * (u * u - 1.0)])
    })
}

/// Follows the exterior characteristic through `(r, u)` in coordinate time,
/// `dr/dt = a f'(u)`, `du/dt = (2M/r²)(f + h)(u)`, with `steps` RK4 steps up to `t_end`.
///
/// In coordinate time the horizon is never reached, so no guard is needed. In flat
/// space the slab extends over the whole line and any finite `r` is accepted.
pub fn advance_in_time(m: &FluxModel, mass: f64, r: f64, u: f64, t_end: f64, steps: usize) -> Result<(f64, f64)> {
    let bg = Background::new(mass)?;
    if mass > 0.0 {
        check_radius(&bg, r)?;
    }
    let rhs = |r: f64, u: f64| {
        let a = bg.weight(r);
        (a * m.df(u), bg.theta(r) * m.total(u))
    };
    let steps = steps.max(1);
    let h = t_end / steps as f64;
    let (mut r, mut u) = (r, u);
    for _ in 0..steps {
        let k1 = rhs(r, u);
        let k2 = rhs(r + 0.5 * h * k1.0, u + 0.5 * h * k1.1);
        let k3 = rhs(r + 0.5 * h * k2.0, u + 0.5 * h * k2.1);
        let k4 = rhs(r + h * k3.0, u + h * k3.1);
        r += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        u += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if mass > 0.0 && !(r > bg.horizon()) || !r.is_finite() {
            return Err(Error::domain(format!("time integration crossed the horizon (r = {r}); use more steps")));
        }
    }
    Ok((r, clamp_u(u)?))
}

/// Conserved quantity `(1 - û²) / a(R)` of the interior system.
pub fn interior_invariant(mass: f64, state: &CharState) -> f64 {
    (1.0 - state.u * state.u) / (1.0 - 2.0 * mass / state.r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

/// `F̂(u) = ∫_0^u f'/(f + h)` with cached cumulative node values on each branch.
///
/// The table is filled once at construction and is read-only afterwards.
#[derive(Clone, Debug)]
pub struct FhatTable {
    model: FluxModel,
    epsilon: f64,
    // nodes on [0, 1 - ε] and the matching cumulative integrals
    plus_nodes: Vec<f64>,
    plus_values: Vec<f64>,
    minus_nodes: Vec<f64>,
    minus_values: Vec<f64>,
}

fn branch_nodes(epsilon: f64) -> Vec<f64> {
    // uniform up to 0.9, then geometric towards 1 - ε where the integrand blows up
    let mut nodes: Vec<f64> = (0..=36).map(|j| 0.025 * j as f64).collect();
    let tail = FHAT_NODES - nodes.len();
    let (lo, hi) = (0.1f64.ln(), epsilon.ln());
    for j in 1..=tail {
        let gap = (lo + (hi - lo) * j as f64 / tail as f64).exp();
        nodes.push(1.0 - gap);
    }
    *nodes.last_mut().unwrap() = 1.0 - epsilon;
    nodes
}

impl FhatTable {
    pub fn new(m: &FluxModel) -> Result<Self> {
        Self::with_epsilon(m, FHAT_EPSILON)
    }

    pub fn with_epsilon(m: &FluxModel, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::domain(format!("epsilon {epsilon} outside (0, 0.5)")));
        }
        let nodes = branch_nodes(epsilon);
        let integrand = |w: f64| m.df(w) / m.total(w);
        let cumulative = |sign: f64| -> Vec<f64> {
            let mut acc = 0.0;
            let mut out = vec![0.0];
            for w in nodes.windows(2) {
                acc += adaptive_simpson(&integrand, sign * w[0], sign * w[1], FHAT_TOLERANCE / FHAT_NODES as f64);
                out.push(acc);
            }
            out
        };
        let plus_values = cumulative(1.0);
        let minus_values = cumulative(-1.0);
        let unsupported = |reason: &str| Error::UnsupportedModel {
            model: m.name().to_string(),
            reason: reason.to_string(),
        };
        let decreasing = plus_values.windows(2).all(|w| w[1] < w[0]);
        // on the minus branch the integral runs from 0 to -w, so it also falls with w
        let falling = minus_values.windows(2).all(|w| w[1] < w[0]);
        if !decreasing || !falling || plus_values.iter().chain(&minus_values).any(|v| !v.is_finite()) {
            return Err(unsupported("F̂ is not strictly monotone on both branches"));
        }
        Ok(Self {
            model: m.clone(),
            epsilon,
            minus_nodes: nodes.iter().map(|x| -x).collect(),
            plus_nodes: nodes,
            plus_values,
            minus_values,
        })
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Smallest value reached on a branch (at `±(1 - ε)`).
    pub fn branch_floor(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => *self.plus_values.last().unwrap(),
            Branch::Minus => *self.minus_values.last().unwrap(),
        }
    }
}

/// `F̂(u)` for `|u| ≤ 1 - ε`.
pub fn fhat(table: &FhatTable, u: f64) -> Result<f64> {
    if !(u.abs() <= 1.0 - table.epsilon) {
        return Err(Error::domain(format!(
            "F̂ is evaluated only on |u| <= 1 - {}, got u = {u}",
            table.epsilon
        )));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let (nodes, values) = if u > 0.0 {
        (&table.plus_nodes, &table.plus_values)
    } else {
        (&table.minus_nodes, &table.minus_values)
    };
    let x = u.abs();
    let j = table.plus_nodes.partition_point(|&n| n <= x).saturating_sub(1);
    let m = &table.model;
    let integrand = |w: f64| m.df(w) / m.total(w);
    Ok(values[j] + adaptive_simpson(&integrand, nodes[j], u, FHAT_TOLERANCE / FHAT_NODES as f64))
}

/// Inverse of `F̂` on one branch, by bisection to `|Δu| ≤ 1e-12`.
pub fn fhat_inverse(table: &FhatTable, branch: Branch, y: f64) -> Result<f64> {
    let floor = table.branch_floor(branch);
    if y > 0.0 || y.is_nan() {
        return Err(Error::Range {
            message: format!("F̂ takes only nonpositive values, got {y}"),
            admissible: Some((floor, 0.0)),
        });
    }
    if y < floor {
        return Err(Error::Range {
            message: format!("{y} is below the reachable range of the {branch:?} branch"),
            admissible: Some((floor, 0.0)),
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    // F̂(sign x) falls from 0 to the floor as x goes from 0 to 1 - ε
    let (mut lo, mut hi) = (0.0, 1.0 - table.epsilon);
    while hi - lo > INVERSE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if fhat(table, sign * mid)? > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

/// Escape velocity `F̂₊⁻¹(log(1 - 2M/r0))`.
pub fn escape_velocity(table: &FhatTable, mass: f64, r0: f64) -> Result<f64> {
    let bg = Background::new(mass)?;
    let a = check_radius(&bg, r0)?;
    fhat_inverse(table, Branch::Plus, a.ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FateKind {
    FallsIn,
    Escapes,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fate {
    pub kind: FateKind,
    pub u_limit: f64,
    pub r_limit_finite: bool,
}

/// Late-time behaviour of the characteristic through `(r0, u0)`.
pub fn classify_fate(table: &FhatTable, mass: f64, r0: f64, u0: f64) -> Result<Fate> {
    if !(u0.abs() < 1.0) {
        return Err(Error::domain(format!("u0 = {u0} must satisfy |u0| < 1")));
    }
    let escape = escape_velocity(table, mass, r0)?;
    if (u0 - escape).abs() <= 1e-12 {
        return Ok(Fate {
            kind: FateKind::Marginal,
            u_limit: 0.0,
            r_limit_finite: false,
        });
    }
    if u0 <= 0.0 || u0 < escape {
        return Ok(Fate {
            kind: FateKind::FallsIn,
            u_limit: -1.0,
            r_limit_finite: true,
        });
    }
    let y = fhat(table, u0)? - Background::new(mass)?.weight(r0).ln();
    Ok(Fate {
        kind: FateKind::Escapes,
        u_limit: fhat_inverse(table, Branch::Plus, y)?,
        r_limit_finite: false,
    })
}

/// Steady solution through `(r0, u0)` evaluated on `r_grid`, from the implicit relation
/// `F̂(u(r)) = F̂(u0) + log(a(r)/a(r0))` on the branch of `u0`.
pub fn steady_profile(table: &FhatTable, mass: f64, r0: f64, u0: f64, r_grid: &[f64]) -> Result<Vec<f64>> {
    if u0 == 0.0 || !(u0.abs() < 1.0) {
        return Err(Error::domain(format!("steady profiles need 0 < |u0| < 1, got {u0}")));
    }
    let bg = Background::new(mass)?;
    let a0 = check_radius(&bg, r0)?;
    let branch = if u0 > 0.0 { Branch::Plus } else { Branch::Minus };
    let base = fhat(table, u0)?;
    let floor = table.branch_floor(branch);
    let admissible = || {
        // F̂ = y stays in [floor, 0]  <=>  a(r) in [a0 e^{floor - base}, a0 e^{-base}]
        let radius_for = |weight: f64| {
            if weight >= 1.0 {
                f64::INFINITY
            } else {
                bg.horizon() / (1.0 - weight)
            }
        };
        (
            radius_for(a0 * (floor - base).exp()),
            radius_for(a0 * (-base).exp()),
        )
    };
    let mut out = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let a = check_radius(&bg, r)?;
        let y = base + (a / a0).ln();
        if y > 0.0 || y < floor {
            return Err(Error::Range {
                message: format!("steady profile through (r0 = {r0}, u0 = {u0}) leaves its branch at r = {r}"),
                admissible: Some(admissible()),
            });
        }
        out.push(fhat_inverse(table, branch, y)?);
    }
    Ok(out)
}
