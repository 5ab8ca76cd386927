//! Discrete entropy fluxes and per-step entropy diagnostics.
//!
//! Every cell update splits into one intermediate state per face,
//!
//! ```text
//! ṽ_e     = v - (2 τ ω_e / |K|) (F_e - f(v))
//! v_{K,e} = ṽ_e - (τ/|K|) Σ ω f(v) + (2 τ ω_e / |K|) f(v) + τ θ (f + h)(v)
//! ```
//!
//! with `ω_R = a(r_R)`, `ω_L = -a(r_L)`, and the new cell value is the mean of the two
//! `v_{K,e}`. Entropy residuals are evaluated face by face on this split.
//!
//! Two residual forms are reported. The *source-weighted* form keeps the term
//! `τ θ (f + h)(v) U'(v)` on the right-hand side of the face inequality. The
//! *flux* form drops it; since `ṽ_e` contains no source contribution, the flux form is
//! the classical entropy inequality of a monotone scheme and holds whenever the
//! intermediate update is itself monotone (`λ L ≤ 1/2`, implied by the CFL bound).
//! The source-weighted form can fail on a curved background: for a constant state
//! `ṽ_e = v`, the left side vanishes while the right side is `τ θ (f + h) U' < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EntropyKind, EntropyPair, FluxModel};
use crate::quadrature::gauss5;
use crate::scheme::{NumericalFlux, Scheme, StateVector, StepReport};

/// Crandall–Majda entropy flux for the Kruzhkov level `k`:
/// `nf(max(u,k), max(v,k)) - nf(min(u,k), min(v,k))`.
pub fn numerical_entropy_flux(nf: &NumericalFlux, m: &FluxModel, k: f64, u: f64, v: f64) -> f64 {
    nf.evaluate(m, u.max(k), v.max(k)) - nf.evaluate(m, u.min(k), v.min(k))
}

/// Numerical entropy flux for the quadratic entropy, obtained from
/// `v²/2 = ½ ∫_{-1}^{1} |v - k| dk - ½` by integrating the Kruzhkov fluxes over `k`.
///
/// The integrand is piecewise smooth in `k` with kinks at `u`, `v` and `0`; five-point
/// Gauss on each piece is exact for polynomial fluxes up to degree nine.
pub fn quadratic_entropy_flux(nf: &NumericalFlux, m: &FluxModel, u: f64, v: f64) -> f64 {
    let mut breaks = vec![-1.0, 1.0, 0.0, u.clamp(-1.0, 1.0), v.clamp(-1.0, 1.0)];
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let integral: f64 = breaks
        .windows(2)
        .map(|w| gauss5(|k| numerical_entropy_flux(nf, m, k, u, v), w[0], w[1]))
        .sum();
    0.5 * integral - quadratic_flux_offset(m)
}

// value of ½ ∫ sign(-k) (f(0) - f(k)) dk, which makes the quadratic flux vanish at 0
fn quadratic_flux_offset(m: &FluxModel) -> f64 {
    let f0 = m.f(0.0);
    let below = gauss5(|k| f0 - m.f(k), -1.0, 0.0);
    let above = gauss5(|k| -(f0 - m.f(k)), 0.0, 1.0);
    0.5 * (below + above)
}

/// Numerical entropy flux of `pair` through a face with inner state `u`, outer `v`.
pub fn pair_numerical_flux(pair: &EntropyPair, nf: &NumericalFlux, u: f64, v: f64) -> f64 {
    let m = pair.model();
    match pair.kind() {
        EntropyKind::Kruzhkov { k } => numerical_entropy_flux(nf, m, k, u, v),
        EntropyKind::Quadratic => quadratic_entropy_flux(nf, m, u, v),
    }
}

/// Entropy diagnostics for one step and one entropy pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyLedger {
    /// Source-weighted face residuals, two per cell (left face first); `≤ 0` when the
    /// inequality holds.
    pub per_cell_residuals: Vec<f64>,
    pub worst_residual: f64,
    /// Flux-form face residuals, same layout.
    pub flux_residuals: Vec<f64>,
    pub worst_flux_residual: f64,
    /// Global balance `(lhs - rhs) / scale` including the source sum.
    pub global_balance_gap: f64,
    /// Global balance without the source sum.
    pub flux_balance_gap: f64,
    pub dissipation_sum: f64,
    pub alpha: f64,
}

/// Face states of one cell: `(ṽ_L, ṽ_R, v_{K,L}, v_{K,R})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceStates {
    pub tilde_left: f64,
    pub tilde_right: f64,
    pub left: f64,
    pub right: f64,
}

fn check_dims(scheme: &Scheme, before: &StateVector, report: &StepReport) -> Result<()> {
    let n = scheme.mesh().cells();
    if before.values.len() != n || report.fluxes.len() != n + 1 {
        return Err(Error::Contract(format!(
            "mesh has {n} cells but state has {} values and report {} fluxes",
            before.values.len(),
            report.fluxes.len()
        )));
    }
    Ok(())
}

/// Intermediate states of the convex decomposition for every cell.
pub fn face_states(scheme: &Scheme, before: &StateVector, report: &StepReport) -> Result<Vec<FaceStates>> {
    check_dims(scheme, before, report)?;
    let mesh = scheme.mesh();
    let m = scheme.model();
    let tau = report.tau_used;
    let weights = mesh.face_weights();
    Ok(before
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (a_left, a_right) = (weights[i], weights[i + 1]);
            let ratio = tau / mesh.widths()[i];
            let fv = m.f(v);
            let tilde_right = v - 2.0 * ratio * a_right * (report.fluxes[i + 1] - fv);
            let tilde_left = v + 2.0 * ratio * a_left * (report.fluxes[i] - fv);
            let source = tau * mesh.cell_thetas()[i] * m.total(v);
            let shift = ratio * (a_right + a_left) * fv;
            FaceStates {
                tilde_left,
                tilde_right,
                left: tilde_left - shift + source,
                right: tilde_right + shift + source,
            }
        })
        .collect())
}

/// Largest deviation between the new cell values and the mean of their face states.
pub fn convex_decomposition_check(
    scheme: &Scheme,
    before: &StateVector,
    after: &StateVector,
    report: &StepReport,
) -> Result<f64> {
    let states = face_states(scheme, before, report)?;
    if after.values.len() != states.len() {
        return Err(Error::Contract("state sizes differ".into()));
    }
    Ok(states
        .iter()
        .zip(&after.values)
        .fold(0.0, |acc, (s, &v)| acc.max((v - 0.5 * (s.left + s.right)).abs())))
}

/// Face residuals and the global balance for one step.
///
/// The balance sums the face inequalities over the truncated domain, so the entropy
/// flux leaving through the outer face (and the zero-weight inner face) enters it.
pub fn cell_entropy_residuals(
    scheme: &Scheme,
    before: &StateVector,
    after: &StateVector,
    report: &StepReport,
    pair: &EntropyPair,
) -> Result<EntropyLedger> {
    let states = face_states(scheme, before, report)?;
    if after.values.len() != states.len() {
        return Err(Error::Contract("state sizes differ".into()));
    }
    let mesh = scheme.mesh();
    let m = scheme.model();
    let nf = scheme.flux();
    let tau = report.tau_used;
    let n = states.len();
    let weights = mesh.face_weights();
    let values = &before.values;
    let alpha = pair.alpha();

    let entropy_flux = |u: f64, v: f64| pair_numerical_flux(pair, nf, u, v);
    let face_flux: Vec<f64> = (0..=n)
        .map(|j| {
            let left = if j == 0 { report.inner_ghost } else { values[j - 1] };
            let right = if j == n { report.outer_ghost } else { values[j] };
            entropy_flux(left, right)
        })
        .collect();

    let mut residuals = Vec::with_capacity(2 * n);
    let mut flux_residuals = Vec::with_capacity(2 * n);
    // balance terms; `scale` collects magnitudes for the relative gap
    let (mut lhs, mut rhs_flux, mut source_sum) = (0.0, 0.0, 0.0);
    let mut dissipation = 0.0;
    let mut scale = 0.0;
    for (i, s) in states.iter().enumerate() {
        let v = values[i];
        let width = mesh.widths()[i];
        let ratio = tau / width;
        let u_old = pair.entropy(v);
        let f_self = entropy_flux(v, v);
        let source = tau * mesh.cell_thetas()[i] * m.total(v) * pair.entropy_derivative(v);
        let faces = [
            (s.tilde_left, s.left, -weights[i], face_flux[i]),
            (s.tilde_right, s.right, weights[i + 1], face_flux[i + 1]),
        ];
        let u_new = pair.entropy(after.values[i]);
        lhs += width * u_new;
        scale += (width * u_new).abs() + (width * u_old).abs();
        rhs_flux += width * u_old;
        source_sum += width * source;
        scale += (width * source).abs();
        for (tilde, split, omega, flux) in faces {
            let flux_form = pair.entropy(tilde) - u_old + 2.0 * ratio * omega * (flux - f_self);
            flux_residuals.push(flux_form);
            residuals.push(flux_form - source);
            let jump = split - after.values[i];
            let d = 0.5 * alpha * 0.5 * width * jump * jump;
            dissipation += d;
            let r = pair.entropy(split) - pair.entropy(tilde);
            let weighted = tau * omega * f_self;
            rhs_flux += weighted + 0.5 * width * r;
            scale += d + weighted.abs() + (0.5 * width * r).abs();
        }
    }
    let boundary = tau * (weights[n] * face_flux[n] - weights[0] * face_flux[0]);
    rhs_flux -= boundary;
    scale += boundary.abs();
    lhs += dissipation;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let flux_balance_gap = (lhs - rhs_flux) / scale;
    let global_balance_gap = (lhs - rhs_flux - source_sum) / scale;

    let worst = |r: &[f64]| r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyLedger {
        worst_residual: worst(&residuals),
        worst_flux_residual: worst(&flux_residuals),
        per_cell_residuals: residuals,
        flux_residuals,
        global_balance_gap,
        flux_balance_gap,
        dissipation_sum: dissipation,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_uniform_mesh, Background};
    use crate::model::{burgers_model, kruzhkov_pair, quadratic_pair};
    use crate::scheme::FluxKind;

    const LEVELS: [f64; 5] = [-0.75, -0.25, 0.0, 0.25, 0.75];

    fn scheme(mass: f64, r_min_offset: f64, cells: usize, kind: FluxKind) -> Scheme {
        let mesh = build_uniform_mesh(&Background::new(mass).unwrap(), 2.0 * mass + r_min_offset, cells).unwrap();
        Scheme::new(mesh, burgers_model(), kind).unwrap()
    }

    #[test]
    fn crandall_majda_examples() {
        let m = burgers_model();
        let nf = NumericalFlux::new(FluxKind::Godunov, &m).unwrap();
        assert!((numerical_entropy_flux(&nf, &m, 0.0, 0.5, 0.5) - 0.125).abs() < 1e-15);
        for (u, v) in [(0.3, -0.2), (-0.9, 0.4), (0.1, 0.1)] {
            let low = numerical_entropy_flux(&nf, &m, -1.0, u, v);
            assert!((low - (nf.evaluate(&m, u, v) - m.f(-1.0))).abs() < 1e-15);
            let high = numerical_entropy_flux(&nf, &m, 1.0, u, v);
            assert!((high - (m.f(1.0) - nf.evaluate(&m, u, v))).abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_fluxes_are_consistent() {
        let m = burgers_model();
        for kind in FluxKind::ALL {
            let nf = NumericalFlux::new(kind, &m).unwrap();
            for i in 0..=40 {
                let w = -1.0 + 0.05 * i as f64;
                for k in LEVELS {
                    let pair = kruzhkov_pair(&m, k).unwrap();
                    assert!((numerical_entropy_flux(&nf, &m, k, w, w) - pair.flux(w)).abs() <= 1e-14);
                }
                let q = quadratic_pair(&m);
                assert!((quadratic_entropy_flux(&nf, &m, w, w) - q.flux(w)).abs() <= 1e-10, "{kind} {w}");
            }
        }
    }

    #[test]
    fn constant_state_in_flat_space_has_zero_residuals() {
        let s = scheme(0.0, 10.0, 20, FluxKind::Godunov);
        let before = StateVector::new(vec![0.4; 20]);
        let (after, report) = s.step(&before, s.max_timestep()).unwrap();
        for k in LEVELS {
            let led = cell_entropy_residuals(&s, &before, &after, &report, &kruzhkov_pair(s.model(), k).unwrap()).unwrap();
            assert!(led.per_cell_residuals.iter().all(|&r| r == 0.0));
        }
        assert_eq!(convex_decomposition_check(&s, &before, &after, &report).unwrap(), 0.0);
    }

    #[test]
    fn fixed_point_one_has_zero_residuals() {
        let s = scheme(1.0, 10.0, 30, FluxKind::EngquistOsher);
        let before = StateVector::new(vec![1.0; 30]);
        let (after, report) = s.step(&before, s.max_timestep()).unwrap();
        let led = cell_entropy_residuals(&s, &before, &after, &report, &kruzhkov_pair(s.model(), 0.0).unwrap()).unwrap();
        assert!(led.worst_residual.abs() <= 1e-14);
        assert!(led.per_cell_residuals.iter().all(|r| r.abs() <= 1e-14));
        assert_eq!(convex_decomposition_check(&s, &before, &after, &report).unwrap(), 0.0);
    }

    #[test]
    fn riemann_step_satisfies_the_inequality() {
        for kind in FluxKind::ALL {
            let s = scheme(0.0, 2.0, 40, kind);
            let before = StateVector::new((0..40).map(|i| if i < 20 { 0.8 } else { -0.8 }).collect());
            let (after, report) = s.step(&before, 0.9 * s.max_timestep()).unwrap();
            for k in LEVELS {
                let led =
                    cell_entropy_residuals(&s, &before, &after, &report, &kruzhkov_pair(s.model(), k).unwrap()).unwrap();
                assert!(led.worst_residual <= 1e-14, "{kind} k={k}: {}", led.worst_residual);
            }
            assert!(convex_decomposition_check(&s, &before, &after, &report).unwrap() <= 1e-13);
        }
    }

    #[test]
    fn source_weighted_form_fails_for_constant_state_on_curved_background() {
        let s = scheme(1.0, 10.0, 20, FluxKind::Godunov);
        let before = StateVector::new(vec![0.5; 20]);
        let (after, report) = s.step(&before, s.max_timestep()).unwrap();
        let led = cell_entropy_residuals(&s, &before, &after, &report, &kruzhkov_pair(s.model(), 0.0).unwrap()).unwrap();
        assert!(led.worst_residual > 1e-6);
        assert!(led.worst_flux_residual <= 1e-14);
    }

    #[test]
    fn quadratic_balance_closes() {
        for kind in FluxKind::ALL {
            let s = scheme(1.0, 10.0, 60, kind);
            let before = StateVector::new((0..60).map(|i| (0.37 * i as f64).sin() * 0.9).collect());
            let (after, report) = s.step(&before, s.max_timestep()).unwrap();
            let led = cell_entropy_residuals(&s, &before, &after, &report, &quadratic_pair(s.model())).unwrap();
            assert!(led.flux_balance_gap <= 1e-12, "{kind}: {}", led.flux_balance_gap);
            assert!(led.worst_flux_residual <= 1e-13);
            assert!(led.dissipation_sum >= 0.0);
            assert_eq!(led.alpha, 1.0);
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let s = scheme(1.0, 10.0, 10, FluxKind::Godunov);
        let before = StateVector::new(vec![0.1; 10]);
        let (after, report) = s.step(&before, s.max_timestep()).unwrap();
        let short = StateVector::new(vec![0.1; 9]);
        let pair = kruzhkov_pair(s.model(), 0.0).unwrap();
        assert!(matches!(
            cell_entropy_residuals(&s, &short, &after, &report, &pair),
            Err(Error::Contract(_))
        ));
    }
}
