//! Balance-law instances `(f, h)`, structural checks and entropy pairs.
//!
//! A [`FluxModel`] bundles the flux `f`, the source profile `h` and their
//! derivatives. Derivatives are supplied by the caller rather than computed
//! numerically so that stability constants stay sharp; [`FluxModel::validate_derivatives`]
//! cross-checks them against centered differences.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::composite_simpson;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default number of samples for structural checks and sup-norm estimates.
pub const DEFAULT_SAMPLES: usize = 1001;

/// Highest supported degree for polynomial custom models.
pub const MAX_POLY_DEGREE: usize = 8;

/// Polynomial with coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("polynomial needs at least one coefficient"));
        }
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::domain(format!(
                "polynomial degree {} exceeds the supported maximum {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("polynomial coefficients must be finite"));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = if self.coeffs.len() <= 1 {
            vec![0.0]
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, c)| p as f64 * c)
                .collect()
        };
        Polynomial { coeffs }
    }
}

/// One balance-law instance: flux `f` and source profile `h` on `[-1, 1]`.
#[derive(Clone)]
pub struct FluxModel {
    name: String,
    f: ScalarFn,
    df: ScalarFn,
    h: ScalarFn,
    dh: ScalarFn,
    max_abs_df: f64,
    max_abs_total_derivative: f64,
    unimodal_flux: bool,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("max_abs_df", &self.max_abs_df)
            .field("max_abs_total_derivative", &self.max_abs_total_derivative)
            .finish()
    }
}

/// Closed sample grid of `n` points over `[-1, 1]` (endpoints included).
fn closed_grid(n: usize) -> impl Iterator<Item = f64> {
    let last = (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { 1.0 } else { -1.0 + 2.0 * i as f64 / last })
}

/// Equispaced interior grid of `n` points strictly inside `(-1, 1)`.
fn interior_grid(n: usize) -> impl Iterator<Item = f64> {
    let denom = (n + 1) as f64;
    (0..n).map(move |i| -1.0 + 2.0 * (i + 1) as f64 / denom)
}

impl FluxModel {
    /// Builds a model from callables. Fails if any of them is non-finite on `[-1, 1]`.
    pub fn new<F, DF, H, DH>(name: impl Into<String>, f: F, df: DF, h: H, dh: DH) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        DF: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
        DH: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let mut max_abs_df: f64 = 0.0;
        let mut max_abs_total_derivative: f64 = 0.0;
        for s in closed_grid(DEFAULT_SAMPLES) {
            let vals = [f(s), df(s), h(s), dh(s)];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!(
                    "model '{name}' is not finite at s = {s}"
                )));
            }
            max_abs_df = max_abs_df.max(vals[1].abs());
            max_abs_total_derivative = max_abs_total_derivative.max((vals[1] + vals[3]).abs());
        }
        let mut model = Self {
            name,
            f: Arc::new(f),
            df: Arc::new(df),
            h: Arc::new(h),
            dh: Arc::new(dh),
            max_abs_df,
            max_abs_total_derivative,
            unimodal_flux: false,
        };
        model.unimodal_flux = flux_shape_ok(&model, DEFAULT_SAMPLES);
        Ok(model)
    }

    /// Custom model from polynomial coefficients (ascending powers, degree at most 8).
    pub fn from_polynomials(name: impl Into<String>, f: Polynomial, h: Polynomial) -> Result<Self> {
        let df = f.derivative();
        let dh = h.derivative();
        Self::new(
            name,
            move |s| f.eval(s),
            move |s| df.eval(s),
            move |s| h.eval(s),
            move |s| dh.eval(s),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    #[inline]
    pub fn df(&self, s: f64) -> f64 {
        (self.df)(s)
    }

    #[inline]
    pub fn h(&self, s: f64) -> f64 {
        (self.h)(s)
    }

    #[inline]
    pub fn dh(&self, s: f64) -> f64 {
        (self.dh)(s)
    }

    /// `f(s) + h(s)`, the combination driving the source term and the characteristic ODE.
    #[inline]
    pub fn total(&self, s: f64) -> f64 {
        self.f(s) + self.h(s)
    }

    /// Sampled `max |f'|` over `[-1, 1]`.
    pub fn max_abs_df(&self) -> f64 {
        self.max_abs_df
    }

    /// Sampled `max |f' + h'|` over `[-1, 1]`.
    pub fn max_abs_total_derivative(&self) -> f64 {
        self.max_abs_total_derivative
    }

    /// Whether `f' < 0` on `(-1, 0)` and `f' > 0` on `(0, 1)` on the default sample grid.
    pub fn has_unimodal_flux(&self) -> bool {
        self.unimodal_flux
    }

    /// Compares `df`, `dh` with centered differences of `f`, `h` on 1001 points of
    /// `[-0.999, 0.999]`, relative tolerance `1e-6`.
    pub fn validate_derivatives(&self) -> Result<()> {
        let step = 1e-5;
        let n = DEFAULT_SAMPLES;
        for i in 0..n {
            let s = -0.999 + 1.998 * i as f64 / (n - 1) as f64;
            let checks = [
                ("f'", self.df(s), (self.f(s + step) - self.f(s - step)) / (2.0 * step)),
                ("h'", self.dh(s), (self.h(s + step) - self.h(s - step)) / (2.0 * step)),
            ];
            for (what, given, fd) in checks {
                if (given - fd).abs() > 1e-6 * (1.0 + given.abs()) {
                    return Err(Error::domain(format!(
                        "model '{}': supplied {what}({s}) = {given} disagrees with finite difference {fd}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The relativistic Burgers model: `f(s) = s^2/2 - 1/2`, `h = 0`.
pub fn burgers_model() -> FluxModel {
    FluxModel::new("burgers", |s| 0.5 * s * s - 0.5, |s| s, |_| 0.0, |_| 0.0)
        .expect("burgers model is finite on [-1, 1]")
}

fn flux_shape_ok(m: &FluxModel, samples: usize) -> bool {
    interior_grid(samples).all(|s| {
        let d = m.df(s);
        if s < 0.0 {
            d < 0.0
        } else if s > 0.0 {
            d > 0.0
        } else {
            true
        }
    })
}

/// Outcome of the sampled structural checks on a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub boundary_roots_ok: bool,
    pub boundary_nondegenerate_ok: bool,
    pub interior_negative_ok: bool,
    pub flux_monotone_shape_ok: bool,
    /// Largest sampled value among `f + h` and the signed `f'` shape violations;
    /// negative exactly when both interior conditions hold strictly.
    pub worst_violation: f64,
    pub samples: usize,
}

impl StructureReport {
    pub fn all_ok(&self) -> bool {
        self.boundary_roots_ok
            && self.boundary_nondegenerate_ok
            && self.interior_negative_ok
            && self.flux_monotone_shape_ok
    }

    /// The roots and non-degeneracy conditions at `s = ±1`.
    pub fn boundary_ok(&self) -> bool {
        self.boundary_roots_ok && self.boundary_nondegenerate_ok
    }
}

/// Samples the structural conditions on `m` using `samples` interior points.
pub fn check_structure(m: &FluxModel, samples: usize) -> Result<StructureReport> {
    if samples < 3 {
        return Err(Error::domain(format!("samples must be at least 3, got {samples}")));
    }
    let boundary_roots_ok = [-1.0, 1.0].iter().all(|&s| m.total(s).abs() <= 1e-12);
    let boundary_nondegenerate_ok = [-1.0, 1.0]
        .iter()
        .all(|&s| (m.df(s) + m.dh(s)).abs() > 1e-12);

    let mut worst_total = f64::NEG_INFINITY;
    let mut worst_shape = f64::NEG_INFINITY;
    for s in interior_grid(samples) {
        worst_total = worst_total.max(m.total(s));
        let d = m.df(s);
        if s < 0.0 {
            worst_shape = worst_shape.max(d);
        } else if s > 0.0 {
            worst_shape = worst_shape.max(-d);
        }
    }
    Ok(StructureReport {
        boundary_roots_ok,
        boundary_nondegenerate_ok,
        interior_negative_ok: worst_total < 0.0,
        flux_monotone_shape_ok: worst_shape < 0.0,
        worst_violation: worst_total.max(worst_shape),
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropyKind {
    Kruzhkov { k: f64 },
    Quadratic,
}

/// Convex entropy `U` with compatible flux `F` (`F' = f' U'`), normalized to `U(0) = 0`.
#[derive(Clone, Debug)]
pub struct EntropyPair {
    kind: EntropyKind,
    model: FluxModel,
    quadratic_flux: Option<Arc<PrimitiveTable>>,
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl EntropyPair {
    pub fn kind(&self) -> EntropyKind {
        self.kind
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    /// The entropy `U(v)`.
    pub fn entropy(&self, v: f64) -> f64 {
        match self.kind {
            EntropyKind::Kruzhkov { k } => (v - k).abs() - k.abs(),
            EntropyKind::Quadratic => 0.5 * v * v,
        }
    }

    /// `U'(v)`, with `sign(0) = 0` at the Kruzhkov kink.
    pub fn entropy_derivative(&self, v: f64) -> f64 {
        match self.kind {
            EntropyKind::Kruzhkov { k } => sign(v - k),
            EntropyKind::Quadratic => v,
        }
    }

    /// The entropy flux `F(v)`.
    pub fn flux(&self, v: f64) -> f64 {
        match self.kind {
            EntropyKind::Kruzhkov { k } => sign(v - k) * (self.model.f(v) - self.model.f(k)),
            EntropyKind::Quadratic => self
                .quadratic_flux
                .as_ref()
                .expect("quadratic pair carries its flux table")
                .eval(v),
        }
    }

    /// `inf U''` over `[-1, 1]`.
    pub fn alpha(&self) -> f64 {
        match self.kind {
            EntropyKind::Kruzhkov { .. } => 0.0,
            EntropyKind::Quadratic => 1.0,
        }
    }
}

/// Kruzhkov pair at level `k`: `U(v) = |v - k| - |k|`, `F(v) = sign(v - k)(f(v) - f(k))`.
pub fn kruzhkov_pair(m: &FluxModel, k: f64) -> Result<EntropyPair> {
    if !(-1.0..=1.0).contains(&k) {
        return Err(Error::domain(format!("Kruzhkov level {k} outside [-1, 1]")));
    }
    Ok(EntropyPair {
        kind: EntropyKind::Kruzhkov { k },
        model: m.clone(),
        quadratic_flux: None,
    })
}

/// Quadratic pair `U(v) = v^2/2`, `F(v) = ∫_0^v w f'(w) dw`.
pub fn quadratic_pair(m: &FluxModel) -> EntropyPair {
    let df = m.clone();
    let table = PrimitiveTable::new(move |w| w * df.df(w), QUADRATIC_FLUX_PANELS);
    EntropyPair {
        kind: EntropyKind::Quadratic,
        model: m.clone(),
        quadratic_flux: Some(Arc::new(table)),
    }
}

const QUADRATIC_FLUX_PANELS: usize = 2048;

/// Cached antiderivative `x ↦ ∫_0^x g` on `[-1, 1]`: composite Simpson on a uniform
/// panel grid, values stored at the panel nodes, one Simpson panel to the query point.
pub(crate) struct PrimitiveTable {
    integrand: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    nodes: Vec<f64>,
    values: Vec<f64>,
    width: f64,
}

impl fmt::Debug for PrimitiveTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrimitiveTable")
            .field("panels", &(self.nodes.len() - 1))
            .finish()
    }
}

impl PrimitiveTable {
    fn new(g: impl Fn(f64) -> f64 + Send + Sync + 'static, panels: usize) -> Self {
        let panels = panels + panels % 2;
        let width = 2.0 / panels as f64;
        let nodes: Vec<f64> = (0..=panels).map(|j| -1.0 + width * j as f64).collect();
        let zero = panels / 2;
        let mut values = vec![0.0; panels + 1];
        for j in zero..panels {
            values[j + 1] = values[j] + composite_simpson(&g, nodes[j], nodes[j + 1], 1);
        }
        for j in (0..zero).rev() {
            values[j] = values[j + 1] - composite_simpson(&g, nodes[j], nodes[j + 1], 1);
        }
        Self {
            integrand: Box::new(g),
            nodes,
            values,
            width,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        let zero = (self.nodes.len() - 1) / 2;
        // anchor at the node between x and 0 so that eval(0) = 0 exactly
        let j = if x >= 0.0 {
            zero + ((x / self.width).floor() as usize).min(zero)
        } else {
            zero - ((-x / self.width).floor() as usize).min(zero)
        };
        self.values[j] + composite_simpson(&self.integrand, self.nodes[j], x, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn burgers_values() {
        let m = burgers_model();
        assert_eq!(m.f(0.0), -0.5);
        assert_eq!(m.total(1.0), 0.0);
        assert_eq!(m.df(-0.5), -0.5);
        assert_eq!(m.max_abs_df(), 1.0);
        assert_eq!(m.max_abs_total_derivative(), 1.0);
        m.validate_derivatives().unwrap();
    }

    #[test]
    fn structure_of_burgers() {
        let m = burgers_model();
        let r = check_structure(&m, 101).unwrap();
        assert!(r.all_ok(), "{r:?}");
        assert!(r.worst_violation < 0.0);
        let r3 = check_structure(&m, 3).unwrap();
        assert!(r3.all_ok());
        assert_eq!(r3.samples, 3);
        assert!(check_structure(&m, 2).is_err());
    }

    #[test]
    fn linear_flux_fails_roots() {
        let m = FluxModel::new("linear", |s| s, |_| 1.0, |_| 0.0, |_| 0.0).unwrap();
        let r = check_structure(&m, 101).unwrap();
        assert!(!r.boundary_roots_ok);
        assert!(!r.flux_monotone_shape_ok);
        assert!(r.worst_violation > 0.0);
    }

    #[test]
    fn wrong_derivative_is_caught() {
        let m = FluxModel::new("bad", |s| s * s, |s| s, |_| 0.0, |_| 0.0).unwrap();
        assert!(m.validate_derivatives().is_err());
    }

    #[test]
    fn polynomial_models() {
        let f = Polynomial::new(vec![-0.5, 0.0, 0.5]).unwrap();
        let h = Polynomial::new(vec![0.0]).unwrap();
        let m = FluxModel::from_polynomials("poly-burgers", f, h).unwrap();
        m.validate_derivatives().unwrap();
        assert!(check_structure(&m, 101).unwrap().all_ok());
        assert!(Polynomial::new(vec![1.0; 10]).is_err());
        assert!(Polynomial::new(vec![]).is_err());
    }

    #[test]
    fn kruzhkov_examples() {
        let m = burgers_model();
        let p = kruzhkov_pair(&m, 0.0).unwrap();
        assert_eq!(p.entropy(0.5), 0.5);
        assert_relative_eq!(p.flux(0.5), 0.125, epsilon = 1e-15);
        assert_eq!(p.entropy(0.0), 0.0);
        for k in [-1.0, -0.3, 0.0, 0.6, 1.0] {
            assert_eq!(kruzhkov_pair(&m, k).unwrap().flux(k), 0.0);
        }
        let p = kruzhkov_pair(&m, 0.25).unwrap();
        assert_eq!(p.flux(-0.25), 0.0);
        assert!(kruzhkov_pair(&m, 1.5).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let m = burgers_model();
        let p = quadratic_pair(&m);
        assert_relative_eq!(p.flux(0.6), 0.072, epsilon = 1e-10);
        assert_eq!(p.flux(0.0), 0.0);
        assert_eq!(p.entropy(-1.0), 0.5);
        for i in 0..=40 {
            let v = -1.0 + i as f64 * 0.05;
            assert!((p.flux(v) - v * v * v / 3.0).abs() < 1e-12, "v = {v}");
        }
    }

    fn pair_compatibility(p: &EntropyPair, kink: Option<f64>) {
        let m = p.model();
        let step = 1e-5;
        for i in 0..=400 {
            let v = -0.99 + 1.98 * i as f64 / 400.0;
            if kink.is_some_and(|k| (v - k).abs() < 1e-3) {
                continue;
            }
            let fd = (p.flux(v + step) - p.flux(v - step)) / (2.0 * step);
            let expect = m.df(v) * p.entropy_derivative(v);
            assert!(
                (fd - expect).abs() <= 1e-6 * (1.0 + m.df(v).abs()),
                "v = {v}: {fd} vs {expect}"
            );
        }
    }

    #[test]
    fn entropy_pairs_are_compatible() {
        let models = [
            burgers_model(),
            FluxModel::from_polynomials(
                "quartic",
                Polynomial::new(vec![-0.6, 0.0, 0.4, 0.0, 0.3]).unwrap(),
                Polynomial::new(vec![-0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            )
            .unwrap(),
        ];
        for m in &models {
            for k in [-0.75, -0.25, 0.0, 0.25, 0.75] {
                pair_compatibility(&kruzhkov_pair(m, k).unwrap(), Some(k));
            }
            pair_compatibility(&quadratic_pair(m), None);
        }
    }

    #[test]
    fn burgers_kruzhkov_zero_is_odd() {
        let m = burgers_model();
        let p = kruzhkov_pair(&m, 0.0).unwrap();
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            assert_eq!(p.flux(-v), -p.flux(v));
        }
    }
}
