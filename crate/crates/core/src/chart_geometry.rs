//! Curvature of a metric given on a single coordinate chart.
//!
//! A [`MetricChart`] wraps a [`MetricField`] (point ↦ SPD matrix) together with
//! a derivative mode. In analytic mode the field supplies exact derivatives up
//! to third order through [`Jet`]s; otherwise nested central differences of
//! `metric_at` are used. Either way the result is a [`MetricJet`], and
//! everything downstream (Christoffel symbols, Riemann tensor, `∇R`) is computed
//! from it by the same closed formulas.
//!
//! Sign convention: `R(x,y) = ∇_x∇_y - ∇_y∇_x - ∇_[x,y]` and
//! `R(x,y,z,w) = g(R(x,y)z, w)`, so the round sphere has `R = +R₀`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor_core::{CurvatureTensor, InnerProduct};
use crate::tolerance::Tier;

/// Default finite-difference step, in chart units.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Third derivatives use a coarser step `THIRD_ORDER_STEP_FACTOR · h`.
pub const THIRD_ORDER_STEP_FACTOR: f64 = 5.0;

/// The coordinate region on which a chart is declared.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// `|u| < radius - margin`.
    Ball { radius: f64, margin: f64 },
    /// `max |u_a| < half_width`.
    Box { half_width: f64 },
}

impl Domain {
    /// Distance from `u` to the edge of the usable region (negative outside).
    pub fn clearance(&self, u: &[f64]) -> f64 {
        match *self {
            Domain::Ball { radius, margin } => {
                let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                radius - margin - r
            }
            Domain::Box { half_width } => half_width - u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
        }
    }

    /// Rejects `u` unless a stencil of radius `reach` around it stays inside.
    pub fn check(&self, u: &[f64], reach: f64) -> Result<()> {
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain {
                point: u.to_vec(),
                reason: "non-finite coordinate".into(),
            });
        }
        let c = self.clearance(u);
        if c <= reach {
            return Err(Error::Domain {
                point: u.to_vec(),
                reason: format!("clearance {c:.3e} does not cover stencil reach {reach:.3e}"),
            });
        }
        Ok(())
    }

    /// Scale of the usable region (ball radius minus margin, or half-width).
    pub fn extent(&self) -> f64 {
        match *self {
            Domain::Ball { radius, margin } => radius - margin,
            Domain::Box { half_width } => half_width,
        }
    }

    /// Deterministic evaluation points: a small off-origin point followed by
    /// seeded uniform samples from the inner half of the domain.
    pub fn sample_points(&self, m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let extent = self.extent();
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push((0..m).map(|a| 0.05 * extent * (a + 1) as f64 / m as f64).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while out.len() < count {
            let u: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5) * extent).collect();
            if self.clearance(&u) > 0.4 * extent {
                out.push(u);
            }
        }
        out
    }
}

/// A point ↦ SPD matrix map on a chart domain. Implementations must be
/// reentrant.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> &Domain;
    fn metric_at(&self, u: &[f64]) -> DMatrix<f64>;

    /// Row-major `m × m` entries as jets of the given order, when the field
    /// can differentiate itself exactly.
    fn metric_jet(&self, _u: &[f64], _order: u8) -> Option<Vec<Jet>> {
        None
    }

    fn has_jets(&self) -> bool {
        false
    }
}

/// A positive scalar field on a chart, used as conformal factor.
pub trait ScalarField: Send + Sync {
    fn value(&self, u: &[f64]) -> f64;

    fn jet(&self, _u: &[f64], _order: u8) -> Option<Jet> {
        None
    }
}

/// `α(u) = exp(Σ c_a u_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpLinear {
    pub coefficients: Vec<f64>,
}

impl ExpLinear {
    /// `exp(c · u_axis)`.
    pub fn along(m: usize, axis: usize, c: f64) -> Self {
        let mut coefficients = vec![0.0; m];
        coefficients[axis] = c;
        Self { coefficients }
    }
}

impl ScalarField for ExpLinear {
    fn value(&self, u: &[f64]) -> f64 {
        self.coefficients.iter().zip(u).map(|(c, x)| c * x).sum::<f64>().exp()
    }

    fn jet(&self, u: &[f64], order: u8) -> Option<Jet> {
        let vars = Jet::variables(u, order);
        let mut acc = Jet::constant(u.len(), order, 0.0);
        for (c, v) in self.coefficients.iter().zip(&vars) {
            acc = &acc + &v.scale(*c);
        }
        Some(acc.exp())
    }
}

/// A closure-backed scalar field without analytic derivatives.
pub struct FnScalarField<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnScalarField<F> {
    fn value(&self, u: &[f64]) -> f64 {
        (self.0)(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { step: f64 },
}

impl DerivativeMode {
    pub fn tier(&self) -> Tier {
        match self {
            DerivativeMode::Analytic => Tier::Exact,
            DerivativeMode::FiniteDifference { .. } => Tier::FiniteDifference,
        }
    }

    fn step(&self) -> f64 {
        match *self {
            DerivativeMode::Analytic => DEFAULT_FD_STEP,
            DerivativeMode::FiniteDifference { step } => step,
        }
    }
}

/// A Riemannian metric on one coordinate chart.
#[derive(Clone)]
pub struct MetricChart {
    label: String,
    field: Arc<dyn MetricField>,
    mode: DerivativeMode,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("domain", self.domain())
            .field("mode", &self.mode)
            .finish()
    }
}

impl MetricChart {
    /// Uses analytic derivatives when the field provides them.
    pub fn new(label: impl Into<String>, field: Arc<dyn MetricField>) -> Self {
        let mode = if field.has_jets() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference { step: DEFAULT_FD_STEP }
        };
        Self {
            label: label.into(),
            field,
            mode,
        }
    }

    pub fn with_finite_differences(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::param("fd_step", format!("must be positive, got {step}")));
        }
        self.mode = DerivativeMode::FiniteDifference { step };
        Ok(self)
    }

    pub fn with_analytic(mut self) -> Result<Self> {
        if !self.field.has_jets() {
            return Err(Error::param("derivatives", "chart has no analytic derivatives"));
        }
        self.mode = DerivativeMode::Analytic;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn domain(&self) -> &Domain {
        self.field.domain()
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn tier(&self) -> Tier {
        self.mode.tier()
    }

    pub fn field(&self) -> &Arc<dyn MetricField> {
        &self.field
    }

    fn check_point(&self, u: &[f64], reach: f64) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "chart point",
                expected: self.dim(),
                found: u.len(),
            });
        }
        self.domain().check(u, reach)
    }

    pub fn metric_at(&self, u: &[f64]) -> Result<InnerProduct> {
        self.check_point(u, 0.0)?;
        InnerProduct::new(self.field.metric_at(u))
    }

    /// Stencil reach needed for derivatives up to `order`.
    pub fn reach(&self, order: u8) -> f64 {
        match self.mode {
            DerivativeMode::Analytic => 0.0,
            DerivativeMode::FiniteDifference { step } => match order {
                0 => 0.0,
                1 => 2.0 * step,
                2 => 4.0 * step,
                _ => 6.0 * THIRD_ORDER_STEP_FACTOR * step,
            },
        }
    }

    /// Metric and its coordinate derivatives up to `order` (at most 3).
    pub fn jet(&self, u: &[f64], order: u8) -> Result<MetricJet> {
        assert!(order <= 3, "metric jets are truncated at third order");
        self.check_point(u, self.reach(order))?;
        let jet = match self.mode {
            DerivativeMode::Analytic => {
                let entries = self
                    .field
                    .metric_jet(u, order)
                    .ok_or_else(|| Error::Numerical("field lost its analytic derivatives".into()))?;
                MetricJet::from_jets(self.dim(), order, &entries)
            }
            DerivativeMode::FiniteDifference { step } => MetricJet::finite_difference(&*self.field, u, order, step),
        };
        if jet
            .g
            .iter()
            .chain(&jet.d1)
            .chain(&jet.d2)
            .chain(&jet.d3)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numerical(format!("non-finite metric derivative at {u:?}")));
        }
        Ok(jet)
    }
}

/// A metric together with its first three coordinate derivatives at a point.
///
/// Layout: `g[i][j]`, `d1[a][i][j] = ∂_a g_ij`, `d2[a][b][i][j]`,
/// `d3[a][b][c][i][j]`; arrays above `order` are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub m: usize,
    pub order: u8,
    pub g: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl MetricJet {
    pub fn from_jets(m: usize, order: u8, entries: &[Jet]) -> Self {
        assert_eq!(entries.len(), m * m, "metric jet needs m² entries");
        let mm = m * m;
        let mut out = Self::empty(m, order);
        for (ij, e) in entries.iter().enumerate() {
            out.g[ij] = e.value();
            for a in 0..m {
                if order >= 1 {
                    out.d1[a * mm + ij] = e.d1(a);
                }
                for b in 0..m {
                    if order >= 2 {
                        out.d2[(a * m + b) * mm + ij] = e.d2(a, b);
                    }
                    if order >= 3 {
                        for c in 0..m {
                            out.d3[((a * m + b) * m + c) * mm + ij] = e.d3(a, b, c);
                        }
                    }
                }
            }
        }
        out
    }

    fn empty(m: usize, order: u8) -> Self {
        let mm = m * m;
        Self {
            m,
            order,
            g: vec![0.0; mm],
            d1: vec![0.0; if order >= 1 { m * mm } else { 0 }],
            d2: vec![0.0; if order >= 2 { m * m * mm } else { 0 }],
            d3: vec![0.0; if order >= 3 { m * m * m * mm } else { 0 }],
        }
    }

    /// Nested fourth-order central differences of `metric_at`: step `h` for
    /// first and second derivatives, `THIRD_ORDER_STEP_FACTOR · h` for third.
    pub fn finite_difference(field: &dyn MetricField, u: &[f64], order: u8, h: f64) -> Self {
        let m = field.dim();
        let mm = m * m;
        let mut out = Self::empty(m, order);
        out.g.copy_from_slice(field.metric_at(u).as_slice());
        // nalgebra is column-major; the metric is symmetric so the layout is
        // the same either way.
        let h3 = THIRD_ORDER_STEP_FACTOR * h;
        if order >= 1 {
            for a in 0..m {
                let d = nested_central(field, u, &[a], h);
                out.d1[a * mm..(a + 1) * mm].copy_from_slice(&d);
            }
        }
        if order >= 2 {
            for a in 0..m {
                for b in a..m {
                    let d = nested_central(field, u, &[a, b], h);
                    for &(p, q) in &[(a, b), (b, a)] {
                        let base = (p * m + q) * mm;
                        out.d2[base..base + mm].copy_from_slice(&d);
                    }
                }
            }
        }
        if order >= 3 {
            for a in 0..m {
                for b in a..m {
                    for c in b..m {
                        let d = nested_central(field, u, &[a, b, c], h3);
                        for &(p, q, r) in &[(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                            let base = ((p * m + q) * m + r) * mm;
                            out.d3[base..base + mm].copy_from_slice(&d);
                        }
                    }
                }
            }
        }
        out
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.m + j]
    }

    #[inline]
    pub fn dg(&self, a: usize, i: usize, j: usize) -> f64 {
        self.d1[(a * self.m + i) * self.m + j]
    }

    #[inline]
    pub fn ddg(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        let m = self.m;
        self.d2[((a * m + b) * m + i) * m + j]
    }

    #[inline]
    pub fn dddg(&self, a: usize, b: usize, c: usize, i: usize, j: usize) -> f64 {
        let m = self.m;
        self.d3[(((a * m + b) * m + c) * m + i) * m + j]
    }

    pub fn metric(&self) -> Result<InnerProduct> {
        InnerProduct::new(DMatrix::from_row_slice(self.m, self.m, &self.g))
    }
}

/// Offsets (in steps) and weights of the fourth-order central first
/// derivative `(-f(2h) + 8f(h) - 8f(-h) + f(-2h)) / 12h`.
const STENCIL: [(f64, f64); 4] = [(2.0, -1.0), (1.0, 8.0), (-1.0, -8.0), (-2.0, 1.0)];

/// `D_{a₁} ⋯ D_{a_k} g(u)`, each `D` the fourth-order central difference of
/// step `h` along its axis.
fn nested_central(field: &dyn MetricField, u: &[f64], axes: &[usize], h: f64) -> Vec<f64> {
    let m = field.dim();
    let k = axes.len();
    let mut acc = vec![0.0; m * m];
    let mut p = u.to_vec();
    for combo in 0..STENCIL.len().pow(k as u32) {
        p.copy_from_slice(u);
        let mut weight = 1.0;
        let mut rest = combo;
        for &a in axes {
            let (offset, w) = STENCIL[rest % STENCIL.len()];
            rest /= STENCIL.len();
            p[a] += offset * h;
            weight *= w;
        }
        let g = field.metric_at(&p);
        for (dst, v) in acc.iter_mut().zip(g.iter()) {
            *dst += weight * v;
        }
    }
    let denom = (12.0 * h).powi(k as i32);
    acc.iter_mut().for_each(|v| *v /= denom);
    acc
}

/// Christoffel symbols `Γ^k_ij`, stored `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.m + i) * self.m + j]
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `max |Γ^k_ij - Γ^k_ji|`.
    pub fn lower_symmetry_residual(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0_f64;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// `(Γ_a)^k_j = Γ^k_aj` as a matrix.
    pub fn slot_matrix(&self, a: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |k, j| self.get(k, a, j))
    }
}

/// Levi-Civita connection data derived from a [`MetricJet`].
struct Connection {
    m: usize,
    metric: InnerProduct,
    /// `Γ^k_ij` as `[k][i][j]`
    gamma: Vec<f64>,
    /// `∂_a Γ^k_ij` as `[a][k][i][j]`
    dgamma: Vec<f64>,
    /// `∂_a ∂_b Γ^k_ij` as `[a][b][k][i][j]`, only for third-order jets
    ddgamma: Vec<f64>,
}

impl Connection {
    fn new(jet: &MetricJet) -> Result<Self> {
        let m = jet.m;
        let metric = jet.metric()?;
        let ginv = metric.inverse();
        let m2 = m * m;
        let m3 = m2 * m;

        // Γ_{l,ij} (first kind), [l][i][j]
        let mut first = vec![0.0; m3];
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    first[(l * m + i) * m + j] = 0.5 * (jet.dg(i, j, l) + jet.dg(j, i, l) - jet.dg(l, i, j));
                }
            }
        }
        let raise = |src: &[f64], dst: &mut [f64], inv: &DMatrix<f64>| {
            for k in 0..m {
                for l in 0..m {
                    let c = inv[(k, l)];
                    if c == 0.0 {
                        continue;
                    }
                    for ij in 0..m2 {
                        dst[k * m2 + ij] += c * src[l * m2 + ij];
                    }
                }
            }
        };
        let mut gamma = vec![0.0; m3];
        raise(&first, &mut gamma, &ginv);

        if jet.order < 2 {
            return Ok(Self {
                m,
                metric,
                gamma,
                dgamma: Vec::new(),
                ddgamma: Vec::new(),
            });
        }

        let da_g = |a: usize| DMatrix::from_fn(m, m, |p, q| jet.dg(a, p, q));
        // ∂_a g^{-1} = -g⁻¹ (∂_a g) g⁻¹
        let dginv: Vec<DMatrix<f64>> = (0..m).map(|a| -(&ginv * da_g(a) * &ginv)).collect();

        let mut dfirst = vec![0.0; m * m3];
        for a in 0..m {
            for l in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        dfirst[a * m3 + (l * m + i) * m + j] =
                            0.5 * (jet.ddg(a, i, j, l) + jet.ddg(a, j, i, l) - jet.ddg(a, l, i, j));
                    }
                }
            }
        }
        let mut dgamma = vec![0.0; m * m3];
        for a in 0..m {
            let dst = &mut dgamma[a * m3..(a + 1) * m3];
            raise(&first, dst, &dginv[a]);
            raise(&dfirst[a * m3..(a + 1) * m3], dst, &ginv);
        }

        let mut ddgamma = Vec::new();
        if jet.order >= 3 {
            ddgamma = vec![0.0; m2 * m3];
            let mut ddfirst = vec![0.0; m3];
            for a in 0..m {
                for b in 0..m {
                    let dab_g = DMatrix::from_fn(m, m, |p, q| jet.ddg(a, b, p, q));
                    let ddginv = -(&dginv[b] * da_g(a) * &ginv + &ginv * dab_g * &ginv + &ginv * da_g(a) * &dginv[b]);
                    for l in 0..m {
                        for i in 0..m {
                            for j in 0..m {
                                ddfirst[(l * m + i) * m + j] =
                                    0.5 * (jet.dddg(a, b, i, j, l) + jet.dddg(a, b, j, i, l) - jet.dddg(a, b, l, i, j));
                            }
                        }
                    }
                    let dst = &mut ddgamma[(a * m + b) * m3..(a * m + b + 1) * m3];
                    raise(&first, dst, &ddginv);
                    raise(&dfirst[b * m3..(b + 1) * m3], dst, &dginv[a]);
                    raise(&dfirst[a * m3..(a + 1) * m3], dst, &dginv[b]);
                    raise(&ddfirst, dst, &ginv);
                }
            }
        }
        Ok(Self {
            m,
            metric,
            gamma,
            dgamma,
            ddgamma,
        })
    }

    #[inline]
    fn gam(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.m + i) * self.m + j]
    }

    #[inline]
    fn dgam(&self, a: usize, k: usize, i: usize, j: usize) -> f64 {
        let m = self.m;
        self.dgamma[((a * m + k) * m + i) * m + j]
    }

    #[inline]
    fn ddgam(&self, a: usize, b: usize, k: usize, i: usize, j: usize) -> f64 {
        let m = self.m;
        self.ddgamma[(((a * m + b) * m + k) * m + i) * m + j]
    }

    fn christoffel(&self) -> Christoffel {
        Christoffel {
            m: self.m,
            data: self.gamma.clone(),
        }
    }

    /// `R^l_{ijk}` (operator form `R(∂_i, ∂_j)∂_k = R^l_{ijk} ∂_l`), `[i][j][k][l]`.
    fn riemann_operator(&self) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m.pow(4)];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut v = self.dgam(i, l, j, k) - self.dgam(j, l, i, k);
                        for s in 0..m {
                            v += self.gam(s, j, k) * self.gam(l, i, s) - self.gam(s, i, k) * self.gam(l, j, s);
                        }
                        out[((i * m + j) * m + k) * m + l] = v;
                    }
                }
            }
        }
        out
    }

    fn riemann(&self, rop: &[f64]) -> CurvatureTensor {
        let m = self.m;
        let g = self.metric.matrix();
        CurvatureTensor::from_fn(self.metric.clone(), |i, j, k, l| {
            (0..m).map(|s| rop[((i * m + j) * m + k) * m + s] * g[(s, l)]).sum()
        })
    }

    /// `∇_n R_ijkl`, stored `[i][j][k][l][n]`.
    fn nabla_riemann(&self, jet: &MetricJet, rop: &[f64], r: &CurvatureTensor) -> Vec<f64> {
        let m = self.m;
        let m4 = m.pow(4);
        // ∂_n R^l_ijk as [n][i][j][k][l]
        let mut drop = vec![0.0; m * m4];
        for n in 0..m {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            let mut v = self.ddgam(n, i, l, j, k) - self.ddgam(n, j, l, i, k);
                            for s in 0..m {
                                v += self.dgam(n, s, j, k) * self.gam(l, i, s)
                                    + self.gam(s, j, k) * self.dgam(n, l, i, s)
                                    - self.dgam(n, s, i, k) * self.gam(l, j, s)
                                    - self.gam(s, i, k) * self.dgam(n, l, j, s);
                            }
                            drop[n * m4 + ((i * m + j) * m + k) * m + l] = v;
                        }
                    }
                }
            }
        }
        let g = self.metric.matrix();
        let mut out = vec![0.0; m4 * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let ijk = ((i * m + j) * m + k) * m;
                    for l in 0..m {
                        for n in 0..m {
                            // ∂_n R_ijkl
                            let mut v = 0.0;
                            for s in 0..m {
                                v += drop[n * m4 + ijk + s] * g[(s, l)] + rop[ijk + s] * jet.dg(n, s, l);
                            }
                            for s in 0..m {
                                v -= self.gam(s, n, i) * r.get(s, j, k, l)
                                    + self.gam(s, n, j) * r.get(i, s, k, l)
                                    + self.gam(s, n, k) * r.get(i, j, s, l)
                                    + self.gam(s, n, l) * r.get(i, j, k, s);
                            }
                            out[(ijk + l) * m + n] = v;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Curvature data at one chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCurvature {
    pub point: Vec<f64>,
    pub metric: InnerProduct,
    pub christoffel: Christoffel,
    /// Fully covariant Riemann tensor in coordinate components.
    pub riemann: CurvatureTensor,
    pub nabla_riemann: Option<CovariantDerivativeR>,
}

/// Computes Christoffel symbols, the Riemann tensor and, when requested,
/// its covariant derivative from a single metric jet.
pub fn local_curvature(chart: &MetricChart, u: &[f64], with_derivative: bool) -> Result<LocalCurvature> {
    let jet = chart.jet(u, if with_derivative { 3 } else { 2 })?;
    let conn = Connection::new(&jet)?;
    let rop = conn.riemann_operator();
    let riemann = conn.riemann(&rop);
    let nabla_riemann = with_derivative.then(|| CovariantDerivativeR {
        m: conn.m,
        data: conn.nabla_riemann(&jet, &rop, &riemann),
    });
    Ok(LocalCurvature {
        point: u.to_vec(),
        metric: conn.metric.clone(),
        christoffel: conn.christoffel(),
        riemann,
        nabla_riemann,
    })
}

/// `Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il - ∂_l g_ij)`.
pub fn christoffel(chart: &MetricChart, u: &[f64]) -> Result<Christoffel> {
    let jet = chart.jet(u, 1)?;
    Ok(Connection::new(&jet)?.christoffel())
}

/// Fully covariant Riemann tensor at `u`; the attached inner product is `g(u)`.
pub fn riemann_at(chart: &MetricChart, u: &[f64]) -> Result<CurvatureTensor> {
    Ok(local_curvature(chart, u, false)?.riemann)
}

/// `∇R` with components `(∇_n R)_ijkl` stored `[i][j][k][l][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariantDerivativeR {
    m: usize,
    data: Vec<f64>,
}

impl CovariantDerivativeR {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m.pow(5)],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize, n: usize) -> usize {
        let m = self.m;
        (((i * m + j) * m + k) * m + l) * m + n
    }

    /// `(∇_n R)(e_i, e_j, e_k, e_l)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, n: usize) -> f64 {
        self.data[self.idx(i, j, k, l, n)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, n: usize, value: f64) {
        let p = self.idx(i, j, k, l, n);
        self.data[p] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Max over index tuples of `R_{;n}(i,j) + R_{;i}(j,n) + R_{;j}(n,i)`
    /// applied to `(k, l)`.
    pub fn bianchi_residual(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        for n in 0..m {
                            let s = self.get(i, j, k, l, n) + self.get(j, n, k, l, i) + self.get(n, i, k, l, j);
                            worst = worst.max(s.abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

pub fn covariant_derivative_riemann(chart: &MetricChart, u: &[f64]) -> Result<CovariantDerivativeR> {
    Ok(local_curvature(chart, u, true)?
        .nabla_riemann
        .expect("requested derivative"))
}

/// Second Bianchi identity residual at `u`; vanishes for every metric.
pub fn second_bianchi_residual(chart: &MetricChart, u: &[f64]) -> Result<f64> {
    Ok(covariant_derivative_riemann(chart, u)?.bianchi_residual())
}

/// `∇Φ` for an endomorphism field: `(∇_a Φ) = ∂_a Φ + [Γ_a, Φ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndoDerivative {
    pub phi: DMatrix<f64>,
    /// One matrix per coordinate direction `a`.
    pub components: Vec<DMatrix<f64>>,
}

impl EndoDerivative {
    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.amax()).fold(0.0, f64::max)
    }

    /// `max_a ‖(∇_a Φ) Φ + Φ (∇_a Φ)‖∞`.
    pub fn anticommutator_residual(&self) -> f64 {
        self.components
            .iter()
            .map(|d| (d * &self.phi + &self.phi * d).amax())
            .fold(0.0, f64::max)
    }
}

pub fn covariant_derivative_endo(
    chart: &MetricChart,
    field: &dyn Fn(&[f64]) -> DMatrix<f64>,
    u: &[f64],
) -> Result<EndoDerivative> {
    let m = chart.dim();
    let h = chart.mode().step();
    chart.check_point(u, (2.0 * h).max(chart.reach(1)))?;
    let gamma = christoffel(chart, u)?;
    let phi = field(u);
    if phi.nrows() != m || phi.ncols() != m {
        return Err(Error::DimensionMismatch {
            what: "endomorphism field",
            expected: m,
            found: phi.nrows(),
        });
    }
    let mut p = u.to_vec();
    let components = (0..m)
        .map(|a| {
            let mut d = DMatrix::zeros(m, m);
            for &(offset, w) in &STENCIL {
                p[a] = u[a] + offset * h;
                d += field(&p) * w;
            }
            p[a] = u[a];
            let ga = gamma.slot_matrix(a);
            d / (12.0 * h) + &ga * &phi - &phi * &ga
        })
        .collect();
    Ok(EndoDerivative { phi, components })
}

struct ConformalRescale {
    base: Arc<dyn MetricField>,
    alpha: Arc<dyn ScalarField>,
    analytic: bool,
}

impl MetricField for ConformalRescale {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn domain(&self) -> &Domain {
        self.base.domain()
    }

    fn metric_at(&self, u: &[f64]) -> DMatrix<f64> {
        self.base.metric_at(u) * self.alpha.value(u)
    }

    fn metric_jet(&self, u: &[f64], order: u8) -> Option<Vec<Jet>> {
        if !self.analytic {
            return None;
        }
        let a = self.alpha.jet(u, order)?;
        let entries = self.base.metric_jet(u, order)?;
        Some(entries.iter().map(|e| &a * e).collect())
    }

    fn has_jets(&self) -> bool {
        self.analytic
    }
}

/// The chart with metric `α(u) · g(u)`. Analytic derivatives survive only
/// when both the chart and `α` provide them.
pub fn conformal_rescale(chart: &MetricChart, alpha: Arc<dyn ScalarField>) -> Result<MetricChart> {
    let m = chart.dim();
    let mut probes = vec![vec![0.0; m]];
    probes.extend(chart.domain().sample_points(m, 32, 0x5eed));
    for u in &probes {
        let a = alpha.value(u);
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::param(
                "conformal_factor",
                format!("α = {a} at {u:?} is not positive"),
            ));
        }
    }
    let analytic =
        chart.mode() == DerivativeMode::Analytic && chart.field.has_jets() && alpha.jet(&probes[0], 1).is_some();
    let field = Arc::new(ConformalRescale {
        base: chart.field.clone(),
        alpha,
        analytic,
    });
    let label = format!("{} (conformally rescaled)", chart.label);
    let rescaled = MetricChart::new(label, field);
    match chart.mode() {
        DerivativeMode::FiniteDifference { step } => rescaled.with_finite_differences(step),
        DerivativeMode::Analytic if !analytic => rescaled.with_finite_differences(DEFAULT_FD_STEP),
        DerivativeMode::Analytic => Ok(rescaled),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature_algebra::r0;
    use crate::models::{flat_chart, hyperbolic_chart, sphere_chart};

    /// `g = e^{u₁} δ` on ℝ², no jets.
    struct ExpConformal;

    impl MetricField for ExpConformal {
        fn dim(&self) -> usize {
            2
        }
        fn domain(&self) -> &Domain {
            &Domain::Box { half_width: 1.0 }
        }
        fn metric_at(&self, u: &[f64]) -> DMatrix<f64> {
            DMatrix::identity(2, 2) * u[0].exp()
        }
    }

    #[test]
    fn flat_chart_has_vanishing_connection() {
        let chart = flat_chart(3).unwrap();
        let u = [0.1, -0.2, 0.05];
        assert_eq!(christoffel(&chart, &u).unwrap().max_abs(), 0.0);
        let fd = chart.clone().with_finite_differences(1e-4).unwrap();
        assert!(christoffel(&fd, &u).unwrap().max_abs() < 1e-12);
        assert!(riemann_at(&fd, &u).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn poincare_ball_center_has_zero_christoffel() {
        let chart = hyperbolic_chart(2).unwrap();
        assert!(christoffel(&chart, &[0.0, 0.0]).unwrap().max_abs() < 1e-15);
        let fd = chart.with_finite_differences(1e-4).unwrap();
        assert!(christoffel(&fd, &[0.0, 0.0]).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn exponential_conformal_christoffel() {
        // g = e^{u₁} δ: Γ¹₁₁ = ½, Γ²₁₂ = ½, Γ¹₂₂ = -½ (hand computation).
        let chart = MetricChart::new("exp", Arc::new(ExpConformal));
        let gamma = christoffel(&chart, &[0.3, -0.1]).unwrap();
        assert!((gamma.get(0, 0, 0) - 0.5).abs() < 1e-8);
        assert!((gamma.get(1, 0, 1) - 0.5).abs() < 1e-8);
        assert!((gamma.get(1, 1, 0) - 0.5).abs() < 1e-8);
        assert!((gamma.get(0, 1, 1) + 0.5).abs() < 1e-8);
        assert!(gamma.get(1, 1, 1).abs() < 1e-8);
        assert!(gamma.lower_symmetry_residual() < 1e-12);
    }

    #[test]
    fn sphere_sign_calibration() {
        let chart = sphere_chart(3, 1.0).unwrap();
        let u = [0.2, -0.1, 0.3];
        let r = riemann_at(&chart, &u).unwrap();
        let oracle = r0(r.metric());
        assert!(r.distance(&oracle) < 1e-9, "{}", r.distance(&oracle));
        // positive sectional curvature in the (e1, e2) plane
        assert!(r.get(0, 1, 1, 0) > 0.0);
    }

    #[test]
    fn domain_violations_are_rejected() {
        let chart = hyperbolic_chart(2).unwrap();
        assert!(matches!(riemann_at(&chart, &[0.95, 0.0]), Err(Error::Domain { .. })));
        let fd = chart.with_finite_differences(1e-4).unwrap();
        assert!(matches!(riemann_at(&fd, &[0.9 - 1e-4, 0.0]), Err(Error::Domain { .. })));
        assert!(matches!(riemann_at(&fd, &[0.1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bianchi_detector_fires_on_corruption() {
        let mut d = CovariantDerivativeR::zeros(3);
        assert_eq!(d.bianchi_residual(), 0.0);
        d.set(0, 1, 2, 0, 2, 0.1);
        assert!(d.bianchi_residual() >= 0.09);
    }

    #[test]
    fn constant_endo_on_flat_chart_is_parallel() {
        let chart = flat_chart(4).unwrap();
        let phi = crate::models::standard_phi(4).unwrap().matrix().clone();
        let d = covariant_derivative_endo(&chart, &|_| phi.clone(), &[0.1, 0.2, 0.0, -0.1]).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn rescale_rejects_nonpositive_factor() {
        let chart = flat_chart(2).unwrap();
        let bad = Arc::new(FnScalarField(|u: &[f64]| u[0]));
        assert!(conformal_rescale(&chart, bad).is_err());
    }

    #[test]
    fn unit_rescale_is_identity() {
        let chart = sphere_chart(4, 1.0).unwrap();
        let same = conformal_rescale(&chart, Arc::new(ExpLinear::along(4, 0, 0.0))).unwrap();
        assert_eq!(same.mode(), DerivativeMode::Analytic);
        let u = [0.1, 0.2, -0.1, 0.0];
        assert_eq!(riemann_at(&chart, &u).unwrap(), riemann_at(&same, &u).unwrap());
    }

    #[test]
    fn constant_rescale_of_flat_stays_flat() {
        let chart = flat_chart(3).unwrap();
        let scaled = conformal_rescale(&chart, Arc::new(FnScalarField(|_: &[f64]| 2.5))).unwrap();
        assert!(matches!(scaled.mode(), DerivativeMode::FiniteDifference { .. }));
        assert!(riemann_at(&scaled, &[0.1, 0.1, 0.1]).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn sample_points_stay_inside() {
        let d = Domain::Ball {
            radius: 1.0,
            margin: 0.1,
        };
        let pts = d.sample_points(4, 10, 3);
        assert_eq!(pts.len(), 10);
        assert!(pts.iter().all(|p| d.clearance(p) > 0.3));
        assert_eq!(pts, d.sample_points(4, 10, 3));
    }
}
