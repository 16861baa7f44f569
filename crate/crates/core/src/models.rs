//! Model spaces and fixtures: constant-curvature charts, the Fubini–Study
//! metric and its negative dual, seeded perturbations of flat space, and
//! algebraic complex space forms.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart_geometry::{Domain, MetricChart, MetricField};
use crate::curvature_algebra::{a_phi, complex_space_form_act, r0, random_act};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor_core::{CurvatureTensor, HermitianStructure, InnerProduct, SkewAdjointEndo};

/// Margin kept from the boundary of ball-shaped domains.
pub const BALL_MARGIN: f64 = 0.1;

/// Block-diagonal `[[0, -1], [1, 0]]` structure, `Φ e_{2i} = e_{2i+1}`.
pub fn standard_phi(m: usize) -> Result<HermitianStructure> {
    if m == 0 || m % 2 == 1 {
        return Err(Error::InvalidDimension {
            dim: m,
            reason: "Hermitian structures need even dimension",
        });
    }
    let mut phi = DMatrix::zeros(m, m);
    for b in 0..m / 2 {
        phi[(2 * b + 1, 2 * b)] = 1.0;
        phi[(2 * b, 2 * b + 1)] = -1.0;
    }
    HermitianStructure::new(phi, &InnerProduct::identity(m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ConformalProfile {
    Flat,
    /// stereographic chart of the round sphere of radius `r`
    Sphere {
        r: f64,
    },
    /// Poincaré ball
    Hyperbolic,
}

/// `g = φ(|u|²) δ`.
#[derive(Debug, Clone)]
struct ConformallyFlatField {
    m: usize,
    profile: ConformalProfile,
    domain: Domain,
}

impl ConformallyFlatField {
    fn factor(&self, s: f64) -> f64 {
        match self.profile {
            ConformalProfile::Flat => 1.0,
            ConformalProfile::Sphere { r } => 4.0 * r.powi(4) / (r * r + s).powi(2),
            ConformalProfile::Hyperbolic => 4.0 / (1.0 - s).powi(2),
        }
    }
}

fn squared_norm_jet(u: &[f64], order: u8) -> Jet {
    Jet::variables(u, order)
        .iter()
        .fold(Jet::constant(u.len(), order, 0.0), |acc, v| &acc + &v.square())
}

impl MetricField for ConformallyFlatField {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn metric_at(&self, u: &[f64]) -> DMatrix<f64> {
        let s: f64 = u.iter().map(|v| v * v).sum();
        DMatrix::identity(self.m, self.m) * self.factor(s)
    }

    fn metric_jet(&self, u: &[f64], order: u8) -> Option<Vec<Jet>> {
        let m = self.m;
        let s = squared_norm_jet(u, order);
        let phi = match self.profile {
            ConformalProfile::Flat => Jet::constant(m, order, 1.0),
            ConformalProfile::Sphere { r } => s.add_const(r * r).square().recip().scale(4.0 * r.powi(4)),
            ConformalProfile::Hyperbolic => s.scale(-1.0).add_const(1.0).square().recip().scale(4.0),
        };
        let zero = Jet::constant(m, order, 0.0);
        Some(
            (0..m * m)
                .map(|ij| if ij / m == ij % m { phi.clone() } else { zero.clone() })
                .collect(),
        )
    }

    fn has_jets(&self) -> bool {
        true
    }
}

pub fn flat_chart(m: usize) -> Result<MetricChart> {
    check_real_dim(m)?;
    let field = ConformallyFlatField {
        m,
        profile: ConformalProfile::Flat,
        domain: Domain::Box { half_width: 1.0 },
    };
    Ok(MetricChart::new(format!("flat(m={m})"), Arc::new(field)))
}

/// Stereographic chart `g = 4r⁴/(r² + |u|²)² δ` of the sphere of radius `r`.
pub fn sphere_chart(m: usize, r: f64) -> Result<MetricChart> {
    check_real_dim(m)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("radius must be positive, got {r}")));
    }
    let field = ConformallyFlatField {
        m,
        profile: ConformalProfile::Sphere { r },
        domain: Domain::Box { half_width: r },
    };
    Ok(MetricChart::new(format!("sphere(m={m}, r={r})"), Arc::new(field)))
}

/// Poincaré ball `g = 4/(1 - |u|²)² δ`.
pub fn hyperbolic_chart(m: usize) -> Result<MetricChart> {
    check_real_dim(m)?;
    let field = ConformallyFlatField {
        m,
        profile: ConformalProfile::Hyperbolic,
        domain: Domain::Ball {
            radius: 1.0,
            margin: BALL_MARGIN,
        },
    };
    Ok(MetricChart::new(format!("hyperbolic(m={m})"), Arc::new(field)))
}

fn check_real_dim(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidDimension {
            dim: m,
            reason: "charts need m >= 2",
        });
    }
    Ok(())
}

/// Realified Hermitian metric in inhomogeneous coordinates
/// `z_j = u_{2j} + i u_{2j+1}`:
/// `h_ij = [(1 + σ|z|²) δ_ij - σ z̄_i z_j] / (1 + σ|z|²)²` with `σ = +1`
/// (Fubini–Study) or `σ = -1` (complex hyperbolic).
#[derive(Debug, Clone)]
struct ComplexModelField {
    n: usize,
    sigma: f64,
    domain: Domain,
}

impl ComplexModelField {
    /// Assembles the real `2n × 2n` matrix from the blocks
    /// `[[Re h_ij, Im h_ij], [-Im h_ij, Re h_ij]]`.
    fn assemble<T: Clone>(
        &self,
        re: impl Fn(usize, usize) -> T,
        im: impl Fn(usize, usize) -> T,
        neg: impl Fn(&T) -> T,
    ) -> Vec<T> {
        let m = 2 * self.n;
        let mut out: Vec<Option<T>> = vec![None; m * m];
        for i in 0..self.n {
            for j in 0..self.n {
                let (r, q) = (re(i, j), im(i, j));
                out[(2 * i) * m + 2 * j] = Some(r.clone());
                out[(2 * i + 1) * m + 2 * j + 1] = Some(r);
                out[(2 * i + 1) * m + 2 * j] = Some(neg(&q));
                out[(2 * i) * m + 2 * j + 1] = Some(q);
            }
        }
        out.into_iter().map(|v| v.expect("every block filled")).collect()
    }
}

impl MetricField for ComplexModelField {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn metric_at(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|j| (u[2 * j], u[2 * j + 1])).unzip();
        let s: f64 = u.iter().map(|v| v * v).sum();
        let d = 1.0 + self.sigma * s;
        let inv2 = 1.0 / (d * d);
        let sigma = self.sigma;
        let re = |i: usize, j: usize| {
            let p = x[i] * x[j] + y[i] * y[j];
            (if i == j { d } else { 0.0 } - sigma * p) * inv2
        };
        let im = |i: usize, j: usize| {
            let q = x[i] * y[j] - y[i] * x[j];
            -sigma * q * inv2
        };
        let m = 2 * n;
        DMatrix::from_row_slice(m, m, &self.assemble(re, im, |v| -v))
    }

    fn metric_jet(&self, u: &[f64], order: u8) -> Option<Vec<Jet>> {
        let n = self.n;
        let m = 2 * n;
        let vars = Jet::variables(u, order);
        let x: Vec<&Jet> = (0..n).map(|j| &vars[2 * j]).collect();
        let y: Vec<&Jet> = (0..n).map(|j| &vars[2 * j + 1]).collect();
        let s = squared_norm_jet(u, order);
        let d = s.scale(self.sigma).add_const(1.0);
        let inv2 = d.square().recip();
        let sigma = self.sigma;
        let re = |i: usize, j: usize| {
            let p = &(x[i] * x[j]) + &(y[i] * y[j]);
            let diag = if i == j {
                d.clone()
            } else {
                Jet::constant(m, order, 0.0)
            };
            &(&diag - &p.scale(sigma)) * &inv2
        };
        let im = |i: usize, j: usize| {
            let q = &(x[i] * y[j]) - &(y[i] * x[j]);
            &q.scale(-sigma) * &inv2
        };
        Some(self.assemble(re, im, |v| -v))
    }

    fn has_jets(&self) -> bool {
        true
    }
}

/// Fubini–Study metric on `CPⁿ`, holomorphic sectional curvature 4, so that
/// `R(0) = R₀ + R_Φ` with `Φ` the standard structure.
pub fn fubini_study_chart(n: usize) -> Result<MetricChart> {
    if n < 2 {
        return Err(Error::param("n", format!("complex dimension must be >= 2, got {n}")));
    }
    let field = ComplexModelField {
        n,
        sigma: 1.0,
        domain: Domain::Box { half_width: 1.0 },
    };
    Ok(MetricChart::new(format!("fubini_study(n={n})"), Arc::new(field)))
}

/// Bergman-type metric on the unit ball of `ℂⁿ`, `R(0) = -(R₀ + R_Φ)`.
pub fn complex_hyperbolic_chart(n: usize) -> Result<MetricChart> {
    if n < 2 {
        return Err(Error::param("n", format!("complex dimension must be >= 2, got {n}")));
    }
    let field = ComplexModelField {
        n,
        sigma: -1.0,
        domain: Domain::Ball {
            radius: 1.0,
            margin: BALL_MARGIN,
        },
    };
    Ok(MetricChart::new(format!("complex_hyperbolic(n={n})"), Arc::new(field)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    /// Exponent of each coordinate; length `m`.
    pub powers: Vec<u32>,
}

impl Monomial {
    fn value(&self, u: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(u)
            .fold(self.coefficient, |acc, (p, x)| acc * x.powi(*p as i32))
    }

    fn jet(&self, vars: &[Jet], order: u8) -> Jet {
        let mut acc = Jet::constant(vars.len(), order, self.coefficient);
        for (p, v) in self.powers.iter().zip(vars) {
            for _ in 0..*p {
                acc = &acc * v;
            }
        }
        acc
    }
}

/// One upper-triangular entry `g_ij = g_ji` of a polynomial metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialEntry {
    pub i: usize,
    pub j: usize,
    pub terms: Vec<Monomial>,
}

/// A metric whose entries are polynomials in the chart coordinates, on the
/// box `max |u_a| < half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMetric {
    m: usize,
    domain: Domain,
    /// row-major, symmetric
    entries: Vec<Vec<Monomial>>,
}

impl PolynomialMetric {
    /// Validates shapes and positive definiteness at deterministic sample
    /// points of the domain.
    pub fn new(m: usize, half_width: f64, entries: &[PolynomialEntry]) -> Result<Self> {
        check_real_dim(m)?;
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::param(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        let mut table = vec![Vec::new(); m * m];
        for e in entries {
            if e.i >= m || e.j >= m {
                return Err(Error::param(
                    "entries",
                    format!("index ({}, {}) out of range for m = {m}", e.i, e.j),
                ));
            }
            if let Some(t) = e.terms.iter().find(|t| t.powers.len() != m) {
                return Err(Error::param(
                    "entries",
                    format!("monomial has {} exponents, expected {m}", t.powers.len()),
                ));
            }
            table[e.i * m + e.j].extend(e.terms.iter().cloned());
            if e.i != e.j {
                table[e.j * m + e.i].extend(e.terms.iter().cloned());
            }
        }
        let metric = Self {
            m,
            domain: Domain::Box { half_width },
            entries: table,
        };
        metric.check_positive()?;
        Ok(metric)
    }

    fn check_positive(&self) -> Result<()> {
        let m = self.m;
        let w = self.domain.extent() * 0.999;
        let mut probes = vec![vec![0.0; m]];
        // corners of the box (all of them for small m, a seeded subset otherwise)
        let corners = 1usize << m.min(10);
        for c in 0..corners {
            probes.push((0..m).map(|a| if (c >> (a % 10)) & 1 == 1 { w } else { -w }).collect());
        }
        probes.extend(self.domain.sample_points(m, 64, 0xc0ffee));
        for u in probes {
            if InnerProduct::new(self.metric_at(&u)).is_err() {
                return Err(Error::param("metric", format!("not positive definite at {u:?}")));
            }
        }
        Ok(())
    }
}

impl MetricField for PolynomialMetric {
    fn dim(&self) -> usize {
        self.m
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn metric_at(&self, u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(
            self.m,
            self.m,
            self.entries
                .iter()
                .map(|terms| terms.iter().map(|t| t.value(u)).sum::<f64>()),
        )
    }

    fn metric_jet(&self, u: &[f64], order: u8) -> Option<Vec<Jet>> {
        let vars = Jet::variables(u, order);
        Some(
            self.entries
                .iter()
                .map(|terms| {
                    terms
                        .iter()
                        .fold(Jet::constant(self.m, order, 0.0), |acc, t| &acc + &t.jet(&vars, order))
                })
                .collect(),
        )
    }

    fn has_jets(&self) -> bool {
        true
    }
}

/// Half-width of the perturbed flat chart's box domain.
pub const PERTURBED_HALF_WIDTH: f64 = 0.5;

/// `g = δ + ε S(u)` with `S` a seeded symmetric matrix of polynomials of
/// degree 1 to 3; every coefficient is uniform in `[-1/m, 1/m]`.
pub fn perturbed_flat_chart(m: usize, epsilon: f64, seed: u64) -> Result<MetricChart> {
    check_real_dim(m)?;
    if !epsilon.is_finite() {
        return Err(Error::param("epsilon", "must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / m as f64;
    let mut exponents: Vec<Vec<u32>> = Vec::new();
    for a in 0..m {
        let mut p = vec![0; m];
        p[a] = 1;
        exponents.push(p);
    }
    for a in 0..m {
        for b in a..m {
            let mut p = vec![0; m];
            p[a] += 1;
            p[b] += 1;
            exponents.push(p);
        }
    }
    for a in 0..m {
        for b in a..m {
            for c in b..m {
                let mut p = vec![0; m];
                p[a] += 1;
                p[b] += 1;
                p[c] += 1;
                exponents.push(p);
            }
        }
    }
    let mut entries = Vec::new();
    for i in 0..m {
        for j in i..m {
            let mut terms = Vec::new();
            if i == j {
                terms.push(Monomial {
                    coefficient: 1.0,
                    powers: vec![0; m],
                });
            }
            for p in &exponents {
                let c: f64 = rng.random_range(-1.0..=1.0) * scale;
                if epsilon != 0.0 {
                    terms.push(Monomial {
                        coefficient: epsilon * c,
                        powers: p.clone(),
                    });
                }
            }
            entries.push(PolynomialEntry { i, j, terms });
        }
    }
    let field = PolynomialMetric::new(m, PERTURBED_HALF_WIDTH, &entries)?;
    Ok(MetricChart::new(
        format!("perturbed_flat(m={m}, epsilon={epsilon}, seed={seed})"),
        Arc::new(field),
    ))
}

/// A model addressable by name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Flat {
        m: usize,
    },
    Sphere {
        m: usize,
        #[serde(default = "one")]
        r: f64,
    },
    Hyperbolic {
        m: usize,
    },
    FubiniStudy {
        n: usize,
    },
    ComplexHyperbolic {
        n: usize,
    },
    PerturbedFlat {
        m: usize,
        epsilon: f64,
        seed: u64,
    },
    Polynomial {
        m: usize,
        half_width: f64,
        entries: Vec<PolynomialEntry>,
    },
    /// Algebraic `λ₀ R₀ + λ₁ R_Φ` on `(ℝᵐ, I)` with the standard `Φ`.
    ComplexSpaceForm {
        m: usize,
        lambda0: f64,
        lambda1: f64,
    },
    /// Algebraic seeded element of the `A_Ψ` span.
    RandomAct {
        m: usize,
        seed: u64,
        #[serde(default)]
        k: Option<usize>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Chart,
    Algebraic,
}

/// A built model.
#[derive(Debug, Clone)]
pub enum Model {
    Chart(MetricChart),
    Algebraic(CurvatureTensor),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::ComplexSpaceForm { .. } | ModelSpec::RandomAct { .. } => ModelKind::Algebraic,
            _ => ModelKind::Chart,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Flat { .. } => "flat",
            ModelSpec::Sphere { .. } => "sphere",
            ModelSpec::Hyperbolic { .. } => "hyperbolic",
            ModelSpec::FubiniStudy { .. } => "fubini_study",
            ModelSpec::ComplexHyperbolic { .. } => "complex_hyperbolic",
            ModelSpec::PerturbedFlat { .. } => "perturbed_flat",
            ModelSpec::Polynomial { .. } => "polynomial",
            ModelSpec::ComplexSpaceForm { .. } => "complex_space_form",
            ModelSpec::RandomAct { .. } => "random_act",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::FubiniStudy { n } | ModelSpec::ComplexHyperbolic { n } => 2 * n,
            ModelSpec::Flat { m }
            | ModelSpec::Sphere { m, .. }
            | ModelSpec::Hyperbolic { m }
            | ModelSpec::PerturbedFlat { m, .. }
            | ModelSpec::Polynomial { m, .. }
            | ModelSpec::ComplexSpaceForm { m, .. }
            | ModelSpec::RandomAct { m, .. } => m,
        }
    }

    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::Flat { m } => Model::Chart(flat_chart(*m)?),
            ModelSpec::Sphere { m, r } => Model::Chart(sphere_chart(*m, *r)?),
            ModelSpec::Hyperbolic { m } => Model::Chart(hyperbolic_chart(*m)?),
            ModelSpec::FubiniStudy { n } => Model::Chart(fubini_study_chart(*n)?),
            ModelSpec::ComplexHyperbolic { n } => Model::Chart(complex_hyperbolic_chart(*n)?),
            ModelSpec::PerturbedFlat { m, epsilon, seed } => Model::Chart(perturbed_flat_chart(*m, *epsilon, *seed)?),
            ModelSpec::Polynomial { m, half_width, entries } => Model::Chart(MetricChart::new(
                format!("polynomial(m={m})"),
                Arc::new(PolynomialMetric::new(*m, *half_width, entries)?),
            )),
            ModelSpec::ComplexSpaceForm { m, lambda0, lambda1 } => {
                let g = InnerProduct::identity(*m);
                Model::Algebraic(complex_space_form_act(*lambda0, *lambda1, &standard_phi(*m)?, &g)?.tensor)
            }
            ModelSpec::RandomAct { m, seed, k } => Model::Algebraic(random_act(*seed, *m, k.unwrap_or(*m))?),
        })
    }

    /// Closed-form curvature of the model at a point with metric `g`, where
    /// one is known.
    pub fn curvature_oracle(&self, g: &InnerProduct) -> Option<CurvatureTensor> {
        match *self {
            ModelSpec::Flat { .. } => Some(CurvatureTensor::zeros(g.clone())),
            ModelSpec::Sphere { r, .. } => Some(r0(g).scaled(1.0 / (r * r))),
            ModelSpec::Hyperbolic { .. } => Some(r0(g).scaled(-1.0)),
            ModelSpec::FubiniStudy { n } | ModelSpec::ComplexHyperbolic { n } => {
                let sign = if matches!(self, ModelSpec::FubiniStudy { .. }) {
                    1.0
                } else {
                    -1.0
                };
                let j = SkewAdjointEndo::new(standard_phi(2 * n).ok()?.matrix().clone(), g).ok()?;
                let rphi = a_phi(&j, g).ok()?;
                Some((&r0(g) + &rphi).scaled(sign))
            }
            _ => None,
        }
    }

    /// The parallel complex structure of the Kähler models, in chart
    /// coordinates (constant).
    pub fn complex_structure(&self) -> Option<DMatrix<f64>> {
        match *self {
            ModelSpec::FubiniStudy { n } | ModelSpec::ComplexHyperbolic { n } => {
                standard_phi(2 * n).ok().map(|p| p.matrix().clone())
            }
            _ => None,
        }
    }
}
