//! Eigenvalue-structure classification of Weyl tensors: conformally flat,
//! conformally complex space form (with recovery of `Φ`), other Osserman
//! structures, or not conformally Osserman.
//!
//! Verdicts are pointwise necessary conditions. They do not certify local
//! conformal equivalence to a model space.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart_geometry::{local_curvature, MetricChart};
use crate::curvature_algebra::{a_phi, r0, weyl_decompose_with, SymmetryCheck};
use crate::error::{Error, Result};
use crate::spectral::{
    osserman_test, OssermanConfig, OssermanReport, SpectralProfile, DEFAULT_CLUSTER_TOL, DEFAULT_SAMPLES,
};
use crate::tensor_core::{
    hermitian_residuals, orthonormal_frame, CurvatureTensor, HermitianStructure, InnerProduct, SkewAdjointEndo,
};
use crate::tolerance::Tier;

/// Below this dimension the rigidity statement for two-eigenvalue Weyl
/// tensors is not claimed; verdicts carry a caveat.
pub const RIGIDITY_MIN_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    ConformallyFlat,
    ConformallyComplexSpaceForm,
    OssermanOther,
    NotConformallyOsserman,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::ConformallyFlat => "ConformallyFlat",
            VerdictKind::ConformallyComplexSpaceForm => "ConformallyComplexSpaceForm",
            VerdictKind::OssermanOther => "OssermanOther",
            VerdictKind::NotConformallyOsserman => "NotConformallyOsserman",
        })
    }
}

/// Which model a conformally complex space form is modelled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexModelType {
    /// `λ₁ > 0`, complex projective space.
    Projective,
    /// `λ₁ < 0`, its negative curvature dual.
    HyperbolicDual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParityWarning {
    /// Odd `m` but more than one eigenvalue cluster.
    OddDimension { m: usize, clusters: usize },
    /// `m ≡ 2 mod 4` with a structure other than one cluster or two
    /// clusters one of which is simple.
    TwoModFour { m: usize, multiplicities: Vec<usize> },
}

impl fmt::Display for ParityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParityWarning::OddDimension { m, clusters } => {
                write!(f, "m = {m} is odd but {clusters} eigenvalue clusters were found")
            }
            ParityWarning::TwoModFour { m, multiplicities } => write!(
                f,
                "m = {m} ≡ 2 mod 4 admits one cluster or two with a simple one, found multiplicities {multiplicities:?}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖W‖∞` in an orthonormal frame.
    pub weyl_norm: f64,
    pub profile: SpectralProfile,
    pub max_profile_distance: f64,
    pub trace_relation_residual: Option<f64>,
    /// `‖W - (λ₀R₀ + λ₁A_Φ̂)‖∞`.
    pub reconstruction_residual: Option<f64>,
    /// One cluster, but `‖W‖∞` above the flatness tolerance.
    pub near_degenerate: bool,
    /// Two-eigenvalue verdict with `m < 8`.
    pub below_rigidity_dimension: bool,
    pub parity_warnings: Vec<ParityWarning>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub model_type: Option<ComplexModelType>,
    /// Recovered structure in the orthonormal frame of `W`, canonical sign.
    pub phi: Option<HermitianStructure>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub flat_tol: f64,
    pub recovery_tol: f64,
    pub trace_relation_tol: f64,
}

impl ClassifierConfig {
    pub fn for_tier(tier: Tier) -> Self {
        Self {
            flat_tol: tier.flat_tol(),
            recovery_tol: tier.recovery_tol(),
            trace_relation_tol: match tier {
                Tier::Exact => 1e-8,
                Tier::FiniteDifference => 1e-3,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRelationCheck {
    /// `|3λ₁ + (m-1)λ₀| / |λ₁|`
    pub residual: f64,
    pub pass: bool,
}

/// Checks `3λ₁ + (m-1)λ₀ = 0`, the trace condition on a conformally complex
/// space form.
pub fn check_trace_relation(lambda0: f64, lambda1: f64, m: usize, tol: f64) -> Result<TraceRelationCheck> {
    if lambda1 == 0.0 {
        return Err(Error::DegenerateInput("λ₁ = 0".into()));
    }
    let residual = (3.0 * lambda1 + (m as f64 - 1.0) * lambda0).abs() / lambda1.abs();
    Ok(TraceRelationCheck {
        residual,
        pass: residual <= tol,
    })
}

/// Reconstructs `Φ` (up to sign) from a tensor of the form `A_Φ`.
///
/// Uses `B_pqqp = 3Φ_pq²`, `B_iqql = -3Φ_iqΦ_ql` and
/// `B_pqkl = Φ_lpΦ_kq - Φ_kpΦ_lq - 2Φ_qpΦ_lk` around the pivot with the
/// largest `B_pqqp`, then projects onto skew orthogonal matrices and
/// validates against `a_phi`. The result lives in the orthonormal frame of
/// `b` and satisfies `Φ_pq > 0` at the pivot.
pub fn recover_phi(b: &CurvatureTensor, tol: f64) -> Result<HermitianStructure> {
    let m = b.dim();
    if m % 2 == 1 {
        return Err(Error::InvalidDimension {
            dim: m,
            reason: "Hermitian structures need even dimension",
        });
    }
    let b = b.to_orthonormal();
    let scale = b.max_abs().max(1.0);
    let mut pivot = (0, 1);
    let mut best = f64::NEG_INFINITY;
    for p in 0..m {
        for q in (p + 1)..m {
            let v = b.get(p, q, q, p);
            if v > best {
                best = v;
                pivot = (p, q);
            }
        }
    }
    if best.is_nan() || best <= 1e-8 * scale {
        return Err(Error::DegenerateInput(format!(
            "largest sectional entry {best:.3e} is too small to carry a Hermitian structure"
        )));
    }
    let (p, q) = pivot;
    let phi_pq = (best / 3.0).sqrt();
    let phi_qp = -phi_pq;
    let mut phi = DMatrix::zeros(m, m);
    for i in 0..m {
        phi[(i, p)] = b.get(i, p, p, q) / (3.0 * phi_qp);
        phi[(i, q)] = b.get(i, q, q, p) / (3.0 * phi_pq);
    }
    for l in 0..m {
        for k in 0..m {
            if k == p || k == q {
                continue;
            }
            phi[(l, k)] = (phi[(l, p)] * phi[(k, q)] - phi[(k, p)] * phi[(l, q)] - b.get(p, q, k, l)) / (2.0 * phi_qp);
        }
    }
    let skew = (&phi - phi.transpose()) * 0.5;
    let svd = skew.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numerical("SVD failed during Φ recovery".into())),
    };
    let mut phi = u * vt;
    phi = (&phi - phi.transpose()) * 0.5;
    if phi[(p, q)] < 0.0 {
        phi = -phi;
    }
    let g = InnerProduct::identity(m);
    let rebuilt = a_phi(&SkewAdjointEndo::new(phi.clone(), &g)?, &g)?;
    let residual = (rebuilt.distance(&b) / scale).max(hermitian_residuals(&phi, &g).max());
    if residual > tol {
        return Err(Error::ReconstructionFailed { residual });
    }
    HermitianStructure::with_tolerance(phi, &g, tol.max(1e-9))
}

/// Warnings when a cluster structure contradicts the dimension constraints
/// on Osserman tensors (odd `m`: one eigenvalue; `m ≡ 2 mod 4`: one
/// eigenvalue, or two with one simple).
pub fn parity_consistency(m: usize, profile: &SpectralProfile, verdict: VerdictKind) -> Vec<ParityWarning> {
    if verdict == VerdictKind::NotConformallyOsserman {
        return Vec::new();
    }
    let mults = profile.multiplicities();
    let mut out = Vec::new();
    if m % 2 == 1 && mults.len() > 1 {
        out.push(ParityWarning::OddDimension {
            m,
            clusters: mults.len(),
        });
    }
    if m % 4 == 2 && mults.len() >= 2 && (mults.len() > 2 || !mults.contains(&1)) {
        out.push(ParityWarning::TwoModFour {
            m,
            multiplicities: mults,
        });
    }
    out
}

/// Decision tree on the consensus spectral profile of `W`.
pub fn classify_point(
    w: &CurvatureTensor,
    profile: &SpectralProfile,
    osserman: &OssermanReport,
    m: usize,
    config: &ClassifierConfig,
) -> Result<Verdict> {
    if w.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "Weyl tensor",
            expected: m,
            found: w.dim(),
        });
    }
    if profile.total_multiplicity() != m - 1 {
        return Err(Error::DimensionMismatch {
            what: "profile multiplicities (m - 1)",
            expected: m - 1,
            found: profile.total_multiplicity(),
        });
    }
    let w = w.to_orthonormal();
    let weyl_norm = w.max_abs();
    let mut verdict = Verdict {
        kind: VerdictKind::OssermanOther,
        lambda0: None,
        lambda1: None,
        model_type: None,
        phi: None,
        diagnostics: Diagnostics {
            weyl_norm,
            profile: profile.clone(),
            max_profile_distance: osserman.max_profile_distance,
            trace_relation_residual: None,
            reconstruction_residual: None,
            near_degenerate: false,
            below_rigidity_dimension: false,
            parity_warnings: Vec::new(),
            note: None,
        },
    };
    let mults = profile.multiplicities();

    if !osserman.is_constant {
        verdict.kind = VerdictKind::NotConformallyOsserman;
    } else if mults.len() == 1 {
        // A single eigenvalue of a trace-free operator must be 0, hence W = 0.
        let value = profile.clusters[0].value;
        let bound = config.flat_tol.max(10.0 * profile.spread);
        if value.abs() > bound {
            return Err(Error::DegenerateInput(format!(
                "single eigenvalue {value:e} is not trace-free; input is not a Weyl tensor"
            )));
        }
        verdict.kind = VerdictKind::ConformallyFlat;
        verdict.diagnostics.near_degenerate = weyl_norm > config.flat_tol;
    } else if m >= 4 && mults.len() == 2 && mults.contains(&1) && mults.contains(&(m - 2)) {
        let (simple, bulk) = if mults[0] == 1 && mults[1] == m - 2 {
            (&profile.clusters[0], &profile.clusters[1])
        } else {
            (&profile.clusters[1], &profile.clusters[0])
        };
        let lambda0 = bulk.value;
        let lambda1 = (simple.value - bulk.value) / 3.0;
        verdict.lambda0 = Some(lambda0);
        verdict.lambda1 = Some(lambda1);
        let relation = check_trace_relation(lambda0, lambda1, m, config.trace_relation_tol)?;
        verdict.diagnostics.trace_relation_residual = Some(relation.residual);
        let g = w.metric().clone();
        let candidate = (&w - &r0(&g).scaled(lambda0)).scaled(1.0 / lambda1);
        match (relation.pass, recover_phi(&candidate, config.recovery_tol)) {
            (false, _) => {
                verdict.diagnostics.note = Some(format!("trace relation fails (residual {:.3e})", relation.residual));
            }
            (true, Err(e)) => {
                verdict.diagnostics.note = Some(format!("Φ recovery failed: {e}"));
            }
            (true, Ok(phi)) => {
                let rphi = a_phi(&phi.as_skew(), &g)?;
                let rebuilt = &r0(&g).scaled(lambda0) + &rphi.scaled(lambda1);
                verdict.diagnostics.reconstruction_residual = Some(w.distance(&rebuilt));
                verdict.kind = VerdictKind::ConformallyComplexSpaceForm;
                verdict.model_type = Some(if lambda1 > 0.0 {
                    ComplexModelType::Projective
                } else {
                    ComplexModelType::HyperbolicDual
                });
                verdict.diagnostics.below_rigidity_dimension = m < RIGIDITY_MIN_DIM;
                verdict.phi = Some(phi);
            }
        }
    }
    verdict.diagnostics.parity_warnings = parity_consistency(m, profile, verdict.kind);
    Ok(verdict)
}

/// Settings for the full per-point pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub samples: usize,
    pub seed: u64,
    /// Defaults to the tier value when `None`.
    pub spec_tol: Option<f64>,
    pub cluster_tol: f64,
    pub flat_tol: Option<f64>,
    pub recovery_tol: Option<f64>,
    /// Also compute `∇R` and the second Bianchi residual at chart points.
    pub bianchi: bool,
    pub keep_spectra: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            spec_tol: None,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            flat_tol: None,
            recovery_tol: None,
            bianchi: false,
            keep_spectra: false,
        }
    }
}

impl PipelineConfig {
    pub fn osserman(&self, tier: Tier) -> OssermanConfig {
        OssermanConfig {
            samples: self.samples,
            seed: self.seed,
            spec_tol: self.spec_tol.unwrap_or(tier.spec_tol()),
            cluster_tol: self.cluster_tol,
            keep_spectra: self.keep_spectra,
        }
    }

    pub fn classifier(&self, tier: Tier) -> ClassifierConfig {
        let mut c = ClassifierConfig::for_tier(tier);
        if let Some(t) = self.flat_tol {
            c.flat_tol = t;
        }
        if let Some(t) = self.recovery_tol {
            c.recovery_tol = t;
        }
        c
    }
}

/// Everything computed at one point (or for one algebraic tensor).
#[derive(Debug, Clone, PartialEq)]
pub struct PointAnalysis {
    pub point: Vec<f64>,
    pub tier: Tier,
    pub metric: InnerProduct,
    pub tau: f64,
    /// Weyl tensor in the orthonormal frame.
    pub weyl: CurvatureTensor,
    pub reconstruction_residual: f64,
    pub symmetry_residual: f64,
    pub osserman: OssermanReport,
    pub verdict: Verdict,
    /// Recovered `Φ` expressed back in chart coordinates.
    pub phi_coordinates: Option<DMatrix<f64>>,
    pub bianchi_residual: Option<f64>,
}

/// Runs decomposition, spectral sampling and classification on a curvature
/// tensor.
pub fn analyze_tensor(
    r: &CurvatureTensor,
    point: Vec<f64>,
    tier: Tier,
    config: &PipelineConfig,
) -> Result<PointAnalysis> {
    let m = r.dim();
    let check = SymmetryCheck {
        relative_tol: tier.symmetry_tol(),
        reject: false,
    };
    let decomposition = weyl_decompose_with(r, check)?;
    let weyl = decomposition.w.to_orthonormal();
    let osserman = osserman_test(&weyl, &config.osserman(tier))?;
    let verdict = classify_point(&weyl, &osserman.profile, &osserman, m, &config.classifier(tier))?;
    let phi_coordinates = match &verdict.phi {
        Some(phi) => {
            let b = orthonormal_frame(r.metric())?;
            let binv = b
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numerical("singular frame".into()))?;
            Some(&b * phi.matrix() * binv)
        }
        None => None,
    };
    Ok(PointAnalysis {
        point,
        tier,
        metric: r.metric().clone(),
        tau: decomposition.tau,
        reconstruction_residual: decomposition.reconstruction_residual(),
        symmetry_residual: r.symmetry_residual(),
        weyl,
        osserman,
        verdict,
        phi_coordinates,
        bianchi_residual: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSummary {
    pub conformally_flat: usize,
    pub conformally_complex_space_form: usize,
    pub osserman_other: usize,
    pub not_conformally_osserman: usize,
    /// Per point, `Some(type)` for complex space form verdicts.
    pub complex_types: Vec<Option<ComplexModelType>>,
    /// Max over consecutive complex-space-form points of
    /// `min(‖Φ̂(P) - Φ̂(Q)‖∞, ‖Φ̂(P) + Φ̂(Q)‖∞)` in chart coordinates.
    pub phi_consistency: Option<f64>,
}

impl ChartSummary {
    pub fn from_points(points: &[PointAnalysis]) -> Self {
        let count = |k: VerdictKind| points.iter().filter(|p| p.verdict.kind == k).count();
        let phis: Vec<&DMatrix<f64>> = points.iter().filter_map(|p| p.phi_coordinates.as_ref()).collect();
        let phi_consistency = (phis.len() >= 2).then(|| {
            phis.windows(2)
                .map(|w| (w[0] - w[1]).amax().min((w[0] + w[1]).amax()))
                .fold(0.0, f64::max)
        });
        Self {
            conformally_flat: count(VerdictKind::ConformallyFlat),
            conformally_complex_space_form: count(VerdictKind::ConformallyComplexSpaceForm),
            osserman_other: count(VerdictKind::OssermanOther),
            not_conformally_osserman: count(VerdictKind::NotConformallyOsserman),
            complex_types: points.iter().map(|p| p.verdict.model_type).collect(),
            phi_consistency,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartClassification {
    pub points: Vec<PointAnalysis>,
    pub summary: ChartSummary,
}

/// Full pipeline at a single chart point.
pub fn analyze_chart_point(chart: &MetricChart, u: &[f64], config: &PipelineConfig) -> Result<PointAnalysis> {
    let local = local_curvature(chart, u, config.bianchi)?;
    let mut analysis = analyze_tensor(&local.riemann, u.to_vec(), chart.tier(), config)?;
    analysis.bianchi_residual = local.nabla_riemann.map(|d| d.bianchi_residual());
    Ok(analysis)
}

/// Classifies each point independently (in parallel); output order follows
/// `points`.
pub fn classify_chart(
    chart: &MetricChart,
    points: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<ChartClassification> {
    let analyses: Vec<PointAnalysis> = points
        .par_iter()
        .map(|u| analyze_chart_point(chart, u, config))
        .collect::<Result<_>>()?;
    let summary = ChartSummary::from_points(&analyses);
    Ok(ChartClassification {
        points: analyses,
        summary,
    })
}
