//! Canonical curvature tensors, the Ricci contraction and the Weyl
//! decomposition `R = W + c₁ τ R₀ + c₂ L`, plus the generators `A_Ψ`, `A_Φ`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor_core::{
    orthonormal_frame, CurvatureTensor, HermitianStructure, InnerProduct, SelfAdjointEndo, SkewAdjointEndo,
};

/// `R₀(x,y,z,w) = g(y,z) g(x,w) - g(x,z) g(y,w)`.
pub fn r0(g: &InnerProduct) -> CurvatureTensor {
    let gm = g.matrix().clone();
    CurvatureTensor::from_fn(g.clone(), |i, j, k, l| {
        gm[(j, k)] * gm[(i, l)] - gm[(i, k)] * gm[(j, l)]
    })
}

/// `A_Ψ(x,y,z,w) = g(Ψx,w) g(Ψy,z) - g(Ψx,z) g(Ψy,w)`.
pub fn a_psi(psi: &SelfAdjointEndo, g: &InnerProduct) -> Result<CurvatureTensor> {
    // Re-validates against this particular g.
    let psi = SelfAdjointEndo::new(psi.matrix().clone(), g)?;
    let s = g.matrix() * psi.matrix();
    let s = (&s + s.transpose()) * 0.5;
    Ok(CurvatureTensor::from_fn(g.clone(), |i, j, k, l| {
        s[(i, l)] * s[(j, k)] - s[(i, k)] * s[(j, l)]
    }))
}

/// `A_Φ(x,y,z,w) = g(Φx,w) g(Φy,z) - g(Φx,z) g(Φy,w) - 2 g(Φx,y) g(Φz,w)`.
///
/// For a Hermitian structure this is the tensor `R_Φ`.
pub fn a_phi(phi: &SkewAdjointEndo, g: &InnerProduct) -> Result<CurvatureTensor> {
    let phi = SkewAdjointEndo::new(phi.matrix().clone(), g)?;
    // gp[(l, i)] = g(Φ e_i, e_l)
    let gp = g.matrix() * phi.matrix();
    let gp = (&gp - gp.transpose()) * 0.5;
    Ok(CurvatureTensor::from_fn(g.clone(), |i, j, k, l| {
        gp[(l, i)] * gp[(k, j)] - gp[(k, i)] * gp[(l, j)] - 2.0 * gp[(j, i)] * gp[(l, k)]
    }))
}

/// `L(x,y,z,w) = ρ(y,z) g(x,w) - ρ(x,z) g(y,w) + g(y,z) ρ(x,w) - g(x,z) ρ(y,w)`,
/// with `ρ` given as a symmetric bilinear form.
pub fn l_tensor(rho: &DMatrix<f64>, g: &InnerProduct) -> Result<CurvatureTensor> {
    let m = g.dim();
    if rho.nrows() != m || rho.ncols() != m {
        return Err(Error::DimensionMismatch {
            what: "Ricci form",
            expected: m,
            found: rho.nrows(),
        });
    }
    let asym = (rho - rho.transpose()).amax();
    if asym > 1e-9 * rho.amax().max(1.0) {
        return Err(Error::NotSymmetric { residual: asym });
    }
    let gm = g.matrix().clone();
    let rho = (rho + rho.transpose()) * 0.5;
    Ok(CurvatureTensor::from_fn(g.clone(), |i, j, k, l| {
        rho[(j, k)] * gm[(i, l)] - rho[(i, k)] * gm[(j, l)] + gm[(j, k)] * rho[(i, l)] - gm[(i, k)] * rho[(j, l)]
    }))
}

/// How to treat inputs whose curvature symmetries are violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryCheck {
    /// Allowed residual relative to `max(1, ‖A‖∞)`.
    pub relative_tol: f64,
    pub reject: bool,
}

impl Default for SymmetryCheck {
    fn default() -> Self {
        Self {
            relative_tol: 1e-6,
            reject: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ricci {
    /// Ricci tensor as a symmetric bilinear form in the tensor's frame.
    pub rho: DMatrix<f64>,
    pub tau: f64,
    pub symmetry_residual: f64,
    /// Set when the residual exceeded the tolerance and the check was
    /// configured to warn instead of reject.
    pub symmetry_warning: bool,
}

/// `ρ_ij = Σ_k A_ikkj` and `τ = Σ_i ρ_ii`, contracted in an orthonormal frame.
pub fn ricci_scalar(a: &CurvatureTensor, check: SymmetryCheck) -> Result<Ricci> {
    let residual = a.symmetry_residual();
    let over = residual > check.relative_tol * a.max_abs().max(1.0);
    if over && check.reject {
        return Err(Error::SymmetryViolation { residual });
    }
    let m = a.dim();
    let (framed, frame) = if a.metric().is_identity() {
        (a.clone(), None)
    } else {
        let b = orthonormal_frame(a.metric())?;
        (crate::tensor_core::transform_tensor(a, &b)?, Some(b))
    };
    let mut rho = DMatrix::from_fn(m, m, |i, j| (0..m).map(|k| framed.get(i, k, k, j)).sum::<f64>());
    rho = (&rho + rho.transpose()) * 0.5;
    let tau = rho.trace();
    if let Some(b) = frame {
        // Pull the frame form back to coordinates: ρ = B⁻ᵀ ρ' B⁻¹.
        let binv = b
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular frame".into()))?;
        rho = binv.transpose() * rho * &binv;
        rho = (&rho + rho.transpose()) * 0.5;
    }
    Ok(Ricci {
        rho,
        tau,
        symmetry_residual: residual,
        symmetry_warning: over,
    })
}

/// `c₁(m) = -1/((m-1)(m-2))`
pub fn c1(m: usize) -> f64 {
    -1.0 / (((m - 1) * (m - 2)) as f64)
}

/// `c₂(m) = 1/(m-2)`
pub fn c2(m: usize) -> f64 {
    1.0 / ((m - 2) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDecomposition {
    pub r: CurvatureTensor,
    pub ricci: DMatrix<f64>,
    pub tau: f64,
    pub l: CurvatureTensor,
    pub w: CurvatureTensor,
    pub c1: f64,
    pub c2: f64,
    pub symmetry_warning: bool,
}

impl CurvatureDecomposition {
    /// `‖R - (W + c₁τR₀ + c₂L)‖∞`.
    pub fn reconstruction_residual(&self) -> f64 {
        let r0 = r0(self.r.metric());
        let rebuilt = &(&self.w + &r0.scaled(self.c1 * self.tau)) + &self.l.scaled(self.c2);
        self.r.distance(&rebuilt)
    }
}

pub fn weyl_decompose(a: &CurvatureTensor) -> Result<CurvatureDecomposition> {
    weyl_decompose_with(a, SymmetryCheck::default())
}

pub fn weyl_decompose_with(a: &CurvatureTensor, check: SymmetryCheck) -> Result<CurvatureDecomposition> {
    let m = a.dim();
    if m < 3 {
        return Err(Error::InvalidDimension {
            dim: m,
            reason: "the Weyl decomposition needs m >= 3",
        });
    }
    let ricci = ricci_scalar(a, check)?;
    let g = a.metric();
    let l = l_tensor(&ricci.rho, g)?;
    let (c1, c2) = (c1(m), c2(m));
    let w = &(a - &r0(g).scaled(c1 * ricci.tau)) - &l.scaled(c2);
    Ok(CurvatureDecomposition {
        r: a.clone(),
        ricci: ricci.rho,
        tau: ricci.tau,
        l,
        w,
        c1,
        c2,
        symmetry_warning: ricci.symmetry_warning,
    })
}

/// `Σ cᵢ A_Ψᵢ` over the given generators.
pub fn act_from_generators(terms: &[(f64, SelfAdjointEndo)], g: &InnerProduct) -> Result<CurvatureTensor> {
    let mut acc = CurvatureTensor::zeros(g.clone());
    for (c, psi) in terms {
        acc = &acc + &a_psi(psi, g)?.scaled(*c);
    }
    Ok(acc)
}

/// A seeded random element of the span of the `A_Ψ` generators on `(ℝᵐ, I)`.
///
/// Ψ entries are drawn uniformly from `[-1, 1]` and symmetrized, coefficients
/// uniformly from `[-1, 1]`.
pub fn random_act(seed: u64, m: usize, k: usize) -> Result<CurvatureTensor> {
    if k == 0 {
        return Err(Error::param("k", "need at least one generator"));
    }
    if m < 2 {
        return Err(Error::InvalidDimension {
            dim: m,
            reason: "need m >= 2",
        });
    }
    let g = InnerProduct::identity(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(k);
    for _ in 0..k {
        let p = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..=1.0));
        let psi = SelfAdjointEndo::new((&p + p.transpose()) * 0.5, &g)?;
        let c = rng.random_range(-1.0..=1.0);
        terms.push((c, psi));
    }
    act_from_generators(&terms, &g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpaceForm {
    pub tensor: CurvatureTensor,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `λ₁ = 0`: the tensor is a real space form.
    pub degenerate: bool,
}

/// `λ₀ R₀ + λ₁ R_Φ`.
pub fn complex_space_form_act(
    lambda0: f64,
    lambda1: f64,
    phi: &HermitianStructure,
    g: &InnerProduct,
) -> Result<ComplexSpaceForm> {
    let m = g.dim();
    if m % 2 == 1 {
        return Err(Error::InvalidDimension {
            dim: m,
            reason: "complex space forms need even dimension",
        });
    }
    if phi.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "Hermitian structure",
            expected: m,
            found: phi.dim(),
        });
    }
    let base = r0(g).scaled(lambda0);
    let tensor = &base + &a_phi(&phi.as_skew(), g)?.scaled(lambda1);
    Ok(ComplexSpaceForm {
        tensor,
        lambda0,
        lambda1,
        degenerate: lambda1 == 0.0,
    })
}
