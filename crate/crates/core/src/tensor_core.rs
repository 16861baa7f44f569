//! Value types for the pointwise algebra: inner products, endomorphisms and
//! fully covariant rank-4 tensors carrying curvature symmetries.
//!
//! Tensors are stored dense in row-major order `A[i][j][k][l]`. Every tensor
//! carries the inner product it is expressed against, so that contractions and
//! frame changes stay consistent. Spectral work expects the identity inner
//! product, i.e. an orthonormal frame; use [`CurvatureTensor::to_orthonormal`]
//! before asking for eigenvalues.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used when validating symmetric/skew/orthogonal inputs.
pub const STRUCTURE_TOL: f64 = 1e-9;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// A positive definite inner product on an `m`-dimensional space, `m >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProduct {
    g: DMatrix<f64>,
}

impl InnerProduct {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::DimensionMismatch {
                what: "inner product (columns)",
                expected: g.nrows(),
                found: g.ncols(),
            });
        }
        let m = g.nrows();
        if m < 2 {
            return Err(Error::InvalidDimension {
                dim: m,
                reason: "inner products need m >= 2",
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite metric entry".into()));
        }
        let residual = max_abs(&(&g - g.transpose()));
        if residual > 1e-10 * max_abs(&g).max(1.0) {
            return Err(Error::NotSymmetric { residual });
        }
        let g = (&g + g.transpose()) * 0.5;
        if g.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { g })
    }

    pub fn identity(m: usize) -> Self {
        assert!(m >= 2, "inner products need m >= 2");
        Self {
            g: DMatrix::identity(m, m),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.g
            .clone()
            .cholesky()
            .expect("validated positive definite")
            .inverse()
    }

    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.g * y)[(0, 0)]
    }

    /// True when `g` is the identity to within `1e-10`.
    pub fn is_identity(&self) -> bool {
        let m = self.dim();
        max_abs(&(&self.g - DMatrix::identity(m, m))) <= 1e-10
    }
}

/// A tangent vector given by its components in the current frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub DVector<f64>);

impl TangentVector {
    pub fn from_slice(components: &[f64]) -> Self {
        Self(DVector::from_column_slice(components))
    }

    pub fn norm(&self, g: &InnerProduct) -> f64 {
        g.dot(&self.0, &self.0).sqrt()
    }

    /// Rescales to `g(x, x) = 1`. Returns `None` for the zero vector.
    pub fn normalized(&self, g: &InnerProduct) -> Option<Self> {
        let n = self.norm(g);
        (n > 0.0 && n.is_finite()).then(|| Self(&self.0 / n))
    }
}

/// Residual of `g Ψ = Ψᵀ g`, relative to the size of `g Ψ`.
pub fn self_adjoint_residual(psi: &DMatrix<f64>, g: &InnerProduct) -> f64 {
    let s = g.matrix() * psi;
    max_abs(&(&s - s.transpose())) / max_abs(&s).max(1.0)
}

/// Residual of `g Φ = -Φᵀ g`, relative to the size of `g Φ`.
pub fn skew_adjoint_residual(phi: &DMatrix<f64>, g: &InnerProduct) -> f64 {
    let s = g.matrix() * phi;
    max_abs(&(&s + s.transpose())) / max_abs(&s).max(1.0)
}

fn check_square(what: &'static str, a: &DMatrix<f64>, m: usize) -> Result<()> {
    if a.nrows() != m || a.ncols() != m {
        return Err(Error::DimensionMismatch {
            what,
            expected: m,
            found: if a.nrows() != m { a.nrows() } else { a.ncols() },
        });
    }
    Ok(())
}

/// A `g`-self-adjoint endomorphism Ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAdjointEndo {
    matrix: DMatrix<f64>,
}

impl SelfAdjointEndo {
    pub fn new(matrix: DMatrix<f64>, g: &InnerProduct) -> Result<Self> {
        check_square("self-adjoint endomorphism", &matrix, g.dim())?;
        let residual = self_adjoint_residual(&matrix, g);
        if residual > STRUCTURE_TOL {
            return Err(Error::NotSelfAdjoint { residual });
        }
        Ok(Self { matrix })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// A `g`-skew-adjoint endomorphism, the input of the `A_Φ` generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewAdjointEndo {
    matrix: DMatrix<f64>,
}

impl SkewAdjointEndo {
    pub fn new(matrix: DMatrix<f64>, g: &InnerProduct) -> Result<Self> {
        check_square("skew-adjoint endomorphism", &matrix, g.dim())?;
        let residual = skew_adjoint_residual(&matrix, g);
        if residual > STRUCTURE_TOL {
            return Err(Error::NotSkewAdjoint { residual });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Residuals of the three defining properties of a Hermitian structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianResiduals {
    /// `‖Φ² + I‖∞`
    pub square: f64,
    /// `‖gΦ + Φᵀg‖∞`
    pub skew: f64,
    /// `‖Φᵀ g Φ - g‖∞`
    pub orthogonal: f64,
}

impl HermitianResiduals {
    pub fn max(&self) -> f64 {
        self.square.max(self.skew).max(self.orthogonal)
    }
}

pub fn hermitian_residuals(phi: &DMatrix<f64>, g: &InnerProduct) -> HermitianResiduals {
    let m = g.dim();
    let gm = g.matrix();
    let gp = gm * phi;
    HermitianResiduals {
        square: max_abs(&(phi * phi + DMatrix::identity(m, m))),
        skew: max_abs(&(&gp + gp.transpose())),
        orthogonal: max_abs(&(phi.transpose() * gm * phi - gm)),
    }
}

/// A Hermitian almost complex structure: `Φ² = -I`, skew-adjoint and
/// orthogonal with respect to `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianStructure {
    matrix: DMatrix<f64>,
}

impl HermitianStructure {
    pub fn new(matrix: DMatrix<f64>, g: &InnerProduct) -> Result<Self> {
        Self::with_tolerance(matrix, g, STRUCTURE_TOL)
    }

    pub fn with_tolerance(matrix: DMatrix<f64>, g: &InnerProduct, tol: f64) -> Result<Self> {
        check_square("Hermitian structure", &matrix, g.dim())?;
        if g.dim() % 2 == 1 {
            return Err(Error::InvalidDimension {
                dim: g.dim(),
                reason: "Hermitian structures need even dimension",
            });
        }
        let r = hermitian_residuals(&matrix, g);
        let scale = max_abs(g.matrix()).max(1.0);
        if r.square > tol {
            return Err(Error::NotHermitian {
                reason: "Φ² ≠ -I",
                residual: r.square,
            });
        }
        if r.skew > tol * scale {
            return Err(Error::NotHermitian {
                reason: "not skew-adjoint",
                residual: r.skew,
            });
        }
        if r.orthogonal > tol * scale {
            return Err(Error::NotHermitian {
                reason: "not orthogonal",
                residual: r.orthogonal,
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn as_skew(&self) -> SkewAdjointEndo {
        SkewAdjointEndo {
            matrix: self.matrix.clone(),
        }
    }

    pub fn negated(&self) -> Self {
        Self { matrix: -&self.matrix }
    }

    /// `min(‖Φ - other‖∞, ‖Φ + other‖∞)`: distance ignoring the global sign.
    pub fn distance_up_to_sign(&self, other: &DMatrix<f64>) -> f64 {
        max_abs(&(&self.matrix - other)).min(max_abs(&(&self.matrix + other)))
    }
}

/// A fully covariant rank-4 tensor `A(e_i, e_j, e_k, e_l)` with its inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    m: usize,
    data: Vec<f64>,
    metric: InnerProduct,
}

impl CurvatureTensor {
    pub fn zeros(metric: InnerProduct) -> Self {
        let m = metric.dim();
        Self {
            m,
            data: vec![0.0; m.pow(4)],
            metric,
        }
    }

    pub fn from_fn(metric: InnerProduct, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let m = metric.dim();
        let mut data = Vec::with_capacity(m.pow(4));
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self { m, data, metric }
    }

    pub fn from_components(metric: InnerProduct, data: Vec<f64>) -> Result<Self> {
        let m = metric.dim();
        if data.len() != m.pow(4) {
            return Err(Error::DimensionMismatch {
                what: "tensor components (m⁴)",
                expected: m.pow(4),
                found: data.len(),
            });
        }
        Ok(Self { m, data, metric })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.m + j) * self.m + k) * self.m + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) {
        let n = self.idx(i, j, k, l);
        self.data[n] = value;
    }

    pub fn components(&self) -> &[f64] {
        &self.data
    }

    pub fn metric(&self) -> &InnerProduct {
        &self.metric
    }

    /// Max absolute component in the current frame.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `‖self - other‖∞` componentwise.
    pub fn distance(&self, other: &CurvatureTensor) -> f64 {
        assert_eq!(self.m, other.m, "tensor dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Multilinear evaluation `A(x, y, z, w)`.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for i in 0..m {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                if y[j] == 0.0 {
                    continue;
                }
                let xy = x[i] * y[j];
                for k in 0..m {
                    let base = self.idx(i, j, k, 0);
                    let row = &self.data[base..base + m];
                    let s: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                    acc += xy * z[k] * s;
                }
            }
        }
        acc
    }

    /// Worst violation of antisymmetry, pair symmetry and the first Bianchi
    /// identity, as a max-norm over all index tuples.
    pub fn symmetry_residual(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let a = self.get(i, j, k, l);
                        let anti = (a + self.get(j, i, k, l)).abs();
                        let pair = (a - self.get(k, l, i, j)).abs();
                        let bianchi = (a + self.get(j, k, i, l) + self.get(k, i, j, l)).abs();
                        worst = worst.max(anti).max(pair).max(bianchi);
                    }
                }
            }
        }
        worst
    }

    /// The (1,3) form `A_{ijk}^l = Σ_s A_{ijks} g^{sl}` (last slot raised).
    pub fn raise_last(&self) -> Vec<f64> {
        let m = self.m;
        let ginv = self.metric.inverse();
        let mut out = vec![0.0; m.pow(4)];
        for (chunk, dst) in self.data.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
            for l in 0..m {
                dst[l] = (0..m).map(|s| chunk[s] * ginv[(s, l)]).sum();
            }
        }
        out
    }

    /// Re-expresses the tensor in the frame returned by [`orthonormal_frame`].
    pub fn to_orthonormal(&self) -> CurvatureTensor {
        if self.metric.is_identity() {
            return self.clone();
        }
        let b = orthonormal_frame(&self.metric).expect("validated inner product");
        transform_tensor(self, &b).expect("frame has matching shape")
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            m: self.m,
            data: self.data.iter().map(|v| v * c).collect(),
            metric: self.metric.clone(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.m, other.m, "tensor dimensions differ");
        Self {
            m: self.m,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
            metric: self.metric.clone(),
        }
    }
}

impl Add for &CurvatureTensor {
    type Output = CurvatureTensor;
    fn add(self, rhs: Self) -> CurvatureTensor {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &CurvatureTensor {
    type Output = CurvatureTensor;
    fn sub(self, rhs: Self) -> CurvatureTensor {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<&CurvatureTensor> for f64 {
    type Output = CurvatureTensor;
    fn mul(self, rhs: &CurvatureTensor) -> CurvatureTensor {
        rhs.scaled(self)
    }
}

impl Neg for &CurvatureTensor {
    type Output = CurvatureTensor;
    fn neg(self) -> CurvatureTensor {
        self.scaled(-1.0)
    }
}

/// Returns `B` with `Bᵀ g B = I`, built from the Cholesky factor `g = L Lᵀ`
/// as `B = L⁻ᵀ`. Columns of `B` are the frame vectors in coordinates.
pub fn orthonormal_frame(g: &InnerProduct) -> Result<DMatrix<f64>> {
    let l = g.matrix().clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    let m = g.dim();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(linv.transpose())
}

/// Contracts one slot of a dense rank-`rank` array with `b`:
/// `out[.., i, ..] = Σ_p a[.., p, ..] b[p, i]`.
pub(crate) fn contract_slot(a: &[f64], m: usize, rank: usize, slot: usize, b: &DMatrix<f64>) -> Vec<f64> {
    let inner = m.pow((rank - slot - 1) as u32);
    let outer = m.pow(slot as u32);
    let mut out = vec![0.0; a.len()];
    for o in 0..outer {
        for i in 0..m {
            for p in 0..m {
                let bpi = b[(p, i)];
                if bpi == 0.0 {
                    continue;
                }
                let src = (o * m + p) * inner;
                let dst = (o * m + i) * inner;
                for r in 0..inner {
                    out[dst + r] += a[src + r] * bpi;
                }
            }
        }
    }
    out
}

/// `A'(x, y, z, w) = A(Bx, By, Bz, Bw)`, with the inner product pulled back to
/// `Bᵀ g B`. `B` must be invertible.
pub fn transform_tensor(a: &CurvatureTensor, b: &DMatrix<f64>) -> Result<CurvatureTensor> {
    let m = a.dim();
    check_square("basis transform", b, m)?;
    let metric = InnerProduct::new(b.transpose() * a.metric().matrix() * b)?;
    let mut data = a.data.clone();
    for slot in 0..4 {
        data = contract_slot(&data, m, 4, slot, b);
    }
    Ok(CurvatureTensor { m, data, metric })
}
