//! Jacobi operators `J_A(x) y = A(y, x) x`, their restriction to `x⊥`, and
//! the sampling test for direction-independent spectra.
//!
//! Everything here works in an orthonormal frame, where the Jacobi operator
//! and its matrix of `g(J(x) y, z)` coincide.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_core::CurvatureTensor;

/// Default number of seeded random directions.
pub const DEFAULT_SAMPLES: usize = 64;

/// Default relative gap below which neighbouring eigenvalues merge.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-3;

fn require_orthonormal(a: &CurvatureTensor) -> Result<()> {
    if a.metric().is_identity() {
        Ok(())
    } else {
        Err(Error::NotOrthonormalFrame)
    }
}

fn require_len(x: &DVector<f64>, m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: m,
            found: x.len(),
        });
    }
    Ok(())
}

/// Matrix of `J_A(x)`: entry `(z, y)` is `A(e_y, x, x, e_z)`.
pub fn jacobi_operator(a: &CurvatureTensor, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    require_orthonormal(a)?;
    let m = a.dim();
    require_len(x, m)?;
    let mut out = DMatrix::zeros(m, m);
    for y in 0..m {
        for j in 0..m {
            if x[j] == 0.0 {
                continue;
            }
            for k in 0..m {
                let w = x[j] * x[k];
                if w == 0.0 {
                    continue;
                }
                for z in 0..m {
                    out[(z, y)] += w * a.get(y, j, k, z);
                }
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis of `x⊥` (columns), from the Householder reflection that
/// maps `x` to a multiple of `e₀`.
pub fn complement_basis(x: &DVector<f64>) -> DMatrix<f64> {
    let m = x.len();
    let mut v = x.clone();
    let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * x.norm();
    let vv = v.dot(&v);
    let h = DMatrix::identity(m, m) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, m - 1).into_owned()
}

/// `J̃_A(x)`: the Jacobi operator restricted to `x⊥`, for unit `x`.
pub fn reduced_jacobi(a: &CurvatureTensor, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    require_orthonormal(a)?;
    require_len(x, a.dim())?;
    let norm = x.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotUnit { norm });
    }
    let j = jacobi_operator(a, x)?;
    let q = complement_basis(x);
    Ok(q.transpose() * j * q)
}

/// All eigenvalues of a self-adjoint matrix, ascending.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "square matrix",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let residual = (m - m.transpose()).amax();
    if residual > 1e-8 * m.amax().max(1.0) {
        return Err(Error::NotSelfAdjoint { residual });
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Mean of the member eigenvalues.
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    /// Ascending by value.
    pub clusters: Vec<Cluster>,
    /// Largest `max - min` within a single cluster.
    pub spread: f64,
    /// Dimension `m` of the space the reduced operator came from.
    pub source_dim: usize,
}

impl SpectralProfile {
    pub fn multiplicities(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.multiplicity).collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }
}

/// Groups ascending eigenvalues: neighbours merge when their gap is at most
/// `cluster_tol · max(1, max |λ|)`.
pub fn cluster_eigenvalues(sorted: &[f64], cluster_tol: f64) -> SpectralProfile {
    let scale = sorted.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let threshold = cluster_tol * scale;
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &v in sorted {
        match groups.last_mut() {
            Some(g) if v - g[g.len() - 1] <= threshold => g.push(v),
            _ => groups.push(vec![v]),
        }
    }
    let spread = groups.iter().map(|g| g[g.len() - 1] - g[0]).fold(0.0_f64, f64::max);
    SpectralProfile {
        clusters: groups
            .iter()
            .map(|g| Cluster {
                value: g.iter().sum::<f64>() / g.len() as f64,
                multiplicity: g.len(),
            })
            .collect(),
        spread,
        source_dim: sorted.len() + 1,
    }
}

/// Eigenvalue clusters of a self-adjoint (reduced) operator.
pub fn spectral_profile(m: &DMatrix<f64>, cluster_tol: f64) -> Result<SpectralProfile> {
    if cluster_tol.is_nan() || cluster_tol < 0.0 {
        return Err(Error::param("cluster_tol", "must be non-negative"));
    }
    Ok(cluster_eigenvalues(&sorted_eigenvalues(m)?, cluster_tol))
}

/// Number of structured directions in dimension `m`: `e_i` and `(e_i ± e_j)/√2`.
pub fn structured_direction_count(m: usize) -> usize {
    m + m * (m - 1)
}

/// Unit directions: the structured set followed by `random` seeded Gaussian
/// directions. Direction `k` of the random part depends only on `(seed, k)`.
pub fn sample_directions(m: usize, random: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(structured_direction_count(m) + random);
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        out.push(e);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..m {
        for j in (i + 1)..m {
            for s in [1.0, -1.0] {
                let mut e = DVector::zeros(m);
                e[i] = r;
                e[j] = s * r;
                out.push(e);
            }
        }
    }
    out.extend((0..random).map(|k| random_direction(m, seed, k as u64)));
    out
}

fn random_direction(m: usize, seed: u64, index: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let v = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let n: f64 = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// `max |Tr J_A(x)|` over the structured directions and `samples` seeded
/// random ones. For a general tensor this is `max |ρ(x, x)|`.
pub fn trace_check(a: &CurvatureTensor, samples: usize, seed: u64) -> Result<f64> {
    let framed = a.to_orthonormal();
    let dirs = sample_directions(framed.dim(), samples, seed);
    let traces: Result<Vec<f64>> = dirs
        .par_iter()
        .map(|x| Ok(jacobi_operator(&framed, x)?.trace().abs()))
        .collect();
    Ok(traces?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OssermanConfig {
    pub samples: usize,
    pub seed: u64,
    pub spec_tol: f64,
    pub cluster_tol: f64,
    pub keep_spectra: bool,
}

impl Default for OssermanConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            spec_tol: 1e-6,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            keep_spectra: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OssermanReport {
    pub is_constant: bool,
    /// Max L∞ distance between the sorted reduced spectra of any two samples.
    pub max_profile_distance: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub spec_tol: f64,
    /// Elementwise median of the sorted spectra over the structured directions.
    pub consensus: Vec<f64>,
    /// Clustering of `consensus`.
    pub profile: SpectralProfile,
    /// `max |Tr J̃(x)|` over the samples.
    pub max_abs_trace: f64,
    /// Per-direction sorted spectra, structured directions first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectra: Option<Vec<Vec<f64>>>,
}

/// Sorted reduced spectra for each direction, in direction order.
pub fn reduced_spectra(a: &CurvatureTensor, dirs: &[DVector<f64>]) -> Result<Vec<Vec<f64>>> {
    let framed = a.to_orthonormal();
    dirs.par_iter()
        .map(|x| sorted_eigenvalues(&reduced_jacobi(&framed, x)?))
        .collect()
}

/// Max over eigenvalue index of the range across samples, i.e. the max
/// pairwise L∞ distance between sorted spectra.
pub fn max_pairwise_distance(spectra: &[Vec<f64>]) -> f64 {
    let Some(first) = spectra.first() else {
        return 0.0;
    };
    (0..first.len())
        .map(|k| {
            let (lo, hi) = spectra.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s[k]), hi.max(s[k]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

fn elementwise_median(spectra: &[Vec<f64>]) -> Vec<f64> {
    let len = spectra[0].len();
    (0..len)
        .map(|k| {
            let mut col: Vec<f64> = spectra.iter().map(|s| s[k]).collect();
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

/// Samples unit directions and decides whether the reduced Jacobi spectrum
/// of `a` is direction-independent to within `spec_tol`.
pub fn osserman_test(a: &CurvatureTensor, config: &OssermanConfig) -> Result<OssermanReport> {
    if config.samples < 2 {
        return Err(Error::param(
            "samples",
            format!("need at least 2, got {}", config.samples),
        ));
    }
    let m = a.dim();
    let dirs = sample_directions(m, config.samples, config.seed);
    let spectra = reduced_spectra(a, &dirs)?;
    let distance = max_pairwise_distance(&spectra);
    let structured = structured_direction_count(m);
    let consensus = elementwise_median(&spectra[..structured]);
    let profile = cluster_eigenvalues(&consensus, config.cluster_tol);
    let max_abs_trace = spectra.iter().map(|s| s.iter().sum::<f64>().abs()).fold(0.0, f64::max);
    Ok(OssermanReport {
        is_constant: distance <= config.spec_tol,
        max_profile_distance: distance,
        sample_count: spectra.len(),
        seed: config.seed,
        spec_tol: config.spec_tol,
        consensus,
        profile,
        max_abs_trace,
        spectra: config.keep_spectra.then_some(spectra),
    })
}
