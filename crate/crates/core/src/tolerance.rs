//! Tolerance tiers. Quantities computed from exact algebra or analytic chart
//! derivatives use [`Tier::Exact`]; anything built on finite differences uses
//! [`Tier::FiniteDifference`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Exact,
    FiniteDifference,
}

impl Tier {
    /// Osserman constancy: max L∞ distance between sorted reduced spectra.
    pub fn spec_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-6,
            Tier::FiniteDifference => 1e-4,
        }
    }

    /// `|Tr J_W(x)|` for unit `x`.
    pub fn trace_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-9,
            Tier::FiniteDifference => 1e-5,
        }
    }

    /// Second Bianchi identity residual.
    pub fn bianchi_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-7,
            Tier::FiniteDifference => 1e-4,
        }
    }

    /// `‖W‖∞` below which a one-cluster point counts as conformally flat.
    pub fn flat_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-9,
            Tier::FiniteDifference => 1e-5,
        }
    }

    /// Chart curvature against its closed-form model tensor.
    pub fn oracle_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-9,
            Tier::FiniteDifference => 1e-5,
        }
    }

    /// Conformal invariance of the (1,3) Weyl tensor.
    pub fn invariance_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-9,
            Tier::FiniteDifference => 1e-5,
        }
    }

    /// Validation residual of a recovered Hermitian structure, relative to
    /// `max(1, ‖B‖∞)`.
    pub fn recovery_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-8,
            Tier::FiniteDifference => 1e-3,
        }
    }

    /// `‖∇Φ‖∞` and the anticommutator identity.
    pub fn parallel_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-6,
            Tier::FiniteDifference => 1e-3,
        }
    }

    /// Curvature symmetry residual relative to `max(1, ‖A‖∞)`.
    pub fn symmetry_tol(self) -> f64 {
        match self {
            Tier::Exact => 1e-10,
            Tier::FiniteDifference => 1e-6,
        }
    }
}
