use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use weylscope::chart_geometry::{conformal_rescale, ExpLinear, ScalarField};
use weylscope::classifier::{analyze_chart_point, recover_phi, PipelineConfig, VerdictKind};
use weylscope::curvature_algebra::{a_phi, random_act, ricci_scalar, weyl_decompose, SymmetryCheck};
use weylscope::models::{fubini_study_chart, standard_phi};
use weylscope::spectral::{cluster_eigenvalues, jacobi_operator, reduced_jacobi, sorted_eigenvalues};
use weylscope::tensor_core::transform_tensor;
use weylscope::{InnerProduct, SkewAdjointEndo};

fn orthogonal(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng)).qr().q()
}

fn unit(v: Vec<f64>) -> Option<DVector<f64>> {
    let x = DVector::from_vec(v);
    let n = x.norm();
    (n > 1e-3).then(|| x / n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_acts_have_curvature_symmetries(seed in any::<u64>(), m in 3usize..=7) {
        let a = random_act(seed, m, m).unwrap();
        prop_assert!(a.symmetry_residual() <= 1e-12 * a.max_abs().max(1.0));
    }

    #[test]
    fn weyl_is_trace_free_and_reconstructs(seed in any::<u64>(), m in 3usize..=7) {
        let a = random_act(seed, m, m).unwrap();
        let d = weyl_decompose(&a).unwrap();
        let scale = a.max_abs().max(1.0);
        let ricci_w = ricci_scalar(&d.w, SymmetryCheck::default()).unwrap();
        prop_assert!(ricci_w.rho.amax() <= 1e-11 * scale);
        prop_assert!(d.reconstruction_residual() <= 1e-11 * scale);
    }

    #[test]
    fn decomposition_commutes_with_orthogonal_change(seed in any::<u64>(), m in 4usize..=6) {
        let a = random_act(seed, m, m).unwrap();
        let q = orthogonal(m, seed ^ 0x9e37);
        let w_then_q = transform_tensor(&weyl_decompose(&a).unwrap().w, &q).unwrap();
        let q_then_w = weyl_decompose(&transform_tensor(&a, &q).unwrap()).unwrap().w;
        prop_assert!(w_then_q.distance(&q_then_w) <= 1e-11 * a.max_abs().max(1.0));
    }

    #[test]
    fn jacobi_is_self_adjoint_and_kills_its_direction(
        seed in any::<u64>(),
        x in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let Some(x) = unit(x) else { return Ok(()) };
        let w = weyl_decompose(&random_act(seed, 5, 5).unwrap()).unwrap().w;
        let j = jacobi_operator(&w, &x).unwrap();
        let scale = w.max_abs().max(1.0);
        prop_assert!((&j - j.transpose()).amax() <= 1e-12 * scale);
        prop_assert!((&j * &x).amax() <= 1e-12 * scale);
        let trace: f64 = sorted_eigenvalues(&reduced_jacobi(&w, &x).unwrap()).unwrap().iter().sum();
        prop_assert!(trace.abs() <= 1e-11 * scale);
    }

    #[test]
    fn spectrum_scales_linearly(
        seed in any::<u64>(),
        c in -3.0f64..3.0,
        x in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let Some(x) = unit(x) else { return Ok(()) };
        let w = weyl_decompose(&random_act(seed, 6, 6).unwrap()).unwrap().w;
        let base = sorted_eigenvalues(&reduced_jacobi(&w, &x).unwrap()).unwrap();
        let scaled = sorted_eigenvalues(&reduced_jacobi(&w.scaled(c), &x).unwrap()).unwrap();
        let mut expected: Vec<f64> = base.iter().map(|v| c * v).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in scaled.iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-11 * w.max_abs().max(1.0) * c.abs().max(1.0));
        }
    }

    #[test]
    fn clusters_partition_the_spectrum(values in prop::collection::vec(-5.0f64..5.0, 1..12), tol in 1e-6f64..0.5) {
        let mut v = values;
        v.sort_by(f64::total_cmp);
        let p = cluster_eigenvalues(&v, tol);
        prop_assert_eq!(p.total_multiplicity(), v.len());
        for pair in p.clusters.windows(2) {
            prop_assert!(pair[0].value < pair[1].value);
        }
    }

    #[test]
    fn phi_recovery_roundtrip(seed in any::<u64>(), half in 2usize..=4) {
        let m = 2 * half;
        let g = InnerProduct::identity(m);
        let q = orthogonal(m, seed);
        let phi = &q * standard_phi(m).unwrap().matrix() * q.transpose();
        let b = a_phi(&SkewAdjointEndo::new(phi.clone(), &g).unwrap(), &g).unwrap();
        let hat = recover_phi(&b, 1e-8).unwrap();
        prop_assert!(hat.distance_up_to_sign(&phi) <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// `W` as a (1,3) tensor is conformally invariant, so the verdict and
    /// `λ₀/λ₁` survive a rescale while the eigenvalues pick up `1/α`.
    #[test]
    fn conformal_rescale_preserves_verdict(
        coeffs in prop::collection::vec(-0.5f64..0.5, 4),
        u in prop::collection::vec(-0.4f64..0.4, 4),
    ) {
        let chart = fubini_study_chart(2).unwrap();
        let alpha = ExpLinear { coefficients: coeffs };
        let a_u = alpha.value(&u);
        let rescaled = conformal_rescale(&chart, Arc::new(alpha)).unwrap();
        let cfg = PipelineConfig::default();
        let before = analyze_chart_point(&chart, &u, &cfg).unwrap().verdict;
        let after = analyze_chart_point(&rescaled, &u, &cfg).unwrap().verdict;
        prop_assert_eq!(before.kind, VerdictKind::ConformallyComplexSpaceForm);
        prop_assert_eq!(after.kind, before.kind);
        let (l0, l1) = (before.lambda0.unwrap(), before.lambda1.unwrap());
        let (r0, r1) = (after.lambda0.unwrap(), after.lambda1.unwrap());
        prop_assert!((r0 - l0 / a_u).abs() <= 1e-9);
        prop_assert!((r1 - l1 / a_u).abs() <= 1e-9);
    }
}
