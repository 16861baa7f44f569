//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`) so the lines
//! show up in ordinary `cargo test` output.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use weylscope::chart_geometry::{
    conformal_rescale, covariant_derivative_endo, local_curvature, riemann_at, ExpLinear, MetricChart, ScalarField,
    DEFAULT_FD_STEP,
};
use weylscope::classifier::{
    analyze_chart_point, classify_point, parity_consistency, recover_phi, ClassifierConfig, ComplexModelType,
    ParityWarning, PipelineConfig, VerdictKind,
};
use weylscope::cli_report::{cmd_analyze, AnalysisConfig, OutputFormat};
use weylscope::curvature_algebra::{a_phi, complex_space_form_act, r0, random_act, weyl_decompose};
use weylscope::models::{
    complex_hyperbolic_chart, flat_chart, fubini_study_chart, hyperbolic_chart, perturbed_flat_chart, sphere_chart,
    standard_phi, ModelSpec,
};
use weylscope::spectral::{osserman_test, trace_check, Cluster, OssermanConfig, SpectralProfile};
use weylscope::{HermitianStructure, InnerProduct, SkewAdjointEndo, Tier};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Spread of the reduced Weyl spectrum at the origin of
/// `perturbed_flat(m=6, ε=0.1, seed=42)` with analytic derivatives, recorded
/// from the first run.
const PERTURBED_SPREAD: f64 = 0.04328341833328193;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fd(chart: MetricChart) -> MetricChart {
    chart.with_finite_differences(DEFAULT_FD_STEP).expect("valid step")
}

/// Each chart in analytic and finite-difference mode.
fn both_modes(chart: MetricChart) -> [MetricChart; 2] {
    [chart.clone(), fd(chart)]
}

fn tol(chart: &MetricChart, exact: f64, fd: f64) -> f64 {
    match chart.tier() {
        Tier::Exact => exact,
        Tier::FiniteDifference => fd,
    }
}

fn points(chart: &MetricChart, n: usize) -> Vec<Vec<f64>> {
    chart.domain().sample_points(chart.dim(), n, 7)
}

fn all_chart_models() -> Vec<MetricChart> {
    vec![
        flat_chart(4).unwrap(),
        sphere_chart(5, 1.0).unwrap(),
        hyperbolic_chart(5).unwrap(),
        fubini_study_chart(2).unwrap(),
        fubini_study_chart(3).unwrap(),
        fubini_study_chart(4).unwrap(),
        complex_hyperbolic_chart(2).unwrap(),
        perturbed_flat_chart(6, 0.1, 42).unwrap(),
    ]
}

/// Oracle `(R₀)_ijkl = g_jk g_il - g_ik g_jl`, written out independently.
fn oracle_r0(g: &DMatrix<f64>) -> Vec<f64> {
    let m = g.nrows();
    let mut out = Vec::with_capacity(m.pow(4));
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    out.push(g[(j, k)] * g[(i, l)] - g[(i, k)] * g[(j, l)]);
                }
            }
        }
    }
    out
}

/// Oracle `(R_Φ)_ijkl = G_li G_kj - G_ki G_lj - 2 G_ji G_lk` with `G = gΦ`.
fn oracle_rphi(g: &DMatrix<f64>, phi: &DMatrix<f64>) -> Vec<f64> {
    let m = g.nrows();
    let gp = g * phi;
    let mut out = Vec::with_capacity(m.pow(4));
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    out.push(gp[(l, i)] * gp[(k, j)] - gp[(k, i)] * gp[(l, j)] - 2.0 * gp[(j, i)] * gp[(l, k)]);
                }
            }
        }
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_orthogonal(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    a.qr().q()
}

fn c1_trace_free() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for chart in all_chart_models() {
        for chart in both_modes(chart) {
            let t = tol(&chart, 1e-9, 1e-5);
            for u in points(&chart, 3) {
                let w = weyl_decompose(&riemann_at(&chart, &u).map_err(|e| e.to_string())?)
                    .unwrap()
                    .w;
                let tr = trace_check(&w, 100, 11).unwrap();
                ensure(tr <= t, || {
                    format!("{} at {u:?}: |Tr J_W| = {tr:e} > {t:e}", chart.label())
                })?;
                let slot = if chart.tier() == Tier::Exact {
                    &mut worst.0
                } else {
                    &mut worst.1
                };
                *slot = slot.max(tr);
            }
        }
    }
    for m in [4, 6, 8] {
        let g = InnerProduct::identity(m);
        let tensors = [
            complex_space_form_act(1.0, 1.0, &standard_phi(m).unwrap(), &g)
                .unwrap()
                .tensor,
            random_act(3, m, m).unwrap(),
        ];
        for a in tensors {
            let tr = trace_check(&weyl_decompose(&a).unwrap().w, 100, 11).unwrap();
            ensure(tr <= 1e-9, || format!("algebraic m={m}: |Tr J_W| = {tr:e}"))?;
            worst.0 = worst.0.max(tr);
        }
    }
    Ok(format!(
        "max |Tr J_W| exact {:.1e}, finite-difference {:.1e}",
        worst.0, worst.1
    ))
}

fn c2_conformal_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for base in [
        flat_chart(4).unwrap(),
        sphere_chart(4, 1.0).unwrap(),
        fubini_study_chart(2).unwrap(),
    ] {
        let m = base.dim();
        let alpha: Arc<dyn ScalarField> = Arc::new(ExpLinear::along(m, 0, 0.3));
        for base in both_modes(base) {
            let rescaled = conformal_rescale(&base, alpha.clone()).unwrap();
            let t = tol(&rescaled, 1e-9, 1e-5);
            for u in points(&base, 3) {
                let w1 = weyl_decompose(&riemann_at(&base, &u).unwrap()).unwrap().w.raise_last();
                let w2 = weyl_decompose(&riemann_at(&rescaled, &u).unwrap())
                    .unwrap()
                    .w
                    .raise_last();
                let d = max_diff(&w1, &w2);
                ensure(d <= t, || {
                    format!("{} at {u:?}: Δ(1,3) Weyl = {d:e} > {t:e}", base.label())
                })?;
                if rescaled.tier() == Tier::FiniteDifference {
                    worst = worst.max(d);
                }
            }
        }
    }
    Ok(format!("max finite-difference Δ(1,3) Weyl {worst:.1e} (tol 1e-5)"))
}

fn c3_cp4() -> Outcome {
    // Independent oracle: R₀ + R_Φ is Einstein with ρ = (m+2)g, so
    // W = R_Φ + μR₀ with μ = 1 + m(m+2)/((m-1)(m-2)) - 2(m+2)/(m-2).
    let m: f64 = 8.0;
    let mu = 1.0 + m * (m + 2.0) / ((m - 1.0) * (m - 2.0)) - 2.0 * (m + 2.0) / (m - 2.0);
    let (bulk, simple) = (mu, mu + 3.0);
    ensure(
        (bulk + 3.0 / 7.0).abs() < 1e-14 && (simple - 18.0 / 7.0).abs() < 1e-14,
        || "oracle values".into(),
    )?;
    let mut detail = String::new();
    for chart in both_modes(fubini_study_chart(4).unwrap()) {
        for u in points(&chart, 3) {
            let a = analyze_chart_point(&chart, &u, &PipelineConfig::default()).map_err(|e| e.to_string())?;
            let v = &a.verdict;
            ensure(v.kind == VerdictKind::ConformallyComplexSpaceForm, || {
                format!("verdict {}", v.kind)
            })?;
            let (l0, l1) = (v.lambda0.unwrap(), v.lambda1.unwrap());
            ensure(l1 > 0.0 && v.model_type == Some(ComplexModelType::Projective), || {
                format!("λ1 = {l1}")
            })?;
            let ratio = l0 / l1;
            ensure((ratio + 3.0 / 7.0).abs() <= 1e-4, || format!("λ0/λ1 = {ratio}"))?;
            let p = &v.diagnostics.profile;
            ensure(p.multiplicities() == vec![6, 1], || {
                format!("multiplicities {:?}", p.multiplicities())
            })?;
            let t = tol(&chart, 1e-9, 1e-4);
            ensure(
                (p.clusters[0].value - bulk * l1).abs() <= t && (p.clusters[1].value - simple * l1).abs() <= t,
                || format!("cluster values {:?}", p.clusters),
            )?;
            detail = format!(
                "λ0/λ1 = {ratio:.9}, clusters {{{:.6} x6, {:.6} x1}}",
                p.clusters[0].value, p.clusters[1].value
            );
        }
    }
    Ok(detail)
}

fn c4_dual() -> Outcome {
    let mut out = Vec::new();
    for (n, caveat) in [(2usize, true), (4, false)] {
        for chart in both_modes(complex_hyperbolic_chart(n).unwrap()) {
            for u in points(&chart, 2) {
                let v = analyze_chart_point(&chart, &u, &PipelineConfig::default())
                    .map_err(|e| e.to_string())?
                    .verdict;
                ensure(v.kind == VerdictKind::ConformallyComplexSpaceForm, || {
                    format!("n={n}: verdict {}", v.kind)
                })?;
                ensure(v.lambda1.unwrap() < 0.0, || format!("n={n}: λ1 = {:?}", v.lambda1))?;
                ensure(v.model_type == Some(ComplexModelType::HyperbolicDual), || {
                    "model type".into()
                })?;
                ensure(v.diagnostics.below_rigidity_dimension == caveat, || {
                    format!("n={n}: caveat flag")
                })?;
            }
        }
        out.push(format!("m={}: λ1 < 0, caveat {}", 2 * n, caveat));
    }
    Ok(out.join("; "))
}

fn c5_space_forms_flat() -> Outcome {
    let mut worst = 0.0f64;
    for chart in [
        sphere_chart(4, 1.0).unwrap(),
        sphere_chart(5, 1.0).unwrap(),
        hyperbolic_chart(4).unwrap(),
        hyperbolic_chart(5).unwrap(),
    ] {
        for chart in both_modes(chart) {
            let t = tol(&chart, 1e-9, 1e-5);
            for u in points(&chart, 5) {
                let a = analyze_chart_point(&chart, &u, &PipelineConfig::default()).map_err(|e| e.to_string())?;
                let wn = a.verdict.diagnostics.weyl_norm;
                ensure(wn <= t, || format!("{} at {u:?}: ‖W‖∞ = {wn:e}", chart.label()))?;
                ensure(a.verdict.kind == VerdictKind::ConformallyFlat, || {
                    format!("verdict {}", a.verdict.kind)
                })?;
                if chart.tier() == Tier::FiniteDifference {
                    worst = worst.max(wn);
                }
            }
        }
    }
    Ok(format!("max finite-difference ‖W‖∞ {worst:.1e}"))
}

fn c6_osserman_constancy() -> Outcome {
    let cfg = OssermanConfig {
        samples: 64,
        seed: 5,
        ..OssermanConfig::default()
    };
    let (mut alg, mut chart_worst) = (0.0f64, 0.0f64);
    for n in [2usize, 3, 4] {
        let m = 2 * n;
        let g = InnerProduct::identity(m);
        let a = complex_space_form_act(1.0, 1.0, &standard_phi(m).unwrap(), &g)
            .unwrap()
            .tensor;
        let d = osserman_test(&weyl_decompose(&a).unwrap().w, &cfg)
            .unwrap()
            .max_profile_distance;
        ensure(d <= 1e-10, || format!("algebraic CP{n}: {d:e}"))?;
        alg = alg.max(d);
        for chart in both_modes(fubini_study_chart(n).unwrap()) {
            let t = tol(&chart, 1e-10, 1e-4);
            for u in points(&chart, 2) {
                let w = weyl_decompose(&riemann_at(&chart, &u).unwrap()).unwrap().w;
                let d = osserman_test(&w, &cfg).unwrap().max_profile_distance;
                ensure(d <= t, || format!("{} at {u:?}: {d:e} > {t:e}", chart.label()))?;
                chart_worst = chart_worst.max(d);
            }
        }
    }
    Ok(format!(
        "max spectral distance algebraic {alg:.1e}, chart {chart_worst:.1e}"
    ))
}

fn c7_negative_control() -> Outcome {
    let origin = vec![0.0; 6];
    let mut detail = Vec::new();
    for (chart, pin_tol) in [
        (perturbed_flat_chart(6, 0.1, 42).unwrap(), 1e-9),
        (fd(perturbed_flat_chart(6, 0.1, 42).unwrap()), 1e-6),
    ] {
        let a = analyze_chart_point(&chart, &origin, &PipelineConfig::default()).map_err(|e| e.to_string())?;
        let spread = a.osserman.max_profile_distance;
        ensure(a.verdict.kind == VerdictKind::NotConformallyOsserman, || {
            format!("verdict {}", a.verdict.kind)
        })?;
        ensure(spread > 10.0 * a.osserman.spec_tol, || format!("spread {spread:e}"))?;
        ensure((spread - PERTURBED_SPREAD).abs() <= pin_tol, || {
            format!("spread {spread:?} drifted from pinned {PERTURBED_SPREAD:?}")
        })?;
        detail.push(format!(
            "{:?} spread {spread:.6e} (spec_tol {:e})",
            chart.tier(),
            a.osserman.spec_tol
        ));
    }
    Ok(detail.join("; "))
}

fn c8_phi_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 4];
    for m in [6usize, 8, 10] {
        let g = InnerProduct::identity(m);
        let lambda0 = -3.0 / (m as f64 - 1.0);
        for _ in 0..20 {
            let q = random_orthogonal(m, &mut rng);
            let phi = &q * standard_phi(m).unwrap().matrix() * q.transpose();
            let w = &r0(&g).scaled(lambda0) + &a_phi(&SkewAdjointEndo::new(phi.clone(), &g).unwrap(), &g).unwrap();
            let rep = osserman_test(&w, &OssermanConfig::default()).unwrap();
            let v = classify_point(&w, &rep.profile, &rep, m, &ClassifierConfig::for_tier(Tier::Exact)).unwrap();
            ensure(v.kind == VerdictKind::ConformallyComplexSpaceForm, || {
                format!("m={m}: verdict {}", v.kind)
            })?;
            let (l0, l1) = (v.lambda0.unwrap(), v.lambda1.unwrap());
            let b = (&w - &r0(&g).scaled(l0)).scaled(1.0 / l1);
            let hat = recover_phi(&b, 1e-8).map_err(|e| format!("m={m}: {e}"))?;
            let h = hat.matrix();
            let square = (h * h + DMatrix::identity(m, m)).amax();
            let skew = (h + h.transpose()).amax();
            let dist = (h - &phi).amax().min((h + &phi).amax());
            let rebuilt = &r0(&g).scaled(l0) + &a_phi(&hat.as_skew(), &g).unwrap().scaled(l1);
            let recon = w.distance(&rebuilt) / w.max_abs();
            ensure(square <= 1e-8 && skew <= 1e-8 && dist <= 1e-7 && recon <= 1e-8, || {
                format!("m={m}: Φ²+I {square:e}, skew {skew:e}, dist {dist:e}, recon {recon:e}")
            })?;
            for (slot, x) in worst.iter_mut().zip([square, skew, dist, recon]) {
                *slot = slot.max(x);
            }
        }
    }
    Ok(format!(
        "60 conjugates: ‖Φ̂²+I‖ {:.1e}, skew {:.1e}, ±distance {:.1e}, reconstruction {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn c9_bianchi() -> Outcome {
    let mut models = all_chart_models();
    models.push(complex_hyperbolic_chart(4).unwrap());
    let mut worst = (0.0f64, 0.0f64);
    for chart in models {
        for chart in both_modes(chart) {
            let t = tol(&chart, 1e-7, 1e-4);
            for u in points(&chart, 5) {
                let r = local_curvature(&chart, &u, true).map_err(|e| e.to_string())?;
                let res = r.nabla_riemann.unwrap().bianchi_residual();
                ensure(res <= t, || format!("{} at {u:?}: {res:e}", chart.label()))?;
                let slot = if chart.tier() == Tier::Exact {
                    &mut worst.0
                } else {
                    &mut worst.1
                };
                *slot = slot.max(res);
            }
        }
    }
    Ok(format!(
        "max residual analytic {:.1e}, finite-difference {:.1e}",
        worst.0, worst.1
    ))
}

fn c10_kahler() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for n in [2usize, 3, 4] {
        let j = standard_phi(2 * n).unwrap().matrix().clone();
        for chart in both_modes(fubini_study_chart(n).unwrap()) {
            let t = tol(&chart, 1e-6, 1e-3);
            for u in points(&chart, 3) {
                let d = covariant_derivative_endo(&chart, &|_: &[f64]| j.clone(), &u).map_err(|e| e.to_string())?;
                let (nab, anti) = (d.max_abs(), d.anticommutator_residual());
                ensure(nab <= t && anti <= t, || {
                    format!("{} at {u:?}: ‖∇Φ‖ {nab:e}, anticommutator {anti:e}", chart.label())
                })?;
                worst = (worst.0.max(nab), worst.1.max(anti));
            }
        }
    }
    Ok(format!("max ‖∇Φ‖∞ {:.1e}, anticommutator {:.1e}", worst.0, worst.1))
}

fn c11_parity() -> Outcome {
    let m = 10;
    let g = InnerProduct::identity(m);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (l0, l1) in [(1.0, 1.0), (-1.0, -1.0), (0.3, 2.0), (2.0, -0.5)] {
        let q = random_orthogonal(m, &mut rng);
        let phi = HermitianStructure::new(&q * standard_phi(m).unwrap().matrix() * q.transpose(), &g).unwrap();
        let a = complex_space_form_act(l0, l1, &phi, &g).unwrap().tensor;
        let w = weyl_decompose(&a).unwrap().w;
        let rep = osserman_test(&w, &OssermanConfig::default()).unwrap();
        let mut mults = rep.profile.multiplicities();
        mults.sort_unstable();
        ensure(mults == vec![1, 8], || {
            format!("(λ0, λ1) = ({l0}, {l1}): multiplicities {mults:?}")
        })?;
        let v = classify_point(&w, &rep.profile, &rep, m, &ClassifierConfig::for_tier(Tier::Exact)).unwrap();
        ensure(v.diagnostics.parity_warnings.is_empty(), || {
            "unexpected parity warning".into()
        })?;
    }
    for m in [5usize, 7, 9] {
        let g = InnerProduct::identity(m);
        let w = weyl_decompose(&r0(&g).scaled(1.7)).unwrap().w;
        let rep = osserman_test(&w, &OssermanConfig::default()).unwrap();
        ensure(
            rep.profile.clusters.len() == 1 && rep.profile.clusters[0].value.abs() < 1e-12,
            || format!("m={m}: profile {:?}", rep.profile),
        )?;
    }
    for chart in [sphere_chart(5, 1.0).unwrap(), hyperbolic_chart(7).unwrap()] {
        let u = points(&chart, 1).remove(0);
        let a = analyze_chart_point(&chart, &u, &PipelineConfig::default()).unwrap();
        ensure(a.osserman.profile.clusters.len() == 1, || {
            format!("{}: clusters", chart.label())
        })?;
    }
    let profile = |clusters: Vec<(f64, usize)>| SpectralProfile {
        source_dim: clusters.iter().map(|c| c.1).sum::<usize>() + 1,
        clusters: clusters
            .into_iter()
            .map(|(value, multiplicity)| Cluster { value, multiplicity })
            .collect(),
        spread: 0.0,
    };
    let odd = parity_consistency(7, &profile(vec![(-1.0, 3), (1.0, 3)]), VerdictKind::OssermanOther);
    ensure(matches!(odd.as_slice(), [ParityWarning::OddDimension { .. }]), || {
        format!("odd: {odd:?}")
    })?;
    let two_mod_four = parity_consistency(10, &profile(vec![(-1.0, 5), (1.25, 4)]), VerdictKind::OssermanOther);
    ensure(
        matches!(two_mod_four.as_slice(), [ParityWarning::TwoModFour { .. }]),
        || format!("{two_mod_four:?}"),
    )?;
    let three = parity_consistency(
        10,
        &profile(vec![(-1.0, 3), (0.0, 3), (1.0, 3)]),
        VerdictKind::OssermanOther,
    );
    ensure(three.len() == 1, || format!("{three:?}"))?;
    Ok("m=10 fixtures (1,8); odd-m flat fixtures one zero cluster; corrupted profiles warn".into())
}

fn c12_oracle_equivalence() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let charts: Vec<(MetricChart, f64, Option<DMatrix<f64>>)> = vec![
        (sphere_chart(4, 1.0).unwrap(), 1.0, None),
        (sphere_chart(5, 1.0).unwrap(), 1.0, None),
        (hyperbolic_chart(4).unwrap(), -1.0, None),
        (
            fubini_study_chart(2).unwrap(),
            1.0,
            Some(standard_phi(4).unwrap().matrix().clone()),
        ),
        (
            fubini_study_chart(4).unwrap(),
            1.0,
            Some(standard_phi(8).unwrap().matrix().clone()),
        ),
        (
            complex_hyperbolic_chart(3).unwrap(),
            -1.0,
            Some(standard_phi(6).unwrap().matrix().clone()),
        ),
    ];
    for (chart, sign, phi) in charts {
        for chart in both_modes(chart) {
            let t = tol(&chart, 1e-9, 1e-5);
            for u in points(&chart, 3) {
                let r = riemann_at(&chart, &u).unwrap();
                let g = r.metric().matrix().clone();
                let mut oracle = oracle_r0(&g);
                if let Some(j) = &phi {
                    for (o, x) in oracle.iter_mut().zip(oracle_rphi(&g, j)) {
                        *o += x;
                    }
                }
                oracle.iter_mut().for_each(|o| *o *= sign);
                let d = max_diff(r.components(), &oracle);
                ensure(d <= t, || format!("{} at {u:?}: {d:e} > {t:e}", chart.label()))?;
                let slot = if chart.tier() == Tier::Exact {
                    &mut worst.0
                } else {
                    &mut worst.1
                };
                *slot = slot.max(d);
            }
        }
    }
    Ok(format!(
        "max componentwise error analytic {:.1e}, finite-difference {:.1e}",
        worst.0, worst.1
    ))
}

fn c13_determinism() -> Outcome {
    let mut config = AnalysisConfig::new(ModelSpec::FubiniStudy { n: 3 });
    config.seed = 99;
    config.points = fubini_study_chart(3).unwrap().domain().sample_points(6, 6, 3);
    config.fd_step = Some(1e-4);
    let render = |threads: usize, format: OutputFormat| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| cmd_analyze(&config)).map_err(|e| e.to_string())?;
        Ok(report.render(format))
    };
    for format in [OutputFormat::Json, OutputFormat::Text] {
        let a = render(4, format)?;
        ensure(a == render(4, format)?, || "two parallel runs differ".into())?;
        ensure(a == render(1, format)?, || "parallel and serial runs differ".into())?;
    }
    let bin = env!("CARGO_BIN_EXE_weylscope");
    let run = |threads: &str| {
        Command::new(bin)
            .args([
                "analyze",
                "--model",
                "complex_hyperbolic,n=2",
                "--seed",
                "5",
                "--format",
                "json",
            ])
            .args(["--point", "0.1,0.2,-0.1,0.05", "--point", "0.3,-0.2,0.1,0.0"])
            .env("WEYLSCOPE_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b, c) = (run("4")?, run("4")?, run("1")?);
    ensure(a.status.success() && !a.stdout.is_empty(), || {
        format!("binary failed: {a:?}")
    })?;
    ensure(a.stdout == b.stdout && a.stdout == c.stdout, || {
        "binary outputs differ".into()
    })?;
    Ok("library reports (1 and 4 threads, json and text) and binary output byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("trace-free conformal Jacobi operator", c1_trace_free),
        ("conformal invariance of the (1,3) Weyl tensor", c2_conformal_invariance),
        ("CP4 classification", c3_cp4),
        ("dual complex projective charts", c4_dual),
        ("conformal flatness of space forms", c5_space_forms_flat),
        ("Osserman constancy on CPn", c6_osserman_constancy),
        ("negative control: perturbed flat", c7_negative_control),
        ("Φ recovery roundtrip", c8_phi_roundtrip),
        ("second Bianchi residual", c9_bianchi),
        ("Kähler check on Fubini-Study", c10_kahler),
        ("parity consistency", c11_parity),
        ("chart vs algebraic oracle", c12_oracle_equivalence),
        ("determinism", c13_determinism),
    ];
    let mut failed = 0;
    for (idx, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.1}s)", idx + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail} ({secs:.1}s)", idx + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
