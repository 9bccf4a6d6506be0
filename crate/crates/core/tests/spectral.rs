use phytoagg::operators::l1_norm;
use phytoagg::spectral::SpectralBound;
use phytoagg::{Classification, CoefficientSet, Grading, Mesh, SpectralContext, StateVector};
use proptest::prelude::*;

fn context(
    x0: f64,
    x1: f64,
    g: &str,
    w: &str,
    q: &str,
    n: usize,
    grading: Grading,
) -> SpectralContext {
    let cs = CoefficientSet::parse(x0, x1, g, w, q, "0").unwrap();
    let mesh = Mesh::new(x0, x1, n, grading).unwrap();
    SpectralContext::new(&cs, &mesh, 4).unwrap()
}

fn baseline(scale_g: f64, scale_q: f64) -> SpectralContext {
    let cs = CoefficientSet::parse(
        1.0,
        1000.0,
        "x*(1001 - x)/10",
        "(x - 1)^1.17/1000",
        "ln(x)",
        "0",
    )
    .unwrap()
    .with_scales(scale_g, scale_q, 1.0)
    .unwrap();
    let mesh = Mesh::new(1.0, 1000.0, 2000, Grading::Geometric).unwrap();
    SpectralContext::new(&cs, &mesh, 4).unwrap()
}

fn root(ctx: &SpectralContext) -> f64 {
    ctx.find_spectral_bound(ctx.default_root_options())
        .unwrap()
        .root()
        .unwrap()
}

#[test]
fn xi_at_ln4_for_constant_fecundity() {
    // 2 (1 - 1/4) / ln 4 - 1, to 30 digits: 0.0820212806667225555...
    let ctx = context(1.0, 2.0, "1", "0", "2", 100, Grading::Uniform);
    assert!((ctx.xi(4f64.ln()) - 0.082_021_280_666_722_56).abs() < 1e-12);
    assert_eq!(ctx.xi(0.0), 1.0);
}

#[test]
fn unit_fecundity_is_marginal() {
    let ctx = context(1.0, 2.0, "1", "0", "1", 100, Grading::Uniform);
    let r = ctx.classify(1e-9).unwrap();
    assert_eq!(r.classification, Classification::Marginal);
    assert!(r.lambda0.unwrap().abs() < 1e-9);
}

#[test]
fn nonconstant_growth_closed_form() {
    // g = x, w = 0, q = c on [1, e]: Gamma = ln x and
    // xi(l) = c int_1^e x^{-1-l} dx - 1 = c (1 - e^{-l}) / l - 1
    let ctx = context(
        1.0,
        std::f64::consts::E,
        "x",
        "0",
        "3",
        400,
        Grading::Geometric,
    );
    for l in [-4.0, -0.5, 0.3, 2.0, 7.5] {
        let exact = 3.0 * (1.0 - f64::exp(-l)) / l - 1.0;
        assert!((ctx.xi(l) - exact).abs() < 1e-10, "l={l}");
    }
}

#[test]
fn baseline_variants() {
    let cases = [
        (1.0, 1.0, Classification::Stable),
        (0.5, 1.0, Classification::Unstable),
        (1.0, 2.0, Classification::Unstable),
        (1.0, 0.5, Classification::Stable),
    ];
    for (g, q, expected) in cases {
        let r = baseline(g, q).classify(1e-9).unwrap();
        assert_eq!(r.classification, expected, "g x{g}, q x{q}");
        let l0 = r.lambda0.unwrap();
        match expected {
            Classification::Stable => assert!(r.xi_at_zero < -r.tolerance_used && l0 < 0.0),
            _ => assert!(r.xi_at_zero > r.tolerance_used && l0 > 0.0),
        }
        assert_eq!(r.compactness_time, 2.0 * r.gamma_x1);
    }
}

#[test]
fn xi_of_zero_is_linear_in_the_fecundity_scale() {
    let xi = |s: f64| baseline(1.0, s).xi(0.0);
    let (a, b, c) = (xi(0.5), xi(1.0), xi(2.0));
    assert!(a < b && b < c);
    // xi(0) + 1 scales exactly with q
    assert!(((c + 1.0) - 4.0 * (a + 1.0)).abs() < 1e-12);
}

#[test]
fn eigenfunction_properties() {
    let ctx = context(1.0, 2.0, "1", "0", "2", 400, Grading::Uniform);
    let l0 = root(&ctx);
    let ef = ctx.eigenfunction(l0).unwrap();
    // boundary identity g(x0) phi(x0) = K[phi]
    assert!((ef.boundary_flux - ctx.eigen_inflow(&ef)).abs() < 1e-8);
    for (x, v) in ef.nodes.iter().zip(&ef.values) {
        assert!((v / ef.values[0] - (-l0 * (x - 1.0)).exp()).abs() < 1e-9);
    }

    let ctx = baseline(1.0, 1.0);
    let ef = ctx.eigenfunction(root(&ctx)).unwrap();
    assert!(ef.values.iter().all(|&v| v > 0.0));

    // ||phi||_1 re-integrated with an independent rule through the
    // interpolated transit tables
    let ctx = context(
        1.0,
        1000.0,
        "x*(1001 - x)/10",
        "(x - 1)^1.17/1000",
        "ln(x)",
        4000,
        Grading::Uniform,
    );
    let ef = ctx.eigenfunction(root(&ctx)).unwrap();
    let norm = integrate_nodes(&ctx, |x| ctx.eigenfunction_at(&ef, x).unwrap());
    assert!((norm - 1.0).abs() < 1e-6, "{norm}");

    let unit = context(1.0, 2.0, "1", "0", "1", 50, Grading::Uniform);
    let ef = unit.eigenfunction(0.0).unwrap();
    assert!(ef.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

fn integrate_nodes(ctx: &SpectralContext, f: impl Fn(f64) -> f64) -> f64 {
    let rule = phytoagg::quad::GaussLegendre::new(8).unwrap();
    phytoagg::quad::integrate(f, ctx.mesh(), &rule)
}

#[test]
fn resolvent_blows_up_like_one_over_xi() {
    let ctx = context(1.0, 2.0, "1 + x", "0.2", "2 + x", 400, Grading::Uniform);
    let l0 = root(&ctx);
    let phi = StateVector::signed(ctx.mesh().centers().iter().map(|x| x.sin() + 1.5).collect());
    let pts: Vec<(f64, f64)> = (1..=6)
        .map(|k| {
            let d = 10f64.powi(-k);
            let u = ctx.resolvent_apply(l0 + d, &phi).unwrap();
            (d.ln(), l1_norm(ctx.mesh(), &u).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() <= 0.1, "{slope}");
    assert!(ctx.resolvent_apply(l0, &phi).is_err());
}

#[test]
fn resolvent_is_linear() {
    let ctx = context(1.0, 2.0, "1 + x", "0.2", "2 + x", 100, Grading::Uniform);
    let a = StateVector::signed(ctx.mesh().centers().iter().map(|x| x * x).collect());
    let b = StateVector::signed(
        ctx.mesh()
            .centers()
            .iter()
            .map(|x| (3.0 * x).cos())
            .collect(),
    );
    let lambda = 10.0;
    let ra = ctx.resolvent_apply(lambda, &a).unwrap();
    let rb = ctx.resolvent_apply(lambda, &b).unwrap();
    let rab = ctx.resolvent_apply(lambda, &a.axpy(-2.5, &b)).unwrap();
    let diff = rab.axpy(-1.0, &ra.axpy(-2.5, &rb));
    assert!(diff.values().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn no_root_without_fecundity() {
    let ctx = context(
        1.0,
        1000.0,
        "x*(1001 - x)/10",
        "(x - 1)^1.17/1000",
        "0",
        200,
        Grading::Geometric,
    );
    assert_eq!(
        ctx.find_spectral_bound(ctx.default_root_options()).unwrap(),
        SpectralBound::NoRoot
    );
    assert!([-50.0, 0.0, 50.0].iter().all(|&l| ctx.xi(l) == -1.0));
    let r = ctx.classify(1e-9).unwrap();
    assert_eq!(r.classification, Classification::NoRoot);
    assert!(r.note.unwrap().contains("stable"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sets_have_a_unique_decreasing_root(
        a in 0.2f64..3.0, b in 0.0f64..2.0, c in 0.0f64..1.0, d in 0.1f64..4.0, e in 0.0f64..2.0
    ) {
        let g = format!("{a:?} + {b:?}*x");
        let w = format!("{c:?}*x");
        let q = format!("{d:?} + {e:?}*sqrt(x)");
        let ctx = context(1.0, 3.0, &g, &w, &q, 200, Grading::Uniform);
        let l0 = root(&ctx);
        prop_assert!(ctx.xi(l0).abs() < 1e-9);
        let s = 20.0 / ctx.gamma_x1();
        let mut prev = f64::INFINITY;
        for k in 0..=200 {
            let v = ctx.xi(l0 - s + 2.0 * s * k as f64 / 200.0);
            prop_assert!(v < prev);
            prev = v;
        }
        let r = ctx.classify(1e-9).unwrap();
        prop_assert_eq!(r.classification == Classification::Stable, l0 < 0.0);
    }
}
