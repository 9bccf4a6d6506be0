use phytoagg::model::Assumption;
use phytoagg::CoefficientSet;
use proptest::prelude::*;

fn baseline(beta: &str) -> CoefficientSet {
    CoefficientSet::parse(
        1.0,
        1000.0,
        "x*(1001 - x)/10",
        "(x - 1)^1.17/1000",
        "ln(x)",
        beta,
    )
    .unwrap()
}

#[test]
fn baseline_satisfies_every_assumption() {
    let report = baseline("1e-3").validate(101).unwrap();
    assert!(report.is_valid(), "{:?}", report.violations);
}

#[test]
fn each_assumption_is_detected() {
    let cases = [
        ("x - 500", "0", "1", "0", Assumption::Growth),
        ("1", "x - 500", "1", "0", Assumption::Removal),
        ("1", "0", "300 - x", "0", Assumption::Fecundity),
        ("1", "0", "1", "ln(x - 2)", Assumption::Kernel),
    ];
    for (g, w, q, beta, which) in cases {
        let cs = CoefficientSet::parse(1.0, 1000.0, g, w, q, beta).unwrap();
        let report = cs.validate(51).unwrap();
        assert!(
            report.violations.iter().any(|v| v.assumption == which),
            "{which}"
        );
    }
}

#[test]
fn scales_multiply_the_raw_coefficients() {
    let cs = baseline("0").with_scales(0.5, 2.0, 3.0).unwrap();
    let raw = baseline("0");
    for x in [1.0, 17.0, 500.0, 999.0] {
        assert_eq!(cs.g(x).unwrap(), 0.5 * raw.g(x).unwrap());
        assert_eq!(cs.q(x).unwrap(), 2.0 * raw.q(x).unwrap());
        assert_eq!(cs.w(x).unwrap(), 3.0 * raw.w(x).unwrap());
    }
    assert!(baseline("0").with_scales(0.0, 1.0, 1.0).is_err());
    assert!(baseline("0").with_scales(1.0, f64::INFINITY, 1.0).is_err());
}

proptest! {
    #[test]
    fn kernel_is_symmetric_and_truncated(x in 1.0f64..1000.0, y in 1.0f64..1000.0) {
        let cs = baseline("1e-3*x^2*sqrt(y) + 1e-4");
        let a = cs.beta_eval(x, y).unwrap();
        prop_assert_eq!(a, cs.beta_eval(y, x).unwrap());
        if x + y > 1000.0 {
            prop_assert_eq!(a, 0.0);
        } else {
            prop_assert!(a > 0.0);
        }
    }
}
