use psd_synth::covariance::{covariance_from_omega, parse_spec};
use psd_synth::fixtures::{load, load_all, Fixture};
use psd_synth::fps::{int, rat, Rational, Series};
use psd_synth::synthesis::{quadratures, synthesize, SynthesisResult};
use psd_synth::transforms::{
    scaled_omega, transform_omega, verify_transform_roundtrip, TransformSpec,
};

const ORDER: usize = 12;

fn run(fx: &Fixture, order: usize) -> SynthesisResult {
    synthesize(&fx.covariance(order).unwrap(), &fx.options(order)).unwrap()
}

#[test]
fn every_listed_coefficient_is_reproduced_by_both_routes() {
    for fx in load_all().unwrap() {
        let r = run(&fx, ORDER.max(fx.expected_c.len()));
        assert!(r.route_agreement, "{}", fx.name);
        for k in 0..fx.checkable(r.order) {
            assert_eq!(r.c[k], fx.expected(k).unwrap(), "{} c_{k}", fx.name);
        }
        let base: Vec<Rational> = r.base_recurrence.clone();
        assert_eq!(base, r.base_lagrange, "{}", fx.name);
    }
}

#[test]
fn verdicts_match_expectations() {
    for fx in load_all().unwrap() {
        let r = run(&fx, 10);
        assert_eq!(
            r.verdict.passed(),
            !fx.expect_negative,
            "{}: {:?}",
            fx.name,
            r.verdict
        );
        assert_eq!(
            r.verdict.first_negative_index, fx.first_negative,
            "{}",
            fx.name
        );
    }
}

fn series_of_ratio(num: &[i64], den_factors: &[(i64, i64, u64)], order: usize) -> Series {
    // num(z) / prod (1 + a z)^e for (a, _, e)
    let mut den = Series::one(order);
    for &(a, _, e) in den_factors {
        den = den.mul(&Series::from_poly(&[int(1), int(a)], order).pow(e));
    }
    Series::from_poly(&num.iter().map(|&n| int(n)).collect::<Vec<_>>(), order)
        .div(&den)
        .unwrap()
}

fn log1p(a: i64, order: usize) -> Series {
    Series::from_poly(&[int(1), int(a)], order).log().unwrap()
}

#[test]
fn reference_quadratures_belong_to_the_quartic_u() {
    let n = 10;
    // s(z) = z (2z+1) (4z+1)^16 / ((3z+1)^9 (6z+1)^9)
    let num = Series::from_poly(&[int(0), int(1), int(2)], n)
        .mul(&Series::from_poly(&[int(1), int(4)], n).pow(16));
    let num: Vec<i64> = num
        .coeffs()
        .iter()
        .map(|c| c.to_integer().try_into().unwrap())
        .collect();
    let s_reference = series_of_ratio(&num, &[(3, 0, 9), (6, 0, 9)], n);
    // b(z) = (3z+1)^3 (6z+1)^(3/2) / ((4z+1)^4 (2z+1)^(1/2))
    let log_b = &(&log1p(3, n).scale(&int(3)) + &log1p(6, n).scale(&rat(3, 2)))
        - &(&log1p(4, n).scale(&int(4)) + &log1p(2, n).scale(&rat(1, 2)));
    let b_reference = log_b.exp().unwrap();

    let quartic = parse_spec("x*(1+2*x)*(1+3*x)*(1+4*x)*(1+6*x)")
        .unwrap()
        .to_series(n)
        .unwrap();
    let q = quadratures(&quartic, &int(1)).unwrap();
    assert_eq!(q.s, s_reference);
    assert_eq!(q.b, b_reference);

    let cubic = parse_spec("x*(1+2*x)*(1+3*x)*(1+4*x)")
        .unwrap()
        .to_series(n)
        .unwrap();
    let q = quadratures(&cubic, &int(1)).unwrap();
    assert_ne!(q.s, s_reference);
    assert_ne!(q.b, b_reference);
}

#[test]
fn half_scale_matches_reference_s() {
    // s(z) = z/(2+z) exp(-2z/(1+z))
    let n = 10;
    let e = Series::from_poly(&[int(0), int(-2)], n)
        .div(&Series::from_poly(&[int(1), int(1)], n))
        .unwrap()
        .exp()
        .unwrap();
    let s = Series::var(n)
        .div(&Series::from_poly(&[int(2), int(1)], n))
        .unwrap()
        .mul(&e);
    let fx = load("example-6").unwrap();
    let q = quadratures(
        &fx.covariance(n).unwrap().to_series(n).unwrap(),
        &fx.s_scale,
    )
    .unwrap();
    assert_eq!(q.s, s);
}

#[test]
fn transforms_hold_on_synthesized_families() {
    let names = [
        "example-5",
        "example-6",
        "example-7",
        "example-8",
        "example-9",
        "example-10",
        "example-11",
    ];
    let transforms = [
        (1, 1, 1),
        (2, 1, 1),
        (0, 2, 1),
        (0, 3, 1),
        (0, 1, 2),
        (0, 1, 3),
        (1, 2, 2),
        (-1, 1, 1),
    ];
    for name in names {
        let fx = load(name).unwrap();
        let omega = run(&fx, ORDER).omega();
        for &(m, k, n) in &transforms {
            let t = TransformSpec::new(m, k, n).unwrap();
            // A negative shift needs a vanishing prefix: apply it to y^m omega.
            let base = if m < 0 {
                transform_omega(&omega, &TransformSpec::new(-m, 1, 1).unwrap(), ORDER).unwrap()
            } else {
                omega.clone()
            };
            assert!(
                verify_transform_roundtrip(&base, &t, ORDER).unwrap(),
                "{name} {m} {k} {n}"
            );
        }
    }
}

#[test]
fn positive_constant_does_not_change_the_covariance() {
    let omega = run(&load("example-9").unwrap(), ORDER).omega();
    let v = covariance_from_omega(&omega).unwrap();
    for c in [int(2), rat(7, 3), rat(1, 100)] {
        let t = TransformSpec::default().with_scale(c).unwrap();
        assert_eq!(
            covariance_from_omega(&scaled_omega(&omega, &t, ORDER).unwrap()).unwrap(),
            v
        );
    }
}

#[test]
fn covariance_recovered_from_synthesized_omega() {
    for fx in load_all()
        .unwrap()
        .into_iter()
        .filter(|f| !f.expect_negative)
    {
        let r = run(&fx, ORDER);
        let v = covariance_from_omega(&r.omega()).unwrap();
        let len = v.order().min(r.v.order());
        assert_eq!(v.truncate(len), r.v.truncate(len), "{}", fx.name);
    }
}
