use plane_parking::analytics::{mean_x, mean_y, p_zero, q_plus, y_zero_prob};
use plane_parking::rde::{
    convolve, geom_half_sum, poisson_one_sum, pushdown, rde_fixed_point, rde_step, y_pmf, ArrivalSpec,
    FixedPointOptions, OffspringSpec, Pmf, RdeError,
};
use proptest::prelude::*;

fn pmf_strategy() -> impl Strategy<Value = Pmf> {
    prop::collection::vec(0.0f64..1.0, 2..40).prop_filter_map("positive total", |raw| {
        let total: f64 = raw.iter().sum();
        (total > 0.0).then(|| Pmf::from_mass(raw.iter().map(|x| x / total).collect()).unwrap())
    })
}

fn fixed_point(alpha: f64, k: usize) -> Pmf {
    match rde_fixed_point(&ArrivalSpec::poisson(alpha), &OffspringSpec::GeometricHalf, FixedPointOptions::with_k(k)) {
        Ok(fp) => fp.pmf,
        Err(RdeError::NotConverged { last, .. }) => *last,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #[test]
    fn pushdown_lowers_the_mean(mu in pmf_strategy()) {
        let nu = pushdown(&mu);
        // E[(X - 1)^+] = E[X] - P(X >= 1); the top slot of the window is left
        // empty, so no mass leaves the window.
        let expected = mu.truncated_mean() - (1.0 - mu.at(0));
        prop_assert!((nu.truncated_mean() - expected).abs() < 1e-12);
        prop_assert!((nu.tail() - mu.tail()).abs() < 1e-12);
        prop_assert_eq!(nu.at(mu.truncation()), 0.0);
        prop_assert!((nu.at(0) - mu.at(0) - mu.at(1)).abs() < 1e-15);
    }

    #[test]
    fn compound_sums_match_generating_functions(mu in pmf_strategy(), s in 0.0f64..0.9) {
        let nu = pushdown(&mu.resized(5));
        let phi = nu.pgf(s).value;
        let w = geom_half_sum(&nu, 2000).unwrap();
        prop_assert!((w.pgf(s).value * (2.0 - phi) - 1.0).abs() < 1e-9);
        let p = poisson_one_sum(&nu, 400);
        prop_assert!((p.pgf(s).value - (phi - 1.0).exp()).abs() < 1e-9);
        if nu.tail() < 1e-15 {
            prop_assert!(w.tail().abs() < 1e-9);
        }
    }

    #[test]
    fn convolution_means_add(a in pmf_strategy(), b in pmf_strategy()) {
        let k = a.truncation() + b.truncation();
        let c = convolve(&a, &b, k);
        prop_assert!((c.truncated_mean() - a.truncated_mean() - b.truncated_mean()).abs() < 1e-9);
        prop_assert!(c.tail().abs() < 1e-9);
    }

    #[test]
    fn rde_step_is_monotone(alpha in 0.0f64..0.4) {
        // Iterates from the point mass at 0 increase stochastically.
        let arrivals = ArrivalSpec::poisson(alpha);
        let mut prev = Pmf::delta_zero(100);
        for _ in 0..20 {
            let next = rde_step(&prev, &arrivals, &OffspringSpec::GeometricHalf, 100).unwrap();
            prop_assert!(prev.stochastically_below(&next, 1e-12));
            prev = next;
        }
    }
}

#[test]
fn fixed_point_satisfies_the_quadratic() {
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for a in [0.05, 0.15, 0.25, 0.35] {
        let x = fixed_point(a, 400);
        let p = x.at(0);
        assert!((p - (1.0 - a)).abs() < 1e-8);
        for &s in &grid {
            let g = x.pgf(s).value;
            let r = g * g - ((2.0 - p) * s + p) * g + s * (a * (s - 1.0)).exp();
            assert!(r.abs() < 1e-9, "alpha {a}, s {s}: residual {r}");
            assert!((g - q_plus(s, a, p).unwrap()).abs() < 1e-8);
        }
    }
}

#[test]
fn fixed_point_is_monotone_in_alpha() {
    let mut prev = fixed_point(0.0, 300);
    assert_eq!(prev, Pmf::delta_zero(300));
    for i in 1..=12 {
        let next = fixed_point(0.05 * i as f64, 300);
        assert!(prev.stochastically_below(&next, 1e-9), "alpha step {i}");
        prev = next;
    }
}

#[test]
fn subcritical_means_match_closed_forms() {
    for a in [0.1, 0.2, 0.3, 0.4] {
        let x = fixed_point(a, 400);
        let mx = mean_x(a).unwrap().finite().unwrap();
        assert!((x.truncated_mean() - mx).abs() < 1e-6, "alpha {a}");
        assert!(!x.mean().diverged);

        let y = y_pmf(&x, a, 400).unwrap();
        let my = mean_y(a).unwrap().finite().unwrap();
        assert!((y.truncated_mean() - my).abs() < 1e-5, "alpha {a}: {} vs {my}", y.truncated_mean());
        // E[Y] = alpha + 2 E[(X - 1)^+] = alpha + 2 (E[X] - 1 + p)
        assert!((my - (a + 2.0 * (mx - a))).abs() < 1e-12);
        assert!((y.at(0) - y_zero_prob(a).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn y_zero_mass_from_its_construction() {
    // P(Y = 0) = e^{-alpha} W(0)^2 with W(0) = 1 / (2 - nu(0)) and
    // nu(0) = P(X <= 1).
    let a = 0.3;
    let x = fixed_point(a, 400);
    let nu0 = x.at(0) + x.at(1);
    let direct = (-a).exp() / (2.0 - nu0).powi(2);
    assert!((y_pmf(&x, a, 400).unwrap().at(0) - direct).abs() < 1e-12);
    assert!((direct - 0.661430).abs() < 1e-6, "{direct}");
}

#[test]
fn supercritical_truncated_mean_grows_with_window() {
    let a = 0.6;
    assert!(mean_x(a).unwrap().is_infinite());
    let means: Vec<_> = [200usize, 400, 800].iter().map(|&k| fixed_point(a, k).mean()).collect();
    assert!(means.windows(2).all(|w| w[1].mean_lower > w[0].mean_lower + 0.1), "{means:?}");
    assert!(means.iter().all(|m| m.diverged));
}

#[test]
fn supercritical_p_from_the_fixed_point() {
    let a = 0.5;
    let p = p_zero(a).unwrap();
    let x = fixed_point(a, 2000);
    assert!((x.at(0) - p).abs() < 1e-6, "{} vs {p}", x.at(0));
    assert!(p > 1.0 - a);
}

#[test]
fn offspring_specs_validate() {
    assert!(OffspringSpec::GeometricHalf.validate_critical().is_ok());
    assert!(OffspringSpec::PoissonOne.validate_critical().is_ok());
    let crit = OffspringSpec::Explicit { mass: vec![0.25, 0.5, 0.25] };
    assert!(crit.validate_critical().is_ok());
    assert!((crit.variance() - 0.5).abs() < 1e-15);
    assert!(OffspringSpec::Explicit { mass: vec![0.5, 0.5] }.validate_critical().is_err());
    assert!(OffspringSpec::Explicit { mass: vec![0.5, 0.7] }.validate().is_err());
    assert!((OffspringSpec::GeometricHalf.variance() - 2.0).abs() < 1e-15);
    assert!((OffspringSpec::PoissonOne.variance() - 1.0).abs() < 1e-15);
}

#[test]
fn offspring_spec_json_round_trip() {
    let spec: OffspringSpec = serde_json::from_str(r#"{"kind":"explicit","mass":[0.5,0,0.5]}"#).unwrap();
    assert_eq!(spec, OffspringSpec::Explicit { mass: vec![0.5, 0.0, 0.5] });
    let g: OffspringSpec = serde_json::from_str(r#"{"kind":"geometric-half"}"#).unwrap();
    assert_eq!(g, OffspringSpec::GeometricHalf);
}

#[test]
fn invalid_options_are_rejected() {
    let bad_tol = FixedPointOptions { tol: 0.0, ..FixedPointOptions::default() };
    assert!(rde_fixed_point(&ArrivalSpec::poisson(0.1), &OffspringSpec::GeometricHalf, bad_tol).is_err());
    let few = FixedPointOptions { max_iter: 2, ..FixedPointOptions::default() };
    assert!(matches!(
        rde_fixed_point(&ArrivalSpec::poisson(0.3), &OffspringSpec::GeometricHalf, few),
        Err(RdeError::NotConverged { iterations: 2, .. })
    ));
    assert!(Pmf::from_mass(vec![0.7, 0.7]).is_err());
    assert!(Pmf::from_mass(vec![1.0]).is_err());
}
