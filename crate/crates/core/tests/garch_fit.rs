use garch_copula::distributions::pit_uniformity_test;
use garch_copula::garch::{
    fit, fit_with, select_best, write_league_csv, ArmaSpec, Candidate, FitOptions, FittedMarginal, GarchSpec,
    GridLimit, Innovation, InnovationSpec, ModelSpec, Variant,
};
use garch_copula::Error;

fn garch11(variant: Variant, omega: f64, alpha: f64, gamma: f64, psi: f64) -> ModelSpec {
    ModelSpec {
        arma: ArmaSpec::constant(0.0005),
        garch: GarchSpec {
            variant,
            q: 1,
            p: 1,
            omega,
            arch: vec![alpha],
            asymmetry: if variant.has_asymmetry() { vec![gamma] } else { vec![] },
            garch: vec![psi],
        },
        innovation: InnovationSpec::normal(),
    }
}

#[test]
fn garch11_recovery() {
    let m = garch11(Variant::Garch, 0.05, 0.1, 0.0, 0.85);
    let r = m.simulate(5000, 500, 42).unwrap();
    let f = fit(&r, (0, 0), (1, 1), Variant::Garch, Innovation::Normal).unwrap();
    let g = &f.model.garch;
    assert!((0.05..=0.15).contains(&g.arch[0]), "{g:?}");
    assert!((0.80..=0.90).contains(&g.garch[0]), "{g:?}");
    let z = &f.residuals;
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / z.len() as f64;
    assert!(mean.abs() <= 0.1 && (0.8..=1.2).contains(&var));
    assert_eq!(z.len(), r.len());
    assert!(f.cond_sd.iter().all(|&b| b > 0.0));
}

#[test]
fn white_noise_has_little_arch() {
    let r = garch_copula::distributions::DistSpec::normal(0.0, 0.01).sample(3000, 7).unwrap();
    let f = fit(&r, (0, 0), (1, 1), Variant::Garch, Innovation::Normal).unwrap();
    assert!(f.model.garch.arch[0] < 0.05, "{:?}", f.model.garch);
    let h1 = f.forecast(1).unwrap().sd[0].powi(2);
    let v = garch_copula::stats::variance(&r);
    assert!((h1 / v - 1.0).abs() < 0.10, "{h1} vs {v}");
}

#[test]
fn igarch_constraint_is_exact() {
    let m = garch11(Variant::Garch, 0.02, 0.12, 0.0, 0.87);
    let r = m.simulate(2000, 200, 3).unwrap();
    for (q, p) in [(1, 1), (2, 1), (1, 3)] {
        let f = fit(&r, (0, 0), (q, p), Variant::Igarch, Innovation::Normal).unwrap();
        assert!((f.model.garch.persistence() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn scale_equivariance() {
    let m = garch11(Variant::Gjr, 0.03, 0.05, 0.1, 0.85);
    let r = m.simulate(1500, 200, 8).unwrap();
    let r2: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
    for variant in [Variant::Garch, Variant::Egarch] {
        let a = fit(&r, (1, 0), (1, 1), variant, Innovation::SkewNormal).unwrap();
        let b = fit(&r2, (1, 0), (1, 1), variant, Innovation::SkewNormal).unwrap();
        for (x, y) in a.residuals.iter().zip(&b.residuals) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn nested_models_fit_at_least_as_well() {
    let m = garch11(Variant::Garch, 0.05, 0.1, 0.0, 0.85);
    let r = m.simulate(2000, 200, 21).unwrap();
    let small = fit(&r, (0, 0), (1, 1), Variant::Garch, Innovation::Normal).unwrap();
    for (arma, orders, dist) in [((1, 0), (1, 1), Innovation::Normal), ((0, 0), (1, 1), Innovation::SkewNormal)] {
        let big = fit(&r, arma, orders, Variant::Garch, dist).unwrap();
        assert!(big.loglik >= small.loglik - 1e-4, "{} < {}", big.loglik, small.loglik);
    }
    let gjr = fit(&r, (0, 0), (1, 1), Variant::Gjr, Innovation::Normal).unwrap();
    assert!(gjr.loglik >= small.loglik - 1e-4);
}

#[test]
fn residuals_pass_uniformity_on_well_specified_data() {
    let mut passes = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let m = garch11(Variant::Garch, 0.05, 0.1, 0.0, 0.85);
        let r = m.simulate(2000, 300, 100 + seed).unwrap();
        let f = fit(&r, (0, 0), (1, 1), Variant::Garch, Innovation::Normal).unwrap();
        let spec = f.model.innovation.dist_spec();
        let u: Vec<f64> = f.residuals.iter().map(|&z| spec.cdf(z)).collect();
        if pit_uniformity_test(&u, 20).unwrap().p_value > 0.01 {
            passes += 1;
        }
    }
    assert!(passes >= 9, "{passes}/{seeds}");
}

#[test]
fn json_round_trip_preserves_forecasts() {
    let m = garch11(Variant::Egarch, -0.2, -0.05, 0.15, 0.97);
    let r = m.simulate(1000, 200, 4).unwrap();
    let f = fit(&r, (1, 1), (2, 1), Variant::Egarch, Innovation::SkewNormal).unwrap();
    let back = FittedMarginal::from_json(&f.to_json().unwrap()).unwrap();
    assert_eq!(back, f);
    assert_eq!(back.forecast(30).unwrap(), f.forecast(30).unwrap());
}

#[test]
fn short_and_constant_series_are_rejected() {
    assert!(matches!(
        fit(&[0.01; 50], (0, 0), (1, 1), Variant::Garch, Innovation::Normal),
        Err(Error::InsufficientData { .. })
    ));
    assert!(matches!(
        fit(&[0.01; 300], (0, 0), (1, 1), Variant::Garch, Innovation::Normal),
        Err(Error::DegenerateSeries(_))
    ));
}

#[test]
fn small_grid_league_table() {
    let m = garch11(Variant::Garch, 0.05, 0.1, 0.0, 0.85);
    let r = m.simulate(1000, 200, 9).unwrap();
    let sel = select_best("A", &r, GridLimit::Small, &FitOptions::default()).unwrap();
    assert_eq!(sel.league.len(), 32);
    let best_bic = sel.league.iter().filter_map(|row| row.bic).fold(f64::INFINITY, f64::min);
    assert_eq!(best_bic, sel.best.bic);
    let mut buf = Vec::new();
    write_league_csv(&mut buf, &sel.league).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "variant,m,n,q,p,dist,converged,loglik,aic,bic_per_obs");
    assert_eq!(text.lines().count(), 33);
}

#[test]
fn fit_is_deterministic() {
    let m = garch11(Variant::Gjr, 0.03, 0.05, 0.1, 0.85);
    let r = m.simulate(800, 100, 12).unwrap();
    let c = Candidate { m: 1, n: 1, variant: Variant::Gjr, q: 1, p: 2, dist: Innovation::SkewNormal };
    let a = fit_with("A", &r, c, &FitOptions::default()).unwrap();
    let b = fit_with("A", &r, c, &FitOptions::default()).unwrap();
    assert_eq!(a, b);
}
