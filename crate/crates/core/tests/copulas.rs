use garch_copula::copulas::{
    copula_density, fit_copula_rows, gof_test, sample_copula, to_pit, write_comparison_csv, CopulaFamily, CopulaModel,
};
use garch_copula::distributions::{pit_uniformity_test, DistSpec, Family};
use garch_copula::numeric::special::norm_quantile;
use garch_copula::rng;
use garch_copula::stats::{column, kendall_tau};
use nalgebra::DMatrix;
use rand::Rng;

fn corr2(r: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0])
}

fn equicorr(d: usize, r: f64) -> DMatrix<f64> {
    let mut m = DMatrix::from_element(d, d, r);
    m.fill_diagonal(1.0);
    m
}

fn sample_tau(m: &CopulaModel, n: usize, seed: u64) -> f64 {
    let u = sample_copula(m, n, seed).unwrap();
    kendall_tau(&column(&u, 0), &column(&u, 1))
}

#[test]
fn sampled_tau_matches_closed_form() {
    let cases = [
        (CopulaModel::clayton(2, 2.0).unwrap(), 0.5),
        (CopulaModel::gumbel(2, 2.0).unwrap(), 0.5),
        (CopulaModel::gaussian(&corr2(0.5)).unwrap(), 2.0 / std::f64::consts::PI * 0.5f64.asin()),
        (CopulaModel::independence(2).unwrap(), 0.0),
        (CopulaModel::t(&corr2(-0.4), 6.0).unwrap(), 2.0 / std::f64::consts::PI * (-0.4f64).asin()),
    ];
    for (m, tau) in cases {
        assert!((m.kendall_tau(0, 1) - tau).abs() < 1e-12);
        let s = sample_tau(&m, 10_000, 77);
        assert!((s - tau).abs() <= 0.03, "{:?}: {s} vs {tau}", m.family);
    }
}

#[test]
fn trivariate_archimedean_samples_share_one_tau() {
    for m in [CopulaModel::clayton(3, 2.0).unwrap(), CopulaModel::gumbel(3, 2.0).unwrap()] {
        let u = sample_copula(&m, 10_000, 4).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let t = kendall_tau(&column(&u, i), &column(&u, j));
            assert!((t - 0.5).abs() <= 0.03, "{:?} ({i},{j}): {t}", m.family);
        }
    }
}

#[test]
fn fit_recovers_parameters() {
    let u = sample_copula(&CopulaModel::gaussian(&corr2(0.5)).unwrap(), 10_000, 1).unwrap();
    let g = fit_copula_rows(CopulaFamily::Gaussian, &u).unwrap();
    assert!((0.45..=0.55).contains(&g.params[0]), "{:?}", g.params);

    let u = sample_copula(&CopulaModel::clayton(2, 2.0).unwrap(), 10_000, 2).unwrap();
    let c = fit_copula_rows(CopulaFamily::Clayton, &u).unwrap();
    assert!((1.7..=2.3).contains(&c.params[0]), "{:?}", c.params);

    let mut r = rng::seeded(3);
    let indep: Vec<Vec<f64>> = (0..5000).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
    let gu = fit_copula_rows(CopulaFamily::Gumbel, &indep).unwrap();
    assert!((1.0..=1.1).contains(&gu.params[0]), "{:?}", gu.params);

    let t = CopulaModel::t(&equicorr(3, 0.5), 5.0).unwrap();
    let u = sample_copula(&t, 5000, 5).unwrap();
    let f = fit_copula_rows(CopulaFamily::T, &u).unwrap();
    assert!(f.params.iter().all(|p| (p - 0.5).abs() < 0.05), "{:?}", f.params);
    assert!((3.5..=7.0).contains(&f.nu.unwrap()), "{:?}", f.nu);
}

#[test]
fn fit_reports_information_criteria() {
    let u = sample_copula(&CopulaModel::gumbel(3, 1.5).unwrap(), 400, 8).unwrap();
    let m = fit_copula_rows(CopulaFamily::Gumbel, &u).unwrap();
    assert!((m.aic - (2.0 - 2.0 * m.loglik)).abs() < 1e-9);
    assert!((m.bic - (400f64.ln() - 2.0 * m.loglik)).abs() < 1e-9);
    let g = fit_copula_rows(CopulaFamily::Gaussian, &u).unwrap();
    assert_eq!(g.n_params(), 3);
    assert!(fit_copula_rows(CopulaFamily::Gaussian, &u[..50]).is_err());
}

#[test]
fn t_copula_tails_are_symmetric() {
    let m = CopulaModel::t(&corr2(0.7), 4.0).unwrap();
    let u = sample_copula(&m, 100_000, 6).unwrap();
    let q = 0.05;
    let lower = u.iter().filter(|r| r[0] < q && r[1] < q).count() as f64;
    let upper = u.iter().filter(|r| r[0] > 1.0 - q && r[1] > 1.0 - q).count() as f64;
    assert!((lower - upper).abs() <= 4.0 * (lower + upper).sqrt(), "{lower} vs {upper}");
    // and heavier than the gaussian with the same correlation
    let g = sample_copula(&CopulaModel::gaussian(&corr2(0.7)).unwrap(), 100_000, 6).unwrap();
    let glower = g.iter().filter(|r| r[0] < q && r[1] < q).count() as f64;
    assert!(lower > glower);
}

#[test]
fn margins_are_uniform() {
    let models = [
        CopulaModel::gaussian(&corr2(0.6)).unwrap(),
        CopulaModel::t(&corr2(0.6), 4.0).unwrap(),
        CopulaModel::clayton(2, 3.0).unwrap(),
        CopulaModel::gumbel(2, 2.5).unwrap(),
    ];
    for m in &models {
        let mut pass = 0;
        for seed in 0..20 {
            let u = sample_copula(m, 10_000, 100 + seed).unwrap();
            pass += (0..2).filter(|&c| pit_uniformity_test(&column(&u, c), 20).unwrap().p_value > 0.01).count();
        }
        assert!(pass >= 38, "{:?}: {pass}/40", m.family);
    }
}

#[test]
fn density_integrates_to_one() {
    let models = [
        CopulaModel::gaussian(&corr2(0.5)).unwrap(),
        CopulaModel::t(&corr2(0.5), 5.0).unwrap(),
        CopulaModel::clayton(2, 1.0).unwrap(),
        CopulaModel::gumbel(2, 1.5).unwrap(),
    ];
    let mut r = rng::seeded(10);
    let pts: Vec<[f64; 2]> = (0..100_000).map(|_| [r.random(), r.random()]).collect();
    for m in &models {
        let mean = pts.iter().map(|p| copula_density(m, p).unwrap()).sum::<f64>() / pts.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "{:?}: {mean}", m.family);
    }
}

#[test]
fn t_data_prefers_t_copula() {
    let truth = CopulaModel::t(&equicorr(5, 0.5), 5.0).unwrap();
    let mut wins = 0;
    for seed in 0..5 {
        let u = sample_copula(&truth, 500, 200 + seed).unwrap();
        let fits: Vec<CopulaModel> = CopulaFamily::ALL.iter().map(|&f| fit_copula_rows(f, &u).unwrap()).collect();
        let best = fits.iter().min_by(|a, b| a.aic.total_cmp(&b.aic)).unwrap();
        if best.family == CopulaFamily::T {
            wins += 1;
        }
    }
    assert!(wins >= 4, "{wins}/5");
}

#[test]
fn gof_rejects_gaussian_for_strong_clayton_data() {
    let clay = CopulaModel::clayton(2, 4.0).unwrap();
    let mut rejections = 0;
    for seed in 0..4 {
        let u = sample_copula(&clay, 500, 300 + seed).unwrap();
        let g = fit_copula_rows(CopulaFamily::Gaussian, &u).unwrap();
        if gof_test(&g, &u, 40, seed).unwrap().p_value <= 0.05 {
            rejections += 1;
        }
    }
    assert!(rejections >= 3, "{rejections}/4");
}

#[test]
fn gof_is_deterministic() {
    let m = CopulaModel::gumbel(2, 1.7).unwrap();
    let u = sample_copula(&m, 300, 1).unwrap();
    assert_eq!(gof_test(&m, &u, 10, 5).unwrap(), gof_test(&m, &u, 10, 5).unwrap());
}

#[test]
fn pit_of_normal_quantiles_is_equispaced() {
    let n = 1000;
    let z: Vec<f64> = (1..=n).map(|i| norm_quantile(i as f64 / (n + 1) as f64)).collect();
    let pits = to_pit(&[z.clone(), z.iter().rev().copied().collect()], 20).unwrap();
    assert_eq!(pits.dim(), 2);
    assert_eq!(pits.n_obs(), n);
    for (i, row) in pits.rows.iter().enumerate() {
        assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!((row[0] - (i + 1) as f64 / (n + 1) as f64).abs() < 0.01);
    }
    assert!(pits.failing_assets().is_empty());
}

#[test]
fn pit_selects_skew_t_for_skew_t_residuals() {
    let spec = DistSpec::skew_t(0.0, 1.0, 3.0, 5.0);
    let mut hits = 0;
    for seed in 0..5 {
        let z = spec.sample(5000, 40 + seed).unwrap();
        let p = to_pit(&[z], 20).unwrap();
        if p.sources[0].chosen.spec.family == Family::SkewT {
            hits += 1;
        }
    }
    assert!(hits >= 4, "{hits}/5");
}

#[test]
fn comparison_csv_header() {
    let u = sample_copula(&CopulaModel::clayton(2, 1.0).unwrap(), 200, 1).unwrap();
    let fits: Vec<CopulaModel> = CopulaFamily::ALL.iter().map(|&f| fit_copula_rows(f, &u).unwrap()).collect();
    let mut buf = Vec::new();
    write_comparison_csv(&mut buf, &fits).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,gof_p,aic,bic"));
    assert_eq!(lines.count(), 4);
}
