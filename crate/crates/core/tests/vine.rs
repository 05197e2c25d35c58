use garch_copula::copulas::{copula_ln_density, copula_loglik, sample_copula, CopulaModel};
use garch_copula::distributions::pit_uniformity_test;
use garch_copula::numeric::special::norm_quantile;
use garch_copula::rng;
use garch_copula::stats::{column, kendall_tau};
use garch_copula::vine::{
    edge_ln_densities, rosenblatt, select_structure, select_vine, simulate_vine, vine_density, vine_gof, vine_ln_density,
    vine_loglik, write_vine_comparison_csv, PairCopula, PairFamily, VineEdge, VineKind, VineModel, VineStructure,
    DEFAULT_PAIR_FAMILIES,
};
use nalgebra::DMatrix;
use rand::Rng;

const R01: f64 = 0.6;
const R12: f64 = 0.4;
const R02: f64 = 0.5;

fn corr3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, R01, R02, R01, 1.0, R12, R02, R12, 1.0])
}

fn partial_02_given_1() -> f64 {
    (R02 - R01 * R12) / ((1.0 - R01 * R01) * (1.0 - R12 * R12)).sqrt()
}

fn dvine3(p: [PairCopula; 3]) -> VineModel {
    let s = VineStructure {
        kind: VineKind::DVine,
        dim: 3,
        trees: vec![vec![VineEdge::new(0, 1, vec![]), VineEdge::new(1, 2, vec![])], vec![VineEdge::new(0, 2, vec![1])]],
    };
    let [a, b, c] = p;
    VineModel::new(&s, vec![vec![a, b], vec![c]]).unwrap()
}

fn gaussian_vine() -> VineModel {
    dvine3([
        PairCopula::gaussian(R01).unwrap(),
        PairCopula::gaussian(R12).unwrap(),
        PairCopula::gaussian(partial_02_given_1()).unwrap(),
    ])
}

fn uniforms(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| (0..d).map(|_| r.random::<f64>()).collect()).collect()
}

/// Asset 0 drives every other asset; the rest are conditionally independent.
fn star_model(dim: usize) -> VineModel {
    let trees: Vec<Vec<VineEdge>> = (0..dim - 1)
        .map(|k| (k + 1..dim).map(|j| VineEdge::new(k, j, (0..k).collect())).collect())
        .collect();
    let pairs = trees
        .iter()
        .enumerate()
        .map(|(k, t)| t.iter().map(|_| if k == 0 { PairCopula::gaussian(0.7).unwrap() } else { PairCopula::independence() }).collect())
        .collect();
    VineModel::new(&VineStructure { kind: VineKind::CVine, dim, trees }, pairs).unwrap()
}

#[test]
fn gaussian_vine_matches_trivariate_gaussian_density() {
    let v = gaussian_vine();
    let g = CopulaModel::gaussian(&corr3()).unwrap();
    for u in uniforms(100, 3, 1) {
        let a = vine_density(&v, &u).unwrap();
        let b = copula_ln_density(&g, &u).unwrap().exp();
        assert!(((a - b) / b).abs() <= 1e-6, "{u:?}: {a} vs {b}");
    }
}

#[test]
fn gaussian_vine_loglik_matches_copula_loglik() {
    let v = gaussian_vine();
    let g = CopulaModel::gaussian(&corr3()).unwrap();
    let rows = sample_copula(&g, 500, 2).unwrap();
    let diff = (vine_loglik(&v, &rows).unwrap() - copula_loglik(&g, &rows).unwrap()).abs();
    assert!(diff / 500.0 < 1e-4, "{diff}");
}

#[test]
fn density_factorizes_over_edges() {
    let v = dvine3([
        PairCopula::t(0.4, 5.0).unwrap(),
        PairCopula::clayton(1.5, 270).unwrap(),
        PairCopula::gumbel(1.3, 180).unwrap(),
    ]);
    for u in uniforms(1000, 3, 3) {
        let parts: f64 = edge_ln_densities(&v, &u).unwrap().iter().sum();
        let whole = vine_ln_density(&v, &u).unwrap();
        assert!((parts.exp() / whole.exp() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn structure_counts() {
    let rows = sample_copula(&CopulaModel::gaussian(&corr3()).unwrap(), 500, 4).unwrap();
    for kind in VineKind::ALL {
        let s = select_structure(&rows, kind).unwrap();
        assert_eq!(s.trees.len(), 2);
        assert_eq!(s.trees[0].len(), 2);
        assert_eq!(s.trees[1].len(), 1);
        assert_eq!(s.trees[1][0].conditioning.len(), 1);
    }
    let four = simulate_vine(&star_model(4), 500, 5).unwrap();
    let r = select_vine(&four, VineKind::RVine, &DEFAULT_PAIR_FAMILIES).unwrap();
    assert_eq!(r.pair_copulas().count(), 6);
    for (k, t) in r.trees.iter().enumerate() {
        assert_eq!(t.len(), 3 - k);
    }
    assert!(select_structure(&column_pair(&four), VineKind::RVine).is_err());
}

fn column_pair(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r[..2].to_vec()).collect()
}

#[test]
fn cvine_and_dvine_shapes() {
    let rows = simulate_vine(&star_model(5), 500, 6).unwrap();
    let c = select_structure(&rows, VineKind::CVine).unwrap();
    let hub = c.trees[0][0].conditioned.iter().find(|v| c.trees[0].iter().all(|e| e.conditioned.contains(v)));
    assert!(hub.is_some(), "{:?}", c.trees[0]);
    let d = select_structure(&rows, VineKind::DVine).unwrap();
    let mut degree = [0; 5];
    for e in &d.trees[0] {
        degree[e.conditioned[0]] += 1;
        degree[e.conditioned[1]] += 1;
    }
    assert!(degree.iter().all(|&k| k <= 2), "{degree:?}");
}

#[test]
fn cvine_root_is_the_driving_asset() {
    let m = star_model(5);
    let mut hits = 0;
    for seed in 0..10 {
        let rows = simulate_vine(&m, 500, 100 + seed).unwrap();
        let s = select_structure(&rows, VineKind::CVine).unwrap();
        if s.trees[0].iter().all(|e| e.conditioned.contains(&0)) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn independent_data_gives_independent_pairs() {
    let rows = uniforms(2000, 4, 7);
    let m = select_vine(&rows, VineKind::RVine, &DEFAULT_PAIR_FAMILIES).unwrap();
    for p in m.pair_copulas() {
        assert!(p.family == PairFamily::Independence || p.kendall_tau().abs() < 0.05, "{p:?}");
    }
    // spurious edges that pass the pre-test add a few units of log-likelihood at most
    assert!(m.loglik.abs() / 2000.0 < 0.005, "{}", m.loglik);
}

#[test]
fn round_trip_recovers_tree_one() {
    let truth = gaussian_vine();
    let rows = simulate_vine(&truth, 10_000, 8).unwrap();
    let m = select_vine(&rows, VineKind::DVine, &DEFAULT_PAIR_FAMILIES).unwrap();
    for e in &m.trees[0] {
        let [a, b] = e.edge.conditioned;
        let want = match (a.min(b), a.max(b)) {
            (0, 1) => R01,
            (1, 2) => R12,
            (0, 2) => R02,
            _ => unreachable!(),
        };
        assert!(matches!(e.copula.family, PairFamily::Gaussian | PairFamily::T), "{:?}", e.copula);
        assert!((e.copula.params[0] - want).abs() <= 0.05, "{:?} vs {want}", e.copula);
    }
}

#[test]
fn simulation_examples() {
    let indep = dvine3([PairCopula::independence(), PairCopula::independence(), PairCopula::independence()]);
    let u = simulate_vine(&indep, 10_000, 9).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(kendall_tau(&column(&u, i), &column(&u, j)).abs() < 0.03);
    }

    let u = simulate_vine(&gaussian_vine(), 10_000, 10).unwrap();
    let z: Vec<Vec<f64>> = u.iter().map(|r| r.iter().map(|&p| norm_quantile(p)).collect()).collect();
    let c = corr3();
    for i in 0..3 {
        for j in i + 1..3 {
            let r = pearson(&column(&z, i), &column(&z, j));
            assert!((r - c[(i, j)]).abs() <= 0.03, "({i},{j}): {r}");
        }
    }

    let g = dvine3([PairCopula::gumbel(2.0, 0).unwrap(), PairCopula::independence(), PairCopula::independence()]);
    let u = simulate_vine(&g, 10_000, 11).unwrap();
    let t = kendall_tau(&column(&u, 0), &column(&u, 1));
    assert!((t - 0.5).abs() <= 0.03, "{t}");
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn mixed_vine() -> VineModel {
    dvine3([
        PairCopula::clayton(2.0, 0).unwrap(),
        PairCopula::t(-0.5, 4.0).unwrap(),
        PairCopula::gumbel(1.4, 90).unwrap(),
    ])
}

#[test]
fn simulated_margins_and_rosenblatt_are_uniform() {
    let m = mixed_vine();
    let (mut margins, mut rosen, mut total) = (0, 0, 0);
    for seed in 0..10 {
        let u = simulate_vine(&m, 5000, 200 + seed).unwrap();
        let e = rosenblatt(&m, &u).unwrap();
        for c in 0..3 {
            total += 1;
            margins += (pit_uniformity_test(&column(&u, c), 20).unwrap().p_value > 0.01) as usize;
            rosen += (pit_uniformity_test(&column(&e, c), 20).unwrap().p_value > 0.01) as usize;
        }
    }
    assert!(margins * 10 >= total * 9, "{margins}/{total}");
    assert!(rosen * 10 >= total * 9, "{rosen}/{total}");
}

#[test]
fn simulation_is_deterministic() {
    let m = mixed_vine();
    assert_eq!(simulate_vine(&m, 3000, 5).unwrap(), simulate_vine(&m, 3000, 5).unwrap());
    assert_ne!(simulate_vine(&m, 10, 5).unwrap(), simulate_vine(&m, 10, 6).unwrap());
}

#[test]
fn gof_is_calibrated_on_model_data() {
    let m = dvine3([
        PairCopula::clayton(1.5, 0).unwrap(),
        PairCopula::gaussian(0.5).unwrap(),
        PairCopula::gumbel(1.3, 0).unwrap(),
    ]);
    let mut pass = 0;
    for seed in 0..10 {
        let u = simulate_vine(&m, 300, 300 + seed).unwrap();
        if vine_gof(&m, &u, 50, seed).unwrap().p_value > 0.05 {
            pass += 1;
        }
    }
    assert!(pass >= 9, "{pass}/10");
}

#[test]
fn gof_rejects_independence_vine_on_dependent_data() {
    let indep = dvine3([PairCopula::independence(), PairCopula::independence(), PairCopula::independence()]);
    let mut rejected = 0;
    for seed in 0..5 {
        let u = simulate_vine(&gaussian_vine(), 300, 400 + seed).unwrap();
        if vine_gof(&indep, &u, 20, seed).unwrap().p_value <= 0.05 {
            rejected += 1;
        }
    }
    assert!(rejected >= 4, "{rejected}/5");
}

#[test]
fn gof_with_one_replicate_is_binary() {
    let m = mixed_vine();
    let u = simulate_vine(&m, 200, 1).unwrap();
    let p = vine_gof(&m, &u, 1, 2).unwrap().p_value;
    assert!(p == 0.0 || p == 1.0);
    assert!(vine_gof(&m, &u, 0, 2).is_err());
}

#[test]
fn kind_comparison_is_deterministic() {
    let rows = simulate_vine(&mixed_vine(), 400, 12).unwrap();
    let fit = || -> Vec<VineModel> {
        VineKind::ALL.iter().map(|&k| select_vine(&rows, k, &DEFAULT_PAIR_FAMILIES).unwrap()).collect()
    };
    let (a, b) = (fit(), fit());
    assert_eq!(a, b);
    let best = |v: &[VineModel]| v.iter().min_by(|x, y| x.aic.total_cmp(&y.aic)).unwrap().kind;
    assert_eq!(best(&a), best(&b));
    let mut buf = Vec::new();
    write_vine_comparison_csv(&mut buf, &a).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("kind,gof_p,aic,bic"));
    assert_eq!(text.lines().count(), 4);
}
