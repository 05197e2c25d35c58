//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//! Runs as a plain binary (`harness = false`) so the lines are always shown.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use garch_copula::copulas::{fit_copula_rows, gof_test, sample_copula, CopulaFamily, CopulaModel};
use garch_copula::distributions::{DistSpec, Family};
use garch_copula::garch::{
    fit, select_best, ArmaSpec, FitOptions, GarchSpec, GridLimit, Innovation, InnovationSpec, ModelSpec, Variant,
};
use garch_copula::optimizer::{
    adjusted_sharpe_from, min_variance, sharpe_ratio, tangency, MomentEstimates, MomentSource,
};
use garch_copula::stats::{column, kendall_tau};
use garch_copula::vine::{
    select_vine, simulate_vine, vine_density, PairCopula, PairFamily, VineEdge, VineKind, VineModel, VineStructure,
    DEFAULT_PAIR_FAMILIES,
};
use garch_copula_cli::synthetic::{synthetic_panel, SyntheticSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

const BIN: &str = env!("CARGO_BIN_EXE_garch-copula");

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_spec(family: Family, r: &mut ChaCha8Rng) -> DistSpec {
    let a = r.random_range(-2.0..2.0);
    let b = r.random_range(0.2..3.0);
    let c = r.random_range(-3.0..3.0);
    let dof = r.random_range(2.5..30.0);
    let nu = r.random_range(0.7..4.0);
    match family {
        Family::Normal => DistSpec::normal(a, b),
        Family::SkewNormal => DistSpec::skew_normal(a, b, c),
        Family::StudentT => DistSpec::student_t(a, b, dof),
        Family::SkewT => DistSpec::skew_t(a, b, c, dof),
        Family::Ged => DistSpec::ged(a, b, nu),
        Family::SkewGed => DistSpec::skew_ged(a, b, c, nu),
    }
}

/// Composite Simpson over [lo, hi] with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let (mut worst_rt, mut worst_mass, mut checked) = (0.0f64, 0.0f64, 0usize);
    let mut failures = Vec::new();
    for family in Family::ALL {
        for _ in 0..50 {
            let s = random_spec(family, &mut r);
            for k in 0..=300 {
                let x = s.a + s.b * (-15.0 + 0.1 * k as f64);
                let p = s.cdf(x);
                if !(0.005..=0.995).contains(&p) {
                    continue;
                }
                checked += 1;
                let back = s.quantile(p).map_err(|e| format!("{s:?}: {e}"))?;
                let err = (back - x).abs() / (1.0 + x.abs());
                worst_rt = worst_rt.max(err);
                if err > 1e-6 {
                    failures.push(format!("{s:?} at {x}: {back}"));
                }
            }
            // x = a ± b·y² smooths the GED cusp at the location.
            let side = |sign: f64| simpson(|y| 2.0 * s.b * y * s.pdf(s.a + sign * s.b * y * y), 0.0, 15.0, 30_000);
            let mass = side(-1.0) + side(1.0);
            worst_mass = worst_mass.max((mass - 1.0).abs());
            if (mass - 1.0).abs() > 1e-4 {
                failures.push(format!("{s:?}: mass {mass}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "300 parameter sets, {checked} round trips, worst round-trip {worst_rt:.1e}, worst |mass−1| {worst_mass:.1e}, {secs:.1}s"
    );
    check(failures.is_empty() && secs < 60.0, if failures.is_empty() { detail } else { format!("{detail}; {}", failures[0]) })
}

fn garch11(variant: Variant, mean: f64, omega: f64, arch: f64, asym: f64, psi: f64) -> ModelSpec {
    ModelSpec {
        arma: ArmaSpec::constant(mean),
        garch: GarchSpec {
            variant,
            q: 1,
            p: 1,
            omega,
            arch: vec![arch],
            asymmetry: if variant.has_asymmetry() { vec![asym] } else { vec![] },
            garch: vec![psi],
        },
        innovation: InnovationSpec::normal(),
    }
}

fn params(m: &ModelSpec) -> Vec<f64> {
    let g = &m.garch;
    let mut v = vec![m.arma.mean, g.omega];
    v.extend(&g.arch);
    v.extend(&g.asymmetry);
    v.extend(&g.garch);
    v
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let truths = [
        ("garch", garch11(Variant::Garch, 0.05, 0.05, 0.10, 0.0, 0.85)),
        ("egarch", garch11(Variant::Egarch, 0.05, 0.0, -0.10, 0.20, 0.95)),
        ("gjr", garch11(Variant::Gjr, 0.05, 0.05, 0.05, 0.10, 0.85)),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, truth) in &truths {
        let want = params(truth);
        let mut errs: Vec<Vec<f64>> = vec![Vec::new(); want.len()];
        for seed in 0..20 {
            let r = truth.simulate(5000, 500, 1000 + seed).map_err(|e| e.to_string())?;
            let f = fit(&r, (0, 0), (1, 1), truth.garch.variant, Innovation::Normal).map_err(|e| format!("{name}: {e}"))?;
            for (k, (g, w)) in params(&f.model).iter().zip(&want).enumerate() {
                errs[k].push((g - w).abs());
            }
        }
        let med: Vec<f64> = errs.into_iter().map(median).collect();
        let worst = med.iter().copied().fold(0.0, f64::max);
        ok &= worst <= 0.05;
        parts.push(format!("{name} worst median error {worst:.4}"));
    }
    let mut worst_sum = 0.0f64;
    for seed in 0..20 {
        let r = truths[0].1.simulate(5000, 500, 2000 + seed).map_err(|e| e.to_string())?;
        let f = fit(&r, (0, 0), (1, 1), Variant::Igarch, Innovation::Normal).map_err(|e| format!("igarch: {e}"))?;
        worst_sum = worst_sum.max((f.model.garch.persistence() - 1.0).abs());
    }
    ok &= worst_sum <= 1e-10;
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    parts.push(format!("igarch |Σα+Σψ−1| ≤ {worst_sum:.1e}, {secs:.0}s"));
    check(ok, parts.join("; "))
}

fn criterion_3() -> Outcome {
    // Daily-scale EGARCH with a strong sign effect.
    let truth = garch11(Variant::Egarch, 0.0003, -0.46, -0.12, 0.20, 0.95);
    let (mut wins, mut counts) = (0, Vec::new());
    for seed in 0..20 {
        let r = truth.simulate(1000, 500, 3000 + seed).map_err(|e| e.to_string())?;
        let opts = FitOptions { seed, ..Default::default() };
        let sel = select_best("egarch", &r, GridLimit::Full, &opts).map_err(|e| e.to_string())?;
        counts.push(sel.league.len());
        if sel.best.model.garch.variant == Variant::Egarch {
            wins += 1;
        }
    }
    let all_288 = counts.iter().all(|&c| c == 288);
    check(all_288 && wins >= 16, format!("league rows {:?}; egarch selected in {wins}/20", counts.first()))
}

fn criterion_4() -> Outcome {
    let cases = [
        ("clayton(2)", CopulaModel::clayton(2, 2.0), 2.0 / (2.0 + 2.0)),
        ("gumbel(2)", CopulaModel::gumbel(2, 2.0), 1.0 - 1.0 / 2.0),
        (
            "gaussian(0.5)",
            CopulaModel::gaussian(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])),
            2.0 / std::f64::consts::PI * 0.5f64.asin(),
        ),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, (name, m, want)) in cases.into_iter().enumerate() {
        let m = m.map_err(|e| e.to_string())?;
        let u = sample_copula(&m, 10_000, 40 + i as u64).map_err(|e| e.to_string())?;
        let t = kendall_tau(&column(&u, 0), &column(&u, 1));
        ok &= (t - want).abs() <= 0.03;
        parts.push(format!("{name} τ {t:.4} vs {want:.4}"));
    }
    check(ok, parts.join("; "))
}

fn equicorr(d: usize, r: f64) -> DMatrix<f64> {
    let mut m = DMatrix::from_element(d, d, r);
    m.fill_diagonal(1.0);
    m
}

fn criterion_5() -> Outcome {
    let truth = CopulaModel::t(&equicorr(5, 0.5), 5.0).map_err(|e| e.to_string())?;
    let mut wins = 0;
    for seed in 0..20 {
        let u = sample_copula(&truth, 500, 500 + seed).map_err(|e| e.to_string())?;
        let fits = CopulaFamily::ALL
            .iter()
            .map(|&f| fit_copula_rows(f, &u))
            .collect::<garch_copula::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let best = fits.iter().min_by(|a, b| a.aic.total_cmp(&b.aic)).expect("four fits");
        if best.family == CopulaFamily::T {
            wins += 1;
        }
    }
    check(wins >= 16, format!("t copula has the lowest AIC in {wins}/20"))
}

/// Trivariate gaussian copula density from the correlation inverse and determinant.
fn gaussian_copula_density(r: &DMatrix<f64>, u: &[f64]) -> f64 {
    let n = Normal::standard();
    let z = nalgebra::DVector::from_iterator(u.len(), u.iter().map(|&p| n.inverse_cdf(p)));
    let inv = r.clone().try_inverse().expect("positive definite");
    let q = (z.transpose() * (inv - DMatrix::identity(u.len(), u.len())) * &z)[(0, 0)];
    (-0.5 * q).exp() / r.determinant().sqrt()
}

fn criterion_6() -> Outcome {
    let (r01, r12, r02): (f64, f64, f64) = (0.6, 0.4, 0.5);
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, r01, r02, r01, 1.0, r12, r02, r12, 1.0]);
    let partial = (r02 - r01 * r12) / ((1.0 - r01 * r01) * (1.0 - r12 * r12)).sqrt();
    let s = VineStructure {
        kind: VineKind::DVine,
        dim: 3,
        trees: vec![vec![VineEdge::new(0, 1, vec![]), VineEdge::new(1, 2, vec![])], vec![VineEdge::new(0, 2, vec![1])]],
    };
    let pair = |r| PairCopula::gaussian(r).map_err(|e| e.to_string());
    let vine = VineModel::new(&s, vec![vec![pair(r01)?, pair(r12)?], vec![pair(partial)?]]).map_err(|e| e.to_string())?;
    let mut g = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u: Vec<f64> = (0..3).map(|_| g.random_range(0.001..0.999)).collect();
        let a = vine_density(&vine, &u).map_err(|e| e.to_string())?;
        let b = gaussian_copula_density(&corr, &u);
        worst = worst.max(((a - b) / b).abs());
    }
    let rows = simulate_vine(&vine, 10_000, 66).map_err(|e| e.to_string())?;
    let fitted = select_vine(&rows, VineKind::DVine, &DEFAULT_PAIR_FAMILIES).map_err(|e| e.to_string())?;
    let mut worst_param = 0.0f64;
    let mut families_ok = true;
    for e in &fitted.trees[0] {
        let [a, b] = e.edge.conditioned;
        let want = match (a.min(b), a.max(b)) {
            (0, 1) => r01,
            (1, 2) => r12,
            _ => r02,
        };
        families_ok &= matches!(e.copula.family, PairFamily::Gaussian | PairFamily::T);
        worst_param = worst_param.max((e.copula.params[0] - want).abs());
    }
    check(
        worst <= 1e-6 && worst_param <= 0.05 && families_ok,
        format!("density rel. error {worst:.1e}; tree-1 ρ error {worst_param:.4}"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let gauss = CopulaModel::gaussian(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).map_err(|e| e.to_string())?;
    let clay = CopulaModel::clayton(2, 4.0).map_err(|e| e.to_string())?;
    let (mut kept, mut rejected) = (0, 0);
    for seed in 0..20 {
        let u = sample_copula(&gauss, 500, 700 + seed).map_err(|e| e.to_string())?;
        let m = fit_copula_rows(CopulaFamily::Gaussian, &u).map_err(|e| e.to_string())?;
        if gof_test(&m, &u, 100, seed).map_err(|e| e.to_string())?.p_value > 0.05 {
            kept += 1;
        }
        let u = sample_copula(&clay, 500, 800 + seed).map_err(|e| e.to_string())?;
        let m = fit_copula_rows(CopulaFamily::Gaussian, &u).map_err(|e| e.to_string())?;
        if gof_test(&m, &u, 100, seed).map_err(|e| e.to_string())?.p_value <= 0.05 {
            rejected += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        kept >= 18 && rejected >= 16 && secs < 600.0,
        format!("well specified p > 0.05 in {kept}/20; clayton data vs gaussian rejected in {rejected}/20; {secs:.0}s"),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut bounded_ok = true;
    for seed in 0..20 {
        let mut r = rng(seed);
        let a = DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0) * 0.01);
        let sigma = &a * a.transpose() + DMatrix::identity(3, 3) * 1e-5;
        let mu: Vec<f64> = (0..3).map(|_| r.random_range(0.0..0.002)).collect();
        let m = MomentEstimates::new(mu, sigma, MomentSource::Historical).map_err(|e| e.to_string())?;
        for bound in [0.0, 0.01] {
            let (mut gv, mut gs) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=1000usize {
                for j in 0..=1000 - i {
                    let w = [i as f64 / 1000.0, j as f64 / 1000.0, (1000 - i - j) as f64 / 1000.0];
                    if w.iter().any(|&x| x < bound - 1e-12) {
                        continue;
                    }
                    let v = m.portfolio_variance(&w);
                    gv = gv.min(v);
                    gs = gs.max(m.portfolio_return(&w) / v.sqrt());
                }
            }
            let mv = min_variance(&m, bound).map_err(|e| e.to_string())?;
            let tg = tangency(&m, bound, 0.0).map_err(|e| e.to_string())?;
            // Relative to the grid optimum so the tolerance is scale free.
            worst = worst.max((mv.achieved - gv).abs() / gv).max((tg.achieved - gs).abs() / gs);
            if bound > 0.0 {
                for w in [&mv.weights, &tg.weights] {
                    bounded_ok &= w.iter().all(|&x| x >= bound - 1e-12) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
                }
            }
        }
    }
    check(worst <= 1e-4 && bounded_ok, format!("worst relative gap to the 0.001 grid {worst:.1e}; 1% floor respected: {bounded_ok}"))
}

fn criterion_9() -> Outcome {
    // Sample mean 0.001 and sample standard deviation 0.01.
    let a = 0.01 * (999.0f64 / 1000.0).sqrt();
    let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.001 + a } else { 0.001 - a }).collect();
    let sr = sharpe_ratio(&x, 0.0).map_err(|e| e.to_string())?;
    let same = adjusted_sharpe_from(sr, 0.0, 0.0);
    let asr = adjusted_sharpe_from(0.5, -1.0, 0.0);
    check(
        (sr - 0.1).abs() <= 1e-12 && (same - sr).abs() <= 1e-12 && (asr - 0.458333).abs() <= 1e-6,
        format!("SR {sr}; ASR(S=K=0) − SR {:.1e}; ASR(S=−1, SR=0.5) {asr:.6}", same - sr),
    )
}

fn run_cli(args: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(start.elapsed())
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn json_data(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(v["data"].clone())
}

/// Checks the shape of one pipeline run's artifacts.
fn protocol_shape(dir: &Path) -> Result<String, String> {
    let marg = csv_rows(&dir.join("fit/marginals.csv"))?;
    let want = ["asset_id", "garch_model", "garch_order", "arma_model", "cond_distr"];
    if marg[0][..5] != want || marg.len() != 6 {
        return Err(format!("marginal table {:?} with {} rows", marg[0], marg.len() - 1));
    }
    let cmp = csv_rows(&dir.join("dependence/comparison.csv"))?;
    let models: Vec<&str> = cmp[1..].iter().map(|r| r[0].as_str()).collect();
    let want_models = ["gaussian", "t", "clayton", "gumbel", "rvine", "cvine", "dvine"];
    if cmp[0][..5] != ["model", "class", "gof_p", "aic", "bic"] || models != want_models {
        return Err(format!("dependence comparison {models:?}"));
    }
    if cmp[1..].iter().filter(|r| r[7] == "true").count() != 1 {
        return Err("dependence comparison must select exactly one model".into());
    }
    let sim = json_data(&dir.join("simulation/paths.bin.json"))?;
    if sim["n_paths"] != 5000 || sim["horizon"] != 90 {
        return Err(format!("simulation {sim}"));
    }
    let bt = json_data(&dir.join("backtest/windows.json"))?;
    let windows = bt["result"]["windows"].as_array().cloned().unwrap_or_default();
    let days: Vec<u64> = windows.iter().filter_map(|w| w["days"].as_u64()).collect();
    if days != [30, 30, 30] || windows.iter().any(|w| w["report"].is_null()) {
        return Err(format!("backtest windows {days:?}"));
    }
    let league = csv_rows(&dir.join("fit/ASSET1_league.csv"))?.len() - 1;
    Ok(format!("5 model records, 7 dependence rows, 5000×90 paths, 3 windows, {league}-row league"))
}

fn criterion_10(work: &Path, panel: &Path) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (grid, limit) in [("small", Duration::from_secs(15 * 60)), ("full", Duration::from_secs(2 * 3600))] {
        let out = work.join(format!("defaults-{grid}"));
        let took = run_cli(&[
            "--input",
            panel.to_str().unwrap(),
            "--seed",
            "2024",
            "--grid-limit",
            grid,
            "--output",
            out.to_str().unwrap(),
            "run",
        ])?;
        match protocol_shape(&out) {
            Ok(s) => parts.push(format!("{grid} grid: {s}, {:.0}s (limit {}s)", took.as_secs_f64(), limit.as_secs())),
            Err(e) => {
                ok = false;
                parts.push(format!("{grid} grid: {e}"));
            }
        }
        ok &= took <= limit;
    }
    check(ok, parts.join("; "))
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(bytes) = std::fs::read(&p) {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

fn criterion_11(work: &Path, panel: &Path) -> Outcome {
    let base = |dir: &Path| {
        vec![
            "--input".to_string(),
            panel.display().to_string(),
            "--seed".into(),
            "77".into(),
            "--grid-limit".into(),
            "small".into(),
            "--gof-bootstrap".into(),
            "20".into(),
            "--output".into(),
            dir.display().to_string(),
        ]
    };
    let commands = ["ingest", "fit", "dependence", "simulate", "optimize", "backtest", "report"];
    let (a, b) = (work.join("det-a"), work.join("det-b"));
    let mut full = base(&a);
    full.push("run".into());
    run_cli(&full.iter().map(String::as_str).collect::<Vec<_>>())?;
    // The same outputs command by command into a fresh directory.
    for c in commands {
        let mut args = base(&b);
        args.push(c.into());
        run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
    }
    let (ta, tb) = (tree(&a), tree(&b));
    let differing: Vec<_> = ta.iter().filter(|(k, v)| tb.get(*k) != Some(*v)).map(|(k, _)| k.display().to_string()).collect();
    let missing = tb.keys().filter(|k| !ta.contains_key(*k)).count();
    check(
        differing.is_empty() && missing == 0 && ta.len() > 20,
        format!("{} files compared across 8 commands, differing {differing:?}", ta.len()),
    )
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let panel = work.path().join("panel.csv");
    let spec = SyntheticSpec { n_assets: 5, n_days: 1000, seed: 10, ..Default::default() };
    let prices = synthetic_panel(&spec).expect("synthetic panel");
    garch_copula::ingestion::write_price_panel(std::fs::File::create(&panel).expect("panel file"), &prices)
        .expect("write panel");

    let criteria: Vec<Criterion> = vec![
        ("distribution round trips", Box::new(criterion_1)),
        ("GARCH parameter recovery", Box::new(criterion_2)),
        ("model-selection grid", Box::new(criterion_3)),
        ("copula Kendall τ", Box::new(criterion_4)),
        ("t copula selection", Box::new(criterion_5)),
        ("vine correctness", Box::new(criterion_6)),
        ("GoF calibration", Box::new(criterion_7)),
        ("optimizer oracle", Box::new(criterion_8)),
        ("Sharpe/ASR pins", Box::new(criterion_9)),
        ("end-to-end protocol", Box::new(|| criterion_10(work.path(), &panel))),
        ("determinism", Box::new(|| criterion_11(work.path(), &panel))),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
