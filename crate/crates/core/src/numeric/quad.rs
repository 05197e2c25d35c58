//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn recurse<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: u32,
) -> f64 {
    if err <= abs_tol.max(rel_tol * whole.abs()) || depth >= MAX_DEPTH || (b - a).abs() < 1e-300 {
        return whole;
    }
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    recurse(f, a, m, l, el, 0.5 * abs_tol, rel_tol, depth + 1)
        + recurse(f, m, b, r, er, 0.5 * abs_tol, rel_tol, depth + 1)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Four initial panels so a narrow peak is not missed by a single rule.
    let h = (b - a) / 4.0;
    (0..4)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i == 3 { b } else { lo + h };
            let (whole, err) = gk15(&mut f, lo, hi);
            recurse(&mut f, lo, hi, whole, err, 0.25 * abs_tol, rel_tol, 1)
        })
        .sum()
}

/// `∫_{-∞}^{z} f(t) dt`, through the map `t = z - (1 - s)/s` on `s ∈ (0, 1]`.
pub fn integrate_lower_tail<F: FnMut(f64) -> f64>(mut f: F, z: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let t = z - (1.0 - s) / s;
        let v = f(t) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol)
}

/// `∫_{z}^{∞} f(t) dt`.
pub fn integrate_upper_tail<F: FnMut(f64) -> f64>(mut f: F, z: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate_lower_tail(|t| f(-t), -z, abs_tol, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_gaussian() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((v - 0.0).abs() < 1e-13);
        let v = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-15, 1e-14);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn infinite_tails() {
        let dens = |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x));
        let lower = integrate_lower_tail(dens, 1.0, 1e-15, 1e-13);
        assert!((lower - 0.75).abs() < 1e-11);
        let upper = integrate_upper_tail(dens, 1.0, 1e-15, 1e-13);
        assert!((upper - 0.25).abs() < 1e-11);
    }
}
