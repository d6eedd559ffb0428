#![allow(dead_code)]

use proptest::prelude::*;
use sdflow::geometry::{make_ellipse, CurveState, Mat2, Vec2};
use sdflow::timequad::PathIntegrals;

/// Adaptive Simpson on `[lo, hi]` with a local error test `|S2 - S1| < 15 eps`,
/// or a floor relative to the panel's absolute mass so the recursion ends
/// near rounding.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, eps: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= (15.0 * eps).max(1e-14 * (b - a) * (fa.abs() + 2.0 * fm.abs() + fb.abs())) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, lo, hi, fa, fm, fb, whole, eps, 40)
}

/// Ellipse with every node pushed radially by a bounded random factor.
pub fn wobbly_ellipse(a: f64, b: f64, bumps: &[f64]) -> CurveState {
    let c = make_ellipse(a, b, bumps.len()).unwrap();
    let nodes = c
        .nodes()
        .iter()
        .zip(bumps)
        .map(|(&p, &s)| p * (1.0 + s))
        .collect();
    CurveState::new(nodes).unwrap()
}

pub fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

/// A convex-ish closed curve: ellipse axes, node count and small bumps.
pub fn curve_strategy() -> impl Strategy<Value = CurveState> {
    (0.5f64..3.0, 0.5f64..3.0, 6usize..40).prop_flat_map(|(a, b, m)| {
        proptest::collection::vec(-0.05f64..0.05, m).prop_map(move |bumps| wobbly_ellipse(a, b, &bumps))
    })
}

pub fn max_dist(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (*p - *q).norm()).fold(0.0, f64::max)
}

/// Every integral in [`PathIntegrals`] by adaptive Simpson, paired with the
/// integral of the absolute integrand as a scale.
pub fn oracle(a: Vec2, b: Vec2, tau: f64) -> Vec<(f64, f64)> {
    let d = |s: f64| a + (b - a) * s;
    let fs: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(move |s| 1.0 / d(s).norm()),
        Box::new(move |s| s / d(s).norm()),
        Box::new(move |s| d(s).x / d(s).norm()),
        Box::new(move |s| d(s).y / d(s).norm()),
        Box::new(move |s| d(s).x / d(s).norm().powi(3)),
        Box::new(move |s| d(s).y / d(s).norm().powi(3)),
        Box::new(move |s| s * d(s).x / d(s).norm().powi(3)),
        Box::new(move |s| s * d(s).y / d(s).norm().powi(3)),
        Box::new(move |s| d(s).x * d(s).x / d(s).norm().powi(3)),
        Box::new(move |s| d(s).x * d(s).y / d(s).norm().powi(3)),
        Box::new(move |s| d(s).y * d(s).y / d(s).norm().powi(3)),
        Box::new(move |s| s * d(s).x * d(s).x / d(s).norm().powi(3)),
        Box::new(move |s| s * d(s).x * d(s).y / d(s).norm().powi(3)),
        Box::new(move |s| s * d(s).y * d(s).y / d(s).norm().powi(3)),
    ];
    fs.iter()
        .map(|f| {
            let v = tau * adaptive_simpson(f, 0.0, 1.0, 1e-16);
            let scale = tau * adaptive_simpson(&|s: f64| f(s).abs(), 0.0, 1.0, 1e-16);
            (v, scale)
        })
        .collect()
}

pub fn flatten(p: &PathIntegrals) -> Vec<f64> {
    let m = |x: Mat2| [x.m[0][0], x.m[0][1], x.m[1][1]];
    let mut v = vec![
        p.inv_norm,
        p.inv_norm_s,
        p.unit_tangent.x,
        p.unit_tangent.y,
        p.inv_cube.x,
        p.inv_cube.y,
        p.inv_cube_s.x,
        p.inv_cube_s.y,
    ];
    v.extend(m(p.inv_cube_outer));
    v.extend(m(p.inv_cube_outer_s));
    v
}

pub fn check_path_integrals(a: Vec2, b: Vec2, tau: f64, rel: f64) -> Result<(), String> {
    let got = flatten(&PathIntegrals::compute(a, b, tau).map_err(|e| format!("{e:?}"))?);
    for (i, (g, (want, scale))) in got.iter().zip(oracle(a, b, tau)).enumerate() {
        if (g - want).abs() > rel * scale {
            return Err(format!("integral {i}: {g} vs {want} (scale {scale}) for a={a:?} b={b:?}"));
        }
    }
    Ok(())
}
