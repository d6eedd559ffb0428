mod common;

use common::{curve_strategy, vec2};
use proptest::prelude::*;
use sdflow::evolve::redistribute_arclength;
use sdflow::geometry::{
    isoperimetric_ratio, make_ellipse, make_flower, perimeter, polygon_area, read_curve_csv, write_curve_csv, CurveState,
    Vec2,
};

/// Shoelace by the trapezoid form `sum (x_{k+1} - x_k)(y_{k+1} + y_k) / 2`,
/// independent of the cross-product form used by the library.
fn trapezoid_area(nodes: &[Vec2]) -> f64 {
    let m = nodes.len();
    -(0..m)
        .map(|k| {
            let (a, b) = (nodes[k], nodes[(k + 1) % m]);
            (b.x - a.x) * (b.y + a.y)
        })
        .sum::<f64>()
        / 2.0
}

/// Arc length from node 0 to the point of the polygon nearest `p`.
fn arc_position(curve: &CurveState, p: Vec2) -> f64 {
    let m = curve.len();
    let (mut best, mut at, mut before) = (f64::MAX, 0.0, 0.0);
    for k in 0..m {
        let (a, b) = (curve.node(k), curve.node((k + 1) % m));
        let e = b - a;
        let s = ((p - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
        let d = (a + e * s - p).norm();
        if d < best {
            (best, at) = (d, before + s * e.norm());
        }
        before += e.norm();
    }
    at
}

#[test]
fn regular_polygon_identities() {
    for m in [3usize, 4, 7, 100] {
        let c = make_ellipse(1.0, 1.0, m).unwrap();
        let th = std::f64::consts::TAU / m as f64;
        let area = 0.5 * m as f64 * th.sin();
        let len = 2.0 * m as f64 * (0.5 * th).sin();
        assert!((polygon_area(&c) - area).abs() < 1e-14 * m as f64);
        assert!((perimeter(&c) - len).abs() < 1e-14 * m as f64);
        let iso = len * len / (4.0 * std::f64::consts::PI * area);
        assert!((isoperimetric_ratio(&c) - iso).abs() < 1e-14);
    }
}

#[test]
fn flower_area_matches_polar_formula() {
    // Polar area of r = 1 + a cos(k t) is pi (1 + a^2 / 2); the inscribed
    // polygon converges to it at second order.
    let (amp, k) = (0.65, 7);
    let exact = std::f64::consts::PI * (1.0 + amp * amp / 2.0);
    let errs: Vec<f64> = [200, 400, 800]
        .iter()
        .map(|&m| (polygon_area(&make_flower(amp, k, m).unwrap()) - exact).abs())
        .collect();
    assert!(errs[0] / errs[1] > 3.8 && errs[1] / errs[2] > 3.8, "{errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn area_matches_trapezoid_rule(curve in curve_strategy()) {
        let a = polygon_area(&curve);
        prop_assert!((a - trapezoid_area(curve.nodes())).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn rigid_motion_preserves_measures(curve in curve_strategy(), angle in -7.0f64..7.0, shift in vec2(10.0)) {
        let moved = curve.rotated(angle).translated(shift);
        let (a, l) = (polygon_area(&curve), perimeter(&curve));
        prop_assert!((polygon_area(&moved) - a).abs() <= 1e-12 * a.abs().max(shift.norm_sq()));
        prop_assert!((perimeter(&moved) - l).abs() <= 1e-12 * l);
    }

    #[test]
    fn reversal_flips_area_only(curve in curve_strategy()) {
        let r = curve.reversed_raw();
        prop_assert!((polygon_area(&r) + polygon_area(&curve)).abs() <= 1e-13 * polygon_area(&curve).abs());
        prop_assert!((perimeter(&r) - perimeter(&curve)).abs() <= 1e-13 * perimeter(&curve));
    }

    #[test]
    fn isoperimetric_ratio_at_least_one(curve in curve_strategy()) {
        prop_assert!(isoperimetric_ratio(&curve) >= 1.0 - 1e-14);
    }

    #[test]
    fn redistribution_equalizes_arcs(curve in curve_strategy()) {
        let r = redistribute_arclength(&curve).unwrap();
        let (m, total) = (curve.len(), perimeter(&curve));
        for (j, p) in r.curve.nodes().iter().enumerate() {
            prop_assert!((arc_position(&curve, *p) - total * j as f64 / m as f64).abs() <= 1e-12 * total);
        }
        prop_assert_eq!(r.curve.node(0), curve.node(0));
        prop_assert!(perimeter(&r.curve) <= total * (1.0 + 1e-14));
        let change = trapezoid_area(r.curve.nodes()) - trapezoid_area(curve.nodes());
        prop_assert!((r.area_change - change).abs() <= 1e-12 * polygon_area(&curve).abs());
    }

    #[test]
    fn redistributed_nodes_lie_on_old_polygon(curve in curve_strategy()) {
        let r = redistribute_arclength(&curve).unwrap();
        let m = curve.len();
        for p in r.curve.nodes() {
            let d = (0..m)
                .map(|k| {
                    let (a, b) = (curve.node(k), curve.node((k + 1) % m));
                    let e = b - a;
                    let s = ((*p - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
                    (a + e * s - *p).norm()
                })
                .fold(f64::MAX, f64::min);
            prop_assert!(d < 1e-13 * perimeter(&curve));
        }
    }

    #[test]
    fn curve_csv_round_trip(curve in curve_strategy()) {
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let back: CurveState = read_curve_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.nodes(), curve.nodes());
    }
}
