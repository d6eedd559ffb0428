//! Semi-implicit comparator: linear in the new unknowns, geometry lagged one
//! step, one linear solve per step.
//!
//! Unknowns are the new positions `X` and a scalar curvature `kappa`. With
//! mass lumping and old edge lengths `l_j`, the equations at node `i` read
//!
//! ```text
//! w_i . (X_i - X_i^old) / tau - sum_j (kappa_i - kappa_j) / l_ij = 0
//! kappa_i w_i + sum_j (X_i - X_j) / l_ij = 0
//! ```
//!
//! where `w_i = (e_{i-1} + e_i)^perp / 2` is the lumped inward normal of the
//! old curve. Perimeter decreases, area is not conserved.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::geometry::{CurveState, Vec2};
use crate::linalg::{linear_solve, zigzag_order, SparseSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub tau: f64,
    pub steps: usize,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(FlowError::InvalidParameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.steps == 0 {
            return Err(FlowError::InvalidParameter("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One step of the comparator. Returns the new curve and the curvature
/// solved for alongside it.
pub fn baseline_step_with_curvature(prev: &CurveState, tau: f64) -> Result<(CurveState, Vec<f64>)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(FlowError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let m = prev.len();
    let x = |k: usize, c: usize| 3 * k + c;
    let kap = |k: usize| 3 * k + 2;
    let mut sys = SparseSystem::new(3 * m);
    sys.band_order = zigzag_order(m)
        .into_iter()
        .flat_map(|k| [x(k, 0), x(k, 1), kap(k)])
        .collect();

    let lengths: Vec<f64> = prev.edge_lengths().collect();
    for i in 0..m {
        let il = (i + m - 1) % m;
        let w = (prev.edge(il) + prev.edge(i)).perp() * 0.5;
        let old = prev.node(i);
        // Velocity row.
        sys.add(kap(i), x(i, 0), w.x / tau);
        sys.add(kap(i), x(i, 1), w.y / tau);
        sys.rhs[kap(i)] = w.dot(old) / tau;
        // Curvature rows.
        sys.add(x(i, 0), kap(i), w.x);
        sys.add(x(i, 1), kap(i), w.y);
        for (j, l) in [(il, lengths[il]), ((i + 1) % m, lengths[i])] {
            sys.add(kap(i), kap(i), -1.0 / l);
            sys.add(kap(i), kap(j), 1.0 / l);
            for c in 0..2 {
                sys.add(x(i, c), x(i, c), 1.0 / l);
                sys.add(x(i, c), x(j, c), -1.0 / l);
            }
        }
    }
    let sol = linear_solve(&sys)?;
    let nodes = (0..m).map(|k| Vec2::new(sol[x(k, 0)], sol[x(k, 1)])).collect();
    let kappa = (0..m).map(|k| sol[kap(k)]).collect();
    Ok((prev.with_nodes(nodes)?, kappa))
}

pub fn baseline_step(prev: &CurveState, tau: f64) -> Result<CurveState> {
    Ok(baseline_step_with_curvature(prev, tau)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ellipse, perimeter, polygon_area};

    #[test]
    fn circle_curvature_and_slow_motion() {
        let r = 1.3;
        let m = 32;
        let c = make_ellipse(r, r, m).unwrap();
        let (next, kappa) = baseline_step_with_curvature(&c, 1e-3).unwrap();
        for k in kappa {
            assert!((k - 1.0 / r).abs() < 1e-2, "{k}");
        }
        let moved = c
            .nodes()
            .iter()
            .zip(next.nodes())
            .fold(0.0_f64, |a, (p, q)| a.max((*p - *q).norm()));
        assert!(moved < 1e-10, "{moved}");
    }

    #[test]
    fn ellipse_perimeter_drops_and_area_drifts() {
        let mut c = make_ellipse(2.0, 1.0, 32).unwrap();
        let (a0, mut l) = (polygon_area(&c), perimeter(&c));
        for _ in 0..50 {
            c = baseline_step(&c, 1e-3).unwrap();
            let ln = perimeter(&c);
            assert!(ln <= l);
            l = ln;
        }
        assert!((polygon_area(&c) - a0).abs() / a0 > 1e-8);
    }

    #[test]
    fn translation_commutes_with_the_step() {
        let c = make_ellipse(2.0, 1.0, 16).unwrap();
        let shift = Vec2::new(0.7, -0.4);
        let a = baseline_step(&c, 1e-2).unwrap().translated(shift);
        let b = baseline_step(&c.translated(shift), 1e-2).unwrap();
        for (p, q) in a.nodes().iter().zip(b.nodes()) {
            assert!((*p - *q).max_abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_tau() {
        let c = make_ellipse(1.0, 1.0, 8).unwrap();
        assert!(baseline_step(&c, 0.0).is_err());
        assert!(BaselineConfig { tau: 1e-3, steps: 0 }.validate().is_err());
    }
}
