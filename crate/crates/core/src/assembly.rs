//! Residual and Jacobian of the fully discrete system for one time step.
//!
//! Unknowns per node `k`: position `X_k`, normal curvature component `p_k`
//! and tangential component `q_k`. Equations per node, tested against the
//! hat function of node `k`:
//!
//! * normal velocity: `int V.(phi nu_bar) - int p' phi' rho_bar = 0`
//! * tangential velocity: `int V.(phi tau_bar) = 0`
//! * curvature (vector): `int (p nu_bar + q tau_bar) phi - theta_k = 0`
//!
//! with `V = (X^n - X^{n-1}) / tau` and the time-integrated element data from
//! [`crate::timequad`]. All element integrals are of degree at most two and
//! are evaluated exactly with two-point Gauss.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::geometry::{CurveState, Mat2, Vec2};
use crate::linalg::{zigzag_order, SparseSystem};
use crate::timequad::{EdgeTimeData, TimeWeight};

/// Which Newton matrix to build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianVariant {
    /// Derivative of the `rho_bar` and jump terms taken with the unweighted
    /// `|D|^-3` integrals, term for term as the linearized system is usually
    /// printed. Only the `|D|^-1` jump term carries the time weight.
    AsWritten,
    /// Exact derivative: every `|D|^-3` integral carries the linear time
    /// weight `(t - t_{n-1}) / tau`.
    #[default]
    TimeWeighted,
}

impl JacobianVariant {
    fn weight(self) -> TimeWeight {
        match self {
            JacobianVariant::AsWritten => TimeWeight::Unweighted,
            JacobianVariant::TimeWeighted => TimeWeight::Linear,
        }
    }
}

/// Position and curvature components at the new time level.
#[derive(Clone, Debug, PartialEq)]
pub struct StepUnknowns {
    pub positions: Vec<Vec2>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl StepUnknowns {
    pub fn new(positions: Vec<Vec2>, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let m = positions.len();
        if p.len() != m || q.len() != m {
            return Err(FlowError::InvalidParameter(format!(
                "unknown blocks disagree: {m} positions, {} p, {} q",
                p.len(),
                q.len()
            )));
        }
        let finite = positions.iter().all(|v| v.is_finite())
            && p.iter().chain(&q).all(|v| v.is_finite());
        if !finite {
            return Err(FlowError::InvalidParameter("non-finite unknowns".into()));
        }
        Ok(StepUnknowns { positions, p, q })
    }

    /// Positions from `curve`, zero curvature.
    pub fn at_rest(curve: &CurveState) -> Self {
        let m = curve.len();
        StepUnknowns {
            positions: curve.nodes().to_vec(),
            p: vec![0.0; m],
            q: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn to_vec(&self, map: &DofMap) -> Vec<f64> {
        let mut v = vec![0.0; map.len()];
        for k in 0..self.len() {
            v[map.x(k, 0)] = self.positions[k].x;
            v[map.x(k, 1)] = self.positions[k].y;
            v[map.p(k)] = self.p[k];
            v[map.q(k)] = self.q[k];
        }
        v
    }

    pub fn from_vec(map: &DofMap, v: &[f64]) -> Self {
        let m = map.nodes();
        StepUnknowns {
            positions: (0..m)
                .map(|k| Vec2::new(v[map.x(k, 0)], v[map.x(k, 1)]))
                .collect(),
            p: (0..m).map(|k| v[map.p(k)]).collect(),
            q: (0..m).map(|k| v[map.q(k)]).collect(),
        }
    }
}

/// Layout `[X_0.x, X_0.y, ..., X_{M-1}.y, p_0 .. p_{M-1}, q_0 .. q_{M-1}]`.
///
/// Equation rows reuse the same indices: curvature rows at the position
/// dofs, normal-velocity rows at `p`, tangential-velocity rows at `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofMap {
    m: usize,
}

impl DofMap {
    pub fn new(m: usize) -> Self {
        DofMap { m }
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn len(&self) -> usize {
        4 * self.m
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn x(&self, k: usize, c: usize) -> usize {
        2 * k + c
    }

    #[inline]
    pub fn p(&self, k: usize) -> usize {
        2 * self.m + k
    }

    #[inline]
    pub fn q(&self, k: usize) -> usize {
        3 * self.m + k
    }

    /// Row of the curvature equation, component `c`.
    #[inline]
    pub fn row_curvature(&self, k: usize, c: usize) -> usize {
        self.x(k, c)
    }

    #[inline]
    pub fn row_normal(&self, k: usize) -> usize {
        self.p(k)
    }

    #[inline]
    pub fn row_tangential(&self, k: usize) -> usize {
        self.q(k)
    }

    /// Node owning index `i`.
    pub fn node_of(&self, i: usize) -> usize {
        if i < 2 * self.m {
            i / 2
        } else {
            i % self.m
        }
    }

    /// Permutation that makes the assembled matrix banded.
    pub fn band_order(&self) -> Vec<usize> {
        zigzag_order(self.m)
            .into_iter()
            .flat_map(|k| [self.x(k, 0), self.x(k, 1), self.p(k), self.q(k)])
            .collect()
    }
}

/// Exact integral over `[lo, hi]` of a polynomial of degree at most three.
pub fn element_integral_deg2(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo) / 3f64.sqrt();
    0.5 * (hi - lo) * (f(c - r) + f(c + r))
}

/// Local mass matrix `int phi_a phi_b` on an element of width `h`.
fn local_mass(h: f64) -> [[f64; 2]; 2] {
    let left = |x: f64| 1.0 - x / h;
    let right = |x: f64| x / h;
    let ll = element_integral_deg2(|x| left(x) * left(x), 0.0, h);
    let lr = element_integral_deg2(|x| left(x) * right(x), 0.0, h);
    let rr = element_integral_deg2(|x| right(x) * right(x), 0.0, h);
    [[ll, lr], [lr, rr]]
}

fn edge_data(prev: &CurveState, guess: &StepUnknowns, tau: f64) -> Result<Vec<EdgeTimeData>> {
    let m = prev.len();
    if guess.len() != m {
        return Err(FlowError::InvalidParameter(format!(
            "guess has {} nodes, curve has {m}",
            guess.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(FlowError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    (0..m)
        .map(|k| {
            let h = prev.width(k);
            let e_new = guess.positions[(k + 1) % m] - guess.positions[k];
            EdgeTimeData::compute(prev.edge(k) / h, e_new / h, tau).map_err(|c| c.at(k))
        })
        .collect()
}

/// Residual of the nonlinear step equations at `guess`.
pub fn assemble_residual(prev: &CurveState, guess: &StepUnknowns, tau: f64) -> Result<Vec<f64>> {
    Ok(assemble(prev, guess, tau, None)?.0)
}

/// Newton system: matrix is the derivative of the residual with respect to
/// the unknowns, right-hand side is minus the residual.
pub fn assemble_jacobian(
    prev: &CurveState,
    guess: &StepUnknowns,
    tau: f64,
    variant: JacobianVariant,
) -> Result<SparseSystem> {
    let (res, sys) = assemble(prev, guess, tau, Some(variant))?;
    let mut sys = sys.expect("matrix requested");
    sys.rhs = res.into_iter().map(|r| -r).collect();
    Ok(sys)
}

pub(crate) fn assemble(
    prev: &CurveState,
    guess: &StepUnknowns,
    tau: f64,
    variant: Option<JacobianVariant>,
) -> Result<(Vec<f64>, Option<SparseSystem>)> {
    let data = edge_data(prev, guess, tau)?;
    let m = prev.len();
    let map = DofMap::new(m);
    let mut res = vec![0.0; map.len()];
    let mut sys = variant.map(|_| {
        let mut s = SparseSystem::new(map.len());
        s.entries.reserve(m * 80);
        s.band_order = map.band_order();
        s
    });

    let rot = Mat2::new(0.0, -1.0, 1.0, 0.0);
    let sign = [-1.0, 1.0];

    for (k, ed) in data.iter().enumerate() {
        let h = prev.width(k);
        let mass = local_mass(h);
        let nodes = [k, (k + 1) % m];
        let vel = nodes.map(|i| (guess.positions[i] - prev.node(i)) / tau);
        let p = nodes.map(|i| guess.p[i]);
        let q = nodes.map(|i| guess.q[i]);
        let dp = (p[1] - p[0]) / h;

        for a in 0..2 {
            let i = nodes[a];
            let w = vel[0] * mass[a][0] + vel[1] * mass[a][1];
            let pm = p[0] * mass[a][0] + p[1] * mass[a][1];
            let qm = q[0] * mass[a][0] + q[1] * mass[a][1];
            res[map.row_normal(i)] += w.dot(ed.nu_bar) - sign[a] * ed.rho_bar * dp;
            res[map.row_tangential(i)] += w.dot(ed.tau_bar);
            let c = ed.nu_bar * pm + ed.tau_bar * qm + ed.paths.unit_tangent * sign[a];
            res[map.row_curvature(i, 0)] += c.x;
            res[map.row_curvature(i, 1)] += c.y;

            let (Some(sys), Some(variant)) = (sys.as_mut(), variant) else {
                continue;
            };
            let gamma = ed.paths.inv_cube_weighted(variant.weight());
            let big_a = ed.paths.inv_cube_outer_weighted(variant.weight());
            let jump_block = Mat2::new(ed.a_weight, 0.0, 0.0, ed.a_weight) - big_a;
            let curv_block = rot * (0.5 * tau * pm) + Mat2::new(1.0, 0.0, 0.0, 1.0) * (0.5 * tau * qm);
            let nu_coef = -w.perp() * (0.5 * tau);
            let tau_coef = w * (0.5 * tau);

            for b in 0..2 {
                let j = nodes[b];
                let dd = sign[b] / h;
                // d/dX_j: direct velocity dependence plus dependence of the
                // element data on the edge vector.
                let row_n = ed.nu_bar * (mass[a][b] / tau)
                    + nu_coef * dd
                    + gamma * (sign[a] * dp * dd);
                let row_t = ed.tau_bar * (mass[a][b] / tau) + tau_coef * dd;
                let blk = curv_block * dd + jump_block * (sign[a] * dd);
                for c in 0..2 {
                    let col = map.x(j, c);
                    sys.add(map.row_normal(i), col, comp(row_n, c));
                    sys.add(map.row_tangential(i), col, comp(row_t, c));
                    sys.add(map.row_curvature(i, 0), col, blk.m[0][c]);
                    sys.add(map.row_curvature(i, 1), col, blk.m[1][c]);
                }
                sys.add(map.row_normal(i), map.p(j), -sign[a] * ed.rho_bar * dd);
                sys.add(map.row_curvature(i, 0), map.p(j), mass[a][b] * ed.nu_bar.x);
                sys.add(map.row_curvature(i, 1), map.p(j), mass[a][b] * ed.nu_bar.y);
                sys.add(map.row_curvature(i, 0), map.q(j), mass[a][b] * ed.tau_bar.x);
                sys.add(map.row_curvature(i, 1), map.q(j), mass[a][b] * ed.tau_bar.y);
            }
        }
    }
    // The curvature rows were assembled as `... + sum_elements sign * U`,
    // which is `... - theta` at every node.
    Ok((res, sys))
}

#[inline]
fn comp(v: Vec2, c: usize) -> f64 {
    if c == 0 {
        v.x
    } else {
        v.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ellipse, make_flower, polygon_area};
    use crate::timequad::node_jump_integrals;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_gauss_is_exact_to_cubic() {
        assert_relative_eq!(element_integral_deg2(|x| x * (1.0 - x), 0.0, 1.0), 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(element_integral_deg2(|x| x * x, 0.0, 1.0), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(element_integral_deg2(|x| x * x * x, 0.0, 2.0), 4.0, max_relative = 1e-15);
        let mm = local_mass(0.3);
        assert_relative_eq!(mm[0][0], 0.1, max_relative = 1e-15);
        assert_relative_eq!(mm[0][1], 0.05, max_relative = 1e-15);
    }

    #[test]
    fn static_guess_residual_is_minus_theta() {
        let c = make_flower(0.3, 5, 40).unwrap();
        let tau = 1e-3;
        let g = StepUnknowns::at_rest(&c);
        let r = assemble_residual(&c, &g, tau).unwrap();
        let map = DofMap::new(c.len());
        let theta = node_jump_integrals(&c, &c, tau).unwrap().theta;
        for k in 0..c.len() {
            assert_eq!(r[map.row_normal(k)], 0.0);
            assert_eq!(r[map.row_tangential(k)], 0.0);
            assert!((r[map.row_curvature(k, 0)] + theta[k].x).abs() < 1e-17);
            assert!((r[map.row_curvature(k, 1)] + theta[k].y).abs() < 1e-17);
        }
    }

    #[test]
    fn normal_rows_sum_to_area_change() {
        let c = make_ellipse(2.0, 1.0, 24).unwrap();
        let m = c.len();
        let new: Vec<Vec2> = c
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &x)| x + Vec2::new((k as f64).sin(), (3.0 * k as f64).cos()) * 0.01)
            .collect();
        let g = StepUnknowns::new(new.clone(), (0..m).map(|k| k as f64 * 0.1).collect(), vec![0.3; m]).unwrap();
        let r = assemble_residual(&c, &g, 0.01).unwrap();
        let map = DofMap::new(m);
        let s: f64 = (0..m).map(|k| r[map.row_normal(k)]).sum();
        let a_new = polygon_area(&c.with_nodes(new).unwrap());
        assert!((s - (polygon_area(&c) - a_new)).abs() < 1e-14, "{s}");
    }

    #[test]
    fn tangential_rows_do_not_touch_curvature_dofs() {
        let c = make_ellipse(2.0, 1.0, 16).unwrap();
        let g = StepUnknowns::at_rest(&c);
        let sys = assemble_jacobian(&c, &g, 1e-3, JacobianVariant::AsWritten).unwrap();
        let map = DofMap::new(16);
        for (i, j, v) in sys.compressed() {
            if i >= 3 * 16 {
                assert!(j < 2 * 16 || v == 0.0, "row {i} col {j} = {v}");
            }
        }
        let _ = map;
    }

    #[test]
    fn rhs_is_minus_residual() {
        let c = make_flower(0.2, 3, 20).unwrap();
        let mut g = StepUnknowns::at_rest(&c);
        g.p.iter_mut().enumerate().for_each(|(k, p)| *p = (k as f64).cos());
        g.positions[3] += Vec2::new(1e-3, -2e-3);
        let r = assemble_residual(&c, &g, 1e-2).unwrap();
        let sys = assemble_jacobian(&c, &g, 1e-2, JacobianVariant::TimeWeighted).unwrap();
        for (a, b) in r.iter().zip(&sys.rhs) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn band_order_is_a_permutation() {
        let map = DofMap::new(7);
        let mut o = map.band_order();
        o.sort();
        assert_eq!(o, (0..28).collect::<Vec<_>>());
        for i in 0..28 {
            assert!(map.node_of(i) < 7);
        }
    }
}
