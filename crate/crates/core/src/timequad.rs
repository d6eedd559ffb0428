//! Time integrals over one step of quantities built from the edge vector
//! `D(s) = a + s b`, `s = (t - t_{n-1}) / tau in [0, 1]`, where `a` and
//! `a + b` are the parametric derivatives of one element at the old and new
//! time levels.
//!
//! Every integral carries the factor `tau` from `dt = tau ds`.
//!
//! Two evaluation routes are used. When the edge changes by less than its
//! smallest length along the path (`|b| <= min_s |D(s)|`), the integrands are
//! analytic on a Bernstein ellipse with parameter at least `2 + sqrt(5)` and a
//! 32-point Gauss-Legendre rule is exact to rounding. Otherwise the closed
//! forms below are used; in that regime `|a.b| / |b| < 2 |b|` so dividing by
//! `|b|^2` is well conditioned.

use std::sync::LazyLock;

use crate::error::FlowError;
use crate::geometry::{CurveState, Mat2, Vec2, DEGENERACY_REL};

/// The moving edge passes through (or too close to) zero length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathCollapse {
    pub min_length: f64,
}

impl PathCollapse {
    pub fn at(self, element: usize) -> FlowError {
        FlowError::EdgeCollapse {
            element,
            min_length: self.min_length,
        }
    }
}

/// Whether the integrand carries the extra factor `(t - t_{n-1}) / tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeWeight {
    Unweighted,
    Linear,
}

/// All path integrals needed by one element in one Newton iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PathIntegrals {
    /// `int |D|^-1 dt`
    pub inv_norm: f64,
    /// `int s |D|^-1 dt`
    pub inv_norm_s: f64,
    /// `int D / |D| dt`
    pub unit_tangent: Vec2,
    /// `int |D|^-3 D dt`
    pub inv_cube: Vec2,
    /// `int s |D|^-3 D dt`
    pub inv_cube_s: Vec2,
    /// `int |D|^-3 D D^T dt`
    pub inv_cube_outer: Mat2,
    /// `int s |D|^-3 D D^T dt`
    pub inv_cube_outer_s: Mat2,
}

const GL_POINTS: usize = 32;

/// Gauss-Legendre nodes and weights mapped to [0, 1].
static GAUSS_LEGENDRE_01: LazyLock<[(f64, f64); GL_POINTS]> = LazyLock::new(|| {
    let mut out = [(0.0, 0.0); GL_POINTS];
    for (s, w) in gauss_legendre(GL_POINTS).into_iter().zip(out.iter_mut()) {
        *w = (0.5 * (s.0 + 1.0), 0.5 * s.1);
    }
    out
});

/// Nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = nf * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[i] = (-x, w);
        rule[n - 1 - i] = (x, w);
    }
    rule
}

/// `min_{s in [0,1]} |a + s b|`.
pub fn min_path_norm(a: Vec2, b: Vec2) -> f64 {
    let bb = b.norm_sq();
    if bb == 0.0 {
        return a.norm();
    }
    let s = (-a.dot(b) / bb).clamp(0.0, 1.0);
    (a + b * s).norm()
}

impl PathIntegrals {
    /// Evaluates every integral for the path from `e_old` to `e_new`.
    pub fn compute(e_old: Vec2, e_new: Vec2, tau: f64) -> Result<Self, PathCollapse> {
        let a = e_old;
        let b = e_new - e_old;
        let min_length = min_path_norm(a, b);
        let scale = a.norm().max(e_new.norm());
        if !(min_length > DEGENERACY_REL * scale) {
            return Err(PathCollapse { min_length });
        }
        Ok(if b.norm() <= min_length {
            Self::gauss_legendre(e_old, e_new, tau)
        } else {
            Self::closed_form(e_old, e_new, tau)
        })
    }

    /// 32-point Gauss-Legendre evaluation; accurate to rounding whenever
    /// `|e_new - e_old|` does not exceed the smallest length along the path.
    pub fn gauss_legendre(e_old: Vec2, e_new: Vec2, tau: f64) -> Self {
        let a = e_old;
        let b = e_new - e_old;
        let mut r = PathIntegrals::default();
        for &(s, w) in GAUSS_LEGENDRE_01.iter() {
            let d = a + b * s;
            let n2 = d.norm_sq();
            let n = n2.sqrt();
            let inv = 1.0 / n;
            let inv3 = inv / n2;
            r.inv_norm += w * inv;
            r.inv_norm_s += w * s * inv;
            r.unit_tangent += d * (w * inv);
            r.inv_cube += d * (w * inv3);
            r.inv_cube_s += d * (w * s * inv3);
            let o = Mat2::outer(d, d) * (w * inv3);
            r.inv_cube_outer = r.inv_cube_outer + o;
            r.inv_cube_outer_s = r.inv_cube_outer_s + o * s;
        }
        r.scaled(tau)
    }

    /// Closed-form evaluation. `e_old` and `e_new` must differ.
    ///
    /// With `bh = b/|b|`, `u = a.bh + s|b|`, `d = a.bh^perp` and
    /// `r = sqrt(u^2 + d^2) = |D|`, everything reduces to the antiderivatives
    /// of `1/r`, `u/r`, `1/r^3` and `u/r^3` over `[u0, u0 + |b|]`.
    pub fn closed_form(e_old: Vec2, e_new: Vec2, tau: f64) -> Self {
        let a = e_old;
        let b = e_new - e_old;
        let beta = b.norm();
        let bh = b / beta;
        let bp = bh.perp();
        let u0 = a.dot(bh);
        let d = a.dot(bp);
        let u1 = u0 + beta;
        let r0 = u0.hypot(d);
        let r1 = u1.hypot(d);
        let d2 = d * d;

        let same_sign = u0 >= 0.0 || u1 <= 0.0;
        // int du / r
        let j0 = if u0 >= 0.0 {
            (beta * (1.0 + (u1 + u0) / (r1 + r0)) / (u0 + r0)).ln_1p()
        } else if u1 <= 0.0 {
            (beta * (1.0 - (u1 + u0) / (r1 + r0)) / (r1 - u1)).ln_1p()
        } else {
            let ad = d.abs();
            (u1 / ad).asinh() - (u0 / ad).asinh()
        };
        // int u du / r = r1 - r0
        let j1 = beta * (u1 + u0) / (r1 + r0);
        // int du / r^3
        let k0 = if same_sign {
            beta * (u1 + u0) / ((u1 * r0 + u0 * r1) * r0 * r1)
        } else {
            (u1 / r1 - u0 / r0) / d2
        };
        // int u du / r^3 = 1/r0 - 1/r1
        let k1 = j1 / (r0 * r1);
        // int u^2 du / r^3 and int u^3 du / r^3
        let k2 = j0 - d2 * k0;
        let k3 = j1 - d2 * k1;

        let ib = 1.0 / beta;
        let ib2 = ib * ib;
        let bb = Mat2::outer(bh, bh);
        let bpp = Mat2::outer(bp, bp);
        let sym = Mat2::outer(bh, bp) + Mat2::outer(bp, bh);

        PathIntegrals {
            inv_norm: j0 * ib,
            inv_norm_s: (j1 - u0 * j0) * ib2,
            unit_tangent: (bh * j1 + bp * (d * j0)) * ib,
            inv_cube: (bh * k1 + bp * (d * k0)) * ib,
            inv_cube_s: (bh * (k2 - u0 * k1) + bp * (d * (k1 - u0 * k0))) * ib2,
            inv_cube_outer: (bb * k2 + sym * (d * k1) + bpp * (d2 * k0)) * ib,
            inv_cube_outer_s: (bb * (k3 - u0 * k2)
                + sym * (d * (k2 - u0 * k1))
                + bpp * (d2 * (k1 - u0 * k0)))
                * ib2,
        }
        .scaled(tau)
    }

    fn scaled(mut self, tau: f64) -> Self {
        self.inv_norm *= tau;
        self.inv_norm_s *= tau;
        self.unit_tangent = self.unit_tangent * tau;
        self.inv_cube = self.inv_cube * tau;
        self.inv_cube_s = self.inv_cube_s * tau;
        self.inv_cube_outer = self.inv_cube_outer * tau;
        self.inv_cube_outer_s = self.inv_cube_outer_s * tau;
        self
    }

    pub fn inv_cube_weighted(&self, w: TimeWeight) -> Vec2 {
        match w {
            TimeWeight::Unweighted => self.inv_cube,
            TimeWeight::Linear => self.inv_cube_s,
        }
    }

    pub fn inv_cube_outer_weighted(&self, w: TimeWeight) -> Mat2 {
        match w {
            TimeWeight::Unweighted => self.inv_cube_outer,
            TimeWeight::Linear => self.inv_cube_outer_s,
        }
    }
}

/// `(nu_bar, tau_bar)`: time integrals of `D^perp` and `D`. The integrand is
/// linear in time, so the midpoint value is exact.
pub fn poly_time_averages(e_old: Vec2, e_new: Vec2, tau: f64) -> (Vec2, Vec2) {
    let tau_bar = (e_old + e_new) * (0.5 * tau);
    (tau_bar.perp(), tau_bar)
}

/// `int |D|^-1 dt`.
pub fn inv_norm_time_integral(e_old: Vec2, e_new: Vec2, tau: f64) -> Result<f64, PathCollapse> {
    Ok(PathIntegrals::compute(e_old, e_new, tau)?.inv_norm)
}

/// `int |D|^-3 D dt`, optionally with the linear time weight.
pub fn inv_cube_time_integral(
    e_old: Vec2,
    e_new: Vec2,
    tau: f64,
    weight: TimeWeight,
) -> Result<Vec2, PathCollapse> {
    Ok(PathIntegrals::compute(e_old, e_new, tau)?.inv_cube_weighted(weight))
}

/// `int |D|^-3 D D^T dt`, optionally with the linear time weight.
pub fn inv_cube_outer_time_integral(
    e_old: Vec2,
    e_new: Vec2,
    tau: f64,
    weight: TimeWeight,
) -> Result<Mat2, PathCollapse> {
    Ok(PathIntegrals::compute(e_old, e_new, tau)?.inv_cube_outer_weighted(weight))
}

/// `int D / |D| dt`.
pub fn unit_tangent_time_integral(e_old: Vec2, e_new: Vec2, tau: f64) -> Result<Vec2, PathCollapse> {
    Ok(PathIntegrals::compute(e_old, e_new, tau)?.unit_tangent)
}

/// `int |D|^-1 (t - t_{n-1}) / tau dt`.
pub fn time_weighted_inv_norm(e_old: Vec2, e_new: Vec2, tau: f64) -> Result<f64, PathCollapse> {
    Ok(PathIntegrals::compute(e_old, e_new, tau)?.inv_norm_s)
}

/// Per-element time data feeding the residual and the Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeTimeData {
    pub nu_bar: Vec2,
    pub tau_bar: Vec2,
    pub rho_bar: f64,
    /// `int |D|^-1 s dt`
    pub a_weight: f64,
    pub paths: PathIntegrals,
}

impl EdgeTimeData {
    pub fn compute(e_old: Vec2, e_new: Vec2, tau: f64) -> Result<Self, PathCollapse> {
        let paths = PathIntegrals::compute(e_old, e_new, tau)?;
        let (nu_bar, tau_bar) = poly_time_averages(e_old, e_new, tau);
        Ok(EdgeTimeData {
            nu_bar,
            tau_bar,
            rho_bar: paths.inv_norm,
            a_weight: paths.inv_norm_s,
            paths,
        })
    }
}

fn check_pair(old: &CurveState, new: &CurveState) -> Result<(), FlowError> {
    if old.len() != new.len() || old.partition() != new.partition() {
        return Err(FlowError::InvalidCurve(
            "time levels must share node count and partition".into(),
        ));
    }
    Ok(())
}

/// Per-element time data between two time levels.
pub fn edge_time_data(
    old: &CurveState,
    new: &CurveState,
    tau: f64,
) -> Result<Vec<EdgeTimeData>, FlowError> {
    check_pair(old, new)?;
    (0..old.len())
        .map(|k| {
            let h = old.width(k);
            EdgeTimeData::compute(old.edge(k) / h, new.edge(k) / h, tau).map_err(|c| c.at(k))
        })
        .collect()
}

/// Time integrals of the tangent jump at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeJumpData {
    pub theta: Vec<Vec2>,
}

impl NodeJumpData {
    /// `theta_k = U_k - U_{k-1}` from per-element unit-tangent integrals.
    pub fn from_unit_tangents(u: &[Vec2]) -> Self {
        let m = u.len();
        NodeJumpData {
            theta: (0..m).map(|k| u[k] - u[(k + m - 1) % m]).collect(),
        }
    }

    pub fn sum(&self) -> Vec2 {
        self.theta.iter().fold(Vec2::ZERO, |a, &b| a + b)
    }
}

pub fn node_jump_integrals(
    old: &CurveState,
    new: &CurveState,
    tau: f64,
) -> Result<NodeJumpData, FlowError> {
    check_pair(old, new)?;
    let u = (0..old.len())
        .map(|k| unit_tangent_time_integral(old.edge(k), new.edge(k), tau).map_err(|c| c.at(k)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NodeJumpData::from_unit_tangents(&u))
}
