//! Closed polygonal curves on the periodic unit interval.
//!
//! Node `k` sits at the reference coordinate `xi[k]`; element `k` joins node
//! `k` to node `k + 1 (mod M)`, so node `k` is shared by elements `k - 1`
//! (left) and `k` (right).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

/// Relative degeneracy threshold: edges shorter than this times the mean
/// edge length are treated as collapsed.
pub const DEGENERACY_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    /// Counter-clockwise rotation by a right angle.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Row-major 2x2 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 { m: [[0.0; 2]; 2] };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn outer(u: Vec2, v: Vec2) -> Self {
        Mat2::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o * -1.0
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        let mut r = self;
        r.m.iter_mut().flatten().for_each(|v| *v *= s);
        r
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let mut r = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        r
    }
}

/// Per-element geometric frame of a polygonal curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFrame {
    pub tangent: Vec2,
    /// `tangent.perp()`; points into the enclosed region for
    /// counter-clockwise curves.
    pub normal: Vec2,
    /// Euclidean length of the edge.
    pub length: f64,
    /// Parametric derivative on the element, `(x_{k+1} - x_k) / width`.
    pub edge_vector: Vec2,
}

/// A closed polygonal curve at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveState {
    nodes: Vec<Vec2>,
    /// `xi[0] = 0 < ... < xi[M] = 1`; `xi[M]` is identified with `xi[0]`.
    xi: Vec<f64>,
}

impl CurveState {
    /// Validates the nodes, attaches the uniform partition and reverses the
    /// node order if the curve is clockwise.
    pub fn new(nodes: Vec<Vec2>) -> Result<Self> {
        let m = nodes.len();
        Self::with_partition(nodes, uniform_partition(m))
    }

    pub fn with_partition(mut nodes: Vec<Vec2>, xi: Vec<f64>) -> Result<Self> {
        validate_nodes(&nodes)?;
        validate_partition(&xi, nodes.len())?;
        if shoelace(&nodes) < 0.0 {
            // Keep node 0 in place so the reversed curve starts where it did.
            nodes[1..].reverse();
            let widths: Vec<f64> = xi.windows(2).map(|w| w[1] - w[0]).rev().collect();
            let mut rev = Vec::with_capacity(xi.len());
            rev.push(0.0);
            let mut acc = 0.0;
            for w in &widths[..widths.len() - 1] {
                acc += w;
                rev.push(acc);
            }
            rev.push(1.0);
            let curve = CurveState { nodes, xi: rev };
            curve.check_edges()?;
            return Ok(curve);
        }
        let curve = CurveState { nodes, xi };
        curve.check_edges()?;
        Ok(curve)
    }

    /// Same partition, new node positions. Orientation is left as-is so a
    /// self-intersecting evolution shows up as a sign change in the area.
    pub fn with_nodes(&self, nodes: Vec<Vec2>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(FlowError::InvalidCurve(format!(
                "node count changed from {} to {}",
                self.nodes.len(),
                nodes.len()
            )));
        }
        validate_nodes(&nodes)?;
        let curve = CurveState {
            nodes,
            xi: self.xi.clone(),
        };
        curve.check_edges()?;
        Ok(curve)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    #[inline]
    pub fn partition(&self) -> &[f64] {
        &self.xi
    }

    #[inline]
    pub fn node(&self, k: usize) -> Vec2 {
        self.nodes[k % self.nodes.len()]
    }

    /// Width of element `k` in the reference coordinate.
    #[inline]
    pub fn width(&self, k: usize) -> f64 {
        self.xi[k + 1] - self.xi[k]
    }

    /// `x_{k+1} - x_k` with periodic wrap.
    #[inline]
    pub fn edge(&self, k: usize) -> Vec2 {
        let m = self.nodes.len();
        self.nodes[(k + 1) % m] - self.nodes[k]
    }

    pub fn edge_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.edge(k).norm())
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.edge_lengths().sum::<f64>() / self.len() as f64
    }

    pub fn degeneracy_threshold(&self) -> f64 {
        DEGENERACY_REL * self.mean_edge_length()
    }

    fn check_edges(&self) -> Result<()> {
        let threshold = self.degeneracy_threshold();
        for (index, length) in self.edge_lengths().enumerate() {
            if !(length > threshold) {
                return Err(FlowError::DegenerateEdge {
                    index,
                    length,
                    threshold,
                });
            }
        }
        Ok(())
    }

    pub fn translated(&self, by: Vec2) -> CurveState {
        CurveState {
            nodes: self.nodes.iter().map(|&p| p + by).collect(),
            xi: self.xi.clone(),
        }
    }

    pub fn rotated(&self, angle: f64) -> CurveState {
        CurveState {
            nodes: self.nodes.iter().map(|p| p.rotate(angle)).collect(),
            xi: self.xi.clone(),
        }
    }

    /// Node order reversed (keeping node 0), without re-orienting.
    pub fn reversed_raw(&self) -> CurveState {
        let mut nodes = self.nodes.clone();
        nodes[1..].reverse();
        CurveState {
            nodes,
            xi: uniform_partition(self.len()),
        }
    }

    /// Position on the piecewise-linear parametrization at reference
    /// coordinate `s` (taken modulo 1).
    pub fn eval(&self, s: f64) -> Vec2 {
        let s = s.rem_euclid(1.0);
        let k = match self.xi.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => return self.node(i),
            Err(i) => i - 1,
        };
        let w = (s - self.xi[k]) / self.width(k);
        self.node(k) * (1.0 - w) + self.node(k + 1) * w
    }
}

pub fn uniform_partition(m: usize) -> Vec<f64> {
    (0..=m).map(|j| j as f64 / m as f64).collect()
}

fn validate_nodes(nodes: &[Vec2]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(FlowError::InvalidCurve(format!(
            "need at least 3 nodes, got {}",
            nodes.len()
        )));
    }
    if let Some(i) = nodes.iter().position(|p| !p.is_finite()) {
        return Err(FlowError::InvalidCurve(format!("node {i} is not finite")));
    }
    Ok(())
}

fn validate_partition(xi: &[f64], m: usize) -> Result<()> {
    if xi.len() != m + 1 {
        return Err(FlowError::InvalidCurve(format!(
            "partition has {} points, expected {}",
            xi.len(),
            m + 1
        )));
    }
    if xi[0] != 0.0 || xi[m] != 1.0 || xi.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FlowError::InvalidCurve(
            "partition must increase strictly from 0 to 1".into(),
        ));
    }
    Ok(())
}

fn shoelace(nodes: &[Vec2]) -> f64 {
    let m = nodes.len();
    // Centring on node 0 keeps the sum accurate for curves far from the origin.
    let o = nodes[0];
    0.5 * (0..m)
        .map(|k| (nodes[k] - o).cross(nodes[(k + 1) % m] - o))
        .sum::<f64>()
}

/// Signed shoelace area; positive for counter-clockwise curves.
pub fn polygon_area(curve: &CurveState) -> f64 {
    shoelace(curve.nodes())
}

pub fn perimeter(curve: &CurveState) -> f64 {
    curve.edge_lengths().sum()
}

/// Longest over shortest edge.
pub fn mesh_ratio(curve: &CurveState) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for (index, l) in curve.edge_lengths().enumerate() {
        if l == 0.0 {
            return Err(FlowError::DegenerateEdge {
                index,
                length: l,
                threshold: curve.degeneracy_threshold(),
            });
        }
        lo = lo.min(l);
        hi = hi.max(l);
    }
    Ok(hi / lo)
}

/// Isoperimetric ratio `L^2 / (4 pi A)`.
pub fn isoperimetric_ratio(curve: &CurveState) -> f64 {
    let l = perimeter(curve);
    l * l / (4.0 * PI * polygon_area(curve))
}

pub fn edge_frames(curve: &CurveState) -> Result<Vec<EdgeFrame>> {
    let threshold = curve.degeneracy_threshold();
    (0..curve.len())
        .map(|k| {
            let e = curve.edge(k);
            let length = e.norm();
            if !(length > threshold) {
                return Err(FlowError::DegenerateEdge {
                    index: k,
                    length,
                    threshold,
                });
            }
            let tangent = e / length;
            Ok(EdgeFrame {
                tangent,
                normal: tangent.perp(),
                length,
                edge_vector: e / curve.width(k),
            })
        })
        .collect()
}

/// Jump of the unit tangent at every node, `t_k - t_{k-1}`.
pub fn tangent_jumps(curve: &CurveState) -> Result<Vec<Vec2>> {
    let frames = edge_frames(curve)?;
    let m = frames.len();
    Ok((0..m)
        .map(|k| frames[k].tangent - frames[(k + m - 1) % m].tangent)
        .collect())
}

/// Ellipse with semi-axes `a`, `b`, sampled at uniform parameter angles.
pub fn make_ellipse(a: f64, b: f64, m: usize) -> Result<CurveState> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(FlowError::InvalidParameter(format!(
            "ellipse semi-axes must be positive, got {a}, {b}"
        )));
    }
    if m < 3 {
        return Err(FlowError::InvalidParameter(format!(
            "need at least 3 nodes, got {m}"
        )));
    }
    let nodes = (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            Vec2::new(a * t.cos(), b * t.sin())
        })
        .collect();
    CurveState::new(nodes)
}

/// Ellipse with semi-axes `a`, `b`, nodes at equal arc length along the
/// exact ellipse, starting at `(a, 0)`.
pub fn make_ellipse_arclength(a: f64, b: f64, m: usize) -> Result<CurveState> {
    make_ellipse(a, b, m)?;
    let speed = |t: f64| (a * t.sin()).hypot(b * t.cos());
    let rule = crate::timequad::gauss_legendre(16);
    let panels = 64 * m.max(16);
    let arc = |t: f64| -> f64 {
        let n = ((t / (2.0 * PI)) * panels as f64).ceil().max(1.0) as usize;
        let h = t / n as f64;
        (0..n)
            .map(|i| {
                let c = (i as f64 + 0.5) * h;
                rule.iter().map(|(x, w)| w * speed(c + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    };
    let total = arc(2.0 * PI);
    let mut nodes = Vec::with_capacity(m);
    for j in 0..m {
        let target = total * j as f64 / m as f64;
        let mut t = 2.0 * PI * j as f64 / m as f64;
        for _ in 0..50 {
            let dt = (arc(t) - target) / speed(t);
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        nodes.push(Vec2::new(a * t.cos(), b * t.sin()));
    }
    CurveState::new(nodes)
}

/// Polar "flower" `r = 1 + amplitude * sin(frequency * theta)`.
pub fn make_flower(amplitude: f64, frequency: u32, m: usize) -> Result<CurveState> {
    if m < 3 {
        return Err(FlowError::InvalidParameter(format!(
            "need at least 3 nodes, got {m}"
        )));
    }
    let nodes = (0..m)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / m as f64;
            let r = 1.0 + amplitude * (frequency as f64 * t).sin();
            if !(r > 0.0) {
                return Err(FlowError::InvalidParameter(format!(
                    "flower radius {r} is not positive at theta = {t}"
                )));
            }
            Ok(Vec2::new(r * t.cos(), r * t.sin()))
        })
        .collect::<Result<Vec<_>>>()?;
    CurveState::new(nodes)
}

pub fn write_curve_csv<W: Write>(curve: &CurveState, mut w: W) -> std::io::Result<()> {
    let mut buf = String::from("x,y\n");
    for p in curve.nodes() {
        let _ = writeln!(buf, "{:.16e},{:.16e}", p.x, p.y);
    }
    w.write_all(buf.as_bytes())
}

pub fn read_curve_csv<R: BufRead>(r: R) -> Result<CurveState> {
    let mut nodes = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if i == 0 {
            if line.replace(' ', "") != "x,y" {
                return Err(FlowError::Parse {
                    line: 1,
                    message: format!("expected header `x,y`, got `{line}`"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |name: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| FlowError::Parse {
                    line: i + 1,
                    message: format!("missing {name}"),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| FlowError::Parse {
                    line: i + 1,
                    message: format!("{name}: {e}"),
                })
        };
        let x = field("x")?;
        let y = field("y")?;
        nodes.push(Vec2::new(x, y));
    }
    CurveState::new(nodes)
}
