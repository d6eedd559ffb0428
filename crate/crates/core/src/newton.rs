//! Per-step nonlinear solve.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, DofMap, JacobianVariant, StepUnknowns};
use crate::error::{FlowError, Result};
use crate::geometry::{edge_frames, CurveState};
use crate::linalg::{linear_solve, zigzag_order, SparseSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Max-norm bound on the position increment.
    pub tol_x: f64,
    /// Max-norm bound on the `p` increment.
    pub tol_p: f64,
    /// Max-norm bound on the `q` increment.
    pub tol_q: f64,
    pub max_iter: usize,
    pub jacobian_variant: JacobianVariant,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_x: 1e-10,
            tol_p: 1e-10,
            tol_q: 1e-10,
            max_iter: 50,
            jacobian_variant: JacobianVariant::default(),
        }
    }
}

impl NewtonConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        NewtonConfig {
            tol_x: tol,
            tol_p: tol,
            tol_q: tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.tol_x, self.tol_p, self.tol_q]
            .iter()
            .all(|t| *t > 0.0 && t.is_finite());
        if !ok || self.max_iter == 0 {
            return Err(FlowError::InvalidParameter(format!(
                "Newton tolerances must be positive and max_iter >= 1: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// `(|X_delta|_inf, |p_delta|_inf, |q_delta|_inf)` per iteration.
    pub increment_norms: Vec<[f64; 3]>,
    /// Residual max-norm at the iterate each increment was computed from.
    pub residual_norms: Vec<f64>,
    pub final_residual_norm: f64,
    pub converged: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

/// Newton's iteration for one time step, starting from `warm`. Stops once
/// all three increment tests pass in the same iteration.
pub fn solve_time_step(
    prev: &CurveState,
    warm: &StepUnknowns,
    tau: f64,
    cfg: &NewtonConfig,
) -> Result<(StepUnknowns, NewtonReport)> {
    cfg.validate()?;
    let map = DofMap::new(prev.len());
    let mut iterate = warm.clone();
    let mut report = NewtonReport::default();

    while report.iterations < cfg.max_iter {
        let (res, sys) = assemble(prev, &iterate, tau, Some(cfg.jacobian_variant))?;
        let mut sys = sys.expect("matrix requested");
        report.residual_norms.push(max_abs(&res));
        sys.rhs = res.into_iter().map(|r| -r).collect();
        let delta = StepUnknowns::from_vec(&map, &linear_solve(&sys)?);

        for (x, d) in iterate.positions.iter_mut().zip(&delta.positions) {
            *x += *d;
        }
        for (p, d) in iterate.p.iter_mut().zip(&delta.p) {
            *p += d;
        }
        for (q, d) in iterate.q.iter_mut().zip(&delta.q) {
            *q += d;
        }
        let norms = [
            delta.positions.iter().fold(0.0_f64, |a, v| a.max(v.max_abs())),
            max_abs(&delta.p),
            max_abs(&delta.q),
        ];
        report.iterations += 1;
        report.increment_norms.push(norms);
        if !norms.iter().all(|v| v.is_finite()) {
            break;
        }
        if norms[0] <= cfg.tol_x && norms[1] <= cfg.tol_p && norms[2] <= cfg.tol_q {
            report.converged = true;
            break;
        }
    }

    let final_res = assemble(prev, &iterate, tau, None).map(|(r, _)| max_abs(&r));
    report.final_residual_norm = final_res.as_ref().copied().unwrap_or(f64::NAN);
    if !report.converged {
        return Err(FlowError::NewtonDiverged { report });
    }
    final_res?;
    Ok((iterate, report))
}

/// Initial `(p, q)` for the first step: the curvature equations solved with
/// both time levels equal to `curve`.
pub fn bootstrap_curvature(curve: &CurveState) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = curve.len();
    let frames = edge_frames(curve)?;
    // Static data with unit time factor: nu_bar = D^perp, tau_bar = D.
    let mut sys = SparseSystem::new(2 * m);
    sys.band_order = zigzag_order(m)
        .into_iter()
        .flat_map(|k| [2 * k, 2 * k + 1])
        .collect();
    for (k, fr) in frames.iter().enumerate() {
        let h = curve.width(k);
        let nodes = [k, (k + 1) % m];
        let (nu, ta) = (fr.edge_vector.perp(), fr.edge_vector);
        for a in 0..2 {
            let i = nodes[a];
            // theta_i = t_i - t_{i-1}: this element is left of node k+1
            // and right of node k.
            let sign = if a == 0 { 1.0 } else { -1.0 };
            sys.rhs[2 * i] += sign * fr.tangent.x;
            sys.rhs[2 * i + 1] += sign * fr.tangent.y;
            for b in 0..2 {
                let j = nodes[b];
                let mass = h * if a == b { 1.0 / 3.0 } else { 1.0 / 6.0 };
                sys.add(2 * i, 2 * j, mass * nu.x);
                sys.add(2 * i + 1, 2 * j, mass * nu.y);
                sys.add(2 * i, 2 * j + 1, mass * ta.x);
                sys.add(2 * i + 1, 2 * j + 1, mass * ta.y);
            }
        }
    }
    let sol = linear_solve(&sys)?;
    Ok((
        (0..m).map(|k| sol[2 * k]).collect(),
        (0..m).map(|k| sol[2 * k + 1]).collect(),
    ))
}
