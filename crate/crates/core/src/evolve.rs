//! Time-stepping driver with per-step invariant monitors.

use std::io::{BufRead, Write};
use std::path::Path;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::assembly::StepUnknowns;
use crate::baseline::baseline_step;
use crate::error::{FlowError, Result};
use crate::geometry::{
    isoperimetric_ratio, mesh_ratio, perimeter, polygon_area, uniform_partition, write_curve_csv,
    CurveState,
};
use crate::newton::{bootstrap_curvature, solve_time_step, NewtonConfig};

/// Default nesting depth of step halving before a step counts as failed.
pub const DEFAULT_MAX_HALVINGS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Proposed,
    Baseline,
}

impl Scheme {
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline => "baseline",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Redistribution {
    #[default]
    Off,
    /// Equal arc-length respacing of the initial state and after every
    /// `every` steps.
    Arclength { every: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tau: f64,
    pub steps: usize,
    pub newton: NewtonConfig,
    /// Keep a snapshot every this many steps; 0 keeps only the first and
    /// last states.
    pub snapshot_every: usize,
    /// Extra steps at which to keep a snapshot.
    #[serde(default)]
    pub snapshot_steps: Vec<usize>,
    pub redistribution: Redistribution,
    pub scheme: Scheme,
    /// A failed step is retried as two half steps, recursively, down to
    /// `tau / 2^max_halvings`.
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    /// When set, the last step is shortened so the run ends exactly here.
    #[serde(default)]
    pub t_end: Option<f64>,
}

fn default_halvings() -> usize {
    DEFAULT_MAX_HALVINGS
}

impl RunConfig {
    pub fn new(tau: f64, steps: usize) -> Self {
        RunConfig {
            tau,
            steps,
            newton: NewtonConfig::default(),
            snapshot_every: 0,
            snapshot_steps: Vec::new(),
            redistribution: Redistribution::Off,
            scheme: Scheme::Proposed,
            max_halvings: DEFAULT_MAX_HALVINGS,
            t_end: None,
        }
    }

    /// Steps of `tau` up to `t_end`; if `t_end` is not a whole number of
    /// steps the last one is shortened.
    pub fn until(tau: f64, t_end: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
            return Err(FlowError::InvalidParameter(format!(
                "need positive finite tau and end time, got {tau} and {t_end}"
            )));
        }
        let steps = ((t_end / tau) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let mut cfg = RunConfig::new(tau, steps);
        cfg.t_end = Some(t_end);
        Ok(cfg)
    }

    /// Time after step `n`.
    pub fn time_at(&self, n: usize) -> f64 {
        match self.t_end {
            Some(t) if n >= self.steps => t,
            _ => n as f64 * self.tau,
        }
    }

    /// Step count for reaching `t_end` with step `tau`; errors unless
    /// `t_end / tau` is an integer up to rounding.
    pub fn steps_to(tau: f64, t_end: f64) -> Result<usize> {
        if !(tau > 0.0 && tau.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
            return Err(FlowError::InvalidParameter(format!(
                "need positive finite tau and end time, got {tau} and {t_end}"
            )));
        }
        let n = (t_end / tau).round();
        if (n * tau - t_end).abs() > 1e-9 * t_end || n < 1.0 {
            return Err(FlowError::InvalidParameter(format!(
                "end time {t_end} is not a whole number of steps of {tau}"
            )));
        }
        Ok(n as usize)
    }

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
        if let Some(t) = self.t_end {
            let last = t - (self.steps - 1) as f64 * self.tau;
            if !(last > 0.0 && last <= self.tau * (1.0 + 1e-9)) {
                return Err(FlowError::InvalidParameter(format!(
                    "end time {t} does not fall in the last of {} steps of {}",
                    self.steps, self.tau
                )));
            }
        }
        if self.redistribution == (Redistribution::Arclength { every: 0 }) {
            return Err(FlowError::InvalidParameter(
                "redistribution interval must be at least 1".into(),
            ));
        }
        self.newton.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub perimeter: f64,
    pub area: f64,
    pub psi: f64,
    pub newton_iters: usize,
    /// `(A_n - A_0) / A_0`
    pub area_drift_rel: f64,
    /// `L_n - L_{n-1}`; zero for the initial record.
    pub perimeter_delta: f64,
    /// Final Newton residual max-norm, NaN where not applicable.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub records: Vec<StepRecord>,
}

pub const DIAGNOSTICS_HEADER: &str =
    "step,time,perimeter,area,psi,newton_iters,area_drift_rel,perimeter_delta";

impl DiagnosticsSeries {
    fn push_state(&mut self, step: usize, time: f64, curve: &CurveState, iters: usize, residual: f64) {
        let (l, a) = (perimeter(curve), polygon_area(curve));
        let (a0, dl) = match (self.records.first(), self.records.last()) {
            (Some(first), Some(last)) => (first.area, l - last.perimeter),
            _ => (a, 0.0),
        };
        self.records.push(StepRecord {
            step,
            time,
            perimeter: l,
            area: a,
            psi: mesh_ratio(curve).unwrap_or(f64::INFINITY),
            newton_iters: iters,
            area_drift_rel: (a - a0) / a0,
            perimeter_delta: dl,
            residual,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&StepRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Largest `|A_n - A_0| / A_0`.
    pub fn max_area_drift(&self) -> f64 {
        self.records
            .iter()
            .fold(0.0_f64, |a, r| a.max(r.area_drift_rel.abs()))
    }

    /// Largest single-step perimeter increase (negative if it always fell).
    pub fn max_perimeter_increase(&self) -> f64 {
        self.records
            .iter()
            .skip(1)
            .map(|r| r.perimeter_delta)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                r.step,
                r.time,
                r.perimeter,
                r.area,
                r.psi,
                r.newton_iters,
                r.area_drift_rel,
                r.perimeter_delta
            )?;
        }
        Ok(())
    }

    /// Reads the format of [`DiagnosticsSeries::write_csv`]. Residuals are
    /// not stored there and come back as NaN.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 {
                if line != DIAGNOSTICS_HEADER {
                    return Err(FlowError::Parse {
                        line: 1,
                        message: format!("unexpected header `{line}`"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |message: String| FlowError::Parse { line: i + 1, message };
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields, got {}", f.len())));
            }
            let real = |k: usize| f[k].parse::<f64>().map_err(|e| bad(format!("field {k}: {e}")));
            let int = |k: usize| f[k].parse::<usize>().map_err(|e| bad(format!("field {k}: {e}")));
            records.push(StepRecord {
                step: int(0)?,
                time: real(1)?,
                perimeter: real(2)?,
                area: real(3)?,
                psi: real(4)?,
                newton_iters: int(5)?,
                area_drift_rel: real(6)?,
                perimeter_delta: real(7)?,
                residual: f64::NAN,
            });
        }
        Ok(DiagnosticsSeries { records })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub curve: CurveState,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedistributionEvent {
    pub step: usize,
    pub area_before: f64,
    pub area_after: f64,
    /// `area_after - area_before`
    pub area_change: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub final_curve: CurveState,
    pub series: DiagnosticsSeries,
    pub snapshots: Vec<Snapshot>,
    pub redistributions: Vec<RedistributionEvent>,
    /// Steps that needed step halving, with the number of halvings.
    pub retried_steps: Vec<(usize, usize)>,
    /// Set when a step failed; the other fields then describe the run up
    /// to the last good state.
    pub failure: Option<FlowError>,
}

impl RunOutput {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn write_snapshots(&self, dir: &Path) -> Result<()> {
        for s in &self.snapshots {
            let f = std::fs::File::create(dir.join(format!("curve_{}.csv", s.step)))?;
            write_curve_csv(&s.curve, std::io::BufWriter::new(f))?;
        }
        Ok(())
    }
}

struct Advance {
    unknowns: StepUnknowns,
    iterations: usize,
    residual: f64,
    halvings: usize,
}

/// One proposed-scheme step of size `tau`, splitting into halves on failure.
fn advance_proposed(
    prev: &CurveState,
    warm: &StepUnknowns,
    tau: f64,
    cfg: &NewtonConfig,
    depth: usize,
) -> Result<Advance> {
    match solve_time_step(prev, warm, tau, cfg) {
        Ok((unknowns, rep)) => Ok(Advance {
            unknowns,
            iterations: rep.iterations,
            residual: rep.final_residual_norm,
            halvings: 0,
        }),
        Err(e) if depth > 0 && retryable(&e) => {
            debug!("step of {tau:e} failed ({e}); halving");
            let first = advance_proposed(prev, warm, 0.5 * tau, cfg, depth - 1)?;
            let mid = prev.with_nodes(first.unknowns.positions.clone())?;
            let second = advance_proposed(&mid, &first.unknowns, 0.5 * tau, cfg, depth - 1)?;
            Ok(Advance {
                iterations: first.iterations + second.iterations,
                residual: second.residual,
                halvings: 1 + first.halvings.max(second.halvings),
                unknowns: second.unknowns,
            })
        }
        Err(e) => Err(e),
    }
}

fn retryable(e: &FlowError) -> bool {
    matches!(
        e,
        FlowError::NewtonDiverged { .. }
            | FlowError::EdgeCollapse { .. }
            | FlowError::DegenerateEdge { .. }
            | FlowError::IllConditioned { .. }
            | FlowError::Singular { .. }
    )
}

fn advance_baseline(prev: &CurveState, tau: f64, depth: usize) -> Result<(CurveState, usize)> {
    match baseline_step(prev, tau) {
        Ok(c) => Ok((c, 0)),
        Err(e) if depth > 0 && retryable(&e) => {
            let (mid, a) = advance_baseline(prev, 0.5 * tau, depth - 1)?;
            let (end, b) = advance_baseline(&mid, 0.5 * tau, depth - 1)?;
            Ok((end, 1 + a.max(b)))
        }
        Err(e) => Err(e),
    }
}

/// March `initial` for `cfg.steps` steps. Configuration errors are returned
/// as `Err`; a failing step ends the run early with the failure recorded in
/// [`RunOutput::failure`].
pub fn evolve(initial: &CurveState, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut curve = initial.clone();
    let mut series = DiagnosticsSeries::default();
    series.push_state(0, 0.0, &curve, 0, f64::NAN);
    let (a0, l0) = (polygon_area(&curve), perimeter(&curve));
    let mut out = RunOutput {
        final_curve: curve.clone(),
        series: DiagnosticsSeries::default(),
        snapshots: vec![Snapshot {
            step: 0,
            time: 0.0,
            curve: curve.clone(),
        }],
        redistributions: Vec::new(),
        retried_steps: Vec::new(),
        failure: None,
    };

    if cfg.redistribution != Redistribution::Off {
        curve = apply_redistribution(&curve, 0, &mut out.redistributions)?;
    }
    let mut warm = match cfg.scheme {
        Scheme::Proposed => {
            let (p, q) = bootstrap_curvature(&curve)?;
            Some(StepUnknowns::new(curve.nodes().to_vec(), p, q)?)
        }
        Scheme::Baseline => None,
    };

    for n in 1..=cfg.steps {
        let time = cfg.time_at(n);
        let tau_n = time - cfg.time_at(n - 1);
        let step = match (cfg.scheme, warm.as_ref()) {
            (Scheme::Proposed, Some(w)) => advance_proposed(&curve, w, tau_n, &cfg.newton, cfg.max_halvings)
                .and_then(|adv| {
                    let next = curve.with_nodes(adv.unknowns.positions.clone())?;
                    Ok((next, Some(adv.unknowns), adv.iterations, adv.residual, adv.halvings))
                }),
            _ => advance_baseline(&curve, tau_n, cfg.max_halvings).map(|(c, h)| (c, None, 1, f64::NAN, h)),
        };
        let (next, unknowns, iters, residual, halvings) = match step {
            Ok(s) => s,
            Err(e) => {
                out.failure = Some(FlowError::StepFailed {
                    step: n,
                    retries: cfg.max_halvings,
                    source: Box::new(e),
                });
                break;
            }
        };
        if halvings > 0 {
            out.retried_steps.push((n, halvings));
        }

        let (a_prev, l_prev) = (polygon_area(&curve), perimeter(&curve));
        let (a_new, l_new) = (polygon_area(&next), perimeter(&next));
        if cfg.scheme == Scheme::Proposed {
            let allowed = (1e-12 * a0.abs()).max(10.0 * residual);
            if (a_new - a_prev).abs() > allowed {
                warn!("step {n}: area changed by {:e}", a_new - a_prev);
            }
        }
        if l_new - l_prev > 1e-12 * l0 {
            warn!("step {n}: perimeter increased by {:e}", l_new - l_prev);
        }

        curve = next;
        warm = unknowns;
        series.push_state(n, time, &curve, iters, residual);

        if let Redistribution::Arclength { every } = cfg.redistribution {
            if n % every == 0 && n < cfg.steps {
                curve = apply_redistribution(&curve, n, &mut out.redistributions)?;
                if cfg.scheme == Scheme::Proposed {
                    let (p, q) = bootstrap_curvature(&curve)?;
                    warm = Some(StepUnknowns::new(curve.nodes().to_vec(), p, q)?);
                }
            }
        }

        let periodic = cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0;
        if periodic || cfg.snapshot_steps.contains(&n) || n == cfg.steps {
            out.snapshots.push(Snapshot {
                step: n,
                time,
                curve: curve.clone(),
            });
        }
    }
    out.final_curve = curve;
    out.series = series;
    Ok(out)
}

fn apply_redistribution(
    curve: &CurveState,
    step: usize,
    log: &mut Vec<RedistributionEvent>,
) -> Result<CurveState> {
    let r = redistribute_arclength(curve)?;
    debug!("redistribution at step {step}: area change {:e}", r.area_change);
    log.push(RedistributionEvent {
        step,
        area_before: polygon_area(curve),
        area_after: polygon_area(&r.curve),
        area_change: r.area_change,
    });
    Ok(r.curve)
}

/// Result of [`redistribute_arclength`].
#[derive(Clone, Debug, PartialEq)]
pub struct Redistributed {
    pub curve: CurveState,
    /// Signed area of the new polygon minus that of the old one.
    pub area_change: f64,
}

/// Re-places the nodes at equal arc-length spacing along the existing
/// polygon, keeping node 0. The new nodes lie on the old edges, so corners
/// are cut and the area changes slightly.
pub fn redistribute_arclength(curve: &CurveState) -> Result<Redistributed> {
    let m = curve.len();
    let lengths: Vec<f64> = curve.edge_lengths().collect();
    let total: f64 = lengths.iter().sum();
    let mut nodes = Vec::with_capacity(m);
    nodes.push(curve.node(0));
    let (mut k, mut start) = (0usize, 0.0);
    for j in 1..m {
        let target = total * j as f64 / m as f64;
        while k + 1 < m && start + lengths[k] < target {
            start += lengths[k];
            k += 1;
        }
        let w = ((target - start) / lengths[k]).clamp(0.0, 1.0);
        nodes.push(curve.node(k) * (1.0 - w) + curve.node(k + 1) * w);
    }
    let new = CurveState::with_partition(nodes, uniform_partition(m))?;
    Ok(Redistributed {
        area_change: polygon_area(&new) - polygon_area(curve),
        curve: new,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Steps with `|A_n - A_0| / A_0 > area_tol`.
    pub area_flags: Vec<usize>,
    /// Steps with `L_n - L_{n-1} > perim_tol * L_0`.
    pub perimeter_flags: Vec<usize>,
    /// Steps where `L^2 / (4 pi A)` went up by more than rounding.
    pub isoperimetric_flags: Vec<usize>,
    pub max_area_drift: f64,
    pub max_perimeter_increase_rel: f64,
}

impl InvariantReport {
    pub fn area_ok(&self) -> bool {
        self.area_flags.is_empty()
    }

    pub fn perimeter_ok(&self) -> bool {
        self.perimeter_flags.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.area_ok() && self.perimeter_ok()
    }
}

pub fn check_invariants(series: &DiagnosticsSeries, area_tol: f64, perim_tol: f64) -> InvariantReport {
    let mut rep = InvariantReport {
        max_perimeter_increase_rel: f64::NEG_INFINITY,
        ..Default::default()
    };
    let Some(first) = series.first() else {
        return rep;
    };
    let (a0, l0) = (first.area, first.perimeter);
    let iso = |r: &StepRecord| r.perimeter * r.perimeter / (4.0 * std::f64::consts::PI * r.area);
    for w in series.records.windows(2) {
        let (prev, r) = (&w[0], &w[1]);
        let drift = ((r.area - a0) / a0).abs();
        rep.max_area_drift = rep.max_area_drift.max(drift);
        if drift > area_tol {
            rep.area_flags.push(r.step);
        }
        let inc = (r.perimeter - prev.perimeter) / l0;
        rep.max_perimeter_increase_rel = rep.max_perimeter_increase_rel.max(inc);
        if inc > perim_tol {
            rep.perimeter_flags.push(r.step);
        }
        if iso(r) > iso(prev) * (1.0 + area_tol.max(perim_tol)) {
            rep.isoperimetric_flags.push(r.step);
        }
    }
    rep
}

/// Isoperimetric ratio of every snapshot, for reporting.
pub fn snapshot_isoperimetric(snapshots: &[Snapshot]) -> Vec<(f64, f64)> {
    snapshots
        .iter()
        .map(|s| (s.time, isoperimetric_ratio(&s.curve)))
        .collect()
}

/// Largest node displacement between two curves with the same node count.
pub fn max_node_distance(a: &CurveState, b: &CurveState) -> f64 {
    a.nodes()
        .iter()
        .zip(b.nodes())
        .fold(0.0_f64, |m, (p, q)| m.max((*p - *q).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ellipse, make_flower, Vec2};

    #[test]
    fn series_length_and_monotone_perimeter() {
        let c = make_ellipse(2.0, 1.0, 16).unwrap();
        let out = evolve(&c, &RunConfig::new(1e-3, 20)).unwrap();
        assert!(out.completed());
        assert_eq!(out.series.len(), 21);
        let rep = check_invariants(&out.series, 1e-9, 1e-12);
        assert!(rep.passed(), "{rep:?}");
        assert!(out.series.records.iter().skip(1).all(|r| r.newton_iters >= 1));
    }

    #[test]
    fn regular_polygon_is_a_fixed_point() {
        for m in [16, 32] {
            let c = make_ellipse(1.0, 1.0, m).unwrap();
            let out = evolve(&c, &RunConfig::new(1e-3, 1)).unwrap();
            let moved = max_node_distance(&c, &out.final_curve);
            assert!(moved < 1e-13, "m={m}: {moved}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = make_ellipse(2.0, 1.0, 12).unwrap();
        let out = evolve(&c, &RunConfig::new(1e-3, 3)).unwrap();
        let mut buf = Vec::new();
        out.series.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(DIAGNOSTICS_HEADER));
        let back = DiagnosticsSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), out.series.len());
        for (a, b) in back.records.iter().zip(&out.series.records) {
            assert_eq!(a.step, b.step);
            assert_eq!(a.area, b.area);
            assert_eq!(a.perimeter_delta, b.perimeter_delta);
        }
    }

    #[test]
    fn constant_series_has_no_flags() {
        let r = StepRecord {
            step: 0,
            time: 0.0,
            perimeter: 2.0,
            area: 1.0,
            psi: 1.0,
            newton_iters: 0,
            area_drift_rel: 0.0,
            perimeter_delta: 0.0,
            residual: f64::NAN,
        };
        let series = DiagnosticsSeries {
            records: (0..5).map(|k| StepRecord { step: k, ..r }).collect(),
        };
        assert!(check_invariants(&series, 1e-9, 1e-12).passed());
    }

    #[test]
    fn redistribution_fixed_point_and_rectangle() {
        let c = make_ellipse(1.0, 1.0, 24).unwrap();
        let r = redistribute_arclength(&c).unwrap();
        assert!(max_node_distance(&c, &r.curve) < 1e-12);

        let rect = CurveState::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.7, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        let r = redistribute_arclength(&rect).unwrap();
        assert!((mesh_ratio(&r.curve).unwrap() - 1.0).abs() < 1e-12);
        assert!((perimeter(&r.curve) - perimeter(&rect)).abs() < 1e-12);
    }

    #[test]
    fn redistribution_counts_events() {
        let c = make_flower(0.3, 5, 40).unwrap();
        let mut cfg = RunConfig::new(1e-5, 6);
        cfg.redistribution = Redistribution::Arclength { every: 2 };
        let out = evolve(&c, &cfg).unwrap();
        // Initial state, then after steps 2 and 4.
        let steps: Vec<usize> = out.redistributions.iter().map(|e| e.step).collect();
        assert_eq!(steps, vec![0, 2, 4]);
        for e in &out.redistributions {
            assert!((e.area_after - e.area_before - e.area_change).abs() < 1e-14);
        }
    }

    #[test]
    fn steps_to_checks_divisibility() {
        assert_eq!(RunConfig::steps_to(1e-4, 2.0).unwrap(), 20000);
        assert_eq!(RunConfig::steps_to(0.04 / 16.0, 0.2).unwrap(), 80);
        assert!(RunConfig::steps_to(0.3, 1.0).is_err());
        assert!(RunConfig::steps_to(0.0, 1.0).is_err());
    }

    #[test]
    fn until_shortens_the_last_step() {
        let cfg = RunConfig::until(0.04, 0.5).unwrap();
        assert_eq!(cfg.steps, 13);
        assert!((cfg.time_at(12) - 0.48).abs() < 1e-15);
        assert_eq!(cfg.time_at(13), 0.5);
        let cfg = RunConfig::until(1e-4, 2.0).unwrap();
        assert_eq!(cfg.steps, 20000);
        assert!(cfg.validate().is_ok());
        let c = make_ellipse(2.0, 1.0, 8).unwrap();
        let out = evolve(&c, &RunConfig::until(0.04, 0.1).unwrap()).unwrap();
        assert_eq!(out.series.last().unwrap().time, 0.1);
        assert_eq!(out.series.len(), 4);
    }

    #[test]
    fn baseline_scheme_runs_through_driver() {
        let c = make_ellipse(2.0, 1.0, 16).unwrap();
        let mut cfg = RunConfig::new(1e-3, 10);
        cfg.scheme = Scheme::Baseline;
        let out = evolve(&c, &cfg).unwrap();
        assert!(out.completed());
        assert!(out.series.max_area_drift() > 1e-10);
    }
}
