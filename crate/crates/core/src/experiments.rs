//! Experiment drivers: refinement study, scheme comparison and the flower
//! run.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::evolve::{check_invariants, evolve, InvariantReport, Redistribution, RunConfig, RunOutput, Scheme};
use crate::geometry::{
    isoperimetric_ratio, make_ellipse, make_ellipse_arclength, make_flower, CurveState,
};
use crate::newton::NewtonConfig;

/// How ellipse nodes are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Uniform parameter angle.
    #[default]
    Angle,
    /// Equal arc length along the exact ellipse.
    Arclength,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialShape {
    Ellipse { a: f64, b: f64, sampling: Sampling },
    Flower { amplitude: f64, frequency: u32 },
    /// A fixed polygon; the node count is whatever it has.
    Polygon { source: String, curve: PolygonNodes },
}

/// Serializable node list for [`InitialShape::Polygon`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonNodes(pub Vec<[f64; 2]>);

impl InitialShape {
    pub fn ellipse(a: f64, b: f64) -> Self {
        InitialShape::Ellipse {
            a,
            b,
            sampling: Sampling::Angle,
        }
    }

    pub fn from_curve(source: impl Into<String>, curve: &CurveState) -> Self {
        InitialShape::Polygon {
            source: source.into(),
            curve: PolygonNodes(curve.nodes().iter().map(|p| [p.x, p.y]).collect()),
        }
    }

    /// Node count fixed by the shape itself, if any.
    pub fn fixed_nodes(&self) -> Option<usize> {
        match self {
            InitialShape::Polygon { curve, .. } => Some(curve.0.len()),
            _ => None,
        }
    }

    pub fn build(&self, m: usize) -> Result<CurveState> {
        match self {
            InitialShape::Ellipse { a, b, sampling } => match sampling {
                Sampling::Angle => make_ellipse(*a, *b, m),
                Sampling::Arclength => make_ellipse_arclength(*a, *b, m),
            },
            InitialShape::Flower {
                amplitude,
                frequency,
            } => make_flower(*amplitude, *frequency, m),
            InitialShape::Polygon { curve, .. } => {
                if curve.0.len() != m {
                    return Err(FlowError::InvalidParameter(format!(
                        "polygon has {} nodes, {m} requested",
                        curve.0.len()
                    )));
                }
                CurveState::new(
                    curve
                        .0
                        .iter()
                        .map(|p| crate::geometry::Vec2::new(p[0], p[1]))
                        .collect(),
                )
            }
        }
    }
}

/// Refinement study on the grid `(M_0 2^k, tau_0 / 4^k)`, `k = 0..=levels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub shape: InitialShape,
    pub base_mesh: usize,
    pub base_dt: f64,
    /// Number of errors per time; one more run than this is needed.
    pub levels: usize,
    pub times: Vec<f64>,
    pub newton: NewtonConfig,
}

impl ConvergenceSpec {
    /// The ellipse refinement grid with `h_0 = 1/8`, `tau_0 = 0.04`.
    pub fn ellipse_table() -> Self {
        ConvergenceSpec {
            shape: InitialShape::ellipse(2.0, 1.0),
            base_mesh: 8,
            base_dt: 0.04,
            levels: 4,
            times: vec![0.2, 0.5, 2.0],
            newton: NewtonConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.base_mesh < 3 || self.times.is_empty() {
            return Err(FlowError::InvalidParameter(
                "need at least one level, three nodes and one output time".into(),
            ));
        }
        if !(self.base_dt > 0.0 && self.base_dt.is_finite()) {
            return Err(FlowError::InvalidParameter(format!(
                "base step must be positive, got {}",
                self.base_dt
            )));
        }
        if self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(FlowError::InvalidParameter("output times must be positive".into()));
        }
        if self.shape.fixed_nodes().is_some() {
            return Err(FlowError::InvalidParameter(
                "a refinement study needs a shape that can be sampled at any node count".into(),
            ));
        }
        self.newton.validate()
    }

    pub fn grid(&self) -> Vec<(usize, f64)> {
        (0..=self.levels)
            .map(|k| (self.base_mesh << k, self.base_dt / 4f64.powi(k as i32)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub time: f64,
    pub mesh: usize,
    pub h: f64,
    pub tau: f64,
    /// Max over the coarse nodes of the distance to the next finer run.
    pub error: f64,
    /// `log2(previous error / error)`; absent on the first level.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn errors_at(&self, time: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.time == time)
            .map(|r| r.error)
            .collect()
    }

    /// Order from the finest three runs at `time`.
    pub fn order_at(&self, time: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.time == time)
            .last()
            .and_then(|r| r.order)
    }

    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !t.contains(&r.time) {
                t.push(r.time);
            }
        }
        t
    }
}

/// Distance between two runs at the nodes of the coarser one, evaluating
/// the finer run at the same reference coordinates.
pub fn matched_node_error(coarse: &CurveState, fine: &CurveState) -> f64 {
    coarse
        .partition()
        .iter()
        .take(coarse.len())
        .enumerate()
        .map(|(j, &xi)| (coarse.node(j) - fine.eval(xi)).norm())
        .fold(0.0, f64::max)
}

fn order_between(coarse_err: f64, fine_err: f64) -> f64 {
    (coarse_err / fine_err).log2()
}

pub fn run_convergence_study(spec: &ConvergenceSpec) -> Result<ConvergenceTable> {
    spec.validate()?;
    let grid = spec.grid();
    let jobs: Vec<(usize, usize)> = (0..spec.times.len())
        .flat_map(|ti| (0..grid.len()).map(move |k| (ti, k)))
        .collect();
    let finals: Vec<Result<CurveState>> = jobs
        .par_iter()
        .map(|&(ti, k)| {
            let (m, tau) = grid[k];
            let mut cfg = RunConfig::until(tau, spec.times[ti])?;
            cfg.newton = spec.newton;
            let out = evolve(&spec.shape.build(m)?, &cfg)?;
            match out.failure {
                Some(e) => Err(e),
                None => Ok(out.final_curve),
            }
        })
        .collect();

    let mut table = ConvergenceTable::default();
    let mut finals = finals.into_iter();
    for &time in &spec.times {
        let level: Vec<CurveState> = finals.by_ref().take(grid.len()).collect::<Result<_>>()?;
        let mut prev: Option<f64> = None;
        for k in 0..spec.levels {
            let error = matched_node_error(&level[k], &level[k + 1]);
            let (m, tau) = grid[k];
            table.rows.push(ConvergenceRow {
                time,
                mesh: m,
                h: 1.0 / m as f64,
                tau,
                error,
                order: prev.map(|p| order_between(p, error)),
            });
            prev = Some(error);
        }
    }
    Ok(table)
}

/// Headline numbers of one run, for summaries and comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub scheme: Scheme,
    pub mesh: usize,
    pub tau: f64,
    pub steps_completed: usize,
    pub final_time: f64,
    pub completed: bool,
    pub failure: Option<String>,
    pub max_area_drift: f64,
    pub max_perimeter_increase_rel: f64,
    pub psi_initial: f64,
    pub psi_final: f64,
    pub isoperimetric_final: f64,
    pub newton_median: Option<usize>,
    pub newton_max_after_first: Option<usize>,
    pub retried_steps: usize,
    pub redistribution_events: usize,
    pub redistribution_area_change_total: f64,
    pub redistribution_area_change_max: f64,
    pub invariants: InvariantReport,
}

impl RunStats {
    pub fn from_output(out: &RunOutput, scheme: Scheme, tau: f64, area_tol: f64, perim_tol: f64) -> Self {
        let s = &out.series;
        let first = s.first().expect("series has the initial state");
        let last = s.last().expect("series has the initial state");
        let mut iters: Vec<usize> = s.records.iter().skip(1).map(|r| r.newton_iters).collect();
        let after_first = iters.iter().skip(1).copied().max();
        iters.sort_unstable();
        let abs_changes = out.redistributions.iter().map(|e| e.area_change.abs());
        RunStats {
            scheme,
            mesh: out.final_curve.len(),
            tau,
            steps_completed: last.step,
            final_time: last.time,
            completed: out.completed(),
            failure: out.failure.as_ref().map(|e| e.to_string()),
            max_area_drift: s.max_area_drift(),
            max_perimeter_increase_rel: s.max_perimeter_increase() / first.perimeter,
            psi_initial: first.psi,
            psi_final: last.psi,
            isoperimetric_final: isoperimetric_ratio(&out.final_curve),
            newton_median: (!iters.is_empty()).then(|| iters[iters.len() / 2]),
            newton_max_after_first: after_first,
            retried_steps: out.retried_steps.len(),
            redistribution_events: out.redistributions.len(),
            redistribution_area_change_total: out.redistributions.iter().map(|e| e.area_change).sum(),
            redistribution_area_change_max: abs_changes.fold(0.0, f64::max),
            invariants: check_invariants(s, area_tol, perim_tol),
        }
    }
}

/// Default invariant tolerances: relative area drift and relative
/// per-step perimeter increase.
pub const AREA_TOL: f64 = 1e-9;
pub const PERIMETER_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub shape: InitialShape,
    pub mesh: usize,
    pub tau: f64,
    pub t_end: f64,
    pub newton: NewtonConfig,
    pub scheme: Scheme,
    pub redistribution: Redistribution,
    pub snapshot_every: usize,
}

impl RunSpec {
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::until(self.tau, self.t_end)?;
        cfg.newton = self.newton;
        cfg.scheme = self.scheme;
        cfg.redistribution = self.redistribution;
        cfg.snapshot_every = self.snapshot_every;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub struct Completed {
    pub output: RunOutput,
    pub stats: RunStats,
    pub wall_seconds: f64,
}

pub fn run_single(spec: &RunSpec) -> Result<Completed> {
    run_with_config(spec, spec.run_config()?)
}

fn run_with_config(spec: &RunSpec, cfg: RunConfig) -> Result<Completed> {
    let start = Instant::now();
    let output = evolve(&spec.shape.build(spec.mesh)?, &cfg)?;
    let stats = RunStats::from_output(&output, cfg.scheme, cfg.tau, AREA_TOL, PERIMETER_TOL);
    Ok(Completed {
        output,
        stats,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub proposed: RunStats,
    pub baseline: RunStats,
    /// Baseline area drift over proposed area drift.
    pub drift_ratio: f64,
}

/// Runs `spec` with both schemes concurrently.
pub fn run_compare(spec: &RunSpec) -> Result<(Completed, Completed, CompareSummary)> {
    let with = |scheme| RunSpec {
        scheme,
        ..spec.clone()
    };
    let (p, b) = rayon::join(
        || run_single(&with(Scheme::Proposed)),
        || run_single(&with(Scheme::Baseline)),
    );
    let (p, b) = (p?, b?);
    let summary = CompareSummary {
        drift_ratio: b.stats.max_area_drift / p.stats.max_area_drift,
        proposed: p.stats.clone(),
        baseline: b.stats.clone(),
    };
    Ok((p, b, summary))
}

/// Output times of the flower snapshots.
pub const FLOWER_SNAPSHOT_TIMES: [f64; 6] = [0.0, 1e-4, 1e-3, 5e-3, 6e-3, 1e-2];

/// Flower run with snapshots at [`FLOWER_SNAPSHOT_TIMES`].
pub fn run_flower(spec: &RunSpec) -> Result<Completed> {
    let mut cfg = spec.run_config()?;
    cfg.snapshot_steps = FLOWER_SNAPSHOT_TIMES
        .iter()
        .skip(1)
        .map(|t| (t / cfg.tau).round() as usize)
        .filter(|&n| n >= 1 && n <= cfg.steps)
        .collect();
    let mut done = run_with_config(spec, cfg.clone())?;
    let keep = |n: usize| n == 0 || cfg.snapshot_steps.contains(&n);
    done.output.snapshots.retain(|s| keep(s.step));
    Ok(done)
}

impl RunSpec {
    /// The flower of amplitude 0.65 and seven petals on 210 nodes, step
    /// `1e-6` up to `t = 0.01`.
    pub fn flower_benchmark() -> Self {
        RunSpec {
            shape: InitialShape::Flower {
                amplitude: 0.65,
                frequency: 7,
            },
            mesh: 210,
            tau: 1e-6,
            t_end: 0.01,
            newton: NewtonConfig::default(),
            scheme: Scheme::Proposed,
            redistribution: Redistribution::Off,
            snapshot_every: 0,
        }
    }

    /// The ellipse `x^2 + 4 y^2 = 4` on 32 nodes, step `1e-4` up to `t = 2`.
    pub fn ellipse_benchmark() -> Self {
        RunSpec {
            shape: InitialShape::ellipse(2.0, 1.0),
            mesh: 32,
            tau: 1e-4,
            t_end: 2.0,
            newton: NewtonConfig::default(),
            scheme: Scheme::Proposed,
            redistribution: Redistribution::Off,
            snapshot_every: 0,
        }
    }
}
