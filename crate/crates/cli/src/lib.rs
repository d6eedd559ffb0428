//! Argument parsing and experiment orchestration for the `sdflow` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use sdflow::evolve::{Redistribution, Scheme};
use sdflow::experiments::{
    run_compare, run_convergence_study, run_flower, run_single, ConvergenceSpec, InitialShape,
    RunSpec, Sampling,
};
use sdflow::geometry::read_curve_csv;
use sdflow::report::{write_convergence_csv, write_run, RunSummary};
use sdflow::{JacobianVariant, NewtonConfig};

#[derive(Parser, Debug)]
#[command(name = "sdflow", version, about = "Surface diffusion of closed plane curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve one curve and write its diagnostics and snapshots.
    Run(CommonArgs),
    /// Refinement study on the grid (M_0 2^k, tau_0 / 4^k).
    Converge(ConvergeArgs),
    /// Run the area-conserving scheme and the linear comparator side by side.
    Compare(CommonArgs),
    /// The seven-petal flower benchmark with snapshots at fixed times.
    Flower(CommonArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Number of nodes.
    #[arg(long)]
    pub mesh: Option<usize>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// End time.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// ellipse:a,b | ellipse-arc:a,b | flower:amp,freq | file:path
    #[arg(long)]
    pub init: Option<String>,
    /// Newton increment tolerance (all three components).
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub jacobian: Option<JacobianArg>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// off | arclength:k
    #[arg(long)]
    pub redistribute: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep a snapshot (CSV and SVG) every k steps.
    #[arg(long = "svg-every")]
    pub svg_every: Option<usize>,
    /// Seed for randomized test harnesses; recorded, not used by the solver.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct ConvergeArgs {
    /// Number of errors per output time (one more run is made).
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long = "base-mesh", default_value_t = 8)]
    pub base_mesh: usize,
    #[arg(long = "base-dt", default_value_t = 0.04)]
    pub base_dt: f64,
    /// Comma-separated output times.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.5, 2.0])]
    pub times: Vec<f64>,
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub jacobian: Option<JacobianArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianArg {
    AsWritten,
    TimeWeighted,
}

impl From<JacobianArg> for JacobianVariant {
    fn from(j: JacobianArg) -> Self {
        match j {
            JacobianArg::AsWritten => JacobianVariant::AsWritten,
            JacobianArg::TimeWeighted => JacobianVariant::TimeWeighted,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Proposed,
    Baseline,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Proposed => Scheme::Proposed,
            SchemeArg::Baseline => Scheme::Baseline,
        }
    }
}

/// What to run, fully resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Run {
        spec: RunSpec,
        out: PathBuf,
        svg: bool,
        seed: Option<u64>,
    },
    Compare {
        spec: RunSpec,
        out: PathBuf,
        svg: bool,
        seed: Option<u64>,
    },
    Flower {
        spec: RunSpec,
        out: PathBuf,
        seed: Option<u64>,
    },
    Converge {
        spec: ConvergenceSpec,
        out: PathBuf,
        seed: Option<u64>,
    },
}

fn parse_pair(body: &str, what: &str) -> Result<(f64, f64)> {
    let (x, y) = body
        .split_once(',')
        .with_context(|| format!("{what} expects two comma-separated numbers, got `{body}`"))?;
    Ok((
        x.trim().parse().with_context(|| format!("bad number `{x}` in {what}"))?,
        y.trim().parse().with_context(|| format!("bad number `{y}` in {what}"))?,
    ))
}

/// Parses `ellipse:a,b`, `ellipse-arc:a,b`, `flower:amp,freq` or
/// `file:path`.
pub fn parse_init(s: &str) -> Result<InitialShape> {
    let (kind, body) = s
        .split_once(':')
        .with_context(|| format!("--init expects kind:params, got `{s}`"))?;
    match kind {
        "ellipse" | "ellipse-arc" => {
            let (a, b) = parse_pair(body, "ellipse")?;
            if !(a > 0.0 && b > 0.0) {
                bail!("ellipse semi-axes must be positive, got {a}, {b}");
            }
            let sampling = if kind == "ellipse" {
                Sampling::Angle
            } else {
                Sampling::Arclength
            };
            Ok(InitialShape::Ellipse { a, b, sampling })
        }
        "flower" => {
            let (amplitude, freq) = parse_pair(body, "flower")?;
            if freq < 1.0 || freq.fract() != 0.0 {
                bail!("flower frequency must be a positive integer, got {freq}");
            }
            if !(amplitude.abs() < 1.0) {
                bail!("flower amplitude must lie in (-1, 1), got {amplitude}");
            }
            Ok(InitialShape::Flower {
                amplitude,
                frequency: freq as u32,
            })
        }
        "file" => {
            let f = File::open(body).with_context(|| format!("opening {body}"))?;
            let curve = read_curve_csv(BufReader::new(f)).with_context(|| format!("reading {body}"))?;
            Ok(InitialShape::from_curve(body, &curve))
        }
        other => bail!("unknown initial shape `{other}`"),
    }
}

pub fn parse_redistribution(s: &str) -> Result<Redistribution> {
    if s == "off" {
        return Ok(Redistribution::Off);
    }
    match s.split_once(':') {
        Some(("arclength", k)) => {
            let every: usize = k.parse().with_context(|| format!("bad interval `{k}`"))?;
            if every == 0 {
                bail!("redistribution interval must be at least 1");
            }
            Ok(Redistribution::Arclength { every })
        }
        _ => bail!("--redistribute expects off or arclength:k, got `{s}`"),
    }
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(v)
}

fn newton_config(tol: Option<f64>, jac: Option<JacobianArg>) -> Result<NewtonConfig> {
    let mut cfg = match tol {
        Some(t) => NewtonConfig::with_tolerance(positive(t, "--newton-tol")?),
        None => NewtonConfig::default(),
    };
    if let Some(j) = jac {
        cfg.jacobian_variant = j.into();
    }
    Ok(cfg)
}

fn resolve_run(a: &CommonArgs, defaults: RunSpec) -> Result<RunSpec> {
    let shape = match &a.init {
        Some(s) => parse_init(s)?,
        None => defaults.shape.clone(),
    };
    let mesh = match (a.mesh, shape.fixed_nodes()) {
        (Some(m), Some(n)) if m != n => bail!("--mesh {m} disagrees with the {n} nodes in the file"),
        (_, Some(n)) => n,
        (Some(m), None) => m,
        (None, None) => defaults.mesh,
    };
    if mesh < 3 {
        bail!("--mesh must be at least 3, got {mesh}");
    }
    let spec = RunSpec {
        shape,
        mesh,
        tau: positive(a.dt.unwrap_or(defaults.tau), "--dt")?,
        t_end: positive(a.t_end.unwrap_or(defaults.t_end), "--t-end")?,
        newton: newton_config(a.newton_tol, a.jacobian)?,
        scheme: a.scheme.map(Scheme::from).unwrap_or(defaults.scheme),
        redistribution: match &a.redistribute {
            Some(r) => parse_redistribution(r)?,
            None => defaults.redistribution,
        },
        snapshot_every: a.svg_every.unwrap_or(0),
    };
    spec.run_config()?;
    Ok(spec)
}

fn default_out(name: &str) -> PathBuf {
    PathBuf::from("out").join(name)
}

/// Parses command-line arguments (including the program name) into a
/// validated experiment.
pub fn parse_cli<I, T>(args: I) -> Result<ExperimentSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    Ok(match cli.command {
        Command::Run(a) => ExperimentSpec::Run {
            spec: resolve_run(&a, RunSpec::ellipse_benchmark())?,
            out: a.out.clone().unwrap_or_else(|| default_out("run")),
            svg: a.svg_every.is_some_and(|k| k > 0),
            seed: a.seed,
        },
        Command::Compare(a) => {
            if a.scheme.is_some() {
                bail!("compare always runs both schemes; drop --scheme");
            }
            ExperimentSpec::Compare {
                spec: resolve_run(&a, RunSpec::ellipse_benchmark())?,
                out: a.out.clone().unwrap_or_else(|| default_out("compare")),
                svg: a.svg_every.is_some_and(|k| k > 0),
                seed: a.seed,
            }
        }
        Command::Flower(a) => ExperimentSpec::Flower {
            spec: resolve_run(&a, RunSpec::flower_benchmark())?,
            out: a.out.clone().unwrap_or_else(|| default_out("flower")),
            seed: a.seed,
        },
        Command::Converge(c) => {
            let shape = match &c.init {
                Some(s) => parse_init(s)?,
                None => InitialShape::ellipse(2.0, 1.0),
            };
            let spec = ConvergenceSpec {
                shape,
                base_mesh: c.base_mesh,
                base_dt: positive(c.base_dt, "--base-dt")?,
                levels: c.levels,
                times: c.times.clone(),
                newton: newton_config(c.newton_tol, c.jacobian)?,
            };
            spec.validate()?;
            ExperimentSpec::Converge {
                spec,
                out: c.out.clone().unwrap_or_else(|| default_out("converge")),
                seed: c.seed,
            }
        }
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

fn report_line(out: &mut impl Write, s: &RunSummary) -> Result<()> {
    let st = &s.stats;
    writeln!(
        out,
        "{}: {} steps to t = {}, area drift {:.3e}, max perimeter increase {:.3e} L0, psi {:.3} -> {:.3}, {:.1} s{}",
        st.scheme.tag(),
        st.steps_completed,
        st.final_time,
        st.max_area_drift,
        st.max_perimeter_increase_rel,
        st.psi_initial,
        st.psi_final,
        s.wall_seconds,
        st.failure.as_deref().map(|f| format!(" (stopped: {f})")).unwrap_or_default()
    )?;
    Ok(())
}

/// Runs `exp`, writes its files and prints a short report to `out`.
/// Returns whether every run completed.
pub fn execute(exp: &ExperimentSpec, out: &mut impl Write) -> Result<bool> {
    match exp {
        ExperimentSpec::Run { spec, out: dir, svg, .. } => {
            let done = run_single(spec)?;
            let summary = RunSummary::new(spec, &done);
            write_run(dir, "", &done.output, &summary, *svg)?;
            report_line(out, &summary)?;
            Ok(done.stats.completed)
        }
        ExperimentSpec::Compare { spec, out: dir, svg, .. } => {
            let (p, b, cmp) = run_compare(spec)?;
            for done in [&p, &b] {
                let s = RunSpec {
                    scheme: done.stats.scheme,
                    ..spec.clone()
                };
                let summary = RunSummary::new(&s, done);
                write_run(&dir.join(done.stats.scheme.tag()), "", &done.output, &summary, *svg)?;
                report_line(out, &summary)?;
            }
            write_json(&dir.join("summary.json"), &serde_json::to_value(&cmp)?)?;
            writeln!(out, "area drift ratio (baseline / proposed): {:.3e}", cmp.drift_ratio)?;
            Ok(p.stats.completed && b.stats.completed)
        }
        ExperimentSpec::Flower { spec, out: dir, .. } => {
            let done = run_flower(spec)?;
            let summary = RunSummary::new(spec, &done);
            write_run(dir, "", &done.output, &summary, true)?;
            report_line(out, &summary)?;
            writeln!(
                out,
                "isoperimetric ratio at the end: {:.6}, snapshots: {}",
                summary.stats.isoperimetric_final,
                done.output.snapshots.len()
            )?;
            if summary.stats.redistribution_events > 0 {
                writeln!(
                    out,
                    "{} redistributions, net area change {:.3e}, largest single change {:.3e}",
                    summary.stats.redistribution_events,
                    summary.stats.redistribution_area_change_total,
                    summary.stats.redistribution_area_change_max
                )?;
            }
            Ok(done.stats.completed)
        }
        ExperimentSpec::Converge { spec, out: dir, .. } => {
            std::fs::create_dir_all(dir)?;
            let start = std::time::Instant::now();
            let table = run_convergence_study(spec)?;
            write_convergence_csv(&table, BufWriter::new(File::create(dir.join("convergence.csv"))?))?;
            write_json(
                &dir.join("summary.json"),
                &serde_json::json!({
                    "spec": spec,
                    "table": table,
                    "wall_seconds": start.elapsed().as_secs_f64(),
                }),
            )?;
            for t in table.times() {
                let errs: Vec<String> = table.errors_at(t).iter().map(|e| format!("{e:.3e}")).collect();
                let order = table.order_at(t).map(|o| format!("{o:.3}")).unwrap_or("-".into());
                writeln!(out, "t = {t}: errors {} order {order}", errs.join(" "))?;
            }
            info!("convergence study took {:.1} s", start.elapsed().as_secs_f64());
            Ok(true)
        }
    }
}
