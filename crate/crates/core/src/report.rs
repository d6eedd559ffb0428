//! File outputs: SVG plots, CSV tables and JSON run summaries.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::evolve::{RedistributionEvent, RunOutput};
use crate::experiments::{
    Completed, ConvergenceRow, ConvergenceTable, RunSpec, RunStats, AREA_TOL, PERIMETER_TOL,
};
use crate::geometry::{write_curve_csv, CurveState};

/// Decimal places of the SVG vertex coordinates (in curve units).
pub const SVG_DECIMALS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct SvgStyle {
    pub size_px: f64,
    pub stroke: String,
    pub stroke_width: f64,
    pub title: String,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            size_px: 480.0,
            stroke: "#1f4e9c".into(),
            stroke_width: 1.5,
            title: String::new(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone SVG of the closed polygon with a square axes box. Vertex
/// coordinates are written in curve units (y up, via a flipping transform)
/// with [`SVG_DECIMALS`] decimals.
pub fn emit_svg(curve: &CurveState, style: &SvgStyle) -> String {
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in curve.nodes() {
        lo_x = lo_x.min(p.x);
        hi_x = hi_x.max(p.x);
        lo_y = lo_y.min(p.y);
        hi_y = hi_y.max(p.y);
    }
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(1e-300) * 1.1;
    let (cx, cy) = (0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y));
    let (x0, y0) = (cx - 0.5 * span, cy - 0.5 * span);
    let margin = 40.0;
    let scale = style.size_px / span;
    let total = style.size_px + 2.0 * margin;

    let mut points = String::new();
    for (i, p) in curve.nodes().iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(points, "{cmd}{:.d$},{:.d$} ", p.x, p.y, d = SVG_DECIMALS);
    }
    points.push('Z');

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, "  <title>{}</title>", escape(&style.title));
    let _ = writeln!(
        s,
        r#"  <rect x="{margin}" y="{margin}" width="{w}" height="{w}" fill="none" stroke="grey" stroke-width="1"/>"#,
        w = style.size_px
    );
    let _ = writeln!(
        s,
        r#"  <text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        total / 2.0,
        margin * 0.6,
        escape(&style.title)
    );
    let _ = writeln!(
        s,
        r#"  <text x="{margin}" y="{}" font-family="sans-serif" font-size="10">x: [{:.3}, {:.3}]  y: [{:.3}, {:.3}]</text>"#,
        total - margin * 0.35,
        x0,
        x0 + span,
        y0,
        y0 + span
    );
    // Map curve coordinates into the box: flip y so the plot is upright.
    let _ = writeln!(
        s,
        r#"  <g transform="translate({tx} {ty}) scale({scale} {neg})">"#,
        tx = margin - x0 * scale,
        ty = margin + (y0 + span) * scale,
        neg = -scale
    );
    let _ = writeln!(
        s,
        r#"    <path d="{points}" fill="none" stroke="{}" stroke-width="{}" vector-effect="non-scaling-stroke"/>"#,
        style.stroke, style.stroke_width
    );
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(s, "</svg>");
    s
}

/// Vertex coordinates from the path written by [`emit_svg`].
pub fn svg_path_vertices(svg: &str) -> Result<Vec<[f64; 2]>> {
    let start = svg
        .find(" d=\"")
        .ok_or_else(|| FlowError::InvalidCurve("no path in SVG".into()))?
        + 4;
    let end = start
        + svg[start..]
            .find('"')
            .ok_or_else(|| FlowError::InvalidCurve("unterminated path".into()))?;
    let mut out = Vec::new();
    for tok in svg[start..end].split_whitespace() {
        let tok = tok.trim_start_matches(['M', 'L']);
        if tok == "Z" || tok.is_empty() {
            continue;
        }
        let (x, y) = tok
            .split_once(',')
            .ok_or_else(|| FlowError::InvalidCurve(format!("bad vertex `{tok}`")))?;
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| FlowError::InvalidCurve(format!("bad number `{v}`: {e}")))
        };
        out.push([parse(x)?, parse(y)?]);
    }
    Ok(out)
}

pub const CONVERGENCE_HEADER: &str = "time,mesh,h,tau,error,order";

pub fn write_convergence_csv<W: Write>(table: &ConvergenceTable, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    for r in &table.rows {
        let order = r.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
        writeln!(
            w,
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{order}",
            r.time, r.mesh, r.h, r.tau, r.error
        )?;
    }
    Ok(())
}

pub fn read_convergence_csv<R: BufRead>(r: R) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let bad = |message: String| FlowError::Parse { line: i + 1, message };
        if i == 0 {
            if line != CONVERGENCE_HEADER {
                return Err(bad(format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", f.len())));
        }
        let real = |k: usize| f[k].parse::<f64>().map_err(|e| bad(format!("field {k}: {e}")));
        rows.push(ConvergenceRow {
            time: real(0)?,
            mesh: f[1].parse().map_err(|e| bad(format!("mesh: {e}")))?,
            h: real(2)?,
            tau: real(3)?,
            error: real(4)?,
            order: if f[5].is_empty() { None } else { Some(real(5)?) },
        });
    }
    Ok(ConvergenceTable { rows })
}

pub const REDISTRIBUTION_HEADER: &str = "step,area_before,area_after,area_change";

pub fn write_redistribution_csv<W: Write>(events: &[RedistributionEvent], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{REDISTRIBUTION_HEADER}")?;
    for e in events {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e}",
            e.step, e.area_before, e.area_after, e.area_change
        )?;
    }
    Ok(())
}

/// Everything needed to repeat a run, plus its verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub spec: RunSpec,
    pub stats: RunStats,
    pub area_tolerance: f64,
    pub perimeter_tolerance: f64,
    pub area_ok: bool,
    pub perimeter_ok: bool,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn new(spec: &RunSpec, done: &Completed) -> Self {
        RunSummary {
            spec: spec.clone(),
            stats: done.stats.clone(),
            area_tolerance: AREA_TOL,
            perimeter_tolerance: PERIMETER_TOL,
            area_ok: done.stats.invariants.area_ok(),
            perimeter_ok: done.stats.invariants.perimeter_ok(),
            wall_seconds: done.wall_seconds,
        }
    }
}

/// Writes `diagnostics.csv`, `curve_<step>.csv` (and `.svg` when asked),
/// `redistribution.csv` if any events happened, and `summary.json`.
pub fn write_run(
    dir: &Path,
    prefix: &str,
    output: &RunOutput,
    summary: &RunSummary,
    svg: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = |base: &str| dir.join(format!("{prefix}{base}"));
    output
        .series
        .write_csv(std::io::BufWriter::new(std::fs::File::create(name("diagnostics.csv"))?))?;
    for s in &output.snapshots {
        let f = std::fs::File::create(name(&format!("curve_{}.csv", s.step)))?;
        write_curve_csv(&s.curve, std::io::BufWriter::new(f))?;
        if svg {
            let style = SvgStyle {
                title: format!("{} t = {:.6}", summary.stats.scheme.tag(), s.time),
                ..Default::default()
            };
            std::fs::write(name(&format!("curve_{}.svg", s.step)), emit_svg(&s.curve, &style))?;
        }
    }
    if !output.redistributions.is_empty() {
        write_redistribution_csv(
            &output.redistributions,
            std::fs::File::create(name("redistribution.csv"))?,
        )?;
    }
    let json = serde_json::to_string_pretty(summary).map_err(|e| FlowError::Io(e.into()))?;
    std::fs::write(name("summary.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_flower, Vec2};

    #[test]
    fn square_svg_has_closed_four_vertex_path() {
        let sq = CurveState::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        let svg = emit_svg(&sq, &SvgStyle::default());
        let v = svg_path_vertices(&svg).unwrap();
        assert_eq!(v.len(), 4);
        assert!(svg.contains(" Z\""));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn svg_vertices_match_nodes() {
        let c = make_flower(0.4, 5, 50).unwrap();
        let v = svg_path_vertices(&emit_svg(&c, &SvgStyle::default())).unwrap();
        let tol = 0.5 * 10f64.powi(-(SVG_DECIMALS as i32)) * 1.000001;
        for (p, q) in c.nodes().iter().zip(&v) {
            assert!((p.x - q[0]).abs() <= tol && (p.y - q[1]).abs() <= tol);
        }
    }

    #[test]
    fn title_is_escaped() {
        let c = make_flower(0.1, 3, 12).unwrap();
        let svg = emit_svg(
            &c,
            &SvgStyle {
                title: "a<b & c".into(),
                ..Default::default()
            },
        );
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn convergence_csv_round_trip() {
        let table = ConvergenceTable {
            rows: vec![
                ConvergenceRow {
                    time: 0.2,
                    mesh: 8,
                    h: 0.125,
                    tau: 0.04,
                    error: 1.1e-2,
                    order: None,
                },
                ConvergenceRow {
                    time: 0.2,
                    mesh: 16,
                    h: 0.0625,
                    tau: 0.01,
                    error: 3.7e-3,
                    order: Some(1.57),
                },
            ],
        };
        let mut buf = Vec::new();
        write_convergence_csv(&table, &mut buf).unwrap();
        assert_eq!(read_convergence_csv(buf.as_slice()).unwrap(), table);
    }
}
