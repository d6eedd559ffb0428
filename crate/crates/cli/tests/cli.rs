use std::fs::File;
use std::io::BufReader;

use sdflow::evolve::{DiagnosticsSeries, Redistribution, Scheme};
use sdflow::experiments::{InitialShape, Sampling};
use sdflow::geometry::{make_ellipse, read_curve_csv, write_curve_csv};
use sdflow::report::read_convergence_csv;
use sdflow::JacobianVariant;
use sdflow_cli::{execute, parse_cli, ExperimentSpec};

fn parse(s: &str) -> anyhow::Result<ExperimentSpec> {
    parse_cli(std::iter::once("sdflow").chain(s.split_whitespace()))
}

#[test]
fn run_with_explicit_ellipse() {
    let ExperimentSpec::Run { spec, .. } = parse("run --init ellipse:2,1 --mesh 32 --dt 1e-4 --t-end 2").unwrap()
    else {
        panic!("expected run");
    };
    assert_eq!(
        spec.shape,
        InitialShape::Ellipse {
            a: 2.0,
            b: 1.0,
            sampling: Sampling::Angle
        }
    );
    assert_eq!(spec.mesh, 32);
    assert_eq!(spec.tau, 1e-4);
    assert_eq!(spec.t_end, 2.0);
    assert_eq!(spec.scheme, Scheme::Proposed);
    assert_eq!(spec.redistribution, Redistribution::Off);
    assert_eq!(spec.run_config().unwrap().steps, 20_000);
}

#[test]
fn converge_grid_flags() {
    let ExperimentSpec::Converge { spec, .. } = parse("converge --levels 4 --base-mesh 8 --base-dt 0.04").unwrap()
    else {
        panic!("expected converge");
    };
    assert_eq!(spec.levels, 4);
    assert_eq!(spec.base_mesh, 8);
    assert_eq!(spec.base_dt, 0.04);
    assert_eq!(spec.times, vec![0.2, 0.5, 2.0]);
    let grid = spec.grid();
    assert_eq!(grid.len(), 5);
    assert_eq!(grid[4].0, 128);
    assert!((grid[4].1 - 0.04 / 256.0).abs() < 1e-18);
}

#[test]
fn zero_step_is_rejected() {
    let err = parse("run --dt 0").unwrap_err();
    assert!(format!("{err:#}").contains("--dt"), "{err:#}");
    assert!(parse("run --dt -1e-3").is_err());
    assert!(parse("converge --base-dt 0").is_err());
}

#[test]
fn unknown_flag_is_rejected() {
    assert!(parse("run --meshh 32").is_err());
    assert!(parse("explode").is_err());
}

#[test]
fn malformed_values_are_rejected() {
    for bad in [
        "run --init ellipse:2",
        "run --init circle:1,1",
        "run --init ellipse:-2,1",
        "run --init flower:0.65,2.5",
        "run --redistribute arclength:0",
        "run --redistribute sometimes",
        "run --mesh 2",
        "run --jacobian exact",
        "compare --scheme baseline",
        "converge --levels 0",
    ] {
        assert!(parse(bad).is_err(), "{bad} should fail");
    }
}

#[test]
fn subcommand_defaults() {
    let ExperimentSpec::Flower { spec, .. } = parse("flower").unwrap() else {
        panic!()
    };
    assert_eq!(
        spec.shape,
        InitialShape::Flower {
            amplitude: 0.65,
            frequency: 7
        }
    );
    assert_eq!((spec.mesh, spec.tau, spec.t_end), (210, 1e-6, 0.01));

    let ExperimentSpec::Run { spec, .. } =
        parse("run --scheme baseline --jacobian as-written --newton-tol 1e-12 --redistribute arclength:5").unwrap()
    else {
        panic!()
    };
    assert_eq!(spec.scheme, Scheme::Baseline);
    assert_eq!(spec.newton.jacobian_variant, JacobianVariant::AsWritten);
    assert_eq!(spec.redistribution, Redistribution::Arclength { every: 5 });
}

#[test]
fn file_input_fixes_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("start.csv");
    write_curve_csv(&make_ellipse(1.5, 1.0, 20).unwrap(), File::create(&path).unwrap()).unwrap();
    let arg = format!("run --init file:{}", path.display());
    let ExperimentSpec::Run { spec, .. } = parse(&arg).unwrap() else {
        panic!()
    };
    assert_eq!(spec.mesh, 20);
    assert!(parse(&format!("{arg} --mesh 21")).is_err());
}

#[test]
fn short_run_writes_readable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let exp = parse(&format!(
        "run --init ellipse:2,1 --mesh 16 --dt 1e-3 --t-end 0.02 --svg-every 10 --out {}",
        out.display()
    ))
    .unwrap();
    let mut text = Vec::new();
    assert!(execute(&exp, &mut text).unwrap());
    assert!(String::from_utf8(text).unwrap().contains("20 steps"));

    let series = DiagnosticsSeries::read_csv(BufReader::new(File::open(out.join("diagnostics.csv")).unwrap())).unwrap();
    assert_eq!(series.len(), 21);
    assert!(series.max_area_drift() < 1e-12);
    for step in [0, 10, 20] {
        let c = read_curve_csv(BufReader::new(File::open(out.join(format!("curve_{step}.csv"))).unwrap())).unwrap();
        assert_eq!(c.len(), 16);
        assert!(out.join(format!("curve_{step}.svg")).exists());
    }
    let summary: serde_json::Value =
        serde_json::from_reader(File::open(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["area_ok"], true);
    assert_eq!(summary["spec"]["mesh"], 16);
}

#[test]
fn compare_writes_both_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let exp = parse(&format!("compare --mesh 16 --dt 1e-3 --t-end 0.01 --out {}", out.display())).unwrap();
    assert!(execute(&exp, &mut Vec::new()).unwrap());
    for tag in ["proposed", "baseline"] {
        assert!(out.join(tag).join("diagnostics.csv").exists(), "{tag}");
    }
    let s: serde_json::Value = serde_json::from_reader(File::open(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["drift_ratio"].as_f64().unwrap() > 1.0);
}

#[test]
fn small_convergence_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv");
    let exp = parse(&format!(
        "converge --levels 2 --base-mesh 8 --base-dt 0.04 --times 0.08 --out {}",
        out.display()
    ))
    .unwrap();
    assert!(execute(&exp, &mut Vec::new()).unwrap());
    let table = read_convergence_csv(BufReader::new(File::open(out.join("convergence.csv")).unwrap())).unwrap();
    assert_eq!(table.errors_at(0.08).len(), 2);
    assert!(table.order_at(0.08).is_some());
}
