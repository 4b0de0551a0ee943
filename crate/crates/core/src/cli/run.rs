use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::config::{Command, DerivedExponents, FieldSource, RunConfig};
use super::output::{grid_csv, sweep_csv, write_atomic, write_json, GridSidecar};
use crate::eigen::{solve_first_eigenpair, EigenResult, StopReason};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use crate::limit::{
    ball_chain, cone_plane_pair, continuation_sweep, lambda_inf_ball, lambda_inf_rectangle, optimal_touch_point,
    oracle_report, BallChain, OracleReport, SweepRow,
};
use crate::viscosity::{f_infinity_residual, h_infinity_residual, h_p_residual, Region, ResidualReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGNATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidDomain(_)
        | Error::InvalidExponents(_)
        | Error::InvalidLimit(_)
        | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Stagnation { .. }
        | Error::NonFinite(_)
        | Error::Scale { .. }
        | Error::Admissibility(_)
        | Error::FlatComponent(_)
        | Error::ShapeMismatch { .. } => EXIT_STAGNATION,
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    derived: Option<DerivedExponents>,
}

fn echo(cfg: &RunConfig) -> ConfigEcho<'_> {
    ConfigEcho {
        config: cfg,
        derived: cfg.derived(),
    }
}

/// Runs the configured command, writing its artifacts into `out`. Returns
/// the exit status; a solve that stops without converging still writes its
/// outputs and returns [`EXIT_STAGNATION`].
pub fn run(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    std::fs::create_dir_all(out)?;
    match cfg.command() {
        Command::Solve => solve(cfg, out, quiet),
        Command::Sweep => sweep(cfg, out, quiet),
        Command::Limit => limit(cfg, out, quiet),
        Command::Oracle => oracle(cfg, out, quiet),
        Command::Residual => residual(cfg, out, quiet),
    }
}

#[derive(Serialize)]
struct SolveJson<'a> {
    lambda: f64,
    lambda_root_p: f64,
    iterations: usize,
    constraint_residual: f64,
    el_residual_u: f64,
    el_residual_v: f64,
    stop: StopReason,
    config_echo: ConfigEcho<'a>,
}

fn solve_status(res: &EigenResult, quiet: bool) -> i32 {
    match res.stop {
        StopReason::Converged => EXIT_OK,
        StopReason::PrecisionFloor => {
            if !quiet {
                eprintln!("warning: stopped at the floating-point floor before reaching tol_grad");
            }
            EXIT_OK
        }
        StopReason::MaxIterations => {
            eprintln!("solver did not converge within max_iter = {}", res.iterations);
            EXIT_STAGNATION
        }
    }
}

fn write_fields(
    dom: &GridDomain,
    res_u: &ndarray::Array2<f64>,
    res_v: &ndarray::Array2<f64>,
    out: &Path,
) -> Result<()> {
    let keep = |i, j| dom.in_domain(i, j);
    write_atomic(&out.join("u.csv"), grid_csv(res_u, keep).as_bytes())?;
    write_atomic(&out.join("v.csv"), grid_csv(res_v, keep).as_bytes())?;
    Ok(())
}

fn solve(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let dom = cfg.domain()?;
    let e = cfg.exponents()?;
    let res = solve_first_eigenpair(&dom, &e, &cfg.solver_options()?)?;
    write_fields(&dom, &res.fields.u, &res.fields.v, out)?;
    write_json(
        &out.join("fields.json"),
        &GridSidecar::new(&dom, vec!["u.csv".into(), "v.csv".into()]),
    )?;
    write_json(
        &out.join("result.json"),
        &SolveJson {
            lambda: res.lambda,
            lambda_root_p: res.lambda_root_p,
            iterations: res.iterations,
            constraint_residual: res.constraint_residual,
            el_residual_u: res.el_residual_u,
            el_residual_v: res.el_residual_v,
            stop: res.stop,
            config_echo: echo(cfg),
        },
    )?;
    if !quiet {
        println!(
            "lambda = {:.12e}  lambda^(1/p) = {:.12}  iterations = {}  stop = {:?}",
            res.lambda, res.lambda_root_p, res.iterations, res.stop
        );
    }
    Ok(solve_status(&res, quiet))
}

#[derive(Serialize)]
struct SweepJson<'a> {
    rows: &'a [SweepRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<SweepFailure>,
    config_echo: ConfigEcho<'a>,
}

#[derive(Serialize)]
struct SweepFailure {
    p: f64,
    error: String,
}

fn sweep(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let dom = cfg.domain()?;
    let spec = cfg.limit_spec()?;
    let schedule = cfg.schedule.clone().unwrap_or_default();
    let sw = continuation_sweep(&dom, &spec, &schedule, &cfg.solver_options()?)?;
    write_atomic(&out.join("sweep.csv"), sweep_csv(&sw.rows).as_bytes())?;
    let failure = sw.failure.as_ref().map(|(p, e)| SweepFailure {
        p: *p,
        error: e.to_string(),
    });
    write_json(
        &out.join("sweep.json"),
        &SweepJson {
            rows: &sw.rows,
            failure,
            config_echo: echo(cfg),
        },
    )?;
    if let Some(last) = &sw.last {
        write_fields(&dom, &last.fields.u, &last.fields.v, out)?;
        write_json(
            &out.join("fields.json"),
            &GridSidecar::new(&dom, vec!["u.csv".into(), "v.csv".into()]),
        )?;
    }
    if !quiet {
        for r in &sw.rows {
            println!(
                "p = {:>5}  lambda^(1/p) = {:.8}  rel_gap = {:.3e}  iterations = {}{}",
                r.p,
                r.lambda_root_p,
                r.rel_gap.unwrap_or(f64::NAN),
                r.iterations,
                if r.converged { "" } else { "  (not converged)" }
            );
        }
    }
    match sw.failure {
        Some((p, e)) => {
            eprintln!("sweep stopped at p = {p}: {e}");
            Ok(exit_code(&e))
        }
        None => Ok(EXIT_OK),
    }
}

#[derive(Serialize)]
struct LimitJson<'a> {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch: Option<u8>,
    gamma: f64,
    #[serde(rename = "Q")]
    big_q: f64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    touch_point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ball_chain: Option<BallChain>,
    config_echo: ConfigEcho<'a>,
}

fn limit(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let s = cfg.limit_spec()?;
    let (value, branch, chain) = match s.l {
        None => (lambda_inf_ball(&s)?, None, Some(ball_chain(&s)?)),
        Some(_) => {
            let v = lambda_inf_rectangle(&s)?;
            (v.value, Some(v.branch.number()), None)
        }
    };
    write_json(
        &out.join("limit.json"),
        &LimitJson {
            value,
            branch,
            gamma: s.gamma,
            big_q: s.big_q,
            r: s.r,
            l: s.l,
            touch_point: optimal_touch_point(&s),
            ball_chain: chain,
            config_echo: echo(cfg),
        },
    )?;
    if !quiet {
        match branch {
            Some(b) => println!("limit value = {value:.15}  (branch {b})"),
            None => println!("limit value = {value:.15}"),
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OracleJson<'a> {
    #[serde(flatten)]
    report: OracleReport,
    samples: usize,
    config_echo: ConfigEcho<'a>,
}

fn oracle(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let s = cfg.limit_spec()?;
    let samples = cfg.oracle_samples.unwrap_or_default();
    let report = oracle_report(&s, samples)?;
    write_json(
        &out.join("oracle.json"),
        &OracleJson {
            report,
            samples,
            config_echo: echo(cfg),
        },
    )?;
    if !quiet {
        println!(
            "closed form = {:.10} (branch {})  oracle = {:.10}  rel_gap = {:.3e}  agreement = {}",
            report.formula_value, report.branch, report.oracle_value, report.rel_gap, report.agreement
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RegionSummary {
    count: usize,
    sup: f64,
}

#[derive(Serialize)]
struct ReportJson {
    sup_defect: f64,
    excluded_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_normal_defect: Option<f64>,
    file: String,
    regions: BTreeMap<&'static str, RegionSummary>,
}

impl ReportJson {
    fn new(r: &ResidualReport, file: &str) -> Self {
        let names = [
            ("v_pos", Region::VPos),
            ("v_neg", Region::VNeg),
            ("v_zero", Region::VZero),
            ("boundary", Region::Boundary),
            ("excluded", Region::Excluded),
        ];
        Self {
            sup_defect: r.sup_defect,
            excluded_radius: r.excluded_radius,
            boundary_normal_defect: r.boundary_normal_defect,
            file: file.to_string(),
            regions: names
                .into_iter()
                .map(|(n, k)| {
                    (
                        n,
                        RegionSummary {
                            count: r.count(k),
                            sup: r.sup_in(k),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct ResidualJson<'a> {
    lambda: f64,
    operators: BTreeMap<&'static str, ReportJson>,
    config_echo: ConfigEcho<'a>,
}

fn write_report(r: &ResidualReport, file: &str, out: &Path) -> Result<()> {
    let f = &r.residual_field;
    write_atomic(
        &out.join(file),
        grid_csv(&f.values, |i, j| f.defined[[i, j]]).as_bytes(),
    )
}

fn residual(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let dom = cfg.domain()?;
    let mut operators = BTreeMap::new();
    let mut sidecar_files = vec!["u.csv".to_string(), "v.csv".to_string()];
    let mut masks = Vec::new();
    let (lambda, status) = match cfg.fields.unwrap_or(FieldSource::ConePlane) {
        FieldSource::ConePlane => {
            let s = cfg.limit_spec()?;
            let lambda = s.closed_form()?;
            let (fp, _) = cone_plane_pair(&s, &dom)?;
            write_fields(&dom, &fp.u, &fp.v, out)?;
            let h = h_infinity_residual(&fp.u, &fp.v, lambda, &s, &dom)?;
            let f = f_infinity_residual(&fp.v, &fp.u, lambda, &s, &dom)?;
            for (name, file, r) in [("h_infinity", "h_infinity.csv", h), ("f_infinity", "f_infinity.csv", f)] {
                write_report(&r, file, out)?;
                operators.insert(name, ReportJson::new(&r, file));
                sidecar_files.push(file.into());
                masks.push((file, r.residual_field.defined));
            }
            (lambda, EXIT_OK)
        }
        FieldSource::Solve => {
            let e = cfg.exponents()?;
            let res = solve_first_eigenpair(&dom, &e, &cfg.solver_options()?)?;
            write_fields(&dom, &res.fields.u, &res.fields.v, out)?;
            let r = h_p_residual(&res.fields.u, &res.fields.v, res.lambda, &e, &dom)?;
            write_report(&r, "h_p.csv", out)?;
            operators.insert("h_p", ReportJson::new(&r, "h_p.csv"));
            sidecar_files.push("h_p.csv".into());
            masks.push(("h_p.csv", r.residual_field.defined));
            (res.lambda, solve_status(&res, quiet))
        }
    };
    let mut sidecar = GridSidecar::new(&dom, sidecar_files);
    for (file, mask) in &masks {
        sidecar = sidecar.with_mask(file, mask);
    }
    write_json(&out.join("fields.json"), &sidecar)?;
    if !quiet {
        for (name, r) in &operators {
            println!("{name}: sup_defect = {:.6e}", r.sup_defect);
        }
    }
    write_json(
        &out.join("residual.json"),
        &ResidualJson {
            lambda,
            operators,
            config_echo: echo(cfg),
        },
    )?;
    Ok(status)
}
