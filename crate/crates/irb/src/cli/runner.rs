//! Turn a [`Scenario`] into operators and drive the subcommands: certify,
//! solve + export, the finite-sum embedding check, and the ramp study.

use crate::certify::{self, ApproxStudy, Certificate};
use crate::cli::export::{self, ExportError};
use crate::cli::scenario::{ConfigError, F0, MapsSpec, ParamSpec, Scenario};
use crate::expr;
use crate::family::{BaseTriple, FamilyError, MapFamily};
use crate::fixpoint::{self, IterationReport};
use crate::operator::{GridFunction, OperatorError, OperatorSpec, Param, Space};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Family(#[from] FamilyError),
    #[error("{0}")]
    Operator(#[from] OperatorError),
    #[error("{0}")]
    Export(#[from] ExportError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

const INV_TOL: f64 = 1e-12;

pub fn build_spec(sc: &Scenario) -> Result<OperatorSpec, CliError> {
    let fam = match &sc.maps {
        MapsSpec::Direct(e) => MapFamily::direct(e.clone(), sc.n, sc.a, sc.b)?,
        MapsSpec::Bases { bases, h } => MapFamily::extend(bases.clone(), h.clone(), sc.a, sc.b)?,
    };
    let spec = OperatorSpec {
        fam,
        q: build_param(&sc.q, &sc.maps)?,
        s: build_param(&sc.s, &sc.maps)?,
        n_t: sc.n_t,
        inv_tol: INV_TOL,
        delta: sc.delta,
        n_x: sc.n_x,
        space: sc.space,
    };
    spec.validate()?;
    Ok(spec)
}

fn build_param(p: &ParamSpec, maps: &MapsSpec) -> Result<Param, CliError> {
    match p {
        ParamSpec::Formula(e) => Ok(Param::Formula(e.clone())),
        ParamSpec::Bases { bases, double } => {
            let MapsSpec::Bases { h, .. } = maps else {
                return Err(CliError::Usage(
                    "base-list q/s require base maps with a homotopy".into(),
                ));
            };
            let bases = if *double {
                crate::family::double_endpoints(bases)
            } else {
                bases.clone()
            };
            Ok(Param::Extended { bases, h: h.clone() })
        }
    }
}

pub fn start_function(sc: &Scenario, spec: &OperatorSpec) -> Result<GridFunction, CliError> {
    Ok(match &sc.f0 {
        F0::Zero => spec.zero(),
        F0::One => spec.one(),
        F0::Formula(e) => {
            let vals: Result<Vec<f64>, _> = (0..sc.n_x)
                .map(|i| {
                    let x = spec.grid_a()
                        + (sc.b - spec.grid_a()) * i as f64 / (sc.n_x - 1) as f64;
                    expr::eval(e, 1.0, x)
                })
                .collect();
            let vals = vals.map_err(|e| CliError::Usage(format!("f0 evaluation failed: {e}")))?;
            GridFunction::new(spec.grid_a(), sc.b, vals)?
        }
    })
}

pub fn certificate_for(spec: &OperatorSpec) -> Result<Certificate, CliError> {
    Ok(match spec.space {
        Space::Sup => certify::certify_bounded(spec, spec.n_t, spec.n_x)?,
        Space::Lp(p) => certify::certify_lp(spec, p, spec.n_t, spec.n_x)?,
    })
}

/// The scenario's raw base triple (doubling flags ignored; the embedding
/// check compensates endpoints internally).
pub fn raw_triple(sc: &Scenario) -> Result<BaseTriple, CliError> {
    let MapsSpec::Bases { bases, .. } = &sc.maps else {
        return Err(CliError::Usage(
            "this command needs base maps, not a direct map expression".into(),
        ));
    };
    let (ParamSpec::Bases { bases: q, .. }, ParamSpec::Bases { bases: s, .. }) = (&sc.q, &sc.s)
    else {
        return Err(CliError::Usage(
            "this command needs base-list q and s, not formulas".into(),
        ));
    };
    Ok(BaseTriple::new(bases.clone(), q.clone(), s.clone())?)
}

/// The operator's effective triple: doubling flags applied.
pub fn effective_triple(sc: &Scenario) -> Result<BaseTriple, CliError> {
    let raw = raw_triple(sc)?;
    let apply = |p: &ParamSpec, bases: Vec<crate::expr::Expr>| match p {
        ParamSpec::Bases { double: true, .. } => crate::family::double_endpoints(&bases),
        _ => bases,
    };
    let q = apply(&sc.q, raw.q.clone());
    let s = apply(&sc.s, raw.s.clone());
    Ok(BaseTriple::new(raw.maps, q, s)?)
}

pub struct RunOutcome {
    pub exit: i32,
    pub report: serde_json::Value,
    pub written: Vec<PathBuf>,
}

fn scenario_json(sc: &Scenario) -> serde_json::Value {
    json!({
        "name": sc.name,
        "a": sc.a,
        "b": sc.b,
        "nx": sc.n_x,
        "nt": sc.n_t,
        "delta": sc.delta,
        "n": sc.n,
        "space": match sc.space {
            Space::Sup => "sup".to_string(),
            Space::Lp(p) => format!("lp {p}"),
        },
        "tol": sc.tol,
        "kmax": sc.k_max,
    })
}

pub fn report_json(sc: &Scenario, cert: &Certificate, rep: &IterationReport) -> serde_json::Value {
    let mut warnings = rep.warnings.clone();
    if !cert.pass {
        warnings.push(
            "certificate failed: no contraction guarantee; residuals monitored only".to_string(),
        );
    }
    json!({
        "scenario": scenario_json(sc),
        "certificate": cert,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "residuals": rep.residuals,
        "bounds": rep.bounds,
        "warnings": warnings,
    })
}

pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let spec = build_spec(sc)?;
    let cert = certificate_for(&spec)?;
    let contraction = cert.pass.then_some(cert.criterion);
    let f0 = start_function(sc, &spec)?;
    let rep = fixpoint::solve(&spec, &f0, sc.tol, sc.k_max, contraction)?;

    let report = report_json(sc, &cert, &rep);
    let mut written = Vec::new();

    let csv_name = sc.csv.clone().unwrap_or_else(|| format!("{}.csv", sc.name));
    let csv_path = out_dir.join(csv_name);
    export::export_csv(&rep.kept, &csv_path)?;
    written.push(csv_path);

    if let Some(svg_name) = &sc.svg {
        let svg_path = out_dir.join(svg_name);
        export::export_svg(&rep.kept, &svg_path)?;
        written.push(svg_path);
    }

    let report_name = sc
        .report
        .clone()
        .unwrap_or_else(|| format!("{}-report.json", sc.name));
    let report_path = out_dir.join(report_name);
    export::export_report(&report, &report_path)?;
    written.push(report_path);

    let exit = if !cert.pass {
        2
    } else if rep.converged {
        0
    } else {
        1
    };
    Ok(RunOutcome {
        exit,
        report,
        written,
    })
}

/// Deterministic bounded test functions for the embedding check: zero plus
/// `count - 1` random grids with values in [-1, 1].
pub fn embed_test_functions(sc: &Scenario, count: usize) -> Vec<GridFunction> {
    let mut rng = StdRng::seed_from_u64(42);
    let mut fs = vec![GridFunction::zeros(sc.a, sc.b, sc.n_x)];
    while fs.len() < count {
        let vals: Vec<f64> = (0..sc.n_x).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        fs.push(GridFunction::new(sc.a, sc.b, vals).expect("random grid is valid"));
    }
    fs
}

pub struct EmbedOutcome {
    pub discrepancies: Vec<f64>,
    pub max: f64,
}

pub fn embed_check(sc: &Scenario, n_t: usize, count: usize) -> Result<EmbedOutcome, CliError> {
    let triple = raw_triple(sc)?;
    let mut discrepancies = Vec::new();
    for f in embed_test_functions(sc, count) {
        discrepancies.push(certify::embed_rb_check(&triple, &f, n_t)?);
    }
    let max = discrepancies.iter().fold(0.0f64, |m, d| m.max(*d));
    Ok(EmbedOutcome { discrepancies, max })
}

pub fn approx_study(sc: &Scenario, ks: &[u32], n_t: usize) -> Result<ApproxStudy, CliError> {
    let triple = effective_triple(sc)?;
    let spec = build_spec(sc)?;
    // the study runs on the offset-free grid [a, b]
    let f = match &sc.f0 {
        F0::Zero => GridFunction::zeros(sc.a, sc.b, sc.n_x),
        F0::One => GridFunction::constant(sc.a, sc.b, sc.n_x, 1.0),
        F0::Formula(_) => {
            let g = start_function(sc, &spec)?;
            GridFunction::new(sc.a, sc.b, g.values().to_vec())?
        }
    };
    Ok(certify::approx_rb_study(&triple, ks, &f, n_t)?)
}
