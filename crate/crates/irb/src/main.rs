use clap::{Parser, Subcommand};
use irb::cli::runner::{self, CliError};
use irb::cli::scenario::{self, Scenario};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "irb",
    version,
    about = "Fixed points of integral operators built from interval map families"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify contraction, iterate to the fixed point, and write artifacts
    Run {
        /// Config file path or builtin scenario name
        target: String,
        /// Override the number of quadrature nodes
        #[arg(long)]
        nt: Option<usize>,
        /// Override the grid resolution
        #[arg(long)]
        nx: Option<usize>,
        /// Override the residual tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Directory for CSV/SVG/report outputs
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print the contraction certificate as JSON
    Certify {
        target: String,
        #[arg(long)]
        nt: Option<usize>,
        #[arg(long)]
        nx: Option<usize>,
    },
    /// Compare the step-homotopy operator against the finite-sum operator
    EmbedRb {
        target: String,
        /// Quadrature nodes for the check (must be a multiple of 2 (n-1))
        #[arg(long)]
        nt: Option<usize>,
        /// Number of test functions (zero plus random bounded grids)
        #[arg(long, default_value_t = 10)]
        functions: usize,
    },
    /// Ramp-approximation error study against the step operator
    ApproxRb {
        target: String,
        /// Comma-separated ramp steepness values
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        k: Vec<u32>,
        #[arg(long)]
        nt: Option<usize>,
    },
    /// List builtin scenarios or dump one as config text
    Scenario {
        #[command(subcommand)]
        cmd: ScenarioCmd,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Print the builtin scenario names
    List,
    /// Print a builtin scenario in config form
    Dump { name: String },
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load(
    target: &str,
    nt: Option<usize>,
    nx: Option<usize>,
    tol: Option<f64>,
) -> Result<Scenario, CliError> {
    let path = Path::new(target);
    let mut sc = if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario");
        scenario::parse_config(&text, name)?
    } else if let Some(sc) = scenario::builtin(target) {
        sc
    } else {
        return Err(CliError::Usage(format!(
            "no such config file or builtin scenario: {target} (see `irb scenario list`)"
        )));
    };
    if let Some(nt) = nt {
        let align = 2 * (sc.n - 1);
        if nt < 2 || nt % align != 0 {
            return Err(CliError::Usage(format!(
                "--nt {nt} must be a positive multiple of 2 (n-1) = {align}"
            )));
        }
        sc.n_t = nt;
    }
    if let Some(nx) = nx {
        if nx < 2 {
            return Err(CliError::Usage(format!("--nx {nx} is too small")));
        }
        sc.n_x = nx;
    }
    if let Some(tol) = tol {
        if !(tol > 0.0) {
            return Err(CliError::Usage(format!("--tol {tol} must be positive")));
        }
        sc.tol = tol;
    }
    Ok(sc)
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("IRB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("IRB_THREADS must be a non-negative integer, got `{v}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Run {
            target,
            nt,
            nx,
            tol,
            out_dir,
        } => {
            let sc = load(&target, nt, nx, tol)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
            let out = runner::run_scenario(&sc, &out_dir)?;
            let cert = &out.report["certificate"];
            println!(
                "certificate: {} criterion {} ({})",
                cert["type"].as_str().unwrap_or("?"),
                cert["criterion"],
                if cert["pass"].as_bool().unwrap_or(false) {
                    "pass"
                } else {
                    "FAIL"
                }
            );
            let residual = out.report["residuals"]
                .as_array()
                .and_then(|r| r.last().cloned())
                .unwrap_or_else(|| 0.0.into());
            println!(
                "iterations: {} ({}), final residual {residual}",
                out.report["iterations"],
                if out.report["converged"].as_bool().unwrap_or(false) {
                    "converged"
                } else {
                    "not converged"
                }
            );
            for w in out.report["warnings"].as_array().into_iter().flatten() {
                println!("warning: {}", w.as_str().unwrap_or(""));
            }
            for p in &out.written {
                println!("wrote {}", p.display());
            }
            Ok(out.exit as u8)
        }
        Cmd::Certify { target, nt, nx } => {
            let sc = load(&target, nt, nx, None)?;
            let spec = runner::build_spec(&sc)?;
            let cert = runner::certificate_for(&spec)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&cert).expect("certificate serializes")
            );
            Ok(if cert.pass { 0 } else { 2 })
        }
        Cmd::EmbedRb {
            target,
            nt,
            functions,
        } => {
            let sc = load(&target, None, None, None)?;
            let nt = nt.unwrap_or(sc.n_t);
            let out = runner::embed_check(&sc, nt, functions.max(1))?;
            for (i, d) in out.discrepancies.iter().enumerate() {
                println!("f{i}: discrepancy {d:.3e}");
            }
            println!("max discrepancy: {:.3e} over {} functions", out.max, out.discrepancies.len());
            Ok(0)
        }
        Cmd::ApproxRb { target, k, nt } => {
            if k.is_empty() {
                return Err(CliError::Usage("need at least one ramp steepness".into()));
            }
            if let Some(&bad) = k.iter().find(|&&k| k < 2) {
                return Err(CliError::Usage(format!(
                    "ramp steepness must be >= 2, got {bad}"
                )));
            }
            let sc = load(&target, nt, None, None)?;
            let study = runner::approx_study(&sc, &k, sc.n_t)?;
            println!("{:>6}  {:>13}  {:>13}", "k", "e_k", "bound_k");
            for e in &study.entries {
                println!("{:>6}  {:>13.6e}  {:>13.6e}", e.k, e.e, e.bound);
            }
            println!("C_q = {:.6e}, C_s = {:.6e}", study.c_q, study.c_s);
            println!("non-uniformity probe: {:.6}", study.nonuniform_probe);
            for w in &study.warnings {
                println!("warning: {w}");
            }
            Ok(0)
        }
        Cmd::Scenario { cmd } => match cmd {
            ScenarioCmd::List => {
                for name in scenario::BUILTIN_NAMES {
                    println!("{name}");
                }
                Ok(0)
            }
            ScenarioCmd::Dump { name } => {
                let sc = scenario::builtin(&name).ok_or_else(|| {
                    CliError::Usage(format!("no builtin scenario named `{name}`"))
                })?;
                print!("{}", scenario::dump(&sc));
                Ok(0)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
