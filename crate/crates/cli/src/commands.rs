//! The four subcommands. Each returns the exit code it wants the process to
//! end with; hard errors come back as [`CliError`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use slbvp_core::diagnostics::{diagnose, DiagnosticsReport};
use slbvp_core::domain::{DomainShape, DomainSpec};
use slbvp_core::grid::{build_grid, Grid};
use slbvp_core::legendre::{dual_residual, gradient_roundtrip, legendre_transform, DualField};
use slbvp_core::operator::OperatorKind;
use slbvp_core::radial::{radial_solve, radial_solve_with_steps, RadialProfile};
use slbvp_core::solver::{
    continuation_solve, FailureKind, NewtonRecord, Normalization, Problem, SolveState, TracePoint,
    DEFAULT_CONVEXITY_GUARD,
};

use crate::config::{GridConfig, RunConfig};
use crate::exit::{CliError, ExitCode};
use crate::output::{atomic_write, csv_bytes, field_rows, write_json, Curvatures};
use crate::svg::heatmap;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SUMMARY_FILE: &str = "summary.json";
pub const STATE_FILE: &str = "state.json";
pub const FIELDS_FILE: &str = "fields.csv";
pub const DUAL_FIELDS_FILE: &str = "dual_fields.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const PROFILE_FILE: &str = "profile.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub n_r: usize,
    pub n_phi: usize,
    pub nodes: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainsSummary {
    pub source: DomainShape,
    pub target: DomainShape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageHistory {
    pub t: f64,
    pub iterations: Vec<NewtonRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureSummary {
    pub kind: FailureKind,
    /// Last `t` whose stage converged.
    pub t_reached: Option<f64>,
    /// `t` of the stage that failed.
    pub t_failed: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualSummary {
    pub c_dual: f64,
    pub dual_residual: f64,
    pub gradient_roundtrip: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    /// `c` at `t = 1`; null when the run did not get there.
    pub c: Option<f64>,
    pub t_trace: Vec<TracePoint>,
    pub converged: bool,
    pub grid: GridSummary,
    pub domains: DomainsSummary,
    pub wall_time_s: f64,
    pub version: String,
    pub seed: u64,
    pub residual: Option<f64>,
    pub newton_history: Vec<StageHistory>,
    pub failure: Option<FailureSummary>,
    pub dual: Option<DualSummary>,
}

/// Everything `diagnose` needs to rebuild the discrete problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub version: String,
    pub config: RunConfig,
    pub state: SolveState,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub exit: ExitCode,
    pub summary: Summary,
}

fn problem<'a>(grid: &'a Grid, target: &'a DomainSpec, kind: OperatorKind) -> Problem<'a> {
    Problem {
        grid,
        target,
        kind,
        normalization: Normalization::MeanZero,
        convexity_guard: DEFAULT_CONVEXITY_GUARD,
    }
}

/// Residual per node with the stored `c`, without the normalization entry.
fn node_residuals(grid: &Grid, target: &DomainSpec, kind: OperatorKind, st: &SolveState) -> Vec<f64> {
    match problem(grid, target, kind).residual(&st.u, st.c, st.t) {
        Ok(mut r) => {
            r.truncate(grid.len());
            r
        }
        Err(_) => vec![f64::NAN; grid.len()],
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(&format!("creating {}", dir.display()), e))
}

pub fn cmd_solve(config_path: &Path) -> Result<SolveOutcome, CliError> {
    let config = RunConfig::load(config_path)?;
    solve_config(&config)
}

/// `solve` on an already parsed config.
pub fn solve_config(config: &RunConfig) -> Result<SolveOutcome, CliError> {
    let domains = config.validate()?;
    let (source, target) = (&domains.source, &domains.target);
    let grid = build_grid(source, config.grid.n_r, config.grid.n_phi).map_err(CliError::from_core)?;
    let dir = &config.output.dir;
    ensure_dir(dir)?;

    let started = Instant::now();
    let result = continuation_solve(source, target, &grid, &config.solve_config());

    let mut summary = Summary {
        c: None,
        t_trace: Vec::new(),
        converged: false,
        grid: GridSummary {
            n_r: grid.n_r,
            n_phi: grid.n_phi,
            nodes: grid.len(),
            h: grid.h,
        },
        domains: DomainsSummary {
            source: config.source_domain.clone(),
            target: config.target_domain.clone(),
        },
        wall_time_s: 0.0,
        version: VERSION.to_string(),
        seed: config.seed,
        residual: None,
        newton_history: Vec::new(),
        failure: None,
        dual: None,
    };

    let run = match result {
        Ok(run) => run,
        Err(f) => {
            summary.t_trace = f.trace.clone();
            // Converged stages are summarized in the trace; the failed one
            // keeps its full iteration record.
            summary.newton_history = vec![StageHistory {
                t: f.last_attempt.t,
                iterations: f.last_attempt.newton_history.clone(),
            }];
            summary.failure = Some(FailureSummary {
                kind: f.kind,
                t_reached: f.t_reached,
                t_failed: f.last_attempt.t,
                residual: f.last_attempt.residual_norm,
            });
            summary.wall_time_s = started.elapsed().as_secs_f64();
            write_json(&dir.join(SUMMARY_FILE), &summary)?;
            return Ok(SolveOutcome {
                exit: ExitCode::of_failure(f.kind),
                summary,
            });
        }
    };

    let st = &run.state;
    summary.c = Some(st.c);
    summary.converged = true;
    summary.residual = Some(st.residual_norm);
    summary.t_trace = run.trace.clone();
    summary.newton_history = run
        .stages
        .iter()
        .map(|s| StageHistory {
            t: s.t,
            iterations: s.newton_history.clone(),
        })
        .collect();

    let ders = grid.all_derivatives(&st.u).map_err(CliError::from_core)?;
    let residual = node_residuals(&grid, target, OperatorKind::Graph, st);
    let rows = field_rows(&grid, &st.u, &ders, &residual, Curvatures::Graph);
    if config.output.emit_csv {
        atomic_write(&dir.join(FIELDS_FILE), &csv_bytes(&rows)?)?;
    }
    if config.output.emit_svg {
        let kmin: Vec<f64> = rows.iter().map(|r| r.kappa1).collect();
        let kmax: Vec<f64> = rows.iter().map(|r| r.kappa2).collect();
        let abs_res: Vec<f64> = residual.iter().map(|r| r.abs()).collect();
        for (name, values, title) in [
            ("u.svg", &st.u, "u"),
            ("kappa_min.svg", &kmin, "smallest principal curvature"),
            ("kappa_max.svg", &kmax, "largest principal curvature"),
            ("residual.svg", &abs_res, "|residual|"),
        ] {
            atomic_write(&dir.join(name), heatmap(&grid, values, title).as_bytes())?;
        }
    }
    if config.output.emit_dual {
        let dual_grid = build_grid(target, config.grid.n_r, config.grid.n_phi).map_err(CliError::from_core)?;
        let dual = legendre_transform(&grid, &st.u, st.c, st.t, &dual_grid, target).map_err(CliError::from_core)?;
        let dres = dual_residual(&dual).map_err(CliError::from_core)?;
        let rt = gradient_roundtrip(&grid, &st.u, &dual).map_err(CliError::from_core)?;
        summary.dual = Some(DualSummary {
            c_dual: dual.c_dual,
            dual_residual: dres.max_norm,
            gradient_roundtrip: rt.max_error,
        });
        if config.output.emit_csv {
            write_dual_fields(&dir.join(DUAL_FIELDS_FILE), &dual, &dres.values)?;
        }
    }

    write_json(
        &dir.join(STATE_FILE),
        &StateFile {
            version: VERSION.to_string(),
            config: config.clone(),
            state: st.clone(),
        },
    )?;
    summary.wall_time_s = started.elapsed().as_secs_f64();
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(SolveOutcome {
        exit: ExitCode::Ok,
        summary,
    })
}

fn write_dual_fields(path: &Path, dual: &DualField, residual: &[f64]) -> Result<(), CliError> {
    let g = &dual.grid;
    let ders = g.all_derivatives(&dual.u_star).map_err(CliError::from_core)?;
    let rows = field_rows(g, &dual.u_star, &ders, residual, Curvatures::Dual);
    atomic_write(path, &csv_bytes(&rows)?)
}

pub fn load_state(path: &Path) -> Result<StateFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read state {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid state {}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct DiagnoseOutcome {
    pub exit: ExitCode,
    pub report: DiagnosticsReport,
}

/// Writes `diagnostics.json` into `out` (default: next to the state file).
pub fn cmd_diagnose(state_path: &Path, compare: Option<&Path>, out: Option<&Path>) -> Result<DiagnoseOutcome, CliError> {
    let file = load_state(state_path)?;
    let domains = file.config.validate()?;
    let grid = build_grid(&domains.source, file.config.grid.n_r, file.config.grid.n_phi)
        .map_err(CliError::from_core)?;
    if file.state.u.len() != grid.len() {
        return Err(CliError::config(format!(
            "state has {} values but the configured grid has {} nodes",
            file.state.u.len(),
            grid.len()
        )));
    }
    let other = match compare {
        Some(p) => {
            let o = load_state(p)?;
            if o.config.grid != file.config.grid
                || o.config.source_domain != file.config.source_domain
                || o.config.target_domain != file.config.target_domain
            {
                return Err(CliError::config("comparison state belongs to a different problem"));
            }
            Some(o.state)
        }
        None => None,
    };
    let report = diagnose(&grid, &file.state, &domains.source, &domains.target, other.as_ref())
        .map_err(|e| CliError::config(format!("cannot diagnose state: {e}")))?;
    let dir: PathBuf = match out {
        Some(d) => d.to_path_buf(),
        None => state_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    ensure_dir(&dir)?;
    write_json(&dir.join(DIAGNOSTICS_FILE), &report)?;
    Ok(DiagnoseOutcome {
        exit: if report.passed { ExitCode::Ok } else { ExitCode::Diagnostic },
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleArgs {
    pub rho_src: f64,
    pub rho_tgt: f64,
    pub n: usize,
    pub t: f64,
    pub tol: f64,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct ProfileRow {
    r: f64,
    phi: f64,
    dphi: f64,
    kappa_rad: f64,
    kappa_tan: f64,
}

pub fn cmd_oracle(args: &OracleArgs, out: Option<&Path>) -> Result<RadialProfile, CliError> {
    let profile = match args.steps {
        Some(s) => radial_solve_with_steps(args.rho_src, args.rho_tgt, args.n, args.t, args.tol, s),
        None => radial_solve(args.rho_src, args.rho_tgt, args.n, args.t, args.tol),
    }
    .map_err(CliError::from_core)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let rows: Vec<ProfileRow> = (0..profile.r.len())
            .map(|k| ProfileRow {
                r: profile.r[k],
                phi: profile.phi[k],
                dphi: profile.dphi[k],
                kappa_rad: profile.kappa_rad[k],
                kappa_tan: profile.kappa_tan[k],
            })
            .collect();
        atomic_write(&dir.join(PROFILE_FILE), &csv_bytes(&rows)?)?;
    }
    Ok(profile)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_r: usize,
    pub n_phi: usize,
    pub h: Option<f64>,
    pub c: Option<f64>,
    pub c_oracle: Option<f64>,
    pub error: Option<f64>,
    pub runtime_s: f64,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub exit: ExitCode,
    pub rows: Vec<SweepRow>,
}

/// Radii of two discs, for which the radial shooting oracle applies.
fn disc_radii(config: &RunConfig) -> Option<(f64, f64)> {
    match (&config.source_domain, &config.target_domain) {
        (DomainShape::Disc { radius: a, .. }, DomainShape::Disc { radius: b, .. }) => Some((*a, *b)),
        _ => None,
    }
}

pub const SWEEP_ORACLE_TOL: f64 = 1e-13;

pub fn cmd_sweep(config_path: &Path) -> Result<SweepOutcome, CliError> {
    let config = RunConfig::load(config_path)?;
    sweep_config(&config)
}

pub fn sweep_config(config: &RunConfig) -> Result<SweepOutcome, CliError> {
    config.validate()?;
    let resolutions: Vec<GridConfig> = match &config.resolutions {
        Some(r) if !r.is_empty() => r.clone(),
        _ => return Err(CliError::config("sweep needs a non-empty \"resolutions\" list")),
    };
    let oracle = match disc_radii(config) {
        Some((a, b)) => Some(radial_solve(a, b, 2, 1.0, SWEEP_ORACLE_TOL).map_err(CliError::from_core)?.c),
        None => None,
    };
    let root = config.output.dir.clone();
    ensure_dir(&root)?;

    let mut rows = Vec::new();
    let mut exit = ExitCode::Ok;
    for res in resolutions {
        let mut run = config.clone();
        run.grid = res;
        run.resolutions = None;
        run.output.dir = root.join(format!("{}x{}", res.n_r, res.n_phi));
        let started = Instant::now();
        let outcome = solve_config(&run);
        let runtime_s = started.elapsed().as_secs_f64();
        let (code, summary) = match outcome {
            Ok(o) => (o.exit, Some(o.summary)),
            Err(e) => {
                eprintln!("sweep {}x{}: {e}", res.n_r, res.n_phi);
                (e.code, None)
            }
        };
        if exit == ExitCode::Ok && code != ExitCode::Ok {
            exit = code;
        }
        let c = summary.as_ref().and_then(|s| s.c);
        rows.push(SweepRow {
            n_r: res.n_r,
            n_phi: res.n_phi,
            h: summary.as_ref().map(|s| s.grid.h),
            c,
            c_oracle: oracle,
            error: match (c, oracle) {
                (Some(c), Some(o)) => Some((c - o).abs()),
                _ => None,
            },
            runtime_s,
            exit_code: code.code(),
        });
    }
    atomic_write(&root.join(SWEEP_FILE), &csv_bytes(&rows)?)?;
    Ok(SweepOutcome { exit, rows })
}
