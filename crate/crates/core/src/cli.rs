//! Command-line front end: run configs, dispatch and JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::acceptance::{run_criterion, CriterionResult, CRITERIA};
use crate::brody::{extract_line, ExtractOptions, FamilySpec};
use crate::diskgrid::make_grid;
use crate::error::{Error, Result};
use crate::kobayashi::{derivative_bound, estimate_distance, BoundOptions, DistanceOptions};
use crate::report::to_json_string;
use crate::solver::{affine_target, derivative_disk, endpoint_errors, picard_solve, two_point_disk, SolverConfig};
use crate::structure::{validate_structure, Perturbation, StructureSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: usize,
    pub radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nodes: 33, radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Report path; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// CSV dump of the computed disk or line window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_samples() -> usize {
    1000
}

fn default_k_max() -> usize {
    DistanceOptions::default().k_max
}

fn default_t_grid() -> Vec<f64> {
    DistanceOptions::default().t_grid
}

fn default_lambda_max() -> f64 {
    BoundOptions::default().lambda_max
}

fn default_bound_tol() -> f64 {
    BoundOptions::default().tol
}

fn default_window() -> f64 {
    ExtractOptions::default().window
}

fn default_line_tol() -> f64 {
    ExtractOptions::default().tol
}

fn default_n_max() -> usize {
    ExtractOptions::default().n_max
}

/// What to run, with its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Validate {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Two-point disk when `q` is given, value-and-slope disk when `w` is
    /// given, otherwise a plain Picard solve seeded with the constant `p`.
    Disk {
        p: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w: Option<Vec<f64>>,
    },
    Distance {
        p: Vec<f64>,
        q: Vec<f64>,
        #[serde(default = "default_k_max")]
        k_max: usize,
        #[serde(default = "default_t_grid")]
        t_grid: Vec<f64>,
    },
    Bound {
        p: Vec<f64>,
        nu: Vec<f64>,
        #[serde(default = "default_lambda_max")]
        lambda_max: f64,
        #[serde(default = "default_bound_tol")]
        tol: f64,
    },
    Brody {
        family: FamilySpec,
        #[serde(default = "default_window")]
        window: f64,
        #[serde(default = "default_line_tol")]
        tol: f64,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    Selftest {
        /// Criteria to run; all when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        criteria: Option<Vec<u8>>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Disk { .. } => "disk",
            Command::Distance { .. } => "distance",
            Command::Bound { .. } => "bound",
            Command::Brody { .. } => "brody",
            Command::Selftest { .. } => "selftest",
        }
    }
}

fn default_structure() -> StructureSpec {
    StructureSpec::named("standard")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_structure")]
    pub structure: StructureSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            structure: default_structure(),
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            output: OutputSpec::default(),
            seed: 0,
        }
    }

    /// Parses a run config, or the `config` echoed inside a report.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let value = match value {
            Value::Object(mut map) if map.contains_key("results") && map.contains_key("config") => {
                map.remove("config").expect("checked above")
            }
            other => other,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// The outcome of one run: the JSON report and the process exit code.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Value,
    pub exit_code: i32,
    /// Human-readable table, printed by `selftest`.
    pub table: Option<String>,
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_FAILURE,
        e if e.is_solver_error() => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Executes a run config and assembles its report.
pub fn run(config: &RunConfig) -> RunOutcome {
    let mut table = None;
    let result = execute(config, &mut table);
    let (status, results, diagnostics, error, exit_code) = match result {
        Ok((results, diagnostics, code)) => ("ok", results, diagnostics, Value::Null, code),
        Err(e) => (
            "error",
            Value::Null,
            Value::Null,
            json!({ "kind": e.kind(), "message": e.to_string() }),
            exit_code_for(&e),
        ),
    };
    let report = json!({
        "command": config.command.name(),
        "status": status,
        "config": to_value(config),
        "results": results,
        "diagnostics": diagnostics,
        "error": error,
        "versions": { "jdisk": env!("CARGO_PKG_VERSION") },
    });
    RunOutcome { report, exit_code, table }
}

fn write_csv(path: &Option<PathBuf>, map: &crate::diskgrid::DiskMap) -> Result<()> {
    if let Some(path) = path {
        let file = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        map.to_csv(file)?;
    }
    Ok(())
}

fn execute(config: &RunConfig, table: &mut Option<String>) -> Result<(Value, Value, i32)> {
    config.solver.validate()?;
    let cfg = config.solver;
    let field = || config.structure.build();
    match &config.command {
        Command::Validate { samples } => {
            use rand::SeedableRng;
            let j = field()?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            let points = j.domain().sample_points(j.dim(), *samples, &mut rng);
            let report = validate_structure(&j, &points, crate::structure::TOL_STRUCTURE);
            let code = if report.pass { EXIT_OK } else { EXIT_FAILURE };
            Ok((to_value(&report), json!({ "dim": j.dim(), "label": j.label() }), code))
        }
        Command::Disk { p, q, t, w } => {
            let j = field()?;
            let grid = make_grid(config.grid.radius, config.grid.nodes)?;
            let (sol, endpoints) = match (q, w) {
                (Some(_), Some(_)) => return Err(Error::Config("give either q or w, not both".into())),
                (Some(q), None) => {
                    let t = t.unwrap_or(0.5);
                    let sol = two_point_disk(&j, p, q, t, &cfg, &grid)?;
                    let (e0, e1) = endpoint_errors(&sol.v, p, q, t)?;
                    (sol, json!({ "at_0": e0, "at_t": e1 }))
                }
                (None, Some(w)) => (derivative_disk(&j, p, w, &cfg, &grid)?, Value::Null),
                (None, None) => {
                    let seed = affine_target(p, p, 0.5, &grid)?;
                    let scale = if cfg.epsilon > 0.0 { 1.0 / cfg.epsilon } else { 1.0 };
                    (picard_solve(&j, &cfg, &seed.scaled(scale))?, Value::Null)
                }
            };
            write_csv(&config.output.csv, &sol.v)?;
            let results = json!({
                "residual": sol.residual,
                "endpoint_errors": endpoints,
                "value_at_origin": sol.v.at_origin(),
                "sup_norm": sol.v.sup_norm(),
            });
            let diagnostics = json!({
                "iterations": sol.iterations,
                "newton_steps": sol.newton_steps,
                "epsilon_used": sol.epsilon_used,
                "contraction_ratio": sol.contraction_ratio(),
                "step_history": sol.step_history,
            });
            Ok((results, diagnostics, EXIT_OK))
        }
        Command::Distance { p, q, k_max, t_grid } => {
            let j = field()?;
            let opts = DistanceOptions { k_max: *k_max, t_grid: t_grid.clone(), nodes: config.grid.nodes, cfg };
            let domain = j.domain().clone();
            let est = estimate_distance(&j, &domain, p, q, &opts)?;
            let record = est.record();
            Ok((json!({ "upper": record.upper, "best_chain": to_value(&record.best_chain) }), json!({ "interpolation": "bilinear", "search_log": to_value(&record.search_log) }), EXIT_OK))
        }
        Command::Bound { p, nu, lambda_max, tol } => {
            let j = field()?;
            let opts = BoundOptions { lambda_max: *lambda_max, tol: *tol, nodes: config.grid.nodes, cfg };
            let report = derivative_bound(&j, &j.domain().clone(), p, nu, &opts)?;
            Ok((
                json!({ "lower_bound": report.lower_bound, "unbounded_suspected": report.unbounded_suspected }),
                json!({ "probes": to_value(&report.probes) }),
                EXIT_OK,
            ))
        }
        Command::Brody { family, window, tol, n_max } => {
            let j = field()?;
            let opts = ExtractOptions { window: *window, tol: *tol, n_max: *n_max, nodes: config.grid.nodes, cfg };
            let report = extract_line(&j, family, &opts)?;
            if let Some(line) = &report.final_candidate {
                write_csv(&config.output.csv, &line.samples)?;
            }
            let record = report.record();
            Ok((
                json!({ "converged": record.converged, "candidate": to_value(&record.candidate) }),
                json!({ "interpolation": "cubic-lagrange", "steps": to_value(&record.steps) }),
                EXIT_OK,
            ))
        }
        Command::Selftest { criteria } => {
            let ids: Vec<u8> = match criteria {
                Some(ids) => ids.clone(),
                None => CRITERIA.iter().map(|c| c.0).collect(),
            };
            if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
                return Err(Error::Config(format!("no acceptance criterion {bad}")));
            }
            let results: Vec<CriterionResult> = ids.iter().map(|id| run_criterion(*id, config.seed)).collect();
            *table = Some(results.iter().map(|r| r.line() + "\n").collect());
            let all = results.iter().all(|r| r.pass);
            Ok((
                json!({ "all_pass": all, "criteria": to_value(&results) }),
                json!({ "seed": config.seed }),
                if all { EXIT_OK } else { EXIT_FAILURE },
            ))
        }
    }
}

/// Caps the rayon pool from `JDISK_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("JDISK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("JDISK_THREADS must be a positive integer, got `{raw}`")))?;
    // a second initialisation in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "jdisk", version, about = "J-holomorphic disks, chain distances and Brody rescaling")]
pub struct Cli {
    /// Run config in JSON (a previous report is accepted too); inline flags are ignored.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<CliCommand>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Gallery structure name.
    #[arg(long, default_value = "standard")]
    structure: String,
    /// Complex dimension.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Perturbation size of the gallery structure.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Perturbation shape: sin or cos-shear.
    #[arg(long, default_value = "sin")]
    perturbation: String,
    /// Chart radius of the structure's domain.
    #[arg(long, default_value_t = 1.0)]
    chart_radius: f64,
    /// Grid nodes per axis.
    #[arg(long, default_value_t = 33)]
    nodes: usize,
    /// Disk radius of the grid.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Solver scaling ε.
    #[arg(long)]
    solver_epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Dump the computed disk or line window as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Check J² = −Id on random samples of the structure's domain.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Solve for one disk.
    Disk {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Option<Vec<f64>>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Option<Vec<f64>>,
    },
    /// Upper bound on the chain distance between two points.
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        /// Interpolation nodes to try.
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        /// Smallest node; the grid doubles from here while below 1.
        #[arg(long)]
        tmin: Option<f64>,
    },
    /// Lower bound on the derivative supremum at a point.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        nu: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Rescale a family of disks and look for a limiting line.
    Brody {
        #[command(flatten)]
        common: Common,
        /// dilation or ladder.
        #[arg(long, default_value = "dilation")]
        family: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        nu: Vec<f64>,
        /// λ schedule for the ladder family.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        window: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
    },
    /// Run the acceptance suite and print a pass/fail table.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
    },
}

fn base_config(common: &Common, command: Command) -> Result<RunConfig> {
    let structure = StructureSpec {
        name: common.structure.clone(),
        n: common.n,
        epsilon: common.epsilon,
        perturbation: Perturbation::parse(&common.perturbation)?,
        radius: common.chart_radius,
    };
    let mut solver = SolverConfig::default();
    if let Some(eps) = common.solver_epsilon {
        solver.epsilon = eps;
    }
    Ok(RunConfig {
        command,
        structure,
        grid: GridSpec { nodes: common.nodes, radius: common.radius },
        solver,
        output: OutputSpec { report: common.report.clone(), csv: common.csv.clone() },
        seed: common.seed,
    })
}

/// `tmin, 2·tmin, 4·tmin, …` below 1.
pub fn doubling_grid(tmin: f64) -> Result<Vec<f64>> {
    if !(tmin > 0.0 && tmin < 1.0) {
        return Err(Error::Config(format!("tmin must lie in (0, 1), got {tmin}")));
    }
    let mut ts = vec![tmin];
    while ts.last().expect("non-empty") * 2.0 < 1.0 {
        ts.push(ts.last().expect("non-empty") * 2.0);
    }
    Ok(ts)
}

pub fn config_from_cli(cmd: CliCommand) -> Result<RunConfig> {
    match cmd {
        CliCommand::Validate { common, samples } => base_config(&common, Command::Validate { samples }),
        CliCommand::Disk { common, p, q, t, w } => base_config(&common, Command::Disk { p, q, t, w }),
        CliCommand::Distance { common, p, q, k_max, t_grid, tmin } => {
            let t_grid = match (t_grid, tmin) {
                (Some(_), Some(_)) => return Err(Error::Config("give either --t-grid or --tmin".into())),
                (Some(ts), None) => ts,
                (None, Some(tmin)) => doubling_grid(tmin)?,
                (None, None) => default_t_grid(),
            };
            base_config(&common, Command::Distance { p, q, k_max, t_grid })
        }
        CliCommand::Bound { common, p, nu, lambda_max, tol } => {
            base_config(&common, Command::Bound { p, nu, lambda_max, tol })
        }
        CliCommand::Brody { common, family, p, nu, lambdas, window, tol, n_max } => {
            let family = match family.as_str() {
                "dilation" => FamilySpec::Dilation { p, nu },
                "ladder" => FamilySpec::DerivativeLadder { p, nu, lambdas },
                other => return Err(Error::Config(format!("unknown family `{other}`"))),
            };
            base_config(&common, Command::Brody { family, window, tol, n_max })
        }
        CliCommand::Selftest { common, criteria } => base_config(&common, Command::Selftest { criteria }),
    }
}

/// Entry point for the binary; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let config = match (&cli.config, cli.command) {
        (Some(path), _) => RunConfig::load(path),
        (None, Some(cmd)) => config_from_cli(cmd),
        (None, None) => Err(Error::Config("a subcommand or --config is required".into())),
    };
    let config = match config.and_then(|c| init_threads().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("jdisk: {e}");
            return exit_code_for(&e);
        }
    };
    let outcome = run(&config);
    if let Some(table) = &outcome.table {
        print!("{table}");
    }
    let text = match to_json_string(&outcome.report) {
        Ok(s) => s + "\n",
        Err(e) => {
            eprintln!("jdisk: cannot serialize report: {e}");
            return EXIT_FAILURE;
        }
    };
    match &config.output.report {
        Some(path) => {
            if let Err(e) = fs::write(path, text) {
                eprintln!("jdisk: {}: {e}", path.display());
                return EXIT_FAILURE;
            }
        }
        None => print!("{text}"),
    }
    if let Some(err) = outcome.report.get("error").filter(|e| !e.is_null()) {
        eprintln!("jdisk: {}", err["message"].as_str().unwrap_or("error"));
    }
    outcome.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> Result<RunConfig> {
        RunConfig::from_json(json)
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(config(r#"{"command": {"name": "validate"}}"#).is_ok());
        assert!(config(r#"{"command": {"name": "validate"}, "sead": 3}"#).is_err());
        assert!(config(r#"{"command": {"name": "validate", "sample": 3}}"#).is_err());
        assert!(config(r#"{"command": {"name": "validate"}, "grid": {"nodes": 33, "r": 1}}"#).is_err());
        assert!(config(r#"{"command": {"name": "teleport"}}"#).is_err());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_for(&Error::UnknownName("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_for(&Error::NoChainFound { k_max: 1 }), EXIT_SOLVER);
        assert_eq!(exit_code_for(&Error::Diverged { iterations: 1, last_step: 1.0 }), EXIT_SOLVER);
    }

    #[test]
    fn validate_standard_passes_with_zero_residual() {
        let out = run(&config(r#"{"command": {"name": "validate", "samples": 50}}"#).unwrap());
        assert_eq!(out.exit_code, EXIT_OK);
        assert_eq!(out.report["results"]["max_residual"], json!(0.0));
        assert_eq!(out.report["results"]["pass"], json!(true));
    }

    #[test]
    fn standard_disk_is_affine_with_exact_endpoints() {
        let cfg = config_from_cli(CliCommand::Disk {
            common: Common::parse_from_defaults(),
            p: vec![0.0, 0.0],
            q: Some(vec![0.2, 0.0]),
            t: Some(0.5),
            w: None,
        })
        .unwrap();
        let out = run(&cfg);
        assert_eq!(out.exit_code, EXIT_OK);
        let results = &out.report["results"];
        assert!(results["residual"].as_f64().unwrap() < 1e-14);
        assert!(results["endpoint_errors"]["at_0"].as_f64().unwrap() < 1e-15);
        assert!(results["endpoint_errors"]["at_t"].as_f64().unwrap() < 1e-15);
    }

    #[test]
    fn distance_with_tmin_reaches_the_smallest_link() {
        let text = r#"{"command": {"name": "distance", "p": [0, 0], "q": [0.3, 0], "t_grid": [0.05, 0.1, 0.2, 0.4, 0.8]}, "grid": {"nodes": 17, "radius": 1}}"#;
        let out = run(&config(text).unwrap());
        let upper = out.report["results"]["upper"].as_f64().unwrap();
        assert_eq!(upper, 0.05f64.atanh());
        assert_eq!(doubling_grid(0.05).unwrap(), vec![0.05, 0.1, 0.2, 0.4, 0.8]);
    }

    #[test]
    fn solver_errors_exit_with_three_and_are_serialized() {
        let text = r#"{"command": {"name": "distance", "p": [0, 0], "q": [0.3, 0], "k_max": 1, "t_grid": [0.5]},
            "structure": {"name": "conjugated", "epsilon": 0.1}, "solver": {"max_iter": 1, "max_newton": 1, "continuation": 0}}"#;
        let out = run(&config(text).unwrap());
        assert_eq!(out.exit_code, EXIT_SOLVER);
        assert_eq!(out.report["error"]["kind"], json!("NoChainFound"));
    }

    #[test]
    fn reports_round_trip_through_their_config_echo() {
        let text = r#"{"command": {"name": "bound", "p": [0, 0], "nu": [1, 0], "lambda_max": 4}, "grid": {"nodes": 17, "radius": 1}}"#;
        let first = run(&config(text).unwrap());
        let echoed = to_json_string(&first.report).unwrap();
        let again = run(&RunConfig::from_json(&echoed).unwrap());
        assert_eq!(to_json_string(&again.report).unwrap(), echoed);
    }

    proptest::proptest! {
        #[test]
        fn doubling_grid_doubles_and_stays_below_one(tmin in 1e-4..0.999f64) {
            let ts = doubling_grid(tmin).unwrap();
            proptest::prop_assert_eq!(ts[0], tmin);
            proptest::prop_assert!(ts.windows(2).all(|w| w[1] == 2.0 * w[0]));
            proptest::prop_assert!(*ts.last().unwrap() < 1.0 && 2.0 * ts.last().unwrap() >= 1.0);
        }

        #[test]
        fn run_configs_round_trip_through_json(seed in proptest::num::u64::ANY, nodes in 3usize..200, k_max in 1usize..6) {
            let mut cfg = RunConfig::new(Command::Distance { p: vec![0.1, -0.2], q: vec![0.3, 0.4], k_max, t_grid: vec![0.1, 0.35] });
            cfg.seed = seed;
            cfg.grid.nodes = nodes;
            let text = to_json_string(&cfg).unwrap();
            proptest::prop_assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        }
    }

    impl Common {
        fn parse_from_defaults() -> Self {
            #[derive(Parser)]
            struct Wrap {
                #[command(flatten)]
                common: Common,
            }
            Wrap::parse_from(["jdisk"]).common
        }
    }
}
