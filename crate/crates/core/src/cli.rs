//! Command-line driver. Every command produces one JSON document; `run`
//! returns it together with the process exit code.
//!
//! Exit codes: 0 success, 1 validation, parse or projector failure, 2 solver
//! failure (or heuristic divergence), 3 weak-duality violation (`certify`).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::dual::{solve_bound, BoundReport, BoundStatus, DualMode};
use crate::error::{Error, Result};
use crate::factorization::stack_terms;
use crate::generate::InstanceKind;
use crate::io::{
    digest, generate_instance, parse_problem, HeuristicSummary, OracleSummary, ParsedProblem, ReportFile,
    SolverDiagnostics,
};
use crate::model::{Domain, PhysicsProblem};
use crate::oracle::{brute_force_boolean, check_weak_duality, grid_search_interval, OracleResult};
use crate::projectors::{construct_inverse, construct_qr, multi_scenario, rank_one, ProjectorSet};
use crate::saddle::{run_saddle, SaddleConfig};
use crate::sdp::SolverConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_WEAK_DUALITY: i32 = 3;

/// Environment variable naming a default solver configuration file.
pub const SOLVER_CFG_ENV: &str = "PHYSBOUND_SOLVER_CFG";

#[derive(Debug, Parser)]
#[command(
    name = "physbound",
    version,
    about = "Certified lower bounds for affine-parameterized physical design problems"
)]
pub struct Cli {
    /// Write the output document here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a problem file and list validation failures.
    Validate { file: PathBuf },
    /// Build the projector set and report its condition residuals.
    Project {
        file: PathBuf,
        #[command(flatten)]
        projectors: ProjectorArgs,
    },
    /// Solve the dual SDP for a certified lower bound.
    Bound {
        file: PathBuf,
        /// Relaxation; defaults to the file's domain.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        projectors: ProjectorArgs,
    },
    /// Brute-force primal optimum: sign enumeration (boolean) or a grid (interval).
    Oracle {
        file: PathBuf,
        /// Grid points per axis for interval problems.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Gradient descent-ascent on the Lagrangian.
    Heuristic {
        file: PathBuf,
        #[arg(long, default_value_t = SaddleConfig::default().iterations)]
        iters: usize,
        /// Seed for the random initial field (used when --init-scale > 0).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Half-width of the random initial field; 0 starts at z = 0.
        #[arg(long, default_value_t = 0.0)]
        init_scale: f64,
        #[arg(long, default_value_t = SaddleConfig::default().step_primal)]
        step_primal: f64,
        #[arg(long, default_value_t = SaddleConfig::default().step_dual)]
        step_dual: f64,
        #[command(flatten)]
        projectors: ProjectorArgs,
    },
    /// Bound, oracle and weak-duality check. A directory certifies every
    /// `*.json` file in it and prints an array of reports.
    Certify {
        path: PathBuf,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        projectors: ProjectorArgs,
    },
    /// Write a seeded test instance.
    Gen {
        #[arg(value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Interval)]
        domain: ModeArg,
        /// Write every number as an exact hex float.
        #[arg(long)]
        hexfloat: bool,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolverArgs {
    /// JSON solver configuration; missing fields take defaults.
    #[arg(long, env = SOLVER_CFG_ENV)]
    pub solver_cfg: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ProjectorArgs {
    /// Projector construction.
    #[arg(long, value_enum, default_value_t = ProjectorChoice::Auto)]
    pub projectors: ProjectorChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Interval,
    Boolean,
}

impl From<ModeArg> for Domain {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Interval => Domain::Interval,
            ModeArg::Boolean => Domain::Boolean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    MultiScenarioDiag,
    RankOneLoads,
    Helmholtz1d,
}

impl From<KindArg> for InstanceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::MultiScenarioDiag => InstanceKind::MultiScenarioDiag,
            KindArg::RankOneLoads => InstanceKind::RankOneLoads,
            KindArg::Helmholtz1d => InstanceKind::Helmholtz1d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectorChoice {
    /// Closed form when the terms allow it, otherwise inverse completion.
    Auto,
    Inverse,
    Qr,
    MultiScenario,
    RankOne,
}

pub fn build_projectors(problem: &PhysicsProblem, choice: ProjectorChoice) -> Result<ProjectorSet> {
    let terms = &problem.terms;
    match choice {
        ProjectorChoice::Auto => {
            if let Ok(ps) = multi_scenario(terms) {
                if ps.is_verified() {
                    return Ok(ps);
                }
            }
            let stacked = stack_terms(terms)?;
            if terms.iter().all(|t| t.width() == 1) {
                if let Ok(ps) = rank_one(&stacked, terms) {
                    if ps.is_verified() {
                        return Ok(ps);
                    }
                }
            }
            construct_inverse(&stacked, terms)
        }
        ProjectorChoice::Inverse => construct_inverse(&stack_terms(terms)?, terms),
        ProjectorChoice::Qr => construct_qr(&stack_terms(terms)?, terms),
        ProjectorChoice::MultiScenario => multi_scenario(terms),
        ProjectorChoice::RankOne => rank_one(&stack_terms(terms)?, terms),
    }
}

fn load_solver_cfg(path: Option<&Path>) -> Result<SolverConfig> {
    let Some(path) = path else { return Ok(SolverConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Report under construction for one input file.
struct Job {
    report: ReportFile,
}

impl Job {
    fn new(command: &str, path: &Path) -> Self {
        let mut report = ReportFile::new(command);
        report.input = Some(path.display().to_string());
        Self { report }
    }

    fn fail(mut self, code: i32, err: impl ToString) -> ReportFile {
        self.report.exit_code = code;
        self.report.error = Some(err.to_string());
        self.report
    }

    fn time(&mut self, stage: &str, t: Instant) {
        self.report.timings.insert(stage.into(), ms(t));
    }

    /// Reads, parses and validates; on failure the finished report is returned.
    fn load(&mut self, path: &Path) -> std::result::Result<ParsedProblem, ()> {
        let t = Instant::now();
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                self.report.exit_code = EXIT_INVALID;
                self.report.error = Some(format!("{}: {e}", path.display()));
                return Err(());
            }
        };
        self.report.input_digest = digest(&bytes);
        let parsed =
            std::str::from_utf8(&bytes).map_err(|e| Error::Parse(format!("not UTF-8: {e}"))).and_then(parse_problem);
        self.time("parse", t);
        let parsed = match parsed {
            Ok(p) => p,
            Err(e) => {
                self.report.exit_code = EXIT_INVALID;
                self.report.error = Some(e.to_string());
                return Err(());
            }
        };
        self.report.factorization_residuals = parsed.factorization_residuals.clone();
        self.report.violations = parsed.problem.validate().iter().map(ToString::to_string).collect();
        if !self.report.violations.is_empty() {
            self.report.exit_code = EXIT_INVALID;
            self.report.error = Some("problem failed validation".into());
            return Err(());
        }
        Ok(parsed)
    }

    fn projectors(
        &mut self,
        problem: &PhysicsProblem,
        choice: ProjectorChoice,
    ) -> std::result::Result<ProjectorSet, ()> {
        let t = Instant::now();
        let ps = build_projectors(problem, choice);
        self.time("projectors", t);
        match ps {
            Ok(ps) => {
                self.report.projector_method = Some(ps.method);
                self.report.residuals = Some(ps.residuals);
                self.report.projectors_verified = Some(ps.is_verified());
                if ps.is_verified() {
                    Ok(ps)
                } else {
                    self.report.exit_code = EXIT_INVALID;
                    self.report.error = Some("projector set failed verification".into());
                    Err(())
                }
            }
            Err(e) => {
                self.report.exit_code = EXIT_INVALID;
                self.report.error = Some(e.to_string());
                Err(())
            }
        }
    }

    fn record_bound(&mut self, b: &BoundReport, mode: DualMode) {
        let r = &mut self.report;
        r.mode = Some(mode);
        r.d_star = Some(b.d_star);
        r.solver_status = Some(b.solver_status);
        r.solver = Some(SolverDiagnostics {
            iterations: b.iterations,
            primal_infeasibility: b.primal_infeasibility,
            dual_infeasibility: b.dual_infeasibility,
            relative_gap: b.relative_gap,
            schur_slack: b.schur_slack,
            certified: b.certified,
        });
        if matches!(b.solver_status, BoundStatus::MaxIter | BoundStatus::NumericalTrouble) {
            r.exit_code = EXIT_SOLVER;
            r.error =
                Some(format!("solver stopped with status {:?}; d_star is the best certified value", b.solver_status));
        }
    }

    fn record_oracle(&mut self, o: &OracleResult, grid: Option<usize>) {
        self.report.p_star = Some(o.p_star);
        self.report.oracle = Some(OracleSummary {
            method: if grid.is_some() { "grid" } else { "boolean-enumeration" }.into(),
            grid_points: grid,
            argmin_theta: o.argmin_theta.clone(),
            evaluated_count: o.evaluated_count,
        });
    }
}

fn run_oracle(
    problem: &PhysicsProblem,
    obj: &crate::dual::QuadraticObjective,
    grid: usize,
) -> (Result<OracleResult>, Option<usize>) {
    match problem.domain {
        Domain::Boolean => (brute_force_boolean(problem, obj), None),
        Domain::Interval => (grid_search_interval(problem, obj, grid), Some(grid)),
    }
}

fn validate(path: &Path) -> ReportFile {
    let mut job = Job::new("validate", path);
    let _ = job.load(path);
    job.report
}

fn project(path: &Path, choice: ProjectorChoice) -> ReportFile {
    let mut job = Job::new("project", path);
    let Ok(p) = job.load(path) else { return job.report };
    let _ = job.projectors(&p.problem, choice);
    job.report
}

fn bound(path: &Path, mode: Option<ModeArg>, cfg: &SolverConfig, choice: ProjectorChoice) -> ReportFile {
    let mut job = Job::new("bound", path);
    let Ok(p) = job.load(path) else { return job.report };
    let Ok(ps) = job.projectors(&p.problem, choice) else { return job.report };
    let mode = DualMode::from(mode.map_or(p.problem.domain, Domain::from));
    let t = Instant::now();
    let b = solve_bound(&p.problem, &ps, &p.objective, mode, cfg);
    job.time("bound", t);
    match b {
        Ok(b) => job.record_bound(&b, mode),
        Err(e) => return job.fail(EXIT_SOLVER, e),
    }
    job.report
}

fn oracle(path: &Path, grid: usize) -> ReportFile {
    let mut job = Job::new("oracle", path);
    let Ok(p) = job.load(path) else { return job.report };
    let t = Instant::now();
    let (o, g) = run_oracle(&p.problem, &p.objective, grid);
    job.time("oracle", t);
    match o {
        Ok(o) => job.record_oracle(&o, g),
        Err(e) => return job.fail(EXIT_INVALID, e),
    }
    job.report
}

fn heuristic(path: &Path, cfg: &SaddleConfig, choice: ProjectorChoice) -> ReportFile {
    let mut job = Job::new("heuristic", path);
    let Ok(p) = job.load(path) else { return job.report };
    let Ok(ps) = job.projectors(&p.problem, choice) else { return job.report };
    let t = Instant::now();
    let r = run_saddle(&p.problem, &ps, &p.objective, cfg);
    job.time("heuristic", t);
    let r = match r {
        Ok(r) => r,
        Err(e) => return job.fail(EXIT_INVALID, e),
    };
    let dual_bound = crate::dual::eval_dual(&r.dual_point, &p.problem, &ps, &p.objective).unwrap_or(f64::NEG_INFINITY);
    job.report.mode = Some(DualMode::from(p.problem.domain));
    job.report.heuristic = Some(HeuristicSummary {
        iterations: r.l_trace.len() - 1,
        seed: cfg.seed,
        best_objective: r.best_objective,
        best_violation: r.best_violation,
        dual_bound,
        final_lagrangian: *r.l_trace.last().expect("trace holds the initial point"),
        diverged: r.diverged,
    });
    if r.diverged {
        return job.fail(EXIT_SOLVER, "heuristic diverged");
    }
    job.report
}

fn certify_file(path: &Path, grid: usize, cfg: &SolverConfig, choice: ProjectorChoice) -> ReportFile {
    let mut job = Job::new("certify", path);
    let Ok(p) = job.load(path) else { return job.report };
    let Ok(ps) = job.projectors(&p.problem, choice) else { return job.report };
    let mode = DualMode::from(p.problem.domain);

    let t = Instant::now();
    let b = solve_bound(&p.problem, &ps, &p.objective, mode, cfg);
    job.time("bound", t);
    let b = match b {
        Ok(b) => b,
        Err(e) => return job.fail(EXIT_SOLVER, e),
    };
    job.record_bound(&b, mode);

    let t = Instant::now();
    let (o, g) = run_oracle(&p.problem, &p.objective, grid);
    job.time("oracle", t);
    let o = match o {
        Ok(o) => o,
        Err(e) => return job.fail(EXIT_INVALID, e),
    };
    job.record_oracle(&o, g);
    job.report.gap = Some(o.p_star - b.d_star);
    let check = check_weak_duality(b.d_star, o.p_star);
    job.report.weak_duality = Some(check);
    if !check.pass {
        return job.fail(EXIT_WEAK_DUALITY, format!("weak duality violated: margin {:e}", check.margin));
    }
    job.report
}

/// `*.json` files directly inside `dir`, sorted by name.
fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn single(report: ReportFile) -> (String, i32) {
    let code = report.exit_code;
    (report.to_json(), code)
}

fn usage_error(command: &str, e: impl ToString) -> (String, i32) {
    let mut r = ReportFile::new(command);
    r.exit_code = EXIT_INVALID;
    r.error = Some(e.to_string());
    single(r)
}

/// Executes `cli` and returns the output document and the exit code.
pub fn run(cli: &Cli) -> (String, i32) {
    match &cli.command {
        Command::Validate { file } => single(validate(file)),
        Command::Project { file, projectors } => single(project(file, projectors.projectors)),
        Command::Bound { file, mode, solver, projectors } => match load_solver_cfg(solver.solver_cfg.as_deref()) {
            Ok(cfg) => single(bound(file, *mode, &cfg, projectors.projectors)),
            Err(e) => usage_error("bound", e),
        },
        Command::Oracle { file, grid } => single(oracle(file, *grid)),
        Command::Heuristic { file, iters, seed, init_scale, step_primal, step_dual, projectors } => {
            let cfg = SaddleConfig {
                iterations: *iters,
                seed: *seed,
                init_scale: *init_scale,
                step_primal: *step_primal,
                step_dual: *step_dual,
                ..SaddleConfig::default()
            };
            if let Err(e) = cfg.validate() {
                return usage_error("heuristic", e);
            }
            single(heuristic(file, &cfg, projectors.projectors))
        }
        Command::Certify { path, grid, solver, projectors } => {
            let cfg = match load_solver_cfg(solver.solver_cfg.as_deref()) {
                Ok(c) => c,
                Err(e) => return usage_error("certify", e),
            };
            if !path.is_dir() {
                return single(certify_file(path, *grid, &cfg, projectors.projectors));
            }
            let files = match json_files(path) {
                Ok(f) => f,
                Err(e) => return usage_error("certify", e),
            };
            let reports: Vec<ReportFile> =
                files.par_iter().map(|f| certify_file(f, *grid, &cfg, projectors.projectors)).collect();
            let code = reports.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK);
            (serde_json::to_string_pretty(&reports).expect("reports always serialize"), code)
        }
        Command::Gen { kind, m, d, seed, domain, hexfloat } => {
            match generate_instance((*kind).into(), *m, *d, *seed, (*domain).into(), *hexfloat) {
                Ok(f) => (f.to_json(), EXIT_OK),
                Err(e) => usage_error("gen", e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_bound_flags() {
        let cli = Cli::try_parse_from(["physbound", "bound", "p.json", "--mode", "boolean", "-o", "r.json"]).unwrap();
        assert_eq!(cli.output.as_deref(), Some(Path::new("r.json")));
        match cli.command {
            Command::Bound { mode, projectors, .. } => {
                assert_eq!(mode, Some(ModeArg::Boolean));
                assert_eq!(projectors.projectors, ProjectorChoice::Auto);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn auto_projectors_prefer_closed_forms() {
        let inst = crate::generate::generate(InstanceKind::MultiScenarioDiag, 6, 2, 3, Domain::Interval).unwrap();
        let ps = build_projectors(&inst.problem, ProjectorChoice::Auto).unwrap();
        assert_eq!(ps.method, crate::projectors::ProjectorMethod::MultiScenario);
        let inst = crate::generate::generate(InstanceKind::RankOneLoads, 5, 3, 3, Domain::Interval).unwrap();
        let ps = build_projectors(&inst.problem, ProjectorChoice::Auto).unwrap();
        assert_eq!(ps.method, crate::projectors::ProjectorMethod::RankOne);
    }

    #[test]
    fn missing_file_is_a_validation_failure() {
        let (out, code) = single(validate(Path::new("/nonexistent/problem.json")));
        assert_eq!(code, EXIT_INVALID);
        assert!(out.contains("nonexistent"));
    }
}
