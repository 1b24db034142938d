//! Single-binary CLI over the boundary/filling library. Every command is
//! deterministic given its flags (stochastic ones require --seed), writes
//! JSON or CSV artifacts, and maps failures to exit codes: 2 for
//! validation problems, 3 for exhausted budgets, with a machine-readable
//! JSON error object on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mzfill::boundary::boundary_convergence_experiment;
use mzfill::filling::filling_convergence_experiment;
use mzfill::gallery::GallerySpec;
use mzfill::moebius::{
    antipodalize, discrepancy, flow_trajectory, hyperbolicity_delta, moebius_metric, sample_ball,
    BallSampleJson, Chart, MEMBERSHIP_TOL,
};
use mzfill::report::{render_csv, Cell};
use mzfill::rough::{ai_distance, gh_distance, SearchMode, DEFAULT_RESTARTS};
use mzfill::semimetric::{AntipodalSpace, FiniteSemiMetric};
use mzfill::suite::run_invariant_suite;
use mzfill::{Error, Result};

#[derive(Parser)]
#[command(name = "mzfill", version, about = "Finite antipodal spaces and their fillings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Heuristic,
}

impl From<Mode> for SearchMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Exact => SearchMode::Exact,
            Mode::Heuristic => SearchMode::Heuristic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GalleryKind {
    Circle,
    Tree,
    Random,
    Perturb,
}

#[derive(Args)]
struct TauArg {
    /// Comma-separated chart vector, one entry per boundary point.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    tau: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a space file and echo its invariant report.
    Validate { space: PathBuf },
    /// Cross-ratio of four distinct points (0-based indices a,b,c,d).
    CrossRatio {
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        quad: Vec<usize>,
    },
    /// Discrepancy vector of a chart vector.
    Discrepancy {
        space: PathBuf,
        #[command(flatten)]
        tau: TauArg,
    },
    /// Project a chart vector to the filling along the antipodal flow.
    Antipodalize {
        space: PathBuf,
        #[command(flatten)]
        tau: TauArg,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Integrate the flow and write (t, residual, distance_to_final) rows.
    FlowTrace {
        space: PathBuf,
        #[command(flatten)]
        tau: TauArg,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the ball of the given radius around the base point.
    BallSample {
        space: PathBuf,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sup-metric distance between two chart vectors.
    Distance {
        space: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        tau_a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        tau_b: Vec<f64>,
    },
    /// Almost-isometry distance between two spaces, with witness maps.
    AiDist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Gromov-Hausdorff distance between metric samples or spaces.
    GhBall {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Forward convergence experiment over a ladder of boundary nets.
    FillConverge {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        nets: Vec<usize>,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backward convergence experiment over a perturbation ladder.
    BoundaryConverge {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a model antipodal space.
    Gallery {
        #[arg(long, value_enum)]
        kind: GalleryKind,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        branching: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded cross-module invariant battery.
    InvariantSuite {
        #[arg(long)]
        seed: u64,
    },
}

fn read_space(path: &PathBuf) -> Result<FiniteSemiMetric> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Json(format!("{}: {e}", path.display())))?;
    FiniteSemiMetric::from_json_str(&text)
}

fn read_antipodal(path: &PathBuf) -> Result<AntipodalSpace> {
    AntipodalSpace::validate_with_tol(read_space(path)?, 1e-9)
}

fn read_chart(path: &PathBuf) -> Result<Chart> {
    Ok(Chart::new(read_antipodal(path)?))
}

/// Reads a distance matrix for the GH command: a ball-sample JSON (its
/// gram matrix) or a space JSON (its separation matrix).
fn read_metric_matrix(path: &PathBuf) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Json(format!("{}: {e}", path.display())))?;
    if let Ok(ball) = serde_json::from_str::<BallSampleJson>(&text) {
        return Ok(ball.gram);
    }
    Ok(FiniteSemiMetric::from_json_str(&text)?.matrix())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Error::Json(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn invocation() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn require_seed(seed: Option<u64>, mode: Mode) -> Result<u64> {
    match (seed, mode) {
        (Some(s), _) => Ok(s),
        (None, Mode::Exact) => Ok(0),
        (None, Mode::Heuristic) => Err(Error::Json("--seed is required in heuristic mode".into())),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { space } => {
            let s = read_space(&space)?;
            let antipodal = AntipodalSpace::validate(s.clone());
            let report = json!({
                "n": s.len(),
                "labels": s.labels(),
                "diameter": s.diameter(),
                "min_separation": s.min_separation(),
                "quasimetric_constant": s.quasimetric_constant(),
                "is_metric": s.is_metric(1e-9),
                "antipodal": antipodal.is_ok(),
                "antipodal_error": antipodal.err().map(|e| e.to_string()),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        Command::CrossRatio { space, quad } => {
            let s = read_space(&space)?;
            if quad.len() != 4 {
                return Err(Error::Json(format!("--quad needs 4 indices, got {}", quad.len())));
            }
            let value = s.cross_ratio(quad[0], quad[1], quad[2], quad[3])?;
            println!("{}", json!({ "quad": quad, "cross_ratio": value }));
        }
        Command::Discrepancy { space, tau } => {
            let chart = read_chart(&space)?;
            let d = discrepancy(&chart.tau(tau.tau)?);
            println!(
                "{}",
                json!({ "values": d.values, "argmax": d.argmax, "sup_norm": d.sup_norm() })
            );
        }
        Command::Antipodalize { space, tau, tol } => {
            let chart = read_chart(&space)?;
            let start = chart.tau(tau.tau)?;
            let p = antipodalize(&start, tol)?;
            let moved = start
                .values()
                .iter()
                .zip(p.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            println!(
                "{}",
                json!({
                    "tau_infinity": p.values(),
                    "residual": p.membership_residual(),
                    "distance_moved": moved,
                })
            );
        }
        Command::FlowTrace { space, tau, step, horizon, out } => {
            let chart = read_chart(&space)?;
            let start = chart.tau(tau.tau)?;
            let trajectory = flow_trajectory(&start, step, horizon)?;
            let limit = antipodalize(&start, 1e-12)?;
            let rows: Vec<Vec<Cell>> = trajectory
                .times
                .iter()
                .zip(&trajectory.taus)
                .zip(&trajectory.discrepancy_norms)
                .map(|((t, state), residual)| {
                    let dist = state
                        .iter()
                        .zip(limit.values())
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    vec![Cell::from(*t), Cell::from(*residual), Cell::from(dist)]
                })
                .collect();
            let csv =
                render_csv(&["t", "residual", "distance_to_final"], &rows, Some(&invocation()))?;
            emit(&out, &csv)?;
        }
        Command::BallSample { space, radius, count, seed, out } => {
            let chart = read_chart(&space)?;
            let sample = sample_ball(&chart, radius, count, seed)?;
            let text = serde_json::to_string_pretty(&sample.to_json()).unwrap();
            emit(&out, &text)?;
            // Side record: the four-point delta of the sample next to the
            // quasi-metric constant of the boundary it was drawn from.
            if out.is_some() {
                println!(
                    "{}",
                    json!({
                        "count": sample.len(),
                        "hyperbolicity_delta": hyperbolicity_delta(&sample.gram),
                        "quasimetric_constant": chart.space().quasimetric_constant(),
                    })
                );
            }
        }
        Command::Distance { space, tau_a, tau_b } => {
            let chart = read_chart(&space)?;
            let a = antipodalize(&chart.tau(tau_a)?, MEMBERSHIP_TOL)?;
            let b = antipodalize(&chart.tau(tau_b)?, MEMBERSHIP_TOL)?;
            println!(
                "{}",
                json!({
                    "distance": moebius_metric(&a, &b)?,
                    "residual_a": a.membership_residual(),
                    "residual_b": b.membership_residual(),
                })
            );
        }
        Command::AiDist { a, b, mode, restarts, seed } => {
            let seed = require_seed(seed, mode)?;
            let sa = read_space(&a)?;
            let sb = read_space(&b)?;
            let witness = ai_distance(&sa, &sb, mode.into(), restarts, seed)?;
            println!(
                "{}",
                json!({
                    "epsilon": witness.epsilon,
                    "forward": witness.forward,
                    "backward": witness.backward,
                    "forward_distortion": witness.forward_report.distortion,
                    "forward_covering_radius": witness.forward_report.covering_radius,
                    "backward_distortion": witness.backward_report.distortion,
                    "backward_covering_radius": witness.backward_report.covering_radius,
                })
            );
        }
        Command::GhBall { a, b, mode, restarts, seed } => {
            let seed = require_seed(seed, mode)?;
            let ma = read_metric_matrix(&a)?;
            let mb = read_metric_matrix(&b)?;
            let d = gh_distance(&ma, &mb, mode.into(), restarts, seed)?;
            println!("{}", json!({ "gh_distance": d }));
        }
        Command::FillConverge { space, nets, radius, samples, seed, out } => {
            let chart = read_chart(&space)?;
            let report = filling_convergence_experiment(&chart, &nets, radius, samples, seed)?;
            let rows: Vec<Vec<Cell>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        Cell::from(r.net_size),
                        Cell::from(r.eps_n),
                        Cell::from(r.distortion),
                        Cell::from(r.net_defect),
                        Cell::from(r.sup_discrepancy),
                        Cell::from(r.wallclock_ms),
                    ]
                })
                .collect();
            let csv = render_csv(
                &["n", "eps_n", "distortion", "net_defect", "sup_discrepancy", "wallclock_ms"],
                &rows,
                Some(&invocation()),
            )?;
            emit(&out, &csv)?;
        }
        Command::BoundaryConverge { space, etas, radius, seed, out } => {
            let chart = read_chart(&space)?;
            let report = boundary_convergence_experiment(&chart, &etas, radius, seed)?;
            let rows: Vec<Vec<Cell>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        Cell::from(r.eta),
                        Cell::from(r.component_count),
                        Cell::from(r.epsilon_g),
                        Cell::from(r.max_cross_gromov),
                        Cell::from(r.min_same_shadow_gromov),
                    ]
                })
                .collect();
            let csv = render_csv(
                &[
                    "eta",
                    "component_count",
                    "epsilon_g",
                    "max_cross_gromov",
                    "min_same_shadow_gromov",
                ],
                &rows,
                Some(&invocation()),
            )?;
            emit(&out, &csv)?;
        }
        Command::Gallery { kind, n, branching, depth, eta, seed, input, out } => {
            let missing = |flag: &str| Error::Json(format!("--{flag} is required for this kind"));
            let spec = match kind {
                GalleryKind::Circle => GallerySpec::Circle { n: n.ok_or_else(|| missing("n"))? },
                GalleryKind::Tree => GallerySpec::Tree {
                    branching: branching.ok_or_else(|| missing("branching"))?,
                    depth: depth.ok_or_else(|| missing("depth"))?,
                },
                GalleryKind::Random => GallerySpec::Random {
                    n: n.ok_or_else(|| missing("n"))?,
                    seed: seed.ok_or_else(|| missing("seed"))?,
                },
                GalleryKind::Perturb => GallerySpec::Perturb {
                    eta: eta.ok_or_else(|| missing("eta"))?,
                    seed: seed.ok_or_else(|| missing("seed"))?,
                },
            };
            let base = match &input {
                Some(path) => Some(read_antipodal(path)?),
                None => None,
            };
            let space = spec.build(base.as_ref())?;
            emit(&out, &space.to_json_string())?;
        }
        Command::InvariantSuite { seed } => {
            let outcomes = run_invariant_suite(seed)?;
            let mut all_passed = true;
            for outcome in &outcomes {
                let verdict = if outcome.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {} ({})", outcome.name, outcome.detail);
                all_passed &= outcome.passed;
            }
            return Ok(all_passed);
        }
    }
    Ok(true)
}

fn error_name(err: &Error) -> &'static str {
    match err {
        Error::AsymmetricMatrix { .. } => "AsymmetricMatrix",
        Error::NonzeroDiagonal { .. } => "NonzeroDiagonal",
        Error::NonpositiveOffDiagonal { .. } => "NonpositiveOffDiagonal",
        Error::TooFewPoints { .. } => "TooFewPoints",
        Error::NotSquare { .. } => "NotSquare",
        Error::LabelCountMismatch { .. } => "LabelCountMismatch",
        Error::DiameterNotOne { .. } => "DiameterNotOne",
        Error::MissingAntipode { .. } => "MissingAntipode",
        Error::NonDistinctPoints(..) => "NonDistinctPoints",
        Error::DimensionMismatch { .. } => "DimensionMismatch",
        Error::NotMoebiusEquivalent { .. } => "NotMoebiusEquivalent",
        Error::BaseMismatch => "BaseMismatch",
        Error::NonfiniteState { .. } => "NonfiniteState",
        Error::BudgetExceeded { .. } => "BudgetExceeded",
        Error::RayConstructionFailed { .. } => "RayConstructionFailed",
        Error::NotAntipodalWithinTol { .. } => "NotAntipodalWithinTol",
        Error::PairwiseConditionViolated { .. } => "PairwiseConditionViolated",
        Error::ExactBudgetExceeded { .. } => "ExactBudgetExceeded",
        Error::NotAMetric { .. } => "NotAMetric",
        Error::NotACover { .. } => "NotACover",
        Error::RayPointUnmapped { .. } => "RayPointUnmapped",
        Error::ComponentCountMismatch { .. } => "ComponentCountMismatch",
        Error::AmbiguousShadow { .. } => "AmbiguousShadow",
        Error::EtaTooLarge { .. } => "EtaTooLarge",
        Error::SchemaMismatch { .. } => "SchemaMismatch",
        Error::Json(_) => "InvalidInput",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            let code = match err {
                Error::BudgetExceeded { .. } | Error::ExactBudgetExceeded { .. } => 3,
                _ => 2,
            };
            eprintln!("{}", json!({ "error": error_name(&err), "message": err.to_string() }));
            ExitCode::from(code)
        }
    }
}
