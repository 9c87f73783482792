//! Command-line front end: build cluster states, verify their entanglement,
//! export graphs and nullifier tables, and run error-propagation scenarios.
//!
//! Exit codes: 0 success/verified, 1 verification failed, 2 input error,
//! 3 internal consistency failure (symbolic/numeric disagreement).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cvcluster::algebra::{r_from_squeeze_db, Stream};
use cvcluster::builders::{BuiltState, LatticeSpec};
use cvcluster::errorprop::{fig5_scenario, Scenario};
use cvcluster::export::{
    built_state_json, error_state_json, graph_dot, nullifier_csv, state_from_json,
    verify_report_json, OracleCheck,
};
use cvcluster::nullifier::{
    derive_nullifiers, full_lattice_verify, post_erasure_graph, reduce_to_canonical, variance,
    ClusterGraph, Nullifier,
};
use cvcluster::oracle::CovarianceState;
use cvcluster::{build_epr1d, build_hexagonal, build_topological, trim_boundary};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;
const EXIT_INCONSISTENT: u8 = 3;

const ORACLE_REL_TOL: f64 = 1e-12;
const SYMPLECTIC_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "cvcluster",
    version,
    about = "Continuous-variable cluster state toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a state and write its JSON document
    Build(BuildArgs),
    /// Run the pairwise inseparability checks plus the numeric cross-check
    Verify(VerifyArgs),
    /// Export the cluster graph (dot), nullifier vectors (csv) or the state
    /// document (json)
    Export(ExportArgs),
    /// Run a displacement-error propagation scenario
    Errorprop(ErrorpropArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum StateArg {
    Epr1d,
    Hexagonal,
    Topological,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Dot,
    Csv,
}

#[derive(Args)]
struct StateSelect {
    /// State kind to build
    #[arg(long, value_enum)]
    state: Option<StateArg>,
    /// Basal-plane width N (topological)
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Basal-plane height M (topological)
    #[arg(long, default_value_t = 2)]
    m: u32,
    /// Temporal layers T (topological) or temporal slots K (epr1d)
    #[arg(long, default_value_t = 2)]
    layers: u32,
    /// Squeezing level in dB: 10·log10 e^{−2r}, more negative is more
    /// squeezing; a positive value is read as a magnitude
    #[arg(long, conflicts_with = "squeeze_r", allow_negative_numbers = true)]
    squeeze_db: Option<f64>,
    /// Squeezing parameter r
    #[arg(long)]
    squeeze_r: Option<f64>,
    /// Read state parameters from a previously written build document
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Output path for the state document
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Optional output path for the verification report
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Dot)]
    format: FormatArg,
    /// Output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ErrorpropArgs {
    /// Scenario file, or "fig5" for the bundled cancellation scenario
    #[arg(long)]
    scenario: String,
    /// Output path for the result document
    #[arg(long)]
    out: Option<PathBuf>,
}

struct InputError(String);

macro_rules! impl_from_error {
    ($($ty:ty),* $(,)?) => {
        $(impl From<$ty> for InputError {
            fn from(e: $ty) -> Self {
                InputError(e.to_string())
            }
        })*
    };
}

impl_from_error!(
    std::io::Error,
    serde_json::Error,
    cvcluster::builders::BuildError,
    cvcluster::nullifier::NullifierError,
    cvcluster::oracle::OracleError,
    cvcluster::errorprop::ErrorPropError,
    cvcluster::export::ExportError,
);

fn squeeze_r_of(select: &StateSelect) -> Result<f64, InputError> {
    match (select.squeeze_db, select.squeeze_r) {
        (Some(db), None) => {
            // more negative = more squeezing; accept a magnitude too
            let level = if db > 0.0 { -db } else { db };
            Ok(r_from_squeeze_db(level))
        }
        (None, Some(r)) => {
            if r < 0.0 {
                return Err(InputError("squeeze-r must be nonnegative".into()));
            }
            Ok(r)
        }
        (None, None) => Err(InputError(
            "exactly one of --squeeze-db or --squeeze-r is required".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap rejects conflicting flags"),
    }
}

fn build_state(select: &StateSelect) -> Result<BuiltState, InputError> {
    if let Some(path) = &select.input {
        let text = fs::read_to_string(path)?;
        let doc: serde_json::Value = serde_json::from_str(&text)?;
        return Ok(state_from_json(&doc)?);
    }
    let r = squeeze_r_of(select)?;
    match select.state {
        Some(StateArg::Epr1d) => Ok(build_epr1d(select.layers, r, r)?),
        Some(StateArg::Hexagonal) => Ok(build_hexagonal(0, r, Stream::A)),
        Some(StateArg::Topological) => {
            let spec = LatticeSpec::new(select.n, select.m, select.layers, r)?;
            let state = build_topological(&spec)?;
            Ok(trim_boundary(state, &spec)?)
        }
        None => Err(InputError("--state is required without --input".into())),
    }
}

fn live_graph(state: &BuiltState) -> Result<(Vec<Nullifier>, ClusterGraph), InputError> {
    let canon = reduce_to_canonical(&derive_nullifiers(state))?;
    Ok(post_erasure_graph(state, &canon)?)
}

fn oracle_cross_check(state: &BuiltState) -> Result<OracleCheck, InputError> {
    let canon = reduce_to_canonical(&derive_nullifiers(state))?;
    let mut cov = CovarianceState::init_covariance(&state.profile);
    cov.replay(&state.program.gates, false)?;
    let mut max_rel: f64 = 0.0;
    for n in &canon {
        let symbolic = variance(n, &state.profile)?;
        let numeric = cov.quadratic_form_variance(&n.expr)?;
        let rel = (symbolic - numeric).abs() / symbolic.abs().max(1e-30);
        max_rel = max_rel.max(rel);
    }
    let floor = cov.symplectic_floor();
    Ok(OracleCheck {
        max_rel_deviation: max_rel,
        symplectic_floor: floor,
        agreed: max_rel < ORACLE_REL_TOL && floor >= 0.5 - SYMPLECTIC_TOL,
    })
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<(), InputError> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_build(args: &BuildArgs) -> Result<u8, InputError> {
    let state = build_state(&args.select)?;
    let doc = built_state_json(&state)?;
    fs::write(&args.out, serde_json::to_string_pretty(&doc)? + "\n")?;
    let (_, graph) = live_graph(&state)?;
    println!(
        "modes: {} live, {} erased, {} trimmed; edges: {}",
        state.live_modes().len(),
        state.erased.len(),
        state.trimmed.len(),
        graph.edge_count(),
    );
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, InputError> {
    let state = build_state(&args.select)?;
    let report = full_lattice_verify(&state)?;
    let oracle = oracle_cross_check(&state)?;
    let doc = verify_report_json(&report, Some(&oracle));
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    println!(
        "pairwise checks: {} edges, {}",
        report.edges.len(),
        if report.all_satisfied {
            "all satisfied"
        } else {
            "NOT satisfied"
        },
    );
    println!(
        "threshold: {:.4} dB (e^-2r = {:.9}, r = {:.9})",
        report.threshold_db, report.threshold_e2r, report.threshold_r,
    );
    println!(
        "oracle: {} (max rel deviation {:.3e}, symplectic floor {:.12})",
        if oracle.agreed { "agreed" } else { "DISAGREED" },
        oracle.max_rel_deviation,
        oracle.symplectic_floor,
    );
    if !oracle.agreed {
        return Ok(EXIT_INCONSISTENT);
    }
    if !report.all_satisfied {
        return Ok(EXIT_VERIFY_FAILED);
    }
    Ok(0)
}

fn cmd_export(args: &ExportArgs) -> Result<u8, InputError> {
    let state = build_state(&args.select)?;
    match args.format {
        FormatArg::Json => {
            let doc = built_state_json(&state)?;
            fs::write(&args.out, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
        FormatArg::Dot => {
            let (_, graph) = live_graph(&state)?;
            fs::write(&args.out, graph_dot(&graph))?;
        }
        FormatArg::Csv => {
            let (nulls, _) = live_graph(&state)?;
            fs::write(&args.out, nullifier_csv(&nulls))?;
        }
    }
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn cmd_errorprop(args: &ErrorpropArgs) -> Result<u8, InputError> {
    let scenario: Scenario = if args.scenario == "fig5" {
        fig5_scenario()
    } else {
        let text = fs::read_to_string(&args.scenario)?;
        serde_json::from_str(&text)?
    };
    let state = match &scenario.graph_ref {
        Some(spec) => {
            let built = state_from_json(&serde_json::json!({ "spec": spec }))?;
            let (_, graph) = live_graph(&built)?;
            scenario.run_on(&cvcluster::errorprop::ErrorGraph::from_cluster_graph(
                &graph,
            ))?
        }
        None => scenario.run()?,
    };
    let zeros = scenario.zeros_hold(&state);
    let doc = error_state_json(&state, zeros);
    write_or_print(
        args.out.as_ref(),
        &(serde_json::to_string_pretty(&doc)? + "\n"),
    )?;
    if zeros {
        Ok(0)
    } else {
        Ok(EXIT_VERIFY_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Export(args) => cmd_export(args),
        Command::Errorprop(args) => cmd_errorprop(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}
