mod canonical;
mod commands;
mod error;
mod expr;
mod input;
mod registry;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use commands::{ModeSel, Options, Outcome};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "mdlsys",
    version,
    about = "Analysis of noncommutative and commutative multidimensional linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Truncation depth N (Gleason degree, dilation depth, observability sweep)
    #[arg(long, global = true, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    truncation: u64,
    /// Base tolerance; scaled by the relevant norm where a verdict needs it
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = ModeSel::Both)]
    mode: ModeSel,
    /// Seed for any sampled points
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parameter override, `name=expression` (repeatable)
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, String)>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stability, gramians, reverse Stein, observability, Q-Stein and C-abelian checks
    Analyze {
        system: String,
        /// Word length for the C-abelian check
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Run the word recursion and the lattice recursion, and compare them
    Simulate {
        system: String,
        input: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Positivity of the kernel Gram matrices
    Kernel {
        system: String,
        /// Point file; without it, points are sampled from the ball with --seed
        #[arg(long)]
        points: Option<String>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Word length for the noncommutative coefficient Gram matrix
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Weight the commutative kernel by the inverse abelianized gramian
        #[arg(long)]
        inverse_gramian: bool,
    },
    /// Gleason solution on the range of the abelianized observability operator
    Gleason { system: String },
    /// Isometric dilation of a row contraction
    Dilate { tuple: String },
    /// Beurling-Lax factorization of a shift-invariant subspace
    BeurlingLax { subspace: String },
    /// Run a named worked example; without an id, list them
    #[command(name = "example", visible_alias = "paper-example")]
    Example { id: Option<String> },
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("must be a positive number".into())
    }
}

fn parse_param(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=expression")?;
    let k = k.trim();
    if k.is_empty() || !k.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
        return Err(format!("bad parameter name {k:?}"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn request(cli: &Cli) -> Value {
    let (name, mut fields): (&str, Map<String, Value>) = match &cli.command {
        Command::Analyze { system, depth } => (
            "analyze",
            [
                ("system".to_string(), system.as_str().into()),
                ("depth".into(), (*depth).into()),
            ]
            .into_iter()
            .collect(),
        ),
        Command::Simulate {
            system,
            input,
            depth,
        } => (
            "simulate",
            [
                ("system".to_string(), system.as_str().into()),
                ("input".into(), input.as_str().into()),
                ("depth".into(), (*depth).into()),
            ]
            .into_iter()
            .collect(),
        ),
        Command::Kernel {
            system,
            points,
            samples,
            depth,
            inverse_gramian,
        } => (
            "kernel",
            [
                ("system".to_string(), system.as_str().into()),
                (
                    "points".into(),
                    points.clone().map(Value::from).unwrap_or(Value::Null),
                ),
                ("samples".into(), (*samples).into()),
                ("depth".into(), (*depth).into()),
                ("inverseGramian".into(), (*inverse_gramian).into()),
            ]
            .into_iter()
            .collect(),
        ),
        Command::Gleason { system } => (
            "gleason",
            [("system".to_string(), system.as_str().into())]
                .into_iter()
                .collect(),
        ),
        Command::Dilate { tuple } => (
            "dilate",
            [("tuple".to_string(), tuple.as_str().into())]
                .into_iter()
                .collect(),
        ),
        Command::BeurlingLax { subspace } => (
            "beurling-lax",
            [("subspace".to_string(), subspace.as_str().into())]
                .into_iter()
                .collect(),
        ),
        Command::Example { id } => (
            "example",
            [(
                "id".to_string(),
                id.clone().map(Value::from).unwrap_or(Value::Null),
            )]
            .into_iter()
            .collect(),
        ),
    };
    fields.insert("command".into(), name.into());
    fields.insert("truncation".into(), cli.truncation.into());
    fields.insert("tol".into(), canonical::num(cli.tol));
    fields.insert("mode".into(), cli.mode.as_str().into());
    fields.insert("seed".into(), cli.seed.into());
    fields.insert(
        "params".into(),
        Value::Array(
            cli.params
                .iter()
                .map(|(k, v)| Value::Array(vec![k.as_str().into(), v.as_str().into()]))
                .collect(),
        ),
    );
    Value::Object(fields)
}

fn dispatch(cli: &Cli, opts: &Options) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Analyze { system, depth } => commands::analyze(system, *depth, opts),
        Command::Simulate {
            system,
            input,
            depth,
        } => commands::simulate(system, input, *depth, opts),
        Command::Kernel {
            system,
            points,
            samples,
            depth,
            inverse_gramian,
        } => commands::kernel(
            system,
            points.as_deref(),
            *samples,
            *depth,
            *inverse_gramian,
            opts,
        ),
        Command::Gleason { system } => commands::gleason(system, opts),
        Command::Dilate { tuple } => commands::dilate_cmd(tuple, opts),
        Command::BeurlingLax { subspace } => commands::beurling_lax_cmd(subspace, opts),
        Command::Example { id: Some(id) } => registry::run(id, opts),
        Command::Example { id: None } => {
            let mut out = Outcome {
                sections: Map::new(),
                pass: true,
            };
            let list = registry::REGISTRY
                .iter()
                .map(|(k, d)| ((*k).to_string(), Value::from(*d)))
                .collect();
            out.sections.insert("examples".into(), Value::Object(list));
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        truncation: cli.truncation as usize,
        tol: cli.tol,
        mode: cli.mode,
        seed: cli.seed,
        params: cli.params.clone(),
    };
    let outcome = match dispatch(&cli, &opts) {
        Ok(o) => o,
        Err(e) if e.is_hypothesis_failure() => {
            eprintln!("error: {e}");
            let mut sections = Map::new();
            sections.insert("error".into(), e.to_string().into());
            Outcome {
                sections,
                pass: false,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut doc = outcome.sections;
    doc.insert("request".into(), request(&cli));
    doc.insert("seed".into(), cli.seed.into());
    doc.insert(
        "status".into(),
        (if outcome.pass { "pass" } else { "fail" }).into(),
    );
    let text = canonical::to_string(&Value::Object(doc));
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
