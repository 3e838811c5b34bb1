use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spinoptics::fermat::curvature;
use spinoptics::{Vec3, VelocityData};

use spinray::checks::{run_builtin, run_scene_checks, CheckOptions};
use spinray::{load_scene, parse_sweep, run_sweep, run_trace, write_csv, CliError, CliResult};

#[derive(Parser)]
#[command(name = "spinray", version, about = "Trace, sweep and check spinning light rays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Builtin,
}

#[derive(Subcommand)]
enum Command {
    /// Trace one source of a scene; writes a JSON event list.
    Trace {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        source: usize,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep; writes CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant checks; exits with status 1 on any failure.
    Check {
        #[arg(long, value_enum, conflicts_with = "scene")]
        suite: Option<Suite>,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop the spin term of the scattering map (negative control).
        #[arg(long, hide = true)]
        corrupt_rho: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump velocity and curvature data of the medium at a point.
    Curvature {
        #[arg(long)]
        scene: PathBuf,
        /// Point as `x,y,z`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        at: [f64; 3],
    },
}

fn parse_point(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {text:?}"));
    }
    let mut out = [0.0f64; 3];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.trim().parse().map_err(|_| format!("cannot parse coordinate {part:?}"))?;
        if !slot.is_finite() {
            return Err(format!("coordinate {part:?} is not finite"));
        }
    }
    Ok(out)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| CliError::Io { path: p.display().to_string(), source })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> CliResult<()> {
    let mut out = output(path)?;
    let io_err = |source| CliError::Io { path: path.map_or("<stdout>".into(), |p| p.display().to_string()), source };
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err(e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err)
}

#[derive(Serialize)]
struct CurvatureDump {
    medium: String,
    at: [f64; 3],
    n: f64,
    velocity: VelocityData,
    curvature: spinoptics::CurvatureData,
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Trace { scene, source, out } => {
            let scene = load_scene(&scene)?;
            write_json(&run_trace(&scene, source)?, out.as_deref())?;
        }
        Command::Sweep { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|source| CliError::Io { path: spec.display().to_string(), source })?;
            let rows = run_sweep(&parse_sweep(&text)?)?;
            write_csv(&rows, output(out.as_deref())?)?;
        }
        Command::Check { suite, scene, seed, corrupt_rho, out } => {
            let opts = CheckOptions { seed, corrupt_rho };
            let report = match (suite, scene) {
                (_, Some(path)) => run_scene_checks(&path.display().to_string(), &load_scene(&path)?, &opts),
                (Some(Suite::Builtin) | None, None) => run_builtin(&opts),
            };
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            write_json(&report, out.as_deref())?;
            return Ok(report.passed);
        }
        Command::Curvature { scene, at } => {
            let scene = load_scene(&scene)?;
            let x = Vec3::from(at);
            let media = scene.media_at(&x);
            let &[m] = media.as_slice() else {
                return Err(CliError::input(format!("point {at:?} lies in {} media, expected one", media.len())));
            };
            let field = &scene.media[m].field;
            let numerical = |e| CliError::numerical(format!("curvature at {at:?}"), e);
            let dump = CurvatureDump {
                medium: scene.media[m].name.clone(),
                at,
                n: field.index(&x).map_err(numerical)?,
                velocity: spinoptics::fermat::velocity_data(field, &x).map_err(numerical)?,
                curvature: curvature(field, &x).map_err(numerical)?,
            };
            write_json(&dump, None)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
