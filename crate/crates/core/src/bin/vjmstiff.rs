//! Command-line front end. Exit status: 0 success, 1 bad input or I/O,
//! 2 no equilibrium, 3 singular configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vjmstiff::analysis::Posture;
use vjmstiff::cli::{self, ChainSource, Format, GridRange, RunConfig};
use vjmstiff::{Error, Result, SolverSettings};

#[derive(Parser)]
#[command(name = "vjmstiff", version, about = "Loaded-mode stiffness of elastic manipulator chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Chain description file (JSON).
    #[arg(long, conflicts_with = "posture")]
    chain: Option<PathBuf>,
    /// Built-in Orthoglide leg at posture A, B, C or D.
    #[arg(long)]
    posture: Option<String>,
    /// Passive joint values `q1,q2,…` overriding the default.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_restarts: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a chain and report its dimensions and spring spectrum.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Loaded equilibrium and stiffness at an offset from the unloaded pose.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// `x,y,z,rx,ry,rz` in m and rad.
        #[arg(long, allow_hyphen_values = true, default_value = "0,0,0,0,0,0")]
        offset: String,
    },
    /// Force-displacement sweep and buckling report.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `x,y,z,rx,ry,rz`, normalized.
        #[arg(long, allow_hyphen_values = true, default_value = "1,0,0,0,0,0")]
        direction: String,
        /// Sweep length in mm.
        #[arg(long, default_value_t = cli::DEFAULT_DMAX_MM)]
        dmax: f64,
        /// Step in mm.
        #[arg(long, default_value_t = cli::DEFAULT_STEP_MM, conflicts_with = "paper_step")]
        step: f64,
        /// Use the fine 0.001 mm step.
        #[arg(long)]
        paper_step: bool,
        /// Buckling report path; defaults to the CSV path with a .json extension.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Stiffness spectra over a grid of joint values or offsets.
    Map {
        #[command(flatten)]
        common: Common,
        /// `AXIS:START:END:COUNT` with AXIS q1…qn, x, y, z, rx, ry or rz; repeatable.
        #[arg(long)]
        grid: Vec<String>,
        /// Comma-separated posture list for the built-in leg, e.g. `A,B,C,D`.
        #[arg(long)]
        postures: Option<String>,
        /// Direction for the `k_dir` column.
        #[arg(long, allow_hyphen_values = true, default_value = "1,0,0,0,0,0")]
        direction: String,
    },
}

fn source(s: &Source) -> Result<(ChainSource, Option<Vec<f64>>)> {
    let src = match (&s.chain, &s.posture) {
        (Some(path), None) => ChainSource::File(path.clone()),
        (None, Some(p)) => ChainSource::Orthoglide(p.parse()?),
        (None, None) => ChainSource::Orthoglide(Posture::A),
        (Some(_), Some(_)) => return Err(Error::InvalidInput("give either --chain or --posture".into())),
    };
    let q = s.q.as_deref().map(cli::parse_list).transpose()?;
    Ok((src, q))
}

fn config(c: &Common, default_format: Format) -> Result<RunConfig> {
    let (src, q) = source(&c.source)?;
    let defaults = SolverSettings::default();
    let settings = SolverSettings {
        rng_seed: c.seed,
        max_iter: c.max_iter.unwrap_or(defaults.max_iter),
        max_restarts: c.max_restarts.unwrap_or(defaults.max_restarts),
        ..defaults
    };
    settings.validate()?;
    Ok(RunConfig {
        source: src,
        q,
        settings,
        out: c.out.clone(),
        format: c.format.as_deref().map(str::parse).transpose()?.unwrap_or(default_format),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => cli::atomic_write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { source: s } => {
            let (src, q) = source(&s)?;
            println!("{}", cli::cmd_validate(&src, q.as_deref())?);
        }
        Command::Equilibrium { common, offset } => {
            let cfg = config(&common, Format::Json)?;
            let report = cli::cmd_equilibrium(&cfg, &cli::parse_twist(&offset)?)?;
            emit(cfg.out.as_deref(), &report.to_json()?)?;
        }
        Command::Sweep {
            common,
            direction,
            dmax,
            step,
            paper_step,
            report,
        } => {
            let cfg = config(&common, Format::Csv)?;
            let step = if paper_step { cli::FINE_STEP_MM } else { step };
            let out = cli::cmd_sweep(&cfg, &cli::parse_twist(&direction)?, dmax, step)?;
            let report = report.or_else(|| cfg.out.as_ref().map(|p| p.with_extension("json")));
            match (&cfg.out, cfg.format) {
                (Some(p), _) => cli::atomic_write(p, &out.csv)?,
                (None, Format::Csv) => print!("{}", out.csv),
                (None, Format::Json) => {}
            }
            match report {
                Some(p) => cli::atomic_write(&p, &out.json)?,
                None => print!("{}", out.json),
            }
            if let Some(f) = &out.document.failure {
                eprintln!("sweep stopped early: {f}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Map {
            common,
            grid,
            postures,
            direction,
        } => {
            let cfg = config(&common, Format::Csv)?;
            let points = match postures {
                Some(list) => {
                    if !matches!(cfg.source, ChainSource::Orthoglide(_)) {
                        return Err(Error::InvalidInput("--postures needs the built-in leg".into()));
                    }
                    let ps = list.split(',').map(str::parse).collect::<Result<Vec<Posture>>>()?;
                    cli::posture_points(&ps)
                }
                None => {
                    let ranges = grid.iter().map(|g| g.parse()).collect::<Result<Vec<GridRange>>>()?;
                    let q0 = cli::load_chain(&cfg.source, cfg.q.as_deref())?.q0;
                    cli::grid_points(q0.as_slice(), &ranges)?
                }
            };
            let (_, text) = cli::cmd_map(&cfg, &points, &cli::parse_twist(&direction)?)?;
            emit(cfg.out.as_deref(), &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VJMSTIFF_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // keep 2 reserved for non-convergence
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
