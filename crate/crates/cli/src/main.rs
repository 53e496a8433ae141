use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use folgal_cli::pipeline::{self, Command, ErrorKind, Options, PipelineError};
use folgal_cli::problem::parse_problem;
use folgal_cli::report;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Analyze,
    Prenorm,
    Invariant,
    Reduce,
    Gv,
    Holonomy,
    Classify,
    Realize,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Analyze => Command::Analyze,
            Cmd::Prenorm => Command::Prenorm,
            Cmd::Invariant => Command::Invariant,
            Cmd::Reduce => Command::Reduce,
            Cmd::Gv => Command::Gv,
            Cmd::Holonomy => Command::Holonomy,
            Cmd::Classify => Command::Classify,
            Cmd::Realize => Command::Realize,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Json,
}

/// Normal forms, reducibility and holonomy of quasi-homogeneous foliation germs.
#[derive(Parser, Debug)]
#[command(name = "folgal", version)]
struct Cli {
    #[arg(value_enum)]
    cmd: Cmd,
    /// Problem file.
    file: PathBuf,
    /// Truncation order, overrides the file.
    #[arg(long)]
    order: Option<i64>,
    /// Fiber value `re,im`, overrides the file.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z0: Option<Complex64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Cycles for the period computation, one loop per line.
    #[arg(long)]
    paths: Option<PathBuf>,
    /// Exit with status 4 when the verdict is inconclusive.
    #[arg(long)]
    strict: bool,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|_| format!("bad real part in `{s}`"))?;
    let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part in `{s}`"))?;
    Ok(Complex64::new(re, im))
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError {
        kind: ErrorKind::Input,
        module: "cli",
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn execute(cli: &Cli) -> Result<pipeline::Report, PipelineError> {
    let text = read(&cli.file)?;
    let problem = parse_problem(&text)?;
    let opts = Options {
        order: cli.order,
        z0: cli.z0,
        paths: cli.paths.as_deref().map(read).transpose()?,
    };
    let base = cli.file.parent().unwrap_or(Path::new("."));
    pipeline::run(cli.cmd.into(), &problem, &opts, base)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(r) => {
            match cli.format {
                Format::Text => print!("{}", report::to_text(&r.body)),
                Format::Json => print!("{}", report::to_json(&r.body)),
            }
            if cli.strict && r.inconclusive {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{e}");
            if let Format::Json = cli.format {
                print!("{}", report::to_json(&e.to_json()));
            }
            ExitCode::from(match e.kind {
                ErrorKind::Input => 2,
                ErrorKind::Computation => 3,
            })
        }
    }
}
