use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use treebec::config::{ModelSpec, RunConfig};
use treebec::pipeline::{self, exit_code, Outcome};
use treebec::thermo::ScheduleRule;
use treebec::Error;

#[derive(Parser)]
#[command(name = "treebec", version, about = "Spectral and Bose-gas computations on perturbed Cayley trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the finite volumes and write text dumps.
    Build(Flags),
    /// Top eigenpairs of every volume.
    Spectrum(Flags),
    /// Norm of the infinite model, transience and the hidden gap.
    Secular(Flags),
    /// Integrated densities of states and the shift law.
    Ids(Flags),
    /// Chemical-potential schedules, densities, two-point functions and the condensate state.
    Thermo(Flags),
    /// Index the files already written for this configuration.
    Report(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON document with the run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model kind: Tree, HQ or GQq.
    #[arg(long)]
    kind: Option<String>,
    /// Vertex degree Q.
    #[arg(short = 'Q', long = "degree")]
    degree: Option<usize>,
    /// Base degree q for GQq.
    #[arg(short = 'q', long = "base-degree")]
    q: Option<usize>,
    /// DiagonalUnit or EdgeDouble.
    #[arg(long)]
    mode: Option<String>,
    /// Radii as `a..b` (inclusive) or a comma list.
    #[arg(long)]
    n_range: Option<String>,
    /// Comma-separated inverse temperatures.
    #[arg(long)]
    beta: Option<String>,
    /// `Fixed:mu`, `TargetDensity:rho`, `Fregg1:c` or `Fregg3:D`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    eig_tol: Option<f64>,
    #[arg(long)]
    solve_tol: Option<f64>,
    #[arg(long)]
    secular_tol: Option<f64>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    dense_limit: Option<usize>,
    #[arg(long)]
    vertex_limit: Option<usize>,
    /// Comma-separated probe vertices.
    #[arg(long)]
    probes: Option<String>,
    #[arg(long)]
    transience_levels: Option<usize>,
    #[arg(long)]
    cauchy_gap: Option<f64>,
    #[arg(long)]
    divergence_factor: Option<f64>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|_| cfg_err(format!("bad {what} entry `{t}`"))))
        .collect()
}

fn parse_range(s: &str) -> Result<Vec<usize>, Error> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| cfg_err(format!("bad range start in `{s}`")))?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| cfg_err(format!("bad range end in `{s}`")))?;
        return Ok((a..=b).collect());
    }
    parse_list(s, "nRange")
}

fn parse_schedule(s: &str) -> Result<ScheduleRule, Error> {
    let (rule, v) = s.split_once(':').ok_or_else(|| cfg_err(format!("schedule `{s}` needs `rule:value`")))?;
    let v: f64 = v.parse().map_err(|_| cfg_err(format!("bad schedule value in `{s}`")))?;
    match rule {
        "Fixed" => Ok(ScheduleRule::Fixed(v)),
        "TargetDensity" => Ok(ScheduleRule::TargetDensity(v)),
        "Fregg1" => Ok(ScheduleRule::Fregg1(v)),
        "Fregg3" => Ok(ScheduleRule::Fregg3(v)),
        _ => Err(cfg_err(format!("unknown schedule rule `{rule}`"))),
    }
}

fn resolve(f: &Flags) -> Result<RunConfig, Error> {
    let mut c = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if f.kind.is_some() || f.degree.is_some() || f.q.is_some() {
        let kind = f.kind.clone().unwrap_or(c.model.kind.clone());
        let q = if kind == "GQq" { f.q.or(c.model.q) } else { f.q };
        c.model = ModelSpec { kind, degree: f.degree.unwrap_or(c.model.degree), q };
    }
    if let Some(m) = &f.mode {
        c.mode = m.parse().map_err(|e: Error| cfg_err(e.to_string()))?;
    }
    if let Some(r) = &f.n_range {
        c.n_range = parse_range(r)?;
    }
    if let Some(b) = &f.beta {
        c.beta = parse_list(b, "beta")?;
    }
    if let Some(s) = &f.schedule {
        c.schedule = parse_schedule(s)?;
    }
    if let Some(v) = f.eig_tol {
        c.tolerances.eig = v;
    }
    if let Some(v) = f.solve_tol {
        c.tolerances.solve = v;
    }
    if let Some(v) = f.secular_tol {
        c.tolerances.secular = v;
    }
    if let Some(d) = &f.output_dir {
        c.output_dir = d.clone();
    }
    if let Some(v) = f.dense_limit {
        c.dense_limit = v;
    }
    if let Some(v) = f.vertex_limit {
        c.vertex_limit = v;
    }
    if let Some(p) = &f.probes {
        c.probes = parse_list(p, "probe")?;
    }
    if let Some(v) = f.transience_levels {
        c.transience.levels = v;
    }
    if let Some(v) = f.cauchy_gap {
        c.transience.cauchy_gap = v;
    }
    if let Some(v) = f.divergence_factor {
        c.divergence_factor = v;
    }
    Ok(c)
}

fn init_threads() {
    if let Ok(v) = std::env::var("TREEBEC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring TREEBEC_THREADS={v}"),
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let (flags, f): (&Flags, fn(&RunConfig) -> treebec::Result<Outcome>) = match &cli.command {
        Command::Build(x) => (x, pipeline::cmd_build),
        Command::Spectrum(x) => (x, pipeline::cmd_spectrum),
        Command::Secular(x) => (x, pipeline::cmd_secular),
        Command::Ids(x) => (x, pipeline::cmd_ids),
        Command::Thermo(x) => (x, pipeline::cmd_thermo),
        Command::Report(x) => (x, pipeline::cmd_report),
    };
    let cfg = resolve(flags)?;
    f(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for p in &out.files {
                println!("{}", p.display());
            }
            if out.refusals.is_empty() {
                ExitCode::SUCCESS
            } else {
                for r in &out.refusals {
                    eprintln!("refused: {r}");
                }
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
