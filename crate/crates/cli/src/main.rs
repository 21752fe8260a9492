//! `ff`: generate instances, solve LPs exactly, round, measure gaps and
//! certify constructions.

mod commands;
mod output;
mod source;

use clap::{Args, Parser, Subcommand, ValueEnum};
use output::{Exit, Failure};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "ff",
    version,
    about = "Firefighter on trees: LP gaps, exact solving and rounding"
)]
struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Write an instance JSON for one of the generator families.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Solve an LP relaxation exactly.
    Solve(SolveArgs),
    /// Round a fractional solution and report save probabilities.
    Round(RoundArgs),
    /// Compare the LP optimum with the exact optimum.
    Gap(GapArgs),
    /// Check the structural claims of a construction.
    Certify {
        #[command(subcommand)]
        family: CertifyFamily,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FanoutArg {
    Full,
    Compact,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapFanoutArg {
    Full,
    Compact,
    Tapered,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpArg {
    Lp1,
    Lp2,
    #[value(alias = "lpprime")]
    Hartke,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoArg {
    Independent,
    Half,
    Twophase,
}

#[derive(Args, Debug, Serialize)]
pub struct GadgetParams {
    #[arg(long = "M")]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    /// Spider base; defaults to ⌈4/δ⌉ when --delta is given.
    #[arg(long = "D", required_unless_present = "delta")]
    pub d: Option<usize>,
    #[arg(long, conflicts_with = "d")]
    pub delta: Option<String>,
    #[arg(long, value_enum, default_value = "full")]
    pub fanout: FanoutArg,
    #[arg(long, default_value_t = 2_000_000)]
    pub size_cap: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct GapParams {
    #[arg(long)]
    pub k: usize,
    #[arg(long = "D")]
    pub d: usize,
    #[arg(long)]
    pub phases: usize,
    #[arg(long, value_enum, default_value = "tapered")]
    pub fanout: GapFanoutArg,
    #[arg(long, default_value_t = 2_000_000)]
    pub size_cap: u64,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GoodGadget(GadgetParams),
    GapInstance(GapParams),
    BasicGadget,
    HartkeGap {
        #[arg(long)]
        alpha: usize,
        #[arg(long, default_value_t = 2_000_000)]
        size_cap: u64,
    },
    FinbowRandom {
        #[arg(long)]
        n: usize,
        #[arg(long, env = "FF_SEED", default_value_t = 0)]
        seed: u64,
    },
    TerminalToPlain {
        /// Instance file or fixture name with a terminal set.
        input: String,
        #[arg(long)]
        epsilon: String,
        #[arg(long, default_value_t = 2_000_000)]
        size_cap: u64,
    },
    Fig4Fixture,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    /// Instance file or fixture name.
    pub instance: String,
    #[arg(long, value_enum, default_value = "lp1")]
    pub lp: LpArg,
    /// Enumerate up to N optimal vertices.
    #[arg(long)]
    pub enumerate_vertices: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    pub basis_cap: usize,
    /// Also write the LP in text form.
    #[arg(long)]
    pub export_lp: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RoundArgs {
    /// Instance file or fixture name.
    pub instance: String,
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, env = "FF_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Enumerate every coin outcome instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value = "1/2")]
    pub eta: String,
    /// fixture | half | lp1 | lp2 | hartke | <file.json>
    #[arg(long, default_value = "fixture")]
    pub x: String,
    #[arg(long, default_value_t = 1 << 20)]
    pub branch_cap: usize,
    /// Per-vertex CSV (vertex, y, p_saved, stderr, ratio).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also run independent rounding and compare terminal-save means.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct GapArgs {
    /// Instance file or fixture name.
    pub instance: String,
    #[arg(long, value_enum, default_value = "lp1")]
    pub lp: LpArg,
    #[arg(long, value_delimiter = ',')]
    pub forbid_layers: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub forbid_vertices: Vec<usize>,
    #[arg(long)]
    pub node_cap: Option<usize>,
    /// Seconds; results may then depend on machine speed.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertifyFamily {
    GoodGadget {
        #[command(flatten)]
        params: GadgetParams,
        #[arg(long)]
        node_cap: Option<usize>,
    },
    GapInstance {
        #[command(flatten)]
        params: GapParams,
        /// Also compute the exact optimum.
        #[arg(long)]
        opt: bool,
    },
    HartkeGap {
        #[arg(long)]
        alpha: usize,
        #[arg(long, default_value_t = 2_000_000)]
        size_cap: u64,
    },
    BasicGadget,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Solve(_) => "solve",
            Command::Round(_) => "round",
            Command::Gap(_) => "gap",
            Command::Certify { .. } => "certify",
        }
    }
}

fn run(cli: &Cli) -> Result<Exit, Failure> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    let config = serde_json::to_value(&cli.command)?;
    let out = cli.out.as_deref();
    if let Command::Generate { family } = &cli.command {
        let (json, summary) = commands::generate(family)?;
        output::write(out, &json)?;
        eprintln!("{summary}");
        return Ok(Exit::Ok);
    }
    let report = match &cli.command {
        Command::Solve(a) => commands::solve(a)?,
        Command::Round(a) => commands::round(a)?,
        Command::Gap(a) => commands::gap(a)?,
        Command::Certify { family } => commands::certify(family)?,
        Command::Generate { .. } => unreachable!(),
    };
    let text = output::pretty(&output::envelope(cli.command.name(), &config, &report));
    output::write(out, &text)?;
    Ok(report.exit)
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(exit) => exit,
        Err(f) => {
            eprintln!("ff: {}", f.message);
            f.exit
        }
    };
    std::process::exit(code as i32);
}
