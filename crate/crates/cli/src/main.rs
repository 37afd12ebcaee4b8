use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ncrest_core::analysis;
use ncrest_core::scenario;
use ncrest_core::sim::{self, LossModel, Mode, SimConfig};

mod grid;

use grid::parse_grid;

#[derive(Parser, Debug)]
#[command(name = "ncrest", version, about = "REST over random linear network coding: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form additional-request counts over an (alpha, p) grid.
    Analyze(AnalyzeArgs),
    /// Monte-Carlo runs of the coded protocol and the REST baseline.
    Simulate(SimulateArgs),
    /// Replay the four-request case study with its scripted losses.
    Trace,
    /// Write the additional-message curves for alpha = 0.3, 0.5, 0.7, 1.
    #[command(name = "reproduce-fig5")]
    ReproduceFig5(ReproduceArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long, default_value_t = 1000)]
    n: u64,
    /// Comma-separated list or start:end:step grid.
    #[arg(long, default_value = "0.3,0.5,0.7,1")]
    alpha: String,
    /// Comma-separated list or start:end:step grid.
    #[arg(long, default_value = "0:0.9:0.05")]
    p: String,
    /// Output CSV path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Nc,
    Rest,
    Both,
}

impl ModeArg {
    fn modes(self) -> &'static [Mode] {
        match self {
            ModeArg::Nc => &[Mode::Nc],
            ModeArg::Rest => &[Mode::Rest],
            ModeArg::Both => &[Mode::Nc, Mode::Rest],
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value = "0.5")]
    p: String,
    #[arg(long, default_value = "0.3")]
    alpha: String,
    /// Number of seeds per grid point.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = ncrest_core::client::DEFAULT_SUBSET_LIMIT)]
    subset_limit: usize,
    #[arg(long, default_value_t = sim::DEFAULT_TIMEOUT_ROUNDS)]
    timeout_rounds: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value = "0:0.9:0.05")]
    p: String,
    /// Directory for fig5.csv and the per-alpha files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_analysis(out: &mut dyn Write, points: &[analysis::AnalysisPoint]) -> Result<()> {
    writeln!(out, "{}", analysis::CSV_HEADER)?;
    for pt in points {
        writeln!(out, "{}", pt.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let alphas = parse_grid(&args.alpha).context("--alpha")?;
    let ps = parse_grid(&args.p).context("--p")?;
    let points = analysis::sweep(args.n, &alphas, &ps)?;
    let mut out = open_output(args.out.as_deref())?;
    write_analysis(&mut out, &points)
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let alphas = parse_grid(&args.alpha).context("--alpha")?;
    let ps = parse_grid(&args.p).context("--p")?;
    let config = SimConfig {
        subset_limit: args.subset_limit,
        timeout_rounds: args.timeout_rounds,
        ..SimConfig::default()
    };
    let seeds = args.first_seed..args.first_seed + args.seeds;

    let mut out = open_output(args.out.as_deref())?;
    writeln!(out, "{}", sim::CSV_HEADER)?;
    for &alpha in &alphas {
        for &p in &ps {
            let loss = LossModel::new(p, alpha, args.first_seed)?;
            for &mode in args.mode.modes() {
                let runs = sim::monte_carlo(mode, args.n, &loss, seeds.clone(), config)
                    .with_context(|| format!("{mode} run at p={p}, alpha={alpha}"))?;
                for (l, r) in &runs {
                    writeln!(out, "{}", r.csv_row(l, mode))?;
                }
                let mean = |f: fn(&sim::SimResult) -> u64| {
                    sim::mean_std(runs.iter().map(|(_, r)| f(r) as f64)).0
                };
                writeln!(
                    out,
                    "{},{},{},mean,{},{},{},{},{}",
                    args.n,
                    p,
                    alpha,
                    mode,
                    mean(|r| r.n_request_transmissions),
                    mean(|r| r.n_additional),
                    mean(|r| r.n_delivered),
                    mean(|r| r.elapsed_rounds),
                )?;
                let expected = match mode {
                    Mode::Nc => analysis::a_wnc(args.n, p, alpha)?,
                    Mode::Rest => analysis::a_wonc(args.n, p)?,
                };
                eprintln!(
                    "{mode:>4} p={p} alpha={alpha}: mean additional {:.3} (closed form {expected:.3})",
                    mean(|r| r.n_additional)
                );
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn trace() -> Result<bool> {
    let cs = scenario::run()?;
    let mut stdout = io::stdout().lock();
    stdout.write_all(cs.transcript().as_bytes())?;
    writeln!(
        stdout,
        "request transmissions: {}, additional: {}",
        cs.result.n_request_transmissions, cs.result.n_additional
    )?;
    let responses: Vec<String> = cs.responses.iter().map(|r| r.to_string()).collect();
    writeln!(stdout, "responses received: {}", responses.join(" "))?;
    let ok = cs.matches_expected() && cs.result.n_additional == 2;
    if ok {
        writeln!(stdout, "case study reproduced")?;
    } else {
        writeln!(stdout, "DIVERGENCE from the expected Response(2,4) Response(3,4) Response(4,4)")?;
    }
    Ok(ok)
}

const FIG5_ALPHAS: [f64; 4] = [0.3, 0.5, 0.7, 1.0];

fn reproduce_fig5(args: &ReproduceArgs) -> Result<()> {
    let ps = parse_grid(&args.p).context("--p")?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let all = analysis::sweep(args.n, &FIG5_ALPHAS, &ps)?;
    let combined = args.out_dir.join("fig5.csv");
    write_analysis(&mut open_output(Some(&combined))?, &all)?;
    for &alpha in &FIG5_ALPHAS {
        let points: Vec<_> = all.iter().copied().filter(|pt| pt.alpha == alpha).collect();
        let path = args.out_dir.join(format!("fig5_alpha_{alpha}.csv"));
        write_analysis(&mut open_output(Some(&path))?, &points)?;
    }
    eprintln!("wrote {} and per-alpha files", combined.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze(a) => analyze(a).map(|_| true),
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Trace => trace(),
        Command::ReproduceFig5(a) => reproduce_fig5(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
