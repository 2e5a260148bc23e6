//! Command-line front end. [`run_cli`] parses arguments, runs one subcommand
//! and maps failures to exit codes:
//!
//! | code | meaning                         |
//! |------|---------------------------------|
//! | 0    | success                         |
//! | 1    | usage error                     |
//! | 2    | bad or inconsistent input data  |
//! | 3    | numerical solver failure        |

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use netlearn::data::CapacitySpec;
use netlearn::graph::{LinkId, Network};
use netlearn::learner::{
    export_heterogeneity, run_dual_fixed_point, run_msa_costs, write_heterogeneity_files,
    write_online_log, write_trace_dir, LearnOptions, OnlineState,
};
use netlearn::price::PriceVector;
use netlearn::scenario::{generate, ScenarioSpec};
use netlearn::{forward, io, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "netlearn",
    version,
    about = "Infer link costs and capacity prices from observed routes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Network file utilities.
    #[command(subcommand)]
    Net(NetCommand),
    /// Generate observations from a scenario file.
    Simulate {
        scenario: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Fit per-agent link costs around a common prior.
    EstimateCosts {
        links: PathBuf,
        observations: PathBuf,
        /// A uniform value or a `link_id,value` file.
        #[arg(long)]
        prior: String,
        #[command(flatten)]
        learn: LearnArgs,
        /// Histogram bins in the heterogeneity export.
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Recover capacity dual prices on designated links.
    RecoverDuals {
        links: PathBuf,
        observations: PathBuf,
        /// Comma-separated link ids.
        #[arg(long)]
        priced: String,
        /// `zeros` or a `link_id,value` file.
        #[arg(long, default_value = "zeros")]
        prior: String,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Replay an observation stream through the online price monitor.
    Monitor {
        links: PathBuf,
        observations: PathBuf,
        /// Comma-separated link ids, or `all`.
        #[arg(long)]
        priced: String,
        /// Resumed from when present and rewritten afterwards.
        #[arg(long)]
        state: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Solve the capacitated multicommodity flow problem.
    SolveFlow {
        links: PathBuf,
        demand: PathBuf,
        capacity: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum NetCommand {
    /// Load a links file and report its size.
    Validate { links: PathBuf },
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Threads for per-agent solves.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl LearnArgs {
    fn options(&self) -> LearnOptions {
        LearnOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            jobs: self.jobs,
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                EXIT_SOLVER
            } else {
                EXIT_DATA
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Net(NetCommand::Validate { links }) => net_validate(&links),
        Command::Simulate { scenario, output } => simulate(&scenario, &output),
        Command::EstimateCosts {
            links,
            observations,
            prior,
            learn,
            bins,
            output,
        } => estimate_costs(&links, &observations, &prior, &learn, bins, &output),
        Command::RecoverDuals {
            links,
            observations,
            priced,
            prior,
            learn,
            output,
        } => recover_duals(&links, &observations, &priced, &prior, &learn, &output),
        Command::Monitor {
            links,
            observations,
            priced,
            state,
            output,
        } => monitor(&links, &observations, &priced, &state, &output),
        Command::SolveFlow {
            links,
            demand,
            capacity,
            output,
        } => solve_flow(&links, &demand, &capacity, &output),
    }
}

fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn net_validate(links: &FsPath) -> Result<()> {
    let net = io::load_network(links)?;
    let costs: Vec<f64> = net.links().iter().map(|l| l.base_cost).collect();
    println!("links={}", net.links().len());
    println!("nodes={}", net.node_count());
    println!(
        "cost_range={}..{}",
        costs.iter().copied().fold(f64::INFINITY, f64::min),
        costs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    );
    Ok(())
}

fn simulate(scenario: &FsPath, output: &FsPath) -> Result<()> {
    let spec = ScenarioSpec::load(scenario)?;
    let g = generate(&spec)?;
    let mut out = io::create_file(output)?;
    io::write_observations(&g.observations, &g.comments, &mut out).map_err(io_err(output))?;
    out.flush().map_err(io_err(output))?;
    log::info!(
        "wrote {} observations to {}",
        g.observations.len(),
        output.display()
    );
    Ok(())
}

/// Parses `1,7` into link ids, or `all` into every link of `net`.
fn parse_priced(arg: &str, net: &Network) -> Result<CapacitySpec> {
    if arg.trim().eq_ignore_ascii_case("all") {
        return Ok(CapacitySpec::priced_only(net.link_ids()));
    }
    let mut ids = Vec::new();
    for part in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id = part
            .parse::<u32>()
            .ok()
            .filter(|&v| v > 0)
            .map(LinkId)
            .ok_or_else(|| Error::Invalid(format!("invalid link id `{part}` in --priced")))?;
        if !net.contains_link(id) {
            return Err(Error::Invalid(format!("--priced names unknown link {id}")));
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::Invalid("--priced lists no links".into()));
    }
    CapacitySpec::new(
        ids.into_iter()
            .map(|l| (l, netlearn::data::Capacity::PricedOnly)),
    )
}

fn estimate_costs(
    links: &FsPath,
    observations: &FsPath,
    prior: &str,
    learn: &LearnArgs,
    bins: usize,
    output: &FsPath,
) -> Result<()> {
    let net = io::load_network(links)?;
    let obs = io::load_observations(observations, &net)?;
    let c0 = match prior.trim().parse::<f64>() {
        Ok(v) => PriceVector::uniform(net.link_ids(), v),
        Err(_) => io::load_prices(prior, &net)?,
    };
    let trace = run_msa_costs(&obs, &net, &c0, &learn.options())?;
    write_trace_dir(output, &trace)?;
    write_heterogeneity_files(output, &export_heterogeneity(&trace, bins))?;
    report(&trace);
    Ok(())
}

fn recover_duals(
    links: &FsPath,
    observations: &FsPath,
    priced: &str,
    prior: &str,
    learn: &LearnArgs,
    output: &FsPath,
) -> Result<()> {
    let net = io::load_network(links)?;
    let obs = io::load_observations(observations, &net)?;
    let priced = parse_priced(priced, &net)?;
    let w0 = if prior.trim().eq_ignore_ascii_case("zeros") {
        PriceVector::zeros(priced.links())
    } else {
        io::load_prices(prior, &net)?
    };
    let trace = run_dual_fixed_point(
        &obs,
        &net,
        &net.base_costs(),
        &priced,
        &w0,
        &learn.options(),
    )?;
    write_trace_dir(output, &trace)?;
    report(&trace);
    Ok(())
}

fn report(trace: &netlearn::learner::FixedPointTrace) {
    if !trace.converged {
        log::warn!(
            "stopped after {} iterations without converging",
            trace.iterations
        );
    }
    println!(
        "iterations={} converged={} final_gap={:e}",
        trace.iterations, trace.converged, trace.final_gap
    );
}

fn monitor(
    links: &FsPath,
    observations: &FsPath,
    priced: &str,
    state_path: &FsPath,
    output: &FsPath,
) -> Result<()> {
    let net = io::load_network(links)?;
    let obs = io::load_observations(observations, &net)?;
    let priced = parse_priced(priced, &net)?;
    let resumed = state_path.exists();
    let mut state = if resumed {
        let s = OnlineState::load(state_path)?;
        if let Some(l) = priced.links().find(|&l| s.current_prior.get(l).is_none()) {
            return Err(Error::Invalid(format!(
                "state file {} has no prior for priced link {l}",
                state_path.display()
            )));
        }
        s
    } else {
        OnlineState::new(PriceVector::zeros(priced.links()))?
    };
    let resume_after = state.last_timestamp;
    let c = net.base_costs();
    for ob in &obs {
        if let (Some(t), Some(last)) = (ob.timestamp, resume_after) {
            if t <= last {
                log::info!("skipping {} at {t}: already consumed", ob.agent_id);
                continue;
            }
        }
        state.update(ob, &net, &c, &priced)?;
    }

    let append = resumed && output.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(output)
        .map_err(io_err(output))?;
    let mut buf = Vec::new();
    write_online_log(&state.log, &mut buf).map_err(io_err(output))?;
    let text = String::from_utf8(buf).expect("log is utf-8");
    let body = if append {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    } else {
        &text
    };
    let mut w = BufWriter::new(file);
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(output))?;
    state.save(state_path)?;
    let skipped = state.log.iter().filter(|e| e.objective.is_none()).count();
    println!(
        "updates={} skipped={} total_updates={}",
        state.log.len(),
        skipped,
        state.update_count
    );
    Ok(())
}

fn solve_flow(links: &FsPath, demand: &FsPath, capacity: &FsPath, output: &FsPath) -> Result<()> {
    let net = io::load_network(links)?;
    let dem = io::load_demand(demand, &net)?;
    let caps = io::load_capacity(capacity, &net)?;
    let sol = forward::solve_multicommodity(&net, &dem, &caps)?;
    std::fs::create_dir_all(output).map_err(io_err(output))?;
    let flows = output.join("flows.csv");
    let mut f = io::create_file(&flows)?;
    forward::write_flows(&sol, &mut f)
        .and_then(|_| f.flush())
        .map_err(io_err(&flows))?;
    let duals = output.join("duals.csv");
    let mut d = io::create_file(&duals)?;
    forward::write_duals(&sol.duals, &mut d)
        .and_then(|_| d.flush())
        .map_err(io_err(&duals))?;
    println!("total_cost={:.6}", sol.total_cost);
    Ok(())
}
