//! Command-line experiment runner.
//!
//! Results go to stdout (or `--out`) and are byte-stable; progress, solver
//! statistics and wall times go to stderr. Exit codes: 0 success, 2 no
//! feasible schedule, 3 input error, 4 oracle capacity exceeded.

pub mod experiments;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::model::{DeadlineSpec, RailSet, Rate, Scenario};
use crate::railopt::{SolveOptions, SolverChoice, max_voltage_latency, optimize_rails, solve_rail_set};
use crate::solver::{exact_oracle, marginal_utility_jump_search, solve_lambda_search};
use crate::statespace::{LayeredStateGraph, schedule_space_bound};
use crate::workload::{
    BUNDLED_NAMES, GeneratorConfig, ProfileDocument, emit_schedule_table, generate_random_instance, load_profile,
};

use experiments::{Policy, RailMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (profile schema 1, schedule schema 1)"
);

#[derive(Parser, Debug)]
#[command(name = "railsched", version = VERSION, about = "Rail-constrained DVFS and power-gating scheduler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one profile at one rate and print the schedule table as JSON.
    Solve(SolveArgs),
    /// Energy of every policy across inference rates, as CSV.
    SweepRate(SweepRateArgs),
    /// Orchestrated energy against the number of rails, as CSV.
    SweepRails(SweepRailsArgs),
    /// Orchestrated energy against the full-swing switch energy, as CSV.
    SweepTransition(SweepTransitionArgs),
    /// Layers ranked by local marginal utility, as CSV.
    MarginalUtility(MarginalUtilityArgs),
    /// Oracle gaps and pruning checks on generated instances, as CSV.
    Validate(ValidateArgs),
    /// Write a seeded random profile as JSON.
    Generate(GenerateArgs),
    /// Upper bound on the number of distinct schedules.
    Bound(BoundArgs),
    /// List the bundled profiles.
    Profiles,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Profile JSON path, or `bundled:<name>`.
    #[arg(long)]
    profile: String,
    /// Override the full-swing switch energy, nanojoules.
    #[arg(long = "transition-energy-nj")]
    transition_energy_nj: Option<String>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Largest number of rails to choose.
    #[arg(long, default_value_t = 3)]
    rails: usize,
    /// Fixed rail set in millivolts, e.g. `900,1100,1300`; skips rail
    /// selection.
    #[arg(long, value_delimiter = ',')]
    rail_set: Option<Vec<u32>>,
    #[arg(long, value_enum, default_value_t = SolverArg::LambdaDp)]
    solver: SolverArg,
    /// Keep dominated states.
    #[arg(long)]
    no_prune: bool,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    LambdaDp,
    Jump,
    Oracle,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::LambdaDp => SolverChoice::LambdaDp,
            SolverArg::Jump => SolverChoice::Jump,
            SolverArg::Oracle => SolverChoice::Oracle,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Target inference rate in frames per second, or `max` for the highest
    /// rate the nominal schedule meets.
    #[arg(long = "rate-fps")]
    rate_fps: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SweepRateArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    /// Comma-separated rates in FPS; `max` is the nominal schedule's limit.
    #[arg(long = "rates-fps", value_delimiter = ',', default_value = "1,2,5,10,20,50,100,200,max")]
    rates_fps: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "nominal,gating,greedy,greedy+gating,orchestrated")]
    policies: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RailModeArg {
    Evenly,
    Optimized,
    Both,
}

#[derive(Args, Debug)]
struct SweepRailsArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long = "rate-fps")]
    rate_fps: String,
    /// Smallest rail count.
    #[arg(long, default_value_t = 1)]
    min_rails: usize,
    /// Largest rail count.
    #[arg(long, default_value_t = 5)]
    max_rails: usize,
    #[arg(long, value_enum, default_value_t = RailModeArg::Both)]
    mode: RailModeArg,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SweepTransitionArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long = "rate-fps")]
    rate_fps: String,
    /// Log-spaced points per decade between 0.1 nJ and 1 µJ.
    #[arg(long, default_value_t = 1)]
    points_per_decade: u32,
    /// Explicit energies in nanojoules; overrides the log grid.
    #[arg(long = "energies-nj", value_delimiter = ',')]
    energies_nj: Option<Vec<String>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct MarginalUtilityArgs {
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long = "rate-fps")]
    rate_fps: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Number of generated instances.
    #[arg(long, default_value_t = 100)]
    instances: u64,
    /// First generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    layers: usize,
    /// Chance of a coupled trap layer pair, ppm.
    #[arg(long, default_value_t = 300_000)]
    trap_rate_ppm: u32,
    /// Also time pruned against unpruned solves on the bundled profiles.
    #[arg(long)]
    speedup: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    dvfs_domains: usize,
    #[arg(long, default_value_t = 0)]
    gated_banks: usize,
    #[arg(long, default_value_t = 4)]
    menu_levels: usize,
    #[arg(long, default_value_t = 0)]
    trap_rate_ppm: u32,
    #[arg(long)]
    power_down: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// Menu size.
    #[arg(long, default_value_t = 9)]
    levels: u64,
    #[arg(long, default_value_t = 3)]
    rails: u64,
    #[arg(long, default_value_t = 5)]
    domains: u64,
    #[arg(long, default_value_t = 26)]
    layers: u64,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OracleCapacity { .. } => EXIT_CAPACITY,
        e if experiments::is_infeasible(e) => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    }
}

/// Run the CLI on `args` (program name first) and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(err, "error: {e}");
            if let Some(hint) = min_rate_hint(&e) {
                let _ = writeln!(err, "hint: {hint}");
            }
            code
        }
    }
}

fn min_rate_hint(e: &Error) -> Option<String> {
    let min_latency = match e {
        Error::Infeasible { min_latency, .. } | Error::NoFeasibleRailSet { min_latency, .. } => *min_latency,
        _ => return None,
    };
    Some(format!(
        "the highest achievable rate is {} FPS (fastest schedule {min_latency} ps)",
        experiments::fixed_point(1_000_000_000_000, i128::from(min_latency.max(1)), 3)
    ))
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Solve(a) => cmd_solve(a, out, err),
        Command::SweepRate(a) => cmd_sweep_rate(a, out, err),
        Command::SweepRails(a) => cmd_sweep_rails(a, out, err),
        Command::SweepTransition(a) => cmd_sweep_transition(a, out, err),
        Command::MarginalUtility(a) => cmd_marginal_utility(a, out, err),
        Command::Validate(a) => cmd_validate(a, out, err),
        Command::Generate(a) => {
            let cfg = GeneratorConfig {
                layers: a.layers,
                dvfs_domains: a.dvfs_domains,
                gated_banks: a.gated_banks,
                menu_levels: a.menu_levels,
                trap_rate: a.trap_rate_ppm,
                power_down: a.power_down,
                ..GeneratorConfig::default()
            };
            if cfg.layers == 0 || cfg.dvfs_domains == 0 || !(1..=41).contains(&cfg.menu_levels) {
                return Err(Error::validation(
                    "generate needs at least one layer, one dvfs domain and 1..=41 menu levels",
                ));
            }
            emit(&a.out, out, &generate_random_instance(a.seed, &cfg).to_json())
        }
        Command::Bound(a) => {
            writeln!(out, "{}", schedule_space_bound(a.levels, a.rails, a.domains, a.layers))?;
            Ok(())
        }
        Command::Profiles => {
            for n in BUNDLED_NAMES {
                writeln!(out, "bundled:{n}")?;
            }
            Ok(())
        }
    }
}

fn emit(dest: &OutArgs, out: &mut dyn Write, text: &str) -> Result<()> {
    match &dest.out {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

struct Loaded {
    doc: ProfileDocument,
    scenario: Scenario,
}

fn load(a: &ProfileArgs) -> Result<Loaded> {
    let mut doc = load_profile(&a.profile)?;
    if let Some(nj) = &a.transition_energy_nj {
        doc.model.transition.base_switch_energy = experiments::parse_scaled(nj, 6, "--transition-energy-nj")?;
    }
    let scenario = doc.scenario()?;
    Ok(Loaded { doc, scenario })
}

fn deadline(l: &Loaded, rate: &str) -> Result<DeadlineSpec> {
    let rate = if rate.trim() == "max" {
        experiments::max_nominal_rate(&l.scenario)?
    } else {
        rate.parse::<Rate>()?
    };
    l.doc.deadline_for_rate(rate)
}

fn options(s: &SolverArgs) -> SolveOptions {
    SolveOptions {
        solver: s.solver.into(),
        prune: !s.no_prune,
    }
}

fn fixed_rails(s: &SolverArgs, scenario: &Scenario) -> Result<Option<RailSet>> {
    let Some(mvs) = &s.rail_set else { return Ok(None) };
    let r = RailSet::from_millivolts(mvs)?;
    r.validate(&scenario.model.menu, usize::MAX)?;
    Ok(Some(r))
}

fn seconds(t: Instant) -> String {
    format!("{:.3}", t.elapsed().as_secs_f64())
}

fn cmd_solve(a: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let l = load(&a.profile)?;
    let d = deadline(&l, &a.rate_fps)?;
    let opts = options(&a.solver);
    let start = Instant::now();
    let (rails, schedule) = match fixed_rails(&a.solver, &l.scenario)? {
        Some(r) => {
            if max_voltage_latency(&l.scenario, &r)? > d.t_max {
                return Err(Error::NoFeasibleRailSet {
                    min_latency: max_voltage_latency(&l.scenario, &r)?,
                    t_max: d.t_max,
                });
            }
            let s = solve_rail_set(&l.scenario, &r, &d, opts)?;
            (r, s)
        }
        None => optimize_rails(&l.scenario, &d, a.solver.rails, opts)?,
    };
    let total = start.elapsed();

    // statistics of the inner solve on the chosen rail set
    let g = LayeredStateGraph::build(&l.scenario, &rails, opts.prune)?;
    let stats = match opts.solver {
        SolverChoice::LambdaDp => {
            let r = solve_lambda_search(&g, &d)?.1;
            let lambda = r.chosen_lambda.map_or_else(|| "-".into(), |x| x.to_string());
            format!("lambda-dp: {} DP calls, chosen lambda {lambda} fJ/ps", r.dp_calls)
        }
        SolverChoice::Jump => {
            let r = marginal_utility_jump_search(&g, &d)?.1;
            format!(
                "jump: {} DP calls, {} upgrades, {} jump points",
                r.dp_calls,
                r.upgrades,
                r.jump_points.len()
            )
        }
        SolverChoice::Oracle => format!("oracle: {} labels", exact_oracle(&g, &d)?.labels),
    };

    let table = emit_schedule_table(&l.scenario, &schedule, &d);
    emit(&a.out, out, &table.to_json())?;
    let b = &schedule.breakdown;
    writeln!(
        err,
        "{}: {} layers, t_max {} ps, rail set {}",
        l.doc.workload.name,
        l.scenario.num_layers(),
        d.t_max,
        rails
    )?;
    writeln!(
        err,
        "E_tot {} fJ (op {}, transitions {}, idle {}); T_infer {} ps; {} rail switches, {} wake events",
        schedule.e_tot, b.e_op, b.e_trans, b.e_idle, schedule.t_infer, b.rail_switches, b.wake_events
    )?;
    writeln!(
        err,
        "graph: {} states, {} edges; {stats}",
        g.state_count(),
        g.edge_count()
    )?;
    writeln!(err, "wall time {:.3} s", total.as_secs_f64())?;
    Ok(())
}

fn rate_deadlines(l: &Loaded, rates: &[String]) -> Result<Vec<DeadlineSpec>> {
    rates.iter().map(|r| deadline(l, r)).collect()
}

fn cmd_sweep_rate(a: SweepRateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let l = load(&a.profile)?;
    let deadlines = rate_deadlines(&l, &a.rates_fps)?;
    let policies = a.policies.iter().map(|p| p.parse()).collect::<Result<Vec<Policy>>>()?;
    let start = Instant::now();
    let rows = experiments::sweep_rate(&l.scenario, &deadlines, &policies, a.solver.rails, options(&a.solver))?;
    emit(&a.out, out, &experiments::sweep_csv(&rows)?)?;
    writeln!(err, "{} rows, wall time {} s", rows.len(), seconds(start))?;
    Ok(())
}

fn cmd_sweep_rails(a: SweepRailsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let l = load(&a.profile)?;
    let d = deadline(&l, &a.rate_fps)?;
    let m = l.scenario.model.menu.len();
    if a.min_rails == 0 || a.min_rails > a.max_rails || a.max_rails > m {
        return Err(Error::validation(format!("rail counts must satisfy 1 <= min <= max <= {m}")));
    }
    let modes: &[RailMode] = match a.mode {
        RailModeArg::Evenly => &[RailMode::Evenly],
        RailModeArg::Optimized => &[RailMode::Optimized],
        RailModeArg::Both => &[RailMode::Evenly, RailMode::Optimized],
    };
    let counts: Vec<usize> = (a.min_rails..=a.max_rails).collect();
    let start = Instant::now();
    let rows = experiments::sweep_rails(&l.scenario, &d, &counts, modes, options(&a.solver))?;
    emit(&a.out, out, &experiments::sweep_csv(&rows)?)?;
    writeln!(err, "{} rows, wall time {} s", rows.len(), seconds(start))?;
    Ok(())
}

fn cmd_sweep_transition(a: SweepTransitionArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let l = load(&a.profile)?;
    let d = deadline(&l, &a.rate_fps)?;
    let energies = match &a.energies_nj {
        Some(list) => list
            .iter()
            .map(|e| experiments::parse_scaled(e, 6, "--energies-nj"))
            .collect::<Result<Vec<_>>>()?,
        None => experiments::transition_energy_grid(a.points_per_decade),
    };
    let start = Instant::now();
    let rows = experiments::sweep_transition(&l.scenario, &d, &energies, a.solver.rails, options(&a.solver))?;
    emit(&a.out, out, &experiments::sweep_csv(&rows)?)?;
    writeln!(err, "{} rows, wall time {} s", rows.len(), seconds(start))?;
    Ok(())
}

fn cmd_marginal_utility(a: MarginalUtilityArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let l = load(&a.profile)?;
    let d = deadline(&l, &a.rate_fps)?;
    let start = Instant::now();
    let schedule = match fixed_rails(&a.solver, &l.scenario)? {
        Some(r) => solve_rail_set(&l.scenario, &r, &d, options(&a.solver))?,
        None => optimize_rails(&l.scenario, &d, a.solver.rails, options(&a.solver))?.1,
    };
    let rows = experiments::marginal_utility_table(&l.scenario, &schedule)?;
    emit(&a.out, out, &experiments::to_csv(&rows)?)?;
    writeln!(err, "{} layers, wall time {} s", rows.len(), seconds(start))?;
    Ok(())
}

fn cmd_validate(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if a.layers == 0 || a.layers > 8 {
        return Err(Error::validation("validate instances need 1..=8 layers"));
    }
    let cfg = experiments::validation_config(a.layers, a.trap_rate_ppm);
    let start = Instant::now();
    let seeds: Vec<u64> = (a.seed..a.seed + a.instances).collect();
    let rows = {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&s| experiments::validation_row(s, &cfg, 50_000 + (s % 10) * 50_000))
            .collect::<Result<Vec<_>>>()?
    };
    emit(&a.out, out, &experiments::to_csv(&rows)?)?;
    if !rows.is_empty() {
        let n = rows.len() as u64;
        let mean = rows.iter().map(|r| r.lambda_gap_ppm).sum::<u64>() / n;
        let max = rows.iter().map(|r| r.lambda_gap_ppm).max().unwrap_or(0);
        let lossless = rows.iter().filter(|r| r.prune_lossless).count();
        writeln!(
            err,
            "{n} instances: lambda-DP gap mean {mean} ppm, max {max} ppm; pruning lossless on {lossless}/{n}"
        )?;
    }
    writeln!(err, "wall time {} s", seconds(start))?;
    if a.speedup {
        for name in BUNDLED_NAMES {
            let doc = crate::workload::bundled_profile(name)?;
            let s = doc.scenario()?;
            let mut ratios = Vec::new();
            for fps in [1, 2, 5, 10, 20, 50, 100] {
                let d = doc.deadline_for_rate(Rate::fps(fps)?)?;
                let time = |prune: bool| -> Result<f64> {
                    let t = Instant::now();
                    optimize_rails(&s, &d, 3, SolveOptions { prune, ..SolveOptions::default() })?;
                    Ok(t.elapsed().as_secs_f64())
                };
                let full = time(false)?;
                let pruned = time(true)?;
                ratios.push(full / pruned.max(1e-9));
            }
            ratios.sort_by(f64::total_cmp);
            writeln!(
                err,
                "{name}: pruning speedup median {:.2}x, min {:.2}x over 1-100 FPS",
                ratios[ratios.len() / 2],
                ratios[0]
            )?;
        }
    }
    Ok(())
}
