use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use evbocs::harness::{run_method, summarize_dir, summary_tsv, trace_tsv, EmitFlags, ExperimentConfig, InstanceSource};
use evbocs::{
    build_total_qubo, evaluate_config, generate_instance, load_instance, save_instance, Acquisition, BetaFinal,
    BocsParams, ChargePoint, EvalParams, GenParams, Prior, RouteOptions, RouteSolver, SaSchedule, StationConfig,
    Strategy,
};

type Instance = evbocs::ProblemInstance<f64>;

#[derive(Parser)]
#[command(name = "evbocs", version, about = "Charging-station placement and battery-constrained EV routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it as JSON.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        battery: BatteryArgs,
        /// Output file (stdout when omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Route one station configuration and print the tour, battery trace and y.
    Route {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Station bits in candidate order, e.g. 0110 (default: no stations).
        #[arg(long)]
        stations: Option<String>,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[command(flatten)]
        toggles: ToggleArgs,
        #[arg(long, default_value_t = 10.0)]
        y_penalty: f64,
        /// Seed of the route annealer.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the explicit QUBO coefficients to this file.
        #[arg(long)]
        dump_qubo: Option<PathBuf>,
    },
    /// Run the Bayesian search over several seeds.
    Bocs(CampaignArgs),
    /// Run random search with the same budget and outputs.
    Baseline(CampaignArgs),
    /// Recompute summary rows from exported history files.
    Report {
        /// Directory holding `*_history.tsv` files.
        dir: PathBuf,
        /// Method prefix to summarize (default: every method present).
        #[arg(long)]
        method: Option<String>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Start location id.
    #[arg(long, default_value_t = 1)]
    start: usize,
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    elevation_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    distance_scale: f64,
}

impl GenArgs {
    fn params(&self) -> GenParams<f64> {
        GenParams {
            n: self.n,
            m: self.m,
            start: self.start,
            elevation_scale: self.elevation_scale,
            distance_scale: self.distance_scale,
            seed: self.instance_seed,
        }
    }
}

#[derive(Args)]
struct BatteryArgs {
    #[arg(long)]
    q_max: Option<f64>,
    #[arg(long)]
    q_charge: Option<f64>,
    #[arg(long)]
    q_standard: Option<f64>,
    /// Initial level (default: q_standard).
    #[arg(long)]
    q_init: Option<f64>,
}

impl BatteryArgs {
    fn any(&self) -> bool {
        self.q_max.is_some() || self.q_charge.is_some() || self.q_standard.is_some() || self.q_init.is_some()
    }

    fn over(&self, base: evbocs::BatteryParams<f64>) -> evbocs::BatteryParams<f64> {
        let q_standard = self.q_standard.unwrap_or(base.q_standard);
        evbocs::BatteryParams {
            q_max: self.q_max.unwrap_or(base.q_max),
            q_charge: self.q_charge.unwrap_or(base.q_charge),
            q_standard,
            q_init: self
                .q_init
                .unwrap_or(if self.q_standard.is_some() { q_standard } else { base.q_init }),
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance JSON file; without it an instance is generated.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    #[command(flatten)]
    battery: BatteryArgs,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        match &self.instance {
            Some(path) => {
                let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
                let mut inst: Instance = load_instance(file).with_context(|| format!("invalid instance {}", path.display()))?;
                if self.battery.any() {
                    inst = inst.with_battery(self.battery.over(*inst.battery()))?;
                }
                Ok(inst)
            }
            None => Ok(generate_instance(&self.gen.params(), self.battery.over(evbocs::BatteryParams::reference()))?),
        }
    }
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    lambda4: Option<f64>,
}

impl WeightArgs {
    fn resolve(&self, inst: &Instance) -> Result<evbocs::PenaltyWeights<f64>> {
        let d = evbocs::PenaltyWeights::defaults_for(inst);
        let w = evbocs::PenaltyWeights {
            lambda1: self.lambda1.unwrap_or(d.lambda1),
            lambda2: self.lambda2.unwrap_or(d.lambda2),
            lambda3: self.lambda3.unwrap_or(d.lambda3),
            lambda4: self.lambda4.unwrap_or(d.lambda4),
        };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Tour,
    Bitflip,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 2000)]
    sweeps: usize,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 0.01)]
    beta_initial: f64,
    /// Final inverse temperature (default: chosen from the model's scale).
    #[arg(long)]
    beta_final: Option<f64>,
    #[arg(long, value_enum, default_value_t = SolverArg::Tour)]
    route_solver: SolverArg,
}

impl ScheduleArgs {
    fn schedule(&self, seed: u64) -> Result<SaSchedule<f64>> {
        let s = SaSchedule {
            sweeps: self.sweeps,
            beta_initial: self.beta_initial,
            beta_final: self.beta_final.map_or(BetaFinal::Auto, BetaFinal::Fixed),
            restarts: self.restarts,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    fn solver(&self) -> RouteSolver {
        match self.route_solver {
            SolverArg::Tour => RouteSolver::Tour,
            SolverArg::Bitflip => RouteSolver::BitFlip,
        }
    }
}

#[derive(Args)]
struct ToggleArgs {
    /// Require the tour to return to the start.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    close_tour: bool,
    /// Also check the level produced by the final move.
    #[arg(long)]
    check_final: bool,
    /// Apply station charge on arrival instead of departure.
    #[arg(long)]
    charge_at_arrival: bool,
}

impl ToggleArgs {
    fn eval_params(&self, y_penalty: f64, solver: RouteSolver) -> Result<EvalParams<f64>> {
        if !(y_penalty >= 0.0) {
            bail!("y_penalty must be non-negative");
        }
        Ok(EvalParams {
            y_penalty,
            check_final: self.check_final,
            route: RouteOptions {
                close_tour: self.close_tour,
                charge_point: if self.charge_at_arrival {
                    ChargePoint::Arrival
                } else {
                    ChargePoint::Departure
                },
            },
            solver,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Horseshoe,
    Ridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum AcquisitionArg {
    Exhaustive,
    Sa,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    toggles: ToggleArgs,
    #[arg(long, default_value_t = 300)]
    n_search: usize,
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    #[arg(long, default_value_t = 10.0)]
    y_penalty: f64,
    #[arg(long, value_enum, default_value_t = PriorArg::Horseshoe)]
    prior: PriorArg,
    #[arg(long, default_value_t = 300)]
    gibbs_steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    ridge_precision: f64,
    #[arg(long, value_enum, default_value_t = AcquisitionArg::Exhaustive)]
    acquisition: AcquisitionArg,
    /// Per-station cost added to the surrogate during acquisition.
    #[arg(long, default_value_t = 0.0)]
    station_cost: f64,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: Vec<u64>,
    /// Output directory for history, trace and summary tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_history: bool,
    #[arg(long)]
    no_traces: bool,
    #[arg(long)]
    no_summary: bool,
}

impl CampaignArgs {
    fn config(&self) -> Result<ExperimentConfig<f64>> {
        let inst = self.instance.load()?;
        let weights = self.weights.resolve(&inst)?;
        let prior = match self.prior {
            PriorArg::Horseshoe => Prior::Horseshoe {
                gibbs_steps: self.gibbs_steps,
            },
            PriorArg::Ridge => Prior::Ridge {
                precision: self.ridge_precision,
                a0: 1.0,
                b0: 1.0,
            },
        };
        let params = BocsParams {
            n_search: self.n_search,
            n_init: self.n_init,
            prior,
            acquisition: match self.acquisition {
                AcquisitionArg::Exhaustive => Acquisition::Exhaustive,
                AcquisitionArg::Sa => Acquisition::Sa,
            },
            station_cost: self.station_cost,
            eval: self.toggles.eval_params(self.y_penalty, self.schedule.solver())?,
            ..BocsParams::default()
        };
        Ok(ExperimentConfig {
            instance: InstanceSource::Given(inst),
            params,
            weights: Some(weights),
            schedule: self.schedule.schedule(0)?,
            seeds: self.seeds.clone(),
            output_dir: self.out.clone(),
            emit: EmitFlags {
                history: !self.no_history,
                traces: !self.no_traces,
                summary: !self.no_summary,
            },
        })
    }
}

fn campaign(args: &CampaignArgs, method: Strategy) -> Result<()> {
    let cfg = args.config()?;
    let report = run_method(&cfg, method)?;
    let name = evbocs::harness::method_name(method);
    let mut out = io::stdout().lock();
    out.write_all(summary_tsv(name, &report.summary()).as_bytes())?;
    if let Some(dir) = &cfg.output_dir {
        // Files were written by run_method; report where.
        writeln!(out, "# tables written to {}", dir.display())?;
    }
    Ok(())
}

fn route(
    instance: &InstanceArgs,
    stations: Option<&str>,
    weights: &WeightArgs,
    schedule: &ScheduleArgs,
    toggles: &ToggleArgs,
    y_penalty: f64,
    seed: u64,
    dump: Option<&PathBuf>,
) -> Result<()> {
    let inst = instance.load()?;
    let s = match stations {
        Some(text) => StationConfig::parse_bitstring(text)?,
        None => StationConfig::empty(inst.m()),
    };
    if s.len() != inst.m() {
        bail!("--stations has {} bits but the instance has {} candidates", s.len(), inst.m());
    }
    let w = weights.resolve(&inst)?;
    let params = toggles.eval_params(y_penalty, schedule.solver())?;
    if let Some(path) = dump {
        let q = build_total_qubo(&inst, &s, &w, &params.route)?;
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        q.write_dump(BufWriter::new(file))?;
    }
    let eval = evaluate_config(&inst, &s, &w, &schedule.schedule(seed)?, &params)?;
    let mut out = io::stdout().lock();
    writeln!(out, "stations\t{s}")?;
    match &eval.tour {
        Some(t) => writeln!(out, "tour\t{t}")?,
        None => writeln!(out, "tour\tnone (no restart decoded)")?,
    }
    writeln!(out, "a\t{}\nb\t{}\ny\t{}\nfeasible\t{}", eval.a, eval.b, eval.y, eval.feasible as u8)?;
    if let Some(e) = eval.soft_energy {
        writeln!(out, "soft_energy\t{e}")?;
    }
    if let Some(trace) = &eval.trace {
        writeln!(out)?;
        out.write_all(trace_tsv(trace, params.check_final).as_bytes())?;
    }
    Ok(())
}

fn report(dir: &Path, method: Option<&str>) -> Result<()> {
    let methods: Vec<&str> = match method {
        Some(m) => vec![m],
        None => ["bocs", "random"]
            .into_iter()
            .filter(|m| evbocs::harness::history_files(dir, m).is_ok_and(|f| !f.is_empty()))
            .collect(),
    };
    if methods.is_empty() {
        bail!("no history files in {}", dir.display());
    }
    let mut out = io::stdout().lock();
    for (k, m) in methods.iter().enumerate() {
        let summary = summarize_dir::<f64>(dir, m)?;
        let table = summary_tsv(m, &summary);
        // One header for all rows.
        let text = if k == 0 { table.as_str() } else { table.split_once('\n').map_or("", |(_, row)| row) };
        out.write_all(text.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate { gen, battery, out } => {
            let inst: Instance = generate_instance(&gen.params(), battery.over(evbocs::BatteryParams::reference()))?;
            match out {
                Some(path) => {
                    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
                    save_instance(&inst, BufWriter::new(file))?;
                }
                None => save_instance(&inst, io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Route {
            instance,
            stations,
            weights,
            schedule,
            toggles,
            y_penalty,
            seed,
            dump_qubo,
        } => route(
            instance,
            stations.as_deref(),
            weights,
            schedule,
            toggles,
            *y_penalty,
            *seed,
            dump_qubo.as_ref(),
        ),
        Command::Bocs(args) => campaign(args, Strategy::Bocs),
        Command::Baseline(args) => campaign(args, Strategy::Random),
        Command::Report { dir, method } => report(dir, method.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
