use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use minsim::config::{LaneSelection, Normalization};
use minsim::costmodel::{CostConfig, FabricKind};
use minsim::harness::{
    run_experiment, AnalyticAxes, ExperimentKind, ExperimentSpec, FigureId, OutputFormat, SweepAxes, Table,
};
use minsim::reliability::unit_grid;
use minsim::traffic::LoadInterpretation;
use minsim::{Result, SimConfig};

/// Wormhole simulator and analytic calculators for multi-lane Delta networks.
#[derive(Debug, Parser)]
#[command(name = "minsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One configuration, replicated.
    Simulate(SimArgs),
    /// Cartesian product of comma-separated parameter lists.
    Sweep(SimArgs),
    /// Path reliability table.
    Reliability(AnalyticArgs),
    /// Complexity and cost table.
    Cost(AnalyticArgs),
    /// Regenerate the data of one figure (fig5 .. fig11).
    Figure {
        id: FigureId,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; defaults to <out-dir>/<name>.<format>, or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "MINSIM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// TOML file with configuration keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    radix: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    lanes: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    lane_capacity: Vec<u32>,
    /// Fixed flits per channel, split evenly across lanes.
    #[arg(long)]
    channel_storage: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    flits: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    load: Vec<f64>,
    #[arg(long)]
    load_as: Option<LoadInterpretation>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    max_cycles: Option<u64>,
    #[arg(long)]
    window: Option<u64>,
    #[arg(long)]
    windows: Option<u32>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    normalization: Option<Normalization>,
    #[arg(long)]
    lane_selection: Option<LaneSelection>,
    #[arg(long)]
    crossbar_speedup: Option<u32>,
    /// Also write one row per replication.
    #[arg(long)]
    per_replication: bool,
    /// Run replications on all cores.
    #[arg(long)]
    parallel: bool,
    /// Write a flit event trace of the first replication here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    radix: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    lanes: Vec<u32>,
    /// Lane reliability grid has this many steps on [0, 1].
    #[arg(long, default_value_t = 100)]
    r_steps: usize,
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<FabricKind>,
    #[arg(long, default_value_t = 4)]
    se_cost_units: u64,
    #[command(flatten)]
    output: OutputArgs,
}

impl SimArgs {
    fn base(&self) -> Result<SimConfig> {
        let mut c = match &self.config {
            Some(path) => SimConfig::from_file(path)?,
            None => SimConfig::default(),
        };
        fn set<T: Copy>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if self.channel_storage.is_some() {
            c.channel_storage = self.channel_storage;
        }
        set(&mut c.load_as, self.load_as);
        set(&mut c.warmup_cycles, self.warmup);
        set(&mut c.max_cycles, self.max_cycles);
        set(&mut c.steady_window, self.window);
        set(&mut c.steady_windows, self.windows);
        set(&mut c.steady_tolerance, self.tolerance);
        set(&mut c.replications, self.replications);
        set(&mut c.seed, self.seed);
        set(&mut c.normalization, self.normalization);
        set(&mut c.lane_selection, self.lane_selection);
        set(&mut c.crossbar_speedup, self.crossbar_speedup);
        Ok(c)
    }

    fn spec(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(kind, self.base()?);
        spec.axes = SweepAxes {
            radix: self.radix.clone(),
            n_lanes: self.lanes.clone(),
            lane_capacity: self.lane_capacity.clone(),
            n_flits: self.flits.clone(),
            offered_load: self.load.clone(),
        };
        spec.per_replication = self.per_replication;
        spec.parallel = self.parallel;
        spec.trace = self.trace.clone();
        Ok(spec)
    }
}

impl AnalyticArgs {
    fn spec(&self, kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(kind, SimConfig::default());
        spec.analytic = AnalyticAxes {
            r_grid: unit_grid(self.r_steps),
            n_lanes: self.lanes.clone(),
            radix: self.radix.clone(),
            kinds: if self.kinds.is_empty() { FabricKind::ALL.to_vec() } else { self.kinds.clone() },
            cost: CostConfig { se_cost_units: self.se_cost_units },
        };
        spec
    }
}

impl OutputArgs {
    fn apply(&self, spec: &mut ExperimentSpec, name: &str) {
        spec.format = self.format;
        spec.output = self
            .out
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|d| d.join(format!("{name}.{}", self.format.extension()))));
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (mut spec, output, name) = match &cli.command {
        Command::Simulate(a) => (a.spec(ExperimentKind::Simulate)?, &a.output, "simulate"),
        Command::Sweep(a) => (a.spec(ExperimentKind::Sweep)?, &a.output, "sweep"),
        Command::Reliability(a) => (a.spec(ExperimentKind::Reliability), &a.output, "reliability"),
        Command::Cost(a) => (a.spec(ExperimentKind::Cost), &a.output, "cost"),
        Command::Figure { id, sim } => (sim.spec(ExperimentKind::Figure(*id))?, &sim.output, id.name()),
    };
    output.apply(&mut spec, name);
    let outcome = run_experiment(&spec)?;
    match &outcome.written {
        Some(path) => {
            println!("{name}: {} rows written to {}", outcome.table.len(), path.display());
            if let Table::Runs(rows) = &outcome.table {
                for r in rows.iter().filter(|r| !r.run_id.contains('-')) {
                    println!(
                        "  radix {:2} lanes {:2} load {:.2}: Th_N {:.4} delay {:.1} steady {}",
                        r.radix, r.n_lanes, r.offered_load, r.normalized_throughput, r.mean_total_delay, r.steady_state_reached
                    );
                }
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            outcome.table.write(spec.format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
