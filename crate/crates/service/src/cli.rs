//! The `droprig` command line.
//!
//! Exit codes: 0 success, 1 rig validation outside the error bound,
//! 2 invalid input or any other failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use droptest::advisor::{builtin_table, recommend};
use droptest::campaign::{campaign_report, CampaignConfig, Outcome, PartSpec, RefineStart, TrialInput};
use droptest::simrig::{critical_damping, simulate_drop, SimConfig};
use droptest::trace::{analyze_trial, ingest_force_trace, ingest_kin_trace, Signature};

use crate::api::{self, AppState, CampaignDoc, TrialReceipt};
use crate::error::{Result, ServiceError};
use crate::ops::{self, RigSettings};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "droprig", version, about = "Drop-test rig validation, campaigns and part advice")]
pub struct Cli {
    /// Rig settings file (`scale_n_per_v`, `error_bound_pct`, `rest_window_s`).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare the measured peak of one drop with the energy-balance estimate.
    ValidateRig(ValidateRig),
    /// Run a breaking-height campaign against a local store.
    #[command(subcommand)]
    Campaign(CampaignCmd),
    /// Simulate one drop and write its force/motion CSVs and truth JSON.
    Simulate(Simulate),
    /// Pick the part variant for a target maximum force.
    Advise {
        /// Largest force the part may transmit, in N.
        #[arg(long)]
        target: f64,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        store: StoreArg,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Store root directory.
    #[arg(long, env = "DROPRIG_STORE", default_value = "droprig-data")]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateRig {
    #[arg(long)]
    pub force: PathBuf,
    #[arg(long)]
    pub kin: PathBuf,
    /// Dropped mass in kg.
    #[arg(long)]
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RefineArg {
    AtBreak,
    BelowBreak,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutcomeArg {
    Intact,
    Broke,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCmd {
    /// Create a campaign and print it as JSON.
    New {
        #[command(flatten)]
        store: StoreArg,
        /// Campaign id; generated when omitted.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        slot_depth_mm: f64,
        #[arg(long)]
        wall_loops: u32,
        #[arg(long)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        start_cm: f64,
        #[arg(long, default_value_t = 1.0)]
        coarse_step_cm: f64,
        #[arg(long, default_value_t = 0.2)]
        fine_step_cm: f64,
        #[arg(long, default_value_t = 3)]
        trials: u32,
        #[arg(long, default_value_t = 50.0)]
        max_height_cm: f64,
        #[arg(long, value_enum, default_value = "at-break")]
        refine_start: RefineArg,
    },
    /// Print the next action as JSON.
    Next {
        #[command(flatten)]
        store: StoreArg,
        id: String,
    },
    /// Record one trial and print its receipt as JSON.
    Record {
        #[command(flatten)]
        store: StoreArg,
        id: String,
        #[arg(long)]
        height: f64,
        #[arg(long, value_enum)]
        outcome: OutcomeArg,
        /// Peak force in N; read from the trace when omitted.
        #[arg(long)]
        peak: Option<f64>,
        /// Force CSV to store with the trial.
        #[arg(long, requires = "kin", conflicts_with = "trace")]
        force: Option<PathBuf>,
        /// Motion CSV to store with the trial.
        #[arg(long, requires = "force")]
        kin: Option<PathBuf>,
        /// Id of a trace already in the store.
        #[arg(long)]
        trace: Option<String>,
        #[arg(long)]
        key: Option<String>,
    },
    /// Print the campaign report.
    Report {
        #[command(flatten)]
        store: StoreArg,
        id: String,
        /// Print the peak-force table as CSV instead of the JSON report.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Debug, Args)]
pub struct Simulate {
    #[arg(long)]
    pub height: f64,
    #[arg(long)]
    pub mass: f64,
    /// Part strength in N; the part never breaks when omitted.
    #[arg(long)]
    pub break_at: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// File name prefix.
    #[arg(long, default_value = "drop")]
    pub stem: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rail efficiency η.
    #[arg(long, default_value_t = 0.85)]
    pub eta: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub stiffness: f64,
    /// Contact damping in N·s/m; 0.4 of critical when omitted.
    #[arg(long)]
    pub damping: Option<f64>,
    /// Load-cell noise in V.
    #[arg(long, default_value_t = 0.002)]
    pub noise: f64,
    #[arg(long, default_value_t = 200.0)]
    pub kin_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    pub record_s: f64,
}

impl Simulate {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            mass_kg: self.mass,
            drop_height_cm: self.height,
            rail_efficiency: self.eta,
            contact_stiffness_n_m: self.stiffness,
            contact_damping_ns_m: self
                .damping
                .unwrap_or_else(|| 0.4 * critical_damping(self.stiffness, self.mass)),
            part_break_threshold_n: self.break_at,
            noise_sigma_v: self.noise,
            seed: self.seed,
            kin_rate_hz: self.kin_rate,
            record_s: self.record_s,
            ..SimConfig::default()
        }
    }
}

/// Parses `args` and runs the command, writing results to `out`.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn main() -> ExitCode {
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr());
    run_from(std::env::args_os(), &mut out, &mut err)
}

fn settings(path: Option<&Path>) -> Result<RigSettings> {
    path.map_or_else(|| Ok(RigSettings::default()), RigSettings::from_file)
}

fn print_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<ExitCode> {
    let settings = settings(cli.config.as_deref())?;
    match cli.command {
        Command::ValidateRig(v) => validate_rig(&v, &settings, out),
        Command::Campaign(cmd) => campaign(cmd, &settings, out).map(|_| ExitCode::SUCCESS),
        Command::Simulate(s) => simulate(&s, out).map(|_| ExitCode::SUCCESS),
        Command::Advise { target } => {
            let r = recommend(target, &builtin_table())?;
            let e = &r.entry;
            writeln!(out, "slot depth   {} mm", e.slot_depth_mm)?;
            writeln!(out, "wall loops   {}", e.wall_loops)?;
            writeln!(out, "breaks at    {:.1} N", e.mean_breaking_force_n)?;
            writeln!(out, "margin       {:.1} N", r.margin_n)?;
            if let Some(note) = &r.note {
                writeln!(out, "note         {note}")?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { store, addr } => {
            let _ = tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .try_init();
            let state = AppState::new(Store::open(store.store)?, settings, builtin_table());
            tokio::runtime::Runtime::new()?.block_on(api::serve(addr, state))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate_rig(v: &ValidateRig, settings: &RigSettings, out: &mut dyn Write) -> Result<ExitCode> {
    let force = ingest_force_trace(File::open(&v.force)?)?;
    let kin = ingest_kin_trace(File::open(&v.kin)?)?;
    let a = analyze_trial(&force, &kin, v.mass, &settings.calibration, &settings.analysis)?;
    let k = &a.kin_summary;
    let pass = a.error_pct.abs() <= settings.error_bound_pct;
    writeln!(out, "mass             {} kg", v.mass)?;
    writeln!(out, "rest position    {:.3} mm", k.p_rest_mm)?;
    writeln!(out, "lowest position  {:.3} mm", k.p_lowest_mm)?;
    writeln!(out, "stopping dist.   {:.3} mm", k.d_stop_mm)?;
    writeln!(out, "max velocity     {:.3} mm/s", k.v_max_mm_s)?;
    writeln!(out, "F_theoretical    {:.1} N", a.f_theoretical_n)?;
    writeln!(out, "F_actual         {:.1} N", a.peak_force_n)?;
    writeln!(out, "error            {:.1} %", a.error_pct)?;
    writeln!(out, "bound            {:.1} %", settings.error_bound_pct)?;
    writeln!(out, "result           {}", if pass { "PASS" } else { "FAIL" })?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn campaign(cmd: CampaignCmd, settings: &RigSettings, out: &mut dyn Write) -> Result<()> {
    match cmd {
        CampaignCmd::New {
            store,
            id,
            slot_depth_mm,
            wall_loops,
            mass,
            start_cm,
            coarse_step_cm,
            fine_step_cm,
            trials,
            max_height_cm,
            refine_start,
        } => {
            let store = Store::open(store.store)?;
            let config = CampaignConfig {
                start_height_cm: start_cm,
                coarse_step_cm,
                fine_step_cm,
                trials_per_height: trials,
                mass_kg: mass,
                max_height_cm,
                refine_start: match refine_start {
                    RefineArg::AtBreak => RefineStart::AtBreak,
                    RefineArg::BelowBreak => RefineStart::BelowBreak,
                },
            };
            let (id, state, _) =
                store.create_campaign(id.as_deref(), PartSpec::new(slot_depth_mm, wall_loops), config)?;
            print_json(out, &CampaignDoc { id, state })
        }
        CampaignCmd::Next { store, id } => {
            let state = Store::open(store.store)?.campaign(&id)?;
            print_json(out, &state.next_action()?)
        }
        CampaignCmd::Record {
            store,
            id,
            height,
            outcome,
            peak,
            force,
            kin,
            trace,
            key,
        } => {
            let store = Store::open(store.store)?;
            let trace = match (force, kin) {
                (Some(f), Some(k)) => {
                    let (trace_id, _) =
                        store.put_trace(&std::fs::read_to_string(f)?, &std::fs::read_to_string(k)?)?;
                    Some(trace_id)
                }
                _ => trace,
            };
            let input = TrialInput {
                height_cm: height,
                outcome: match outcome {
                    OutcomeArg::Intact => Outcome::Intact,
                    OutcomeArg::Broke => Outcome::Broke,
                },
                peak_force_n: peak,
                idempotency_key: key,
                trace_id: trace,
            };
            let input = ops::prepare_trial(&store, settings, &input)?;
            let recorded = store.record_trial(&id, &input)?;
            if !recorded.replayed && recorded.record.trace_id.is_some() {
                ops::analyze_and_attach(&store, settings, &id, recorded.record.seq)?;
            }
            print_json(out, &TrialReceipt::new(&id, &recorded))
        }
        CampaignCmd::Report { store, id, csv } => {
            let state = Store::open(store.store)?.campaign(&id)?;
            if csv {
                write!(out, "{}", state.to_table_csv())?;
                Ok(())
            } else {
                print_json(out, &campaign_report(&state))
            }
        }
    }
}

fn simulate(s: &Simulate, out: &mut dyn Write) -> Result<()> {
    let run = simulate_drop(&s.sim_config())?;
    run.write_files(&s.out, &s.stem)?;
    let signature = droptest::trace::classify_signature(&run.force)?;
    writeln!(out, "{}", run.truth_json())?;
    let verdict = match signature {
        Signature::Broke => "broke",
        Signature::Intact => "intact",
        Signature::Uncertain => "uncertain",
    };
    writeln!(out, "classifier: {verdict}")?;
    Ok(())
}
