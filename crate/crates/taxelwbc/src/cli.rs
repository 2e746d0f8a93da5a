//! `taxelwbc run | calibrate | replay | serve`.
//!
//! Exit codes: 0 ok, 2 configuration or input error, 3 simulation
//! divergence, 1 anything else (I/O, port binding).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use taxelwbc_core::calib::{material_report, select_material, MaterialReport};
use taxelwbc_core::control::ImpedanceGains;
use taxelwbc_core::sim::{run_scenario, ControllerKind, Plant, SimError, SimLog};

use crate::bundled::{self, CONFIG_DIR_ENV};
use crate::config::{self, ConfigError, LoadedScenario};
use crate::logs;
use crate::report::{CalibrationReport, RunReport};
use crate::serve::{self, ServeOptions, SessionSetup};
use crate::sweeps;

#[derive(Debug, Parser)]
#[command(
    name = "taxelwbc",
    version,
    about = "Whole-body control with a tactile base: simulate, calibrate, replay, serve"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write CSV, JSON-lines and summary files.
    Run(RunArgs),
    /// Fit the taxel material sweeps and pick the dielectric.
    Calibrate(CalibrateArgs),
    /// Recompute the run summary from a stored CSV log.
    Replay(ReplayArgs),
    /// Host a live session on a WebSocket.
    Serve(ServeArgs),
}

/// Robot, layout, gains and calibration files; bundled defaults otherwise.
#[derive(Debug, Clone, Args)]
pub struct PlantArgs {
    #[arg(long, visible_alias = "model", value_name = "TOML")]
    pub robot: Option<PathBuf>,
    #[arg(long, value_name = "TOML")]
    pub layout: Option<PathBuf>,
    #[arg(long, value_name = "TOML")]
    pub gains: Option<PathBuf>,
    #[arg(long, value_name = "TOML")]
    pub calibration: Option<PathBuf>,
    /// Extra directory searched for `<name>.toml` scenarios.
    #[arg(long, env = CONFIG_DIR_ENV, value_name = "DIR")]
    pub config_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Bundled name (impedance_demo, follow_me_demo, collision) or a path.
    #[arg(long)]
    pub scenario: String,
    #[command(flatten)]
    pub plant: PlantArgs,
    /// Output directory, `out/<scenario>` by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Sweep CSV files; the bundled material set when omitted.
    pub data: Vec<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `log.csv` written by `run`.
    pub log: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ControllerArg {
    Impedance,
    FollowMe,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Scripted scenario to play in the session; an idle one when omitted.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Controller of the idle session.
    #[arg(long, value_enum, default_value = "impedance")]
    pub controller: ControllerArg,
    #[command(flatten)]
    pub plant: PlantArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 30.0)]
    pub snapshot_hz: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Diverged(SimError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Control { .. } | SimError::Diverged { .. } => CliError::Diverged(e),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn read_optional<T>(
    path: Option<&Path>,
    default: impl FnOnce() -> T,
    load: impl FnOnce(&str, &str) -> Result<T, ConfigError>,
) -> Result<T, ConfigError> {
    match path {
        Some(p) => load(&config::read_file(p)?, &p.display().to_string()),
        None => Ok(default()),
    }
}

pub fn load_plant(args: &PlantArgs) -> Result<(Plant, ImpedanceGains), ConfigError> {
    let model = read_optional(args.robot.as_deref(), bundled::robot, config::load_robot)?;
    let fp = model.footprint();
    let layout =
        read_optional(args.layout.as_deref(), || bundled::layout(&model), |t, s| config::load_layout(t, s, &fp))?;
    let calibration = read_optional(args.calibration.as_deref(), bundled::calibration, config::load_calibration)?;
    let (gains, base) = read_optional(args.gains.as_deref(), bundled::gains, config::load_gains)?;
    Ok((Plant { model, layout, calibration, base }, gains))
}

fn load_scenario(
    spec: &str,
    plant: &Plant,
    args: &PlantArgs,
    seed: Option<u64>,
) -> Result<LoadedScenario, ConfigError> {
    let mut s = bundled::resolve_scenario(spec, args.config_dir.as_deref(), &plant.layout)?;
    if let Some(seed) = seed {
        s.config.seed = seed;
    }
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?,
    ))
}

/// Runs a resolved scenario and writes `log.csv`, `log.jsonl` and
/// `summary.json` into `out`.
pub fn run_to_dir(
    loaded: &LoadedScenario,
    plant: &Plant,
    gains: &ImpedanceGains,
    out: &Path,
) -> Result<(SimLog, RunReport), CliError> {
    let log = run_scenario(&loaded.config, &loaded.scenario, plant, gains)?;
    fs::create_dir_all(out)?;
    let io = |e: logs::LogError| CliError::Io(std::io::Error::other(e.to_string()));
    logs::write_csv(create(&out.join("log.csv"))?, &log).map_err(io)?;
    logs::write_jsonl(create(&out.join("log.jsonl"))?, &log).map_err(io)?;
    let report = RunReport::new(&log.summary());
    let mut w = create(&out.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::other)?;
    writeln!(w)?;
    w.flush()?;
    Ok((log, report))
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (plant, gains) = load_plant(&args.plant)?;
    let loaded = load_scenario(&args.scenario, &plant, &args.plant, args.seed)?;
    let out = args.out.clone().unwrap_or_else(|| Path::new("out").join(&loaded.scenario.name));
    let (_, report) = run_to_dir(&loaded, &plant, &gains, &out)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?);
    } else {
        print!("{}", report.to_text(&loaded.scenario.name));
        println!("logs written to {}", out.display());
    }
    Ok(())
}

/// Material reports for the given sweep files, or the bundled set.
pub fn calibration_reports(files: &[PathBuf]) -> Result<Vec<MaterialReport>, CliError> {
    let groups = if files.is_empty() {
        bundled::sweeps()
    } else {
        let mut all = Vec::new();
        for f in files {
            let file = File::open(f).map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
            all.extend(
                sweeps::read_sweeps(file, &f.display().to_string()).map_err(|e| CliError::Input(e.to_string()))?,
            );
        }
        all
    };
    groups
        .iter()
        .map(|(m, samples)| material_report(m, samples).map_err(|e| CliError::Input(format!("{m}: {e}"))))
        .collect()
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let reports = calibration_reports(&args.data)?;
    let selected = select_material(&reports).map_err(|e| CliError::Input(e.to_string()))?;
    let report = CalibrationReport::new(&reports, selected);
    let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    if let Some(out) = &args.out {
        let mut w = create(out)?;
        writeln!(w, "{json}")?;
        w.flush()?;
    }
    if args.json {
        println!("{json}");
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn cmd_replay(args: &ReplayArgs) -> Result<(), CliError> {
    let file = File::open(&args.log).map_err(|e| CliError::Input(format!("{}: {e}", args.log.display())))?;
    let log = logs::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", args.log.display())))?;
    let report = RunReport::new(&log.summary());
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?);
    } else {
        print!("{}", report.to_text(&args.log.display().to_string()));
    }
    Ok(())
}

fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    if !(args.rate > 0.0 && args.rate.is_finite()) || !(args.snapshot_hz > 0.0 && args.snapshot_hz.is_finite()) {
        return Err(CliError::Input("--rate and --snapshot-hz must be positive".into()));
    }
    let (plant, gains) = load_plant(&args.plant)?;
    let setup = match &args.scenario {
        Some(spec) => {
            let loaded = load_scenario(spec, &plant, &args.plant, args.seed)?;
            SessionSetup { plant, gains, config: loaded.config, scenario: loaded.scenario }
        }
        None => {
            let kind = match args.controller {
                ControllerArg::Impedance => ControllerKind::Impedance,
                ControllerArg::FollowMe => ControllerKind::FollowMe,
            };
            SessionSetup::idle(plant, gains, kind, args.seed.unwrap_or(0))
        }
    };
    let opts = ServeOptions { rate: args.rate, snapshot_hz: args.snapshot_hz };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve::serve(SocketAddr::new(args.host, args.port), setup, opts))?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
