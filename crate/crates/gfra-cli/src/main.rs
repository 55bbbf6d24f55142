//! `gfra` — grant-free RA with massive MIMO from the command line.
//!
//! Subcommands: `analytic` (closed-form point query), `simulate` (Monte
//! Carlo campaign), `optimize` (SE-maximizing preamble length), and the
//! sweep generators `fig4`/`fig5`/`fig6` writing CSV plus a JSON provenance
//! sidecar. Exit codes: 0 success, 1 validation error, 2 runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use gfra::analytic;
use gfra::experiments::{
    run_fig4_multi, run_fig5, run_fig6, write_fig4_csv, write_fig5_csv, write_fig6_csv, Policy,
    Sidecar, SweepAxis, SweepError, SweepSpec,
};
use gfra::montecarlo::{run_campaign_with, CampaignOptions, EstimationPath, NoisePowerModel};
use gfra::optimizer::optimize_grant_free;
use gfra::{PreambleLength, SystemConfig};

#[derive(Debug)]
enum CliError {
    /// Bad flags or out-of-range values; exit code 1.
    Validation(String),
    /// I/O or solver failure after validation; exit code 2.
    Runtime(String),
}

impl CliError {
    fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }
    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Io(_) => CliError::runtime(e),
            SweepError::Optimizer(gfra::optimizer::OptimizerError::NonFiniteObjective { .. }) => {
                CliError::runtime(e)
            }
            _ => CliError::validation(e),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gfra",
    version,
    about = "Grant-free random access with massive MIMO: closed-form spectral efficiency, \
             link-level Monte Carlo, and SE-maximizing preamble length"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form model at one operating point (JSON to stdout)
    Analytic(AnalyticArgs),
    /// Run a Monte Carlo campaign at one operating point
    Simulate(SimulateArgs),
    /// Compute the SE-maximizing preamble length (grant-free and granted)
    Optimize(OptimizeArgs),
    /// Sweep ASE versus preamble length per SNR (analytic + simulated) to CSV
    Fig4(Fig4Args),
    /// Sweep optimal preamble lengths versus SNR for several antenna counts
    Fig5(Fig5Args),
    /// Sweep ASE versus antenna count under preamble-length policies
    Fig6(Fig6Args),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// BS antenna count M
    #[arg(long, value_name = "COUNT")]
    m: Option<u32>,
    /// Simultaneous RA UEs per channel N
    #[arg(long, value_name = "COUNT")]
    n: Option<u32>,
    /// Packet length L (symbols)
    #[arg(long, value_name = "SYMBOLS")]
    l: Option<u32>,
    /// Uplink SNR (dB)
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    snr_db: Option<f64>,
}

impl ScenarioArgs {
    /// Applies CLI overrides on top of `base` (a config-file value or the
    /// built-in default) and validates.
    fn resolve(&self, base: SystemConfig) -> Result<SystemConfig, CliError> {
        SystemConfig::new(
            self.m.unwrap_or(base.m_antennas),
            self.n.unwrap_or(base.n_ues),
            self.l.unwrap_or(base.packet_len),
            self.snr_db.unwrap_or(base.snr_db),
        )
        .map_err(CliError::validation)
    }
}

/// Scenario flags for sweeps where the axis (and so some scalar) comes from
/// the sweep grid instead.
#[derive(Args, Clone)]
struct PartialScenarioArgs {
    /// BS antenna count M (ignored by sweeps over M)
    #[arg(long, value_name = "COUNT")]
    m: Option<u32>,
    /// Simultaneous RA UEs per channel N
    #[arg(long, value_name = "COUNT")]
    n: Option<u32>,
    /// Packet length L (symbols)
    #[arg(long, value_name = "SYMBOLS")]
    l: Option<u32>,
}

impl PartialScenarioArgs {
    fn resolve(&self, base: SystemConfig) -> Result<SystemConfig, CliError> {
        SystemConfig::new(
            self.m.unwrap_or(base.m_antennas),
            self.n.unwrap_or(base.n_ues),
            self.l.unwrap_or(base.packet_len),
            base.snr_db,
        )
        .map_err(CliError::validation)
    }
}

fn default_config() -> SystemConfig {
    SystemConfig { m_antennas: 100, n_ues: 10, packet_len: 200, snr_db: 0.0 }
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Preamble length P (symbols; may be fractional)
    #[arg(long, value_name = "SYMBOLS")]
    p: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Preamble length P (symbols; integer)
    #[arg(long, value_name = "SYMBOLS")]
    p: u32,
    /// Monte Carlo trials
    #[arg(long, default_value_t = 10_000, value_name = "COUNT")]
    trials: u64,
    /// Campaign master seed
    #[arg(long, default_value_t = 1, value_name = "SEED")]
    seed: u64,
    /// Worker threads (0 = all cores); never changes the results
    #[arg(long, default_value_t = 0, value_name = "THREADS")]
    parallelism: usize,
    /// Output format: json or csv
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    /// Write to a file instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Verification path: materialize DFT preambles instead of the
    /// equivalent synthesized estimation noise (slow)
    #[arg(long)]
    explicit_preambles: bool,
    /// Verification path: use one drawn noise vector in the SINR denominator
    /// instead of the block-averaged noise power
    #[arg(long)]
    realized_noise: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Write the JSON report to a file instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCommonArgs {
    /// JSON sweep spec; explicit flags override its fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Campaign master seed
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes the results
    #[arg(long, default_value_t = 0, value_name = "THREADS")]
    parallelism: usize,
    /// Emit a gnuplot script stub next to the CSV
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct Fig4Args {
    #[command(flatten)]
    common: SweepCommonArgs,
    #[command(flatten)]
    scenario: PartialScenarioArgs,
    /// SNR values (dB), comma-separated, one curve each
    #[arg(long, value_name = "DB,DB,...", value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    /// Preamble grid (symbols): "start:end:step" or comma list
    #[arg(long, value_name = "GRID")]
    p_grid: Option<String>,
    /// Monte Carlo trials per grid point (0 = analytic only)
    #[arg(long, value_name = "COUNT")]
    trials: Option<u64>,
    /// Output CSV path
    #[arg(long, default_value = "fig4.csv", value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct Fig5Args {
    #[command(flatten)]
    common: SweepCommonArgs,
    #[command(flatten)]
    scenario: PartialScenarioArgs,
    /// SNR grid (dB): "start:end:step" or comma list
    #[arg(long, default_value = "-20:10:5", value_name = "GRID")]
    snr_grid: String,
    /// Antenna counts, comma-separated
    #[arg(long, value_name = "M,M,...", value_delimiter = ',', default_value = "100,200,300,400,500")]
    m_list: Vec<u32>,
    /// Output CSV path
    #[arg(long, default_value = "fig5.csv", value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct Fig6Args {
    #[command(flatten)]
    common: SweepCommonArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Antenna grid: "start:end:step" or comma list
    #[arg(long, default_value = "100:500:100", value_name = "GRID")]
    m_grid: String,
    /// Policies: comma list of p_star, p1, p_hat_star, half_l, fixed:<P>
    #[arg(long, default_value = "p_star,p1,p_hat_star,half_l", value_name = "LIST")]
    policies: String,
    /// Output CSV path
    #[arg(long, default_value = "fig6.csv", value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analytic(args) => cmd_analytic(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Fig4(args) => cmd_fig4(args),
        Command::Fig5(args) => cmd_fig5(args),
        Command::Fig6(args) => cmd_fig6(args),
    }
}

fn cmd_analytic(args: AnalyticArgs) -> Result<(), CliError> {
    let cfg = args.scenario.resolve(default_config())?;
    let p = PreambleLength::new(args.p, &cfg).map_err(CliError::validation)?;
    let sinr = analytic::asymptotic_sinr(&cfg, p);
    let out = serde_json::json!({
        "m": cfg.m_antennas,
        "n": cfg.n_ues,
        "l": cfg.packet_len,
        "snr_db": cfg.snr_db,
        "p": p.get(),
        "collision_free_prob": analytic::collision_free_prob(&cfg, p),
        "sinr": sinr,
        "sinr_db": 10.0 * sinr.log10(),
        "se": analytic::spectral_efficiency(&cfg, p),
        "ase": analytic::average_se(&cfg, p),
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = args.scenario.resolve(default_config())?;
    let mut opts = CampaignOptions::new(cfg, args.p, args.trials, args.seed);
    opts.parallelism = args.parallelism;
    if args.explicit_preambles {
        opts.estimation = EstimationPath::ExplicitPreambles;
    }
    if args.realized_noise {
        opts.noise_model = NoisePowerModel::SingleRealization;
    }
    let summary = run_campaign_with(&opts).map_err(CliError::validation)?;
    let text = match args.format.as_str() {
        "csv" => format!(
            "{}\n{}\n",
            gfra::montecarlo::CampaignSummary::CSV_HEADER,
            summary.to_csv_row()
        ),
        _ => format!("{}\n", summary.to_wire_json()),
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_optimize(args: OptimizeArgs) -> Result<(), CliError> {
    let cfg = args.scenario.resolve(default_config())?;
    let report = optimize_grant_free(&cfg).map_err(CliError::validation)?;
    if !report.converged {
        eprintln!(
            "warning: solver hit the iteration budget; best bracketed estimate reported (residual {})",
            report.residual
        );
    }
    emit(args.out.as_deref(), &format!("{}\n", report.to_json()))
}

fn cmd_fig4(args: Fig4Args) -> Result<(), CliError> {
    let mut spec = load_spec(&args.common, SweepAxis::PreambleLen)?;
    spec.base = args.scenario.resolve(spec.base)?;
    if let Some(grid) = &args.p_grid {
        spec.grid = parse_grid(grid)?;
    } else if spec.grid.is_empty() {
        spec.grid = parse_grid("4:200:4")?;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    let snrs = if args.snr_db.is_empty() { vec![-20.0, -10.0, 0.0, 10.0] } else { args.snr_db.clone() };

    let curves = run_fig4_multi(&spec, &snrs, args.common.parallelism)?;
    let mut buf = Vec::new();
    write_fig4_csv(&mut buf, &curves)?;
    write_output(&args.out, &buf)?;

    let mut sidecar = Sidecar::new("fig4", &spec);
    sidecar.snr_values_db = Some(snrs);
    write_sidecar(&args.out, &sidecar)?;
    if args.common.gnuplot {
        write_gnuplot_stub(&args.out, "fig4", "p", "average SE (bits/s/Hz)")?;
    }
    Ok(())
}

fn cmd_fig5(args: Fig5Args) -> Result<(), CliError> {
    let mut spec = load_spec(&args.common, SweepAxis::SnrDb)?;
    spec.base = args.scenario.resolve(spec.base)?;
    if spec.grid.is_empty() || args.snr_grid != "-20:10:5" {
        spec.grid = parse_grid(&args.snr_grid)?;
    }
    if args.m_list.is_empty() {
        return Err(CliError::Validation("fig5 needs at least one antenna count".into()));
    }
    let rows = run_fig5(&spec, &args.m_list, args.common.parallelism)?;
    if rows.iter().any(|r| !r.converged) {
        eprintln!("warning: some cells did not converge; see the converged column");
    }
    let mut buf = Vec::new();
    write_fig5_csv(&mut buf, &rows)?;
    write_output(&args.out, &buf)?;

    let mut sidecar = Sidecar::new("fig5", &spec);
    sidecar.m_values = Some(args.m_list.clone());
    write_sidecar(&args.out, &sidecar)?;
    if args.common.gnuplot {
        write_gnuplot_stub(&args.out, "fig5", "snr_db", "optimal preamble length (symbols)")?;
    }
    Ok(())
}

fn cmd_fig6(args: Fig6Args) -> Result<(), CliError> {
    let mut spec = load_spec(&args.common, SweepAxis::MAntennas)?;
    spec.base = args.scenario.resolve(spec.base)?;
    if spec.grid.is_empty() || args.m_grid != "100:500:100" {
        spec.grid = parse_grid(&args.m_grid)?;
    }
    if spec.policies.is_empty() || args.policies != "p_star,p1,p_hat_star,half_l" {
        spec.policies = parse_policies(&args.policies)?;
    }
    let rows = run_fig6(&spec, args.common.parallelism)?;
    let mut buf = Vec::new();
    write_fig6_csv(&mut buf, &rows)?;
    write_output(&args.out, &buf)?;
    write_sidecar(&args.out, &Sidecar::new("fig6", &spec))?;
    if args.common.gnuplot {
        write_gnuplot_stub(&args.out, "fig6", "m", "average SE (bits/s/Hz)")?;
    }
    Ok(())
}

/// Config-file spec (if any) overlaid with scenario/seed flags; the grid
/// stays empty here when neither source provides one, so callers can apply
/// their per-figure default.
fn load_spec(common: &SweepCommonArgs, vary: SweepAxis) -> Result<SweepSpec, CliError> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
            let spec: SweepSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("parsing {}: {e}", path.display())))?;
            spec
        }
        None => SweepSpec {
            base: default_config(),
            vary,
            grid: vec![],
            policies: vec![],
            trials: 0,
            master_seed: 1,
        },
    };
    spec.vary = vary;
    spec.base.validate().map_err(CliError::validation)?;
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    Ok(spec)
}

/// "start:end:step" (inclusive) or a comma-separated list.
fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Validation(msg);
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("grid '{text}' must be start:end:step")));
        }
        let start: f64 = parts[0].parse().map_err(|_| bad(format!("bad grid start '{}'", parts[0])))?;
        let end: f64 = parts[1].parse().map_err(|_| bad(format!("bad grid end '{}'", parts[1])))?;
        let step: f64 = parts[2].parse().map_err(|_| bad(format!("bad grid step '{}'", parts[2])))?;
        if !(step > 0.0 && end >= start) {
            return Err(bad(format!("grid '{text}' needs end >= start and step > 0")));
        }
        let count = ((end - start) / step).round() as usize;
        let mut grid: Vec<f64> = (0..=count).map(|k| start + k as f64 * step).filter(|v| *v <= end + 1e-9).collect();
        if grid.is_empty() {
            grid.push(start);
        }
        Ok(grid)
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("bad grid value '{s}'"))))
            .collect()
    }
}

fn parse_policies(text: &str) -> Result<Vec<Policy>, CliError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s {
                "p_star" => Ok(Policy::PStar),
                "p1" => Ok(Policy::P1),
                "p_hat_star" => Ok(Policy::PHatStar),
                "half_l" => Ok(Policy::HalfL),
                _ => match s.strip_prefix("fixed:") {
                    Some(v) => v
                        .parse::<u32>()
                        .map(Policy::Fixed)
                        .map_err(|_| CliError::Validation(format!("bad fixed policy '{s}'"))),
                    None => Err(CliError::Validation(format!(
                        "unknown policy '{s}' (expected p_star, p1, p_hat_star, half_l, fixed:<P>)"
                    ))),
                },
            }
        })
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_sidecar(csv_path: &Path, sidecar: &Sidecar<'_>) -> Result<(), CliError> {
    let path = csv_path.with_extension("meta.json");
    fs::write(&path, format!("{}\n", sidecar.to_json()))
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_gnuplot_stub(csv_path: &Path, figure: &str, x: &str, ylabel: &str) -> Result<(), CliError> {
    let path = csv_path.with_extension("gp");
    let csv = csv_path.file_name().and_then(|s| s.to_str()).unwrap_or("data.csv");
    let stub = format!(
        "# gnuplot stub for {figure}; adjust the using clause per column order\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{x}'\n\
         set ylabel '{ylabel}'\n\
         plot '{csv}' using 2:3 with linespoints\n"
    );
    fs::write(&path, stub).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}
